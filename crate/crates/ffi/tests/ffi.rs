use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use miattn::descriptors::{compute_descriptors, fit_scaler, DESCRIPTOR_COUNT};
use miattn::featurize::featurize;
use miattn::model::{save_model, ModelConfig, MultiInputModel};
use miattn::train::{predict, prepare_record, Record};
use miattn_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> Option<String> {
    let p = miattn_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn fixture_model(dir: &Path) -> (PathBuf, MultiInputModel) {
    let train = ["CCO", "c1ccncc1", "CC(=O)N", "c1ccccc1Cl", "C1CCNCC1", "OCC(F)(F)F"];
    let descs: Vec<_> = train
        .iter()
        .map(|s| compute_descriptors(&miattn::chem::parse_smiles(s).unwrap()))
        .collect();
    let scaler = fit_scaler(&descs).unwrap();
    let mut config = ModelConfig::new(scaler.kept_count(), 0.5);
    config.threshold = 0.3;
    let model = MultiInputModel::new(config, scaler, 4).unwrap();
    let path = dir.join("m.miattn");
    save_model(&model, &path).unwrap();
    (path, model)
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(miattn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn featurize_matches_library() {
    let mut buf = vec![f64::NAN; MIATTN_FEATURE_LEN];
    let mut valid = 0usize;
    let s = c("CC(=O)[O-]");
    let st = unsafe { miattn_featurize(s.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut valid) };
    assert_eq!(st, MiattnStatus::Ok);
    assert!(last_error().is_none());
    let (_, m) = featurize("CC(=O)[O-]").unwrap();
    assert_eq!(valid, m.valid_rows);
    assert_eq!(buf, m.data);
}

#[test]
fn featurize_errors() {
    let mut buf = vec![0.0; MIATTN_FEATURE_LEN];
    let s = c("C1CC");
    let st = unsafe { miattn_featurize(s.as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, MiattnStatus::InvalidSmiles);
    assert!(last_error().unwrap().contains("ring"), "{:?}", last_error());

    let s = c("CCO");
    let st = unsafe { miattn_featurize(s.as_ptr(), buf.as_mut_ptr(), 10, ptr::null_mut()) };
    assert_eq!(st, MiattnStatus::BufferTooSmall);
    let st = unsafe { miattn_featurize(ptr::null(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, MiattnStatus::NullArgument);
    let st = unsafe { miattn_featurize(s.as_ptr(), ptr::null_mut(), 0, ptr::null_mut()) };
    assert_eq!(st, MiattnStatus::NullArgument);

    let bad = [0xffu8, 0];
    let st = unsafe { miattn_featurize(bad.as_ptr().cast(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, MiattnStatus::InvalidUtf8);
}

#[test]
fn descriptors_match_library() {
    assert_eq!(miattn_descriptor_count(), DESCRIPTOR_COUNT);
    let mut buf = vec![0.0; DESCRIPTOR_COUNT];
    let s = c("c1ccncc1O");
    assert_eq!(unsafe { miattn_descriptors(s.as_ptr(), buf.as_mut_ptr(), buf.len()) }, MiattnStatus::Ok);
    let want = compute_descriptors(&miattn::chem::parse_smiles("c1ccncc1O").unwrap());
    assert_eq!(buf, want.values);
}

#[test]
fn model_handle_lifecycle() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, model) = fixture_model(tmp.path());
    let p = c(path.to_str().unwrap());
    let mut h: *mut MiattnModel = ptr::null_mut();
    assert_eq!(unsafe { miattn_model_load(p.as_ptr(), &mut h) }, MiattnStatus::Ok);
    assert!(!h.is_null());
    assert_eq!(unsafe { miattn_model_threshold(h) }, 0.3);

    let smiles = "c1ccncc1CCl";
    let s = c(smiles);
    let mut prob = f64::NAN;
    assert_eq!(unsafe { miattn_model_predict(h, s.as_ptr(), &mut prob) }, MiattnStatus::Ok);
    let sample = prepare_record(&Record { id: "x".into(), smiles: smiles.into(), label: 0.0 }).unwrap();
    assert_eq!(prob, predict(&model, &[&sample]).unwrap()[0]);

    let mut w = vec![f64::NAN; MIATTN_MAX_ROWS];
    let mut p2 = f64::NAN;
    let st = unsafe { miattn_model_attention(h, s.as_ptr(), w.as_mut_ptr(), w.len(), &mut p2) };
    assert_eq!(st, MiattnStatus::Ok);
    assert_eq!(p2, prob);
    assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));

    unsafe { miattn_model_free(h) };
    unsafe { miattn_model_free(ptr::null_mut()) };
    assert!(unsafe { miattn_model_threshold(ptr::null()) }.is_nan());
}

#[test]
fn model_load_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut h: *mut MiattnModel = ptr::null_mut();
    let missing = c(tmp.path().join("none.miattn").to_str().unwrap());
    assert_eq!(unsafe { miattn_model_load(missing.as_ptr(), &mut h) }, MiattnStatus::Io);
    assert!(h.is_null());

    let junk = tmp.path().join("junk.miattn");
    std::fs::write(&junk, b"not a model at all").unwrap();
    let junk = c(junk.to_str().unwrap());
    assert_eq!(unsafe { miattn_model_load(junk.as_ptr(), &mut h) }, MiattnStatus::InvalidModel);
    assert!(last_error().unwrap().contains("magic"), "{:?}", last_error());

    let mut prob = 0.0;
    let s = c("CCO");
    assert_eq!(unsafe { miattn_model_predict(ptr::null(), s.as_ptr(), &mut prob) }, MiattnStatus::NullArgument);
}

#[test]
fn c_program_links_against_header() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary> -> target/<profile>
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("libmiattn_ffi.so").exists() && !lib_dir.join("libmiattn_ffi.dylib").exists() {
        eprintln!("skipping: shared library not found in {}", lib_dir.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let out = Command::new(&cc)
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lmiattn_ffi")
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (model, _) = fixture_model(tmp.path());
    let run = Command::new(&exe)
        .arg(&model)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
