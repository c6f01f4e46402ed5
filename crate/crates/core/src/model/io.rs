//! Binary weight container.
//!
//! Layout (little-endian): magic, `u32` format version, `u32` metadata length and a
//! UTF-8 `key=value` metadata block, `u32` tensor count, then per tensor a `u16` name
//! length, the name, `u8` dtype (1 = f64), `u8` rank, `u32` dims and raw values. A CRC32
//! of everything before it closes the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use super::{ModelConfig, ModelError, MultiInputModel};
use crate::descriptors::ScalerParams;
use crate::featurize::VOCABULARY_VERSION;
use crate::nn::Tensor;

pub const MAGIC: &[u8; 8] = b"MIATTN1\0";
pub const FORMAT_VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;
const PROVENANCE_PREFIX: &str = "provenance.";

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn metadata(model: &MultiInputModel) -> String {
    let c = &model.config;
    let s = &model.scaler;
    let keep: Vec<u8> = s.keep.iter().map(|&k| u8::from(k)).collect();
    let mut lines = vec![
        format!("vocabulary={VOCABULARY_VERSION}"),
        format!("descriptor_schema={}", s.schema),
        format!("seed={}", model.seed),
        format!("threshold={}", c.threshold),
        format!("dropout={}", c.dropout),
        format!("max_rows={}", c.max_rows),
        format!("feat_cols={}", c.feat_cols),
        format!("conv_channels={}", join(&c.conv_channels)),
        format!("kernel={}", c.kernel),
        format!("m_dim={}", c.m_dim),
        format!("md_widths={}", join(&c.md_widths)),
        format!("descriptor_width={}", c.descriptor_width),
        format!("scaler.mean={}", join(&s.mean)),
        format!("scaler.std={}", join(&s.std)),
        format!("scaler.keep={}", join(&keep)),
    ];
    for (k, v) in &model.provenance {
        lines.push(format!("{PROVENANCE_PREFIX}{k}={}", v.replace('\n', " ")));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// Every stored tensor by name: parameters, then batch-norm running statistics.
fn named_tensors(model: &MultiInputModel) -> Vec<(String, Tensor)> {
    let mut out: Vec<(String, Tensor)> = model.params().iter().map(|p| (p.name.clone(), p.value.clone())).collect();
    for bn in model.norm_layers() {
        let base = bn.gamma.name.trim_end_matches(".gamma");
        let c = bn.channels();
        out.push((format!("{base}.running_mean"), Tensor::new(&[c], bn.running_mean.clone()).expect("shape")));
        out.push((format!("{base}.running_var"), Tensor::new(&[c], bn.running_var.clone()).expect("shape")));
    }
    out
}

pub fn encode_model(model: &MultiInputModel) -> Result<Vec<u8>, ModelError> {
    if !model.is_finite() {
        return Err(ModelError::InvalidConfig("model has non-finite parameters".into()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let meta = metadata(model);
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(meta.as_bytes());
    let tensors = named_tensors(model);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(DTYPE_F64);
        buf.push(t.shape().len() as u8);
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn save_model(model: &MultiInputModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MultiInputModel, ModelError> {
    decode_model(&std::fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ModelError::Malformed("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("len")))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("len")))
    }
}

fn field<'m>(meta: &'m BTreeMap<String, String>, key: &str) -> Result<&'m str, ModelError> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| ModelError::Malformed(format!("missing metadata key {key}")))
}

fn parse_one<T: FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T, ModelError> {
    let v = field(meta, key)?;
    v.parse().map_err(|_| ModelError::Malformed(format!("bad value for {key}: {v}")))
}

fn parse_list<T: FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<Vec<T>, ModelError> {
    let v = field(meta, key)?;
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|x| x.parse().map_err(|_| ModelError::Malformed(format!("bad value in {key}: {x}"))))
        .collect()
}

fn fixed<const N: usize>(v: Vec<usize>, key: &str) -> Result<[usize; N], ModelError> {
    v.try_into().map_err(|_| ModelError::Malformed(format!("{key} needs {N} values")))
}

pub fn decode_model(bytes: &[u8]) -> Result<MultiInputModel, ModelError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(ModelError::ChecksumMismatch);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("len"));
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionUnsupported(version));
    }
    if bytes.len() < 16 {
        return Err(ModelError::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("len")) {
        return Err(ModelError::ChecksumMismatch);
    }

    let mut rd = Reader { buf: body, pos: 12 };
    let meta_len = rd.u32()? as usize;
    let text = std::str::from_utf8(rd.take(meta_len)?)
        .map_err(|_| ModelError::Malformed("metadata is not UTF-8".into()))?;
    let meta: BTreeMap<String, String> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    let vocab = field(&meta, "vocabulary")?;
    if vocab != VOCABULARY_VERSION {
        return Err(ModelError::Malformed(format!(
            "symbol vocabulary {vocab} does not match {VOCABULARY_VERSION}"
        )));
    }
    let config = ModelConfig {
        max_rows: parse_one(&meta, "max_rows")?,
        feat_cols: parse_one(&meta, "feat_cols")?,
        conv_channels: fixed(parse_list(&meta, "conv_channels")?, "conv_channels")?,
        kernel: parse_one(&meta, "kernel")?,
        m_dim: parse_one(&meta, "m_dim")?,
        md_widths: fixed(parse_list(&meta, "md_widths")?, "md_widths")?,
        descriptor_width: parse_one(&meta, "descriptor_width")?,
        dropout: parse_one(&meta, "dropout")?,
        threshold: parse_one(&meta, "threshold")?,
    };
    let keep: Vec<u8> = parse_list(&meta, "scaler.keep")?;
    let scaler = ScalerParams {
        schema: field(&meta, "descriptor_schema")?.to_string(),
        mean: parse_list(&meta, "scaler.mean")?,
        std: parse_list(&meta, "scaler.std")?,
        keep: keep.iter().map(|&k| k != 0).collect(),
    };
    if scaler.mean.len() != scaler.keep.len() || scaler.std.len() != scaler.keep.len() {
        return Err(ModelError::Malformed("scaler vectors differ in length".into()));
    }
    let mut model = MultiInputModel::new(config, scaler, parse_one(&meta, "seed")?)?;
    model.provenance = meta
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(PROVENANCE_PREFIX).map(|k| (k.to_string(), v.clone())))
        .collect();

    let count = rd.u32()? as usize;
    let mut stored = BTreeMap::new();
    for _ in 0..count {
        let name_len = rd.u16()? as usize;
        let name = String::from_utf8(rd.take(name_len)?.to_vec())
            .map_err(|_| ModelError::Malformed("tensor name is not UTF-8".into()))?;
        let dtype = rd.u8()?;
        if dtype != DTYPE_F64 {
            return Err(ModelError::Malformed(format!("tensor {name}: unsupported dtype {dtype}")));
        }
        let rank = rd.u8()? as usize;
        let dims = (0..rank).map(|_| rd.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let len = len.ok_or_else(|| ModelError::Malformed(format!("tensor {name}: dims overflow")))?;
        let raw = rd.take(len.checked_mul(8).ok_or_else(|| ModelError::Malformed("size overflow".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("len"))).collect();
        stored.insert(name, Tensor::new(&dims, data)?);
    }
    if rd.pos != body.len() {
        return Err(ModelError::Malformed("trailing bytes after tensors".into()));
    }

    let mut take = |name: &str, shape: &[usize]| -> Result<Tensor, ModelError> {
        let t = stored
            .remove(name)
            .ok_or_else(|| ModelError::Malformed(format!("missing tensor {name}")))?;
        if t.shape() != shape {
            return Err(ModelError::Malformed(format!(
                "tensor {name} has shape {:?}, expected {shape:?}",
                t.shape()
            )));
        }
        Ok(t)
    };
    for p in model.params_mut() {
        let shape = p.value.shape().to_vec();
        p.value = take(&p.name, &shape)?;
    }
    for bn in model.norm_layers_mut() {
        let base = bn.gamma.name.trim_end_matches(".gamma").to_string();
        let c = bn.channels();
        bn.running_mean = take(&format!("{base}.running_mean"), &[c])?.data;
        bn.running_var = take(&format!("{base}.running_var"), &[c])?.data;
    }
    if let Some(extra) = stored.keys().next() {
        return Err(ModelError::Malformed(format!("unexpected tensor {extra}")));
    }
    Ok(model)
}
