use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use super::TrainError;
use crate::chem::parse_smiles;
use crate::descriptors::{compute_descriptors, DescriptorVector};
use crate::featurize::featurize_smiles;

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: String,
    pub smiles: String,
    /// 0.0 or 1.0.
    pub label: f64,
}

/// A data row that was read but could not be used.
#[derive(Clone, Debug, PartialEq)]
pub struct Reject {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub rejects: Vec<Reject>,
}

impl Dataset {
    pub fn from_records(records: Vec<Record>) -> Dataset {
        Dataset {
            records,
            rejects: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(positives, negatives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.records.iter().filter(|r| r.label == 1.0).count();
        (pos, self.records.len() - pos)
    }

    /// Class balance as `"pos:neg ≈ 1:r"`, e.g. `"506:2986 ≈ 1:5.9"`.
    pub fn class_ratio_report(&self) -> String {
        let (pos, neg) = self.class_counts();
        if pos == 0 {
            return format!("{pos}:{neg} (no positives)");
        }
        format!("{pos}:{neg} ≈ 1:{:.1}", neg as f64 / pos as f64)
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.label).collect()
    }
}

fn parse_label(s: &str) -> Option<f64> {
    match s.trim() {
        "0" | "0.0" => Some(0.0),
        "1" | "1.0" => Some(1.0),
        _ => None,
    }
}

/// Reads an `id,smiles,label` CSV (columns located by header name, any order).
///
/// Malformed labels and duplicate ids are hard errors. Rows whose SMILES cannot be
/// parsed or featurized are kept out of the dataset and listed in `rejects`.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset, TrainError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file)
}

pub fn read_dataset<R: std::io::Read>(input: R) -> Result<Dataset, TrainError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| TrainError::MissingColumn(name.to_string()))
    };
    let (ci, cs, cl) = (col("id")?, col("smiles")?, col("label")?);
    let mut ds = Dataset::default();
    let mut candidates = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("").to_string();
        let (id, smiles, label) = (field(ci), field(cs), field(cl));
        let label = parse_label(&label).ok_or_else(|| TrainError::BadLabel { row, value: label.clone() })?;
        if !seen.insert(id.clone()) {
            return Err(TrainError::DuplicateId { row, id });
        }
        if smiles.is_empty() {
            ds.rejects.push(Reject {
                row,
                id,
                reason: "empty SMILES".into(),
            });
            continue;
        }
        candidates.push((row, Record { id, smiles, label }));
    }
    // featurizability is checked here so training never meets an unusable row
    let checks: Vec<Option<String>> = candidates
        .par_iter()
        .map(|(_, r)| match parse_smiles(&r.smiles) {
            Err(e) => Some(e.to_string()),
            Ok(g) => featurize_smiles(&r.smiles, &g).err().map(|e| e.to_string()),
        })
        .collect();
    for ((row, r), err) in candidates.into_iter().zip(checks) {
        match err {
            None => ds.records.push(r),
            Some(reason) => ds.rejects.push(Reject { row, id: r.id, reason }),
        }
    }
    ds.rejects.sort_by_key(|r| r.row);
    Ok(ds)
}

/// Model-ready inputs for one record.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub smiles: String,
    pub label: f64,
    /// Row-major feature matrix.
    pub features: Vec<f64>,
    pub descriptors: DescriptorVector,
}

/// Featurizes every record (in parallel, order preserved).
pub fn prepare(ds: &Dataset) -> Result<Vec<Sample>, TrainError> {
    ds.records.par_iter().map(prepare_record).collect()
}

pub fn prepare_record(r: &Record) -> Result<Sample, TrainError> {
    let g = parse_smiles(&r.smiles).map_err(|e| TrainError::Featurize {
        id: r.id.clone(),
        message: e.to_string(),
    })?;
    let m = featurize_smiles(&r.smiles, &g).map_err(|e| TrainError::Featurize {
        id: r.id.clone(),
        message: e.to_string(),
    })?;
    Ok(Sample {
        id: r.id.clone(),
        smiles: r.smiles.clone(),
        label: r.label,
        features: m.data,
        descriptors: compute_descriptors(&g),
    })
}
