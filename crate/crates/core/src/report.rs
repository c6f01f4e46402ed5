//! Attention-weight extraction and per-molecule heatmap reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::chem::MolGraph;
use crate::descriptors::{apply_scaler, compute_descriptors, DescriptorError};
use crate::featurize::{featurize, FeatureMatrix, FeaturizeError, RowKind, FEATURE_COLS, MAX_ROWS};
use crate::model::{ModelError, MultiInputModel};
use crate::nn::Tensor;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error("weight map was built from `{map}` but the graph is for `{graph}`")]
    SourceMismatch { map: String, graph: String },
    #[error("weight map has no token rows")]
    EmptyMap,
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    Start,
    Atom,
    Symbol,
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowWeight {
    pub index: usize,
    pub kind: RowLabel,
    /// Byte range `[start, end)` in the SMILES; `None` for the start/end markers.
    pub char_span: Option<(usize, usize)>,
    pub atom: Option<usize>,
    pub weight: f64,
    /// Start/end marker rows have no source characters.
    pub synthetic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomWeightMap {
    pub smiles: String,
    pub probability: f64,
    pub rows: Vec<RowWeight>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomWeight {
    pub id: usize,
    pub element: String,
    /// The atom row's own weight.
    pub weight: f64,
    /// Atom row plus the symbol rows attached to it.
    pub aggregate: f64,
}

/// Runs the frozen model on `smiles` and maps every non-pad row's weight to its token.
pub fn extract_attention_weights(model: &MultiInputModel, smiles: &str) -> Result<(AtomWeightMap, MolGraph), ReportError> {
    let (g, fm) = featurize(smiles)?;
    let scaled = apply_scaler(&compute_descriptors(&g), &model.scaler)?;
    let width = scaled.values.len();
    let r = Tensor::new(&[1, MAX_ROWS, FEATURE_COLS], fm.data.clone()).map_err(ModelError::from)?;
    let d = Tensor::new(&[1, width], scaled.values).map_err(ModelError::from)?;
    let out = model.infer(&r, &d)?.sample(0);
    Ok((weight_map(smiles, &fm, &out.a, out.probability), g))
}

fn weight_map(smiles: &str, fm: &FeatureMatrix, a: &[f64], probability: f64) -> AtomWeightMap {
    let rows = (0..fm.valid_rows)
        .map(|i| {
            let (kind, atom) = match fm.row_kinds[i] {
                RowKind::Start => (RowLabel::Start, None),
                RowKind::End => (RowLabel::End, None),
                RowKind::Atom(id) => (RowLabel::Atom, Some(id)),
                RowKind::Symbol(_) | RowKind::Pad => (RowLabel::Symbol, None),
            };
            RowWeight {
                index: i,
                kind,
                char_span: fm.row_spans[i].as_ref().map(|s| (s.start, s.end)),
                atom,
                weight: a[i],
                synthetic: matches!(kind, RowLabel::Start | RowLabel::End),
            }
        })
        .collect();
    AtomWeightMap {
        smiles: smiles.to_string(),
        probability,
        rows,
    }
}

/// Per-atom weights. Symbol rows fold into the preceding atom; an opening bracket folds
/// into the atom it opens, and symbols before the first atom fold into that atom.
pub fn map_weights_to_atoms(map: &AtomWeightMap, g: &MolGraph) -> Result<Vec<AtomWeight>, ReportError> {
    if map.smiles != g.source {
        return Err(ReportError::SourceMismatch {
            map: map.smiles.clone(),
            graph: g.source.clone(),
        });
    }
    let mut atoms: Vec<AtomWeight> = g
        .atoms
        .iter()
        .enumerate()
        .map(|(id, a)| AtomWeight {
            id,
            element: a.element.symbol().to_string(),
            weight: 0.0,
            aggregate: 0.0,
        })
        .collect();
    let token_rows: Vec<&RowWeight> = map.rows.iter().filter(|r| !r.synthetic).collect();
    let mut owner = vec![None; token_rows.len()];
    let mut current = None;
    for (i, r) in token_rows.iter().enumerate() {
        if let Some(id) = r.atom {
            current = Some(id);
        }
        let opens_bracket = r.char_span.is_some_and(|(s, _)| map.smiles.as_bytes().get(s) == Some(&b'['));
        owner[i] = if opens_bracket { None } else { current };
    }
    // rows without a preceding owner take the next atom
    let mut next = None;
    for i in (0..token_rows.len()).rev() {
        if let Some(id) = token_rows[i].atom {
            next = Some(id);
        }
        if owner[i].is_none() {
            owner[i] = next;
        }
    }
    for (r, o) in token_rows.iter().zip(owner) {
        let Some(id) = o else { continue };
        let slot = atoms.get_mut(id).ok_or_else(|| ReportError::SourceMismatch {
            map: map.smiles.clone(),
            graph: g.source.clone(),
        })?;
        if r.atom == Some(id) {
            slot.weight = r.weight;
        }
        slot.aggregate += r.weight;
    }
    Ok(atoms)
}

/// Min-max normalized token-row weights; a constant map gives 0.5 everywhere.
pub fn normalized_weights(map: &AtomWeightMap) -> Vec<(usize, f64)> {
    let rows: Vec<&RowWeight> = map.rows.iter().filter(|r| !r.synthetic).collect();
    let lo = rows.iter().map(|r| r.weight).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.weight).fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .map(|r| {
            let v = if hi - lo > 0.0 { (r.weight - lo) / (hi - lo) } else { 0.5 };
            (r.index, v)
        })
        .collect()
}

/// White (0) to red (1).
pub fn ramp_color(v: f64) -> String {
    let c = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
    format!("#ff{c:02x}{c:02x}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Self-contained HTML page coloring each SMILES character by its row's normalized weight,
/// followed by the per-atom table. `meta` pairs are embedded as `<meta>` tags.
pub fn render_html(map: &AtomWeightMap, atoms: &[AtomWeight], meta: &[(String, String)]) -> Result<String, ReportError> {
    let norm = normalized_weights(map);
    if norm.is_empty() {
        return Err(ReportError::EmptyMap);
    }
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    for (k, v) in meta {
        let _ = writeln!(html, "<meta name=\"{}\" content=\"{}\">", escape(k), escape(v));
    }
    let _ = writeln!(html, "<title>{}</title>", escape(&map.smiles));
    html.push_str("<style>\nbody{font-family:sans-serif}\n.smiles{font-family:monospace;font-size:2em;letter-spacing:0.05em}\n.smiles span{padding:0 1px}\ntable{border-collapse:collapse}\ntd,th{border:1px solid #ccc;padding:2px 8px;text-align:right}\n</style>\n</head>\n<body>\n");
    let _ = writeln!(html, "<p>predicted probability: {:.6}</p>", map.probability);
    html.push_str("<div class=\"smiles\">");
    for (idx, v) in &norm {
        let row = &map.rows[*idx];
        let Some((s, e)) = row.char_span else { continue };
        let _ = write!(
            html,
            "<span style=\"background:{}\" title=\"row {} weight {:.6}\">{}</span>",
            ramp_color(*v),
            row.index,
            row.weight,
            escape(&map.smiles[s..e])
        );
    }
    html.push_str("</div>\n<table>\n<tr><th>atom</th><th>element</th><th>weight</th><th>aggregate</th></tr>\n");
    for a in atoms {
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td>{}</td><td>{:.6}</td><td>{:.6}</td></tr>",
            a.id,
            escape(&a.element),
            a.weight,
            a.aggregate
        );
    }
    html.push_str("</table>\n</body>\n</html>\n");
    Ok(html)
}

#[derive(Serialize)]
struct WeightsDoc<'a> {
    smiles: &'a str,
    probability: f64,
    meta: std::collections::BTreeMap<&'a str, &'a str>,
    rows: &'a [RowWeight],
    atoms: &'a [AtomWeight],
}

pub fn weights_json(map: &AtomWeightMap, atoms: &[AtomWeight], meta: &[(String, String)]) -> String {
    let doc = WeightsDoc {
        smiles: &map.smiles,
        probability: map.probability,
        meta: meta.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
        rows: &map.rows,
        atoms,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

/// Writes `<name>.html` and `<name>.weights.json` into `dir`.
pub fn render_smiles_heatmap(
    map: &AtomWeightMap,
    atoms: &[AtomWeight],
    meta: &[(String, String)],
    dir: &Path,
    name: &str,
) -> Result<(PathBuf, PathBuf), ReportError> {
    let html_path = dir.join(format!("{name}.html"));
    let json_path = dir.join(format!("{name}.weights.json"));
    std::fs::write(&html_path, render_html(map, atoms, meta)?)?;
    std::fs::write(&json_path, weights_json(map, atoms, meta))?;
    Ok((html_path, json_path))
}
