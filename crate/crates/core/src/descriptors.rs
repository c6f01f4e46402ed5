//! Fixed-schema 2D molecular descriptors and the train-fitted standard scaler.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{BondOrder, Element, Hybridization, MolGraph};

pub const SCHEMA_VERSION: &str = "miattn-desc-v1";

pub const DESCRIPTOR_NAMES: [&str; 24] = [
    "heavy_atom_count",
    "mol_weight",
    "bond_count",
    "ring_count",
    "aromatic_atom_count",
    "n_C",
    "n_N",
    "n_O",
    "n_S",
    "n_halogen",
    "hbd",
    "hba",
    "rotatable_bonds",
    "formal_charge_sum",
    "max_ring_size",
    "fraction_aromatic",
    "fraction_csp3",
    "mean_degree",
    "zagreb1",
    "wiener_index",
    "double_bond_count",
    "triple_bond_count",
    "hetero_ratio",
    "branch_count",
];

pub const DESCRIPTOR_COUNT: usize = DESCRIPTOR_NAMES.len();

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptorError {
    #[error("at least 2 training vectors are needed to fit a scaler, got {0}")]
    InsufficientData(usize),
    #[error("descriptor schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorVector {
    pub schema: &'static str,
    pub values: [f64; DESCRIPTOR_COUNT],
}

impl DescriptorVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        DESCRIPTOR_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// BFS distances from `src` over the heavy-atom subgraph; `usize::MAX` when unreachable.
fn heavy_distances(g: &MolGraph, heavy: &[bool], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.atoms.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(a) = queue.pop_front() {
        for n in g.neighbors(a) {
            if heavy[n] && dist[n] == usize::MAX {
                dist[n] = dist[a] + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Size of the smallest cycle through ring bond `bond`: shortest a→b path avoiding it, plus one.
fn smallest_ring_through(g: &MolGraph, bond: usize) -> usize {
    let (a, b) = (g.bonds[bond].a, g.bonds[bond].b);
    let mut dist = vec![usize::MAX; g.atoms.len()];
    dist[a] = 0;
    let mut queue = VecDeque::from([a]);
    while let Some(x) = queue.pop_front() {
        for &e in &g.atoms[x].bonds {
            if e == bond {
                continue;
            }
            let y = g.bonds[e].other(x);
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                if y == b {
                    return dist[y] + 1;
                }
                queue.push_back(y);
            }
        }
    }
    0
}

pub fn compute_descriptors(g: &MolGraph) -> DescriptorVector {
    let n = g.atoms.len();
    let heavy: Vec<bool> = g.atoms.iter().map(|a| a.element != Element::H).collect();
    let heavy_ids: Vec<usize> = (0..n).filter(|&i| heavy[i]).collect();
    let heavy_count = heavy_ids.len() as f64;
    let heavy_degree: Vec<usize> = (0..n).map(|i| g.heavy_degree(i)).collect();

    let mol_weight: f64 = g
        .atoms
        .iter()
        .map(|a| a.element.mass() + f64::from(a.implicit_h) * Element::H.mass())
        .sum();
    let heavy_bonds: Vec<usize> = (0..g.bonds.len())
        .filter(|&b| heavy[g.bonds[b].a] && heavy[g.bonds[b].b])
        .collect();
    let components = {
        // components of the heavy-atom subgraph
        let mut seen = vec![false; n];
        let mut count = 0usize;
        for &s in &heavy_ids {
            if !seen[s] {
                count += 1;
                let d = heavy_distances(g, &heavy, s);
                for (i, &di) in d.iter().enumerate() {
                    if di != usize::MAX {
                        seen[i] = true;
                    }
                }
            }
        }
        count
    };
    let ring_count =
        (heavy_bonds.len() as f64 - heavy_count + components as f64).max(0.0);

    let count_el = |e: Element| g.atoms.iter().filter(|a| a.element == e).count() as f64;
    let aromatic = g.atoms.iter().filter(|a| a.aromatic).count() as f64;
    let halogens = g.atoms.iter().filter(|a| a.element.is_halogen()).count() as f64;
    let is_no = |i: usize| matches!(g.atoms[i].element, Element::N | Element::O);
    let hbd = (0..n).filter(|&i| is_no(i) && g.total_h(i) > 0).count() as f64;
    let hba = (0..n).filter(|&i| is_no(i)).count() as f64;
    let rotatable = heavy_bonds
        .iter()
        .filter(|&&b| {
            let e = &g.bonds[b];
            e.order == BondOrder::Single
                && !e.in_ring
                && heavy_degree[e.a] >= 2
                && heavy_degree[e.b] >= 2
        })
        .count() as f64;
    let charge_sum: i64 = g.atoms.iter().map(|a| i64::from(a.formal_charge)).sum();
    let max_ring = (0..g.bonds.len())
        .filter(|&b| g.bonds[b].in_ring)
        .map(|b| smallest_ring_through(g, b))
        .max()
        .unwrap_or(0) as f64;
    let carbons = count_el(Element::C);
    let csp3 = g
        .atoms
        .iter()
        .filter(|a| a.element == Element::C && a.hybridization == Hybridization::Sp3)
        .count() as f64;
    let degree_sum: usize = heavy_ids.iter().map(|&i| heavy_degree[i]).sum();
    let zagreb: usize = heavy_ids.iter().map(|&i| heavy_degree[i].pow(2)).sum();
    let mut wiener = 0usize;
    for &s in &heavy_ids {
        let d = heavy_distances(g, &heavy, s);
        wiener += heavy_ids
            .iter()
            .filter(|&&t| t > s && d[t] != usize::MAX)
            .map(|&t| d[t])
            .sum::<usize>();
    }
    let bonds_of = |o: BondOrder| g.bonds.iter().filter(|b| b.order == o).count() as f64;
    let hetero = heavy_ids
        .iter()
        .filter(|&&i| g.atoms[i].element != Element::C)
        .count() as f64;
    let branches = heavy_ids.iter().filter(|&&i| heavy_degree[i] >= 3).count() as f64;

    DescriptorVector {
        schema: SCHEMA_VERSION,
        values: [
            heavy_count,
            mol_weight,
            heavy_bonds.len() as f64,
            ring_count,
            aromatic,
            carbons,
            count_el(Element::N),
            count_el(Element::O),
            count_el(Element::S),
            halogens,
            hbd,
            hba,
            rotatable,
            charge_sum as f64,
            max_ring,
            ratio(aromatic, heavy_count),
            ratio(csp3, carbons),
            ratio(degree_sum as f64, heavy_count),
            zagreb as f64,
            wiener as f64,
            bonds_of(BondOrder::Double),
            bonds_of(BondOrder::Triple),
            ratio(hetero, heavy_count),
            branches,
        ],
    }
}

/// Per-feature z-score parameters fitted on training vectors only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub schema: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `false` for features dropped because they are constant over the training set.
    pub keep: Vec<bool>,
}

impl ScalerParams {
    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// Result of scaling one vector; `imputed` lists kept-feature positions that were non-finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaled {
    pub values: Vec<f64>,
    pub imputed: Vec<usize>,
}

/// Fits means and population standard deviations; non-finite inputs are ignored.
pub fn fit_scaler(train: &[DescriptorVector]) -> Result<ScalerParams, DescriptorError> {
    if train.len() < 2 {
        return Err(DescriptorError::InsufficientData(train.len()));
    }
    for v in train {
        if v.schema != SCHEMA_VERSION {
            return Err(DescriptorError::SchemaMismatch {
                expected: SCHEMA_VERSION.into(),
                found: v.schema.into(),
            });
        }
    }
    let mut mean = vec![0.0; DESCRIPTOR_COUNT];
    let mut std = vec![0.0; DESCRIPTOR_COUNT];
    let mut keep = vec![false; DESCRIPTOR_COUNT];
    for j in 0..DESCRIPTOR_COUNT {
        let xs: Vec<f64> = train
            .iter()
            .map(|v| v.values[j])
            .filter(|x| x.is_finite())
            .collect();
        if xs.is_empty() {
            continue;
        }
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        let s = var.sqrt();
        mean[j] = m;
        std[j] = s;
        keep[j] = s > 1e-12 * m.abs().max(1.0);
    }
    Ok(ScalerParams {
        schema: SCHEMA_VERSION.into(),
        mean,
        std,
        keep,
    })
}

/// Standardizes kept features and drops masked ones. Non-finite inputs become 0
/// (the training mean after scaling) and are reported in `imputed`.
pub fn apply_scaler(v: &DescriptorVector, s: &ScalerParams) -> Result<Scaled, DescriptorError> {
    if v.schema != s.schema {
        return Err(DescriptorError::SchemaMismatch {
            expected: s.schema.clone(),
            found: v.schema.into(),
        });
    }
    let mut values = Vec::with_capacity(s.kept_count());
    let mut imputed = Vec::new();
    for j in (0..DESCRIPTOR_COUNT).filter(|&j| s.keep[j]) {
        let x = v.values[j];
        if x.is_finite() {
            values.push((x - s.mean[j]) / s.std[j]);
        } else {
            imputed.push(values.len());
            values.push(0.0);
        }
    }
    Ok(Scaled { values, imputed })
}
