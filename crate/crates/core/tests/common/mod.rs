//! Seeded synthetic molecules labelled by whether they contain an aromatic nitrogen.
#![allow(dead_code)]

pub mod corpus;
pub mod molgen;

use miattn::train::{Dataset, Record};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Aromatic rings containing at least one aromatic nitrogen.
const AZA_RINGS: &[&str] = &["c1ccncc1", "c1cncnc1", "c1cc[nH]c1", "c1cnc[nH]1", "c1ccnnc1", "c1cncs1", "c1ncco1"];

/// Rings without aromatic nitrogen, including saturated N heterocycles.
const PLAIN_RINGS: &[&str] = &["c1ccccc1", "c1ccoc1", "c1ccsc1", "C1CCCCC1", "C1CCNCC1", "C1CCOC1", "C1CNCCN1", "C1CC1"];

/// Acyclic linkers and substituents, several with aliphatic nitrogen.
const CHAINS: &[&str] = &["C", "CC", "CCC", "CN", "CCN", "C(=O)N", "C#N", "CO", "C(=O)O", "N", "OC", "C(F)(F)F", "Cl", "Br", "C=C", "CC(C)C", "NC(=O)"];

pub fn synthetic_smiles(rng: &mut ChaCha8Rng, positive: bool) -> String {
    let rings = rng.random_range(1..=3usize);
    let aza_slot = rng.random_range(0..rings);
    let mut s = String::new();
    for i in 0..rings {
        if i > 0 || rng.random_bool(0.5) {
            s.push_str(CHAINS[rng.random_range(0..CHAINS.len())]);
        }
        let ring = if positive && i == aza_slot {
            AZA_RINGS[rng.random_range(0..AZA_RINGS.len())]
        } else {
            PLAIN_RINGS[rng.random_range(0..PLAIN_RINGS.len())]
        };
        s.push_str(ring);
    }
    if rng.random_bool(0.6) {
        s.push_str(CHAINS[rng.random_range(0..CHAINS.len())]);
    }
    s
}

/// `n` molecules; roughly `positive_fraction` of them carry an aromatic nitrogen.
pub fn synthetic_dataset(n: usize, positive_fraction: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let positive = rng.random_bool(positive_fraction);
            Record {
                id: format!("mol{i:04}"),
                smiles: synthetic_smiles(&mut rng, positive),
                label: if positive { 1.0 } else { 0.0 },
            }
        })
        .collect();
    Dataset::from_records(records)
}

pub fn dataset_csv(ds: &Dataset) -> String {
    let mut out = String::from("id,smiles,label\n");
    for r in &ds.records {
        out.push_str(&format!("{},{},{}\n", r.id, r.smiles, r.label as u8));
    }
    out
}
