mod common;

use common::molgen::{random_mol, PLAIN};
use miattn::chem::parse_smiles;
use miattn::descriptors::{apply_scaler, compute_descriptors, fit_scaler, DescriptorVector, DESCRIPTOR_COUNT, SCHEMA_VERSION};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn topological_descriptors_match_graph_oracles(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mol(&mut rng, &PLAIN);
        let d = compute_descriptors(&parse_smiles(&m.smiles).unwrap());
        let (n, e) = (m.atoms, m.edges.len());
        let mut deg = vec![0usize; n];
        for &(a, b) in &m.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        let dist = floyd_warshall(n, &m.edges);
        let wiener: usize = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist[i][j]).sum();
        let get = |k: &str| d.get(k).unwrap();
        prop_assert_eq!(get("heavy_atom_count"), n as f64);
        prop_assert_eq!(get("bond_count"), e as f64);
        prop_assert_eq!(get("ring_count"), (e + 1 - n) as f64);
        prop_assert_eq!(get("zagreb1"), deg.iter().map(|x| x * x).sum::<usize>() as f64);
        prop_assert_eq!(get("wiener_index"), wiener as f64);
        prop_assert_eq!(get("branch_count"), deg.iter().filter(|&&x| x >= 3).count() as f64);
        prop_assert!((get("mean_degree") - 2.0 * e as f64 / n as f64).abs() < 1e-12);
        prop_assert!(d.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn scaled_training_features_have_zero_mean_unit_variance(
        rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, DESCRIPTOR_COUNT), 2..40),
        constant_col in 0..DESCRIPTOR_COUNT,
    ) {
        let train: Vec<DescriptorVector> = rows
            .iter()
            .map(|r| {
                let mut values = [0.0; DESCRIPTOR_COUNT];
                values.copy_from_slice(r);
                values[constant_col] = 3.5;
                DescriptorVector { schema: SCHEMA_VERSION, values }
            })
            .collect();
        let s = fit_scaler(&train).unwrap();
        prop_assert!(!s.keep[constant_col]);
        let scaled: Vec<Vec<f64>> = train.iter().map(|v| apply_scaler(v, &s).unwrap().values).collect();
        let k = s.kept_count();
        prop_assert!(scaled.iter().all(|v| v.len() == k));
        let n = scaled.len() as f64;
        for j in 0..k {
            let mean = scaled.iter().map(|v| v[j]).sum::<f64>() / n;
            let var = scaled.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9, "feature {} mean {}", j, mean);
            prop_assert!((var - 1.0).abs() < 1e-9, "feature {} var {}", j, var);
        }
    }
}

#[test]
fn hand_checked_values() {
    let d = |s: &str| compute_descriptors(&parse_smiles(s).unwrap());
    let benzene = d("c1ccccc1");
    assert_eq!(benzene.get("aromatic_atom_count"), Some(6.0));
    assert_eq!(benzene.get("fraction_aromatic"), Some(1.0));
    assert_eq!(benzene.get("max_ring_size"), Some(6.0));
    assert!((benzene.get("mol_weight").unwrap() - 78.114).abs() < 0.01);
    let propane = d("CCC");
    assert_eq!(propane.get("wiener_index"), Some(4.0));
    assert_eq!(propane.get("zagreb1"), Some(6.0));
    assert_eq!(propane.get("fraction_csp3"), Some(1.0));
    let ethanol = d("CCO");
    assert_eq!(ethanol.get("hbd"), Some(1.0));
    assert_eq!(ethanol.get("hba"), Some(1.0));
    assert_eq!(ethanol.get("hetero_ratio"), Some(1.0 / 3.0));
    let butane = d("CCCC");
    assert_eq!(butane.get("rotatable_bonds"), Some(1.0));
    let salt = d("[Na+].[Cl-]");
    assert_eq!(salt.get("formal_charge_sum"), Some(0.0));
    assert_eq!(salt.get("n_halogen"), Some(1.0));
    let acetylene = d("C#C");
    assert_eq!(acetylene.get("triple_bond_count"), Some(1.0));
}
