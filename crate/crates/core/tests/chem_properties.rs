mod common;

use common::molgen::{edge_on_cycle, random_mol, random_smiles, PLAIN, RICH};
use miattn::chem::{parse_smiles, parse_smiles_bytes, BondOrder, MolGraph, TokenKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_graph_invariants(g: &MolGraph) {
    let mut pos = 0;
    for t in &g.tokens {
        assert_eq!(t.span.start, pos, "{}", g.source);
        assert!(t.span.end > t.span.start);
        pos = t.span.end;
    }
    assert_eq!(pos, g.source.len());
    let atom_tokens: Vec<usize> = g
        .tokens
        .iter()
        .filter_map(|t| match t.kind {
            TokenKind::Atom(id) => Some(id),
            _ => None,
        })
        .collect();
    assert_eq!(atom_tokens, (0..g.atoms.len()).collect::<Vec<_>>());
    for (id, a) in g.atoms.iter().enumerate() {
        assert!(!a.aromatic || a.in_ring, "{}: aromatic atom {id} not in ring", g.source);
        assert!(a.token_index < g.tokens.len());
        for &b in &a.bonds {
            let e = &g.bonds[b];
            assert!(e.a == id || e.b == id);
        }
    }
    for b in &g.bonds {
        assert_ne!(b.a, b.b);
        if b.order == BondOrder::Aromatic {
            assert!(b.in_ring && g.atoms[b.a].aromatic && g.atoms[b.b].aromatic);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..40)) {
        if let Ok(g) = parse_smiles_bytes(&bytes) {
            check_graph_invariants(&g);
        }
    }

    #[test]
    fn smiles_alphabet_never_panics(s in "[CNOSPFIBrlcnos0-9%()\\[\\]=#@+\\-.:/\\\\H]{0,30}") {
        if let Ok(g) = parse_smiles(&s) {
            check_graph_invariants(&g);
        }
    }

    #[test]
    fn generated_molecules_parse(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_smiles(&mut rng, &RICH);
        let g = parse_smiles(&s).unwrap_or_else(|e| panic!("{s}: {e}"));
        check_graph_invariants(&g);
    }

    #[test]
    fn ring_membership_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mol(&mut rng, &PLAIN);
        let g = parse_smiles(&m.smiles).unwrap_or_else(|e| panic!("{}: {e}", m.smiles));
        prop_assert_eq!(g.atoms.len(), m.atoms);
        prop_assert_eq!(g.bonds.len(), m.edges.len());
        let mut atom_ring = vec![false; m.atoms];
        for (i, &(a, b)) in m.edges.iter().enumerate() {
            let on_cycle = edge_on_cycle(m.atoms, &m.edges, i);
            let bond = g.bond_between(a, b).expect("bond present");
            prop_assert_eq!(g.bonds[bond].in_ring, on_cycle, "{} bond {}-{}", m.smiles, a, b);
            if on_cycle {
                atom_ring[a] = true;
                atom_ring[b] = true;
            }
        }
        for (id, &want) in atom_ring.iter().enumerate() {
            prop_assert_eq!(g.atoms[id].in_ring, want, "{} atom {}", m.smiles, id);
        }
    }
}

#[test]
fn every_error_carries_an_offset_inside_the_input() {
    for s in ["C(", "CC)", "C1CC", "C11", "CXC", "C[NH4+", "C=", "=C", "C$C", "[", "]", "()", "C((C))", "[Xx]"] {
        let e = parse_smiles(s).expect_err(s);
        let text = e.to_string();
        assert!(!text.is_empty(), "{s}");
        let off = e.offset().expect("non-empty input has an offset");
        assert!(off < s.len(), "{s}: offset {off}");
    }
}
