//! Hand-checked featurizer expectations.

use miattn::featurize::{featurize, RowKind, SymbolSlot, ATOM_COLS, FEATURE_COLS, MAX_ROWS};

const COL_N_H: usize = 5;

/// (SMILES, rows between the start and end markers, total attached hydrogens of each atom).
///
/// Row codes: H C O N for those atom types, X for any other element; symbol rows use the
/// symbol itself, with `r` for a ring-closure number and `q` for an ion-charge magnitude.
pub const CORPUS: &[(&str, &str, &[u32])] = &[
    ("C", "C", &[4]),
    ("CC", "CC", &[3, 3]),
    ("CCO", "CCO", &[3, 2, 1]),
    ("C=O", "C=O", &[2, 0]),
    ("C#N", "C#N", &[1, 0]),
    ("O", "O", &[2]),
    ("N", "N", &[3]),
    ("c1ccccc1", "CrCCCCCr", &[1, 1, 1, 1, 1, 1]),
    ("C1CC1", "CrCCr", &[2, 2, 2]),
    ("CC(=O)O", "CC(=O)O", &[3, 0, 0, 1]),
    ("CC(=O)[O-]", "CC(=O)[O-]", &[3, 0, 0, 0]),
    ("[NH4+]", "[N+]", &[4]),
    ("[Na+].[Cl-]", "[X+].[X-]", &[0, 0]),
    ("[Fe+2]", "[X+q]", &[0]),
    ("[O--]", "[O--]", &[0]),
    ("C=C", "C=C", &[2, 2]),
    ("C#C", "C#C", &[1, 1]),
    ("ClCCl", "XCX", &[0, 2, 0]),
    ("BrC", "XC", &[0, 3]),
    ("FC(F)(F)F", "XC(X)(X)X", &[0, 0, 0, 0, 0]),
    ("c1ccncc1", "CrCCNCCr", &[1, 1, 1, 0, 1, 1]),
    ("c1cc[nH]c1", "CrCC[N]Cr", &[1, 1, 1, 1, 1]),
    ("c1ccoc1", "CrCCOCr", &[1, 1, 1, 0, 1]),
    ("c1ccsc1", "CrCCXCr", &[1, 1, 1, 0, 1]),
    ("c1ccc2ccccc2c1", "CrCCCrCCCCCrCr", &[1, 1, 1, 0, 1, 1, 1, 1, 0, 1]),
    ("Cc1ccccc1", "CCrCCCCCr", &[3, 0, 1, 1, 1, 1, 1]),
    ("OCC1CCCCC1", "OCCrCCCCCr", &[1, 2, 1, 2, 2, 2, 2, 2]),
    ("C1CC2CCC1C2", "CrCCrCCCrCr", &[2, 2, 1, 2, 2, 1, 2]),
    ("C%10CC%10", "C%rCC%r", &[2, 2, 2]),
    ("N[C@@H](C)C(=O)O", "N[C@](C)C(=O)O", &[2, 1, 3, 0, 0, 1]),
    ("F[C@H](Cl)Br", "X[C@](X)X", &[0, 1, 0, 0]),
    ("C/C=C/C", "C/C=C/C", &[3, 1, 1, 3]),
    ("C\\C=C\\C", "C\\C=C\\C", &[3, 1, 1, 3]),
    ("[13CH4]", "[C]", &[4]),
    ("[CH3:7]C", "[C:]C", &[3, 3]),
    ("CC-C", "CC-C", &[3, 2, 3]),
    ("c1ccccc1-c1ccccc1", "CrCCCCCr-CrCCCCCr", &[1, 1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1]),
    ("O=C=O", "O=C=O", &[0, 0, 0]),
    ("C=C=C", "C=C=C", &[2, 0, 2]),
    ("[H][H]", "[H][H]", &[1, 1]),
    ("[2H]C", "[H]C", &[0, 4]),
    ("CS(=O)(=O)C", "CX(=O)(=O)C", &[3, 0, 0, 0, 3]),
    ("C[N+](C)(C)C", "C[N+](C)(C)C", &[3, 0, 3, 3, 3]),
    ("[nH]1cccc1", "[N]rCCCCr", &[1, 1, 1, 1, 1]),
    ("C1CCCCC1", "CrCCCCCr", &[2, 2, 2, 2, 2, 2]),
    ("CCN(CC)CC", "CCN(CC)CC", &[3, 2, 0, 2, 3, 2, 3]),
    ("OC(=O)c1ccccc1", "OC(=O)CrCCCCCr", &[1, 0, 0, 0, 1, 1, 1, 1, 1]),
    ("[Cu+2].[O-]S(=O)(=O)[O-]", "[X+q].[O-]X(=O)(=O)[O-]", &[0, 0, 0, 0, 0, 0]),
    ("C[C@](F)(Cl)Br", "C[C@](X)(X)X", &[3, 0, 0, 0, 0]),
    ("CC#CC", "CC#CC", &[3, 0, 0, 3]),
];

fn symbol_code(slot: SymbolSlot) -> char {
    match slot {
        SymbolSlot::RingDigit => 'r',
        SymbolSlot::IonCharge => 'q',
        SymbolSlot::Start => '^',
        SymbolSlot::End => '$',
        other => other.name().chars().next().unwrap(),
    }
}

/// Row codes and per-atom hydrogen counts in the notation of [`CORPUS`].
pub fn describe(smiles: &str) -> (String, Vec<u32>) {
    let (_, m) = featurize(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
    let mut codes = String::new();
    let mut hs = Vec::new();
    for i in 0..m.valid_rows {
        let row = m.row(i);
        match m.row_kinds[i] {
            RowKind::Atom(_) => {
                let t = row[..5].iter().position(|&v| v == 1.0).expect("atom type set");
                codes.push(['H', 'C', 'O', 'N', 'X'][t]);
                hs.push(row[COL_N_H] as u32);
            }
            _ => {
                let slot = SymbolSlot::ALL
                    .iter()
                    .copied()
                    .find(|s| row[s.column()] == 1.0)
                    .expect("symbol slot set");
                codes.push(symbol_code(slot));
            }
        }
    }
    (codes, hs)
}

/// Asserts the one-hot partition and padding purity of the matrix of `smiles`.
pub fn check_partition(smiles: &str) {
    let (_, m) = featurize(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
    assert!(m.valid_rows >= 3 && m.valid_rows <= MAX_ROWS);
    for i in 0..MAX_ROWS {
        let row = m.row(i);
        assert_eq!(row.len(), FEATURE_COLS);
        if i >= m.valid_rows {
            assert_eq!(m.row_kinds[i], RowKind::Pad);
            assert!(row.iter().all(|&v| v == 0.0), "{smiles}: pad row {i} not zero");
            continue;
        }
        let types: f64 = row[..5].iter().sum();
        let symbols: f64 = row[ATOM_COLS..].iter().sum();
        assert_eq!(types + symbols, 1.0, "{smiles}: row {i}");
        match m.row_kinds[i] {
            RowKind::Atom(_) => assert!(row[..5].iter().all(|&v| v == 0.0 || v == 1.0)),
            RowKind::Pad => panic!("{smiles}: pad inside valid rows"),
            _ => assert!(row[..ATOM_COLS].iter().all(|&v| v == 0.0), "{smiles}: symbol row {i}"),
        }
    }
    assert_eq!(m.row_kinds[0], RowKind::Start);
    assert_eq!(m.row_kinds[m.valid_rows - 1], RowKind::End);
}
