//! The 150×42 per-token feature matrix.
//!
//! Columns 0–20 describe atoms, columns 21–41 one-hot encode SMILES syntax. Row 0 is a
//! start marker, then one row per token in string order, then an end marker; everything
//! after is zero padding.

use std::ops::Range;

use thiserror::Error;

use crate::chem::{self, AtomNode, Chirality, MolGraph, SmilesError, Token, TokenKind};

pub const MAX_ROWS: usize = 150;
pub const FEATURE_COLS: usize = 42;
pub const ATOM_COLS: usize = 21;
pub const SYMBOL_COLS: usize = 21;
pub const VOCABULARY_VERSION: &str = "smiles-symbols-v1";

const COL_N_H: usize = 5;
const COL_DEGREE: usize = 6;
const COL_CHARGE: usize = 7;
const COL_VALENCE: usize = 8;
const COL_RING: usize = 9;
const COL_AROMATIC: usize = 10;
const COL_CHIRALITY: usize = 11;
const COL_HYBRIDIZATION: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeaturizeError {
    #[error("{rows} rows (tokens plus start/end markers) exceed the {MAX_ROWS}-row budget")]
    TooLong { rows: usize },
    #[error("token {text:?} has no slot in the symbol vocabulary")]
    UnfeaturizableToken { text: String },
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

/// The 21 symbol slots, in column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolSlot {
    BranchOpen,
    BranchClose,
    BracketOpen,
    BracketClose,
    Dot,
    Colon,
    Equals,
    Hash,
    Backslash,
    Slash,
    At,
    Plus,
    Minus,
    IonCharge,
    Start,
    End,
    RingDigit,
    Percent,
    Reserved1,
    Reserved2,
    Reserved3,
}

impl SymbolSlot {
    pub const ALL: [SymbolSlot; SYMBOL_COLS] = [
        SymbolSlot::BranchOpen,
        SymbolSlot::BranchClose,
        SymbolSlot::BracketOpen,
        SymbolSlot::BracketClose,
        SymbolSlot::Dot,
        SymbolSlot::Colon,
        SymbolSlot::Equals,
        SymbolSlot::Hash,
        SymbolSlot::Backslash,
        SymbolSlot::Slash,
        SymbolSlot::At,
        SymbolSlot::Plus,
        SymbolSlot::Minus,
        SymbolSlot::IonCharge,
        SymbolSlot::Start,
        SymbolSlot::End,
        SymbolSlot::RingDigit,
        SymbolSlot::Percent,
        SymbolSlot::Reserved1,
        SymbolSlot::Reserved2,
        SymbolSlot::Reserved3,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn column(self) -> usize {
        ATOM_COLS + self.index()
    }

    pub fn name(self) -> &'static str {
        match self {
            SymbolSlot::BranchOpen => "(",
            SymbolSlot::BranchClose => ")",
            SymbolSlot::BracketOpen => "[",
            SymbolSlot::BracketClose => "]",
            SymbolSlot::Dot => ".",
            SymbolSlot::Colon => ":",
            SymbolSlot::Equals => "=",
            SymbolSlot::Hash => "#",
            SymbolSlot::Backslash => "\\",
            SymbolSlot::Slash => "/",
            SymbolSlot::At => "@",
            SymbolSlot::Plus => "+",
            SymbolSlot::Minus => "-",
            SymbolSlot::IonCharge => "ion_charge",
            SymbolSlot::Start => "start",
            SymbolSlot::End => "end",
            SymbolSlot::RingDigit => "ring_digit",
            SymbolSlot::Percent => "%",
            SymbolSlot::Reserved1 => "reserved1",
            SymbolSlot::Reserved2 => "reserved2",
            SymbolSlot::Reserved3 => "reserved3",
        }
    }

    /// Slot for a single context-free character. Digits map to `RingDigit`; the charge
    /// magnitude use of digits is only known from a parsed token.
    pub fn from_char(c: char) -> Result<SymbolSlot, FeaturizeError> {
        Ok(match c {
            '(' => SymbolSlot::BranchOpen,
            ')' => SymbolSlot::BranchClose,
            '[' => SymbolSlot::BracketOpen,
            ']' => SymbolSlot::BracketClose,
            '.' => SymbolSlot::Dot,
            ':' => SymbolSlot::Colon,
            '=' => SymbolSlot::Equals,
            '#' => SymbolSlot::Hash,
            '\\' => SymbolSlot::Backslash,
            '/' => SymbolSlot::Slash,
            '@' => SymbolSlot::At,
            '+' => SymbolSlot::Plus,
            '-' => SymbolSlot::Minus,
            '%' => SymbolSlot::Percent,
            '0'..='9' => SymbolSlot::RingDigit,
            _ => {
                return Err(FeaturizeError::UnfeaturizableToken {
                    text: c.to_string(),
                })
            }
        })
    }

    /// Slot for a parsed non-atom token; `None` for atom tokens.
    pub fn for_token(kind: TokenKind) -> Option<SymbolSlot> {
        Some(match kind {
            TokenKind::Atom(_) => return None,
            TokenKind::Bond(b) => match b {
                b'-' => SymbolSlot::Minus,
                b'=' => SymbolSlot::Equals,
                b'#' => SymbolSlot::Hash,
                b':' => SymbolSlot::Colon,
                b'/' => SymbolSlot::Slash,
                _ => SymbolSlot::Backslash,
            },
            TokenKind::BranchOpen => SymbolSlot::BranchOpen,
            TokenKind::BranchClose => SymbolSlot::BranchClose,
            TokenKind::RingNumber => SymbolSlot::RingDigit,
            TokenKind::RingPercent => SymbolSlot::Percent,
            TokenKind::BracketOpen => SymbolSlot::BracketOpen,
            TokenKind::BracketClose => SymbolSlot::BracketClose,
            TokenKind::Chirality => SymbolSlot::At,
            TokenKind::ChargeSign(b'+') => SymbolSlot::Plus,
            TokenKind::ChargeSign(_) => SymbolSlot::Minus,
            TokenKind::ChargeMagnitude => SymbolSlot::IonCharge,
            TokenKind::AtomClass => SymbolSlot::Colon,
            TokenKind::Dot => SymbolSlot::Dot,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Start,
    Atom(chem::AtomId),
    Symbol(SymbolSlot),
    End,
    Pad,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    /// Row-major `MAX_ROWS × FEATURE_COLS`.
    pub data: Vec<f64>,
    pub valid_rows: usize,
    pub row_kinds: Vec<RowKind>,
    /// Source character span of each token row; `None` for markers and padding.
    pub row_spans: Vec<Option<Range<usize>>>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURE_COLS..(i + 1) * FEATURE_COLS]
    }

    /// Row-major copy as 32-bit floats.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(MAX_ROWS * FEATURE_COLS * 3);
        for i in 0..MAX_ROWS {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Compact binary block: row-major little-endian `f32`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.to_f32().iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Atom row: type one-hot, H count, degree, charge, valence, ring/aromatic flags,
/// chirality one-hot, hybridization one-hot. Columns 21–41 stay zero.
pub fn atom_feature_row(g: &MolGraph, atom_id: chem::AtomId) -> [f64; FEATURE_COLS] {
    let atom: &AtomNode = &g.atoms[atom_id];
    let mut row = [0.0; FEATURE_COLS];
    row[atom.atom_type().index()] = 1.0;
    row[COL_N_H] = f64::from(g.total_h(atom_id));
    row[COL_DEGREE] = g.degree(atom_id) as f64;
    row[COL_CHARGE] = f64::from(atom.formal_charge);
    row[COL_VALENCE] = f64::from(g.total_valence(atom_id));
    row[COL_RING] = f64::from(u8::from(atom.in_ring));
    row[COL_AROMATIC] = f64::from(u8::from(atom.aromatic));
    match atom.chirality {
        Chirality::R => row[COL_CHIRALITY] = 1.0,
        Chirality::S => row[COL_CHIRALITY + 1] = 1.0,
        Chirality::Other => row[COL_CHIRALITY + 2] = 1.0,
        Chirality::None => {}
    }
    row[COL_HYBRIDIZATION + atom.hybridization.index()] = 1.0;
    row
}

pub fn symbol_feature_row(slot: SymbolSlot) -> [f64; FEATURE_COLS] {
    let mut row = [0.0; FEATURE_COLS];
    row[slot.column()] = 1.0;
    row
}

/// Builds the matrix for `text`, whose parsed graph is `g`.
pub fn featurize_smiles(text: &str, g: &MolGraph) -> Result<FeatureMatrix, FeaturizeError> {
    debug_assert_eq!(text, g.source);
    let rows = g.tokens.len() + 2;
    if rows > MAX_ROWS {
        return Err(FeaturizeError::TooLong { rows });
    }
    let mut m = FeatureMatrix {
        data: vec![0.0; MAX_ROWS * FEATURE_COLS],
        valid_rows: rows,
        row_kinds: vec![RowKind::Pad; MAX_ROWS],
        row_spans: vec![None; MAX_ROWS],
    };
    let put = |m: &mut FeatureMatrix, i: usize, row: &[f64; FEATURE_COLS], kind: RowKind| {
        m.data[i * FEATURE_COLS..(i + 1) * FEATURE_COLS].copy_from_slice(row);
        m.row_kinds[i] = kind;
    };
    put(&mut m, 0, &symbol_feature_row(SymbolSlot::Start), RowKind::Start);
    for (i, Token { span, kind }) in g.tokens.iter().enumerate() {
        let r = i + 1;
        match (kind, SymbolSlot::for_token(*kind)) {
            (TokenKind::Atom(id), _) => put(&mut m, r, &atom_feature_row(g, *id), RowKind::Atom(*id)),
            (_, Some(slot)) => put(&mut m, r, &symbol_feature_row(slot), RowKind::Symbol(slot)),
            (_, None) => {
                return Err(FeaturizeError::UnfeaturizableToken {
                    text: text[span.clone()].to_string(),
                })
            }
        }
        m.row_spans[r] = Some(span.clone());
    }
    put(&mut m, rows - 1, &symbol_feature_row(SymbolSlot::End), RowKind::End);
    Ok(m)
}

/// Parses and featurizes in one step.
pub fn featurize(text: &str) -> Result<(MolGraph, FeatureMatrix), FeaturizeError> {
    let g = chem::parse_smiles(text)?;
    let m = featurize_smiles(text, &g)?;
    Ok((g, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::Hybridization;

    fn sym(m: &FeatureMatrix, i: usize) -> Option<SymbolSlot> {
        SymbolSlot::ALL
            .iter()
            .copied()
            .find(|s| m.row(i)[s.column()] == 1.0)
    }

    #[test]
    fn methane_rows() {
        let (_, m) = featurize("C").unwrap();
        assert_eq!(m.valid_rows, 3);
        assert_eq!(m.row_kinds[..3], [RowKind::Start, RowKind::Atom(0), RowKind::End]);
        let r = m.row(1);
        assert_eq!(r[1], 1.0);
        assert_eq!(r[COL_N_H], 4.0);
        assert_eq!(r[COL_VALENCE], 4.0);
        assert_eq!(r[COL_DEGREE], 0.0);
        assert_eq!(r[COL_HYBRIDIZATION + Hybridization::Sp3.index()], 1.0);
        assert_eq!(sym(&m, 0), Some(SymbolSlot::Start));
        assert_eq!(sym(&m, 2), Some(SymbolSlot::End));
        assert!(m.data[3 * FEATURE_COLS..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn formaldehyde_rows() {
        let (_, m) = featurize("C=O").unwrap();
        assert_eq!(m.valid_rows, 5);
        assert_eq!(m.row(1)[1], 1.0);
        assert_eq!(m.row(1)[COL_N_H], 2.0);
        assert_eq!(sym(&m, 2), Some(SymbolSlot::Equals));
        assert!(m.row(2)[..ATOM_COLS].iter().all(|&v| v == 0.0));
        assert_eq!(m.row(3)[2], 1.0);
        assert_eq!(m.row(3)[COL_N_H], 0.0);
        assert_eq!(m.row_kinds[4], RowKind::End);
    }

    #[test]
    fn benzene_atom_row() {
        let (_, m) = featurize("c1ccccc1").unwrap();
        let r = m.row(1);
        assert_eq!(r[1], 1.0);
        assert_eq!(r[COL_N_H], 1.0);
        assert_eq!(r[COL_DEGREE], 2.0);
        assert_eq!(r[COL_RING], 1.0);
        assert_eq!(r[COL_AROMATIC], 1.0);
        assert_eq!(r[COL_HYBRIDIZATION + Hybridization::Sp2.index()], 1.0);
        assert_eq!(sym(&m, 2), Some(SymbolSlot::RingDigit));
    }

    #[test]
    fn charged_oxygen_and_ammonia() {
        let (_, m) = featurize("[O-]C").unwrap();
        // [, O, -, ], C
        assert_eq!(m.row(2)[2], 1.0);
        assert_eq!(m.row(2)[COL_CHARGE], -1.0);
        assert_eq!(sym(&m, 3), Some(SymbolSlot::Minus));
        let (_, m) = featurize("N").unwrap();
        assert_eq!(m.row(1)[3], 1.0);
        assert_eq!(m.row(1)[COL_N_H], 3.0);
        assert_eq!(m.row(1)[COL_DEGREE], 0.0);
    }

    #[test]
    fn ion_charge_digits() {
        let (_, m) = featurize("[Fe+2]").unwrap();
        assert_eq!(sym(&m, 3), Some(SymbolSlot::Plus));
        assert_eq!(sym(&m, 4), Some(SymbolSlot::IonCharge));
    }

    #[test]
    fn symbol_rows() {
        assert_eq!(symbol_feature_row(SymbolSlot::Equals)[SymbolSlot::Equals.column()], 1.0);
        assert_eq!(SymbolSlot::from_char('1').unwrap(), SymbolSlot::RingDigit);
        assert!(matches!(
            SymbolSlot::from_char('$'),
            Err(FeaturizeError::UnfeaturizableToken { .. })
        ));
        assert_eq!(SymbolSlot::ALL.len(), SYMBOL_COLS);
        for (i, s) in SymbolSlot::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
        }
    }

    #[test]
    fn too_long() {
        let long = "C".repeat(200);
        assert!(matches!(
            featurize(&long),
            Err(FeaturizeError::TooLong { rows: 202 })
        ));
        assert!(featurize(&"C".repeat(148)).is_ok());
        assert!(featurize(&"C".repeat(149)).is_err());
    }

    #[test]
    fn binary_block_layout() {
        let (_, m) = featurize("CO").unwrap();
        let bytes = m.to_le_bytes();
        assert_eq!(bytes.len(), MAX_ROWS * FEATURE_COLS * 4);
        let v = f32::from_le_bytes(bytes[FEATURE_COLS * 4 + 4..FEATURE_COLS * 4 + 8].try_into().unwrap());
        assert_eq!(v, 1.0);
        assert_eq!(m.to_csv().lines().count(), MAX_ROWS);
    }
}
