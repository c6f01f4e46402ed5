use std::ops::Range;

use super::element::Element;

pub type AtomId = usize;
pub type BondId = usize;

/// Five-way atom class used by the feature matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomType {
    H,
    C,
    O,
    N,
    Other,
}

impl AtomType {
    pub fn of(element: Element) -> AtomType {
        match element {
            Element::H => AtomType::H,
            Element::C => AtomType::C,
            Element::O => AtomType::O,
            Element::N => AtomType::N,
            _ => AtomType::Other,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Chirality {
    R,
    S,
    Other,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Hybridization {
    S,
    Sp,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
    #[default]
    Other,
}

impl Hybridization {
    pub const ALL: [Hybridization; 7] = [
        Hybridization::S,
        Hybridization::Sp,
        Hybridization::Sp2,
        Hybridization::Sp3,
        Hybridization::Sp3d,
        Hybridization::Sp3d2,
        Hybridization::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond-order contribution to valence; aromatic bonds count 1.5.
    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomNode {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i32,
    /// Bonds incident to this atom, in creation order.
    pub bonds: Vec<BondId>,
    pub implicit_h: u32,
    pub in_ring: bool,
    pub chirality: Chirality,
    pub hybridization: Hybridization,
    /// Index into [`MolGraph::tokens`] of this atom's token.
    pub token_index: usize,
    /// Written in square brackets; its hydrogen count is taken verbatim.
    pub bracket: bool,
    pub bracket_h: u32,
    pub isotope: Option<u32>,
}

impl AtomNode {
    pub fn atom_type(&self) -> AtomType {
        AtomType::of(self.element)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BondEdge {
    pub a: AtomId,
    pub b: AtomId,
    pub order: BondOrder,
    pub in_ring: bool,
}

impl BondEdge {
    pub fn other(&self, atom: AtomId) -> AtomId {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Character-level classification of SMILES text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenClass {
    AtomStart,
    Bond,
    Branch,
    RingDigit,
    Bracket,
    Charge,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Atom symbol, including a bracket atom's isotope prefix and a directly following H count.
    Atom(AtomId),
    /// One of `- = # : / \`.
    Bond(u8),
    BranchOpen,
    BranchClose,
    /// Ring-closure number: a single digit or the two digits after `%`.
    RingNumber,
    RingPercent,
    BracketOpen,
    BracketClose,
    /// `@`, `@@` or an extended tag such as `@TH1`, plus a directly following H count.
    Chirality,
    /// A single `+` or `-` inside brackets.
    ChargeSign(u8),
    /// Charge magnitude digits such as the `2` of `[Fe+2]`.
    ChargeMagnitude,
    /// Atom-map class `:n` inside brackets.
    AtomClass,
    Dot,
}

impl TokenKind {
    pub fn class(self) -> TokenClass {
        match self {
            TokenKind::Atom(_) => TokenClass::AtomStart,
            TokenKind::Bond(_) => TokenClass::Bond,
            TokenKind::BranchOpen | TokenKind::BranchClose => TokenClass::Branch,
            TokenKind::RingNumber | TokenKind::RingPercent => TokenClass::RingDigit,
            TokenKind::BracketOpen | TokenKind::BracketClose => TokenClass::Bracket,
            TokenKind::ChargeSign(_) | TokenKind::ChargeMagnitude => TokenClass::Charge,
            TokenKind::Chirality | TokenKind::AtomClass | TokenKind::Dot => TokenClass::Other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub span: Range<usize>,
    pub kind: TokenKind,
}

/// Non-fatal observations made while parsing or perceiving a molecule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub atom: Option<AtomId>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MolGraph {
    pub atoms: Vec<AtomNode>,
    pub bonds: Vec<BondEdge>,
    pub source: String,
    /// Tokens in string order; their spans tile `source`.
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
}

impl MolGraph {
    /// Per-character token classification of `source`.
    pub fn token_map(&self) -> Vec<TokenClass> {
        let mut map = Vec::with_capacity(self.source.len());
        for tok in &self.tokens {
            map.extend(std::iter::repeat_n(tok.kind.class(), tok.span.len()));
        }
        map
    }

    pub fn token_text(&self, token: &Token) -> &str {
        &self.source[token.span.clone()]
    }

    pub fn neighbors(&self, atom: AtomId) -> impl Iterator<Item = AtomId> + '_ {
        self.atoms[atom]
            .bonds
            .iter()
            .map(move |&b| self.bonds[b].other(atom))
    }

    pub fn degree(&self, atom: AtomId) -> usize {
        self.atoms[atom].bonds.len()
    }

    pub fn heavy_degree(&self, atom: AtomId) -> usize {
        self.neighbors(atom)
            .filter(|&n| self.atoms[n].element != Element::H)
            .count()
    }

    /// Bond-order sum over explicit bonds (aromatic = 1.5), not rounded.
    pub fn bond_order_sum(&self, atom: AtomId) -> f64 {
        self.atoms[atom]
            .bonds
            .iter()
            .map(|&b| self.bonds[b].order.valence())
            .sum()
    }

    /// Implicit hydrogens plus explicit hydrogen-atom neighbours.
    pub fn total_h(&self, atom: AtomId) -> u32 {
        let explicit = self
            .neighbors(atom)
            .filter(|&n| self.atoms[n].element == Element::H)
            .count() as u32;
        self.atoms[atom].implicit_h + explicit
    }

    /// Total valence: ceil of the bond-order sum plus implicit hydrogens.
    pub fn total_valence(&self, atom: AtomId) -> u32 {
        self.bond_order_sum(atom).ceil() as u32 + self.atoms[atom].implicit_h
    }

    pub fn bond_between(&self, a: AtomId, b: AtomId) -> Option<BondId> {
        self.atoms[a]
            .bonds
            .iter()
            .copied()
            .find(|&id| self.bonds[id].other(a) == b)
    }

    /// Number of connected components (0 for an empty graph).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(a) = stack.pop() {
                for n in self.neighbors(a) {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }
}
