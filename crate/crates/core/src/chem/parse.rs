use std::collections::BTreeMap;

use thiserror::Error;

use super::element::Element;
use super::graph::{
    AtomId, AtomNode, BondEdge, BondOrder, Chirality, Hybridization, MolGraph, Token, TokenKind,
};

/// SMILES syntax errors. Offsets are byte positions in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    EmptyInput,
    #[error("unmatched branch parenthesis at offset {offset}")]
    UnmatchedBranch { offset: usize },
    #[error("ring closure opened at offset {offset} is never closed")]
    UnpairedRingClosure { offset: usize },
    #[error("unknown token {found:?} at offset {offset}")]
    UnknownToken { offset: usize, found: char },
    #[error("bracket atom opened at offset {offset} is not closed")]
    UnclosedBracket { offset: usize },
    #[error("token {found:?} at offset {offset} is not allowed here")]
    MisplacedToken { offset: usize, found: char },
    #[error("bond symbol at offset {offset} is not followed by an atom")]
    DanglingBond { offset: usize },
    #[error("ring closure at offset {offset} would create a self-loop or duplicate bond")]
    InvalidRingBond { offset: usize },
}

impl SmilesError {
    /// Byte offset the error points at; `None` for empty input.
    pub fn offset(&self) -> Option<usize> {
        match *self {
            SmilesError::EmptyInput => None,
            SmilesError::UnmatchedBranch { offset }
            | SmilesError::UnpairedRingClosure { offset }
            | SmilesError::UnknownToken { offset, .. }
            | SmilesError::UnclosedBracket { offset }
            | SmilesError::MisplacedToken { offset, .. }
            | SmilesError::DanglingBond { offset }
            | SmilesError::InvalidRingBond { offset } => Some(offset),
        }
    }
}

struct OpenRing {
    atom: AtomId,
    bond: Option<u8>,
    offset: usize,
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<AtomNode>,
    bonds: Vec<BondEdge>,
    tokens: Vec<Token>,
    prev: Option<AtomId>,
    /// Explicit bond symbol and its offset waiting for the next atom or ring number.
    pending: Option<(u8, usize)>,
    branches: Vec<(Option<AtomId>, usize, usize)>,
    rings: BTreeMap<u32, OpenRing>,
    /// Ring numbers are allowed directly after an atom (or another ring number).
    can_ring: bool,
}

/// Parses raw SMILES text into a graph and tokens, without perception.
pub(crate) fn parse_raw(input: &[u8]) -> Result<MolGraph, SmilesError> {
    if input.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    if let Some(offset) = input.iter().position(|b| !b.is_ascii()) {
        let found = String::from_utf8_lossy(&input[offset..])
            .chars()
            .next()
            .unwrap_or(char::REPLACEMENT_CHARACTER);
        return Err(SmilesError::UnknownToken { offset, found });
    }
    let mut p = Parser {
        input,
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        tokens: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
        can_ring: false,
    };
    p.run()?;
    Ok(MolGraph {
        atoms: p.atoms,
        bonds: p.bonds,
        // ASCII was checked above.
        source: String::from_utf8(input.to_vec()).expect("ascii input"),
        tokens: p.tokens,
        diagnostics: Vec::new(),
    })
}

fn is_bond_symbol(b: u8) -> bool {
    matches!(b, b'-' | b'=' | b'#' | b':' | b'/' | b'\\')
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn misplaced(&self, offset: usize) -> SmilesError {
        SmilesError::MisplacedToken {
            offset,
            found: self.input[offset] as char,
        }
    }

    fn unknown(&self, offset: usize) -> SmilesError {
        SmilesError::UnknownToken {
            offset,
            found: self.input[offset] as char,
        }
    }

    fn push_token(&mut self, start: usize, kind: TokenKind) {
        self.tokens.push(Token {
            span: start..self.pos,
            kind,
        });
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let empty_branch = matches!(self.tokens.last(), Some(t) if t.kind == TokenKind::BranchOpen);
                    if self.prev.is_none() || self.pending.is_some() || empty_branch {
                        return Err(self.misplaced(start));
                    }
                    self.pos += 1;
                    self.branches.push((self.prev, start, self.atoms.len()));
                    self.can_ring = false;
                    self.push_token(start, TokenKind::BranchOpen);
                }
                b')' => {
                    let Some((anchor, _, atoms_before)) = self.branches.pop() else {
                        return Err(SmilesError::UnmatchedBranch { offset: start });
                    };
                    if let Some((_, off)) = self.pending {
                        return Err(SmilesError::DanglingBond { offset: off });
                    }
                    if self.atoms.len() == atoms_before {
                        return Err(self.misplaced(start));
                    }
                    self.pos += 1;
                    self.prev = anchor;
                    self.can_ring = false;
                    self.push_token(start, TokenKind::BranchClose);
                }
                b'.' => {
                    if let Some((_, off)) = self.pending {
                        return Err(SmilesError::DanglingBond { offset: off });
                    }
                    if self.prev.is_none() {
                        return Err(self.misplaced(start));
                    }
                    self.pos += 1;
                    self.prev = None;
                    self.can_ring = false;
                    self.push_token(start, TokenKind::Dot);
                }
                _ if is_bond_symbol(c) => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.misplaced(start));
                    }
                    self.pos += 1;
                    self.pending = Some((c, start));
                    self.push_token(start, TokenKind::Bond(c));
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => self.bracket_atom()?,
                _ => self.organic_atom()?,
            }
        }
        if let Some((_, off)) = self.pending {
            return Err(SmilesError::DanglingBond { offset: off });
        }
        if let Some(&(_, offset, _)) = self.branches.last() {
            return Err(SmilesError::UnmatchedBranch { offset });
        }
        if let Some(ring) = self.rings.values().min_by_key(|r| r.offset) {
            return Err(SmilesError::UnpairedRingClosure {
                offset: ring.offset,
            });
        }
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        if !self.can_ring {
            return Err(self.misplaced(start));
        }
        let number = if self.input[start] == b'%' {
            self.pos += 1;
            self.push_token(start, TokenKind::RingPercent);
            let digits_start = self.pos;
            let digits = self.input.get(digits_start..digits_start + 2);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 2;
                    self.push_token(digits_start, TokenKind::RingNumber);
                    u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0')
                }
                _ => return Err(self.misplaced(start)),
            }
        } else {
            self.pos += 1;
            self.push_token(start, TokenKind::RingNumber);
            u32::from(self.input[start] - b'0')
        };
        let atom = self.prev.expect("can_ring implies a previous atom");
        let bond = self.pending.take().map(|(b, _)| b);
        match self.rings.remove(&number) {
            Some(open) => {
                let symbol = match (open.bond, bond) {
                    (Some(x), Some(y)) if x != y && !is_directional(x, y) => {
                        return Err(SmilesError::InvalidRingBond { offset: start });
                    }
                    (x, y) => y.or(x),
                };
                if open.atom == atom || self.bond_exists(open.atom, atom) {
                    return Err(SmilesError::InvalidRingBond { offset: start });
                }
                self.add_bond(open.atom, atom, symbol);
            }
            None => {
                self.rings.insert(
                    number,
                    OpenRing {
                        atom,
                        bond,
                        offset: start,
                    },
                );
            }
        }
        Ok(())
    }

    fn bond_exists(&self, a: AtomId, b: AtomId) -> bool {
        self.atoms[a].bonds.iter().any(|&id| {
            let e = &self.bonds[id];
            (e.a == a && e.b == b) || (e.a == b && e.b == a)
        })
    }

    fn add_bond(&mut self, a: AtomId, b: AtomId, symbol: Option<u8>) {
        let order = match symbol {
            Some(b'=') => BondOrder::Double,
            Some(b'#') => BondOrder::Triple,
            Some(b':') => BondOrder::Aromatic,
            Some(_) => BondOrder::Single,
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        let id = self.bonds.len();
        self.bonds.push(BondEdge {
            a,
            b,
            order,
            in_ring: false,
        });
        self.atoms[a].bonds.push(id);
        self.atoms[b].bonds.push(id);
    }

    fn attach_atom(&mut self, atom: AtomNode) -> AtomId {
        let id = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let symbol = self.pending.take().map(|(b, _)| b);
            self.add_bond(prev, id, symbol);
        }
        self.prev = Some(id);
        self.can_ring = true;
        id
    }

    fn new_atom(element: Element, aromatic: bool, bracket: bool) -> AtomNode {
        AtomNode {
            element,
            aromatic,
            formal_charge: 0,
            bonds: Vec::new(),
            implicit_h: 0,
            in_ring: false,
            chirality: Chirality::None,
            hybridization: Hybridization::Other,
            token_index: 0,
            bracket,
            bracket_h: 0,
            isotope: None,
        }
    }

    fn organic_atom(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let c = self.input[start];
        let next = self.input.get(start + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::CL, false, 2),
            (b'B', Some(b'r')) => (Element::BR, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            (b'*', _) => (Element::WILDCARD, false, 1),
            _ => return Err(self.unknown(start)),
        };
        self.pos += len;
        let mut atom = Self::new_atom(element, aromatic, false);
        atom.token_index = self.tokens.len();
        let id = self.attach_atom(atom);
        self.push_token(start, TokenKind::Atom(id));
        Ok(())
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| {
            std::str::from_utf8(&self.input[start..self.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(u32::MAX)
        })
    }

    fn bracket_atom(&mut self) -> Result<(), SmilesError> {
        let open = self.pos;
        let Some(close_rel) = self.input[open..].iter().position(|&b| b == b']') else {
            return Err(SmilesError::UnclosedBracket { offset: open });
        };
        let close = open + close_rel;
        if self.input[open + 1..close].contains(&b'[') {
            return Err(SmilesError::UnclosedBracket { offset: open });
        }
        self.pos += 1;
        self.push_token(open, TokenKind::BracketOpen);

        // isotope + element symbol form the atom token
        let atom_start = self.pos;
        let isotope = self.digits();
        let (element, aromatic) = self.bracket_element(close)?;
        let mut atom = Self::new_atom(element, aromatic, true);
        atom.isotope = isotope;
        let token_index = self.tokens.len();
        atom.token_index = token_index;

        let mut chirality_token = None;
        if self.peek() == Some(b'@') {
            let s = self.pos;
            self.pos += 1;
            atom.chirality = if self.peek() == Some(b'@') {
                self.pos += 1;
                Chirality::R
            } else if self.peek().is_some_and(|b| b.is_ascii_uppercase() && b != b'H') {
                let tag_start = self.pos;
                while self.peek().is_some_and(|b| b.is_ascii_uppercase()) && self.pos < close {
                    self.pos += 1;
                }
                match &self.input[tag_start..self.pos] {
                    b"TH" | b"AL" | b"SP" | b"TB" | b"OH" => {}
                    _ => return Err(self.unknown(tag_start)),
                }
                if self.digits().is_none() {
                    return Err(self.misplaced(s));
                }
                Chirality::Other
            } else {
                Chirality::S
            };
            chirality_token = Some(s);
        }
        // an H count extends whichever token precedes it
        if self.peek() == Some(b'H') {
            self.pos += 1;
            atom.bracket_h = self.digits().unwrap_or(1);
        }
        match chirality_token {
            Some(s) => {
                self.tokens.push(Token {
                    span: atom_start..s,
                    kind: TokenKind::Atom(usize::MAX),
                });
                self.push_token(s, TokenKind::Chirality);
            }
            None => self.push_token(atom_start, TokenKind::Atom(usize::MAX)),
        }

        // charge
        let mut charge: i32 = 0;
        while let Some(sign @ (b'+' | b'-')) = self.peek() {
            let s = self.pos;
            self.pos += 1;
            self.push_token(s, TokenKind::ChargeSign(sign));
            let unit = if sign == b'+' { 1 } else { -1 };
            let ds = self.pos;
            match self.digits() {
                Some(mag) => {
                    self.push_token(ds, TokenKind::ChargeMagnitude);
                    charge = charge.saturating_add(unit * mag.min(i32::MAX as u32) as i32);
                    break;
                }
                None => charge += unit,
            }
        }
        atom.formal_charge = charge;

        if self.peek() == Some(b':') {
            let s = self.pos;
            self.pos += 1;
            if self.digits().is_none() {
                return Err(self.misplaced(s));
            }
            self.push_token(s, TokenKind::AtomClass);
        }
        if self.pos != close {
            return Err(self.unknown(self.pos));
        }
        self.pos += 1;
        self.push_token(close, TokenKind::BracketClose);

        let id = self.attach_atom(atom);
        self.tokens[token_index].kind = TokenKind::Atom(id);
        Ok(())
    }

    fn bracket_element(&mut self, close: usize) -> Result<(Element, bool), SmilesError> {
        let start = self.pos;
        if start >= close {
            return Err(self.misplaced(start));
        }
        let c = self.input[start];
        let next = (start + 1 < close).then(|| self.input[start + 1]);
        if c == b'*' {
            self.pos += 1;
            return Ok((Element::WILDCARD, false));
        }
        if c.is_ascii_lowercase() {
            let two = next.map(|n| [c, n]);
            let aromatic2 = match two.as_ref().map(|t| &t[..]) {
                Some(b"se") => Some(Element::SE),
                Some(b"as") => Some(Element::AS),
                Some(b"te") => Some(Element::TE),
                _ => None,
            };
            if let Some(e) = aromatic2 {
                self.pos += 2;
                return Ok((e, true));
            }
            let e = match c {
                b'b' => Element::B,
                b'c' => Element::C,
                b'n' => Element::N,
                b'o' => Element::O,
                b'p' => Element::P,
                b's' => Element::S,
                _ => return Err(self.unknown(start)),
            };
            self.pos += 1;
            return Ok((e, true));
        }
        if !c.is_ascii_uppercase() {
            return Err(self.unknown(start));
        }
        if let Some(n) = next.filter(u8::is_ascii_lowercase) {
            let sym = [c, n];
            if let Some(e) = std::str::from_utf8(&sym).ok().and_then(Element::from_symbol) {
                self.pos += 2;
                return Ok((e, false));
            }
        }
        let sym = [c];
        match std::str::from_utf8(&sym).ok().and_then(Element::from_symbol) {
            Some(e) => {
                self.pos += 1;
                Ok((e, false))
            }
            None => Err(self.unknown(start)),
        }
    }
}

/// `/` and `\` on the two ends of a ring closure are a stereo pair, not a conflict.
fn is_directional(x: u8, y: u8) -> bool {
    matches!((x, y), (b'/', b'\\') | (b'\\', b'/'))
}
