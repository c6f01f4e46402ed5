//! SMILES parsing and the atom-level perception the feature matrix needs.

pub mod element;
pub mod graph;
mod parse;
mod perceive;

pub use element::Element;
pub use graph::{
    AtomId, AtomNode, AtomType, BondEdge, BondId, BondOrder, Chirality, Diagnostic,
    Hybridization, MolGraph, Token, TokenClass, TokenKind,
};
pub use parse::SmilesError;
pub use perceive::{
    compute_implicit_hydrogens, compute_ring_membership, infer_hybridization,
    sanitize_aromaticity,
};

/// Parses SMILES text and runs ring, aromaticity, hydrogen and hybridization perception.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    parse_smiles_bytes(text.as_bytes())
}

/// Byte-level entry point; any input yields either a graph or a structured error.
pub fn parse_smiles_bytes(bytes: &[u8]) -> Result<MolGraph, SmilesError> {
    let mut g = parse::parse_raw(bytes)?;
    compute_ring_membership(&mut g);
    sanitize_aromaticity(&mut g);
    compute_implicit_hydrogens(&mut g);
    infer_hybridization(&mut g);
    Ok(g)
}
