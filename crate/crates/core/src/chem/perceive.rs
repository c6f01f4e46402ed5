use super::element::Element;
use super::graph::{BondOrder, Diagnostic, Hybridization, MolGraph};

/// Flags every bond lying on a cycle (i.e. every non-bridge) and every atom touching one.
///
/// Bridges are found with an iterative lowlink DFS so long chains cannot overflow the stack.
pub fn compute_ring_membership(g: &mut MolGraph) {
    let n = g.atoms.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; g.bonds.len()];
    let mut timer = 0;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, bond used to enter it, next incident-bond cursor)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (atom, parent_bond, ref mut cursor)) = stack.last_mut() {
            if let Some(&bond) = g.atoms[atom].bonds.get(*cursor) {
                *cursor += 1;
                if Some(bond) == parent_bond {
                    continue;
                }
                let next = g.bonds[bond].other(atom);
                if disc[next] == usize::MAX {
                    disc[next] = timer;
                    low[next] = timer;
                    timer += 1;
                    stack.push((next, Some(bond), 0));
                } else {
                    low[atom] = low[atom].min(disc[next]);
                }
            } else {
                stack.pop();
                if let (Some(bond), Some(&(parent, _, _))) = (parent_bond, stack.last()) {
                    low[parent] = low[parent].min(low[atom]);
                    if low[atom] > disc[parent] {
                        is_bridge[bond] = true;
                    }
                }
            }
        }
    }

    for atom in &mut g.atoms {
        atom.in_ring = false;
    }
    for (id, bond) in g.bonds.iter_mut().enumerate() {
        bond.in_ring = !is_bridge[id];
        if bond.in_ring {
            g.atoms[bond.a].in_ring = true;
            g.atoms[bond.b].in_ring = true;
        }
    }
}

/// Enforces "aromatic implies ring": lowercase atoms outside any ring lose the flag, and
/// aromatic bonds that are not ring bonds between two aromatic atoms become single.
pub fn sanitize_aromaticity(g: &mut MolGraph) {
    for id in 0..g.atoms.len() {
        if g.atoms[id].aromatic && !g.atoms[id].in_ring {
            g.atoms[id].aromatic = false;
            g.diagnostics.push(Diagnostic {
                atom: Some(id),
                message: "aromatic atom outside any ring treated as aliphatic".into(),
            });
        }
    }
    for id in 0..g.bonds.len() {
        let b = &g.bonds[id];
        if b.order == BondOrder::Aromatic
            && !(b.in_ring && g.atoms[b.a].aromatic && g.atoms[b.b].aromatic)
        {
            g.bonds[id].order = BondOrder::Single;
            g.diagnostics.push(Diagnostic {
                atom: Some(g.bonds[id].a),
                message: format!("aromatic bond {id} outside an aromatic ring treated as single"),
            });
        }
    }
}

/// Assigns implicit hydrogens: bracket atoms keep their written count, organic-subset atoms
/// get `default_valence - ceil(bond order sum)`, clamped at zero with a diagnostic.
pub fn compute_implicit_hydrogens(g: &mut MolGraph) {
    for id in 0..g.atoms.len() {
        let atom = &g.atoms[id];
        if atom.bracket {
            g.atoms[id].implicit_h = atom.bracket_h;
            continue;
        }
        let Some(valence) = atom.element.default_valence() else {
            g.atoms[id].implicit_h = 0;
            continue;
        };
        let used = g.bond_order_sum(id).ceil() as i64;
        let h = i64::from(valence) - used;
        if h < 0 {
            g.diagnostics.push(Diagnostic {
                atom: Some(id),
                message: format!(
                    "{} has bond order sum {used} above default valence {valence}; no implicit H",
                    atom.element
                ),
            });
        }
        g.atoms[id].implicit_h = h.max(0) as u32;
    }
}

/// Hybridization from bond multiplicity: triple or two doubles → sp, aromatic or one
/// double → sp2, otherwise sp3. Hydrogen is `s`; elements without a rule are `other`.
pub fn infer_hybridization(g: &mut MolGraph) {
    for id in 0..g.atoms.len() {
        let atom = &g.atoms[id];
        let hyb = if atom.element == Element::H {
            Hybridization::S
        } else if !atom.element.has_hybridization_rule() {
            Hybridization::Other
        } else {
            let mut doubles = 0;
            let mut triples = 0;
            for &b in &atom.bonds {
                match g.bonds[b].order {
                    BondOrder::Double => doubles += 1,
                    BondOrder::Triple => triples += 1,
                    _ => {}
                }
            }
            if triples > 0 || doubles >= 2 {
                Hybridization::Sp
            } else if atom.aromatic || doubles == 1 {
                Hybridization::Sp2
            } else {
                Hybridization::Sp3
            }
        };
        g.atoms[id].hybridization = hyb;
    }
}
