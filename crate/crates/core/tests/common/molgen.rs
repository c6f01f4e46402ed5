//! Random molecular graphs written out as SMILES, with the graph kept alongside as an oracle.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct GenMol {
    pub smiles: String,
    pub atoms: usize,
    /// Bonds between atom ids in SMILES text order.
    pub edges: Vec<(usize, usize)>,
}

pub struct GenOptions {
    pub max_atoms: usize,
    pub max_extra_edges: usize,
    /// Atom spellings to draw from.
    pub atoms: &'static [&'static str],
    /// Bond symbols for tree bonds; "" means an implicit single bond.
    pub bonds: &'static [&'static str],
}

pub const PLAIN: GenOptions = GenOptions {
    max_atoms: 8,
    max_extra_edges: 3,
    atoms: &["C", "N", "O"],
    bonds: &[""],
};

pub const RICH: GenOptions = GenOptions {
    max_atoms: 12,
    max_extra_edges: 3,
    atoms: &[
        "C", "C", "C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "[NH4+]", "[O-]", "[C@@H]", "[C@H]", "[Fe+2]",
        "[13CH3]", "[CH3:5]", "[nH]", "[Se]", "[N+]", "[S--]", "[2H]",
    ],
    bonds: &["", "", "", "=", "#", "-", "/", "\\"],
};

pub fn random_mol(rng: &mut ChaCha8Rng, opt: &GenOptions) -> GenMol {
    let n = rng.random_range(1..=opt.max_atoms);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let open: Vec<usize> = (0..i).filter(|&j| adj[j].len() < 4).collect();
        let p = *open.choose(rng).unwrap();
        adj[p].push(i);
        adj[i].push(p);
    }
    for _ in 0..rng.random_range(0..=opt.max_extra_edges) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !adj[a].contains(&b) && adj[a].len() < 4 && adj[b].len() < 4 {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }

    // DFS preorder and tree children.
    let mut pre = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    fn dfs(u: usize, adj: &[Vec<usize>], pre: &mut [usize], order: &mut Vec<usize>, ch: &mut [Vec<usize>]) {
        pre[u] = order.len();
        order.push(u);
        for &v in &adj[u] {
            if pre[v] == usize::MAX {
                ch[u].push(v);
                dfs(v, adj, pre, order, ch);
            }
        }
    }
    dfs(0, &adj, &mut pre, &mut order, &mut children);

    let mut closures: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (label, partner)
    let mut label = 0;
    for a in 0..n {
        for &b in &adj[a] {
            let tree = children[a].contains(&b) || children[b].contains(&a);
            if a < b && !tree {
                label += 1;
                closures[a].push((label, b));
                closures[b].push((label, a));
            }
        }
    }
    for c in &mut closures {
        c.sort_unstable_by_key(|&(l, _)| l);
    }
    let percent = rng.random_bool(0.2);
    let atom_text: Vec<&str> = (0..n).map(|_| *opt.atoms.choose(rng).unwrap()).collect();
    let bond_text: Vec<&str> = (0..n).map(|_| *opt.bonds.choose(rng).unwrap()).collect();

    fn emit(
        u: usize,
        s: &mut String,
        atom_text: &[&str],
        bond_text: &[&str],
        closures: &[Vec<(usize, usize)>],
        children: &[Vec<usize>],
        percent: bool,
    ) {
        s.push_str(atom_text[u]);
        for &(l, _) in &closures[u] {
            if percent {
                s.push_str(&format!("%{}", l + 10));
            } else {
                s.push_str(&l.to_string());
            }
        }
        let last = children[u].len().saturating_sub(1);
        for (i, &v) in children[u].iter().enumerate() {
            if i < last {
                s.push('(');
            }
            s.push_str(bond_text[v]);
            emit(v, s, atom_text, bond_text, closures, children, percent);
            if i < last {
                s.push(')');
            }
        }
    }
    let mut smiles = String::new();
    emit(0, &mut smiles, &atom_text, &bond_text, &closures, &children, percent);

    let mut edges = Vec::new();
    for a in 0..n {
        for &b in &adj[a] {
            if a < b {
                edges.push((pre[a].min(pre[b]), pre[a].max(pre[b])));
            }
        }
    }
    edges.sort_unstable();
    GenMol {
        smiles,
        atoms: n,
        edges,
    }
}

/// Two or more generated fragments joined with `.` now and then.
pub fn random_smiles(rng: &mut ChaCha8Rng, opt: &GenOptions) -> String {
    let mut s = random_mol(rng, opt).smiles;
    while rng.random_bool(0.15) {
        s.push('.');
        s.push_str(&random_mol(rng, opt).smiles);
    }
    s
}

/// Whether bond `skip` lies on a cycle: its ends stay connected without it.
pub fn edge_on_cycle(n: usize, edges: &[(usize, usize)], skip: usize) -> bool {
    let (src, dst) = edges[skip];
    let mut seen = vec![false; n];
    let mut stack = vec![src];
    seen[src] = true;
    while let Some(u) = stack.pop() {
        if u == dst {
            return true;
        }
        for (i, &(a, b)) in edges.iter().enumerate() {
            if i == skip {
                continue;
            }
            let v = if a == u { b } else if b == u { a } else { continue };
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}
