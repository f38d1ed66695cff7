use super::{index_tokens, SelfiesError, SelfiesToken};
use crate::molgraph::{bonding_capacity, kekulize, MolecularGraph};

struct Tree {
    pos: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    /// ring closures stored at the later atom: (earlier atom, bond)
    closures: Vec<Vec<(usize, usize)>>,
}

fn dfs(g: &MolecularGraph) -> Tree {
    let n = g.atom_count();
    let mut t = Tree {
        pos: vec![usize::MAX; n],
        children: vec![Vec::new(); n],
        closures: vec![Vec::new(); n],
    };
    let mut used = vec![false; g.bond_count()];
    let mut next_pos = 0;
    // (atom, neighbour cursor)
    let mut stack = vec![(0usize, 0usize)];
    t.pos[0] = next_pos;
    next_pos += 1;
    while let Some(&mut (u, ref mut k)) = stack.last_mut() {
        let nbrs = g.neighbors(u);
        if *k == nbrs.len() {
            stack.pop();
            continue;
        }
        let (v, b) = nbrs[*k];
        *k += 1;
        if used[b] {
            continue;
        }
        used[b] = true;
        if t.pos[v] == usize::MAX {
            t.pos[v] = next_pos;
            next_pos += 1;
            t.children[u].push((v, b));
            stack.push((v, 0));
        } else {
            t.closures[u].push((v, b));
        }
    }
    t
}

fn atom_token(g: &MolecularGraph, i: usize, bond: u8) -> SelfiesToken {
    let a = g.atom(i);
    let h = g.hydrogen_count(i);
    let explicit = if a.formal_charge == 0 && h == g.rule_hydrogens(i) {
        None
    } else {
        Some(h)
    };
    SelfiesToken::atom(bond, a.element, a.formal_charge, explicit)
}

fn fragment(g: &MolecularGraph, t: &Tree, root: usize, bond_in: u8, out: &mut Vec<SelfiesToken>) {
    let mut cur = root;
    let mut bond = bond_in;
    loop {
        out.push(atom_token(g, cur, bond));
        for &(v, b) in &t.closures[cur] {
            let q = t.pos[cur] - t.pos[v] - 1;
            let idx = index_tokens(q);
            out.push(SelfiesToken::ring(g.bonds()[b].order.sigma_order(), idx.len() as u8));
            out.extend(idx);
        }
        let kids = &t.children[cur];
        let Some((&(last, last_bond), rest)) = kids.split_last() else {
            return;
        };
        for &(c, b) in rest {
            let order = g.bonds()[b].order.sigma_order();
            let mut branch = Vec::new();
            fragment(g, t, c, order, &mut branch);
            let idx = index_tokens(branch.len() - 1);
            out.push(SelfiesToken::branch(order, idx.len() as u8));
            out.extend(idx);
            out.extend(branch);
        }
        cur = last;
        bond = g.bonds()[last_bond].order.sigma_order();
    }
}

/// Encodes a connected graph as SELFIES, traversing depth-first from atom 0
/// with neighbours in insertion order. Aromatic input is kekulized first.
pub fn encode(graph: &MolecularGraph) -> Result<Vec<SelfiesToken>, SelfiesError> {
    if graph.is_empty() {
        return Err(SelfiesError::EmptyGraph);
    }
    if !graph.is_connected() {
        return Err(SelfiesError::DisconnectedGraph);
    }
    let owned;
    let g = if graph.has_aromatic() {
        owned = kekulize(graph, None).map_err(|_| SelfiesError::Kekulization)?;
        &owned
    } else {
        graph
    };
    for i in 0..g.atom_count() {
        let tok = atom_token(g, i, 1);
        let a = g.atom(i);
        debug_assert!(bonding_capacity(a.element, a.formal_charge) as i32 >= tok.capacity());
        if (g.sigma_sum(i) as i32) > tok.capacity() {
            return Err(SelfiesError::CapacityExceeded { atom: i });
        }
    }
    let t = dfs(g);
    let mut out = Vec::new();
    fragment(g, &t, 0, 1, &mut out);
    Ok(out)
}
