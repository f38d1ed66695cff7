use super::{BondOrder, GraphError, MolecularGraph};

const SEARCH_LIMIT: usize = 1_000_000;

/// Replaces aromatic bonds with an alternating single/double assignment and
/// clears aromatic flags. Hydrogen counts are preserved exactly.
///
/// `priority[atom]` orders the search (lower first); with a canonical
/// ranking the chosen structure is itself canonical.
pub fn kekulize(
    graph: &MolecularGraph,
    priority: Option<&[usize]>,
) -> Result<MolecularGraph, GraphError> {
    let n = graph.atom_count();
    let prio: Vec<usize> = match priority {
        Some(p) => p.to_vec(),
        None => (0..n).collect(),
    };
    let needs: Vec<bool> = (0..n).map(|i| graph.needs_pi(i)).collect();

    // candidate pi partners, ordered by priority
    let mut cand: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, b) in graph.bonds().iter().enumerate() {
        if b.order == BondOrder::Aromatic && needs[b.a] && needs[b.b] {
            cand[b.a].push((b.b, bi));
            cand[b.b].push((b.a, bi));
        }
    }
    for c in cand.iter_mut() {
        c.sort_by_key(|&(v, _)| prio[v]);
    }

    let mut mate: Vec<Option<usize>> = vec![None; n];
    let mut steps = 0usize;
    if !search(&needs, &cand, &prio, &mut mate, &mut steps) {
        let atom = (0..n)
            .filter(|&i| needs[i])
            .min_by_key(|&i| prio[i])
            .unwrap_or(0);
        return Err(GraphError::Kekulization { atom });
    }

    let mut out = graph.clone();
    for (bi, b) in graph.bonds().iter().enumerate() {
        if b.order == BondOrder::Aromatic {
            let order = if mate[b.a] == Some(bi) {
                BondOrder::Double
            } else {
                BondOrder::Single
            };
            out.set_bond_order(bi, order);
        }
    }
    for i in 0..n {
        let mut atom = *graph.atom(i);
        let h = graph.hydrogen_count(i);
        atom.aromatic = false;
        out.set_atom(i, atom);
        if atom.explicit_h.is_none() && out.rule_hydrogens(i) != h {
            atom.explicit_h = Some(h);
            out.set_atom(i, atom);
        }
    }
    Ok(out)
}

/// Backtracking perfect matching. Picks the unmatched atom with the fewest
/// free partners (ties by priority) and tries partners in priority order.
fn search(
    needs: &[bool],
    cand: &[Vec<(usize, usize)>],
    prio: &[usize],
    mate: &mut [Option<usize>],
    steps: &mut usize,
) -> bool {
    *steps += 1;
    if *steps > SEARCH_LIMIT {
        return false;
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for u in 0..needs.len() {
        if !needs[u] || mate[u].is_some() {
            continue;
        }
        let free = cand[u].iter().filter(|&&(v, _)| mate[v].is_none()).count();
        let key = (free, prio[u], u);
        if best.is_none_or(|b| key < b) {
            best = Some(key);
        }
    }
    let Some((free, _, u)) = best else {
        return true;
    };
    if free == 0 {
        return false;
    }
    for &(v, bi) in &cand[u] {
        if mate[v].is_some() {
            continue;
        }
        mate[u] = Some(bi);
        mate[v] = Some(bi);
        if search(needs, cand, prio, mate, steps) {
            return true;
        }
        mate[u] = None;
        mate[v] = None;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn doubles(g: &MolecularGraph) -> usize {
        g.bonds().iter().filter(|b| b.order == BondOrder::Double).count()
    }

    #[test]
    fn benzene_gets_three_double_bonds() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let k = kekulize(&g, None).unwrap();
        assert_eq!(doubles(&k), 3);
        for i in 0..6 {
            assert_eq!(k.hydrogen_count(i), 1);
            assert!(!k.atom(i).aromatic);
        }
    }

    #[test]
    fn pyrrole_keeps_nh() {
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        let k = kekulize(&g, None).unwrap();
        assert_eq!(doubles(&k), 2);
        let n = (0..5).find(|&i| k.atom(i).element == crate::molgraph::Element::N).unwrap();
        assert_eq!(k.hydrogen_count(n), 1);
    }

    #[test]
    fn azulene_odd_rings() {
        let g = parse_smiles("c1ccc2cccc2cc1").unwrap();
        let k = kekulize(&g, None).unwrap();
        assert_eq!(doubles(&k), 5);
    }
}
