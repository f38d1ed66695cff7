use super::smiles::emit;
use super::{kekulize, ring_bond_flags, BondOrder, MolecularGraph};

/// Rank = number of items with a strictly smaller key.
fn rank_by<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0usize; keys.len()];
    for k in 1..idx.len() {
        ranks[idx[k]] = if keys[idx[k]] == keys[idx[k - 1]] {
            ranks[idx[k - 1]]
        } else {
            k
        };
    }
    ranks
}

fn distinct(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().filter(|&&r| !std::mem::replace(&mut seen[r], true)).count()
}

fn refine(g: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = distinct(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..g.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(v, b)| (ranks[v], g.bonds()[b].order.code()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = rank_by(&keys);
        let c = distinct(&next);
        ranks = next;
        if c == classes {
            return ranks;
        }
        classes = c;
    }
}

/// Morgan-style refinement of atom invariants followed by tie-breaking.
/// Returns distinct ranks `0..n`, invariant under atom relabelling up to
/// graph automorphism.
pub fn canonical_ranks(g: &MolecularGraph) -> Vec<usize> {
    let n = g.atom_count();
    let inv: Vec<(u8, bool, i8, u8, usize)> = (0..n)
        .map(|i| {
            let a = g.atom(i);
            (a.element.atomic_number(), a.aromatic, a.formal_charge, g.hydrogen_count(i), g.degree(i))
        })
        .collect();
    let mut ranks = refine(g, rank_by(&inv));
    while distinct(&ranks) < n {
        let mut count = vec![0usize; n];
        for &r in &ranks {
            count[r] += 1;
        }
        let r = (0..n).find(|&r| count[r] > 1).expect("a tied class exists");
        let chosen = (0..n).find(|&i| ranks[i] == r).expect("class member");
        for (i, rk) in ranks.iter_mut().enumerate() {
            if *rk == r && i != chosen {
                *rk = r + 1;
            }
        }
        ranks = refine(g, ranks);
    }
    ranks
}

/// Marks every conjugated ring bond whose double bond could shift along an
/// alternating cycle as aromatic, so that all Kekulé forms (and the
/// lowercase spelling) of one structure map to the same graph.
fn resonance_normal_form(g: &MolecularGraph) -> MolecularGraph {
    let k = if g.has_aromatic() {
        match kekulize(g, None) {
            Ok(k) => k,
            Err(_) => return g.clone(),
        }
    } else {
        g.clone()
    };
    let ring = ring_bond_flags(&k);
    let n = k.atom_count();
    let mut double_of: Vec<Option<usize>> = vec![None; n];
    let mut cand = vec![false; n];
    for i in 0..n {
        let doubles: Vec<usize> = k
            .neighbors(i)
            .iter()
            .map(|&(_, b)| b)
            .filter(|&b| k.bonds()[b].order == BondOrder::Double)
            .collect();
        let triple = k.neighbors(i).iter().any(|&(_, b)| k.bonds()[b].order == BondOrder::Triple);
        if doubles.len() == 1 && ring[doubles[0]] && !triple && k.atom(i).element.aromatic_budget().is_some() {
            double_of[i] = Some(doubles[0]);
            cand[i] = true;
        }
    }
    let in_v: Vec<bool> = (0..n)
        .map(|i| cand[i] && double_of[i].is_some_and(|b| cand[k.bonds()[b].other(i)]))
        .collect();
    if !in_v.iter().any(|&v| v) {
        return k;
    }
    let mut out = k.clone();
    for (bi, b) in k.bonds().iter().enumerate() {
        if ring[bi] && in_v[b.a] && in_v[b.b] && matches!(b.order, BondOrder::Single | BondOrder::Double) {
            out.set_bond_order(bi, BondOrder::Aromatic);
        }
    }
    for i in (0..n).filter(|&i| in_v[i]) {
        let mut atom = *k.atom(i);
        atom.aromatic = true;
        atom.explicit_h = Some(k.hydrogen_count(i));
        out.set_atom(i, atom);
    }
    if (0..n).any(|i| in_v[i] && !out.needs_pi(i)) || kekulize(&out, None).is_err() {
        return k;
    }
    out
}

/// Canonical SMILES-like key, invariant under atom relabelling and under
/// the choice of Kekulé structure.
pub fn canonical_key(g: &MolecularGraph) -> String {
    if g.is_empty() {
        return String::new();
    }
    let norm = resonance_normal_form(g);
    let ranks = canonical_ranks(&norm);
    emit(&norm, &ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(s: &str) -> String {
        canonical_key(&parse_smiles(s).unwrap())
    }

    #[test]
    fn simple_equalities() {
        assert_eq!(key("CCO"), key("OCC"));
        assert_ne!(key("CCO"), key("CCN"));
        assert_eq!(key("c1ccccc1"), key("C1=CC=CC=C1"));
        assert_eq!(key("Oc1ccccc1"), key("c1ccc(O)cc1"));
    }

    #[test]
    fn kekule_forms_of_fused_rings_share_key() {
        let aromatic = key("c1ccc2ccccc2c1");
        assert_eq!(aromatic, key("C1=CC=C2C=CC=CC2=C1"));
        assert_eq!(aromatic, key("C1=CC2=CC=CC=C2C=C1"));
        assert_ne!(key("C1=CCC=CC1"), key("C1=CC=CCC1"));
    }

    #[test]
    fn ranks_are_a_permutation() {
        let g = parse_smiles("CC(C)(C)c1ccc(cc1)C(C)(C)C").unwrap();
        let mut r = canonical_ranks(&g);
        r.sort_unstable();
        assert_eq!(r, (0..g.atom_count()).collect::<Vec<_>>());
    }

    #[test]
    fn permutation_sweep_single_key() {
        // 12 heavy atoms with a symmetric ring and a side chain
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1C").unwrap();
        assert_eq!(g.atom_count(), 12);
        let base = canonical_key(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut perm: Vec<usize> = (0..g.atom_count()).collect();
        for _ in 0..100 {
            perm.shuffle(&mut rng);
            assert_eq!(canonical_key(&g.permuted(&perm)), base);
        }
    }
}
