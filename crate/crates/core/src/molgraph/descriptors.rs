use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BondOrder, Element, MolecularGraph, HYDROGEN_MASS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptors {
    pub molecular_weight: f64,
    pub heavy_atom_count: usize,
    pub ring_count: usize,
    pub max_ring_size: usize,
    pub rotatable_bond_count: usize,
    pub heteroatom_count: usize,
    pub aromatic_atom_fraction: f64,
    pub has_charged_atom: bool,
}

/// Marks bonds that lie on at least one cycle (i.e. are not bridges).
pub fn ring_bond_flags(g: &MolecularGraph) -> Vec<bool> {
    let n = g.atom_count();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut in_ring = vec![true; g.bond_count()];
    let mut time = 0usize;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, parent bond, neighbour cursor)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (u, pb, ref mut k)) = stack.last_mut() {
            if *k < g.degree(u) {
                let (v, b) = g.neighbors(u)[*k];
                *k += 1;
                if Some(b) == pb {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, Some(b), 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let (Some(b), Some(&(p, _, _))) = (pb, stack.last()) {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        in_ring[b] = false;
                    }
                }
            }
        }
    }
    in_ring
}

/// Length of the shortest cycle through `bond`, by BFS with the bond removed.
fn smallest_ring_through(g: &MolecularGraph, bond: usize) -> Option<usize> {
    let b = g.bonds()[bond];
    let mut dist = vec![usize::MAX; g.atom_count()];
    let mut q = VecDeque::new();
    dist[b.a] = 0;
    q.push_back(b.a);
    while let Some(u) = q.pop_front() {
        for &(v, bi) in g.neighbors(u) {
            if bi == bond || dist[v] != usize::MAX {
                continue;
            }
            dist[v] = dist[u] + 1;
            if v == b.b {
                return Some(dist[v] + 1);
            }
            q.push_back(v);
        }
    }
    None
}

pub fn descriptors(g: &MolecularGraph) -> Descriptors {
    let n = g.atom_count();
    let mut mw = 0.0;
    let mut hetero = 0;
    let mut aromatic = 0;
    let mut charged = false;
    for i in 0..n {
        let a = g.atom(i);
        mw += a.element.mass() + g.hydrogen_count(i) as f64 * HYDROGEN_MASS;
        if a.element != Element::C {
            hetero += 1;
        }
        if a.aromatic {
            aromatic += 1;
        }
        if a.formal_charge != 0 {
            charged = true;
        }
    }
    let ring_flags = ring_bond_flags(g);
    let components = g.components().len();
    let ring_count = (g.bond_count() + components).saturating_sub(n);
    let max_ring_size = (0..g.bond_count())
        .filter(|&b| ring_flags[b])
        .filter_map(|b| smallest_ring_through(g, b))
        .max()
        .unwrap_or(0);
    let mut triple = vec![false; n];
    for b in g.bonds().iter().filter(|b| b.order == BondOrder::Triple) {
        triple[b.a] = true;
        triple[b.b] = true;
    }
    let rotatable = g
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(bi, b)| {
            b.order == BondOrder::Single
                && !ring_flags[bi]
                && [b.a, b.b].iter().all(|&x| g.degree(x) > 1 && !triple[x])
        })
        .count();
    Descriptors {
        molecular_weight: mw,
        heavy_atom_count: n,
        ring_count,
        max_ring_size,
        rotatable_bond_count: rotatable,
        heteroatom_count: hetero,
        aromatic_atom_fraction: if n == 0 { 0.0 } else { aromatic as f64 / n as f64 },
        has_charged_atom: charged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn d(s: &str) -> Descriptors {
        descriptors(&parse_smiles(s).unwrap())
    }

    #[test]
    fn ethanol_weight() {
        let expected = 2.0 * 12.011 + 6.0 * 1.008 + 15.999;
        assert!((d("CCO").molecular_weight - expected).abs() < 1e-9);
        assert!((d("CCO").molecular_weight - 46.069).abs() < 0.01);
    }

    #[test]
    fn methane_counts() {
        let m = d("C");
        assert_eq!(m.rotatable_bond_count, 0);
        assert_eq!(m.ring_count, 0);
        assert_eq!(m.max_ring_size, 0);
    }

    #[test]
    fn benzene_ring() {
        let b = d("c1ccccc1");
        assert_eq!(b.aromatic_atom_fraction, 1.0);
        assert_eq!(b.max_ring_size, 6);
        assert_eq!(b.ring_count, 1);
    }

    #[test]
    fn fused_and_bridged_rings() {
        let n = d("c1ccc2ccccc2c1");
        assert_eq!((n.ring_count, n.max_ring_size), (2, 6));
        let nb = d("C1CC2CCC1C2");
        assert_eq!((nb.ring_count, nb.max_ring_size), (2, 5));
        let mac = d("C1CCCCCCCCC1");
        assert_eq!(mac.max_ring_size, 10);
    }

    #[test]
    fn rotatable_bonds() {
        // butane: only the central bond; biphenyl: inter-ring bond
        assert_eq!(d("CCCC").rotatable_bond_count, 1);
        assert_eq!(d("c1ccccc1-c1ccccc1").rotatable_bond_count, 1);
        assert_eq!(d("CC(=O)NC").rotatable_bond_count, 1);
        assert_eq!(d("C#CC").rotatable_bond_count, 0);
    }

    #[test]
    fn heteroatoms_and_charge() {
        let x = d("C[N+](C)(C)CCO");
        assert_eq!(x.heteroatom_count, 2);
        assert!(x.has_charged_atom);
    }
}
