//! Molecular graphs, SMILES I/O, canonical keys, descriptors and fingerprints.

mod canon;
pub mod dataset;
mod descriptors;
mod element;
mod fingerprint;
mod kekule;
mod smiles;

pub use canon::{canonical_key, canonical_ranks};
pub use dataset::{dataset_lines, parse_dataset, read_dataset, read_text, DatasetError, DatasetLine};
pub use descriptors::{descriptors, ring_bond_flags, Descriptors};
pub use element::{bonding_capacity, max_valence, Element, ALL_ELEMENTS, HYDROGEN_MASS};
pub use fingerprint::{
    path_fingerprint, tanimoto, Fingerprint, FingerprintError, DEFAULT_MAX_PATH_LEN, DEFAULT_WIDTH,
};
pub use kekule::kekulize;
pub use smiles::{parse_smiles, write_smiles, AtomOrder, SmilesError, WriteError};

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// `None` means hydrogens follow the organic-subset valence rules.
    pub explicit_h: Option<u8>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            aromatic: false,
            formal_charge: 0,
            explicit_h: None,
        }
    }

    pub fn aromatic(element: Element) -> Atom {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer order used by the sigma + pi accounting; an aromatic bond
    /// contributes its sigma part here and its pi part through the atom.
    pub fn sigma_order(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn from_order(order: u8) -> Option<BondOrder> {
        match order {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "-",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic => ":",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("atom index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("self-loop on atom {0}")]
    SelfLoop(usize),
    #[error("atoms {0} and {1} are already bonded")]
    DuplicateBond(usize, usize),
    #[error("formal charge {0} outside [-2, 2]")]
    ChargeOutOfRange(i8),
    #[error("atom {atom} ({element}) exceeds its maximum valence")]
    ValenceViolation { atom: usize, element: Element },
    #[error("aromatic system cannot be assigned alternating bonds")]
    Kekulization { atom: usize },
}

/// Atoms plus bonds with an adjacency index. Construction goes through
/// `add_atom`/`add_bond`, which enforce the structural invariants;
/// valence is checked by `validate`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    pub fn new() -> MolecularGraph {
        MolecularGraph::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbour, bond index)` pairs in insertion order.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn add_atom(&mut self, atom: Atom) -> Result<usize, GraphError> {
        if !(-2..=2).contains(&atom.formal_charge) {
            return Err(GraphError::ChargeOutOfRange(atom.formal_charge));
        }
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        Ok(self.atoms.len() - 1)
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, GraphError> {
        let n = self.atoms.len();
        if a >= n {
            return Err(GraphError::IndexOutOfRange(a));
        }
        if b >= n {
            return Err(GraphError::IndexOutOfRange(b));
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.bond_between(a, b).is_some() {
            return Err(GraphError::DuplicateBond(a, b));
        }
        self.bonds.push(Bond { a, b, order });
        let idx = self.bonds.len() - 1;
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| bi)
    }

    pub fn set_bond_order(&mut self, bond: usize, order: BondOrder) {
        self.bonds[bond].order = order;
    }

    pub fn set_atom(&mut self, i: usize, atom: Atom) {
        self.atoms[i] = atom;
    }

    /// Sum of sigma orders over incident bonds.
    pub fn sigma_sum(&self, i: usize) -> u8 {
        self.adjacency[i]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.sigma_order())
            .sum()
    }

    fn has_aromatic_bond(&self, i: usize) -> bool {
        self.adjacency[i]
            .iter()
            .any(|&(_, b)| self.bonds[b].order == BondOrder::Aromatic)
    }

    /// Aromatic budget adjusted for charge: a cation behaves like the next
    /// element for N/O/S/P and a carbanion like nitrogen.
    fn charged_aromatic_budget(atom: &Atom) -> Option<i32> {
        let base = atom.element.aromatic_budget()? as i32;
        let q = atom.formal_charge as i32;
        Some(match atom.element {
            Element::C | Element::B => base - q.abs(),
            _ => base + q,
        })
    }

    /// Whether an aromatic atom must take one pi bond in a Kekulé structure.
    pub fn needs_pi(&self, i: usize) -> bool {
        let atom = &self.atoms[i];
        if !atom.aromatic || !self.has_aromatic_bond(i) {
            return false;
        }
        let Some(budget) = Self::charged_aromatic_budget(atom) else {
            return false;
        };
        let sigma = self.sigma_sum(i) as i32;
        let h = match atom.explicit_h {
            Some(h) => h as i32,
            None => 0,
        };
        budget - sigma - h >= 1
    }

    /// Hydrogens implied by the organic-subset rules for atom `i`,
    /// ignoring any explicit count.
    pub fn rule_hydrogens(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        let sigma = self.sigma_sum(i) as i32;
        if atom.aromatic && self.has_aromatic_bond(i) {
            if let Some(budget) = Self::charged_aromatic_budget(atom) {
                let pi = if budget - sigma >= 1 { 1 } else { 0 };
                return (budget - sigma - pi).max(0) as u8;
            }
        }
        let q = atom.formal_charge as i32;
        let shift = match atom.element {
            Element::C | Element::B => -q.abs(),
            _ => q,
        };
        for &v in atom.element.default_valences() {
            let v = v as i32 + shift;
            if v >= sigma {
                return (v - sigma) as u8;
            }
        }
        0
    }

    pub fn hydrogen_count(&self, i: usize) -> u8 {
        match self.atoms[i].explicit_h {
            Some(h) => h,
            None => self.rule_hydrogens(i),
        }
    }

    /// Bond-order sum including the pi contribution of aromatic atoms.
    pub fn bond_order_sum(&self, i: usize) -> u8 {
        self.sigma_sum(i) + u8::from(self.needs_pi(i))
    }

    /// Checks the valence invariant for every atom and that the aromatic
    /// system admits a Kekulé assignment.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (i, atom) in self.atoms.iter().enumerate() {
            let used = self.bond_order_sum(i) as u32 + self.hydrogen_count(i) as u32;
            if used > max_valence(atom.element, atom.formal_charge) as u32 {
                return Err(GraphError::ValenceViolation {
                    atom: i,
                    element: atom.element,
                });
            }
        }
        if self.bonds.iter().any(|b| b.order == BondOrder::Aromatic) {
            kekulize(self, None)?;
        }
        Ok(())
    }

    pub fn has_aromatic(&self) -> bool {
        self.atoms.iter().any(|a| a.aromatic) || self.bonds.iter().any(|b| b.order == BondOrder::Aromatic)
    }

    /// Connected components as lists of atom indices, each sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut k = 0;
            while k < comp.len() {
                let u = comp[k];
                k += 1;
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.atoms.is_empty() || self.components().len() == 1
    }

    /// Relabels atoms so that old atom `perm[k]` becomes new atom `k`.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut inv = vec![0usize; perm.len()];
        for (k, &old) in perm.iter().enumerate() {
            inv[old] = k;
        }
        let mut g = MolecularGraph::new();
        for &old in perm {
            g.add_atom(self.atoms[old]).expect("charge already validated");
        }
        for b in &self.bonds {
            g.add_bond(inv[b.a], inv[b.b], b.order)
                .expect("permutation preserves simple graph");
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_bond_rejects_loops_and_duplicates() {
        let mut g = MolecularGraph::new();
        let a = g.add_atom(Atom::new(Element::C)).unwrap();
        let b = g.add_atom(Atom::new(Element::C)).unwrap();
        assert_eq!(g.add_bond(a, a, BondOrder::Single), Err(GraphError::SelfLoop(a)));
        g.add_bond(a, b, BondOrder::Single).unwrap();
        assert!(matches!(
            g.add_bond(b, a, BondOrder::Double),
            Err(GraphError::DuplicateBond(..))
        ));
        assert_eq!(g.add_bond(a, 7, BondOrder::Single), Err(GraphError::IndexOutOfRange(7)));
    }

    #[test]
    fn charge_bound() {
        let mut g = MolecularGraph::new();
        let mut atom = Atom::new(Element::N);
        atom.formal_charge = 3;
        assert!(g.add_atom(atom).is_err());
    }

    #[test]
    fn rule_hydrogens_follow_valence_list() {
        let mut g = MolecularGraph::new();
        let s = g.add_atom(Atom::new(Element::S)).unwrap();
        for _ in 0..3 {
            let o = g.add_atom(Atom::new(Element::O)).unwrap();
            g.add_bond(s, o, BondOrder::Single).unwrap();
        }
        // sigma 3 -> next allowed sulfur valence is 4
        assert_eq!(g.rule_hydrogens(s), 1);
    }

    #[test]
    fn five_bonded_carbon_is_invalid() {
        let mut g = MolecularGraph::new();
        let c = g.add_atom(Atom::new(Element::C)).unwrap();
        for _ in 0..5 {
            let f = g.add_atom(Atom::new(Element::F)).unwrap();
            g.add_bond(c, f, BondOrder::Single).unwrap();
        }
        assert!(matches!(g.validate(), Err(GraphError::ValenceViolation { atom: 0, .. })));
    }
}
