use super::{SelfiesError, SelfiesToken, TokenKind};
use crate::molgraph::{Atom, BondOrder, MolecularGraph};

struct Builder<'a> {
    tokens: &'a [SelfiesToken],
    cursor: usize,
    graph: MolecularGraph,
    capacity: Vec<i32>,
    used: Vec<i32>,
    rings: Vec<(usize, usize, u8)>,
}

impl<'a> Builder<'a> {
    fn next(&mut self) -> Option<&'a SelfiesToken> {
        let t = self.tokens.get(self.cursor);
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    /// Reads `n` tokens as big-endian base-16 digits; missing tokens count 0.
    fn read_index(&mut self, n: u8) -> usize {
        let mut v = 0;
        for _ in 0..n {
            v = v * 16 + self.next().map_or(0, |t| t.index_value());
        }
        v
    }

    fn add_atom(&mut self, token: &SelfiesToken) -> usize {
        let TokenKind::Atom {
            element, charge, h, ..
        } = token.kind()
        else {
            unreachable!("only atom tokens create atoms")
        };
        let atom = Atom {
            element,
            aromatic: false,
            formal_charge: charge,
            explicit_h: h,
        };
        let idx = self.graph.add_atom(atom).expect("token charges are bounded");
        self.capacity.push(token.capacity());
        self.used.push(0);
        idx
    }

    fn bond(&mut self, a: usize, b: usize, order: u8) {
        let o = BondOrder::from_order(order).expect("order in 1..=3");
        self.graph.add_bond(a, b, o).expect("new atom has no bonds yet");
        self.used[a] += order as i32;
        self.used[b] += order as i32;
    }

    /// One derivation pass. Returns the number of tokens consumed.
    fn derive(&mut self, max_derive: usize, init_state: i32, root: Option<usize>) -> usize {
        let mut n_derived = 0usize;
        let mut state: Option<i32> = Some(init_state);
        let mut prev = root;
        while let Some(s) = state {
            if n_derived >= max_derive {
                break;
            }
            let Some(token) = self.next() else { break };
            n_derived += 1;
            let next_state: Option<i32> = match token.kind() {
                TokenKind::Branch { order, len } => {
                    if s <= 1 {
                        Some(s)
                    } else {
                        let binit = (s - 1).min(order as i32);
                        let q = self.read_index(len);
                        n_derived += len as usize;
                        n_derived += self.derive(q + 1, binit, prev);
                        Some(s - binit)
                    }
                }
                TokenKind::Ring { order, len } => {
                    if s == 0 {
                        Some(s)
                    } else {
                        let ring_order = (order as i32).min(s);
                        let left = s - ring_order;
                        let q = self.read_index(len);
                        n_derived += len as usize;
                        let cur = prev.expect("state > 0 implies an atom exists");
                        let lidx = cur.saturating_sub(q + 1);
                        self.rings.push((lidx, cur, ring_order as u8));
                        if left == 0 {
                            None
                        } else {
                            Some(left)
                        }
                    }
                }
                TokenKind::Atom { bond, .. } => {
                    let cap = token.capacity();
                    let order = if s == 0 { 0 } else { (bond as i32).min(s).min(cap) };
                    let left = cap - order;
                    if order == 0 {
                        if s == 0 {
                            prev = Some(self.add_atom(token));
                        }
                    } else {
                        let idx = self.add_atom(token);
                        self.bond(prev.expect("state > 0 implies an atom exists"), idx, order as u8);
                        prev = Some(idx);
                    }
                    if left == 0 {
                        None
                    } else {
                        Some(left)
                    }
                }
            };
            state = next_state;
        }
        // tokens left inside this derivation's budget are consumed unused
        while n_derived < max_derive && self.next().is_some() {
            n_derived += 1;
        }
        n_derived
    }

    fn form_rings(&mut self) {
        let rings = std::mem::take(&mut self.rings);
        for (l, r, order) in rings {
            if l == r {
                continue;
            }
            let lfree = self.capacity[l] - self.used[l];
            let rfree = self.capacity[r] - self.used[r];
            if lfree <= 0 || rfree <= 0 {
                continue;
            }
            let order = (order as i32).min(lfree).min(rfree);
            if let Some(b) = self.graph.bond_between(l, r) {
                let old = self.graph.bonds()[b].order.sigma_order() as i32;
                let new = (order + old).min(3);
                self.graph
                    .set_bond_order(b, BondOrder::from_order(new as u8).expect("1..=3"));
                self.used[l] += new - old;
                self.used[r] += new - old;
            } else {
                self.bond(l, r, order as u8);
            }
        }
    }
}

/// Decodes a token sequence under the SELFIES derivation rules. Every
/// sequence of well-formed tokens yields a valence-valid graph unless no
/// atom is realisable.
pub fn decode(tokens: &[SelfiesToken]) -> Result<MolecularGraph, SelfiesError> {
    let mut b = Builder {
        tokens,
        cursor: 0,
        graph: MolecularGraph::new(),
        capacity: Vec::new(),
        used: Vec::new(),
        rings: Vec::new(),
    };
    b.derive(usize::MAX, 0, None);
    b.form_rings();
    if b.graph.is_empty() {
        return Err(SelfiesError::EmptyResult);
    }
    Ok(b.graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{canonical_key, parse_smiles};
    use crate::selfies::tokenize;

    fn dec(s: &str) -> String {
        canonical_key(&decode(&tokenize(s).unwrap()).unwrap())
    }

    fn key(s: &str) -> String {
        canonical_key(&parse_smiles(s).unwrap())
    }

    // expected SMILES below were produced by the reference decoder
    #[test]
    fn reference_cases() {
        for (selfies, smiles) in [
            ("[C][C]", "CC"),
            ("[F][F]", "FF"),
            ("[C][=C][=C]", "C=C=C"),
            ("[C][=O][C]", "C=O"),
            ("[C][#C][#C]", "C#CC"),
            ("[C][Branch1][C][O][N]", "C(O)N"),
            ("[C][C][C][C][C][C][Ring1][=Branch1]", "C1CCCCC1"),
            ("[C][=C][C][=C][C][=C][Ring1][=Branch1]", "C1=CC=CC=C1"),
            ("[O][Branch1][C][C][C]", "O(C)C"),
            ("[F][Branch1][C][C][C]", "FCCC"),
            ("[C][Ring1][C][C]", "CC"),
            ("[N+1][Branch1][C][C][C]", "C[N+]C"),
            ("[C][=Branch1][C][=O][O]", "C(=O)O"),
            ("[Branch1][C][C]", "CC"),
        ] {
            assert_eq!(dec(selfies), key(smiles), "{selfies}");
        }
    }

    #[test]
    fn empty_results() {
        assert_eq!(decode(&[]), Err(SelfiesError::EmptyResult));
        assert_eq!(decode(&tokenize("[Ring1][Branch1]").unwrap()), Err(SelfiesError::EmptyResult));
    }
}
