use std::collections::BTreeMap;

use thiserror::Error;

use super::{canonical_ranks, Atom, BondOrder, Element, GraphError, MolecularGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES")]
    Empty,
    #[error("unbalanced branch at position {position}")]
    UnbalancedBranch { position: usize },
    #[error("ring bond {label} opened at position {position} is never closed")]
    UnclosedRing { position: usize, label: u32 },
    #[error("unknown or unsupported element '{symbol}' at position {position}")]
    UnknownElement { position: usize, symbol: String },
    #[error("valence violation on {element} at position {position}")]
    ValenceViolation { position: usize, element: Element },
    #[error("unexpected '{found}' at position {position}")]
    UnexpectedChar { position: usize, found: char },
    #[error("unexpected end of input inside bracket atom starting at position {position}")]
    UnterminatedBracket { position: usize },
    #[error("multi-fragment SMILES ('.') at position {position} is not supported")]
    Disconnected { position: usize },
    #[error("invalid bond at position {position}: {reason}")]
    InvalidBond { position: usize, reason: &'static str },
    #[error("formal charge out of range at position {position}")]
    ChargeOutOfRange { position: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WriteError {
    #[error("cannot write an empty graph")]
    EmptyGraph,
    #[error("atom order is not a permutation of 0..{0}")]
    InvalidPermutation(usize),
}

/// Atom visiting order for `write_smiles`.
#[derive(Clone, Copy, Debug)]
pub enum AtomOrder<'a> {
    Canonical,
    /// Atoms listed by visiting preference: `order[0]` roots the traversal.
    Permutation(&'a [usize]),
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<u8> {
        self.s.get(self.pos + k).copied()
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            None
        } else {
            std::str::from_utf8(&self.s[start..self.pos])
                .ok()
                .and_then(|t| t.parse().ok())
        }
    }
}

fn unknown(position: usize, symbol: &str) -> SmilesError {
    SmilesError::UnknownElement {
        position,
        symbol: symbol.to_string(),
    }
}

fn parse_bracket(p: &mut Parser) -> Result<Atom, SmilesError> {
    let open = p.pos;
    p.pos += 1;
    let _isotope = p.digits();
    let sym_pos = p.pos;
    let c = p.peek().ok_or(SmilesError::UnterminatedBracket { position: open })?;
    let (element, aromatic) = if c.is_ascii_lowercase() {
        let two = p.peek_at(1).filter(|c| c.is_ascii_lowercase());
        if let Some(c2) = two {
            // "se", "as" and friends
            let sym = format!("{}{}", c as char, c2 as char);
            if matches!(sym.as_str(), "se" | "as" | "te") {
                return Err(unknown(sym_pos, &sym));
            }
        }
        p.pos += 1;
        let e = match c {
            b'b' => Element::B,
            b'c' => Element::C,
            b'n' => Element::N,
            b'o' => Element::O,
            b'p' => Element::P,
            b's' => Element::S,
            _ => return Err(unknown(sym_pos, &(c as char).to_string())),
        };
        (e, true)
    } else if c.is_ascii_uppercase() {
        let mut sym = (c as char).to_string();
        p.pos += 1;
        if let Some(c2) = p.peek().filter(|c| c.is_ascii_lowercase()) {
            sym.push(c2 as char);
            p.pos += 1;
        }
        match Element::from_symbol(&sym) {
            Some(e) => (e, false),
            None => return Err(unknown(sym_pos, &sym)),
        }
    } else {
        return Err(SmilesError::UnexpectedChar {
            position: p.pos,
            found: c as char,
        });
    };

    // chirality
    while p.peek() == Some(b'@') {
        p.pos += 1;
    }
    if p.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
        while p.peek().is_some_and(|c| c.is_ascii_uppercase()) {
            p.pos += 1;
        }
        p.digits();
    }

    let mut h = 0u32;
    if p.peek() == Some(b'H') {
        p.pos += 1;
        h = p.digits().unwrap_or(1);
    }

    let charge_pos = p.pos;
    let mut charge: i32 = 0;
    if let Some(sign @ (b'+' | b'-')) = p.peek() {
        let unit = if sign == b'+' { 1 } else { -1 };
        p.pos += 1;
        if let Some(d) = p.digits() {
            charge = unit * d as i32;
        } else {
            charge = unit;
            while p.peek() == Some(sign) {
                p.pos += 1;
                charge += unit;
            }
        }
    }
    if !(-2..=2).contains(&charge) {
        return Err(SmilesError::ChargeOutOfRange { position: charge_pos });
    }

    if p.peek() == Some(b':') {
        p.pos += 1;
        p.digits();
    }
    match p.peek() {
        Some(b']') => p.pos += 1,
        Some(c) => {
            return Err(SmilesError::UnexpectedChar {
                position: p.pos,
                found: c as char,
            })
        }
        None => return Err(SmilesError::UnterminatedBracket { position: open }),
    }
    if h > 8 {
        return Err(SmilesError::ValenceViolation {
            position: open,
            element,
        });
    }
    Ok(Atom {
        element,
        aromatic,
        formal_charge: charge as i8,
        explicit_h: Some(h as u8),
    })
}

fn parse_organic(p: &mut Parser) -> Result<Atom, SmilesError> {
    let pos = p.pos;
    let c = p.s[pos];
    let next = p.peek_at(1);
    let (atom, len) = match (c, next) {
        (b'C', Some(b'l')) => (Atom::new(Element::Cl), 2),
        (b'B', Some(b'r')) => (Atom::new(Element::Br), 2),
        (b'B', _) => (Atom::new(Element::B), 1),
        (b'C', _) => (Atom::new(Element::C), 1),
        (b'N', _) => (Atom::new(Element::N), 1),
        (b'O', _) => (Atom::new(Element::O), 1),
        (b'P', _) => (Atom::new(Element::P), 1),
        (b'S', _) => (Atom::new(Element::S), 1),
        (b'F', _) => (Atom::new(Element::F), 1),
        (b'I', _) => (Atom::new(Element::I), 1),
        (b'b', _) => (Atom::aromatic(Element::B), 1),
        (b'c', _) => (Atom::aromatic(Element::C), 1),
        (b'n', _) => (Atom::aromatic(Element::N), 1),
        (b'o', _) => (Atom::aromatic(Element::O), 1),
        (b'p', _) => (Atom::aromatic(Element::P), 1),
        (b's', _) => (Atom::aromatic(Element::S), 1),
        _ => {
            let mut sym = (c as char).to_string();
            if let Some(n) = next.filter(|n| n.is_ascii_lowercase()) {
                sym.push(n as char);
            }
            return Err(unknown(pos, &sym));
        }
    };
    p.pos += len;
    Ok(atom)
}

fn implicit_order(g: &MolecularGraph, a: usize, b: usize) -> BondOrder {
    if g.atom(a).aromatic && g.atom(b).aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    position: usize,
}

fn bond_error(position: usize, e: GraphError) -> SmilesError {
    let reason = match e {
        GraphError::SelfLoop(_) => "ring closure onto the same atom",
        GraphError::DuplicateBond(..) => "atoms already bonded",
        _ => "invalid bond",
    };
    SmilesError::InvalidBond { position, reason }
}

/// Parses a single-fragment SMILES string. Stereo markers and isotopes are
/// accepted and dropped.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let mut g = MolecularGraph::new();
    let mut positions: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondOrder, usize)> = None;
    let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();

    while let Some(c) = p.peek() {
        let pos = p.pos;
        match c {
            b'(' => {
                if prev.is_none() || pending.is_some() {
                    return Err(SmilesError::UnexpectedChar { position: pos, found: '(' });
                }
                branches.push((prev, pos));
                p.pos += 1;
            }
            b')' => {
                if pending.is_some() {
                    return Err(SmilesError::InvalidBond {
                        position: pos,
                        reason: "bond symbol without a following atom",
                    });
                }
                match branches.pop() {
                    Some((atom, _)) => prev = atom,
                    None => return Err(SmilesError::UnbalancedBranch { position: pos }),
                }
                p.pos += 1;
            }
            b'-' | b'=' | b'#' | b':' | b'$' => {
                if pending.is_some() || prev.is_none() {
                    return Err(SmilesError::UnexpectedChar { position: pos, found: c as char });
                }
                let order = match c {
                    b'-' => BondOrder::Single,
                    b'=' => BondOrder::Double,
                    b'#' => BondOrder::Triple,
                    b':' => BondOrder::Aromatic,
                    _ => return Err(SmilesError::InvalidBond { position: pos, reason: "quadruple bonds are not supported" }),
                };
                pending = Some((order, pos));
                p.pos += 1;
            }
            b'/' | b'\\' => {
                if prev.is_none() {
                    return Err(SmilesError::UnexpectedChar { position: pos, found: c as char });
                }
                p.pos += 1;
            }
            b'.' => return Err(SmilesError::Disconnected { position: pos }),
            b'%' | b'0'..=b'9' => {
                let Some(cur) = prev else {
                    return Err(SmilesError::UnexpectedChar { position: pos, found: c as char });
                };
                let label = if c == b'%' {
                    p.pos += 1;
                    let a = p.peek().filter(|c| c.is_ascii_digit());
                    let b = p.peek_at(1).filter(|c| c.is_ascii_digit());
                    match (a, b) {
                        (Some(a), Some(b)) => {
                            p.pos += 2;
                            ((a - b'0') * 10 + (b - b'0')) as u32
                        }
                        _ => {
                            return Err(SmilesError::UnexpectedChar { position: pos, found: '%' })
                        }
                    }
                } else {
                    p.pos += 1;
                    (c - b'0') as u32
                };
                let order = pending.take().map(|(o, _)| o);
                if let Some(open) = rings.remove(&label) {
                    let order = match (open.order, order) {
                        (Some(a), Some(b)) if a != b => {
                            return Err(SmilesError::InvalidBond {
                                position: pos,
                                reason: "conflicting ring-closure bond orders",
                            })
                        }
                        (Some(a), _) | (None, Some(a)) => a,
                        (None, None) => implicit_order(&g, open.atom, cur),
                    };
                    g.add_bond(open.atom, cur, order).map_err(|e| bond_error(pos, e))?;
                } else {
                    rings.insert(label, OpenRing { atom: cur, order, position: pos });
                }
            }
            b'[' => {
                let atom = parse_bracket(&mut p)?;
                add_atom(&mut g, &mut positions, &mut prev, &mut pending, atom, pos)?;
            }
            _ if c.is_ascii_alphabetic() => {
                let atom = parse_organic(&mut p)?;
                add_atom(&mut g, &mut positions, &mut prev, &mut pending, atom, pos)?;
            }
            // a whitespace-separated title is ignored
            b' ' | b'\t' => break,
            _ => {
                let found = text[pos..].chars().next().unwrap_or('?');
                return Err(SmilesError::UnexpectedChar { position: pos, found });
            }
        }
    }
    if let Some(&(_, position)) = branches.last() {
        return Err(SmilesError::UnbalancedBranch { position });
    }
    if let Some((&label, open)) = rings.iter().min_by_key(|(_, r)| r.position) {
        return Err(SmilesError::UnclosedRing { position: open.position, label });
    }
    if let Some((_, position)) = pending {
        return Err(SmilesError::InvalidBond {
            position,
            reason: "bond symbol without a following atom",
        });
    }
    if g.is_empty() {
        return Err(SmilesError::Empty);
    }
    g.validate().map_err(|e| {
        let atom = match e {
            GraphError::ValenceViolation { atom, .. } | GraphError::Kekulization { atom } => atom,
            _ => 0,
        };
        SmilesError::ValenceViolation {
            position: positions[atom],
            element: g.atom(atom).element,
        }
    })?;
    Ok(g)
}

fn add_atom(
    g: &mut MolecularGraph,
    positions: &mut Vec<usize>,
    prev: &mut Option<usize>,
    pending: &mut Option<(BondOrder, usize)>,
    atom: Atom,
    pos: usize,
) -> Result<(), SmilesError> {
    let idx = g
        .add_atom(atom)
        .map_err(|_| SmilesError::ChargeOutOfRange { position: pos })?;
    positions.push(pos);
    if let Some(pa) = *prev {
        let order = match pending.take() {
            Some((o, _)) => o,
            None => implicit_order(g, pa, idx),
        };
        g.add_bond(pa, idx, order).map_err(|e| bond_error(pos, e))?;
    }
    *prev = Some(idx);
    Ok(())
}

fn atom_text(g: &MolecularGraph, i: usize) -> String {
    let atom = g.atom(i);
    let symbol = if atom.aromatic {
        atom.element.aromatic_symbol().unwrap_or(atom.element.symbol())
    } else {
        atom.element.symbol()
    };
    let h = g.hydrogen_count(i);
    if atom.formal_charge == 0 && h == g.rule_hydrogens(i) {
        return symbol.to_string();
    }
    let mut s = String::with_capacity(8);
    s.push('[');
    s.push_str(symbol);
    match h {
        0 => {}
        1 => s.push('H'),
        n => {
            s.push('H');
            s.push_str(&n.to_string());
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        q if q > 0 => s.push_str(&format!("+{q}")),
        q => s.push_str(&format!("-{}", -q)),
    }
    s.push(']');
    s
}

fn bond_text(g: &MolecularGraph, bond: usize) -> &'static str {
    let b = g.bonds()[bond];
    let both_aromatic = g.atom(b.a).aromatic && g.atom(b.b).aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Aromatic if both_aromatic => "",
        o => o.symbol(),
    }
}

fn ring_label(d: usize) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d}")
    }
}

struct Traversal {
    preorder: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    /// ring-closure bonds per atom as (partner, bond)
    closures: Vec<Vec<(usize, usize)>>,
    parent_bond: Vec<Option<usize>>,
}

fn traverse(g: &MolecularGraph, prio: &[usize]) -> Traversal {
    let n = g.atom_count();
    let mut t = Traversal {
        preorder: Vec::with_capacity(n),
        children: vec![Vec::new(); n],
        closures: vec![Vec::new(); n],
        parent_bond: vec![None; n],
    };
    let mut visited = vec![false; n];
    let mut bond_used = vec![false; g.bond_count()];
    let mut roots: Vec<usize> = (0..n).collect();
    roots.sort_by_key(|&i| prio[i]);
    for root in roots {
        if visited[root] {
            continue;
        }
        // iterative DFS with explicit neighbour cursors
        let mut stack: Vec<(usize, Vec<(usize, usize)>, usize)> = Vec::new();
        visited[root] = true;
        t.preorder.push(root);
        stack.push((root, sorted_neighbors(g, root, prio), 0));
        while let Some(top) = stack.last_mut() {
            let (u, ref nbrs, ref mut k) = *top;
            if *k >= nbrs.len() {
                stack.pop();
                continue;
            }
            let (v, b) = nbrs[*k];
            *k += 1;
            if bond_used[b] {
                continue;
            }
            bond_used[b] = true;
            if visited[v] {
                t.closures[u].push((v, b));
                t.closures[v].push((u, b));
            } else {
                visited[v] = true;
                t.preorder.push(v);
                t.children[u].push((v, b));
                t.parent_bond[v] = Some(b);
                stack.push((v, sorted_neighbors(g, v, prio), 0));
            }
        }
    }
    t
}

fn sorted_neighbors(g: &MolecularGraph, u: usize, prio: &[usize]) -> Vec<(usize, usize)> {
    let mut v = g.neighbors(u).to_vec();
    v.sort_by_key(|&(nb, _)| prio[nb]);
    v
}

/// Writes SMILES, visiting atoms by the given order. Disconnected graphs are
/// written as dot-separated fragments.
pub fn write_smiles(graph: &MolecularGraph, order: AtomOrder) -> Result<String, WriteError> {
    let n = graph.atom_count();
    if n == 0 {
        return Err(WriteError::EmptyGraph);
    }
    let prio: Vec<usize> = match order {
        AtomOrder::Canonical => canonical_ranks(graph),
        AtomOrder::Permutation(perm) => {
            if perm.len() != n {
                return Err(WriteError::InvalidPermutation(n));
            }
            let mut prio = vec![usize::MAX; n];
            for (k, &a) in perm.iter().enumerate() {
                if a >= n || prio[a] != usize::MAX {
                    return Err(WriteError::InvalidPermutation(n));
                }
                prio[a] = k;
            }
            prio
        }
    };
    Ok(emit(graph, &prio))
}

pub(crate) fn emit(g: &MolecularGraph, prio: &[usize]) -> String {
    let t = traverse(g, prio);
    let n = g.atom_count();
    let mut pre_index = vec![0usize; n];
    for (k, &a) in t.preorder.iter().enumerate() {
        pre_index[a] = k;
    }
    let mut out = String::new();
    let mut open: BTreeMap<usize, usize> = BTreeMap::new(); // bond -> digit
    let mut free_digits: Vec<bool> = vec![true; 100];
    let mut first_root = true;
    for &root in &t.preorder {
        if t.parent_bond[root].is_some() {
            continue;
        }
        if !first_root {
            out.push('.');
        }
        first_root = false;
        // explicit stack of work items
        enum Item {
            Atom(usize),
            Text(&'static str),
        }
        let mut stack = vec![Item::Atom(root)];
        while let Some(item) = stack.pop() {
            let u = match item {
                Item::Text(s) => {
                    out.push_str(s);
                    continue;
                }
                Item::Atom(u) => u,
            };
            if let Some(pb) = t.parent_bond[u] {
                out.push_str(bond_text(g, pb));
            }
            out.push_str(&atom_text(g, u));
            let mut rings = t.closures[u].clone();
            rings.sort_by_key(|&(v, b)| (pre_index[v], b));
            for (_, b) in rings {
                if let Some(d) = open.remove(&b) {
                    free_digits[d] = true;
                    out.push_str(&ring_label(d));
                } else {
                    let d = (1..100).find(|&d| free_digits[d]).expect("fewer than 99 open rings");
                    free_digits[d] = false;
                    open.insert(b, d);
                    out.push_str(bond_text(g, b));
                    out.push_str(&ring_label(d));
                }
            }
            let kids = &t.children[u];
            if let Some((&(last, _), rest)) = kids.split_last() {
                stack.push(Item::Atom(last));
                for &(c, _) in rest.iter().rev() {
                    stack.push(Item::Text(")"));
                    stack.push(Item::Atom(c));
                    stack.push(Item::Text("("));
                }
            }
        }
    }
    out
}
