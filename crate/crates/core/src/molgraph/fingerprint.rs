use thiserror::Error;

use super::MolecularGraph;

pub const DEFAULT_MAX_PATH_LEN: usize = 7;
pub const DEFAULT_WIDTH: usize = 2048;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    width: usize,
    words: Vec<u64>,
    n_set: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
}

impl Fingerprint {
    pub fn new(width: usize) -> Fingerprint {
        assert!(width > 0, "fingerprint width must be positive");
        Fingerprint {
            width,
            words: vec![0; width.div_ceil(64)],
            n_set: 0,
        }
    }

    pub fn from_bits(width: usize, bits: impl IntoIterator<Item = usize>) -> Fingerprint {
        let mut fp = Fingerprint::new(width);
        for b in bits {
            fp.set(b % width);
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_set(&self) -> usize {
        self.n_set
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn set(&mut self, bit: usize) {
        let (w, m) = (bit / 64, 1u64 << (bit % 64));
        if self.words[w] & m == 0 {
            self.words[w] |= m;
            self.n_set += 1;
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.width == other.width && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn atom_label(g: &MolecularGraph, i: usize) -> &'static str {
    let a = g.atom(i);
    if a.aromatic {
        a.element.aromatic_symbol().unwrap_or(a.element.symbol())
    } else {
        a.element.symbol()
    }
}

fn path_string(g: &MolecularGraph, atoms: &[usize], bonds: &[usize], reverse: bool) -> String {
    let mut s = String::new();
    let n = atoms.len();
    for k in 0..n {
        let ai = if reverse { atoms[n - 1 - k] } else { atoms[k] };
        if k > 0 {
            let bi = if reverse { bonds[n - 1 - k] } else { bonds[k - 1] };
            s.push_str(g.bonds()[bi].order.symbol());
        }
        s.push_str(atom_label(g, ai));
    }
    s
}

/// Hashes every simple path of up to `max_path_len` bonds (single atoms
/// included) into a bitset of `width` bits.
pub fn path_fingerprint(g: &MolecularGraph, max_path_len: usize, width: usize) -> Fingerprint {
    let mut fp = Fingerprint::new(width);
    let n = g.atom_count();
    let mut on_path = vec![false; n];
    let mut atoms = Vec::with_capacity(max_path_len + 1);
    let mut bonds = Vec::with_capacity(max_path_len);
    for start in 0..n {
        atoms.push(start);
        on_path[start] = true;
        extend(g, max_path_len, width, &mut fp, &mut on_path, &mut atoms, &mut bonds);
        on_path[start] = false;
        atoms.pop();
    }
    fp
}

fn extend(
    g: &MolecularGraph,
    max_len: usize,
    width: usize,
    fp: &mut Fingerprint,
    on_path: &mut [bool],
    atoms: &mut Vec<usize>,
    bonds: &mut Vec<usize>,
) {
    let fwd = path_string(g, atoms, bonds, false);
    let rev = path_string(g, atoms, bonds, true);
    let label = if fwd <= rev { fwd } else { rev };
    fp.set((fnv1a(label.as_bytes()) % width as u64) as usize);
    if bonds.len() == max_len {
        return;
    }
    let u = *atoms.last().expect("path is nonempty");
    for &(v, b) in g.neighbors(u) {
        if on_path[v] {
            continue;
        }
        on_path[v] = true;
        atoms.push(v);
        bonds.push(b);
        extend(g, max_len, width, fp, on_path, atoms, bonds);
        bonds.pop();
        atoms.pop();
        on_path[v] = false;
    }
}

/// |a ∧ b| / |a ∨ b|, defined as 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}
