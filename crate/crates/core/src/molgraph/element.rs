use std::fmt;

use serde::{Deserialize, Serialize};

/// Elements accepted anywhere in the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

pub const ALL_ELEMENTS: [Element; 10] = [
    Element::B,
    Element::C,
    Element::N,
    Element::O,
    Element::P,
    Element::S,
    Element::F,
    Element::Cl,
    Element::Br,
    Element::I,
];

/// Standard atomic weight of hydrogen, used for implicit and explicit H.
pub const HYDROGEN_MASS: f64 = 1.008;

impl Element {
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Some(match symbol {
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "P" => Element::P,
            "S" => Element::S,
            "F" => Element::F,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    /// Lowercase SMILES symbol when the element may be written aromatic.
    pub fn aromatic_symbol(self) -> Option<&'static str> {
        match self {
            Element::B => Some("b"),
            Element::C => Some("c"),
            Element::N => Some("n"),
            Element::O => Some("o"),
            Element::P => Some("p"),
            Element::S => Some("s"),
            _ => None,
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// IUPAC abridged standard atomic weights.
    pub fn mass(self) -> f64 {
        match self {
            Element::B => 10.81,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Valences used to derive implicit hydrogens for organic-subset atoms.
    pub fn default_valences(self) -> &'static [u8] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3, 5],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Electrons available to sigma bonds plus one pi bond for a neutral
    /// aromatic atom.
    pub fn aromatic_budget(self) -> Option<u8> {
        match self {
            Element::B => Some(3),
            Element::C => Some(4),
            Element::N => Some(3),
            Element::O => Some(2),
            Element::P => Some(3),
            Element::S => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Largest bond-order sum (including hydrogens) an atom may carry.
pub fn max_valence(element: Element, charge: i8) -> u8 {
    use Element::*;
    let v: i32 = match (element, charge) {
        (B, 0) => 3,
        (C, 0) => 4,
        (N, 0) => 5,
        (O, 0) => 2,
        (P, 0) => 5,
        (S, 0) => 6,
        (F | Cl | Br | I, 0) => 1,
        (B, 1) => 2,
        (B, -1) => 4,
        (O, 1) => 3,
        (O, -1) => 1,
        (N, 1) => 4,
        (N, -1) => 2,
        (C, 1) | (C, -1) => 3,
        (P, 1) => 4,
        (P, -1) => 6,
        (S, 1) | (S, -1) => 5,
        (e, c) => {
            let base = *e.default_valences().first().unwrap_or(&0) as i32;
            match e {
                C | B => base - (c as i32).abs(),
                _ => base + c as i32,
            }
        }
    };
    v.clamp(0, 8) as u8
}

/// Bonding capacity used by the SELFIES derivation rules. Matches
/// `max_valence` except that neutral nitrogen is held to three bonds.
pub fn bonding_capacity(element: Element, charge: i8) -> u8 {
    match (element, charge) {
        (Element::N, 0) => 3,
        (e, c) => max_valence(e, c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for e in ALL_ELEMENTS {
            assert_eq!(Element::from_symbol(e.symbol()), Some(e));
        }
        assert_eq!(Element::from_symbol("H"), None);
        assert_eq!(Element::from_symbol("Na"), None);
    }

    #[test]
    fn capacity_never_exceeds_max_valence() {
        for e in ALL_ELEMENTS {
            for c in -2..=2 {
                assert!(bonding_capacity(e, c) <= max_valence(e, c));
            }
        }
    }
}
