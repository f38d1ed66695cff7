use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{decode, encode, Alphabet, SelfiesToken};
use crate::molgraph::{canonical_key, parse_smiles, write_smiles, AtomOrder, MolecularGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Edit {
    Delete,
    Replace,
    Insert,
}

/// Applies exactly one token edit: delete, replace or insert, each with
/// probability 1/3 at a uniform position. A delete on a single token becomes
/// a replace so the output is never empty; replacements always change the
/// token.
pub fn mutate<R: Rng + ?Sized>(
    tokens: &[SelfiesToken],
    rng: &mut R,
    alphabet: &Alphabet,
) -> Vec<SelfiesToken> {
    let pool = alphabet.tokens();
    assert!(!pool.is_empty(), "mutation alphabet is empty");
    let mut edit = match rng.gen_range(0..3) {
        0 => Edit::Delete,
        1 => Edit::Replace,
        _ => Edit::Insert,
    };
    if tokens.is_empty() {
        edit = Edit::Insert;
    } else if edit == Edit::Delete && tokens.len() == 1 {
        edit = Edit::Replace;
    }
    if edit == Edit::Replace && pool.len() == 1 && pool[0] == tokens[0] && tokens.len() == 1 {
        edit = Edit::Insert;
    }
    let mut out = tokens.to_vec();
    match edit {
        Edit::Delete => {
            let i = rng.gen_range(0..out.len());
            out.remove(i);
        }
        Edit::Insert => {
            let i = rng.gen_range(0..=out.len());
            let t = pool.choose(rng).expect("nonempty").clone();
            out.insert(i, t);
        }
        Edit::Replace => loop {
            let i = rng.gen_range(0..out.len());
            let others: Vec<&SelfiesToken> = pool.iter().filter(|t| **t != out[i]).collect();
            if let Some(t) = others.choose(rng) {
                out[i] = (*t).clone();
                break;
            }
        },
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct StonedOutcome {
    pub molecules: Vec<MolecularGraph>,
    pub attempts: usize,
}

/// STONED expansion of one seed: each attempt writes the seed in a random
/// atom order, encodes it, applies 1 to 3 mutations and decodes. Accepted
/// mutants pass `filter`, differ from the seed and from each other.
pub fn stoned_expand<R, F>(
    seed: &MolecularGraph,
    n_target: usize,
    max_attempts: usize,
    alphabet: &Alphabet,
    filter: F,
    rng: &mut R,
) -> StonedOutcome
where
    R: Rng + ?Sized,
    F: Fn(&MolecularGraph) -> bool,
{
    let mut out = StonedOutcome::default();
    if n_target == 0 || seed.is_empty() {
        return out;
    }
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(canonical_key(seed));
    let mut perm: Vec<usize> = (0..seed.atom_count()).collect();
    while out.attempts < max_attempts && out.molecules.len() < n_target {
        out.attempts += 1;
        perm.shuffle(rng);
        let Ok(text) = write_smiles(seed, AtomOrder::Permutation(&perm)) else {
            continue;
        };
        let Ok(reordered) = parse_smiles(&text) else {
            continue;
        };
        let Ok(mut tokens) = encode(&reordered) else {
            continue;
        };
        let k = rng.gen_range(1..=3);
        for _ in 0..k {
            tokens = mutate(&tokens, rng, alphabet);
        }
        let Ok(mutant) = decode(&tokens) else {
            continue;
        };
        if !filter(&mutant) {
            continue;
        }
        if seen.insert(canonical_key(&mutant)) {
            out.molecules.push(mutant);
        }
    }
    out
}
