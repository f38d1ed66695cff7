use std::collections::HashSet;

use proptest::prelude::*;
use qdgen::molgraph::{canonical_key, parse_smiles, MolecularGraph};
use qdgen::selfies::{decode, encode, mutate, stoned_expand, tokenize, Alphabet, SelfiesToken};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: &str = include_str!("../../../data/toy_200.smi");

fn corpus() -> Vec<MolecularGraph> {
    qdgen::molgraph::parse_dataset(CORPUS).unwrap()
}

fn wide_alphabet() -> Alphabet {
    let extra = tokenize(
        "[#C][#N][=S][I][P][B][N+1][O-1][=N+1][NH1+1][C-1][S+1][NH0][#Branch1][Branch2][=Branch2][=Ring1][#Ring1]",
    )
    .unwrap();
    Alphabet::new(&extra)
}

#[test]
fn decoder_agrees_with_reference_outputs() {
    let rows = include_str!("fixtures/selfies_reference.tsv");
    let mut n = 0;
    for line in rows.lines().filter(|l| !l.starts_with('#')) {
        let (s, smi) = line.split_once('\t').unwrap();
        let ours = decode(&tokenize(s).unwrap()).unwrap();
        let theirs = parse_smiles(smi).unwrap_or_else(|e| panic!("{smi}: {e}"));
        assert_eq!(canonical_key(&ours), canonical_key(&theirs), "{s}");
        n += 1;
    }
    assert_eq!(n, 400);
}

#[test]
fn random_sequences_decode_to_valid_graphs() {
    let alphabet = wide_alphabet();
    let pool = alphabet.tokens();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..=30);
        let seq: Vec<SelfiesToken> = (0..len).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
        if let Ok(g) = decode(&seq) {
            assert!(g.validate().is_ok());
            assert!(g.is_connected());
        }
    }
}

#[test]
fn corpus_round_trips_through_selfies() {
    for g in corpus() {
        let toks = encode(&g).unwrap();
        assert_eq!(canonical_key(&decode(&toks).unwrap()), canonical_key(&g));
    }
}

#[test]
fn stoned_outputs_are_filtered_and_distinct() {
    let mols = corpus();
    let alphabet = Alphabet::new(mols.iter().flat_map(|g| encode(g).unwrap()).collect::<Vec<_>>().iter());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let filter = |g: &MolecularGraph| g.atom_count() >= 8;
    for seed in mols.iter().take(5) {
        let out = stoned_expand(seed, 20, 200, &alphabet, filter, &mut rng);
        let keys: HashSet<String> = out.molecules.iter().map(canonical_key).collect();
        assert_eq!(keys.len(), out.molecules.len());
        assert!(out.molecules.iter().all(filter));
        assert!(out.attempts <= 200);
    }
}

fn levenshtein(a: &[SelfiesToken], b: &[SelfiesToken]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn mutation_is_one_edit(ids in proptest::collection::vec(0usize..32, 1..30), seed in any::<u64>()) {
        let alphabet = wide_alphabet();
        let pool = alphabet.tokens();
        let seq: Vec<SelfiesToken> = ids.iter().map(|&i| pool[i % pool.len()].clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mutate(&seq, &mut rng, &alphabet);
        prop_assert_eq!(levenshtein(&seq, &m), 1);
        prop_assert!(!m.is_empty());
    }

    #[test]
    fn tokenize_concatenation_is_lossless(ids in proptest::collection::vec(0usize..32, 0..30)) {
        let alphabet = wide_alphabet();
        let pool = alphabet.tokens();
        let text: String = ids.iter().map(|&i| pool[i % pool.len()].text()).collect();
        let toks = tokenize(&text).unwrap();
        prop_assert_eq!(qdgen::selfies::to_text(&toks), text);
    }
}
