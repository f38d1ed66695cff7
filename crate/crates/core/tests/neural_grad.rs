use proptest::prelude::*;
use qdgen::neural::{softmax, stream_rng, CellState, Example, LstmDims, LstmModel, PriorMode};
use qdgen::optim::{finite_difference_grad, AdamState, DEFAULT_FD_STEP};
use qdgen::qsim::BitString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PAD: usize = 0;

fn toy(mode: PriorMode, n_layers: usize, seed: u64) -> LstmModel {
    let dims = LstmDims {
        vocab_size: 8,
        embed_dim: 5,
        hidden_dim: 8,
        n_layers,
        n_qubits: 3,
        mode,
    };
    LstmModel::new(dims, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn toy_batch(rng: &mut ChaCha8Rng) -> Vec<Example> {
    (0..3)
        .map(|_| {
            let toks: Vec<usize> = (0..4).map(|_| rng.gen_range(3..8)).collect();
            Example::teacher_forced(&toks, BitString::new(rng.gen_range(0..8), 3), 1, 2)
        })
        .collect()
}

fn block(m: &LstmModel, name: &str) -> std::ops::Range<usize> {
    m.layout().blocks().into_iter().find(|(n, _)| n == name).unwrap().1
}

#[test]
fn hand_set_cell_matches_numpy() {
    let dims = LstmDims {
        vocab_size: 4,
        embed_dim: 1,
        hidden_dim: 2,
        n_layers: 1,
        n_qubits: 1,
        mode: PriorMode::Concat,
    };
    let mut m = LstmModel::new(dims, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (w, b) = (block(&m, "layer0.w"), block(&m, "layer0.b"));
    for r in 0..8 {
        for c in 0..4 {
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            m.params_mut()[w.start + r * 4 + c] = 0.1 * (r as f64 + 1.0) - 0.05 * c as f64 * sign;
        }
        m.params_mut()[b.start + r] = 0.01 * r as f64 - 0.02;
    }
    let prev = CellState {
        h: vec![0.2, -0.1],
        c: vec![0.5, 0.3],
    };
    let next = m.cell_forward(0, &[1.0, 0.4], &prev).unwrap();
    let want_c = [0.7564201840040797, 0.5576918780333333];
    let want_h = [0.4961124626146427, 0.3793539669824903];
    for k in 0..2 {
        assert!((next.c[k] - want_c[k]).abs() < 1e-10);
        assert!((next.h[k] - want_h[k]).abs() < 1e-10);
    }
}

fn gradient_check(mode: PriorMode, n_layers: usize, dropout: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = toy(mode, n_layers, 4);
    let batch = toy_batch(&mut rng);
    let (_, grad) = model.loss_and_grad(&batch, dropout, 77, PAD).unwrap();
    let n = model.params().len();
    let coords: Vec<usize> = (0..200).map(|_| rng.gen_range(0..n)).collect();
    let mut worst: f64 = 0.0;
    for &k in &coords {
        let mut probe = model.clone();
        let base = model.params()[k];
        let fd = finite_difference_grad(
            |x| {
                probe.params_mut()[k] = x[0];
                probe.loss_and_grad(&batch, dropout, 77, PAD).unwrap().0
            },
            &[base],
            DEFAULT_FD_STEP,
        )[0];
        let scale = grad[k].abs().max(fd.abs());
        let rel = if scale < 1e-7 { (grad[k] - fd).abs() } else { (grad[k] - fd).abs() / scale };
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-4, "{mode:?} layers={n_layers} dropout={dropout}: worst relative error {worst}");
}

#[test]
fn bptt_matches_finite_differences_concat() {
    gradient_check(PriorMode::Concat, 1, 0.0);
}

#[test]
fn bptt_matches_finite_differences_add() {
    gradient_check(PriorMode::Add, 1, 0.0);
}

#[test]
fn bptt_matches_finite_differences_two_layers_with_dropout() {
    gradient_check(PriorMode::Concat, 2, 0.3);
}

#[test]
fn unused_embedding_rows_get_zero_gradient() {
    let model = toy(PriorMode::Concat, 1, 1);
    let prior = BitString::new(5, 3);
    let batch = vec![Example::teacher_forced(&[3, 4, 3], prior, 1, 2)];
    let (_, grad) = model.loss_and_grad(&batch, 0.0, 0, PAD).unwrap();
    let emb = block(&model, "embedding");
    for tok in [0usize, 2, 5, 6, 7] {
        assert!(grad[emb.start + tok * 5..][..5].iter().all(|&g| g == 0.0));
    }
}

#[test]
fn duplicated_batch_has_same_mean_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = toy(PriorMode::Add, 1, 2);
    let batch = toy_batch(&mut rng);
    let doubled: Vec<Example> = batch.iter().chain(batch.iter()).cloned().collect();
    let (l1, g1) = model.loss_and_grad(&batch, 0.0, 0, PAD).unwrap();
    let (l2, g2) = model.loss_and_grad(&doubled, 0.0, 0, PAD).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn dropout_masks_are_reproducible() {
    let model = toy(PriorMode::Concat, 1, 3);
    let run = || model.forward_sequence(&[1, 3, 4, 5], &BitString::new(1, 3), 0.5, &mut stream_rng(5, 0)).unwrap();
    assert_eq!(run(), run());
    let plain = || model.forward_sequence(&[1, 3, 4, 5], &BitString::new(1, 3), 0.0, &mut stream_rng(5, 0)).unwrap();
    assert_eq!(plain(), plain());
}

#[test]
fn train_step_is_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batch = toy_batch(&mut rng);
    let run = || {
        let mut m = toy(PriorMode::Concat, 1, 6);
        let mut adam = AdamState::new(m.params().len(), 1e-2);
        for s in 0..3 {
            m.train_step(&mut adam, &batch, 0.0, s, PAD).unwrap();
        }
        m.params().to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn adam_training_halves_loss_on_toy_corpus() {
    let vocab = 12;
    let dims = LstmDims {
        vocab_size: vocab,
        embed_dim: 16,
        hidden_dim: 32,
        n_layers: 1,
        n_qubits: 4,
        mode: PriorMode::Concat,
    };
    let mut model = LstmModel::new(dims, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Sequences follow a few deterministic patterns chosen by the prior.
    let corpus: Vec<Example> = (0..50)
        .map(|_| {
            let p = rng.gen_range(0..4u32);
            let len = rng.gen_range(4..9);
            let toks: Vec<usize> = (0..len).map(|t| 3 + ((p as usize * 2 + t) % (vocab - 3))).collect();
            Example::teacher_forced(&toks, BitString::new(p, 4), 1, 2)
        })
        .collect();
    let baseline = (vocab as f64).ln();
    let mut adam = AdamState::new(model.params().len(), 1e-2);
    for step in 0..200 {
        model.train_step(&mut adam, &corpus, 0.0, step, PAD).unwrap();
    }
    let end = model.batch_loss(&corpus, PAD).unwrap();
    assert!(end <= 0.5 * baseline, "loss {end} vs baseline {baseline}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one(row in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
        let p = softmax(&row);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn logits_rows_are_valid_distributions(seed in any::<u64>(), toks in proptest::collection::vec(1usize..8, 1..10)) {
        let model = toy(PriorMode::Add, 1, seed);
        let l = model.forward_sequence(&toks, &BitString::new((seed % 8) as u32, 3), 0.0, &mut stream_rng(seed, 0)).unwrap();
        for t in 0..l.steps() {
            prop_assert!((softmax(l.row(t)).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
