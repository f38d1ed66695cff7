use proptest::prelude::*;
use qdgen::optim::{adam_step, cobyla_minimize, AdamState, CobylaConfig, OptimError};
use std::cell::Cell;

fn outcome(r: Result<qdgen::optim::CobylaResult, OptimError>) -> qdgen::optim::CobylaResult {
    match r {
        Ok(r) => r,
        Err(OptimError::MaxEvalsExceeded { best }) => best,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cobyla_never_worse_than_start_and_respects_budget(
        x0 in proptest::collection::vec(-3.0f64..3.0, 1..6),
        shift in proptest::collection::vec(-2.0f64..2.0, 6),
        max_evals in 1usize..300,
    ) {
        let calls = Cell::new(0usize);
        let f = |x: &[f64]| {
            calls.set(calls.get() + 1);
            x.iter().zip(&shift).map(|(a, b)| (a - b).powi(2) + (3.0 * a).sin()).sum::<f64>()
        };
        let f0 = f(&x0);
        calls.set(0);
        let cfg = CobylaConfig { max_evals, ..CobylaConfig::default() };
        let r = outcome(cobyla_minimize(f, &x0, &cfg));
        prop_assert!(r.f_best <= f0);
        prop_assert!(calls.get() <= max_evals + x0.len() + 1);
        prop_assert_eq!(calls.get(), r.n_evals);
    }

    #[test]
    fn cobyla_is_deterministic(x0 in proptest::collection::vec(-2.0f64..2.0, 1..5)) {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2)).sum::<f64>();
        let cfg = CobylaConfig { max_evals: 200, ..CobylaConfig::default() };
        prop_assert_eq!(outcome(cobyla_minimize(f, &x0, &cfg)), outcome(cobyla_minimize(f, &x0, &cfg)));
    }

    #[test]
    fn adam_is_deterministic(p in proptest::collection::vec(-5.0f64..5.0, 1..20), seed in 0u64..1000) {
        let g: Vec<f64> = p.iter().enumerate().map(|(i, v)| v * (seed as f64 + i as f64).sin()).collect();
        let s = AdamState::new(p.len(), 1e-2);
        let a = adam_step(&p, &g, &s).unwrap();
        let b = adam_step(&p, &g, &s).unwrap();
        prop_assert_eq!(a, b);
    }
}
