use entgen::numerics::checkpoint;
use entgen::numerics::{grad_check, sigmoid, softmax, Matrix, ParamStore};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn pair(scale: f64) -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..5, 1usize..5, 1usize..5)
        .prop_flat_map(move |(r, k, c)| (matrix(r, k, scale), matrix(k, c, scale)))
}

fn shapes() -> impl Strategy<Value = (Matrix, Matrix)> {
    pair(3.0)
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        v in prop::collection::vec(-50.0f64..50.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&v).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let q = softmax(&shifted).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_symmetric(x in -700.0f64..700.0) {
        let s = sigmoid(x);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s + sigmoid(-x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_reverses_products((a, b) in shapes()) {
        let left = a.matmul(&b).unwrap().transpose();
        let right = b.transpose().matmul(&a.transpose()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn checkpoint_text_round_trips_exactly((a, b) in shapes()) {
        let mut store = ParamStore::new();
        store.add("a", a).unwrap();
        store.add("b.weight", b).unwrap();
        let back = checkpoint::from_str(&checkpoint::to_string(&store)).unwrap();
        prop_assert_eq!(back.names(), store.names());
        for id in store.ids() {
            prop_assert_eq!(back.value(id).data(), store.value(id).data());
        }
    }

    #[test]
    // small entries keep tanh out of saturation, where gradients sink
    // below the relative-error floor
    fn tape_gradients_match_differences((a, b) in pair(0.5)) {
        let mut store = ParamStore::new();
        let wa = store.add("a", a).unwrap();
        let wb = store.add("b", b).unwrap();
        let report = grad_check(&store, 1e-4, |tape| {
            let (a, b) = (tape.param(wa), tape.param(wb));
            let prod = tape.matmul(a, b)?;
            let squashed = tape.tanh(prod);
            let gated = tape.sigmoid(squashed);
            Ok(tape.sum(gated))
        })
        .unwrap();
        prop_assert!(report.max_relative_error() < 1e-4, "{}", report.max_relative_error());
    }
}
