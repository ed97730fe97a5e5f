mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactile_flow::classifier::{
    evaluate, train, ChannelMode, FeatureConfig, Standardizer, TrainConfig,
};
use tactile_flow::synth::{split_labels, GestureClass};

#[test]
fn analytic_gradient_matches_central_differences() {
    for seed in 0..10 {
        let err = common::gradient_check(seed);
        assert!(err < 1e-4, "instance {seed}: relative error {err:e}");
    }
}

#[test]
fn standardized_training_features_are_centered_and_unit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            vec![
                rng.random_range(-3.0..9.0),
                1000.0 + rng.random_range(0.0..0.01),
                4.0,
            ]
        })
        .collect();
    let st = Standardizer::fit(&xs);
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| st.apply(x)).collect();
    for j in 0..2 {
        let n = zs.len() as f64;
        let mean = zs.iter().map(|z| z[j]).sum::<f64>() / n;
        let std = (zs.iter().map(|z| (z[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9, "feature {j} mean {mean}");
        assert!((std - 1.0).abs() < 1e-6, "feature {j} std {std}");
    }
    // constant column hits the floor and maps to zero instead of NaN
    assert!(zs.iter().all(|z| z[2] == 0.0));
}

/// One-hot class indicators plus noise; the test split is the real
/// 30-per-class protocol.
#[test]
fn held_out_rows_sum_to_test_per_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let labels: Vec<GestureClass> = GestureClass::ALL.iter().flat_map(|&c| std::iter::repeat_n(c, 40)).collect();
    let xs: Vec<Vec<f64>> = labels
        .iter()
        .map(|c| {
            (0..5)
                .map(|k| f64::from(u8::from(k == c.index())) + rng.random_range(-0.3..0.3))
                .collect()
        })
        .collect();
    let split = split_labels(&labels, 30, 2).unwrap();
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<GestureClass>) {
        idx.iter().map(|&i| (xs[i].clone(), labels[i])).unzip()
    };
    let (tx, ty) = pick(&split.train);
    let fc = FeatureConfig { pool_grid: (1, 5), channels: ChannelMode::Raw };
    let cfg = TrainConfig { window_len: 1, learning_rate: 0.05, ..TrainConfig::default() };
    let (model, _) = train(&tx, &ty, &fc, &cfg).unwrap();
    let (ex, ey) = pick(&split.test);
    let report = evaluate(&model, &ex, &ey, vec![2]).unwrap();
    assert_eq!(report.row_sums(), [30; 5]);
    assert!(report.mean_accuracy > 0.9, "{}", report.mean_accuracy);
    for row in report.normalized {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(evaluate(&model, &[], &[], vec![]).is_err());
}
