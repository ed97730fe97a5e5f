//! Synthetic-motion oracles for the dense flow estimator: analytic blob
//! fields moved by known translations and rotations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactile_flow::flow::{farneback_flow, flow_single_level, poly_expand, FlowConfig, FlowField};
use tactile_flow::image::Plane;

#[derive(Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amp: f64,
}

fn blobs(seed: u64, n: usize, w: usize, h: usize) -> Vec<Blob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Blob {
            x: rng.random_range(8.0..w as f64 - 8.0),
            y: rng.random_range(8.0..h as f64 - 8.0),
            sigma: rng.random_range(2.5..5.0),
            amp: rng.random_range(0.3..0.8),
        })
        .collect()
}

/// Field value at `(x, y)` after mapping the coordinate through `warp`.
fn render(bs: &[Blob], w: usize, h: usize, warp: impl Fn(f64, f64) -> (f64, f64)) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let (sx, sy) = warp(x as f64, y as f64);
        let v: f64 = bs
            .iter()
            .map(|b| b.amp * (-((sx - b.x).powi(2) + (sy - b.y).powi(2)) / (2.0 * b.sigma * b.sigma)).exp())
            .sum();
        v.min(1.0)
    })
}

/// Mean endpoint error against `truth` over interior, textured pixels.
fn interior_epe(flow: &FlowField, img: &Plane, margin: usize, truth: impl Fn(f64, f64) -> (f64, f64)) -> (f64, usize) {
    let (w, h) = flow.dims();
    let mut sum = 0.0;
    let mut n = 0;
    for y in margin..h - margin {
        for x in margin..w - margin {
            if img.get(x, y) <= 0.05 {
                continue;
            }
            let (u, v) = flow.at(x, y);
            let (tu, tv) = truth(x as f64, y as f64);
            sum += (u - tu).hypot(v - tv);
            n += 1;
        }
    }
    (sum / n as f64, n)
}

fn random_shift(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let dx: i32 = rng.random_range(-4..=4);
        let dy: i32 = rng.random_range(-4..=4);
        if dx * dx + dy * dy <= 16 && (dx, dy) != (0, 0) {
            return (dx as f64, dy as f64);
        }
    }
}

#[test]
fn zero_motion_is_exactly_still() {
    let cfg = FlowConfig::default();
    for seed in 0..50u64 {
        let img = render(&blobs(seed, 6, 48, 40), 48, 40, |x, y| (x, y));
        let flow = farneback_flow(&img, &img, &cfg).unwrap();
        assert!(flow.max_norm() < 1e-6, "seed {seed}: {}", flow.max_norm());
    }
}

#[test]
fn integer_translations_are_recovered() {
    let cfg = FlowConfig::default();
    let (w, h) = (72, 64);
    for seed in 0..20u64 {
        let bs = blobs(seed, 14, w, h);
        let (dx, dy) = random_shift(&mut ChaCha8Rng::seed_from_u64(1000 + seed));
        let prev = render(&bs, w, h, |x, y| (x, y));
        let curr = render(&bs, w, h, |x, y| (x - dx, y - dy));
        let flow = farneback_flow(&prev, &curr, &cfg).unwrap();
        let (epe, n) = interior_epe(&flow, &prev, cfg.window_size, |_, _| (dx, dy));
        assert!(n > 500);
        assert!(epe < 0.25, "seed {seed} shift ({dx}, {dy}): epe {epe}");
    }
}

#[test]
fn shifted_blob_pair_mean_flow() {
    let cfg = FlowConfig::default();
    let (w, h) = (64, 56);
    let bs = [
        Blob { x: 28.0, y: 26.0, sigma: 4.0, amp: 0.9 },
        Blob { x: 36.0, y: 30.0, sigma: 3.0, amp: 0.5 },
    ];
    let prev = render(&bs, w, h, |x, y| (x, y));
    let curr = render(&bs, w, h, |x, y| (x - 3.0, y - 1.0));
    let flow = farneback_flow(&prev, &curr, &cfg).unwrap();
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
    for y in cfg.window_size..h - cfg.window_size {
        for x in cfg.window_size..w - cfg.window_size {
            if prev.get(x, y) > 0.05 {
                let (u, v) = flow.at(x, y);
                su += u;
                sv += v;
                n += 1.0;
            }
        }
    }
    let (mu, mv) = (su / n, sv / n);
    assert!((mu - 3.0).abs() < 0.3 && (mv - 1.0).abs() < 0.3, "mean flow ({mu}, {mv})");
}

#[test]
fn rigid_rotation_matches_analytic_field() {
    let cfg = FlowConfig::default();
    let (w, h) = (81, 81);
    let (cx, cy) = (40.0, 40.0);
    let theta = 5f64.to_radians();
    let (s, c) = theta.sin_cos();
    // Fine, dense texture: with only a few wide isotropic blobs a local
    // window cannot see rotation and tracks each blob centre instead.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bs: Vec<Blob> = (0..150)
        .map(|_| Blob {
            x: rng.random_range(0.0..w as f64),
            y: rng.random_range(0.0..h as f64),
            sigma: rng.random_range(1.5..2.5),
            amp: rng.random_range(0.1..0.4),
        })
        .collect();
    let prev = render(&bs, w, h, |x, y| (x, y));
    // curr(p) = prev(R^-1 (p - c) + c)
    let curr = render(&bs, w, h, |x, y| {
        let (rx, ry) = (x - cx, y - cy);
        (c * rx + s * ry + cx, -s * rx + c * ry + cy)
    });
    let flow = farneback_flow(&prev, &curr, &cfg).unwrap();
    let (epe, n) = interior_epe(&flow, &prev, cfg.window_size, |x, y| {
        let (rx, ry) = (x - cx, y - cy);
        (c * rx - s * ry - rx, s * rx + c * ry - ry)
    });
    assert!(n > 500);
    assert!(epe < 0.4, "rotation epe {epe}");
}

#[test]
fn single_level_identical_expansions_give_zero() {
    let cfg = FlowConfig::default();
    let img = render(&blobs(3, 8, 40, 40), 40, 40, |x, y| (x, y));
    let pe = poly_expand(&img, cfg.poly_n, cfg.poly_sigma).unwrap();
    let flow = flow_single_level(&pe, &pe, &FlowField::zeros(40, 40), &cfg).unwrap();
    assert!(flow.max_norm() < 1e-9);
}

#[test]
fn single_level_recovers_two_pixel_shift() {
    let cfg = FlowConfig::default();
    let (w, h) = (64, 56);
    let bs = blobs(11, 16, w, h);
    let prev = render(&bs, w, h, |x, y| (x, y));
    let curr = render(&bs, w, h, |x, y| (x - 2.0, y));
    let p = poly_expand(&prev, cfg.poly_n, cfg.poly_sigma).unwrap();
    let q = poly_expand(&curr, cfg.poly_n, cfg.poly_sigma).unwrap();
    let flow = flow_single_level(&p, &q, &FlowField::zeros(w, h), &cfg).unwrap();
    let (epe, _) = interior_epe(&flow, &prev, cfg.window_size, |_, _| (2.0, 0.0));
    assert!(epe < 0.25, "single-level epe {epe}");
}

#[test]
fn single_level_dimension_mismatch() {
    let cfg = FlowConfig::default();
    let a = poly_expand(&Plane::zeros(10, 10), 5, 1.1).unwrap();
    let b = poly_expand(&Plane::zeros(11, 10), 5, 1.1).unwrap();
    assert!(flow_single_level(&a, &b, &FlowField::zeros(10, 10), &cfg).is_err());
}

#[test]
fn all_zero_pair_gives_zero_field() {
    let z = Plane::zeros(40, 30);
    let flow = farneback_flow(&z, &z, &FlowConfig::default()).unwrap();
    assert_eq!(flow.max_norm(), 0.0);
}

#[test]
fn appearing_blob_is_finite() {
    let bs = [Blob { x: 20.0, y: 18.0, sigma: 4.0, amp: 1.0 }];
    let prev = Plane::zeros(40, 36);
    let curr = render(&bs, 40, 36, |x, y| (x, y));
    let flow = farneback_flow(&prev, &curr, &FlowConfig::default()).unwrap();
    assert!(flow.u().is_finite() && flow.v().is_finite());
}

#[test]
fn errors_on_mismatch_and_small_images() {
    let cfg = FlowConfig::default();
    assert!(farneback_flow(&Plane::zeros(40, 40), &Plane::zeros(41, 40), &cfg).is_err());
    // 3 levels at scale 0.5: 16 -> 8 -> 4 < poly_n
    assert!(farneback_flow(&Plane::zeros(16, 40), &Plane::zeros(16, 40), &cfg).is_err());
    assert!(farneback_flow(&Plane::zeros(17, 40), &Plane::zeros(17, 40), &cfg).is_ok());
}

#[test]
fn horizontal_flip_negates_u() {
    let cfg = FlowConfig::default();
    // (33 - 1) divisible by 4: every pyramid level is flip-symmetric
    let (w, h) = (33, 29);
    let bs = blobs(5, 8, w, h);
    let prev = render(&bs, w, h, |x, y| (x, y));
    let curr = render(&bs, w, h, |x, y| (x - 1.5, y + 0.5));
    let flow = farneback_flow(&prev, &curr, &cfg).unwrap();
    let flipped = farneback_flow(&prev.flip_horizontal(), &curr.flip_horizontal(), &cfg).unwrap();
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.at(x, y);
            let (fu, fv) = flipped.at(w - 1 - x, y);
            assert!((u + fu).abs() < 1e-6 && (v - fv).abs() < 1e-6, "({x},{y}): {u},{v} vs {fu},{fv}");
        }
    }
}

#[test]
fn deterministic_bits() {
    let cfg = FlowConfig::default();
    let bs = blobs(9, 10, 48, 48);
    let prev = render(&bs, 48, 48, |x, y| (x, y));
    let curr = render(&bs, 48, 48, |x, y| (x - 1.0, y - 2.0));
    let a = farneback_flow(&prev, &curr, &cfg).unwrap();
    let b = farneback_flow(&prev, &curr, &cfg).unwrap();
    let bits = |f: &FlowField| {
        f.u().data().iter().chain(f.v().data()).map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn finite_for_any_finite_input(
            a in proptest::collection::vec(-1e3f64..1e3, 20 * 20),
            b in proptest::collection::vec(-1e3f64..1e3, 20 * 20),
        ) {
            let p = Plane::new(20, 20, a).unwrap();
            let q = Plane::new(20, 20, b).unwrap();
            let cfg = FlowConfig { pyramid_levels: 2, ..FlowConfig::default() };
            let f = farneback_flow(&p, &q, &cfg).unwrap();
            prop_assert!(f.u().is_finite() && f.v().is_finite());
        }

        #[test]
        fn still_for_any_image(a in proptest::collection::vec(0.0f64..1.0, 24 * 20)) {
            let p = Plane::new(24, 20, a).unwrap();
            let f = farneback_flow(&p, &p, &FlowConfig::default()).unwrap();
            prop_assert!(f.max_norm() < 1e-6);
        }
    }
}
