#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactile_flow::classifier::{loss_and_gradient, NUM_CLASSES};
use tactile_flow::flow::FlowField;
use tactile_flow::image::Plane;

/// Largest relative disagreement between the analytic gradient and central
/// differences (step 1e-5) on a random 10-feature, 20-sample problem.
/// Components where both are below 1e-8 are compared on that floor.
pub fn gradient_check(seed: u64) -> f64 {
    const D: usize = 10;
    const N: usize = 20;
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..N)
        .map(|_| (0..D).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let ys: Vec<usize> = (0..N).map(|_| rng.random_range(0..NUM_CLASSES)).collect();
    let w: Vec<f64> = (0..D * NUM_CLASSES).map(|_| rng.random_range(-0.5..0.5)).collect();
    let b: [f64; NUM_CLASSES] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
    let (_, gw, gb) = loss_and_gradient(&w, &b, &xs, &ys);

    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    for i in 0..w.len() {
        let (mut wp, mut wm) = (w.clone(), w.clone());
        wp[i] += STEP;
        wm[i] -= STEP;
        let num = (loss_and_gradient(&wp, &b, &xs, &ys).0 - loss_and_gradient(&wm, &b, &xs, &ys).0) / (2.0 * STEP);
        worst = worst.max(rel(gw[i], num));
    }
    for c in 0..NUM_CLASSES {
        let (mut bp, mut bm) = (b, b);
        bp[c] += STEP;
        bm[c] -= STEP;
        let num = (loss_and_gradient(&w, &bp, &xs, &ys).0 - loss_and_gradient(&w, &bm, &xs, &ys).0) / (2.0 * STEP);
        worst = worst.max(rel(gb[c], num));
    }
    worst
}

#[derive(Clone, Copy)]
pub struct Blob {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub amp: f64,
}

pub fn blobs(seed: u64, n: usize, w: usize, h: usize) -> Vec<Blob> {
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

pub fn render(bs: &[Blob], w: usize, h: usize, shift: (f64, f64)) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let (sx, sy) = (x as f64 - shift.0, y as f64 - shift.1);
        let v: f64 = bs
            .iter()
            .map(|b| b.amp * (-((sx - b.x).powi(2) + (sy - b.y).powi(2)) / (2.0 * b.sigma * b.sigma)).exp())
            .sum();
        v.min(1.0)
    })
}

/// Mean endpoint error against a constant displacement over pixels at least
/// `margin` from the border whose intensity exceeds 0.05.
pub fn interior_epe(flow: &FlowField, img: &Plane, margin: usize, truth: (f64, f64)) -> f64 {
    let (w, h) = flow.dims();
    let mut sum = 0.0;
    let mut n = 0;
    for y in margin..h - margin {
        for x in margin..w - margin {
            if img.get(x, y) > 0.05 {
                let (u, v) = flow.at(x, y);
                sum += (u - truth.0).hypot(v - truth.1);
                n += 1;
            }
        }
    }
    sum / n as f64
}

pub fn textured_fraction(img: &Plane) -> f64 {
    img.data().iter().filter(|&&v| v > 0.05).count() as f64 / img.data().len() as f64
}
