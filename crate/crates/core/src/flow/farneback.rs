//! Two-frame displacement estimation from polynomial expansions.

use crate::error::{Error, Result};
use crate::image::Plane;

use super::poly::{poly_expand, PolyExpansion};
use super::pyramid;
use super::{FlowConfig, FlowField};

/// Below this determinant the averaged normal matrix is treated as singular
/// and the pixel keeps its current displacement.
pub const SINGULAR_DET: f64 = 1e-9;

/// Mean over a `(2r+1)^2` box, truncated at the image border.
fn box_mean(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * w..(y + 1) * w];
        let mut s: f64 = row[..r.min(w - 1) + 1].iter().sum();
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            out[x] = s / (hi - lo + 1) as f64;
            if x + r + 1 < w {
                s += row[x + r + 1];
            }
            if x >= r {
                s -= row[x - r];
            }
        }
    }
    let mut out = vec![0.0; w * h];
    let mut acc = vec![0.0; w];
    for j in 0..=r.min(h - 1) {
        for (a, t) in acc.iter_mut().zip(&tmp[j * w..(j + 1) * w]) {
            *a += t;
        }
    }
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        let inv = 1.0 / (hi - lo + 1) as f64;
        for (o, a) in out[y * w..(y + 1) * w].iter_mut().zip(&acc) {
            *o = a * inv;
        }
        if y + r + 1 < h {
            let add = (y + r + 1) * w;
            for (a, t) in acc.iter_mut().zip(&tmp[add..add + w]) {
                *a += t;
            }
        }
        if y >= r {
            let sub = (y - r) * w;
            for (a, t) in acc.iter_mut().zip(&tmp[sub..sub + w]) {
                *a -= t;
            }
        }
    }
    out
}

/// Refines `initial_flow` at one resolution by `config.iterations` rounds of
/// warp, local normal-equation assembly and window-averaged solve.
pub fn flow_single_level(
    prev: &PolyExpansion,
    curr: &PolyExpansion,
    initial_flow: &FlowField,
    config: &FlowConfig,
) -> Result<FlowField> {
    if prev.dims() != curr.dims() {
        return Err(Error::dims(
            format!("{:?}", prev.dims()),
            format!("{:?}", curr.dims()),
        ));
    }
    if initial_flow.dims() != prev.dims() {
        return Err(Error::dims(
            format!("{:?}", prev.dims()),
            format!("{:?} (initial flow)", initial_flow.dims()),
        ));
    }
    config.validate()?;

    let (w, h) = prev.dims();
    let n = w * h;
    let radius = config.window_size / 2;
    let mut u = initial_flow.u().data().to_vec();
    let mut v = initial_flow.v().data().to_vec();

    let mut g11 = vec![0.0; n];
    let mut g12 = vec![0.0; n];
    let mut g22 = vec![0.0; n];
    let mut h1 = vec![0.0; n];
    let mut h2 = vec![0.0; n];

    for _ in 0..config.iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (dx, dy) = (u[i], v[i]);
                let p = prev.at(x, y);
                let c = curr.sample(x as f64 + dx, y as f64 + dy);
                let a11 = 0.5 * (p.a11 + c.a11);
                let a12 = 0.5 * (p.a12 + c.a12);
                let a22 = 0.5 * (p.a22 + c.a22);
                let db1 = -0.5 * (c.b1 - p.b1) + a11 * dx + a12 * dy;
                let db2 = -0.5 * (c.b2 - p.b2) + a12 * dx + a22 * dy;
                // A is symmetric, so A^T A = A^2 and A^T db = A db.
                g11[i] = a11 * a11 + a12 * a12;
                g12[i] = a11 * a12 + a12 * a22;
                g22[i] = a12 * a12 + a22 * a22;
                h1[i] = a11 * db1 + a12 * db2;
                h2[i] = a12 * db1 + a22 * db2;
            }
        }
        let s11 = box_mean(&g11, w, h, radius);
        let s12 = box_mean(&g12, w, h, radius);
        let s22 = box_mean(&g22, w, h, radius);
        let t1 = box_mean(&h1, w, h, radius);
        let t2 = box_mean(&h2, w, h, radius);
        for i in 0..n {
            let det = s11[i] * s22[i] - s12[i] * s12[i];
            if det < SINGULAR_DET {
                continue;
            }
            let nu = (s22[i] * t1[i] - s12[i] * t2[i]) / det;
            let nv = (s11[i] * t2[i] - s12[i] * t1[i]) / det;
            if nu.is_finite() && nv.is_finite() {
                u[i] = nu;
                v[i] = nv;
            }
        }
    }

    FlowField::from_planes(
        Plane::new(w, h, u)?,
        Plane::new(w, h, v)?,
    )
}

/// Bilinear upsampling of a coarse flow to `(w, h)`, rescaled by `1/scale`.
fn upsample_flow(coarse: &FlowField, w: usize, h: usize, scale: f64) -> Result<FlowField> {
    let inv = 1.0 / scale;
    let resample = |p: &Plane| {
        Plane::from_fn(w, h, |x, y| {
            p.sample_bilinear(x as f64 * scale, y as f64 * scale) * inv
        })
    };
    FlowField::from_planes(resample(coarse.u()), resample(coarse.v()))
}

fn check_input(image: &Plane, config: &FlowConfig) -> Result<()> {
    config.validate()?;
    if !image.is_finite() {
        return Err(Error::NonFinite("flow input image".into()));
    }
    let (cw, ch) = config.coarsest_dims(image.width(), image.height());
    if cw < config.poly_n || ch < config.poly_n {
        return Err(Error::TooSmall(format!(
            "{}x{} image reaches {cw}x{ch} at the coarsest of {} levels, below poly_n = {}",
            image.width(),
            image.height(),
            config.pyramid_levels,
            config.poly_n
        )));
    }
    Ok(())
}

/// Polynomial expansion of every pyramid level, finest first. Computing this
/// once per frame lets a sequence reuse it for both pairs the frame is in.
pub fn expand_pyramid(image: &Plane, config: &FlowConfig) -> Result<Vec<PolyExpansion>> {
    check_input(image, config)?;
    pyramid::build(image, config.pyramid_levels, config.pyramid_scale)
        .iter()
        .map(|level| poly_expand(level, config.poly_n, config.poly_sigma))
        .collect()
}

/// Coarse-to-fine flow from precomputed pyramid expansions.
pub fn flow_from_expansions(
    prev: &[PolyExpansion],
    curr: &[PolyExpansion],
    config: &FlowConfig,
) -> Result<FlowField> {
    if prev.len() != curr.len() || prev.is_empty() {
        return Err(Error::dims(
            format!("{} pyramid levels", prev.len()),
            format!("{}", curr.len()),
        ));
    }
    let mut flow: Option<FlowField> = None;
    for (p, c) in prev.iter().zip(curr).rev() {
        let (w, h) = p.dims();
        let initial = match flow.take() {
            None => FlowField::zeros(w, h),
            Some(coarse) => upsample_flow(&coarse, w, h, config.pyramid_scale)?,
        };
        flow = Some(flow_single_level(p, c, &initial, config)?);
    }
    Ok(flow.expect("at least one pyramid level"))
}

/// Dense flow from `prev` to `curr`, estimated coarse to fine.
pub fn farneback_flow(prev: &Plane, curr: &Plane, config: &FlowConfig) -> Result<FlowField> {
    if prev.dims() != curr.dims() {
        return Err(Error::dims(
            format!("{:?}", prev.dims()),
            format!("{:?}", curr.dims()),
        ));
    }
    check_input(curr, config)?;
    let p = expand_pyramid(prev, config)?;
    let c = expand_pyramid(curr, config)?;
    flow_from_expansions(&p, &c, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn box_mean_direct(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (mut s, mut n) = (0.0, 0.0);
                for j in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    for i in x.saturating_sub(r)..=(x + r).min(w - 1) {
                        s += src[j * w + i];
                        n += 1.0;
                    }
                }
                out[y * w + x] = s / n;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn running_box_mean_matches_direct(
            w in 1usize..20,
            h in 1usize..20,
            r in 0usize..6,
            seed in any::<u64>(),
        ) {
            let src: Vec<f64> = (0..w * h)
                .map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 100.0 - 5.0)
                .collect();
            let got = box_mean(&src, w, h, r);
            let want = box_mean_direct(&src, w, h, r);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
