use crate::image::Plane;

const BINOMIAL: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// 5-tap binomial blur; taps falling outside the image are dropped and the
/// remaining weights renormalized.
pub fn binomial_smooth(src: &Plane) -> Plane {
    let (w, h) = src.dims();
    let pass = |len: usize, at: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        let mut acc = 0.0;
        let mut norm = 0.0;
        for (k, &wt) in BINOMIAL.iter().enumerate() {
            let j = i as isize + k as isize - 2;
            if j >= 0 && (j as usize) < len {
                acc += wt * at(j as usize);
                norm += wt;
            }
        }
        acc / norm
    };
    let horiz = Plane::from_fn(w, h, |x, y| pass(w, &|j| src.get(j, y), x));
    Plane::from_fn(w, h, |x, y| pass(h, &|j| horiz.get(x, j), y))
}

/// Size of the next coarser level. The last source sample maps onto the
/// grid, so bilinear lookups never clamp.
pub fn level_dims(width: usize, height: usize, scale: f64) -> (usize, usize) {
    let shrink = |n: usize| ((n - 1) as f64 * scale).floor() as usize + 1;
    (shrink(width), shrink(height))
}

pub fn downsample(src: &Plane, scale: f64) -> Plane {
    let smooth = binomial_smooth(src);
    let (w, h) = level_dims(src.width(), src.height(), scale);
    Plane::from_fn(w, h, |x, y| {
        smooth.sample_bilinear(x as f64 / scale, y as f64 / scale)
    })
}

/// Level 0 is the input; each further level is smoothed and subsampled.
pub fn build(src: &Plane, levels: usize, scale: f64) -> Vec<Plane> {
    let mut out = Vec::with_capacity(levels);
    out.push(src.clone());
    for _ in 1..levels {
        let next = downsample(out.last().expect("non-empty"), scale);
        out.push(next);
    }
    out
}
