//! Per-pixel quadratic polynomial expansion.
//!
//! Each pixel's neighbourhood is fitted by weighted least squares to
//! `f(x) ~ x^T A x + b^T x + c` under a separable Gaussian applicability.
//! Near the border the window is truncated to the image and the normal
//! equations are formed from the remaining samples only, so the weights are
//! implicitly renormalized.

use crate::error::{Error, Result};
use crate::image::Plane;

/// Quadratic coefficients at one pixel, in pixel-offset coordinates
/// (`x` along columns, `y` along rows).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolyCoeffs {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl PolyCoeffs {
    fn lerp(self, other: PolyCoeffs, t: f64) -> PolyCoeffs {
        let l = |a: f64, b: f64| a + (b - a) * t;
        PolyCoeffs {
            a11: l(self.a11, other.a11),
            a12: l(self.a12, other.a12),
            a22: l(self.a22, other.a22),
            b1: l(self.b1, other.b1),
            b2: l(self.b2, other.b2),
            c: l(self.c, other.c),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a22, self.b1, self.b2, self.c]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpansion {
    width: usize,
    height: usize,
    coeffs: Vec<PolyCoeffs>,
}

impl PolyExpansion {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> PolyCoeffs {
        self.coeffs[y * self.width + x]
    }

    pub fn coeffs(&self) -> &[PolyCoeffs] {
        &self.coeffs
    }

    /// Bilinear interpolation of the coefficient fields, clamped to bounds.
    pub fn sample(&self, x: f64, y: f64) -> PolyCoeffs {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0).lerp(self.at(x1, y0), fx);
        let bottom = self.at(x0, y1).lerp(self.at(x1, y1), fx);
        top.lerp(bottom, fy)
    }
}

/// Basis order: 1, x, y, x^2, y^2, xy. Each entry is (power of x, power of y).
const BASIS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)];

/// Fits the quadratic model at every pixel.
pub fn poly_expand(image: &Plane, poly_n: usize, poly_sigma: f64) -> Result<PolyExpansion> {
    if poly_n < 3 || poly_n.is_multiple_of(2) {
        return Err(Error::Config(format!("poly_n must be odd and >= 3, got {poly_n}")));
    }
    if !(poly_sigma > 0.0 && poly_sigma.is_finite()) {
        return Err(Error::Config(format!("poly_sigma must be > 0, got {poly_sigma}")));
    }
    let (w, h) = image.dims();
    if w < poly_n || h < poly_n {
        return Err(Error::TooSmall(format!(
            "{w}x{h} image is smaller than the {poly_n}x{poly_n} expansion window"
        )));
    }
    if !image.is_finite() {
        return Err(Error::NonFinite("image passed to poly_expand".into()));
    }

    let half = (poly_n / 2) as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|t| (-((t * t) as f64) / (2.0 * poly_sigma * poly_sigma)).exp())
        .collect();
    let g = |t: isize| kernel[(t + half) as usize];

    // Truncated 1D moments sum_t g(t) t^p, p = 0..4, over t in -lo..=hi.
    // Pixels are classified by how far the window reaches on each side;
    // all pixels of one class share the Gram matrix and hence the solve.
    let moments = |lo: isize, hi: isize| -> [f64; 5] {
        let mut m = [0.0; 5];
        for t in -lo..=hi {
            let wt = g(t);
            let tf = t as f64;
            let mut pw = 1.0;
            for mp in m.iter_mut() {
                *mp += wt * pw;
                pw *= tf;
            }
        }
        m
    };
    let reach = half as usize + 1;
    let class = |i: usize, len: usize| i.min(half as usize) * reach + (len - 1 - i).min(half as usize);
    let class_moments: Vec<[f64; 5]> = (0..reach * reach)
        .map(|k| moments((k / reach) as isize, (k % reach) as isize))
        .collect();
    let n_classes = reach * reach;
    let mut operators: Vec<Option<[[f64; 6]; 6]>> = vec![None; n_classes * n_classes];
    let cx: Vec<usize> = (0..w).map(|x| class(x, w)).collect();

    // Row pass: r[a](x, y) = sum_tx g(tx) tx^a f(x + tx, y), a = 0..2.
    let src = image.data();
    let mut rows = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let xi = x as isize;
            let mut acc = [0.0; 3];
            for t in (-half).max(-xi)..=half.min(w as isize - 1 - xi) {
                let f = src[y * w + (xi + t) as usize] * g(t);
                let tf = t as f64;
                acc[0] += f;
                acc[1] += f * tf;
                acc[2] += f * tf * tf;
            }
            rows[y * w + x] = acc;
        }
    }

    // Column pass produces the six weighted moments in basis order.
    let mut coeffs = Vec::with_capacity(w * h);
    for y in 0..h {
        let yi = y as isize;
        let cy = class(y, h);
        for x in 0..w {
            let mut rhs = [0.0f64; 6];
            for t in (-half).max(-yi)..=half.min(h as isize - 1 - yi) {
                let r = rows[(yi + t) as usize * w + x];
                let wt = g(t);
                let tf = t as f64;
                rhs[0] += wt * r[0];
                rhs[1] += wt * r[1];
                rhs[2] += wt * tf * r[0];
                rhs[3] += wt * r[2];
                rhs[4] += wt * tf * tf * r[0];
                rhs[5] += wt * tf * r[1];
            }
            let key = cy * n_classes + cx[x];
            let op = operators[key].get_or_insert_with(|| {
                let (mx, my) = (&class_moments[cx[x]], &class_moments[cy]);
                let mut gram = [[0.0f64; 6]; 6];
                for (i, &(pi, qi)) in BASIS.iter().enumerate() {
                    for (j, &(pj, qj)) in BASIS.iter().enumerate() {
                        gram[i][j] = mx[pi + pj] * my[qi + qj];
                    }
                }
                // columns are the solutions for unit right-hand sides
                let cols: [[f64; 6]; 6] = std::array::from_fn(|k| {
                    let mut e = [0.0; 6];
                    e[k] = 1.0;
                    solve_dropping_degenerate(gram, e)
                });
                std::array::from_fn(|i| std::array::from_fn(|k| cols[k][i]))
            });
            let r: [f64; 6] = std::array::from_fn(|i| {
                op[i].iter().zip(&rhs).map(|(a, b)| a * b).sum()
            });
            coeffs.push(PolyCoeffs {
                c: r[0],
                b1: r[1],
                b2: r[2],
                a11: r[3],
                a22: r[4],
                a12: 0.5 * r[5],
            });
        }
    }

    Ok(PolyExpansion {
        width: w,
        height: h,
        coeffs,
    })
}

/// Solves the symmetric positive semi-definite system by elimination in
/// basis order. A basis function whose pivot vanishes relative to its
/// diagonal is linearly dependent on earlier ones over the truncated window
/// and gets coefficient 0.
fn solve_dropping_degenerate(mut m: [[f64; 6]; 6], mut rhs: [f64; 6]) -> [f64; 6] {
    const REL_EPS: f64 = 1e-10;
    let diag: [f64; 6] = std::array::from_fn(|i| m[i][i]);
    let mut active = [true; 6];
    for k in 0..6 {
        let pivot = m[k][k];
        if !(pivot > REL_EPS * diag[k].max(f64::MIN_POSITIVE)) {
            active[k] = false;
            continue;
        }
        for i in k + 1..6 {
            let f = m[i][k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..6 {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut sol = [0.0f64; 6];
    for k in (0..6).rev() {
        if !active[k] {
            continue;
        }
        let mut s = rhs[k];
        for j in k + 1..6 {
            s -= m[k][j] * sol[j];
        }
        sol[k] = s / m[k][k];
    }
    sol
}
