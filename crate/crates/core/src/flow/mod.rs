//! Dense optical flow between consecutive tactile images.
//!
//! Polynomial expansion of both frames, then iterative displacement
//! estimation over a Gaussian pyramid, coarse to fine.

mod farneback;
mod poly;
mod pyramid;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Plane;

pub use farneback::{
    expand_pyramid, farneback_flow, flow_from_expansions, flow_single_level, SINGULAR_DET,
};
pub use poly::{poly_expand, PolyCoeffs, PolyExpansion};
pub use pyramid::{binomial_smooth, build as build_pyramid, level_dims};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub window_size: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
    pub iterations: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            window_size: 9,
            poly_n: 5,
            poly_sigma: 1.1,
            iterations: 3,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 3 || self.window_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "window_size must be odd and >= 3, got {}",
                self.window_size
            )));
        }
        if self.poly_n < 3 || self.poly_n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "poly_n must be odd and >= 3, got {}",
                self.poly_n
            )));
        }
        if self.pyramid_levels < 1 {
            return Err(Error::Config("pyramid_levels must be >= 1".into()));
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(Error::Config(format!(
                "pyramid_scale must lie in (0, 1), got {}",
                self.pyramid_scale
            )));
        }
        if !(self.poly_sigma > 0.0 && self.poly_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "poly_sigma must be > 0, got {}",
                self.poly_sigma
            )));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Dimensions of the coarsest pyramid level for a full-size image.
    pub fn coarsest_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (1..self.pyramid_levels).fold((width, height), |(w, h), _| {
            level_dims(w, h, self.pyramid_scale)
        })
    }
}

/// Per-pixel displacement `(u, v)` in pixels per frame, `u` along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    u: Plane,
    v: Plane,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            u: Plane::zeros(width, height),
            v: Plane::zeros(width, height),
        }
    }

    pub fn from_planes(u: Plane, v: Plane) -> Result<Self> {
        if u.dims() != v.dims() {
            return Err(Error::dims(format!("{:?}", u.dims()), format!("{:?}", v.dims())));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("flow component".into()));
        }
        Ok(FlowField { u, v })
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    pub fn u(&self) -> &Plane {
        &self.u
    }

    pub fn v(&self) -> &Plane {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        (self.u.get(x, y), self.v.get(x, y))
    }

    /// `max |(u, v)|` over all pixels.
    pub fn max_norm(&self) -> f64 {
        self.u
            .data()
            .iter()
            .zip(self.v.data())
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Writes the `TFLO` interchange format: magic, width and height as
    /// little-endian `u32`, then the `u` plane and the `v` plane as
    /// little-endian `f32`, row-major.
    pub fn write_tflo<W: Write>(&self, mut w: W) -> Result<()> {
        let (width, height) = self.dims();
        let mut buf = Vec::with_capacity(12 + 8 * width * height);
        buf.extend_from_slice(b"TFLO");
        buf.extend_from_slice(&(width as u32).to_le_bytes());
        buf.extend_from_slice(&(height as u32).to_le_bytes());
        for plane in [&self.u, &self.v] {
            for &val in plane.data() {
                buf.extend_from_slice(&(val as f32).to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(|e| Error::io("<tflo writer>", e))
    }

    pub fn read_tflo<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<tflo reader>", e))?;
        if bytes.len() < 12 || &bytes[..4] != b"TFLO" {
            return Err(Error::format("TFLO", "bad magic or truncated header"));
        }
        let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let (width, height) = (word(4) as usize, word(8) as usize);
        let n = width * height;
        if bytes.len() != 12 + 8 * n {
            return Err(Error::format(
                "TFLO",
                format!("expected {} bytes for {width}x{height}, got {}", 12 + 8 * n, bytes.len()),
            ));
        }
        let plane = |start: usize| {
            let data = bytes[start..start + 4 * n]
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect();
            Plane::new(width, height, data)
        };
        FlowField::from_planes(plane(12)?, plane(12 + 4 * n)?)
    }
}
