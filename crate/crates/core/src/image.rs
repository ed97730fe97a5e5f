//! Dense single-channel grids.
//!
//! [`Plane`] is an unconstrained real-valued grid used throughout the flow
//! code. [`TactileImage`] wraps a plane whose pixels are known to lie in
//! `[0, 1]`.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Row-major grid of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::dims(width * height, data.len()));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Builds a plane by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Bilinear sample with coordinates clamped to the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mirror image about the vertical axis.
    pub fn flip_horizontal(&self) -> Plane {
        Plane::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }
}

/// Single-channel tactile image with every pixel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileImage(Plane);

impl TactileImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::from_plane(Plane::new(width, height, pixels)?)
    }

    pub fn from_plane(plane: Plane) -> Result<Self> {
        if let Some((i, v)) = plane
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Input(format!(
                "tactile pixel {i} = {v} outside [0, 1]"
            )));
        }
        Ok(TactileImage(plane))
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        TactileImage(Plane::zeros(width, height))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }
}

impl Deref for TactileImage {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

impl AsRef<Plane> for TactileImage {
    fn as_ref(&self) -> &Plane {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_grid_points_and_midpoints() {
        let p = Plane::from_fn(3, 2, |x, y| (x + 10 * y) as f64);
        assert_eq!(p.sample_bilinear(2.0, 1.0), 12.0);
        assert_eq!(p.sample_bilinear(0.5, 0.5), 5.5);
        // clamped
        assert_eq!(p.sample_bilinear(-4.0, 9.0), 10.0);
    }

    #[test]
    fn tactile_image_rejects_out_of_range() {
        assert!(TactileImage::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(TactileImage::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(TactileImage::new(2, 1, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn plane_length_checked() {
        assert!(Plane::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Plane::new(0, 2, vec![]).is_err());
    }
}
