use serde::{Deserialize, Serialize};

use crate::augment::AugmentedFrame;
use crate::error::{Error, Result};
use crate::image::{Plane, TactileImage};

/// Which channels feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Pressure only.
    Raw,
    /// Pressure, flow magnitude and flow direction.
    Augmented,
}

impl ChannelMode {
    pub fn channels(self) -> usize {
        match self {
            ChannelMode::Raw => 1,
            ChannelMode::Augmented => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Raw => "raw",
            ChannelMode::Augmented => "augmented",
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ChannelMode::Raw),
            "augmented" => Ok(ChannelMode::Augmented),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}, expected raw or augmented"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Pooling cells as (rows, cols).
    pub pool_grid: (usize, usize),
    pub channels: ChannelMode,
}

impl FeatureConfig {
    pub fn new(channels: ChannelMode) -> Self {
        FeatureConfig {
            pool_grid: (8, 8),
            channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_grid.0 == 0 || self.pool_grid.1 == 0 {
            return Err(Error::Config(format!(
                "pool grid must be at least 1x1, got {:?}",
                self.pool_grid
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.pool_grid.0 * self.pool_grid.1
    }

    pub fn frame_len(&self) -> usize {
        self.cells() * self.channels.channels()
    }

    pub fn feature_len(&self, window_len: usize) -> usize {
        self.frame_len() * window_len
    }
}

/// A frame whose channels can be pooled.
pub trait PoolSource {
    fn dims(&self) -> (usize, usize);
    fn planes(&self, mode: ChannelMode) -> Result<Vec<&Plane>>;
}

impl PoolSource for TactileImage {
    fn dims(&self) -> (usize, usize) {
        Plane::dims(self)
    }

    fn planes(&self, mode: ChannelMode) -> Result<Vec<&Plane>> {
        match mode {
            ChannelMode::Raw => Ok(vec![self.plane()]),
            ChannelMode::Augmented => Err(Error::Input(
                "augmented features need a 3-channel frame".into(),
            )),
        }
    }
}

impl PoolSource for AugmentedFrame {
    fn dims(&self) -> (usize, usize) {
        AugmentedFrame::dims(self)
    }

    fn planes(&self, mode: ChannelMode) -> Result<Vec<&Plane>> {
        Ok(match mode {
            ChannelMode::Raw => vec![self.pressure()],
            ChannelMode::Augmented => self.channels().to_vec(),
        })
    }
}

/// Mean of every channel over every cell, cell-major then channel-major.
pub fn pool_planes(planes: &[&Plane], grid: (usize, usize)) -> Result<Vec<f64>> {
    let (rows, cols) = grid;
    let first = planes
        .first()
        .ok_or_else(|| Error::Input("no channels to pool".into()))?;
    let (w, h) = first.dims();
    if planes.iter().any(|p| p.dims() != (w, h)) {
        return Err(Error::Input("channels differ in size".into()));
    }
    if h < rows || w < cols {
        return Err(Error::TooSmall(format!(
            "{w}x{h} frame cannot be pooled into {rows}x{cols} cells"
        )));
    }
    let mut out = Vec::with_capacity(rows * cols * planes.len());
    for r in 0..rows {
        let (y0, y1) = (r * h / rows, (r + 1) * h / rows);
        for c in 0..cols {
            let (x0, x1) = (c * w / cols, (c + 1) * w / cols);
            let area = ((y1 - y0) * (x1 - x0)) as f64;
            for p in planes {
                let mut s = 0.0;
                for y in y0..y1 {
                    s += p.data()[y * w + x0..y * w + x1].iter().sum::<f64>();
                }
                out.push(s / area);
            }
        }
    }
    Ok(out)
}

pub fn pool_frame<F: PoolSource>(frame: &F, config: &FeatureConfig) -> Result<Vec<f64>> {
    config.validate()?;
    pool_planes(&frame.planes(config.channels)?, config.pool_grid)
}

/// Pooled features of a window, frame-major.
pub fn extract_features<F: PoolSource>(window: &[F], config: &FeatureConfig) -> Result<Vec<f64>> {
    let first = window
        .first()
        .ok_or_else(|| Error::Input("empty window".into()))?;
    let dims = first.dims();
    let mut out = Vec::with_capacity(config.frame_len() * window.len());
    for (k, f) in window.iter().enumerate() {
        if f.dims() != dims {
            return Err(Error::dims(format!("{dims:?}"), format!("{:?} at frame {k}", f.dims())));
        }
        out.extend(pool_frame(f, config)?);
    }
    Ok(out)
}
