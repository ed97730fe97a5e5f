//! Three-channel augmented tactile frames.
//!
//! Red carries the pressure image, green the flow magnitude scaled by a fixed
//! ceiling `v_max`, and blue the flow direction mapped from `[-pi, pi)` to
//! `[0, 1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{expand_pyramid, flow_from_expansions, FlowConfig, FlowField};
use crate::image::{Plane, TactileImage};
use crate::pnm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Displacement (pixels/frame) that saturates the magnitude channel.
    pub v_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { v_max: 5.0 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::Config(format!("v_max must be > 0, got {}", self.v_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedFrame {
    pressure: Plane,
    magnitude: Plane,
    direction: Plane,
}

impl AugmentedFrame {
    pub fn zeros(width: usize, height: usize) -> Self {
        AugmentedFrame {
            pressure: Plane::zeros(width, height),
            magnitude: Plane::zeros(width, height),
            direction: Plane::zeros(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.pressure.width()
    }

    pub fn height(&self) -> usize {
        self.pressure.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pressure.dims()
    }

    /// Red: contact pressure.
    pub fn pressure(&self) -> &Plane {
        &self.pressure
    }

    /// Green: normalized flow magnitude.
    pub fn magnitude(&self) -> &Plane {
        &self.magnitude
    }

    /// Blue: normalized flow direction.
    pub fn direction(&self) -> &Plane {
        &self.direction
    }

    /// Channels in R, G, B order.
    pub fn channels(&self) -> [&Plane; 3] {
        [&self.pressure, &self.magnitude, &self.direction]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        pnm::encode_ppm(&self.pressure, &self.magnitude, &self.direction)
            .expect("channels share dimensions")
    }
}

/// Maps an angle from `atan2` onto `[0, 1)`; `+pi` folds onto `-pi`.
#[inline]
pub fn encode_direction(theta: f64) -> f64 {
    let d = (theta + PI) / (2.0 * PI);
    if d >= 1.0 {
        d - 1.0
    } else {
        d
    }
}

/// Magnitude and direction channels of a flow field.
pub fn flow_to_polar(flow: &FlowField, config: &AugmentConfig) -> Result<(Plane, Plane)> {
    config.validate()?;
    let (w, h) = flow.dims();
    let tiny = 1e-6 * config.v_max;
    let mut mag = Vec::with_capacity(w * h);
    let mut dir = Vec::with_capacity(w * h);
    for (&u, &v) in flow.u().data().iter().zip(flow.v().data()) {
        let m = u.hypot(v);
        mag.push((m / config.v_max).clamp(0.0, 1.0));
        dir.push(if m < tiny { 0.0 } else { encode_direction(v.atan2(u)) });
    }
    Ok((Plane::new(w, h, mag)?, Plane::new(w, h, dir)?))
}

pub fn augment_frame(
    pressure: &TactileImage,
    flow: &FlowField,
    config: &AugmentConfig,
) -> Result<AugmentedFrame> {
    if pressure.dims() != flow.dims() {
        return Err(Error::dims(
            format!("{:?}", pressure.dims()),
            format!("{:?} (flow)", flow.dims()),
        ));
    }
    let (magnitude, direction) = flow_to_polar(flow, config)?;
    Ok(AugmentedFrame {
        pressure: pressure.plane().clone(),
        magnitude,
        direction,
    })
}

/// Augments a whole sequence. Frame `k` pairs `I_k` with the flow from
/// `I_{k-1}`; the first frame is paired against an all-zero predecessor.
pub fn process_sequence(
    frames: &[TactileImage],
    flow_config: &FlowConfig,
    aug_config: &AugmentConfig,
) -> Result<Vec<AugmentedFrame>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Input("cannot augment an empty sequence".into()))?;
    let dims = first.dims();
    if let Some((k, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
        return Err(Error::dims(
            format!("{dims:?}"),
            format!("{:?} at frame {k}", f.dims()),
        ));
    }
    let mut prev = expand_pyramid(&TactileImage::zeros(dims.0, dims.1), flow_config)?;
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let curr = expand_pyramid(frame, flow_config)?;
        let flow = flow_from_expansions(&prev, &curr, flow_config)?;
        out.push(augment_frame(frame, &flow, aug_config)?);
        prev = curr;
    }
    Ok(out)
}
