//! Synthetic touch-gesture sequences.
//!
//! Every gesture is a sum of Gaussian pressure blobs sampled at the taxel
//! positions. Grasp, Twist and Pull start from the same blob layout and only
//! differ in how the blobs move afterwards, so a single pressure frame
//! cannot tell them apart.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterConfig, TaxelFrame, TaxelLayout, RAW_MAX};

pub const GENERATOR_VERSION: &str = "tactile-synth/1";
pub const FRAME_DT_MS: u64 = 100;
pub const MIN_FRAMES: usize = 5;
pub const MAX_FRAMES: usize = 27;
pub const DURATION_RULE: &str = "uniform integer frames in [5, 27] per sample";

/// Resting output of an unloaded taxel.
pub const SENSOR_BASELINE: f64 = 1000.0;
/// Raw counts produced by a full-force contact above baseline.
pub const SENSOR_RANGE: f64 = 30000.0;

const ARC_RADIUS_MM: f64 = 22.0;
const FINGER_SPREAD_RAD: f64 = 0.45;
const THUMB_RADIUS_FACTOR: f64 = 0.9;
const THUMB_SIZE_FACTOR: f64 = 1.3;
const HAND_SEPARATION_MM: f64 = 38.0;
const TWO_HAND_ARC_FACTOR: f64 = 0.8;
const PAD_SPACING_MM: f64 = 16.0;
const PAD_OFFSET_Y_MM: f64 = -10.0;
const PAD_SIZE_FACTOR: f64 = 1.2;
const RAMP_FRAMES: f64 = 3.0;
const TWIST_RATE_RAD: f64 = 0.15;
const SLIDE_RATE_MM: f64 = 2.0;
const PUSH_GROWTH_FRAMES: f64 = 6.0;
const PUSH_START_INTENSITY: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum GestureClass {
    Grasp = 0,
    #[serde(rename = "2hGrasp")]
    TwoHandGrasp = 1,
    Twist = 2,
    Push = 3,
    Pull = 4,
}

impl GestureClass {
    pub const COUNT: usize = 5;
    pub const ALL: [GestureClass; 5] = [
        GestureClass::Grasp,
        GestureClass::TwoHandGrasp,
        GestureClass::Twist,
        GestureClass::Push,
        GestureClass::Pull,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Grasp => "Grasp",
            GestureClass::TwoHandGrasp => "2hGrasp",
            GestureClass::Twist => "Twist",
            GestureClass::Push => "Push",
            GestureClass::Pull => "Pull",
        }
    }
}

impl std::fmt::Display for GestureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How one participant performs gestures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStyle {
    pub blob_count: usize,
    pub blob_radius_mm: f64,
    pub force_scale: f64,
    /// Hand placement relative to the centre of the layout.
    pub placement_offset_mm: [f64; 2],
    pub speed_scale: f64,
    pub duration_frames: usize,
    /// Additive sensor noise, raw counts.
    pub noise_std: f64,
}

impl UserStyle {
    pub fn validate(&self) -> Result<()> {
        if self.blob_count == 0 {
            return Err(Error::Config("blob_count must be >= 1".into()));
        }
        if !(self.blob_radius_mm > 0.0 && self.blob_radius_mm.is_finite()) {
            return Err(Error::Config("blob_radius_mm must be > 0".into()));
        }
        if !(self.force_scale > 0.0 && self.force_scale <= 1.0) {
            return Err(Error::Config(format!(
                "force_scale must lie in (0, 1], got {}",
                self.force_scale
            )));
        }
        if !(self.speed_scale >= 0.0 && self.speed_scale.is_finite()) {
            return Err(Error::Config("speed_scale must be finite and >= 0".into()));
        }
        if !(MIN_FRAMES..=MAX_FRAMES).contains(&self.duration_frames) {
            return Err(Error::Config(format!(
                "duration_frames must lie in [{MIN_FRAMES}, {MAX_FRAMES}], got {}",
                self.duration_frames
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be finite and >= 0".into()));
        }
        if !self.placement_offset_mm.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("placement offset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureSample {
    pub label: GestureClass,
    pub frames: Vec<TaxelFrame>,
    pub user_id: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
}

/// Fingertip arc plus thumb, centred on `(cx, cy)`.
fn hand_blobs(cx: f64, cy: f64, style: &UserStyle, arc_factor: f64) -> Vec<Blob> {
    let sigma = 0.5 * style.blob_radius_mm;
    let radius = ARC_RADIUS_MM * arc_factor;
    let n = style.blob_count;
    let mut blobs: Vec<Blob> = (0..n)
        .map(|i| {
            let angle = FRAC_PI_2 + (i as f64 - 0.5 * (n as f64 - 1.0)) * FINGER_SPREAD_RAD;
            Blob {
                x: cx + radius * angle.cos(),
                y: cy + radius * angle.sin(),
                sigma,
            }
        })
        .collect();
    blobs.push(Blob {
        x: cx,
        y: cy - THUMB_RADIUS_FACTOR * radius,
        sigma: THUMB_SIZE_FACTOR * sigma,
    });
    blobs
}

fn pad_blobs(cx: f64, cy: f64, style: &UserStyle) -> Vec<Blob> {
    let n = style.blob_count;
    (0..n)
        .map(|i| Blob {
            x: cx + (i as f64 - 0.5 * (n as f64 - 1.0)) * PAD_SPACING_MM,
            y: cy + PAD_OFFSET_Y_MM,
            sigma: PAD_SIZE_FACTOR * 0.5 * style.blob_radius_mm,
        })
        .collect()
}

fn ramp(k: usize) -> f64 {
    ((k as f64 + 1.0) / RAMP_FRAMES).min(1.0)
}

/// Blob positions and overall intensity of `class` at frame `k`.
struct Kinematics {
    class: GestureClass,
    anchor: (f64, f64),
    initial: Vec<Blob>,
    speed: f64,
    moving: bool,
}

impl Kinematics {
    fn new(class: GestureClass, style: &UserStyle, layout: &TaxelLayout, moving: bool) -> Self {
        let (bx, by) = layout.bbox().center();
        let anchor = (
            bx + style.placement_offset_mm[0],
            by + style.placement_offset_mm[1],
        );
        let initial = match class {
            GestureClass::Grasp | GestureClass::Twist | GestureClass::Pull => {
                hand_blobs(anchor.0, anchor.1, style, 1.0)
            }
            GestureClass::TwoHandGrasp => {
                let mut b = hand_blobs(
                    anchor.0 - HAND_SEPARATION_MM,
                    anchor.1,
                    style,
                    TWO_HAND_ARC_FACTOR,
                );
                b.extend(hand_blobs(
                    anchor.0 + HAND_SEPARATION_MM,
                    anchor.1,
                    style,
                    TWO_HAND_ARC_FACTOR,
                ));
                b
            }
            GestureClass::Push => pad_blobs(anchor.0, anchor.1, style),
        };
        Kinematics {
            class,
            anchor,
            initial,
            speed: style.speed_scale,
            moving,
        }
    }

    fn at(&self, k: usize) -> (Vec<Blob>, f64) {
        let t = if self.moving { k as f64 } else { 0.0 };
        match self.class {
            GestureClass::Grasp | GestureClass::TwoHandGrasp => (self.initial.clone(), ramp(k)),
            GestureClass::Twist => {
                let (s, c) = (self.speed * TWIST_RATE_RAD * t).sin_cos();
                let (ax, ay) = self.anchor;
                let blobs = self
                    .initial
                    .iter()
                    .map(|b| {
                        let (rx, ry) = (b.x - ax, b.y - ay);
                        Blob {
                            x: ax + c * rx - s * ry,
                            y: ay + s * rx + c * ry,
                            ..*b
                        }
                    })
                    .collect();
                (blobs, ramp(k))
            }
            GestureClass::Pull => {
                let dx = -self.speed * SLIDE_RATE_MM * t;
                let blobs = self.initial.iter().map(|b| Blob { x: b.x + dx, ..*b }).collect();
                (blobs, ramp(k))
            }
            GestureClass::Push => {
                let dy = self.speed * SLIDE_RATE_MM * t;
                let blobs = self.initial.iter().map(|b| Blob { y: b.y + dy, ..*b }).collect();
                let growth = if self.moving {
                    PUSH_START_INTENSITY
                        + (1.0 - PUSH_START_INTENSITY) * (k as f64 / PUSH_GROWTH_FRAMES).min(1.0)
                } else {
                    1.0
                };
                (blobs, growth)
            }
        }
    }
}

/// Pressure field of a set of blobs at a point, capped at 1.
fn field(blobs: &[Blob], x: f64, y: f64) -> f64 {
    blobs
        .iter()
        .map(|b| (-((x - b.x).powi(2) + (y - b.y).powi(2)) / (2.0 * b.sigma * b.sigma)).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Generates one gesture. `rng_seed` drives only the sensor noise.
pub fn synth_sample(
    class: GestureClass,
    style: &UserStyle,
    layout: &TaxelLayout,
    rng_seed: u64,
) -> Result<GestureSample> {
    synth_sample_with(class, style, layout, rng_seed, true)
}

/// As [`synth_sample`]; with `moving == false` every gesture holds its
/// initial blob layout at full intensity.
pub fn synth_sample_with(
    class: GestureClass,
    style: &UserStyle,
    layout: &TaxelLayout,
    rng_seed: u64,
    moving: bool,
) -> Result<GestureSample> {
    style.validate()?;
    let kin = Kinematics::new(class, style, layout, moving);
    let bbox = layout.bbox();
    if let Some(b) = kin.initial.iter().find(|b| !bbox.contains(b.x, b.y)) {
        return Err(Error::Input(format!(
            "{class} blob at ({:.2}, {:.2}) mm lies outside the layout bounding box",
            b.x, b.y
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(NOISE_STREAM);
    let noise = (style.noise_std > 0.0)
        .then(|| Normal::new(0.0, style.noise_std).expect("finite, positive std"));

    let mut frames = Vec::with_capacity(style.duration_frames);
    for k in 0..style.duration_frames {
        let (blobs, intensity) = kin.at(k);
        let intensity = if moving { intensity } else { 1.0 };
        let amplitude = intensity * style.force_scale * SENSOR_RANGE;
        let values = layout
            .taxels()
            .iter()
            .map(|t| {
                let mut raw = SENSOR_BASELINE + amplitude * field(&blobs, t.x_mm, t.y_mm);
                if let Some(n) = &noise {
                    raw += n.sample(&mut rng);
                }
                raw.round().clamp(0.0, RAW_MAX)
            })
            .collect();
        frames.push(TaxelFrame::new(values, k as u64 * FRAME_DT_MS)?);
    }
    Ok(GestureSample {
        label: class,
        frames,
        user_id: 0,
        seed: rng_seed,
    })
}

const STYLE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for one `(user, class, rep)` cell of the dataset.
pub fn sample_seed(master_seed: u64, user_id: u32, class: GestureClass, rep: usize) -> u64 {
    let mut h = mix(master_seed);
    h = mix(h ^ u64::from(user_id));
    h = mix(h ^ class as u64);
    mix(h ^ rep as u64)
}

fn user_seed(master_seed: u64, user_id: u32) -> u64 {
    mix(mix(master_seed ^ 0x5eed_5eed) ^ u64::from(user_id))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub reps_per_class: usize,
    pub layout: TaxelLayout,
    pub master_seed: u64,
    /// Control datasets: no blob motion or intensity change.
    pub static_only: bool,
}

impl SynthConfig {
    pub fn new(users: usize, reps_per_class: usize, layout: TaxelLayout, master_seed: u64) -> Self {
        SynthConfig {
            users,
            reps_per_class,
            layout,
            master_seed,
            static_only: false,
        }
    }
}

/// Per-user style and the two standing positions.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    pub style: UserStyle,
    pub positions: [[f64; 2]; 2],
}

fn draw_profile(master_seed: u64, user_id: u32) -> UserProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(user_seed(master_seed, user_id));
    let style = UserStyle {
        blob_count: rng.random_range(3..=4),
        blob_radius_mm: rng.random_range(8.0..13.0),
        force_scale: rng.random_range(0.55..1.0),
        placement_offset_mm: [0.0, 0.0],
        speed_scale: rng.random_range(0.75..1.3),
        duration_frames: MIN_FRAMES,
        noise_std: rng.random_range(100.0..400.0),
    };
    let mut position = || [rng.random_range(-20.0..20.0), rng.random_range(-8.0..8.0)];
    let positions = [position(), position()];
    UserProfile {
        user_id,
        style,
        positions,
    }
}

/// Dataset provenance, persisted alongside the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator_version: String,
    pub master_seed: u64,
    pub users: usize,
    pub reps_per_class: usize,
    pub static_only: bool,
    pub duration_rule: String,
    pub sensor_baseline: f64,
    pub sensor_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<GestureSample>,
    pub layout: TaxelLayout,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn class_counts(&self) -> [usize; GestureClass::COUNT] {
        let mut counts = [0; GestureClass::COUNT];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<GestureClass> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Raster settings matching the simulated sensor.
    pub fn raster_config(&self) -> RasterConfig {
        RasterConfig::for_layout(&self.layout)
            .with_uniform_baseline(self.meta.sensor_baseline, self.meta.sensor_range)
    }
}

/// `users * 5 * reps_per_class` samples. The first half of each user's
/// repetitions uses their first standing position, the rest the second.
pub fn synth_dataset(config: &SynthConfig) -> Result<Dataset> {
    if config.users == 0 {
        return Err(Error::Config("users must be >= 1".into()));
    }
    let mut cells = Vec::with_capacity(config.users * GestureClass::COUNT * config.reps_per_class);
    for user in 0..config.users as u32 {
        for class in GestureClass::ALL {
            for rep in 0..config.reps_per_class {
                cells.push((user, class, rep));
            }
        }
    }
    let profiles: Vec<UserProfile> = (0..config.users as u32)
        .map(|u| draw_profile(config.master_seed, u))
        .collect();

    let samples = cells
        .par_iter()
        .map(|&(user, class, rep)| {
            let profile = &profiles[user as usize];
            let seed = sample_seed(config.master_seed, user, class, rep);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(STYLE_STREAM);
            let position = profile.positions[usize::from(2 * rep >= config.reps_per_class)];
            let jitter = [rng.random_range(-6.0..6.0), rng.random_range(-4.0..4.0)];
            let style = UserStyle {
                placement_offset_mm: [position[0] + jitter[0], position[1] + jitter[1]],
                duration_frames: rng.random_range(MIN_FRAMES..=MAX_FRAMES),
                ..profile.style.clone()
            };
            let mut s = synth_sample_with(class, &style, &config.layout, seed, !config.static_only)?;
            s.user_id = user;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        samples,
        layout: config.layout.clone(),
        meta: DatasetMeta {
            generator_version: GENERATOR_VERSION.into(),
            master_seed: config.master_seed,
            users: config.users,
            reps_per_class: config.reps_per_class,
            static_only: config.static_only,
            duration_rule: DURATION_RULE.into(),
            sensor_baseline: SENSOR_BASELINE,
            sensor_range: SENSOR_RANGE,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws exactly `test_per_class` test samples from every class.
pub fn split_labels(labels: &[GestureClass], test_per_class: usize, seed: u64) -> Result<Split> {
    let mut test = Vec::with_capacity(test_per_class * GestureClass::COUNT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in GestureClass::ALL {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() <= test_per_class {
            return Err(Error::Input(format!(
                "class {class} has {} samples, need more than {test_per_class}",
                members.len()
            )));
        }
        // partial Fisher-Yates
        for i in 0..test_per_class {
            let j = rng.random_range(i..members.len());
            members.swap(i, j);
        }
        test.extend_from_slice(&members[..test_per_class]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; labels.len()];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..labels.len()).filter(|&i| !in_test[i]).collect();
    Ok(Split { train, test })
}

pub fn split_dataset(dataset: &Dataset, test_per_class: usize, seed: u64) -> Result<Split> {
    split_labels(&dataset.labels(), test_per_class, seed)
}

/// Start offsets of the stride-1 windows of length `len` over `n` frames.
/// Shorter sequences yield the single window starting at 0.
pub fn window_starts(n: usize, len: usize) -> std::ops::Range<usize> {
    if n >= len {
        0..n - len + 1
    } else {
        0..1
    }
}

/// The `len` frames starting at `start`, padded at the end with `blank`.
pub fn window_at<T: Clone>(frames: &[T], start: usize, len: usize, blank: &T) -> Vec<T> {
    (start..start + len)
        .map(|i| frames.get(i).unwrap_or(blank).clone())
        .collect()
}

/// All contiguous windows of length `len`, or one blank-padded window when
/// the sequence is shorter than `len`.
pub fn sliding_windows<T: Clone>(frames: &[T], len: usize, blank: &T) -> Vec<Vec<T>> {
    assert!(len >= 1, "window length must be >= 1");
    window_starts(frames.len(), len)
        .map(|s| window_at(frames, s, len, blank))
        .collect()
}

/// The first `len` frames, blank-padded if necessary.
pub fn first_window<T: Clone>(frames: &[T], len: usize, blank: &T) -> Vec<T> {
    window_at(frames, 0, len, blank)
}
