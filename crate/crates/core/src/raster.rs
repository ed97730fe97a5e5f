//! Scattered taxel readings to dense tactile images.
//!
//! A frame of raw taxel responses is first mapped affinely to `[0, 1]`
//! ([`normalize_frame`]) and then splatted onto a regular grid with a
//! truncated, normalized Gaussian kernel ([`rasterize`]).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Plane, TactileImage};

/// Full scale of the 16-bit acquisition chain.
pub const RAW_MAX: f64 = 65535.0;

/// Default inter-taxel distance of the reference skin, in millimetres.
pub const DEFAULT_PITCH_MM: f64 = 7.5;

const MIN_TAXEL_SEPARATION_MM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taxel {
    pub id: u32,
    pub x_mm: f64,
    pub y_mm: f64,
}

/// Axis-aligned bounding box in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// Planar placement of the taxels of a skin patch.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxelLayout {
    taxels: Vec<Taxel>,
    pitch_mm: f64,
    bbox: BoundingBox,
}

impl TaxelLayout {
    pub fn new(taxels: Vec<Taxel>, pitch_mm: f64) -> Result<Self> {
        if taxels.is_empty() {
            return Err(Error::Layout("layout has no taxels".into()));
        }
        if !(pitch_mm > 0.0 && pitch_mm.is_finite()) {
            return Err(Error::Layout(format!("pitch must be > 0, got {pitch_mm}")));
        }
        let mut ids: Vec<u32> = taxels.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Layout(format!("duplicate taxel id {}", w[0])));
        }
        if let Some(t) = taxels
            .iter()
            .find(|t| !(t.x_mm.is_finite() && t.y_mm.is_finite()))
        {
            return Err(Error::Layout(format!("taxel {} has non-finite position", t.id)));
        }
        let min_sep2 = MIN_TAXEL_SEPARATION_MM * MIN_TAXEL_SEPARATION_MM;
        for (i, a) in taxels.iter().enumerate() {
            for b in &taxels[i + 1..] {
                let d2 = (a.x_mm - b.x_mm).powi(2) + (a.y_mm - b.y_mm).powi(2);
                if d2 < min_sep2 {
                    return Err(Error::Layout(format!(
                        "taxels {} and {} are closer than {MIN_TAXEL_SEPARATION_MM} mm",
                        a.id, b.id
                    )));
                }
            }
        }
        let bbox = taxels.iter().fold(
            BoundingBox {
                min_x: f64::INFINITY,
                min_y: f64::INFINITY,
                max_x: f64::NEG_INFINITY,
                max_y: f64::NEG_INFINITY,
            },
            |b, t| BoundingBox {
                min_x: b.min_x.min(t.x_mm),
                min_y: b.min_y.min(t.y_mm),
                max_x: b.max_x.max(t.x_mm),
                max_y: b.max_y.max(t.y_mm),
            },
        );
        Ok(TaxelLayout {
            taxels,
            pitch_mm,
            bbox,
        })
    }

    pub fn taxels(&self) -> &[Taxel] {
        &self.taxels
    }

    pub fn len(&self) -> usize {
        self.taxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taxels.is_empty()
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Grid size produced by [`rasterize`] at the given sampling step.
    pub fn image_dims(&self, step_mm: f64) -> (usize, usize) {
        let w = (self.bbox.width() / step_mm).ceil() as usize + 1;
        let h = (self.bbox.height() / step_mm).ceil() as usize + 1;
        (w, h)
    }

    pub fn read_csv<R: Read>(reader: R, pitch_mm: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::format("layout", e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["id", "x_mm", "y_mm"] {
            return Err(Error::format(
                "layout",
                format!("expected header id,x_mm,y_mm, got {:?}", headers),
            ));
        }
        let taxels = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<Taxel>, _>>()
            .map_err(|e| Error::format("layout", e.to_string()))?;
        TaxelLayout::new(taxels, pitch_mm)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for t in &self.taxels {
            wtr.serialize(t)
                .map_err(|e| Error::format("layout", e.to_string()))?;
        }
        wtr.flush()
            .map_err(|e| Error::io("<layout writer>", e))?;
        Ok(())
    }

    pub fn load(path: &Path, pitch_mm: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), pitch_mm)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Hexagonally offset lattice: odd rows shift by half a pitch along x.
pub fn default_layout(rows: usize, cols: usize, pitch_mm: f64) -> Result<TaxelLayout> {
    if rows == 0 || cols == 0 {
        return Err(Error::Layout(format!(
            "lattice needs at least one row and column, got {rows}x{cols}"
        )));
    }
    let mut taxels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let shift = if r % 2 == 1 { 0.5 * pitch_mm } else { 0.0 };
        for c in 0..cols {
            taxels.push(Taxel {
                id: (r * cols + c) as u32,
                x_mm: c as f64 * pitch_mm + shift,
                y_mm: r as f64 * pitch_mm,
            });
        }
    }
    TaxelLayout::new(taxels, pitch_mm)
}

/// One raw measurement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxelFrame {
    pub values: Vec<f64>,
    pub timestamp_ms: u64,
}

impl TaxelFrame {
    pub fn new(values: Vec<f64>, timestamp_ms: u64) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=RAW_MAX).contains(*v))
        {
            return Err(Error::Input(format!(
                "taxel {i} raw value {v} outside [0, {RAW_MAX}]"
            )));
        }
        Ok(TaxelFrame {
            values,
            timestamp_ms,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub step_mm: f64,
    pub kernel_sigma_mm: f64,
    pub cutoff_sigmas: f64,
    pub baseline: Vec<f64>,
    pub response_range: f64,
}

impl RasterConfig {
    /// Defaults for a layout: 1 mm step, kernel sigma of half a pitch,
    /// 3-sigma cutoff, zero baseline, full 16-bit range.
    pub fn for_layout(layout: &TaxelLayout) -> Self {
        RasterConfig {
            step_mm: 1.0,
            kernel_sigma_mm: 0.5 * layout.pitch_mm(),
            cutoff_sigmas: 3.0,
            baseline: vec![0.0; layout.len()],
            response_range: RAW_MAX,
        }
    }

    pub fn with_uniform_baseline(mut self, baseline: f64, response_range: f64) -> Self {
        self.baseline.iter_mut().for_each(|b| *b = baseline);
        self.response_range = response_range;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.step_mm) {
            return Err(Error::Config(format!("step_mm must be > 0, got {}", self.step_mm)));
        }
        if !positive(self.kernel_sigma_mm) {
            return Err(Error::Config(format!(
                "kernel_sigma_mm must be > 0, got {}",
                self.kernel_sigma_mm
            )));
        }
        if !positive(self.cutoff_sigmas) {
            return Err(Error::Config(format!(
                "cutoff_sigmas must be > 0, got {}",
                self.cutoff_sigmas
            )));
        }
        if !positive(self.response_range) {
            return Err(Error::Config(format!(
                "response_range must be > 0, got {}",
                self.response_range
            )));
        }
        Ok(())
    }
}

/// `clamp((value - baseline) / range, 0, 1)` per taxel.
pub fn normalize_frame(frame: &TaxelFrame, config: &RasterConfig) -> Result<Vec<f64>> {
    if frame.len() != config.baseline.len() {
        return Err(Error::Config(format!(
            "frame has {} taxels but baseline has {}",
            frame.len(),
            config.baseline.len()
        )));
    }
    if !(config.response_range > 0.0) {
        return Err(Error::Config("response_range must be > 0".into()));
    }
    Ok(frame
        .values
        .iter()
        .zip(&config.baseline)
        .map(|(v, b)| ((v - b) / config.response_range).clamp(0.0, 1.0))
        .collect())
}

/// Normalized Gaussian kernel splatting of taxel values onto the layout's
/// bounding-box grid. Pixels with no taxel inside the cutoff radius are 0.
pub fn rasterize(
    layout: &TaxelLayout,
    normalized: &[f64],
    config: &RasterConfig,
) -> Result<TactileImage> {
    config.validate()?;
    if layout.is_empty() {
        return Err(Error::Layout("layout has no taxels".into()));
    }
    if normalized.len() != layout.len() {
        return Err(Error::dims(layout.len(), normalized.len()));
    }
    if let Some(v) = normalized.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("taxel value {v}")));
    }
    if let Some(v) = normalized.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!("normalized value {v} outside [0, 1]")));
    }

    let (width, height) = layout.image_dims(config.step_mm);
    let bbox = layout.bbox();
    let step = config.step_mm;
    let cutoff = config.cutoff_sigmas * config.kernel_sigma_mm;
    let cutoff2 = cutoff * cutoff;
    let inv_two_sigma2 = 1.0 / (2.0 * config.kernel_sigma_mm * config.kernel_sigma_mm);

    let mut num = vec![0.0f64; width * height];
    let mut den = vec![0.0f64; width * height];
    // Pixels that have at least one taxel within the cutoff, even if the
    // weight underflows.
    let mut covered = vec![false; width * height];

    for (taxel, &value) in layout.taxels().iter().zip(normalized) {
        let gx = (taxel.x_mm - bbox.min_x) / step;
        let gy = (taxel.y_mm - bbox.min_y) / step;
        let reach = cutoff / step;
        let x_lo = (gx - reach).ceil().max(0.0) as usize;
        let y_lo = (gy - reach).ceil().max(0.0) as usize;
        let x_hi = ((gx + reach).floor() as isize).min(width as isize - 1);
        let y_hi = ((gy + reach).floor() as isize).min(height as isize - 1);
        if x_hi < 0 || y_hi < 0 {
            continue;
        }
        for py in y_lo..=y_hi as usize {
            let qy = bbox.min_y + py as f64 * step;
            let dy2 = (qy - taxel.y_mm).powi(2);
            for px in x_lo..=x_hi as usize {
                let qx = bbox.min_x + px as f64 * step;
                let d2 = (qx - taxel.x_mm).powi(2) + dy2;
                if d2 > cutoff2 {
                    continue;
                }
                let w = (-d2 * inv_two_sigma2).exp();
                let idx = py * width + px;
                num[idx] += w * value;
                den[idx] += w;
                covered[idx] = true;
            }
        }
    }

    let pixels = num
        .iter()
        .zip(&den)
        .zip(&covered)
        .map(|((&n, &d), &c)| {
            if c && d > 0.0 {
                (n / d).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    TactileImage::from_plane(Plane::new(width, height, pixels)?)
}

/// Raw frame straight to image.
pub fn frame_to_image(
    layout: &TaxelLayout,
    frame: &TaxelFrame,
    config: &RasterConfig,
) -> Result<TactileImage> {
    let normalized = normalize_frame(frame, config)?;
    rasterize(layout, &normalized, config)
}
