//! Export of consecutive-frame pairs for cross-checking the flow estimator
//! against an independent implementation.
//!
//! Each pair is written as `prev.pgm`, `curr.pgm` and `ours.tflo`. The flow
//! is computed from the 8-bit images exactly as written, so both
//! implementations see identical inputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{farneback_flow, FlowConfig};
use crate::pnm;
use crate::raster::frame_to_image;
use crate::synth::{Dataset, GestureClass};

pub const INDEX_FILE: &str = "index.json";
/// Pressure above which a pixel counts as textured support.
pub const SUPPORT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Static,
    Translating,
    Rotating,
    Pressing,
}

/// Order in which pair kinds are drawn, with the class that provides them.
const ROTATION: [(PairKind, GestureClass); 5] = [
    (PairKind::Static, GestureClass::Grasp),
    (PairKind::Translating, GestureClass::Pull),
    (PairKind::Rotating, GestureClass::Twist),
    (PairKind::Pressing, GestureClass::Push),
    (PairKind::Static, GestureClass::TwoHandGrasp),
];

/// First frame after which static gestures stop changing.
const STATIC_FROM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub sample: usize,
    pub label: GestureClass,
    pub kind: PairKind,
    pub prev_frame: usize,
    pub curr_frame: usize,
}

/// Picks `n` pairs cycling through static, translating, rotating and
/// pressing contacts; the i-th pair of a kind comes from the i-th suitable
/// sample of its class in dataset order.
pub fn select_pairs(dataset: &Dataset, n: usize) -> Result<Vec<PairSpec>> {
    let mut used = [0usize; ROTATION.len()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = i % ROTATION.len();
        let (kind, class) = ROTATION[r];
        let (prev_frame, min_frames) = match kind {
            PairKind::Static => (STATIC_FROM, STATIC_FROM + 2),
            _ => (2, 4),
        };
        let sample = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class && s.frames.len() >= min_frames)
            .nth(used[r])
            .map(|(idx, _)| idx)
            .ok_or_else(|| {
                Error::Input(format!(
                    "dataset has too few {class} samples with >= {min_frames} frames for {n} pairs"
                ))
            })?;
        used[r] += 1;
        out.push(PairSpec {
            sample,
            label: class,
            kind,
            prev_frame,
            curr_frame: prev_frame + 1,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    #[serde(flatten)]
    pub spec: PairSpec,
    pub prev: String,
    pub curr: String,
    pub ours: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleIndex {
    pub flow: FlowConfig,
    pub support_threshold: f64,
    pub pairs: Vec<PairEntry>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `n` pairs plus `index.json` under `dir`.
pub fn export_pairs(dataset: &Dataset, n: usize, flow: &FlowConfig, dir: &Path) -> Result<OracleIndex> {
    flow.validate()?;
    let specs = select_pairs(dataset, n)?;
    let raster = dataset.raster_config();
    let mut pairs = Vec::with_capacity(n);
    for (i, spec) in specs.into_iter().enumerate() {
        let id = format!("pair_{i:02}");
        let pair_dir = dir.join(&id);
        fs::create_dir_all(&pair_dir).map_err(|e| Error::io(&pair_dir, e))?;
        let sample = &dataset.samples[spec.sample];
        let render = |k: usize| -> Result<Vec<u8>> {
            Ok(pnm::encode_pgm(frame_to_image(&dataset.layout, &sample.frames[k], &raster)?.plane()))
        };
        let prev = render(spec.prev_frame)?;
        let curr = render(spec.curr_frame)?;
        let p = pnm::decode(&prev)?.channel(0)?;
        let c = pnm::decode(&curr)?.channel(0)?;
        let field = farneback_flow(&p, &c, flow)?;
        write(&pair_dir.join("prev.pgm"), &prev)?;
        write(&pair_dir.join("curr.pgm"), &curr)?;
        let mut tflo = Vec::new();
        field.write_tflo(&mut tflo)?;
        write(&pair_dir.join("ours.tflo"), &tflo)?;
        pairs.push(PairEntry {
            prev: format!("{id}/prev.pgm"),
            curr: format!("{id}/curr.pgm"),
            ours: format!("{id}/ours.tflo"),
            width: p.width(),
            height: p.height(),
            id,
            spec,
        });
    }
    let index = OracleIndex {
        flow: flow.clone(),
        support_threshold: SUPPORT_THRESHOLD,
        pairs,
    };
    let mut json = serde_json::to_string_pretty(&index)?;
    json.push('\n');
    write(&dir.join(INDEX_FILE), json.as_bytes())?;
    Ok(index)
}
