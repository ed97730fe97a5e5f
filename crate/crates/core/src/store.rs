//! On-disk datasets: TXSQ sample files, the JSON manifest, and the cache of
//! processed feature banks.
//!
//! TXSQ layout (little endian): magic `TXSQ`, version u16 = 1, label u8,
//! user_id u32, seed u64, n_taxels u32, n_frames u32, dt_ms u32 = 100, then
//! `n_frames * n_taxels` f32 readings, frame-major.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentConfig;
use crate::classifier::ChannelMode;
use crate::error::{Error, Result};
use crate::experiment::FeatureBank;
use crate::flow::FlowConfig;
use crate::raster::{TaxelFrame, TaxelLayout};
use crate::synth::{Dataset, DatasetMeta, GestureClass, GestureSample, FRAME_DT_MS};

pub const SAMPLE_MAGIC: &[u8; 4] = b"TXSQ";
pub const SAMPLE_VERSION: u16 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LAYOUT_FILE: &str = "layout.csv";
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 8 + 4 + 4 + 4;

const BANK_MAGIC: &[u8; 4] = b"TXFB";
const BANK_VERSION: u16 = 1;

pub fn encode_sample(sample: &GestureSample) -> Result<Vec<u8>> {
    let n_taxels = sample.frames.first().map_or(0, |f| f.len());
    if sample.frames.iter().any(|f| f.len() != n_taxels) {
        return Err(Error::Input("frames differ in taxel count".into()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n_taxels * sample.frames.len());
    out.extend_from_slice(SAMPLE_MAGIC);
    out.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
    out.push(sample.label as u8);
    out.extend_from_slice(&sample.user_id.to_le_bytes());
    out.extend_from_slice(&sample.seed.to_le_bytes());
    out.extend_from_slice(&(n_taxels as u32).to_le_bytes());
    out.extend_from_slice(&(sample.frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(FRAME_DT_MS as u32).to_le_bytes());
    for f in &sample.frames {
        for &v in &f.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.kind, "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.kind,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn decode_sample(bytes: &[u8]) -> Result<GestureSample> {
    let mut c = Cursor { bytes, pos: 0, kind: "TXSQ" };
    if c.take(4)? != SAMPLE_MAGIC {
        return Err(Error::format("TXSQ", "bad magic"));
    }
    let version = c.u16()?;
    if version != SAMPLE_VERSION {
        return Err(Error::format("TXSQ", format!("unsupported version {version}")));
    }
    let label = c.u8()?;
    let label = GestureClass::from_index(label as usize)
        .ok_or_else(|| Error::format("TXSQ", format!("unknown label {label}")))?;
    let user_id = c.u32()?;
    let seed = c.u64()?;
    let n_taxels = c.u32()? as usize;
    let n_frames = c.u32()? as usize;
    let dt = c.u32()?;
    if dt as u64 != FRAME_DT_MS {
        return Err(Error::format("TXSQ", format!("dt_ms must be {FRAME_DT_MS}, got {dt}")));
    }
    let expected = n_taxels
        .checked_mul(n_frames)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("TXSQ", "size overflow"))?;
    if bytes.len() - c.pos != expected {
        return Err(Error::format(
            "TXSQ",
            format!("expected {expected} data bytes, found {}", bytes.len() - c.pos),
        ));
    }
    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let values = (0..n_taxels)
            .map(|_| c.f32().map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        frames.push(TaxelFrame::new(values, k as u64 * FRAME_DT_MS)?);
    }
    c.finish()?;
    Ok(GestureSample {
        label,
        frames,
        user_id,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: GestureClass,
    pub user_id: u32,
    pub seed: u64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layout: String,
    pub pitch_mm: f64,
    pub class_counts: [usize; GestureClass::COUNT],
    #[serde(flatten)]
    pub meta: DatasetMeta,
    pub samples: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `layout.csv`, `samples/NNNNNN.txsq` and `manifest.json` under
/// `dir`. Returns the manifest digest.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    dataset.layout.save(&dir.join(LAYOUT_FILE))?;
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for (i, s) in dataset.samples.iter().enumerate() {
        let rel = format!("samples/{i:06}.txsq");
        write(&dir.join(&rel), &encode_sample(s)?)?;
        entries.push(ManifestEntry {
            path: rel,
            label: s.label,
            user_id: s.user_id,
            seed: s.seed,
            frames: s.frames.len(),
        });
    }
    let manifest = Manifest {
        layout: LAYOUT_FILE.into(),
        pitch_mm: dataset.layout.pitch_mm(),
        class_counts: dataset.class_counts(),
        meta: dataset.meta.clone(),
        samples: entries,
    };
    let json = manifest.to_json()?;
    write(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(sha256_hex(json.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub manifest: Manifest,
    pub digest: String,
    pub dir: PathBuf,
}

/// Loads a dataset directory, checking every sample against the manifest.
pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let bytes = read(&dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    let layout = TaxelLayout::load(&dir.join(&manifest.layout), manifest.pitch_mm)?;
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for e in &manifest.samples {
        let path = dir.join(&e.path);
        let s = decode_sample(&read(&path)?).map_err(|err| Error::Format {
            kind: "TXSQ",
            reason: format!("{}: {err}", path.display()),
        })?;
        if s.label != e.label || s.frames.len() != e.frames || s.seed != e.seed {
            return Err(Error::format(
                "manifest",
                format!("{} disagrees with its manifest entry", path.display()),
            ));
        }
        if s.frames.first().is_some_and(|f| f.len() != layout.len()) {
            return Err(Error::dims(layout.len(), format!("{} taxels in {}", s.frames[0].len(), path.display())));
        }
        samples.push(s);
    }
    let dataset = Dataset {
        samples,
        layout,
        meta: manifest.meta.clone(),
    };
    if dataset.class_counts() != manifest.class_counts {
        return Err(Error::format("manifest", "class counts disagree with samples"));
    }
    Ok(LoadedDataset {
        dataset,
        manifest,
        digest: sha256_hex(&bytes),
        dir: dir.to_path_buf(),
    })
}

#[derive(Serialize)]
struct BankKey<'a> {
    manifest: &'a str,
    mode: ChannelMode,
    flow: &'a FlowConfig,
    augment: &'a AugmentConfig,
    pool_grid: (usize, usize),
}

/// Cache file name for a processed bank.
pub fn bank_cache_name(
    manifest_digest: &str,
    mode: ChannelMode,
    flow: &FlowConfig,
    augment: &AugmentConfig,
    pool_grid: (usize, usize),
) -> Result<String> {
    let key = serde_json::to_vec(&BankKey {
        manifest: manifest_digest,
        mode,
        flow,
        augment,
        pool_grid,
    })?;
    Ok(format!("{mode}-{}.txfb", &sha256_hex(&key)[..16]))
}

pub fn encode_bank(bank: &FeatureBank) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BANK_MAGIC);
    out.extend_from_slice(&BANK_VERSION.to_le_bytes());
    out.push(bank.mode.channels() as u8);
    out.extend_from_slice(&(bank.pool_grid.0 as u32).to_le_bytes());
    out.extend_from_slice(&(bank.pool_grid.1 as u32).to_le_bytes());
    out.extend_from_slice(&(bank.len() as u32).to_le_bytes());
    for (label, frames) in bank.labels.iter().zip(&bank.frames) {
        out.push(*label as u8);
        out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
        for f in frames {
            for v in f {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_bank(bytes: &[u8]) -> Result<FeatureBank> {
    let mut c = Cursor { bytes, pos: 0, kind: "feature bank" };
    if c.take(4)? != BANK_MAGIC || c.u16()? != BANK_VERSION {
        return Err(Error::format("feature bank", "bad magic or version"));
    }
    let mode = match c.u8()? {
        1 => ChannelMode::Raw,
        3 => ChannelMode::Augmented,
        n => return Err(Error::format("feature bank", format!("{n} channels"))),
    };
    let pool_grid = (c.u32()? as usize, c.u32()? as usize);
    let per_frame = pool_grid.0 * pool_grid.1 * mode.channels();
    let n = c.u32()? as usize;
    let mut labels = Vec::with_capacity(n.min(1 << 20));
    let mut frames = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let l = c.u8()?;
        labels.push(
            GestureClass::from_index(l as usize)
                .ok_or_else(|| Error::format("feature bank", format!("unknown label {l}")))?,
        );
        let k = c.u32()? as usize;
        let mut sample = Vec::with_capacity(k.min(1 << 16));
        for _ in 0..k {
            sample.push((0..per_frame).map(|_| c.f64()).collect::<Result<Vec<_>>>()?);
        }
        frames.push(sample);
    }
    c.finish()?;
    Ok(FeatureBank {
        pool_grid,
        mode,
        labels,
        frames,
    })
}

pub fn save_bank(bank: &FeatureBank, path: &Path) -> Result<()> {
    write(path, &encode_bank(bank))
}

pub fn load_bank(path: &Path) -> Result<FeatureBank> {
    decode_bank(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GestureSample {
        GestureSample {
            label: GestureClass::Push,
            frames: (0..3)
                .map(|k| TaxelFrame::new(vec![1000.0 + k as f64, 65535.0, 0.0, 1234.0], k * 100).unwrap())
                .collect(),
            user_id: 7,
            seed: 0xDEAD_BEEF_0123,
        }
    }

    #[test]
    fn txsq_header_layout() {
        let b = encode_sample(&sample()).unwrap();
        assert_eq!(&b[..4], b"TXSQ");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(b[6], 3);
        assert_eq!(u32::from_le_bytes(b[7..11].try_into().unwrap()), 7);
        assert_eq!(u64::from_le_bytes(b[11..19].try_into().unwrap()), 0xDEAD_BEEF_0123);
        assert_eq!(u32::from_le_bytes(b[19..23].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(b[23..27].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[27..31].try_into().unwrap()), 100);
        assert_eq!(b.len(), HEADER_LEN + 3 * 4 * 4);
        assert_eq!(f32::from_le_bytes(b[31..35].try_into().unwrap()), 1000.0);
    }

    #[test]
    fn txsq_round_trip_and_rejections() {
        let s = sample();
        let b = encode_sample(&s).unwrap();
        assert_eq!(decode_sample(&b).unwrap(), s);
        assert!(decode_sample(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode_sample(&bad).is_err());
        let mut bad = b.clone();
        bad[6] = 9;
        assert!(decode_sample(&bad).is_err());
        let mut bad = b.clone();
        bad[27] = 50;
        assert!(decode_sample(&bad).is_err());
        let mut long = b;
        long.push(0);
        assert!(decode_sample(&long).is_err());
    }

    #[test]
    fn bank_round_trip_is_exact() {
        let bank = FeatureBank {
            pool_grid: (1, 2),
            mode: ChannelMode::Augmented,
            labels: vec![GestureClass::Twist, GestureClass::Grasp],
            frames: vec![
                vec![vec![0.1, 0.2, 1.0 / 3.0, 0.4, 0.5, 0.6]],
                vec![vec![0.0; 6], vec![1e-300, 2.0, 3.0, 4.0, 5.0, 6.0]],
            ],
        };
        let b = encode_bank(&bank);
        assert_eq!(decode_bank(&b).unwrap(), bank);
        assert!(decode_bank(&b[..b.len() - 3]).is_err());
    }

    #[test]
    fn cache_name_depends_on_every_key_part() {
        let f = FlowConfig::default();
        let a = AugmentConfig::default();
        let base = bank_cache_name("abc", ChannelMode::Augmented, &f, &a, (8, 8)).unwrap();
        assert!(base.starts_with("augmented-") && base.ends_with(".txfb"));
        assert_eq!(base, bank_cache_name("abc", ChannelMode::Augmented, &f, &a, (8, 8)).unwrap());
        let other_flow = FlowConfig { iterations: 4, ..f.clone() };
        for n in [
            bank_cache_name("abd", ChannelMode::Augmented, &f, &a, (8, 8)).unwrap(),
            bank_cache_name("abc", ChannelMode::Raw, &f, &a, (8, 8)).unwrap(),
            bank_cache_name("abc", ChannelMode::Augmented, &other_flow, &a, (8, 8)).unwrap(),
            bank_cache_name("abc", ChannelMode::Augmented, &f, &a, (4, 4)).unwrap(),
        ] {
            assert_ne!(n, base);
        }
    }
}
