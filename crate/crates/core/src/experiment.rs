//! Paired raw-vs-augmented experiments and the window-length sweep.
//!
//! Every sample is rasterized, augmented and pooled once into a per-frame
//! feature bank; windows are then assembled from pooled frames, so changing
//! `L` or the channel mode never touches the flow computation again.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{process_sequence, AugmentConfig, AugmentedFrame};
use crate::classifier::{
    confusion_from_predictions, pool_frame, train, ChannelMode, Confusion, EvalReport,
    FeatureConfig, TrainConfig, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::image::TactileImage;
use crate::raster::frame_to_image;
use crate::synth::{split_labels, window_starts, Dataset, GestureClass, Split};

pub const DEFAULT_TEST_PER_CLASS: usize = 30;

/// One sample's frames after rasterization and, if requested, augmentation.
#[derive(Debug, Clone, Copy)]
pub enum Processed<'a> {
    Raw(&'a [TactileImage]),
    Augmented(&'a [AugmentedFrame]),
}

impl Processed<'_> {
    pub fn len(&self) -> usize {
        match self {
            Processed::Raw(f) => f.len(),
            Processed::Augmented(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frame `k` as a binary PGM (raw) or PPM (augmented).
    pub fn render(&self, k: usize) -> Vec<u8> {
        match self {
            Processed::Raw(f) => crate::pnm::encode_pgm(f[k].plane()),
            Processed::Augmented(f) => f[k].to_ppm(),
        }
    }
}

/// Pooled features of every frame of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    pub pool_grid: (usize, usize),
    /// Channels stored per cell; an augmented bank also serves raw windows.
    pub mode: ChannelMode,
    pub labels: Vec<GestureClass>,
    /// `frames[sample][frame]`, cell-major then channel-major.
    pub frames: Vec<Vec<Vec<f64>>>,
}

impl FeatureBank {
    /// Raw banks skip the flow computation entirely.
    pub fn build(
        dataset: &Dataset,
        mode: ChannelMode,
        flow: &FlowConfig,
        augment: &AugmentConfig,
        pool_grid: (usize, usize),
    ) -> Result<Self> {
        Self::build_with(dataset, mode, flow, augment, pool_grid, |_, _| Ok(()))
    }

    /// Like [`FeatureBank::build`], handing every processed sample to
    /// `visit` (possibly from several threads) before it is pooled.
    pub fn build_with<V>(
        dataset: &Dataset,
        mode: ChannelMode,
        flow: &FlowConfig,
        augment: &AugmentConfig,
        pool_grid: (usize, usize),
        visit: V,
    ) -> Result<Self>
    where
        V: Fn(usize, Processed<'_>) -> Result<()> + Sync,
    {
        flow.validate()?;
        augment.validate()?;
        if dataset.samples.is_empty() {
            return Err(Error::Input("dataset has no samples".into()));
        }
        let raster = dataset.raster_config();
        let pool = FeatureConfig {
            pool_grid,
            channels: mode,
        };
        pool.validate()?;
        let frames = dataset
            .samples
            .par_iter()
            .enumerate()
            .map(|(idx, s)| {
                let images = s
                    .frames
                    .iter()
                    .map(|f| frame_to_image(&dataset.layout, f, &raster))
                    .collect::<Result<Vec<_>>>()?;
                match mode {
                    ChannelMode::Raw => {
                        visit(idx, Processed::Raw(&images))?;
                        images.iter().map(|i| pool_frame(i, &pool)).collect()
                    }
                    ChannelMode::Augmented => {
                        let aug = process_sequence(&images, flow, augment)?;
                        visit(idx, Processed::Augmented(&aug))?;
                        aug.iter().map(|a| pool_frame(a, &pool)).collect()
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureBank {
            pool_grid,
            mode,
            labels: dataset.labels(),
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_config(&self, mode: ChannelMode) -> FeatureConfig {
        FeatureConfig {
            pool_grid: self.pool_grid,
            channels: mode,
        }
    }

    fn cells(&self) -> usize {
        self.pool_grid.0 * self.pool_grid.1
    }

    pub fn supports(&self, mode: ChannelMode) -> bool {
        mode.channels() <= self.mode.channels()
    }

    fn check(&self, mode: ChannelMode) -> Result<()> {
        if self.supports(mode) {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "a {} feature bank cannot provide {mode} windows",
                self.mode
            )))
        }
    }

    /// Features of the window of `len` frames starting at `start` of
    /// `sample`; frames past the end are blank (all-zero features).
    ///
    /// Panics if the bank does not hold the channels `mode` needs.
    pub fn window(&self, sample: usize, start: usize, len: usize, mode: ChannelMode) -> Vec<f64> {
        assert!(self.supports(mode), "{} bank has no {mode} channels", self.mode);
        let stride = self.mode.channels();
        let per_frame = self.cells() * mode.channels();
        let frames = &self.frames[sample];
        let mut out = Vec::with_capacity(per_frame * len);
        for k in start..start + len {
            match (frames.get(k), mode) {
                (None, _) => out.extend(std::iter::repeat_n(0.0, per_frame)),
                (Some(f), ChannelMode::Augmented) => out.extend_from_slice(f),
                (Some(f), ChannelMode::Raw) => out.extend(f.iter().step_by(stride)),
            }
        }
        out
    }

    /// Every sliding window of every listed sample, with its label.
    pub fn sliding(&self, samples: &[usize], len: usize, mode: ChannelMode) -> (Vec<Vec<f64>>, Vec<GestureClass>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &i in samples {
            for s in window_starts(self.frames[i].len(), len) {
                xs.push(self.window(i, s, len, mode));
                ys.push(self.labels[i]);
            }
        }
        (xs, ys)
    }

    /// The first window of every listed sample.
    pub fn first(&self, samples: &[usize], len: usize, mode: ChannelMode) -> (Vec<Vec<f64>>, Vec<GestureClass>) {
        samples
            .iter()
            .map(|&i| (self.window(i, 0, len, mode), self.labels[i]))
            .unzip()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub window_len: usize,
    pub variants: Vec<ChannelMode>,
    pub seeds: Vec<u64>,
    pub test_per_class: usize,
    /// `seed` and `window_len` are overridden per run.
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(window_len: usize, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            window_len,
            variants: vec![ChannelMode::Raw, ChannelMode::Augmented],
            seeds,
            test_per_class: DEFAULT_TEST_PER_CLASS,
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        if self.window_len == 0 {
            return Err(Error::Config("window length must be >= 1".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: ChannelMode,
    pub runs: Vec<RunResult>,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population std across seeds.
    pub std_accuracy: f64,
    /// Confusion counts summed over seeds.
    pub confusion: Confusion,
}

impl VariantSummary {
    fn from_runs(variant: ChannelMode, runs: Vec<RunResult>) -> Self {
        let accuracies: Vec<f64> = runs.iter().map(|r| r.report.mean_accuracy).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
        let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for r in &runs {
            for (row, add) in confusion.iter_mut().zip(&r.report.confusion) {
                for (c, a) in row.iter_mut().zip(add) {
                    *c += a;
                }
            }
        }
        VariantSummary {
            variant,
            runs,
            accuracies,
            mean_accuracy,
            std_accuracy,
            confusion,
        }
    }

    pub fn pooled_report(&self) -> EvalReport {
        EvalReport::from_confusion(self.confusion, self.runs.iter().map(|r| r.seed).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub window_len: usize,
    pub test_per_class: usize,
    pub variants: Vec<VariantSummary>,
}

impl ExperimentReport {
    pub fn variant(&self, mode: ChannelMode) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == mode)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains on the sliding windows of the training split and evaluates on the
/// first window of every test sample.
pub fn run_single(
    bank: &FeatureBank,
    split: &Split,
    mode: ChannelMode,
    train_config: &TrainConfig,
) -> Result<EvalReport> {
    bank.check(mode)?;
    let len = train_config.window_len;
    let (xs, ys) = bank.sliding(&split.train, len, mode);
    let (model, _) = train(&xs, &ys, &bank.feature_config(mode), train_config)?;
    let (tx, ty) = bank.first(&split.test, len, mode);
    if tx.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    let predicted = tx
        .par_iter()
        .map(|x| model.predict(x).map(|(c, _)| c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_confusion(
        confusion_from_predictions(&ty, &predicted),
        vec![train_config.seed],
    ))
}

/// Runs every variant under every seed. For a given seed all variants
/// share the split (drawn from that seed) and the window boundaries.
pub fn run_experiment(bank: &FeatureBank, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    for &mode in &config.variants {
        bank.check(mode)?;
    }
    let splits = config
        .seeds
        .iter()
        .map(|&s| split_labels(&bank.labels, config.test_per_class, s))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.variants.len())
        .flat_map(|v| (0..config.seeds.len()).map(move |s| (v, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(v, s)| {
            let tc = TrainConfig {
                seed: config.seeds[s],
                window_len: config.window_len,
                ..config.train.clone()
            };
            run_single(bank, &splits[s], config.variants[v], &tc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = results.into_iter();
    let variants = config
        .variants
        .iter()
        .map(|&mode| {
            let runs = config
                .seeds
                .iter()
                .map(|&seed| RunResult {
                    seed,
                    report: results.next().expect("one result per job"),
                })
                .collect();
            VariantSummary::from_runs(mode, runs)
        })
        .collect();
    Ok(ExperimentReport {
        window_len: config.window_len,
        test_per_class: config.test_per_class,
        variants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub window_len: usize,
    pub variant: ChannelMode,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<ExperimentReport>,
}

impl Sweep {
    pub fn mean(&self, window_len: usize, mode: ChannelMode) -> Option<f64> {
        self.reports
            .iter()
            .find(|r| r.window_len == window_len)
            .and_then(|r| r.variant(mode))
            .map(|v| v.mean_accuracy)
    }

    /// `L,variant,seed,accuracy` table.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::format("csv", e.to_string()))?;
        }
        w.into_inner()
            .map_err(|e| Error::format("csv", e.to_string()))
    }

    /// One line per (L, variant): mean and std over seeds.
    pub fn summary(&self) -> String {
        let mut s = String::from("L,variant,mean,std\n");
        for r in &self.reports {
            for v in &r.variants {
                s.push_str(&format!(
                    "{},{},{:.6},{:.6}\n",
                    r.window_len, v.variant, v.mean_accuracy, v.std_accuracy
                ));
            }
        }
        s
    }
}

pub fn sweep_l(bank: &FeatureBank, lengths: &[usize], base: &ExperimentConfig) -> Result<Sweep> {
    if lengths.is_empty() {
        return Err(Error::Config("no window lengths to sweep".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &len in lengths {
        let report = run_experiment(
            bank,
            &ExperimentConfig {
                window_len: len,
                ..base.clone()
            },
        )?;
        for v in &report.variants {
            for r in &v.runs {
                rows.push(SweepRow {
                    window_len: len,
                    variant: v.variant,
                    seed: r.seed,
                    accuracy: r.report.mean_accuracy,
                });
            }
        }
        reports.push(report);
    }
    Ok(Sweep { rows, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_bank() -> FeatureBank {
        // 1x1 grid: each frame is (pressure, magnitude, direction)
        let frames = (0..4)
            .map(|s| (0..s + 2).map(|k| vec![k as f64, 10.0 + s as f64, 0.5]).collect())
            .collect();
        FeatureBank {
            pool_grid: (1, 1),
            mode: ChannelMode::Augmented,
            labels: vec![GestureClass::Grasp; 4],
            frames,
        }
    }

    #[test]
    fn raw_window_is_the_pressure_subset() {
        let b = toy_bank();
        assert_eq!(b.window(1, 0, 2, ChannelMode::Raw), vec![0.0, 1.0]);
        assert_eq!(
            b.window(1, 1, 2, ChannelMode::Augmented),
            vec![1.0, 11.0, 0.5, 2.0, 11.0, 0.5]
        );
    }

    #[test]
    fn windows_pad_with_zero_frames() {
        let b = toy_bank();
        // sample 0 has two frames
        assert_eq!(b.window(0, 0, 3, ChannelMode::Raw), vec![0.0, 1.0, 0.0]);
        let (xs, _) = b.sliding(&[0], 3, ChannelMode::Augmented);
        assert_eq!(xs.len(), 1);
        assert_eq!(&xs[0][6..], &[0.0; 3]);
    }

    #[test]
    fn sliding_counts_follow_t_minus_l_plus_one() {
        let b = toy_bank();
        // lengths 2, 3, 4, 5
        let (xs, ys) = b.sliding(&[0, 1, 2, 3], 2, ChannelMode::Raw);
        assert_eq!(xs.len(), 1 + 2 + 3 + 4);
        assert_eq!(ys.len(), xs.len());
        let (first, _) = b.first(&[3, 2], 2, ChannelMode::Raw);
        assert_eq!(first, vec![vec![0.0, 1.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[0.8, 0.9, 1.0]);
        assert!((m - 0.9).abs() < 1e-12);
        assert!((s - (0.02f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn raw_bank_cannot_serve_augmented() {
        let mut b = toy_bank();
        b.mode = ChannelMode::Raw;
        b.frames = vec![vec![vec![1.0], vec![2.0]]; 4];
        assert_eq!(b.window(0, 0, 3, ChannelMode::Raw), vec![1.0, 2.0, 0.0]);
        assert!(b.check(ChannelMode::Augmented).is_err());
    }

    #[test]
    fn empty_seed_list_rejected() {
        let cfg = ExperimentConfig::new(5, vec![]);
        assert!(run_experiment(&toy_bank(), &cfg).is_err());
    }
}
