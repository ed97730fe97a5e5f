use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tactile_flow::augment::AugmentConfig;
use tactile_flow::classifier::{evaluate, train, ChannelMode, ClassifierModel, TrainConfig};
use tactile_flow::experiment::{
    run_experiment, sweep_l, ExperimentConfig, FeatureBank, DEFAULT_TEST_PER_CLASS,
};
use tactile_flow::flow::FlowConfig;
use tactile_flow::raster::{default_layout, TaxelLayout, DEFAULT_PITCH_MM};
use tactile_flow::store::{self, LoadedDataset};
use tactile_flow::synth::{split_labels, synth_dataset, SynthConfig};
use tactile_flow::{oracle, Error, Result};

#[derive(Parser)]
#[command(name = "tactile", version, about = "Tactile gesture pipeline with optical-flow augmentation")]
struct Cli {
    /// Master seed for synthesis and first seed for experiments.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gesture dataset.
    Synth(SynthArgs),
    /// Rasterize and augment every sample, caching pooled features.
    Process(ProcessArgs),
    /// Train one classifier on the training split of --seed.
    Train(TrainArgs),
    /// Paired raw/augmented evaluation over several seeds, or of one model.
    Eval(EvalArgs),
    /// Accuracy across window lengths.
    Sweep(SweepArgs),
    /// Export frame pairs and our flow for external comparison.
    OracleExport(OracleArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 12)]
    users: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Taxel layout CSV (id,x_mm,y_mm).
    #[arg(long, conflicts_with = "default_layout")]
    layout: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PITCH_MM)]
    pitch: f64,
    /// Hex lattice as ROWSxCOLS.
    #[arg(long, value_parser = parse_grid, default_value = "16x24")]
    default_layout: (usize, usize),
    /// Hold every gesture still (control dataset).
    #[arg(long)]
    static_only: bool,
    /// Dataset directory (defaults to --out-dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BankArgs {
    /// Dataset directory containing manifest.json.
    #[arg(long)]
    dataset: PathBuf,
    /// Pooling grid as ROWSxCOLS.
    #[arg(long, value_parser = parse_grid, default_value = "8x8")]
    grid: (usize, usize),
}

#[derive(Args)]
struct ProcessArgs {
    #[command(flatten)]
    bank: BankArgs,
    #[arg(long, value_enum, default_value_t = Mode::Augmented)]
    mode: Mode,
    /// Render every K-th frame of every sample.
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    render_every: Option<u64>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = DEFAULT_TEST_PER_CLASS)]
    test_per_class: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

impl ModelArgs {
    fn train_config(&self, seed: u64, window_len: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            dropout_p: self.dropout,
            batch_size: self.batch_size,
            seed,
            window_len,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    bank: BankArgs,
    /// Frames per window.
    #[arg(long = "L", default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    window_len: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Mode::Augmented)]
    variant: Mode,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    bank: BankArgs,
    /// Frames per window (ignored with --model).
    #[arg(long = "L", default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    window_len: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Variant::Both)]
    variant: Variant,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Evaluate a trained model on the test split of --seed instead.
    #[arg(long = "model", value_name = "PATH")]
    model_path: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    bank: BankArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Window lengths, comma separated.
    #[arg(long = "L", value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    lengths: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Variant::Both)]
    variant: Variant,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    pairs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raw,
    Augmented,
}

impl From<Mode> for ChannelMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Raw => ChannelMode::Raw,
            Mode::Augmented => ChannelMode::Augmented,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Raw,
    Augmented,
    Both,
}

impl Variant {
    fn modes(self) -> Vec<ChannelMode> {
        match self {
            Variant::Raw => vec![ChannelMode::Raw],
            Variant::Augmented => vec![ChannelMode::Augmented],
            Variant::Both => vec![ChannelMode::Raw, ChannelMode::Augmented],
        }
    }
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let r: usize = r.trim().parse().map_err(|e| format!("{e}"))?;
    let c: usize = c.trim().parse().map_err(|e| format!("{e}"))?;
    if r == 0 || c == 0 {
        return Err("grid sizes must be >= 1".into());
    }
    Ok((r, c))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } | Error::Json(_) => 3,
        Error::Diverged { .. } | Error::NonFinite(_) => 4,
        _ => 2,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| Error::Io { path: path.to_path_buf(), source: e };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    fs::write(path, bytes).map_err(io)
}

fn seeds(first: u64, n: u64) -> Vec<u64> {
    (0..n).map(|i| first.wrapping_add(i)).collect()
}

fn load(dir: &Path) -> Result<LoadedDataset> {
    let loaded = store::load_dataset(dir)?;
    if loaded.dataset.samples.is_empty() {
        return Err(Error::Input(format!("{} holds no samples", dir.display())));
    }
    Ok(loaded)
}

/// Returns a cached bank able to serve `mode`, building and caching one
/// when none exists.
fn bank_for(loaded: &LoadedDataset, mode: ChannelMode, grid: (usize, usize)) -> Result<FeatureBank> {
    let flow = FlowConfig::default();
    let aug = AugmentConfig::default();
    let cache = loaded.dir.join("cache");
    let mut candidates = vec![ChannelMode::Augmented];
    if mode == ChannelMode::Raw {
        candidates.insert(0, ChannelMode::Raw);
    }
    for m in candidates {
        let path = cache.join(store::bank_cache_name(&loaded.digest, m, &flow, &aug, grid)?);
        if path.exists() {
            return store::load_bank(&path);
        }
    }
    let bank = FeatureBank::build(&loaded.dataset, mode, &flow, &aug, grid)?;
    let path = cache.join(store::bank_cache_name(&loaded.digest, mode, &flow, &aug, grid)?);
    store::save_bank(&bank, &path)?;
    Ok(bank)
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let layout = match &a.layout {
        Some(p) => TaxelLayout::load(p, a.pitch)?,
        None => default_layout(a.default_layout.0, a.default_layout.1, a.pitch)?,
    };
    if a.reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    let mut config = SynthConfig::new(a.users, a.reps, layout, cli.seed);
    config.static_only = a.static_only;
    let dataset = synth_dataset(&config)?;
    let dir = a.out.as_ref().unwrap_or(&cli.out_dir);
    let digest = store::save_dataset(&dataset, dir)?;
    println!("{} samples written to {}", dataset.samples.len(), dir.display());
    for (class, n) in tactile_flow::synth::GestureClass::ALL.iter().zip(dataset.class_counts()) {
        println!("  {class}: {n}");
    }
    println!("manifest sha256 {digest}");
    Ok(())
}

fn cmd_process(cli: &Cli, a: &ProcessArgs) -> Result<()> {
    let loaded = load(&a.bank.dataset)?;
    let mode = ChannelMode::from(a.mode);
    let flow = FlowConfig::default();
    let aug = AugmentConfig::default();
    let render_dir = cli.out_dir.join("render");
    let ext = match mode {
        ChannelMode::Raw => "pgm",
        ChannelMode::Augmented => "ppm",
    };
    let bank = FeatureBank::build_with(&loaded.dataset, mode, &flow, &aug, a.bank.grid, |i, p| {
        let Some(k) = a.render_every else {
            return Ok(());
        };
        for f in (0..p.len()).step_by(k as usize) {
            write_file(&render_dir.join(format!("{i:06}/{f:03}.{ext}")), &p.render(f))?;
        }
        Ok(())
    })?;
    let name = store::bank_cache_name(&loaded.digest, mode, &flow, &aug, a.bank.grid)?;
    let path = loaded.dir.join("cache").join(name);
    store::save_bank(&bank, &path)?;
    let frames: usize = bank.frames.iter().map(Vec::len).sum();
    println!("{} samples, {frames} frames processed ({mode})", bank.len());
    println!("cache {}", path.display());
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let loaded = load(&a.bank.dataset)?;
    let mode = ChannelMode::from(a.variant);
    let bank = bank_for(&loaded, mode, a.bank.grid)?;
    let config = a.model.train_config(cli.seed, a.window_len as usize);
    let split = split_labels(&bank.labels, a.model.test_per_class, cli.seed)?;
    let (xs, ys) = bank.sliding(&split.train, config.window_len, mode);
    let (model, log) = train(&xs, &ys, &bank.feature_config(mode), &config)?;
    let path = cli
        .out_dir
        .join(format!("model-{mode}-L{}-seed{}.json", config.window_len, cli.seed));
    write_file(&path, format!("{}\n", model.to_json()?).as_bytes())?;
    println!(
        "trained on {} windows; final epoch loss {:.6}",
        xs.len(),
        log.epoch_loss.last().copied().unwrap_or(f64::NAN)
    );
    println!("model {}", path.display());
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let loaded = load(&a.bank.dataset)?;
    let path = cli.out_dir.join("report.json");
    if let Some(model_path) = &a.model_path {
        let text = fs::read_to_string(model_path)
            .map_err(|e| Error::Io { path: model_path.clone(), source: e })?;
        let model = ClassifierModel::from_json(&text)?;
        let mode = model.feature_config.channels;
        let bank = bank_for(&loaded, mode, model.feature_config.pool_grid)?;
        let split = split_labels(&bank.labels, a.model.test_per_class, cli.seed)?;
        let (xs, ys) = bank.first(&split.test, model.window_len, mode);
        let report = evaluate(&model, &xs, &ys, vec![cli.seed])?;
        write_file(&path, format!("{}\n", report.to_json()?).as_bytes())?;
        println!("mean accuracy {:.4}", report.mean_accuracy);
    } else {
        let modes = a.variant.modes();
        let need = *modes.iter().max_by_key(|m| m.channels()).expect("nonempty");
        let bank = bank_for(&loaded, need, a.bank.grid)?;
        let config = ExperimentConfig {
            window_len: a.window_len as usize,
            variants: modes,
            seeds: seeds(cli.seed, a.seeds),
            test_per_class: a.model.test_per_class,
            train: a.model.train_config(cli.seed, a.window_len as usize),
        };
        let report = run_experiment(&bank, &config)?;
        write_file(&path, format!("{}\n", report.to_json()?).as_bytes())?;
        for v in &report.variants {
            println!(
                "L={} {:>9}: {:.4} +/- {:.4}",
                report.window_len, v.variant, v.mean_accuracy, v.std_accuracy
            );
        }
    }
    println!("report {}", path.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    if a.lengths.contains(&0) {
        return Err(Error::Config("window lengths must be >= 1".into()));
    }
    let loaded = load(&a.bank.dataset)?;
    let modes = a.variant.modes();
    let need = *modes.iter().max_by_key(|m| m.channels()).expect("nonempty");
    let bank = bank_for(&loaded, need, a.bank.grid)?;
    let base = ExperimentConfig {
        window_len: 1,
        variants: modes,
        seeds: seeds(cli.seed, a.seeds),
        test_per_class: a.model.test_per_class,
        train: a.model.train_config(cli.seed, 1),
    };
    let sweep = sweep_l(&bank, &a.lengths, &base)?;
    write_file(&cli.out_dir.join("sweep.csv"), &sweep.to_csv()?)?;
    write_file(&cli.out_dir.join("sweep_summary.csv"), sweep.summary().as_bytes())?;
    let json = serde_json::to_string_pretty(&sweep)?;
    write_file(&cli.out_dir.join("sweep.json"), format!("{json}\n").as_bytes())?;
    print!("{}", sweep.summary());
    Ok(())
}

fn cmd_oracle(cli: &Cli, a: &OracleArgs) -> Result<()> {
    let loaded = load(&a.dataset)?;
    let dir = cli.out_dir.join("oracle");
    fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let index = oracle::export_pairs(&loaded.dataset, a.pairs, &FlowConfig::default(), &dir)?;
    println!("{} pairs exported to {}", index.pairs.len(), dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Process(a) => cmd_process(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::OracleExport(a) => cmd_oracle(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
