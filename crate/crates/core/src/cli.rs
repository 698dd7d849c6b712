//! The `mammocad` command line.
//!
//! Exit status: 0 on success, 1 for invalid input or domain failures, 2 when
//! a file cannot be read or written.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::cascade::{train_cascade, CascadeError, CascadeModel, CaseLabel};
use crate::dataset::{load_pgm, split_dataset, DatasetError, MiasArchive, RoiOptions, RoiSet, ROI_SIZE};
use crate::eval::{
    grid_text, grid_tsv, loss_log_jsonl, parse_grid, published_grid, roi_features, run_grid, EvalError,
    ExperimentConfig,
};
use crate::features::{extract_feature_vector, write_csv, FeatureVector, DEFAULT_K, FEATURE_LEVELS};
use crate::neuralnet::{StopReason, DEFAULT_LEARNING_RATE, DEFAULT_MAX_EPOCHS};
use crate::plane::GrayImage;
use crate::wavelet::{decompose_multilevel, Wavelet};

/// Failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn domain(message: impl ToString) -> Self {
        CliError {
            code: 1,
            message: message.to_string(),
        }
    }

    pub fn io(message: impl ToString) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        if e.is_io() {
            CliError::io(e)
        } else {
            CliError::domain(e)
        }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        match e {
            CascadeError::Io(_) => CliError::io(e),
            _ => CliError::domain(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Cascade(inner) => inner.into(),
            other => CliError::domain(other),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "mammocad",
    version,
    about = "Wavelet features and a three-level MLP cascade for mammogram ROIs"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write every subband of a multilevel decomposition as a text matrix.
    Decompose(DecomposeArgs),
    /// Export the feature vector of every ROI of an archive as CSV.
    Features(FeaturesArgs),
    /// Train the cascade on a stratified sample of an archive.
    Train(TrainArgs),
    /// Classify one 128x128 ROI.
    Diagnose(DiagnoseArgs),
    /// Run an experiment grid and write the reports.
    Grid(GridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Origin {
    /// y counts up from the bottom row (the archive's convention).
    BottomLeft,
    /// y counts down from the top row.
    TopLeft,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Binary PGM image.
    pub image: PathBuf,
    #[arg(long, default_value = "daub4")]
    pub wavelet: Wavelet,
    #[arg(long, default_value_t = FEATURE_LEVELS)]
    pub levels: usize,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ArchiveArgs {
    /// MIAS-layout directory: label file plus <id>.pgm images.
    #[arg(long)]
    pub archive: PathBuf,
    /// Coordinate origin of the label file.
    #[arg(long, value_enum, default_value_t = Origin::BottomLeft)]
    pub origin: Origin,
    /// Seed of the normal-ROI placement jitter.
    #[arg(long, default_value_t = 0)]
    pub normal_seed: u64,
    /// Maximum normal-ROI offset in pixels (0 = centered on the bright centroid).
    #[arg(long, default_value_t = 0)]
    pub normal_jitter: u32,
}

impl ArchiveArgs {
    fn load(&self) -> Result<RoiSet, CliError> {
        let archive = MiasArchive::open(&self.archive)?;
        let set = archive.build_rois(RoiOptions {
            origin_bottom_left: self.origin == Origin::BottomLeft,
            normal_seed: self.normal_seed,
            normal_jitter: self.normal_jitter,
        })?;
        info!("{} ROIs, {} records skipped", set.rois.len(), set.skipped.len());
        Ok(set)
    }
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub archive: ArchiveArgs,
    #[arg(long, default_value = "daub8")]
    pub wavelet: Wavelet,
    /// Coefficients kept per level.
    #[arg(short, long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// CSV output path.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub archive: ArchiveArgs,
    #[arg(long, default_value = "daub8")]
    pub wavelet: Wavelet,
    /// Coefficients kept per level.
    #[arg(short, long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Hidden units per network (S).
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,
    /// Momentum constant (MC).
    #[arg(long, default_value_t = 0.95)]
    pub momentum: f64,
    /// Learning rate (eta).
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
    pub max_epochs: usize,
    /// Training ROIs drawn by the stratified split.
    #[arg(long, default_value_t = 150)]
    pub n_train: usize,
    /// Seed of the split and of the network initialisation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// 128x128 binary PGM.
    pub image: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub archive: ArchiveArgs,
    /// Grid file, one `id S MC wavelet eta max_epochs seed` row per line.
    /// Without it the 16 published configurations are run.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Learning rate of the built-in grid.
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 150)]
    pub n_train: usize,
    /// Seed of the stratified split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Worker threads (0 = available processors).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Show only held-out metrics in the text table.
    #[arg(long)]
    pub held_out_only: bool,
    /// Also write the per-epoch losses as JSON lines.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// Report path stem; `.tsv` and `.txt` are appended.
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Decompose(a) => cmd_decompose(&a),
        Command::Features(a) => cmd_features(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Grid(a) => cmd_grid(&a),
    }
}

fn read_pgm(path: &Path) -> Result<GrayImage, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    load_pgm(&bytes).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

fn roi_features_of(rois: &RoiSet, wavelet: Wavelet, k: usize) -> Result<Vec<FeatureVector>, CliError> {
    Ok(roi_features(&rois.rois, wavelet, k)?)
}

pub fn cmd_decompose(a: &DecomposeArgs) -> Result<(), CliError> {
    let image = read_pgm(&a.image)?;
    let dec = decompose_multilevel(&image.to_f64(), a.wavelet.filter(), a.levels).map_err(CliError::domain)?;
    let written = dec.write_debug_planes(&a.out).map_err(io_err(&a.out))?;
    let mut out = io::stdout().lock();
    let (rows, cols) = image.dims();
    writeln!(out, "{} {rows}x{cols}, {} levels", a.wavelet.label(), a.levels).ok();
    for (i, level) in dec.levels.iter().enumerate() {
        let (r, c) = level.h.dims();
        writeln!(out, "level {}: H, V, D {r}x{c}", i + 1).ok();
    }
    let (r, c) = dec.final_approximation.dims();
    writeln!(out, "level {}: A {r}x{c}", a.levels).ok();
    writeln!(out, "{} files written to {}", written.len(), a.out.display()).ok();
    Ok(())
}

pub fn cmd_features(a: &FeaturesArgs) -> Result<(), CliError> {
    let set = a.archive.load()?;
    let features = roi_features_of(&set, a.wavelet, a.k)?;
    let ids: Vec<String> = set.rois.iter().map(|r| r.id.to_string()).collect();
    let mut out = io::BufWriter::new(fs::File::create(&a.out).map_err(io_err(&a.out))?);
    write_csv(&mut out, ids.iter().map(String::as_str).zip(&features)).map_err(io_err(&a.out))?;
    out.flush().map_err(io_err(&a.out))?;
    println!("{} feature vectors written to {}", features.len(), a.out.display());
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let set = a.archive.load()?;
    let split = split_dataset(&set.rois, a.n_train, a.seed)?;
    let features = roi_features_of(&set, a.wavelet, a.k)?;
    let training: Vec<(FeatureVector, CaseLabel)> = split
        .train_indices
        .iter()
        .map(|&i| (features[i].clone(), set.rois[i].label))
        .collect();
    let config = ExperimentConfig {
        id: 0,
        hidden: a.hidden,
        momentum: a.momentum,
        wavelet: a.wavelet,
        learning_rate: a.learning_rate,
        max_epochs: a.max_epochs,
        seed: a.seed,
    }
    .cascade_config(FEATURE_LEVELS * a.k);
    let (model, reports) = train_cascade(&training, &config)?;
    model.save(&a.out)?;
    println!(
        "trained on {} of {} ROIs ({} skipped records)",
        training.len(),
        set.rois.len(),
        set.skipped.len()
    );
    for (i, r) in reports.iter().enumerate() {
        let stop = match r.stopped_by {
            StopReason::AccuracyReached => "target accuracy",
            StopReason::MaxEpochs => "epoch limit",
        };
        println!(
            "level {}: {} epochs ({stop}), training accuracy {:.1}%, final loss {:.6}",
            i + 1,
            r.epochs_run,
            100.0 * r.final_train_accuracy,
            r.epoch_losses.last().copied().unwrap_or(f64::NAN)
        );
    }
    println!("model written to {}", a.out.display());
    Ok(())
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    // A model that cannot be loaded, whether missing or corrupted, is a file
    // problem rather than an input problem.
    let model = CascadeModel::load(&a.model).map_err(|e| CliError::io(format!("{}: {e}", a.model.display())))?;
    let image = read_pgm(&a.image)?;
    if image.dims() != (ROI_SIZE, ROI_SIZE) {
        let (r, c) = image.dims();
        return Err(CliError::domain(format!(
            "ROI must be {ROI_SIZE}x{ROI_SIZE}, got {r}x{c}"
        )));
    }
    let dec =
        decompose_multilevel(&image.to_f64(), model.wavelet.filter(), FEATURE_LEVELS).map_err(CliError::domain)?;
    let v = extract_feature_vector(&dec, model.k).map_err(CliError::domain)?;
    println!("{}", model.diagnose(&v)?);
    Ok(())
}

pub fn cmd_grid(a: &GridArgs) -> Result<(), CliError> {
    let configs = match &a.grid {
        Some(path) => parse_grid(&fs::read_to_string(path).map_err(io_err(path))?)?,
        None => published_grid(a.learning_rate),
    };
    if configs.is_empty() {
        return Err(EvalError::NoExperiments.into());
    }
    let set = a.archive.load()?;
    let split = split_dataset(&set.rois, a.n_train, a.split_seed)?;
    let rows = run_grid(&configs, &split, &set.rois, a.workers)?;

    let held_out = set.rois.len() - split.train_indices.len();
    let provenance = vec![
        format!(
            "{} ROIs; {} stratified training ROIs (split seed {}); {held_out} held out",
            set.rois.len(),
            split.train_indices.len(),
            a.split_seed
        ),
        format!("k = {DEFAULT_K} coefficients per level, {FEATURE_LEVELS} levels"),
        "eta, max_epochs and seed per experiment as listed in the TSV report".to_string(),
        "Specificity/Sensitivity: level-2 macro one-vs-rest over ALL ROIs, training ROIs included".to_string(),
        "Held-out: the same metrics over the ROIs not used for training".to_string(),
        "Published: level-2 specificity / sensitivity reported for the same experiment id".to_string(),
    ];
    let tsv_path = a.out.with_extension("tsv");
    let txt_path = a.out.with_extension("txt");
    fs::write(&tsv_path, grid_tsv(&rows)).map_err(io_err(&tsv_path))?;
    let text = grid_text(&rows, &provenance, a.held_out_only);
    fs::write(&txt_path, &text).map_err(io_err(&txt_path))?;
    if let Some(path) = &a.loss_log {
        fs::write(path, loss_log_jsonl(&rows)).map_err(io_err(path))?;
    }
    print!("{text}");
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    if failed == rows.len() {
        return Err(CliError::domain("every experiment failed"));
    }
    Ok(())
}
