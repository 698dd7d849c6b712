//! Sensitivity/specificity evaluation and the experiment grid.
//!
//! Level 1 counts "cancerous" as positive, level 3 counts "malignant" as
//! positive. Level 2 is multiclass: its scalar rates are macro averages of the
//! one-vs-rest rates of the six lesion classes. Levels 2 and 3 are scored on
//! the ground-truth cancerous cases of the evaluation set.
//!
//! Every experiment is scored twice: on all ROIs (which include the training
//! ROIs) and on the held-out ROIs only.

use std::fmt::Write as _;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::cascade::{train_cascade, CascadeConfig, CascadeError, CascadeModel, CaseLabel, Lesion, Severity};
use crate::dataset::{DatasetSplit, RoiImage};
use crate::features::{extract_feature_vector, FeatureError, FeatureVector, DEFAULT_K, FEATURE_LEVELS};
use crate::neuralnet::{NetError, StopReason, TrainingReport};
use crate::wavelet::{decompose_multilevel, Wavelet, WaveletError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions ({predictions}) and truths ({truths}) differ in length")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("{0} is undefined (zero denominator)")]
    UndefinedRate(&'static str),
    #[error("{0} is not a lesion class")]
    UnknownClass(String),
    #[error("grid line {line}: {msg}")]
    Grid { line: usize, msg: String },
    #[error("no experiments configured")]
    NoExperiments,
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Both rates, each absent when its denominator is zero.
    pub fn rates(&self) -> Rates {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Rates {
            sensitivity: ratio(self.tp, self.tp + self.fn_),
            specificity: ratio(self.tn, self.tn + self.fp),
        }
    }
}

/// Tallies the four joint outcomes.
pub fn confusion(predictions: &[bool], truths: &[bool]) -> Result<ConfusionCounts, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Sensitivity `TP/(TP+FN)` and specificity `TN/(TN+FP)`.
pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics, EvalError> {
    let rates = counts.rates();
    Ok(Metrics {
        sensitivity: rates.sensitivity.ok_or(EvalError::UndefinedRate("sensitivity"))?,
        specificity: rates.specificity.ok_or(EvalError::UndefinedRate("specificity"))?,
    })
}

/// Rates that may be undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub lesion: Lesion,
    pub counts: ConfusionCounts,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level2Metrics {
    /// Mean of each rate over the classes where it is defined.
    pub macro_rates: Rates,
    /// One entry per lesion class, in level-2 output order.
    pub per_class: Vec<ClassMetrics>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// One-vs-rest rates per lesion class and their macro average.
pub fn level2_metrics(predicted: &[Lesion], truth: &[Lesion]) -> Result<Level2Metrics, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predicted.len(),
            truths: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(bad) = predicted.iter().chain(truth).find(|l| l.abnormal_index().is_none()) {
        return Err(EvalError::UnknownClass(bad.to_string()));
    }
    let per_class: Vec<ClassMetrics> = Lesion::ABNORMAL
        .iter()
        .map(|&lesion| {
            let p: Vec<bool> = predicted.iter().map(|&l| l == lesion).collect();
            let t: Vec<bool> = truth.iter().map(|&l| l == lesion).collect();
            let counts = confusion(&p, &t).expect("lengths checked");
            ClassMetrics {
                lesion,
                counts,
                rates: counts.rates(),
            }
        })
        .collect();
    for c in &per_class {
        if c.rates.sensitivity.is_none() || c.rates.specificity.is_none() {
            warn!(
                "{}: one-vs-rest rate undefined, left out of the macro average",
                c.lesion
            );
        }
    }
    Ok(Level2Metrics {
        macro_rates: Rates {
            sensitivity: mean_defined(per_class.iter().map(|c| c.rates.sensitivity)),
            specificity: mean_defined(per_class.iter().map(|c| c.rates.specificity)),
        },
        per_class,
    })
}

/// One row of the experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: u32,
    pub hidden: usize,
    pub momentum: f64,
    pub wavelet: Wavelet,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn cascade_config(&self, input_dim: usize) -> CascadeConfig {
        CascadeConfig::uniform(
            input_dim,
            self.hidden,
            self.momentum,
            self.learning_rate,
            self.max_epochs,
            self.seed,
        )
    }

    /// `id S MC wavelet eta max_epochs seed`
    pub fn to_grid_line(&self) -> String {
        format!(
            "{} {} {} {} {} {} {}",
            self.id, self.hidden, self.momentum, self.wavelet, self.learning_rate, self.max_epochs, self.seed
        )
    }
}

/// Parses a grid file: one `id S MC wavelet eta max_epochs seed` row per
/// line; blank lines and `#` comments are ignored.
pub fn parse_grid(text: &str) -> Result<Vec<ExperimentConfig>, EvalError> {
    let mut configs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| EvalError::Grid { line, msg };
        let f: Vec<&str> = content.split_whitespace().collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        fn num<T: std::str::FromStr>(tok: &str, what: &str, line: usize) -> Result<T, EvalError> {
            tok.parse().map_err(|_| EvalError::Grid {
                line,
                msg: format!("bad {what} `{tok}`"),
            })
        }
        let config = ExperimentConfig {
            id: num(f[0], "id", line)?,
            hidden: num(f[1], "hidden size", line)?,
            momentum: num(f[2], "momentum", line)?,
            wavelet: f[3].parse().map_err(|e: WaveletError| err(e.to_string()))?,
            learning_rate: num(f[4], "learning rate", line)?,
            max_epochs: num(f[5], "max_epochs", line)?,
            seed: num(f[6], "seed", line)?,
        };
        config
            .cascade_config(3 * DEFAULT_K)
            .levels
            .iter()
            .try_for_each(|c| c.validate())
            .map_err(|e| err(e.to_string()))?;
        configs.push(config);
    }
    Ok(configs)
}

/// Level-2 (specificity, sensitivity) in percent as published for the 16
/// experiments, multilevel-feature columns.
pub const PUBLISHED_LEVEL2: [(u32, f64, f64); 16] = [
    (1, 99.5, 97.1),
    (2, 98.6, 98.0),
    (3, 99.7, 99.0),
    (4, 100.0, 98.6),
    (5, 99.1, 99.4),
    (6, 100.0, 98.8),
    (7, 100.0, 98.8),
    (8, 100.0, 99.6),
    (9, 100.0, 99.0),
    (10, 100.0, 99.6),
    (11, 100.0, 99.1),
    (12, 99.7, 99.6),
    (13, 99.8, 98.8),
    (14, 99.4, 98.8),
    (15, 100.0, 98.6),
    (16, 99.7, 97.5),
];

/// The 16 published (S, MC, wavelet) rows. Rows whose printed parameters
/// coincide (1-2 with 3-4, 7-8 with 9-10) get different epoch caps; every row
/// gets its id as seed.
pub fn published_grid(learning_rate: f64) -> Vec<ExperimentConfig> {
    let pairs: [(usize, f64, usize); 8] = [
        (10, 0.95, 2_000),
        (10, 0.95, 10_000),
        (10, 0.8, 10_000),
        (20, 0.95, 2_000),
        (20, 0.95, 10_000),
        (30, 0.95, 10_000),
        (40, 0.8, 10_000),
        (10, 0.99, 10_000),
    ];
    pairs
        .iter()
        .enumerate()
        .flat_map(|(p, &(hidden, momentum, max_epochs))| {
            Wavelet::ALL.into_iter().enumerate().map(move |(w, wavelet)| {
                let id = (2 * p + w + 1) as u32;
                ExperimentConfig {
                    id,
                    hidden,
                    momentum,
                    wavelet,
                    learning_rate,
                    max_epochs,
                    seed: u64::from(id),
                }
            })
        })
        .collect()
}

/// Scores of one binary level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LevelScore {
    /// Absent when the level had no cases to score.
    pub counts: Option<ConfusionCounts>,
    pub rates: Rates,
}

impl LevelScore {
    fn from_pairs(pairs: &[(bool, bool)]) -> Self {
        let (p, t): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        match confusion(&p, &t) {
            Ok(counts) => LevelScore {
                counts: Some(counts),
                rates: counts.rates(),
            },
            Err(_) => LevelScore::default(),
        }
    }
}

/// All three levels scored over one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub cases: usize,
    pub level1: LevelScore,
    /// Absent when the set has no cancerous cases.
    pub level2: Option<Level2Metrics>,
    pub level3: LevelScore,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// All ROIs, training ROIs included.
    pub all_rois: EvalSummary,
    /// ROIs not used for training.
    pub held_out: EvalSummary,
    pub training: [TrainingReport; 3],
    pub feature_scale: f64,
    pub wall_time: f64,
}

// Wall time is excluded: it is the only non-deterministic field.
impl PartialEq for ExperimentResult {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.all_rois == other.all_rois
            && self.held_out == other.held_out
            && self.training == other.training
            && self.feature_scale == other.feature_scale
    }
}

/// Three-level, k-per-level features of every ROI, in input order.
pub fn roi_features(rois: &[RoiImage], wavelet: Wavelet, k: usize) -> Result<Vec<FeatureVector>, EvalError> {
    let filter = wavelet.filter();
    rois.par_iter()
        .map(|roi| {
            let dec = decompose_multilevel(&roi.pixels.to_f64(), filter, FEATURE_LEVELS)?;
            Ok(extract_feature_vector(&dec, k)?)
        })
        .collect()
}

/// Scores `model` on the cases selected by `include`.
pub fn evaluate_cascade(
    model: &CascadeModel,
    features: &[FeatureVector],
    labels: &[CaseLabel],
    include: impl Fn(usize) -> bool,
) -> Result<EvalSummary, EvalError> {
    let mut l1 = Vec::new();
    let mut l2_pred = Vec::new();
    let mut l2_true = Vec::new();
    let mut l3 = Vec::new();
    for (i, (v, label)) in features.iter().zip(labels).enumerate() {
        if !include(i) {
            continue;
        }
        let x = model.prepare(v);
        let [n1, n2, n3] = &model.nets;
        l1.push((n1.predict(&x)? == 1, label.is_cancer()));
        if let Some(severity) = label.severity() {
            l2_pred.push(Lesion::ABNORMAL[n2.predict(&x)?]);
            l2_true.push(label.lesion());
            l3.push((
                Severity::ALL[n3.predict(&x)?] == Severity::Malignant,
                severity == Severity::Malignant,
            ));
        }
    }
    Ok(EvalSummary {
        cases: l1.len(),
        level1: LevelScore::from_pairs(&l1),
        level2: if l2_true.is_empty() {
            None
        } else {
            Some(level2_metrics(&l2_pred, &l2_true)?)
        },
        level3: LevelScore::from_pairs(&l3),
    })
}

/// Trains and scores one configuration from precomputed raw features.
pub fn run_experiment_on_features(
    config: &ExperimentConfig,
    split: &DatasetSplit,
    labels: &[CaseLabel],
    features: &[FeatureVector],
) -> Result<ExperimentResult, EvalError> {
    let start = Instant::now();
    let training: Vec<(FeatureVector, CaseLabel)> = split
        .train_indices
        .iter()
        .map(|&i| (features[i].clone(), labels[i]))
        .collect();
    let dim = features.first().map_or(0, FeatureVector::len);
    let (model, reports) = train_cascade(&training, &config.cascade_config(dim))?;
    let all_rois = evaluate_cascade(&model, features, labels, |_| true)?;
    let held_out = evaluate_cascade(&model, features, labels, |i| !split.is_train(i))?;
    Ok(ExperimentResult {
        config: config.clone(),
        all_rois,
        held_out,
        training: reports,
        feature_scale: model.feature_scale,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Decomposes every ROI, trains the cascade on the split's training ROIs and
/// scores it on all ROIs and on the held-out ROIs.
pub fn run_experiment(
    config: &ExperimentConfig,
    split: &DatasetSplit,
    rois: &[RoiImage],
) -> Result<ExperimentResult, EvalError> {
    let features = roi_features(rois, config.wavelet, DEFAULT_K)?;
    let labels: Vec<CaseLabel> = rois.iter().map(|r| r.label).collect();
    run_experiment_on_features(config, split, &labels, &features)
}

/// Outcome of one grid row; failures are kept, not propagated.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub config: ExperimentConfig,
    pub result: Result<ExperimentResult, String>,
}

/// Runs every experiment on a pool of `workers` threads (0 = all cores).
/// Results keep config order.
pub fn run_grid(
    configs: &[ExperimentConfig],
    split: &DatasetSplit,
    rois: &[RoiImage],
    workers: usize,
) -> Result<Vec<GridRow>, EvalError> {
    if configs.is_empty() {
        return Err(EvalError::NoExperiments);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    let labels: Vec<CaseLabel> = rois.iter().map(|r| r.label).collect();
    pool.install(|| {
        let mut wavelets: Vec<Wavelet> = configs.iter().map(|c| c.wavelet).collect();
        wavelets.sort();
        wavelets.dedup();
        let features: Vec<(Wavelet, Result<Vec<FeatureVector>, String>)> = wavelets
            .into_iter()
            .map(|w| (w, roi_features(rois, w, DEFAULT_K).map_err(|e| e.to_string())))
            .collect();
        Ok(configs
            .par_iter()
            .map(|config| {
                let feats = &features.iter().find(|(w, _)| *w == config.wavelet).expect("computed").1;
                let result = feats
                    .clone()
                    .and_then(|f| run_experiment_on_features(config, split, &labels, &f).map_err(|e| e.to_string()));
                if let Err(e) = &result {
                    warn!("experiment {} failed: {e}", config.id);
                }
                GridRow {
                    config: config.clone(),
                    result,
                }
            })
            .collect())
    })
}

/// Percent with one decimal, `-` when undefined.
pub fn pct(rate: Option<f64>) -> String {
    rate.map_or_else(|| "-".to_string(), |r| format!("{:.1}", 100.0 * r))
}

fn level2_rates(summary: &EvalSummary) -> Rates {
    summary.level2.as_ref().map(|m| m.macro_rates).unwrap_or_default()
}

const TSV_COLUMNS: [&str; 21] = [
    "exp",
    "S",
    "MC",
    "wavelet",
    "eta",
    "max_epochs",
    "seed",
    "specificity",
    "sensitivity",
    "heldout_specificity",
    "heldout_sensitivity",
    "l1_specificity",
    "l1_sensitivity",
    "l3_specificity",
    "l3_sensitivity",
    "heldout_l1_specificity",
    "heldout_l1_sensitivity",
    "heldout_l3_specificity",
    "heldout_l3_sensitivity",
    "epochs",
    "status",
];

/// Tab-separated report. Percentages are level-2 macro rates unless the
/// column name says otherwise.
pub fn grid_tsv(rows: &[GridRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", TSV_COLUMNS.join("\t")).unwrap();
    for row in rows {
        let c = &row.config;
        let mut cells = vec![
            c.id.to_string(),
            c.hidden.to_string(),
            c.momentum.to_string(),
            c.wavelet.label().to_string(),
            c.learning_rate.to_string(),
            c.max_epochs.to_string(),
            c.seed.to_string(),
        ];
        match &row.result {
            Ok(r) => {
                let (pp, ho) = (&r.all_rois, &r.held_out);
                let (l2, h2) = (level2_rates(pp), level2_rates(ho));
                for rate in [
                    l2.specificity,
                    l2.sensitivity,
                    h2.specificity,
                    h2.sensitivity,
                    pp.level1.rates.specificity,
                    pp.level1.rates.sensitivity,
                    pp.level3.rates.specificity,
                    pp.level3.rates.sensitivity,
                    ho.level1.rates.specificity,
                    ho.level1.rates.sensitivity,
                    ho.level3.rates.specificity,
                    ho.level3.rates.sensitivity,
                ] {
                    cells.push(pct(rate));
                }
                cells.push(
                    r.training
                        .iter()
                        .map(|t| t.epochs_run.to_string())
                        .collect::<Vec<_>>()
                        .join("/"),
                );
                cells.push("ok".into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n("-".to_string(), 13));
                cells.push(format!("error: {}", e.replace(['\t', '\n'], " ")));
            }
        }
        writeln!(out, "{}", cells.join("\t")).unwrap();
    }
    out
}

/// Aligned plain-text report in the layout of the published table, with
/// held-out columns and the published values where the id matches. With
/// `held_out_only` the all-ROI columns are dropped.
pub fn grid_text(rows: &[GridRow], provenance: &[String], held_out_only: bool) -> String {
    let header = [
        "Exp #",
        "S",
        "MC",
        "Wavelet",
        "Specificity",
        "Sensitivity",
        "Held-out Spec",
        "Held-out Sens",
        "Published",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        let c = &row.config;
        let published = PUBLISHED_LEVEL2
            .iter()
            .find(|(id, ..)| *id == c.id)
            .map_or("-".to_string(), |(_, s, e)| format!("{s:.1} / {e:.1}"));
        let mut cells = vec![
            c.id.to_string(),
            c.hidden.to_string(),
            c.momentum.to_string(),
            c.wavelet.label().to_string(),
        ];
        match &row.result {
            Ok(r) => {
                let (l2, h2) = (level2_rates(&r.all_rois), level2_rates(&r.held_out));
                cells.extend([
                    pct(l2.specificity),
                    pct(l2.sensitivity),
                    pct(h2.specificity),
                    pct(h2.sensitivity),
                ]);
            }
            Err(_) => cells.extend(["failed", "-", "-", "-"].map(String::from)),
        }
        cells.push(published);
        table.push(cells);
    }
    if held_out_only {
        for row in &mut table {
            row.drain(4..6);
        }
    }
    let header = &table[0].clone();
    let widths: Vec<usize> = (0..header.len())
        .map(|col| table.iter().map(|r| r[col].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in provenance {
        writeln!(out, "# {line}").unwrap();
    }
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:>w$}"))
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            writeln!(
                out,
                "{}",
                "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
            )
            .unwrap();
        }
    }
    for row in rows {
        if let Err(e) = &row.result {
            writeln!(out, "# experiment {} failed: {e}", row.config.id).unwrap();
        }
    }
    out
}

/// One JSON object per (experiment, level) with the epoch losses.
pub fn loss_log_jsonl(rows: &[GridRow]) -> String {
    let mut out = String::new();
    for row in rows {
        let Ok(r) = &row.result else { continue };
        for (level, report) in r.training.iter().enumerate() {
            let entry = serde_json::json!({
                "experiment": row.config.id,
                "level": level + 1,
                "epochs_run": report.epochs_run,
                "stopped_by": match report.stopped_by {
                    StopReason::AccuracyReached => "accuracy_reached",
                    StopReason::MaxEpochs => "max_epochs",
                },
                "final_train_accuracy": report.final_train_accuracy,
                "epoch_losses": report.epoch_losses,
            });
            writeln!(out, "{entry}").unwrap();
        }
    }
    out
}
