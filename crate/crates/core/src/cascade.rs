//! Three-level diagnosis cascade: normal vs. cancerous, then lesion type, then
//! risk level. Cases judged normal at level 1 never reach levels 2 and 3.

use std::fmt;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::features::{fit_scale, FeatureError, FeatureVector};
use crate::neuralnet::{MlpConfig, MlpModel, NetError, Pattern, TrainingReport};
use crate::wavelet::Wavelet;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("training data has no {0} cases")]
    MissingClass(String),
    #[error("invalid case label: {0}")]
    BadLabel(String),
    #[error("feature vectors disagree: {0}")]
    Inconsistent(String),
    #[error("cascade manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Lesion classes in table order; `Norm` is the cancer-free class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lesion {
    Norm,
    Arch,
    Asym,
    Calc,
    Circ,
    Misc,
    Spic,
}

impl Lesion {
    /// Level-2 output order.
    pub const ABNORMAL: [Lesion; 6] = [
        Lesion::Arch,
        Lesion::Asym,
        Lesion::Calc,
        Lesion::Circ,
        Lesion::Misc,
        Lesion::Spic,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Lesion::Norm => "NORM",
            Lesion::Arch => "ARCH",
            Lesion::Asym => "ASYM",
            Lesion::Calc => "CALC",
            Lesion::Circ => "CIRC",
            Lesion::Misc => "MISC",
            Lesion::Spic => "SPIC",
        }
    }

    /// Position among [`Lesion::ABNORMAL`]; `None` for `Norm`.
    pub fn abnormal_index(self) -> Option<usize> {
        Lesion::ABNORMAL.iter().position(|&l| l == self)
    }
}

impl fmt::Display for Lesion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lesion {
    type Err = CascadeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Lesion::Norm]
            .into_iter()
            .chain(Lesion::ABNORMAL)
            .find(|l| l.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| CascadeError::BadLabel(format!("unknown lesion class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Benign,
    Malignant,
}

impl Severity {
    /// Level-3 output order.
    pub const ALL: [Severity; 2] = [Severity::Benign, Severity::Malignant];

    pub fn index(self) -> usize {
        match self {
            Severity::Benign => 0,
            Severity::Malignant => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Severity::Benign => "benign",
            Severity::Malignant => "malignant",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Severity {
    type Err = CascadeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b" | "benign" => Ok(Severity::Benign),
            "m" | "malignant" => Ok(Severity::Malignant),
            _ => Err(CascadeError::BadLabel(format!("unknown severity `{s}`"))),
        }
    }
}

/// Expert label of a case. Normal cases carry no severity; abnormal ones always do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaseLabel {
    lesion: Lesion,
    severity: Option<Severity>,
}

impl CaseLabel {
    pub const NORMAL: CaseLabel = CaseLabel {
        lesion: Lesion::Norm,
        severity: None,
    };

    pub fn new(lesion: Lesion, severity: Option<Severity>) -> Result<Self, CascadeError> {
        if (lesion == Lesion::Norm) != severity.is_none() {
            return Err(CascadeError::BadLabel(format!("{lesion} with severity {severity:?}")));
        }
        Ok(CaseLabel { lesion, severity })
    }

    pub fn abnormal(lesion: Lesion, severity: Severity) -> Result<Self, CascadeError> {
        Self::new(lesion, Some(severity))
    }

    pub fn lesion(self) -> Lesion {
        self.lesion
    }

    pub fn severity(self) -> Option<Severity> {
        self.severity
    }

    pub fn is_cancer(self) -> bool {
        self.lesion != Lesion::Norm
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            None => write!(f, "{}", self.lesion),
            Some(s) => write!(f, "{}-{}", self.lesion, s),
        }
    }
}

/// Cascade output for one case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnosis {
    Normal,
    Cancer { lesion: Lesion, severity: Severity },
}

impl Diagnosis {
    pub fn is_cancer(self) -> bool {
        matches!(self, Diagnosis::Cancer { .. })
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnosis::Normal => f.write_str("NORMAL"),
            Diagnosis::Cancer { lesion, severity } => write!(f, "CANCER {lesion} {severity}"),
        }
    }
}

/// A classifier usable as one cascade level.
pub trait Stage {
    fn classify(&self, x: &[f64]) -> Result<usize, NetError>;
}

impl Stage for MlpModel {
    fn classify(&self, x: &[f64]) -> Result<usize, NetError> {
        self.predict(x)
    }
}

/// Runs the three levels on an already-normalized input. Level 1 class 0 means
/// normal and ends the cascade.
pub fn run_levels<S: Stage + ?Sized>(levels: [&S; 3], x: &[f64]) -> Result<Diagnosis, NetError> {
    if levels[0].classify(x)? == 0 {
        return Ok(Diagnosis::Normal);
    }
    let lesion = Lesion::ABNORMAL[levels[1].classify(x)?];
    let severity = Severity::ALL[levels[2].classify(x)?];
    Ok(Diagnosis::Cancer { lesion, severity })
}

/// Per-level network configs plus the master seed they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub levels: [MlpConfig; 3],
    pub master_seed: u64,
}

/// Output sizes of the three levels.
pub const LEVEL_OUTPUTS: [usize; 3] = [2, 6, 2];

/// SplitMix64 of `master ^ level`, giving each level an independent seed.
pub fn derive_seed(master: u64, level: u64) -> u64 {
    let mut z = (master ^ level.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CascadeConfig {
    /// The same hidden size and training parameters for all three levels.
    pub fn uniform(
        input_dim: usize,
        hidden: usize,
        momentum: f64,
        learning_rate: f64,
        max_epochs: usize,
        master_seed: u64,
    ) -> Self {
        let level = |i: usize| MlpConfig {
            input_dim,
            hidden,
            output_dim: LEVEL_OUTPUTS[i],
            learning_rate,
            momentum,
            max_epochs,
            target_train_accuracy: crate::neuralnet::DEFAULT_TARGET_ACCURACY,
            seed: derive_seed(master_seed, i as u64 + 1),
        };
        CascadeConfig {
            levels: [level(0), level(1), level(2)],
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    /// Normal/cancerous, lesion type, benign/malignant.
    pub nets: [MlpModel; 3],
    pub feature_scale: f64,
    pub wavelet: Wavelet,
    pub k: usize,
    pub master_seed: u64,
}

/// Training sets of the three levels: every case for level 1, ground-truth
/// cancerous cases only for levels 2 and 3. Inputs are divided by `scale`.
pub fn level_patterns(training: &[(FeatureVector, CaseLabel)], scale: f64) -> [Vec<Pattern>; 3] {
    let mut sets: [Vec<Pattern>; 3] = Default::default();
    for (v, label) in training {
        let x: Vec<f64> = v.values.iter().map(|x| x * v.scale / scale).collect();
        sets[0].push(Pattern::one_hot(x.clone(), usize::from(label.is_cancer()), 2));
        if let (Some(lesion), Some(severity)) = (label.lesion.abnormal_index(), label.severity) {
            sets[1].push(Pattern::one_hot(x.clone(), lesion, 6));
            sets[2].push(Pattern::one_hot(x, severity.index(), 2));
        }
    }
    sets
}

/// Fits the feature scale on `training` and trains the three levels
/// concurrently. Returns the model and the per-level training reports.
pub fn train_cascade(
    training: &[(FeatureVector, CaseLabel)],
    config: &CascadeConfig,
) -> Result<(CascadeModel, [TrainingReport; 3]), CascadeError> {
    let first = training
        .first()
        .ok_or_else(|| CascadeError::MissingClass("training".into()))?;
    let (wavelet, k, dim) = (first.0.wavelet, first.0.k, first.0.len());
    if let Some((v, _)) = training
        .iter()
        .find(|(v, _)| v.wavelet != wavelet || v.k != k || v.len() != dim)
    {
        return Err(CascadeError::Inconsistent(format!(
            "{} k={} len={} vs {} k={} len={}",
            v.wavelet,
            v.k,
            v.len(),
            wavelet,
            k,
            dim
        )));
    }
    if !training.iter().any(|(_, l)| !l.is_cancer()) {
        return Err(CascadeError::MissingClass(Lesion::Norm.code().into()));
    }
    if !training.iter().any(|(_, l)| l.is_cancer()) {
        return Err(CascadeError::MissingClass("cancerous".into()));
    }
    for (i, cfg) in config.levels.iter().enumerate() {
        if cfg.input_dim != dim || cfg.output_dim != LEVEL_OUTPUTS[i] {
            return Err(CascadeError::Inconsistent(format!(
                "level {} config is {}->{}, expected {}->{}",
                i + 1,
                cfg.input_dim,
                cfg.output_dim,
                dim,
                LEVEL_OUTPUTS[i]
            )));
        }
    }

    let raw: Vec<FeatureVector> = training
        .iter()
        .map(|(v, _)| FeatureVector {
            values: v.values.iter().map(|x| x * v.scale).collect(),
            scale: 1.0,
            ..v.clone()
        })
        .collect();
    let scale = fit_scale(&raw)?;
    let [p1, p2, p3] = level_patterns(training, scale);

    let train = |cfg: &MlpConfig, pats: &[Pattern]| -> Result<(MlpModel, TrainingReport), NetError> {
        let mut net = MlpModel::new(cfg.clone())?;
        let report = net.train(pats)?;
        Ok((net, report))
    };
    let (r1, (r2, r3)) = rayon::join(
        || train(&config.levels[0], &p1),
        || rayon::join(|| train(&config.levels[1], &p2), || train(&config.levels[2], &p3)),
    );
    let ((n1, t1), (n2, t2), (n3, t3)) = (r1?, r2?, r3?);
    Ok((
        CascadeModel {
            nets: [n1, n2, n3],
            feature_scale: scale,
            wavelet,
            k,
            master_seed: config.master_seed,
        },
        [t1, t2, t3],
    ))
}

const MANIFEST: &str = "manifest.txt";
const MODEL_FILES: [&str; 3] = ["level1.model", "level2.model", "level3.model"];
const MANIFEST_HEADER: &str = "mammocad-cascade 1";

fn class_lists() -> [String; 3] {
    [
        "NORMAL,CANCER".to_string(),
        Lesion::ABNORMAL.map(Lesion::code).join(","),
        Severity::ALL.map(|s| s.name().to_ascii_uppercase()).join(","),
    ]
}

impl CascadeModel {
    pub fn input_dim(&self) -> usize {
        self.nets[0].config.input_dim
    }

    /// Inputs scaled for the networks from a vector carrying any prior scale.
    pub fn prepare(&self, v: &FeatureVector) -> Vec<f64> {
        v.values.iter().map(|x| x * v.scale / self.feature_scale).collect()
    }

    pub fn diagnose(&self, v: &FeatureVector) -> Result<Diagnosis, CascadeError> {
        if v.len() != self.input_dim() {
            return Err(NetError::DimMismatch {
                expected: self.input_dim(),
                actual: v.len(),
            }
            .into());
        }
        let [a, b, c] = &self.nets;
        Ok(run_levels([a, b, c], &self.prepare(v))?)
    }

    /// Writes the three model files and the manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), CascadeError> {
        fs::create_dir_all(dir)?;
        for (net, name) in self.nets.iter().zip(MODEL_FILES) {
            let mut out = BufWriter::new(fs::File::create(dir.join(name))?);
            net.write_text(&mut out, self.feature_scale)?;
            out.flush()?;
        }
        let classes = class_lists();
        let mut out = BufWriter::new(fs::File::create(dir.join(MANIFEST))?);
        writeln!(out, "{MANIFEST_HEADER}")?;
        writeln!(out, "wavelet={}", self.wavelet)?;
        writeln!(out, "k={}", self.k)?;
        writeln!(out, "levels={}", crate::features::FEATURE_LEVELS)?;
        writeln!(out, "feature_scale={:.16e}", self.feature_scale)?;
        writeln!(out, "master_seed={}", self.master_seed)?;
        for (i, list) in classes.iter().enumerate() {
            writeln!(out, "level{}_classes={list}", i + 1)?;
        }
        writeln!(out, "models={}", MODEL_FILES.join(","))?;
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CascadeError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MANIFEST_HEADER) {
            return Err(CascadeError::Manifest("bad header".into()));
        }
        let entries: Vec<(&str, &str)> = lines.filter_map(|l| l.split_once('=')).collect();
        let get = |key: &str| {
            entries
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v.trim())
                .ok_or_else(|| CascadeError::Manifest(format!("missing `{key}`")))
        };
        let parse_err = |key: &str| CascadeError::Manifest(format!("bad value for `{key}`"));
        let wavelet: Wavelet = get("wavelet")?.parse().map_err(|_| parse_err("wavelet"))?;
        let k: usize = get("k")?.parse().map_err(|_| parse_err("k"))?;
        let feature_scale: f64 = get("feature_scale")?.parse().map_err(|_| parse_err("feature_scale"))?;
        let master_seed: u64 = get("master_seed")?.parse().map_err(|_| parse_err("master_seed"))?;
        for (i, expected) in class_lists().iter().enumerate() {
            let key = format!("level{}_classes", i + 1);
            if get(&key)? != expected {
                return Err(CascadeError::Manifest(format!("unsupported class order in `{key}`")));
            }
        }
        let mut nets = Vec::with_capacity(3);
        for (i, name) in MODEL_FILES.iter().enumerate() {
            let file = BufReader::new(fs::File::open(dir.join(name))?);
            let (net, scale) = MlpModel::read_text(file)?;
            if scale != feature_scale {
                return Err(CascadeError::Manifest(format!("{name} has a different feature scale")));
            }
            if net.config.output_dim != LEVEL_OUTPUTS[i] || net.config.input_dim != 3 * k {
                return Err(CascadeError::Manifest(format!("{name} has the wrong shape")));
            }
            nets.push(net);
        }
        let nets: [MlpModel; 3] = nets.try_into().expect("three models");
        Ok(CascadeModel {
            nets,
            feature_scale,
            wavelet,
            k,
            master_seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    struct Counting<'a> {
        inner: &'a MlpModel,
        calls: Cell<usize>,
    }

    impl Stage for Counting<'_> {
        fn classify(&self, x: &[f64]) -> Result<usize, NetError> {
            self.calls.set(self.calls.get() + 1);
            self.inner.classify(x)
        }
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            k: values.len() / 3,
            values,
            wavelet: Wavelet::Daub4,
            scale: 1.0,
        }
    }

    fn two_case() -> Vec<(FeatureVector, CaseLabel)> {
        vec![
            (fv(vec![1.0, 0.0, 0.0, 0.5, 0.0, 0.0]), CaseLabel::NORMAL),
            (
                fv(vec![0.0, 3.0, -2.0, 0.0, 1.0, 0.0]),
                CaseLabel::abnormal(Lesion::Circ, Severity::Benign).unwrap(),
            ),
        ]
    }

    #[test]
    fn labels_enforce_severity_rule() {
        assert!(CaseLabel::new(Lesion::Norm, Some(Severity::Benign)).is_err());
        assert!(CaseLabel::new(Lesion::Spic, None).is_err());
        assert_eq!("calc".parse::<Lesion>().unwrap(), Lesion::Calc);
        assert!("BLOB".parse::<Lesion>().is_err());
        assert_eq!("M".parse::<Severity>().unwrap(), Severity::Malignant);
    }

    #[test]
    fn normal_verdict_short_circuits() {
        let cfg = |c| MlpConfig::new(4, 3, c, 0.0, 0);
        let zero = MlpModel::zeros(cfg(2)).unwrap();
        let l2 = MlpModel::new(cfg(6)).unwrap();
        let l3 = MlpModel::new(cfg(2)).unwrap();
        let stages = [
            Counting {
                inner: &zero,
                calls: Cell::new(0),
            },
            Counting {
                inner: &l2,
                calls: Cell::new(0),
            },
            Counting {
                inner: &l3,
                calls: Cell::new(0),
            },
        ];
        let d = run_levels([&stages[0], &stages[1], &stages[2]], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d, Diagnosis::Normal);
        assert_eq!(stages[0].calls.get(), 1);
        assert_eq!(stages[1].calls.get(), 0);
        assert_eq!(stages[2].calls.get(), 0);
    }

    #[test]
    fn two_case_cascade_separates_its_training_cases() {
        let data = two_case();
        let config = CascadeConfig::uniform(6, 4, 0.9, 0.5, 5000, 42);
        let (model, reports) = train_cascade(&data, &config).unwrap();
        assert!(reports.iter().all(|r| r.final_train_accuracy == 1.0));
        assert_eq!(model.feature_scale, 3.0);
        assert_eq!(model.diagnose(&data[0].0).unwrap(), Diagnosis::Normal);
        assert_eq!(
            model.diagnose(&data[1].0).unwrap(),
            Diagnosis::Cancer {
                lesion: Lesion::Circ,
                severity: Severity::Benign
            }
        );
        assert!(model.diagnose(&fv(vec![0.0; 3])).is_err());
    }

    #[test]
    fn only_normal_cases_is_an_error() {
        let data = vec![two_case().remove(0)];
        let config = CascadeConfig::uniform(6, 4, 0.9, 0.5, 10, 1);
        let err = train_cascade(&data, &config).unwrap_err();
        assert!(matches!(err, CascadeError::MissingClass(ref c) if c == "cancerous"));
        let data = vec![two_case().remove(1)];
        let err = train_cascade(&data, &config).unwrap_err();
        assert!(matches!(err, CascadeError::MissingClass(ref c) if c == "NORM"));
    }

    #[test]
    fn seeds_differ_per_level() {
        let c = CascadeConfig::uniform(6, 4, 0.9, 0.5, 10, 7);
        assert_ne!(c.levels[0].seed, c.levels[1].seed);
        assert_ne!(c.levels[1].seed, c.levels[2].seed);
        assert_eq!(c, CascadeConfig::uniform(6, 4, 0.9, 0.5, 10, 7));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let config = CascadeConfig::uniform(6, 4, 0.9, 0.5, 50, 3);
        let (model, _) = train_cascade(&two_case(), &config).unwrap();
        model.save(dir.path()).unwrap();
        let back = CascadeModel::load(dir.path()).unwrap();
        assert_eq!(back.feature_scale, model.feature_scale);
        for (a, b) in back.nets.iter().zip(&model.nets) {
            assert_eq!(a.w1, b.w1);
            assert_eq!(a.w2, b.w2);
        }
        fs::write(dir.path().join("level2.model"), "garbage").unwrap();
        assert!(CascadeModel::load(dir.path()).is_err());
    }
}
