//! One-hidden-layer sigmoid perceptron trained by online back-propagation
//! with momentum on the squared error `E = ½ Σ (y − t)²`.

use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::plane::Plane;

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_MAX_EPOCHS: usize = 10_000;
pub const DEFAULT_TARGET_ACCURACY: f64 = 1.0;

const FORMAT_HEADER: &str = "mammocad-mlp 1";

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("expected a vector of length {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("no training patterns")]
    EmptyPatterns,
    #[error("target of pattern {0} is not one-hot")]
    NotOneHot(usize),
    #[error("cannot binarize an empty output vector")]
    EmptyOutput,
    #[error("model file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub target_train_accuracy: f64,
    pub seed: u64,
}

impl MlpConfig {
    /// Config with the default learning rate, epoch cap, and accuracy target.
    pub fn new(input_dim: usize, hidden: usize, output_dim: usize, momentum: f64, seed: u64) -> Self {
        MlpConfig {
            input_dim,
            hidden,
            output_dim,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum,
            max_epochs: DEFAULT_MAX_EPOCHS,
            target_train_accuracy: DEFAULT_TARGET_ACCURACY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if self.input_dim == 0 || self.hidden == 0 || self.output_dim == 0 {
            return bad("layer sizes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.target_train_accuracy > 0.0 && self.target_train_accuracy <= 1.0) {
            return bad("target accuracy must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Parameter-shaped buffers: gradients or momentum deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Plane<f64>,
    pub b1: Vec<f64>,
    pub w2: Plane<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(c: &MlpConfig) -> Self {
        Gradients {
            w1: Plane::zeros(c.hidden, c.input_dim),
            b1: vec![0.0; c.hidden],
            w2: Plane::zeros(c.output_dim, c.hidden),
            b2: vec![0.0; c.output_dim],
        }
    }

    /// All entries in parameter order: W1, b1, W2, b2 (row-major).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(&self.b2);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub w1: Plane<f64>,
    pub b1: Vec<f64>,
    pub w2: Plane<f64>,
    pub b2: Vec<f64>,
    /// Previous update of every parameter, for the momentum term.
    pub prev_delta: Gradients,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AccuracyReached,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub epochs_run: usize,
    pub final_train_accuracy: f64,
    /// Mean per-pattern loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub stopped_by: StopReason,
}

/// An input with a one-hot target.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Pattern {
    pub fn one_hot(input: Vec<f64>, class: usize, classes: usize) -> Self {
        let mut target = vec![0.0; classes];
        target[class] = 1.0;
        Pattern { input, target }
    }

    /// Index of the 1 in the target, if it is one-hot.
    pub fn class(&self) -> Option<usize> {
        let mut hot = None;
        for (i, &t) in self.target.iter().enumerate() {
            if t == 1.0 {
                if hot.is_some() {
                    return None;
                }
                hot = Some(i);
            } else if t != 0.0 {
                return None;
            }
        }
        hot
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn check_len(actual: usize, expected: usize) -> Result<(), NetError> {
    if actual == expected {
        Ok(())
    } else {
        Err(NetError::DimMismatch { expected, actual })
    }
}

impl MlpModel {
    /// Uniform `±1/√fan_in` weights from the config seed, zero biases.
    pub fn new(config: MlpConfig) -> Result<Self, NetError> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        let r1 = 1.0 / (model.config.input_dim as f64).sqrt();
        let r2 = 1.0 / (model.config.hidden as f64).sqrt();
        for w in model.w1.as_mut_slice() {
            *w = rng.gen_range(-r1..=r1);
        }
        for w in model.w2.as_mut_slice() {
            *w = rng.gen_range(-r2..=r2);
        }
        Ok(model)
    }

    /// All parameters zero.
    pub fn zeros(config: MlpConfig) -> Result<Self, NetError> {
        config.validate()?;
        let g = Gradients::zeros(&config);
        Ok(MlpModel {
            w1: g.w1.clone(),
            b1: g.b1.clone(),
            w2: g.w2.clone(),
            b2: g.b2.clone(),
            prev_delta: g,
            config,
        })
    }

    pub fn parameter_count(&self) -> usize {
        let c = &self.config;
        c.hidden * (c.input_dim + 1) + c.output_dim * (c.hidden + 1)
    }

    fn slot(&self, i: usize) -> (usize, usize) {
        let mut offset = i;
        for (part, len) in [
            self.w1.as_slice().len(),
            self.b1.len(),
            self.w2.as_slice().len(),
            self.b2.len(),
        ]
        .into_iter()
        .enumerate()
        {
            if offset < len {
                return (part, offset);
            }
            offset -= len;
        }
        panic!("parameter index {i} out of range");
    }

    /// Parameter `i` in [`Gradients::flatten`] order.
    pub fn param(&self, i: usize) -> f64 {
        match self.slot(i) {
            (0, j) => self.w1.as_slice()[j],
            (1, j) => self.b1[j],
            (2, j) => self.w2.as_slice()[j],
            (_, j) => self.b2[j],
        }
    }

    pub fn set_param(&mut self, i: usize, value: f64) {
        match self.slot(i) {
            (0, j) => self.w1.as_mut_slice()[j] = value,
            (1, j) => self.b1[j] = value,
            (2, j) => self.w2.as_mut_slice()[j] = value,
            (_, j) => self.b2[j] = value,
        }
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.config.hidden)
            .map(|j| {
                let z: f64 = self.w1.row(j).iter().zip(x).map(|(w, v)| w * v).sum();
                sigmoid(z + self.b1[j])
            })
            .collect()
    }

    fn output_activations(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.config.output_dim)
            .map(|o| {
                let z: f64 = self.w2.row(o).iter().zip(hidden).map(|(w, v)| w * v).sum();
                sigmoid(z + self.b2[o])
            })
            .collect()
    }

    /// Output activations, each strictly inside (0, 1) for finite inputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        check_len(x.len(), self.config.input_dim)?;
        Ok(self.output_activations(&self.hidden_activations(x)))
    }

    /// Squared error of one pattern.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> Result<f64, NetError> {
        check_len(target.len(), self.config.output_dim)?;
        let y = self.forward(x)?;
        Ok(0.5 * y.iter().zip(target).map(|(y, t)| (y - t) * (y - t)).sum::<f64>())
    }

    /// Loss and back-propagated `∂E/∂θ` for one pattern.
    pub fn gradients(&self, x: &[f64], target: &[f64]) -> Result<(f64, Gradients), NetError> {
        check_len(x.len(), self.config.input_dim)?;
        check_len(target.len(), self.config.output_dim)?;
        let c = &self.config;
        let hidden = self.hidden_activations(x);
        let out = self.output_activations(&hidden);

        let mut loss = 0.0;
        let delta_out: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&y, &t)| {
                loss += 0.5 * (y - t) * (y - t);
                (y - t) * y * (1.0 - y)
            })
            .collect();
        let delta_hidden: Vec<f64> = (0..c.hidden)
            .map(|j| {
                let back: f64 = (0..c.output_dim).map(|o| self.w2.get(o, j) * delta_out[o]).sum();
                back * hidden[j] * (1.0 - hidden[j])
            })
            .collect();

        let mut g = Gradients::zeros(c);
        for (o, &d) in delta_out.iter().enumerate() {
            for (gw, &h) in g.w2.row_mut(o).iter_mut().zip(&hidden) {
                *gw = d * h;
            }
            g.b2[o] = d;
        }
        for (j, &d) in delta_hidden.iter().enumerate() {
            for (gw, &v) in g.w1.row_mut(j).iter_mut().zip(x) {
                *gw = d * v;
            }
            g.b1[j] = d;
        }
        Ok((loss, g))
    }

    /// One online update `Δθ = −η ∂E/∂θ + MC · Δθ_prev`. Returns the pre-update loss.
    pub fn train_step(&mut self, x: &[f64], target: &[f64]) -> Result<f64, NetError> {
        let (loss, g) = self.gradients(x, target)?;
        let (eta, mc) = (self.config.learning_rate, self.config.momentum);
        let step = |param: &mut [f64], grad: &[f64], prev: &mut [f64]| {
            for ((p, &gr), d) in param.iter_mut().zip(grad).zip(prev.iter_mut()) {
                *d = -eta * gr + mc * *d;
                *p += *d;
            }
        };
        step(
            self.w1.as_mut_slice(),
            g.w1.as_slice(),
            self.prev_delta.w1.as_mut_slice(),
        );
        step(&mut self.b1, &g.b1, &mut self.prev_delta.b1);
        step(
            self.w2.as_mut_slice(),
            g.w2.as_slice(),
            self.prev_delta.w2.as_mut_slice(),
        );
        step(&mut self.b2, &g.b2, &mut self.prev_delta.b2);
        Ok(loss)
    }

    /// Class index chosen by [`binarize`].
    pub fn predict(&self, x: &[f64]) -> Result<usize, NetError> {
        Ok(argmax_first(&self.forward(x)?))
    }

    /// Fraction of patterns whose binarized output equals the target.
    pub fn accuracy(&self, patterns: &[Pattern]) -> Result<f64, NetError> {
        if patterns.is_empty() {
            return Err(NetError::EmptyPatterns);
        }
        let mut hits = 0usize;
        for (i, p) in patterns.iter().enumerate() {
            let class = p.class().ok_or(NetError::NotOneHot(i))?;
            if self.predict(&p.input)? == class {
                hits += 1;
            }
        }
        Ok(hits as f64 / patterns.len() as f64)
    }

    /// Online training with per-epoch seeded shuffling until the training
    /// accuracy target or the epoch cap is reached.
    pub fn train(&mut self, patterns: &[Pattern]) -> Result<TrainingReport, NetError> {
        if patterns.is_empty() {
            return Err(NetError::EmptyPatterns);
        }
        for (i, p) in patterns.iter().enumerate() {
            check_len(p.input.len(), self.config.input_dim)?;
            check_len(p.target.len(), self.config.output_dim)?;
            if p.class().is_none() {
                return Err(NetError::NotOneHot(i));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..patterns.len()).collect();
        let mut epoch_losses = Vec::new();
        let mut accuracy = 0.0;
        let target = self.config.target_train_accuracy;
        for _ in 0..self.config.max_epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for &i in &order {
                total += self.train_step(&patterns[i].input, &patterns[i].target)?;
            }
            epoch_losses.push(total / patterns.len() as f64);
            accuracy = self.accuracy(patterns)?;
            if accuracy >= target {
                return Ok(TrainingReport {
                    epochs_run: epoch_losses.len(),
                    final_train_accuracy: accuracy,
                    epoch_losses,
                    stopped_by: StopReason::AccuracyReached,
                });
            }
        }
        Ok(TrainingReport {
            epochs_run: epoch_losses.len(),
            final_train_accuracy: accuracy,
            epoch_losses,
            stopped_by: StopReason::MaxEpochs,
        })
    }

    /// Writes the config and weights in the text model format. Values use 17
    /// significant digits so that reading back is exact.
    pub fn write_text<W: Write>(&self, mut out: W, feature_scale: f64) -> io::Result<()> {
        let c = &self.config;
        writeln!(out, "{FORMAT_HEADER}")?;
        writeln!(out, "input_dim={}", c.input_dim)?;
        writeln!(out, "hidden={}", c.hidden)?;
        writeln!(out, "output_dim={}", c.output_dim)?;
        writeln!(out, "learning_rate={}", fmt_real(c.learning_rate))?;
        writeln!(out, "momentum={}", fmt_real(c.momentum))?;
        writeln!(out, "max_epochs={}", c.max_epochs)?;
        writeln!(out, "target_train_accuracy={}", fmt_real(c.target_train_accuracy))?;
        writeln!(out, "seed={}", c.seed)?;
        writeln!(out, "feature_scale={}", fmt_real(feature_scale))?;
        write_matrix(&mut out, "W1", &self.w1)?;
        write_vector(&mut out, "b1", &self.b1)?;
        write_matrix(&mut out, "W2", &self.w2)?;
        write_vector(&mut out, "b2", &self.b2)?;
        Ok(())
    }

    /// Reads a model written by [`MlpModel::write_text`], returning it with its
    /// stored feature scale. Momentum state starts from zero.
    pub fn read_text<R: BufRead>(input: R) -> Result<(MlpModel, f64), NetError> {
        let mut reader = LineReader::new(input);
        let header = reader.next_line()?;
        if header.trim() != FORMAT_HEADER {
            return Err(reader.error(format!("expected `{FORMAT_HEADER}`")));
        }
        let input_dim = reader.key("input_dim")?;
        let hidden = reader.key("hidden")?;
        let output_dim = reader.key("output_dim")?;
        let learning_rate = reader.key("learning_rate")?;
        let momentum = reader.key("momentum")?;
        let max_epochs = reader.key("max_epochs")?;
        let target_train_accuracy = reader.key("target_train_accuracy")?;
        let seed = reader.key("seed")?;
        let feature_scale: f64 = reader.key("feature_scale")?;
        let config = MlpConfig {
            input_dim,
            hidden,
            output_dim,
            learning_rate,
            momentum,
            max_epochs,
            target_train_accuracy,
            seed,
        };
        let mut model = MlpModel::zeros(config).map_err(|e| reader.error(e.to_string()))?;
        model.w1 = reader.matrix("W1", hidden, input_dim)?;
        model.b1 = reader.vector("b1", hidden)?;
        model.w2 = reader.matrix("W2", output_dim, hidden)?;
        model.b2 = reader.vector("b2", output_dim)?;
        Ok((model, feature_scale))
    }
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> io::Result<()> {
    let parts: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
    writeln!(out, "{}", parts.join(" "))
}

fn write_matrix<W: Write>(out: &mut W, name: &str, m: &Plane<f64>) -> io::Result<()> {
    writeln!(out, "{name} {} {}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        write_row(out, m.row(r))?;
    }
    Ok(())
}

fn write_vector<W: Write>(out: &mut W, name: &str, v: &[f64]) -> io::Result<()> {
    writeln!(out, "{name} {}", v.len())?;
    write_row(out, v)
}

struct LineReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    fn new(input: R) -> Self {
        LineReader {
            lines: input.lines(),
            line_no: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> NetError {
        NetError::Format {
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<String, NetError> {
        self.line_no += 1;
        match self.lines.next() {
            Some(line) => Ok(line?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn key<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, NetError> {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| self.error(format!("expected `{key}=`")))?;
        value
            .trim()
            .parse()
            .map_err(|_| self.error(format!("bad value for `{key}`")))
    }

    fn reals(&mut self, expected: usize) -> Result<Vec<f64>, NetError> {
        let line = self.next_line()?;
        let values = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| self.error(e.to_string()))?;
        if values.len() != expected {
            return Err(self.error(format!("expected {expected} values, got {}", values.len())));
        }
        Ok(values)
    }

    fn header(&mut self, name: &str, dims: &[usize]) -> Result<(), NetError> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        let ok = parts.next() == Some(name)
            && dims
                .iter()
                .all(|d| parts.next().and_then(|t| t.parse::<usize>().ok()) == Some(*d))
            && parts.next().is_none();
        if ok {
            Ok(())
        } else {
            Err(self.error(format!("expected `{name}` header with dims {dims:?}")))
        }
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Plane<f64>, NetError> {
        self.header(name, &[rows, cols])?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.reals(cols)?);
        }
        Ok(Plane::from_vec(rows, cols, data).expect("row count checked"))
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<Vec<f64>, NetError> {
        self.header(name, &[len])?;
        self.reals(len)
    }
}

fn argmax_first(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate().skip(1) {
        if v > y[best] {
            best = i;
        }
    }
    best
}

/// One-hot encoding of the maximum entry; ties go to the lowest index.
pub fn binarize(y: &[f64]) -> Result<Vec<u8>, NetError> {
    if y.is_empty() {
        return Err(NetError::EmptyOutput);
    }
    let mut out = vec![0u8; y.len()];
    out[argmax_first(y)] = 1;
    Ok(out)
}
