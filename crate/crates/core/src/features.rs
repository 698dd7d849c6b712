//! Feature vectors built from the largest-magnitude wavelet coefficients of
//! each decomposition level.

use std::cmp::Ordering;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::wavelet::{MultilevelDecomposition, SubbandSet, Wavelet};

/// Coefficients kept per level.
pub const DEFAULT_K: usize = 100;
/// Levels a feature vector is built from.
pub const FEATURE_LEVELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("coefficient pool of {pool} is smaller than k = {k}")]
    PoolTooSmall { pool: usize, k: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("expected a {expected}-level decomposition, got {actual}")]
    WrongLevelCount { expected: usize, actual: usize },
    #[error("no training vectors")]
    EmptyCorpus,
    #[error("training vectors are all zero")]
    AllZeroCorpus,
    #[error("scale must be a positive finite number, got {0}")]
    BadScale(f64),
    #[error("feature CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Ordered coefficient values: level 1 block, then level 2, then level 3.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub k: usize,
    pub wavelet: Wavelet,
    /// Divisor already applied to `values` (1.0 when raw).
    pub scale: f64,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn by_magnitude(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.abs().total_cmp(&a.0.abs()).then(a.1.cmp(&b.1))
}

/// Returns the `k` pooled coefficients of largest magnitude, signed, in
/// descending-magnitude order.
///
/// The pool is the level's `H`, `V`, `D` planes in row-major order, followed by
/// `approximation` when given. Equal magnitudes keep pool order.
pub fn top_k_level(details: [&[f64]; 3], approximation: Option<&[f64]>, k: usize) -> Result<Vec<f64>, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroK);
    }
    let mut pool: Vec<(f64, usize)> = details
        .into_iter()
        .chain(approximation)
        .flatten()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    if pool.len() < k {
        return Err(FeatureError::PoolTooSmall { pool: pool.len(), k });
    }
    if k < pool.len() {
        pool.select_nth_unstable_by(k - 1, by_magnitude);
        pool.truncate(k);
    }
    pool.sort_unstable_by(by_magnitude);
    Ok(pool.into_iter().map(|(v, _)| v).collect())
}

/// [`top_k_level`] over a [`SubbandSet`], optionally pooling its `A` plane.
pub fn top_k_subbands(set: &SubbandSet, include_approximation: bool, k: usize) -> Result<Vec<f64>, FeatureError> {
    top_k_level(
        [set.h.as_slice(), set.v.as_slice(), set.d.as_slice()],
        include_approximation.then(|| set.a.as_slice()),
        k,
    )
}

/// Concatenates the per-level top-k blocks of a 3-level decomposition. The
/// deepest level also pools its approximation plane.
pub fn extract_feature_vector(decomp: &MultilevelDecomposition, k: usize) -> Result<FeatureVector, FeatureError> {
    if decomp.level_count() != FEATURE_LEVELS {
        return Err(FeatureError::WrongLevelCount {
            expected: FEATURE_LEVELS,
            actual: decomp.level_count(),
        });
    }
    let mut values = Vec::with_capacity(FEATURE_LEVELS * k);
    for (i, level) in decomp.levels.iter().enumerate() {
        let approx = (i + 1 == FEATURE_LEVELS).then(|| decomp.final_approximation.as_slice());
        values.extend(top_k_level(
            [level.h.as_slice(), level.v.as_slice(), level.d.as_slice()],
            approx,
            k,
        )?);
    }
    Ok(FeatureVector {
        values,
        k,
        wavelet: decomp.wavelet,
        scale: 1.0,
    })
}

/// Largest absolute entry over the training vectors.
pub fn fit_scale<'a>(training: impl IntoIterator<Item = &'a FeatureVector>) -> Result<f64, FeatureError> {
    let mut any = false;
    let mut max = 0.0f64;
    for v in training {
        any = true;
        for x in &v.values {
            max = max.max(x.abs());
        }
    }
    if !any {
        return Err(FeatureError::EmptyCorpus);
    }
    if max == 0.0 {
        return Err(FeatureError::AllZeroCorpus);
    }
    Ok(max)
}

/// Divides every entry by `scale`; the recorded scale composes multiplicatively.
pub fn normalize(v: &FeatureVector, scale: f64) -> Result<FeatureVector, FeatureError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(FeatureError::BadScale(scale));
    }
    Ok(FeatureVector {
        values: v.values.iter().map(|x| x / scale).collect(),
        k: v.k,
        wavelet: v.wavelet,
        scale: v.scale * scale,
    })
}

/// Writes `id,f000,...` rows with a header.
pub fn write_csv<'a, W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = (&'a str, &'a FeatureVector)>,
) -> io::Result<()> {
    let mut header_done = false;
    for (id, v) in rows {
        if !header_done {
            let cols: Vec<String> = (0..v.len()).map(|i| format!("f{i:03}")).collect();
            writeln!(out, "id,{}", cols.join(","))?;
            header_done = true;
        }
        let vals: Vec<String> = v.values.iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{id},{}", vals.join(","))?;
    }
    Ok(())
}

/// Reads rows written by [`write_csv`] as `(id, values)`.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<(String, Vec<f64>)>, FeatureError> {
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FeatureError::Csv {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        if i == 0 && id == "id" {
            width = Some(fields.count());
            continue;
        }
        let values = fields
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FeatureError::Csv {
                line: line_no,
                msg: e.to_string(),
            })?;
        if width.is_some_and(|w| w != values.len()) {
            return Err(FeatureError::Csv {
                line: line_no,
                msg: format!("expected {} values, got {}", width.unwrap(), values.len()),
            });
        }
        rows.push((id, values));
    }
    Ok(rows)
}
