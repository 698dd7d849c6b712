//! Daubechies filter banks and periodic discrete wavelet transforms.
//!
//! All transforms use periodic extension and the alignment
//!
//! ```text
//! approx[m] = Σ_k h[k] · x[(2m + k) mod n]
//! detail[m] = Σ_k g[k] · x[(2m + k) mod n]
//! ```
//!
//! with `g[k] = (-1)^k · h[L-1-k]`. The analysis operator is orthonormal, so the
//! inverse is its transpose and energy is preserved exactly (up to rounding).
//!
//! 2D transforms are separable: every row is filtered first, then every column
//! of the row-lowpassed and row-highpassed halves. The subbands are
//!
//! | subband | rows     | columns  |
//! |---------|----------|----------|
//! | `A`     | lowpass  | lowpass  |
//! | `H`     | lowpass  | highpass |
//! | `V`     | highpass | lowpass  |
//! | `D`     | highpass | highpass |
//!
//! "rows" names the filter applied along each row (i.e. across columns), so `H`
//! is the column-direction detail of the row-smoothed image and responds to
//! horizontal edges.

use std::fmt;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::plane::Plane;

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("unsupported wavelet `{0}` (expected daub4 or daub8)")]
    UnsupportedWavelet(String),
    #[error("signal length {len} must be even and at least the filter length {taps}")]
    BadSignalLength { len: usize, taps: usize },
    #[error("approximation and detail lengths differ ({approx} vs {detail})")]
    LengthMismatch { approx: usize, detail: usize },
    #[error("plane {rows}x{cols} must have even sides of at least {taps}")]
    BadPlaneDims { rows: usize, cols: usize, taps: usize },
    #[error("subband planes have mismatched dimensions")]
    SubbandMismatch,
    #[error("image {rows}x{cols} is not divisible by 2^{levels}")]
    NotDivisible { rows: usize, cols: usize, levels: usize },
    #[error("level count must be positive")]
    ZeroLevels,
}

/// The two supported Daubechies wavelets, named by tap count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wavelet {
    Daub4,
    Daub8,
}

impl Wavelet {
    pub const ALL: [Wavelet; 2] = [Wavelet::Daub4, Wavelet::Daub8];

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Daub4 => "daub4",
            Wavelet::Daub8 => "daub8",
        }
    }

    /// Short label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Wavelet::Daub4 => "D-4",
            Wavelet::Daub8 => "D-8",
        }
    }

    pub fn taps(self) -> usize {
        match self {
            Wavelet::Daub4 => 4,
            Wavelet::Daub8 => 8,
        }
    }

    /// The validated filter bank for this wavelet.
    pub fn filter(self) -> &'static WaveletFilter {
        static D4: OnceLock<WaveletFilter> = OnceLock::new();
        static D8: OnceLock<WaveletFilter> = OnceLock::new();
        let cell = match self {
            Wavelet::Daub4 => &D4,
            Wavelet::Daub8 => &D8,
        };
        cell.get_or_init(|| {
            let filter = WaveletFilter::from_lowpass(self, lowpass_taps(self));
            if let Err(msg) = filter.validate(1e-12) {
                panic!("{} filter failed self-test: {msg}", self.name());
            }
            filter
        })
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wavelet {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "daub4" | "d4" | "d-4" => Ok(Wavelet::Daub4),
            "daub8" | "d8" | "d-8" => Ok(Wavelet::Daub8),
            _ => Err(WaveletError::UnsupportedWavelet(s.to_string())),
        }
    }
}

fn lowpass_taps(wavelet: Wavelet) -> Vec<f64> {
    match wavelet {
        Wavelet::Daub4 => {
            let s3 = 3f64.sqrt();
            let d = 4.0 * 2f64.sqrt();
            vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
        }
        // Four vanishing moments, minimum phase.
        Wavelet::Daub8 => vec![
            0.230_377_813_308_896_4,
            0.714_846_570_552_915_4,
            0.630_880_767_929_858_7,
            -0.027_983_769_416_859_854,
            -0.187_034_811_719_093_09,
            0.030_841_381_835_560_764,
            0.032_883_011_666_885_2,
            -0.010_597_401_785_069_032,
        ],
    }
}

/// Analysis lowpass/highpass pair of an orthonormal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub wavelet: Wavelet,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletFilter {
    /// Builds the bank from its lowpass taps; the highpass follows from the
    /// quadrature-mirror relation.
    pub fn from_lowpass(wavelet: Wavelet, lowpass: Vec<f64>) -> Self {
        let n = lowpass.len();
        let highpass = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[n - 1 - k]
            })
            .collect();
        WaveletFilter {
            wavelet,
            lowpass,
            highpass,
        }
    }

    pub fn taps(&self) -> usize {
        self.lowpass.len()
    }

    /// Checks DC gain, unit energy, even-shift orthogonality and the mirror relation.
    pub fn validate(&self, tol: f64) -> Result<(), String> {
        let h = &self.lowpass;
        let n = h.len();
        if n == 0 || !n.is_multiple_of(2) || self.highpass.len() != n {
            return Err(format!("bad tap count {n}"));
        }
        let sum: f64 = h.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > tol {
            return Err(format!("lowpass sum {sum} != sqrt(2)"));
        }
        for shift in (0..n).step_by(2) {
            let dot: f64 = (0..n - shift).map(|k| h[k] * h[k + shift]).sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - expected).abs() > tol {
                return Err(format!("autocorrelation at shift {shift} is {dot}"));
            }
        }
        for k in 0..n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if (self.highpass[k] - sign * h[n - 1 - k]).abs() > tol {
                return Err(format!("highpass tap {k} breaks the mirror relation"));
            }
        }
        Ok(())
    }
}

/// Looks up a filter bank by name (`daub4`, `daub8`).
pub fn make_filter(name: &str) -> Result<WaveletFilter, WaveletError> {
    let wavelet: Wavelet = name.parse()?;
    Ok(wavelet.filter().clone())
}

fn analyze_into(x: &[f64], filter: &WaveletFilter, approx: &mut [f64], detail: &mut [f64]) {
    let n = x.len();
    let (h, g) = (&filter.lowpass, &filter.highpass);
    for m in 0..n / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for k in 0..h.len() {
            let v = x[(2 * m + k) % n];
            a += h[k] * v;
            d += g[k] * v;
        }
        approx[m] = a;
        detail[m] = d;
    }
}

fn synthesize_into(approx: &[f64], detail: &[f64], filter: &WaveletFilter, out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    let (h, g) = (&filter.lowpass, &filter.highpass);
    for m in 0..approx.len() {
        let (a, d) = (approx[m], detail[m]);
        for k in 0..h.len() {
            out[(2 * m + k) % n] += h[k] * a + g[k] * d;
        }
    }
}

/// One level of the periodic 1D DWT.
pub fn dwt1d(signal: &[f64], filter: &WaveletFilter) -> Result<(Vec<f64>, Vec<f64>), WaveletError> {
    let n = signal.len();
    if !n.is_multiple_of(2) || n < filter.taps() {
        return Err(WaveletError::BadSignalLength {
            len: n,
            taps: filter.taps(),
        });
    }
    let mut approx = vec![0.0; n / 2];
    let mut detail = vec![0.0; n / 2];
    analyze_into(signal, filter, &mut approx, &mut detail);
    Ok((approx, detail))
}

/// Inverse of [`dwt1d`].
pub fn idwt1d(approx: &[f64], detail: &[f64], filter: &WaveletFilter) -> Result<Vec<f64>, WaveletError> {
    if approx.len() != detail.len() {
        return Err(WaveletError::LengthMismatch {
            approx: approx.len(),
            detail: detail.len(),
        });
    }
    let mut out = vec![0.0; 2 * approx.len()];
    synthesize_into(approx, detail, filter, &mut out);
    Ok(out)
}

/// The four subbands of one 2D decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub a: Plane<f64>,
    pub h: Plane<f64>,
    pub v: Plane<f64>,
    pub d: Plane<f64>,
}

impl SubbandSet {
    pub fn dims(&self) -> (usize, usize) {
        self.a.dims()
    }

    fn check_dims(&self) -> Result<(), WaveletError> {
        let dims = self.a.dims();
        if [&self.h, &self.v, &self.d].iter().all(|p| p.dims() == dims) {
            Ok(())
        } else {
            Err(WaveletError::SubbandMismatch)
        }
    }

    pub fn energy(&self) -> f64 {
        self.a.sum_of_squares() + self.h.sum_of_squares() + self.v.sum_of_squares() + self.d.sum_of_squares()
    }
}

/// One level of the separable 2D DWT.
pub fn dwt2d(image: &Plane<f64>, filter: &WaveletFilter) -> Result<SubbandSet, WaveletError> {
    let (rows, cols) = image.dims();
    let taps = filter.taps();
    if rows % 2 != 0 || cols % 2 != 0 || rows < taps || cols < taps {
        return Err(WaveletError::BadPlaneDims { rows, cols, taps });
    }
    let (hr, hc) = (rows / 2, cols / 2);

    // Rows: low half and high half, each rows × hc.
    let mut row_lo = Plane::zeros(rows, hc);
    let mut row_hi = Plane::zeros(rows, hc);
    let mut lo = vec![0.0; hc];
    let mut hi = vec![0.0; hc];
    for r in 0..rows {
        analyze_into(image.row(r), filter, &mut lo, &mut hi);
        row_lo.row_mut(r).copy_from_slice(&lo);
        row_hi.row_mut(r).copy_from_slice(&hi);
    }

    let mut a = Plane::zeros(hr, hc);
    let mut h = Plane::zeros(hr, hc);
    let mut v = Plane::zeros(hr, hc);
    let mut d = Plane::zeros(hr, hc);
    let mut lo = vec![0.0; hr];
    let mut hi = vec![0.0; hr];
    for c in 0..hc {
        analyze_into(&row_lo.column(c), filter, &mut lo, &mut hi);
        for r in 0..hr {
            a.set(r, c, lo[r]);
            h.set(r, c, hi[r]);
        }
        analyze_into(&row_hi.column(c), filter, &mut lo, &mut hi);
        for r in 0..hr {
            v.set(r, c, lo[r]);
            d.set(r, c, hi[r]);
        }
    }
    Ok(SubbandSet { a, h, v, d })
}

/// Inverse of [`dwt2d`].
pub fn idwt2d(subbands: &SubbandSet, filter: &WaveletFilter) -> Result<Plane<f64>, WaveletError> {
    subbands.check_dims()?;
    let (hr, hc) = subbands.dims();
    let (rows, cols) = (2 * hr, 2 * hc);

    let mut row_lo = Plane::zeros(rows, hc);
    let mut row_hi = Plane::zeros(rows, hc);
    let mut col = vec![0.0; rows];
    for c in 0..hc {
        synthesize_into(&subbands.a.column(c), &subbands.h.column(c), filter, &mut col);
        for (r, &x) in col.iter().enumerate() {
            row_lo.set(r, c, x);
        }
        synthesize_into(&subbands.v.column(c), &subbands.d.column(c), filter, &mut col);
        for (r, &x) in col.iter().enumerate() {
            row_hi.set(r, c, x);
        }
    }

    let mut out = Plane::zeros(rows, cols);
    for r in 0..rows {
        let (lo, hi) = (row_lo.row(r).to_vec(), row_hi.row(r).to_vec());
        synthesize_into(&lo, &hi, filter, out.row_mut(r));
    }
    Ok(out)
}

/// Iterated 2D decomposition. `levels[0]` is the finest level; the `a` plane of
/// every level but the last is the input of the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelDecomposition {
    pub wavelet: Wavelet,
    pub levels: Vec<Details>,
    pub final_approximation: Plane<f64>,
    pub original_dims: (usize, usize),
}

/// Detail planes of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Details {
    pub h: Plane<f64>,
    pub v: Plane<f64>,
    pub d: Plane<f64>,
}

impl MultilevelDecomposition {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn energy(&self) -> f64 {
        self.final_approximation.sum_of_squares()
            + self
                .levels
                .iter()
                .map(|l| l.h.sum_of_squares() + l.v.sum_of_squares() + l.d.sum_of_squares())
                .sum::<f64>()
    }

    /// Rebuilds the original image.
    pub fn reconstruct(&self) -> Result<Plane<f64>, WaveletError> {
        let filter = self.wavelet.filter();
        let mut approx = self.final_approximation.clone();
        for level in self.levels.iter().rev() {
            let set = SubbandSet {
                a: approx,
                h: level.h.clone(),
                v: level.v.clone(),
                d: level.d.clone(),
            };
            approx = idwt2d(&set, filter)?;
        }
        Ok(approx)
    }

    /// Writes one text matrix per plane as `{level}_{subband}.txt`, with the
    /// deepest approximation as `{levels}_A.txt`. Returns the written paths.
    pub fn write_debug_planes(&self, dir: &Path) -> io::Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut emit = |name: String, plane: &Plane<f64>| -> io::Result<()> {
            let path = dir.join(name);
            let mut out = io::BufWriter::new(fs::File::create(&path)?);
            for r in 0..plane.rows() {
                let line: Vec<String> = plane.row(r).iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
            out.flush()?;
            written.push(path);
            Ok(())
        };
        for (i, level) in self.levels.iter().enumerate() {
            let l = i + 1;
            emit(format!("{l}_H.txt"), &level.h)?;
            emit(format!("{l}_V.txt"), &level.v)?;
            emit(format!("{l}_D.txt"), &level.d)?;
        }
        emit(format!("{}_A.txt", self.levels.len()), &self.final_approximation)?;
        Ok(written)
    }
}

/// Decomposes `image` over `levels` dyadic levels.
pub fn decompose_multilevel(
    image: &Plane<f64>,
    filter: &WaveletFilter,
    levels: usize,
) -> Result<MultilevelDecomposition, WaveletError> {
    if levels == 0 {
        return Err(WaveletError::ZeroLevels);
    }
    let (rows, cols) = image.dims();
    let block = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if block == 0 || rows % block != 0 || cols % block != 0 || rows == 0 || cols == 0 {
        return Err(WaveletError::NotDivisible { rows, cols, levels });
    }
    let mut details = Vec::with_capacity(levels);
    let mut approx = image.clone();
    for _ in 0..levels {
        let set = dwt2d(&approx, filter)?;
        details.push(Details {
            h: set.h,
            v: set.v,
            d: set.d,
        });
        approx = set.a;
    }
    Ok(MultilevelDecomposition {
        wavelet: filter.wavelet,
        levels: details,
        final_approximation: approx,
        original_dims: (rows, cols),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn random_plane(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Plane<f64> {
        Plane::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn filters_pass_self_test() {
        for w in Wavelet::ALL {
            let f = w.filter();
            assert_eq!(f.taps(), w.taps());
            f.validate(1e-12).unwrap();
            let gsum: f64 = f.highpass.iter().sum();
            assert!(gsum.abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_filter_name_is_rejected() {
        assert_eq!(
            make_filter("haar"),
            Err(WaveletError::UnsupportedWavelet("haar".into()))
        );
        assert_eq!(make_filter("D-8").unwrap().wavelet, Wavelet::Daub8);
    }

    #[test]
    fn corrupted_taps_fail_validation() {
        let mut taps = lowpass_taps(Wavelet::Daub4);
        taps[1] += 1e-9;
        assert!(WaveletFilter::from_lowpass(Wavelet::Daub4, taps)
            .validate(1e-12)
            .is_err());
    }

    #[test]
    fn constant_signal_maps_to_scaled_approximation() {
        let f = Wavelet::Daub4.filter();
        let c = 3.25;
        let (a, d) = dwt1d(&[c; 8], f).unwrap();
        for v in &a {
            assert!((v - c * SQRT2).abs() < 1e-12);
        }
        assert!(d.iter().all(|v| v.abs() < 1e-12));
        let back = idwt1d(&a, &d, f).unwrap();
        assert!(back.iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn impulse_follows_phase_convention() {
        // y[m] = Σ h[k] x[(2m+k) mod 8]; the impulse at 0 is hit by (m=0,k=0) and (m=3,k=2).
        let f = Wavelet::Daub4.filter();
        let mut x = [0.0; 8];
        x[0] = 1.0;
        let (a, d) = dwt1d(&x, f).unwrap();
        let h = &f.lowpass;
        let g = &f.highpass;
        assert_eq!(a, vec![h[0], 0.0, 0.0, h[2]]);
        assert_eq!(d, vec![g[0], 0.0, 0.0, g[2]]);
    }

    #[test]
    fn short_or_odd_signals_are_rejected() {
        let f = Wavelet::Daub4.filter();
        assert!(matches!(
            dwt1d(&[1.0, 2.0], f),
            Err(WaveletError::BadSignalLength { .. })
        ));
        assert!(matches!(dwt1d(&[0.0; 9], f), Err(WaveletError::BadSignalLength { .. })));
        assert!(matches!(
            idwt1d(&[0.0; 4], &[0.0; 3], f),
            Err(WaveletError::LengthMismatch { approx: 4, detail: 3 })
        ));
    }

    #[test]
    fn one_dimensional_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for w in Wavelet::ALL {
            let x: Vec<f64> = (0..128).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (a, d) = dwt1d(&x, w.filter()).unwrap();
            let energy: f64 = a.iter().chain(&d).map(|v| v * v).sum();
            let input: f64 = x.iter().map(|v| v * v).sum();
            assert!((energy - input).abs() / input < 1e-12);
            let y = idwt1d(&a, &d, w.filter()).unwrap();
            let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn constant_plane() {
        let f = Wavelet::Daub4.filter();
        let set = dwt2d(&Plane::filled(8, 12, 1.5), f).unwrap();
        assert_eq!(set.dims(), (4, 6));
        assert!(set.a.as_slice().iter().all(|v| (v - 3.0).abs() < 1e-12));
        for p in [&set.h, &set.v, &set.d] {
            assert!(p.as_slice().iter().all(|v| v.abs() < 1e-12));
        }
        let back = idwt2d(&set, f).unwrap();
        assert!(back.as_slice().iter().all(|v| (v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn two_dimensional_energy_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_plane(&mut rng, 8, 8);
        let set = dwt2d(&x, Wavelet::Daub4.filter()).unwrap();
        assert!((set.energy() - x.sum_of_squares()).abs() < 1e-9);
        for w in Wavelet::ALL {
            let x = random_plane(&mut rng, 128, 128);
            let set = dwt2d(&x, w.filter()).unwrap();
            let back = idwt2d(&set, w.filter()).unwrap();
            assert!(back.max_abs_diff(&x) < 1e-9);
        }
    }

    #[test]
    fn axis_convention() {
        // Rows vary, columns constant: a horizontal edge pattern. Only the
        // column-direction detail (H) and the approximation respond.
        let f = Wavelet::Daub4.filter();
        let x = Plane::from_fn(16, 16, |r, _| if r < 8 { 1.0 } else { 0.0 });
        let set = dwt2d(&x, f).unwrap();
        assert!(set.h.sum_of_squares() > 0.1);
        assert!(set.v.sum_of_squares() < 1e-20);
        assert!(set.d.sum_of_squares() < 1e-20);
    }

    #[test]
    fn bad_plane_dims() {
        let f = Wavelet::Daub4.filter();
        assert!(matches!(
            dwt2d(&Plane::zeros(7, 8), f),
            Err(WaveletError::BadPlaneDims { .. })
        ));
        let mut set = dwt2d(&Plane::zeros(8, 8), f).unwrap();
        set.h = Plane::zeros(3, 4);
        assert_eq!(idwt2d(&set, f), Err(WaveletError::SubbandMismatch));
    }

    #[test]
    fn multilevel_dims_and_constant_image() {
        let f = Wavelet::Daub8.filter();
        let dec = decompose_multilevel(&Plane::filled(128, 128, 2.0), f, 3).unwrap();
        let dims: Vec<_> = dec.levels.iter().map(|l| l.h.dims()).collect();
        assert_eq!(dims, vec![(64, 64), (32, 32), (16, 16)]);
        assert_eq!(dec.final_approximation.dims(), (16, 16));
        for l in &dec.levels {
            for p in [&l.h, &l.v, &l.d] {
                assert!(p.as_slice().iter().all(|v| v.abs() < 1e-10));
            }
        }
        assert!(dec
            .final_approximation
            .as_slice()
            .iter()
            .all(|v| (v - 16.0).abs() < 1e-10));
    }

    #[test]
    fn multilevel_preconditions() {
        let f = Wavelet::Daub4.filter();
        assert!(matches!(
            decompose_multilevel(&Plane::zeros(100, 100), f, 3),
            Err(WaveletError::NotDivisible { .. })
        ));
        assert_eq!(
            decompose_multilevel(&Plane::zeros(8, 8), f, 0),
            Err(WaveletError::ZeroLevels)
        );
        // 16 / 4 = 4 < 8 taps at the third level.
        assert!(matches!(
            decompose_multilevel(&Plane::zeros(16, 16), Wavelet::Daub8.filter(), 3),
            Err(WaveletError::BadPlaneDims { .. })
        ));
    }

    #[test]
    fn debug_planes_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dec = decompose_multilevel(&random_plane(&mut rng, 32, 32), Wavelet::Daub4.filter(), 3).unwrap();
        let files = dec.write_debug_planes(dir.path()).unwrap();
        assert_eq!(files.len(), 10);
        let text = fs::read_to_string(dir.path().join("3_A.txt")).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split(' ').map(|t| t.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].len(), 4);
        assert_eq!(rows[2][3], dec.final_approximation.get(2, 3));
    }
}
