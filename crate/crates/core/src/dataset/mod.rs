//! MIAS archive ingestion: label parsing, PGM loading, 128×128 ROI cutting,
//! and the stratified training split.

mod mias;
mod pgm;
mod split;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cascade::CaseLabel;
use crate::plane::GrayImage;

pub use mias::{parse_mias_info, MiasRecord};
pub use pgm::{load_pgm, write_pgm, PgmError};
pub use split::{split_dataset, DatasetSplit};

/// Side length of every region of interest.
pub const ROI_SIZE: usize = 128;

/// Label file names tried, in order, inside an archive directory.
pub const INFO_FILE_NAMES: [&str; 3] = ["Info.txt", "info.txt", "INFO.TXT"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("label file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error("image {rows}x{cols} is smaller than {ROI_SIZE}x{ROI_SIZE}")]
    ImageTooSmall { rows: usize, cols: usize },
    #[error("cannot load image for {id}: {source}")]
    MissingImage { id: String, source: io::Error },
    #[error("bad image for {id}: {source}")]
    BadImage { id: String, source: PgmError },
    #[error("no label file ({}) in {}", INFO_FILE_NAMES.join(", "), .0.display())]
    NoInfoFile(PathBuf),
    #[error("invalid label: {0}")]
    Label(String),
    #[error("split: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DatasetError {
    /// True for failures to read files, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            DatasetError::MissingImage { .. } | DatasetError::NoInfoFile(_) | DatasetError::Io(_)
        )
    }
}

/// Identifies an ROI: source image plus the index of the abnormality record
/// within that image (0 for normals and single-abnormality images).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoiId {
    pub source_id: String,
    pub roi_index: usize,
}

impl std::fmt::Display for RoiId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.source_id, self.roi_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiImage {
    pub pixels: GrayImage,
    pub label: CaseLabel,
    pub id: RoiId,
}

fn check_size(image: &GrayImage) -> Result<(), DatasetError> {
    let (rows, cols) = image.dims();
    if rows < ROI_SIZE || cols < ROI_SIZE {
        Err(DatasetError::ImageTooSmall { rows, cols })
    } else {
        Ok(())
    }
}

fn window_start(center: i64, extent: usize) -> usize {
    let half = (ROI_SIZE / 2) as i64;
    (center - half).clamp(0, (extent - ROI_SIZE) as i64) as usize
}

/// Cuts the ROI window for a `(row, col)` center, shifting it inside the image
/// near the borders.
fn crop_at(image: &GrayImage, row: i64, col: i64) -> GrayImage {
    let top = window_start(row, image.rows());
    let left = window_start(col, image.cols());
    image.crop(top, left, ROI_SIZE, ROI_SIZE)
}

/// Extracts the 128×128 window centered on archive point `(x, y)`. With
/// `origin_bottom_left`, `y` counts up from the last row.
pub fn extract_roi(image: &GrayImage, center: (u32, u32), origin_bottom_left: bool) -> Result<GrayImage, DatasetError> {
    check_size(image)?;
    let (x, y) = (i64::from(center.0), i64::from(center.1));
    let row = if origin_bottom_left {
        image.rows() as i64 - 1 - y
    } else {
        y
    };
    Ok(crop_at(image, row, x))
}

/// `(row, col)` centroid of the pixels brighter than the image mean, or the
/// geometric center when there are none.
pub fn bright_centroid(image: &GrayImage) -> (f64, f64) {
    let n = image.as_slice().len() as f64;
    let mean = image.as_slice().iter().map(|&p| f64::from(p)).sum::<f64>() / n;
    let (mut sr, mut sc, mut count) = (0.0, 0.0, 0usize);
    for r in 0..image.rows() {
        for (c, &p) in image.row(r).iter().enumerate() {
            if f64::from(p) > mean {
                sr += r as f64;
                sc += c as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        ((image.rows() as f64 - 1.0) / 2.0, (image.cols() as f64 - 1.0) / 2.0)
    } else {
        (sr / count as f64, sc / count as f64)
    }
}

/// ROI for a normal case, centered on [`bright_centroid`].
pub fn roi_for_normal(image: &GrayImage, seed: u64) -> Result<GrayImage, DatasetError> {
    roi_for_normal_jittered(image, seed, 0)
}

/// As [`roi_for_normal`], offsetting the center by up to `max_offset` pixels
/// per axis drawn from `seed`.
pub fn roi_for_normal_jittered(image: &GrayImage, seed: u64, max_offset: u32) -> Result<GrayImage, DatasetError> {
    check_size(image)?;
    let (r, c) = bright_centroid(image);
    let (mut row, mut col) = (r.round() as i64, c.round() as i64);
    if max_offset > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = i64::from(max_offset);
        row += rng.gen_range(-m..=m);
        col += rng.gen_range(-m..=m);
    }
    Ok(crop_at(image, row, col))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiOptions {
    pub origin_bottom_left: bool,
    pub normal_seed: u64,
    pub normal_jitter: u32,
}

impl Default for RoiOptions {
    fn default() -> Self {
        RoiOptions {
            origin_bottom_left: true,
            normal_seed: 0,
            normal_jitter: 0,
        }
    }
}

/// ROIs plus the records skipped for lacking coordinates.
#[derive(Debug, Clone, Default)]
pub struct RoiSet {
    pub rois: Vec<RoiImage>,
    pub skipped: Vec<MiasRecord>,
}

/// One ROI per located abnormality and per normal record, in record order.
/// `load_image` is called once per consecutive run of records sharing an id.
pub fn build_roi_set<F>(records: &[MiasRecord], mut load_image: F, options: RoiOptions) -> Result<RoiSet, DatasetError>
where
    F: FnMut(&str) -> Result<GrayImage, DatasetError>,
{
    let mut set = RoiSet::default();
    let mut cached: Option<(String, GrayImage)> = None;
    let mut per_id: std::collections::HashMap<&str, usize> = Default::default();
    for rec in records {
        if rec.lacks_coordinates() {
            warn!(
                "{} (line {}): abnormal record without coordinates, skipped",
                rec.id, rec.line
            );
            set.skipped.push(rec.clone());
            continue;
        }
        let label = rec.label().map_err(|e| DatasetError::Label(e.to_string()))?;
        if cached.as_ref().is_none_or(|(id, _)| id != &rec.id) {
            cached = Some((rec.id.clone(), load_image(&rec.id)?));
        }
        let image = &cached.as_ref().expect("loaded above").1;
        let pixels = match rec.center {
            Some(center) => extract_roi(image, center, options.origin_bottom_left)?,
            None => roi_for_normal_jittered(image, options.normal_seed, options.normal_jitter)?,
        };
        let index = per_id.entry(rec.id.as_str()).or_default();
        set.rois.push(RoiImage {
            pixels,
            label,
            id: RoiId {
                source_id: rec.id.clone(),
                roi_index: *index,
            },
        });
        *index += 1;
    }
    Ok(set)
}

/// A MIAS-layout directory: a label file plus `<id>.pgm` images.
#[derive(Debug, Clone)]
pub struct MiasArchive {
    pub root: PathBuf,
    pub info_path: PathBuf,
}

impl MiasArchive {
    pub fn open(root: &Path) -> Result<Self, DatasetError> {
        INFO_FILE_NAMES
            .iter()
            .map(|name| root.join(name))
            .find(|p| p.is_file())
            .map(|info_path| MiasArchive {
                root: root.to_path_buf(),
                info_path,
            })
            .ok_or_else(|| DatasetError::NoInfoFile(root.to_path_buf()))
    }

    pub fn records(&self) -> Result<Vec<MiasRecord>, DatasetError> {
        parse_mias_info(&fs::read_to_string(&self.info_path)?)
    }

    pub fn load_image(&self, id: &str) -> Result<GrayImage, DatasetError> {
        let path = self.root.join(format!("{id}.pgm"));
        let bytes = fs::read(&path).map_err(|source| DatasetError::MissingImage {
            id: id.to_string(),
            source,
        })?;
        load_pgm(&bytes).map_err(|source| DatasetError::BadImage {
            id: id.to_string(),
            source,
        })
    }

    pub fn build_rois(&self, options: RoiOptions) -> Result<RoiSet, DatasetError> {
        build_roi_set(&self.records()?, |id| self.load_image(id), options)
    }
}
