//! Synthetic MIAS-layout archives for integration tests.
//!
//! Each lesion class is a stripe texture whose energy sits in a distinct set
//! of decomposition levels; malignant cases have larger amplitude. Normal
//! images carry only a smooth background and noise.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use mammocad::cascade::{Lesion, Severity};
use mammocad::dataset::write_pgm;
use mammocad::plane::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIDE: usize = 256;

/// Stripe periods (pixels) per lesion class.
fn periods(lesion: Lesion) -> &'static [usize] {
    match lesion {
        Lesion::Arch => &[2],
        Lesion::Asym => &[4],
        Lesion::Calc => &[8],
        Lesion::Circ => &[2, 4],
        Lesion::Misc => &[4, 8],
        Lesion::Spic => &[2, 8],
        Lesion::Norm => &[],
    }
}

fn background(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (a, b) = (rng.gen_range(35.0..45.0), rng.gen_range(-0.02..0.02));
    (0..SIDE * SIDE)
        .map(|i| a + b * (i / SIDE) as f64 + rng.gen_range(-2.0..2.0))
        .collect()
}

pub fn normal_image(rng: &mut ChaCha8Rng) -> GrayImage {
    let px = background(rng);
    GrayImage::from_fn(SIDE, SIDE, |r, c| px[r * SIDE + c] as u8)
}

/// Image with the lesion texture in a square around `(row, col)`.
pub fn lesion_image(rng: &mut ChaCha8Rng, lesion: Lesion, severity: Severity, row: usize, col: usize) -> GrayImage {
    let px = background(rng);
    let amp = match severity {
        Severity::Benign => 15.0,
        Severity::Malignant => 32.0,
    };
    let half = 80i64;
    GrayImage::from_fn(SIDE, SIDE, |r, c| {
        let mut v = px[r * SIDE + c];
        if (r as i64 - row as i64).abs() < half && (c as i64 - col as i64).abs() < half {
            for &p in periods(lesion) {
                let phase = (c % p) < p / 2;
                v += if phase { amp } else { -amp } / periods(lesion).len() as f64;
            }
        }
        v.clamp(0.0, 255.0) as u8
    })
}

/// Writes `n_normal` normal images and `per_stratum` images for each of the
/// twelve (lesion, severity) strata. Returns the number of images.
pub fn write_archive(dir: &Path, n_normal: usize, per_stratum: usize, seed: u64) -> usize {
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut info = String::from("# synthetic archive\n");
    let mut n = 0;
    let next_id = |n: &mut usize| {
        *n += 1;
        format!("mdb{:03}", *n)
    };
    for _ in 0..n_normal {
        let id = next_id(&mut n);
        write_image(dir, &id, &normal_image(&mut rng));
        info.push_str(&format!("{id} F NORM\n"));
    }
    for lesion in Lesion::ABNORMAL {
        for severity in Severity::ALL {
            for _ in 0..per_stratum {
                let id = next_id(&mut n);
                let (row, col) = (rng.gen_range(70..186), rng.gen_range(70..186));
                write_image(dir, &id, &lesion_image(&mut rng, lesion, severity, row, col));
                let y = SIDE - 1 - row;
                let code = if severity == Severity::Benign { "B" } else { "M" };
                info.push_str(&format!("{id} G {lesion} {code} {col} {y} 40\n"));
            }
        }
    }
    fs::write(dir.join("Info.txt"), info).unwrap();
    n
}

pub fn write_image(dir: &Path, id: &str, image: &GrayImage) -> PathBuf {
    let path = dir.join(format!("{id}.pgm"));
    let mut bytes = Vec::new();
    write_pgm(&mut bytes, image).unwrap();
    fs::write(&path, bytes).unwrap();
    path
}
