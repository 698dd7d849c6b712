mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mammocad::plane::GrayImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mammocad(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mammocad"));
    for a in args {
        // `{0}`, `{1}`, ... stand for the given paths.
        match a.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
            Some(i) => cmd.arg(paths[i.parse::<usize>().unwrap()]),
            None => cmd.arg(a),
        };
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn textured(side: usize) -> GrayImage {
    GrayImage::from_fn(side, side, |r, c| ((r * 13 + c * 29) % 256) as u8)
}

#[test]
fn decompose_writes_ten_planes() {
    let tmp = tempfile::tempdir().unwrap();
    let img = common::write_image(tmp.path(), "roi", &textured(128));
    let out = tmp.path().join("planes");
    let o = mammocad(
        &["decompose", "{0}", "--wavelet", "daub8", "--out", "{1}"],
        &[&img, &out],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "1_D.txt", "1_H.txt", "1_V.txt", "2_D.txt", "2_H.txt", "2_V.txt", "3_A.txt", "3_D.txt", "3_H.txt",
            "3_V.txt"
        ]
    );
    let a = fs::read_to_string(out.join("3_A.txt")).unwrap();
    assert_eq!(a.lines().count(), 16);
    assert_eq!(a.lines().next().unwrap().split(' ').count(), 16);
    assert!(String::from_utf8_lossy(&o.stdout).contains("10 files"));
}

#[test]
fn decompose_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.pgm");
    let o = mammocad(&["decompose", "{0}", "--out", "{1}"], &[&missing, tmp.path()]);
    assert_eq!(o.status.code(), Some(2));

    let img = common::write_image(tmp.path(), "odd", &textured(100));
    let o = mammocad(&["decompose", "{0}", "--out", "{1}"], &[&img, tmp.path()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("divisible"), "{}", stderr(&o));

    let o = mammocad(
        &["decompose", "{0}", "--wavelet", "haar", "--out", "{1}"],
        &[&img, tmp.path()],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    let archive = tmp.path().join("archive");
    common::write_archive(&archive, 12, 3, 21);
    let model = tmp.path().join("model");
    let o = mammocad(
        &[
            "train",
            "--archive",
            "{0}",
            "--n-train",
            "40",
            "--hidden",
            "8",
            "--momentum",
            "0.9",
            "--learning-rate",
            "0.01",
            "--max-epochs",
            "1000",
            "--out",
            "{1}",
        ],
        &[&archive, &model],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("level 3:"));
    for f in ["level1.model", "level2.model", "level3.model", "manifest.txt"] {
        assert!(model.join(f).is_file(), "{f}");
    }

    // A fresh normal image, unseen in training.
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let normal = common::normal_image(&mut rng).crop(64, 64, 128, 128);
    let roi = common::write_image(tmp.path(), "normal", &normal);
    let o = mammocad(&["diagnose", "--model", "{0}", "{1}"], &[&model, &roi]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "NORMAL");

    let lesion = common::lesion_image(
        &mut rng,
        mammocad::cascade::Lesion::Calc,
        mammocad::cascade::Severity::Malignant,
        128,
        128,
    )
    .crop(64, 64, 128, 128);
    let roi = common::write_image(tmp.path(), "calc", &lesion);
    let o = mammocad(&["diagnose", "--model", "{0}", "{1}"], &[&model, &roi]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("CANCER "));

    let small = common::write_image(tmp.path(), "small", &textured(64));
    let o = mammocad(&["diagnose", "--model", "{0}", "{1}"], &[&model, &small]);
    assert_eq!(o.status.code(), Some(1));

    fs::write(model.join("level2.model"), "mammocad-mlp 1\ngarbage\n").unwrap();
    let o = mammocad(&["diagnose", "--model", "{0}", "{1}"], &[&model, &roi]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_without_label_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mammocad(&["train", "--archive", "{0}", "--out", "{0}"], &[tmp.path()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Info.txt"));
}

#[test]
fn grid_reports_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let archive = tmp.path().join("archive");
    common::write_archive(&archive, 8, 2, 5);
    let grid = tmp.path().join("g.grid");
    let stem = tmp.path().join("report");
    let log = tmp.path().join("loss.jsonl");

    fs::write(&grid, "# one experiment\n4 6 0.9 d-8 0.1 80 3\n").unwrap();
    let o = mammocad(
        &[
            "grid",
            "--archive",
            "{0}",
            "--grid",
            "{1}",
            "--n-train",
            "20",
            "--workers",
            "2",
            "--loss-log",
            "{3}",
            "--out",
            "{2}",
        ],
        &[&archive, &grid, &stem, &log],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = fs::read_to_string(stem.with_extension("tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 2);
    assert!(tsv.lines().nth(1).unwrap().starts_with("4\t6\t0.9\tD-8\t0.1\t80\t3\t"));
    let log = fs::read_to_string(&log).unwrap();
    assert_eq!(log.lines().count(), 3);
    let entry: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(entry["experiment"], 4);
    assert_eq!(entry["level"], 1);

    let o = mammocad(
        &[
            "grid",
            "--archive",
            "{0}",
            "--grid",
            "{1}",
            "--n-train",
            "20",
            "--held-out-only",
            "--out",
            "{2}",
        ],
        &[&archive, &grid, &stem],
    );
    assert!(o.status.success());
    let txt = fs::read_to_string(stem.with_extension("txt")).unwrap();
    assert!(txt.contains("Held-out Spec"));
    assert!(!txt.contains("  Specificity"));

    fs::write(&grid, "1 10 0.95 daub4 0.1 100 1\n2 10 0.95 daub4 fast 100 1\n").unwrap();
    let o = mammocad(
        &["grid", "--archive", "{0}", "--grid", "{1}", "--out", "{2}"],
        &[&archive, &grid, &stem],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn help_and_usage_errors() {
    let o = mammocad(&["--help"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let o = mammocad(&["train"], &[]);
    assert_eq!(o.status.code(), Some(1));
}
