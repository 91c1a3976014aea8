use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use liref_core::io::save_lightfield;
use liref_core::synth::{occlusion_scene, SceneParams};
use liref_core::{BitDepth, LightField};

fn liref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liref"))
        .args(args)
        .env_remove("LIREF_SEED")
        .output()
        .unwrap()
}

fn scene(seed: u64, size: usize) -> LightField {
    let params = SceneParams {
        size,
        ..SceneParams::default()
    };
    occlusion_scene(&mut ChaCha8Rng::seed_from_u64(seed), &params).unwrap()
}

fn write_scene(dir: &Path, seed: u64, size: usize) {
    save_lightfield(&scene(seed, size), dir, BitDepth::Sixteen).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn refocus_writes_png() {
    let tmp = tempfile::tempdir().unwrap();
    let lf = tmp.path().join("lf");
    write_scene(&lf, 3, 16);
    let out = tmp.path().join("img.png");
    let o = liref(&["refocus", "--in", s(&lf), "--r", "-0.5", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = image::open(&out).unwrap();
    assert_eq!((img.width(), img.height()), (16, 16));
}

#[test]
fn refocus_usage_and_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("img.png");
    assert_eq!(
        liref(&[
            "refocus",
            "--in",
            s(tmp.path()),
            "--r",
            "abc",
            "--out",
            s(&out)
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        liref(&[
            "refocus",
            "--in",
            s(tmp.path()),
            "--r",
            "0",
            "--out",
            s(&out),
            "--bits",
            "12"
        ])
        .status
        .code(),
        Some(2)
    );
    let missing = tmp.path().join("nope");
    assert_eq!(
        liref(&["refocus", "--in", s(&missing), "--r", "0", "--out", s(&out)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn eval_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let lf = tmp.path().join("lf");
    write_scene(&lf, 4, 16);
    let o = liref(&["eval", "--pred", s(&lf), "--gt", s(&lf), "--label", "same"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "config,domain,r,mae,mse,psnr,ssim,gmsd");
    assert_eq!(lines.len(), 1 + 22);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], "same");
        assert_eq!((f[3], f[4], f[5]), ("0", "0", "inf"), "{line}");
        if f[1] == "refocus" {
            assert_eq!((f[6], f[7]), ("1", "0"), "{line}");
        }
    }
}

#[test]
fn eval_shape_mismatch_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    write_scene(&a, 5, 16);
    write_scene(&b, 5, 12);
    let o = liref(&["eval", "--pred", s(&a), "--gt", s(&b)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("shape mismatch"));
}

#[test]
fn eval_writes_file_and_excludes_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    write_scene(&a, 6, 16);
    write_scene(&b, 7, 16);
    let all = tmp.path().join("all.csv");
    let held = tmp.path().join("held.csv");
    assert!(
        liref(&["eval", "--pred", s(&a), "--gt", s(&b), "--out", s(&all)])
            .status
            .success()
    );
    assert!(liref(&[
        "eval",
        "--pred",
        s(&a),
        "--gt",
        s(&b),
        "--out",
        s(&held),
        "--exclude-inputs"
    ])
    .status
    .success());
    let all = fs::read_to_string(all).unwrap();
    let held = fs::read_to_string(held).unwrap();
    let view_row = |t: &str| t.lines().nth(1).unwrap().to_string();
    assert_ne!(view_row(&all), view_row(&held));
    assert_eq!(
        all.lines().skip(2).collect::<Vec<_>>(),
        held.lines().skip(2).collect::<Vec<_>>()
    );
}

#[test]
fn verify_is_deterministic_and_strict() {
    let a = liref(&["verify", "--seed", "11"]);
    let b = liref(&["verify", "--seed", "11"]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(liref(&["verify", "--tol", "0"]).status.code(), Some(3));
    assert_eq!(liref(&["verify", "--size", "3x3x8"]).status.code(), Some(2));
}

#[test]
fn verify_reads_seed_from_env() {
    let env = Command::new(env!("CARGO_BIN_EXE_liref"))
        .args(["verify"])
        .env("LIREF_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(env.stdout, liref(&["verify", "--seed", "11"]).stdout);
}

#[test]
fn train_kfold_writes_fold_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    for i in 0..24 {
        write_scene(&data.join(format!("scene{i:02}")), 100 + i, 12);
    }
    let out = tmp.path().join("run");
    let o = liref(&[
        "train",
        "--data",
        s(&data),
        "--kfold",
        "5",
        "--epochs",
        "2",
        "--configs",
        "vwe2,vwe2+rie2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..5 {
        let fold = fs::read_to_string(out.join(format!("fold{k}.csv"))).unwrap();
        assert!(fold.starts_with("config,domain,r,"));
    }
    assert!(!out.join("fold5.csv").exists());
    let scenes = fs::read_to_string(out.join("scenes.csv")).unwrap();
    assert_eq!(scenes.lines().count(), 1 + 24 * 2 * 22);
    assert_eq!(fs::read_dir(out.join("history")).unwrap().count(), 24 * 2);
    for name in ["manifest.txt", "report.csv", "report_pooled.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}

#[test]
fn train_rejects_bad_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = liref(&[
        "train",
        "--synthetic",
        "--configs",
        "vwe3",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(liref(&["train", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(
        liref(&["--jobs", "0", "train", "--synthetic", "--out", s(&out)])
            .status
            .code(),
        Some(2)
    );
}
