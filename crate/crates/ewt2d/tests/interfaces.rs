//! External-interface tests: drives the `ewt` binary end to end over its
//! on-disk artifact formats and checks the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use ewt2d::analysis::toy_image_sized;
use ewt2d::grid::io::write_gray_png;
use ewt2d::grid::Image;

fn ewt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should spawn")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed (status {:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A config that keeps registration fast enough for an integration test.
const FAST_CONFIG: &str = r#"
[demons]
max_iterations = 60
n_level = 2
"#;

#[test]
fn full_pipeline_chain_produces_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let toy = toy_image_sized(42, 128);
    write_gray_png(&dir.join("toy.png"), &toy).unwrap();
    std::fs::write(dir.join("fast.toml"), FAST_CONFIG).unwrap();

    let out = ewt(
        &["partition", "--input", "toy.png", "--out", "part"],
        dir,
    );
    assert_success(&out, "partition");
    assert!(dir.join("part/labels.png").exists());
    assert!(dir.join("part/partition.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("part/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "partition");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let out = ewt(
        &[
            "register",
            "--config",
            "fast.toml",
            "--partition",
            "part",
            "--out",
            "fields",
        ],
        dir,
    );
    assert_success(&out, "register");
    assert!(dir.join("fields/region_0.ewtf").exists());
    assert!(dir.join("fields/region_0.json").exists());

    let out = ewt(
        &[
            "transform",
            "--input",
            "toy.png",
            "--fields",
            "fields",
            "--bank",
            "bank",
            "--out",
            "coeffs",
        ],
        dir,
    );
    assert_success(&out, "transform");
    assert!(dir.join("bank/bank.json").exists());
    assert!(dir.join("bank/filter_0.ewtr").exists());
    assert!(dir.join("coeffs/index.json").exists());
    assert!(dir.join("coeffs/coeff_0.ewtc").exists());
    assert!(dir.join("coeffs/coeff_0.png").exists());

    let out = ewt(
        &[
            "reconstruct",
            "--coeffs",
            "coeffs",
            "--bank",
            "bank",
            "--out",
            "rec.png",
            "--report",
            "report.json",
            "--reference",
            "toy.png",
        ],
        dir,
    );
    assert_success(&out, "reconstruct");
    assert!(dir.join("rec.png").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let psnr: f64 = report["psnr"].as_str().unwrap().parse().unwrap();
    assert!(psnr > 40.0, "chain PSNR {psnr} dB unexpectedly low");
    assert!(report["hole_fraction"].as_f64().unwrap() < 0.01);
}

#[test]
fn transform_reuses_an_existing_bank() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let toy = toy_image_sized(7, 64);
    write_gray_png(&dir.join("toy.png"), &toy).unwrap();
    std::fs::write(dir.join("fast.toml"), FAST_CONFIG).unwrap();

    assert_success(
        &ewt(&["partition", "--input", "toy.png", "--out", "part"], dir),
        "partition",
    );
    assert_success(
        &ewt(
            &["register", "--config", "fast.toml", "--partition", "part", "--out", "fields"],
            dir,
        ),
        "register",
    );
    assert_success(
        &ewt(
            &["transform", "--input", "toy.png", "--fields", "fields", "--bank", "bank", "--out", "c1"],
            dir,
        ),
        "first transform",
    );
    // Second run must load bank/ without --fields.
    assert_success(
        &ewt(
            &["transform", "--input", "toy.png", "--bank", "bank", "--out", "c2"],
            dir,
        ),
        "second transform",
    );
    let a = std::fs::read(dir.join("c1/coeff_0.ewtc")).unwrap();
    let b = std::fs::read(dir.join("c2/coeff_0.ewtc")).unwrap();
    assert_eq!(a, b, "coefficients differ between built and loaded banks");
}

#[test]
fn segment_writes_palette_png_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let tau = 2.0 * std::f64::consts::PI;
    let img = Image::from_fn(64, 64, |x, y| {
        if x < 32 {
            0.5 + 0.4 * (tau * 12.0 * x as f64 / 64.0).cos()
        } else {
            0.5 + 0.4 * (tau * 12.0 * y as f64 / 64.0).cos()
        }
    });
    write_gray_png(&dir.join("tex.png"), &img).unwrap();
    std::fs::write(
        dir.join("seg.toml"),
        r#"
[demons]
max_iterations = 40
n_level = 2

[segmentation]
window = 9
"#,
    )
    .unwrap();

    let out = ewt(
        &[
            "segment", "--config", "seg.toml", "--input", "tex.png", "--k", "2", "--seed", "42",
            "--out", "seg.png",
        ],
        dir,
    );
    assert_success(&out, "segment");
    assert!(dir.join("seg.png").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("seg.json")).unwrap()).unwrap();
    assert_eq!(report["k"], 2);
    let sizes = report["cluster_sizes"].as_array().unwrap();
    assert_eq!(sizes.len(), 2);
    assert_eq!(
        sizes.iter().map(|v| v.as_u64().unwrap()).sum::<u64>(),
        64 * 64
    );
}

#[test]
fn bench_emits_csv_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("bench.toml"),
        r#"
size = 64
taus = [0.2]

[demons]
max_iterations = 40
n_level = 2
"#,
    )
    .unwrap();
    let out = ewt(
        &["bench", "--config", "bench.toml", "--out", "report.csv"],
        dir,
    );
    assert_success(&out, "bench");
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    // One configuration, reported normalized and unnormalized.
    assert_eq!(lines.len(), 3, "expected header + 2 rows:\n{csv}");
    assert!(lines[0].starts_with("variant,partition,kernel,tau,normalized"));
    assert!(dir.join("report.json").exists());
}

#[test]
fn malformed_config_key_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.toml"), "[demons]\nsigma_dd = 0.3\n").unwrap();
    let out = ewt(
        &["partition", "--config", "bad.toml", "--input", "x.png", "--out", "p"],
        dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sigma_dd"), "stderr: {stderr}");
}

#[test]
fn missing_input_exits_2_with_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ewt(&["partition", "--input", "nope.png", "--out", "p"], dir);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope.png"), "stderr: {stderr}");
}

#[test]
fn invalid_flag_value_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ewt(
        &["partition", "--input", "x.png", "--method", "hexagonal", "--out", "p"],
        dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("hexagonal"), "stderr: {stderr}");
}
