use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn tool() -> Command {
    let mut cmd = Command::cargo_bin("bspline-ilt").unwrap();
    cmd.arg("--threads").arg("1");
    cmd
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
  "grid": {"nx": 20, "ny": 20, "pixel_nm": 20.0},
  "regions": [{"from_target": 0, "n": 8, "samples": 32}],
  "targets": [{"vertices_nm": [[-100, -100], [100, -100], [100, 100], [-100, 100]]}],
  "optimizer": {"max_iters": 3}
}"#;

fn pgm_header(path: &Path) -> (usize, usize, u32, Vec<u32>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert!(lines.next().unwrap().starts_with("# scale "));
    let dims: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    let maxval: u32 = lines.next().unwrap().parse().unwrap();
    let values: Vec<u32> = lines
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<u32>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(values.len(), dims[0] * dims[1]);
    (dims[0], dims[1], maxval, values)
}

#[test]
fn simulate_writes_rasters_and_summary() {
    let out = tempfile::tempdir().unwrap();
    tool()
        .args(["--quiet", "simulate", "--config"])
        .arg(config_path("square.json"))
        .arg("--out")
        .arg(out.path())
        .assert()
        .success();
    for name in ["intensity.pgm", "print.pgm", "epe.pgm"] {
        let (nx, ny, maxval, values) = pgm_header(&out.path().join(name));
        assert_eq!((nx, ny, maxval), (20, 20, 65535));
        assert!(values.iter().all(|v| *v <= 65535));
    }
    let (_, _, _, print) = pgm_header(&out.path().join("print.pgm"));
    assert!(print.iter().any(|v| *v > 0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["objective"].as_f64().unwrap() > 0.0);
    assert!(summary["epe_count"].as_u64().is_some());
}

#[test]
fn simulate_without_regions_images_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "grid": {"nx": 20, "ny": 20, "pixel_nm": 20.0},
          "targets": [{"vertices_nm": [[-100, -100], [100, -100], [100, 100], [-100, 100]]}]
        }"#,
    );
    let out = dir.path().join("out");
    tool()
        .args(["--quiet", "simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let (_, _, _, intensity) = pgm_header(&out.join("intensity.pgm"));
    assert!(intensity.iter().all(|v| *v == 0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["epe_count"], summary["target_count"]);
    assert_eq!(summary["target_count"], 100);
}

#[test]
fn config_errors_exit_with_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (SMALL.replace("\"pixel_nm\": 20.0", "\"pixel_nm\": 0.0"), "grid.pixel_nm"),
        (SMALL.replace("\"max_iters\": 3", "\"max_iters\": 0"), "optimizer.max_iters"),
        (SMALL.replace("\"nx\": 20", "\"nx\": 20, \"pitch\": 3"), "pitch"),
        (SMALL.replace("\"n\": 8", "\"n\": 3"), "regions[0]"),
        ("{ not json".to_string(), "invalid configuration"),
    ];
    for (body, needle) in cases {
        let cfg = write_config(dir.path(), &body);
        let assert = tool()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .assert()
            .code(2);
        let stderr = String::from_utf8_lossy(&assert.get_output().stderr).to_string();
        assert!(stderr.contains(needle), "{needle}: {stderr}");
    }
    tool()
        .args(["gradcheck", "--config"])
        .arg(dir.path().join("missing.json"))
        .assert()
        .code(2);
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    tool()
        .args(["--quiet", "simulate", "--config"])
        .arg(config_path("square.json"))
        .arg("--out")
        .arg(blocker.join("sub"))
        .assert()
        .code(1);
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let ok = tool().args(["gradcheck", "--config"]).arg(&cfg).assert().success();
    let stdout = String::from_utf8_lossy(&ok.get_output().stdout).to_string();
    assert!(stdout.contains("PASS"));
    // one row per control coordinate plus header and verdict
    assert_eq!(stdout.lines().count(), 2 * 8 + 2);

    let bad = tool()
        .args(["gradcheck", "--corrupt-kernel-derivative", "--config"])
        .arg(&cfg)
        .assert()
        .code(1);
    assert!(String::from_utf8_lossy(&bad.get_output().stdout).contains("FAIL"));
}

#[test]
fn gradcheck_reports_zero_cross_region_terms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
          "grid": {"nx": 20, "ny": 20, "pixel_nm": 20.0},
          "regions": [
            {"from_target": 0, "n": 8, "samples": 32},
            {"from_target": 1, "n": 8, "samples": 32}
          ],
          "targets": [
            {"vertices_nm": [[-110, -80], [-30, -80], [-30, 80], [-110, 80]]},
            {"vertices_nm": [[30, -80], [110, -80], [110, 80], [30, 80]]}
          ]
        }"#,
    );
    let ok = tool().args(["gradcheck", "--config"]).arg(&cfg).assert().success();
    let stdout = String::from_utf8_lossy(&ok.get_output().stdout).to_string();
    let cross: Vec<&str> = stdout.lines().filter(|l| l.starts_with("cross-region")).collect();
    assert_eq!(cross.len(), 2);
    assert!(cross.iter().all(|l| l.ends_with("= 0e0")), "{cross:?}");
}

#[test]
fn optimize_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    tool()
        .args(["--quiet", "optimize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .assert()
        .success()
        .stdout("");
    for name in [
        "convergence.csv",
        "mask_initial.json",
        "mask_final.json",
        "boundary_final.svg",
        "initial_intensity.pgm",
        "initial_print.pgm",
        "initial_epe.pgm",
        "final_intensity.pgm",
        "final_print.pgm",
        "final_epe.pgm",
        "summary.json",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,J,alpha"));
    let js: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(js.len() >= 2 && js.len() <= 4);
    assert!(js.windows(2).all(|w| w[1] <= w[0]));

    let mask: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("mask_initial.json")).unwrap()).unwrap();
    let first = &mask["regions"][0]["controls_nm"][0];
    assert!((first[0].as_f64().unwrap() + 100.0).abs() < 1e-9);
    assert!((first[1].as_f64().unwrap() + 100.0).abs() < 1e-9);
    let svg = fs::read_to_string(out.join("boundary_final.svg")).unwrap();
    assert_eq!(svg.matches(" L").count(), 511);
}

#[test]
fn optimize_requires_regions_and_targets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"grid": {"nx": 20, "ny": 20, "pixel_nm": 20.0}}"#);
    tool()
        .args(["optimize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .assert()
        .code(2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |threads: &str, sub: &str| {
        let out = dir.path().join(sub);
        Command::cargo_bin("bspline-ilt")
            .unwrap()
            .args(["--quiet", "--threads", threads, "optimize", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .assert()
            .success();
        fs::read(out.join("convergence.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("3", "b"));
}
