#![cfg(feature = "cli")]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SCENE: &str = r#"{
  "width": 256, "height": 32, "n_frames": 121,
  "object_size": [12, 10], "initial_position": [10, 10],
  "velocity_profile": {"kind": "constant", "vx": 1.5},
  "object_intensity": 0.8, "background_intensity": 0.2
}"#;

fn csvel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csvel"))
        .args(args)
        .output()
        .expect("spawn csvel")
}

fn setup(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.json"), SCENE).unwrap();
    fs::write(dir.path().join("run.json"), config).unwrap();
    dir
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

const BASE: &str = r#"{
  "input": {"synthetic": "scene.json"},
  "mask": {"random": {"keep_ratio": 0.545, "seed": 2}},
  "mu": 0.25,
  "methods": ["cs_spec", "cs_sm"],
  "output_csv": "out/tracks.csv"
}"#;

#[test]
fn writes_one_row_per_frame_method_and_mu() {
    let dir = setup(BASE);
    let out = csvel(&["run", "--config", &path(&dir, "run.json")]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/tracks.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "frame,method,mu,velocity_px_per_frame");
    assert_eq!(lines.len(), 1 + 2 * 121);
    assert!(lines[1].starts_with("0,cs_spec,0.25,"));
    assert!(lines[122].starts_with("0,cs_sm,0.25,"));
    for line in &lines[1..] {
        let v = line.rsplit(',').next().unwrap();
        if !v.is_empty() {
            let digits = v.trim_start_matches('-').replace('.', "");
            let digits = digits.trim_start_matches('0');
            assert!(digits.len() <= 6, "{v}");
        }
    }
}

#[test]
fn flag_overrides_take_effect() {
    let dir = setup(BASE);
    let csv = path(&dir, "o.csv");
    let svg = path(&dir, "o.svg");
    let out = csvel(&[
        "run",
        "--config",
        &path(&dir, "run.json"),
        "--np",
        "32",
        "--mu-sweep",
        "0.1,0.2",
        "--sm-l",
        "2",
        "--keep-ratio",
        "0.6",
        "--seed",
        "9",
        "--methods",
        "cs_sm",
        "--out-csv",
        &csv,
        "--out-plot",
        &svg,
        "--velocity-scale",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 121);
    assert!(text.lines().skip(1).all(|l| l.contains(",cs_sm,")));
    assert!(text.contains(",cs_sm,0.1,") && text.contains(",cs_sm,0.2,"));
    let plot = fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches(r#"class="track""#).count(), 2);
    assert!(plot.contains("ground truth"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("73 of 121 frames"));
}

#[test]
fn velocity_scale_multiplies_output() {
    let dir = setup(BASE);
    let a = csvel(&[
        "run",
        "--config",
        &path(&dir, "run.json"),
        "--out-csv",
        &path(&dir, "a.csv"),
    ]);
    let b = csvel(&[
        "run",
        "--config",
        &path(&dir, "run.json"),
        "--out-csv",
        &path(&dir, "b.csv"),
        "--velocity-scale",
        "10",
    ]);
    assert!(a.status.success() && b.status.success());
    let read = |n: &str| -> Vec<Option<f64>> {
        fs::read_to_string(dir.path().join(n))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().ok())
            .collect()
    };
    for (x, y) in read("a.csv").into_iter().zip(read("b.csv")) {
        match (x, y) {
            (Some(x), Some(y)) => assert!((10.0 * x - y).abs() <= 1e-4 * y.abs().max(1.0)),
            (None, None) => {}
            other => panic!("gap mismatch {other:?}"),
        }
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = setup(BASE);
    let run = |name: &str| {
        let p = path(&dir, name);
        let out = csvel(&["run", "--config", &path(&dir, "run.json"), "--out-csv", &p]);
        assert!(out.status.success());
        fs::read(p).unwrap()
    };
    assert_eq!(run("x.csv"), run("y.csv"));
}

#[test]
fn csv_goes_to_stdout_without_a_path() {
    let dir = setup(r#"{"input": {"synthetic": "scene.json"}, "mu": 0.2, "methods": ["initial_sm"]}"#);
    let out = csvel(&["run", "--config", &path(&dir, "run.json")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 122);
}

#[test]
fn config_errors_exit_1() {
    let dir = setup(BASE);
    let cfg = path(&dir, "run.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--config", "/nonexistent/run.json"],
        vec!["run", "--config", &cfg, "--np", "63"],
        vec!["run", "--config", &cfg, "--mu", "0"],
        vec!["run", "--config", &cfg, "--mu", "0.2", "--mu-sweep", "0.1,0.2"],
        vec!["run", "--config", &cfg, "--methods", "wigner"],
        vec!["run", "--config", &cfg, "--keep-ratio", "1.5"],
        vec!["run", "--config", &cfg, "--sm-l", "40"],
        vec!["run"],
    ];
    for args in cases {
        let out = csvel(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(
        csvel(&["run", "--config", &path(&dir, "bad.json")]).status.code(),
        Some(1)
    );

    let plain = setup(r#"{"input": {"synthetic": "scene.json"}}"#);
    let out = csvel(&["run", "--config", &path(&plain, "run.json"), "--seed", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_failures_exit_2() {
    let dir = setup(r#"{"input": {"frames_dir": "frames"}}"#);
    fs::create_dir(dir.path().join("frames")).unwrap();
    let out = csvel(&["run", "--config", &path(&dir, "run.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty sequence"));

    let missing = setup(r#"{"input": {"synthetic": "absent.json"}}"#);
    assert_eq!(
        csvel(&["run", "--config", &path(&missing, "run.json")])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn generated_frames_reproduce_the_synthetic_run() {
    let dir = setup(BASE);
    let frames = path(&dir, "frames");
    let out = csvel(&["generate", "--scene", &path(&dir, "scene.json"), "--out", &frames]);
    assert!(out.status.success());
    assert!(Path::new(&frames).join("frame_0120.pgm").exists());
    let truth = fs::read_to_string(Path::new(&frames).join("ground_truth.csv")).unwrap();
    assert_eq!(truth.lines().nth(1), Some("0,10,1.5"));

    fs::write(
        dir.path().join("frames.json"),
        BASE.replace(r#"{"synthetic": "scene.json"}"#, r#"{"frames_dir": "frames"}"#),
    )
    .unwrap();
    let a = csvel(&[
        "run",
        "--config",
        &path(&dir, "run.json"),
        "--out-csv",
        &path(&dir, "a.csv"),
    ]);
    let b = csvel(&[
        "run",
        "--config",
        &path(&dir, "frames.json"),
        "--out-csv",
        &path(&dir, "b.csv"),
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}
