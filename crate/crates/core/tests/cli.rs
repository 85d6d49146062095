use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use contactgrasp::decode::GraspProposal;
use contactgrasp::render::read_sample;
use contactgrasp::sim::TrialReport;

const SMALL_CONFIG: &str = "[scale]\nwidth_min = 0.06\nwidth_max = 0.075\n\n[camera.intrinsics]\nfx = 96.25\nfy = 96.25\ncx = 79.5\ncy = 59.5\nwidth = 160\nheight = 120\n";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contactgrasp"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    dataset: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let meshes = root.join("meshes");
        let config = root.join("small.toml");
        std::fs::write(&config, SMALL_CONFIG).unwrap();
        assert_eq!(code(&cli(&["primitives", "--out", s(&meshes)])), 0);
        let dataset = root.join("data");
        let out = cli(&[
            "generate",
            "--meshes",
            s(&meshes),
            "--out",
            s(&dataset),
            "--config",
            s(&config),
            "--max-poses",
            "2",
            "--max-grasps",
            "40",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        Fixture {
            _dir: dir,
            root,
            dataset,
        }
    })
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&cli(&["--help"])), 0);
    let v = cli(&["--version"]);
    assert_eq!(code(&v), 0);
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&cli(&[])), 1);
    assert_eq!(code(&cli(&["frobnicate"])), 1);
    assert_eq!(code(&cli(&["eval", "--out", "/tmp/x"])), 1);
    let f = fixture();
    let out = f.root.join("bad_gamma");
    assert_eq!(
        code(&cli(&[
            "eval",
            "--dataset",
            s(&f.dataset),
            "--out",
            s(&out),
            "--gamma",
            "1.5"
        ])),
        1
    );
    assert_eq!(
        code(&cli(&[
            "eval",
            "--dataset",
            s(&f.dataset),
            "--out",
            s(&out),
            "--predictor",
            "magic"
        ])),
        1
    );
    assert_eq!(
        code(&cli(&["generate", "--meshes", "x", "--out", "y", "--jobs", "0"])),
        1
    );
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "generate",
        "--meshes",
        "/nonexistent/meshes",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/meshes"));
}

#[test]
fn malformed_tensor_exits_3() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let tensor = dir.path().join("t.f32");
    std::fs::write(&tensor, b"NOPE....").unwrap();
    let sample = f.dataset.join("obj_cube/pose_0/img_0");
    let meta = sample.join("meta.json");
    let out = cli(&[
        "decode",
        "--tensor",
        s(&tensor),
        "--depth",
        s(&sample.join("depth.f32")),
        "--intrinsics",
        s(&meta),
        "--extrinsics",
        s(&meta),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_then_decode_recovers_positive_pixels() {
    let f = fixture();
    let sample_dir = f.dataset.join("obj_box/pose_0/img_0");
    let sample = read_sample(&sample_dir).unwrap();
    let tensor = f.root.join("box_oracle.f32");
    assert_eq!(
        code(&cli(&["oracle", "--sample", s(&sample_dir), "--out", s(&tensor)])),
        0
    );
    let meta = sample_dir.join("meta.json");
    let out = cli(&[
        "decode",
        "--tensor",
        s(&tensor),
        "--depth",
        s(&sample_dir.join("depth.f32")),
        "--intrinsics",
        s(&meta),
        "--extrinsics",
        s(&meta),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let proposals: Vec<GraspProposal> = serde_json::from_slice(&out.stdout).unwrap();
    let positives = sample.map.entries.iter().filter(|e| e.q == 1).count();
    assert_eq!(proposals.is_empty(), positives == 0);
    assert!(proposals.len() <= 10);
    for p in &proposals {
        let [u, v] = p.source_pixel;
        let e = sample.map.entries.iter().find(|e| e.u == u && e.v == v).unwrap();
        assert_eq!(e.q, 1);
        assert!((p.width - e.width_m).abs() < 1e-6);
    }
    assert!(proposals.windows(2).all(|w| w[0].quality >= w[1].quality));
}

#[test]
fn eval_outputs_and_thresholds() {
    let f = fixture();
    let out = f.root.join("eval_high");
    let run = cli(&[
        "eval",
        "--dataset",
        s(&f.dataset),
        "--out",
        s(&out),
        "--trials",
        "2",
        "--gamma",
        "0.99",
        "--svg",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for name in [
        "report.json",
        "summary.csv",
        "config.toml",
        "timing.json",
        "success.svg",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let report: TrialReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.overall.trials, 10);
    assert_eq!(report.gamma, 0.99);
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn missing_predictor_files_are_recorded_per_trial() {
    let f = fixture();
    let out = f.root.join("eval_missing");
    let run = cli(&[
        "eval",
        "--dataset",
        s(&f.dataset),
        "--out",
        s(&out),
        "--trials",
        "1",
        "--predictor",
        "file:/nonexistent/tensors",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report: TrialReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.overall.errors, 5);
    assert_eq!(report.overall.successes, 0);
    assert!(report
        .records
        .iter()
        .all(|r| r.error.as_deref().is_some_and(|e| e.contains("tensor.f32"))));
}

#[test]
fn sweep_writes_one_row_per_threshold() {
    let f = fixture();
    let out = f.root.join("sweep");
    let run = cli(&[
        "sweep",
        "--dataset",
        s(&f.dataset),
        "--out",
        s(&out),
        "--trials",
        "2",
        "--predictor",
        "perturbed:0.3",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(out.join("sweep.json").is_file());
    let custom = f.root.join("sweep_custom");
    let run = cli(&[
        "sweep",
        "--dataset",
        s(&f.dataset),
        "--out",
        s(&custom),
        "--trials",
        "1",
        "--gammas",
        "0.2,0.5",
    ]);
    assert_eq!(code(&run), 0);
    assert_eq!(
        std::fs::read_to_string(custom.join("sweep.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}
