//! The `smp` binary driven end to end through temporary directories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use smp_core::dataset::{NoiseModel, SyntheticSpec};
use smp_core::evalreport::{Axis, AxisValue, SweepSpec};
use smp_core::model::{Architecture, OptimConfig};
use smp_core::prototypes::SelectorConfig;
use smp_core::selftrain::{read_jsonl, TrainConfig};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, value: &Value) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, value.to_string()).unwrap();
        p
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    /// Generates `data.smpd` at noise rate `rate`.
    fn data(&self, rate: f64) -> Output {
        let cfg = self.write(
            "gen.json",
            &json!({"synthetic": spec(), "noise": NoiseModel::uniform(rate, 3)}),
        );
        smp(&["gen-data", "--config", s(&cfg), "--out", s(&self.path("data.smpd"))])
    }

    fn train_config(&self, name: &str, train: &TrainConfig) -> PathBuf {
        self.write(
            name,
            &json!({"data": {"train": "data.smpd", "split_seed": 5}, "train": train}),
        )
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn smp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smp")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        .unwrap_or_else(|| panic!("no {key}= in {text:?}"))
}

fn spec() -> SyntheticSpec {
    SyntheticSpec {
        classes: 3,
        subclusters_per_class: 2,
        dim: 8,
        samples_per_class: 100,
        subcluster_spread: 0.5,
        center_separation: 3.0,
        seed: 2,
    }
}

fn config() -> TrainConfig {
    TrainConfig {
        num_epochs: 4,
        start_epoch: 3,
        alpha: 0.5,
        batch_size: 32,
        selector: SelectorConfig::new(40, 3),
        optim: OptimConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 5e-3,
            decay_factor: 10.0,
            decay_period: 3,
        },
        architecture: Architecture::OneHidden { hidden: 16 },
        seed: 9,
        restrict_to_verified: false,
        test_fraction: 0.2,
        voting: Default::default(),
    }
}

#[test]
fn gen_data_prints_the_realized_noise_rate() {
    let ws = Workspace::new();
    let clean = stdout(&ws.data(0.0));
    assert_eq!(field(&clean, "samples"), "300");
    assert_eq!(field(&clean, "noise_rate").parse::<f64>().unwrap(), 0.0);
    let noisy = stdout(&ws.data(0.3));
    let rate: f64 = field(&noisy, "noise_rate").parse().unwrap();
    assert!((rate - 0.3).abs() < 0.06, "{rate}");
}

#[test]
fn missing_config_field_exits_with_config_code() {
    let ws = Workspace::new();
    stdout(&ws.data(0.3));
    let mut train = serde_json::to_value(config()).unwrap();
    train.as_object_mut().unwrap().remove("num_epochs");
    let cfg = ws.write("train.json", &json!({"data": {"train": "data.smpd"}, "train": train}));
    let out = smp(&["train", "--config", s(&cfg), "--out", s(&ws.path("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_epochs"));
}

#[test]
fn out_of_range_value_exits_with_config_code() {
    let ws = Workspace::new();
    stdout(&ws.data(0.3));
    let mut cfg = config();
    cfg.alpha = 1.5;
    let out = smp(&[
        "train",
        "--config",
        s(&ws.train_config("train.json", &cfg)),
        "--out",
        s(&ws.path("run")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn unreadable_data_exits_with_data_code() {
    let ws = Workspace::new();
    std::fs::write(ws.path("data.smpd"), b"not a dataset").unwrap();
    let out = smp(&[
        "train",
        "--config",
        s(&ws.train_config("train.json", &config())),
        "--out",
        s(&ws.path("run")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_threads_is_rejected() {
    let out = smp(&["report", ".", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn warmup_only_run_has_no_correction() {
    let ws = Workspace::new();
    stdout(&ws.data(0.3));
    let mut cfg = config();
    cfg.start_epoch = cfg.num_epochs + 1;
    let run = ws.path("run");
    let line = stdout(&smp(&[
        "train",
        "--config",
        s(&ws.train_config("train.json", &cfg)),
        "--out",
        s(&run),
    ]));
    assert_eq!(field(&line, "corrected_final"), "absent");

    let text = ws.read("run/metrics.jsonl");
    assert_eq!(text.lines().count(), cfg.num_epochs);
    assert!(!text.contains("loss_corrected"));
    assert!(read_jsonl(&text).unwrap().iter().all(|r| r.phase == "warmup"));
    assert!(!run.join("corrected.csv").exists());

    let report = stdout(&smp(&["report", s(&run)]));
    assert!(report.contains("absent"));
}

#[test]
fn full_run_writes_every_artifact_and_reports() {
    let ws = Workspace::new();
    stdout(&ws.data(0.3));
    let run = ws.path("run");
    let line = stdout(&smp(&[
        "train",
        "--config",
        s(&ws.train_config("train.json", &config())),
        "--out",
        s(&run),
    ]));
    let test_acc: f64 = field(&line, "test_acc").parse().unwrap();
    assert!((0.0..=1.0).contains(&test_acc));

    let manifest: Value = serde_json::from_str(&ws.read("run/manifest.json")).unwrap();
    assert_eq!(manifest["command"], "train");
    for file in manifest["artifacts"].as_object().unwrap().values() {
        assert!(run.join(file.as_str().unwrap()).exists(), "{file}");
    }
    assert_eq!(ws.read("run/metrics.jsonl").lines().count(), 4);
    assert!(run.join("corrected.csv").exists());
    let report = stdout(&smp(&["report", s(&run)]));
    assert!(report.contains("correction"), "{report}");

    std::fs::remove_file(run.join("model.smpm")).unwrap();
    let out = smp(&["report", s(&run)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.smpm"));
}

#[test]
fn eval_scores_a_checkpoint() {
    let ws = Workspace::new();
    stdout(&ws.data(0.0));
    let run = ws.path("run");
    stdout(&smp(&[
        "train",
        "--config",
        s(&ws.train_config("train.json", &config())),
        "--out",
        s(&run),
    ]));
    let preds = ws.path("preds.csv");
    for checkpoint in ["model.smpm", "state.smps"] {
        let line = stdout(&smp(&[
            "eval",
            "--checkpoint",
            s(&run.join(checkpoint)),
            "--data",
            s(&ws.path("data.smpd")),
            "--out",
            s(&preds),
        ]));
        assert_eq!(field(&line, "samples"), "300");
        assert_eq!(field(&line, "labels"), "true");
        let acc: f64 = field(&line, "accuracy").parse().unwrap();
        assert!(acc > 1.0 / 3.0, "{acc}");
        assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 301);
    }
}

#[test]
fn resumed_run_continues_the_uninterrupted_one() {
    let ws = Workspace::new();
    stdout(&ws.data(0.3));
    let full = ws.path("full");
    stdout(&smp(&[
        "train",
        "--config",
        s(&ws.train_config("full.json", &config())),
        "--out",
        s(&full),
    ]));

    let mut first = config();
    first.num_epochs = 2;
    let part = ws.path("part");
    stdout(&smp(&[
        "train",
        "--config",
        s(&ws.train_config("part.json", &first)),
        "--out",
        s(&part),
    ]));
    let rest = ws.path("rest");
    stdout(&smp(&[
        "train",
        "--config",
        s(&ws.path("full.json")),
        "--out",
        s(&rest),
        "--resume",
        s(&part.join("state.smps")),
    ]));
    let full_lines: Vec<String> = ws.read("full/metrics.jsonl").lines().map(String::from).collect();
    let rest_lines: Vec<String> = ws.read("rest/metrics.jsonl").lines().map(String::from).collect();
    assert_eq!(rest_lines, full_lines[2..]);
    assert_eq!(
        std::fs::read(full.join("model.smpm")).unwrap(),
        std::fs::read(rest.join("model.smpm")).unwrap()
    );
}

#[test]
fn one_cell_sweep_and_report_agree() {
    let ws = Workspace::new();
    stdout(&ws.data(0.3));
    let mut base = config();
    base.num_epochs = 3;
    let sweep = SweepSpec {
        axis: Axis::PrototypeCount,
        values: vec![AxisValue::Number(2.0)],
        repeats: 1,
        base,
    };
    let cfg = ws.write(
        "sweep.json",
        &json!({"data": {"train": "data.smpd", "split_seed": 5}, "sweep": sweep}),
    );
    let out = ws.path("sweep");
    stdout(&smp(&["sweep", "--config", s(&cfg), "--out", s(&out)]));
    assert_eq!(ws.read("sweep/sweep.csv").lines().count(), 2);

    let json: Value = serde_json::from_str(&ws.read("sweep/sweep.json")).unwrap();
    let mean = json["aggregates"][0]["test_acc"]["mean"].as_f64().unwrap();
    let report = stdout(&smp(&["report", s(&out)]));
    assert!(report.contains(&format!("{:.2}", 100.0 * mean)), "{report}\n{json}");
}

#[test]
fn shipped_configs_describe_the_pinned_benchmark() {
    use smp_core::benchmark;
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let load =
        |name: &str| -> Value { serde_json::from_str(&std::fs::read_to_string(root.join(name)).unwrap()).unwrap() };
    let gen = load("gen-data.json");
    assert_eq!(
        gen["synthetic"],
        serde_json::to_value(benchmark::synthetic_spec()).unwrap()
    );
    assert_eq!(gen["noise"], serde_json::to_value(benchmark::noise_model()).unwrap());
    let train = load("train.json");
    assert_eq!(train["train"], serde_json::to_value(benchmark::train_config()).unwrap());
    assert_eq!(train["data"]["split_seed"], benchmark::SPLIT_SEED);
    let sweep: SweepSpec = serde_json::from_value(load("sweep.json")["sweep"].clone()).unwrap();
    assert_eq!(sweep.base, benchmark::train_config());
    sweep.validate().unwrap();
}
