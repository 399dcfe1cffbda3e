use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smp_core::correction::label_accuracy;
use smp_core::dataset::{generate_synthetic, inject_noise, write_csv, write_dataset, NoisyDataset};
use smp_core::evalreport::{
    aggregate, per_class_report, render_class_table, render_label_table, render_sweep_table, run_sweep, AxisValue,
    ClassRow, SweepCell, SweepResult,
};
use smp_core::exec::derive_seed;
use smp_core::model::{ClassifierModel, MODEL_MAGIC};
use smp_core::selftrain::{read_jsonl, write_jsonl, RunOutcome, TrainState, Trainer, STATE_MAGIC};
use smp_core::{Exec, Result as CoreResult};

use crate::config::{load, load_split, read_data, GenDataConfig, SweepFileConfig, TrainFileConfig};
use crate::failure::{CliResult, Code, Failure, OrCode};
use crate::manifest::RunManifest;

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";

pub fn gen_data(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load::<GenDataConfig>(config)?;
    let mut spec = cfg.value.clone();
    if let Some(s) = seed {
        spec.synthetic.seed = s;
        spec.noise.seed = derive_seed(s, "noise", 0);
    }
    let clean = generate_synthetic(&spec.synthetic)?;
    let mut ds = inject_noise(&clean, &spec.noise)?;
    if let Some(f) = spec.verified_fraction {
        ds.mark_verified(f, spec.noise.seed)?;
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).or_code(Code::Runtime)?;
    }
    let written = if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(&ds, out)
    } else {
        write_dataset(&ds, out)
    };
    written.or_code(Code::Runtime)?;
    let rate = ds.noise_rate()?;
    println!("samples={} classes={} noise_rate={rate}", ds.len(), ds.classes);
    Ok(())
}

/// Label accuracies of a finished run, measured on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epochs: usize,
    pub test_acc: f64,
    pub noisy_acc: Option<f64>,
    pub corrected_initial: Option<f64>,
    pub corrected_final: Option<f64>,
    pub classes: Vec<ClassRow>,
}

fn summarize(out: &RunOutcome, train: &NoisyDataset) -> CoreResult<RunSummary> {
    let acc = |labels: Option<&[usize]>| -> CoreResult<Option<f64>> {
        match labels {
            Some(l) if train.true_labels.is_some() => Ok(Some(label_accuracy(l, train)?.0)),
            _ => Ok(None),
        }
    };
    let classes = if train.true_labels.is_some() {
        per_class_report(out.first_corrected.as_ref(), out.final_corrected.as_ref(), train)?
    } else {
        Vec::new()
    };
    Ok(RunSummary {
        epochs: out.reports.len(),
        test_acc: out.reports.last().map_or(f64::NAN, |r| r.test_acc),
        noisy_acc: acc(Some(&train.noisy_labels))?,
        corrected_initial: acc(out.first_corrected.as_ref().map(|c| &c.labels[..]))?,
        corrected_final: acc(out.final_corrected.as_ref().map(|c| &c.labels[..]))?,
        classes,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .or_code(Code::Runtime)
        .map_err(|f| f.context(format!("creating {}", dir.display())))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> CoreResult<()>) -> CliResult<()> {
    let file = File::create(path)
        .or_code(Code::Runtime)
        .map_err(|e| e.context(format!("creating {}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w).or_code(Code::Runtime)?;
    w.flush().or_code(Code::Runtime)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".into(), |x| format!("{x:.4}"))
}

pub fn train(config: &Path, out_dir: &Path, seed: Option<u64>, resume_from: Option<&Path>) -> CliResult<()> {
    let loaded = load::<TrainFileConfig>(config)?;
    let mut cfg = loaded.value.train.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (train, test) = load_split(&loaded, &loaded.value.data, cfg.test_fraction)?;
    let exec = Exec::default();
    let trainer = match resume_from {
        Some(p) => {
            let state = TrainState::load(p)
                .or_code(Code::Data)
                .map_err(|f| f.context(format!("reading checkpoint {}", p.display())))?;
            Trainer::resume(&train, &test, state, cfg.clone(), exec)?
        }
        None => Trainer::new(
            &train,
            &test,
            cfg.init_model(train.dim, train.classes)?,
            cfg.clone(),
            exec,
        )?,
    };
    let outcome = trainer.run_to_end()?;

    create_dir(out_dir)?;
    let mut manifest = RunManifest::new("train", config, &loaded.digest, cfg.seed);
    let mut effective = loaded.value.clone();
    effective.train = cfg.clone();
    effective.data.train = loaded.resolve(&effective.data.train);
    effective.data.test = effective.data.test.as_ref().map(|p| loaded.resolve(p));
    write_with(&out_dir.join("config.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &effective)?;
        Ok(w.write_all(b"\n")?)
    })?;
    manifest.add("config", "config.json");
    write_with(&out_dir.join(METRICS_FILE), |w| write_jsonl(&outcome.reports, w))?;
    manifest.add("metrics", METRICS_FILE);
    let timings: Vec<_> = outcome
        .reports
        .iter()
        .map(|r| serde_json::json!({"epoch": r.epoch, "duration_ms": r.duration_ms}))
        .collect();
    write_with(&out_dir.join("timings.json"), |w| {
        Ok(serde_json::to_writer_pretty(w, &timings)?)
    })?;
    manifest.add("timings", "timings.json");
    outcome.model.save(out_dir.join("model.smpm")).or_code(Code::Runtime)?;
    manifest.add("model", "model.smpm");
    outcome.state.save(out_dir.join("state.smps")).or_code(Code::Runtime)?;
    manifest.add("state", "state.smps");
    if let Some(c) = &outcome.first_corrected {
        c.save_csv(&train, out_dir.join("corrected_initial.csv"))
            .or_code(Code::Runtime)?;
        manifest.add("corrected_initial", "corrected_initial.csv");
    }
    if let Some(c) = &outcome.final_corrected {
        c.save_csv(&train, out_dir.join("corrected.csv"))
            .or_code(Code::Runtime)?;
        manifest.add("corrected", "corrected.csv");
    }
    if let Some(p) = &outcome.final_prototypes {
        p.save_csv(out_dir.join("prototypes.csv")).or_code(Code::Runtime)?;
        manifest.add("prototypes", "prototypes.csv");
    }
    let summary = summarize(&outcome, &train)?;
    write_with(&out_dir.join(SUMMARY_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        Ok(w.write_all(b"\n")?)
    })?;
    manifest.add("summary", SUMMARY_FILE);
    manifest.write(out_dir)?;
    println!(
        "epochs={} test_acc={:.4} noisy_acc={} corrected_initial={} corrected_final={}",
        summary.epochs,
        summary.test_acc,
        fmt_opt(summary.noisy_acc),
        fmt_opt(summary.corrected_initial),
        fmt_opt(summary.corrected_final)
    );
    Ok(())
}

pub fn sweep(config: &Path, out_dir: &Path, seed: Option<u64>) -> CliResult<()> {
    let loaded = load::<SweepFileConfig>(config)?;
    let mut spec = loaded.value.sweep.clone();
    if let Some(s) = seed {
        spec.base.seed = s;
    }
    spec.validate()?;
    let (train, test) = load_split(&loaded, &loaded.value.data, spec.base.test_fraction)?;
    let result = run_sweep(&spec, &train, &test)?;
    for c in result.cells.iter().filter(|c| c.error.is_some()) {
        log::warn!(
            "cell {}={} seed {} failed: {}",
            spec.axis.name(),
            c.value,
            c.seed,
            c.error.as_deref().unwrap_or("")
        );
    }
    create_dir(out_dir)?;
    let mut manifest = RunManifest::new("sweep", config, &loaded.digest, spec.base.seed);
    write_with(&out_dir.join(SWEEP_CSV), |w| Ok(result.write_csv(w)?))?;
    manifest.add("sweep_csv", SWEEP_CSV);
    let json = result.aggregate_json()?;
    std::fs::write(out_dir.join(SWEEP_JSON), json + "\n").or_code(Code::Runtime)?;
    manifest.add("sweep_json", SWEEP_JSON);
    manifest.write(out_dir)?;
    print!("{}", render_sweep_table(&result));
    Ok(())
}

fn load_model(path: &Path) -> CliResult<ClassifierModel> {
    let bytes = std::fs::read(path)
        .or_code(Code::Data)
        .map_err(|f| f.context(format!("reading checkpoint {}", path.display())))?;
    let model = if bytes.starts_with(STATE_MAGIC) {
        TrainState::from_bytes(&bytes).map(|s| s.model)
    } else if bytes.starts_with(MODEL_MAGIC) {
        ClassifierModel::from_bytes(&bytes)
    } else {
        return Err(Failure::data(format!(
            "{} is not a model or state checkpoint",
            path.display()
        )));
    };
    model
        .or_code(Code::Data)
        .map_err(|f| f.context(format!("reading checkpoint {}", path.display())))
}

/// Accuracy of a checkpoint on a dataset, against true labels when present.
pub fn eval(checkpoint: &Path, data: &Path, out: Option<&Path>) -> CliResult<()> {
    let model = load_model(checkpoint)?;
    let ds = read_data(data)?;
    let exec = Exec::default();
    let predicted = model.predict(&ds, exec)?;
    let acc = model.accuracy(&ds, exec)?;
    if let Some(p) = out {
        write_with(p, |w| {
            writeln!(w, "index,predicted")?;
            for (i, y) in predicted.iter().enumerate() {
                writeln!(w, "{i},{y}")?;
            }
            Ok(())
        })?;
    }
    let against = if ds.true_labels.is_some() { "true" } else { "noisy" };
    println!("samples={} accuracy={acc:.4} labels={against}", ds.len());
    Ok(())
}

/// Parses the sweep CSV back into cells; repeats are numbered by order of
/// appearance within each value.
pub fn read_sweep_csv(text: &str) -> CliResult<SweepResult> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Failure::data("empty sweep CSV"))?;
    if header != "axis,value,seed,test_acc,corr_acc_initial,corr_acc_final" {
        return Err(Failure::data(format!("unexpected sweep CSV header {header:?}")));
    }
    let mut axis = None;
    let mut cells: Vec<SweepCell> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let bad = || Failure::data(format!("sweep CSV line {}: {line:?}", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        let a = serde_json::from_value(serde_json::Value::String(f[0].into())).map_err(|_| bad())?;
        if *axis.get_or_insert(a) != a {
            return Err(bad());
        }
        let value = match f[1].parse::<f64>() {
            Ok(v) => AxisValue::Number(v),
            Err(_) => {
                AxisValue::Selector(serde_json::from_value(serde_json::Value::String(f[1].into())).map_err(|_| bad())?)
            }
        };
        let metric = |s: &str| -> CliResult<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        let repeat = cells.iter().filter(|c| c.value == value).count();
        cells.push(SweepCell {
            value,
            repeat,
            seed: f[2].parse().map_err(|_| bad())?,
            test_acc: metric(f[3])?,
            corr_acc_initial: metric(f[4])?,
            corr_acc_final: metric(f[5])?,
            error: None,
        });
    }
    let axis = axis.ok_or_else(|| Failure::data("sweep CSV has no rows"))?;
    Ok(SweepResult {
        axis,
        aggregates: aggregate(&cells),
        cells,
    })
}

pub fn report(dir: &Path) -> CliResult<()> {
    let manifest = RunManifest::read(dir)?;
    manifest.check(dir)?;
    let path = |key: &str| -> CliResult<PathBuf> {
        manifest
            .artifacts
            .get(key)
            .map(|f| dir.join(f))
            .ok_or_else(|| Failure::data(format!("manifest lists no {key} artifact")))
    };
    let read = |p: &Path| {
        std::fs::read_to_string(p)
            .or_code(Code::Data)
            .map_err(|f| f.context(format!("reading {}", p.display())))
    };
    match manifest.command.as_str() {
        "train" => {
            let reports = read_jsonl(&read(&path("metrics")?)?).or_code(Code::Data)?;
            let summary: RunSummary = serde_json::from_str(&read(&path("summary")?)?).or_code(Code::Data)?;
            println!("epoch  phase       test %   corrected %");
            for r in &reports {
                println!(
                    "{:>5}  {:<10} {:>7.2}   {:>11}",
                    r.epoch,
                    r.phase,
                    100.0 * r.test_acc,
                    r.corrected_acc
                        .map_or_else(|| "absent".into(), |a| format!("{:.2}", 100.0 * a))
                );
            }
            println!();
            print!(
                "{}",
                render_label_table(summary.noisy_acc, summary.corrected_initial, summary.corrected_final)
            );
            if !summary.classes.is_empty() {
                println!();
                print!("{}", render_class_table(&summary.classes));
            }
            Ok(())
        }
        "sweep" => {
            let result = read_sweep_csv(&read(&path("sweep_csv")?)?)?;
            print!("{}", render_sweep_table(&result));
            Ok(())
        }
        other => Err(Failure::data(format!("unknown run kind {other:?} in manifest"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smp_core::evalreport::Axis;

    #[test]
    fn sweep_csv_round_trip_reproduces_aggregates() {
        let cells: Vec<SweepCell> = [(1.0, 0.5), (1.0, 0.7), (4.0, 0.9)]
            .iter()
            .enumerate()
            .map(|(i, &(v, acc))| SweepCell {
                value: AxisValue::Number(v),
                repeat: i % 2,
                seed: i as u64,
                test_acc: Some(acc / 3.0),
                corr_acc_initial: None,
                corr_acc_final: Some(acc),
                error: None,
            })
            .collect();
        let original = SweepResult {
            axis: Axis::PrototypeCount,
            aggregates: aggregate(&cells),
            cells,
        };
        let mut csv = Vec::new();
        original.write_csv(&mut csv).unwrap();
        let parsed = read_sweep_csv(std::str::from_utf8(&csv).unwrap()).unwrap();
        assert_eq!(parsed.aggregates, original.aggregates);
        assert_eq!(parsed.cells.len(), 3);
    }

    #[test]
    fn selector_values_parse() {
        let csv = "axis,value,seed,test_acc,corr_acc_initial,corr_acc_final\n\
                   selector,kmeans_plus_plus,3,0.5,,\n";
        let r = read_sweep_csv(csv).unwrap();
        assert_eq!(r.axis, Axis::Selector);
        assert!(matches!(r.cells[0].value, AxisValue::Selector(_)));
        assert_eq!(r.cells[0].corr_acc_final, None);
    }

    #[test]
    fn malformed_sweep_csv_is_data_error() {
        assert_eq!(read_sweep_csv("").unwrap_err().code, Code::Data);
        let bad = "axis,value,seed,test_acc,corr_acc_initial,corr_acc_final\nalpha,0.5,x,,,\n";
        assert_eq!(read_sweep_csv(bad).unwrap_err().code, Code::Data);
    }
}
