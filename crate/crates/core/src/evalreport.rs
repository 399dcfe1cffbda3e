//! Ablation sweeps over one configuration axis and label-accuracy tables.

use std::fmt::{self, Write as _};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::correction::{label_accuracy, CorrectedLabels};
use crate::dataset::NoisyDataset;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Exec};
use crate::prototypes::SelectorKind;
use crate::selftrain::{run_with, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PrototypeCount,
    Alpha,
    SampleCount,
    Selector,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::PrototypeCount => "prototype_count",
            Axis::Alpha => "alpha",
            Axis::SampleCount => "sample_count",
            Axis::Selector => "selector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Selector(SelectorKind),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Number(v) => write!(f, "{v}"),
            AxisValue::Selector(s) => f.write_str(s.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<AxisValue>,
    pub repeats: usize,
    pub base: TrainConfig,
}

fn count_value(v: &AxisValue, field: &'static str) -> Result<usize> {
    match v {
        AxisValue::Number(x) if *x >= 1.0 && x.fract() == 0.0 && x.is_finite() => Ok(*x as usize),
        other => Err(Error::config(field, format!("{other} is not a positive integer"))),
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "must not be empty"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats", "must be at least 1"));
        }
        for v in &self.values {
            self.apply(v, 0)?;
        }
        Ok(())
    }

    /// Configuration of the cell `(value, repeat)`. The seed depends only on
    /// the repeat, so every value sees the same seeds.
    pub fn apply(&self, value: &AxisValue, repeat: usize) -> Result<TrainConfig> {
        let mut cfg = self.base.clone();
        match self.axis {
            Axis::PrototypeCount => cfg.selector.p = count_value(value, "values")?,
            Axis::SampleCount => cfg.selector.m = count_value(value, "values")?,
            Axis::Alpha => match value {
                AxisValue::Number(a) => cfg.alpha = *a,
                other => return Err(Error::config("values", format!("{other} is not a weight"))),
            },
            Axis::Selector => match value {
                AxisValue::Selector(s) => cfg.selector.selector = *s,
                other => return Err(Error::config("values", format!("{other} is not a selector"))),
            },
        }
        cfg.seed = derive_seed(self.base.seed, "repeat", repeat as u64);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: AxisValue,
    pub repeat: usize,
    pub seed: u64,
    pub test_acc: Option<f64>,
    pub corr_acc_initial: Option<f64>,
    pub corr_acc_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean and population standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Option<Moments> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Moments {
            mean,
            std: var.sqrt(),
            count: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub value: AxisValue,
    pub failed: usize,
    pub test_acc: Option<Moments>,
    pub corr_acc_initial: Option<Moments>,
    pub corr_acc_final: Option<Moments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub cells: Vec<SweepCell>,
    pub aggregates: Vec<SweepAggregate>,
}

/// Aggregates per value, in first-appearance order of the values; cells of a
/// value are taken in repeat order.
pub fn aggregate(cells: &[SweepCell]) -> Vec<SweepAggregate> {
    let mut values: Vec<AxisValue> = Vec::new();
    for c in cells {
        if !values.contains(&c.value) {
            values.push(c.value);
        }
    }
    values
        .into_iter()
        .map(|value| {
            let mut mine: Vec<&SweepCell> = cells.iter().filter(|c| c.value == value).collect();
            mine.sort_by_key(|c| c.repeat);
            let pick = |f: fn(&SweepCell) -> Option<f64>| -> Vec<f64> { mine.iter().filter_map(|c| f(c)).collect() };
            SweepAggregate {
                value,
                failed: mine.iter().filter(|c| c.error.is_some()).count(),
                test_acc: Moments::of(&pick(|c| c.test_acc)),
                corr_acc_initial: Moments::of(&pick(|c| c.corr_acc_initial)),
                corr_acc_final: Moments::of(&pick(|c| c.corr_acc_final)),
            }
        })
        .collect()
}

pub fn run_sweep(spec: &SweepSpec, train: &NoisyDataset, test: &NoisyDataset) -> Result<SweepResult> {
    run_sweep_with(spec, train, test, Exec::default())
}

/// Runs every `(value, repeat)` cell as an independent training run. A
/// failing cell is recorded with its error and the sweep carries on.
pub fn run_sweep_with(spec: &SweepSpec, train: &NoisyDataset, test: &NoisyDataset, exec: Exec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(AxisValue, usize)> = spec
        .values
        .iter()
        .flat_map(|v| (0..spec.repeats).map(move |r| (*v, r)))
        .collect();
    let cells = exec.map(jobs.len(), |j| {
        let (value, repeat) = jobs[j];
        let cfg = spec.apply(&value, repeat).expect("validated above");
        let outcome = cfg
            .init_model(train.dim, train.classes)
            .and_then(|model| run_with(train, test, model, &cfg, exec));
        match outcome {
            Ok(out) => {
                let acc = |c: &Option<CorrectedLabels>| {
                    c.as_ref()
                        .filter(|_| train.true_labels.is_some())
                        .map(|c| label_accuracy(&c.labels, train).map(|a| a.0))
                        .transpose()
                        .ok()
                        .flatten()
                };
                SweepCell {
                    value,
                    repeat,
                    seed: cfg.seed,
                    test_acc: out.reports.last().map(|r| r.test_acc),
                    corr_acc_initial: acc(&out.first_corrected),
                    corr_acc_final: acc(&out.final_corrected),
                    error: None,
                }
            }
            Err(e) => SweepCell {
                value,
                repeat,
                seed: cfg.seed,
                test_acc: None,
                corr_acc_initial: None,
                corr_acc_final: None,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(SweepResult {
        axis: spec.axis,
        aggregates: aggregate(&cells),
        cells,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// CSV `axis,value,seed,test_acc,corr_acc_initial,corr_acc_final`; failed
    /// or absent metrics are empty fields.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "axis,value,seed,test_acc,corr_acc_initial,corr_acc_final")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.axis.name(),
                c.value,
                c.seed,
                opt(c.test_acc),
                opt(c.corr_acc_initial),
                opt(c.corr_acc_final)
            )?;
        }
        Ok(())
    }

    pub fn aggregate_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            axis: Axis,
            aggregates: &'a [SweepAggregate],
            errors: Vec<&'a str>,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            axis: self.axis,
            aggregates: &self.aggregates,
            errors: self.cells.iter().filter_map(|c| c.error.as_deref()).collect(),
        })?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: usize,
    pub noisy_acc: Option<f64>,
    pub initial_acc: Option<f64>,
    pub final_acc: Option<f64>,
}

/// Per true class: accuracy of the noisy labels and of the first and last
/// corrected labels.
pub fn per_class_report(
    initial: Option<&CorrectedLabels>,
    last: Option<&CorrectedLabels>,
    ds: &NoisyDataset,
) -> Result<Vec<ClassRow>> {
    let (_, noisy) = label_accuracy(&ds.noisy_labels, ds)?;
    let per = |c: Option<&CorrectedLabels>| -> Result<Vec<Option<f64>>> {
        match c {
            Some(c) => Ok(label_accuracy(&c.labels, ds)?.1),
            None => Ok(vec![None; ds.classes]),
        }
    };
    let initial = per(initial)?;
    let last = per(last)?;
    Ok((0..ds.classes)
        .map(|class| ClassRow {
            class,
            noisy_acc: noisy[class],
            initial_acc: initial[class],
            final_acc: last[class],
        })
        .collect())
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// Overall label accuracy before correction, after the first correction and
/// at the end.
pub fn render_label_table(noisy: Option<f64>, initial: Option<f64>, last: Option<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<18} {:>10}", "labels", "accuracy %");
    for (name, v) in [
        ("original", noisy),
        ("corrected initial", initial),
        ("corrected final", last),
    ] {
        let _ = writeln!(s, "{name:<18} {:>10}", pct(v));
    }
    s
}

pub fn render_class_table(rows: &[ClassRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>5} {:>9} {:>9} {:>9}", "class", "noisy %", "initial %", "final %");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>5} {:>9} {:>9} {:>9}",
            r.class,
            pct(r.noisy_acc),
            pct(r.initial_acc),
            pct(r.final_acc)
        );
    }
    s
}

pub fn render_sweep_table(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>6} {:>16} {:>16} {:>16}",
        result.axis.name(),
        "runs",
        "test %",
        "corr init %",
        "corr final %"
    );
    let fmt = |m: Option<Moments>| {
        m.map_or_else(
            || "absent".into(),
            |m| format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std),
        )
    };
    for a in &result.aggregates {
        let runs = a.test_acc.map_or(0, |m| m.count);
        let _ = writeln!(
            s,
            "{:<24} {:>6} {:>16} {:>16} {:>16}",
            a.value.to_string(),
            runs,
            fmt(a.test_acc),
            fmt(a.corr_acc_initial),
            fmt(a.corr_acc_final)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(value: f64, repeat: usize, acc: f64) -> SweepCell {
        SweepCell {
            value: AxisValue::Number(value),
            repeat,
            seed: repeat as u64,
            test_acc: Some(acc),
            corr_acc_initial: None,
            corr_acc_final: Some(acc / 2.0),
            error: None,
        }
    }

    #[test]
    fn population_std() {
        let m = Moments::of(&[1.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert!(Moments::of(&[]).is_none());
    }

    #[test]
    fn aggregate_groups_in_value_order() {
        let cells = vec![cell(4.0, 1, 0.8), cell(1.0, 0, 0.5), cell(4.0, 0, 0.6)];
        let agg = aggregate(&cells);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].value, AxisValue::Number(4.0));
        assert!((agg[0].test_acc.unwrap().mean - 0.7).abs() < 1e-15);
        assert!(agg[0].corr_acc_initial.is_none());
    }

    #[test]
    fn value_parsing() {
        let v: Vec<AxisValue> = serde_json::from_str(r#"[1, 0.5, "kmeans_plus_plus"]"#).unwrap();
        assert_eq!(v[0], AxisValue::Number(1.0));
        assert_eq!(v[2], AxisValue::Selector(SelectorKind::KmeansPlusPlus));
        assert_eq!(v[1].to_string(), "0.5");
        assert_eq!(v[0].to_string(), "1");
    }

    #[test]
    fn tables_mark_absent() {
        let t = render_label_table(Some(0.65), None, None);
        assert!(t.contains("65.00"));
        assert_eq!(t.matches("absent").count(), 2);
    }
}
