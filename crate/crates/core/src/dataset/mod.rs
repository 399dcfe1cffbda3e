//! Labeled feature datasets: synthetic generation, label corruption,
//! per-class sampling and persistence.

pub(crate) mod io;

pub use io::{read_csv, read_dataset, write_csv, write_dataset, MAGIC, VERSION};

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::rng_for;

/// Feature matrix with observed (noisy) labels and optional side information.
///
/// Features are stored row-major as `f32`, which is also the on-disk
/// precision, so persistence is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    pub classes: usize,
    pub dim: usize,
    pub features: Vec<f32>,
    pub noisy_labels: Vec<usize>,
    pub true_labels: Option<Vec<usize>>,
    /// `verified[i]` means the noisy label of sample `i` was confirmed correct.
    pub verified: Option<Vec<bool>>,
}

impl NoisyDataset {
    pub fn new(
        classes: usize,
        dim: usize,
        features: Vec<f32>,
        noisy_labels: Vec<usize>,
        true_labels: Option<Vec<usize>>,
        verified: Option<Vec<bool>>,
    ) -> Result<Self> {
        let ds = NoisyDataset {
            classes,
            dim,
            features,
            noisy_labels,
            true_labels,
            verified,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.noisy_labels.len();
        if self.classes == 0 {
            return Err(Error::config("classes", "must be at least 1"));
        }
        if self.features.len() != n * self.dim {
            return Err(Error::Shape(format!(
                "{} feature values for {} samples of dimension {}",
                self.features.len(),
                n,
                self.dim
            )));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature of sample {}", pos / self.dim.max(1))));
        }
        check_labels(&self.noisy_labels, self.classes)?;
        if let Some(t) = &self.true_labels {
            if t.len() != n {
                return Err(Error::Shape(format!("{} true labels for {} samples", t.len(), n)));
            }
            check_labels(t, self.classes)?;
        }
        if let Some(v) = &self.verified {
            if v.len() != n {
                return Err(Error::Shape(format!("{} verified flags for {} samples", v.len(), n)));
            }
            if let Some(t) = &self.true_labels {
                if let Some(i) = (0..n).find(|&i| v[i] && self.noisy_labels[i] != t[i]) {
                    return Err(Error::Format(format!(
                        "sample {i} is verified but its noisy label differs from the true label"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.noisy_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy_labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Indices whose noisy label is `class`, ascending.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.noisy_labels[i] == class).collect()
    }

    /// Fraction of samples whose noisy label differs from the true label.
    pub fn noise_rate(&self) -> Result<f64> {
        let t = self.true_labels.as_ref().ok_or(Error::MissingTrueLabels)?;
        if t.is_empty() {
            return Ok(0.0);
        }
        let flipped = t.iter().zip(&self.noisy_labels).filter(|(a, b)| a != b).count();
        Ok(flipped as f64 / t.len() as f64)
    }

    /// Labels used for evaluation: true labels when known, noisy otherwise.
    pub fn reference_labels(&self) -> &[usize] {
        self.true_labels.as_deref().unwrap_or(&self.noisy_labels)
    }

    pub fn subset(&self, indices: &[usize]) -> NoisyDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        NoisyDataset {
            classes: self.classes,
            dim: self.dim,
            features,
            noisy_labels: indices.iter().map(|&i| self.noisy_labels[i]).collect(),
            true_labels: self
                .true_labels
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            verified: self.verified.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Random train/test partition. The test part holds
    /// `round(test_fraction * N)` samples.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(NoisyDataset, NoisyDataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::config("test_fraction", "must lie in [0, 1)"));
        }
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.shuffle(&mut rng_for(seed, "split", 0));
        let n_test = (test_fraction * self.len() as f64).round() as usize;
        let (test, train) = perm.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Marks a random `fraction` of the correctly-labeled samples as verified.
    pub fn mark_verified(&mut self, fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::config("verified_fraction", "must lie in [0, 1]"));
        }
        let t = self.true_labels.as_ref().ok_or(Error::MissingTrueLabels)?;
        let mut rng = rng_for(seed, "verify", 0);
        let verified = (0..self.len())
            .map(|i| {
                let draw: f64 = rng.random();
                self.noisy_labels[i] == t[i] && draw < fraction
            })
            .collect();
        self.verified = Some(verified);
        Ok(())
    }
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().position(|&l| l >= classes) {
        Some(index) => Err(Error::LabelOutOfRange {
            index,
            label: labels[index] as i64,
            classes,
        }),
        None => Ok(()),
    }
}

/// Gaussian mixture with several subclusters per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub subclusters_per_class: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub subcluster_spread: f64,
    pub center_separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::config("classes", "must be at least 1"));
        }
        if self.subclusters_per_class == 0 {
            return Err(Error::config("subclusters_per_class", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        if self.samples_per_class == 0 {
            return Err(Error::config("samples_per_class", "must be at least 1"));
        }
        if !(self.subcluster_spread > 0.0 && self.subcluster_spread.is_finite()) {
            return Err(Error::config("subcluster_spread", "must be positive"));
        }
        if !(self.center_separation > 0.0 && self.center_separation.is_finite()) {
            return Err(Error::config("center_separation", "must be positive"));
        }
        Ok(())
    }
}

/// Subcluster centers, `classes * subclusters_per_class` rows; center
/// `c * subclusters_per_class + s` belongs to class `c`.
///
/// Centers sit on a sphere of radius `center_separation`. When they fit, the
/// directions are a random orthonormal set, so every pair is
/// `center_separation·√2` apart and all cross-center cosines are zero.
/// Otherwise directions are rejection-sampled so every pair is at least
/// `center_separation` apart.
pub fn subcluster_centers(spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let total = spec.classes * spec.subclusters_per_class;
    let mut rng = rng_for(spec.seed, "centers", 0);
    if total <= spec.dim {
        return Ok(orthonormal_directions(total, spec.dim, &mut rng)
            .into_iter()
            .map(|d| d.into_iter().map(|v| v * spec.center_separation).collect())
            .collect());
    }
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(total);
    const MAX_ATTEMPTS: usize = 10_000;
    while centers.len() < total {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let mut dir: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            dir.iter_mut().for_each(|v| *v *= spec.center_separation / norm);
            let far_enough = centers.iter().all(|c| {
                let d2: f64 = c.iter().zip(&dir).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= spec.center_separation
            });
            if far_enough {
                centers.push(dir);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::config(
                "center_separation",
                format!("could not place {total} centers in dimension {}", spec.dim),
            ));
        }
    }
    Ok(centers)
}

/// Gram-Schmidt over Gaussian draws; redraws any vector left near-degenerate.
fn orthonormal_directions(count: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Draws a clean dataset. Samples of each class cycle round-robin over the
/// class's subclusters; `noisy_labels` start equal to `true_labels`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<NoisyDataset> {
    let centers = subcluster_centers(spec)?;
    let n = spec.classes * spec.samples_per_class;
    let mut rng = rng_for(spec.seed, "samples", 0);
    let mut features = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.classes {
        for j in 0..spec.samples_per_class {
            let center = &centers[c * spec.subclusters_per_class + j % spec.subclusters_per_class];
            for &mu in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push((mu + spec.subcluster_spread * z) as f32);
            }
            labels.push(c);
        }
    }
    NoisyDataset::new(spec.classes, spec.dim, features, labels.clone(), Some(labels), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseKind {
    /// Flip with probability `rate` to a uniformly chosen wrong class.
    Uniform { rate: f64 },
    /// Row `t` of the matrix is the distribution of the observed label given
    /// true label `t`.
    Transition { matrix: Vec<Vec<f64>> },
    /// Samples closer to a wrong class centroid flip more often, towards that
    /// class. The mean flip probability is `rate` before clipping at 1.
    FeatureDependent { rate: f64 },
}

/// Serialized flat: `{"kind": "uniform", "rate": 0.35, "seed": 101}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn uniform(rate: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::Uniform { rate },
            seed,
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        match &self.kind {
            NoiseKind::Uniform { rate } | NoiseKind::FeatureDependent { rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(Error::config("rate", "must lie in [0, 1]"));
                }
            }
            NoiseKind::Transition { matrix } => {
                if matrix.len() != classes || matrix.iter().any(|r| r.len() != classes) {
                    return Err(Error::config("matrix", format!("must be {classes}x{classes}")));
                }
                for (t, row) in matrix.iter().enumerate() {
                    if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                        return Err(Error::config("matrix", format!("row {t} has a negative entry")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::config("matrix", format!("row {t} sums to {sum}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Returns a copy of `ds` whose noisy labels are drawn from its true labels
/// under `model`. Features and true labels are untouched; any verified mask is
/// dropped since it no longer describes the new labels.
pub fn inject_noise(ds: &NoisyDataset, model: &NoiseModel) -> Result<NoisyDataset> {
    let truth = ds.true_labels.as_ref().ok_or(Error::MissingTrueLabels)?;
    model.validate(ds.classes)?;
    let k = ds.classes;
    let mut rng = rng_for(model.seed, "noise", 0);
    let noisy: Vec<usize> = match &model.kind {
        NoiseKind::Uniform { rate } => truth
            .iter()
            .map(|&t| {
                let u: f64 = rng.random();
                if k > 1 && u < *rate {
                    let d = rng.random_range(0..k - 1);
                    if d >= t {
                        d + 1
                    } else {
                        d
                    }
                } else {
                    t
                }
            })
            .collect(),
        NoiseKind::Transition { matrix } => truth
            .iter()
            .map(|&t| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, &p) in matrix[t].iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return c;
                    }
                }
                // rounding left a sliver above the last cumulative sum
                matrix[t].iter().rposition(|&p| p > 0.0).unwrap_or(t)
            })
            .collect(),
        NoiseKind::FeatureDependent { rate } => feature_dependent_flips(ds, truth, *rate, &mut rng),
    };
    let mut out = ds.clone();
    out.noisy_labels = noisy;
    out.verified = None;
    Ok(out)
}

fn feature_dependent_flips(ds: &NoisyDataset, truth: &[usize], rate: f64, rng: &mut impl Rng) -> Vec<usize> {
    let (k, d, n) = (ds.classes, ds.dim, ds.len());
    if k < 2 || n == 0 {
        return truth.to_vec();
    }
    let mut centroids = vec![vec![0.0f64; d]; k];
    let mut counts = vec![0usize; k];
    for i in 0..n {
        counts[truth[i]] += 1;
        for (acc, &v) in centroids[truth[i]].iter_mut().zip(ds.row(i)) {
            *acc += f64::from(v);
        }
    }
    for (c, cnt) in centroids.iter_mut().zip(&counts) {
        if *cnt > 0 {
            c.iter_mut().for_each(|v| *v /= *cnt as f64);
        }
    }
    let dist = |x: &[f32], c: &[f64]| -> f64 {
        x.iter()
            .zip(c)
            .map(|(&a, b)| (f64::from(a) - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    // (proximity ratio, nearest wrong class) per sample
    let prox: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let x = ds.row(i);
            let own = dist(x, &centroids[truth[i]]);
            let (wrong, dw) = (0..k)
                .filter(|&c| c != truth[i] && counts[c] > 0)
                .map(|c| (c, dist(x, &centroids[c])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((truth[i], f64::INFINITY));
            (own / dw.max(1e-12), wrong)
        })
        .collect();
    let mean = prox.iter().map(|p| p.0).sum::<f64>() / n as f64;
    prox.iter()
        .zip(truth)
        .map(|(&(r, wrong), &t)| {
            let p = if mean > 0.0 { (rate * r / mean).min(1.0) } else { rate };
            let u: f64 = rng.random();
            if wrong != t && u < p {
                wrong
            } else {
                t
            }
        })
        .collect()
}

/// Up to `m` distinct indices with noisy label `class`, uniform without
/// replacement, returned ascending. `m` at or above the class size returns
/// the whole class.
pub fn sample_per_class(ds: &NoisyDataset, m: usize, class: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::config("m", "must be at least 1"));
    }
    let members = ds.class_indices(class);
    if members.is_empty() {
        return Err(Error::EmptyClass(class));
    }
    Ok(sample_members(&members, m, seed, class))
}

/// Uniform draw of `m` members without replacement, ascending. The stream
/// depends only on `seed` and `class`.
pub(crate) fn sample_members(members: &[usize], m: usize, seed: u64, class: usize) -> Vec<usize> {
    if m >= members.len() {
        return members.to_vec();
    }
    let mut rng = rng_for(seed, "class-sample", class as u64);
    let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), m)
        .into_iter()
        .map(|j| members[j])
        .collect();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_model_json_is_flat() {
        let m = NoiseModel::uniform(0.25, 4);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"kind":"uniform","rate":0.25,"seed":4}"#);
        assert_eq!(serde_json::from_str::<NoiseModel>(&text).unwrap(), m);
        let t: NoiseModel =
            serde_json::from_str(r#"{"kind":"transition","matrix":[[1.0,0.0],[0.5,0.5]],"seed":1}"#).unwrap();
        assert!(matches!(t.kind, NoiseKind::Transition { .. }));
    }

    fn spec(classes: usize, sub: usize, per_class: usize) -> SyntheticSpec {
        SyntheticSpec {
            classes,
            subclusters_per_class: sub,
            dim: 8,
            samples_per_class: per_class,
            subcluster_spread: 0.3,
            center_separation: 4.0,
            seed: 11,
        }
    }

    #[test]
    fn generate_counts_and_balance() {
        let ds = generate_synthetic(&spec(2, 1, 10)).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.class_indices(0).len(), 10);
        assert_eq!(ds.class_indices(1).len(), 10);
        assert_eq!(ds.true_labels.as_deref(), Some(&ds.noisy_labels[..]));
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_synthetic(&spec(3, 2, 50)).unwrap();
        let b = generate_synthetic(&spec(3, 2, 50)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(3, 2, 50);
        other.seed += 1;
        assert_ne!(a.features, generate_synthetic(&other).unwrap().features);
    }

    #[test]
    fn centers_respect_separation() {
        let s = spec(4, 2, 1);
        let c = subcluster_centers(&s).unwrap();
        for i in 0..c.len() {
            for j in 0..i {
                let d: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(d >= s.center_separation);
            }
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = spec(2, 1, 10);
        s.subcluster_spread = 0.0;
        assert!(matches!(
            generate_synthetic(&s),
            Err(Error::InvalidConfig {
                field: "subcluster_spread",
                ..
            })
        ));
        let mut s = spec(2, 1, 10);
        s.classes = 0;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn zero_rate_and_identity_leave_labels() {
        let ds = generate_synthetic(&spec(3, 1, 40)).unwrap();
        let out = inject_noise(&ds, &NoiseModel::uniform(0.0, 1)).unwrap();
        assert_eq!(out.noisy_labels, ds.noisy_labels);
        let eye = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let out = inject_noise(
            &ds,
            &NoiseModel {
                kind: NoiseKind::Transition { matrix: eye },
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(out.noisy_labels, ds.noisy_labels);
    }

    #[test]
    fn uniform_rate_close_to_target() {
        let ds = generate_synthetic(&spec(4, 1, 1000)).unwrap();
        let out = inject_noise(&ds, &NoiseModel::uniform(0.35, 3)).unwrap();
        let rate = out.noise_rate().unwrap();
        assert!((rate - 0.35).abs() <= 0.02, "rate {rate}");
        assert_eq!(out.features, ds.features);
        assert_eq!(out.true_labels, ds.true_labels);
    }

    #[test]
    fn transition_rows_must_be_stochastic() {
        let ds = generate_synthetic(&spec(2, 1, 5)).unwrap();
        let bad = NoiseModel {
            kind: NoiseKind::Transition {
                matrix: vec![vec![0.5, 0.4], vec![0.0, 1.0]],
            },
            seed: 0,
        };
        assert!(matches!(
            inject_noise(&ds, &bad),
            Err(Error::InvalidConfig { field: "matrix", .. })
        ));
        let neg = NoiseModel {
            kind: NoiseKind::Transition {
                matrix: vec![vec![1.5, -0.5], vec![0.0, 1.0]],
            },
            seed: 0,
        };
        assert!(inject_noise(&ds, &neg).is_err());
    }

    #[test]
    fn noise_requires_true_labels() {
        let mut ds = generate_synthetic(&spec(2, 1, 5)).unwrap();
        ds.true_labels = None;
        assert!(matches!(
            inject_noise(&ds, &NoiseModel::uniform(0.1, 0)),
            Err(Error::MissingTrueLabels)
        ));
    }

    #[test]
    fn feature_dependent_flips_toward_nearest_wrong_class() {
        let ds = generate_synthetic(&spec(3, 1, 400)).unwrap();
        let model = NoiseModel {
            kind: NoiseKind::FeatureDependent { rate: 0.3 },
            seed: 9,
        };
        let out = inject_noise(&ds, &model).unwrap();
        let rate = out.noise_rate().unwrap();
        assert!(rate > 0.2 && rate < 0.4, "rate {rate}");
    }

    #[test]
    fn sampling_rules() {
        let ds = generate_synthetic(&spec(2, 1, 10)).unwrap();
        assert_eq!(sample_per_class(&ds, 50, 1, 0).unwrap(), ds.class_indices(1));
        let one = sample_per_class(&ds, 1, 0, 4).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(ds.noisy_labels[one[0]], 0);
        let five = sample_per_class(&ds, 5, 1, 4).unwrap();
        assert_eq!(five.len(), 5);
        assert!(five.windows(2).all(|w| w[0] < w[1]));
        assert!(five.iter().all(|&i| ds.noisy_labels[i] == 1));
        assert_eq!(five, sample_per_class(&ds, 5, 1, 4).unwrap());
    }

    #[test]
    fn sampling_empty_class_errors() {
        let mut ds = generate_synthetic(&spec(2, 1, 3)).unwrap();
        ds.classes = 3;
        assert!(matches!(sample_per_class(&ds, 2, 2, 0), Err(Error::EmptyClass(2))));
    }

    #[test]
    fn split_partitions_samples() {
        let ds = generate_synthetic(&spec(2, 2, 50)).unwrap();
        let (train, test) = ds.split(0.2, 1).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
    }

    #[test]
    fn verified_marks_only_clean_samples() {
        let ds = generate_synthetic(&spec(3, 1, 100)).unwrap();
        let mut noisy = inject_noise(&ds, &NoiseModel::uniform(0.4, 2)).unwrap();
        noisy.mark_verified(0.5, 3).unwrap();
        noisy.validate().unwrap();
        let v = noisy.verified.as_ref().unwrap();
        assert!(v.iter().any(|&b| b));
    }
}
