//! Label correction by prototype voting.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::NoisyDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::prototypes::{FeatureExtractor, PrototypeSet};
use crate::similarity::{dot, norm, MIN_NORM};

/// How the similarities to one class's prototypes combine into a score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Voting {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedLabels {
    pub labels: Vec<usize>,
    /// Row-major `N × K` class scores σ.
    pub scores: Vec<f64>,
    pub classes: usize,
    pub source_epoch: usize,
}

impl CorrectedLabels {
    pub fn scores_of(&self, i: usize) -> &[f64] {
        &self.scores[i * self.classes..(i + 1) * self.classes]
    }

    /// CSV `index,noisy,corrected[,true]`.
    pub fn write_csv(&self, ds: &NoisyDataset, out: &mut impl Write) -> std::io::Result<()> {
        match &ds.true_labels {
            Some(t) => {
                writeln!(out, "index,noisy,corrected,true")?;
                for (i, l) in self.labels.iter().enumerate() {
                    writeln!(out, "{i},{},{l},{}", ds.noisy_labels[i], t[i])?;
                }
            }
            None => {
                writeln!(out, "index,noisy,corrected")?;
                for (i, l) in self.labels.iter().enumerate() {
                    writeln!(out, "{i},{},{l}", ds.noisy_labels[i])?;
                }
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, ds: &NoisyDataset, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(ds, &mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Prototype set with unit-length vectors, ready for repeated scoring.
pub struct NormalizedPrototypes {
    classes: Vec<Vec<Vec<f64>>>,
    voting: Voting,
}

impl NormalizedPrototypes {
    pub fn new(protos: &PrototypeSet, voting: Voting) -> Result<Self> {
        let classes = protos
            .classes
            .iter()
            .map(|c| {
                if c.vectors.is_empty() {
                    return Err(Error::Shape(format!("class {} has no prototypes", c.class)));
                }
                c.vectors
                    .iter()
                    .enumerate()
                    .map(|(slot, v)| {
                        let n = norm(v);
                        if n.is_nan() || n <= MIN_NORM {
                            return Err(Error::ZeroNorm { row: slot });
                        }
                        Ok(v.iter().map(|x| x / n).collect())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(NormalizedPrototypes { classes, voting })
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = norm(x);
        if n.is_nan() || n <= MIN_NORM {
            return Err(Error::ZeroNorm { row: 0 });
        }
        Ok(self
            .classes
            .iter()
            .map(|protos| {
                let sims = protos.iter().map(|p| (dot(x, p) / n).clamp(-1.0, 1.0));
                match self.voting {
                    Voting::Mean => sims.sum::<f64>() / protos.len() as f64,
                    Voting::Max => sims.fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect())
    }
}

/// σ_c: mean cosine similarity between `x` and the prototypes of class `c`.
pub fn class_scores(x: &[f64], protos: &PrototypeSet) -> Result<Vec<f64>> {
    NormalizedPrototypes::new(protos, Voting::Mean)?.scores(x)
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

pub fn correct_labels(
    ds: &NoisyDataset,
    extractor: &dyn FeatureExtractor,
    protos: &PrototypeSet,
) -> Result<CorrectedLabels> {
    correct_labels_with(ds, extractor, protos, Voting::Mean, 0, Exec::default())
}

/// Assigns every sample of `ds` the class with the highest vote.
pub fn correct_labels_with(
    ds: &NoisyDataset,
    extractor: &dyn FeatureExtractor,
    protos: &PrototypeSet,
    voting: Voting,
    source_epoch: usize,
    exec: Exec,
) -> Result<CorrectedLabels> {
    if protos.num_classes() != ds.classes {
        return Err(Error::Shape(format!(
            "prototypes cover {} classes, dataset has {}",
            protos.num_classes(),
            ds.classes
        )));
    }
    let all: Vec<usize> = (0..ds.len()).collect();
    let feats = extractor.extract(ds, &all)?;
    let normed = NormalizedPrototypes::new(protos, voting)?;
    let rows = exec.try_map(ds.len(), |i| {
        normed.scores(feats.row(i)).map_err(|e| match e {
            Error::ZeroNorm { .. } => Error::ZeroNorm { row: i },
            other => other,
        })
    })?;
    let labels = rows.iter().map(|r| argmax(r)).collect();
    Ok(CorrectedLabels {
        labels,
        scores: rows.concat(),
        classes: ds.classes,
        source_epoch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionMetrics {
    /// Fraction of corrected labels equal to the true label.
    pub overall: f64,
    /// Same, restricted to samples of each true class; `None` for absent classes.
    pub per_class: Vec<Option<f64>>,
    /// Fraction of noisy labels equal to the true label.
    pub noisy_baseline: f64,
    pub per_class_noisy: Vec<Option<f64>>,
}

/// Accuracy of `labels` against the true labels of `ds`, overall and per
/// true class.
pub fn label_accuracy(labels: &[usize], ds: &NoisyDataset) -> Result<(f64, Vec<Option<f64>>)> {
    let truth = ds.true_labels.as_ref().ok_or(Error::MissingTrueLabels)?;
    if labels.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} samples",
            labels.len(),
            truth.len()
        )));
    }
    let mut hits = vec![0usize; ds.classes];
    let mut totals = vec![0usize; ds.classes];
    for (&l, &t) in labels.iter().zip(truth) {
        totals[t] += 1;
        hits[t] += usize::from(l == t);
    }
    let n: usize = totals.iter().sum();
    let overall = if n == 0 {
        0.0
    } else {
        hits.iter().sum::<usize>() as f64 / n as f64
    };
    let per_class = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect();
    Ok((overall, per_class))
}

pub fn correction_metrics(corrected: &CorrectedLabels, ds: &NoisyDataset) -> Result<CorrectionMetrics> {
    let (overall, per_class) = label_accuracy(&corrected.labels, ds)?;
    let (noisy_baseline, per_class_noisy) = label_accuracy(&ds.noisy_labels, ds)?;
    Ok(CorrectionMetrics {
        overall,
        per_class,
        noisy_baseline,
        per_class_noisy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::{ClassPrototypes, RawFeatures, SelectorKind};

    fn set(classes: Vec<Vec<Vec<f64>>>) -> PrototypeSet {
        PrototypeSet {
            p: classes.iter().map(Vec::len).max().unwrap_or(0),
            selector: SelectorKind::SmpDensityPeak,
            classes: classes
                .into_iter()
                .enumerate()
                .map(|(c, vectors)| ClassPrototypes {
                    class: c,
                    source_indices: (0..vectors.len()).collect(),
                    rho: vec![0; vectors.len()],
                    eta: vec![0.0; vectors.len()],
                    vectors,
                    filled: false,
                    verified_fallback: false,
                    short_class: false,
                })
                .collect(),
        }
    }

    #[test]
    fn mean_of_two_prototypes() {
        let s = class_scores(&[1.0, 0.0], &set(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]])).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_is_one() {
        let s = class_scores(&[0.3, -2.0, 1.0], &set(vec![vec![vec![0.3, -2.0, 1.0]]])).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_query_rejected() {
        assert!(matches!(
            class_scores(&[0.0, 0.0], &set(vec![vec![vec![1.0, 0.0]]])),
            Err(Error::ZeroNorm { .. })
        ));
    }

    #[test]
    fn max_voting() {
        let protos = set(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
        let s = NormalizedPrototypes::new(&protos, Voting::Max)
            .unwrap()
            .scores(&[1.0, 0.0])
            .unwrap();
        assert_eq!(s, vec![1.0]);
    }

    fn ds_from(rows: &[[f32; 2]], labels: Vec<usize>, classes: usize) -> NoisyDataset {
        NoisyDataset::new(
            classes,
            2,
            rows.iter().flatten().copied().collect(),
            labels.clone(),
            Some(labels),
            None,
        )
        .unwrap()
    }

    #[test]
    fn recovers_sole_prototype_class() {
        let ds = ds_from(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![1, 1, 1], 2);
        let protos = set(vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]]);
        let out = correct_labels(&ds, &RawFeatures { dim: 2 }, &protos).unwrap();
        assert_eq!(out.labels, vec![0, 1, 0]);
    }

    #[test]
    fn identical_sets_tie_to_zero() {
        let ds = ds_from(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.2]], vec![1, 1, 0], 2);
        let p = vec![vec![1.0, 1.0], vec![0.0, 1.0]];
        let out = correct_labels(&ds, &RawFeatures { dim: 2 }, &set(vec![p.clone(), p])).unwrap();
        assert_eq!(out.labels, vec![0, 0, 0]);
    }

    #[test]
    fn class_count_mismatch() {
        let ds = ds_from(&[[1.0, 0.0]], vec![0], 2);
        assert!(correct_labels(&ds, &RawFeatures { dim: 2 }, &set(vec![vec![vec![1.0, 0.0]]])).is_err());
    }

    #[test]
    fn metrics_identities() {
        let mut ds = ds_from(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]], vec![0, 1, 1, 0], 2);
        ds.noisy_labels = vec![0, 0, 1, 1];
        let perfect = CorrectedLabels {
            labels: ds.true_labels.clone().unwrap(),
            scores: vec![0.0; 8],
            classes: 2,
            source_epoch: 0,
        };
        let m = correction_metrics(&perfect, &ds).unwrap();
        assert_eq!(m.overall, 1.0);
        assert_eq!(m.noisy_baseline, 0.5);
        let same_as_noisy = CorrectedLabels {
            labels: ds.noisy_labels.clone(),
            ..perfect
        };
        let m = correction_metrics(&same_as_noisy, &ds).unwrap();
        assert_eq!(m.overall, m.noisy_baseline);
        assert_eq!(m.per_class, m.per_class_noisy);
    }

    #[test]
    fn metrics_need_truth() {
        let mut ds = ds_from(&[[1.0, 0.0]], vec![0], 1);
        ds.true_labels = None;
        let c = CorrectedLabels {
            labels: vec![0],
            scores: vec![1.0],
            classes: 1,
            source_epoch: 0,
        };
        assert!(matches!(correction_metrics(&c, &ds), Err(Error::MissingTrueLabels)));
    }

    #[test]
    fn csv_layout() {
        let ds = ds_from(&[[1.0, 0.0], [0.0, 1.0]], vec![0, 1], 2);
        let c = CorrectedLabels {
            labels: vec![1, 1],
            scores: vec![0.0; 4],
            classes: 2,
            source_epoch: 3,
        };
        let mut buf = Vec::new();
        c.write_csv(&ds, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,noisy,corrected,true\n0,0,1,0\n1,1,1,1\n"
        );
    }
}
