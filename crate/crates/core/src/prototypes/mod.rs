//! Per-class prototype election.
//!
//! For every class a random sample of `m` same-label feature vectors is drawn
//! and `p` of them are elected as prototypes. The default selector walks the
//! samples from densest to sparsest and keeps those whose separation η from
//! denser samples is below a threshold, so prototypes spread over the
//! distinct modes of the class.

mod density;
pub mod kmeans;

pub use density::{
    compute_density, compute_eta, compute_eta_keyed, compute_threshold, density_order, density_stats,
    density_stats_keyed, threshold_of_entries, threshold_rank, DensityStats,
};

use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_members, NoisyDataset};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_for, Exec};
use crate::similarity::{norm, similarity_matrix, FeatureMatrix, SimilarityKind, MIN_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    /// Cosine density peaks with the η filter.
    SmpDensityPeak,
    /// The same walk on negative Euclidean distances.
    EuclideanDensityPeak,
    /// k-means++ seeding plus Lloyd, centers snapped to samples.
    KmeansPlusPlus,
}

impl SelectorKind {
    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::SmpDensityPeak => "smp_density_peak",
            SelectorKind::EuclideanDensityPeak => "euclidean_density_peak",
            SelectorKind::KmeansPlusPlus => "kmeans_plus_plus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    /// Samples drawn per class.
    pub m: usize,
    /// Prototypes per class.
    pub p: usize,
    #[serde(default = "default_quantile")]
    pub sc_quantile: f64,
    #[serde(default = "default_eta_threshold")]
    pub eta_threshold: f64,
    #[serde(default = "default_selector")]
    pub selector: SelectorKind,
    #[serde(default)]
    pub seed: u64,
}

fn default_quantile() -> f64 {
    0.6
}

fn default_eta_threshold() -> f64 {
    0.95
}

fn default_selector() -> SelectorKind {
    SelectorKind::SmpDensityPeak
}

impl SelectorConfig {
    pub fn new(m: usize, p: usize) -> Self {
        SelectorConfig {
            m,
            p,
            sc_quantile: default_quantile(),
            eta_threshold: default_eta_threshold(),
            selector: default_selector(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::config("p", "must be at least 1"));
        }
        if self.p > self.m {
            return Err(Error::config("p", format!("{} exceeds m = {}", self.p, self.m)));
        }
        if !(self.sc_quantile > 0.0 && self.sc_quantile < 1.0) {
            return Err(Error::config("sc_quantile", "must lie in (0, 1)"));
        }
        if !self.eta_threshold.is_finite() {
            return Err(Error::config("eta_threshold", "must be finite"));
        }
        Ok(())
    }
}

/// Prototypes chosen from one class sample. Positions index rows of the
/// feature matrix handed to [`select_prototypes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub positions: Vec<usize>,
    pub rho: Vec<i64>,
    pub eta: Vec<f64>,
    /// Fewer than `p` samples passed the η filter; remaining slots were
    /// filled in density order.
    pub filled: bool,
}

pub fn select_prototypes(features: &FeatureMatrix, cfg: &SelectorConfig) -> Result<Selection> {
    let keys: Vec<usize> = (0..features.rows()).collect();
    select_prototypes_keyed(features, cfg, &keys, Exec::Serial)
}

/// [`select_prototypes`] with an explicit tie-break key per row: among equal
/// densities the row with the smaller key ranks first.
pub fn select_prototypes_keyed(
    features: &FeatureMatrix,
    cfg: &SelectorConfig,
    keys: &[usize],
    exec: Exec,
) -> Result<Selection> {
    if features.rows() == 0 {
        return Err(Error::Shape("no samples to select prototypes from".into()));
    }
    if cfg.p == 0 || cfg.p > features.rows() {
        return Err(Error::config(
            "p",
            format!("{} prototypes requested from {} samples", cfg.p, features.rows()),
        ));
    }
    match cfg.selector {
        SelectorKind::SmpDensityPeak => density_walk(features, cfg, keys, SimilarityKind::Cosine, exec),
        SelectorKind::EuclideanDensityPeak => {
            density_walk(features, cfg, keys, SimilarityKind::NegativeEuclidean, exec)
        }
        SelectorKind::KmeansPlusPlus => {
            let mut rng = rng_for(cfg.seed, "kmeans", 0);
            let positions = kmeans::kmeans_representatives(features, cfg.p, &mut rng);
            let s = similarity_matrix(features, SimilarityKind::Cosine, exec)?;
            let stats = density_stats_keyed(&s, cfg.sc_quantile, keys)?;
            Ok(Selection {
                rho: positions.iter().map(|&i| stats.rho[i]).collect(),
                eta: positions.iter().map(|&i| stats.eta[i]).collect(),
                positions,
                filled: false,
            })
        }
    }
}

fn density_walk(
    features: &FeatureMatrix,
    cfg: &SelectorConfig,
    keys: &[usize],
    kind: SimilarityKind,
    exec: Exec,
) -> Result<Selection> {
    let s = similarity_matrix(features, kind, exec)?;
    let stats = density_stats_keyed(&s, cfg.sc_quantile, keys)?;
    let mut positions: Vec<usize> = stats
        .order
        .iter()
        .copied()
        .filter(|&i| stats.eta[i] < cfg.eta_threshold)
        .take(cfg.p)
        .collect();
    let filled = positions.len() < cfg.p;
    if filled {
        let missing = cfg.p - positions.len();
        let extra: Vec<usize> = stats
            .order
            .iter()
            .copied()
            .filter(|i| !positions.contains(i))
            .take(missing)
            .collect();
        positions.extend(extra);
    }
    Ok(Selection {
        rho: positions.iter().map(|&i| stats.rho[i]).collect(),
        eta: positions.iter().map(|&i| stats.eta[i]).collect(),
        positions,
        filled,
    })
}

/// Source of the features `G(x)` used for prototype election and voting.
pub trait FeatureExtractor: Sync {
    fn feature_dim(&self) -> usize;

    /// Feature rows for the given dataset indices, in the same order.
    fn extract(&self, ds: &NoisyDataset, indices: &[usize]) -> Result<FeatureMatrix>;
}

/// `G(x) = x`.
pub struct RawFeatures {
    pub dim: usize,
}

impl FeatureExtractor for RawFeatures {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, ds: &NoisyDataset, indices: &[usize]) -> Result<FeatureMatrix> {
        let mut data = Vec::with_capacity(indices.len() * ds.dim);
        for &i in indices {
            data.extend(ds.row(i).iter().map(|&v| f64::from(v)));
        }
        FeatureMatrix::new(indices.len(), ds.dim, data)
    }
}

/// Features already computed for every sample of the dataset.
pub struct Precomputed<'a>(pub &'a FeatureMatrix);

impl FeatureExtractor for Precomputed<'_> {
    fn feature_dim(&self) -> usize {
        self.0.dim()
    }

    fn extract(&self, ds: &NoisyDataset, indices: &[usize]) -> Result<FeatureMatrix> {
        if self.0.rows() != ds.len() {
            return Err(Error::Shape(format!(
                "{} precomputed rows for {} samples",
                self.0.rows(),
                ds.len()
            )));
        }
        Ok(self.0.select(indices))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrototypes {
    pub class: usize,
    pub source_indices: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
    pub rho: Vec<i64>,
    pub eta: Vec<f64>,
    pub filled: bool,
    /// Restriction to verified samples was requested but too few existed.
    pub verified_fallback: bool,
    /// Fewer than `p` samples were available for this class.
    pub short_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub p: usize,
    pub selector: SelectorKind,
    pub classes: Vec<ClassPrototypes>,
}

impl PrototypeSet {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn warnings(&self) -> usize {
        self.classes
            .iter()
            .map(|c| usize::from(c.filled) + usize::from(c.verified_fallback) + usize::from(c.short_class))
            .sum()
    }

    /// CSV rows `class,slot,source_index,rho,eta`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "class,slot,source_index,rho,eta")?;
        for c in &self.classes {
            for slot in 0..c.source_indices.len() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    c.class, slot, c.source_indices[slot], c.rho[slot], c.eta[slot]
                )?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

pub fn build_prototype_set(
    ds: &NoisyDataset,
    extractor: &dyn FeatureExtractor,
    cfg: &SelectorConfig,
    restrict_to_verified: bool,
) -> Result<PrototypeSet> {
    build_prototype_set_with(ds, extractor, cfg, restrict_to_verified, Exec::default())
}

/// Elects prototypes for every class. Class `c` draws its sample with the
/// same stream as [`crate::dataset::sample_per_class`] for `cfg.seed`.
pub fn build_prototype_set_with(
    ds: &NoisyDataset,
    extractor: &dyn FeatureExtractor,
    cfg: &SelectorConfig,
    restrict_to_verified: bool,
    exec: Exec,
) -> Result<PrototypeSet> {
    cfg.validate()?;
    if restrict_to_verified && ds.verified.is_none() {
        return Err(Error::MissingVerifiedMask);
    }
    let classes = exec.try_map(ds.classes, |c| {
        let members = ds.class_indices(c);
        if members.is_empty() {
            return Err(Error::EmptyClass(c));
        }
        let mut pool = members;
        let mut verified_fallback = false;
        if restrict_to_verified {
            let mask = ds.verified.as_ref().unwrap();
            let verified: Vec<usize> = pool.iter().copied().filter(|&i| mask[i]).collect();
            if verified.len() >= cfg.p {
                pool = verified;
            } else {
                warn!("class {c}: only {} verified samples, using all samples", verified.len());
                verified_fallback = true;
            }
        }
        let sampled = sample_members(&pool, cfg.m, cfg.seed, c);
        let feats = extractor.extract(ds, &sampled)?;
        let short_class = sampled.len() < cfg.p;
        if short_class {
            warn!("class {c}: {} samples for {} prototypes", sampled.len(), cfg.p);
        }
        let class_cfg = SelectorConfig {
            p: cfg.p.min(sampled.len()),
            seed: derive_seed(cfg.seed, "selector", c as u64),
            ..cfg.clone()
        };
        let sel = select_prototypes_keyed(&feats, &class_cfg, &sampled, Exec::Serial)?;
        if sel.filled {
            warn!(
                "class {c}: fewer than {} samples passed the separation filter",
                class_cfg.p
            );
        }
        let vectors: Vec<Vec<f64>> = sel.positions.iter().map(|&i| feats.row(i).to_vec()).collect();
        if let Some(pos) = vectors.iter().position(|v| {
            let n = norm(v);
            n.is_nan() || n <= MIN_NORM
        }) {
            return Err(Error::ZeroNorm {
                row: sampled[sel.positions[pos]],
            });
        }
        Ok(ClassPrototypes {
            class: c,
            source_indices: sel.positions.iter().map(|&i| sampled[i]).collect(),
            vectors,
            rho: sel.rho,
            eta: sel.eta,
            filled: sel.filled,
            verified_fallback,
            short_class,
        })
    })?;
    Ok(PrototypeSet {
        p: cfg.p,
        selector: cfg.selector,
        classes,
    })
}
