//! Density ρ, threshold S_c and separation η over a similarity matrix.

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// Per-sample density and separation statistics for one class sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityStats {
    pub rho: Vec<i64>,
    pub threshold: f64,
    pub eta: Vec<f64>,
    pub peak_index: usize,
    /// Sample positions sorted by `(ρ desc, key asc)`.
    pub order: Vec<usize>,
}

/// 1-based rank of the threshold among all `m²` entries.
pub fn threshold_rank(quantile: f64, m: usize) -> usize {
    let total = m * m;
    // guard against q·m² landing a hair above an integer
    let k = (quantile * total as f64 - 1e-9).ceil() as usize;
    k.clamp(1, total.max(1))
}

/// The `ceil(quantile · m²)`-th smallest entry of `s`, diagonal included.
/// With `quantile = 0.6`, 40% of the entries are at or above the result.
pub fn compute_threshold(s: &SimilarityMatrix, quantile: f64) -> Result<f64> {
    threshold_of_entries(s.entries(), quantile)
}

/// Rank rule of [`compute_threshold`] applied to `m²` raw entries.
pub fn threshold_of_entries(entries: &[f64], quantile: f64) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::Shape("empty similarity matrix".into()));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::config("sc_quantile", "must lie in (0, 1)"));
    }
    let m = (entries.len() as f64).sqrt().round() as usize;
    if m * m != entries.len() {
        return Err(Error::Shape(format!("{} entries is not a square count", entries.len())));
    }
    let k = threshold_rank(quantile, m);
    let mut all = entries.to_vec();
    let (_, kth, _) = all.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// `ρ_i = Σ_j sign(S_ij − S_c)` over all `j` including `i`, with `sign(0) = 0`.
pub fn compute_density(s: &SimilarityMatrix, threshold: f64) -> Result<Vec<i64>> {
    if !threshold.is_finite() {
        return Err(Error::NonFinite("density threshold".into()));
    }
    (0..s.size())
        .map(|i| {
            s.row(i).iter().try_fold(0i64, |acc, &v| {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("similarity row {i}")));
                }
                let d = v - threshold;
                Ok(acc
                    + if d > 0.0 {
                        1
                    } else if d < 0.0 {
                        -1
                    } else {
                        0
                    })
            })
        })
        .collect()
}

/// Positions sorted by `(ρ desc, key asc)`; a strict total order when keys
/// are distinct.
pub fn density_order(rho: &[i64], keys: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[b].cmp(&rho[a]).then(keys[a].cmp(&keys[b])));
    order
}

/// η with ties in ρ broken by lower position.
pub fn compute_eta(s: &SimilarityMatrix, rho: &[i64]) -> Result<(Vec<f64>, usize)> {
    let keys: Vec<usize> = (0..rho.len()).collect();
    let (eta, order) = compute_eta_keyed(s, rho, &keys)?;
    Ok((eta, order[0]))
}

/// η under the order `(ρ desc, key asc)`: the top element gets its minimum
/// similarity to any other sample, every other sample its maximum similarity
/// to a sample ranked above it. Returns η and the order.
pub fn compute_eta_keyed(s: &SimilarityMatrix, rho: &[i64], keys: &[usize]) -> Result<(Vec<f64>, Vec<usize>)> {
    let m = s.size();
    if m < 2 {
        return Err(Error::Shape(format!("separation needs at least 2 samples, got {m}")));
    }
    if rho.len() != m || keys.len() != m {
        return Err(Error::Shape(format!("{} densities for {m} samples", rho.len())));
    }
    let order = density_order(rho, keys);
    let mut eta = vec![0.0; m];
    let peak = order[0];
    eta[peak] = (0..m)
        .filter(|&j| j != peak)
        .map(|j| s.get(peak, j))
        .fold(f64::INFINITY, f64::min);
    for (t, &i) in order.iter().enumerate().skip(1) {
        eta[i] = order[..t]
            .iter()
            .map(|&j| s.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    Ok((eta, order))
}

/// Threshold, density and separation in one pass; `keys` fix the tie-break.
pub fn density_stats_keyed(s: &SimilarityMatrix, quantile: f64, keys: &[usize]) -> Result<DensityStats> {
    let threshold = compute_threshold(s, quantile)?;
    let rho = compute_density(s, threshold)?;
    if s.size() == 1 {
        return Ok(DensityStats {
            rho,
            threshold,
            eta: vec![s.get(0, 0)],
            peak_index: 0,
            order: vec![0],
        });
    }
    let (eta, order) = compute_eta_keyed(s, &rho, keys)?;
    Ok(DensityStats {
        rho,
        threshold,
        eta,
        peak_index: order[0],
        order,
    })
}

pub fn density_stats(s: &SimilarityMatrix, quantile: f64) -> Result<DensityStats> {
    let keys: Vec<usize> = (0..s.size()).collect();
    density_stats_keyed(s, quantile, &keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{cosine_matrix, FeatureMatrix, SimilarityKind};

    fn mat(m: usize, v: Vec<f64>) -> SimilarityMatrix {
        SimilarityMatrix::from_entries(m, SimilarityKind::Cosine, v).unwrap()
    }

    #[test]
    fn threshold_rank_example() {
        let vals: Vec<f64> = (0..16).map(|k| k as f64 / 10.0).collect();
        assert_eq!(threshold_rank(0.6, 4), 10);
        assert_eq!(threshold_of_entries(&vals, 0.6).unwrap(), 0.9);
        let mut shuffled = vals.clone();
        shuffled.reverse();
        assert_eq!(threshold_of_entries(&shuffled, 0.6).unwrap(), 0.9);
    }

    #[test]
    fn threshold_rank_exact_products() {
        // 0.6 * 100 must give rank 60, not 61
        assert_eq!(threshold_rank(0.6, 10), 60);
        assert_eq!(threshold_rank(0.6, 5), 15);
        assert_eq!(threshold_rank(0.5, 1), 1);
    }

    #[test]
    fn threshold_constant_matrix() {
        let s = mat(3, vec![0.4; 9]);
        assert_eq!(compute_threshold(&s, 0.6).unwrap(), 0.4);
    }

    #[test]
    fn identical_features_zero_density() {
        let f = FeatureMatrix::from_rows(&vec![vec![0.3, -1.2, 2.0]; 5]).unwrap();
        let s = cosine_matrix(&f).unwrap();
        let sc = compute_threshold(&s, 0.6).unwrap();
        assert_eq!(compute_density(&s, sc).unwrap(), vec![0; 5]);
    }

    #[test]
    fn orthonormal_density_one() {
        let mut e = vec![0.0; 16];
        for i in 0..4 {
            e[i * 4 + i] = 1.0;
        }
        let s = mat(4, e);
        let sc = compute_threshold(&s, 0.6).unwrap();
        assert_eq!(sc, 0.0);
        assert_eq!(compute_density(&s, sc).unwrap(), vec![1; 4]);
    }

    #[test]
    fn eta_two_sample_tie() {
        let s = mat(2, vec![1.0, 0.3, 0.3, 1.0]);
        let (eta, peak) = compute_eta(&s, &[2, 2]).unwrap();
        assert_eq!(peak, 0);
        assert_eq!(eta, vec![0.3, 0.3]);
    }

    #[test]
    fn eta_min_rho_sample() {
        let s = mat(3, vec![1.0, 0.2, 0.7, 0.2, 1.0, 0.5, 0.7, 0.5, 1.0]);
        let (eta, peak) = compute_eta(&s, &[3, 1, 2]).unwrap();
        assert_eq!(peak, 0);
        assert_eq!(eta[1], 0.5f64.max(0.2));
        assert_eq!(eta[2], 0.7);
        assert_eq!(eta[0], 0.2);
    }

    #[test]
    fn eta_needs_two_samples() {
        let s = mat(1, vec![1.0]);
        assert!(compute_eta(&s, &[1]).is_err());
    }

    #[test]
    fn empty_matrix_threshold_errors() {
        let s = mat(0, vec![]);
        assert!(compute_threshold(&s, 0.6).is_err());
    }
}
