//! k-means++ seeding and Lloyd refinement, used as an alternative prototype
//! selector.

use rand::Rng;

use crate::similarity::FeatureMatrix;

pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOLERANCE: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row indices of `k` seeds drawn by the k-means++ rule: the first uniformly,
/// each next one with probability proportional to its squared distance to the
/// closest seed so far. When every remaining distance is zero the next seed is
/// drawn uniformly among rows not chosen yet.
pub fn plus_plus_seeds(data: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = data.rows();
    let k = k.min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut seeds = vec![rng.random_range(0..n)];
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(seeds[0]))).collect();
    while seeds.len() < k {
        let total: f64 = closest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| closest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        seeds.push(next);
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    seeds
}

/// Lloyd iterations from the given centers until no center moves more than
/// [`SHIFT_TOLERANCE`] or [`MAX_ITERATIONS`] passes. Empty clusters keep their
/// previous center.
pub fn lloyd(data: &FeatureMatrix, mut centers: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, usize) {
    let d = data.dim();
    for iter in 1..=MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; d]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for i in 0..data.rows() {
            let x = data.row(i);
            let c = nearest(&centers, x);
            counts[c] += 1;
            sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        let mut max_shift: f64 = 0.0;
        for ((center, sum), &cnt) in centers.iter_mut().zip(&sums).zip(&counts) {
            if cnt == 0 {
                continue;
            }
            let next: Vec<f64> = sum.iter().map(|s| s / cnt as f64).collect();
            max_shift = max_shift.max(sq_dist(center, &next).sqrt());
            *center = next;
        }
        if max_shift < SHIFT_TOLERANCE {
            return (centers, iter);
        }
    }
    (centers, MAX_ITERATIONS)
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(center, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// For each center, the closest row not already claimed by an earlier center.
pub fn nearest_distinct_rows(data: &FeatureMatrix, centers: &[Vec<f64>]) -> Vec<usize> {
    let mut taken = vec![false; data.rows()];
    centers
        .iter()
        .filter_map(|center| {
            let pick = (0..data.rows())
                .filter(|&i| !taken[i])
                .min_by(|&a, &b| sq_dist(data.row(a), center).total_cmp(&sq_dist(data.row(b), center)))?;
            taken[pick] = true;
            Some(pick)
        })
        .collect()
}

/// Full selector: seed, refine, snap each center to a distinct sample row.
pub fn kmeans_representatives(data: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let seeds = plus_plus_seeds(data, k, rng);
    let centers = seeds.iter().map(|&i| data.row(i).to_vec()).collect();
    let (centers, _) = lloyd(data, centers);
    nearest_distinct_rows(data, &centers)
}
