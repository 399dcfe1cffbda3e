//! Pairwise similarity matrices over feature rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Rows with a norm at or below this are rejected by cosine similarity.
pub const MIN_NORM: f64 = 1e-12;

/// Dense row-major matrix of `rows` feature vectors of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Shape(format!("{} values for {rows}x{dim}", data.len())));
        }
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {}", p / dim.max(1))));
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        FeatureMatrix::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            dim: self.dim,
            data,
        }
    }

    /// Multiplies row `i` by `scales[i]`.
    pub fn scale_rows(&self, scales: &[f64]) -> FeatureMatrix {
        let mut out = self.clone();
        for (i, s) in scales.iter().enumerate().take(self.rows) {
            out.data[i * self.dim..(i + 1) * self.dim]
                .iter_mut()
                .for_each(|v| *v *= s);
        }
        out
    }

    /// Rows scaled to unit length; errors on the first row with norm ≤ [`MIN_NORM`].
    pub fn normalized(&self) -> Result<FeatureMatrix> {
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = &mut out.data[i * self.dim..(i + 1) * self.dim];
            let norm = norm(row);
            if norm.is_nan() || norm <= MIN_NORM {
                return Err(Error::ZeroNorm { row: i });
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of the angle between `a` and `b`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na.is_nan() || na <= MIN_NORM {
        return Err(Error::ZeroNorm { row: 0 });
    }
    if nb.is_nan() || nb <= MIN_NORM {
        return Err(Error::ZeroNorm { row: 1 });
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Cosine,
    /// `-‖a − b‖₂`, so larger still means more similar.
    NegativeEuclidean,
}

/// Symmetric `m × m` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    kind: SimilarityKind,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps raw row-major entries. Symmetry is checked to 1e-6.
    pub fn from_entries(size: usize, kind: SimilarityKind, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::Shape(format!("{} entries for {size}x{size}", entries.len())));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("similarity entry".into()));
        }
        for i in 0..size {
            for j in 0..i {
                if (entries[i * size + j] - entries[j * size + i]).abs() > 1e-6 {
                    return Err(Error::Shape(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SimilarityMatrix { size, kind, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

fn mirror_upper(size: usize, upper: Vec<Vec<f64>>) -> Vec<f64> {
    let mut entries = vec![0.0; size * size];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            entries[i * size + j] = v;
            entries[j * size + i] = v;
        }
    }
    entries
}

pub fn cosine_matrix(features: &FeatureMatrix) -> Result<SimilarityMatrix> {
    cosine_matrix_with(features, Exec::default())
}

/// Cosine similarities between all row pairs. Rows are normalized once, then
/// each upper-triangle row is filled independently and mirrored.
pub fn cosine_matrix_with(features: &FeatureMatrix, exec: Exec) -> Result<SimilarityMatrix> {
    let unit = features.normalized()?;
    let m = unit.rows();
    let upper = exec.map(m, |i| {
        let a = unit.row(i);
        (i..m).map(|j| dot(a, unit.row(j)).clamp(-1.0, 1.0)).collect::<Vec<_>>()
    });
    Ok(SimilarityMatrix {
        size: m,
        kind: SimilarityKind::Cosine,
        entries: mirror_upper(m, upper),
    })
}

pub fn negative_euclidean_matrix(features: &FeatureMatrix) -> Result<SimilarityMatrix> {
    negative_euclidean_matrix_with(features, Exec::default())
}

pub fn negative_euclidean_matrix_with(features: &FeatureMatrix, exec: Exec) -> Result<SimilarityMatrix> {
    let m = features.rows();
    let upper = exec.map(m, |i| {
        let a = features.row(i);
        (i..m)
            .map(|j| {
                if i == j {
                    return 0.0;
                }
                let d2: f64 = a.iter().zip(features.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
                -d2.sqrt()
            })
            .collect::<Vec<_>>()
    });
    Ok(SimilarityMatrix {
        size: m,
        kind: SimilarityKind::NegativeEuclidean,
        entries: mirror_upper(m, upper),
    })
}

pub fn similarity_matrix(features: &FeatureMatrix, kind: SimilarityKind, exec: Exec) -> Result<SimilarityMatrix> {
    match kind {
        SimilarityKind::Cosine => cosine_matrix_with(features, exec),
        SimilarityKind::NegativeEuclidean => negative_euclidean_matrix_with(features, exec),
    }
}
