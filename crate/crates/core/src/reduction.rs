//! Affine reductions `R^D → R^d` placed in front of the classifier.
//!
//! Two flavours: a learnable map trained jointly with the mixture, and a
//! fixed PCA projection fitted once on the training split.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float;
use crate::tensor_math::{self, dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionKind {
    /// `y = A·x + b`, trained jointly.
    Learnable,
    /// `y = A·(x − mean)` with orthonormal rows of principal directions.
    PcaFixed,
}

impl ReductionKind {
    pub fn code(self) -> u8 {
        match self {
            Self::PcaFixed => 0,
            Self::Learnable => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::PcaFixed),
            1 => Some(Self::Learnable),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionMap {
    kind: ReductionKind,
    pub(crate) matrix: Matrix,
    pub(crate) bias: Vec<f64>,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl ReductionMap {
    /// Learnable map with the given `d × D` matrix and bias.
    pub fn learnable(matrix: Matrix, bias: Vec<f64>) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::Empty("reduction matrix"));
        }
        if bias.len() != matrix.rows() {
            return Err(Error::Dimension {
                context: "reduction bias",
                expected: matrix.rows(),
                found: bias.len(),
            });
        }
        let mean = vec![0.0; matrix.cols()];
        Ok(Self {
            kind: ReductionKind::Learnable,
            matrix,
            bias,
            mean,
            eigenvalues: Vec::new(),
        })
    }

    /// Learnable map with entries uniform in `±1/√D` and zero bias.
    pub fn learnable_random(in_dim: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Domain("reduction dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / float::sqrt(in_dim as f64);
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self::learnable(Matrix::new(out_dim, in_dim, data)?, vec![0.0; out_dim])
    }

    /// Fixed PCA map. Rows of `components` must be orthonormal and
    /// `eigenvalues` sorted descending and non-negative.
    pub fn pca(mean: Vec<f64>, components: Matrix, eigenvalues: Vec<f64>) -> Result<Self> {
        let (d, big_d) = (components.rows(), components.cols());
        if d == 0 || d > big_d {
            return Err(Error::Dimension {
                context: "pca output dimension (1..=D)",
                expected: big_d,
                found: d,
            });
        }
        if mean.len() != big_d {
            return Err(Error::Dimension {
                context: "pca mean",
                expected: big_d,
                found: mean.len(),
            });
        }
        if eigenvalues.len() != d {
            return Err(Error::Dimension {
                context: "pca eigenvalues",
                expected: d,
                found: eigenvalues.len(),
            });
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0)) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain(
                "pca eigenvalues must be non-negative and sorted descending".into(),
            ));
        }
        for i in 0..d {
            for j in 0..=i {
                let want = if i == j { 1.0 } else { 0.0 };
                if float::abs(dot(components.row(i), components.row(j)) - want) > 1e-8 {
                    return Err(Error::Domain("pca components are not orthonormal".into()));
                }
            }
        }
        Ok(Self {
            kind: ReductionKind::PcaFixed,
            matrix: components,
            bias: vec![0.0; d],
            mean,
            eigenvalues,
        })
    }

    pub fn kind(&self) -> ReductionKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `d × D`.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Data mean for PCA maps; zeros for learnable maps.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Retained eigenvalues, descending. Empty for learnable maps.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::Dimension {
                context: "reduction input",
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.out_dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    #[inline]
    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self.kind {
            ReductionKind::Learnable => {
                for ((yi, row), b) in y.iter_mut().zip(self.matrix.row_iter()).zip(&self.bias) {
                    *yi = dot(row, x) + b;
                }
            }
            ReductionKind::PcaFixed => {
                for (yi, row) in y.iter_mut().zip(self.matrix.row_iter()) {
                    *yi = row
                        .iter()
                        .zip(x)
                        .zip(&self.mean)
                        .map(|((a, xv), m)| a * (xv - m))
                        .sum();
                }
            }
        }
    }

    /// Maps every row of `features`.
    pub fn apply_rows(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.in_dim() {
            return Err(Error::Dimension {
                context: "reduction input",
                expected: self.in_dim(),
                found: features.cols(),
            });
        }
        let d = self.out_dim();
        let mut out = Matrix::zeros(features.rows(), d);
        for r in 0..features.rows() {
            self.apply_into(features.row(r), out.row_mut(r));
        }
        Ok(out)
    }
}

/// Fits a full-rank PCA map (`d = D`) on the given training rows.
///
/// The covariance is normalised by `1/N`. Each principal direction is signed
/// so that its largest-magnitude entry is positive.
pub fn fit_pca(features: &Matrix) -> Result<ReductionMap> {
    let n = features.rows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, found: n });
    }
    let dim = features.cols();
    let mut mean = vec![0.0; dim];
    for row in features.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for row in features.row_iter() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let dst = &mut cov.row_mut(i)[..=i];
            for (d, cj) in dst.iter_mut().zip(&centered) {
                *d += ci * cj;
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            let v = cov.get(i, j) / n as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let (mut values, mut vectors) = tensor_math::symmetric_eigen(&cov)?;
    for v in values.iter_mut() {
        // round-off can leave tiny negatives on rank-deficient data
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    for r in 0..dim {
        let row = vectors.row_mut(r);
        let mut pivot = 0;
        for (j, v) in row.iter().enumerate() {
            if float::abs(*v) > float::abs(row[pivot]) {
                pivot = j;
            }
        }
        if row[pivot] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    ReductionMap::pca(mean, vectors, values)
}

/// Cumulative explained variance ratio of the top `d` eigenvalues.
pub fn variance_ratio(eigenvalues: &[f64], d: usize) -> Result<f64> {
    check_spectrum(eigenvalues)?;
    if d == 0 || d > eigenvalues.len() {
        return Err(Error::Dimension {
            context: "variance_ratio d (1..=D)",
            expected: eigenvalues.len(),
            found: d,
        });
    }
    if d == eigenvalues.len() {
        return Ok(1.0);
    }
    let total: f64 = eigenvalues.iter().sum();
    let head: f64 = eigenvalues[..d].iter().sum();
    Ok((head / total).min(1.0))
}

fn check_spectrum(eigenvalues: &[f64]) -> Result<()> {
    if eigenvalues.is_empty() {
        return Err(Error::Empty("eigenvalue spectrum"));
    }
    if eigenvalues.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::Domain("eigenvalues must be finite and non-negative".into()));
    }
    if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Domain("eigenvalues must be sorted descending".into()));
    }
    if eigenvalues.iter().all(|&l| l == 0.0) {
        return Err(Error::Degenerate("all-zero eigenvalue spectrum"));
    }
    Ok(())
}

/// Smallest `d` whose variance ratio reaches `threshold`.
pub fn select_dim(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    check_spectrum(eigenvalues)?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Domain(alloc::format!(
            "variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let total: f64 = eigenvalues.iter().sum();
    let mut head = 0.0;
    for (k, l) in eigenvalues.iter().enumerate() {
        head += l;
        if k + 1 == eigenvalues.len() || head / total >= threshold {
            return Ok(k + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// Keeps the top `d` directions of a PCA map.
pub fn truncate(map: &ReductionMap, d: usize) -> Result<ReductionMap> {
    if map.kind != ReductionKind::PcaFixed {
        return Err(Error::Domain("only PCA maps can be truncated".into()));
    }
    if d == 0 || d > map.out_dim() {
        return Err(Error::Dimension {
            context: "truncate d (1..=current d)",
            expected: map.out_dim(),
            found: d,
        });
    }
    let cols = map.in_dim();
    let matrix = Matrix::new(d, cols, map.matrix.as_slice()[..d * cols].to_vec())?;
    Ok(ReductionMap {
        kind: ReductionKind::PcaFixed,
        matrix,
        bias: vec![0.0; d],
        mean: map.mean.clone(),
        eigenvalues: map.eigenvalues[..d].to_vec(),
    })
}
