//! Dense row-major kernels and numerically safe primitives.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Wraps a row-major buffer. Fails unless `data.len() == rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major backing buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Iterator over rows.
    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a 0-column matrix has no data anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                context: "matmul inner dimension",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                context: "matvec",
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        float::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// `log Σ exp(v_i)` evaluated around the maximum.
///
/// Entries may be `-inf` as long as at least one is finite.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("log_sum_exp input"));
    }
    let m = max_of(v);
    if m == f64::NEG_INFINITY {
        return Err(Error::Degenerate("log_sum_exp of all -inf entries"));
    }
    Ok(lse_with_max(v, m))
}

#[inline]
fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
fn lse_with_max(v: &[f64], m: f64) -> f64 {
    let s: f64 = v.iter().map(|&x| float::exp(x - m)).sum();
    m + float::ln(s)
}

/// Unchecked variant for hot loops where the caller guarantees a finite entry.
#[inline]
pub(crate) fn lse(v: &[f64]) -> f64 {
    lse_with_max(v, max_of(v))
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = max_of(v);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = float::exp(*x - m);
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// Log-softmax, `v_i - lse(v)`.
pub(crate) fn log_softmax_in_place(v: &mut [f64]) {
    let l = lse(v);
    for x in v.iter_mut() {
        *x -= l;
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Dimension {
            context: "cholesky (square matrix)",
            expected: a.rows,
            found: a.cols,
        });
    }
    let n = a.rows;
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(float::abs(*v)));
    for i in 0..n {
        for j in 0..i {
            if float::abs(a.get(i, j) - a.get(j, i)) > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Degenerate("cholesky input is not symmetric"));
            }
        }
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = float::sqrt(diag);
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order together with a matrix whose
/// rows are the matching unit eigenvectors. Householder tridiagonalisation
/// followed by implicit QL iterations.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::Dimension {
            context: "symmetric_eigen (square matrix)",
            expected: a.rows,
            found: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Err(Error::Empty("symmetric_eigen input"));
    }
    if !a.is_finite() {
        return Err(Error::Degenerate("symmetric_eigen input has non-finite entries"));
    }
    // v is column-oriented here: column j ends up holding eigenvector j.
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps equal eigenvalues in a reproducible order
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (r, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(r, k, v.get(k, src));
        }
    }
    Ok((values, vectors))
}

fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += float::abs(d[k]);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
                v.set(j, i, 0.0);
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = float::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.get(j, j) * f;
                for k in j + 1..i {
                    g += v.get(k, j) * d[k];
                    e[k] += v.get(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = v.get(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, upd);
                }
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v.set(n - 1, i, v.get(i, i));
        v.set(i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                for k in 0..=i {
                    let upd = v.get(k, j) - g * d[k];
                    v.set(k, j, upd);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, 0.0);
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, 0.0);
    }
    v.set(n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

fn ql_implicit(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(float::abs(d[l]) + float::abs(e[l]));
        let mut m = l;
        while m < n - 1 && float::abs(e[m]) > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 64 {
                    return Err(Error::Degenerate("eigenvalue iteration did not converge"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = float::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = float::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v.get(k, i + 1);
                        let vk = v.get(k, i);
                        v.set(k, i + 1, s * vk + c * vk1);
                        v.set(k, i, c * vk - s * vk1);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if float::abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Solves `L·z = b` in place for lower-triangular `L` stored packed row by
/// row (`L[i][j]` at `i*(i+1)/2 + j`). On entry `v` holds `b`, on exit `z`.
pub(crate) fn solve_lower_packed(l: &[f64], v: &mut [f64]) {
    for i in 0..v.len() {
        let row = &l[i * (i + 1) / 2..];
        let mut s = v[i];
        for j in 0..i {
            s -= row[j] * v[j];
        }
        v[i] = s / row[i];
    }
}

/// Solves `Lᵀ·w = z` for packed lower-triangular `L`.
pub(crate) fn solve_lower_transpose_packed(l: &[f64], z: &[f64], w: &mut [f64]) {
    let n = z.len();
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * (k + 1) / 2 + i] * w[k];
        }
        w[i] = s / l[i * (i + 1) / 2 + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        float::abs(a - b) <= tol
    }

    #[test]
    fn log_sum_exp_examples() {
        assert!(close(log_sum_exp(&[0.0, 0.0]).unwrap(), core::f64::consts::LN_2, 1e-15));
        for x in [-3.5, 0.0, 7.25, 1e8] {
            assert_eq!(log_sum_exp(&[x]).unwrap(), x);
        }
        // 1000 + ln 2 = 1000.693147180559945309417232121458...
        let v = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!(close(v, 1_000.693_147_180_559_9, 1e-12));
        assert!(close(log_sum_exp(&[f64::NEG_INFINITY, 2.0]).unwrap(), 2.0, 0.0));
    }

    #[test]
    fn log_sum_exp_errors() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::Empty(_))));
        assert!(matches!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for p in &s {
            assert!(close(*p, 1.0 / 3.0, 1e-15));
        }
        let s = softmax(&[0.0, float::ln(3.0)]).unwrap();
        assert!(close(s[0], 0.25, 1e-15) && close(s[1], 0.75, 1e-15));
        let a = softmax(&[0.0, 1.0]).unwrap();
        let b = softmax(&[-41.5, -40.5]).unwrap();
        assert!(close(a[0], b[0], 1e-15) && close(a[1], b[1], 1e-15));
        assert!(matches!(softmax(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));
        let a = Matrix::from_rows(&[&[4.0, 0.0], &[0.0, 9.0]]).unwrap();
        assert_eq!(cholesky(&a).unwrap().into_vec(), vec![2.0, 0.0, 0.0, 3.0]);
        let a = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_eq!(l.as_slice(), &[2.0, 0.0, 1.0, 2.0]);
        let back = l.matmul(&l.transpose()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn cholesky_errors() {
        assert!(matches!(cholesky(&Matrix::zeros(2, 3)), Err(Error::Dimension { .. })));
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert_eq!(cholesky(&a), Err(Error::NotPositiveDefinite { pivot: 1 }));
        let a = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::Degenerate(_))));
    }

    #[test]
    fn eigen_small_cases() {
        let a = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 5.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!(close(vals[0], 5.0, 1e-14) && close(vals[1], 2.0, 1e-14));
        assert!(close(float::abs(vecs.get(0, 1)), 1.0, 1e-14));
        let (vals, _) = symmetric_eigen(&Matrix::from_rows(&[&[3.0]]).unwrap()).unwrap();
        assert_eq!(vals, vec![3.0]);
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!(close(vals[0], 3.0, 1e-14) && close(vals[1], 1.0, 1e-14));
        let r = vecs.row(0);
        assert!(close(float::abs(r[0]), core::f64::consts::FRAC_1_SQRT_2, 1e-14));
    }

    #[test]
    fn packed_triangular_solves() {
        // L = [[2,0],[1,3]]
        let l = [2.0, 1.0, 3.0];
        let mut z = [4.0, 11.0];
        solve_lower_packed(&l, &mut z);
        assert_eq!(z, [2.0, 3.0]);
        let mut w = [0.0; 2];
        // Lᵀ = [[2,1],[0,3]], solve for w with Lᵀw = [5, 6] -> w = [1.5, 2]
        solve_lower_transpose_packed(&l, &[5.0, 6.0], &mut w);
        assert_eq!(w, [1.5, 2.0]);
    }
}
