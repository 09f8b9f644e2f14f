use gmmc_core::reduction::{self, ReductionMap};
use gmmc_core::tensor_math::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_features(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..3.0)).collect();
    let data = (0..n * d).map(|k| scales[k % d] * rng.random_range(-1.0..1.0) + 0.3 * (k % 3) as f64).collect();
    Matrix::new(n, d, data).unwrap()
}

fn covariance(x: &Matrix) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let mut c = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let s: f64 = (0..n).map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b])).sum();
            c.set(a, b, s / n as f64);
        }
    }
    c
}

/// Cyclic Jacobi rotations; eigenvalues sorted descending.
fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|r| a.row(r).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| m[i][i].max(0.0)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn pca_matches_jacobi_and_is_orthonormal() {
    for (n, d, seed) in [(50, 3, 1), (200, 12, 2), (40, 30, 3), (10, 20, 4)] {
        let x = random_features(n, d, seed);
        let map = reduction::fit_pca(&x).unwrap();
        let cov = covariance(&x);
        let oracle = jacobi_eigenvalues(&cov);
        let eig = map.eigenvalues();
        let scale = oracle[0].max(1.0);
        for (a, b) in eig.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * scale, "{a} vs {b}");
        }
        let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
        assert!((eig.iter().sum::<f64>() - trace).abs() <= 1e-8 * trace);
        let v = map.matrix();
        let gram = v.matmul(&v.transpose()).unwrap();
        for i in 0..d {
            for j in 0..d {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - e).abs() < 1e-8);
            }
        }
        let ratios: Vec<f64> = (1..=d).map(|k| reduction::variance_ratio(eig, k).unwrap()).collect();
        assert!(ratios.windows(2).all(|w| w[0] <= w[1]));
        assert!((ratios[d - 1] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn truncated_reconstruction_error_shrinks_with_d() {
    let x = random_features(120, 8, 9);
    let full = reduction::fit_pca(&x).unwrap();
    let mut last = f64::INFINITY;
    for d in 1..=8 {
        let m = reduction::truncate(&full, d).unwrap();
        let mut err = 0.0;
        for r in 0..x.rows() {
            let y = m.apply(x.row(r)).unwrap();
            for j in 0..8 {
                let back = full.mean()[j] + (0..d).map(|k| m.matrix().get(k, j) * y[k]).sum::<f64>();
                err += (x.get(r, j) - back).powi(2);
            }
        }
        assert!(err <= last + 1e-9);
        last = err;
    }
    assert!(last < 1e-12 * x.rows() as f64);
}

#[test]
fn learnable_map_is_affine() {
    let a = Matrix::from_rows(&[&[1.0, 2.0, 0.0], &[0.0, -1.0, 3.0]]).unwrap();
    let m = ReductionMap::learnable(a, vec![0.5, -0.5]).unwrap();
    assert_eq!(m.apply(&[1.0, 1.0, 1.0]).unwrap(), vec![3.5, 1.5]);
}

proptest! {
    #[test]
    fn select_dim_matches_brute_force(
        raw in prop::collection::vec(0.0f64..10.0, 1..40),
        theta in 0.001f64..=1.0,
    ) {
        let mut eig = raw;
        eig.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(eig[0] > 0.0);
        let total: f64 = eig.iter().sum();
        let brute = (1..=eig.len())
            .find(|&d| eig[..d].iter().sum::<f64>() / total >= theta)
            .unwrap_or(eig.len());
        prop_assert_eq!(reduction::select_dim(&eig, theta).unwrap(), brute);
    }
}
