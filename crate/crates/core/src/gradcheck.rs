//! Central finite-difference checks of the analytic cross-entropy gradients.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::float;
use crate::gmm::{CovarianceFamily, GmmParams};
use crate::reduction::ReductionMap;
use crate::tensor_math::Matrix;
use crate::training::{self, Gradients};

/// Denominator floor of [`relative_error`], so that coordinates whose true
/// gradient is ~0 are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    float::abs(a - b) / float::abs(a).max(float::abs(b)).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub group: &'static str,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    /// Only groups with at least one coordinate are listed.
    pub groups: Vec<GroupError>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

/// A random problem for gradient checking.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: GmmParams,
    pub reduction: Option<ReductionMap>,
    pub features: Matrix,
    pub labels: Vec<usize>,
}

/// Draws a well-conditioned random instance: covariances sit far above
/// their floors and samples lie near their class means so posteriors are
/// not saturated. With `reduction_in_dim = Some(D)`, features live in `R^D`
/// and pass through a random learnable map first.
pub fn random_instance(
    family: CovarianceFamily,
    classes: usize,
    components: usize,
    dim: usize,
    batch: usize,
    reduction_in_dim: Option<usize>,
    seed: u64,
) -> Result<Instance> {
    if classes == 0 || components == 0 || dim == 0 || batch == 0 {
        return Err(Error::Domain("instance shape must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |scale: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    };
    let k = classes * components;
    let prior = (0..classes).map(|_| normal(0.5)).collect();
    let weights = (0..k).map(|_| normal(0.5)).collect();
    let means: Vec<f64> = (0..k * dim).map(|_| normal(1.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let cov: Vec<f64> = match family {
        CovarianceFamily::Spherical | CovarianceFamily::Diagonal => (0..k * family.cov_len(dim))
            .map(|_| rng.random_range(0.5..2.0))
            .collect(),
        CovarianceFamily::Full => {
            let mut v = Vec::with_capacity(k * family.cov_len(dim));
            for _ in 0..k {
                for r in 0..dim {
                    for c in 0..=r {
                        v.push(if r == c {
                            rng.random_range(0.7..1.5)
                        } else {
                            rng.random_range(-0.3..0.3)
                        });
                    }
                }
            }
            v
        }
    };
    let params = GmmParams::from_parts(family, classes, components, dim, prior, weights, means, cov)?;

    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    let mut latent = Vec::with_capacity(batch * dim);
    for &y in &labels {
        let i = rng.random_range(0..components);
        for &m in params.mean(y, i) {
            let z: f64 = rng.sample(StandardNormal);
            latent.push(m + 0.8 * z);
        }
    }
    let (features, reduction) = match reduction_in_dim {
        None => (Matrix::new(batch, dim, latent)?, None),
        Some(in_dim) => {
            let scale = 1.0 / float::sqrt(in_dim as f64);
            let m = Matrix::new(
                dim,
                in_dim,
                (0..dim * in_dim)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z * scale
                    })
                    .collect(),
            )?;
            let bias = (0..dim)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    0.1 * z
                })
                .collect();
            let x = (0..batch * in_dim)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z
                })
                .collect();
            (Matrix::new(batch, in_dim, x)?, Some(ReductionMap::learnable(m, bias)?))
        }
    };
    Ok(Instance {
        params,
        reduction,
        features,
        labels,
    })
}

/// Compares analytic gradients with central differences of step `h`.
pub fn check_gradients(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    features: &Matrix,
    labels: &[usize],
    h: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = training::loss_and_gradients(params, reduction, features, labels)?;
    let mut p = params.clone();
    let mut r = reduction.cloned();
    let mut report = GradCheckReport::default();
    for (gi, (name, grad)) in analytic.groups().into_iter().enumerate() {
        if grad.is_empty() {
            continue;
        }
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for j in 0..grad.len() {
            let orig = coordinate(&mut p, &mut r, gi, j);
            *coordinate_mut(&mut p, &mut r, gi, j) = orig + h;
            let up = training::loss(&p, r.as_ref(), features, labels)?;
            *coordinate_mut(&mut p, &mut r, gi, j) = orig - h;
            let down = training::loss(&p, r.as_ref(), features, labels)?;
            *coordinate_mut(&mut p, &mut r, gi, j) = orig;
            let numeric = (up - down) / (2.0 * h);
            max_rel = max_rel.max(relative_error(grad[j], numeric));
            max_abs = max_abs.max(float::abs(grad[j] - numeric));
        }
        report.groups.push(GroupError {
            group: name,
            coordinates: grad.len(),
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    Ok(report)
}

fn coordinate(p: &mut GmmParams, r: &mut Option<ReductionMap>, group: usize, j: usize) -> f64 {
    *coordinate_mut(p, r, group, j)
}

fn coordinate_mut<'a>(
    p: &'a mut GmmParams,
    r: &'a mut Option<ReductionMap>,
    group: usize,
    j: usize,
) -> &'a mut f64 {
    match group {
        0 => &mut p.prior_logits[j],
        1 => &mut p.weight_logits[j],
        2 => &mut p.means[j],
        3 => &mut p.bandwidth_raw[j],
        4 => &mut r.as_mut().expect("reduction present").matrix.as_mut_slice()[j],
        _ => &mut r.as_mut().expect("reduction present").bias[j],
    }
}

/// Group names in the order used by [`Gradients::groups`].
pub fn group_names(g: &Gradients) -> Vec<&'static str> {
    g.groups().iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn small_instances_pass() {
        for family in CovarianceFamily::ALL {
            let inst = random_instance(family, 3, 2, 4, 8, None, 17).unwrap();
            let rep = check_gradients(&inst.params, None, &inst.features, &inst.labels, 1e-5).unwrap();
            assert!(rep.max_rel_error() < 1e-4, "{family:?}: {rep:?}");
        }
    }
}
