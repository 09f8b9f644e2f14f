//! The mixture posterior layer.
//!
//! Every class `c` owns a `G`-component Gaussian mixture in the feature
//! space. Class priors and component weights are stored as unconstrained
//! logits and mapped through a softmax, so they satisfy their simplex
//! constraints by construction. Covariance parameters are stored directly and
//! projected back above a floor after every optimizer step.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{EmbeddingDataset, SplitTag};
use crate::error::{Error, Result};
use crate::float;
use crate::tensor_math::{self, squared_distance, Matrix};

/// Minimum value of a stored variance (spherical bandwidth or diagonal entry).
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// Minimum value of a diagonal entry of a full-covariance Cholesky factor.
pub const CHOLESKY_DIAG_FLOOR: f64 = 1e-3;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Covariance structure shared by every component of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceFamily {
    /// `Σ = b·I`, one scalar per component.
    Spherical,
    /// `Σ = diag(σ²)`, `d` scalars per component.
    Diagonal,
    /// `Σ = L·Lᵀ` with a packed lower-triangular `L`, `d(d+1)/2` scalars.
    Full,
}

impl CovarianceFamily {
    pub const ALL: [CovarianceFamily; 3] = [Self::Spherical, Self::Diagonal, Self::Full];

    /// Number of stored covariance scalars per component in dimension `d`.
    pub fn cov_len(self, d: usize) -> usize {
        match self {
            Self::Spherical => 1,
            Self::Diagonal => d,
            Self::Full => d * (d + 1) / 2,
        }
    }

    /// Checkpoint code: 0 spherical, 1 diagonal, 2 full.
    pub fn code(self) -> u8 {
        match self {
            Self::Spherical => 0,
            Self::Diagonal => 1,
            Self::Full => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Spherical),
            1 => Some(Self::Diagonal),
            2 => Some(Self::Full),
            _ => None,
        }
    }

    /// Single-letter tag (`s`, `d`, `f`).
    pub fn letter(self) -> char {
        match self {
            Self::Spherical => 's',
            Self::Diagonal => 'd',
            Self::Full => 'f',
        }
    }

    pub fn from_letter(s: &str) -> Option<Self> {
        match s {
            "s" | "S" | "spherical" => Some(Self::Spherical),
            "d" | "D" | "diagonal" => Some(Self::Diagonal),
            "f" | "F" | "full" => Some(Self::Full),
            _ => None,
        }
    }
}

/// Trainable tensors of a mixture classifier with `C` classes, `G`
/// components per class in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    family: CovarianceFamily,
    classes: usize,
    components: usize,
    dim: usize,
    pub(crate) prior_logits: Vec<f64>,
    pub(crate) weight_logits: Vec<f64>,
    pub(crate) means: Vec<f64>,
    pub(crate) bandwidth_raw: Vec<f64>,
}

impl GmmParams {
    /// Assembles parameters from raw buffers, checking every length.
    ///
    /// `classes == 1` is accepted here for validation utilities; training
    /// refuses it.
    pub fn from_parts(
        family: CovarianceFamily,
        classes: usize,
        components: usize,
        dim: usize,
        prior_logits: Vec<f64>,
        weight_logits: Vec<f64>,
        means: Vec<f64>,
        bandwidth_raw: Vec<f64>,
    ) -> Result<Self> {
        if classes == 0 || components == 0 || dim == 0 {
            return Err(Error::Domain(alloc::format!(
                "classifier shape must be positive, got C={classes} G={components} d={dim}"
            )));
        }
        let checks = [
            ("prior_logits", classes, prior_logits.len()),
            ("weight_logits", classes * components, weight_logits.len()),
            ("means", classes * components * dim, means.len()),
            (
                "bandwidth_raw",
                classes * components * family.cov_len(dim),
                bandwidth_raw.len(),
            ),
        ];
        for (context, expected, found) in checks {
            if expected != found {
                return Err(Error::Dimension {
                    context,
                    expected,
                    found,
                });
            }
        }
        let all = prior_logits
            .iter()
            .chain(&weight_logits)
            .chain(&means)
            .chain(&bandwidth_raw);
        if !all.clone().all(|v| v.is_finite()) {
            return Err(Error::Degenerate("non-finite classifier parameter"));
        }
        let p = Self {
            family,
            classes,
            components,
            dim,
            prior_logits,
            weight_logits,
            means,
            bandwidth_raw,
        };
        p.check_covariances()?;
        Ok(p)
    }

    fn check_covariances(&self) -> Result<()> {
        match self.family {
            CovarianceFamily::Spherical | CovarianceFamily::Diagonal => {
                if self.bandwidth_raw.iter().any(|&b| b < BANDWIDTH_FLOOR) {
                    return Err(Error::Domain(alloc::format!(
                        "bandwidths must be at least {BANDWIDTH_FLOOR}"
                    )));
                }
            }
            CovarianceFamily::Full => {
                let len = self.family.cov_len(self.dim);
                for l in self.bandwidth_raw.chunks_exact(len) {
                    for j in 0..self.dim {
                        if !(l[j * (j + 1) / 2 + j] > 0.0) {
                            return Err(Error::Domain(
                                "Cholesky factor diagonal must be positive".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> CovarianceFamily {
        self.family
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prior_logits(&self) -> &[f64] {
        &self.prior_logits
    }

    /// Row-major `C × G`.
    pub fn weight_logits(&self) -> &[f64] {
        &self.weight_logits
    }

    /// Row-major `C × G × d`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Row-major `C × G × cov_len(d)`.
    pub fn bandwidth_raw(&self) -> &[f64] {
        &self.bandwidth_raw
    }

    /// Class priors `P = softmax(prior_logits)`.
    pub fn priors(&self) -> Vec<f64> {
        let mut p = self.prior_logits.clone();
        tensor_math::softmax_in_place(&mut p);
        p
    }

    /// Component weights of class `c`, `softmax(weight_logits[c])`.
    pub fn weights(&self, c: usize) -> Vec<f64> {
        let g = self.components;
        let mut w = self.weight_logits[c * g..(c + 1) * g].to_vec();
        tensor_math::softmax_in_place(&mut w);
        w
    }

    #[inline]
    pub fn mean(&self, c: usize, i: usize) -> &[f64] {
        let k = c * self.components + i;
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn cov(&self, c: usize, i: usize) -> &[f64] {
        let len = self.family.cov_len(self.dim);
        let k = c * self.components + i;
        &self.bandwidth_raw[k * len..(k + 1) * len]
    }

    /// Number of learnt scalars. Weight logits only count when `G ≥ 2`.
    pub fn trainable_count(&self) -> usize {
        let weights = if self.components >= 2 {
            self.weight_logits.len()
        } else {
            0
        };
        self.prior_logits.len() + weights + self.means.len() + self.bandwidth_raw.len()
    }

    /// Projects covariance parameters back onto their feasible set.
    pub fn clamp_covariances(&mut self) {
        clamp_covariance_buffer(self.family, self.dim, &mut self.bandwidth_raw);
    }
}

pub(crate) fn clamp_covariance_buffer(family: CovarianceFamily, dim: usize, buf: &mut [f64]) {
    match family {
        CovarianceFamily::Spherical | CovarianceFamily::Diagonal => {
            for b in buf.iter_mut() {
                if *b < BANDWIDTH_FLOOR {
                    *b = BANDWIDTH_FLOOR;
                }
            }
        }
        CovarianceFamily::Full => {
            let len = family.cov_len(dim);
            for l in buf.chunks_exact_mut(len) {
                for j in 0..dim {
                    let k = j * (j + 1) / 2 + j;
                    if l[k] < CHOLESKY_DIAG_FLOOR {
                        l[k] = CHOLESKY_DIAG_FLOOR;
                    }
                }
            }
        }
    }
}

/// `log φ(x | μ, Σ)` for one component.
pub fn log_component_density(
    x: &[f64],
    mean: &[f64],
    cov: &[f64],
    family: CovarianceFamily,
) -> Result<f64> {
    let d = x.len();
    if mean.len() != d {
        return Err(Error::Dimension {
            context: "component mean",
            expected: d,
            found: mean.len(),
        });
    }
    if cov.len() != family.cov_len(d) {
        return Err(Error::Dimension {
            context: "component covariance",
            expected: family.cov_len(d),
            found: cov.len(),
        });
    }
    let mut scratch = vec![0.0; d];
    Ok(log_density_unchecked(x, mean, cov, family, &mut scratch))
}

/// Caller guarantees matching lengths; `scratch` has length `d`.
#[inline]
pub(crate) fn log_density_unchecked(
    x: &[f64],
    mean: &[f64],
    cov: &[f64],
    family: CovarianceFamily,
    scratch: &mut [f64],
) -> f64 {
    let d = x.len() as f64;
    match family {
        CovarianceFamily::Spherical => {
            let b = cov[0];
            -0.5 * d * (LN_2PI + float::ln(b)) - squared_distance(x, mean) / (2.0 * b)
        }
        CovarianceFamily::Diagonal => {
            let mut acc = 0.0;
            for ((&xj, &mj), &v) in x.iter().zip(mean).zip(cov) {
                let e = xj - mj;
                acc += float::ln(v) + e * e / v;
            }
            -0.5 * (d * LN_2PI + acc)
        }
        CovarianceFamily::Full => {
            for ((s, &xj), &mj) in scratch.iter_mut().zip(x).zip(mean) {
                *s = xj - mj;
            }
            tensor_math::solve_lower_packed(cov, scratch);
            let mut log_det_half = 0.0;
            for j in 0..x.len() {
                log_det_half += float::ln(cov[j * (j + 1) / 2 + j]);
            }
            let q: f64 = scratch.iter().map(|z| z * z).sum();
            -0.5 * (d * LN_2PI + q) - log_det_half
        }
    }
}

/// Unnormalised class log-scores `log P_c + log Σ_i W_ci φ_ci(x)`.
pub(crate) fn class_scores(params: &GmmParams, x: &[f64]) -> Vec<f64> {
    let g = params.components;
    let mut scores = params.prior_logits.clone();
    tensor_math::log_softmax_in_place(&mut scores);
    let mut comp = vec![0.0; g];
    let mut scratch = vec![0.0; params.dim];
    for (c, score) in scores.iter_mut().enumerate() {
        comp.copy_from_slice(&params.weight_logits[c * g..(c + 1) * g]);
        tensor_math::log_softmax_in_place(&mut comp);
        for (i, a) in comp.iter_mut().enumerate() {
            *a += log_density_unchecked(x, params.mean(c, i), params.cov(c, i), params.family, &mut scratch);
        }
        *score += tensor_math::lse(&comp);
    }
    scores
}

fn check_input(params: &GmmParams, x: &[f64]) -> Result<()> {
    if x.len() != params.dim {
        return Err(Error::Dimension {
            context: "classifier input",
            expected: params.dim,
            found: x.len(),
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate("non-finite classifier input"));
    }
    Ok(())
}

/// Class log-posteriors `log p(c | x)`.
pub fn log_posterior(params: &GmmParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let mut s = class_scores(params, x);
    tensor_math::log_softmax_in_place(&mut s);
    Ok(s)
}

/// MAP class; ties go to the lowest index.
pub fn predict(params: &GmmParams, x: &[f64]) -> Result<usize> {
    check_input(params, x)?;
    Ok(argmax(&class_scores(params, x)))
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Initialises parameters from the training split of `dataset`.
pub fn init_params(
    dataset: &EmbeddingDataset,
    family: CovarianceFamily,
    components: usize,
    seed: u64,
) -> Result<GmmParams> {
    let (features, labels) = dataset.subset(SplitTag::Train);
    init_params_from(&features, &labels, dataset.num_classes(), family, components, seed)
}

/// Initialises parameters from explicit feature rows.
///
/// Means: the class mean when `G = 1`, otherwise `G` distinct class samples
/// drawn with the seeded generator (cycled if a class has fewer than `G`
/// samples). Covariances start at the per-class sample variance. Prior and
/// weight logits start at zero.
pub fn init_params_from(
    features: &Matrix,
    labels: &[usize],
    classes: usize,
    family: CovarianceFamily,
    components: usize,
    seed: u64,
) -> Result<GmmParams> {
    if features.rows() != labels.len() {
        return Err(Error::Dimension {
            context: "labels per feature row",
            expected: features.rows(),
            found: labels.len(),
        });
    }
    if components == 0 {
        return Err(Error::Domain("components per class must be at least 1".into()));
    }
    let d = features.cols();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (n, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Label {
                label: y as i64,
                classes,
            });
        }
        members[y].push(n);
    }
    if let Some(class) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::MissingClass { class });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov_len = family.cov_len(d);
    let mut means = Vec::with_capacity(classes * components * d);
    let mut bandwidth = Vec::with_capacity(classes * components * cov_len);
    for rows in &members {
        let n = rows.len() as f64;
        let mut mu = vec![0.0; d];
        for &r in rows {
            for (m, v) in mu.iter_mut().zip(features.row(r)) {
                *m += v;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &r in rows {
            for ((s, v), m) in var.iter_mut().zip(features.row(r)).zip(&mu) {
                let e = v - m;
                *s += e * e;
            }
        }
        var.iter_mut().for_each(|s| *s /= n);

        if components == 1 {
            means.extend_from_slice(&mu);
        } else {
            let picked = index::sample(&mut rng, rows.len(), components.min(rows.len()));
            let picked: Vec<usize> = picked.into_iter().collect();
            for i in 0..components {
                means.extend_from_slice(features.row(rows[picked[i % picked.len()]]));
            }
        }

        let cov: Vec<f64> = match family {
            CovarianceFamily::Spherical => {
                let b = var.iter().sum::<f64>() / d as f64;
                vec![b.max(BANDWIDTH_FLOOR)]
            }
            CovarianceFamily::Diagonal => var.iter().map(|v| v.max(BANDWIDTH_FLOOR)).collect(),
            CovarianceFamily::Full => {
                let mut l = vec![0.0; cov_len];
                for j in 0..d {
                    l[j * (j + 1) / 2 + j] = float::sqrt(var[j].max(BANDWIDTH_FLOOR)).max(CHOLESKY_DIAG_FLOOR);
                }
                l
            }
        };
        for _ in 0..components {
            bandwidth.extend_from_slice(&cov);
        }
    }

    GmmParams::from_parts(
        family,
        classes,
        components,
        d,
        vec![0.0; classes],
        vec![0.0; classes * components],
        means,
        bandwidth,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_1d() -> GmmParams {
        GmmParams::from_parts(
            CovarianceFamily::Spherical,
            2,
            1,
            1,
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![-1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn component_density_examples() {
        let v = log_component_density(&[0.0, 0.0], &[0.0, 0.0], &[1.0], CovarianceFamily::Spherical).unwrap();
        assert!((v + 1.837_877_066_409_345).abs() < 1e-12);
        // standard normal log-density at 1: -0.5 ln(2π) - 0.5
        let v = log_component_density(&[1.0], &[0.0], &[1.0], CovarianceFamily::Spherical).unwrap();
        assert!((v + 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!(matches!(
            log_component_density(&[1.0], &[0.0, 1.0], &[1.0], CovarianceFamily::Spherical),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn families_agree_on_isotropic_covariance() {
        let x = [0.3, -1.2, 2.5];
        let mu = [0.1, 0.4, -0.7];
        let b = 0.37;
        let s = log_component_density(&x, &mu, &[b], CovarianceFamily::Spherical).unwrap();
        let dg = log_component_density(&x, &mu, &[b; 3], CovarianceFamily::Diagonal).unwrap();
        let r = b.sqrt();
        let l = [r, 0.0, r, 0.0, 0.0, r];
        let f = log_component_density(&x, &mu, &l, CovarianceFamily::Full).unwrap();
        assert!((s - dg).abs() < 1e-12);
        assert!((s - f).abs() < 1e-12);
    }

    #[test]
    fn single_class_posterior_is_one() {
        let p = GmmParams::from_parts(
            CovarianceFamily::Spherical,
            1,
            1,
            2,
            vec![0.3],
            vec![0.0],
            vec![1.0, 2.0],
            vec![0.5],
        )
        .unwrap();
        let lp = log_posterior(&p, &[7.0, -3.0]).unwrap();
        assert_eq!(lp.len(), 1);
        assert!(lp[0].abs() < 1e-15);
    }

    #[test]
    fn two_class_posterior_and_predict() {
        let p = two_class_1d();
        let lp = log_posterior(&p, &[0.0]).unwrap();
        assert!((lp[0].exp() - 0.5).abs() < 1e-15);
        assert_eq!(predict(&p, &[0.0]).unwrap(), 0);
        // posterior of class 1 at 0.5 is 1/(1+e^{-1})
        let lp = log_posterior(&p, &[0.5]).unwrap();
        assert!((lp[0].exp() - 0.268_941_421_369_995).abs() < 1e-12);
        assert!((lp[1].exp() - 0.731_058_578_630_005).abs() < 1e-12);
        assert_eq!(predict(&p, &[0.5]).unwrap(), 1);
        assert_eq!(predict(&p, &[-40.0]).unwrap(), 0);
        assert_eq!(predict(&p, &[40.0]).unwrap(), 1);
        assert!(matches!(log_posterior(&p, &[0.0, 1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn from_parts_rejects_bad_shapes() {
        let r = GmmParams::from_parts(
            CovarianceFamily::Diagonal,
            2,
            1,
            2,
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.0; 4],
            vec![1.0; 2],
        );
        assert!(matches!(r, Err(Error::Dimension { context: "bandwidth_raw", .. })));
        let r = GmmParams::from_parts(
            CovarianceFamily::Spherical,
            2,
            1,
            1,
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![1e-9, 1.0],
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn init_degenerate_classes() {
        let f = Matrix::from_rows(&[&[1.0, 2.0], &[1.0, 2.0], &[-3.0, 0.5], &[-3.0, 0.5]]).unwrap();
        let y = [0, 0, 1, 1];
        let p = init_params_from(&f, &y, 2, CovarianceFamily::Spherical, 1, 7).unwrap();
        assert_eq!(p.mean(0, 0), &[1.0, 2.0]);
        assert_eq!(p.mean(1, 0), &[-3.0, 0.5]);
        assert_eq!(p.bandwidth_raw(), &[BANDWIDTH_FLOOR, BANDWIDTH_FLOOR]);
        let q = init_params_from(&f, &y, 2, CovarianceFamily::Spherical, 1, 12345).unwrap();
        assert_eq!(p, q);
        let full = init_params_from(&f, &y, 2, CovarianceFamily::Full, 1, 0).unwrap();
        assert_eq!(full.cov(0, 0), &[1e-3, 0.0, 1e-3]);
    }

    #[test]
    fn init_missing_class() {
        let f = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        assert_eq!(
            init_params_from(&f, &[0, 0], 3, CovarianceFamily::Spherical, 1, 0),
            Err(Error::MissingClass { class: 1 })
        );
    }

    #[test]
    fn init_two_components_picks_distinct_samples() {
        let f = Matrix::from_rows(&[&[0.0], &[10.0], &[5.0], &[6.0]]).unwrap();
        let y = [0, 0, 1, 1];
        for seed in 0..20 {
            let p = init_params_from(&f, &y, 2, CovarianceFamily::Spherical, 2, seed).unwrap();
            let a = p.mean(0, 0)[0];
            let b = p.mean(0, 1)[0];
            assert_ne!(a, b);
            assert!([0.0, 10.0].contains(&a) && [0.0, 10.0].contains(&b));
            // spherical init is the class variance: 25 for {0, 10}
            assert_eq!(p.cov(0, 0), &[25.0]);
        }
    }

    #[test]
    fn trainable_count_skips_weights_for_single_component() {
        let p = two_class_1d();
        assert_eq!(p.trainable_count(), 2 + 2 + 2);
    }
}
