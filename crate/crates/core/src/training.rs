//! Cross-entropy training with analytic gradients, Nesterov SGD and a
//! per-step cosine learning-rate schedule.
//!
//! Batch gradients are accumulated over fixed [`CHUNK_ROWS`]-row chunks that
//! are summed in chunk order. A parallel [`GradientEvaluator`] that keeps the
//! same chunking therefore produces bit-identical results to the serial one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{EmbeddingDataset, SplitTag};
use crate::error::{Error, Result};
use crate::float;
use crate::gmm::{self, CovarianceFamily, GmmParams};
use crate::reduction::{ReductionKind, ReductionMap};
use crate::tensor_math::{self, Matrix};

/// Rows per gradient chunk. Part of the determinism contract.
pub const CHUNK_ROWS: usize = 64;

/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_start: f64,
    pub lr_end: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_start: 1e-3,
            lr_end: 1e-4,
            momentum: 0.9,
            nesterov: true,
            epochs: DEFAULT_EPOCHS,
            batch_size: 256,
            seed: 0,
            shuffle: true,
        }
    }
}

/// Epochs without a learnable reduction.
pub const DEFAULT_EPOCHS: usize = 30;
/// Epochs with a learnable reduction.
pub const DEFAULT_EPOCHS_WITH_REDUCTION: usize = 50;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_end > 0.0) || !(self.lr_start >= self.lr_end) || !self.lr_start.is_finite() {
            return Err(Error::Config(format!(
                "learning rates must satisfy lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            )));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Learning rate of the last step of each epoch.
    pub epoch_lr: Vec<f64>,
    /// Learning rate of every optimizer step.
    pub step_lr: Vec<f64>,
    /// Validation accuracy after each epoch, `None` without a validation split.
    pub epoch_val_accuracy: Vec<Option<f64>>,
    /// Validation accuracy of the returned parameters.
    pub final_accuracy: Option<f64>,
    /// Filled in by callers that own a clock.
    pub wall_seconds: f64,
}

/// Cosine annealing from `lr_start` at `t = 0` to `lr_end` at `t = total`.
pub fn cosine_lr(t: usize, total: usize, lr_start: f64, lr_end: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Degenerate("cosine schedule with zero total steps"));
    }
    if t > total {
        return Err(Error::Domain(format!("schedule step {t} beyond total {total}")));
    }
    let phase = core::f64::consts::PI * t as f64 / total as f64;
    Ok(lr_end + 0.5 * (lr_start - lr_end) * (1.0 + float::cos(phase)))
}

/// Gradients laid out exactly like the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub prior_logits: Vec<f64>,
    pub weight_logits: Vec<f64>,
    pub means: Vec<f64>,
    pub bandwidth_raw: Vec<f64>,
    /// Empty unless a learnable reduction is trained.
    pub reduction_matrix: Vec<f64>,
    /// Empty unless a learnable reduction is trained.
    pub reduction_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(params: &GmmParams, reduction: Option<&ReductionMap>) -> Self {
        let (rm, rb) = match reduction {
            Some(r) if r.kind() == ReductionKind::Learnable => (
                vec![0.0; r.in_dim() * r.out_dim()],
                vec![0.0; r.out_dim()],
            ),
            _ => (Vec::new(), Vec::new()),
        };
        Self {
            prior_logits: vec![0.0; params.prior_logits.len()],
            weight_logits: vec![0.0; params.weight_logits.len()],
            means: vec![0.0; params.means.len()],
            bandwidth_raw: vec![0.0; params.bandwidth_raw.len()],
            reduction_matrix: rm,
            reduction_bias: rb,
        }
    }

    /// Named parameter groups in a fixed order.
    pub fn groups(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("prior_logits", &self.prior_logits),
            ("weight_logits", &self.weight_logits),
            ("means", &self.means),
            ("bandwidth_raw", &self.bandwidth_raw),
            ("reduction_matrix", &self.reduction_matrix),
            ("reduction_bias", &self.reduction_bias),
        ]
    }

    fn groups_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.prior_logits,
            &mut self.weight_logits,
            &mut self.means,
            &mut self.bandwidth_raw,
            &mut self.reduction_matrix,
            &mut self.reduction_bias,
        ]
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.groups_mut().into_iter().zip(other.groups()) {
            for (d, s) in dst.iter_mut().zip(src.1) {
                *d += s;
            }
        }
    }

    fn scale(&mut self, k: f64) {
        for g in self.groups_mut() {
            g.iter_mut().for_each(|v| *v *= k);
        }
    }
}

/// Quantities shared by every sample of a batch.
struct Prepared {
    log_prior: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl Prepared {
    fn new(params: &GmmParams) -> Self {
        let mut log_prior = params.prior_logits.clone();
        tensor_math::log_softmax_in_place(&mut log_prior);
        let g = params.components();
        let mut log_weights = params.weight_logits.clone();
        for row in log_weights.chunks_exact_mut(g) {
            tensor_math::log_softmax_in_place(row);
        }
        let weights = log_weights.iter().map(|&v| float::exp(v)).collect();
        Self {
            log_prior,
            log_weights,
            weights,
        }
    }
}

struct Scratch {
    y: Vec<f64>,
    dy: Vec<f64>,
    e: Vec<f64>,
    w: Vec<f64>,
    comp: Vec<f64>,
    scores: Vec<f64>,
}

impl Scratch {
    fn new(params: &GmmParams) -> Self {
        let d = params.dim();
        Self {
            y: vec![0.0; d],
            dy: vec![0.0; d],
            e: vec![0.0; d],
            w: vec![0.0; d],
            comp: vec![0.0; params.num_classes() * params.components()],
            scores: vec![0.0; params.num_classes()],
        }
    }
}

/// Loss of one sample; with `grads`, also accumulates its gradient.
fn sample_terms(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    prep: &Prepared,
    x: &[f64],
    label: usize,
    s: &mut Scratch,
    grads: Option<&mut Gradients>,
) -> f64 {
    let (c_n, g_n, d) = (params.num_classes(), params.components(), params.dim());
    let family = params.family();
    match reduction {
        Some(r) => r.apply_into(x, &mut s.y),
        None => s.y.copy_from_slice(x),
    }
    for c in 0..c_n {
        let a = &mut s.comp[c * g_n..(c + 1) * g_n];
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = prep.log_weights[c * g_n + i]
                + gmm::log_density_unchecked(&s.y, params.mean(c, i), params.cov(c, i), family, &mut s.e);
        }
        s.scores[c] = prep.log_prior[c] + tensor_math::lse(a);
    }
    let log_norm = tensor_math::lse(&s.scores);
    let loss = log_norm - s.scores[label];
    let Some(grads) = grads else {
        return loss;
    };

    s.dy.iter_mut().for_each(|v| *v = 0.0);
    let cov_len = family.cov_len(d);
    for c in 0..c_n {
        let post = float::exp(s.scores[c] - log_norm);
        let delta = post - if c == label { 1.0 } else { 0.0 };
        grads.prior_logits[c] += delta;
        let class_lse = s.scores[c] - prep.log_prior[c];
        for i in 0..g_n {
            let k = c * g_n + i;
            let resp = float::exp(s.comp[k] - class_lse);
            grads.weight_logits[k] += delta * (resp - prep.weights[k]);
            let g = delta * resp;
            if g == 0.0 {
                continue;
            }
            let mu = params.mean(c, i);
            let cov = params.cov(c, i);
            let gm = &mut grads.means[k * d..(k + 1) * d];
            let gb = &mut grads.bandwidth_raw[k * cov_len..(k + 1) * cov_len];
            match family {
                CovarianceFamily::Spherical => {
                    let b = cov[0];
                    let mut q = 0.0;
                    for j in 0..d {
                        let e = s.y[j] - mu[j];
                        q += e * e;
                        gm[j] += g * e / b;
                        s.dy[j] -= g * e / b;
                    }
                    gb[0] += g * (q / (2.0 * b * b) - d as f64 / (2.0 * b));
                }
                CovarianceFamily::Diagonal => {
                    for j in 0..d {
                        let v = cov[j];
                        let e = s.y[j] - mu[j];
                        gm[j] += g * e / v;
                        gb[j] += g * (e * e / (2.0 * v * v) - 0.5 / v);
                        s.dy[j] -= g * e / v;
                    }
                }
                CovarianceFamily::Full => {
                    // z = L⁻¹(y − μ) in s.e, w = L⁻ᵀ z = Σ⁻¹(y − μ)
                    for j in 0..d {
                        s.e[j] = s.y[j] - mu[j];
                    }
                    tensor_math::solve_lower_packed(cov, &mut s.e);
                    tensor_math::solve_lower_transpose_packed(cov, &s.e, &mut s.w);
                    for j in 0..d {
                        gm[j] += g * s.w[j];
                        s.dy[j] -= g * s.w[j];
                    }
                    for r in 0..d {
                        let base = r * (r + 1) / 2;
                        for col in 0..=r {
                            let mut v = s.w[r] * s.e[col];
                            if r == col {
                                v -= 1.0 / cov[base + r];
                            }
                            gb[base + col] += g * v;
                        }
                    }
                }
            }
        }
    }
    if let Some(r) = reduction {
        if r.kind() == ReductionKind::Learnable {
            let in_dim = r.in_dim();
            for (k, &dyk) in s.dy.iter().enumerate() {
                grads.reduction_bias[k] += dyk;
                for (gm, xj) in grads.reduction_matrix[k * in_dim..(k + 1) * in_dim].iter_mut().zip(x) {
                    *gm += dyk * xj;
                }
            }
        }
    }
    loss
}

fn check_batch(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    features: &Matrix,
    labels: &[usize],
) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::Dimension {
            context: "labels per feature row",
            expected: features.rows(),
            found: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let expected_in = reduction.map_or(params.dim(), |r| r.in_dim());
    if features.cols() != expected_in {
        return Err(Error::Dimension {
            context: "batch feature dimension",
            expected: expected_in,
            found: features.cols(),
        });
    }
    if let Some(r) = reduction {
        if r.out_dim() != params.dim() {
            return Err(Error::Dimension {
                context: "reduction output vs classifier dimension",
                expected: params.dim(),
                found: r.out_dim(),
            });
        }
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= params.num_classes()) {
        return Err(Error::Label {
            label: y as i64,
            classes: params.num_classes(),
        });
    }
    Ok(())
}

/// Summed (not averaged) loss and gradients over `rows` of a batch.
///
/// Building block for evaluators; callers combine chunks with
/// [`combine_chunks`]. Inputs must already be validated.
pub fn chunk_sums(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    features: &Matrix,
    labels: &[usize],
    rows: &[usize],
) -> (f64, Gradients) {
    let prep = Prepared::new(params);
    let mut scratch = Scratch::new(params);
    let mut grads = Gradients::zeros(params, reduction);
    let mut loss = 0.0;
    for &r in rows {
        loss += sample_terms(
            params,
            reduction,
            &prep,
            features.row(r),
            labels[r],
            &mut scratch,
            Some(&mut grads),
        );
    }
    (loss, grads)
}

/// Adds chunk results in order and averages over `n` samples.
pub fn combine_chunks(parts: Vec<(f64, Gradients)>, n: usize) -> (f64, Gradients) {
    let mut it = parts.into_iter();
    let (mut loss, mut grads) = it.next().expect("at least one chunk");
    for (l, g) in it {
        loss += l;
        grads.add_assign(&g);
    }
    let inv = 1.0 / n as f64;
    grads.scale(inv);
    (loss * inv, grads)
}

/// Computes the mean loss and gradients of a batch given by row indices.
pub trait GradientEvaluator {
    fn evaluate(
        &self,
        params: &GmmParams,
        reduction: Option<&ReductionMap>,
        features: &Matrix,
        labels: &[usize],
        rows: &[usize],
    ) -> (f64, Gradients);
}

/// Single-threaded evaluator.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialEvaluator;

impl GradientEvaluator for SerialEvaluator {
    fn evaluate(
        &self,
        params: &GmmParams,
        reduction: Option<&ReductionMap>,
        features: &Matrix,
        labels: &[usize],
        rows: &[usize],
    ) -> (f64, Gradients) {
        let parts = rows
            .chunks(CHUNK_ROWS)
            .map(|chunk| chunk_sums(params, reduction, features, labels, chunk))
            .collect();
        combine_chunks(parts, rows.len())
    }
}

/// Mean cross-entropy `−(1/N) Σ log p(y_n | x_n)` and its exact gradients.
pub fn loss_and_gradients(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    features: &Matrix,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    check_batch(params, reduction, features, labels)?;
    let rows: Vec<usize> = (0..labels.len()).collect();
    Ok(SerialEvaluator.evaluate(params, reduction, features, labels, &rows))
}

/// Mean cross-entropy only.
pub fn loss(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64> {
    check_batch(params, reduction, features, labels)?;
    let prep = Prepared::new(params);
    let mut scratch = Scratch::new(params);
    let total: f64 = (0..labels.len())
        .map(|r| sample_terms(params, reduction, &prep, features.row(r), labels[r], &mut scratch, None))
        .sum();
    Ok(total / labels.len() as f64)
}

/// SGD with optional (Nesterov) momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    velocity: Gradients,
}

impl Sgd {
    pub fn new(params: &GmmParams, reduction: Option<&ReductionMap>) -> Self {
        Self {
            velocity: Gradients::zeros(params, reduction),
        }
    }

    /// One update `p ← p − lr·u` followed by the covariance clamp.
    ///
    /// `v ← μ·v + g`; `u = g + μ·v` with Nesterov, `u = v` otherwise.
    /// Weight logits are frozen when `G = 1`.
    pub fn step(
        &mut self,
        params: &mut GmmParams,
        reduction: Option<&mut ReductionMap>,
        grads: &Gradients,
        lr: f64,
        momentum: f64,
        nesterov: bool,
    ) {
        let v = &mut self.velocity;
        let upd = |p: &mut [f64], v: &mut [f64], g: &[f64]| {
            for ((p, v), &g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = momentum * *v + g;
                let u = if nesterov { g + momentum * *v } else { *v };
                *p -= lr * u;
            }
        };
        upd(&mut params.prior_logits, &mut v.prior_logits, &grads.prior_logits);
        if params.components() >= 2 {
            upd(&mut params.weight_logits, &mut v.weight_logits, &grads.weight_logits);
        }
        upd(&mut params.means, &mut v.means, &grads.means);
        upd(&mut params.bandwidth_raw, &mut v.bandwidth_raw, &grads.bandwidth_raw);
        params.clamp_covariances();
        if let Some(r) = reduction {
            if r.kind() == ReductionKind::Learnable && !grads.reduction_bias.is_empty() {
                upd(r.matrix.as_mut_slice(), &mut v.reduction_matrix, &grads.reduction_matrix);
                upd(&mut r.bias, &mut v.reduction_bias, &grads.reduction_bias);
            }
        }
    }
}

/// Reduction placed in front of the classifier during training.
#[derive(Debug, Clone, PartialEq)]
pub enum ReductionSpec {
    None,
    /// Learnable affine map to `dim` outputs, trained jointly.
    Learnable { dim: usize },
    /// Fixed map (typically PCA) applied to every feature.
    Fixed(ReductionMap),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: GmmParams,
    pub reduction: Option<ReductionMap>,
    pub report: TrainReport,
}

/// Accuracy and confusion counts of a classifier on labelled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    /// Row-major `C × C`, `confusion[true * C + predicted]`.
    pub confusion: Vec<usize>,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Predicts every row (after the optional reduction) and tallies the results.
pub fn evaluate(
    params: &GmmParams,
    reduction: Option<&ReductionMap>,
    features: &Matrix,
    labels: &[usize],
) -> Result<Evaluation> {
    let c_n = params.num_classes();
    let mut confusion = vec![0usize; c_n * c_n];
    let mut correct = 0;
    let expected_in = reduction.map_or(params.dim(), |r| r.in_dim());
    if features.cols() != expected_in {
        return Err(Error::Dimension {
            context: "evaluation feature dimension",
            expected: expected_in,
            found: features.cols(),
        });
    }
    if features.rows() != labels.len() {
        return Err(Error::Dimension {
            context: "labels per feature row",
            expected: features.rows(),
            found: labels.len(),
        });
    }
    let mut y = vec![0.0; params.dim()];
    for (r, &label) in labels.iter().enumerate() {
        if label >= c_n {
            return Err(Error::Label {
                label: label as i64,
                classes: c_n,
            });
        }
        let x = features.row(r);
        let pred = match reduction {
            Some(m) => {
                m.apply_into(x, &mut y);
                gmm::predict(params, &y)?
            }
            None => gmm::predict(params, x)?,
        };
        confusion[label * c_n + pred] += 1;
        if pred == label {
            correct += 1;
        }
    }
    Ok(Evaluation {
        correct,
        total: labels.len(),
        confusion,
    })
}

/// Derives independent sub-seeds from the run seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_REDUCTION: u64 = 3;

/// Trains on the `Train` split, reporting accuracy on the `Val` split.
pub fn train(
    dataset: &EmbeddingDataset,
    family: CovarianceFamily,
    components: usize,
    reduction: ReductionSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(dataset, family, components, reduction, config, &SerialEvaluator)
}

/// [`train`] with a caller-supplied gradient evaluator.
pub fn train_with(
    dataset: &EmbeddingDataset,
    family: CovarianceFamily,
    components: usize,
    reduction: ReductionSpec,
    config: &TrainConfig,
    evaluator: &dyn GradientEvaluator,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.num_classes() < 2 {
        return Err(Error::Config("training needs at least 2 classes".into()));
    }
    if components == 0 {
        return Err(Error::Config("components per class must be at least 1".into()));
    }
    let (train_x, train_y) = dataset.subset(SplitTag::Train);
    let (val_x, val_y) = dataset.subset(SplitTag::Val);
    if train_y.is_empty() {
        return Err(Error::Empty("training split"));
    }

    // Fixed maps are folded into the features once; learnable ones stay in the loop.
    let (mut learnable, fixed, train_x, val_x) = match reduction {
        ReductionSpec::None => (None, None, train_x, val_x),
        ReductionSpec::Learnable { dim } => {
            let map = ReductionMap::learnable_random(
                dataset.dim(),
                dim,
                derive_seed(config.seed, STREAM_REDUCTION),
            )?;
            (Some(map), None, train_x, val_x)
        }
        ReductionSpec::Fixed(map) => {
            let tx = map.apply_rows(&train_x)?;
            let vx = map.apply_rows(&val_x)?;
            (None, Some(map), tx, vx)
        }
    };

    let init_x = match &learnable {
        Some(map) => map.apply_rows(&train_x)?,
        None => train_x.clone(),
    };
    let mut params = gmm::init_params_from(
        &init_x,
        &train_y,
        dataset.num_classes(),
        family,
        components,
        derive_seed(config.seed, STREAM_INIT),
    )?;
    drop(init_x);

    let mut report = TrainReport::default();
    let n = train_y.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.epochs * steps_per_epoch;
    let mut sgd = Sgd::new(&params, learnable.as_ref());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_SHUFFLE));
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    for _epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut lr = config.lr_start;
        for batch in order.chunks(config.batch_size) {
            lr = cosine_lr(step, total_steps, config.lr_start, config.lr_end)?;
            let (loss, grads) = evaluator.evaluate(&params, learnable.as_ref(), &train_x, &train_y, batch);
            if !loss.is_finite() || grads.groups().iter().any(|(_, g)| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::Divergence { step });
            }
            sgd.step(&mut params, learnable.as_mut(), &grads, lr, config.momentum, config.nesterov);
            epoch_loss += loss * batch.len() as f64;
            report.step_lr.push(lr);
            step += 1;
        }
        report.epoch_loss.push(epoch_loss / n as f64);
        report.epoch_lr.push(lr);
        let acc = if val_y.is_empty() {
            None
        } else {
            Some(evaluate(&params, learnable.as_ref(), &val_x, &val_y)?.accuracy())
        };
        report.epoch_val_accuracy.push(acc);
    }
    report.final_accuracy = if val_y.is_empty() {
        None
    } else {
        Some(evaluate(&params, learnable.as_ref(), &val_x, &val_y)?.accuracy())
    };

    Ok(TrainOutcome {
        params,
        reduction: learnable.or(fixed),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 100, 1e-3, 1e-4).unwrap(), 1e-3);
        assert!((cosine_lr(100, 100, 1e-3, 1e-4).unwrap() - 1e-4).abs() < 1e-18);
        assert!((cosine_lr(50, 100, 1e-3, 1e-4).unwrap() - 5.5e-4).abs() < 1e-18);
        assert!(matches!(cosine_lr(0, 0, 1e-3, 1e-4), Err(Error::Degenerate(_))));
        let mut prev = f64::INFINITY;
        for t in 0..=37 {
            let lr = cosine_lr(t, 37, 1e-3, 1e-4).unwrap();
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            momentum: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr_start: 1e-5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn tiny() -> GmmParams {
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
    fn plain_gradient_descent_without_momentum() {
        let mut p = tiny();
        let before = p.clone();
        let mut g = Gradients::zeros(&p, None);
        g.means = vec![0.5, -2.0];
        g.bandwidth_raw = vec![0.25, 0.0];
        let mut sgd = Sgd::new(&p, None);
        sgd.step(&mut p, None, &g, 0.1, 0.0, false);
        assert_eq!(p.means(), &[-1.0 - 0.05, 1.0 + 0.2]);
        assert_eq!(p.bandwidth_raw(), &[1.0 - 0.025, 1.0]);
        assert_eq!(p.prior_logits(), before.prior_logits());
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = tiny();
        let before = p.clone();
        let g = Gradients::zeros(&p, None);
        let mut sgd = Sgd::new(&p, None);
        for _ in 0..3 {
            sgd.step(&mut p, None, &g, 0.5, 0.9, true);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn nesterov_two_steps_match_recurrence() {
        // reference: v1 = g, u1 = g + μ g; v2 = μ g + g, u2 = g + μ v2
        let (lr, mu, gv) = (0.1, 0.9, 0.5);
        let v1 = gv;
        let u1 = gv + mu * v1;
        let v2 = mu * v1 + gv;
        let u2 = gv + mu * v2;
        let expected = -1.0 - lr * u1 - lr * u2;

        let mut p = tiny();
        let mut g = Gradients::zeros(&p, None);
        g.means[0] = gv;
        let mut sgd = Sgd::new(&p, None);
        sgd.step(&mut p, None, &g, lr, mu, true);
        sgd.step(&mut p, None, &g, lr, mu, true);
        assert!((p.means()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn step_clamps_bandwidth() {
        let mut p = tiny();
        let mut g = Gradients::zeros(&p, None);
        g.bandwidth_raw = vec![100.0, 0.0];
        Sgd::new(&p, None).step(&mut p, None, &g, 1.0, 0.0, false);
        assert_eq!(p.bandwidth_raw()[0], gmm::BANDWIDTH_FLOOR);
    }

    #[test]
    fn loss_rejects_bad_labels() {
        let p = tiny();
        let x = Matrix::from_rows(&[&[0.0]]).unwrap();
        assert_eq!(
            loss(&p, None, &x, &[2]),
            Err(Error::Label { label: 2, classes: 2 })
        );
        assert!(matches!(
            loss_and_gradients(&p, None, &Matrix::zeros(0, 1), &[]),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn prior_gradient_sums_to_zero() {
        let p = tiny();
        let x = Matrix::from_rows(&[&[0.3], &[-2.0], &[1.7]]).unwrap();
        let (_, g) = loss_and_gradients(&p, None, &x, &[0, 0, 1]).unwrap();
        assert!(g.prior_logits.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn separated_optimum_has_vanishing_loss() {
        let mut p = tiny();
        p.means = vec![-50.0, 50.0];
        let x = Matrix::from_rows(&[&[-50.0], &[50.0]]).unwrap();
        let (l, g) = loss_and_gradients(&p, None, &x, &[0, 1]).unwrap();
        assert!(l < 1e-300);
        assert!(g.groups().iter().all(|(_, v)| v.iter().all(|x| x.abs() < 1e-300)));
    }

    #[test]
    fn seeds_are_decorrelated() {
        assert_ne!(derive_seed(0, 1), derive_seed(0, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(0, 1));
    }
}
