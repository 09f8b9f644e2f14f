//! In-memory embedding datasets, stratified splits, and the seeded synthetic
//! generator with its exact Bayes oracle.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::float;
use crate::gmm::{self, CovarianceFamily, GmmParams, BANDWIDTH_FLOOR};
use crate::tensor_math::{self, squared_distance, Matrix};

/// Which partition a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [Self::Train, Self::Val, Self::Test];

    pub fn code(self) -> u8 {
        match self {
            Self::Train => 0,
            Self::Val => 1,
            Self::Test => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Train),
            1 => Some(Self::Val),
            2 => Some(Self::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

/// `N` labelled feature vectors in `R^D` with split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
    splits: Vec<SplitTag>,
    provenance: String,
}

impl EmbeddingDataset {
    /// Validates and wraps the given rows.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        classes: usize,
        splits: Vec<SplitTag>,
        provenance: String,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::Empty("dataset has no samples"));
        }
        if features.cols() == 0 {
            return Err(Error::Empty("dataset feature dimension is zero"));
        }
        for (context, found) in [("labels", labels.len()), ("split tags", splits.len())] {
            if found != n {
                return Err(Error::Dimension {
                    context,
                    expected: n,
                    found,
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Label {
                label: bad as i64,
                classes,
            });
        }
        if !features.is_finite() {
            return Err(Error::Degenerate("non-finite feature value"));
        }
        Ok(Self {
            features,
            labels,
            classes,
            splits,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[SplitTag] {
        &self.splits
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Replaces every split tag.
    pub fn with_splits(mut self, splits: Vec<SplitTag>) -> Result<Self> {
        if splits.len() != self.len() {
            return Err(Error::Dimension {
                context: "split tags",
                expected: self.len(),
                found: splits.len(),
            });
        }
        self.splits = splits;
        Ok(self)
    }

    pub fn indices(&self, tag: SplitTag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == tag).collect()
    }

    pub fn count(&self, tag: SplitTag) -> usize {
        self.splits.iter().filter(|&&t| t == tag).count()
    }

    /// Copies out the rows and labels of one split.
    pub fn subset(&self, tag: SplitTag) -> (Matrix, Vec<usize>) {
        let idx = self.indices(tag);
        let d = self.dim();
        let mut data = Vec::with_capacity(idx.len() * d);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in &idx {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        (Matrix::new(idx.len(), d, data).expect("row lengths agree"), labels)
    }

    /// Per-class sample counts over the whole dataset.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Outcome of [`split`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitReport {
    /// Rows per split, indexed `[train, val, test]`.
    pub counts: [usize; 3],
    /// Classes too small to appear in every requested split.
    pub warnings: Vec<String>,
}

/// Stratified, seeded assignment of rows to train/val/test.
///
/// Per class, rows are shuffled and cut into `floor(f_k · n_c)` pieces; the
/// leftover rows go to the splits with the largest fractional remainders
/// (lowest index on ties). Per-class proportions are therefore within one
/// sample of the request.
pub fn split(
    dataset: EmbeddingDataset,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(EmbeddingDataset, SplitReport)> {
    if fractions.iter().any(|&f| !(f >= 0.0) || !f.is_finite()) {
        return Err(Error::Config("split fractions must be non-negative".into()));
    }
    let total: f64 = fractions.iter().sum();
    if float::abs(total - 1.0) > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    let requested = fractions.iter().filter(|&&f| f > 0.0).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = vec![SplitTag::Train; dataset.len()];
    let mut report = SplitReport::default();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        members[y].push(i);
    }
    for (class, rows) in members.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let counts = apportion(rows.len(), &fractions);
        if rows.len() < requested || counts.iter().zip(&fractions).any(|(&c, &f)| f > 0.0 && c == 0) {
            report.warnings.push(format!(
                "class {class} has {} samples, too few for {requested} non-empty splits",
                rows.len()
            ));
        }
        rows.shuffle(&mut rng);
        let mut cursor = 0;
        for (k, &c) in counts.iter().enumerate() {
            for &r in &rows[cursor..cursor + c] {
                tags[r] = SplitTag::ALL[k];
            }
            cursor += c;
            report.counts[k] += c;
        }
    }
    Ok((dataset.with_splits(tags)?, report))
}

fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut rema = [0.0f64; 3];
    for k in 0..3 {
        let exact = fractions[k] * n as f64;
        counts[k] = float::floor(exact + 1e-9) as usize;
        rema[k] = exact - counts[k] as f64;
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rema[b].total_cmp(&rema[a]));
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Parameters of the synthetic embedding generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    /// Components per class in the generating mixture.
    pub components: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Norm of every generating mean.
    pub radius: f64,
    /// Isotropic standard deviation around each mean. Zero gives noiseless data.
    pub sigma: f64,
    /// Project every sample back onto the unit sphere.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            components: 1,
            dim: 32,
            per_class: 500,
            radius: 4.0,
            sigma: 0.5,
            normalize: false,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.components == 0 || self.dim == 0 || self.per_class == 0 {
            return Err(Error::Config(
                "synthetic classes, components, dim and per-class count must be positive".into(),
            ));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Config("synthetic radius must be positive".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config("synthetic sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Exact posterior of the generating model: equal class priors, equal
/// component weights, isotropic variance `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesOracle {
    classes: usize,
    components: usize,
    dim: usize,
    means: Vec<f64>,
    sigma: f64,
    accuracy: f64,
}

impl BayesOracle {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Generating means, row-major `C × G × D`.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Fraction of generated (pre-normalisation) samples the oracle decides correctly.
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    fn mean(&self, c: usize, g: usize) -> &[f64] {
        let k = c * self.components + g;
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    /// Class log-scores up to a shared constant: `log Σ_g exp(-‖x-μ_cg‖²/2σ²)`.
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut comp = vec![0.0; self.components];
        (0..self.classes)
            .map(|c| {
                for (g, v) in comp.iter_mut().enumerate() {
                    let d2 = squared_distance(x, self.mean(c, g));
                    *v = if self.sigma > 0.0 {
                        -d2 / (2.0 * self.sigma * self.sigma)
                    } else {
                        -d2
                    };
                }
                if self.sigma > 0.0 {
                    tensor_math::lse(&comp)
                } else {
                    // noiseless limit: nearest generating mean wins
                    comp.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect()
    }

    /// `p(c | x)` under the generating model. Requires `σ > 0`.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                context: "oracle input",
                expected: self.dim,
                found: x.len(),
            });
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Degenerate("oracle posterior undefined for sigma = 0"));
        }
        let mut s = self.scores(x);
        tensor_math::softmax_in_place(&mut s);
        Ok(s)
    }

    /// Bayes decision, lowest class on ties.
    pub fn decide(&self, x: &[f64]) -> usize {
        gmm::argmax(&self.scores(x))
    }

    /// The generating model expressed as spherical classifier parameters.
    pub fn to_params(&self) -> Result<GmmParams> {
        GmmParams::from_parts(
            CovarianceFamily::Spherical,
            self.classes,
            self.components,
            self.dim,
            vec![0.0; self.classes],
            vec![0.0; self.classes * self.components],
            self.means.clone(),
            vec![(self.sigma * self.sigma).max(BANDWIDTH_FLOOR); self.classes * self.components],
        )
    }
}

/// Samples a labelled dataset from a seeded isotropic mixture.
///
/// Means are independent uniform points on the radius-`r` sphere. Rows are
/// grouped by class; every row is tagged `Train` (use [`split`] afterwards).
/// The oracle accuracy is measured on the samples before any unit-sphere
/// normalisation.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(EmbeddingDataset, BayesOracle)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let mut means = Vec::with_capacity(spec.classes * spec.components * d);
    for _ in 0..spec.classes * spec.components {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut norm = float::sqrt(v.iter().map(|x| x * x).sum());
        while norm == 0.0 {
            v = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            norm = float::sqrt(v.iter().map(|x| x * x).sum());
        }
        means.extend(v.iter().map(|x| x / norm * spec.radius));
    }
    let mut oracle = BayesOracle {
        classes: spec.classes,
        components: spec.components,
        dim: d,
        means,
        sigma: spec.sigma,
        accuracy: 0.0,
    };

    let n = spec.classes * spec.per_class;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut correct = 0usize;
    let mut x = vec![0.0; d];
    for c in 0..spec.classes {
        for _ in 0..spec.per_class {
            let g = if spec.components > 1 {
                rng.random_range(0..spec.components)
            } else {
                0
            };
            for (xj, mj) in x.iter_mut().zip(oracle.mean(c, g)) {
                let z: f64 = rng.sample(StandardNormal);
                *xj = mj + spec.sigma * z;
            }
            if oracle.decide(&x) == c {
                correct += 1;
            }
            if spec.normalize {
                let norm = float::sqrt(x.iter().map(|v| v * v).sum());
                if norm > 0.0 {
                    x.iter_mut().for_each(|v| *v /= norm);
                }
            }
            data.extend_from_slice(&x);
            labels.push(c);
        }
    }
    oracle.accuracy = correct as f64 / n as f64;
    let provenance = format!(
        "synthetic C={} G={} D={} per_class={} radius={} sigma={} normalize={} seed={}",
        spec.classes,
        spec.components,
        d,
        spec.per_class,
        spec.radius,
        spec.sigma,
        spec.normalize,
        spec.seed
    );
    let ds = EmbeddingDataset::new(
        Matrix::new(n, d, data)?,
        labels,
        spec.classes,
        vec![SplitTag::Train; n],
        provenance,
    )?;
    Ok((ds, oracle))
}
