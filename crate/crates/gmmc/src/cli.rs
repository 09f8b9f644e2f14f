//! Subcommands of the `gmmc` binary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gmmc_core::analytics::{self, ClassifierFamily, CountReport, SweepPoint};
use gmmc_core::data::{self, EmbeddingDataset, SplitTag, SyntheticSpec};
use gmmc_core::gmm::{CovarianceFamily, GmmParams};
use gmmc_core::gradcheck;
use gmmc_core::reduction::{self, ReductionMap};
use gmmc_core::training::{self, ReductionSpec, TrainConfig, TrainOutcome};

use crate::parallel::ThreadedEvaluator;
use crate::{config, csv_import, formats, io_err, report, CliError};

pub const MODEL_FILE: &str = "model.gmmp";
pub const REDUCTION_FILE: &str = "reduction.gmmr";
pub const REPORT_FILE: &str = "report.csv";
pub const RUN_FILE: &str = "run.json";

/// Stream id for the split seed, kept apart from the training streams.
const STREAM_SPLIT: u64 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "gmmc",
    version,
    about = "Gaussian-mixture Bayes classifiers over embedding features",
    args_override_self = true,
    after_help = "Global: --config PATH merges `key = value` flags from a file; command-line flags win."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic embedding file with a known Bayes decision.
    Synth(SynthArgs),
    /// Convert a CSV file (label in the last column) to an embedding file.
    Import(ImportArgs),
    /// Train a classifier and write a run directory.
    Train(TrainArgs),
    /// Evaluate a trained classifier.
    Eval(EvalArgs),
    /// Fit PCA on an embedding file and print its spectrum.
    Pca(PcaArgs),
    /// Print parameter counts and the comparison table.
    Params(ParamsArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Train across a grid of PCA variance thresholds.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// Fraction of each class tagged as validation.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Fraction of each class tagged as test.
    #[arg(long, default_value_t = 0.0)]
    pub test_fraction: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Mixture components per class in the generator.
    #[arg(long, default_value_t = 1)]
    pub components: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Project samples onto the unit sphere.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, env = "GMMC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ImportArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, env = "GMMC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyArg {
    S,
    D,
    F,
}

impl From<FamilyArg> for CovarianceFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::S => CovarianceFamily::Spherical,
            FamilyArg::D => CovarianceFamily::Diagonal,
            FamilyArg::F => CovarianceFamily::Full,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OptimArgs {
    /// Epochs; defaults to 30, or 50 with --linear-d.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_start: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr_end: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Plain momentum instead of Nesterov.
    #[arg(long)]
    pub no_nesterov: bool,
    /// Keep the sample order fixed across epochs.
    #[arg(long)]
    pub no_shuffle: bool,
    #[arg(long, env = "GMMC_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl OptimArgs {
    fn config(&self, learnable: bool) -> TrainConfig {
        let default_epochs = if learnable {
            training::DEFAULT_EPOCHS_WITH_REDUCTION
        } else {
            training::DEFAULT_EPOCHS
        };
        TrainConfig {
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            momentum: self.momentum,
            nesterov: !self.no_nesterov,
            epochs: self.epochs.unwrap_or(default_epochs),
            batch_size: self.batch,
            seed: self.seed,
            shuffle: !self.no_shuffle,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "s")]
    pub family: FamilyArg,
    /// Gaussian components per class.
    #[arg(short = 'G', long, default_value_t = 1)]
    pub components: usize,
    /// Train a learnable linear reduction to this many dimensions.
    #[arg(long, conflicts_with = "pca_threshold")]
    pub linear_d: Option<usize>,
    /// Reduce with PCA, keeping this fraction of the variance.
    #[arg(long)]
    pub pca_threshold: Option<f64>,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Run directory.
    #[arg(short, long, default_value = "run")]
    pub output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub input: PathBuf,
    /// Run directory or checkpoint file.
    #[arg(short, long)]
    pub model: PathBuf,
    /// Reduction map; defaults to the run directory's map if present.
    #[arg(long)]
    pub reduction: Option<PathBuf>,
    /// Split to score; defaults to test, else val, else train.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Write the confusion matrix CSV here.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    /// Report the smallest dimension reaching this variance fraction.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Print at most this many spectrum rows.
    #[arg(long)]
    pub top: Option<usize>,
    /// Write the (truncated, with --threshold) map here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountFamilyArg {
    S,
    D,
    F,
    SdgmD,
    SdgmF,
}

impl From<CountFamilyArg> for ClassifierFamily {
    fn from(f: CountFamilyArg) -> Self {
        match f {
            CountFamilyArg::S => ClassifierFamily::DgmmcS,
            CountFamilyArg::D => ClassifierFamily::DgmmcD,
            CountFamilyArg::F => ClassifierFamily::DgmmcF,
            CountFamilyArg::SdgmD => ClassifierFamily::SdgmD,
            CountFamilyArg::SdgmF => ClassifierFamily::SdgmF,
        }
    }
}

#[derive(Args, Debug)]
pub struct ParamsArgs {
    /// One family; all five when omitted.
    #[arg(long, value_enum)]
    pub family: Option<CountFamilyArg>,
    #[arg(short = 'C', long, required_unless_present = "paper_table")]
    pub classes: Option<u64>,
    #[arg(short = 'G', long, default_value_t = 1)]
    pub components: u64,
    #[arg(short = 'd', long, required_unless_present = "paper_table")]
    pub dim: Option<u64>,
    /// Print the full comparison table.
    #[arg(long)]
    pub paper_table: bool,
    /// Also write the rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "s")]
    pub family: FamilyArg,
    #[arg(short = 'C', long, default_value_t = 3)]
    pub classes: usize,
    #[arg(short = 'G', long, default_value_t = 2)]
    pub components: usize,
    #[arg(short = 'd', long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    /// Put a learnable reduction from this input dimension in front.
    #[arg(long)]
    pub reduction_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub instances: usize,
    #[arg(long, env = "GMMC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "s")]
    pub families: Vec<FamilyArg>,
    #[arg(short = 'G', long, default_value_t = 1)]
    pub components: usize,
    /// Variance fractions; defaults to 0.05, 0.10, ..., 1.0.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Sweep CSV path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Why a run stopped without success.
#[derive(Debug)]
pub enum Exit {
    /// Argument parsing failed, or help/version was requested.
    Clap(clap::Error),
    Error(CliError),
}

impl From<CliError> for Exit {
    fn from(e: CliError) -> Self {
        Self::Error(e)
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run(argv: Vec<String>, out: &mut dyn Write) -> Result<(), Exit> {
    let argv = config::merge(argv)?;
    let cli = Cli::try_parse_from(argv).map_err(Exit::Clap)?;
    dispatch(cli.command, out).map_err(Exit::Error)
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(a, out),
        Command::Import(a) => import(a, out),
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Pca(a) => pca(a, out),
        Command::Params(a) => params(a, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Sweep(a) => sweep(a, out),
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(stdout_err)?
    };
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn apply_split(ds: EmbeddingDataset, s: &SplitArgs, seed: u64) -> Result<(EmbeddingDataset, data::SplitReport), CliError> {
    let train = 1.0 - s.val_fraction - s.test_fraction;
    if !(s.val_fraction >= 0.0 && s.test_fraction >= 0.0 && train >= -1e-12) {
        return Err(CliError::Config(format!(
            "split fractions must be non-negative with sum at most 1, got val {} test {}",
            s.val_fraction, s.test_fraction
        )));
    }
    Ok(data::split(ds, [train.max(0.0), s.val_fraction, s.test_fraction], training::derive_seed(seed, STREAM_SPLIT))?)
}

fn print_split(out: &mut dyn Write, path: &Path, ds: &EmbeddingDataset, rep: &data::SplitReport) -> Result<(), CliError> {
    say!(
        out,
        "wrote {}: N={} D={} C={} (train {}, val {}, test {})",
        path.display(),
        ds.len(),
        ds.dim(),
        ds.num_classes(),
        rep.counts[0],
        rep.counts[1],
        rep.counts[2]
    );
    for w in &rep.warnings {
        eprintln!("gmmc: warning: {w}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthSidecar {
    classes: usize,
    components: usize,
    dim: usize,
    per_class: usize,
    radius: f64,
    sigma: f64,
    normalize: bool,
    seed: u64,
    val_fraction: f64,
    test_fraction: f64,
    samples: usize,
    oracle_accuracy: f64,
}

/// `<path>.json` next to a generated file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        classes: a.classes,
        components: a.components,
        dim: a.dim,
        per_class: a.per_class,
        radius: a.radius,
        sigma: a.sigma,
        normalize: a.normalize,
        seed: a.seed,
    };
    let (ds, oracle) = data::generate_synthetic(&spec)?;
    let (ds, rep) = apply_split(ds, &a.split, a.seed)?;
    formats::write_embeddings(&a.output, &ds)?;
    let sidecar = SynthSidecar {
        classes: spec.classes,
        components: spec.components,
        dim: spec.dim,
        per_class: spec.per_class,
        radius: spec.radius,
        sigma: spec.sigma,
        normalize: spec.normalize,
        seed: spec.seed,
        val_fraction: a.split.val_fraction,
        test_fraction: a.split.test_fraction,
        samples: ds.len(),
        oracle_accuracy: oracle.accuracy(),
    };
    write_json(&sidecar_path(&a.output), &sidecar)?;
    print_split(out, &a.output, &ds, &rep)?;
    say!(out, "oracle accuracy {:.1}", 100.0 * oracle.accuracy());
    Ok(())
}

fn import(a: ImportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = File::open(&a.input).map_err(io_err(&a.input))?;
    let name = a.input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let ds = csv_import::read_csv(std::io::BufReader::new(file), &name)?;
    let (ds, rep) = apply_split(ds, &a.split, a.seed)?;
    formats::write_embeddings(&a.output, &ds)?;
    print_split(out, &a.output, &ds, &rep)
}

#[derive(Serialize)]
struct RunRecord {
    input: String,
    family: char,
    components: usize,
    input_dim: usize,
    classes: usize,
    reduction: &'static str,
    reduced_dim: usize,
    pca_threshold: Option<f64>,
    pca_variance_ratio: Option<f64>,
    epochs: usize,
    batch: usize,
    lr_start: f64,
    lr_end: f64,
    momentum: f64,
    nesterov: bool,
    shuffle: bool,
    seed: u64,
    train_samples: usize,
    val_samples: usize,
    trainable_parameters: usize,
    final_loss: Option<f64>,
    val_accuracy: Option<f64>,
}

/// Fits PCA on the training rows and truncates at `threshold`.
fn pca_for_threshold(ds: &EmbeddingDataset, threshold: f64) -> Result<(ReductionMap, f64), CliError> {
    let (x, _) = ds.subset(SplitTag::Train);
    let full = reduction::fit_pca(&x)?;
    let d = reduction::select_dim(full.eigenvalues(), threshold)?;
    let ratio = reduction::variance_ratio(full.eigenvalues(), d)?;
    Ok((reduction::truncate(&full, d)?, ratio))
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = formats::read_embeddings(&a.input)?;
    let family: CovarianceFamily = a.family.into();
    let cfg = a.optim.config(a.linear_d.is_some());
    let (spec, pca_ratio) = match (a.linear_d, a.pca_threshold) {
        (Some(d), _) => (ReductionSpec::Learnable { dim: d }, None),
        (None, Some(t)) => {
            let (map, ratio) = pca_for_threshold(&ds, t)?;
            (ReductionSpec::Fixed(map), Some(ratio))
        }
        (None, None) => (ReductionSpec::None, None),
    };
    let evaluator = ThreadedEvaluator::from_env();
    let TrainOutcome {
        params,
        reduction,
        report: rep,
    } = training::train_with(&ds, family, a.components, spec, &cfg, &evaluator)?;

    fs::create_dir_all(&a.output).map_err(io_err(&a.output))?;
    formats::write_checkpoint(a.output.join(MODEL_FILE), &params)?;
    let red_path = a.output.join(REDUCTION_FILE);
    match &reduction {
        Some(m) => formats::write_reduction(&red_path, m)?,
        None if red_path.exists() => fs::remove_file(&red_path).map_err(io_err(&red_path))?,
        None => {}
    }
    let rep_path = a.output.join(REPORT_FILE);
    report::write_train_report(create(&rep_path)?, &rep).map_err(io_err(&rep_path))?;
    let record = RunRecord {
        input: a.input.display().to_string(),
        family: family.letter(),
        components: a.components,
        input_dim: ds.dim(),
        classes: ds.num_classes(),
        reduction: match (&reduction, a.linear_d) {
            (None, _) => "none",
            (Some(_), Some(_)) => "learnable",
            (Some(_), None) => "pca",
        },
        reduced_dim: params.dim(),
        pca_threshold: a.pca_threshold,
        pca_variance_ratio: pca_ratio,
        epochs: cfg.epochs,
        batch: cfg.batch_size,
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        momentum: cfg.momentum,
        nesterov: cfg.nesterov,
        shuffle: cfg.shuffle,
        seed: cfg.seed,
        train_samples: ds.count(SplitTag::Train),
        val_samples: ds.count(SplitTag::Val),
        trainable_parameters: params.trainable_count()
            + reduction.as_ref().filter(|_| a.linear_d.is_some()).map_or(0, |m| m.in_dim() * m.out_dim() + m.out_dim()),
        final_loss: rep.epoch_loss.last().copied(),
        val_accuracy: rep.final_accuracy,
    };
    write_json(&a.output.join(RUN_FILE), &record)?;

    if let Some(r) = pca_ratio {
        say!(out, "pca: d={} keeps {:.2}% of the variance", params.dim(), 100.0 * r);
    }
    if let Some(loss) = rep.epoch_loss.last() {
        say!(out, "epochs {} final loss {loss:.6}", rep.epoch_loss.len());
    }
    match rep.final_accuracy {
        Some(acc) => say!(out, "val accuracy {:.1}", 100.0 * acc),
        None => say!(out, "val accuracy n/a (no validation split)"),
    }
    say!(out, "wrote {}", a.output.display());
    Ok(())
}

/// Loads a checkpoint and its reduction from a run directory or a file path.
pub fn load_model(model: &Path, reduction: Option<&Path>) -> Result<(GmmParams, Option<ReductionMap>), CliError> {
    let (ckpt, default_red) = if model.is_dir() {
        (model.join(MODEL_FILE), Some(model.join(REDUCTION_FILE)))
    } else {
        (model.to_path_buf(), None)
    };
    let params = formats::read_checkpoint(&ckpt)?;
    let red = match (reduction, default_red) {
        (Some(p), _) => Some(formats::read_reduction(p)?),
        (None, Some(p)) if p.exists() => Some(formats::read_reduction(&p)?),
        _ => None,
    };
    Ok((params, red))
}

fn split_rows(ds: &EmbeddingDataset, split: SplitArg) -> (gmmc_core::Matrix, Vec<usize>, &'static str) {
    let tag = match split {
        SplitArg::All => return (ds.features().clone(), ds.labels().to_vec(), "all"),
        SplitArg::Train => SplitTag::Train,
        SplitArg::Val => SplitTag::Val,
        SplitArg::Test => SplitTag::Test,
    };
    let (x, y) = ds.subset(tag);
    (x, y, tag.name())
}

fn default_split(ds: &EmbeddingDataset) -> SplitArg {
    if ds.count(SplitTag::Test) > 0 {
        SplitArg::Test
    } else if ds.count(SplitTag::Val) > 0 {
        SplitArg::Val
    } else {
        SplitArg::Train
    }
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = formats::read_embeddings(&a.input)?;
    let (params, red) = load_model(&a.model, a.reduction.as_deref())?;
    let (in_dim, out_dim) = red.as_ref().map_or((params.dim(), params.dim()), |m| (m.in_dim(), m.out_dim()));
    if ds.dim() != in_dim || out_dim != params.dim() {
        return Err(CliError::Config(format!(
            "dimension mismatch: features have D={}, model expects {} (classifier d={})",
            ds.dim(),
            in_dim,
            params.dim()
        )));
    }
    if ds.num_classes() > params.num_classes() {
        return Err(CliError::Config(format!(
            "dataset has {} classes, model has {}",
            ds.num_classes(),
            params.num_classes()
        )));
    }
    let split = a.split.unwrap_or_else(|| default_split(&ds));
    let (x, y, name) = split_rows(&ds, split);
    if y.is_empty() {
        return Err(CliError::Config(format!("split {name} is empty")));
    }
    let ev = training::evaluate(&params, red.as_ref(), &x, &y)?;
    if let Some(p) = &a.confusion {
        report::write_confusion(create(p)?, &ev, params.num_classes()).map_err(io_err(p))?;
    }
    say!(out, "accuracy {:.1}", 100.0 * ev.accuracy());
    say!(out, "split {name}: {}/{} correct", ev.correct, ev.total);
    Ok(())
}

fn pca(a: PcaArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = formats::read_embeddings(&a.input)?;
    let (x, _, name) = split_rows(&ds, a.split);
    let full = reduction::fit_pca(&x)?;
    let eig = full.eigenvalues();
    say!(out, "pca on {name} split: N={} D={}", x.rows(), x.cols());
    say!(out, "{:>5}  {:>14}  {:>10}", "k", "eigenvalue", "cum_ratio");
    for k in 0..a.top.unwrap_or(eig.len()).min(eig.len()) {
        say!(out, "{:>5}  {:>14.6e}  {:>10.6}", k + 1, eig[k], reduction::variance_ratio(eig, k + 1)?);
    }
    let map = match a.threshold {
        Some(t) => {
            let d = reduction::select_dim(eig, t)?;
            say!(
                out,
                "threshold {t}: d={d} ({:.4} of the variance)",
                reduction::variance_ratio(eig, d)?
            );
            reduction::truncate(&full, d)?
        }
        None => full,
    };
    if let Some(p) = &a.output {
        formats::write_reduction(p, &map)?;
        say!(out, "wrote {}", p.display());
    }
    Ok(())
}

fn params(a: ParamsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let reports = if a.paper_table {
        let table = analytics::ratio_table();
        write!(out, "{}", report::paper_table(&table)).map_err(stdout_err)?;
        table
    } else {
        let (c, d) = (a.classes.unwrap_or(0), a.dim.unwrap_or(0));
        let families: Vec<ClassifierFamily> = match a.family {
            Some(f) => vec![f.into()],
            None => ClassifierFamily::ALL.to_vec(),
        };
        let reports = families
            .into_iter()
            .map(|f| CountReport::new(f, c, a.components, d))
            .collect::<Result<Vec<_>, _>>()?;
        write!(out, "{}", report::counts_table(&reports)).map_err(stdout_err)?;
        reports
    };
    if let Some(p) = &a.csv {
        report::write_counts_csv(create(p)?, &reports).map_err(io_err(p))?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let family: CovarianceFamily = a.family.into();
    let mut worst: BTreeMap<&'static str, (usize, f64)> = BTreeMap::new();
    let mut order = Vec::new();
    for i in 0..a.instances.max(1) {
        let inst = gradcheck::random_instance(
            family,
            a.classes,
            a.components,
            a.dim,
            a.batch,
            a.reduction_in,
            training::derive_seed(a.seed, i as u64),
        )?;
        let rep = gradcheck::check_gradients(&inst.params, inst.reduction.as_ref(), &inst.features, &inst.labels, a.h)?;
        for g in rep.groups {
            let e = worst.entry(g.group).or_insert_with(|| {
                order.push(g.group);
                (0, 0.0)
            });
            e.0 += g.coordinates;
            e.1 = e.1.max(g.max_rel_error);
        }
    }
    say!(out, "{:<16} {:>11} {:>14}", "group", "coordinates", "max_rel_error");
    let mut max = 0.0f64;
    for g in order {
        let (n, e) = worst[g];
        max = max.max(e);
        say!(out, "{g:<16} {n:>11} {e:>14.3e}");
    }
    if max < a.tolerance {
        say!(out, "ok: max relative error {max:.3e} < {:e}", a.tolerance);
        Ok(())
    } else {
        Err(CliError::GradCheck(max, a.tolerance))
    }
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = formats::read_embeddings(&a.input)?;
    if ds.count(SplitTag::Val) == 0 {
        return Err(CliError::Config("sweep needs a validation split".into()));
    }
    let thresholds = if a.thresholds.is_empty() {
        analytics::default_sweep_thresholds()
    } else {
        a.thresholds.clone()
    };
    let (x, _) = ds.subset(SplitTag::Train);
    let full = reduction::fit_pca(&x)?;
    let cfg = a.optim.config(false);
    let evaluator = ThreadedEvaluator::from_env();
    let mut points = Vec::new();
    for &fam in &a.families {
        let family: CovarianceFamily = fam.into();
        let classifier = format!("{} G={}", ClassifierFamily::from_covariance(family).name(), a.components);
        let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
        for &t in &thresholds {
            let d = reduction::select_dim(full.eigenvalues(), t)?;
            let accuracy = match cache.get(&d) {
                Some(&acc) => acc,
                None => {
                    let map = reduction::truncate(&full, d)?;
                    let o = training::train_with(&ds, family, a.components, ReductionSpec::Fixed(map), &cfg, &evaluator)?;
                    let acc = o.report.final_accuracy.unwrap_or(0.0);
                    cache.insert(d, acc);
                    acc
                }
            };
            points.push(SweepPoint {
                classifier: classifier.clone(),
                family: family.letter().to_string(),
                threshold_percent: 100.0 * t,
                selected_d: d,
                accuracy,
            });
        }
    }
    match &a.output {
        Some(p) => report::write_sweep(create(p)?, &points).map_err(io_err(p))?,
        None => report::write_sweep(&mut *out, &points).map_err(stdout_err)?,
    }
    write!(out, "{}", report::sweep_summary_text(&points)).map_err(stdout_err)?;
    Ok(())
}
