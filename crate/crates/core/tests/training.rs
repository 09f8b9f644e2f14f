use gmmc_core::data::{self, SplitTag, SyntheticSpec};
use gmmc_core::gmm::{self, CovarianceFamily, BANDWIDTH_FLOOR, CHOLESKY_DIAG_FLOOR};
use gmmc_core::training::{self, ReductionSpec, TrainConfig};

fn toy(seed: u64) -> gmmc_core::EmbeddingDataset {
    let spec = SyntheticSpec { classes: 4, dim: 6, per_class: 80, radius: 3.0, sigma: 0.6, seed, ..Default::default() };
    let (ds, _) = data::generate_synthetic(&spec).unwrap();
    data::split(ds, [0.75, 0.25, 0.0], seed).unwrap().0
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 32, lr_start: 0.05, lr_end: 0.005, ..Default::default() }
}

#[test]
fn schedule_follows_cosine_per_step() {
    let ds = toy(1);
    let c = cfg(3);
    let out = training::train(&ds, CovarianceFamily::Spherical, 1, ReductionSpec::None, &c).unwrap();
    let steps = ds.count(SplitTag::Train).div_ceil(c.batch_size) * c.epochs;
    assert_eq!(out.report.step_lr.len(), steps);
    for (t, lr) in out.report.step_lr.iter().enumerate() {
        let expect = c.lr_end + 0.5 * (c.lr_start - c.lr_end) * (1.0 + (std::f64::consts::PI * t as f64 / steps as f64).cos());
        assert!((lr - expect).abs() < 1e-15);
    }
    assert_eq!(out.report.epoch_loss.len(), 3);
    assert!(out.report.epoch_val_accuracy.iter().all(|a| a.is_some()));
}

#[test]
fn covariances_stay_above_floors() {
    let ds = toy(2);
    let c = TrainConfig { lr_start: 5.0, lr_end: 1.0, ..cfg(4) };
    for family in CovarianceFamily::ALL {
        let Ok(out) = training::train(&ds, family, 2, ReductionSpec::None, &c) else { continue };
        let p = &out.params;
        let d = p.dim();
        for cls in 0..p.num_classes() {
            for i in 0..p.components() {
                let cov = p.cov(cls, i);
                match family {
                    CovarianceFamily::Spherical | CovarianceFamily::Diagonal => {
                        assert!(cov.iter().all(|&v| v >= BANDWIDTH_FLOOR))
                    }
                    CovarianceFamily::Full => {
                        assert!((0..d).all(|r| cov[r * (r + 1) / 2 + r] >= CHOLESKY_DIAG_FLOOR))
                    }
                }
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let ds = toy(3);
    for spec in [ReductionSpec::None, ReductionSpec::Learnable { dim: 3 }] {
        let a = training::train(&ds, CovarianceFamily::Diagonal, 2, spec.clone(), &cfg(3)).unwrap();
        let b = training::train(&ds, CovarianceFamily::Diagonal, 2, spec, &cfg(3)).unwrap();
        assert_eq!(a, b);
    }
    let c = training::train(&ds, CovarianceFamily::Diagonal, 2, ReductionSpec::None, &TrainConfig { seed: 1, ..cfg(3) }).unwrap();
    let a = training::train(&ds, CovarianceFamily::Diagonal, 2, ReductionSpec::None, &cfg(3)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn zero_epochs_returns_initialisation() {
    let ds = toy(4);
    for family in CovarianceFamily::ALL {
        let out = training::train(&ds, family, 2, ReductionSpec::None, &cfg(0)).unwrap();
        let init = gmm::init_params(&ds, family, 2, training::derive_seed(0, 1)).unwrap();
        assert_eq!(out.params, init);
        assert!(out.report.step_lr.is_empty());
    }
}

#[test]
fn training_lowers_loss_and_separates() {
    let spec = SyntheticSpec { classes: 4, dim: 6, per_class: 80, radius: 3.0, sigma: 0.6, seed: 5, ..Default::default() };
    let (ds, oracle) = data::generate_synthetic(&spec).unwrap();
    let ds = data::split(ds, [0.75, 0.25, 0.0], 5).unwrap().0;
    let out = training::train(&ds, CovarianceFamily::Spherical, 1, ReductionSpec::None, &cfg(10)).unwrap();
    let l = &out.report.epoch_loss;
    assert!(l.last().unwrap() < &l[0]);
    let acc = out.report.final_accuracy.unwrap();
    assert!(acc >= oracle.accuracy() - 0.05, "{acc} vs oracle {}", oracle.accuracy());
}

#[test]
fn train_without_validation_split() {
    let spec = SyntheticSpec { classes: 3, dim: 2, per_class: 20, ..Default::default() };
    let (ds, _) = data::generate_synthetic(&spec).unwrap();
    let out = training::train(&ds, CovarianceFamily::Full, 1, ReductionSpec::None, &cfg(2)).unwrap();
    assert!(out.report.final_accuracy.is_none());
    assert!(out.report.epoch_val_accuracy.iter().all(Option::is_none));
}

#[test]
fn divergence_reports_step() {
    let ds = toy(6);
    let c = TrainConfig { lr_start: 1e300, lr_end: 1e300, momentum: 0.0, ..cfg(2) };
    let err = training::train(&ds, CovarianceFamily::Full, 1, ReductionSpec::None, &c).unwrap_err();
    assert!(matches!(err, gmmc_core::Error::Divergence { .. }), "{err:?}");
}

#[test]
fn confusion_rows_sum_to_class_counts() {
    let ds = toy(7);
    let out = training::train(&ds, CovarianceFamily::Diagonal, 1, ReductionSpec::None, &cfg(2)).unwrap();
    let (x, y) = ds.subset(SplitTag::Val);
    let ev = training::evaluate(&out.params, None, &x, &y).unwrap();
    let c = ds.num_classes();
    for t in 0..c {
        let row: usize = ev.confusion[t * c..(t + 1) * c].iter().sum();
        assert_eq!(row, y.iter().filter(|&&v| v == t).count());
    }
    let recount = (0..y.len()).filter(|&r| gmm::predict(&out.params, x.row(r)).unwrap() == y[r]).count();
    assert_eq!(ev.correct, recount);
}
