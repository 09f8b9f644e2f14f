use gmmc_core::data::{self, SplitTag, SyntheticSpec};
use gmmc_core::gmm;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_is_stratified(
        per_class in 1usize..60,
        classes in 2usize..6,
        val in 0.0f64..0.5,
        test in 0.0f64..0.4,
        seed in any::<u64>(),
    ) {
        let spec = SyntheticSpec { classes, dim: 2, per_class, seed, ..Default::default() };
        let (ds, _) = data::generate_synthetic(&spec).unwrap();
        let fr = [1.0 - val - test, val, test];
        let (ds, rep) = data::split(ds, fr, seed).unwrap();
        prop_assert_eq!(rep.counts.iter().sum::<usize>(), ds.len());
        for c in 0..classes {
            for (k, tag) in SplitTag::ALL.into_iter().enumerate() {
                let n = ds.indices(tag).iter().filter(|&&i| ds.labels()[i] == c).count();
                prop_assert!((n as f64 - fr[k] * per_class as f64).abs() < 1.0 + 1e-9);
            }
        }
        let (again, _) = data::split(ds.clone(), fr, seed).unwrap();
        prop_assert_eq!(again, ds);
    }
}

#[test]
fn generator_is_seeded() {
    let spec = SyntheticSpec { classes: 3, dim: 5, per_class: 20, seed: 4, ..Default::default() };
    let a = data::generate_synthetic(&spec).unwrap();
    let b = data::generate_synthetic(&spec).unwrap();
    assert_eq!(a, b);
    let c = data::generate_synthetic(&SyntheticSpec { seed: 5, ..spec }).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn oracle_parameters_reproduce_bayes_decision() {
    let spec = SyntheticSpec { classes: 6, components: 2, dim: 4, per_class: 200, radius: 2.0, sigma: 1.0, seed: 11, ..Default::default() };
    let (ds, oracle) = data::generate_synthetic(&spec).unwrap();
    let params = oracle.to_params().unwrap();
    let mut correct = 0;
    for r in 0..ds.len() {
        let x = ds.features().row(r);
        let decision = oracle.decide(x);
        assert_eq!(gmm::predict(&params, x).unwrap(), decision);
        let post = oracle.posterior(x).unwrap();
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        correct += usize::from(decision == ds.labels()[r]);
    }
    assert_eq!(correct as f64 / ds.len() as f64, oracle.accuracy());
}

#[test]
fn noiseless_oracle_is_exact() {
    let spec = SyntheticSpec { classes: 5, dim: 3, per_class: 10, sigma: 0.0, ..Default::default() };
    let (_, oracle) = data::generate_synthetic(&spec).unwrap();
    assert_eq!(oracle.accuracy(), 1.0);
}
