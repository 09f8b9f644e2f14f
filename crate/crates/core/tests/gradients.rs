use gmmc_core::gmm::{CovarianceFamily, GmmParams};
use gmmc_core::gradcheck::{self, Instance};
use gmmc_core::reduction::ReductionMap;
use gmmc_core::tensor_math::Matrix;
use gmmc_core::training;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Rebuilds an instance with one flattened coordinate moved by `delta`.
/// Coordinates run over prior logits, weight logits, means, covariance
/// parameters, then the reduction matrix and bias.
fn perturbed(inst: &Instance, mut k: usize, delta: f64) -> (GmmParams, Option<ReductionMap>) {
    let p = &inst.params;
    let mut bufs = vec![
        p.prior_logits().to_vec(),
        p.weight_logits().to_vec(),
        p.means().to_vec(),
        p.bandwidth_raw().to_vec(),
    ];
    if let Some(r) = &inst.reduction {
        bufs.push(r.matrix().as_slice().to_vec());
        bufs.push(r.bias().to_vec());
    }
    for b in bufs.iter_mut() {
        if k < b.len() {
            b[k] += delta;
            break;
        }
        k -= b.len();
    }
    let red = inst.reduction.as_ref().map(|r| {
        ReductionMap::learnable(Matrix::new(r.out_dim(), r.in_dim(), bufs[4].clone()).unwrap(), bufs[5].clone()).unwrap()
    });
    let params = GmmParams::from_parts(
        p.family(),
        p.num_classes(),
        p.components(),
        p.dim(),
        bufs[0].clone(),
        bufs[1].clone(),
        bufs[2].clone(),
        bufs[3].clone(),
    )
    .unwrap();
    (params, red)
}

fn check(inst: &Instance) -> f64 {
    let (_, g) = training::loss_and_gradients(&inst.params, inst.reduction.as_ref(), &inst.features, &inst.labels).unwrap();
    let analytic: Vec<f64> = g.groups().iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let mut worst = 0.0f64;
    for (k, &a) in analytic.iter().enumerate() {
        let (pp, rp) = perturbed(inst, k, H);
        let (pm, rm) = perturbed(inst, k, -H);
        let fp = training::loss(&pp, rp.as_ref(), &inst.features, &inst.labels).unwrap();
        let fm = training::loss(&pm, rm.as_ref(), &inst.features, &inst.labels).unwrap();
        let fd = (fp - fm) / (2.0 * H);
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
    }
    worst
}

#[test]
fn analytic_gradients_match_central_differences() {
    for family in CovarianceFamily::ALL {
        for with_reduction in [false, true] {
            for i in 0..20u64 {
                let c = 2 + (i % 4) as usize;
                let g = 1 + (i % 3) as usize;
                let d = 1 + (i % 8) as usize;
                let batch = 1 + (i as usize * 5) % 16;
                let red_in = with_reduction.then_some(2 + (i % 7) as usize);
                let inst = gradcheck::random_instance(family, c, g, d, batch, red_in, 1000 + i).unwrap();
                let err = check(&inst);
                assert!(err < TOL, "{family:?} red={with_reduction} instance {i}: {err:e}");
            }
        }
    }
}

#[test]
fn library_checker_agrees() {
    for family in CovarianceFamily::ALL {
        let inst = gradcheck::random_instance(family, 3, 2, 4, 8, Some(5), 9).unwrap();
        let rep = gradcheck::check_gradients(&inst.params, inst.reduction.as_ref(), &inst.features, &inst.labels, H).unwrap();
        assert!(rep.max_rel_error() < TOL);
        assert!((rep.max_rel_error() - check(&inst)).abs() < 1e-6);
    }
}

#[test]
fn relative_error_floor() {
    assert_eq!(gradcheck::relative_error(0.0, 0.0), 0.0);
    assert_eq!(gradcheck::relative_error(1e-9, 0.0), 1e-3);
    assert_eq!(gradcheck::relative_error(2.0, 1.0), 0.5);
}
