mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use squeezecool::dynamics::{error_ellipse, lyapunov_moments, operating_point};
use squeezecool::oracle::{build_liouvillian, steady_expectations, FockConfig};
use squeezecool::SystemParams;

fn weak(r: f64, theta: f64, n_th_m: f64) -> SystemParams {
    SystemParams {
        omega_m: 1.0,
        delta: 0.4,
        delta_c: 1.0,
        kappa: 1.0,
        gamma_m: 0.05,
        g: 0.02,
        eta: 1.0,
        r,
        theta,
        n_th_m,
        n_th_cav: 0.0,
    }
}

#[test]
fn oracle_error_shrinks_with_mechanical_cutoff() {
    let p = weak(0.1, 0.3, 0.5);
    let op = operating_point(&p, None).unwrap();
    let target = lyapunov_moments(&op.model).unwrap().phonons();
    let branch = &op.branches[op.branch_index];
    let mut last = f64::INFINITY;
    for dim_mech in [6, 9, 12, 15] {
        let cfg = FockConfig { dim_cav: 3, dim_mech, tail_tol: 1e-6 };
        let res = steady_expectations(build_liouvillian(&op.params, branch, &cfg).unwrap(), &cfg).unwrap();
        let err = (res.n_mech - target).abs();
        assert!(err <= last + 1e-8, "dim_mech {dim_mech}: {err} > {last}");
        last = err;
    }
    assert!(last < 0.01 * target, "{last} vs {target}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupation_is_pi_periodic_in_theta(
        r in 0.0f64..0.35,
        theta in 0.0f64..PI,
        n in 0.0f64..5.0,
    ) {
        let a = operating_point(&weak(r, theta, n), None).unwrap();
        let b = operating_point(&weak(r, theta + PI, n), None).unwrap();
        let na = lyapunov_moments(&a.model).unwrap().phonons();
        let nb = lyapunov_moments(&b.model).unwrap().phonons();
        prop_assert!((na - nb).abs() <= 1e-9 * na.abs().max(1e-12));
    }

    #[test]
    fn stable_points_satisfy_uncertainty(
        r in 0.0f64..0.35,
        theta in 0.0f64..PI,
        n in 0.0f64..5.0,
    ) {
        let op = operating_point(&weak(r, theta, n), None).unwrap();
        let v = lyapunov_moments(&op.model).unwrap();
        prop_assert!(v.phonons() >= -1e-10);
        prop_assert!(error_ellipse(&v).uncertainty_product() >= 1.0 - 1e-8);
    }
}
