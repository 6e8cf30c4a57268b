//! Shared helpers for integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squeezecool::dynamics::{operating_point, stability, OperatingPoint, DEFAULT_STABILITY_TOL};
use squeezecool::steady::Stability;
use squeezecool::SystemParams;

/// Bad-cavity working point shared by most checks.
pub fn working_point(g: f64, r: f64, theta: f64) -> SystemParams {
    SystemParams {
        omega_m: 1.0,
        delta: 0.4,
        delta_c: 2.0,
        kappa: 2.0,
        gamma_m: 1e-3,
        g,
        eta: 10.0,
        r,
        theta,
        n_th_m: 10.0,
        n_th_cav: 1.0,
    }
}

pub fn critical(p: &SystemParams) -> f64 {
    p.delta.hypot(0.5 * p.gamma_m)
}

/// (n_th + β)/(1 − 2β), β = r²/(2 r_c²): occupation of the bare squeezed
/// oscillator.
pub fn squeezed_bath_occupation(p: &SystemParams) -> f64 {
    let beta = p.r * p.r / (2.0 * critical(p).powi(2));
    (p.n_th_m + beta) / (1.0 - 2.0 * beta)
}

/// Draws parameters uniformly from
///
/// | κ | Γ_m (log) | g | η | δ | δ_c | r/r_c | θ | n_m | n_cav |
/// |---|---|---|---|---|---|---|---|---|---|
/// | [0.5, 4] | [1e-3, 0.1] | [0, 0.05] | [0, 10] | [0.2, 1] | [0.5, 4] | [0, 0.95) | [0, π) | [0, 20] | [0, 2] |
///
/// and keeps only draws whose default branch is stable.
pub fn random_stable_sets(seed: u64, count: usize) -> Vec<(SystemParams, OperatingPoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let delta: f64 = rng.random_range(0.2..1.0);
        let gamma_m: f64 = 10f64.powf(rng.random_range(-3.0..-1.0));
        let r_c = delta.hypot(0.5 * gamma_m);
        let p = SystemParams {
            omega_m: 1.0,
            delta,
            delta_c: rng.random_range(0.5..4.0),
            kappa: rng.random_range(0.5..4.0),
            gamma_m,
            g: rng.random_range(0.0..0.05),
            eta: rng.random_range(0.0..10.0),
            r: rng.random_range(0.0..0.95) * r_c,
            theta: rng.random_range(0.0..PI),
            n_th_m: rng.random_range(0.0..20.0),
            n_th_cav: rng.random_range(0.0..2.0),
        };
        if let Ok(op) = operating_point(&p, None) {
            if stability(&op.model, DEFAULT_STABILITY_TOL).verdict == Stability::Stable {
                out.push((p, op));
            }
        }
    }
    out
}
