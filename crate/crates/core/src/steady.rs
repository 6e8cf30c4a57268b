//! Classical equilibria of the driven, squeezed optomechanical system.
//!
//! Setting the time derivatives of the mean-field Langevin equations to zero
//! gives the implicit displacement equation
//!
//! ```text
//! x = 2 g η² (δ + r sin 2θ) / ([(κ/2)² + (δ_c − g x)²] · [(Γ_m/2)² + δ² − r²])
//! ```
//!
//! Clearing denominators and substituting y = g·x yields the monic cubic
//! `y³ − 2δ_c y² + ((κ/2)² + δ_c²) y − P = 0`, solved here through the
//! eigenvalues of its companion matrix and polished with Newton steps on the
//! implicit equation itself.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::params::{SweepAxis, SystemParams};

/// Distance |r − r_c| below which the displacement equation is treated as singular.
pub const CRITICAL_TOL: f64 = 1e-9;
/// Two roots closer than this (absolute, in x_s) are merged.
pub const DEDUP_TOL: f64 = 1e-8;
const REAL_ROOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

/// One classical equilibrium (x_s, a_s, b_s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateBranch {
    /// Displacement quadrature b_s + b_s*.
    pub x_s: f64,
    pub a_s: Complex64,
    pub b_s: Complex64,
    /// Position-shifted detuning Δ_c = δ_c − g·x_s.
    pub delta_eff: f64,
    pub residual: f64,
    /// Filled in by [`crate::dynamics::classify`].
    pub stable: Option<Stability>,
}

impl SteadyStateBranch {
    /// Acceptance threshold for [`SteadyStateBranch::residual`].
    pub fn residual_tolerance(&self, params: &SystemParams) -> f64 {
        1e-10 * (1.0 + params.eta + self.x_s.abs())
    }

    pub fn photon_number(&self) -> f64 {
        self.a_s.norm_sqr()
    }
}

/// All real equilibria of `params`, sorted ascending in x_s.
pub fn steady_states(params: &SystemParams) -> Result<Vec<SteadyStateBranch>> {
    if params.g == 0.0 || params.eta == 0.0 {
        return Ok(vec![build_branch(params, 0.0)]);
    }

    let r_c = params.critical_squeeze();
    if (params.r - r_c).abs() <= CRITICAL_TOL {
        return Err(Error::DegenerateDenominator {
            r: params.r,
            r_c,
            tol: CRITICAL_TOL,
        });
    }

    let half_kappa = 0.5 * params.kappa;
    let dc = params.delta_c;
    let drive = drive_strength(params);

    // y = g x; companion matrix of y³ + c2 y² + c1 y + c0.
    let c2 = -2.0 * dc;
    let c1 = half_kappa * half_kappa + dc * dc;
    let c0 = -drive * params.g;
    #[rustfmt::skip]
    let companion = Matrix3::new(
        0.0, 0.0, -c0,
        1.0, 0.0, -c1,
        0.0, 1.0, -c2,
    );

    let eigenvalues = linalg::eigenvalues3(&companion);
    let mut roots: Vec<f64> = Vec::with_capacity(3);
    for y in &eigenvalues {
        let x = y / params.g;
        if x.im.abs() <= REAL_ROOT_TOL * (1.0 + x.norm()) {
            roots.push(polish(params, x.re));
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= DEDUP_TOL);

    if roots.is_empty() {
        // A real cubic always has a real root; only reachable through
        // pathological rounding of the imaginary parts.
        let y = eigenvalues
            .iter()
            .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
            .map(|y| y.re)
            .unwrap_or(0.0);
        roots.push(polish(params, y / params.g));
    }

    Ok(roots.into_iter().map(|x| build_branch(params, x)).collect())
}

/// 2 g η² (δ + r sin 2θ) / A, the numerator of the displacement equation
/// divided by the mechanical denominator.
fn drive_strength(params: &SystemParams) -> f64 {
    let s = params.delta + params.r * (2.0 * params.theta).sin();
    2.0 * params.g * params.eta * params.eta * s / params.squeeze_denominator()
}

/// Residual of the implicit displacement equation, and its derivative.
fn implicit_residual(params: &SystemParams, x: f64) -> (f64, f64) {
    let half_kappa = 0.5 * params.kappa;
    let detuning = params.delta_c - params.g * x;
    let lorentz = half_kappa * half_kappa + detuning * detuning;
    let k = drive_strength(params);
    let f = x - k / lorentz;
    let df = 1.0 - k * 2.0 * params.g * detuning / (lorentz * lorentz);
    (f, df)
}

fn polish(params: &SystemParams, mut x: f64) -> f64 {
    let (mut f, mut df) = implicit_residual(params, x);
    for _ in 0..4 {
        if f == 0.0 || df == 0.0 {
            break;
        }
        let candidate = x - f / df;
        let (fc, dfc) = implicit_residual(params, candidate);
        if !(fc.abs() < f.abs()) {
            break;
        }
        x = candidate;
        f = fc;
        df = dfc;
    }
    x
}

fn build_branch(params: &SystemParams, x_s: f64) -> SteadyStateBranch {
    let half_kappa = 0.5 * params.kappa;
    let half_gamma = 0.5 * params.gamma_m;
    let delta_eff = params.delta_c - params.g * x_s;
    let a_s = Complex64::new(params.eta, 0.0) / Complex64::new(half_kappa, delta_eff);

    // (iδ + Γ/2) b + ξ b* = i g |a|² and its conjugate.
    let force = params.g * a_s.norm_sqr();
    let xi = params.xi();
    let b_s = if force == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        let det = params.squeeze_denominator();
        Complex64::i() * force * (Complex64::new(half_gamma, -params.delta) + xi) / det
    };

    let cavity_eq = -Complex64::new(half_kappa, delta_eff) * a_s + params.eta;
    let mech_eq = Complex64::new(half_gamma, params.delta) * b_s + xi * b_s.conj()
        - Complex64::i() * force;
    let x_from_b = 2.0 * b_s.re;
    let residual = cavity_eq
        .norm()
        .max(mech_eq.norm())
        .max((x_from_b - x_s).abs());

    SteadyStateBranch {
        x_s,
        a_s,
        b_s,
        delta_eff,
        residual,
        stable: None,
    }
}

/// One grid point of a displacement sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub branches: Result<Vec<SteadyStateBranch>>,
}

/// Steady states along `axis`. Per-point failures are kept in the row.
pub fn displacement_sweep(
    params: &SystemParams,
    axis: SweepAxis,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    check_grid(grid)?;
    Ok(grid
        .par_iter()
        .map(|&value| SweepRow {
            value,
            branches: params
                .with_axis(axis, value)
                .normalized()
                .and_then(|p| steady_states(&p)),
        })
        .collect())
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("sweep grid is empty".into()));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(format!("non-finite grid value {v}")));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid(format!(
            "grid not strictly ascending at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}
