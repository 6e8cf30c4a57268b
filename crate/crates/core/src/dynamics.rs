//! Linearized fluctuation dynamics around a classical equilibrium.
//!
//! Fluctuations are ordered v = (δa, δa†, δb, δb†) everywhere in the crate.
//! The model is dv/dt = M v + n with white input noise
//! ⟨n_i(t) n_j(t′)⟩ = D_ij δ(t − t′), n = (√κ a_in, √κ a_in†, √Γ_m b_in, √Γ_m b_in†).

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::params::SystemParams;
use crate::steady::{steady_states, Stability, SteadyStateBranch};

pub const DEFAULT_STABILITY_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Drift and diffusion matrices of the linearized Langevin system.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub params: SystemParams,
    pub branch: SteadyStateBranch,
    pub drift: Matrix4<Complex64>,
    pub diffusion: Matrix4<Complex64>,
    /// Enhanced coupling G = g·a_s.
    pub coupling: Complex64,
    /// Eigenvalues of the drift matrix, sorted by real part descending.
    eigenvalues: Vec<Complex64>,
}

impl LinearModel {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Largest real part among the drift eigenvalues.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

pub fn linearize(params: &SystemParams, branch: &SteadyStateBranch) -> Result<LinearModel> {
    let tol = branch.residual_tolerance(params);
    if !(branch.residual <= tol) {
        return Err(Error::BranchResidual {
            residual: branch.residual,
            tol,
        });
    }

    let p = params;
    let big_g = p.g * branch.a_s;
    let xi = p.xi();
    let cav = Complex64::new(0.5 * p.kappa, branch.delta_eff);
    let mech = Complex64::new(0.5 * p.gamma_m, p.delta);

    #[rustfmt::skip]
    let drift = Matrix4::new(
        -cav,                 ZERO,              I * big_g,      I * big_g,
        ZERO,                 -cav.conj(),       -I * big_g.conj(), -I * big_g.conj(),
        I * big_g.conj(),     I * big_g,         -mech,          -xi,
        -I * big_g.conj(),    -I * big_g,        -xi.conj(),     -mech.conj(),
    );

    let mut diffusion = Matrix4::zeros();
    diffusion[(0, 1)] = Complex64::from(p.kappa * (p.n_th_cav + 1.0));
    diffusion[(1, 0)] = Complex64::from(p.kappa * p.n_th_cav);
    diffusion[(2, 3)] = Complex64::from(p.gamma_m * (p.n_th_m + 1.0));
    diffusion[(3, 2)] = Complex64::from(p.gamma_m * p.n_th_m);

    let mut eigenvalues = linalg::eigenvalues4(&drift);
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

    Ok(LinearModel {
        params: *params,
        branch: *branch,
        drift,
        diffusion,
        coupling: big_g,
        eigenvalues,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdict: Stability,
    /// Sorted by real part, descending.
    pub eigenvalues: Vec<Complex64>,
}

impl StabilityReport {
    pub fn max_re(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

/// Stable iff every drift eigenvalue has Re λ < −tol; marginal if the
/// largest real part falls inside [−tol, tol].
pub fn stability(model: &LinearModel, tol: f64) -> StabilityReport {
    let max_re = model.spectral_abscissa();
    let verdict = if max_re < -tol {
        Stability::Stable
    } else if max_re <= tol {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    StabilityReport {
        verdict,
        eigenvalues: model.eigenvalues.clone(),
    }
}

/// Fills the stability verdict of every branch. Branches that cannot be
/// linearized keep `None`.
pub fn classify(params: &SystemParams, branches: &mut [SteadyStateBranch]) {
    for b in branches.iter_mut() {
        b.stable = linearize(params, b)
            .ok()
            .map(|m| stability(&m, DEFAULT_STABILITY_TOL).verdict);
    }
}

/// Default branch: the stable one with the smallest |x_s| (the branch that
/// connects to x_s = 0 as η → 0), falling back to the smallest |x_s| overall.
pub fn default_branch(branches: &[SteadyStateBranch]) -> Option<usize> {
    let by_size = |a: &(usize, &SteadyStateBranch), b: &(usize, &SteadyStateBranch)| {
        a.1.x_s.abs().total_cmp(&b.1.x_s.abs())
    };
    branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.stable == Some(Stability::Stable))
        .min_by(by_size)
        .or_else(|| branches.iter().enumerate().min_by(by_size))
        .map(|(i, _)| i)
}

/// A parameter point resolved down to the linear model of one branch.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub params: SystemParams,
    /// All equilibria with their stability verdicts.
    pub branches: Vec<SteadyStateBranch>,
    pub branch_index: usize,
    pub model: LinearModel,
}

/// Normalizes `params`, finds and classifies the equilibria and linearizes
/// around `branch` (or the default branch).
pub fn operating_point(params: &SystemParams, branch: Option<usize>) -> Result<OperatingPoint> {
    let params = params.normalized()?;
    let mut branches = steady_states(&params)?;
    classify(&params, &mut branches);
    let branch_index = match branch {
        Some(i) if i < branches.len() => i,
        Some(i) => {
            return Err(Error::BranchIndex {
                index: i,
                count: branches.len(),
            })
        }
        None => default_branch(&branches).expect("steady_states returns at least one branch"),
    };
    let model = linearize(&params, &branches[branch_index])?;
    Ok(OperatingPoint {
        params,
        branches,
        branch_index,
        model,
    })
}

/// Steady-state second moments V_ij = ⟨v_i v_j⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrix {
    pub v: Matrix4<Complex64>,
}

impl MomentMatrix {
    /// ⟨δb† δb⟩
    pub fn phonons(&self) -> f64 {
        self.v[(3, 2)].re
    }

    /// ⟨δa† δa⟩
    pub fn photons(&self) -> f64 {
        self.v[(1, 0)].re
    }

    /// Deviations of V₁₂ − V₂₁ and V₃₄ − V₄₃ from 1.
    pub fn commutator_defects(&self) -> (f64, f64) {
        let v = &self.v;
        (
            (v[(0, 1)] - v[(1, 0)] - 1.0).norm(),
            (v[(2, 3)] - v[(3, 2)] - 1.0).norm(),
        )
    }
}

/// Solves M V + V Mᵀ + D = 0 by vectorization.
pub fn lyapunov_moments(model: &LinearModel) -> Result<MomentMatrix> {
    let report = stability(model, DEFAULT_STABILITY_TOL);
    if report.verdict != Stability::Stable {
        return Err(Error::NoStationaryState {
            verdict: report.verdict.as_str(),
            max_re: report.max_re(),
        });
    }

    let m = &model.drift;
    let d = &model.diffusion;
    let eye = Matrix4::<Complex64>::identity();
    // column-major vec: vec(M V) = (I ⊗ M) vec V, vec(V Mᵀ) = (M ⊗ I) vec V
    let op: SMatrix<Complex64, 16, 16> = eye.kronecker(m) + m.kronecker(&eye);
    let rhs = SVector::<Complex64, 16>::from_iterator(d.iter().map(|z| -z));

    let lu = op.lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Lyapunov("singular Sylvester operator".into()))?;
    // one round of iterative refinement
    let r = rhs - op * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }

    let v = Matrix4::from_column_slice(x.as_slice());
    let residual = (m * v + v * m.transpose() + d).camax();
    let scale = d.camax();
    if !(residual <= 1e-10 * scale) {
        return Err(Error::Lyapunov(format!(
            "residual {residual:e} exceeds 1e-10 x {scale:e}"
        )));
    }
    Ok(MomentMatrix { v })
}

/// Variances of X = δb + δb† and P = −i(δb − δb†), and their symmetrized
/// covariance. The vacuum gives (1, 1, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEllipse {
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl ErrorEllipse {
    /// varX·varP − covXP², bounded below by 1.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    /// (largest variance, smallest variance, angle of the major axis from X).
    pub fn principal_axes(&self) -> (f64, f64, f64) {
        let c = Matrix2::new(self.var_x, self.cov_xp, self.cov_xp, self.var_p);
        let mean = 0.5 * (c[(0, 0)] + c[(1, 1)]);
        let half_diff = 0.5 * (c[(0, 0)] - c[(1, 1)]);
        let radius = half_diff.hypot(self.cov_xp);
        let angle = 0.5 * self.cov_xp.atan2(half_diff);
        (mean + radius, mean - radius, angle)
    }
}

pub fn error_ellipse(moments: &MomentMatrix) -> ErrorEllipse {
    let v = &moments.v;
    let n = v[(3, 2)].re;
    let bb = v[(2, 2)];
    ErrorEllipse {
        var_x: 2.0 * bb.re + 2.0 * n + 1.0,
        var_p: 1.0 + 2.0 * n - 2.0 * bb.re,
        cov_xp: 2.0 * bb.im,
    }
}

/// Weights (c_X, c_P) with which the cavity couples to the mechanical
/// quadratures in the squeezed frame: (cosh r − cos 2θ sinh r, sin 2θ sinh r).
pub fn quadrature_coupling(r: f64, theta: f64) -> (f64, f64) {
    let (s2, c2) = (2.0 * theta).sin_cos();
    (r.cosh() - c2 * r.sinh(), s2 * r.sinh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn model(p: SystemParams) -> LinearModel {
        let p = p.normalized().unwrap();
        let branches = steady_states(&p).unwrap();
        linearize(&p, &branches[0]).unwrap()
    }

    fn decoupled(r: f64, n_th_m: f64) -> SystemParams {
        SystemParams { g: 0.0, r, n_th_m, theta: PI / 4.0, ..Default::default() }
    }

    #[test]
    fn decoupled_drift_is_block_diagonal() {
        let p = decoupled(0.3, 10.0);
        let m = model(p);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (3, 1), (0, 1), (1, 0)] {
            assert_eq!(m.drift[(i, j)], ZERO, "entry {i},{j}");
        }
        assert_eq!(m.drift[(0, 0)], -Complex64::new(1.0, 2.0));
        assert_eq!(m.drift[(1, 1)], Complex64::new(-1.0, 2.0));
        assert_eq!(m.drift[(2, 3)], -p.xi());
        assert_eq!(m.drift[(3, 2)], -p.xi().conj());
    }

    #[test]
    fn unsqueezed_mechanics_has_no_mixing() {
        let m = model(SystemParams { r: 0.0, ..Default::default() });
        assert_eq!(m.drift[(2, 3)], ZERO);
        assert_eq!(m.drift[(3, 2)], ZERO);
    }

    #[test]
    fn enhanced_coupling_at_reference_point() {
        let m = model(SystemParams::default());
        assert!((m.coupling.norm() - 4.47e-3).abs() < 1e-5, "{}", m.coupling.norm());
    }

    #[test]
    fn diffusion_entries() {
        let p = SystemParams::default();
        let m = model(p);
        let d = &m.diffusion;
        assert_eq!(d[(0, 1)].re, 2.0 * 2.0);
        assert_eq!(d[(1, 0)].re, 2.0 * 1.0);
        assert_eq!(d[(2, 3)].re, 1e-3 * 11.0);
        assert_eq!(d[(3, 2)].re, 1e-3 * 10.0);
        assert_eq!(d.iter().filter(|z| z.norm() != 0.0).count(), 4);
    }

    #[test]
    fn decoupled_stability_examples() {
        let s = stability(&model(decoupled(0.0, 10.0)), DEFAULT_STABILITY_TOL);
        assert_eq!(s.verdict, Stability::Stable);
        let expected = [
            Complex64::new(-5e-4, 0.4),
            Complex64::new(-5e-4, -0.4),
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
        ];
        for e in expected {
            assert!(s.eigenvalues.iter().any(|z| (z - e).norm() < 1e-12), "{e}");
        }

        let s = stability(&model(decoupled(1.2, 10.0)), DEFAULT_STABILITY_TOL);
        assert_eq!(s.verdict, Stability::Unstable);
        let lead = -5e-4 + (1.44f64 - 0.16).sqrt();
        assert!((s.max_re() - lead).abs() < 1e-12);
        assert!((s.max_re() - 1.1309).abs() < 1e-4);

        let s = stability(&model(decoupled(0.2, 10.0)), DEFAULT_STABILITY_TOL);
        assert_eq!(s.verdict, Stability::Stable);
    }

    #[test]
    fn thermal_equilibrium_moments() {
        let v = lyapunov_moments(&model(decoupled(0.0, 10.0))).unwrap();
        assert!((v.phonons() - 10.0).abs() < 1e-12);
        assert!((v.photons() - 1.0).abs() < 1e-12);
    }

    /// Independent route: the 2×2 mechanical block alone, solved by
    /// integrating dV/dt = M V + V Mᵀ + D to stationarity.
    fn mechanical_lyapunov_by_relaxation(p: &SystemParams) -> f64 {
        let xi = p.xi();
        let mech = Complex64::new(0.5 * p.gamma_m, p.delta);
        let m = Matrix2::new(-mech, -xi, -xi.conj(), -mech.conj());
        let d = Matrix2::new(
            ZERO,
            Complex64::from(p.gamma_m * (p.n_th_m + 1.0)),
            Complex64::from(p.gamma_m * p.n_th_m),
            ZERO,
        );
        // exact one-step propagator of the linear ODE via the matrix exponential
        let dt = 1.0;
        let e = (m * Complex64::from(dt)).exp();
        let mut v = Matrix2::zeros();
        // V(t+dt) = e V e^T + ∫ e^{Ms} D e^{Mᵀs} ds, quadrature by midpoint sub-steps
        let sub = 2000;
        let h = dt / sub as f64;
        let mut q = Matrix2::zeros();
        for k in 0..sub {
            let s = (k as f64 + 0.5) * h;
            let es = (m * Complex64::from(s)).exp();
            q += es * d * es.transpose() * Complex64::from(h);
        }
        for _ in 0..200_000 {
            let next = e * v * e.transpose() + q;
            if (next - v).camax() < 1e-13 {
                v = next;
                break;
            }
            v = next;
        }
        v[(1, 0)].re
    }

    #[test]
    fn squeezed_bath_closed_form_confirmed_by_relaxation() {
        // relaxation needs a fast-damped oscillator to converge quickly
        for r in [0.05, 0.15, 0.25] {
            let p = SystemParams { g: 0.0, r, gamma_m: 0.05, n_th_m: 3.0, theta: 0.7, ..Default::default() };
            let relaxed = mechanical_lyapunov_by_relaxation(&p);
            let beta = r * r / (2.0 * p.critical_squeeze().powi(2));
            let closed = (p.n_th_m + beta) / (1.0 - 2.0 * beta);
            assert!((relaxed - closed).abs() < 1e-6 * closed, "{relaxed} vs {closed}");
            let lyap = lyapunov_moments(&model(p)).unwrap().phonons();
            assert!((lyap - closed).abs() < 1e-9 * closed);
        }
    }

    #[test]
    fn squeezed_bath_example() {
        let v = lyapunov_moments(&model(decoupled(0.2, 10.0))).unwrap();
        assert!((v.phonons() - 13.5).abs() < 13.5 * 1e-5, "{}", v.phonons());
    }

    #[test]
    fn refuses_unstable_models() {
        let err = lyapunov_moments(&model(decoupled(1.2, 10.0))).unwrap_err();
        assert!(matches!(err, Error::NoStationaryState { verdict: "unstable", .. }));
    }

    #[test]
    fn ellipse_examples() {
        let e = error_ellipse(&lyapunov_moments(&model(decoupled(0.0, 0.0))).unwrap());
        assert!((e.var_x - 1.0).abs() < 1e-12 && (e.var_p - 1.0).abs() < 1e-12);
        assert!(e.cov_xp.abs() < 1e-12);

        let e = error_ellipse(&lyapunov_moments(&model(decoupled(0.0, 10.0))).unwrap());
        assert!((e.var_x - 21.0).abs() < 1e-10 && (e.var_p - 21.0).abs() < 1e-10);

        let e = error_ellipse(&lyapunov_moments(&model(decoupled(0.2, 0.0))).unwrap());
        let (major, minor, _) = e.principal_axes();
        assert!(e.uncertainty_product() >= 1.0 - 1e-9);
        assert!(major > minor * 1.1, "{major} {minor}");
    }

    #[test]
    fn quadrature_coupling_examples() {
        assert_eq!(quadrature_coupling(0.0, 0.3), (1.0, 0.0));
        let (cx, cp) = quadrature_coupling(0.8, 0.0);
        assert!((cx - (-0.8f64).exp()).abs() < 1e-15 && cp == 0.0);
        let (cx, cp) = quadrature_coupling(0.8, PI / 4.0);
        assert!((cx - 0.8f64.cosh()).abs() < 1e-15);
        assert!((cp - 0.8f64.sinh()).abs() < 1e-15);
    }

    #[test]
    fn trace_is_total_damping() {
        for (g, r, theta) in [(0.0, 0.0, 0.0), (0.01, 1.2, 0.3), (0.05, 0.3, 2.0)] {
            let p = SystemParams { g, r, theta, ..Default::default() };
            let m = model(p);
            let tr = m.drift.trace();
            assert!((tr + Complex64::from(p.kappa + p.gamma_m)).norm() < 1e-12);
        }
    }

    #[test]
    fn default_branch_prefers_small_stable() {
        let p = SystemParams { g: 0.05, r: 0.3, delta_c: 3.0, ..Default::default() };
        let mut b = steady_states(&p).unwrap();
        assert_eq!(b.len(), 3);
        classify(&p, &mut b);
        let i = default_branch(&b).unwrap();
        assert_eq!(b[i].stable, Some(Stability::Stable));
        for other in b.iter().filter(|o| o.stable == Some(Stability::Stable)) {
            assert!(b[i].x_s.abs() <= other.x_s.abs());
        }
    }
}
