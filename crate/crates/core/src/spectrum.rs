//! Phonon-number noise spectrum and its integral, the mean occupation.
//!
//! Fourier convention: f̃(ω) = ∫dt e^{iωt} f(t), so the linear model
//! dv/dt = M v + n becomes ṽ(ω) = χ(ω) ñ(ω) with χ(ω) = (−iωI − M)⁻¹, and the
//! white inputs obey ⟨ñ_k(ω) ñ_l(ω′)⟩ = 2π D_kl δ(ω + ω′). With
//!
//! ```text
//! S_n(ω) = Σ_kl χ_4k(ω) D_kl χ_3l(−ω)
//! ```
//!
//! the occupation is n̄ = ⟨δb†δb⟩ = (1/2π) ∫ S_n(ω) dω. Under this convention a
//! thermal mechanical mode peaks at ω = −δ (the δb† component oscillates as
//! e^{+iδt}).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{self, stability, LinearModel, StabilityReport, DEFAULT_STABILITY_TOL};
use crate::error::{Error, Result};
use crate::params::{effective_temperature, SweepAxis, SystemParams};
use crate::quadrature::{self, QuadratureOptions};
use crate::steady::{Stability, SteadyStateBranch};

/// Minimum distance between −iω and a drift eigenvalue.
pub const SINGULAR_DISTANCE: f64 = 1e-12;
/// Integration half-width as a multiple of the largest model rate when not given.
pub const AUTO_OMEGA_FACTOR: f64 = 100.0;
/// Smallest allowed ratio Ω / max(κ, δ, r, |Δ_c|, 1).
pub const MIN_OMEGA_FACTOR: f64 = 10.0;
const TAIL_SAMPLES: usize = 32;

/// Integration window, tolerances and the sampling of emitted curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width Ω of the integration window [−Ω, Ω]; `None` picks
    /// 100·max(κ, δ, r, |Δ_c|, 1).
    pub omega_max: Option<f64>,
    /// Emitted curves cover [−W, W].
    pub plot_half_width: f64,
    pub backbone_points: usize,
    /// Extra log-spaced samples on each side of every resonance inside the window.
    pub peak_points: usize,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            omega_max: None,
            plot_half_width: 2.0,
            backbone_points: 2001,
            peak_points: 40,
            rel_tol: 1e-6,
            max_panels: 100_000,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.omega_max {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGrid(format!("omega_max = {w} must be finite and > 0")));
            }
        }
        if !(self.plot_half_width.is_finite() && self.plot_half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "plot_half_width = {} must be finite and > 0",
                self.plot_half_width
            )));
        }
        if self.backbone_points < 2 {
            return Err(Error::InvalidGrid("backbone_points must be >= 2".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidGrid(format!("rel_tol = {} must lie in (0, 1)", self.rel_tol)));
        }
        if self.max_panels == 0 {
            return Err(Error::InvalidGrid("max_panels must be >= 1".into()));
        }
        Ok(())
    }

    /// Integration half-width for `model`, checked against the minimum.
    pub fn omega_max_for(&self, model: &LinearModel) -> Result<f64> {
        let p = &model.params;
        let scale = [p.kappa, p.delta.abs(), p.r, model.branch.delta_eff.abs(), 1.0]
            .into_iter()
            .fold(0.0, f64::max);
        match self.omega_max {
            None => Ok(AUTO_OMEGA_FACTOR * scale),
            Some(w) if w >= MIN_OMEGA_FACTOR * scale => Ok(w),
            Some(w) => Err(Error::InvalidGrid(format!(
                "omega_max = {w} is below {MIN_OMEGA_FACTOR} x {scale} required by the model rates"
            ))),
        }
    }
}

/// χ(ω) = (−iω I − M)⁻¹.
pub fn susceptibility(model: &LinearModel, omega: f64) -> Result<Matrix4<Complex64>> {
    let shift = Complex64::new(0.0, omega);
    let distance = model
        .eigenvalues()
        .iter()
        .map(|l| (l + shift).norm())
        .fold(f64::INFINITY, f64::min);
    if !(distance > SINGULAR_DISTANCE) {
        return Err(Error::SingularFrequency { omega, distance });
    }
    let a = Matrix4::from_diagonal_element(-shift) - model.drift;
    a.try_inverse()
        .ok_or(Error::SingularFrequency { omega, distance })
}

/// S_n(ω) before discarding the (round-off) imaginary part.
pub fn s_n_complex(model: &LinearModel, omega: f64) -> Result<Complex64> {
    correlation_spectrum(model, omega, 3, 2)
}

pub fn s_n_at(model: &LinearModel, omega: f64) -> Result<f64> {
    s_n_complex(model, omega).map(|s| s.re)
}

/// Phonon spectrum of the bare squeezed oscillator (no cavity), evaluated
/// with its own 2×2 susceptibility. Reference for the g → 0 limit.
pub fn mechanical_s_n_at(params: &SystemParams, omega: f64) -> Result<f64> {
    let xi = params.xi();
    let mech = Complex64::new(0.5 * params.gamma_m, params.delta);
    let m = Matrix2::new(-mech, -xi, -xi.conj(), -mech.conj());
    let chi = |w: f64| {
        (Matrix2::from_diagonal_element(Complex64::new(0.0, -w)) - m)
            .try_inverse()
            .ok_or(Error::SingularFrequency { omega: w, distance: 0.0 })
    };
    let plus = chi(omega)?;
    let minus = chi(-omega)?;
    let up = params.gamma_m * (params.n_th_m + 1.0);
    let down = params.gamma_m * params.n_th_m;
    let s = plus[(1, 0)] * up * minus[(0, 1)] + plus[(1, 1)] * down * minus[(0, 0)];
    Ok(s.re)
}

/// A sampled phonon spectrum together with its integrated occupation.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub s_n: Vec<f64>,
    /// (1/2π)∫S_n dω including the tail correction.
    pub n_bar: f64,
    /// Quadrature error bound on n_bar (tail model excluded).
    pub n_bar_error: f64,
    /// Contribution of |ω| > Ω from the c/ω² tail fit, already in n_bar.
    pub tail: f64,
    pub t_eff: Option<f64>,
    /// Set when the model has no stationary state; the curve is then the
    /// formal linear-response expression.
    pub formal: bool,
    pub verdict: Stability,
    /// Power-law exponents fitted to the last decade on the negative and
    /// positive side; NaN when the tail is not strictly positive.
    pub tail_exponents: [f64; 2],
    pub omega_max: f64,
    pub panels: usize,
}

impl Spectrum {
    /// Grid sample with the largest S_n.
    pub fn dominant_peak(&self) -> Option<(f64, f64)> {
        self.omega
            .iter()
            .zip(&self.s_n)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&w, &s)| (w, s))
    }

    /// Interior local maxima of the sampled curve.
    pub fn local_maxima(&self) -> Vec<(f64, f64)> {
        self.s_n
            .windows(3)
            .enumerate()
            .filter(|(_, w)| w[1] > w[0] && w[1] >= w[2])
            .map(|(i, w)| (self.omega[i + 1], w[1]))
            .collect()
    }

    /// Largest spacing between the sample nearest `omega` and its neighbours.
    pub fn grid_step_at(&self, omega: f64) -> f64 {
        let i = self.omega.partition_point(|&w| w < omega).min(self.omega.len() - 1);
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(self.omega.len() - 1);
        (self.omega[i] - self.omega[lo]).max(self.omega[hi] - self.omega[i])
    }
}

/// Real positions and half-widths of the susceptibility poles.
fn resonances(model: &LinearModel) -> Vec<(f64, f64)> {
    model
        .eigenvalues()
        .iter()
        .map(|l| (-l.im, l.re.abs().max(1e-12)))
        .collect()
}

fn breakpoints(model: &LinearModel, omega_max: f64) -> Vec<f64> {
    let mut pts = vec![-omega_max, omega_max];
    for (center, width) in resonances(model) {
        for m in [0.0, -1.0, 1.0, -10.0, 10.0, -100.0, 100.0] {
            let x = center + m * width;
            if x > -omega_max && x < omega_max {
                pts.push(x);
            }
        }
    }
    sorted_unique(pts, 1e-13 * omega_max)
}

fn sorted_unique(mut pts: Vec<f64>, min_gap: f64) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= min_gap);
    pts
}

fn plot_grid(model: &LinearModel, grid: &GridSpec) -> Vec<f64> {
    let w = grid.plot_half_width;
    let n = grid.backbone_points;
    let mut pts: Vec<f64> = (0..n)
        .map(|i| -w + 2.0 * w * i as f64 / (n - 1) as f64)
        .collect();
    if grid.peak_points > 0 {
        for (center, width) in resonances(model) {
            if center.abs() > w {
                continue;
            }
            pts.push(center);
            for k in 0..grid.peak_points {
                let t = if grid.peak_points == 1 {
                    0.0
                } else {
                    k as f64 / (grid.peak_points - 1) as f64
                };
                // 0.01 to 10 linewidths
                let offset = width * 10f64.powf(-2.0 + 3.0 * t);
                for x in [center - offset, center + offset] {
                    if x.abs() <= w {
                        pts.push(x);
                    }
                }
            }
        }
    }
    sorted_unique(pts, 1e-12 * w)
}

/// Fits c/ω² and a free power law to S_n on [Ω/10, Ω] on one side.
fn fit_tail(model: &LinearModel, omega_max: f64, sign: f64) -> Result<(f64, f64)> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut logs = Vec::with_capacity(TAIL_SAMPLES);
    let mut positive = true;
    for i in 0..TAIL_SAMPLES {
        let t = i as f64 / (TAIL_SAMPLES - 1) as f64;
        let w = omega_max * 10f64.powf(t - 1.0);
        let s = s_n_at(model, sign * w)?;
        num += s / (w * w);
        den += 1.0 / (w * w * w * w);
        if s > 0.0 {
            logs.push((w.ln(), s.ln()));
        } else {
            positive = false;
        }
    }
    let c = num / den;
    let exponent = if positive {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    } else {
        f64::NAN
    };
    Ok((c, exponent))
}

/// Integrates S_n over [−Ω, Ω], adds the analytic c/ω² tails and samples
/// the curve for output.
pub fn integrate_occupation(model: &LinearModel, grid: &GridSpec) -> Result<Spectrum> {
    grid.validate()?;
    let omega_max = grid.omega_max_for(model)?;
    let report = stability(model, DEFAULT_STABILITY_TOL);
    let formal = report.verdict != Stability::Stable;
    if formal {
        log::warn!(
            "model is {} (max Re λ = {:e}); spectrum is formal",
            report.verdict.as_str(),
            report.max_re()
        );
    }

    let opts = QuadratureOptions {
        rel_tol: grid.rel_tol,
        abs_tol: 1e-15 * model.diffusion.camax(),
        max_panels: grid.max_panels,
    };
    let integral = quadrature::integrate(
        |w| s_n_at(model, w),
        &breakpoints(model, omega_max),
        &opts,
    )?;

    let (c_minus, p_minus) = fit_tail(model, omega_max, -1.0)?;
    let (c_plus, p_plus) = fit_tail(model, omega_max, 1.0)?;
    let tail = (c_minus + c_plus) / omega_max / (2.0 * PI);
    let n_bar = integral.value / (2.0 * PI) + tail;

    let omega = plot_grid(model, grid);
    let s_n = omega
        .iter()
        .map(|&w| s_n_at(model, w))
        .collect::<Result<Vec<_>>>()?;

    Ok(Spectrum {
        omega,
        s_n,
        n_bar,
        n_bar_error: integral.error / (2.0 * PI),
        tail,
        t_eff: effective_temperature(n_bar).ok(),
        formal,
        verdict: report.verdict,
        tail_exponents: [p_minus, p_plus],
        omega_max,
        panels: integral.panels,
    })
}

/// Correlation spectrum S_ij(ω) = Σ_kl χ_ik(ω) D_kl χ_jl(−ω), whose
/// integral over ω/2π is ⟨v_i v_j⟩.
pub fn correlation_spectrum(model: &LinearModel, omega: f64, i: usize, j: usize) -> Result<Complex64> {
    let plus = susceptibility(model, omega)?;
    let minus = susceptibility(model, -omega)?;
    let d = &model.diffusion;
    let mut s = Complex64::new(0.0, 0.0);
    for k in 0..4 {
        for l in 0..4 {
            let dkl = d[(k, l)];
            if dkl != Complex64::new(0.0, 0.0) {
                s += plus[(i, k)] * dkl * minus[(j, l)];
            }
        }
    }
    Ok(s)
}

/// (1/2π)∫S_ij dω for one component, with c/ω² tails beyond ±Ω.
fn integrate_component<F>(f: F, model: &LinearModel, omega_max: f64, grid: &GridSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let opts = QuadratureOptions {
        rel_tol: grid.rel_tol,
        abs_tol: 1e-12 * model.diffusion.camax(),
        max_panels: grid.max_panels,
    };
    let integral = quadrature::integrate(&f, &breakpoints(model, omega_max), &opts)?;
    let mut tail = 0.0;
    for sign in [-1.0, 1.0] {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..TAIL_SAMPLES {
            let w = omega_max * 10f64.powf(i as f64 / (TAIL_SAMPLES - 1) as f64 - 1.0);
            num += f(sign * w)? / (w * w);
            den += 1.0 / (w * w * w * w);
        }
        tail += num / den / omega_max;
    }
    Ok((integral.value + tail) / (2.0 * PI))
}

/// Mechanical second moments ⟨δbδb⟩ and ⟨δb†δb⟩ obtained by integrating the
/// correlation spectra. For stable models this reproduces the Lyapunov
/// moments; for unstable ones it is the formal linear-response value.
/// Only the mechanical block of the returned matrix is filled; the
/// remaining entries follow from the commutator and conjugation.
pub fn spectral_mechanical_moments(model: &LinearModel, grid: &GridSpec) -> Result<dynamics::MomentMatrix> {
    grid.validate()?;
    let omega_max = grid.omega_max_for(model)?;
    let bb_re = integrate_component(|w| Ok(correlation_spectrum(model, w, 2, 2)?.re), model, omega_max, grid)?;
    let bb_im = integrate_component(|w| Ok(correlation_spectrum(model, w, 2, 2)?.im), model, omega_max, grid)?;
    let n = integrate_component(|w| s_n_at(model, w), model, omega_max, grid)?;
    let bb = Complex64::new(bb_re, bb_im);
    let mut v = Matrix4::zeros();
    v[(2, 2)] = bb;
    v[(3, 3)] = bb.conj();
    v[(3, 2)] = Complex64::from(n);
    v[(2, 3)] = Complex64::from(n + 1.0);
    Ok(dynamics::MomentMatrix { v })
}

/// Result of one parameter point of a spectrum sweep.
#[derive(Debug, Clone)]
pub struct SpectrumPoint {
    pub params: SystemParams,
    pub branches: Vec<SteadyStateBranch>,
    pub branch_index: usize,
    pub stability: StabilityReport,
    pub spectrum: Spectrum,
}

#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub value: f64,
    pub point: Result<SpectrumPoint>,
}

/// Steady state → linear model → spectrum at a single parameter point.
pub fn spectrum_point(
    params: &SystemParams,
    branch: Option<usize>,
    grid: &GridSpec,
) -> Result<SpectrumPoint> {
    let op = dynamics::operating_point(params, branch)?;
    let spectrum = integrate_occupation(&op.model, grid)?;
    Ok(SpectrumPoint {
        params: op.params,
        stability: stability(&op.model, DEFAULT_STABILITY_TOL),
        branches: op.branches,
        branch_index: op.branch_index,
        spectrum,
    })
}

/// One spectrum per value of `axis`, in input order.
pub fn spectrum_sweep(
    params: &SystemParams,
    axis: SweepAxis,
    values: &[f64],
    grid: &GridSpec,
    branch: Option<usize>,
) -> Result<Vec<SpectrumRow>> {
    if values.is_empty() {
        return Err(Error::InvalidGrid("spectrum sweep needs at least one value".into()));
    }
    grid.validate()?;
    Ok(values
        .par_iter()
        .map(|&value| SpectrumRow {
            value,
            point: spectrum_point(&params.with_axis(axis, value), branch, grid),
        })
        .collect())
}
