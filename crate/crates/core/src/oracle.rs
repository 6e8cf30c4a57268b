//! Master-equation cross-check in a truncated Fock space.
//!
//! The linearized Hamiltonian
//!
//! ```text
//! H = Δ_c a†a + δ b†b − (G* a + G a†)(b† + b) + (i/2)(ξ* b² − ξ b†²)
//! ```
//!
//! with thermal dissipators on both modes is assembled as a dense
//! Liouvillian on the product space (cavity index major, mechanical minor)
//! and its steady state extracted directly. The result is an independent
//! check of the Gaussian Lyapunov moments, usable only at small occupations.

use faer::linalg::solvers::Solve;
use faer::Mat;
use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::dynamics::{linearize, stability, DEFAULT_STABILITY_TOL};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::steady::{Stability, SteadyStateBranch};

/// Cap on dim_cav·dim_mech.
pub const MAX_HILBERT_DIM: usize = 4096;
/// Cap on the side of the dense Liouvillian, (dim_cav·dim_mech)².
pub const MAX_LIOUVILLIAN_DIM: usize = 6400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    pub dim_cav: usize,
    pub dim_mech: usize,
    /// Largest population tolerated in the top two levels of either mode.
    pub tail_tol: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig {
            dim_cav: 4,
            dim_mech: 16,
            tail_tol: 1e-6,
        }
    }
}

impl FockConfig {
    pub fn hilbert_dim(&self) -> usize {
        self.dim_cav * self.dim_mech
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason| Error::FockDimension {
            dim_cav: self.dim_cav,
            dim_mech: self.dim_mech,
            reason,
        };
        if self.dim_cav < 2 || self.dim_mech < 2 {
            return Err(err("each truncation dimension must be >= 2"));
        }
        if self.hilbert_dim() > MAX_HILBERT_DIM {
            return Err(err("dim_cav x dim_mech exceeds 4096"));
        }
        let n = self.hilbert_dim();
        if n * n > MAX_LIOUVILLIAN_DIM {
            return Err(err("dense Liouvillian exceeds 6400 x 6400"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::invalid("tail_tol", self.tail_tol, "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Dense Liouvillian acting on column-major vec(ρ).
pub struct Liouvillian {
    pub matrix: Mat<Complex64>,
    pub dim_cav: usize,
    pub dim_mech: usize,
}

impl Liouvillian {
    pub fn hilbert_dim(&self) -> usize {
        self.dim_cav * self.dim_mech
    }

    /// Applies the superoperator to an N×N operator.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.hilbert_dim();
        let v = Mat::<Complex64>::from_fn(n * n, 1, |k, _| rho[(k % n, k / n)]);
        let out = &self.matrix * &v;
        DMatrix::from_fn(n, n, |i, j| out[(i + n * j, 0)])
    }
}

/// Ladder operators (a, a†, b, b†) on the truncated product space.
pub fn ladder_operators(dim_cav: usize, dim_mech: usize) -> [DMatrix<Complex64>; 4] {
    let lower = |d: usize| {
        DMatrix::from_fn(d, d, |i, j| {
            if j == i + 1 {
                Complex64::from((j as f64).sqrt())
            } else {
                Complex64::from(0.0)
            }
        })
    };
    let a = lower(dim_cav).kronecker(&DMatrix::identity(dim_mech, dim_mech));
    let b = DMatrix::identity(dim_cav, dim_cav).kronecker(&lower(dim_mech));
    let ad = a.adjoint();
    let bd = b.adjoint();
    [a, ad, b, bd]
}

type Sparse = Vec<(usize, usize, Complex64)>;

fn sparse(m: &DMatrix<Complex64>) -> Sparse {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z != Complex64::from(0.0) {
                out.push((i, j, z));
            }
        }
    }
    out
}

/// L += c · (A ρ)
fn add_left(l: &mut Mat<Complex64>, n: usize, a: &Sparse, c: Complex64) {
    for j in 0..n {
        for &(i, k, z) in a {
            l[(i + n * j, k + n * j)] += c * z;
        }
    }
}

/// L += c · (ρ B)
fn add_right(l: &mut Mat<Complex64>, n: usize, b: &Sparse, c: Complex64) {
    for i in 0..n {
        for &(k, j, z) in b {
            l[(i + n * j, i + n * k)] += c * z;
        }
    }
}

/// L += c · (A ρ B)
fn add_sandwich(l: &mut Mat<Complex64>, n: usize, a: &Sparse, b: &Sparse, c: Complex64) {
    for &(i, k, za) in a {
        for &(m, j, zb) in b {
            l[(i + n * j, k + n * m)] += c * za * zb;
        }
    }
}

pub fn build_liouvillian(
    params: &SystemParams,
    branch: &SteadyStateBranch,
    cfg: &FockConfig,
) -> Result<Liouvillian> {
    cfg.validate()?;
    let model = linearize(params, branch)?;
    let report = stability(&model, DEFAULT_STABILITY_TOL);
    if report.verdict != Stability::Stable {
        return Err(Error::NoStationaryState {
            verdict: report.verdict.as_str(),
            max_re: report.max_re(),
        });
    }

    let n = cfg.hilbert_dim();
    let [a, ad, b, bd] = ladder_operators(cfg.dim_cav, cfg.dim_mech);
    let big_g = model.coupling;
    let xi = params.xi();
    let half_i = Complex64::new(0.0, 0.5);

    let h = &ad * &a * Complex64::from(branch.delta_eff)
        + &bd * &b * Complex64::from(params.delta)
        - (&a * big_g.conj() + &ad * big_g) * (&bd + &b)
        + (&b * &b * xi.conj() - &bd * &bd * xi) * half_i;

    let mut l = Mat::<Complex64>::zeros(n * n, n * n);
    let h_sp = sparse(&h);
    add_left(&mut l, n, &h_sp, Complex64::new(0.0, -1.0));
    add_right(&mut l, n, &h_sp, Complex64::new(0.0, 1.0));

    let channels = [
        (params.kappa * (params.n_th_cav + 1.0), &a),
        (params.kappa * params.n_th_cav, &ad),
        (params.gamma_m * (params.n_th_m + 1.0), &b),
        (params.gamma_m * params.n_th_m, &bd),
    ];
    for (rate, op) in channels {
        if rate == 0.0 {
            continue;
        }
        let jump = sparse(op);
        let jump_dag = sparse(&op.adjoint());
        let number = sparse(&(op.adjoint() * op));
        add_sandwich(&mut l, n, &jump, &jump_dag, Complex64::from(rate));
        add_left(&mut l, n, &number, Complex64::from(-0.5 * rate));
        add_right(&mut l, n, &number, Complex64::from(-0.5 * rate));
    }

    Ok(Liouvillian {
        matrix: l,
        dim_cav: cfg.dim_cav,
        dim_mech: cfg.dim_mech,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// ⟨δb†δb⟩
    pub n_mech: f64,
    /// ⟨δa†δa⟩
    pub n_cav: f64,
    /// ⟨v_i v_j⟩ for v = (δa, δa†, δb, δb†).
    pub moments: Matrix4<Complex64>,
    /// max(tail_cav, tail_mech)
    pub tail_mass: f64,
    pub tail_cav: f64,
    pub tail_mech: f64,
    pub converged: bool,
    pub trace: f64,
    /// Smallest eigenvalue of the steady density operator.
    pub min_eigenvalue: f64,
    pub dim_cav: usize,
    pub dim_mech: usize,
}

/// Steady state of `l`: the unit-trace element of its null space.
pub fn steady_expectations(l: Liouvillian, cfg: &FockConfig) -> Result<OracleResult> {
    let n = l.hilbert_dim();
    let nn = n * n;
    let Liouvillian {
        mut matrix,
        dim_cav,
        dim_mech,
    } = l;

    // swap the first equation for the trace constraint
    let saved_row: Vec<Complex64> = (0..nn).map(|j| matrix[(0, j)]).collect();
    let scale = (0..nn)
        .map(|j| saved_row[j].norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    for j in 0..nn {
        matrix[(0, j)] = Complex64::from(0.0);
    }
    for i in 0..n {
        matrix[(0, i + n * i)] = Complex64::from(scale);
    }
    let mut rhs = Mat::<Complex64>::zeros(nn, 1);
    rhs[(0, 0)] = Complex64::from(scale);

    let x = matrix.partial_piv_lu().solve(&rhs);
    let rho = DMatrix::from_fn(n, n, |i, j| x[(i + n * j, 0)]);

    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Degeneracy("steady-state solve produced non-finite entries".into()));
    }
    let hermitian_defect = (&rho - rho.adjoint()).camax();
    if hermitian_defect > 1e-8 {
        return Err(Error::Degeneracy(format!(
            "steady operator is not Hermitian (defect {hermitian_defect:e})"
        )));
    }
    // residual of every original equation
    for j in 0..nn {
        matrix[(0, j)] = saved_row[j];
    }
    let residual = (&matrix * &x).norm_max();
    let l_scale = matrix.norm_max();
    if residual > 1e-8 * l_scale.max(1.0) {
        return Err(Error::Degeneracy(format!(
            "null-space residual {residual:e} too large"
        )));
    }
    drop(matrix);

    let trace = rho.trace();
    let rho = (&rho + rho.adjoint()) * Complex64::from(0.5 / trace.re);
    let ops = ladder_operators(dim_cav, dim_mech);
    let mut moments = Matrix4::zeros();
    for i in 0..4 {
        let left = &rho * &ops[i];
        for j in 0..4 {
            moments[(i, j)] = (&left * &ops[j]).trace();
        }
    }

    let mut pop_cav = vec![0.0; dim_cav];
    let mut pop_mech = vec![0.0; dim_mech];
    for c in 0..dim_cav {
        for m in 0..dim_mech {
            let p = rho[(c * dim_mech + m, c * dim_mech + m)].re;
            pop_cav[c] += p;
            pop_mech[m] += p;
        }
    }
    let top_two = |p: &[f64]| p[p.len() - 2..].iter().sum::<f64>();
    let tail_cav = top_two(&pop_cav);
    let tail_mech = top_two(&pop_mech);
    let tail_mass = tail_cav.max(tail_mech);

    let min_eigenvalue = rho
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    Ok(OracleResult {
        n_mech: moments[(3, 2)].re,
        n_cav: moments[(1, 0)].re,
        moments,
        tail_mass,
        tail_cav,
        tail_mech,
        converged: tail_mass <= cfg.tail_tol,
        trace: rho.trace().re,
        min_eigenvalue,
        dim_cav,
        dim_mech,
    })
}

/// Solves at `cfg` and enlarges whichever truncation leaks population until
/// the tail criterion holds or the size caps are reached. The last attempt
/// is returned either way; check `converged`.
pub fn converged_expectations(
    params: &SystemParams,
    branch: &SteadyStateBranch,
    cfg: &FockConfig,
) -> Result<OracleResult> {
    let mut cfg = *cfg;
    loop {
        let result = steady_expectations(build_liouvillian(params, branch, &cfg)?, &cfg)?;
        if result.converged {
            return Ok(result);
        }
        // enlarge the mode that leaks most; fall back to the other one
        let grow_mech = FockConfig { dim_mech: cfg.dim_mech + 2, ..cfg };
        let grow_cav = FockConfig { dim_cav: cfg.dim_cav + 1, ..cfg };
        let (first, second) = if result.tail_mech >= result.tail_cav {
            (grow_mech, (result.tail_cav > cfg.tail_tol).then_some(grow_cav))
        } else {
            (grow_cav, (result.tail_mech > cfg.tail_tol).then_some(grow_mech))
        };
        let next = if first.validate().is_ok() {
            first
        } else {
            match second {
                Some(alt) if alt.validate().is_ok() => alt,
                _ => return Ok(result),
            }
        };
        log::debug!(
            "oracle tail {:e} at {}x{}; retrying at {}x{}",
            result.tail_mass,
            cfg.dim_cav,
            cfg.dim_mech,
            next.dim_cav,
            next.dim_mech
        );
        cfg = next;
    }
}
