//! Scenario runner behind the `squeezecool` binary.
//!
//! Every requested product becomes one CSV file. Floats are written with 17
//! significant digits and points are assembled in scenario order, so the
//! same scenario always yields byte-identical files regardless of `--jobs`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{
    error_ellipse, linearize, lyapunov_moments, operating_point, stability, ErrorEllipse,
    MomentMatrix, OperatingPoint, StabilityReport, DEFAULT_STABILITY_TOL,
};
use crate::error::Error;
use crate::oracle::{converged_expectations, OracleResult};
use crate::scenario::{validate, EvalPoint, Product, Scenario};
use crate::spectrum::{integrate_occupation, spectral_mechanical_moments, Spectrum};
use crate::steady::Stability;

pub const EXIT_OK: i32 = 0;
/// Scenario file unreadable or outputs unwritable.
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the scenario's `outputs`.
    pub products: Option<Vec<Product>>,
    /// Overrides the scenario's `branch`.
    pub branch: Option<usize>,
    /// Worker threads; `None` or 0 lets rayon decide.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    /// Warnings and per-point errors, each naming the field or grid point.
    pub messages: Vec<String>,
}

/// Products rendered to CSV text, plus the exit code they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub files: BTreeMap<Product, String>,
    pub exit_code: i32,
    pub messages: Vec<String>,
}

/// Reads, validates and runs a scenario file.
pub fn run_file(path: &Path, opts: &RunOptions) -> RunReport {
    match fs::read_to_string(path) {
        Ok(text) => run_text(&text, opts),
        Err(e) => RunReport {
            exit_code: EXIT_IO,
            files: Vec::new(),
            messages: vec![format!("cannot read scenario {}: {e}", path.display())],
        },
    }
}

pub fn run_text(text: &str, opts: &RunOptions) -> RunReport {
    match validate(text) {
        Ok(v) => {
            let mut report = run(&v.scenario, opts);
            let mut messages = v.warnings;
            messages.append(&mut report.messages);
            report.messages = messages;
            report
        }
        Err(errors) => RunReport {
            exit_code: EXIT_VALIDATION,
            files: Vec::new(),
            messages: errors.iter().map(|e| e.to_string()).collect(),
        },
    }
}

/// Runs a validated scenario and writes its CSV files into `opts.out_dir`.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> RunReport {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            return RunReport {
                exit_code: EXIT_IO,
                files: Vec::new(),
                messages: vec![format!("cannot start worker pool: {e}")],
            }
        }
    };
    let rendered = pool.install(|| render(scenario, opts));

    let mut files = Vec::new();
    let mut messages = rendered.messages;
    if let Err(e) = fs::create_dir_all(&opts.out_dir) {
        messages.push(format!("cannot create {}: {e}", opts.out_dir.display()));
        return RunReport {
            exit_code: EXIT_IO,
            files,
            messages,
        };
    }
    for (product, text) in &rendered.files {
        let path = opts.out_dir.join(product.file_name());
        if let Err(e) = fs::write(&path, text) {
            messages.push(format!("cannot write {}: {e}", path.display()));
            return RunReport {
                exit_code: EXIT_IO,
                files,
                messages,
            };
        }
        files.push(path);
    }
    RunReport {
        exit_code: rendered.exit_code,
        files,
        messages,
    }
}

/// Evaluates every point and renders the requested products without
/// touching the file system.
pub fn render(scenario: &Scenario, opts: &RunOptions) -> Rendered {
    let products: Vec<Product> = match &opts.products {
        Some(p) => {
            let mut p = p.clone();
            p.sort();
            p.dedup();
            p
        }
        None => scenario.outputs.iter().copied().collect(),
    };
    let branch = opts.branch.or(scenario.branch);
    let points = scenario.points();
    let evals: Vec<PointEval> = points
        .par_iter()
        .map(|p| evaluate(scenario, p, branch, &products))
        .collect();

    let axis = scenario.sweep.as_ref().map(|s| s.axis.column());
    let mut out = Rendered {
        files: BTreeMap::new(),
        exit_code: EXIT_OK,
        messages: Vec::new(),
    };
    let mut numerical = false;
    let mut validation = false;
    let mut oracle_failed = false;
    for (i, e) in evals.iter().enumerate() {
        for err in e.errors() {
            out.messages.push(format!("{}: {err}", e.label(i)));
            match err {
                Error::BranchIndex { .. } | Error::InvalidParameter { .. } | Error::InvalidGrid(_) => {
                    validation = true
                }
                _ => numerical = true,
            }
        }
        if let Some(Ok(o)) = &e.oracle {
            if !o.converged {
                oracle_failed = true;
                out.messages.push(format!(
                    "{}: oracle not converged (tail mass {:e} > {:e} at {}x{})",
                    e.label(i),
                    o.tail_mass,
                    scenario.oracle.tail_tol,
                    o.dim_cav,
                    o.dim_mech
                ));
            }
        }
    }
    out.exit_code = if validation {
        EXIT_VALIDATION
    } else if numerical {
        EXIT_NUMERICAL
    } else if oracle_failed {
        EXIT_ORACLE
    } else {
        EXIT_OK
    };

    for product in products {
        let text = match product {
            Product::Steady => steady_csv(axis, &evals),
            Product::Spectrum => spectrum_csv(axis, &evals),
            Product::Occupation => occupation_csv(axis, &evals),
            Product::Ellipse => ellipse_csv(axis, &evals),
            Product::Stability => stability_csv(axis, &evals),
            Product::Oracle => oracle_csv(axis, &evals, scenario.oracle.tail_tol),
        };
        out.files.insert(product, text);
    }
    out
}

struct PointEval {
    point: EvalPoint,
    op: Result<OperatingPoint, Error>,
    spectrum: Option<Result<Spectrum, Error>>,
    /// Lyapunov moments; `None` when not needed.
    moments: Option<Result<MomentMatrix, Error>>,
    /// Ellipse and whether it came from a formal (unstable) spectrum.
    ellipse: Option<Result<(ErrorEllipse, bool), Error>>,
    oracle: Option<Result<OracleResult, Error>>,
    stability: Vec<Result<StabilityReport, Error>>,
}

impl PointEval {
    fn label(&self, index: usize) -> String {
        match self.point.value {
            Some(v) if self.point.baseline => format!("point {index} (baseline r = 0, value {v})"),
            Some(v) => format!("point {index} (sweep value {v})"),
            None => format!("point {index}"),
        }
    }

    fn verdict(&self) -> Option<Stability> {
        self.op
            .as_ref()
            .ok()
            .map(|op| stability(&op.model, DEFAULT_STABILITY_TOL).verdict)
    }

    /// Errors that make the run fail. Refusals caused by instability are
    /// flagged in the rows instead.
    fn errors(&self) -> Vec<&Error> {
        let mut out = Vec::new();
        if let Err(e) = &self.op {
            out.push(e);
            return out;
        }
        let expected = |e: &Error| matches!(e, Error::NoStationaryState { .. });
        if let Some(Err(e)) = &self.spectrum {
            out.push(e);
        }
        if let Some(Err(e)) = &self.ellipse {
            out.push(e);
        }
        if let Some(Err(e)) = &self.moments {
            if !expected(e) {
                out.push(e);
            }
        }
        if let Some(Err(e)) = &self.oracle {
            out.push(e);
        }
        for e in self.stability.iter().filter_map(|r| r.as_ref().err()) {
            out.push(e);
        }
        out
    }
}

fn evaluate(
    scenario: &Scenario,
    point: &EvalPoint,
    branch: Option<usize>,
    products: &[Product],
) -> PointEval {
    let wants = |p: Product| products.contains(&p);
    let op = operating_point(&point.params, branch);
    let mut eval = PointEval {
        point: *point,
        op,
        spectrum: None,
        moments: None,
        ellipse: None,
        oracle: None,
        stability: Vec::new(),
    };
    let Ok(op) = &eval.op else { return eval };
    let model = &op.model;

    if wants(Product::Spectrum) || wants(Product::Occupation) {
        eval.spectrum = Some(integrate_occupation(model, &scenario.grid));
    }
    if wants(Product::Occupation) || wants(Product::Ellipse) || wants(Product::Oracle) {
        eval.moments = Some(lyapunov_moments(model));
    }
    if wants(Product::Ellipse) {
        eval.ellipse = Some(match &eval.moments {
            Some(Ok(m)) => Ok((error_ellipse(m), false)),
            _ => spectral_mechanical_moments(model, &scenario.grid).map(|m| (error_ellipse(&m), true)),
        });
    }
    if wants(Product::Oracle) {
        eval.oracle = Some(converged_expectations(
            &op.params,
            &op.branches[op.branch_index],
            &scenario.oracle,
        ));
    }
    if wants(Product::Stability) {
        eval.stability = op
            .branches
            .iter()
            .map(|b| linearize(&op.params, b).map(|m| stability(&m, DEFAULT_STABILITY_TOL)))
            .collect();
    }
    eval
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn error_flag(e: &Error) -> &'static str {
    match e {
        Error::DegenerateDenominator { .. } | Error::SingularFrequency { .. } => "singular-point",
        Error::NoStationaryState { verdict, .. } => verdict,
        _ => "error",
    }
}

fn flags(items: &[&str]) -> String {
    let mut v: Vec<&str> = items.iter().copied().filter(|s| !s.is_empty()).collect();
    v.dedup();
    v.join(";")
}

fn verdict_flag(v: Option<Stability>) -> &'static str {
    match v {
        Some(Stability::Unstable) => "unstable",
        Some(Stability::Marginal) => "marginal",
        _ => "",
    }
}

struct Csv {
    text: String,
    axis: bool,
}

impl Csv {
    fn new(axis: Option<&str>, columns: &[&str]) -> Self {
        let mut text = String::from("point");
        if let Some(a) = axis {
            text.push(',');
            text.push_str(a);
        }
        for c in columns {
            text.push(',');
            text.push_str(c);
        }
        text.push('\n');
        Csv {
            text,
            axis: axis.is_some(),
        }
    }

    fn row(&mut self, index: usize, eval: &PointEval, cells: &[String]) {
        let _ = write!(self.text, "{index}");
        if self.axis {
            let _ = write!(self.text, ",{}", num(eval.point.value.unwrap_or(f64::NAN)));
        }
        for c in cells {
            self.text.push(',');
            self.text.push_str(c);
        }
        self.text.push('\n');
    }
}

fn baseline(e: &PointEval) -> &'static str {
    if e.point.baseline {
        "baseline"
    } else {
        ""
    }
}

fn nan_cells(n: usize) -> Vec<String> {
    vec![num(f64::NAN); n]
}

fn steady_csv(axis: Option<&str>, evals: &[PointEval]) -> String {
    let mut csv = Csv::new(
        axis,
        &[
            "branch",
            "x_s(x_zpf)",
            "re_a_s(1)",
            "im_a_s(1)",
            "re_b_s(1)",
            "im_b_s(1)",
            "photons(1)",
            "delta_c_eff(omega_m)",
            "residual(1)",
            "stability",
            "selected",
            "flags",
        ],
    );
    for (i, e) in evals.iter().enumerate() {
        match &e.op {
            Ok(op) => {
                for (k, b) in op.branches.iter().enumerate() {
                    let verdict = b.stable.map_or("unknown", Stability::as_str);
                    csv.row(
                        i,
                        e,
                        &[
                            k.to_string(),
                            num(b.x_s),
                            num(b.a_s.re),
                            num(b.a_s.im),
                            num(b.b_s.re),
                            num(b.b_s.im),
                            num(b.photon_number()),
                            num(b.delta_eff),
                            num(b.residual),
                            verdict.to_string(),
                            (k == op.branch_index).to_string(),
                            flags(&[verdict_flag(b.stable), baseline(e)]),
                        ],
                    );
                }
            }
            Err(err) => {
                let mut cells = vec!["-".to_string()];
                cells.extend(nan_cells(8));
                cells.push("unknown".into());
                cells.push("false".into());
                cells.push(flags(&[error_flag(err), baseline(e)]));
                csv.row(i, e, &cells);
            }
        }
    }
    csv.text
}

fn spectrum_csv(axis: Option<&str>, evals: &[PointEval]) -> String {
    let mut csv = Csv::new(axis, &["omega(omega_m)", "S_n(1/omega_m)", "flags"]);
    for (i, e) in evals.iter().enumerate() {
        match (&e.op, &e.spectrum) {
            (Ok(_), Some(Ok(s))) => {
                let f = flags(&[
                    if s.formal { "formal" } else { "" },
                    verdict_flag(Some(s.verdict)),
                    baseline(e),
                ]);
                for (w, v) in s.omega.iter().zip(&s.s_n) {
                    csv.row(i, e, &[num(*w), num(*v), f.clone()]);
                }
            }
            (Err(err), _) | (Ok(_), Some(Err(err))) => {
                csv.row(i, e, &[num(f64::NAN), num(f64::NAN), flags(&[error_flag(err), baseline(e)])]);
            }
            (Ok(_), None) => {}
        }
    }
    csv.text
}

fn occupation_csv(axis: Option<&str>, evals: &[PointEval]) -> String {
    let mut csv = Csv::new(
        axis,
        &[
            "branch",
            "n_bar(quanta)",
            "n_bar_error(quanta)",
            "tail(quanta)",
            "T_eff(hbar*omega_m/k_B)",
            "n_bar_lyapunov(quanta)",
            "max_re_lambda(omega_m)",
            "omega_max(omega_m)",
            "panels",
            "flags",
        ],
    );
    for (i, e) in evals.iter().enumerate() {
        let op = match &e.op {
            Ok(op) => op,
            Err(err) => {
                let mut cells = vec!["-".to_string()];
                cells.extend(nan_cells(7));
                cells.push("0".into());
                cells.push(flags(&[error_flag(err), baseline(e)]));
                csv.row(i, e, &cells);
                continue;
            }
        };
        let lyap = match &e.moments {
            Some(Ok(m)) => m.phonons(),
            _ => f64::NAN,
        };
        let max_re = op.model.spectral_abscissa();
        match &e.spectrum {
            Some(Ok(s)) => csv.row(
                i,
                e,
                &[
                    op.branch_index.to_string(),
                    num(s.n_bar),
                    num(s.n_bar_error),
                    num(s.tail),
                    num(s.t_eff.unwrap_or(f64::NAN)),
                    num(lyap),
                    num(max_re),
                    num(s.omega_max),
                    s.panels.to_string(),
                    flags(&[
                        if s.formal { "formal" } else { "" },
                        verdict_flag(Some(s.verdict)),
                        baseline(e),
                    ]),
                ],
            ),
            Some(Err(err)) => {
                let mut cells = vec![op.branch_index.to_string()];
                cells.extend(nan_cells(4));
                cells.push(num(lyap));
                cells.push(num(max_re));
                cells.push(num(f64::NAN));
                cells.push("0".into());
                cells.push(flags(&[error_flag(err), verdict_flag(e.verdict()), baseline(e)]));
                csv.row(i, e, &cells);
            }
            None => {}
        }
    }
    csv.text
}

fn ellipse_csv(axis: Option<&str>, evals: &[PointEval]) -> String {
    let mut csv = Csv::new(
        axis,
        &[
            "branch",
            "var_X(x_zpf^2)",
            "var_P(x_zpf^2)",
            "cov_XP(x_zpf^2)",
            "major(x_zpf^2)",
            "minor(x_zpf^2)",
            "angle(rad)",
            "uncertainty_product(x_zpf^4)",
            "flags",
        ],
    );
    for (i, e) in evals.iter().enumerate() {
        let result = match (&e.op, &e.ellipse) {
            (Err(err), _) => Err(err),
            (Ok(op), Some(r)) => r.as_ref().map(|x| (op.branch_index, x)),
            (Ok(_), None) => continue,
        };
        match result {
            Ok((branch, (ell, formal))) => {
                let (major, minor, angle) = ell.principal_axes();
                csv.row(
                    i,
                    e,
                    &[
                        branch.to_string(),
                        num(ell.var_x),
                        num(ell.var_p),
                        num(ell.cov_xp),
                        num(major),
                        num(minor),
                        num(angle),
                        num(ell.uncertainty_product()),
                        flags(&[
                            if *formal { "formal" } else { "" },
                            verdict_flag(e.verdict()),
                            baseline(e),
                        ]),
                    ],
                );
            }
            Err(err) => {
                let mut cells = vec!["-".to_string()];
                cells.extend(nan_cells(7));
                cells.push(flags(&[error_flag(err), verdict_flag(e.verdict()), baseline(e)]));
                csv.row(i, e, &cells);
            }
        }
    }
    csv.text
}

fn stability_csv(axis: Option<&str>, evals: &[PointEval]) -> String {
    let mut columns = vec!["branch", "x_s(x_zpf)", "verdict", "max_re_lambda(omega_m)"];
    let eig: Vec<String> = (1..=4)
        .flat_map(|k| [format!("re_lambda{k}(omega_m)"), format!("im_lambda{k}(omega_m)")])
        .collect();
    columns.extend(eig.iter().map(String::as_str));
    columns.push("selected");
    columns.push("flags");
    let mut csv = Csv::new(axis, &columns);
    for (i, e) in evals.iter().enumerate() {
        let op = match &e.op {
            Ok(op) => op,
            Err(err) => {
                let mut cells = vec!["-".to_string(), num(f64::NAN), "unknown".into()];
                cells.extend(nan_cells(9));
                cells.push("false".into());
                cells.push(flags(&[error_flag(err), baseline(e)]));
                csv.row(i, e, &cells);
                continue;
            }
        };
        for (k, (b, report)) in op.branches.iter().zip(&e.stability).enumerate() {
            let mut cells = vec![k.to_string(), num(b.x_s)];
            match report {
                Ok(r) => {
                    cells.push(r.verdict.as_str().to_string());
                    cells.push(num(r.max_re()));
                    for l in &r.eigenvalues {
                        cells.push(num(l.re));
                        cells.push(num(l.im));
                    }
                    cells.push((k == op.branch_index).to_string());
                    cells.push(flags(&[verdict_flag(Some(r.verdict)), baseline(e)]));
                }
                Err(err) => {
                    cells.push("unknown".into());
                    cells.extend(nan_cells(9));
                    cells.push((k == op.branch_index).to_string());
                    cells.push(flags(&[error_flag(err), baseline(e)]));
                }
            }
            csv.row(i, e, &cells);
        }
    }
    csv.text
}

fn oracle_csv(axis: Option<&str>, evals: &[PointEval], tail_tol: f64) -> String {
    let mut csv = Csv::new(
        axis,
        &[
            "branch",
            "n_mech_oracle(quanta)",
            "n_bar_lyapunov(quanta)",
            "rel_diff(1)",
            "n_cav_oracle(quanta)",
            "tail_mass(1)",
            "tail_tol(1)",
            "dim_cav",
            "dim_mech",
            "converged",
            "min_eigenvalue(1)",
            "flags",
        ],
    );
    for (i, e) in evals.iter().enumerate() {
        let result = match (&e.op, &e.oracle) {
            (Err(err), _) => Err(err),
            (Ok(op), Some(r)) => r.as_ref().map(|o| (op.branch_index, o)),
            (Ok(_), None) => continue,
        };
        let lyap = match &e.moments {
            Some(Ok(m)) => m.phonons(),
            _ => f64::NAN,
        };
        match result {
            Ok((branch, o)) => csv.row(
                i,
                e,
                &[
                    branch.to_string(),
                    num(o.n_mech),
                    num(lyap),
                    num((o.n_mech - lyap).abs() / lyap.abs()),
                    num(o.n_cav),
                    num(o.tail_mass),
                    num(tail_tol),
                    o.dim_cav.to_string(),
                    o.dim_mech.to_string(),
                    o.converged.to_string(),
                    num(o.min_eigenvalue),
                    flags(&[if o.converged { "" } else { "not-converged" }, baseline(e)]),
                ],
            ),
            Err(err) => {
                let mut cells = vec!["-".to_string()];
                cells.extend(nan_cells(6));
                cells.extend(["0".into(), "0".into(), "false".into(), num(f64::NAN)]);
                cells.push(flags(&[error_flag(err), verdict_flag(e.verdict()), baseline(e)]));
                csv.row(i, e, &cells);
            }
        }
    }
    csv.text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> RunOptions {
        RunOptions {
            jobs: Some(2),
            ..Default::default()
        }
    }

    #[test]
    fn decoupled_steady_is_single_row_at_origin() {
        let v = validate("g = 0\noutputs = steady\n").unwrap();
        let out = render(&v.scenario, &opts());
        assert_eq!(out.exit_code, EXIT_OK);
        let text = &out.files[&Product::Steady];
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("point,branch,x_s(x_zpf)"));
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells[2], num(0.0));
    }

    #[test]
    fn singular_point_is_flagged_with_exit_3() {
        let r_c = (0.4f64).hypot(0.5e-3);
        let text = format!("sweep.axis = r\nsweep.values = 0.1, {r_c:?}\noutputs = steady\n");
        let v = validate(&text).unwrap();
        assert_eq!(v.warnings.len(), 1);
        let out = render(&v.scenario, &opts());
        assert_eq!(out.exit_code, EXIT_NUMERICAL);
        let csv = &out.files[&Product::Steady];
        assert!(csv.lines().nth(2).unwrap().ends_with("singular-point"));
        assert!(out.messages[0].starts_with("point 1 (sweep value"));
    }

    #[test]
    fn bad_branch_index_is_a_validation_error() {
        let v = validate("outputs = steady\n").unwrap();
        let out = render(&v.scenario, &RunOptions { branch: Some(5), ..opts() });
        assert_eq!(out.exit_code, EXIT_VALIDATION);
        assert!(out.messages[0].contains("branch index 5"));
    }

    #[test]
    fn invalid_text_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_text("kappa = -1\n", &RunOptions { out_dir: dir.path().into(), ..opts() });
        assert_eq!(report.exit_code, EXIT_VALIDATION);
        assert!(report.messages[0].contains("kappa"));
        assert!(report.files.is_empty());
    }

    #[test]
    fn formal_rows_are_flagged() {
        let v = validate("r = 0.8\ngrid.points = 11\ngrid.peak_points = 0\noutputs = spectrum, occupation, ellipse\n").unwrap();
        let out = render(&v.scenario, &opts());
        assert_eq!(out.exit_code, EXIT_OK, "{:?}", out.messages);
        for p in [Product::Spectrum, Product::Occupation, Product::Ellipse] {
            let row = out.files[&p].lines().nth(1).unwrap().to_string();
            assert!(row.ends_with("formal;unstable"), "{p}: {row}");
        }
    }

    #[test]
    fn output_does_not_depend_on_jobs() {
        let v = validate(
            "g = 0.01\nsweep.axis = r\nsweep.values = 0.1, 0.2, 0.3\ngrid.points = 21\noutputs = steady, occupation, stability\n",
        )
        .unwrap();
        let a = render(&v.scenario, &RunOptions { jobs: Some(1), ..Default::default() });
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| render(&v.scenario, &RunOptions::default()));
        assert_eq!(a, b);
    }
}
