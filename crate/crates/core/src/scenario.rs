//! Scenario files: flat `key = value` text with `#` comments.
//!
//! ```text
//! # bad-cavity working point, r sweep
//! delta_c = 2
//! kappa = 2
//! theta = pi/4
//! sweep.axis = r
//! sweep.values = linspace(0, 1.6, 17)
//! outputs = spectrum, occupation
//! ```
//!
//! Parameter keys missing from a file take the values of
//! [`SystemParams::default`]. Numbers accept plain literals and products or
//! quotients with `pi` (`pi/4`, `3*pi/8`, `-0.5*pi`).

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::Error;
use crate::oracle::FockConfig;
use crate::params::{SweepAxis, SystemParams};
use crate::spectrum::GridSpec;
use crate::steady::CRITICAL_TOL;

/// Output products, in the order they are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Product {
    Steady,
    Spectrum,
    Occupation,
    Ellipse,
    Stability,
    Oracle,
}

impl Product {
    pub const ALL: [Product; 6] = [
        Product::Steady,
        Product::Spectrum,
        Product::Occupation,
        Product::Ellipse,
        Product::Stability,
        Product::Oracle,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Product::Steady => "steady",
            Product::Spectrum => "spectrum",
            Product::Occupation => "occupation",
            Product::Ellipse => "ellipse",
            Product::Stability => "stability",
            Product::Oracle => "oracle",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.key())
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Product {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Product::ALL.into_iter().find(|p| p.key() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    /// Strictly ascending.
    pub values: Vec<f64>,
    /// Prepend an r = 0 reference point with otherwise identical parameters.
    pub include_unsqueezed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// As written; normalization happens per evaluation point.
    pub params: SystemParams,
    pub sweep: Option<Sweep>,
    pub grid: GridSpec,
    /// `None` selects the default branch at every point.
    pub branch: Option<usize>,
    pub outputs: BTreeSet<Product>,
    pub oracle: FockConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: SystemParams::default(),
            sweep: None,
            grid: GridSpec::default(),
            branch: None,
            outputs: [Product::Steady].into_iter().collect(),
            oracle: FockConfig::default(),
        }
    }
}

/// One parameter point to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    /// Value of the sweep axis, `None` without a sweep.
    pub value: Option<f64>,
    pub params: SystemParams,
    pub baseline: bool,
}

impl Scenario {
    /// Evaluation points in output order: the unsqueezed baseline (if
    /// requested) first, then the sweep values.
    pub fn points(&self) -> Vec<EvalPoint> {
        match &self.sweep {
            None => vec![EvalPoint {
                value: None,
                params: self.params,
                baseline: false,
            }],
            Some(sweep) => {
                let mut out = Vec::with_capacity(sweep.values.len() + 1);
                if sweep.include_unsqueezed {
                    let params = SystemParams { r: 0.0, ..self.params };
                    out.push(EvalPoint {
                        value: Some(match sweep.axis {
                            SweepAxis::R => 0.0,
                            axis => axis_value(&params, axis),
                        }),
                        params,
                        baseline: true,
                    });
                }
                out.extend(sweep.values.iter().map(|&v| EvalPoint {
                    value: Some(v),
                    params: self.params.with_axis(sweep.axis, v),
                    baseline: false,
                }));
                out
            }
        }
    }

    /// Canonical text form; `validate(&s.render())` reproduces `s`.
    pub fn render(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        for (key, value) in param_fields(p) {
            line(key, format!("{value:?}"));
        }
        line(
            "branch",
            self.branch.map_or_else(|| "auto".to_string(), |b| b.to_string()),
        );
        line(
            "outputs",
            self.outputs.iter().map(|p| p.key()).collect::<Vec<_>>().join(", "),
        );
        let g = &self.grid;
        line(
            "grid.omega_max",
            g.omega_max.map_or_else(|| "auto".to_string(), |w| format!("{w:?}")),
        );
        line("grid.plot_half_width", format!("{:?}", g.plot_half_width));
        line("grid.points", g.backbone_points.to_string());
        line("grid.peak_points", g.peak_points.to_string());
        line("grid.rel_tol", format!("{:?}", g.rel_tol));
        line("grid.max_panels", g.max_panels.to_string());
        line("oracle.dim_cav", self.oracle.dim_cav.to_string());
        line("oracle.dim_mech", self.oracle.dim_mech.to_string());
        line("oracle.tail_tol", format!("{:?}", self.oracle.tail_tol));
        if let Some(s) = &self.sweep {
            line("sweep.axis", s.axis.key().to_string());
            line(
                "sweep.values",
                s.values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", "),
            );
            line("sweep.include_unsqueezed", s.include_unsqueezed.to_string());
        }
        out
    }
}

fn axis_value(p: &SystemParams, axis: SweepAxis) -> f64 {
    match axis {
        SweepAxis::R => p.r,
        SweepAxis::DeltaC => p.delta_c,
        SweepAxis::Theta => p.theta,
        SweepAxis::G => p.g,
    }
}

fn param_fields(p: &SystemParams) -> [(&'static str, f64); 11] {
    [
        ("omega_m", p.omega_m),
        ("delta", p.delta),
        ("delta_c", p.delta_c),
        ("kappa", p.kappa),
        ("gamma_m", p.gamma_m),
        ("g", p.g),
        ("eta", p.eta),
        ("r", p.r),
        ("theta", p.theta),
        ("n_th_m", p.n_th_m),
        ("n_th_cav", p.n_th_cav),
    ]
}

fn param_slot<'a>(p: &'a mut SystemParams, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "omega_m" => &mut p.omega_m,
        "delta" => &mut p.delta,
        "delta_c" => &mut p.delta_c,
        "kappa" => &mut p.kappa,
        "gamma_m" => &mut p.gamma_m,
        "g" => &mut p.g,
        "eta" => &mut p.eta,
        "r" => &mut p.r,
        "theta" => &mut p.theta,
        "n_th_m" => &mut p.n_th_m,
        "n_th_cav" => &mut p.n_th_cav,
        _ => return None,
    })
}

/// A rejected field. `line` is 1-based; `None` for cross-field checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub line: Option<usize>,
    pub key: String,
    pub value: String,
    pub constraint: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "`{}` = `{}`: {}", self.key, self.value, self.constraint)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

/// Parses a number: a float literal, `pi`, or a `*`/`/` chain of those with
/// an optional leading sign.
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) if rest.trim_start().starts_with(|c: char| c.is_ascii_alphabetic()) => (-1.0, rest),
        _ => (1.0, text),
    };
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = body;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let token = rest[..end].trim();
        let factor = match token {
            "pi" => std::f64::consts::PI,
            "" => return None,
            t => {
                // reject the textual infinities and NaN f64::from_str accepts
                if t.bytes().any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E') {
                    return None;
                }
                t.parse::<f64>().ok()?
            }
        };
        value = if op == '*' { value * factor } else { value / factor };
        if end == rest.len() {
            break;
        }
        op = rest.as_bytes()[end] as char;
        rest = &rest[end + 1..];
    }
    Some(sign * value)
}

/// Parses `linspace(a, b, n)` or a comma-separated list of numbers.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if let Some(inner) = text.strip_prefix("linspace(").and_then(|t| t.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err("linspace takes (start, stop, count)".into());
        }
        let a = parse_number(parts[0]).ok_or("linspace start is not a number")?;
        let b = parse_number(parts[1]).ok_or("linspace stop is not a number")?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| "linspace count must be a positive integer")?;
        return match n {
            0 => Err("linspace count must be >= 1".into()),
            1 => Ok(vec![a]),
            _ => Ok((0..n)
                .map(|i| {
                    if i == n - 1 {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()),
        };
    }
    if text.is_empty() {
        return Err("value list is empty".into());
    }
    text.split(',')
        .map(|t| parse_number(t).ok_or_else(|| format!("`{}` is not a number", t.trim())))
        .collect()
}

struct Collector {
    errors: Vec<FieldError>,
}

impl Collector {
    fn push(&mut self, line: Option<usize>, key: &str, value: impl ToString, constraint: impl ToString) {
        self.errors.push(FieldError {
            line,
            key: key.to_string(),
            value: value.to_string(),
            constraint: constraint.to_string(),
        });
    }
}

/// Parses and checks a scenario. All problems are reported together.
pub fn validate(text: &str) -> Result<Validated, Vec<FieldError>> {
    let mut c = Collector { errors: Vec::new() };
    let mut scenario = Scenario::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut axis: Option<SweepAxis> = None;
    let mut values: Option<Vec<f64>> = None;
    let mut include_unsqueezed = false;
    let mut sweep_line = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = Some(idx + 1);
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            c.push(lineno, content, "", "expected `key = value`");
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            c.push(lineno, key, value, "duplicate key");
            continue;
        }

        let number = |c: &mut Collector| match parse_number(value) {
            Some(v) if v.is_finite() => Some(v),
            Some(_) => {
                c.push(lineno, key, value, "must be finite");
                None
            }
            None => {
                c.push(lineno, key, value, "expected a number (literal, pi, or a*pi/b)");
                None
            }
        };
        let count = |c: &mut Collector, min: usize| match value.parse::<usize>() {
            Ok(n) if n >= min => Some(n),
            _ => {
                c.push(lineno, key, value, format!("expected an integer >= {min}"));
                None
            }
        };

        if let Some(slot) = param_slot(&mut scenario.params, key) {
            if let Some(v) = number(&mut c) {
                *slot = v;
            }
            continue;
        }
        match key {
            "branch" => {
                if value == "auto" {
                    scenario.branch = None;
                } else if let Some(n) = count(&mut c, 0) {
                    scenario.branch = Some(n);
                }
            }
            "outputs" => {
                let mut set = BTreeSet::new();
                for item in value.split(',').map(str::trim) {
                    match item.parse::<Product>() {
                        Ok(p) => {
                            set.insert(p);
                        }
                        Err(()) => c.push(
                            lineno,
                            key,
                            item,
                            "unknown product (steady, spectrum, occupation, ellipse, stability, oracle)",
                        ),
                    }
                }
                scenario.outputs = set;
            }
            "grid.omega_max" => {
                if value == "auto" {
                    scenario.grid.omega_max = None;
                } else if let Some(v) = number(&mut c) {
                    if v > 0.0 {
                        scenario.grid.omega_max = Some(v);
                    } else {
                        c.push(lineno, key, value, "must be > 0 or `auto`");
                    }
                }
            }
            "grid.plot_half_width" => {
                if let Some(v) = number(&mut c) {
                    if v > 0.0 {
                        scenario.grid.plot_half_width = v;
                    } else {
                        c.push(lineno, key, value, "must be > 0");
                    }
                }
            }
            "grid.points" => {
                if let Some(n) = count(&mut c, 2) {
                    scenario.grid.backbone_points = n;
                }
            }
            "grid.peak_points" => {
                if let Some(n) = count(&mut c, 0) {
                    scenario.grid.peak_points = n;
                }
            }
            "grid.rel_tol" => {
                if let Some(v) = number(&mut c) {
                    if v > 0.0 && v < 1.0 {
                        scenario.grid.rel_tol = v;
                    } else {
                        c.push(lineno, key, value, "must lie in (0, 1)");
                    }
                }
            }
            "grid.max_panels" => {
                if let Some(n) = count(&mut c, 1) {
                    scenario.grid.max_panels = n;
                }
            }
            "oracle.dim_cav" => {
                if let Some(n) = count(&mut c, 2) {
                    scenario.oracle.dim_cav = n;
                }
            }
            "oracle.dim_mech" => {
                if let Some(n) = count(&mut c, 2) {
                    scenario.oracle.dim_mech = n;
                }
            }
            "oracle.tail_tol" => {
                if let Some(v) = number(&mut c) {
                    if v > 0.0 && v < 1.0 {
                        scenario.oracle.tail_tol = v;
                    } else {
                        c.push(lineno, key, value, "must lie in (0, 1)");
                    }
                }
            }
            "sweep.axis" => match value.parse::<SweepAxis>() {
                Ok(a) => {
                    axis = Some(a);
                    sweep_line = lineno;
                }
                Err(()) => c.push(lineno, key, value, "must be one of r, delta_c, theta, g"),
            },
            "sweep.values" => match parse_values(value) {
                Ok(v) => {
                    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                        c.push(lineno, key, bad, "sweep values must be finite");
                    } else if let Some(w) = v.windows(2).find(|w| !(w[0] < w[1])) {
                        c.push(
                            lineno,
                            key,
                            format!("{}, {}", w[0], w[1]),
                            "sweep values must be strictly ascending",
                        );
                    } else {
                        values = Some(v);
                    }
                }
                Err(e) => c.push(lineno, key, value, e),
            },
            "sweep.include_unsqueezed" => match value {
                "true" => include_unsqueezed = true,
                "false" => include_unsqueezed = false,
                _ => c.push(lineno, key, value, "must be `true` or `false`"),
            },
            _ => c.push(lineno, key, value, "unknown key"),
        }
    }

    match (axis, values) {
        (Some(axis), Some(values)) => {
            scenario.sweep = Some(Sweep {
                axis,
                values,
                include_unsqueezed,
            })
        }
        (None, None) => {
            if include_unsqueezed {
                c.push(None, "sweep.include_unsqueezed", "true", "requires sweep.axis and sweep.values");
            }
        }
        (Some(_), None) => {
            if !seen.contains("sweep.values") {
                c.push(sweep_line, "sweep.values", "", "required when sweep.axis is set");
            }
        }
        (None, Some(_)) => {
            if !seen.contains("sweep.axis") {
                c.push(None, "sweep.axis", "", "required when sweep.values is set");
            }
        }
    }
    if scenario.outputs.is_empty() && seen.contains("outputs") && c.errors.is_empty() {
        c.push(None, "outputs", "", "at least one product is required");
    }

    check_params(&scenario, &mut c);
    if let Err(Error::FockDimension { reason, .. }) = scenario.oracle.validate() {
        c.push(
            None,
            "oracle.dim_cav, oracle.dim_mech",
            format!("{}, {}", scenario.oracle.dim_cav, scenario.oracle.dim_mech),
            reason,
        );
    }
    if !c.errors.is_empty() {
        return Err(c.errors);
    }

    let warnings = degenerate_warnings(&scenario);
    Ok(Validated { scenario, warnings })
}

fn check_params(s: &Scenario, c: &mut Collector) {
    for point in s.points() {
        if let Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        }) = point.params.normalized()
        {
            let swept = s
                .sweep
                .as_ref()
                .is_some_and(|sw| sw.axis.key() == name && point.value.is_some() && !point.baseline);
            let key = if swept { "sweep.values" } else { name };
            let msg = constraint.to_string();
            if !c.errors.iter().any(|e| e.key == key && e.value == value.to_string()) {
                c.push(None, key, value, msg);
            }
        }
    }
}

fn degenerate_warnings(s: &Scenario) -> Vec<String> {
    let mut warnings = Vec::new();
    for point in s.points() {
        let Ok(p) = point.params.normalized() else { continue };
        let r_c = p.critical_squeeze();
        if (p.r - r_c).abs() <= CRITICAL_TOL {
            let at = point
                .value
                .map(|v| format!(" at sweep value {v}"))
                .unwrap_or_default();
            warnings.push(format!(
                "`r` = {} equals r_c = {r_c}{at}: the steady-state denominator is degenerate there",
                p.r
            ));
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_number("pi/4"), Some(PI / 4.0));
        assert_eq!(parse_number("3*pi/8"), Some(3.0 * PI / 8.0));
        assert_eq!(parse_number("-pi"), Some(-PI));
        assert_eq!(parse_number("-0.5*pi"), Some(-0.5 * PI));
        assert_eq!(parse_number("1e-3"), Some(1e-3));
        assert_eq!(parse_number("inf"), None);
        assert_eq!(parse_number("NaN"), None);
        assert_eq!(parse_number("pi pi"), None);
        assert_eq!(parse_number("2*"), None);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v = parse_values("linspace(0, 1.6, 17)").unwrap();
        assert_eq!(v.len(), 17);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[16], 1.6);
        assert!(parse_values("linspace(0, 1)").is_err());
        assert_eq!(parse_values("0.5, 0.8,1.2").unwrap(), vec![0.5, 0.8, 1.2]);
    }

    #[test]
    fn negative_kappa_names_field_and_constraint() {
        let errs = validate("kappa = -1\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].key, "kappa");
        assert_eq!(errs[0].value, "-1");
        assert!(errs[0].constraint.contains("> 0"));
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "kappa = x\nfoo = 1\nr = 1\nr = 2\nsweep.axis = z\noutputs = steady, plot\n";
        let errs = validate(text).unwrap_err();
        let keys: Vec<_> = errs.iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["kappa", "foo", "r", "sweep.axis", "outputs"]);
        assert_eq!(errs[2].constraint, "duplicate key");
        assert_eq!(errs[1].line, Some(2));
    }

    #[test]
    fn sweep_values_are_checked_per_point() {
        let errs = validate("sweep.axis = r\nsweep.values = -0.1, 0.2\n").unwrap_err();
        assert_eq!(errs[0].key, "sweep.values");
        assert!(validate("sweep.axis = r\nsweep.values = 0.3, 0.2\n").is_err());
        assert!(validate("sweep.axis = r\n").is_err());
        assert!(validate("sweep.values = 1\n").is_err());
    }

    #[test]
    fn critical_squeeze_warns() {
        let r_c = (0.4f64).hypot(0.5e-3);
        let v = validate(&format!("r = {r_c:?}\noutputs = steady\n")).unwrap();
        assert_eq!(v.warnings.len(), 1);
        assert!(v.warnings[0].contains("degenerate"));
        assert!(validate("r = 0.3\n").unwrap().warnings.is_empty());
    }

    #[test]
    fn comments_and_blank_lines() {
        let v = validate("# header\n\n  g = 0.01   # inline\n").unwrap();
        assert_eq!(v.scenario.params.g, 0.01);
        assert_eq!(v.scenario.params.kappa, SystemParams::default().kappa);
    }

    #[test]
    fn baseline_point_comes_first() {
        let v = validate(
            "r = 1.2\nsweep.axis = theta\nsweep.values = 0, pi/8\nsweep.include_unsqueezed = true\n",
        )
        .unwrap();
        let pts = v.scenario.points();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].baseline);
        assert_eq!(pts[0].params.r, 0.0);
        assert_eq!(pts[2].params.theta, PI / 8.0);
        assert_eq!(pts[2].params.r, 1.2);
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        let params = (
            0.1f64..10.0,
            -3.0f64..3.0,
            -5.0f64..5.0,
            1e-4f64..5.0,
            1e-6f64..1.0,
            0.0f64..0.2,
            0.0f64..50.0,
            0.0f64..2.0,
            -7.0f64..7.0,
            0.0f64..100.0,
            0.0f64..5.0,
        )
            .prop_map(|(omega_m, delta, delta_c, kappa, gamma_m, g, eta, r, theta, n_th_m, n_th_cav)| {
                SystemParams { omega_m, delta, delta_c, kappa, gamma_m, g, eta, r, theta, n_th_m, n_th_cav }
            });
        let sweep = proptest::option::of(
            (0usize..4, proptest::collection::btree_set(0u32..10_000, 1..6), any::<bool>()).prop_map(
                |(a, vals, base)| Sweep {
                    axis: SweepAxis::ALL[a],
                    values: vals.into_iter().map(|v| v as f64 * 1e-4).collect(),
                    include_unsqueezed: base,
                },
            ),
        );
        let grid = (
            proptest::option::of(50.0f64..500.0),
            0.1f64..5.0,
            2usize..5000,
            0usize..100,
            1e-9f64..1e-2,
            1usize..1_000_000,
        )
            .prop_map(|(omega_max, plot_half_width, backbone_points, peak_points, rel_tol, max_panels)| GridSpec {
                omega_max,
                plot_half_width,
                backbone_points,
                peak_points,
                rel_tol,
                max_panels,
            });
        let outputs = proptest::collection::btree_set(0usize..6, 1..6)
            .prop_map(|s| s.into_iter().map(|i| Product::ALL[i]).collect::<BTreeSet<_>>());
        let oracle = (2usize..6, 2usize..14, 1e-9f64..0.5)
            .prop_map(|(dim_cav, dim_mech, tail_tol)| FockConfig { dim_cav, dim_mech, tail_tol });
        (params, sweep, grid, proptest::option::of(0usize..3), outputs, oracle).prop_map(
            |(params, sweep, grid, branch, outputs, oracle)| Scenario {
                params,
                sweep,
                grid,
                branch,
                outputs,
                oracle,
            },
        )
    }

    proptest! {
        #[test]
        fn render_round_trips(s in arb_scenario()) {
            let back = validate(&s.render()).map_err(|e| TestCaseError::fail(format!("{e:?}")))?;
            prop_assert_eq!(back.scenario, s);
        }
    }
}
