//! Globally adaptive bisection quadrature.
//!
//! Every panel carries its 15-point Gauss–Kronrod value and the values of its
//! two halves; the disagreement between the two drives refinement. The panel
//! with the largest disagreement is split until the summed disagreement drops
//! below the requested relative tolerance or the panel budget is spent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod nodes (positive half, descending) and weights for the 7/15 pair.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    /// Absolute floor on the error target, for integrals that vanish.
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-300,
            max_panels: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

fn kronrod<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<f64> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = WGK[7] * f(center)?;
    for k in 0..7 {
        let dx = half * XGK[k];
        sum += WGK[k] * (f(center - dx)? + f(center + dx)?);
    }
    Ok(sum * half)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn new<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64, whole: f64) -> Result<Self> {
        let mid = 0.5 * (a + b);
        let left = kronrod(f, a, mid)?;
        let right = kronrod(f, mid, b)?;
        Ok(Panel {
            a,
            b,
            left,
            right,
            error: (whole - left - right).abs(),
        })
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by position so the refinement order is fully deterministic
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates `f` over the union of consecutive intervals given by the
/// ascending `breakpoints`.
pub fn integrate<F>(mut f: F, breakpoints: &[f64], opts: &QuadratureOptions) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breakpoints.len() < 2 {
        return Err(Error::InvalidGrid("quadrature needs at least two breakpoints".into()));
    }
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("quadrature breakpoints must be finite and ascending".into()));
    }

    let mut heap = BinaryHeap::with_capacity(2 * breakpoints.len());
    for w in breakpoints.windows(2) {
        let whole = kronrod(&mut f, w[0], w[1])?;
        heap.push(Panel::new(&mut f, w[0], w[1], whole)?);
    }

    let (mut value, mut error) = totals(&heap);
    loop {
        let target = (opts.rel_tol * value.abs()).max(opts.abs_tol);
        if error <= target {
            // running sums drift; confirm with an ordered recomputation
            let (v, e) = totals(&heap);
            value = v;
            error = e;
            if error <= (opts.rel_tol * value.abs()).max(opts.abs_tol) {
                return Ok(Integral {
                    value,
                    error,
                    panels: heap.len(),
                });
            }
        }
        if heap.len() >= opts.max_panels {
            let (value, error) = totals(&heap);
            return Err(Error::Accuracy {
                estimate: value,
                error_bound: error,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // cannot bisect further in floating point
            heap.push(worst);
            let (value, error) = totals(&heap);
            return Err(Error::Accuracy {
                estimate: value,
                error_bound: error,
                panels: heap.len(),
            });
        }
        let left = Panel::new(&mut f, worst.a, mid, worst.left)?;
        let right = Panel::new(&mut f, mid, worst.b, worst.right)?;
        value += left.value() + right.value() - worst.value();
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value(), e + p.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| Ok(x.powi(6) - 3.0 * x), &[0.0, 2.0], &QuadratureOptions::default())
            .unwrap();
        assert!((r.value - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn narrow_lorentzian() {
        let w = 5e-4;
        let f = |x: f64| Ok(w / ((x - 0.4).powi(2) + w * w));
        let r = integrate(f, &[-20.0, 0.4, 20.0], &QuadratureOptions::default()).unwrap();
        let exact = (19.6 / w).atan() + (20.4 / w).atan();
        assert!((r.value - exact).abs() < 1e-6 * exact, "{} vs {}", r.value, exact);
        assert!((exact - PI).abs() < 1e-3);
    }

    #[test]
    fn zero_integrand_converges() {
        let r = integrate(|_| Ok(0.0), &[-1.0, 1.0], &QuadratureOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let opts = QuadratureOptions { max_panels: 3, rel_tol: 1e-14, ..Default::default() };
        let err = integrate(|x: f64| Ok(x.sqrt().recip()), &[0.0, 1.0], &opts).unwrap_err();
        assert!(matches!(err, Error::Accuracy { panels: 3, .. }));
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let o = QuadratureOptions::default();
        assert!(integrate(|_| Ok(1.0), &[1.0], &o).is_err());
        assert!(integrate(|_| Ok(1.0), &[1.0, 0.0], &o).is_err());
    }
}
