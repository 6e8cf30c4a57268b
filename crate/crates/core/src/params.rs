//! Physical parameters and closed-form conversions.
//!
//! Units: ħ = k_B = 1 and every rate is expressed in units of the bare
//! mechanical frequency ω_m. Temperatures are in units of ħω_m/k_B.
//!
//! The pump amplitude η is taken real and non-negative. A pump phase only
//! rotates the cavity field and drops out of |a_s|², x_s and all spectra.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One scenario's physical parameters, normalized to ω_m = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_m: f64,
    /// Effective mechanical frequency in the frame rotating at ω_m − δ.
    pub delta: f64,
    /// Laser–cavity detuning ω_cav − ω_L.
    pub delta_c: f64,
    pub kappa: f64,
    pub gamma_m: f64,
    pub g: f64,
    pub eta: f64,
    pub r: f64,
    /// Squeezing angle in radians, kept in [0, π).
    pub theta: f64,
    pub n_th_m: f64,
    pub n_th_cav: f64,
}

impl Default for SystemParams {
    /// Bad-cavity working point (κ = 2, δ_c = 2) with a precooled,
    /// high-Q resonator and no squeezing.
    fn default() -> Self {
        SystemParams {
            omega_m: 1.0,
            delta: 0.4,
            delta_c: 2.0,
            kappa: 2.0,
            gamma_m: 1e-3,
            g: 1e-3,
            eta: 10.0,
            r: 0.0,
            theta: PI / 4.0,
            n_th_m: 10.0,
            n_th_cav: 1.0,
        }
    }
}

impl SystemParams {
    /// Checks every invariant, rescales rates so that ω_m = 1 and reduces θ
    /// into [0, π).
    pub fn normalized(mut self) -> Result<Self> {
        let fields = [
            ("omega_m", self.omega_m),
            ("delta", self.delta),
            ("delta_c", self.delta_c),
            ("kappa", self.kappa),
            ("gamma_m", self.gamma_m),
            ("g", self.g),
            ("eta", self.eta),
            ("r", self.r),
            ("theta", self.theta),
            ("n_th_m", self.n_th_m),
            ("n_th_cav", self.n_th_cav),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::invalid(name, value, "must be finite"));
            }
        }
        if self.omega_m <= 0.0 {
            return Err(Error::invalid("omega_m", self.omega_m, "must be > 0"));
        }
        let positive = [("kappa", self.kappa), ("gamma_m", self.gamma_m)];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Error::invalid(name, value, "must be > 0"));
            }
        }
        let non_negative = [
            ("g", self.g),
            ("eta", self.eta),
            ("r", self.r),
            ("n_th_m", self.n_th_m),
            ("n_th_cav", self.n_th_cav),
        ];
        for (name, value) in non_negative {
            if value < 0.0 {
                return Err(Error::invalid(name, value, "must be >= 0"));
            }
        }

        if self.omega_m != 1.0 {
            let w = self.omega_m;
            self.delta /= w;
            self.delta_c /= w;
            self.kappa /= w;
            self.gamma_m /= w;
            self.g /= w;
            self.eta /= w;
            self.r /= w;
            self.omega_m = 1.0;
        }
        self.theta = reduce_angle(self.theta);
        Ok(self)
    }

    /// Complex squeeze parameter ξ = r·e^{−2iθ}.
    pub fn xi(&self) -> Complex64 {
        Complex64::from_polar(self.r, -2.0 * self.theta)
    }

    /// `(Γ_m/2)² + δ² − r²`, the mechanical factor of the displacement
    /// denominator. It vanishes at the critical squeeze factor.
    pub fn squeeze_denominator(&self) -> f64 {
        let half_gamma = 0.5 * self.gamma_m;
        half_gamma * half_gamma + self.delta * self.delta - self.r * self.r
    }

    pub fn critical_squeeze(&self) -> f64 {
        critical_squeeze(self.delta, self.gamma_m)
    }

    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> SystemParams {
        let mut p = *self;
        match axis {
            SweepAxis::R => p.r = value,
            SweepAxis::DeltaC => p.delta_c = value,
            SweepAxis::Theta => p.theta = value,
            SweepAxis::G => p.g = value,
        }
        p
    }
}

/// Reduces an angle into [0, π); ξ depends on θ only through 2θ.
pub fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π for tiny negative inputs
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Parameter axis that a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepAxis {
    R,
    DeltaC,
    Theta,
    G,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [SweepAxis::R, SweepAxis::DeltaC, SweepAxis::Theta, SweepAxis::G];

    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::R => "r",
            SweepAxis::DeltaC => "delta_c",
            SweepAxis::Theta => "theta",
            SweepAxis::G => "g",
        }
    }

    /// CSV column header including units.
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::R => "r(omega_m)",
            SweepAxis::DeltaC => "delta_c(omega_m)",
            SweepAxis::Theta => "theta(rad)",
            SweepAxis::G => "g(omega_m)",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepAxis {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or(())
    }
}

/// Parametric modulation of the spring constant, k(t) = k0 − kr·sin(ω_d t + 2θ).
///
/// The effective mass only enters through k0 = m_eff·ω_m², and the drive
/// frequency ω_d = 2(ω_m − δ) is implied by δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricDrive {
    pub k0: f64,
    pub kr: f64,
    pub omega_m: f64,
}

/// r = ω_m·k_r / (4 k_0).
pub fn squeeze_factor_from_drive(drive: ParametricDrive) -> Result<f64> {
    if !(drive.k0 > 0.0) {
        return Err(Error::invalid("k0", drive.k0, "must be > 0"));
    }
    if !(drive.kr >= 0.0) || !drive.kr.is_finite() {
        return Err(Error::invalid("kr", drive.kr, "must be finite and >= 0"));
    }
    if !(drive.omega_m > 0.0) || !drive.omega_m.is_finite() {
        return Err(Error::invalid("omega_m", drive.omega_m, "must be finite and > 0"));
    }
    Ok(drive.omega_m * drive.kr / (4.0 * drive.k0))
}

/// r_c = √(δ² + Γ_m²/4).
pub fn critical_squeeze(delta: f64, gamma_m: f64) -> f64 {
    delta.hypot(0.5 * gamma_m)
}

/// Bose–Einstein occupation of a mode at `freq` and `temperature`.
pub fn thermal_occupation(freq: f64, temperature: f64) -> Result<f64> {
    if !(freq > 0.0) || !freq.is_finite() {
        return Err(Error::invalid("freq", freq, "must be finite and > 0"));
    }
    if !(temperature >= 0.0) {
        return Err(Error::invalid("temperature", temperature, "must be >= 0"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (freq / temperature).exp_m1())
}

/// Temperature at which a mode of frequency `freq` holds `occupation` quanta.
pub fn temperature_for_occupation(freq: f64, occupation: f64) -> Result<f64> {
    if !(freq > 0.0) || !freq.is_finite() {
        return Err(Error::invalid("freq", freq, "must be finite and > 0"));
    }
    Ok(freq * effective_temperature(occupation)?)
}

/// Detailed-balance temperature T = 1/ln(1/n̄ + 1) of a mean phonon number.
pub fn effective_temperature(n_bar: f64) -> Result<f64> {
    if !(n_bar >= 0.0) {
        return Err(Error::invalid("n_bar", n_bar, "must be >= 0"));
    }
    if n_bar == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 / n_bar).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn squeeze_factor_examples() {
        let d = |kr| ParametricDrive { k0: 1.0, kr, omega_m: 1.0 };
        assert_eq!(squeeze_factor_from_drive(d(0.0)).unwrap(), 0.0);
        assert_eq!(squeeze_factor_from_drive(d(4.0)).unwrap(), 1.0);
        assert!(close(squeeze_factor_from_drive(d(1.6)).unwrap(), 0.4, 1e-15));
        let bad = ParametricDrive { k0: 0.0, kr: 1.0, omega_m: 1.0 };
        assert!(matches!(
            squeeze_factor_from_drive(bad),
            Err(Error::InvalidParameter { name: "k0", .. })
        ));
    }

    #[test]
    fn critical_squeeze_examples() {
        assert!((critical_squeeze(0.4, 1e-3) - 0.4).abs() < 1e-6);
        assert_eq!(critical_squeeze(0.4, 0.0), 0.4);
        assert!(close(critical_squeeze(0.3, 0.4), 0.13f64.sqrt(), 1e-15));
        assert!(close(critical_squeeze(0.3, 0.4), 0.360555, 1e-6));
    }

    #[test]
    fn thermal_occupation_examples() {
        assert_eq!(thermal_occupation(1.0, 0.0).unwrap(), 0.0);
        let t = 1.0 / 2f64.ln();
        assert!(close(thermal_occupation(1.0, t).unwrap(), 1.0, 1e-14));
        assert!(close(thermal_occupation(1.0, 10.0).unwrap(), 9.5083, 1e-5));
        assert!(thermal_occupation(0.0, 1.0).is_err());
        assert!(thermal_occupation(-1.0, 1.0).is_err());
    }

    #[test]
    fn effective_temperature_examples() {
        assert_eq!(effective_temperature(0.0).unwrap(), 0.0);
        let n = 1.0 / (std::f64::consts::E - 1.0);
        assert!(close(effective_temperature(n).unwrap(), 1.0, 1e-14));
        assert!(close(effective_temperature(10.0).unwrap(), 10.492, 1e-4));
        assert!(effective_temperature(-0.1).is_err());
    }

    #[test]
    fn normalization_rejects_and_reduces() {
        let p = SystemParams { kappa: -1.0, ..Default::default() };
        assert!(matches!(p.normalized(), Err(Error::InvalidParameter { name: "kappa", .. })));
        let p = SystemParams { gamma_m: 0.0, ..Default::default() };
        assert!(p.normalized().is_err());
        let p = SystemParams { n_th_cav: -1e-3, ..Default::default() };
        assert!(p.normalized().is_err());

        let p = SystemParams { theta: -PI / 4.0, ..Default::default() }.normalized().unwrap();
        assert!(close(p.theta, 3.0 * PI / 4.0, 1e-15));

        let p = SystemParams { omega_m: 2.0, kappa: 4.0, delta: 0.8, ..Default::default() }
            .normalized()
            .unwrap();
        assert_eq!((p.omega_m, p.kappa, p.delta), (1.0, 2.0, 0.4));
    }

    #[test]
    fn xi_is_pi_periodic() {
        let a = SystemParams { r: 0.7, theta: 0.3, ..Default::default() };
        let b = SystemParams { theta: 0.3 + PI, ..a };
        assert!((a.xi() - b.xi()).norm() < 1e-14);
    }

    #[test]
    fn axis_parses() {
        for a in SweepAxis::ALL {
            assert_eq!(a.key().parse::<SweepAxis>(), Ok(a));
        }
        assert!("kappa".parse::<SweepAxis>().is_err());
    }
}
