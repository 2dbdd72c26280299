//! Two-slope magnetizing characteristics and a flux-limited CT model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Piecewise-linear flux/current curve: slope `unsaturated` inside the knee,
/// `saturated` beyond it. Flux is in per-unit of rated peak flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhCurve {
    pub knee: f64,
    /// Inductance (flux per current) below the knee.
    pub unsaturated: f64,
    /// Inductance above the knee.
    pub saturated: f64,
}

impl Default for BhCurve {
    fn default() -> Self {
        Self { knee: 1.2, unsaturated: 100.0, saturated: 0.25 }
    }
}

impl BhCurve {
    pub fn current(&self, flux: f64) -> f64 {
        let a = flux.abs();
        let i = if a <= self.knee {
            a / self.unsaturated
        } else {
            self.knee / self.unsaturated + (a - self.knee) / self.saturated
        };
        i.copysign(flux)
    }

    /// Inverse of [`current`](Self::current).
    pub fn flux(&self, current: f64) -> f64 {
        let a = current.abs();
        let ik = self.knee / self.unsaturated;
        let f = if a <= ik { a * self.unsaturated } else { self.knee + (a - ik) * self.saturated };
        f.copysign(current)
    }
}

/// Current transformer whose core flux integrates the burden voltage:
/// `d(lambda)/d(theta) = burden * (i_primary - i_mag(lambda))`, with the
/// secondary current `i_primary - i_mag` and angle `theta` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturatingCt {
    pub burden: f64,
    pub core: BhCurve,
}

impl Default for SaturatingCt {
    fn default() -> Self {
        Self { burden: 0.3, core: BhCurve { knee: 1.0, unsaturated: 200.0, saturated: 0.05 } }
    }
}

impl SaturatingCt {
    /// One backward-Euler step of angle `h`. The update is monotone in the
    /// new flux, so each linear piece is tried and the consistent one kept.
    pub fn step(&self, lambda: f64, i_primary: f64, h: f64) -> f64 {
        let g = h * self.burden;
        let c = &self.core;
        let ik = c.knee / c.unsaturated;
        // Linear region: lambda' (1 + g / Lu) = lambda + g i_p.
        let lin = (lambda + g * i_primary) / (1.0 + g / c.unsaturated);
        if lin.abs() <= c.knee {
            return lin;
        }
        // Saturated region on the side of `lin`: i_m = s (ik + (|l| - knee)/Ls).
        let s = lin.signum();
        (lambda + g * i_primary - g * s * (ik - c.knee / c.saturated)) / (1.0 + g / c.saturated)
    }

    /// Exact periodic orbit of the linear-region recurrence for a sinusoidal
    /// primary current `amp * sin(angle + phase)` stepped at `h` rad/sample.
    pub fn linear_steady_state(&self, amp: f64, phase: f64, h: f64) -> Complex64 {
        let g = h * self.burden;
        let a = 1.0 + g / self.core.unsaturated;
        let z = Complex64::from_polar(1.0, h);
        Complex64::from_polar(g * amp, phase) * z / (z * a - 1.0)
    }

    pub fn magnetizing(&self, lambda: f64) -> f64 {
        self.core.current(lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_is_continuous_odd_and_invertible() {
        let c = BhCurve::default();
        let eps = 1e-12;
        assert!((c.current(c.knee - eps) - c.current(c.knee + eps)).abs() < 1e-9);
        for &f in &[-3.0, -1.2, -0.4, 0.0, 0.7, 1.5, 2.8] {
            assert_eq!(c.current(-f), -c.current(f));
            assert!((c.flux(c.current(f)) - f).abs() < 1e-12);
        }
        // Fully offset flux of 2.0 reaches the saturated slope.
        assert!((c.current(2.0) - (0.012 + 0.8 / 0.25)).abs() < 1e-12);
    }

    #[test]
    fn ct_step_solves_its_implicit_equation() {
        let ct = SaturatingCt::default();
        let h = 2.0 * std::f64::consts::PI / 167.0;
        for &(l0, ip) in &[(0.0, 1.0), (0.9, 20.0), (-1.5, -8.0), (2.0, -30.0), (0.3, 0.0)] {
            let l1 = ct.step(l0, ip, h);
            let resid = l1 - l0 - h * ct.burden * (ip - ct.magnetizing(l1));
            assert!(resid.abs() < 1e-12, "{l0} {ip}: {resid}");
        }
    }

    #[test]
    fn linear_orbit_is_a_fixed_point_of_the_step() {
        let ct = SaturatingCt::default();
        let h = 2.0 * std::f64::consts::PI / 167.0;
        let lam = ct.linear_steady_state(1.0, 0.4, h);
        for n in 0..167 {
            let th = h * n as f64;
            let l0 = (lam * Complex64::from_polar(1.0, th)).im;
            let l1 = (lam * Complex64::from_polar(1.0, th + h)).im;
            let ip = (th + h + 0.4).sin();
            assert!((ct.step(l0, ip, h) - l1).abs() < 1e-12);
        }
    }
}
