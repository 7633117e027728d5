//! Limit potentials, Schrödinger potentials and the scale function.
//!
//! For a degree `d ≥ 3` and tilt `μ` the limit potential is
//!
//! * odd `d`: `V(y) = −y^d/(2d) + μy/2`
//! * even `d`: `V(y) = −y^d/d + μy²/2`
//!
//! and the normal-form diffusion is `dY = −V'(Y)dt + dB`. Two conventions for
//! the Schrödinger potential are exposed: [`ModelSpec::q`] is
//! `½V'² − ½V''`, while [`ModelSpec::q_eta`] is `V'² − V'' − η = 2q − η`, the
//! one entering `u'' = Q_η u`. The d=4 constant term is taken from the
//! definition, so `q` carries a `−μ/2`.
//!
//! The scale function `s(y) = ∫₀^y e^{2V}` is stored through its complement
//! `S̄(y) = ∫_y^∞ e^{2V} = s(∞) − s(y)`, tabulated as `ln S̄` so that both the
//! flat right tail (where `S̄` underflows) and the steep left tail of odd
//! degrees (where it overflows) stay representable.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::quad;

/// The pair `(d, μ)` selecting the universal law `T_{d,μ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: u32,
    pub mu: f64,
}

impl ModelSpec {
    pub fn new(d: u32, mu: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidModel(format!("degree d = {d} must be at least 3")));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidModel(format!("tilt mu = {mu} must be finite")));
        }
        Ok(Self { d, mu })
    }

    pub fn is_odd(&self) -> bool {
        self.d % 2 == 1
    }

    fn di(&self) -> i32 {
        self.d as i32
    }

    pub fn v(&self, y: f64) -> f64 {
        let d = self.d as f64;
        if self.is_odd() {
            -y.powi(self.di()) / (2.0 * d) + 0.5 * self.mu * y
        } else {
            -y.powi(self.di()) / d + 0.5 * self.mu * y * y
        }
    }

    pub fn v_prime(&self, y: f64) -> f64 {
        if self.is_odd() {
            0.5 * (self.mu - y.powi(self.di() - 1))
        } else {
            self.mu * y - y.powi(self.di() - 1)
        }
    }

    pub fn v_second(&self, y: f64) -> f64 {
        let d = self.d as f64;
        if self.is_odd() {
            -0.5 * (d - 1.0) * y.powi(self.di() - 2)
        } else {
            self.mu - (d - 1.0) * y.powi(self.di() - 2)
        }
    }

    pub fn v_third(&self, y: f64) -> f64 {
        let d = self.d as f64;
        let c = (d - 1.0) * (d - 2.0) * y.powi(self.di() - 3);
        if self.is_odd() { -0.5 * c } else { -c }
    }

    /// Drift `−V'(y)` of the normal-form diffusion.
    pub fn drift(&self, y: f64) -> f64 {
        -self.v_prime(y)
    }

    /// `q(x) = ½V'(x)² − ½V''(x)`.
    pub fn q(&self, x: f64) -> f64 {
        let vp = self.v_prime(x);
        0.5 * vp * vp - 0.5 * self.v_second(x)
    }

    /// `Q_η(x) = V'(x)² − V''(x) − η`, the potential of `u'' = Q_η u`.
    pub fn q_eta(&self, eta: Complex64, x: f64) -> Complex64 {
        Complex64::new(2.0 * self.q(x), 0.0) - eta
    }

    /// Ascending coefficients of `−2V'`, the damping in `g'' − 2V'g' + ηg = 0`.
    pub fn damping_coeffs(&self) -> Vec<f64> {
        let n = self.d as usize;
        let mut c = vec![0.0; n];
        if self.is_odd() {
            c[0] = -self.mu;
            c[n - 1] = 1.0;
        } else {
            c[1] = -2.0 * self.mu;
            c[n - 1] = 2.0;
        }
        c
    }

    /// Ascending coefficients of `2V''`.
    pub fn two_v_second_coeffs(&self) -> Vec<f64> {
        let n = self.d as usize;
        let d = self.d as f64;
        let mut c = vec![0.0; n - 1];
        if self.is_odd() {
            c[n - 2] = -(d - 1.0);
        } else {
            c[0] = 2.0 * self.mu;
            c[n - 2] = -2.0 * (d - 1.0);
        }
        c
    }

    /// Exponent `ν = d/(2(d−1))` of the stretched-exponential decay of the transform.
    pub fn nu(&self) -> f64 {
        let d = self.d as f64;
        d / (2.0 * (d - 1.0))
    }

    /// Time-rescaling exponent `2(d−2)/d`: `T ≈ ε^{2(d−2)/d}·τ`.
    pub fn time_exponent(&self) -> f64 {
        let d = self.d as f64;
        2.0 * (d - 2.0) / d
    }

    /// Deterministic time `∫_y^∞ du/(−V'(u))` to explode from `y`.
    pub fn explosion_tail(&self, y: f64) -> Result<f64> {
        self.check_positive_drift(y)?;
        let d = self.d as f64;
        if self.mu == 0.0 {
            let k = if self.is_odd() { 2.0 } else { 1.0 };
            return Ok(k / ((d - 2.0) * y.powf(d - 2.0)));
        }
        let q = quad::integrate_to_inf(|u| 1.0 / self.drift(u), y, 1e-14, 1e-12)?;
        Ok(q.value)
    }

    /// Deterministic time `∫_{−∞}^{−L} du/(−V'(u))` to come in from `−∞` (odd `d`).
    pub fn entrance_correction(&self, l: f64) -> Result<f64> {
        if !self.is_odd() {
            return Err(param("L_start", "the entrance correction only exists for odd d"));
        }
        // −V' is even in y for odd d, so the left tail mirrors the right one.
        self.explosion_tail(l)
    }

    fn check_positive_drift(&self, y: f64) -> Result<()> {
        // The drift must be positive on [y, ∞) for the tail integral to exist.
        let ok = if self.is_odd() {
            y > 0.0 && y.powi(self.di() - 1) > self.mu
        } else {
            y > 0.0 && y.powi(self.di() - 2) > self.mu
        };
        if ok {
            Ok(())
        } else {
            Err(param("cutoff", format!("drift is not positive beyond y = {y} for {self:?}")))
        }
    }
}

/// Tabulated scale function. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    pub model: ModelSpec,
    /// `s(∞) = ∫₀^∞ e^{2V}`.
    pub s_infinity: f64,
    y0: f64,
    h: f64,
    ln_sbar: Vec<f64>,
    dln_sbar: Vec<f64>,
    /// Largest absolute quadrature error estimate met while tabulating.
    pub max_quad_error: f64,
}

/// `ln ∫_y^∞ e^{2V(u)} du`, by quadrature of `e^{2V(y+t) − 2V(y)}` over `t ≥ 0`.
pub fn ln_sbar_direct(model: &ModelSpec, y: f64, tol: f64) -> Result<(f64, f64)> {
    let base = 2.0 * model.v(y);
    // Rescale t by the local decay length so the integrand is O(1) wide.
    let sigma = 1.0 / (1.0 + 2.0 * model.v_prime(y).abs());
    let f = |u: f64| {
        let t = sigma * u;
        (2.0 * model.v(y + t) - base).exp()
    };
    let q = quad::integrate_to_inf(f, 0.0, tol * 1e-3, tol)?;
    let val = sigma * q.value;
    Ok((base + val.ln(), sigma * q.error / val))
}

impl ScaleTable {
    /// Tabulates the scale function. `tol` bounds the relative quadrature error
    /// of every tabulated `S̄`.
    pub fn build(model: ModelSpec, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(param("tol", "must be positive"));
        }
        let d = model.d as f64;
        // Range where |2V| reaches about 1500; beyond it the direct formula is used.
        let reach = (1500.0 * d).powf(1.0 / d) + model.mu.abs().sqrt();
        let h = 0.005;
        // Aligned so that y = 0 is a node.
        let y0 = if model.is_odd() { -(reach / h).ceil() * h } else { 0.0 };
        let n = ((reach - y0) / h).ceil() as usize + 1;
        let i0 = (-y0 / h).round() as usize;
        let mut ln_sbar = Vec::with_capacity(n);
        let mut dln_sbar = Vec::with_capacity(n);
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            let y = if i == i0 { 0.0 } else { y0 + i as f64 * h };
            let (l, e) = ln_sbar_direct(&model, y, tol)?;
            max_err = max_err.max(e);
            ln_sbar.push(l);
            dln_sbar.push(-(2.0 * model.v(y) - l).exp());
        }
        let s_infinity = ln_sbar[i0].exp();
        Ok(Self { model, s_infinity, y0, h, ln_sbar, dln_sbar, max_quad_error: max_err })
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.y0, self.y0 + self.h * (self.ln_sbar.len() - 1) as f64)
    }

    /// `ln S̄(y)`; even degrees use `y ≥ 0` only.
    pub fn ln_sbar(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range();
        if y < lo || y > hi {
            return ln_sbar_direct(&self.model, y, 1e-12).map(|p| p.0).unwrap_or(f64::NAN);
        }
        let t = (y - self.y0) / self.h;
        let i = (t.floor() as usize).min(self.ln_sbar.len() - 2);
        let s = t - i as f64;
        hermite(self.ln_sbar[i], self.ln_sbar[i + 1], self.dln_sbar[i] * self.h, self.dln_sbar[i + 1] * self.h, s)
    }

    /// `d/dy ln S̄(y) = −e^{2V(y)}/S̄(y)`.
    pub fn dln_sbar(&self, y: f64) -> f64 {
        -(2.0 * self.model.v(y) - self.ln_sbar(y)).exp()
    }

    /// Inverse of `ln S̄`: the `y` with `ln S̄(y) = l`.
    pub fn y_of_ln_sbar(&self, l: f64) -> f64 {
        let mut hint = self.ln_sbar.len() / 2;
        self.y_of_ln_sbar_from(l, &mut hint)
    }

    /// As [`Self::y_of_ln_sbar`], searching outwards from cell `hint` (updated),
    /// which is cheap along a continuous path.
    pub fn y_of_ln_sbar_from(&self, l: f64, hint: &mut usize) -> f64 {
        let n = self.ln_sbar.len();
        // ln S̄ is strictly decreasing along the grid.
        if !(l <= self.ln_sbar[0] && l >= self.ln_sbar[n - 1]) {
            return self.newton_direct(l);
        }
        let a = self.locate(l, (*hint).min(n - 2));
        *hint = a;
        let b = a + 1;
        let (fa, fb) = (self.ln_sbar[a], self.ln_sbar[b]);
        let (da, db) = (self.dln_sbar[a] * self.h, self.dln_sbar[b] * self.h);
        let mut s = if fa != fb { (fa - l) / (fa - fb) } else { 0.5 };
        for _ in 0..6 {
            let f = hermite(fa, fb, da, db, s) - l;
            let fp = hermite_deriv(fa, fb, da, db, s);
            if fp >= 0.0 {
                break;
            }
            let step = f / fp;
            s = (s - step).clamp(0.0, 1.0);
            if step.abs() < 1e-14 {
                break;
            }
        }
        self.y0 + (a as f64 + s) * self.h
    }

    /// Cell `a` with `ln_sbar[a] ≥ l > ln_sbar[a+1]`, by galloping from `start`.
    fn locate(&self, l: f64, start: usize) -> usize {
        let n = self.ln_sbar.len();
        let (mut a, mut b);
        if self.ln_sbar[start] >= l {
            a = start;
            let mut step = 1;
            b = (start + 1).min(n - 1);
            while b < n - 1 && self.ln_sbar[b] >= l {
                a = b;
                step *= 2;
                b = (b + step).min(n - 1);
            }
        } else {
            b = start;
            let mut step = 1;
            a = start.saturating_sub(1);
            while a > 0 && self.ln_sbar[a] < l {
                b = a;
                step *= 2;
                a = a.saturating_sub(step);
            }
        }
        while b - a > 1 {
            let m = (a + b) / 2;
            if self.ln_sbar[m] >= l {
                a = m
            } else {
                b = m
            }
        }
        a.min(n - 2)
    }

    fn newton_direct(&self, l: f64) -> f64 {
        let (lo, hi) = self.y_range();
        let mut y = if l > self.ln_sbar[0] { lo } else { hi };
        for _ in 0..200 {
            let (f, _) = match ln_sbar_direct(&self.model, y, 1e-12) {
                Ok(v) => v,
                Err(_) => return f64::NAN,
            };
            let fp = -(2.0 * self.model.v(y) - f).exp();
            let step = ((f - l) / fp).clamp(-1.0, 1.0);
            y -= step;
            if step.abs() < 1e-13 * (1.0 + y.abs()) {
                break;
            }
        }
        y
    }

    /// `s(y) = ∫₀^y e^{2V}`.
    pub fn s(&self, y: f64) -> f64 {
        if !self.model.is_odd() && y < 0.0 {
            return -self.s(-y);
        }
        self.s_infinity - self.ln_sbar(y).exp()
    }

    /// `s'(y) = e^{2V(y)}`.
    pub fn s_prime(&self, y: f64) -> f64 {
        (2.0 * self.model.v(y)).exp()
    }

    /// `s⁻¹(z)`; `z` must lie inside the range of `s`.
    pub fn s_inv(&self, z: f64) -> Result<f64> {
        let inside = if self.model.is_odd() { z < self.s_infinity } else { z.abs() < self.s_infinity };
        if !inside || z.is_nan() {
            return Err(Error::Domain { what: "inverse scale function", value: z });
        }
        if !self.model.is_odd() && z < 0.0 {
            return Ok(-self.s_inv(-z)?);
        }
        Ok(self.y_of_ln_sbar((self.s_infinity - z).ln()))
    }

    /// Speed weight `w(z) = (s'(s⁻¹(z)))^{−2} = e^{−4V(s⁻¹(z))}`.
    pub fn speed_weight(&self, z: f64) -> Result<f64> {
        let y = self.s_inv(z)?;
        Ok((-4.0 * self.model.v(y)).exp())
    }
}

fn hermite(f0: f64, f1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1
}

fn hermite_deriv(f0: f64, f1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * f0 + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (-6.0 * s2 + 6.0 * s) * f1 + (3.0 * s2 - 2.0 * s) * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(d: u32, mu: f64) -> ModelSpec {
        ModelSpec::new(d, mu).unwrap()
    }

    #[test]
    fn potential_values() {
        assert!((m(3, 0.0).v(1.0) + 1.0 / 6.0).abs() < 1e-15);
        assert!((m(4, 0.0).v(1.0) + 0.25).abs() < 1e-15);
        assert!((m(3, 2.0).v(-2.0) + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn drift_values() {
        assert_eq!(m(3, 0.0).v_prime(2.0), -2.0);
        assert_eq!(m(4, 1.0).v_prime(1.0), 0.0);
        assert_eq!(m(3, 1.0).drift(1.0), 0.0);
    }

    #[test]
    fn schroedinger_potentials() {
        assert!((m(3, 0.0).q(2.0) - 3.0).abs() < 1e-14);
        assert_eq!(m(3, 0.0).q(0.0), 0.0);
        assert!((m(4, 0.0).q(1.0) - 2.0).abs() < 1e-14);
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(m(3, 0.0).q_eta(z, 0.0), z);
        assert_eq!(m(3, 0.0).q_eta(Complex64::new(-4.0, 0.0), 0.0), Complex64::new(4.0, 0.0));
        assert!((m(3, 0.0).q_eta(z, 2.0).re - 6.0).abs() < 1e-14);
    }

    #[test]
    fn quartic_q_carries_the_constant_from_the_definition() {
        let model = m(4, 0.7);
        for &x in &[0.0f64, 0.4, 1.3] {
            let naive = 0.5 * (x * x * x - 0.7 * x).powi(2) + 1.5 * x * x;
            assert!((model.q(x) - (naive - 0.35)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ModelSpec::new(2, 0.0).is_err());
        assert!(ModelSpec::new(3, f64::NAN).is_err());
    }

    #[test]
    fn tails_closed_form() {
        assert!((m(3, 0.0).entrance_correction(20.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((m(3, 0.0).explosion_tail(25.0).unwrap() - 0.08).abs() < 1e-15);
        assert!((m(4, 0.0).explosion_tail(25.0).unwrap() - 1.0 / 1250.0).abs() < 1e-15);
    }

    #[test]
    fn tails_with_tilt_match_elementary_integrals() {
        // ∫_L^∞ 2/(u²−μ) du = ln((L+√μ)/(L−√μ))/√μ.
        let mu: f64 = 1.0;
        let l: f64 = 25.0;
        let exact = ((l + mu.sqrt()) / (l - mu.sqrt())).ln() / mu.sqrt();
        assert!((m(3, mu).explosion_tail(l).unwrap() - exact).abs() < 1e-12);
        // ∫_y^∞ du/(u³+u) = ½ ln(1 + 1/y²) for μ = −1.
        let y: f64 = 3.0;
        let exact = 0.5 * (1.0 + 1.0 / (y * y)).ln();
        assert!((m(4, -1.0).explosion_tail(y).unwrap() - exact).abs() < 1e-12);
        assert!(m(3, 1.0).explosion_tail(0.5).is_err());
    }

    #[test]
    fn scale_at_infinity_matches_gamma_identities() {
        let t3 = ScaleTable::build(m(3, 0.0), 1e-12).unwrap();
        let g43 = crate::special::gamma(4.0 / 3.0).unwrap();
        assert!((t3.s_infinity - 3f64.powf(1.0 / 3.0) * g43).abs() < 1e-10);
        let t4 = ScaleTable::build(m(4, 0.0), 1e-12).unwrap();
        let g14 = crate::special::gamma(0.25).unwrap();
        // ∫₀^∞ e^{−u⁴/2} du = 2^{−7/4}·Γ(1/4) ≈ 1.0779.
        assert!((t4.s_infinity - 2f64.powf(-1.75) * g14).abs() < 1e-10);
        assert!(t3.s(0.0).abs() < 1e-12);
    }

    #[test]
    fn speed_weight_values() {
        let t = ScaleTable::build(m(3, 0.0), 1e-12).unwrap();
        assert!((t.speed_weight(0.0).unwrap() - 1.0).abs() < 1e-9);
        let z = t.s(1.0);
        assert!((t.speed_weight(z).unwrap() - (2.0f64 / 3.0).exp()).abs() < 1e-8);
        assert!(t.speed_weight(t.s_infinity).is_err());
        let t4 = ScaleTable::build(m(4, 1.0), 1e-12).unwrap();
        assert!((t4.speed_weight(0.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trip_including_tails() {
        let t = ScaleTable::build(m(3, 0.5), 1e-12).unwrap();
        for &y in &[-20.0, -8.0, -1.5, 0.0, 0.7, 3.0, 9.0, 15.0] {
            let l = t.ln_sbar(y);
            assert!((t.y_of_ln_sbar(l) - y).abs() < 1e-9, "y = {y}");
        }
        for &y in &[-2.0, 0.3, 2.0] {
            assert!((t.s_inv(t.s(y)).unwrap() - y).abs() < 1e-8);
        }
    }

    #[test]
    fn tabulated_log_complement_matches_direct_quadrature() {
        let model = m(4, -1.0);
        let t = ScaleTable::build(model, 1e-12).unwrap();
        for &y in &[0.0012, 0.5, 1.2345, 2.9, 4.1] {
            let direct = ln_sbar_direct(&model, y, 1e-13).unwrap().0;
            assert!((t.ln_sbar(y) - direct).abs() < 1e-10, "y = {y}");
        }
    }
}
