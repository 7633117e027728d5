//! Moment generating function of `T_{d,μ}` by ODE shooting.
//!
//! `Φ(λ) = E e^{λT} = g_η(start)/g_η(∞)` with `η = 2λ`, where `g` solves
//! `g'' − 2V'g' + ηg = 0` and is normalised by `g(−∞) = 1` (odd `d`) or
//! `g(0) = 1, g'(0) = 0` (even `d`).
//!
//! Both ends are handled with the logarithmic asymptotic series of
//! [`crate::series`]: it supplies the initial data at `x_left` for odd degrees
//! and converts `g(x_right)` into `g(∞)`. The state is renormalised during
//! integration so that `ln Φ` stays accurate long after `Φ` itself underflows.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::ode::{self, OdeOptions};
use crate::potentials::ModelSpec;
use crate::series::LogSeries;

const SERIES_TERMS: usize = 60;
/// Series truncation accepted at a default window edge.
const WINDOW_TRUNC: f64 = 1e-10;
/// Widening stops at `|x|^d = WINDOW_COST`; explicit steps scale like `|x|^d`.
const WINDOW_COST: f64 = 5e5;

/// Integration window and tolerances. `None` windows are chosen from `|η|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Controls {
    pub x_left: Option<f64>,
    pub x_right: Option<f64>,
    pub rtol: f64,
    /// Repeat the shot on a wider window with tighter tolerance to fill `err_estimate`.
    pub estimate_error: bool,
}

impl Default for Controls {
    fn default() -> Self {
        Self { x_left: None, x_right: None, rtol: 1e-11, estimate_error: false }
    }
}

impl Controls {
    pub fn with_error_estimate(mut self) -> Self {
        self.estimate_error = true;
        self
    }

    /// Default edges are pushed outwards until the boundary series is
    /// accurate there; the series needs `|x| ≫ |η|^{1/(d−1)}`.
    fn window(&self, model: &ModelSpec, eta: Complex64, series: &LogSeries) -> (f64, f64) {
        let r = eta.norm().powf(1.0 / model.d as f64);
        let sq = model.mu.abs().sqrt();
        let cap = WINDOW_COST.powf(1.0 / model.d as f64);
        let widen = |mut x: f64| {
            while series.eval(x).truncation > WINDOW_TRUNC && x.abs() < cap {
                x *= 1.1;
            }
            x
        };
        let xl = match (model.is_odd(), self.x_left) {
            (false, _) => 0.0,
            (true, Some(x)) => x,
            (true, None) => widen(-(12.0f64.max(4.0 * r) + sq)),
        };
        let xr = self.x_right.unwrap_or_else(|| widen(8.0f64.max(2.5 * r) + sq));
        (xl, xr)
    }
}

/// Result of one shot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformEval {
    pub model: ModelSpec,
    #[serde(serialize_with = "ser_complex")]
    pub eta: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub g_start: Complex64,
    /// `ln g(∞)`; the imaginary part is defined modulo `2π`.
    #[serde(serialize_with = "ser_complex")]
    pub ln_g_infinity: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub g_infinity: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub phi: Complex64,
    pub x_left: f64,
    pub x_right: f64,
    /// Absolute error estimate on `phi` (0 unless requested).
    pub err_estimate: f64,
    /// Relative error estimate on `phi`, i.e. absolute on `ln phi`.
    pub log_err_estimate: f64,
    pub converged: bool,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl TransformEval {
    /// `ln Φ = −ln g(∞)`.
    pub fn log_phi(&self) -> Complex64 {
        -self.ln_g_infinity
    }

    /// Sign of `g(∞)` for real `η` (the spectral function up to a positive factor).
    pub fn real_sign(&self) -> f64 {
        self.ln_g_infinity.im.cos().signum()
    }
}

fn rhs(model: &ModelSpec, eta: Complex64) -> impl Fn(f64, &[Complex64; 2]) -> [Complex64; 2] + '_ {
    move |x, y| [y[1], y[1] * (2.0 * model.v_prime(x)) - eta * y[0]]
}

/// One shot without error estimate.
fn shoot_once(model: &ModelSpec, eta: Complex64, series: &LogSeries, xl: f64, xr: f64, rtol: f64) -> Result<TransformEval> {
    if !(xr > 0.0) || (model.is_odd() && !(xl < 0.0)) {
        return Err(param("window", format!("need x_left < 0 < x_right, got [{xl}, {xr}]")));
    }
    let (y0, offset, left_trunc) = if model.is_odd() {
        let e = series.eval(xl);
        let phase = Complex64::new(0.0, e.ln_y.im).exp();
        ([phase, e.h * phase], e.ln_y.re, e.truncation)
    } else {
        ([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], 0.0, 0.0)
    };
    let opts = OdeOptions { rtol, atol: 1e-300, scaled: 2, ..Default::default() };
    let out = ode::integrate(rhs(model, eta), xl, xr, y0, opts, |_, _, _| {})?;
    let g_r = out.y[0];
    if g_r == Complex64::new(0.0, 0.0) || !g_r.is_finite() {
        return Err(Error::Integration { x: xr, reason: "g vanished or overflowed at x_right".into() });
    }
    let right = series.eval(xr);
    let ln_g_inf = g_r.ln() + out.log_scale + offset - right.ln_y;
    let phi = (-ln_g_inf).exp();
    let converged = left_trunc < 1e-8 && right.truncation < 1e-8 && ln_g_inf.is_finite();
    Ok(TransformEval {
        model: *model,
        eta,
        g_start: Complex64::new(1.0, 0.0),
        ln_g_infinity: ln_g_inf,
        g_infinity: ln_g_inf.exp(),
        phi,
        x_left: xl,
        x_right: xr,
        err_estimate: 0.0,
        log_err_estimate: 0.0,
        converged,
    })
}

/// Integrates the `g`-equation for one `η`.
pub fn shoot_g(model: &ModelSpec, eta: Complex64, controls: &Controls) -> Result<TransformEval> {
    if !eta.is_finite() {
        return Err(param("eta", "must be finite"));
    }
    if !(controls.rtol > 0.0) {
        return Err(param("rtol", "must be positive"));
    }
    let series = LogSeries::new(&model.damping_coeffs(), &[eta], SERIES_TERMS);
    let (xl, xr) = controls.window(model, eta, &series);
    let mut ev = shoot_once(model, eta, &series, xl, xr, controls.rtol)?;
    if controls.estimate_error {
        let fine = shoot_once(model, eta, &series, 1.2 * xl, 1.2 * xr, (controls.rtol * 1e-2).max(1e-13))?;
        let dl = fine.ln_g_infinity - ev.ln_g_infinity;
        // Phases can differ by 2π between the two shots.
        let dl = Complex64::new(dl.re, (dl.im + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI);
        ev.log_err_estimate = dl.norm();
        ev.err_estimate = (fine.phi - ev.phi).norm();
        ev.converged &= fine.converged;
    }
    Ok(ev)
}

/// `Φ(λ)` for complex `λ` left of the spectrum.
pub fn phi(model: &ModelSpec, lambda: Complex64, controls: &Controls) -> Result<Complex64> {
    Ok(shoot_g(model, 2.0 * lambda, controls)?.phi)
}

/// `ln Φ(λ)`, usable far into the left half-line where `Φ` underflows.
pub fn log_phi(model: &ModelSpec, lambda: Complex64, controls: &Controls) -> Result<Complex64> {
    Ok(shoot_g(model, 2.0 * lambda, controls)?.log_phi())
}

/// Characteristic function `φ(s) = Φ(is)` on a grid; negative `s` by conjugation.
pub fn phi_on_imaginary_axis(model: &ModelSpec, s_grid: &[f64], controls: &Controls) -> Result<Vec<Complex64>> {
    use rayon::prelude::*;
    s_grid
        .par_iter()
        .map(|&s| {
            if !s.is_finite() {
                return Err(param("s", "must be finite"));
            }
            let v = phi(model, Complex64::new(0.0, s.abs()), controls)?;
            Ok(if s < 0.0 { v.conj() } else { v })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(d: u32, mu: f64) -> ModelSpec {
        ModelSpec::new(d, mu).unwrap()
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn eta_zero_is_exact() {
        for model in [m(3, 0.0), m(4, 0.0), m(3, 1.0), m(4, -1.0), m(5, 0.3)] {
            let p = phi(&model, re(0.0), &Controls::default()).unwrap();
            assert!((p - 1.0).norm() < 1e-10, "{model:?} {p}");
        }
    }

    #[test]
    fn mean_from_derivative() {
        let c = Controls::default();
        let model = m(3, 0.0);
        let h = 1e-3;
        let dp = (phi(&model, re(h), &c).unwrap() - phi(&model, re(-h), &c).unwrap()) / (2.0 * h);
        assert!((dp.re - 9.95211).abs() < 1e-3, "{dp}");
        let model = m(4, 0.0);
        let dp = (phi(&model, re(h), &c).unwrap() - phi(&model, re(-h), &c).unwrap()) / (2.0 * h);
        assert!((dp.re - 1.64313).abs() < 1e-3, "{dp}");
    }

    #[test]
    fn real_axis_is_positive_and_increasing() {
        let c = Controls::default();
        for model in [m(3, 0.0), m(4, 0.0)] {
            let mut prev = 0.0;
            for l in [-20.0, -5.0, -1.0, -0.1, 0.0, 0.1] {
                let p = phi(&model, re(l), &c).unwrap();
                assert!(p.im.abs() < 1e-12 && p.re > prev);
                prev = p.re;
            }
        }
    }

    #[test]
    fn deep_left_log_phi_is_finite() {
        let lp = log_phi(&m(3, 0.0), re(-800.0), &Controls::default()).unwrap();
        // Leading behaviour −C_{3/4}·800^{3/4} with C_{3/4} ≈ 5.8797.
        let lead = -5.879676794648 * 800f64.powf(0.75);
        assert!((lp.re - lead).abs() / lead.abs() < 0.01, "{lp}");
    }

    #[test]
    fn error_estimate_is_small() {
        let c = Controls::default().with_error_estimate();
        let ev = shoot_g(&m(3, 1.0), Complex64::new(-2.0, 3.0), &c).unwrap();
        assert!(ev.converged);
        assert!(ev.log_err_estimate < 1e-8, "{}", ev.log_err_estimate);
    }

    #[test]
    fn imaginary_axis_is_bounded_and_conjugate_symmetric() {
        let v = phi_on_imaginary_axis(&m(3, 0.0), &[-1.0, 0.0, 1.0], &Controls::default()).unwrap();
        assert!((v[1] - 1.0).norm() < 1e-10);
        assert!(v[2].norm() <= 1.0);
        assert!((v[0] - v[2].conj()).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_window() {
        let c = Controls { x_left: Some(1.0), ..Default::default() };
        assert!(shoot_g(&m(3, 0.0), re(-1.0), &c).is_err());
    }
}
