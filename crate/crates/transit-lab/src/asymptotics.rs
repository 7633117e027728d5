//! Asymptotic constants of `Φ(λ)` for `|λ| → ∞` and of the small-time tail.
//!
//! Along the ray `arg(−η) = β`, `ln g_η(∞) ~ c(β)|η|^ν` with `ν = d/(2(d−1))`
//! and `c(β) = ∫ f^{(β)}`, where with `A = y^{2(d−1)}/4` (odd, over `ℝ`) or
//! `A = y^{2(d−1)}` (even, over `[0, ∞)`)
//!
//! `f^{(β)} = √((A + cos β + √(1 + 2A cos β + A²))/2) − √A`.
//!
//! The integrand is evaluated in a rationalised form and its algebraic tail
//! `cos β/(2√A) + (1 − 2cos²β)/(8A^{3/2})` is integrated in closed form.
//!
//! Sharp constants along the negative axis are computed twice, from closed
//! forms (Gamma and incomplete elliptic integrals) and by quadrature, and the
//! two must agree to `1e−7`.

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::potentials::ModelSpec;
use crate::quad;
use crate::special::{elliptic, gamma, EllipticKind};

const SPLIT: f64 = 10.0;
const AGREE: f64 = 1e-7;

/// A constant evaluated two ways.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantCheck {
    pub name: String,
    pub closed_form: f64,
    pub quadrature: f64,
    pub discrepancy: f64,
}

/// Constants of one model. The sharp negative-axis constants exist for
/// `d ∈ {3, 4}` only.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticConstants {
    pub model: ModelSpec,
    pub nu: f64,
    pub c_zero: f64,
    pub c_half_pi: f64,
    pub beta_max: f64,
    /// `|β_max − (d−1)π/d|`, reported only.
    pub beta_max_gap: f64,
    /// Constant in `ln Φ(λ) ~ −C_ν|λ|^ν`, i.e. `2^ν c(0)`.
    pub c_nu: f64,
    pub a_small_time: f64,
    pub c34: Option<f64>,
    pub c14: Option<f64>,
    pub c23: Option<f64>,
    pub c13: Option<f64>,
    pub f0: Option<f64>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub checks: Vec<ConstantCheck>,
}

fn sharp_supported(model: &ModelSpec) -> Result<()> {
    if model.d == 3 || model.d == 4 {
        Ok(())
    } else {
        Err(param("d", "sharp constants are only available for d = 3 and d = 4"))
    }
}

/// `f^{(β)}` as a function of `A ≥ 0`, free of cancellation for large `A`.
fn f_beta(a: f64, c: f64) -> f64 {
    let r = (1.0 + 2.0 * c * a + a * a).sqrt();
    let num = c + (1.0 + 2.0 * c * a) / (r + a);
    let inner = (0.5 * (a + c + r)).max(0.0).sqrt();
    num / (2.0 * (inner + a.sqrt()))
}

/// `c(β)` for `|β| < π`.
pub fn c_beta(model: &ModelSpec, beta: f64) -> Result<f64> {
    if !(beta.abs() < std::f64::consts::PI) {
        return Err(param("beta", "must satisfy |beta| < pi"));
    }
    let c = beta.cos();
    let odd = model.is_odd();
    let p = 2.0 * (model.d as f64 - 1.0);
    let (scale, mult) = if odd { (0.25, 2.0) } else { (1.0, 1.0) };
    let big_a = |y: f64| scale * y.powf(p);
    // Leading tail terms c/(2√A) + (1−2c²)/(8A^{3/2}) as k1·y^{−p/2} + k3·y^{−3p/2}.
    let k1 = c / (2.0 * scale.sqrt());
    let k3 = (1.0 - 2.0 * c * c) / (8.0 * scale.powf(1.5));
    let (e1, e3) = (0.5 * p, 1.5 * p);
    let body = quad::integrate(|y| f_beta(big_a(y), c), 0.0, SPLIT, 1e-14, 1e-13)?;
    let rest = quad::integrate_to_inf(|y| f_beta(big_a(y), c) - k1 * y.powf(-e1) - k3 * y.powf(-e3), SPLIT, 1e-15, 1e-12)?;
    let closed = k1 * SPLIT.powf(1.0 - e1) / (e1 - 1.0) + k3 * SPLIT.powf(1.0 - e3) / (e3 - 1.0);
    Ok(mult * (body.value + rest.value + closed))
}

/// The zero `β_max ∈ (π/2, π)` of `c(β)`.
pub fn beta_max(model: &ModelSpec) -> Result<f64> {
    let half = std::f64::consts::FRAC_PI_2;
    let (mut a, mut b) = (half, std::f64::consts::PI - 1e-2);
    let (fa, fb) = (c_beta(model, a)?, c_beta(model, b)?);
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::Bracketing { lo: a, hi: b });
    }
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        if c_beta(model, m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Small-time constant `a_d = ((d−2)/d)·(d·C_ν/(2(d−1)))^{2(d−1)/(d−2)}`.
pub fn a_small_time(model: &ModelSpec) -> Result<f64> {
    let d = model.d as f64;
    let c_nu = 2f64.powf(model.nu()) * c_beta(model, 0.0)?;
    Ok((d - 2.0) / d * (d * c_nu / (2.0 * (d - 1.0))).powf(2.0 * (d - 1.0) / (d - 2.0)))
}

fn check(name: &str, closed_form: f64, quadrature: f64) -> Result<ConstantCheck> {
    let discrepancy = (closed_form - quadrature).abs();
    if !(discrepancy <= AGREE * closed_form.abs().max(1.0)) {
        return Err(Error::Check(format!("{name}: closed form {closed_form} vs quadrature {quadrature}")));
    }
    Ok(ConstantCheck { name: name.into(), closed_form, quadrature, discrepancy })
}

fn quad_inf<F: FnMut(f64) -> f64>(f: F) -> Result<f64> {
    Ok(quad::integrate_to_inf(f, 0.0, 1e-15, 1e-13)?.value)
}

/// Closed forms for `d = 3`.
fn cubic_closed() -> Result<(f64, f64, f64)> {
    let sq2pi = (2.0 * std::f64::consts::PI).sqrt();
    let g = gamma(-0.75)?;
    let c0 = 3.0 * g * g / (8.0 * sq2pi);
    let (s, c) = (std::f64::consts::PI / 8.0).sin_cos();
    let c_half = sq2pi * gamma(0.25)? * (c - s) / (3.0 * gamma(0.75)?);
    let f1_over_mu = (2.0 / std::f64::consts::PI).sqrt() * gamma(0.75)?.powi(2);
    Ok((c0, c_half, f1_over_mu))
}

/// Closed forms `(F0, F1/μ)` for `d = 4`.
fn quartic_closed() -> Result<(f64, f64)> {
    let s3 = 3f64.sqrt();
    let phi = (s3 - 2.0).acos();
    let m = (s3 + 2.0) / 4.0;
    let e_minus = elliptic(phi, m, EllipticKind::Minus)?;
    let e_plus = elliptic(phi, m, EllipticKind::Plus)?;
    let f0 = 3f64.powf(0.75) / 8.0 * e_minus;
    let f1 = (-3.0 + 3.0 * s3 + 3f64.powf(0.25) * (6.0 * e_plus + (-3.0 + s3) * e_minus)) / 12.0;
    Ok((f0, f1))
}

/// `F2 = ½ ln 2 + μ²/6` from the boundary values of its antiderivative.
pub fn quartic_f2(mu: f64) -> f64 {
    0.5 * std::f64::consts::LN_2 + mu * mu / 6.0
}

/// All constants of a model; fails if a closed form disagrees with its quadrature.
pub fn constants(model: &ModelSpec) -> Result<AsymptoticConstants> {
    let mu = model.mu;
    let nu = model.nu();
    let c_zero = c_beta(model, 0.0)?;
    let c_half_pi = c_beta(model, std::f64::consts::FRAC_PI_2)?;
    let beta_max = beta_max(model)?;
    let d = model.d as f64;
    let c_nu = 2f64.powf(nu) * c_zero;
    let mut out = AsymptoticConstants {
        model: *model,
        nu,
        c_zero,
        c_half_pi,
        beta_max,
        beta_max_gap: (beta_max - (d - 1.0) * std::f64::consts::PI / d).abs(),
        c_nu,
        a_small_time: a_small_time(model)?,
        c34: None,
        c14: None,
        c23: None,
        c13: None,
        f0: None,
        f1: None,
        f2: None,
        checks: Vec::new(),
    };
    match model.d {
        3 => {
            let (c0, c_half, f1m) = cubic_closed()?;
            // f1/μ = ½(1 − y²/√(y⁴+4)) over ℝ.
            let f1_quad = 2.0 * quad_inf(|y| {
                let r = (y.powi(4) + 4.0).sqrt();
                2.0 / (r * (r + y * y))
            })?;
            out.checks.push(check("c(0)", c0, c_zero)?);
            out.checks.push(check("c(pi/2)", c_half, c_half_pi)?);
            out.checks.push(check("F1/mu", f1m, f1_quad)?);
            out.f0 = Some(c0);
            out.f1 = Some(mu * f1m);
            out.c34 = Some(2f64.powf(0.75) * c0);
            out.c14 = Some(2f64.powf(0.25) * f1m);
        }
        4 => {
            let (f0, f1m) = quartic_closed()?;
            let f0_quad = quad_inf(|y| 1.0 / ((1.0 + y.powi(6)).sqrt() + y.powi(3)))?;
            let f1_quad = quad_inf(|y| {
                let r = (1.0 + y.powi(6)).sqrt();
                y / (r * (r + y.powi(3)))
            })?;
            let f2_quad = quad_inf(|y| {
                let r = (1.0 + y.powi(6)).sqrt();
                0.5 * (3.0 * y * y / r - 3.0 / (1.0 + y) + mu * mu * y * y / (r * r * r))
            })?;
            out.checks.push(check("F0", f0, f0_quad)?);
            out.checks.push(check("c(0)", f0, c_zero)?);
            out.checks.push(check("F1/mu", f1m, f1_quad)?);
            out.checks.push(check("F2", quartic_f2(mu), f2_quad)?);
            out.f0 = Some(f0);
            out.f1 = Some(mu * f1m);
            out.f2 = Some(quartic_f2(mu));
            out.c23 = Some(2f64.powf(2.0 / 3.0) * f0);
            out.c13 = Some(2f64.powf(1.0 / 3.0) * f1m);
        }
        _ => {}
    }
    Ok(out)
}

/// Leading large-`|λ|` behaviour of `ln Φ(λ)` for `λ < 0`, in the form that
/// matches the transform numerically. For `d = 4` there is no power
/// prefactor: `Φ ≈ 2e^{−F2}·exp(−C_{2/3}|λ|^{2/3} − μC_{1/3}|λ|^{1/3})`.
pub fn log_wkb_phi_reference(model: &ModelSpec, lambda: f64) -> Result<f64> {
    sharp_supported(model)?;
    if !(lambda < 0.0) {
        return Err(param("lambda", "must be negative"));
    }
    let k = constants(model)?;
    let l = -lambda;
    Ok(match model.d {
        3 => -k.c34.unwrap() * l.powf(0.75) - model.mu * k.c14.unwrap() * l.powf(0.25),
        _ => {
            std::f64::consts::LN_2 - k.f2.unwrap() - k.c23.unwrap() * l.powf(2.0 / 3.0) - model.mu * k.c13.unwrap() * l.powf(1.0 / 3.0)
        }
    })
}

/// [`log_wkb_phi_reference`] exponentiated.
pub fn wkb_phi_reference(model: &ModelSpec, lambda: f64) -> Result<f64> {
    Ok(log_wkb_phi_reference(model, lambda)?.exp())
}

/// The historical `d = 4` leading form with prefactor `2^{−1/4}|λ|^{1/4}`
/// (identical to [`log_wkb_phi_reference`] for `d = 3`). Kept for reporting:
/// it drifts from the transform by a factor growing like `|λ|^{1/4}`.
pub fn log_wkb_phi_power_prefactor(model: &ModelSpec, lambda: f64) -> Result<f64> {
    sharp_supported(model)?;
    if !(lambda < 0.0) {
        return Err(param("lambda", "must be negative"));
    }
    if model.d == 3 {
        return log_wkb_phi_reference(model, lambda);
    }
    let k = constants(model)?;
    let l = -lambda;
    Ok(0.25 * (l.ln() - std::f64::consts::LN_2) - k.c23.unwrap() * l.powf(2.0 / 3.0) - model.mu * k.c13.unwrap() * l.powf(1.0 / 3.0) - model.mu * model.mu / 6.0)
}
