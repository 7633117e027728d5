//! Ground state of `u'' = (V'² − V'' − η)u` and the pole of `Φ` at `λ₀ = η₀/2`.
//!
//! Eigenvalues are the real zeros of `η ↦ g_η(∞)`. The eigenfunction is
//! assembled from two shots meeting at an interior point: the `g`-solution
//! integrated from the left (odd `d`) or from the origin (even `d`), and the
//! subdominant solution `u = e^{V}k` integrated leftwards from the right
//! window edge, where `k'' + 2V'k' + (2V'' + η)k = 0` and `x^{d−1}k → 1`.
//! Working with `g` and `k` rather than `u` keeps both shots free of the
//! dominant exponential that contaminates a plain `u`-shot.
//!
//! Normalisations: for odd `d`, `u₀ ~ e^{−V}` at `−∞` and the constant
//! `c = lim x^{d−1}e^{−V}u₀` is reported; for even `d`, `u₀ ~ x^{−(d−1)}e^{V}`
//! at `±∞` and `u₀(0)` is reported. With `Φ(λ) ~ C/(λ₀ − λ)`:
//!
//! * odd: `C = c/(2∫_ℝ u₀²)`
//! * even: `C = 2u₀(0)/∫_ℝ u₀²`

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::laplace_ode::{self, Controls};
use crate::ode::{self, OdeOptions};
use crate::potentials::ModelSpec;
use crate::series::LogSeries;

/// Ground-state eigenvalues from an independent finite-difference
/// discretisation (Sturm bisection, Richardson-extrapolated over two grids),
/// regenerated by the `fd_oracle` test with `REGENERATE_ORACLE=1`.
pub const SPECTRAL_ORACLE_JSON: &str = include_str!("../oracles/spectral_fd.json");

/// Everything known about the ground state of one model.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    pub model: ModelSpec,
    pub eta0: f64,
    pub eta1: f64,
    pub lambda0: f64,
    /// `(x, u₀(x))` samples in the reported normalisation.
    pub eigfn_grid: Vec<(f64, f64)>,
    pub l2_norm_sq: f64,
    pub c_asym: f64,
    pub residue_c: f64,
    /// Relative mismatch of `u'/u` between the two shots at the matching point.
    pub match_defect: f64,
}

/// Eigenfunction data at a given eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub eta: f64,
    pub grid: Vec<(f64, f64)>,
    pub l2_norm_sq: f64,
    pub c_asym: f64,
    pub match_defect: f64,
}

/// Window and matching point for [`eigenfunction`].
#[derive(Debug, Clone, Copy)]
pub struct EigenControls {
    pub x_left: f64,
    pub x_right: f64,
    pub x_match: f64,
    pub rtol: f64,
}

impl EigenControls {
    pub fn for_model(model: &ModelSpec, eta: f64) -> Self {
        let r = eta.abs().powf(1.0 / model.d as f64) + model.mu.abs().sqrt();
        Self { x_left: -(12.0f64.max(4.0 * r)), x_right: 8.0f64.max(2.5 * r), x_match: 0.6, rtol: 1e-12 }
    }
}

fn shot(model: &ModelSpec, eta: f64) -> Result<laplace_ode::TransformEval> {
    let c = Controls { rtol: 1e-12, ..Default::default() };
    laplace_ode::shoot_g(model, Complex64::new(eta, 0.0), &c)
}

/// `g_η(∞)` for real `η`, clamped to stay finite.
fn ell(model: &ModelSpec, eta: f64) -> Result<f64> {
    let ev = shot(model, eta)?;
    Ok(ev.real_sign() * ev.ln_g_infinity.re.min(700.0).exp())
}

/// The `k` smallest eigenvalues (`k ∈ {1, 2}`), each to absolute tolerance `tol`.
/// `hint` restricts the scan to `(lo, hi)`.
pub fn find_eigenvalues(model: &ModelSpec, k: usize, hint: Option<(f64, f64)>, tol: f64) -> Result<Vec<f64>> {
    if !(1..=2).contains(&k) {
        return Err(param("k", "only the two lowest eigenvalues are supported"));
    }
    if !(tol > 0.0) {
        return Err(param("tol", "must be positive"));
    }
    let (lo, hi) = hint.unwrap_or((0.0, 400.0));
    if !(hi > lo) {
        return Err(param("hint", "empty bracket"));
    }
    // Geometric scan from the left end; eigenvalues are simple and well separated.
    let mut roots = Vec::with_capacity(k);
    let mut a = lo;
    let mut fa = ell(model, a)?;
    let mut step = (1e-3f64).max(lo.abs() * 0.05);
    while roots.len() < k {
        let b = (a + step).min(hi);
        let fb = ell(model, b)?;
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() {
            roots.push(refine(model, a, b, fa, fb, tol)?);
        }
        if b >= hi {
            break;
        }
        a = b;
        fa = fb;
        step = (0.15 * a).max(step);
    }
    if roots.len() < k {
        return Err(Error::Bracketing { lo, hi });
    }
    Ok(roots)
}

/// Illinois regula falsi on a sign change of `g_η(∞)`.
fn refine(model: &ModelSpec, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> Result<f64> {
    let mut side: i32 = 0;
    for _ in 0..200 {
        let c = if (b - a).abs() < 1e-3 * (a.abs() + b.abs()) || side.abs() > 2 {
            side = 0;
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        let fc = ell(model, c)?;
        if fc == 0.0 || (b - a).abs() < tol {
            return Ok(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = side.min(0) - 1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = side.max(0) + 1;
        }
        if (b - a).abs() < tol {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::Bracketing { lo: a, hi: b })
}

fn as_real(y: &[Complex64; 3]) -> [f64; 3] {
    [y[0].re, y[1].re, y[2].re]
}

/// Ground-state eigenfunction at the eigenvalue `eta`, normalised as in the module docs.
pub fn eigenfunction(model: &ModelSpec, eta: f64, ctl: &EigenControls) -> Result<Eigenfunction> {
    let odd = model.is_odd();
    let xm = ctl.x_match;
    if !(ctl.x_right > xm) || (odd && !(ctl.x_left < xm)) || (!odd && !(xm > 0.0)) {
        return Err(param("window", "need x_left < x_match < x_right (x_match > 0 for even d)"));
    }
    let opts = OdeOptions { rtol: ctl.rtol, atol: 1e-300, ..Default::default() };
    let z = Complex64::new(0.0, 0.0);
    let cx = |v: f64| Complex64::new(v, 0.0);

    // Left piece: g with I' = e^{−2V}g² (the integrand u²).
    let (x0, g0) = if odd {
        let s = LogSeries::new(&model.damping_coeffs(), &[cx(eta)], 60).eval(ctl.x_left);
        let g = s.ln_y.re.exp();
        (ctl.x_left, [cx(g), cx(s.h.re * g), z])
    } else {
        (0.0, [cx(1.0), z, z])
    };
    let mut left_pts = Vec::new();
    let left = ode::integrate(
        |x, y: &[Complex64; 3]| {
            let e = (-model.v(x)).exp();
            [y[1], y[1] * (2.0 * model.v_prime(x)) - y[0] * eta, y[0] * y[0] * e * e]
        },
        x0,
        xm,
        g0,
        opts,
        |x, y, _| left_pts.push((x, y[0].re * (-model.v(x)).exp())),
    )?;
    let [gl, gpl, il] = as_real(&left.y);

    // Right piece: k with J' = e^{2V}k², integrated leftwards.
    let mut p = model.damping_coeffs();
    p.iter_mut().for_each(|c| *c = -*c);
    let mut r: Vec<Complex64> = model.two_v_second_coeffs().into_iter().map(cx).collect();
    r[0] += eta;
    let s = LogSeries::new(&p, &r, 60).eval(ctl.x_right);
    let k = s.ln_y.re.exp();
    let mut right_pts = Vec::new();
    let right = ode::integrate(
        |x, y: &[Complex64; 3]| {
            let e = model.v(x).exp();
            let q = 2.0 * model.v_second(x) + eta;
            [y[1], -(y[1] * (2.0 * model.v_prime(x))) - y[0] * q, y[0] * y[0] * e * e]
        },
        ctl.x_right,
        xm,
        [cx(k), cx(s.h.re * k), z],
        opts,
        |x, y, _| right_pts.push((x, y[0].re * model.v(x).exp())),
    )?;
    let [kr, kpr, jr] = as_real(&right.y);
    let jr = -jr;

    let (vm, vpm) = (model.v(xm), model.v_prime(xm));
    let ul = gl * (-vm).exp();
    let ur = kr * vm.exp();
    // Logarithmic derivatives: u = e^{−V}g and u = e^{V}k.
    let dl = gpl / gl - vpm;
    let dr = kpr / kr + vpm;
    let match_defect = (dl - dr).abs() / dl.abs().max(dr.abs()).max(1.0);
    let a = ul / ur;
    if !(a.is_finite() && a != 0.0) {
        return Err(Error::Integration { x: xm, reason: "degenerate matching".into() });
    }

    // Normalise: odd keeps the left shot, even keeps the right one.
    let (sl, sr) = if odd { (1.0, a) } else { (1.0 / a, 1.0) };
    let mut raw: Vec<(f64, f64)> = Vec::with_capacity(left_pts.len() + right_pts.len() + 1);
    raw.push((x0, g0[0].re * (-model.v(x0)).exp() * sl));
    raw.extend(left_pts.iter().map(|&(x, u)| (x, u * sl)));
    raw.extend(right_pts.iter().rev().skip(1).map(|&(x, u)| (x, u * sr)));
    raw.push((ctl.x_right, k * model.v(ctl.x_right).exp() * sr));
    // Thin to a spacing of about 0.01 and drop samples that underflow.
    let mut thinned: Vec<(f64, f64)> = Vec::with_capacity(raw.len().min(4096));
    for &(x, u) in &raw {
        if u.abs() < f64::MIN_POSITIVE {
            continue;
        }
        if thinned.last().map_or(true, |l| x - l.0 >= 0.01) {
            thinned.push((x, u));
        }
    }
    let mut grid = thinned;
    let half = il * sl * sl + jr * sr * sr;
    let (l2, c_asym) = if odd {
        (half, a)
    } else {
        let mirrored: Vec<(f64, f64)> = grid.iter().rev().filter(|p| p.0 > 0.0).map(|&(x, u)| (-x, u)).collect();
        grid = mirrored.into_iter().chain(grid).collect();
        (2.0 * half, 1.0 / a)
    };
    Ok(Eigenfunction { eta, grid, l2_norm_sq: l2, c_asym, match_defect })
}

/// `C` in `Φ(λ) ~ C/(λ₀ − λ)` from the eigenfunction data.
pub fn residue(model: &ModelSpec, ef: &Eigenfunction) -> Result<f64> {
    if !(ef.l2_norm_sq > 0.0) {
        return Err(param("l2_norm_sq", "must be positive"));
    }
    let c = if model.is_odd() { ef.c_asym / (2.0 * ef.l2_norm_sq) } else { 2.0 * ef.c_asym / ef.l2_norm_sq };
    if !(c > 0.0) {
        return Err(Error::Check(format!("non-positive residue {c}")));
    }
    Ok(c)
}

/// Independent residue `−1/(2 dg_η(∞)/dη)` at `η₀` by central differences.
pub fn residue_from_derivative(model: &ModelSpec, eta0: f64) -> Result<f64> {
    let h = 1e-4 * eta0.max(1e-2);
    let d = (ell(model, eta0 + h)? - ell(model, eta0 - h)?) / (2.0 * h);
    Ok(-1.0 / (2.0 * d))
}

/// `(δ, δ·Φ(λ₀ − δ))` probes approaching the pole.
pub fn pole_probes(model: &ModelSpec, lambda0: f64, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    deltas
        .iter()
        .map(|&d| {
            let p = laplace_ode::phi(model, Complex64::new(lambda0 - d, 0.0), &Controls { rtol: 1e-12, ..Default::default() })?;
            Ok((d, d * p.re))
        })
        .collect()
}

/// Full spectral summary of a model.
pub fn spectral_data(model: &ModelSpec, tol: f64) -> Result<SpectralData> {
    let eig = find_eigenvalues(model, 2, None, tol)?;
    let ef = eigenfunction(model, eig[0], &EigenControls::for_model(model, eig[0]))?;
    let residue_c = residue(model, &ef)?;
    Ok(SpectralData {
        model: *model,
        eta0: eig[0],
        eta1: eig[1],
        lambda0: eig[0] / 2.0,
        eigfn_grid: ef.grid,
        l2_norm_sq: ef.l2_norm_sq,
        c_asym: ef.c_asym,
        residue_c,
        match_defect: ef.match_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(d: u32, mu: f64) -> ModelSpec {
        ModelSpec::new(d, mu).unwrap()
    }

    #[test]
    fn ground_states_of_reference_models() {
        let cases = [
            (m(3, 0.0), 0.3541232444531045, 0.3867162),
            (m(4, 0.0), 1.9354821045282677, 1.7832175),
            (m(3, 1.0), 0.08207496855745508, 0.0499819),
            (m(4, -1.0), 3.373001059145705, 4.2427843),
        ];
        for (model, eta0, c) in cases {
            let sd = spectral_data(&model, 1e-12).unwrap();
            assert!((sd.eta0 - eta0).abs() < 1e-9 * eta0, "{model:?} {}", sd.eta0);
            assert!(sd.eta1 > sd.eta0);
            assert!((sd.residue_c - c).abs() < 1e-5 * c, "{model:?} {}", sd.residue_c);
            assert!(sd.match_defect < 1e-6, "{}", sd.match_defect);
            assert!(sd.eigfn_grid.iter().all(|p| p.1 > 0.0));
            let alt = residue_from_derivative(&model, sd.eta0).unwrap();
            assert!((alt - sd.residue_c).abs() < 1e-5 * c, "{alt}");
        }
    }

    #[test]
    fn cubic_normalisation_constants() {
        let model = m(3, 0.0);
        let eta0 = find_eigenvalues(&model, 1, None, 1e-13).unwrap()[0];
        let ef = eigenfunction(&model, eta0, &EigenControls::for_model(&model, eta0)).unwrap();
        assert!((ef.c_asym - 0.595082).abs() < 1e-5);
        assert!((ef.l2_norm_sq - 0.769405).abs() < 1e-5);
    }

    #[test]
    fn quartic_eigenfunction_is_even() {
        let model = m(4, 0.0);
        let eta0 = find_eigenvalues(&model, 1, None, 1e-13).unwrap()[0];
        let ef = eigenfunction(&model, eta0, &EigenControls::for_model(&model, eta0)).unwrap();
        let n = ef.grid.len();
        for i in 0..n / 2 {
            let (a, b) = (ef.grid[i], ef.grid[n - 1 - i]);
            assert!((a.0 + b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn tilt_orders_the_rate() {
        let l = |mu| find_eigenvalues(&m(3, mu), 1, None, 1e-10).unwrap()[0];
        assert!(l(-1.0) > l(0.0) && l(0.0) > l(1.0));
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(find_eigenvalues(&m(3, 0.0), 3, None, 1e-8).is_err());
        assert!(find_eigenvalues(&m(3, 0.0), 1, Some((0.0, 0.1)), 1e-8).is_err());
    }
}
