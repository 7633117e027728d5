//! Density of `T_{d,μ}` by Fourier inversion of `φ(s) = Φ(is)`.
//!
//! `f(t) = (1/π)∫₀^{S*} Re[e^{−ist}φ(s)]ds`. The transform decays like
//! `exp(−c(π/2)(2s)^ν)`, so the cut `S*` follows from the ray constant of
//! [`crate::asymptotics`]. `φ` is sampled on a geometric grid, interpolated by
//! quadratics on pairs of intervals and the oscillatory factor is integrated
//! exactly enough by a 15-point rule on every interval, so the grid only has
//! to resolve `φ` itself, not `e^{−ist}`. The CDF is anchored at the first
//! grid point by the Gil-Pelaez formula and continued by cumulative
//! integration of `f`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics;
use crate::error::{param, Error, Result};
use crate::laplace_ode::{self, Controls};
use crate::potentials::ModelSpec;
use crate::quad;
use crate::spectrum::SpectralData;

/// Settings of the inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionControls {
    /// First positive node of the geometric grid.
    pub s_min: f64,
    /// Number of grid intervals (even).
    pub intervals: usize,
    /// Target for `|φ(S*)|`.
    pub trunc_tol: f64,
    /// Largest admissible `S*`.
    pub s_budget: f64,
    pub laplace: Controls,
}

impl Default for InversionControls {
    fn default() -> Self {
        Self { s_min: 1e-3, intervals: 2000, trunc_tol: 1e-10, s_budget: 1e4, laplace: Controls::default() }
    }
}

/// Exponential fit of the density tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityTailFit {
    pub lambda0_hat: f64,
    pub c_hat: f64,
    pub fit_window: (f64, f64),
    /// RMS deviation of `ln f` from the fitted line.
    pub fit_residual: f64,
}

/// Tabulated density, CDF and survival function.
#[derive(Debug, Clone, Serialize)]
pub struct DensityTable {
    pub model: ModelSpec,
    pub t_grid: Vec<f64>,
    pub f: Vec<f64>,
    #[serde(rename = "F")]
    pub cdf: Vec<f64>,
    #[serde(rename = "S")]
    pub sf: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub tail_fit: DensityTailFit,
    /// `∫f` over the grid.
    pub mass: f64,
    /// Most negative density value (0 if none).
    pub min_f: f64,
    pub s_max: f64,
    pub s_intervals: usize,
}

/// Cut `S*` with `exp(−0.9·c(π/2)(2S*)^ν) = tol`.
pub fn truncation_point(model: &ModelSpec, trunc_tol: f64) -> Result<f64> {
    if !(trunc_tol > 0.0 && trunc_tol < 1.0) {
        return Err(param("trunc_tol", "must lie in (0, 1)"));
    }
    let c = asymptotics::c_beta(model, FRAC_PI_2)?;
    Ok(0.5 * (-trunc_tol.ln() / (0.9 * c)).powf(1.0 / model.nu()))
}

/// `0` followed by a geometric grid from `s_min` to `s_max`; `intervals` intervals in total.
pub fn s_grid(s_min: f64, s_max: f64, intervals: usize) -> Result<Vec<f64>> {
    if !(s_min > 0.0 && s_max > s_min) {
        return Err(param("s_grid", format!("need 0 < s_min < s_max, got {s_min}, {s_max}")));
    }
    if intervals < 4 || intervals % 2 != 0 {
        return Err(param("intervals", "must be even and at least 4"));
    }
    let m = intervals - 1;
    let r = (s_max / s_min).ln() / m as f64;
    let mut g = Vec::with_capacity(intervals + 1);
    g.push(0.0);
    g.extend((0..=m).map(|k| s_min * (r * k as f64).exp()));
    Ok(g)
}

/// Quadrature points `(σ, weight, φ(σ))` of the piecewise-quadratic model of `φ`.
#[derive(Debug, Clone)]
pub struct SpectralQuadrature {
    pts: Vec<(f64, f64, Complex64)>,
}

impl SpectralQuadrature {
    pub fn new(s: &[f64], phi: &[Complex64]) -> Result<Self> {
        if s.len() != phi.len() || s.len() < 3 || s.len() % 2 == 0 {
            return Err(param("s_grid", "need an odd number (≥ 3) of nodes matching the transform values"));
        }
        let rule = quad::kronrod15();
        let mut pts = Vec::with_capacity((s.len() - 1) * rule.len());
        for k in (0..s.len() - 2).step_by(2) {
            let (s0, s1, s2) = (s[k], s[k + 1], s[k + 2]);
            let (p0, p1, p2) = (phi[k], phi[k + 1], phi[k + 2]);
            let lag = |x: f64| {
                let l0 = (x - s1) * (x - s2) / ((s0 - s1) * (s0 - s2));
                let l1 = (x - s0) * (x - s2) / ((s1 - s0) * (s1 - s2));
                let l2 = (x - s0) * (x - s1) / ((s2 - s0) * (s2 - s1));
                p0 * l0 + p1 * l1 + p2 * l2
            };
            for (a, b) in [(s0, s1), (s1, s2)] {
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for &(x, w) in &rule {
                    let sig = mid + half * x;
                    pts.push((sig, w * half, lag(sig)));
                }
            }
        }
        Ok(Self { pts })
    }

    /// `(1/π)∫ Re[e^{−ist}φ(s)]ds`.
    pub fn density(&self, t: f64) -> f64 {
        self.pts.iter().map(|&(s, w, p)| w * (Complex64::new(0.0, -s * t).exp() * p).re).sum::<f64>() / PI
    }

    /// Gil-Pelaez: `½ − (1/π)∫ Im[e^{−ist}φ(s)]/s ds`.
    pub fn cdf(&self, t: f64) -> f64 {
        0.5 - self.pts.iter().map(|&(s, w, p)| w * (Complex64::new(0.0, -s * t).exp() * p).im / s).sum::<f64>() / PI
    }
}

/// Transform on the grid and its quadrature model.
pub fn spectral_quadrature(model: &ModelSpec, controls: &InversionControls) -> Result<(f64, SpectralQuadrature)> {
    let s_max = truncation_point(model, controls.trunc_tol)?;
    if s_max > controls.s_budget {
        return Err(param("trunc_tol", format!("cut S* = {s_max:.3e} exceeds the budget {}", controls.s_budget)));
    }
    let grid = s_grid(controls.s_min, s_max, controls.intervals)?;
    let phi = laplace_ode::phi_on_imaginary_axis(model, &grid, &controls.laplace)?;
    Ok((s_max, SpectralQuadrature::new(&grid, &phi)?))
}

/// Default `t` grid: from 0.2 (0.1 for `d = 4`) to where the spectral tail
/// `(C/λ₀)e^{−λ₀t}` reaches `sf_floor`, with `points` nodes.
pub fn default_t_grid(spectral: &SpectralData, sf_floor: f64, points: usize) -> Result<Vec<f64>> {
    if !(sf_floor > 0.0 && sf_floor < 1.0) || points < 10 {
        return Err(param("t_grid", "need 0 < sf_floor < 1 and at least 10 points"));
    }
    let t_min = if spectral.model.d == 4 { 0.1 } else { 0.2 };
    let l0 = spectral.lambda0;
    let t_max = (spectral.residue_c / (l0 * sf_floor)).ln() / l0;
    if !(t_max > t_min) {
        return Err(param("t_grid", format!("tail floor gives t_max = {t_max}")));
    }
    Ok((0..points).map(|i| t_min + (t_max - t_min) * i as f64 / (points - 1) as f64).collect())
}

fn trapezoid(t: &[f64], y: impl Fn(usize) -> f64) -> f64 {
    (1..t.len()).map(|i| 0.5 * (t[i] - t[i - 1]) * (y(i) + y(i - 1))).sum()
}

/// Weighted least squares of `ln f` on `(1, −t)` where `S ∈ [1e−6, 1e−2]`,
/// weights proportional to the local grid spacing.
fn fit_tail(t: &[f64], f: &[f64], sf: &[f64]) -> Result<DensityTailFit> {
    let idx: Vec<usize> = (0..t.len()).filter(|&i| sf[i] <= 1e-2 && sf[i] >= 1e-6 && f[i] > 0.0).collect();
    if idx.len() < 10 {
        return Err(param("t_grid", format!("tail window S ∈ [1e-6, 1e-2] holds only {} grid points", idx.len())));
    }
    let w = |i: usize| {
        let lo = t[i.saturating_sub(1)];
        let hi = t[(i + 1).min(t.len() - 1)];
        0.5 * (hi - lo)
    };
    let sw: f64 = idx.iter().map(|&i| w(i)).sum();
    let mt = idx.iter().map(|&i| w(i) * t[i]).sum::<f64>() / sw;
    let ml = idx.iter().map(|&i| w(i) * f[i].ln()).sum::<f64>() / sw;
    let sxy: f64 = idx.iter().map(|&i| w(i) * (t[i] - mt) * (f[i].ln() - ml)).sum();
    let sxx: f64 = idx.iter().map(|&i| w(i) * (t[i] - mt).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = ml - slope * mt;
    let res = (idx.iter().map(|&i| w(i) * (f[i].ln() - icpt - slope * t[i]).powi(2)).sum::<f64>() / sw).sqrt();
    Ok(DensityTailFit {
        lambda0_hat: -slope,
        c_hat: icpt.exp(),
        fit_window: (t[idx[0]], t[*idx.last().expect("non-empty")]),
        fit_residual: res,
    })
}

/// Inverts the transform of `model` on `t_grid`.
pub fn invert(model: &ModelSpec, t_grid: &[f64], controls: &InversionControls) -> Result<DensityTable> {
    if t_grid.len() < 3 || !(t_grid[0] > 0.0) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("t_grid", "must be positive, strictly increasing, with at least 3 points"));
    }
    let (s_max, q) = spectral_quadrature(model, controls)?;
    let f: Vec<f64> = t_grid.par_iter().map(|&t| q.density(t)).collect();
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Check("inversion produced a non-finite density".into()));
    }
    let mut cdf = Vec::with_capacity(f.len());
    let mut acc = q.cdf(t_grid[0]).max(0.0);
    cdf.push(acc);
    for i in 1..f.len() {
        // Running maximum absorbs ringing far below the tolerance.
        acc = (acc + 0.5 * (t_grid[i] - t_grid[i - 1]) * (f[i] + f[i - 1])).max(acc).min(1.0);
        cdf.push(acc);
    }
    let sf: Vec<f64> = cdf.iter().map(|v| 1.0 - v).collect();
    let tail = fit_tail(t_grid, &f, &sf)?;
    let mass = trapezoid(t_grid, |i| f[i]);
    let (lh, ch) = (tail.lambda0_hat, tail.c_hat);
    let tn = *t_grid.last().expect("non-empty");
    let e = ch * (-lh * tn).exp();
    let m1 = trapezoid(t_grid, |i| t_grid[i] * f[i]) + e * (tn / lh + 1.0 / (lh * lh));
    let m2 = trapezoid(t_grid, |i| t_grid[i] * t_grid[i] * f[i]) + e * (tn * tn / lh + 2.0 * tn / (lh * lh) + 2.0 / lh.powi(3));
    let min_f = f.iter().copied().fold(0.0, f64::min);
    Ok(DensityTable {
        model: *model,
        t_grid: t_grid.to_vec(),
        f,
        cdf,
        sf,
        mean: m1,
        sd: (m2 - m1 * m1).sqrt(),
        tail_fit: tail,
        mass,
        min_f,
        s_max,
        s_intervals: controls.intervals,
    })
}

impl DensityTable {
    /// CDF by linear interpolation; the fitted exponential tail beyond the grid.
    pub fn cdf_at(&self, t: f64) -> f64 {
        let g = &self.t_grid;
        if t <= g[0] {
            return if t <= 0.0 { 0.0 } else { self.cdf[0] };
        }
        let n = g.len();
        if t >= g[n - 1] {
            let DensityTailFit { lambda0_hat: l, c_hat: c, .. } = self.tail_fit;
            return 1.0 - (c / l) * (-l * t).exp();
        }
        let i = g.partition_point(|&x| x <= t);
        let w = (t - g[i - 1]) / (g[i] - g[i - 1]);
        self.cdf[i - 1] + w * (self.cdf[i] - self.cdf[i - 1])
    }

    /// `∫f(t)e^{λt}dt` over the grid plus the fitted tail, for `λ < λ̂₀`.
    pub fn mgf(&self, lambda: f64) -> Result<f64> {
        let DensityTailFit { lambda0_hat: l, c_hat: c, .. } = self.tail_fit;
        if !(lambda < l) {
            return Err(param("lambda", format!("must be below the fitted rate {l}")));
        }
        let g = &self.t_grid;
        let tn = g[g.len() - 1];
        Ok(trapezoid(g, |i| self.f[i] * (lambda * g[i]).exp()) + c * ((lambda - l) * tn).exp() / (l - lambda))
    }
}

/// Fitted tail against the spectral prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailComparison {
    pub lambda0_hat: f64,
    pub c_hat: f64,
    pub lambda0: f64,
    pub residue_c: f64,
    pub lambda_rel_err: f64,
    pub c_rel_err: f64,
    pub fit_window: (f64, f64),
    pub fit_residual: f64,
}

pub fn tail_fit(table: &DensityTable, spectral: &SpectralData) -> Result<TailComparison> {
    if table.model != spectral.model {
        return Err(param("spectral", "model differs from the density table"));
    }
    let t = table.tail_fit;
    if t.fit_window.1 - t.fit_window.0 < 1.0 / spectral.lambda0 {
        return Err(param("t_grid", "tail window shorter than one decay length"));
    }
    Ok(TailComparison {
        lambda0_hat: t.lambda0_hat,
        c_hat: t.c_hat,
        lambda0: spectral.lambda0,
        residue_c: spectral.residue_c,
        lambda_rel_err: (t.lambda0_hat - spectral.lambda0).abs() / spectral.lambda0,
        c_rel_err: (t.c_hat - spectral.residue_c).abs() / spectral.residue_c,
        fit_window: t.fit_window,
        fit_residual: t.fit_residual,
    })
}

/// One row of the density-versus-transform consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalPoint {
    pub lambda: f64,
    pub from_density: f64,
    pub from_transform: f64,
    pub rel_err: f64,
}

/// `∫f e^{λt}` against `Φ(λ)` from shooting.
pub fn parseval_check(table: &DensityTable, lambdas: &[f64], controls: &Controls) -> Result<Vec<ParsevalPoint>> {
    lambdas
        .iter()
        .map(|&l| {
            let d = table.mgf(l)?;
            let p = laplace_ode::phi(&table.model, Complex64::new(l, 0.0), controls)?.re;
            Ok(ParsevalPoint { lambda: l, from_density: d, from_transform: p, rel_err: (d - p).abs() / p })
        })
        .collect()
}

/// Minimum sample count of [`small_time_probe`].
pub const PROBE_MIN_SAMPLES: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallTimePoint {
    pub quantile: f64,
    pub t: f64,
    pub cdf_hat: f64,
    /// `−t^{d/(d−2)}·ln F̂(t)`.
    pub statistic: f64,
    pub ratio_to_a: f64,
}

/// Report-only look at the lower tail `ln P(T < t) ≈ −a_d t^{−d/(d−2)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallTimeReport {
    pub model: ModelSpec,
    pub a_d: f64,
    pub exponent: f64,
    pub points: Vec<SmallTimePoint>,
    pub cdf_monotone: bool,
}

pub fn small_time_probe(model: &ModelSpec, samples: &[f64]) -> Result<SmallTimeReport> {
    if samples.len() < PROBE_MIN_SAMPLES {
        return Err(param("samples", format!("need at least {PROBE_MIN_SAMPLES}, got {}", samples.len())));
    }
    let a_d = asymptotics::a_small_time(model)?;
    let d = model.d as f64;
    let exponent = d / (d - 2.0);
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let points: Vec<SmallTimePoint> = [1e-4, 1e-3]
        .iter()
        .map(|&q| {
            let t = crate::stats::quantile(&v, q);
            let cdf_hat = v.partition_point(|&x| x <= t) as f64 / n;
            let statistic = -t.powf(exponent) * cdf_hat.ln();
            SmallTimePoint { quantile: q, t, cdf_hat, statistic, ratio_to_a: statistic / a_d }
        })
        .collect();
    let cdf_monotone = points.windows(2).all(|w| w[1].t >= w[0].t && w[1].cdf_hat >= w[0].cdf_hat);
    Ok(SmallTimeReport { model: *model, a_d, exponent, points, cdf_monotone })
}
