//! Samplers for the limit law `T_{d,μ}`, the explosion time of
//! `dY = −V'(Y)dt + dB` started from `−∞` (odd `d`) or `0` (even `d`).
//!
//! Two independent schemes are provided.
//!
//! **Direct SDE.** A weak second-order step for additive noise,
//! `Y += bΔ + ΔW + ½b'ΔWΔ + ½(bb' + ½b'')Δ²` with `b = −V'`, run from `−L`
//! (plus the deterministic entrance time from `−∞`) to the cutoff, where the
//! deterministic explosion time from the cutoff is added. Steps are
//! `min(h, κ/|b'|)`, i.e. relative in the far field.
//!
//! **Time change.** `Y = s⁻¹(z)` with `z` a Brownian motion run on its own
//! clock, and `T = ∫ w(z_t)dt` with `w = e^{−4V(s⁻¹(z))}`. The Brownian motion
//! is tracked through `D = s(∞) − z` (even `d`: `s(∞) − |z|`), which stays
//! representable even when `|s(y₀)|` is astronomically large. Steps satisfy
//! `w·dt ≤ h` and `dt ≤ κ·min(D, ℓ_w)²` with `ℓ_w` the scale on which `w`
//! varies. A step is halved by drawing the Brownian-bridge midpoint, which
//! leaves the law of the path unchanged, until `ln w` moves by at most
//! `MAX_LN_W_JUMP` and any possible exit is resolved to where `w` is close to
//! its exit value. The time integral uses a bridge corrected trapezoid. Both
//! ends are cut at moderate `|y|` and completed deterministically.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::potentials::{ModelSpec, ScaleTable};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    TimeChange,
    DirectSde,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::TimeChange => "time_change",
            Scheme::DirectSde => "direct_sde",
        })
    }
}

/// Sampler settings. `dt` bounds the physical time step of either scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSampleConfig {
    pub model: ModelSpec,
    pub scheme: Scheme,
    pub dt: f64,
    pub kappa: f64,
    /// Odd `d`: start at `−l_start` and add the entrance time from `−∞`.
    pub l_start: f64,
    /// Cutoff beyond which the explosion is treated deterministically.
    pub y_cut: f64,
    pub max_steps: u64,
}

impl LimitSampleConfig {
    pub fn direct(model: ModelSpec) -> Self {
        Self { model, scheme: Scheme::DirectSde, dt: 2e-3, kappa: 0.05, l_start: 25.0, y_cut: 25.0, max_steps: 50_000_000 }
    }

    /// Cutoffs sit where `|V| = TC_LEVEL`; the deterministic completions are accurate there.
    pub fn time_change(model: ModelSpec) -> Self {
        let y_cut = level(&model, TC_LEVEL, 1.0);
        let l_start = if model.is_odd() { -level(&model, TC_LEVEL, -1.0) } else { y_cut };
        Self { model, scheme: Scheme::TimeChange, dt: 2e-3, kappa: 1.0, l_start, y_cut, max_steps: 50_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("kappa", self.kappa), ("l_start", self.l_start), ("y_cut", self.y_cut)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(name, "must be positive and finite"));
            }
        }
        if self.max_steps == 0 {
            return Err(param("max_steps", "must be positive"));
        }
        // Both deterministic completions need a positive drift.
        self.model.explosion_tail(self.y_cut)?;
        if self.model.is_odd() {
            self.model.entrance_correction(self.l_start)?;
        }
        Ok(())
    }
}

/// One draw of `T_{d,μ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSample {
    pub value: f64,
    pub scheme: Scheme,
    pub index: u64,
    pub steps: u64,
    /// Deterministic entrance plus exit completion included in `value`.
    pub boundary_correction: f64,
}

/// A configured sampler; holds the scale table of the time-change scheme.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    config: LimitSampleConfig,
    table: Option<ScaleTable>,
    entrance: f64,
    exit_tail: f64,
    d_hi: f64,
    ln_d_start: f64,
}

impl LimitSampler {
    pub fn new(config: LimitSampleConfig) -> Result<Self> {
        config.validate()?;
        let m = config.model;
        let entrance = if m.is_odd() { m.entrance_correction(config.l_start)? } else { 0.0 };
        let exit_tail = m.explosion_tail(config.y_cut)?;
        let (table, d_hi, ln_d_start) = match config.scheme {
            Scheme::DirectSde => (None, 0.0, 0.0),
            Scheme::TimeChange => {
                let t = ScaleTable::build(m, 1e-11)?;
                let d_hi = t.ln_sbar(config.y_cut).exp();
                let y0 = if m.is_odd() { -config.l_start } else { 0.0 };
                let l0 = t.ln_sbar(y0);
                (Some(t), d_hi, l0)
            }
        };
        Ok(Self { config, table, entrance, exit_tail, d_hi, ln_d_start })
    }

    pub fn config(&self) -> &LimitSampleConfig {
        &self.config
    }

    /// Deterministic part `Δ(L) + tail(y_cut)` added to every sample.
    pub fn boundary_correction(&self) -> f64 {
        self.entrance + self.exit_tail
    }

    /// Sample number `index` of the batch keyed by `base_seed`.
    pub fn sample(&self, base_seed: u64, index: u64) -> Result<LimitSample> {
        let mut g = rng::stream(base_seed, index);
        let (t, steps) = match self.config.scheme {
            Scheme::DirectSde => self.run_direct(&mut g, index)?,
            Scheme::TimeChange => self.run_time_change(&mut g, index)?,
        };
        let value = t + self.boundary_correction();
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Check(format!("sample {index} produced {value}")));
        }
        Ok(LimitSample { value, scheme: self.config.scheme, index, steps, boundary_correction: self.boundary_correction() })
    }

    fn run_direct<R: Rng>(&self, g: &mut R, index: u64) -> Result<(f64, u64)> {
        let c = &self.config;
        let m = &c.model;
        let odd = m.is_odd();
        let mut y = if odd { -c.l_start } else { 0.0 };
        let mut t = 0.0;
        let mut steps = 0u64;
        loop {
            let b = m.drift(y);
            let b1 = -m.v_second(y);
            let b2 = -m.v_third(y);
            let dt = c.dt.min(c.kappa / b1.abs());
            let dw = dt.sqrt() * g.sample::<f64, _>(StandardNormal);
            let yn = y + b * dt + dw + 0.5 * b1 * dw * dt + 0.5 * (b * b1 + 0.5 * b2) * dt * dt;
            steps += 1;
            let reached = if odd { yn >= c.y_cut } else { yn.abs() >= c.y_cut };
            if reached {
                let target = if odd || yn > 0.0 { c.y_cut } else { -c.y_cut };
                let frac = ((target - y) / (yn - y)).clamp(0.0, 1.0);
                return Ok((t + frac * dt, steps));
            }
            t += dt;
            y = yn;
            if steps >= c.max_steps {
                return Err(Error::StepBudget { budget: c.max_steps, index });
            }
        }
    }

    fn run_time_change<R: Rng>(&self, g: &mut R, index: u64) -> Result<(f64, u64)> {
        let c = &self.config;
        let m = &c.model;
        let table = self.table.as_ref().expect("time-change sampler owns a table");
        let s_inf = table.s_infinity;
        let odd = m.is_odd();
        let d_hi = self.d_hi;
        let (wh, _) = weights(m, c.y_cut);
        // Unreflected coordinate x; for even d, D = s(∞) − |s(∞) − x| folds both exits onto D → 0.
        let fold = |x: f64| if odd { x } else { s_inf - (s_inf - x).abs() };
        let mut x = self.ln_d_start.exp();
        let mut hint = 0usize;
        let mut y = if odd { -c.l_start } else { 0.0 };
        let (mut w, mut w2) = weights(m, y);
        let mut t = 0.0;
        let mut steps = 0u64;
        // Pending sub-interval ends (x_end, length), next one on top.
        let mut stack: Vec<(f64, f64)> = Vec::with_capacity(64);
        loop {
            if stack.is_empty() {
                let d = fold(x);
                let vp = m.v_prime(y).abs();
                let lw = if vp > 0.0 { (2.0 * m.v(y)).exp() / (4.0 * vp) } else { f64::INFINITY };
                let scale = d.min(lw);
                let dt = (c.dt / w).min(c.kappa * scale * scale);
                stack.push((x - dt.sqrt() * g.sample::<f64, _>(StandardNormal), dt));
            }
            let (xb, h) = stack.pop().expect("non-empty");
            steps += 1;
            if steps >= c.max_steps {
                return Err(Error::StepBudget { budget: c.max_steps, index });
            }
            let d = fold(x);
            let db = fold(xb);
            let beyond = db <= d_hi;
            let (yb, wb, w2b) = if beyond {
                (c.y_cut, wh, 0.0)
            } else {
                let yb = table.y_of_ln_sbar_from(db.ln(), &mut hint);
                let (wb, w2b) = weights(m, yb);
                (yb, wb, w2b)
            };
            let r = (wb / w).ln();
            let p = if beyond { 1.0 } else { (-2.0 * (d - d_hi) * (db - d_hi) / h).exp() };
            // A possible crossing is resolved down to where w is close to its exit value.
            let coarse = r.abs() > MAX_LN_W_JUMP || (p > 1e-9 && (wh / w).ln() > MAX_LN_W_JUMP);
            if coarse && h > f64::MIN_POSITIVE * 1e10 {
                // Brownian-bridge midpoint keeps the law of the path exact.
                let xm = 0.5 * (x + xb) + (0.25 * h).sqrt() * g.sample::<f64, _>(StandardNormal);
                stack.push((xb, 0.5 * h));
                stack.push((xm, 0.5 * h));
                continue;
            }
            if beyond {
                let frac = ((d - d_hi) / (d - db)).clamp(0.0, 1.0);
                return Ok((t + frac * h * log_mean(w, wh), steps));
            }
            if g.gen::<f64>() < p {
                return Ok((t + 0.5 * h * log_mean(w, wh), steps));
            }
            t += 0.5 * (w + wb) * h + 0.5 * (w2 + w2b) * h * h / 12.0;
            x = xb;
            y = yb;
            w = wb;
            w2 = w2b;
        }
    }
}

/// `|V|` at the cutoffs of the time-change scheme.
pub const TC_LEVEL: f64 = 20.0;

/// Largest change of `ln w` accepted on one sub-interval of the time-change scheme.
const MAX_LN_W_JUMP: f64 = 0.5;

/// `(b − a)/ln(b/a)`, the mean of an exponential profile between `a` and `b`.
fn log_mean(a: f64, b: f64) -> f64 {
    let r = (b / a).ln();
    if r.abs() < 1e-8 {
        0.5 * (a + b)
    } else {
        (b - a) / r
    }
}

/// The point `y` on the side `sign` (beyond the critical points) with `|V(y)| = v`.
fn level(m: &ModelSpec, v: f64, sign: f64) -> f64 {
    let (mut a, mut b) = (sign * (m.mu.abs().sqrt() + 1.0), sign * 64.0);
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if m.v(c).abs() < v {
            a = c;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}

/// `w = e^{−4V}` and `d²w/dz² = (−4V'' + 24V'²)e^{−8V}` at `y`.
fn weights(m: &ModelSpec, y: f64) -> (f64, f64) {
    let w = (-4.0 * m.v(y)).exp();
    let vp = m.v_prime(y);
    (w, (-4.0 * m.v_second(y) + 24.0 * vp * vp) * w * w)
}

/// `n` samples with counter-derived streams; independent of thread count.
pub fn batch_t(sampler: &LimitSampler, n: usize, base_seed: u64) -> Result<Vec<LimitSample>> {
    if n == 0 {
        return Err(param("n", "must be at least 1"));
    }
    (0..n as u64).into_par_iter().map(|i| sampler.sample(base_seed, i)).collect()
}

/// Sample values only.
pub fn batch_values(sampler: &LimitSampler, n: usize, base_seed: u64) -> Result<Vec<f64>> {
    Ok(batch_t(sampler, n, base_seed)?.into_iter().map(|s| s.value).collect())
}
