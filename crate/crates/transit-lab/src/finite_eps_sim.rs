//! Transit times of the weak-noise diffusion `dX = −U'(X)dt + ε dW`.
//!
//! A family `U_{μ,ε}` sits at a degenerate unstable point at the origin and,
//! after `x = ε^{2/d}y` and `t = ε^{−2(d−2)/d}s`, approaches the limit
//! potential `V_μ`. The sampler runs Euler–Maruyama with step
//! `min(h·ε^{−2(d−2)/d}, κ/|U''|)`, i.e. `h` in rescaled time near the origin
//! and relative steps where the drift is steep. Crossings of `a` (or `±a`) and
//! of the left guard `l` are located by linear interpolation inside the step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::potentials::ModelSpec;
use crate::rng;

/// The built-in potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `U = −x³/6`, exactly self-similar.
    Cubic,
    /// `U = sin x − x`.
    Sine,
    /// `U = sin x − x + με^{4/3}x`.
    SineTilted,
    /// `U = −x⁴/4`, exactly self-similar.
    Quartic,
    /// `U = −(1 − cos x)²`.
    Cos2,
    /// `U = −(1 − εμ/2 − cos x)²`.
    Cos2Tilted,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] =
        [FamilyKind::Cubic, FamilyKind::Sine, FamilyKind::SineTilted, FamilyKind::Quartic, FamilyKind::Cos2, FamilyKind::Cos2Tilted];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Cubic => "cubic",
            FamilyKind::Sine => "sine",
            FamilyKind::SineTilted => "sine_tilted",
            FamilyKind::Quartic => "quartic",
            FamilyKind::Cos2 => "cos2",
            FamilyKind::Cos2Tilted => "cos2_tilted",
        }
    }

    pub fn degree(self) -> u32 {
        match self {
            FamilyKind::Cubic | FamilyKind::Sine | FamilyKind::SineTilted => 3,
            _ => 4,
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Superlinearity witness `ψ(r) = coeff·r^power`: outside `[−A, A]` the rescaled
/// outward drift dominates `ψ(|y|)` up to the validity radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub coeff: f64,
    pub power: f64,
}

/// A potential family together with its validity data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialFamily {
    pub kind: FamilyKind,
    /// Family parameter `μ` as it appears in `U`.
    pub mu: f64,
    /// Limit model; its tilt is the effective one (twice `μ` for `sine_tilted`).
    pub model: ModelSpec,
    /// Validity radius (`+∞` for the polynomial families).
    pub b: f64,
    /// Inner radius `A` of the witness region, in rescaled units.
    pub a_witness: f64,
    pub psi: Witness,
    pub psi_descriptor: String,
    /// Largest ε for which the rescaled potential is within `RESIDUAL_TOL` of the limit on `[−1, 1]`.
    pub eps_max: f64,
    /// Default start and exit level.
    pub x0: f64,
    pub a: f64,
}

/// Tolerance of the rescaled-potential check on `[−1, 1]`.
pub const RESIDUAL_TOL: f64 = 0.05;

/// Edge gap below `2π` (sine) and below `π` (cos2) defining `b`.
const SINE_GAP: f64 = 0.5;
const COS2_B: f64 = 2.5;

/// Minimum of `f(x)/x^p` on `(0, b]`, sampled; the witness coefficient.
fn grid_min(f: impl Fn(f64) -> f64, p: i32, b: f64) -> f64 {
    (1..=4000).map(|i| b * i as f64 / 4000.0).map(|x| f(x) / x.powi(p)).fold(f64::INFINITY, f64::min)
}

/// The family `name` with parameter `mu`.
pub fn builtin_family(name: &str, mu: f64) -> Result<PotentialFamily> {
    let kind: FamilyKind = name.parse()?;
    family(kind, mu)
}

pub fn family(kind: FamilyKind, mu: f64) -> Result<PotentialFamily> {
    if !mu.is_finite() {
        return Err(param("mu", "must be finite"));
    }
    let untilted = matches!(kind, FamilyKind::Cubic | FamilyKind::Sine | FamilyKind::Quartic | FamilyKind::Cos2);
    if untilted && mu != 0.0 {
        return Err(param("mu", format!("family `{kind}` has no tilt; use the tilted variant")));
    }
    let mu_eff = if kind == FamilyKind::SineTilted { 2.0 * mu } else { mu };
    let model = ModelSpec::new(kind.degree(), mu_eff)?;
    let (b, psi, desc, eps_max, x0, a) = match kind {
        FamilyKind::Cubic => (f64::INFINITY, Witness { coeff: 0.25, power: 2.0 }, "r^2/4 on [A, inf)".to_string(), 1.0, -5.0, 5.0),
        FamilyKind::Quartic => (f64::INFINITY, Witness { coeff: 0.5, power: 3.0 }, "r^3/2 on [A, inf)".to_string(), 1.0, 0.0, 2.0),
        FamilyKind::Sine | FamilyKind::SineTilted => {
            let b = 2.0 * std::f64::consts::PI - SINE_GAP;
            let k = grid_min(|x| 1.0 - x.cos(), 2, b);
            (b, Witness { coeff: 0.5 * k, power: 2.0 }, format!("{:.6}*r^2 on [A, 2pi-{SINE_GAP})", 0.5 * k), 0.25, -5.0, 5.0)
        }
        FamilyKind::Cos2 | FamilyKind::Cos2Tilted => {
            let k = grid_min(|x| 2.0 * (1.0 - x.cos()) * x.sin(), 3, COS2_B);
            (COS2_B, Witness { coeff: 0.5 * k, power: 3.0 }, format!("{:.6}*r^3 on [A, {COS2_B})", 0.5 * k), 0.25, 0.0, 2.0)
        }
    };
    // The witness keeps a factor 2 of slack, which absorbs the tilt beyond A.
    let a_witness = if mu_eff == 0.0 {
        1.0
    } else if model.is_odd() {
        (mu_eff.abs() / (2.0 * psi.coeff)).powf(1.0 / psi.power).max(1.0)
    } else {
        (mu_eff.abs() / psi.coeff).powf(1.0 / (psi.power - 1.0)).max(1.0)
    };
    Ok(PotentialFamily { kind, mu, model, b, a_witness, psi, psi_descriptor: desc, eps_max, x0, a })
}

impl PotentialFamily {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn u(&self, x: f64, eps: f64) -> f64 {
        let mu = self.mu;
        match self.kind {
            FamilyKind::Cubic => -x * x * x / 6.0,
            FamilyKind::Sine => x.sin() - x,
            FamilyKind::SineTilted => x.sin() - x + mu * eps.powf(4.0 / 3.0) * x,
            FamilyKind::Quartic => -x.powi(4) / 4.0,
            FamilyKind::Cos2 => -(1.0 - x.cos()).powi(2),
            FamilyKind::Cos2Tilted => -(1.0 - 0.5 * eps * mu - x.cos()).powi(2),
        }
    }

    pub fn u_prime(&self, x: f64, eps: f64) -> f64 {
        let mu = self.mu;
        match self.kind {
            FamilyKind::Cubic => -0.5 * x * x,
            FamilyKind::Sine => x.cos() - 1.0,
            FamilyKind::SineTilted => x.cos() - 1.0 + mu * eps.powf(4.0 / 3.0),
            FamilyKind::Quartic => -x * x * x,
            FamilyKind::Cos2 => -2.0 * (1.0 - x.cos()) * x.sin(),
            FamilyKind::Cos2Tilted => -2.0 * (1.0 - 0.5 * eps * mu - x.cos()) * x.sin(),
        }
    }

    pub fn u_second(&self, x: f64, eps: f64) -> f64 {
        let mu = self.mu;
        match self.kind {
            FamilyKind::Cubic => -x,
            FamilyKind::Sine | FamilyKind::SineTilted => -x.sin(),
            FamilyKind::Quartic => -3.0 * x * x,
            FamilyKind::Cos2 => -2.0 * (x.sin().powi(2) + (1.0 - x.cos()) * x.cos()),
            FamilyKind::Cos2Tilted => -2.0 * (x.sin().powi(2) + (1.0 - 0.5 * eps * mu - x.cos()) * x.cos()),
        }
    }

    /// `ε^{−2}(U(ε^{2/d}y) − U(0))`, which tends to `V_μ(y)` up to a constant.
    pub fn rescaled_potential(&self, y: f64, eps: f64) -> f64 {
        let c = eps.powf(2.0 / self.model.d as f64);
        (self.u(c * y, eps) - self.u(0.0, eps)) / (eps * eps)
    }

    /// Rescaled outward drift `−ε^{−2+2/d}U'(ε^{2/d}y)`.
    pub fn rescaled_drift(&self, y: f64, eps: f64) -> f64 {
        let c = eps.powf(2.0 / self.model.d as f64);
        -self.u_prime(c * y, eps) * c / (eps * eps)
    }

    /// `max |ε^{−2}(U(ε^{2/d}y) − U(0)) − V_μ(y)|` over `n` points of `[−A_test, A_test]`.
    pub fn rescaled_residual(&self, eps: f64, a_test: f64, n: usize) -> f64 {
        let m = &self.model;
        (0..=n)
            .map(|i| -a_test + 2.0 * a_test * i as f64 / n as f64)
            .map(|y| (self.rescaled_potential(y, eps) - m.v(y)).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest `drift(y)·sign(y)/ψ(|y|)` over `A ≤ |y| < b·ε^{−2/d}` (capped at `A + 200`).
    /// The sign condition holds when this is at least 1; an empty region gives `+∞`.
    pub fn sign_condition_margin(&self, eps: f64, n: usize) -> f64 {
        let hi = (self.b / eps.powf(2.0 / self.model.d as f64)).min(self.a_witness + 200.0);
        let lo = self.a_witness;
        if hi <= lo {
            return f64::INFINITY;
        }
        let psi = |r: f64| self.psi.coeff * r.powf(self.psi.power);
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let r = lo + (hi - lo) * i as f64 / n as f64;
            // Odd degrees push right on both sides; even degrees push outward.
            let right = self.rescaled_drift(r, eps) / psi(r);
            let left = if self.model.is_odd() { self.rescaled_drift(-r, eps) } else { -self.rescaled_drift(-r, eps) } / psi(r);
            worst = worst.min(right).min(left);
        }
        worst
    }

    /// Left guard `l_ε`: midpoint towards `−b` for bounded families, `2x₀` otherwise.
    pub fn left_guard(&self, x0: f64) -> f64 {
        if self.b.is_finite() {
            0.5 * (x0 - self.b)
        } else {
            2.0 * x0
        }
    }

    pub fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps <= self.eps_max) {
            return Err(param("eps", format!("must lie in (0, {}] for family `{}`, got {eps}", self.eps_max, self.name())));
        }
        Ok(())
    }

    pub fn check_levels(&self, x0: f64, a: f64) -> Result<()> {
        if !(a > 0.0 && a <= self.b && a.is_finite()) {
            return Err(param("a", format!("must lie in (0, b = {}], got {a}", self.b)));
        }
        if self.model.is_odd() {
            if !(x0 < 0.0 && x0 > -self.b) {
                return Err(param("x0", format!("odd degree needs −b < x0 < 0, got {x0}")));
            }
        } else if !(x0.abs() < a) {
            return Err(param("x0", format!("even degree needs |x0| < a, got {x0}")));
        }
        Ok(())
    }
}

/// Step control of the Euler–Maruyama scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    /// Step in rescaled time near the origin.
    pub h: f64,
    /// Relative step `κ/|U''|` where the drift varies quickly.
    pub kappa: f64,
    pub max_steps: u64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { h: 2e-3, kappa: 0.05, max_steps: 50_000_000 }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(param("h", "must be positive"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(param("kappa", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(param("max_steps", "must be positive"));
        }
        Ok(())
    }
}

/// One transit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitSample {
    pub seed: u64,
    pub epsilon: f64,
    pub x0: f64,
    pub a: f64,
    pub tau_raw: f64,
    pub tau_rescaled: f64,
    /// Odd `d`: the path reached the left guard before `a`.
    pub exited_left: bool,
    /// Side of the exit: `+1` at `a`, `−1` at `−a` (even `d`) or at the guard.
    #[serde(skip)]
    pub exit_side: i8,
}

/// Seed of sample `index` in a batch keyed by `base_seed`.
pub fn sample_seed(base_seed: u64, index: u64) -> u64 {
    rng::derive(base_seed, index)
}

struct Outcome {
    tau: f64,
    side: i8,
    left: bool,
}

/// Which equation is stepped: the original one or its rescaled twin.
#[derive(Clone, Copy)]
enum Frame {
    Original,
    Rescaled,
}

fn run(fam: &PotentialFamily, eps: f64, x0: f64, a: f64, policy: &StepPolicy, seed: u64, frame: Frame) -> Result<(Outcome, u64)> {
    let te = fam.model.time_exponent();
    let c = eps.powf(2.0 / fam.model.d as f64);
    let time_scale = eps.powf(te);
    let h_phys = policy.h / time_scale;
    let odd = fam.model.is_odd();
    let guard = fam.left_guard(x0);
    // Original frame works in (x, t); the rescaled one in (y = x/c, s = t·ε^{te}).
    let (unit, clock) = match frame {
        Frame::Original => (1.0, 1.0),
        Frame::Rescaled => (c, time_scale),
    };
    let (hi, lo) = (a / unit, guard / unit);
    let mut pos = x0 / unit;
    let mut t = 0.0;
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    for step in 1..=policy.max_steps {
        let x = pos * unit;
        let dt = h_phys.min(policy.kappa / fam.u_second(x, eps).abs());
        let xi: f64 = g.sample(StandardNormal);
        let (drift, ds, noise) = match frame {
            Frame::Original => (-fam.u_prime(x, eps), dt, eps * dt.sqrt()),
            Frame::Rescaled => (fam.rescaled_drift(pos, eps), dt * clock, (dt * clock).sqrt()),
        };
        let next = pos + drift * ds + noise * xi;
        let hit = |level: f64| (level - pos) / (next - pos);
        let done = if odd {
            if next >= hi {
                Some(Outcome { tau: t + hit(hi) * ds, side: 1, left: false })
            } else if next <= lo {
                Some(Outcome { tau: t + hit(lo) * ds, side: -1, left: true })
            } else {
                None
            }
        } else if next >= hi {
            Some(Outcome { tau: t + hit(hi) * ds, side: 1, left: false })
        } else if next <= -hi {
            Some(Outcome { tau: t + hit(-hi) * ds, side: -1, left: false })
        } else {
            None
        };
        if let Some(o) = done {
            return Ok((o, step));
        }
        t += ds;
        pos = next;
    }
    Err(Error::StepBudget { budget: policy.max_steps, index: 0 })
}

fn checked(fam: &PotentialFamily, eps: f64, x0: f64, a: f64, policy: &StepPolicy) -> Result<()> {
    fam.check_eps(eps)?;
    fam.check_levels(x0, a)?;
    policy.validate()
}

/// A single transit from `x0` to `a` (or `±a`) driven by the stream keyed by `seed`.
pub fn simulate_transit(fam: &PotentialFamily, eps: f64, x0: f64, a: f64, policy: &StepPolicy, seed: u64) -> Result<TransitSample> {
    checked(fam, eps, x0, a, policy)?;
    let (o, _) = run(fam, eps, x0, a, policy, seed, Frame::Original)?;
    let scale = eps.powf(fam.model.time_exponent());
    Ok(TransitSample { seed, epsilon: eps, x0, a, tau_raw: o.tau, tau_rescaled: scale * o.tau, exited_left: o.left, exit_side: o.side })
}

/// The same transit computed on the rescaled equation `dY = −V'_ε(Y)ds + dB`
/// with identical Gaussian increments. Returns the exit time in rescaled units.
pub fn simulate_rescaled_transit(fam: &PotentialFamily, eps: f64, x0: f64, a: f64, policy: &StepPolicy, seed: u64) -> Result<f64> {
    checked(fam, eps, x0, a, policy)?;
    Ok(run(fam, eps, x0, a, policy, seed, Frame::Rescaled)?.0.tau)
}

/// `n` transits; sample `i` uses `sample_seed(base_seed, i)`.
pub fn batch_transits(fam: &PotentialFamily, eps: f64, x0: f64, a: f64, policy: &StepPolicy, n: usize, base_seed: u64) -> Result<Vec<TransitSample>> {
    if n == 0 {
        return Err(param("n", "must be at least 1"));
    }
    checked(fam, eps, x0, a, policy)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            simulate_transit(fam, eps, x0, a, policy, sample_seed(base_seed, i)).map_err(|e| match e {
                Error::StepBudget { budget, .. } => Error::StepBudget { budget, index: i },
                other => other,
            })
        })
        .collect()
}

/// Fraction of samples that left through the guard.
pub fn exit_left_frequency(samples: &[TransitSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.exited_left).count() as f64 / samples.len() as f64
}

/// Rescaled times of the samples that exited at `a` (or `±a`).
pub fn rescaled_times(samples: &[TransitSample]) -> Vec<f64> {
    samples.iter().filter(|s| !s.exited_left).map(|s| s.tau_rescaled).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_values() {
        let s = builtin_family("sine", 0.0).unwrap();
        assert!((s.u(std::f64::consts::PI, 0.1) + std::f64::consts::PI).abs() < 1e-15);
        let c = builtin_family("cos2", 0.0).unwrap();
        assert!((c.u(std::f64::consts::PI, 0.1) + 4.0).abs() < 1e-15);
        assert!(matches!(builtin_family("tent", 0.0), Err(Error::UnknownFamily(_))));
        assert!(builtin_family("sine", 1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for kind in FamilyKind::ALL {
            let f = family(kind, 0.7).or_else(|_| family(kind, 0.0)).unwrap();
            for x in [-1.3, -0.2, 0.4, 1.9] {
                let eps = 0.1;
                let d1 = (f.u(x + h, eps) - f.u(x - h, eps)) / (2.0 * h);
                let d2 = (f.u_prime(x + h, eps) - f.u_prime(x - h, eps)) / (2.0 * h);
                assert!((d1 - f.u_prime(x, eps)).abs() < 1e-8, "{kind} {x}");
                assert!((d2 - f.u_second(x, eps)).abs() < 1e-8, "{kind} {x}");
            }
        }
    }

    #[test]
    fn polynomial_families_are_self_similar() {
        for name in ["cubic", "quartic"] {
            let f = builtin_family(name, 0.0).unwrap();
            assert!(f.rescaled_residual(1e-3, 3.0, 200) <= 1e-9);
        }
    }

    #[test]
    fn residual_and_sign_checks_hold_up_to_eps_max() {
        for kind in FamilyKind::ALL {
            let f = family(kind, 1.0).or_else(|_| family(kind, 0.0)).unwrap();
            for eps in [f.eps_max, 0.1, 0.01] {
                if eps > f.eps_max {
                    continue;
                }
                assert!(f.rescaled_residual(eps, 1.0, 400) <= RESIDUAL_TOL, "{kind} {eps}");
                assert!(f.sign_condition_margin(eps, 2000) >= 1.0, "{kind} {eps}: {}", f.sign_condition_margin(eps, 2000));
            }
        }
    }

    #[test]
    fn tilt_conventions() {
        assert_eq!(family(FamilyKind::SineTilted, 0.5).unwrap().model.mu, 1.0);
        assert_eq!(family(FamilyKind::Cos2Tilted, 0.5).unwrap().model.mu, 0.5);
    }

    #[test]
    fn guard_levels() {
        let s = builtin_family("sine", 0.0).unwrap();
        assert!((s.left_guard(-5.0) - 0.5 * (-5.0 - s.b)).abs() < 1e-15);
        assert_eq!(builtin_family("cubic", 0.0).unwrap().left_guard(-5.0), -10.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = builtin_family("sine", 0.0).unwrap();
        let p = StepPolicy::default();
        let a = simulate_transit(&s, 0.1, -5.0, 5.0, &p, 42).unwrap();
        let b = simulate_transit(&s, 0.1, -5.0, 5.0, &p, 42).unwrap();
        assert_eq!(a.tau_raw.to_bits(), b.tau_raw.to_bits());
        assert_eq!(a.tau_rescaled, 0.1f64.powf(2.0 / 3.0) * a.tau_raw);
    }

    #[test]
    fn batch_of_one_matches_single() {
        let s = builtin_family("cos2", 0.0).unwrap();
        let p = StepPolicy::default();
        let b = batch_transits(&s, 0.1, 0.0, 2.0, &p, 1, 9).unwrap();
        let one = simulate_transit(&s, 0.1, 0.0, 2.0, &p, sample_seed(9, 0)).unwrap();
        assert_eq!(b[0], one);
    }

    #[test]
    fn rescaled_twin_gives_the_same_time() {
        let p = StepPolicy::default();
        for (name, x0, a) in [("sine", -5.0, 5.0), ("cos2", 0.0, 2.0), ("cubic", -5.0, 5.0)] {
            let f = builtin_family(name, 0.0).unwrap();
            for seed in 0..5 {
                let s = simulate_transit(&f, 0.1, x0, a, &p, seed).unwrap();
                let r = simulate_rescaled_transit(&f, 0.1, x0, a, &p, seed).unwrap();
                assert!((s.tau_rescaled - r).abs() < 1e-8 * r, "{name} {} {r}", s.tau_rescaled);
            }
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let s = builtin_family("sine", 0.0).unwrap();
        let p = StepPolicy::default();
        assert!(simulate_transit(&s, 0.5, -5.0, 5.0, &p, 1).is_err());
        assert!(simulate_transit(&s, 0.1, 1.0, 5.0, &p, 1).is_err());
        assert!(simulate_transit(&s, 0.1, -5.0, 7.0, &p, 1).is_err());
        assert!(batch_transits(&s, 0.1, -5.0, 5.0, &p, 0, 1).is_err());
        let tight = StepPolicy { max_steps: 3, ..p };
        assert!(matches!(batch_transits(&s, 0.1, -5.0, 5.0, &tight, 2, 1), Err(Error::StepBudget { .. })));
    }
}
