//! The ten-criterion validation suite.
//!
//! Shared by `transit validate` and the `acceptance` test target. Limit-law
//! sample pools, spectra and density tables are computed once per model and
//! reused across criteria. Every verdict is a pure function of the seeds, so
//! two runs produce identical reports; wall-clock times are kept apart from
//! the report.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use transit_lab::asymptotics::{self, AsymptoticConstants, ConstantCheck};
use transit_lab::density::{self, DensityTable, InversionControls};
use transit_lab::finite_eps_sim::{self, FamilyKind, StepPolicy};
use transit_lab::laplace_ode::{self, Controls};
use transit_lab::limit_sampler::{batch_values, LimitSampleConfig, LimitSampler};
use transit_lab::spectrum::{self, SpectralData, SPECTRAL_ORACLE_JSON};
use transit_lab::{rng, stats, Complex64, ModelSpec};

/// Reference values the suite is judged against.
pub mod reference {
    /// Mean and standard deviation of `T_{3,0}`.
    pub const MEAN_3_0: f64 = 9.952;
    pub const SD_3_0: f64 = 5.74;
    /// `c(0)` and `c(π/2)` for `d = 3`.
    pub const C_ZERO_3: f64 = 3.49607;
    pub const C_HALF_PI_3: f64 = 1.33789;
    /// `C_{2/3}` and `C_{1/3}` for `d = 4`.
    pub const C23: f64 = 1.6693;
    pub const C13: f64 = 0.5432;
}

/// The four models of the cross-checks.
pub const MODELS: [(u32, f64); 4] = [(3, 0.0), (4, 0.0), (3, 1.0), (4, -1.0)];

/// Pass thresholds of every criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub mc_mean: f64,
    pub mc_sd: f64,
    pub density_mean: f64,
    pub density_sd: f64,
    pub c_beta: f64,
    pub c_power: f64,
    pub constant_agreement: f64,
    pub eta_rel: f64,
    pub residue_rel: f64,
    pub tail_slope_rel: f64,
    pub tail_prefactor_rel: f64,
    pub wkb_final: f64,
    pub bootstrap_level: f64,
    pub parseval_rel: f64,
    pub ks_inversion: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mc_mean: 0.05,
            mc_sd: 0.06,
            density_mean: 0.02,
            density_sd: 0.05,
            c_beta: 1e-4,
            c_power: 2e-4,
            constant_agreement: 1e-7,
            eta_rel: 1e-6,
            residue_rel: 0.03,
            tail_slope_rel: 0.05,
            tail_prefactor_rel: 0.10,
            wkb_final: 0.1,
            bootstrap_level: 0.99,
            parseval_rel: 1e-3,
            ks_inversion: 0.004,
        }
    }
}

impl Tolerances {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        let v = serde_json::to_value(self).expect("serialisable");
        v.as_object().expect("object").iter().map(|(k, x)| (k.clone(), x.as_f64().expect("number"))).collect()
    }
}

/// Sizes and seeds of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSettings {
    pub seed: u64,
    pub criteria: Vec<u32>,
    pub n_mc: usize,
    pub n_mc_tilted: usize,
    pub n_converge: usize,
    pub bootstrap: usize,
    pub constants_perturbation: f64,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            seed: 7,
            criteria: (1..=10).collect(),
            n_mc: 500_000,
            n_mc_tilted: 50_000,
            n_converge: 20_000,
            bootstrap: 1000,
            constants_perturbation: 0.0,
        }
    }
}

/// One measured quantity and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub pass: bool,
}

impl Measurement {
    fn new(label: impl Into<String>, value: f64, pass: bool) -> Self {
        Self { label: label.into(), value, reference: None, tolerance: None, interval: None, p_value: None, method: None, pass }
    }

    /// `|value − reference| ≤ tol`.
    fn abs(label: impl Into<String>, value: f64, reference: f64, tol: f64) -> Self {
        Self { reference: Some(reference), tolerance: Some(tol), ..Self::new(label, value, (value - reference).abs() <= tol) }
    }

    /// `|value/reference − 1| ≤ tol`; `value` is the relative error.
    fn rel(label: impl Into<String>, estimate: f64, reference: f64, tol: f64) -> Self {
        let r = (estimate - reference).abs() / reference.abs();
        Self { reference: Some(reference), tolerance: Some(tol), ..Self::new(label, r, r <= tol) }
    }

    /// Reported only; never fails.
    fn info(label: impl Into<String>, value: f64) -> Self {
        Self { method: Some("report only".into()), ..Self::new(label, value, true) }
    }

    fn with_method(mut self, m: impl Into<String>) -> Self {
        self.method = Some(m.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub measurements: Vec<Measurement>,
}

/// Machine-readable verdicts of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub settings: SuiteSettings,
    pub tolerances: Tolerances,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

/// A report plus the wall-clock seconds of each criterion.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: StatsReport,
    pub seconds: Vec<(u32, f64)>,
}

pub fn title(id: u32) -> &'static str {
    match id {
        1 => "limit-law moments from Monte Carlo (d=3, mu=0)",
        2 => "limit-law moments from the inverted density",
        3 => "asymptotic constants and two-way agreement",
        4 => "ground-state eigenvalue against the finite-difference oracle",
        5 => "pole residue from probes near lambda0",
        6 => "exponential tail of Monte Carlo samples",
        7 => "transform against its large-|lambda| asymptotics",
        8 => "transform inside the bootstrap interval of the empirical MGF",
        9 => "convergence of rescaled finite-eps transit times",
        10 => "inversion self-consistency",
        _ => "unknown criterion",
    }
}

/// One entry of the finite-difference eigenvalue oracle.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct OracleEntry {
    pub d: u32,
    pub mu: f64,
    pub eta0: f64,
    pub eta0_coarse: f64,
    pub eta0_fine: f64,
}

pub fn spectral_oracle() -> Vec<OracleEntry> {
    #[derive(Deserialize)]
    struct File {
        models: Vec<OracleEntry>,
    }
    serde_json::from_str::<File>(SPECTRAL_ORACLE_JSON).expect("oracle file is valid").models
}

/// Oracle `η₀` of `model`, if tabulated.
pub fn oracle_eta0(model: &ModelSpec) -> Option<f64> {
    spectral_oracle().into_iter().find(|e| e.d == model.d && e.mu == model.mu).map(|e| e.eta0)
}

/// Two-way checks with every closed form scaled by `1 + perturbation`.
pub fn perturbed_checks(k: &AsymptoticConstants, perturbation: f64) -> Vec<ConstantCheck> {
    k.checks
        .iter()
        .map(|c| {
            let cf = c.closed_form * (1.0 + perturbation);
            ConstantCheck { name: c.name.clone(), closed_form: cf, quadrature: c.quadrature, discrepancy: (cf - c.quadrature).abs() }
        })
        .collect()
}

/// Same scaling as the library's own agreement test.
pub fn relative_discrepancy(c: &ConstantCheck) -> f64 {
    c.discrepancy / c.closed_form.abs().max(1.0)
}

/// Value at `δ = 0` of the quadratic through three points.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for (i, &(xi, yi)) in points.iter().enumerate() {
        let mut w = 1.0;
        for (j, &(xj, _)) in points.iter().enumerate() {
            if i != j {
                w *= -xj / (xi - xj);
            }
        }
        acc += w * yi;
    }
    acc
}

fn model(d: u32, mu: f64) -> ModelSpec {
    ModelSpec::new(d, mu).expect("suite models are valid")
}

fn key(m: &ModelSpec) -> (u32, u64) {
    (m.d, m.mu.to_bits())
}

type Cache<T> = Mutex<BTreeMap<(u32, u64), Arc<T>>>;

/// Suite state: settings plus lazily computed per-model artefacts.
pub struct Suite {
    pub tol: Tolerances,
    pub settings: SuiteSettings,
    pools: Cache<Vec<f64>>,
    spectra: Cache<SpectralData>,
    tables: Cache<DensityTable>,
}

const TAIL_WINDOW: (f64, f64) = (0.7, 0.999);
const POLE_DELTAS: [f64; 3] = [0.1, 0.05, 0.025];
const WKB_LAMBDAS: [f64; 3] = [-50.0, -200.0, -800.0];
const MGF_LAMBDAS: [f64; 3] = [-1.0, -0.5, -0.1];
const PARSEVAL_LAMBDAS: [f64; 2] = [-0.5, -0.1];
const CONVERGE_EPS: [f64; 3] = [0.2, 0.1, 0.05];

impl Suite {
    pub fn new(tol: Tolerances, settings: SuiteSettings) -> Self {
        Self { tol, settings, pools: Mutex::default(), spectra: Mutex::default(), tables: Mutex::default() }
    }

    fn cached<T>(cache: &Cache<T>, m: &ModelSpec, make: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<Arc<T>> {
        if let Some(v) = cache.lock().expect("cache lock").get(&key(m)) {
            return Ok(v.clone());
        }
        let v = Arc::new(make()?);
        cache.lock().expect("cache lock").insert(key(m), v.clone());
        Ok(v)
    }

    /// Limit-law draws of `m`; the stream depends only on the base seed and the model.
    pub fn pool(&self, m: &ModelSpec) -> anyhow::Result<Arc<Vec<f64>>> {
        let n = if m.mu == 0.0 { self.settings.n_mc } else { self.settings.n_mc_tilted };
        let seed = rng::derive(rng::derive(self.settings.seed, m.d as u64), m.mu.to_bits());
        Self::cached(&self.pools, m, || {
            let sampler = LimitSampler::new(LimitSampleConfig::direct(*m))?;
            Ok(batch_values(&sampler, n, seed)?)
        })
    }

    pub fn spectrum(&self, m: &ModelSpec) -> anyhow::Result<Arc<SpectralData>> {
        Self::cached(&self.spectra, m, || Ok(spectrum::spectral_data(m, 1e-12)?))
    }

    pub fn density(&self, m: &ModelSpec) -> anyhow::Result<Arc<DensityTable>> {
        let sp = self.spectrum(m)?;
        Self::cached(&self.tables, m, || {
            let grid = density::default_t_grid(&sp, 1e-7, 4001)?;
            Ok(density::invert(m, &grid, &InversionControls::default())?)
        })
    }

    /// Runs the configured criteria in order.
    pub fn run(&self) -> SuiteRun {
        let mut criteria = Vec::new();
        let mut seconds = Vec::new();
        let mut ids = self.settings.criteria.clone();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            let t0 = Instant::now();
            let r = self.criterion(id);
            seconds.push((id, t0.elapsed().as_secs_f64()));
            criteria.push(r);
        }
        let pass = criteria.iter().all(|c| c.pass);
        SuiteRun { report: StatsReport { settings: self.settings.clone(), tolerances: self.tol, criteria, pass }, seconds }
    }

    /// Runs one criterion; module failures become a failed verdict.
    pub fn criterion(&self, id: u32) -> CriterionReport {
        let out = match id {
            1 => self.c1(),
            2 => self.c2(),
            3 => self.c3(),
            4 => self.c4(),
            5 => self.c5(),
            6 => self.c6(),
            7 => self.c7(),
            8 => self.c8(),
            9 => self.c9(),
            10 => self.c10(),
            _ => Err(anyhow::anyhow!("no criterion {id}")),
        };
        match out {
            Ok(measurements) => CriterionReport { id, title: title(id), pass: measurements.iter().all(|m| m.pass), error: None, measurements },
            Err(e) => CriterionReport { id, title: title(id), pass: false, error: Some(format!("{e:#}")), measurements: Vec::new() },
        }
    }

    fn c1(&self) -> anyhow::Result<Vec<Measurement>> {
        let pool = self.pool(&model(3, 0.0))?;
        let (m, sd) = stats::mean_sd(&pool);
        Ok(vec![
            Measurement::abs("mean", m, reference::MEAN_3_0, self.tol.mc_mean),
            Measurement::abs("sd", sd, reference::SD_3_0, self.tol.mc_sd),
            Measurement::info("standard error of the mean", sd / (pool.len() as f64).sqrt()),
        ])
    }

    fn c2(&self) -> anyhow::Result<Vec<Measurement>> {
        let t = self.density(&model(3, 0.0))?;
        Ok(vec![
            Measurement::abs("mean", t.mean, reference::MEAN_3_0, self.tol.density_mean),
            Measurement::abs("sd", t.sd, reference::SD_3_0, self.tol.density_sd),
        ])
    }

    fn c3(&self) -> anyhow::Result<Vec<Measurement>> {
        let k3 = asymptotics::constants(&model(3, 0.0))?;
        let k4 = asymptotics::constants(&model(4, 0.0))?;
        let mut out = vec![
            Measurement::abs("c(0), d=3", k3.c_zero, reference::C_ZERO_3, self.tol.c_beta),
            Measurement::abs("c(pi/2), d=3", k3.c_half_pi, reference::C_HALF_PI_3, self.tol.c_beta),
            Measurement::abs("C_2/3, d=4", k4.c23.unwrap_or(f64::NAN), reference::C23, self.tol.c_power),
            Measurement::abs("C_1/3, d=4", k4.c13.unwrap_or(f64::NAN), reference::C13, self.tol.c_power),
        ];
        for (d, k) in [(3, &k3), (4, &k4)] {
            for c in perturbed_checks(k, self.settings.constants_perturbation) {
                let r = relative_discrepancy(&c);
                out.push(Measurement {
                    tolerance: Some(self.tol.constant_agreement),
                    ..Measurement::new(format!("closed form vs quadrature, {} (d={d})", c.name), r, r <= self.tol.constant_agreement)
                });
            }
        }
        Ok(out)
    }

    fn c4(&self) -> anyhow::Result<Vec<Measurement>> {
        MODELS
            .iter()
            .map(|&(d, mu)| {
                let m = model(d, mu);
                let eta = spectrum::find_eigenvalues(&m, 1, None, 1e-12)?[0];
                let oracle = oracle_eta0(&m).ok_or_else(|| anyhow::anyhow!("no oracle entry for ({d}, {mu})"))?;
                Ok(Measurement::rel(format!("eta0 ({d},{mu})"), eta, oracle, self.tol.eta_rel))
            })
            .collect()
    }

    fn c5(&self) -> anyhow::Result<Vec<Measurement>> {
        MODELS
            .iter()
            .map(|&(d, mu)| {
                let m = model(d, mu);
                let sp = self.spectrum(&m)?;
                let probes = spectrum::pole_probes(&m, sp.lambda0, &POLE_DELTAS)?;
                let c = extrapolate_to_zero(&probes);
                Ok(Measurement::rel(format!("extrapolated residue ({d},{mu})"), c, sp.residue_c, self.tol.residue_rel)
                    .with_method("quadratic extrapolation of delta*Phi(lambda0-delta), delta in {0.1,0.05,0.025}"))
            })
            .collect()
    }

    fn c6(&self) -> anyhow::Result<Vec<Measurement>> {
        let mut out = Vec::new();
        for (d, mu) in [(3, 0.0), (4, 0.0)] {
            let m = model(d, mu);
            let sp = self.spectrum(&m)?;
            let pool = self.pool(&m)?;
            let fit = stats::tail_fit(&pool, TAIL_WINDOW.0, TAIL_WINDOW.1)?;
            let method = format!("least squares of ln S on quantiles [{}, {}] of {} draws", TAIL_WINDOW.0, TAIL_WINDOW.1, pool.len());
            out.push(Measurement::rel(format!("tail slope vs lambda0 ({d},{mu})"), fit.lambda_hat, sp.lambda0, self.tol.tail_slope_rel).with_method(method.clone()));
            out.push(Measurement::rel(format!("tail prefactor vs residue ({d},{mu})"), fit.c_hat, sp.residue_c, self.tol.tail_prefactor_rel).with_method(method));
        }
        Ok(out)
    }

    fn c7(&self) -> anyhow::Result<Vec<Measurement>> {
        let mut out = Vec::new();
        for (d, order) in [(3, 0.25), (4, 1.0 / 3.0)] {
            let m = model(d, 0.0);
            let mut errs = Vec::new();
            for &l in &WKB_LAMBDAS {
                let lp = laplace_ode::log_phi(&m, Complex64::new(l, 0.0), &Controls::default())?.re;
                let lw = asymptotics::log_wkb_phi_reference(&m, l)?;
                let e = ((lp - lw).exp() - 1.0).abs();
                errs.push(e);
                out.push(Measurement::info(format!("|Phi/Phi_WKB - 1| at lambda={l} (d={d})"), e));
            }
            let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
            out.push(Measurement::new(format!("error decreases along lambda (d={d})"), f64::from(u8::from(decreasing)), decreasing));
            let last = *errs.last().expect("three points");
            out.push(Measurement { tolerance: Some(self.tol.wkb_final), ..Measurement::new(format!("error at lambda=-800 (d={d})"), last, last <= self.tol.wkb_final) });
            let observed = (errs[0] / last).ln() / (WKB_LAMBDAS[2] / WKB_LAMBDAS[0]).ln();
            // The error bound is O(|λ|^{-order}); faster decay is consistent with it.
            out.push(Measurement { reference: Some(order), ..Measurement::new(format!("observed decay order at least the bound order (d={d})"), observed, observed >= order) });
        }
        Ok(out)
    }

    fn c8(&self) -> anyhow::Result<Vec<Measurement>> {
        let mut out = Vec::new();
        for (i, &(d, mu)) in MODELS.iter().enumerate() {
            let m = model(d, mu);
            let pool = self.pool(&m)?;
            for (j, &l) in MGF_LAMBDAS.iter().enumerate() {
                let phi = laplace_ode::phi(&m, Complex64::new(l, 0.0), &Controls::default())?.re;
                let vals: Vec<f64> = pool.iter().map(|t| (l * t).exp()).collect();
                let seed = rng::derive(self.settings.seed, 800 + (i * 10 + j) as u64);
                let ci = stats::bootstrap_mean(&vals, self.settings.bootstrap, self.tol.bootstrap_level, seed)?;
                out.push(Measurement {
                    reference: Some(ci.estimate),
                    interval: Some((ci.lo, ci.hi)),
                    method: Some(format!("percentile bootstrap, B={}, level={}, seed={seed}, n={}", ci.replicates, ci.level, pool.len())),
                    ..Measurement::new(format!("Phi_ODE({l}) ({d},{mu})"), phi, ci.lo <= phi && phi <= ci.hi)
                });
            }
        }
        Ok(out)
    }

    fn c9(&self) -> anyhow::Result<Vec<Measurement>> {
        let mut out = Vec::new();
        let policy = StepPolicy::default();
        for kind in [FamilyKind::Sine, FamilyKind::Cos2] {
            let fam = finite_eps_sim::family(kind, 0.0)?;
            let reference = self.pool(&fam.model)?;
            // Common random numbers across ε.
            let base = rng::derive(self.settings.seed, 900 + kind.degree() as u64);
            let mut ks = Vec::new();
            let mut left = Vec::new();
            for &eps in &CONVERGE_EPS {
                let s = finite_eps_sim::batch_transits(&fam, eps, fam.x0, fam.a, &policy, self.settings.n_converge, base)?;
                let r = stats::ks_two_sample(&finite_eps_sim::rescaled_times(&s), &reference);
                out.push(Measurement {
                    p_value: Some(r.p_value),
                    method: Some(format!("two-sample KS, n={} vs {} limit draws, asymptotic Kolmogorov p-value", s.len(), reference.len())),
                    ..Measurement::info(format!("KS at eps={eps} ({kind})"), r.statistic)
                });
                ks.push(r.statistic);
                if fam.model.is_odd() {
                    let f = finite_eps_sim::exit_left_frequency(&s);
                    out.push(Measurement::info(format!("left-exit frequency at eps={eps} ({kind})"), f));
                    left.push(f);
                }
            }
            let ks_ok = ks.windows(2).all(|w| w[1] <= w[0]);
            out.push(Measurement::new(format!("KS non-increasing in eps ({kind})"), f64::from(u8::from(ks_ok)), ks_ok));
            if !left.is_empty() {
                let ok = left.windows(2).all(|w| w[1] <= w[0]);
                out.push(Measurement::new(format!("left-exit frequency non-increasing ({kind})"), f64::from(u8::from(ok)), ok));
            }
        }
        Ok(out)
    }

    fn c10(&self) -> anyhow::Result<Vec<Measurement>> {
        let mut out = Vec::new();
        for (d, mu) in [(3, 0.0), (4, 0.0)] {
            let m = model(d, mu);
            let t = self.density(&m)?;
            for p in density::parseval_check(&t, &PARSEVAL_LAMBDAS, &Controls::default())? {
                out.push(Measurement {
                    reference: Some(p.from_transform),
                    tolerance: Some(self.tol.parseval_rel),
                    ..Measurement::new(format!("int f e^(lambda t) at lambda={} ({d},{mu}), relative error", p.lambda), p.rel_err, p.rel_err <= self.tol.parseval_rel)
                });
            }
            let pool = self.pool(&m)?;
            let ks = stats::ks_one_sample(&pool, |x| t.cdf_at(x));
            out.push(Measurement {
                tolerance: Some(self.tol.ks_inversion),
                p_value: Some(ks.p_value),
                method: Some(format!("one-sample KS against the inverted CDF, n={}", pool.len())),
                ..Measurement::new(format!("KS(inversion, Monte Carlo) ({d},{mu})"), ks.statistic, ks.statistic <= self.tol.ks_inversion)
            });
        }
        Ok(out)
    }
}
