//! Subcommand implementations.
//!
//! Each command validates the resolved config, computes, writes one document
//! with a provenance header and reports whether its checks passed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use transit_lab::asymptotics::{self, AsymptoticConstants};
use transit_lab::density::{self, DensityTable, InversionControls};
use transit_lab::finite_eps_sim::{self, FamilyKind};
use transit_lab::laplace_ode::{self, Controls};
use transit_lab::limit_sampler::{batch_t, batch_values, LimitSampleConfig, LimitSampler, Scheme};
use transit_lab::spectrum::{self, SpectralData};
use transit_lab::{rng, stats, Complex64, ModelSpec, ScaleTable};

use crate::config::{Command, DensityView, ExperimentConfig};
use crate::output::{csv_document, emit, json_document, write_atomic};
use crate::provenance::{tolerances, Provenance};
use crate::suite::{self, Suite, SuiteSettings, Tolerances};

/// Verdict of a command: exit code 0 iff `pass`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    /// Human-readable lines for standard error.
    pub notes: Vec<String>,
}

impl Outcome {
    fn pass(notes: Vec<String>) -> Self {
        Self { pass: true, notes }
    }
}

/// Runs `cmd` with a config that has already been validated.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match cmd {
        Command::Sample => sample(cfg),
        Command::Converge => converge(cfg),
        Command::Laplace => laplace(cfg),
        Command::Spectrum => spectrum_cmd(cfg),
        Command::Density => density_cmd(cfg),
        Command::Constants => constants(cfg),
        Command::Validate => validate(cfg),
    }
}

fn out_path(cfg: &ExperimentConfig) -> Option<&Path> {
    cfg.out.as_deref()
}

#[derive(Serialize)]
struct LimitRow {
    index: u64,
    value: f64,
    steps: u64,
    boundary_correction: f64,
}

fn limit_config(cfg: &ExperimentConfig, model: ModelSpec) -> LimitSampleConfig {
    let s = &cfg.sample;
    let mut c = match s.scheme {
        Scheme::DirectSde => LimitSampleConfig::direct(model),
        Scheme::TimeChange => LimitSampleConfig::time_change(model),
    };
    c.dt = s.dt;
    if let Some(k) = s.kappa {
        c.kappa = k;
    }
    c
}

fn sample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let s = &cfg.sample;
    if let Some(name) = &s.family {
        let kind: FamilyKind = name.parse()?;
        let fam = finite_eps_sim::family(kind, model.mu)?;
        let (eps, x0, a) = (s.eps[0], s.x0.unwrap_or(fam.x0), s.a.unwrap_or(fam.a));
        let rows = finite_eps_sim::batch_transits(&fam, eps, x0, a, &s.policy, s.n, cfg.seed).context("finite-eps transits")?;
        let prov = Provenance::new(Command::Sample, cfg, tolerances([("h", s.policy.h), ("kappa", s.policy.kappa)]));
        emit(out_path(cfg), &csv_document(&prov, &rows)?)?;
        let (m, sd) = stats::mean_sd(&finite_eps_sim::rescaled_times(&rows));
        return Ok(Outcome::pass(vec![format!(
            "{} transits of `{kind}` at eps={eps}: rescaled mean {m:.5}, sd {sd:.5}, left-exit frequency {:.5}",
            rows.len(),
            finite_eps_sim::exit_left_frequency(&rows)
        )]));
    }
    let lc = limit_config(cfg, model);
    let sampler = LimitSampler::new(lc)?;
    let draws = batch_t(&sampler, s.n, cfg.seed).context("limit-law sampling")?;
    let rows: Vec<LimitRow> = draws.iter().map(|d| LimitRow { index: d.index, value: d.value, steps: d.steps, boundary_correction: d.boundary_correction }).collect();
    let prov = Provenance::new(Command::Sample, cfg, tolerances([("dt", lc.dt), ("kappa", lc.kappa)]));
    emit(out_path(cfg), &csv_document(&prov, &rows)?)?;
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (m, sd) = stats::mean_sd(&values);
    Ok(Outcome::pass(vec![format!(
        "{} draws of T(d={}, mu={}) by {}: mean {m:.5} (se {:.5}), sd {sd:.5}",
        rows.len(),
        model.d,
        model.mu,
        lc.scheme,
        sd / (rows.len() as f64).sqrt()
    )]))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeEntry {
    pub eps: f64,
    pub n: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub rescaled_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_exit_frequency: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeReport {
    pub family: String,
    pub d: u32,
    pub mu: f64,
    pub x0: f64,
    pub a: f64,
    pub limit_n: usize,
    pub limit_seed: u64,
    pub transit_seed: u64,
    pub ks_method: &'static str,
    pub entries: Vec<ConvergeEntry>,
    pub ks_non_increasing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_exit_non_increasing: Option<bool>,
    pub pass: bool,
}

fn converge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.converge;
    let kind: FamilyKind = c.family.parse()?;
    let fam = finite_eps_sim::family(kind, cfg.model()?.mu)?;
    anyhow::ensure!(fam.model.d == cfg.model.d, "family `{kind}` has degree {}, config has d = {}", fam.model.d, cfg.model.d);
    let mut eps = c.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let limit_seed = rng::derive(cfg.seed, 1);
    let transit_seed = rng::derive(cfg.seed, 2);
    let reference = batch_values(&LimitSampler::new(LimitSampleConfig::direct(fam.model))?, c.limit_n, limit_seed).context("limit-law reference sample")?;
    let mut entries = Vec::new();
    for &e in &eps {
        let s = finite_eps_sim::batch_transits(&fam, e, fam.x0, fam.a, &c.policy, c.n, transit_seed).with_context(|| format!("transits at eps = {e}"))?;
        let t = finite_eps_sim::rescaled_times(&s);
        let ks = stats::ks_two_sample(&t, &reference);
        entries.push(ConvergeEntry {
            eps: e,
            n: s.len(),
            ks_statistic: ks.statistic,
            ks_p_value: ks.p_value,
            rescaled_mean: stats::mean_sd(&t).0,
            left_exit_frequency: fam.model.is_odd().then(|| finite_eps_sim::exit_left_frequency(&s)),
        });
    }
    let ks_non_increasing = entries.windows(2).all(|w| w[1].ks_statistic <= w[0].ks_statistic);
    let left_exit_non_increasing = fam.model.is_odd().then(|| entries.windows(2).all(|w| w[1].left_exit_frequency <= w[0].left_exit_frequency));
    let pass = ks_non_increasing && left_exit_non_increasing.unwrap_or(true);
    let report = ConvergeReport {
        family: kind.to_string(),
        d: fam.model.d,
        mu: fam.model.mu,
        x0: fam.x0,
        a: fam.a,
        limit_n: reference.len(),
        limit_seed,
        transit_seed,
        ks_method: "two-sample KS, asymptotic Kolmogorov p-value",
        entries,
        ks_non_increasing,
        left_exit_non_increasing,
        pass,
    };
    let prov = Provenance::new(Command::Converge, cfg, tolerances([("h", c.policy.h), ("kappa", c.policy.kappa)]));
    emit(out_path(cfg), &json_document(&prov, &report)?)?;
    let mut notes: Vec<String> = report
        .entries
        .iter()
        .map(|e| format!("eps={:<6} KS={:.5} p={:.3e} mean={:.4}{}", e.eps, e.ks_statistic, e.ks_p_value, e.rescaled_mean, e.left_exit_frequency.map(|f| format!(" left={f:.5}")).unwrap_or_default()))
        .collect();
    notes.push(format!("KS non-increasing: {ks_non_increasing}"));
    Ok(Outcome { pass, notes })
}

#[derive(Serialize)]
struct LaplaceRow {
    lambda: f64,
    phi: f64,
    ln_phi: f64,
    err_estimate: f64,
    converged: bool,
}

fn laplace(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let controls = Controls { rtol: cfg.laplace.rtol, ..Default::default() }.with_error_estimate();
    let mut rows = Vec::new();
    for &l in &cfg.laplace.lambda {
        let ev = laplace_ode::shoot_g(&model, Complex64::new(2.0 * l, 0.0), &controls).with_context(|| format!("transform at lambda = {l}"))?;
        rows.push(LaplaceRow { lambda: l, phi: ev.phi.re, ln_phi: ev.log_phi().re, err_estimate: ev.err_estimate, converged: ev.converged });
    }
    let prov = Provenance::new(Command::Laplace, cfg, tolerances([("rtol", cfg.laplace.rtol)]));
    emit(out_path(cfg), &csv_document(&prov, &rows)?)?;
    let pass = rows.iter().all(|r| r.converged && r.phi.is_finite());
    Ok(Outcome { pass, notes: rows.iter().map(|r| format!("Phi({}) = {:.12e}", r.lambda, r.phi)).collect() })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub eta0_oracle: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize)]
struct SpectrumResult<'a> {
    spectrum: &'a SpectralData,
    oracle: Option<OracleComparison>,
}

fn spectrum_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let sp = spectrum::spectral_data(&model, cfg.spectrum.tol).context("spectral data")?;
    let oracle = suite::oracle_eta0(&model).map(|o| {
        let rel_err = (sp.eta0 - o).abs() / o;
        OracleComparison { eta0_oracle: o, rel_err, tolerance: cfg.spectrum.oracle_rtol, pass: rel_err <= cfg.spectrum.oracle_rtol }
    });
    let prov = Provenance::new(Command::Spectrum, cfg, tolerances([("tol", cfg.spectrum.tol), ("oracle_rtol", cfg.spectrum.oracle_rtol)]));
    emit(out_path(cfg), &json_document(&prov, &SpectrumResult { spectrum: &sp, oracle: oracle.clone() })?)?;
    let mut notes = vec![format!("eta0 = {:.15e}, lambda0 = {:.15e}, residue C = {:.9}", sp.eta0, sp.lambda0, sp.residue_c)];
    match &oracle {
        Some(o) => notes.push(format!("finite-difference oracle {:.15e}, relative error {:.2e}", o.eta0_oracle, o.rel_err)),
        None => notes.push("no oracle entry for this model".into()),
    }
    Ok(Outcome { pass: oracle.map_or(true, |o| o.pass), notes })
}

fn inversion_controls(cfg: &ExperimentConfig) -> InversionControls {
    let d = &cfg.density;
    InversionControls { s_min: d.s_min, intervals: d.intervals, trunc_tol: d.trunc_tol, ..Default::default() }
}

fn invert(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<(SpectralData, DensityTable)> {
    let sp = spectrum::spectral_data(model, 1e-12)?;
    let grid = density::default_t_grid(&sp, cfg.density.sf_floor, cfg.density.t_points)?;
    let table = density::invert(model, &grid, &inversion_controls(cfg)).with_context(|| format!("inverting d={} mu={}", model.d, model.mu))?;
    Ok((sp, table))
}

#[derive(Serialize)]
struct DensityRow {
    mu: f64,
    t: f64,
    f: f64,
    #[serde(rename = "F")]
    cdf: f64,
    #[serde(rename = "S")]
    sf: f64,
    neg_log_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub d: u32,
    pub mu: f64,
    pub mean: f64,
    pub sd: f64,
    pub mass: f64,
    pub min_f: f64,
    pub lambda0: f64,
    pub residue_c: f64,
    pub tail_lambda0_hat: f64,
    pub tail_c_hat: f64,
    pub s_max: f64,
    pub mass_ok: bool,
    pub cdf_monotone: bool,
}

fn summarize(sp: &SpectralData, t: &DensityTable, mass_tol: f64) -> DensitySummary {
    DensitySummary {
        d: t.model.d,
        mu: t.model.mu,
        mean: t.mean,
        sd: t.sd,
        mass: t.mass,
        min_f: t.min_f,
        lambda0: sp.lambda0,
        residue_c: sp.residue_c,
        tail_lambda0_hat: t.tail_fit.lambda0_hat,
        tail_c_hat: t.tail_fit.c_hat,
        s_max: t.s_max,
        mass_ok: (t.mass - 1.0).abs() <= mass_tol,
        cdf_monotone: t.cdf.windows(2).all(|w| w[1] >= w[0]),
    }
}

/// `<out stem>.summary.json` next to `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

#[derive(Serialize)]
struct HistogramRow {
    t_lo: f64,
    t_hi: f64,
    mc_density: f64,
    inversion_density: f64,
}

#[derive(Serialize)]
struct ScaleRow {
    mu: f64,
    y: f64,
    s: f64,
    w: f64,
}

fn density_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let dcfg = &cfg.density;
    let tol = tolerances([("trunc_tol", dcfg.trunc_tol), ("mass_tol", dcfg.mass_tol), ("sf_floor", dcfg.sf_floor), ("scale_tol", 1e-10)]);
    let prov = Provenance::new(Command::Density, cfg, tol);
    let models = cfg.models()?;
    let mut summaries = Vec::new();
    let mut notes = Vec::new();
    let bytes = match dcfg.view {
        DensityView::Table => {
            let mut rows = Vec::new();
            for m in &models {
                let (sp, t) = invert(cfg, m)?;
                for i in 0..t.t_grid.len() {
                    rows.push(DensityRow { mu: m.mu, t: t.t_grid[i], f: t.f[i], cdf: t.cdf[i], sf: t.sf[i], neg_log_s: -t.sf[i].ln() });
                }
                summaries.push(summarize(&sp, &t, dcfg.mass_tol));
            }
            csv_document(&prov, &rows)?
        }
        DensityView::Histogram => {
            let m = models[0];
            let (sp, t) = invert(cfg, &m)?;
            summaries.push(summarize(&sp, &t, dcfg.mass_tol));
            let mut x = batch_values(&LimitSampler::new(LimitSampleConfig::direct(m))?, dcfg.n, cfg.seed)?;
            x.sort_by(|a, b| a.total_cmp(b));
            let hi = x[((x.len() as f64) * 0.999) as usize];
            let width = hi / dcfg.bins as f64;
            let n = x.len() as f64;
            let rows: Vec<HistogramRow> = (0..dcfg.bins)
                .map(|b| {
                    let (lo, up) = (b as f64 * width, (b + 1) as f64 * width);
                    let count = x.partition_point(|&v| v < up) - x.partition_point(|&v| v < lo);
                    HistogramRow { t_lo: lo, t_hi: up, mc_density: count as f64 / (n * width), inversion_density: (t.cdf_at(up) - t.cdf_at(lo)) / width }
                })
                .collect();
            let ks = stats::ks_one_sample(&x, |v| t.cdf_at(v));
            notes.push(format!("KS(inversion, {} draws) = {:.5} (p = {:.3})", x.len(), ks.statistic, ks.p_value));
            csv_document(&prov, &rows)?
        }
        DensityView::Scale => {
            let mut rows = Vec::new();
            let (lo, hi) = dcfg.y_range;
            for m in &models {
                let table = ScaleTable::build(*m, 1e-10)?;
                for i in 0..dcfg.y_points {
                    let y = lo + (hi - lo) * i as f64 / (dcfg.y_points - 1) as f64;
                    let s = table.s(y);
                    rows.push(ScaleRow { mu: m.mu, y, s, w: table.speed_weight(s)? });
                }
                notes.push(format!("mu={}: s(inf) = {:.9}", m.mu, table.s_infinity));
            }
            csv_document(&prov, &rows)?
        }
    };
    emit(out_path(cfg), &bytes)?;
    for s in &summaries {
        notes.push(format!("mu={}: mean {:.5}, sd {:.5}, mass {:.8}, tail rate {:.6} (lambda0 {:.6})", s.mu, s.mean, s.sd, s.mass, s.tail_lambda0_hat, s.lambda0));
    }
    if let (Some(out), false) = (out_path(cfg), summaries.is_empty()) {
        write_atomic(&summary_path(out), &json_document(&prov, &summaries)?)?;
    }
    let pass = summaries.iter().all(|s| s.mass_ok && s.cdf_monotone);
    Ok(Outcome { pass, notes })
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementCheck {
    pub name: String,
    pub closed_form: f64,
    pub quadrature: f64,
    pub relative_discrepancy: f64,
    pub pass: bool,
}

#[derive(Serialize)]
struct ConstantsResult {
    constants: AsymptoticConstants,
    perturbation: f64,
    agreement: Vec<AgreementCheck>,
    pass: bool,
}

fn constants(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let k = asymptotics::constants(&model).context("asymptotic constants")?;
    let tol = cfg.constants.agreement_tol;
    let agreement: Vec<AgreementCheck> = suite::perturbed_checks(&k, cfg.constants.perturbation)
        .into_iter()
        .map(|c| {
            let r = suite::relative_discrepancy(&c);
            AgreementCheck { name: c.name, closed_form: c.closed_form, quadrature: c.quadrature, relative_discrepancy: r, pass: r <= tol }
        })
        .collect();
    let pass = agreement.iter().all(|a| a.pass);
    let notes = agreement.iter().map(|a| format!("{}: closed form {:.12} vs quadrature {:.12} ({})", a.name, a.closed_form, a.quadrature, if a.pass { "ok" } else { "MISMATCH" })).collect();
    let prov = Provenance::new(Command::Constants, cfg, tolerances([("agreement_tol", tol)]));
    emit(out_path(cfg), &json_document(&prov, &ConstantsResult { constants: k, perturbation: cfg.constants.perturbation, agreement, pass })?)?;
    Ok(Outcome { pass, notes })
}

/// Suite settings from the `[validate]` block.
pub fn suite_settings(cfg: &ExperimentConfig) -> SuiteSettings {
    let v = &cfg.validate;
    SuiteSettings {
        seed: cfg.seed,
        criteria: v.criteria.clone(),
        n_mc: v.n_mc,
        n_mc_tilted: v.n_mc_tilted,
        n_converge: v.n_converge,
        bootstrap: v.bootstrap,
        constants_perturbation: v.constants_perturbation,
    }
}

/// One line per criterion.
pub fn verdict_lines(run: &suite::SuiteRun) -> Vec<String> {
    let secs: BTreeMap<u32, f64> = run.seconds.iter().copied().collect();
    run.report
        .criteria
        .iter()
        .map(|c| {
            let failed: Vec<&str> = c.measurements.iter().filter(|m| !m.pass).map(|m| m.label.as_str()).collect();
            let detail = match (&c.error, failed.is_empty()) {
                (Some(e), _) => format!(" error: {e}"),
                (None, false) => format!(" failing: {}", failed.join("; ")),
                _ => String::new(),
            };
            format!("criterion {:>2} {} {} [{:.1} s]{detail}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.title, secs.get(&c.id).copied().unwrap_or(0.0))
        })
        .collect()
}

fn validate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let tol = Tolerances::default();
    let run = Suite::new(tol, suite_settings(cfg)).run();
    let prov = Provenance::new(Command::Validate, cfg, tol.as_map());
    emit(out_path(cfg), &json_document(&prov, &run.report)?)?;
    Ok(Outcome { pass: run.report.pass, notes: verdict_lines(&run) })
}
