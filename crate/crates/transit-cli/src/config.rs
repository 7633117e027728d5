//! Experiment manifests.
//!
//! One TOML file describes an experiment; every field has an explicit
//! default, and command-line flags override file values. The resolved
//! configuration is echoed in every provenance header, so a run is fully
//! described by its output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transit_lab::finite_eps_sim::{FamilyKind, StepPolicy};
use transit_lab::limit_sampler::Scheme;
use transit_lab::ModelSpec;

/// Current manifest format.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("config does not match the schema: {0}")]
    Parse(String),
    #[error("unsupported config version {found} (expected {CONFIG_VERSION})")]
    Version { found: u32 },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub d: u32,
    /// Tilts; commands that take one model use the first entry.
    pub mu: Vec<f64>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self { d: 3, mu: vec![0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleBlock {
    pub n: usize,
    pub scheme: Scheme,
    pub dt: f64,
    /// `None` keeps the scheme's own default.
    pub kappa: Option<f64>,
    /// Finite-ε family; when set, transit times are sampled instead.
    pub family: Option<String>,
    pub eps: Vec<f64>,
    pub x0: Option<f64>,
    pub a: Option<f64>,
    pub policy: StepPolicy,
}

impl Default for SampleBlock {
    fn default() -> Self {
        Self {
            n: 10_000,
            scheme: Scheme::DirectSde,
            dt: 2e-3,
            kappa: None,
            family: None,
            eps: vec![0.05],
            x0: None,
            a: None,
            policy: StepPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeBlock {
    pub family: String,
    pub eps: Vec<f64>,
    pub n: usize,
    /// Size of the limit-law reference sample.
    pub limit_n: usize,
    pub policy: StepPolicy,
}

impl Default for ConvergeBlock {
    fn default() -> Self {
        Self { family: "sine".into(), eps: vec![0.2, 0.1, 0.05], n: 20_000, limit_n: 100_000, policy: StepPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceBlock {
    pub lambda: Vec<f64>,
    pub rtol: f64,
}

impl Default for LaplaceBlock {
    fn default() -> Self {
        Self { lambda: vec![-1.0, -0.5, -0.1, 0.0], rtol: 1e-11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumBlock {
    /// Bisection tolerance on `η`.
    pub tol: f64,
    /// Relative tolerance against the finite-difference oracle.
    pub oracle_rtol: f64,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self { tol: 1e-12, oracle_rtol: 1e-6 }
    }
}

/// What the density command tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DensityView {
    /// `t, f, F, S, −ln S` per tilt.
    Table,
    /// Binned Monte Carlo density next to the inversion.
    Histogram,
    /// Scale function and speed weight per tilt.
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityBlock {
    pub view: DensityView,
    pub t_points: usize,
    pub sf_floor: f64,
    pub s_min: f64,
    pub intervals: usize,
    pub trunc_tol: f64,
    /// Admissible `|∫f − 1|`.
    pub mass_tol: f64,
    /// Monte Carlo draws of the histogram view.
    pub n: usize,
    pub bins: usize,
    /// Scale view: `y` range and node count.
    pub y_range: (f64, f64),
    pub y_points: usize,
}

impl Default for DensityBlock {
    fn default() -> Self {
        Self {
            view: DensityView::Table,
            t_points: 4001,
            sf_floor: 1e-7,
            s_min: 1e-3,
            intervals: 2000,
            trunc_tol: 1e-10,
            mass_tol: 1e-4,
            n: 500_000,
            bins: 120,
            y_range: (-3.0, 3.0),
            y_points: 601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsBlock {
    /// Two-way agreement required of every constant.
    pub agreement_tol: f64,
    /// Relative corruption of every closed-form value (negative control).
    pub perturbation: f64,
}

impl Default for ConstantsBlock {
    fn default() -> Self {
        Self { agreement_tol: 1e-7, perturbation: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateBlock {
    /// Criteria to run (1 to 10).
    pub criteria: Vec<u32>,
    /// Limit-law pool size for the untilted models.
    pub n_mc: usize,
    /// Limit-law pool size for the tilted models.
    pub n_mc_tilted: usize,
    /// Finite-ε draws per ε.
    pub n_converge: usize,
    pub bootstrap: usize,
    /// Relative corruption of the closed-form constants (negative control).
    pub constants_perturbation: f64,
}

impl Default for ValidateBlock {
    fn default() -> Self {
        Self {
            criteria: (1..=10).collect(),
            n_mc: 500_000,
            n_mc_tilted: 50_000,
            n_converge: 20_000,
            bootstrap: 1000,
            constants_perturbation: 0.0,
        }
    }
}

/// A complete experiment manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    /// Destination; standard output when unset. Not part of the config hash.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub model: ModelBlock,
    pub sample: SampleBlock,
    pub converge: ConvergeBlock,
    pub laplace: LaplaceBlock,
    pub spectrum: SpectrumBlock,
    pub density: DensityBlock,
    pub constants: ConstantsBlock,
    pub validate: ValidateBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 7,
            out: None,
            model: ModelBlock::default(),
            sample: SampleBlock::default(),
            converge: ConvergeBlock::default(),
            laplace: LaplaceBlock::default(),
            spectrum: SpectrumBlock::default(),
            density: DensityBlock::default(),
            constants: ConstantsBlock::default(),
            validate: ValidateBlock::default(),
        }
    }
}

/// Subcommand selector used for overrides and validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Sample,
    Converge,
    Laplace,
    Spectrum,
    Density,
    Constants,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Converge => "converge",
            Command::Laplace => "laplace",
            Command::Spectrum => "spectrum",
            Command::Density => "density",
            Command::Constants => "constants",
            Command::Validate => "validate",
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub d: Option<u32>,
    pub mu: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lambda: Vec<f64>,
    pub tol: Option<f64>,
    pub family: Option<String>,
    pub view: Option<DensityView>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        // Read the version first so a future format gets a clear message.
        #[derive(Deserialize)]
        struct Probe {
            version: Option<u32>,
        }
        let probe: Probe = toml::from_str::<toml::Table>(text)
            .map_err(|e| ConfigError::Parse(e.to_string()))
            .and_then(|t| t.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string())))?;
        if let Some(v) = probe.version {
            if v != CONFIG_VERSION {
                return Err(ConfigError::Version { found: v });
            }
        }
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml(&text)
    }

    /// Applies flags. `--tol` and `--n` land in the block of `cmd`.
    pub fn apply(&mut self, cmd: Command, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(d) = o.d {
            self.model.d = d;
        }
        if !o.mu.is_empty() {
            self.model.mu = o.mu.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        let flag_unused = |flag: &'static str| invalid(flag, format!("not used by `{}`", cmd.name()));
        if !o.eps.is_empty() {
            match cmd {
                Command::Sample => self.sample.eps = o.eps.clone(),
                Command::Converge => self.converge.eps = o.eps.clone(),
                _ => return Err(flag_unused("eps")),
            }
        }
        if let Some(f) = &o.family {
            match cmd {
                Command::Sample => self.sample.family = Some(f.clone()),
                Command::Converge => self.converge.family = f.clone(),
                _ => return Err(flag_unused("family")),
            }
        }
        if let Some(n) = o.n {
            match cmd {
                Command::Sample => self.sample.n = n,
                Command::Converge => self.converge.n = n,
                Command::Density => self.density.n = n,
                Command::Validate => self.validate.n_mc = n,
                _ => return Err(flag_unused("n")),
            }
        }
        if !o.lambda.is_empty() {
            match cmd {
                Command::Laplace => self.laplace.lambda = o.lambda.clone(),
                _ => return Err(flag_unused("lambda")),
            }
        }
        if let Some(t) = o.tol {
            match cmd {
                Command::Laplace => self.laplace.rtol = t,
                Command::Spectrum => self.spectrum.tol = t,
                Command::Density => self.density.trunc_tol = t,
                Command::Constants => self.constants.agreement_tol = t,
                _ => return Err(flag_unused("tol")),
            }
        }
        if let Some(v) = o.view {
            match cmd {
                Command::Density => self.density.view = v,
                _ => return Err(flag_unused("view")),
            }
        }
        Ok(())
    }

    /// Models named by `[model]`, one per tilt.
    pub fn models(&self) -> Result<Vec<ModelSpec>, ConfigError> {
        if self.model.mu.is_empty() {
            return Err(invalid("model.mu", "needs at least one value"));
        }
        self.model.mu.iter().map(|&mu| ModelSpec::new(self.model.d, mu).map_err(|e| invalid("model", e.to_string()))).collect()
    }

    /// The single model of one-model commands.
    pub fn model(&self) -> Result<ModelSpec, ConfigError> {
        let m = self.models()?;
        if m.len() != 1 {
            return Err(invalid("model.mu", "this command takes exactly one tilt"));
        }
        Ok(m[0])
    }

    /// Checks everything `cmd` will use, before any computation starts.
    pub fn validate(&self, cmd: Command) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version { found: self.version });
        }
        let positive = |field: &'static str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(invalid(field, format!("must be positive and finite, got {v}"))) };
        match cmd {
            Command::Sample => {
                let model = self.model()?;
                if self.sample.n == 0 {
                    return Err(invalid("sample.n", "must be positive"));
                }
                if let Some(name) = &self.sample.family {
                    let fam = family(name, model.mu)?;
                    if fam.kind.degree() != model.d {
                        return Err(invalid("model.d", format!("family `{name}` has degree {}", fam.kind.degree())));
                    }
                    if self.sample.eps.len() != 1 {
                        return Err(invalid("sample.eps", "transit sampling takes exactly one ε"));
                    }
                    fam.check_eps(self.sample.eps[0]).map_err(|e| invalid("sample.eps", e.to_string()))?;
                    fam.check_levels(self.sample.x0.unwrap_or(fam.x0), self.sample.a.unwrap_or(fam.a)).map_err(|e| invalid("sample.x0", e.to_string()))?;
                    self.sample.policy.validate().map_err(|e| invalid("sample.policy", e.to_string()))?;
                } else {
                    positive("sample.dt", self.sample.dt)?;
                    if let Some(k) = self.sample.kappa {
                        positive("sample.kappa", k)?;
                    }
                }
            }
            Command::Converge => {
                let c = &self.converge;
                let fam = family(&c.family, self.model()?.mu)?;
                let mut eps = c.eps.clone();
                eps.sort_by(|a, b| b.total_cmp(a));
                eps.dedup();
                if eps.len() < 2 {
                    return Err(invalid("converge.eps", "needs at least two distinct values"));
                }
                for &e in &eps {
                    fam.check_eps(e).map_err(|err| invalid("converge.eps", err.to_string()))?;
                }
                if c.n < 10_000 || c.limit_n < 10_000 {
                    return Err(invalid("converge.n", "KS p-values need at least 10000 draws per sample"));
                }
                c.policy.validate().map_err(|e| invalid("converge.policy", e.to_string()))?;
            }
            Command::Laplace => {
                self.model()?;
                if self.laplace.lambda.is_empty() || self.laplace.lambda.iter().any(|l| !l.is_finite()) {
                    return Err(invalid("laplace.lambda", "needs finite values"));
                }
                positive("laplace.rtol", self.laplace.rtol)?;
            }
            Command::Spectrum => {
                self.model()?;
                positive("spectrum.tol", self.spectrum.tol)?;
                positive("spectrum.oracle_rtol", self.spectrum.oracle_rtol)?;
            }
            Command::Density => {
                let models = self.models()?;
                let d = &self.density;
                if d.view == DensityView::Histogram && models.len() != 1 {
                    return Err(invalid("model.mu", "the histogram view takes exactly one tilt"));
                }
                if d.t_points < 10 || d.intervals < 2 || d.intervals % 2 != 0 {
                    return Err(invalid("density", "need t_points ≥ 10 and an even number of intervals"));
                }
                if !(d.sf_floor > 0.0 && d.sf_floor < 1e-2) {
                    return Err(invalid("density.sf_floor", "must lie in (0, 1e-2)"));
                }
                positive("density.s_min", d.s_min)?;
                positive("density.trunc_tol", d.trunc_tol)?;
                positive("density.mass_tol", d.mass_tol)?;
                if d.view == DensityView::Histogram && (d.n < 1000 || d.bins < 2) {
                    return Err(invalid("density.n", "histogram needs n ≥ 1000 and at least 2 bins"));
                }
                if d.view == DensityView::Scale && (d.y_points < 2 || !(d.y_range.0 < d.y_range.1)) {
                    return Err(invalid("density.y_range", "needs lo < hi and at least 2 points"));
                }
            }
            Command::Constants => {
                self.model()?;
                positive("constants.agreement_tol", self.constants.agreement_tol)?;
                if !self.constants.perturbation.is_finite() {
                    return Err(invalid("constants.perturbation", "must be finite"));
                }
            }
            Command::Validate => {
                let v = &self.validate;
                if v.criteria.is_empty() || v.criteria.iter().any(|c| !(1..=10).contains(c)) {
                    return Err(invalid("validate.criteria", "entries must lie in 1..=10"));
                }
                if v.n_mc < 10_000 || v.n_mc_tilted < 10_000 || v.n_converge < 10_000 {
                    return Err(invalid("validate.n_mc", "KS and bootstrap statistics need at least 10000 draws"));
                }
                if v.bootstrap < 100 {
                    return Err(invalid("validate.bootstrap", "needs at least 100 replicates"));
                }
                if !v.constants_perturbation.is_finite() {
                    return Err(invalid("validate.constants_perturbation", "must be finite"));
                }
            }
        }
        Ok(())
    }
}

fn family(name: &str, mu: f64) -> Result<transit_lab::finite_eps_sim::PotentialFamily, ConfigError> {
    let kind: FamilyKind = name.parse().map_err(|e: transit_lab::Error| invalid("family", e.to_string()))?;
    transit_lab::finite_eps_sim::family(kind, mu).map_err(|e| invalid("family", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("version = 1\nbogus = 3\n"), Err(ConfigError::Parse(_))));
        assert_eq!(ExperimentConfig::from_toml("version = 9\n"), Err(ConfigError::Version { found: 9 }));
        assert!(matches!(ExperimentConfig::from_toml("[model]\nd = \"three\"\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn flags_override_file_values() {
        let mut c = ExperimentConfig::from_toml("seed = 3\n[model]\nd = 4\n[laplace]\nrtol = 1e-9\n").unwrap();
        let o = Overrides { seed: Some(11), tol: Some(1e-10), lambda: vec![-2.0], ..Default::default() };
        c.apply(Command::Laplace, &o).unwrap();
        assert_eq!((c.seed, c.model.d, c.laplace.rtol, c.laplace.lambda.clone()), (11, 4, 1e-10, vec![-2.0]));
    }

    #[test]
    fn converge_needs_two_eps() {
        let mut c = ExperimentConfig::default();
        c.converge.eps = vec![0.1];
        assert!(matches!(c.validate(Command::Converge), Err(ConfigError::Invalid { field: "converge.eps", .. })));
        c.converge.eps = vec![0.1, 0.1];
        assert!(c.validate(Command::Converge).is_err());
        c.converge.eps = vec![0.2, 0.1];
        c.validate(Command::Converge).unwrap();
    }

    #[test]
    fn misplaced_flags_are_rejected() {
        let mut c = ExperimentConfig::default();
        assert!(c.apply(Command::Spectrum, &Overrides { lambda: vec![1.0], ..Default::default() }).is_err());
        assert!(c.apply(Command::Validate, &Overrides { tol: Some(1.0), ..Default::default() }).is_err());
    }

    #[test]
    fn family_degree_must_match_model() {
        let mut c = ExperimentConfig::default();
        c.sample.family = Some("cos2".into());
        assert!(c.validate(Command::Sample).is_err());
        c.model.d = 4;
        c.validate(Command::Sample).unwrap();
    }
}
