//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! out_dir = "runs/spectrum"
//!
//! [lattice]          # optional; missing keys take the reference values
//! alpha = 0.05
//!
//! [solver]           # optional
//! tol = 1e-10
//!
//! [experiment]
//! kind = "spectrum"
//! intensities = [1.0, 49.0, 625.0]
//! ```

use std::path::{Path, PathBuf};

use nltzm::designer::{Shape, TargetProfile};
use nltzm::dynamics::{DriveConfig, NoiseKind, SteadyOptions};
use nltzm::lattice::{LatticeSpec, C64};
use nltzm::nl_eigen::SolverOptions;
use nltzm::zeromode::Direction;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(PathBuf, String),
    Invalid(String),
}

impl std::error::Error for ConfigError {}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(p, e) => write!(f, "{}: {e}", p.display()),
            ConfigError::Invalid(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Spectrum(SpectrumExperiment),
    Zeromode(ZeromodeExperiment),
    Design(DesignExperiment),
    Localizer(LocalizerExperiment),
    Drive(DriveExperiment),
    Stability(StabilityExperiment),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum(_) => "spectrum",
            Experiment::Zeromode(_) => "zeromode",
            Experiment::Design(_) => "design",
            Experiment::Localizer(_) => "localizer",
            Experiment::Drive(_) => "drive",
            Experiment::Stability(_) => "stability",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumExperiment {
    pub intensities: Vec<f64>,
}

impl Default for SpectrumExperiment {
    fn default() -> Self {
        SpectrumExperiment { intensities: vec![1.0, 25.0, 100.0, 225.0, 400.0, 625.0, 900.0, 1225.0, 1406.25, 1600.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CobwebRun {
    pub direction: Direction,
    /// Starting amplitude as a multiple of the plateau height.
    pub start_fraction: f64,
    #[serde(default = "default_cobweb_steps")]
    pub max_steps: usize,
}

fn default_cobweb_steps() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeromodeExperiment {
    pub intensities: Vec<f64>,
    /// Full-coverage criterion: the edge amplitude reaches `(1 - epsilon)` of the plateau.
    pub epsilon: f64,
    pub cobweb: Vec<CobwebRun>,
}

impl Default for ZeromodeExperiment {
    fn default() -> Self {
        let run = |direction, start_fraction| CobwebRun { direction, start_fraction, max_steps: 200 };
        ZeromodeExperiment {
            intensities: vec![49.0, 225.0, 625.0, 1406.25, 1600.0],
            epsilon: 0.01,
            cobweb: vec![
                run(Direction::Increasing, 0.1),
                run(Direction::Decreasing, 0.5),
                run(Direction::Decreasing, 1.5),
            ],
        }
    }
}

/// Target plateau profile of a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Uniform { level: f64 },
    Square { low: f64, high: f64, duty: f64 },
    Triangle { base: f64, peak: f64 },
    Cosine { offset: f64, amplitude: f64 },
    Custom { magnitudes: Vec<f64> },
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig::Cosine { offset: 4.0, amplitude: 2.0 }
    }
}

impl TargetConfig {
    pub fn profile(&self, n: usize) -> nltzm::Result<TargetProfile> {
        let shape = match *self {
            TargetConfig::Uniform { level } => Shape::Uniform { level },
            TargetConfig::Square { low, high, duty } => Shape::Square { low, high, duty },
            TargetConfig::Triangle { base, peak } => Shape::Triangle { base, peak },
            TargetConfig::Cosine { offset, amplitude } => Shape::Cosine { offset, amplitude },
            TargetConfig::Custom { ref magnitudes } => {
                if magnitudes.len() != n {
                    return Err(nltzm::Error::DimensionMismatch { expected: n, got: magnitudes.len() });
                }
                return TargetProfile::custom(magnitudes.clone());
            }
        };
        nltzm::designer::make_target(shape, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignExperiment {
    pub target: TargetConfig,
    pub verify: bool,
}

impl Default for DesignExperiment {
    fn default() -> Self {
        DesignExperiment { target: TargetConfig::default(), verify: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizerExperiment {
    pub intensity: f64,
    pub beta: f64,
    pub omega_tilde: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    /// Grid density for the `mu_max` search over the chain.
    pub mu_max_points_per_site: usize,
    pub protection_trials: usize,
    pub fraction_of_mu_max: f64,
}

impl Default for LocalizerExperiment {
    fn default() -> Self {
        LocalizerExperiment {
            intensity: 625.0,
            beta: 0.2,
            omega_tilde: 0.0,
            x_min: -20.0,
            x_max: 180.0,
            points: 200,
            mu_max_points_per_site: 1,
            protection_trials: 20,
            fraction_of_mu_max: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    /// 1-based site index.
    pub site: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSettings {
    pub l_a: f64,
    pub l_b: f64,
    pub omega_tilde: f64,
    /// Empty means a unit source on the first linear a-site.
    pub source: Vec<SourceEntry>,
}

impl Default for DriveSettings {
    fn default() -> Self {
        DriveSettings { l_a: 0.01, l_b: 0.5, omega_tilde: 0.0, source: Vec::new() }
    }
}

impl DriveSettings {
    pub fn drive(&self, spec: &LatticeSpec, amplitude: f64) -> DriveConfig {
        let mut d = DriveConfig::single_source(spec, amplitude);
        if !self.source.is_empty() {
            d.source = vec![C64::new(0.0, 0.0); spec.n_sites()];
            for s in &self.source {
                if (1..=spec.n_sites()).contains(&s.site) {
                    d.source[s.site - 1] += C64::new(s.re, s.im);
                }
            }
        }
        d.l_a = self.l_a;
        d.l_b = self.l_b;
        d.omega_tilde = self.omega_tilde;
        d
    }

    fn check(&self, spec: &LatticeSpec) -> Result<(), ConfigError> {
        if let Some(s) = self.source.iter().find(|s| s.site == 0 || s.site > spec.n_sites()) {
            return Err(ConfigError::Invalid(format!("source site {} outside 1..={}", s.site, spec.n_sites())));
        }
        if !(self.l_a > 0.0 && self.l_b > 0.0) {
            return Err(ConfigError::Invalid("drive losses must be positive".into()));
        }
        self.drive(spec, 1.0).validate(spec).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveExperiment {
    /// Replace the lattice couplings by a design for `target` first.
    pub use_design: bool,
    pub target: TargetConfig,
    pub drive: DriveSettings,
    pub steady: SteadyOptions,
    /// Amplitudes of the up and down sweeps, ascending.
    pub amplitudes: Vec<f64>,
    /// Amplitude of the detailed steady-state and profile comparison.
    pub amplitude: f64,
    /// Also relax the detailed state from zero by time integration.
    pub relax: bool,
    pub relax_t_max: f64,
    pub dt: f64,
}

impl Default for DriveExperiment {
    fn default() -> Self {
        DriveExperiment {
            use_design: true,
            target: TargetConfig::default(),
            drive: DriveSettings::default(),
            steady: SteadyOptions::default(),
            amplitudes: (0..=60).map(|k| 0.1 * k as f64).collect(),
            amplitude: 1.0,
            relax: true,
            relax_t_max: 5000.0,
            dt: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityExperiment {
    pub use_design: bool,
    pub target: TargetConfig,
    pub drive: DriveSettings,
    pub steady: SteadyOptions,
    pub amplitudes: Vec<f64>,
    /// Independent noise draws per amplitude.
    pub trials: usize,
    pub noise_amplitude: f64,
    pub noise: NoiseKind,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: f64,
    /// Recovery threshold on the similarity.
    pub threshold: f64,
}

impl Default for StabilityExperiment {
    fn default() -> Self {
        StabilityExperiment {
            use_design: true,
            target: TargetConfig::default(),
            drive: DriveSettings::default(),
            steady: SteadyOptions::default(),
            amplitudes: vec![0.4, 1.0, 2.7],
            trials: 2,
            noise_amplitude: 3.0,
            noise: NoiseKind::Complex,
            t_end: 500.0,
            dt: 0.01,
            sample_every: 1.0,
            threshold: 0.999,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} = {v} must be positive")))
    }
}

fn sorted_nonnegative(name: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(ConfigError::Invalid(format!("{name} must not be empty")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || v.windows(2).any(|w| w[1] < w[0]) {
        return Err(ConfigError::Invalid(format!("{name} must be finite, non-negative and ascending")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        Self::from_toml(path, &text)
    }

    /// Checks beyond the schema; runs before any output is written.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: nltzm::Error| ConfigError::Invalid(e.to_string());
        self.lattice.validate().map_err(invalid)?;
        self.solver.validate().map_err(invalid)?;
        let n = self.lattice.n_nl;
        match &self.experiment {
            Experiment::Spectrum(e) => sorted_nonnegative("intensities", &e.intensities)?,
            Experiment::Zeromode(e) => {
                sorted_nonnegative("intensities", &e.intensities)?;
                if !(e.epsilon > 0.0 && e.epsilon < 1.0) {
                    return Err(ConfigError::Invalid(format!("epsilon = {} must lie in (0, 1)", e.epsilon)));
                }
                for run in &e.cobweb {
                    positive("cobweb start_fraction", run.start_fraction)?;
                }
            }
            Experiment::Design(e) => {
                e.target.profile(n).map_err(invalid)?;
            }
            Experiment::Localizer(e) => {
                positive("intensity", e.intensity)?;
                positive("beta", e.beta)?;
                if e.points < 2 || !(e.x_max > e.x_min) {
                    return Err(ConfigError::Invalid("scan needs at least 2 points and x_max > x_min".into()));
                }
                if e.mu_max_points_per_site == 0 {
                    return Err(ConfigError::Invalid("mu_max_points_per_site must be at least 1".into()));
                }
                if !(e.fraction_of_mu_max >= 0.0) {
                    return Err(ConfigError::Invalid("fraction_of_mu_max must be non-negative".into()));
                }
            }
            Experiment::Drive(e) => {
                if e.use_design {
                    e.target.profile(n).map_err(invalid)?;
                }
                e.drive.check(&self.lattice)?;
                sorted_nonnegative("amplitudes", &e.amplitudes)?;
                positive("amplitude", e.amplitude)?;
                positive("dt", e.dt)?;
                positive("relax_t_max", e.relax_t_max)?;
            }
            Experiment::Stability(e) => {
                if e.use_design {
                    e.target.profile(n).map_err(invalid)?;
                }
                e.drive.check(&self.lattice)?;
                sorted_nonnegative("amplitudes", &e.amplitudes)?;
                positive("dt", e.dt)?;
                positive("t_end", e.t_end)?;
                positive("sample_every", e.sample_every)?;
                if !(e.noise_amplitude >= 0.0) || e.trials == 0 {
                    return Err(ConfigError::Invalid("need noise_amplitude >= 0 and at least one trial".into()));
                }
            }
        }
        Ok(())
    }
}
