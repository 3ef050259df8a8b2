//! TOML scenario files. See `docs/config-schema.md` for the full schema.

use std::path::Path;

use nmqfi::bath::{discretize, ContinuousSpectrum, CutoffShape, DiscreteBath, OccupationModel, SpectralFamily};
use nmqfi::probe::{ForceKind, ForceModulation, GaussianProbeInit, Window};
use nmqfi::response::{solve_response_with, Scheme, TimeGrid};
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub description: Option<String>,
    pub command: Option<String>,
    pub probe: ProbeConfig,
    #[serde(default)]
    pub bath: BathConfig,
    #[serde(default)]
    pub force: ForceConfig,
    pub grid: Option<GridConfig>,
    pub window: Option<WindowConfig>,
    pub sequential: Option<SequentialConfig>,
    pub sweep: Option<SweepConfig>,
    pub correlation: Option<CorrelationConfig>,
    pub limits: Option<LimitsConfig>,
    pub markov: Option<MarkovConfig>,
    #[serde(default)]
    pub options: OptionsConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub omega0: f64,
    pub energy: Option<f64>,
    pub init: Option<InitConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Vacuum,
    Coherent {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Thermal {
        n: f64,
    },
    Squeezed {
        r: f64,
        #[serde(default)]
        angle: f64,
    },
    Explicit {
        #[serde(default)]
        mean_re: f64,
        #[serde(default)]
        mean_im: f64,
        covariance: [[f64; 2]; 2],
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    #[default]
    Empty,
    Discrete {
        modes: Vec<ModeConfig>,
    },
    Continuous {
        family: FamilyName,
        #[serde(default = "one")]
        exponent: f64,
        scale: f64,
        cutoff: f64,
        #[serde(default)]
        shape: ShapeName,
        temperature: Option<f64>,
        occupation: Option<f64>,
        n_modes: usize,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Flat,
    Ohmic,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    #[default]
    Hard,
    Exponential,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub k_sq: f64,
    pub detuning: Option<f64>,
    pub frequency: Option<f64>,
    #[serde(default)]
    pub occupation: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceConfig {
    #[default]
    None,
    Constant {
        value: f64,
        t_start: f64,
        t_end: f64,
    },
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        t_start: f64,
        t_end: f64,
    },
    Gaussian {
        center: f64,
        width: f64,
        t_start: f64,
        t_end: f64,
    },
    Table {
        samples: Vec<[f64; 2]>,
        t_start: f64,
        t_end: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Trapezoid,
    #[default]
    Richardson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: Option<f64>,
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub scheme: SchemeName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(default)]
    pub t0: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialConfig {
    pub total: f64,
    #[serde(default)]
    pub start: f64,
    pub tau: Option<f64>,
    #[serde(default)]
    pub optimize: bool,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub energies: Option<Vec<f64>>,
    pub script_e: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub t_prime: Option<f64>,
    pub probe_second_moment: Option<f64>,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn default_points() -> usize {
    200
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovConfig {
    pub gamma: f64,
    #[serde(default)]
    pub occupation: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default = "yes")]
    pub omega0_prefactor: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_nu")]
    pub nu: usize,
    #[serde(default = "one")]
    pub f_true: f64,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        Self { omega0_prefactor: true, seed: 0, replications: default_reps(), nu: default_nu(), f_true: 1.0 }
    }
}

fn yes() -> bool {
    true
}
fn default_reps() -> usize {
    1000
}
fn default_nu() -> usize {
    100
}

/// Validated scenario with its physical objects built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub bath: DiscreteBath,
    pub spectrum: Option<ContinuousSpectrum>,
    pub force: ForceModulation,
    pub init: Option<GaussianProbeInit>,
    pub window: Option<Window>,
    pub markov: Option<MarkovConfig>,
}

impl Scenario {
    pub fn omega0(&self) -> f64 {
        self.config.probe.omega0
    }

    pub fn energy(&self) -> Option<f64> {
        self.config.probe.energy
    }

    pub fn options(&self) -> &OptionsConfig {
        &self.config.options
    }

    /// Solve `G` on `[0, horizon]`, or on the configured grid when it reaches
    /// further.
    pub fn response(&self, horizon: f64) -> nmqfi::Result<nmqfi::response::ResponseFunction> {
        let grid_cfg = self.config.grid.clone().unwrap_or(GridConfig { t_end: None, n_steps: None, scheme: SchemeName::default() });
        let t_end = grid_cfg.t_end.unwrap_or(horizon).max(horizon);
        let grid = match grid_cfg.n_steps {
            Some(n) => TimeGrid::new(0.0, t_end, n)?,
            None => TimeGrid::for_bath(&self.bath, t_end)?,
        };
        let scheme = match grid_cfg.scheme {
            SchemeName::Trapezoid => Scheme::Trapezoid,
            SchemeName::Richardson => Scheme::TrapezoidRichardson,
        };
        solve_response_with(&self.bath, grid, scheme)
    }
}

fn invalid(name: &str, section: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config { origin: name.to_string(), message: format!("[{section}] {msg}") }
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config { origin: path.display().to_string(), message: e.to_string() })?;
    parse(&text, &path.display().to_string())
}

pub fn parse(text: &str, origin: &str) -> Result<Scenario, CliError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config { origin: origin.to_string(), message: e.to_string() })?;
    build(config, origin)
}

fn build(config: ScenarioConfig, name: &str) -> Result<Scenario, CliError> {
    let w0 = config.probe.omega0;
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(invalid(name, "probe", format!("omega0 must be > 0, got {w0}")));
    }
    if let Some(e) = config.probe.energy {
        if !(e >= 0.5) {
            return Err(invalid(name, "probe", format!("energy must be >= 1/2, got {e}")));
        }
    }
    let init = config
        .probe
        .init
        .as_ref()
        .map(|i| match *i {
            InitConfig::Vacuum => Ok(GaussianProbeInit::vacuum()),
            InitConfig::Coherent { re, im } => Ok(GaussianProbeInit::coherent(Complex64::new(re, im))),
            InitConfig::Thermal { n } => GaussianProbeInit::thermal(n),
            InitConfig::Squeezed { r, angle } => Ok(GaussianProbeInit::squeezed(r, angle)),
            InitConfig::Explicit { mean_re, mean_im, covariance } => GaussianProbeInit::new(Complex64::new(mean_re, mean_im), covariance),
        })
        .transpose()
        .map_err(|e| invalid(name, "probe.init", e))?;

    let (bath, spectrum) = match &config.bath {
        BathConfig::Empty => (DiscreteBath::empty(w0).map_err(|e| invalid(name, "bath", e))?, None),
        BathConfig::Discrete { modes } => {
            let mut bath = DiscreteBath::empty(w0).map_err(|e| invalid(name, "bath", e))?;
            for (i, m) in modes.iter().enumerate() {
                let freq = match (m.detuning, m.frequency) {
                    (Some(d), None) => w0 - d,
                    (None, Some(f)) => f,
                    _ => return Err(invalid(name, &format!("bath.modes[{i}]"), "give exactly one of detuning, frequency")),
                };
                let mode = nmqfi::bath::BathMode::new(m.k_sq, freq, m.occupation).map_err(|e| invalid(name, &format!("bath.modes[{i}]"), e))?;
                bath = bath.with_mode(mode);
            }
            (bath, None)
        }
        BathConfig::Continuous { family, exponent, scale, cutoff, shape, temperature, occupation, n_modes } => {
            let family = match family {
                FamilyName::Flat => SpectralFamily::FlatBand,
                FamilyName::Ohmic => SpectralFamily::Ohmic { exponent: *exponent },
            };
            let shape = match shape {
                ShapeName::Hard => CutoffShape::Hard,
                ShapeName::Exponential => CutoffShape::Exponential,
            };
            let occ = match (temperature, occupation) {
                (None, None) => OccupationModel::ZeroTemperature,
                (Some(t), None) => OccupationModel::Thermal(*t),
                (None, Some(n)) => OccupationModel::Constant(*n),
                _ => return Err(invalid(name, "bath", "give at most one of temperature, occupation")),
            };
            let s = ContinuousSpectrum::new(family, *scale, *cutoff, shape, occ).map_err(|e| invalid(name, "bath", e))?;
            (discretize(&s, *n_modes, w0).map_err(|e| invalid(name, "bath", e))?, Some(s))
        }
    };

    let force = match &config.force {
        ForceConfig::None => Ok(ForceModulation::zero()),
        ForceConfig::Constant { value, t_start, t_end } => ForceModulation::constant(*value, *t_start, *t_end),
        ForceConfig::Sinusoid { amplitude, frequency, phase, t_start, t_end } => ForceModulation::new(
            ForceKind::Sinusoid { amplitude: *amplitude, frequency: *frequency, phase: *phase },
            *t_start,
            *t_end,
        ),
        ForceConfig::Gaussian { center, width, t_start, t_end } => {
            ForceModulation::new(ForceKind::GaussianPulse { center: *center, width: *width }, *t_start, *t_end)
        }
        ForceConfig::Table { samples, t_start, t_end } => {
            ForceModulation::new(ForceKind::Table { samples: samples.iter().map(|s| (s[0], s[1])).collect() }, *t_start, *t_end)
        }
    }
    .map_err(|e| invalid(name, "force", e))?;

    let window = config
        .window
        .as_ref()
        .map(|w| Window::new(w.t0, w.t))
        .transpose()
        .map_err(|e| invalid(name, "window", e))?;

    if let Some(s) = &config.sequential {
        if s.tau.is_some() == s.optimize {
            return Err(invalid(name, "sequential", "set exactly one of tau, optimize = true"));
        }
        if !(s.total > 0.0) {
            return Err(invalid(name, "sequential", format!("total must be > 0, got {}", s.total)));
        }
    }
    if let Some(s) = &config.sweep {
        if s.energies.is_some() == s.script_e.is_some() {
            return Err(invalid(name, "sweep", "set exactly one of energies, script_e"));
        }
    }

    let markov = match (config.markov, spectrum) {
        (Some(m), _) => Some(m),
        (None, Some(s)) => Some(MarkovConfig { gamma: s.markov_gamma(w0), occupation: s.occupation_model().occupation(w0) }),
        (None, None) => None,
    };

    Ok(Scenario { name: name.to_string(), bath, spectrum, force, init, window, markov, config })
}
