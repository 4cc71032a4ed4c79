//! JSON run configuration.
//!
//! ```json
//! {
//!   "scenario": "vacuum_rabi",
//!   "parameters": { "g": 0.13, "kappa": 0.026 },
//!   "n_trajectories": 200,
//!   "t_final": 30,
//!   "oracle": true
//! }
//! ```
//!
//! Times (`dt`, `t_final`) are in units of the scenario period `τ`. Omitted
//! fields take per-scenario defaults; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mcwf::{ChannelSelection, EngineOptions, NoJumpScaling};
use crate::model::presets::*;
use crate::model::{Representation, Scenario};
use crate::ode::Tolerances;
use crate::{Error, Result};

pub const SCENARIOS: [&str; 5] = ["lossy_cavity", "vacuum_rabi", "jaynes_cummings", "n_oscillators", "ring_array"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorKind {
    Exact,
    Mctdh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Channel drawn with probability `δp_j / δp`, state rescaled by its norm.
    Proportional,
    /// Threshold channel choice and `√(1 − δp)` rescaling.
    FirstOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    /// Highest Fock level of the non-cavity oscillators.
    pub nu_max: usize,
    /// Highest Fock level of the cavity.
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub n_points: usize,
    /// SPFs per DOF; capped at the basis size (two for spins).
    pub n_spf: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { n_points: 41, n_spf: 4 }
    }
}

/// The file format. Every field but `scenario` is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub initial_occupations: Option<Vec<usize>>,
    pub propagator: Option<PropagatorKind>,
    pub n_trajectories: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub master_seed: Option<u64>,
    pub selection_mode: Option<SelectionMode>,
    pub truncation: Option<Truncation>,
    pub grid: Option<GridSettings>,
    pub oracle: Option<bool>,
    pub oracle_reduce: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub sweep: Option<Vec<usize>>,
}

/// Validated configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub parameters: BTreeMap<String, f64>,
    pub initial_occupations: Option<Vec<usize>>,
    pub propagator: PropagatorKind,
    pub n_trajectories: usize,
    /// In units of τ; `None` chooses automatically.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub master_seed: u64,
    pub selection_mode: SelectionMode,
    pub truncation: Truncation,
    pub grid: GridSettings,
    pub oracle: bool,
    pub oracle_reduce: bool,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub rtol: f64,
    pub atol: f64,
    pub sweep: Option<Vec<usize>>,
}

fn allowed_parameters(scenario: &str) -> &'static [&'static str] {
    match scenario {
        "lossy_cavity" => &["omega_c", "kappa", "n0"],
        "vacuum_rabi" => &["omega_c", "omega_0", "g", "kappa", "gamma"],
        "jaynes_cummings" => &["omega_c", "omega_0", "g", "kappa", "gamma", "alpha"],
        "n_oscillators" => &["n_sites", "omega_c", "omega_0", "g", "kappa", "gamma"],
        "ring_array" => &["n_sites", "omega_c", "omega_0", "g", "lambda", "kappa", "gamma"],
        _ => &[],
    }
}

struct Defaults {
    n_trajectories: usize,
    t_final: f64,
    truncation: Truncation,
}

fn defaults(scenario: &str, params: &BTreeMap<String, f64>) -> Defaults {
    let tr = |nu_max, n_max| Truncation { nu_max, n_max };
    match scenario {
        "lossy_cavity" => {
            let n0 = params.get("n0").copied().unwrap_or(8.0) as usize;
            Defaults { n_trajectories: 400, t_final: 60.0, truncation: tr(0, n0 + 2) }
        }
        "vacuum_rabi" => Defaults { n_trajectories: 200, t_final: 30.0, truncation: tr(3, 3) },
        "jaynes_cummings" => {
            let alpha = params.get("alpha").copied().unwrap_or(5f64.sqrt()).abs();
            let n_max = ((alpha * alpha + 8.0 * alpha).ceil() as usize).max(10);
            Defaults { n_trajectories: 400, t_final: 40.0, truncation: tr(0, n_max) }
        }
        "n_oscillators" => Defaults { n_trajectories: 200, t_final: 30.0, truncation: tr(2, 3) },
        _ => Defaults { n_trajectories: 300, t_final: 20.0, truncation: tr(3, 5) },
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {msg}"))
}

impl RawConfig {
    pub fn validate(self) -> Result<RunConfig> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(invalid("scenario", format!("unknown preset `{}`; expected one of {SCENARIOS:?}", self.scenario)));
        }
        let allowed = allowed_parameters(&self.scenario);
        for (k, v) in &self.parameters {
            if !allowed.contains(&k.as_str()) {
                return Err(invalid(&format!("parameters.{k}"), format!("not a parameter of `{}`", self.scenario)));
            }
            if !v.is_finite() {
                return Err(invalid(&format!("parameters.{k}"), "must be finite"));
            }
        }
        for k in ["kappa", "gamma"] {
            if self.parameters.get(k).is_some_and(|&v| v < 0.0) {
                return Err(invalid(&format!("parameters.{k}"), "rates must be non-negative"));
            }
        }
        for k in ["n0", "n_sites"] {
            if let Some(&v) = self.parameters.get(k) {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(invalid(&format!("parameters.{k}"), "must be a non-negative integer"));
                }
            }
        }
        if self.initial_occupations.is_some() && !matches!(self.scenario.as_str(), "n_oscillators" | "ring_array") {
            return Err(invalid("initial_occupations", "only valid for oscillator-array scenarios"));
        }
        let d = defaults(&self.scenario, &self.parameters);
        let n_trajectories = self.n_trajectories.unwrap_or(d.n_trajectories);
        if n_trajectories == 0 {
            return Err(invalid("n_trajectories", "must be positive"));
        }
        let t_final = self.t_final.unwrap_or(d.t_final);
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(invalid("t_final", "must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(invalid("dt", "must be positive"));
            }
            if dt >= t_final {
                return Err(invalid("dt", format!("must be smaller than t_final = {t_final}")));
            }
            let r = t_final / dt;
            if (r - r.round()).abs() > 1e-9 * r {
                return Err(invalid("dt", format!("t_final = {t_final} must be an integer multiple of dt")));
            }
        }
        let grid = self.grid.unwrap_or_default();
        if grid.n_points < 2 || grid.n_spf == 0 || grid.n_spf > grid.n_points {
            return Err(invalid("grid", "need n_points >= 2 and 1 <= n_spf <= n_points"));
        }
        let truncation = self.truncation.unwrap_or(d.truncation);
        if truncation.n_max == 0 {
            return Err(invalid("truncation.n_max", "must be positive"));
        }
        let rtol = self.rtol.unwrap_or(1e-8);
        let atol = self.atol.unwrap_or(1e-10);
        if !(rtol > 0.0) || !(atol > 0.0) {
            return Err(invalid("rtol/atol", "must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.is_empty() || s.contains(&0) {
                return Err(invalid("sweep", "needs positive trajectory counts"));
            }
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be positive"));
        }
        let cfg = RunConfig {
            scenario: self.scenario,
            parameters: self.parameters,
            initial_occupations: self.initial_occupations,
            propagator: self.propagator.unwrap_or(PropagatorKind::Exact),
            n_trajectories,
            dt: self.dt,
            t_final,
            master_seed: self.master_seed.unwrap_or(1),
            selection_mode: self.selection_mode.unwrap_or(SelectionMode::Proportional),
            truncation,
            grid,
            oracle: self.oracle.unwrap_or(false),
            oracle_reduce: self.oracle_reduce.unwrap_or(true),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            workers: self.workers,
            rtol,
            atol,
            sweep: self.sweep,
        };
        // Surface scenario-level errors (e.g. too few ring sites) now.
        cfg.scenario()?;
        Ok(cfg)
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    raw.validate()
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl RunConfig {
    fn param(&self, key: &str, default: f64) -> f64 {
        self.parameters.get(key).copied().unwrap_or(default)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(match self.scenario.as_str() {
            "lossy_cavity" => {
                let d = LossyCavityParams::default();
                lossy_cavity(&LossyCavityParams {
                    omega_c: self.param("omega_c", d.omega_c),
                    kappa: self.param("kappa", d.kappa),
                    n0: self.param("n0", d.n0 as f64) as usize,
                })
            }
            "vacuum_rabi" => {
                let d = RabiParams::default();
                rabi(&RabiParams {
                    omega_c: self.param("omega_c", d.omega_c),
                    omega_0: self.param("omega_0", d.omega_0),
                    g: self.param("g", d.g),
                    kappa: self.param("kappa", d.kappa),
                    gamma: self.param("gamma", d.gamma),
                })
            }
            "jaynes_cummings" => {
                let d = JaynesCummingsParams::default();
                jaynes_cummings(&JaynesCummingsParams {
                    omega_c: self.param("omega_c", d.omega_c),
                    omega_0: self.param("omega_0", d.omega_0),
                    g: self.param("g", d.g),
                    kappa: self.param("kappa", d.kappa),
                    gamma: self.param("gamma", d.gamma),
                    alpha: self.param("alpha", d.alpha),
                })
            }
            name => {
                let ring = name == "ring_array";
                let d = if ring { OscillatorArrayParams::ring() } else { OscillatorArrayParams::independent() };
                let n_sites = self.param("n_sites", d.n_sites as f64) as usize;
                let g = self.param("g", d.g);
                let initial = match &self.initial_occupations {
                    Some(v) => v.clone(),
                    None if n_sites == d.n_sites => d.initial.clone(),
                    None => {
                        let mut v = vec![0; n_sites + 1];
                        v[..n_sites.min(d.initial.len() - 1)]
                            .copy_from_slice(&d.initial[..n_sites.min(d.initial.len() - 1)]);
                        v[n_sites] = *d.initial.last().unwrap();
                        v
                    }
                };
                let p = OscillatorArrayParams {
                    n_sites,
                    omega_c: self.param("omega_c", d.omega_c),
                    omega_0: self.param("omega_0", d.omega_0),
                    g,
                    lambda: if ring { self.param("lambda", g / 2.0) } else { 0.0 },
                    kappa: self.param("kappa", d.kappa),
                    gamma: self.param("gamma", d.gamma),
                    initial,
                };
                if ring {
                    ring_array(&p)?
                } else {
                    n_oscillators(&p)?
                }
            }
        })
    }

    /// Truncated Fock representation used by the exact propagator and the
    /// oracle.
    pub fn fock_representation(&self, scenario: &Scenario) -> Representation {
        Representation::fock_truncated(scenario, self.truncation.nu_max, self.truncation.n_max)
    }

    /// SPF counts for each DOF of a grid representation.
    pub fn spf_counts(&self, rep: &Representation) -> Vec<usize> {
        rep.dims().iter().map(|&n| self.grid.n_spf.min(n)).collect()
    }

    pub fn engine_options(&self, time_unit: f64) -> EngineOptions {
        let mut o = EngineOptions::auto(self.t_final * time_unit);
        o.dt = self.dt.map(|dt| dt * time_unit);
        o.tol = Tolerances::new(self.rtol, self.atol);
        if self.selection_mode == SelectionMode::FirstOrder {
            o.selection = ChannelSelection::Threshold;
            o.scaling = NoJumpScaling::FirstOrder;
        }
        o
    }
}
