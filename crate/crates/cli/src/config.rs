//! Scenario files and command-line overrides.
//!
//! A scenario file is TOML: a few top-level keys plus `[plant]`, `[model]`,
//! `[reference]`, `[limits]`, `[mpc]`, `[learning]` sections and one
//! `[[dither]]` table per learned parameter. Every key is optional and
//! falls back to the `base` canned scenario (default `nominal`).

use std::path::Path;

use esmpc::servo::{canned_scenario, canned_scenarios, LearnedParameter, Scenario, ServoParam, ServoParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub base: Option<String>,
    pub name: Option<String>,
    pub learning_enabled: Option<bool>,
    /// Closed-loop steps when learning is off.
    pub duration_steps: Option<usize>,
    /// True plant parameters.
    pub plant: Option<ParamsSection>,
    /// Parameters the controller is built from.
    pub model: Option<ParamsSection>,
    pub reference: Option<ReferenceSection>,
    pub limits: Option<LimitsSection>,
    pub mpc: Option<MpcSection>,
    pub learning: Option<LearningSection>,
    pub dither: Option<Vec<DitherSection>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub r_a: Option<f64>,
    pub k_m: Option<f64>,
    pub j_l: Option<f64>,
    pub beta_l: Option<f64>,
    pub k_l: Option<f64>,
    pub j_m: Option<f64>,
    pub beta_m: Option<f64>,
    pub gear: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub torque: Option<f64>,
    pub voltage: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    pub dt: Option<f64>,
    pub horizon: Option<usize>,
    pub control_horizon: Option<usize>,
    pub input_constraint_horizon: Option<usize>,
    pub constraint_horizon: Option<usize>,
    pub q_y: Option<f64>,
    pub r_v: Option<f64>,
    pub rho: Option<f64>,
    pub soft_torque: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSection {
    pub steps_per_iteration: Option<usize>,
    pub epsilon_factor: Option<f64>,
    pub max_iterations: Option<usize>,
    pub q_nominal: Option<f64>,
    pub inertia_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherSection {
    pub param: String,
    pub amplitude: f64,
    pub omega: f64,
}

macro_rules! take {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

fn apply_params(dst: &mut ServoParams, src: &ParamsSection) {
    take!(dst.r_a, src.r_a);
    take!(dst.k_m, src.k_m);
    take!(dst.j_l, src.j_l);
    take!(dst.beta_l, src.beta_l);
    take!(dst.k_l, src.k_l);
    take!(dst.j_m, src.j_m);
    take!(dst.beta_m, src.beta_m);
    take!(dst.gear, src.gear);
}

fn params_section(p: &ServoParams) -> ParamsSection {
    ParamsSection {
        r_a: Some(p.r_a),
        k_m: Some(p.k_m),
        j_l: Some(p.j_l),
        beta_l: Some(p.beta_l),
        k_l: Some(p.k_l),
        j_m: Some(p.j_m),
        beta_m: Some(p.beta_m),
        gear: Some(p.gear),
    }
}

pub fn parse_param(name: &str) -> Result<ServoParam, CliError> {
    ServoParam::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = ServoParam::ALL.iter().map(|p| p.name()).collect();
        CliError::Validation(format!("cli: unknown parameter '{name}' (expected one of {})", known.join(", ")))
    })
}

fn base_scenario(name: &str) -> Result<Scenario, CliError> {
    canned_scenario(name).ok_or_else(|| {
        let names: Vec<String> = canned_scenarios().into_iter().map(|s| s.name).collect();
        CliError::Validation(format!("cli: unknown scenario '{name}' (canned: {})", names.join(", ")))
    })
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("cli: config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cli: cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Layer this file over its base scenario.
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let mut s = base_scenario(self.base.as_deref().unwrap_or("nominal"))?;
        take!(s.name, self.name.clone());
        take!(s.learning_enabled, self.learning_enabled);
        take!(s.duration_steps, self.duration_steps);
        if let Some(p) = &self.plant {
            apply_params(&mut s.true_params, p);
        }
        if let Some(p) = &self.model {
            apply_params(&mut s.assumed_params, p);
        }
        if let Some(r) = &self.reference {
            take!(s.reference.amplitude, r.amplitude);
            take!(s.reference.period, r.period);
        }
        if let Some(l) = &self.limits {
            take!(s.torque_limit, l.torque);
            take!(s.voltage_limit, l.voltage);
        }
        if let Some(m) = &self.mpc {
            take!(s.mpc.dt, m.dt);
            take!(s.mpc.horizon, m.horizon);
            take!(s.mpc.control_horizon, m.control_horizon);
            take!(s.mpc.input_constraint_horizon, m.input_constraint_horizon);
            take!(s.mpc.constraint_horizon, m.constraint_horizon);
            take!(s.mpc.q_y, m.q_y);
            take!(s.mpc.r_v, m.r_v);
            take!(s.mpc.rho, m.rho);
            take!(s.mpc.soft_torque, m.soft_torque);
        }
        if let Some(l) = &self.learning {
            take!(s.learning.steps_per_iteration, l.steps_per_iteration);
            take!(s.learning.epsilon_factor, l.epsilon_factor);
            take!(s.learning.max_iterations, l.max_iterations);
            take!(s.learning.inertia_floor, l.inertia_floor);
            if l.q_nominal.is_some() {
                s.learning.q_nominal = l.q_nominal;
            }
        }
        if let Some(ds) = &self.dither {
            s.learned = ds
                .iter()
                .map(|d| {
                    Ok(LearnedParameter {
                        param: parse_param(&d.param)?,
                        amplitude: d.amplitude,
                        omega: d.omega,
                    })
                })
                .collect::<Result<_, CliError>>()?;
        }
        Ok(s)
    }

    /// Fully populated file describing `s`.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            base: None,
            name: Some(s.name.clone()),
            learning_enabled: Some(s.learning_enabled),
            duration_steps: Some(s.duration_steps),
            plant: Some(params_section(&s.true_params)),
            model: Some(params_section(&s.assumed_params)),
            reference: Some(ReferenceSection {
                amplitude: Some(s.reference.amplitude),
                period: Some(s.reference.period),
            }),
            limits: Some(LimitsSection {
                torque: Some(s.torque_limit),
                voltage: Some(s.voltage_limit),
            }),
            mpc: Some(MpcSection {
                dt: Some(s.mpc.dt),
                horizon: Some(s.mpc.horizon),
                control_horizon: Some(s.mpc.control_horizon),
                input_constraint_horizon: Some(s.mpc.input_constraint_horizon),
                constraint_horizon: Some(s.mpc.constraint_horizon),
                q_y: Some(s.mpc.q_y),
                r_v: Some(s.mpc.r_v),
                rho: Some(s.mpc.rho),
                soft_torque: Some(s.mpc.soft_torque),
            }),
            learning: Some(LearningSection {
                steps_per_iteration: Some(s.learning.steps_per_iteration),
                epsilon_factor: Some(s.learning.epsilon_factor),
                max_iterations: Some(s.learning.max_iterations),
                q_nominal: s.learning.q_nominal,
                inertia_floor: Some(s.learning.inertia_floor),
            }),
            dither: Some(
                s.learned
                    .iter()
                    .map(|l| DitherSection {
                        param: l.param.name().to_string(),
                        amplitude: l.amplitude,
                        omega: l.omega,
                    })
                    .collect(),
            ),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario file always serializes")
    }
}

/// Command-line overrides applied after the scenario is resolved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub rho: Option<f64>,
    /// Gear ratio of both the plant and the model.
    pub gear: Option<f64>,
    pub n_e: Option<usize>,
    pub epsilon_factor: Option<f64>,
    pub max_iterations: Option<usize>,
    pub control_horizon: Option<usize>,
    pub horizon: Option<usize>,
    pub q_nominal: Option<f64>,
    pub steps: Option<usize>,
    /// Replaces the dither list when non-empty.
    pub dither: Vec<LearnedParameter>,
    pub no_learning: bool,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        take!(s.mpc.rho, self.rho);
        if let Some(g) = self.gear {
            s.true_params.gear = g;
            s.assumed_params.gear = g;
        }
        take!(s.learning.steps_per_iteration, self.n_e);
        take!(s.learning.epsilon_factor, self.epsilon_factor);
        take!(s.learning.max_iterations, self.max_iterations);
        take!(s.mpc.control_horizon, self.control_horizon);
        take!(s.mpc.horizon, self.horizon);
        take!(s.duration_steps, self.steps);
        if self.q_nominal.is_some() {
            s.learning.q_nominal = self.q_nominal;
        }
        if !self.dither.is_empty() {
            s.learned = self.dither.clone();
        }
        if self.no_learning {
            s.learning_enabled = false;
        }
    }
}

/// `PARAM:AMPLITUDE:OMEGA`, e.g. `beta_l:1e-6:0.7`.
pub fn parse_dither(spec: &str) -> Result<LearnedParameter, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Validation(format!("cli: dither '{spec}' must look like PARAM:AMPLITUDE:OMEGA"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(LearnedParameter {
        param: parse_param(parts[0])?,
        amplitude: parts[1].parse().map_err(|_| bad())?,
        omega: parts[2].parse().map_err(|_| bad())?,
    })
}

/// Scenario from a canned name or a file path, with overrides applied.
pub fn load_scenario(source: &str, overrides: &Overrides) -> Result<Scenario, CliError> {
    let mut s = if canned_scenario(source).is_some() {
        base_scenario(source)?
    } else {
        let path = Path::new(source);
        if !path.exists() {
            return base_scenario(source);
        }
        ScenarioFile::load(path)?.resolve()?
    };
    overrides.apply(&mut s);
    Ok(s)
}
