//! WebAssembly bindings for the demo page in `www/`.
//!
//! The plain functions (`trajectory`, `landscape`, `learning_run`) do the
//! work and are what the native tests call; the `#[wasm_bindgen]` wrappers
//! only convert errors.

use esmpc::servo::{canned_scenario, run_learning, simulate, steady_cost, Scenario};
use wasm_bindgen::prelude::*;

fn scenario(name: &str) -> Result<Scenario, String> {
    canned_scenario(name).ok_or_else(|| format!("unknown scenario '{name}'"))
}

/// Closed-loop samples, one entry per step.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t: Vec<f64>,
    angle: Vec<f64>,
    reference: Vec<f64>,
    torque: Vec<f64>,
    voltage: Vec<f64>,
    torque_limit: f64,
    voltage_limit: f64,
}

#[wasm_bindgen]
impl Trajectory {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn angle(&self) -> Vec<f64> {
        self.angle.clone()
    }
    pub fn reference(&self) -> Vec<f64> {
        self.reference.clone()
    }
    pub fn torque(&self) -> Vec<f64> {
        self.torque.clone()
    }
    pub fn voltage(&self) -> Vec<f64> {
        self.voltage.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn torque_limit(&self) -> f64 {
        self.torque_limit
    }
    #[wasm_bindgen(getter)]
    pub fn voltage_limit(&self) -> f64 {
        self.voltage_limit
    }
    /// Samples with |torque| above the limit.
    #[wasm_bindgen(getter)]
    pub fn violations(&self) -> usize {
        self.torque.iter().filter(|v| v.abs() > self.torque_limit).count()
    }
}

/// Run `name` for `steps` samples with the controller's load friction
/// shifted by `beta_offset` from the scenario's assumed value.
pub fn trajectory(name: &str, beta_offset: f64, steps: usize) -> Result<Trajectory, String> {
    let mut s = scenario(name)?;
    s.assumed_params.beta_l += beta_offset;
    let recs = simulate(&s, steps).map_err(|e| e.to_string())?;
    Ok(Trajectory {
        t: recs.iter().map(|r| r.t).collect(),
        angle: recs.iter().map(|r| r.y[0]).collect(),
        reference: recs.iter().map(|r| r.r[0]).collect(),
        torque: recs.iter().map(|r| r.y[1]).collect(),
        voltage: recs.iter().map(|r| r.u[0]).collect(),
        torque_limit: s.torque_limit,
        voltage_limit: s.voltage_limit,
    })
}

/// Steady learning cost, relative to the nominal loop, for each model
/// friction offset. Offsets whose controller fails map to NaN.
pub fn landscape(name: &str, offsets: &[f64], window: usize) -> Result<Vec<f64>, String> {
    let mut base = scenario(name)?;
    base.learning.steps_per_iteration = window;
    let q_nominal = steady_cost(&base.nominal_twin()).map_err(|e| e.to_string())?;
    Ok(offsets
        .iter()
        .map(|&d| {
            let mut s = base.clone();
            s.assumed_params.beta_l += d;
            steady_cost(&s).map_or(f64::NAN, |q| q / q_nominal)
        })
        .collect())
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRun {
    q: Vec<f64>,
    /// Row-major, one row per iteration.
    estimates: Vec<f64>,
    names: Vec<String>,
    q_nominal: f64,
    epsilon_q: f64,
    converged: bool,
}

#[wasm_bindgen]
impl LearningRun {
    pub fn q(&self) -> Vec<f64> {
        self.q.clone()
    }
    /// Estimates of parameter `k` over the iterations.
    pub fn estimate(&self, k: usize) -> Vec<f64> {
        let n = self.names.len();
        self.estimates.iter().skip(k).step_by(n.max(1)).copied().collect()
    }
    pub fn names(&self) -> Vec<String> {
        self.names.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn q_nominal(&self) -> f64 {
        self.q_nominal
    }
    #[wasm_bindgen(getter)]
    pub fn epsilon_q(&self) -> f64 {
        self.epsilon_q
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
}

pub fn learning_run(name: &str, max_iterations: usize) -> Result<LearningRun, String> {
    let mut s = scenario(name)?;
    s.learning_enabled = true;
    s.learning.max_iterations = max_iterations;
    let (trace, q_nominal) = run_learning(&s).map_err(|e| e.to_string())?;
    Ok(LearningRun {
        q: trace.iterations.iter().map(|r| r.q).collect(),
        estimates: trace.iterations.iter().flat_map(|r| r.estimate.clone()).collect(),
        names: trace.names.clone(),
        q_nominal,
        epsilon_q: s.learning.epsilon_factor * q_nominal,
        converged: trace.converged,
    })
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(name: &str, beta_offset: f64, steps: usize) -> Result<Trajectory, JsError> {
    trajectory(name, beta_offset, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = costLandscape)]
pub fn landscape_js(name: &str, offsets: Vec<f64>, window: usize) -> Result<Vec<f64>, JsError> {
    landscape(name, &offsets, window).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = learn)]
pub fn learn_js(name: &str, max_iterations: usize) -> Result<LearningRun, JsError> {
    learning_run(name, max_iterations).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_are_strided_per_parameter() {
        let run = LearningRun {
            q: vec![3.0, 2.0, 1.0],
            estimates: vec![0.0, 10.0, 1.0, 11.0, 2.0, 12.0],
            names: vec!["a".into(), "b".into()],
            q_nominal: 1.0,
            epsilon_q: 1.5,
            converged: false,
        };
        assert_eq!(run.estimate(0), vec![0.0, 1.0, 2.0]);
        assert_eq!(run.estimate(1), vec![10.0, 11.0, 12.0]);
    }
}
