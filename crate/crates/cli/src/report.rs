use esmpc::learner::StepRecord;

use crate::RunOutcome;

/// Constraint and tracking statistics of one run, plus the learning result
/// when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub steps: usize,
    pub input_violations: usize,
    pub torque_violations: usize,
    pub max_abs_input: f64,
    pub max_abs_torque: f64,
    pub max_sigma: f64,
    /// RMS load-angle error over the last reference period.
    pub rms_final_period: f64,
    pub rms_final_period_pct: f64,
    pub learning: Option<LearningReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningReport {
    pub names: Vec<String>,
    pub q_nominal: f64,
    pub epsilon_q: f64,
    pub termination_iteration: usize,
    pub converged: bool,
    pub first_below_epsilon: Option<usize>,
    pub q_first: f64,
    pub q_last: f64,
    pub final_estimate: Vec<f64>,
    pub true_delta: Vec<f64>,
    pub clamped_iterations: usize,
}

fn rms_final_period(records: &[StepRecord], period_steps: usize) -> f64 {
    let n = period_steps.min(records.len());
    if n == 0 {
        return 0.0;
    }
    let tail = &records[records.len() - n..];
    (tail.iter().map(|r| r.y_e[0] * r.y_e[0]).sum::<f64>() / n as f64).sqrt()
}

impl RunReport {
    pub fn new(outcome: &RunOutcome) -> Self {
        let s = &outcome.scenario;
        let recs = &outcome.records;
        let period_steps = (s.reference.period / s.mpc.dt).round() as usize;
        let rms = rms_final_period(recs, period_steps);
        let learning = outcome.learning.as_ref().map(|l| {
            let epsilon_q = s.learning.epsilon_factor * l.q_nominal;
            let its = &l.trace.iterations;
            LearningReport {
                names: l.trace.names.clone(),
                q_nominal: l.q_nominal,
                epsilon_q,
                termination_iteration: l.trace.termination_iteration(),
                converged: l.trace.converged,
                first_below_epsilon: l.trace.first_below(epsilon_q),
                q_first: its.first().map_or(f64::NAN, |r| r.q),
                q_last: its.last().map_or(f64::NAN, |r| r.q),
                final_estimate: l.trace.final_estimate.clone(),
                true_delta: s.true_deltas(),
                clamped_iterations: its.iter().filter(|r| r.clamped).count(),
            }
        });
        Self {
            scenario: s.name.clone(),
            steps: recs.len(),
            input_violations: recs.iter().filter(|r| r.u[0].abs() > s.voltage_limit).count(),
            torque_violations: recs.iter().filter(|r| r.y[1].abs() > s.torque_limit).count(),
            max_abs_input: recs.iter().map(|r| r.u[0].abs()).fold(0.0, f64::max),
            max_abs_torque: recs.iter().map(|r| r.y[1].abs()).fold(0.0, f64::max),
            max_sigma: recs.iter().map(|r| r.sigma).fold(0.0, f64::max),
            rms_final_period: rms,
            rms_final_period_pct: 100.0 * rms / s.reference.amplitude.abs(),
            learning,
        }
    }

    /// `key = value` lines.
    pub fn to_summary(&self) -> String {
        let mut lines = vec![
            format!("scenario = {}", self.scenario),
            format!("steps = {}", self.steps),
            format!("input_bound_violations = {}", self.input_violations),
            format!("torque_bound_violations = {}", self.torque_violations),
            format!("max_abs_input = {}", self.max_abs_input),
            format!("max_abs_torque = {}", self.max_abs_torque),
            format!("max_sigma = {}", self.max_sigma),
            format!("rms_angle_error_final_period = {}", self.rms_final_period),
            format!("rms_angle_error_final_period_pct = {}", self.rms_final_period_pct),
        ];
        match &self.learning {
            None => {
                lines.push("learning = false".into());
                lines.push("termination_iteration = 0".into());
            }
            Some(l) => {
                lines.push("learning = true".into());
                lines.push(format!("q_nominal = {}", l.q_nominal));
                lines.push(format!("epsilon_q = {}", l.epsilon_q));
                lines.push(format!("termination_iteration = {}", l.termination_iteration));
                lines.push(format!("converged = {}", l.converged));
                lines.push(format!(
                    "first_iteration_below_epsilon = {}",
                    l.first_below_epsilon.map_or("none".to_string(), |i| i.to_string())
                ));
                lines.push(format!("q_first = {}", l.q_first));
                lines.push(format!("q_first_over_nominal = {}", l.q_first / l.q_nominal));
                lines.push(format!("q_last = {}", l.q_last));
                lines.push(format!("q_last_over_nominal = {}", l.q_last / l.q_nominal));
                lines.push(format!("clamped_iterations = {}", l.clamped_iterations));
                for (i, name) in l.names.iter().enumerate() {
                    let est = l.final_estimate[i];
                    let truth = l.true_delta[i];
                    lines.push(format!("final_{name} = {est}"));
                    lines.push(format!("true_{name} = {truth}"));
                    lines.push(format!("residual_{name} = {}", est - truth));
                }
            }
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// Parse `key = value` lines back into pairs.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
