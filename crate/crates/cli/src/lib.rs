//! Scenario runner behind the `esmpc` binary.

pub mod config;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use esmpc::servo::{canned_scenarios, run_learning, simulate, Scenario};
use thiserror::Error;

pub use config::{load_scenario, Overrides, ScenarioFile};
pub use report::RunReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Everything one simulation produced, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub records: Vec<esmpc::learner::StepRecord>,
    pub learning: Option<LearningOutcome>,
}

#[derive(Debug, Clone)]
pub struct LearningOutcome {
    pub trace: esmpc::learner::LearningTrace,
    pub q_nominal: f64,
}

/// Validate and simulate `scenario`: a learning run when learning is
/// enabled, otherwise `duration_steps` samples with the fixed model.
pub fn execute(scenario: &Scenario) -> Result<RunOutcome, CliError> {
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(CliError::Validation(violations.join("\n")));
    }
    if scenario.learning_enabled {
        let (trace, q_nominal) = run_learning(scenario).map_err(runtime)?;
        let mut scenario = scenario.clone();
        scenario.learning.q_nominal = Some(q_nominal);
        Ok(RunOutcome {
            records: trace.steps.clone(),
            scenario,
            learning: Some(LearningOutcome { trace, q_nominal }),
        })
    } else {
        let records = simulate(scenario, scenario.duration_steps).map_err(runtime)?;
        Ok(RunOutcome {
            scenario: scenario.clone(),
            records,
            learning: None,
        })
    }
}

/// Run `scenario` and write every artifact into `dir`.
pub fn run_to_dir(scenario: &Scenario, dir: &Path) -> Result<RunReport, CliError> {
    let outcome = execute(scenario)?;
    let report = RunReport::new(&outcome);
    output::write_all(&outcome, &report, dir).map_err(|e| CliError::Runtime(format!("cli: {}: {e}", dir.display())))?;
    Ok(report)
}

/// Run several scenarios on up to `jobs` threads. Each gets its own
/// subdirectory of `out` named after the scenario. Results keep input order.
pub fn run_many(scenarios: &[Scenario], out: &Path, jobs: usize) -> Vec<(PathBuf, Result<RunReport, CliError>)> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(PathBuf, Result<RunReport, CliError>)>>> =
        Mutex::new((0..scenarios.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, scenarios.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(s) = scenarios.get(i) else { break };
                let dir = out.join(&s.name);
                let r = run_to_dir(s, &dir);
                results.lock().unwrap()[i] = Some((dir, r));
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every scenario ran")).collect()
}

/// Human-readable validation report and the list of violated invariants.
pub fn validate_report(scenario: &Scenario) -> (String, Vec<String>) {
    let mut out = String::new();
    out.push_str("# resolved configuration\n");
    out.push_str(&ScenarioFile::from_scenario(scenario).to_toml());
    out.push('\n');
    out.push_str("# derived\n");
    out.push_str(&format!("N_E = {}\n", scenario.learning.steps_per_iteration));
    out.push_str(&format!("dT_mes = {} s\n", scenario.dt_mes()));
    for l in &scenario.learned {
        out.push_str(&format!(
            "dither {}: omega = {} rad/s, effective {} rad/sample\n",
            l.param.name(),
            l.omega,
            esmpc::mes::effective_frequency(l.omega, scenario.dt_mes())
        ));
    }
    let violations = scenario.violations();
    if violations.is_empty() {
        out.push_str("frequencies: distinct, no sum aliasing\n");
        out.push_str("horizons and bounds: consistent\n");
        out.push_str("OK\n");
    } else {
        out.push_str("FAILED\n");
    }
    (out, violations)
}

/// One line per canned scenario.
pub fn scenario_listing() -> String {
    let mut out = String::new();
    for s in canned_scenarios() {
        let deltas: Vec<String> = s
            .learned
            .iter()
            .zip(s.true_deltas())
            .filter(|(_, d)| *d != 0.0)
            .map(|(l, d)| format!("d{} = {}", l.param.name(), (d * 1e9).round() / 1e9))
            .collect();
        out.push_str(&format!(
            "{:<8} learning={:<5} uncertainty: {}\n",
            s.name,
            s.learning_enabled,
            if deltas.is_empty() { "none".to_string() } else { deltas.join(", ") }
        ));
    }
    out
}
