//! Iterative learning loop: alternate windows of closed-loop MPC steps
//! with single extremum-seeking updates of the prediction model until the
//! learning cost drops to the threshold.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::ContinuousStateSpace;
use crate::mes::MesState;
use crate::servo::{build_servo_model, ServoParam, ServoParams};

const MODULE: &str = "learner";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMatrix {
    A,
    B,
    C,
    D,
}

/// One learned element `(matrix, row, col)` in elementwise mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixEntry {
    pub matrix: ModelMatrix,
    pub row: usize,
    pub col: usize,
}

/// How a learned vector turns back into a prediction model.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintyMap {
    /// Additive corrections to selected matrix entries. Each correction
    /// matrix is projected onto its spectral-norm ball (`limits` holds
    /// `l_A, l_B, l_C, l_D`).
    Elementwise {
        nominal: ContinuousStateSpace,
        entries: Vec<MatrixEntry>,
        limits: [f64; 4],
    },
    /// Additive corrections to physical servo parameters.
    Physical {
        base: ServoParams,
        params: Vec<ServoParam>,
        /// Lower limit applied to rebuilt inertias.
        inertia_floor: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebuiltModel {
    pub model: ContinuousStateSpace,
    /// Set when a projection or floor changed the requested correction.
    pub clamped: bool,
}

/// Project `m` onto `{X : ||X||_2 <= limit}` by clipping singular values.
pub fn project_spectral(m: &DMatrix<f64>, limit: f64) -> (DMatrix<f64>, bool) {
    if m.is_empty() {
        return (m.clone(), false);
    }
    let mut svd = m.clone().svd(true, true);
    let top = svd.singular_values.max();
    if top <= limit {
        return (m.clone(), false);
    }
    for s in svd.singular_values.iter_mut() {
        *s = s.min(limit);
    }
    (svd.recompose().expect("both factors were computed"), true)
}

impl UncertaintyMap {
    pub fn len(&self) -> usize {
        match self {
            UncertaintyMap::Elementwise { entries, .. } => entries.len(),
            UncertaintyMap::Physical { params, .. } => params.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            UncertaintyMap::Elementwise { entries, .. } => entries
                .iter()
                .map(|e| format!("d{:?}_{}_{}", e.matrix, e.row + 1, e.col + 1))
                .collect(),
            UncertaintyMap::Physical { params, .. } => {
                params.iter().map(|p| format!("d{}", p.name())).collect()
            }
        }
    }

    pub fn rebuild_model(&self, delta_hat: &[f64]) -> Result<RebuiltModel> {
        if delta_hat.len() != self.len() {
            return Err(Error::dim(
                MODULE,
                format!("estimate has {} entries, map expects {}", delta_hat.len(), self.len()),
            ));
        }
        if !delta_hat.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(MODULE, "non-finite parameter estimate"));
        }
        match self {
            UncertaintyMap::Physical {
                base,
                params,
                inertia_floor,
            } => {
                let mut p = *base;
                let mut clamped = false;
                for (param, delta) in params.iter().zip(delta_hat) {
                    let mut value = param.get(base) + delta;
                    if param.is_inertia() && value < *inertia_floor {
                        value = *inertia_floor;
                        clamped = true;
                    }
                    param.set(&mut p, value);
                }
                Ok(RebuiltModel {
                    model: build_servo_model(&p)?,
                    clamped,
                })
            }
            UncertaintyMap::Elementwise {
                nominal,
                entries,
                limits,
            } => {
                let mut deltas = [
                    DMatrix::zeros(nominal.states(), nominal.states()),
                    DMatrix::zeros(nominal.states(), nominal.inputs()),
                    DMatrix::zeros(nominal.outputs(), nominal.states()),
                    DMatrix::zeros(nominal.outputs(), nominal.inputs()),
                ];
                for (e, v) in entries.iter().zip(delta_hat) {
                    let target = &mut deltas[e.matrix as usize];
                    if e.row >= target.nrows() || e.col >= target.ncols() {
                        return Err(Error::dim(MODULE, format!("entry {e:?} outside its matrix")));
                    }
                    target[(e.row, e.col)] += v;
                }
                let mut clamped = false;
                let mut projected = Vec::with_capacity(4);
                for (d, &l) in deltas.iter().zip(limits) {
                    let (p, c) = project_spectral(d, l);
                    clamped |= c;
                    projected.push(p);
                }
                let model = ContinuousStateSpace::new(
                    nominal.a() + &projected[0],
                    nominal.b() + &projected[1],
                    nominal.c() + &projected[2],
                    nominal.d() + &projected[3],
                )?;
                Ok(RebuiltModel { model, clamped })
            }
        }
    }
}

/// One output component entering the learning cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerm {
    pub index: usize,
    pub weight: f64,
    /// Also penalize the backward-difference derivative of this component.
    pub with_derivative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub terms: Vec<CostTerm>,
    pub window: usize,
}

impl CostSpec {
    /// Angle error with its rate plus shaft torque, unit weights.
    pub fn servo(window: usize) -> Self {
        Self {
            terms: vec![
                CostTerm {
                    index: 0,
                    weight: 1.0,
                    with_derivative: true,
                },
                CostTerm {
                    index: 1,
                    weight: 1.0,
                    with_derivative: false,
                },
            ],
            window,
        }
    }
}

/// Backward differences `(e_k - e_{k-1}) / dt`. Without a `prior` sample
/// the first derivative is taken as zero.
pub fn error_velocity(samples: &[f64], dt: f64, prior: Option<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = prior;
    for &e in samples {
        out.push(prev.map_or(0.0, |p| (e - p) / dt));
        prev = Some(e);
    }
    out
}

/// Sum of weighted squared tracking errors (and flagged error rates) over a
/// window of exactly `spec.window` samples. `prior` is the sample just
/// before the window, if one exists.
pub fn evaluate_cost(
    spec: &CostSpec,
    window: &[DVector<f64>],
    prior: Option<&DVector<f64>>,
    dt: f64,
) -> Result<f64> {
    if window.len() != spec.window {
        return Err(Error::invalid(
            MODULE,
            format!("cost window has {} samples, expected {}", window.len(), spec.window),
        ));
    }
    let mut q = 0.0;
    for term in &spec.terms {
        let series: Vec<f64> = window
            .iter()
            .map(|s| {
                s.get(term.index).copied().ok_or_else(|| {
                    Error::dim(MODULE, format!("cost index {} outside error vector", term.index))
                })
            })
            .collect::<Result<_>>()?;
        q += term.weight * series.iter().map(|e| e * e).sum::<f64>();
        if term.with_derivative {
            let before = prior.and_then(|p| p.get(term.index).copied());
            let rate = error_velocity(&series, dt, before);
            q += term.weight * rate.iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub epsilon_q: f64,
    /// Closed-loop steps per learning iteration.
    pub steps_per_iteration: usize,
    pub dt_mpc: f64,
    pub max_iterations: usize,
}

impl LearningConfig {
    pub fn dt_mes(&self) -> f64 {
        self.steps_per_iteration as f64 * self.dt_mpc
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_q.is_finite() && self.epsilon_q > 0.0) {
            return Err(Error::invalid(MODULE, format!("threshold {} must be > 0", self.epsilon_q)));
        }
        if self.steps_per_iteration == 0 {
            return Err(Error::invalid(MODULE, "N_E must be >= 1"));
        }
        if !(self.dt_mpc.is_finite() && self.dt_mpc > 0.0) {
            return Err(Error::invalid(MODULE, "MPC sample time must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid(MODULE, "max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Everything recorded for one closed-loop sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub r: DVector<f64>,
    pub y_e: DVector<f64>,
    pub sigma: f64,
    pub qp_iterations: usize,
    /// Fingerprint of the condensed controller used for this step.
    pub model_fingerprint: u64,
}

/// A plant under MPC whose prediction model can be swapped.
pub trait ClosedLoop {
    fn set_model(&mut self, model: &ContinuousStateSpace) -> Result<()>;
    fn step(&mut self) -> Result<StepRecord>;
    fn dt(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub q: f64,
    /// Estimate in force while this window ran.
    pub estimate: Vec<f64>,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub names: Vec<String>,
    pub iterations: Vec<IterationRecord>,
    pub steps: Vec<StepRecord>,
    /// `true` when the cost reached the threshold before the iteration cap.
    pub converged: bool,
    pub final_estimate: Vec<f64>,
}

impl LearningTrace {
    pub fn termination_iteration(&self) -> usize {
        self.iterations.len()
    }

    /// First iteration whose cost was at or below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.iterations.iter().find(|r| r.q <= threshold).map(|r| r.iteration)
    }
}

/// Run the learning loop on `system`. The plant is never reset; each
/// iteration is `N_E` steps against the current model, one cost
/// evaluation, and (while the cost exceeds the threshold) one MES update
/// followed by a model rebuild.
pub fn run_algorithm_one<L: ClosedLoop>(
    system: &mut L,
    mes: MesState,
    map: &UncertaintyMap,
    spec: &CostSpec,
    cfg: &LearningConfig,
) -> Result<LearningTrace> {
    cfg.validate()?;
    if mes.channels().len() != map.len() {
        return Err(Error::dim(
            MODULE,
            format!("{} dither channels for {} parameters", mes.channels().len(), map.len()),
        ));
    }
    if spec.window != cfg.steps_per_iteration {
        return Err(Error::invalid(MODULE, "cost window must equal N_E"));
    }
    if (mes.dt_mes() - cfg.dt_mes()).abs() > 1e-12 * cfg.dt_mes() {
        return Err(Error::invalid(
            MODULE,
            format!("MES sample time {} differs from N_E * dt = {}", mes.dt_mes(), cfg.dt_mes()),
        ));
    }

    let wrap = |iteration: usize, step: usize| {
        move |e: Error| Error::Learning {
            iteration,
            step,
            source: Box::new(e),
        }
    };

    let mut mes = mes;
    let mut estimate = mes.estimates();
    let mut rebuilt = map.rebuild_model(&estimate).map_err(wrap(1, 0))?;
    system.set_model(&rebuilt.model).map_err(wrap(1, 0))?;

    let n_e = cfg.steps_per_iteration;
    let mut steps: Vec<StepRecord> = Vec::with_capacity(n_e * 4);
    let mut iterations = Vec::new();
    let mut converged = false;

    for iteration in 1..=cfg.max_iterations {
        let start = steps.len();
        for l in 0..n_e {
            steps.push(system.step().map_err(wrap(iteration, l))?);
        }
        let window: Vec<DVector<f64>> = steps[start..].iter().map(|s| s.y_e.clone()).collect();
        let prior = start.checked_sub(1).map(|k| &steps[k].y_e);
        let q = evaluate_cost(spec, &window, prior, system.dt()).map_err(wrap(iteration, n_e))?;
        iterations.push(IterationRecord {
            iteration,
            q,
            estimate: estimate.clone(),
            clamped: rebuilt.clamped,
        });
        if q <= cfg.epsilon_q {
            converged = true;
            break;
        }
        if iteration == cfg.max_iterations {
            break;
        }
        mes = mes.update(q).map_err(wrap(iteration, n_e))?;
        estimate = mes.estimates();
        rebuilt = map.rebuild_model(&estimate).map_err(wrap(iteration + 1, 0))?;
        system.set_model(&rebuilt.model).map_err(wrap(iteration + 1, 0))?;
    }

    Ok(LearningTrace {
        names: map.names(),
        iterations,
        steps,
        converged,
        final_estimate: estimate,
    })
}
