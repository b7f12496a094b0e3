//! DC servo motor driving a load through a flexible shaft.
//!
//! States are load angle, load rate, motor angle and motor rate; the input
//! is motor voltage; the outputs are load angle and shaft torque. The MPC
//! tracks a sinusoidal load-angle reference with an incremental input
//! formulation, a hard voltage bound and a softened torque bound.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::learner::{
    run_algorithm_one, ClosedLoop, CostSpec, LearningConfig, LearningTrace, StepRecord, UncertaintyMap,
};
use crate::lti::{augment_for_tracking, zoh_discretize, Bounds, ContinuousStateSpace, DiscreteStateSpace, ReferenceModel};
use crate::mes::{DitherChannel, MesState};
use crate::mpc::{condense, CondensedMpc, MpcConfig};
use crate::qp::QpSolver;

const MODULE: &str = "servo";

/// Default gear ratio. Not part of the published parameter set.
pub const DEFAULT_GEAR_RATIO: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoParams {
    /// Armature resistance, ohm.
    pub r_a: f64,
    /// Motor constant, Nm/A.
    pub k_m: f64,
    /// Load inertia, kg m^2.
    pub j_l: f64,
    /// Load viscous friction, Nms/rad.
    pub beta_l: f64,
    /// Shaft stiffness, Nm/rad.
    pub k_l: f64,
    /// Motor inertia, kg m^2.
    pub j_m: f64,
    /// Motor viscous friction, Nms/rad.
    pub beta_m: f64,
    /// Gear ratio.
    pub gear: f64,
}

impl ServoParams {
    pub fn nominal() -> Self {
        Self {
            r_a: 10.0,
            k_m: 10.0,
            j_l: 25.0,
            beta_l: 25.0,
            k_l: 1280.0,
            j_m: 0.5,
            beta_m: 0.1,
            gear: DEFAULT_GEAR_RATIO,
        }
    }

    /// Resistance, motor constant, inertias, stiffness and gear ratio must
    /// be positive. Friction only has to be finite: the uncertain
    /// benchmark drives the load friction negative.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in ServoParam::ALL {
            let v = p.get(self);
            if !v.is_finite() {
                out.push(format!("{} = {v} is not finite", p.name()));
            } else if p.must_be_positive() && v <= 0.0 {
                out.push(format!("{} = {v} must be > 0", p.name()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServoParam {
    RA,
    Km,
    JL,
    BetaL,
    KL,
    JM,
    BetaM,
    Gear,
}

impl ServoParam {
    pub const ALL: [ServoParam; 8] = [
        ServoParam::RA,
        ServoParam::Km,
        ServoParam::JL,
        ServoParam::BetaL,
        ServoParam::KL,
        ServoParam::JM,
        ServoParam::BetaM,
        ServoParam::Gear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ServoParam::RA => "R_A",
            ServoParam::Km => "K_m",
            ServoParam::JL => "J_l",
            ServoParam::BetaL => "beta_l",
            ServoParam::KL => "k_l",
            ServoParam::JM => "J_m",
            ServoParam::BetaM => "beta_m",
            ServoParam::Gear => "g",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    pub fn get(self, p: &ServoParams) -> f64 {
        match self {
            ServoParam::RA => p.r_a,
            ServoParam::Km => p.k_m,
            ServoParam::JL => p.j_l,
            ServoParam::BetaL => p.beta_l,
            ServoParam::KL => p.k_l,
            ServoParam::JM => p.j_m,
            ServoParam::BetaM => p.beta_m,
            ServoParam::Gear => p.gear,
        }
    }

    pub fn set(self, p: &mut ServoParams, value: f64) {
        let slot = match self {
            ServoParam::RA => &mut p.r_a,
            ServoParam::Km => &mut p.k_m,
            ServoParam::JL => &mut p.j_l,
            ServoParam::BetaL => &mut p.beta_l,
            ServoParam::KL => &mut p.k_l,
            ServoParam::JM => &mut p.j_m,
            ServoParam::BetaM => &mut p.beta_m,
            ServoParam::Gear => &mut p.gear,
        };
        *slot = value;
    }

    pub fn is_inertia(self) -> bool {
        matches!(self, ServoParam::JL | ServoParam::JM)
    }

    fn must_be_positive(self) -> bool {
        !matches!(self, ServoParam::BetaL | ServoParam::BetaM)
    }
}

pub fn build_servo_model(p: &ServoParams) -> Result<ContinuousStateSpace> {
    let v = p.violations();
    if !v.is_empty() {
        return Err(Error::invalid(MODULE, v.join("; ")));
    }
    let g = p.gear;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        -p.k_l / p.j_l, -p.beta_l / p.j_l, p.k_l / (g * p.j_l), 0.0,
        0.0, 0.0, 0.0, 1.0,
        p.k_l / (g * p.j_m), 0.0, -p.k_l / (g * g * p.j_m), -(p.beta_m + p.k_m * p.k_m / p.r_a) / p.j_m,
    ]);
    let b = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, p.k_m / (p.r_a * p.j_m)]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(2, 4, &[
        1.0, 0.0, 0.0, 0.0,
        p.k_l, 0.0, -p.k_l / g, 0.0,
    ]);
    ContinuousStateSpace::new(a, b, c, DMatrix::zeros(2, 1))
}

/// Exact-ZOH simulation of the true plant.
#[derive(Debug, Clone)]
pub struct PlantSim {
    model: DiscreteStateSpace,
    x: DVector<f64>,
    t: f64,
    steps: usize,
}

impl PlantSim {
    pub fn new(params: &ServoParams, dt: f64) -> Result<Self> {
        let model = zoh_discretize(&build_servo_model(params)?, dt)?;
        let n = model.states();
        Ok(Self {
            model,
            x: DVector::zeros(n),
            t: 0.0,
            steps: 0,
        })
    }

    pub fn model(&self) -> &DiscreteStateSpace {
        &self.model
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn set_state(&mut self, x: DVector<f64>) {
        self.x = x;
    }

    pub fn output(&self) -> DVector<f64> {
        self.model.c() * &self.x
    }

    /// Hold `u` for one sample. Returns the new state and outputs.
    pub fn step(&mut self, u: f64) -> (DVector<f64>, DVector<f64>) {
        let u = DVector::from_element(1, u);
        self.x = self.model.next_state(&self.x, &u);
        self.steps += 1;
        self.t = self.steps as f64 * self.model.dt();
        (self.x.clone(), self.output())
    }
}

/// `amplitude * sin(2 pi t / period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSignal {
    pub amplitude: f64,
    pub period: f64,
}

impl ReferenceSignal {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * t / self.period).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServoMpcSettings {
    pub dt: f64,
    pub horizon: usize,
    pub control_horizon: usize,
    pub input_constraint_horizon: usize,
    pub constraint_horizon: usize,
    /// Weight on the load-angle tracking error.
    pub q_y: f64,
    /// Weight on the input increment.
    pub r_v: f64,
    pub rho: f64,
    pub soft_torque: bool,
}

impl Default for ServoMpcSettings {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon: 20,
            control_horizon: 4,
            input_constraint_horizon: 4,
            constraint_horizon: 4,
            q_y: 1e3,
            r_v: 0.05,
            rho: 1e5,
            soft_torque: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnedParameter {
    pub param: ServoParam,
    pub amplitude: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningSettings {
    pub steps_per_iteration: usize,
    pub epsilon_factor: f64,
    pub max_iterations: usize,
    /// Cost of the nominal closed loop; measured when absent.
    pub q_nominal: Option<f64>,
    pub inertia_floor: f64,
}

impl LearningSettings {
    /// One and a half reference periods, rounded down to whole samples.
    pub fn default_steps(reference: &ReferenceSignal, dt: f64) -> usize {
        (1.5 * reference.period / dt + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub true_params: ServoParams,
    pub assumed_params: ServoParams,
    pub learned: Vec<LearnedParameter>,
    pub reference: ReferenceSignal,
    pub torque_limit: f64,
    pub voltage_limit: f64,
    pub mpc: ServoMpcSettings,
    pub learning: LearningSettings,
    /// Closed-loop steps for runs without learning.
    pub duration_steps: usize,
    pub learning_enabled: bool,
}

impl Scenario {
    /// Every invariant violated by this scenario, as readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (label, p) in [("true", &self.true_params), ("assumed", &self.assumed_params)] {
            out.extend(p.violations().into_iter().map(|v| format!("{label} parameters: {v}")));
        }
        if !(self.reference.period > 0.0 && self.reference.amplitude.is_finite()) {
            out.push("reference period must be > 0".into());
        }
        if !(self.torque_limit > 0.0 && self.voltage_limit > 0.0) {
            out.push("torque and voltage limits must be > 0".into());
        }
        if !(self.mpc.dt > 0.0) {
            out.push("MPC sample time must be > 0".into());
        }
        if let Ok(model) = build_servo_model(&self.assumed_params) {
            if self.mpc.dt > 0.0 {
                match zoh_discretize(&model, self.mpc.dt) {
                    Ok(plant) => {
                        if let Ok(aug) = augment_for_tracking(&plant, &servo_reference_model(), true) {
                            let cfg = self.mpc_config(&aug);
                            out.extend(cfg.violations(aug.states(), aug.inputs(), aug.outputs()));
                        }
                    }
                    Err(e) => out.push(e.to_string()),
                }
            }
        }
        let l = &self.learning;
        if l.steps_per_iteration == 0 {
            out.push("N_E must be >= 1".into());
        }
        if !(l.epsilon_factor > 0.0) {
            out.push("epsilon factor must be > 0".into());
        }
        if l.max_iterations == 0 {
            out.push("max_iterations must be >= 1".into());
        }
        if let Some(q) = l.q_nominal {
            if !(q.is_finite() && q > 0.0) {
                out.push(format!("q_nominal = {q} must be > 0"));
            }
        }
        if self.learning_enabled {
            if self.learned.is_empty() {
                out.push("learning enabled without learned parameters".into());
            }
            let mut seen = Vec::new();
            for lp in &self.learned {
                if seen.contains(&lp.param) {
                    out.push(format!("parameter {} learned twice", lp.param.name()));
                }
                seen.push(lp.param);
                if !(lp.amplitude > 0.0) || !(lp.omega > 0.0) {
                    out.push(format!("dither for {} needs amplitude > 0 and omega > 0", lp.param.name()));
                }
            }
            let omegas: Vec<f64> = self.learned.iter().map(|l| l.omega).collect();
            out.extend(crate::mes::frequency_violations(&omegas, self.dt_mes()));
            let max = crate::mes::max_parameters(4, 1, 2);
            if self.learned.len() > max {
                out.push(format!("{} learned parameters exceed {max}", self.learned.len()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(MODULE, v.join("; ")))
        }
    }

    pub fn dt_mes(&self) -> f64 {
        self.learning.steps_per_iteration as f64 * self.mpc.dt
    }

    /// MPC settings for the augmented model `[x; r; u_prev]`.
    pub fn mpc_config(&self, augmented: &DiscreteStateSpace) -> MpcConfig {
        let n = augmented.states();
        let p = augmented.outputs();
        // outputs: [angle, torque, angle error, torque]
        let e_row = augmented.c().row(2).into_owned();
        let q = e_row.transpose() * &e_row * self.mpc.q_y;
        let mut bounds = Bounds::unbounded(n, 1, p);
        bounds.xmin[n - 1] = -self.voltage_limit;
        bounds.xmax[n - 1] = self.voltage_limit;
        bounds.ymin[1] = -self.torque_limit;
        bounds.ymax[1] = self.torque_limit;
        MpcConfig {
            horizon: self.mpc.horizon,
            control_horizon: self.mpc.control_horizon,
            input_constraint_horizon: self.mpc.input_constraint_horizon,
            constraint_horizon: self.mpc.constraint_horizon,
            p: q.clone(),
            q,
            r: DMatrix::from_element(1, 1, self.mpc.r_v),
            k_f: DMatrix::zeros(1, n),
            bounds,
            soft_output: self.mpc.soft_torque,
            rho: self.mpc.rho,
        }
    }

    pub fn uncertainty_map(&self) -> UncertaintyMap {
        UncertaintyMap::Physical {
            base: self.assumed_params,
            params: self.learned.iter().map(|l| l.param).collect(),
            inertia_floor: self.learning.inertia_floor,
        }
    }

    pub fn mes_state(&self) -> Result<MesState> {
        MesState::new(
            self.learned
                .iter()
                .map(|l| DitherChannel::new(l.amplitude, l.omega))
                .collect(),
            self.dt_mes(),
        )
    }

    pub fn learning_config(&self, q_nominal: f64) -> LearningConfig {
        LearningConfig {
            epsilon_q: self.learning.epsilon_factor * q_nominal,
            steps_per_iteration: self.learning.steps_per_iteration,
            dt_mpc: self.mpc.dt,
            max_iterations: self.learning.max_iterations,
        }
    }

    /// The same scenario with the true plant equal to the assumed model.
    pub fn nominal_twin(&self) -> Scenario {
        Scenario {
            name: format!("{}-nominal", self.name),
            true_params: self.assumed_params,
            ..self.clone()
        }
    }

    /// True-minus-assumed value of every learned parameter.
    pub fn true_deltas(&self) -> Vec<f64> {
        self.learned
            .iter()
            .map(|l| l.param.get(&self.true_params) - l.param.get(&self.assumed_params))
            .collect()
    }
}

fn servo_reference_model() -> ReferenceModel {
    // the reference is compared with the load angle only
    ReferenceModel::constant(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))
}

/// The three benchmark scenarios: nominal, one uncertain parameter, two.
pub fn canned_scenarios() -> Vec<Scenario> {
    let nominal = ServoParams::nominal();
    let reference = ReferenceSignal {
        amplitude: 4.5,
        period: 20.0 * PI,
    };
    let mpc = ServoMpcSettings::default();
    let learning = LearningSettings {
        steps_per_iteration: LearningSettings::default_steps(&reference, mpc.dt),
        epsilon_factor: 1.5,
        max_iterations: 100,
        q_nominal: None,
        inertia_floor: 1e-3,
    };
    let beta = LearnedParameter {
        param: ServoParam::BetaL,
        amplitude: 1e-6,
        omega: 0.7,
    };
    let inertia = LearnedParameter {
        param: ServoParam::JL,
        amplitude: 1e-8,
        omega: 0.8,
    };
    let base = Scenario {
        name: "nominal".into(),
        true_params: nominal,
        assumed_params: nominal,
        learned: vec![beta],
        reference,
        torque_limit: 78.5,
        voltage_limit: 220.0,
        mpc,
        learning,
        duration_steps: 1500,
        learning_enabled: false,
    };

    let mut single = base.clone();
    single.name = "single".into();
    single.true_params.beta_l += -70.0;
    single.learning_enabled = true;

    let mut double = single.clone();
    double.name = "double".into();
    double.true_params.j_l += -0.2;
    double.learned = vec![beta, inertia];

    vec![base, single, double]
}

pub fn canned_scenario(name: &str) -> Option<Scenario> {
    canned_scenarios().into_iter().find(|s| s.name == name)
}

/// True plant under MPC with a swappable prediction model.
#[derive(Debug, Clone)]
pub struct ServoLoop {
    scenario: Scenario,
    plant: PlantSim,
    controller: CondensedMpc,
    solver: QpSolver,
    u_prev: f64,
    steps: usize,
}

impl ServoLoop {
    /// Plant at rest, controller built from the assumed parameters.
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let plant = PlantSim::new(&scenario.true_params, scenario.mpc.dt)?;
        let controller = Self::build_controller(scenario, &build_servo_model(&scenario.assumed_params)?)?;
        Ok(Self {
            scenario: scenario.clone(),
            plant,
            controller,
            solver: QpSolver::new(),
            u_prev: 0.0,
            steps: 0,
        })
    }

    fn build_controller(scenario: &Scenario, model: &ContinuousStateSpace) -> Result<CondensedMpc> {
        let plant = zoh_discretize(model, scenario.mpc.dt)?;
        let aug = augment_for_tracking(&plant, &servo_reference_model(), true)?;
        condense(&aug, &scenario.mpc_config(&aug))
    }

    pub fn controller(&self) -> &CondensedMpc {
        &self.controller
    }

    pub fn plant(&self) -> &PlantSim {
        &self.plant
    }

    pub fn run(&mut self, steps: usize) -> Result<Vec<StepRecord>> {
        (0..steps).map(|_| self.step()).collect()
    }
}

impl ClosedLoop for ServoLoop {
    fn set_model(&mut self, model: &ContinuousStateSpace) -> Result<()> {
        self.controller = Self::build_controller(&self.scenario, model)?;
        Ok(())
    }

    fn step(&mut self) -> Result<StepRecord> {
        let t = self.steps as f64 * self.scenario.mpc.dt;
        let r = self.scenario.reference.at(t);
        let x = self.plant.state().clone();
        let y = self.plant.output();
        let mut x_aug = DVector::zeros(x.len() + 2);
        x_aug.rows_mut(0, x.len()).copy_from(&x);
        x_aug[x.len()] = r;
        x_aug[x.len() + 1] = self.u_prev;

        let cs = self.controller.step(&mut self.solver, &x_aug)?;
        let limit = self.scenario.voltage_limit;
        let u = (self.u_prev + cs.u_applied[0]).clamp(-limit, limit);

        let record = StepRecord {
            t,
            y_e: DVector::from_column_slice(&[y[0] - r, y[1]]),
            x,
            u: DVector::from_element(1, u),
            y,
            r: DVector::from_element(1, r),
            sigma: cs.sigma,
            qp_iterations: cs.qp_iterations,
            model_fingerprint: self.controller.fingerprint(),
        };
        self.plant.step(u);
        self.u_prev = u;
        self.steps += 1;
        Ok(record)
    }

    fn dt(&self) -> f64 {
        self.scenario.mpc.dt
    }
}

/// Closed loop with a fixed prediction model for `steps` samples.
pub fn simulate(scenario: &Scenario, steps: usize) -> Result<Vec<StepRecord>> {
    scenario.validate()?;
    ServoLoop::new(scenario)?.run(steps)
}

/// Learning cost of the scenario's closed loop with its fixed model, taken
/// on the second window so the start-up transient is excluded.
pub fn steady_cost(scenario: &Scenario) -> Result<f64> {
    let n_e = scenario.learning.steps_per_iteration;
    let records = simulate(scenario, 2 * n_e)?;
    let window: Vec<DVector<f64>> = records[n_e..].iter().map(|r| r.y_e.clone()).collect();
    crate::learner::evaluate_cost(&CostSpec::servo(n_e), &window, Some(&records[n_e - 1].y_e), scenario.mpc.dt)
}

/// Steady cost of the nominal twin.
pub fn nominal_cost(scenario: &Scenario) -> Result<f64> {
    steady_cost(&scenario.nominal_twin())
}

/// Closed-loop learning run. Uses the scenario's stored nominal cost or
/// measures it first.
pub fn run_learning(scenario: &Scenario) -> Result<(LearningTrace, f64)> {
    scenario.validate()?;
    let q_nominal = match scenario.learning.q_nominal {
        Some(q) => q,
        None => nominal_cost(scenario)?,
    };
    let mut system = ServoLoop::new(scenario)?;
    let trace = run_algorithm_one(
        &mut system,
        scenario.mes_state()?,
        &scenario.uncertainty_map(),
        &CostSpec::servo(scenario.learning.steps_per_iteration),
        &scenario.learning_config(q_nominal),
    )?;
    Ok((trace, q_nominal))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_model_entries() {
        let m = build_servo_model(&ServoParams::nominal()).unwrap();
        assert!((m.a()[(1, 1)] + 1.0).abs() < 1e-15);
        assert!((m.a()[(3, 3)] + 20.2).abs() < 1e-13);
        assert!((m.b()[(3, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(m.d(), &DMatrix::zeros(2, 1));
    }

    #[test]
    fn doubling_load_inertia_scales_load_row() {
        let p = ServoParams::nominal();
        let mut q = p;
        q.j_l *= 2.0;
        let a = build_servo_model(&p).unwrap();
        let b = build_servo_model(&q).unwrap();
        for c in 0..4 {
            assert!((b.a()[(1, c)] - a.a()[(1, c)] / 2.0).abs() < 1e-14);
            assert_eq!(b.a()[(3, c)], a.a()[(3, c)]);
        }
    }

    #[test]
    fn torsion_free_configuration_has_zero_torque() {
        let p = ServoParams::nominal();
        let m = build_servo_model(&p).unwrap();
        let theta_m = 3.0;
        let x = DVector::from_column_slice(&[theta_m / p.gear, 0.4, theta_m, 1.2]);
        assert!((m.c() * x)[1].abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let mut p = ServoParams::nominal();
        p.j_l = 0.0;
        assert!(build_servo_model(&p).is_err());
        let mut p = ServoParams::nominal();
        p.beta_l = -45.0;
        assert!(build_servo_model(&p).is_ok());
    }

    #[test]
    fn plant_at_rest_stays_at_rest() {
        let mut sim = PlantSim::new(&ServoParams::nominal(), 0.1).unwrap();
        for _ in 0..10 {
            let (x, y) = sim.step(0.0);
            assert_eq!(x, DVector::zeros(4));
            assert_eq!(y, DVector::zeros(2));
        }
    }

    #[test]
    fn canned_scenarios_carry_benchmark_numbers() {
        let all = canned_scenarios();
        let names: Vec<&str> = all.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["nominal", "single", "double"]);
        assert_eq!(all[0].true_params, all[0].assumed_params);
        assert_eq!(all[1].true_params.beta_l, -45.0);
        assert_eq!(all[1].true_deltas(), vec![-70.0]);
        let d = all[2].true_deltas();
        assert!((d[0] + 70.0).abs() < 1e-12 && (d[1] + 0.2).abs() < 1e-12);
        assert_eq!(all[1].learning.steps_per_iteration, 942);
        for s in &all {
            assert!(s.violations().is_empty(), "{}: {:?}", s.name, s.violations());
        }
        assert!(all[2].mes_state().is_ok());
    }

    #[test]
    fn uncertain_scenarios_differ_only_in_named_parameters() {
        let all = canned_scenarios();
        for s in &all[1..] {
            for p in ServoParam::ALL {
                if !s.learned.iter().any(|l| l.param == p) {
                    assert_eq!(p.get(&s.true_params), p.get(&s.assumed_params), "{}", p.name());
                }
            }
        }
    }

    #[test]
    fn qp_dimensions_match_benchmark() {
        let s = canned_scenario("nominal").unwrap();
        let lp = ServoLoop::new(&s).unwrap();
        let c = lp.controller();
        assert_eq!(c.model().states(), 6);
        assert_eq!(c.num_moves(), 4);
        assert_eq!(c.num_bound_rows(), 16);
        assert_eq!(c.num_variables(), 5);
    }
}
