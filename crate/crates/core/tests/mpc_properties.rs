//! Condensed MPC checked against direct rollouts of the model.

use esmpc::lti::{Bounds, DiscreteStateSpace};
use esmpc::mpc::{condense, CondensedMpc, MpcConfig};
use esmpc::qp::{solve_qp, QpSolver, QpStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> DiscreteStateSpace {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.6..0.6));
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let c = DMatrix::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
    let d = DMatrix::from_fn(p, m, |_, _| rng.gen_range(-0.2..0.2));
    DiscreteStateSpace::new(a, b, c, d, 0.1).unwrap()
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * shift
}

fn random_config(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> MpcConfig {
    let horizon = rng.gen_range(2..=8);
    MpcConfig {
        horizon,
        control_horizon: rng.gen_range(1..=horizon),
        input_constraint_horizon: 0,
        constraint_horizon: 0,
        q: random_psd(rng, n, 0.0),
        r: random_psd(rng, m, 0.5),
        p: random_psd(rng, n, 0.0),
        k_f: DMatrix::from_fn(m, n, |_, _| rng.gen_range(-0.3..0.3)),
        bounds: Bounds::unbounded(n, m, p),
        soft_output: false,
        rho: 1.0,
    }
}

/// Inputs and states by explicit recursion, moves beyond `N_u` from `K_f`.
fn rollout(
    model: &DiscreteStateSpace,
    cfg: &MpcConfig,
    x0: &DVector<f64>,
    moves: &DVector<f64>,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let m = model.inputs();
    let mut xs = vec![x0.clone()];
    let mut us = Vec::new();
    for i in 0..cfg.horizon {
        let u = if i < cfg.control_horizon {
            moves.rows(i * m, m).into_owned()
        } else {
            &cfg.k_f * &xs[i]
        };
        xs.push(model.next_state(&xs[i], &u));
        us.push(u);
    }
    (xs, us)
}

fn rollout_cost(model: &DiscreteStateSpace, cfg: &MpcConfig, x0: &DVector<f64>, moves: &DVector<f64>) -> f64 {
    let (xs, us) = rollout(model, cfg, x0, moves);
    let nh = cfg.horizon;
    let mut j = 0.0;
    for i in 1..nh {
        j += (xs[i].transpose() * &cfg.q * &xs[i])[0];
    }
    j += (xs[nh].transpose() * &cfg.p * &xs[nh])[0];
    for u in &us {
        j += (u.transpose() * &cfg.r * u)[0];
    }
    j
}

fn setup(seed: u64) -> (ChaCha8Rng, DiscreteStateSpace, MpcConfig, CondensedMpc) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=2);
    let p = rng.gen_range(1..=3);
    let model = random_model(&mut rng, n, m, p);
    let cfg = random_config(&mut rng, n, m, p);
    let c = condense(&model, &cfg).unwrap();
    (rng, model, cfg, c)
}

#[test]
fn qp_objective_matches_rollout_cost() {
    for seed in 0..60 {
        let (mut rng, model, cfg, c) = setup(seed);
        let n = model.states();
        let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let qp = c.assemble_qp(&x0).unwrap();
        let zero = DVector::zeros(c.num_variables());
        let j0 = rollout_cost(&model, &cfg, &x0, &zero);
        for _ in 0..10 {
            let u = DVector::from_fn(c.num_variables(), |_, _| rng.gen_range(-3.0..3.0));
            let lhs = rollout_cost(&model, &cfg, &x0, &u) - j0;
            let rhs = qp.objective(&u);
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "seed {seed}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn unconstrained_optimum_solves_normal_equations() {
    for seed in 100..160 {
        let (mut rng, model, _, c) = setup(seed);
        let x0 = DVector::from_fn(model.states(), |_, _| rng.gen_range(-2.0..2.0));
        let qp = c.assemble_qp(&x0).unwrap();
        let expected = qp.h().clone().lu().solve(&-qp.f()).unwrap();
        let sol = solve_qp(&qp, None);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((&sol.z_star - &expected).amax() <= 1e-9 * expected.amax().max(1.0));
    }
}

#[test]
fn predictions_match_rollout() {
    for seed in 200..240 {
        let (mut rng, model, cfg, c) = setup(seed);
        let x0 = DVector::from_fn(model.states(), |_, _| rng.gen_range(-2.0..2.0));
        let u = DVector::from_fn(c.num_variables(), |_, _| rng.gen_range(-1.0..1.0));
        let (xs, ys) = c.predict(&x0, &u);
        let (rx, ru) = rollout(&model, &cfg, &x0, &u);
        assert_eq!(xs.len(), cfg.horizon + 1);
        assert_eq!(ys.len(), cfg.horizon);
        for i in 0..=cfg.horizon {
            assert!((&xs[i] - &rx[i]).amax() <= 1e-10);
        }
        for i in 0..cfg.horizon {
            assert!((&ys[i] - model.output(&rx[i], &ru[i])).amax() <= 1e-10);
        }
    }
}

fn constrained_case(seed: u64, soft: bool) -> (DiscreteStateSpace, MpcConfig, CondensedMpc, ChaCha8Rng) {
    let (mut rng, model, mut cfg, _) = setup(seed);
    let (m, p) = (model.inputs(), model.outputs());
    // only free moves are bounded, so the softened problem is always feasible
    cfg.input_constraint_horizon = rng.gen_range(1..=cfg.control_horizon);
    cfg.constraint_horizon = rng.gen_range(0..cfg.horizon);
    cfg.bounds.umin = DVector::from_element(m, -0.5);
    cfg.bounds.umax = DVector::from_element(m, 0.5);
    cfg.bounds.ymin = DVector::from_element(p, -1.0);
    cfg.bounds.ymax = DVector::from_element(p, 1.0);
    cfg.soft_output = soft;
    cfg.rho = 1e4;
    let c = condense(&model, &cfg).unwrap();
    (model, cfg, c, rng)
}

#[test]
fn hard_input_bounds_hold_in_the_plan() {
    for seed in 300..360 {
        let (model, cfg, c, mut rng) = constrained_case(seed, true);
        let x0 = DVector::from_fn(model.states(), |_, _| rng.gen_range(-3.0..3.0));
        let step = c.step(&mut QpSolver::new(), &x0).unwrap();
        let (_, us) = rollout(&model, &cfg, &x0, &step.u_sequence);
        for u in us.iter().take(cfg.input_constraint_horizon) {
            assert!(u.iter().all(|v| v.abs() <= 0.5 + 1e-9), "seed {seed}: {u}");
        }
        // output rows may only exceed their bounds by sigma
        for y in step.predicted_outputs.iter().skip(1).take(cfg.constraint_horizon) {
            assert!(y.iter().all(|v| v.abs() <= 1.0 + step.sigma + 1e-8));
        }
    }
}

#[test]
fn slack_vanishes_when_outputs_are_not_binding() {
    use esmpc::mpc::RowKind;
    let (mut idle, mut binding) = (0, 0);
    for seed in 400..600 {
        let (model, _, hard, mut rng) = constrained_case(seed, false);
        let mut soft_cfg = hard.config().clone();
        soft_cfg.soft_output = true;
        let soft = condense(&model, &soft_cfg).unwrap();
        let x0 = DVector::from_fn(model.states(), |_, _| rng.gen_range(-4.0..4.0));
        let hard_sol = solve_qp(&hard.assemble_qp(&x0).unwrap(), None);
        if hard_sol.status != QpStatus::Optimal {
            continue;
        }
        let output_weight: f64 = hard
            .row_kinds()
            .iter()
            .zip(hard_sol.multipliers.iter())
            .filter(|(k, _)| **k == RowKind::Output)
            .map(|(_, l)| *l)
            .sum();
        let step = soft.step(&mut QpSolver::new(), &x0).unwrap();
        let nm = hard.num_variables();
        if output_weight == 0.0 {
            // the hard optimum is feasible for the soft problem with sigma = 0
            assert!(step.sigma <= 1e-12, "seed {seed}: sigma {}", step.sigma);
            assert!((step.u_sequence.rows(0, nm) - hard_sol.z_star.rows(0, nm)).amax() <= 1e-8);
            idle += 1;
        } else {
            // quadratic penalty: sigma is of order (output multipliers) / (2 rho)
            assert!(step.sigma <= output_weight / soft_cfg.rho + 1e-9, "seed {seed}");
            binding += 1;
        }
    }
    assert!(idle > 10 && binding > 5, "idle {idle}, binding {binding}");
}
