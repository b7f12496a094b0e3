//! QP solver against exhaustive active-set enumeration.

use esmpc::qp::{solve_qp, QpProblem, QpSolver, QpStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Try every working set in order of size and return the first KKT point
/// (primal feasible, nonnegative multipliers). Strict convexity makes it
/// the unique minimizer.
fn enumerate_kkt(p: &QpProblem) -> Option<DVector<f64>> {
    let nz = p.num_variables();
    let nq = p.num_constraints();
    let mut subset = Vec::new();
    for size in 0..=nz.min(nq) {
        if let Some(z) = combos(p, 0, size, &mut subset) {
            return Some(z);
        }
    }
    None
}

fn combos(p: &QpProblem, start: usize, left: usize, chosen: &mut Vec<usize>) -> Option<DVector<f64>> {
    if left == 0 {
        return kkt_point(p, chosen);
    }
    for i in start..p.num_constraints() {
        chosen.push(i);
        let found = combos(p, i + 1, left - 1, chosen);
        chosen.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

fn kkt_point(p: &QpProblem, set: &[usize]) -> Option<DVector<f64>> {
    let nz = p.num_variables();
    let k = set.len();
    let mut kkt = DMatrix::zeros(nz + k, nz + k);
    let mut rhs = DVector::zeros(nz + k);
    kkt.view_mut((0, 0), (nz, nz)).copy_from(p.h());
    rhs.rows_mut(0, nz).copy_from(&-p.f());
    for (c, &i) in set.iter().enumerate() {
        for j in 0..nz {
            kkt[(j, nz + c)] = p.g()[(i, j)];
            kkt[(nz + c, j)] = p.g()[(i, j)];
        }
        rhs[nz + c] = p.w()[i];
    }
    let lu = kkt.lu();
    if lu.determinant().abs() < 1e-12 {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    let z = sol.rows(0, nz).into_owned();
    let lambda = sol.rows(nz, k);
    if lambda.iter().any(|&l| l < -1e-9) {
        return None;
    }
    if p.max_violation(&z) > 1e-9 {
        return None;
    }
    Some(z)
}

fn random_problem(rng: &mut ChaCha8Rng) -> QpProblem {
    let nz = rng.gen_range(1..=8);
    let nq = rng.gen_range(0..=16);
    let m = DMatrix::from_fn(nz, nz, |_, _| rng.gen_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(nz, nz);
    let f = DVector::from_fn(nz, |_, _| rng.gen_range(-5.0..5.0));
    let g = DMatrix::from_fn(nq, nz, |_, _| rng.gen_range(-1.0..1.0));
    // feasible by construction around a random interior point
    let z0 = DVector::from_fn(nz, |_, _| rng.gen_range(-0.5..0.5));
    let w = &g * &z0 + DVector::from_fn(nq, |_, _| rng.gen_range(0.0..1.0));
    QpProblem::new(h, f, g, w).unwrap()
}

#[test]
fn matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut active_total = 0;
    for case in 0..200 {
        let p = random_problem(&mut rng);
        let expected = enumerate_kkt(&p).expect("oracle found no KKT point");
        let sol = solve_qp(&p, None);
        assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
        assert!((&sol.z_star - &expected).amax() <= 1e-6, "case {case}");
        assert!(p.max_violation(&sol.z_star) <= 1e-7);
        assert!(sol.stationarity_residual(&p) <= 1e-6);
        assert!(sol.multipliers.iter().all(|&l| l >= -1e-9));
        let slack = p.g() * &sol.z_star - p.w();
        for (l, s) in sol.multipliers.iter().zip(slack.iter()) {
            assert!((l * s).abs() <= 1e-8, "complementarity {l} * {s}");
        }
        active_total += sol.active_set.len();
    }
    assert!(active_total > 100, "random problems barely exercise constraints");
}

#[test]
fn warm_start_agrees_with_cold_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let p = random_problem(&mut rng);
        let cold = solve_qp(&p, None);
        let warm = solve_qp(&p, Some(&cold.active_set));
        assert!((&warm.z_star - &cold.z_star).amax() <= 1e-8);
        // a stale, partly wrong guess must not change the answer either
        let guess: Vec<usize> = (0..p.num_constraints()).step_by(3).collect();
        let odd = solve_qp(&p, Some(&guess));
        assert!((&odd.z_star - &cold.z_star).amax() <= 1e-8);

        let mut solver = QpSolver::new();
        solver.solve(&p);
        let again = solver.solve(&p);
        assert!((&again.z_star - &cold.z_star).amax() <= 1e-8);
    }
}

#[test]
fn beats_random_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p = random_problem(&mut rng);
        let sol = solve_qp(&p, None);
        let nz = p.num_variables();
        let mut checked = 0;
        while checked < 100 {
            // sample near the optimum, then pull onto the feasible side by
            // alternating projections onto violated half-spaces
            let mut z = &sol.z_star + DVector::from_fn(nz, |_, _| rng.gen_range(-1.0..1.0));
            for _ in 0..200 {
                let mut moved = false;
                for i in 0..p.num_constraints() {
                    let gi = p.g().row(i).transpose();
                    let s = gi.dot(&z) - p.w()[i];
                    if s > 0.0 {
                        z -= &gi * ((s + 1e-12) / gi.norm_squared());
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
            if p.max_violation(&z) > 0.0 {
                continue;
            }
            assert!(sol.objective <= p.objective(&z) + 1e-9);
            checked += 1;
        }
    }
}

#[test]
fn infeasible_system_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let nz = rng.gen_range(1..=6);
        let g_row = DVector::from_fn(nz, |_, _| rng.gen_range(-1.0..1.0));
        // g z <= -1 and -g z <= -1 cannot both hold
        let mut g = DMatrix::zeros(2, nz);
        g.set_row(0, &g_row.transpose());
        g.set_row(1, &(-g_row.transpose()));
        let p = QpProblem::new(
            DMatrix::identity(nz, nz),
            DVector::from_fn(nz, |_, _| rng.gen_range(-1.0..1.0)),
            g,
            DVector::from_vec(vec![-1.0, -1.0]),
        )
        .unwrap();
        assert_eq!(solve_qp(&p, None).status, QpStatus::Infeasible);
    }
}
