//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 z' H z + f' z
//!     subject to  G z <= w
//! ```
//!
//! with a dual active-set method (Goldfarb-Idnani): start from the
//! unconstrained minimizer, repeatedly add the most violated constraint,
//! and drop active constraints whose multipliers would turn negative.
//! Every iterate is dual feasible, so no phase-one point is needed and an
//! empty feasible set is detected when a violated constraint cannot be
//! added.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const MODULE: &str = "qp";

/// Smallest admissible eigenvalue of the symmetrized Hessian.
pub const MIN_HESSIAN_EIGENVALUE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    h: DMatrix<f64>,
    f: DVector<f64>,
    g: DMatrix<f64>,
    w: DVector<f64>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, f: DVector<f64>, g: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        let nz = f.len();
        if h.shape() != (nz, nz) {
            return Err(Error::dim(MODULE, format!("H is {:?}, f has {nz} entries", h.shape())));
        }
        if g.ncols() != nz || g.nrows() != w.len() {
            return Err(Error::dim(
                MODULE,
                format!("G is {:?}, w has {} entries", g.shape(), w.len()),
            ));
        }
        let finite = h.iter().chain(f.iter()).chain(g.iter()).chain(w.iter());
        if !finite.into_iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(MODULE, "non-finite problem data"));
        }
        let h = (&h + h.transpose()) * 0.5;
        if nz > 0 {
            let min_eig = h.clone().symmetric_eigenvalues().min();
            if min_eig < MIN_HESSIAN_EIGENVALUE {
                return Err(Error::invalid(
                    MODULE,
                    format!("Hessian min eigenvalue {min_eig:e} below {MIN_HESSIAN_EIGENVALUE:e}"),
                ));
            }
        }
        Ok(Self { h, f, g, w })
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let nz = f.len();
        Self::new(h, f, DMatrix::zeros(0, nz), DVector::zeros(0))
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }
    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }
    pub fn num_variables(&self) -> usize {
        self.f.len()
    }
    pub fn num_constraints(&self) -> usize {
        self.w.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.f.dot(z)
    }

    /// Largest value of `G z - w` (negative infinity without constraints).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        (&self.g * z - &self.w)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z_star: DVector<f64>,
    pub objective: f64,
    /// Active constraint indices, ascending.
    pub active_set: Vec<usize>,
    /// One multiplier per constraint row; zero off the active set.
    pub multipliers: DVector<f64>,
    pub status: QpStatus,
    /// Number of active-set changes.
    pub iterations: usize,
}

impl QpSolution {
    /// Norm of `H z + f + G' lambda`.
    pub fn stationarity_residual(&self, p: &QpProblem) -> f64 {
        (p.h() * &self.z_star + p.f() + p.g().transpose() * &self.multipliers).amax()
    }
}

/// Largest residual accepted on the returned point, relative to `1 + |w|`.
const ACCEPT_TOL: f64 = 1e-7;

fn feasibility_tol(w: f64) -> f64 {
    1e-10 * (1.0 + w.abs())
}

/// Solve from a cold start or with a preferred initial working set.
pub fn solve_qp(p: &QpProblem, warm_start: Option<&[usize]>) -> QpSolution {
    let mut solver = QpSolver::new();
    solver.solve_with(p, warm_start.unwrap_or(&[]))
}

/// Solver workspace that remembers the last active set and offers it as
/// the warm start for the next call.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    last_active: Vec<usize>,
    warm: bool,
}

impl QpSolver {
    pub fn new() -> Self {
        Self {
            last_active: Vec::new(),
            warm: true,
        }
    }

    pub fn cold() -> Self {
        Self {
            last_active: Vec::new(),
            warm: false,
        }
    }

    pub fn last_active_set(&self) -> &[usize] {
        &self.last_active
    }

    pub fn reset(&mut self) {
        self.last_active.clear();
    }

    pub fn solve(&mut self, p: &QpProblem) -> QpSolution {
        let warm = if self.warm {
            std::mem::take(&mut self.last_active)
        } else {
            Vec::new()
        };
        let sol = self.solve_with(p, &warm);
        self.last_active = if sol.status == QpStatus::Optimal {
            sol.active_set.clone()
        } else {
            Vec::new()
        };
        sol
    }

    fn solve_with(&mut self, p: &QpProblem, warm: &[usize]) -> QpSolution {
        let nz = p.num_variables();
        let nq = p.num_constraints();
        let chol = p
            .h()
            .clone()
            .cholesky()
            .expect("QpProblem guarantees a positive definite Hessian");
        let limit = 50 * (nz + nq);

        let mut z = -chol.solve(p.f());
        let mut active: Vec<usize> = Vec::new();
        let mut mult: Vec<f64> = Vec::new();
        let mut iterations = 0;
        let mut pending: Vec<usize> = Vec::new();
        for &i in warm {
            if i < nq && !pending.contains(&i) {
                pending.push(i);
            }
        }

        let status = 'outer: loop {
            let slack = p.g() * &z - p.w();
            let candidate = pick_violated(&slack, p.w(), &active, &mut pending);
            let Some(add) = candidate else {
                break QpStatus::Optimal;
            };
            let n_add = p.g().row(add).transpose();
            let mut t_add = 0.0;

            loop {
                if iterations >= limit {
                    break 'outer QpStatus::IterationLimit;
                }
                let Some((dz, du)) = directions(&chol, p.g(), &active, &n_add) else {
                    // Reduced Hessian of the working set lost definiteness.
                    break 'outer QpStatus::Infeasible;
                };
                let hinv_n = chol.solve(&n_add);
                let curvature = n_add.dot(&hinv_n);
                let rate = n_add.dot(&dz);

                // blocking active constraint in the dual space
                let mut block: Option<(usize, f64)> = None;
                for (k, (&uk, &duk)) in mult.iter().zip(du.iter()).enumerate() {
                    if duk < 0.0 {
                        let t = -uk / duk;
                        if block.is_none_or(|(_, tb)| t < tb) {
                            block = Some((k, t));
                        }
                    }
                }

                if rate.abs() <= 1e-12 * curvature {
                    // n_add is dependent on the working set: only the dual moves
                    let Some((k, t)) = block else {
                        break 'outer QpStatus::Infeasible;
                    };
                    step_dual(&mut mult, &du, t);
                    t_add += t;
                    active.remove(k);
                    mult.remove(k);
                    iterations += 1;
                    continue;
                }

                let s_add = n_add.dot(&z) - p.w()[add];
                let t_full = (s_add / -rate).max(0.0);
                match block {
                    Some((k, t)) if t < t_full => {
                        z += &dz * t;
                        step_dual(&mut mult, &du, t);
                        t_add += t;
                        active.remove(k);
                        mult.remove(k);
                        iterations += 1;
                    }
                    _ => {
                        z += &dz * t_full;
                        step_dual(&mut mult, &du, t_full);
                        t_add += t_full;
                        active.push(add);
                        mult.push(t_add);
                        iterations += 1;
                        break;
                    }
                }
            }
        };

        let mut status = status;
        if status == QpStatus::Optimal {
            polish(p, &chol, &active, &mut z, &mut mult);
            // Near-infeasible sets drive the multipliers up until the
            // working-set rows drift off their bounds.
            let slack = p.g() * &z - p.w();
            if slack.iter().zip(p.w().iter()).any(|(s, w)| *s > ACCEPT_TOL * (1.0 + w.abs())) {
                status = QpStatus::Infeasible;
            }
        }

        let mut multipliers = DVector::zeros(nq);
        for (&i, &u) in active.iter().zip(mult.iter()) {
            multipliers[i] = u;
        }
        let mut active_set = active;
        active_set.sort_unstable();


        QpSolution {
            objective: p.objective(&z),
            z_star: z,
            active_set,
            multipliers,
            status,
            iterations,
        }
    }
}

fn step_dual(mult: &mut [f64], du: &DVector<f64>, t: f64) {
    for (u, d) in mult.iter_mut().zip(du.iter()) {
        *u = (*u + t * d).max(0.0);
    }
}

/// Most violated inactive constraint, preferring still-pending warm-start
/// rows. Ties resolve to the lowest index.
fn pick_violated(
    slack: &DVector<f64>,
    w: &DVector<f64>,
    active: &[usize],
    pending: &mut Vec<usize>,
) -> Option<usize> {
    while let Some(pos) = pending
        .iter()
        .position(|&i| !active.contains(&i) && slack[i] > feasibility_tol(w[i]))
    {
        let i = pending.remove(pos);
        return Some(i);
    }
    pending.clear();

    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in slack.iter().enumerate() {
        if active.contains(&i) || s <= feasibility_tol(w[i]) {
            continue;
        }
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Primal and dual directions for raising the multiplier of `n_add` by one
/// unit while the working-set constraints stay tight.
fn directions(
    chol: &Cholesky<f64, Dyn>,
    g: &DMatrix<f64>,
    active: &[usize],
    n_add: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let hinv_n = chol.solve(n_add);
    if active.is_empty() {
        return Some((-hinv_n, DVector::zeros(0)));
    }
    let n_act = working_matrix(g, active);
    let hinv_act = chol.solve(&n_act);
    let schur = n_act.transpose() * &hinv_act;
    let schur_chol = schur.cholesky()?;
    let du = -schur_chol.solve(&(n_act.transpose() * &hinv_n));
    let dz = -(hinv_n + hinv_act * &du);
    Some((dz, du))
}

fn working_matrix(g: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    let nz = g.ncols();
    DMatrix::from_fn(nz, active.len(), |r, c| g[(active[c], r)])
}

/// Re-solve the equality-constrained problem on the final working set to
/// remove drift accumulated over the partial steps.
fn polish(
    p: &QpProblem,
    chol: &Cholesky<f64, Dyn>,
    active: &[usize],
    z: &mut DVector<f64>,
    mult: &mut [f64],
) {
    let hinv_f = chol.solve(p.f());
    if active.is_empty() {
        *z = -hinv_f;
        return;
    }
    let n_act = working_matrix(p.g(), active);
    let hinv_act = chol.solve(&n_act);
    let Some(schur) = (n_act.transpose() * &hinv_act).cholesky() else {
        return;
    };
    let w_act = DVector::from_iterator(active.len(), active.iter().map(|&i| p.w()[i]));
    // N' z = w with z = -H^-1 (f + N u)
    let u = -schur.solve(&(w_act + n_act.transpose() * &hinv_f));
    if u.iter().any(|&v| v < -1e-9) {
        return;
    }
    *z = -(hinv_f + hinv_act * &u);
    for (m, v) in mult.iter_mut().zip(u.iter()) {
        *m = v.max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(cons: Option<f64>) -> QpProblem {
        let h = DMatrix::from_element(1, 1, 1.0);
        let f = DVector::from_element(1, -1.0);
        match cons {
            None => QpProblem::unconstrained(h, f).unwrap(),
            Some(ub) => QpProblem::new(h, f, DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, ub)).unwrap(),
        }
    }

    #[test]
    fn unconstrained_minimum() {
        let sol = solve_qp(&scalar_problem(None), None);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z_star[0] - 1.0).abs() < 1e-15);
        assert!((sol.objective + 0.5).abs() < 1e-15);
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn clipped_minimum() {
        let sol = solve_qp(&scalar_problem(Some(0.5)), None);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z_star[0] - 0.5).abs() < 1e-15);
        assert_eq!(sol.active_set, vec![0]);
        assert!((sol.multipliers[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // z <= -1 and -z <= -1
        let p = QpProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![-1.0, -1.0]),
        )
        .unwrap();
        assert_eq!(solve_qp(&p, None).status, QpStatus::Infeasible);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(QpProblem::unconstrained(h, DVector::zeros(2)).is_err());
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        assert!(QpProblem::unconstrained(h, DVector::zeros(2)).is_err());
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        let h = DMatrix::identity(2, 2);
        assert!(QpProblem::unconstrained(h.clone(), DVector::zeros(3)).is_err());
        assert!(QpProblem::new(h.clone(), DVector::zeros(2), DMatrix::zeros(1, 2), DVector::zeros(2)).is_err());
        assert!(QpProblem::unconstrained(h, DVector::from_element(2, f64::NAN)).is_err());
    }

    #[test]
    fn duplicate_constraints_are_handled() {
        // the same row twice plus a parallel looser copy
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-2.0, -2.0]),
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0]),
            DVector::from_vec(vec![1.0, 1.0, 3.0]),
        )
        .unwrap();
        let sol = solve_qp(&p, None);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z_star[0] - 0.5).abs() < 1e-12);
        assert!((sol.z_star[1] - 0.5).abs() < 1e-12);
        assert!(sol.stationarity_residual(&p) < 1e-9);
    }

    #[test]
    fn warm_start_reuses_active_set() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-2.0, -3.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let mut solver = QpSolver::new();
        let cold = solver.solve(&p);
        assert_eq!(cold.active_set, vec![0, 1]);
        let warm = solver.solve(&p);
        assert!((warm.z_star - cold.z_star).amax() < 1e-12);
        assert_eq!(warm.active_set, cold.active_set);
    }
}
