//! Condensed finite-horizon linear MPC.
//!
//! The predicted states are eliminated through the prediction matrices so
//! the QP decision vector holds only the `N_u` free input moves, plus one
//! shared slack when output bounds are softened. Beyond the control
//! horizon the input follows the terminal law `u = K_f x`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{Bounds, DiscreteStateSpace};
use crate::qp::{QpProblem, QpSolver, QpStatus};

const MODULE: &str = "mpc";

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Prediction horizon `N`.
    pub horizon: usize,
    /// Number of free moves `N_u`.
    pub control_horizon: usize,
    /// Input bounds are enforced for steps `0..N_cu`.
    pub input_constraint_horizon: usize,
    /// State and output bounds are enforced for steps `1..=N_c`.
    pub constraint_horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub k_f: DMatrix<f64>,
    pub bounds: Bounds,
    pub soft_output: bool,
    pub rho: f64,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

impl MpcConfig {
    /// Check horizons, weights and bounds against a model with `n`
    /// states, `m` inputs and `p` outputs. Returns every violation found.
    pub fn violations(&self, n: usize, m: usize, p: usize) -> Vec<String> {
        let mut out = Vec::new();
        let (nh, nu, ncu, nc) = (
            self.horizon,
            self.control_horizon,
            self.input_constraint_horizon,
            self.constraint_horizon,
        );
        if nh == 0 {
            out.push("horizon N must be >= 1".to_string());
        }
        if nu == 0 || nu > nh {
            out.push(format!("control horizon N_u={nu} must satisfy 1 <= N_u <= N={nh}"));
        }
        if ncu > nh {
            out.push(format!("input constraint horizon N_cu={ncu} exceeds N={nh}"));
        }
        if nc + 1 > nh {
            out.push(format!("constraint horizon N_c={nc} exceeds N-1={}", nh.saturating_sub(1)));
        }
        let weights = [("Q_M", &self.q, n, n), ("R_M", &self.r, m, m), ("P_M", &self.p, n, n)];
        for (name, w, rows, cols) in weights {
            if w.shape() != (rows, cols) {
                out.push(format!("{name} is {:?}, expected ({rows}, {cols})", w.shape()));
                continue;
            }
            if !w.iter().all(|v| v.is_finite()) || !is_symmetric(w) {
                out.push(format!("{name} must be finite and symmetric"));
                continue;
            }
            let eig = if rows == 0 { 0.0 } else { min_eigenvalue(w) };
            let tol = 1e-10 * w.amax().max(1.0);
            if name == "R_M" {
                if eig <= tol {
                    out.push(format!("R_M must be positive definite (min eigenvalue {eig:e})"));
                }
            } else if eig < -tol {
                out.push(format!("{name} must be positive semidefinite (min eigenvalue {eig:e})"));
            }
        }
        if self.k_f.shape() != (m, n) {
            out.push(format!("K_f is {:?}, expected ({m}, {n})", self.k_f.shape()));
        }
        if let Err(e) = self.bounds.validate(n, m, p) {
            out.push(e.to_string());
        }
        if self.soft_output && !(self.rho.is_finite() && self.rho > 0.0) {
            out.push(format!("slack weight rho={} must be > 0", self.rho));
        }
        out
    }

    pub fn validate(&self, n: usize, m: usize, p: usize) -> Result<()> {
        let v = self.violations(n, m, p);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(MODULE, v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    State,
    Input,
    Output,
}

/// Precomputed condensed QP data for one prediction model.
#[derive(Debug, Clone)]
pub struct CondensedMpc {
    model: DiscreteStateSpace,
    cfg: MpcConfig,
    /// `x_i = phi_i x0 + gamma_i U` stacked for `i = 0..=N`.
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    /// `u_i = psi_i x0 + lambda_i U` stacked for `i = 0..N`.
    psi: DMatrix<f64>,
    lambda: DMatrix<f64>,
    /// Hessian block over the input moves.
    h_u: DMatrix<f64>,
    /// Linear term `f = f_gain x0`.
    f_gain: DMatrix<f64>,
    /// Constraint rows `g_u U <= w0 + w_gain x0` (before the slack column).
    g_u: DMatrix<f64>,
    w0: DVector<f64>,
    w_gain: DMatrix<f64>,
    row_kind: Vec<RowKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub u_applied: DVector<f64>,
    pub u_sequence: DVector<f64>,
    /// `x(i|k)` for `i = 0..=N`.
    pub predicted_states: Vec<DVector<f64>>,
    /// `y(i|k)` for `i = 0..N`.
    pub predicted_outputs: Vec<DVector<f64>>,
    pub qp_status: QpStatus,
    pub sigma: f64,
    pub qp_iterations: usize,
}

pub fn condense(model: &DiscreteStateSpace, cfg: &MpcConfig) -> Result<CondensedMpc> {
    let (n, m, p) = (model.states(), model.inputs(), model.outputs());
    cfg.validate(n, m, p)?;
    let nh = cfg.horizon;
    let nu = cfg.control_horizon;
    let nz = nu * m;
    let a = model.a();
    let b = model.b();

    let mut phi = DMatrix::zeros((nh + 1) * n, n);
    let mut gamma = DMatrix::zeros((nh + 1) * n, nz);
    let mut psi = DMatrix::zeros(nh * m, n);
    let mut lambda = DMatrix::zeros(nh * m, nz);
    phi.view_mut((0, 0), (n, n)).fill_with_identity();

    for i in 0..nh {
        let phi_i = phi.rows(i * n, n).into_owned();
        let gamma_i = gamma.rows(i * n, n).into_owned();
        let (psi_i, lambda_i) = if i < nu {
            let mut sel = DMatrix::zeros(m, nz);
            sel.view_mut((0, i * m), (m, m)).fill_with_identity();
            (DMatrix::zeros(m, n), sel)
        } else {
            (&cfg.k_f * &phi_i, &cfg.k_f * &gamma_i)
        };
        phi.rows_mut((i + 1) * n, n).copy_from(&(a * &phi_i + b * &psi_i));
        gamma.rows_mut((i + 1) * n, n).copy_from(&(a * &gamma_i + b * &lambda_i));
        psi.rows_mut(i * m, m).copy_from(&psi_i);
        lambda.rows_mut(i * m, m).copy_from(&lambda_i);
    }

    let mut h_u = DMatrix::zeros(nz, nz);
    let mut f_gain = DMatrix::zeros(nz, n);
    for i in 1..=nh {
        let w = if i == nh { &cfg.p } else { &cfg.q };
        let g_i = gamma.rows(i * n, n);
        let wg = w * g_i;
        h_u += g_i.transpose() * &wg;
        f_gain += wg.transpose() * phi.rows(i * n, n);
    }
    for i in 0..nh {
        let l_i = lambda.rows(i * m, m);
        let rl = &cfg.r * l_i;
        h_u += l_i.transpose() * &rl;
        f_gain += rl.transpose() * psi.rows(i * m, m);
    }
    h_u *= 2.0;
    f_gain *= 2.0;
    h_u = (&h_u + h_u.transpose()) * 0.5;

    let mut rows = ConstraintRows::new(nz, n);
    let bounds = &cfg.bounds;
    for i in 1..=cfg.constraint_horizon {
        let gx = gamma.rows(i * n, n).into_owned();
        let px = phi.rows(i * n, n).into_owned();
        rows.push_box(&gx, &px, &bounds.xmin, &bounds.xmax, RowKind::State);
    }
    for i in 0..cfg.input_constraint_horizon {
        let gu = lambda.rows(i * m, m).into_owned();
        let pu = psi.rows(i * m, m).into_owned();
        rows.push_box(&gu, &pu, &bounds.umin, &bounds.umax, RowKind::Input);
    }
    for i in 1..=cfg.constraint_horizon {
        let gy = model.c() * gamma.rows(i * n, n) + model.d() * lambda.rows(i * m, m);
        let py = model.c() * phi.rows(i * n, n) + model.d() * psi.rows(i * m, m);
        rows.push_box(&gy, &py, &bounds.ymin, &bounds.ymax, RowKind::Output);
    }
    let (g_u, w0, w_gain, row_kind) = rows.finish();

    Ok(CondensedMpc {
        model: model.clone(),
        cfg: cfg.clone(),
        phi,
        gamma,
        psi,
        lambda,
        h_u,
        f_gain,
        g_u,
        w0,
        w_gain,
        row_kind,
    })
}

struct ConstraintRows {
    nz: usize,
    n: usize,
    g: Vec<f64>,
    w0: Vec<f64>,
    e: Vec<f64>,
    kind: Vec<RowKind>,
}

impl ConstraintRows {
    fn new(nz: usize, n: usize) -> Self {
        Self {
            nz,
            n,
            g: Vec::new(),
            w0: Vec::new(),
            e: Vec::new(),
            kind: Vec::new(),
        }
    }

    /// Rows for `lo <= v <= hi` with `v = free x0 + forced U`.
    fn push_box(
        &mut self,
        forced: &DMatrix<f64>,
        free: &DMatrix<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        kind: RowKind,
    ) {
        for j in 0..forced.nrows() {
            if hi[j].is_finite() {
                self.g.extend(forced.row(j).iter());
                self.e.extend(free.row(j).iter().map(|v| -v));
                self.w0.push(hi[j]);
                self.kind.push(kind);
            }
            if lo[j].is_finite() {
                self.g.extend(forced.row(j).iter().map(|v| -v));
                self.e.extend(free.row(j).iter());
                self.w0.push(-lo[j]);
                self.kind.push(kind);
            }
        }
    }

    fn finish(self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, Vec<RowKind>) {
        let rows = self.w0.len();
        (
            DMatrix::from_row_slice(rows, self.nz, &self.g),
            DVector::from_vec(self.w0),
            DMatrix::from_row_slice(rows, self.n, &self.e),
            self.kind,
        )
    }
}

impl CondensedMpc {
    pub fn model(&self) -> &DiscreteStateSpace {
        &self.model
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    pub fn num_moves(&self) -> usize {
        self.cfg.control_horizon * self.model.inputs()
    }

    /// Decision vector length: the input moves plus the slack, if any.
    pub fn num_variables(&self) -> usize {
        self.num_moves() + usize::from(self.cfg.soft_output)
    }

    /// Bound rows coming from states, inputs and outputs (slack sign row excluded).
    pub fn num_bound_rows(&self) -> usize {
        self.row_kind.len()
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.row_kind
    }

    /// Stacked free response `x0 -> [x_0; ...; x_N]`.
    pub fn free_response(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Stacked forced response `U -> [x_0; ...; x_N]`.
    pub fn forced_response(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn input_maps(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.psi, &self.lambda)
    }

    pub fn hessian_moves(&self) -> &DMatrix<f64> {
        &self.h_u
    }

    /// Hash of the condensed cost and constraint data; changes whenever the
    /// prediction model does.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for m in [&self.h_u, &self.f_gain, &self.g_u, &self.w_gain] {
            m.shape().hash(&mut hasher);
            for v in m.iter() {
                v.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }

    pub fn assemble_qp(&self, x_now: &DVector<f64>) -> Result<QpProblem> {
        let n = self.model.states();
        if x_now.len() != n {
            return Err(Error::dim(MODULE, format!("state has {} entries, expected {n}", x_now.len())));
        }
        if !x_now.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(MODULE, "non-finite state"));
        }
        let nm = self.num_moves();
        let nz = self.num_variables();
        let soft = self.cfg.soft_output;
        let nb = self.row_kind.len();
        let nq = nb + usize::from(soft);

        let mut h = DMatrix::zeros(nz, nz);
        h.view_mut((0, 0), (nm, nm)).copy_from(&self.h_u);
        let mut f = DVector::zeros(nz);
        f.rows_mut(0, nm).copy_from(&(&self.f_gain * x_now));

        let mut g = DMatrix::zeros(nq, nz);
        g.view_mut((0, 0), (nb, nm)).copy_from(&self.g_u);
        let mut w = DVector::zeros(nq);
        w.rows_mut(0, nb).copy_from(&(&self.w0 + &self.w_gain * x_now));

        if soft {
            h[(nm, nm)] = 2.0 * self.cfg.rho;
            for (row, kind) in self.row_kind.iter().enumerate() {
                if *kind == RowKind::Output {
                    g[(row, nm)] = -1.0;
                }
            }
            // sigma >= 0
            g[(nb, nm)] = -1.0;
        }
        QpProblem::new(h, f, g, w)
    }

    /// Open-loop prediction under the move sequence `u_seq`.
    pub fn predict(
        &self,
        x_now: &DVector<f64>,
        u_seq: &DVector<f64>,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let n = self.model.states();
        let m = self.model.inputs();
        let nh = self.cfg.horizon;
        let xs = &self.phi * x_now + &self.gamma * u_seq;
        let us = &self.psi * x_now + &self.lambda * u_seq;
        let states = (0..=nh).map(|i| xs.rows(i * n, n).into_owned()).collect();
        let outputs = (0..nh)
            .map(|i| self.model.output(&xs.rows(i * n, n).into_owned(), &us.rows(i * m, m).into_owned()))
            .collect();
        (states, outputs)
    }

    /// One receding-horizon step: solve, then apply the first move.
    pub fn step(&self, solver: &mut QpSolver, x_now: &DVector<f64>) -> Result<ControlStep> {
        let qp = self.assemble_qp(x_now)?;
        let sol = solver.solve(&qp);
        if sol.status != QpStatus::Optimal {
            return Err(Error::Solve { status: sol.status });
        }
        let m = self.model.inputs();
        let nm = self.num_moves();
        let u_sequence = sol.z_star.rows(0, nm).into_owned();
        let sigma = if self.cfg.soft_output { sol.z_star[nm].max(0.0) } else { 0.0 };
        let (predicted_states, predicted_outputs) = self.predict(x_now, &u_sequence);
        Ok(ControlStep {
            u_applied: u_sequence.rows(0, m).into_owned(),
            u_sequence,
            predicted_states,
            predicted_outputs,
            qp_status: sol.status,
            sigma,
            qp_iterations: sol.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_model() -> DiscreteStateSpace {
        DiscreteStateSpace::new(scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0), 1.0).unwrap()
    }

    fn scalar_cfg(horizon: usize, control_horizon: usize) -> MpcConfig {
        MpcConfig {
            horizon,
            control_horizon,
            input_constraint_horizon: 0,
            constraint_horizon: 0,
            q: scalar(1.0),
            r: scalar(1.0),
            p: scalar(1.0),
            k_f: scalar(0.0),
            bounds: Bounds::unbounded(1, 1, 1),
            soft_output: false,
            rho: 1.0,
        }
    }

    #[test]
    fn one_step_lq_hand_kkt() {
        // cost u^2 + (x + u)^2 -> H = 4, f = 2x, u* = -x/2
        let c = condense(&scalar_model(), &scalar_cfg(1, 1)).unwrap();
        let qp = c.assemble_qp(&DVector::from_element(1, 3.0)).unwrap();
        assert!((qp.h()[(0, 0)] - 4.0).abs() < 1e-15);
        assert!((qp.f()[0] - 6.0).abs() < 1e-15);
        let step = c.step(&mut QpSolver::new(), &DVector::from_element(1, 2.0)).unwrap();
        assert!((step.u_applied[0] + 1.0).abs() < 1e-14);
        assert_eq!(step.sigma, 0.0);
    }

    #[test]
    fn terminal_law_zero_freezes_second_input() {
        let a = 1.2;
        let b = 0.5;
        let model = DiscreteStateSpace::new(scalar(a), scalar(b), scalar(1.0), scalar(0.0), 1.0).unwrap();
        let c = condense(&model, &scalar_cfg(2, 1)).unwrap();
        let (psi, lambda) = c.input_maps();
        assert_eq!(psi.row(1).amax(), 0.0);
        assert_eq!(lambda.row(1).amax(), 0.0);
        let x = DVector::from_element(1, 0.7);
        let u = DVector::from_element(1, -0.3);
        let (xs, _) = c.predict(&x, &u);
        let expected = a * a * 0.7 + a * b * -0.3;
        assert!((xs[2][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn origin_gives_zero_input() {
        let mut cfg = scalar_cfg(5, 3);
        cfg.bounds.umin[0] = -1.0;
        cfg.bounds.umax[0] = 1.0;
        cfg.bounds.ymin[0] = -2.0;
        cfg.bounds.ymax[0] = 2.0;
        cfg.input_constraint_horizon = 3;
        cfg.constraint_horizon = 3;
        cfg.soft_output = true;
        cfg.rho = 100.0;
        let c = condense(&scalar_model(), &cfg).unwrap();
        let qp = c.assemble_qp(&DVector::zeros(1)).unwrap();
        assert_eq!(qp.f().amax(), 0.0);
        let step = c.step(&mut QpSolver::new(), &DVector::zeros(1)).unwrap();
        assert_eq!(step.u_applied[0], 0.0);
        assert_eq!(step.sigma, 0.0);
    }

    #[test]
    fn slack_column_marks_output_rows() {
        let mut cfg = scalar_cfg(4, 2);
        cfg.bounds.umin[0] = -1.0;
        cfg.bounds.umax[0] = 1.0;
        cfg.bounds.ymax[0] = 2.0;
        cfg.input_constraint_horizon = 2;
        cfg.constraint_horizon = 3;
        cfg.soft_output = true;
        let c = condense(&scalar_model(), &cfg).unwrap();
        let qp = c.assemble_qp(&DVector::from_element(1, 0.5)).unwrap();
        assert_eq!(qp.num_variables(), 3);
        let kinds = c.row_kinds();
        for (row, kind) in kinds.iter().enumerate() {
            let expected = if *kind == RowKind::Output { -1.0 } else { 0.0 };
            assert_eq!(qp.g()[(row, 2)], expected);
        }
        assert_eq!(qp.g()[(kinds.len(), 2)], -1.0);
        assert_eq!(kinds.iter().filter(|k| **k == RowKind::Output).count(), 3);
        assert_eq!(kinds.iter().filter(|k| **k == RowKind::Input).count(), 4);
    }

    #[test]
    fn forced_response_is_block_lower_triangular() {
        let model = DiscreteStateSpace::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.9]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.3]),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            0.1,
        )
        .unwrap();
        let cfg = MpcConfig {
            horizon: 6,
            control_horizon: 4,
            input_constraint_horizon: 0,
            constraint_horizon: 0,
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(2, 2),
            p: DMatrix::identity(2, 2),
            k_f: DMatrix::from_element(2, 2, -0.1),
            bounds: Bounds::unbounded(2, 2, 2),
            soft_output: false,
            rho: 1.0,
        };
        let c = condense(&model, &cfg).unwrap();
        let gamma = c.forced_response();
        // x_i depends only on moves 0..i
        for i in 0..=6 {
            for j in i..4 {
                assert_eq!(gamma.view((i * 2, j * 2), (2, 2)).amax(), 0.0, "x_{i} depends on move {j}");
            }
        }
    }

    #[test]
    fn config_violations_are_named() {
        let mut cfg = scalar_cfg(3, 4);
        cfg.constraint_horizon = 3;
        cfg.r = scalar(0.0);
        let v = cfg.violations(1, 1, 1);
        assert!(v.iter().any(|s| s.contains("N_u")));
        assert!(v.iter().any(|s| s.contains("N_c")));
        assert!(v.iter().any(|s| s.contains("R_M")));
        assert!(condense(&scalar_model(), &cfg).is_err());
    }

    #[test]
    fn rejects_wrong_state_length() {
        let c = condense(&scalar_model(), &scalar_cfg(1, 1)).unwrap();
        assert!(c.assemble_qp(&DVector::zeros(2)).is_err());
    }
}
