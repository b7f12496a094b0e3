//! Linear time-invariant state-space models.
//!
//! Continuous models are sampled with an exact zero-order hold, and a
//! discrete plant can be augmented with a constant-over-horizon reference
//! model and an incremental input so that tracking becomes a regulation
//! problem on the tracking-error output.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MODULE: &str = "lti";

fn check_finite(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(MODULE, format!("{name} has non-finite entries")))
    }
}

fn check_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::dim(
            MODULE,
            format!("{name} is {:?}, expected ({rows}, {cols})", m.shape()),
        ))
    }
}

fn check_abcd(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    let p = c.nrows();
    check_shape("A", a, n, n)?;
    check_shape("B", b, n, m)?;
    check_shape("C", c, p, n)?;
    check_shape("D", d, p, m)?;
    for (name, mat) in [("A", a), ("B", b), ("C", c), ("D", d)] {
        check_finite(name, mat)?;
    }
    Ok(())
}

/// `dx/dt = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl ContinuousStateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        check_abcd(&a, &b, &c, &d)?;
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// `x(k+1) = A x(k) + B u(k)`, `y(k) = C x(k) + D u(k)` sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    dt: f64,
}

impl DiscreteStateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        check_abcd(&a, &b, &c, &d)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(MODULE, format!("sample time {dt} must be > 0")));
        }
        Ok(Self { a, b, c, d, dt })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn next_state(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u
    }
}

/// Componentwise box bounds on states, inputs and outputs. Infinite
/// entries mean "unbounded".
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub xmin: DVector<f64>,
    pub xmax: DVector<f64>,
    pub umin: DVector<f64>,
    pub umax: DVector<f64>,
    pub ymin: DVector<f64>,
    pub ymax: DVector<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize, m: usize, p: usize) -> Self {
        let inf = |k| DVector::from_element(k, f64::INFINITY);
        let ninf = |k| DVector::from_element(k, f64::NEG_INFINITY);
        Self {
            xmin: ninf(n),
            xmax: inf(n),
            umin: ninf(m),
            umax: inf(m),
            ymin: ninf(p),
            ymax: inf(p),
        }
    }

    pub fn validate(&self, n: usize, m: usize, p: usize) -> Result<()> {
        let pairs = [
            ("x", &self.xmin, &self.xmax, n),
            ("u", &self.umin, &self.umax, m),
            ("y", &self.ymin, &self.ymax, p),
        ];
        for (name, lo, hi, len) in pairs {
            if lo.len() != len || hi.len() != len {
                return Err(Error::dim(
                    MODULE,
                    format!("{name} bounds have lengths {}/{}, expected {len}", lo.len(), hi.len()),
                ));
            }
            for (i, (l, h)) in lo.iter().zip(hi.iter()).enumerate() {
                if l.is_nan() || h.is_nan() || l > h {
                    return Err(Error::invalid(
                        MODULE,
                        format!("{name} bound {i}: min {l} > max {h}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Reference prediction model `r(k+1) = A_r r(k)` with tracking error
/// `y_e = C x - C_r r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub a_r: DMatrix<f64>,
    pub c_r: DMatrix<f64>,
    pub r_r: DVector<f64>,
}

impl ReferenceModel {
    /// Constant reference on the outputs selected by `c_r`.
    pub fn constant(c_r: DMatrix<f64>) -> Self {
        let nr = c_r.ncols();
        Self {
            a_r: DMatrix::identity(nr, nr),
            c_r,
            r_r: DVector::zeros(nr),
        }
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Degree-13 Padé coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a [13/13] Padé
/// approximant.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::dim(MODULE, format!("expm of non-square {:?}", m.shape())));
    }
    check_finite("M", m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = one_norm(m);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as i32
    } else {
        0
    };
    let a = m * 2f64.powi(-squarings);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let lu = (&v - &u).lu();
    let mut r = lu
        .solve(&(&v + &u))
        .ok_or_else(|| Error::invalid(MODULE, "singular Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Exact zero-order-hold sampling. Both `A_d = exp(A dt)` and
/// `B_d = int_0^dt exp(A s) ds B` come out of one exponential of the
/// block matrix `[[A, B], [0, 0]] dt`.
pub fn zoh_discretize(sys: &ContinuousStateSpace, dt: f64) -> Result<DiscreteStateSpace> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(MODULE, format!("sample time {dt} must be > 0")));
    }
    let n = sys.states();
    let m = sys.inputs();
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * dt));
    block.view_mut((0, n), (n, m)).copy_from(&(sys.b() * dt));
    let e = matrix_exponential(&block)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    DiscreteStateSpace::new(ad, bd, sys.c().clone(), sys.d().clone(), dt)
}

/// Extend a plant with the reference model and, optionally, an input
/// memory so the decision variable becomes the input increment.
///
/// State layout is `[x; r; u_prev]` (`u_prev` only when `incremental`).
/// Outputs are `[y; y_e]` with `y_e = C x - C_r r`; when incremental, the
/// applied input is `u_prev + dv` so `D` acts on both.
pub fn augment_for_tracking(
    plant: &DiscreteStateSpace,
    reference: &ReferenceModel,
    incremental: bool,
) -> Result<DiscreteStateSpace> {
    let n = plant.states();
    let m = plant.inputs();
    let p = plant.outputs();
    let nr = reference.a_r.nrows();
    check_shape("A_r", &reference.a_r, nr, nr)?;
    check_shape("C_r", &reference.c_r, p, nr)?;
    if reference.r_r.len() != nr {
        return Err(Error::dim(MODULE, "reference state length differs from A_r"));
    }

    let nu = if incremental { m } else { 0 };
    let na = n + nr + nu;
    let mut a = DMatrix::zeros(na, na);
    let mut b = DMatrix::zeros(na, m);
    let mut c = DMatrix::zeros(2 * p, na);
    let mut d = DMatrix::zeros(2 * p, m);

    a.view_mut((0, 0), (n, n)).copy_from(plant.a());
    a.view_mut((n, n), (nr, nr)).copy_from(&reference.a_r);
    b.view_mut((0, 0), (n, m)).copy_from(plant.b());
    if incremental {
        a.view_mut((0, n + nr), (n, m)).copy_from(plant.b());
        a.view_mut((n + nr, n + nr), (m, m)).fill_with_identity();
        b.view_mut((n + nr, 0), (m, m)).fill_with_identity();
    }

    for block in 0..2 {
        let row = block * p;
        c.view_mut((row, 0), (p, n)).copy_from(plant.c());
        d.view_mut((row, 0), (p, m)).copy_from(plant.d());
        if incremental {
            c.view_mut((row, n + nr), (p, m)).copy_from(plant.d());
        }
    }
    c.view_mut((p, n), (p, nr)).copy_from(&(-&reference.c_r));

    DiscreteStateSpace::new(a, b, c, d, plant.dt())
}
