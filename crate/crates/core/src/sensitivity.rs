//! Forward variational equations.
//!
//! The state is integrated together with the sensitivity matrix
//! `S = ∂x/∂c`, which obeys `Ṡ = f'ₓ(t, x) S`. All columns share one
//! augmented integration so they see the same step sequence.

use crate::bvp::{check_finite, BvProblem};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::ode::{integrate, IntegratorConfig, Rhs, Trajectory};

/// Right-hand side of the state plus `cols` sensitivity columns.
///
/// Layout: `[x (n), s_0 (n), s_1 (n), ...]`, one contiguous block per column.
pub struct AugmentedRhs<'a> {
    problem: &'a BvProblem,
    cols: usize,
}

impl<'a> AugmentedRhs<'a> {
    pub fn new(problem: &'a BvProblem, cols: usize) -> Self {
        Self { problem, cols }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Packs a state and an `n × cols` sensitivity matrix into one vector.
    pub fn pack(&self, x: &[f64], s: &Matrix) -> Vec<f64> {
        let n = self.problem.n();
        debug_assert_eq!((s.rows(), s.cols()), (n, self.cols));
        let mut y = Vec::with_capacity(n * (1 + self.cols));
        y.extend_from_slice(x);
        for j in 0..self.cols {
            y.extend(s.column(j));
        }
        y
    }

    /// Extracts the sensitivity matrix from an augmented state.
    pub fn unpack_sensitivity(&self, y: &[f64]) -> Matrix {
        let n = self.problem.n();
        let mut s = Matrix::zeros(n, self.cols);
        for j in 0..self.cols {
            s.set_column(j, &y[n * (j + 1)..n * (j + 2)]);
        }
        s
    }
}

impl Rhs for AugmentedRhs<'_> {
    fn dim(&self) -> usize {
        self.problem.n() * (1 + self.cols)
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.problem.n();
        let (x, s) = y.split_at(n);
        let (dx, ds) = dy.split_at_mut(n);
        self.problem.eval_rhs(t, x, dx);
        match self.problem.rhs_jacobian(t, x) {
            Ok(jac) => {
                for (col, dcol) in s.chunks_exact(n).zip(ds.chunks_exact_mut(n)) {
                    for (i, d) in dcol.iter_mut().enumerate() {
                        *d = jac.row(i).iter().zip(col).map(|(a, b)| a * b).sum();
                    }
                }
            }
            // the integrator turns this into NonFiniteState
            Err(_) => ds.fill(f64::NAN),
        }
    }
}

/// Augmented system for the unknown initial values of `p`.
pub fn augmented_rhs(p: &BvProblem) -> AugmentedRhs<'_> {
    AugmentedRhs::new(p, p.unknowns())
}

/// `∂x(0)/∂c`: column `i` is the unit vector at the `i`-th free index.
pub fn initial_sensitivity(p: &BvProblem) -> Matrix {
    let mut s = Matrix::zeros(p.n(), p.unknowns());
    for (i, &k) in p.free_selector().indices().iter().enumerate() {
        s[(k, i)] = 1.0;
    }
    s
}

/// Result of one forward-sensitivity pass.
#[derive(Debug, Clone)]
pub struct ForwardJacobian {
    pub residual: Vec<f64>,
    /// `(n-m) × (n-m)`, rows by terminal index, columns by free index.
    pub jacobian: Matrix,
    /// `∂x(b)/∂c`, `n × (n-m)`.
    pub sensitivity: Matrix,
    /// State components only.
    pub trajectory: Trajectory,
}

/// Shooting residual and its Jacobian from one augmented integration.
pub fn forward_jacobian(p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<ForwardJacobian> {
    check_finite(c)?;
    let x0 = p.embed_initial(c)?;
    let aug = augmented_rhs(p);
    let y0 = aug.pack(&x0, &initial_sensitivity(p));
    let (a, b) = p.interval();
    let traj = integrate(&aug, a, b, &y0, cfg)?;

    let n = p.n();
    let y_end = traj.final_state();
    let sensitivity = aug.unpack_sensitivity(y_end);
    let residual = p.terminal_mismatch(&y_end[..n])?;
    let rows = p.terminal_selector().indices();
    let k = p.unknowns();
    let mut jacobian = Matrix::zeros(k, k);
    for (r, &j) in rows.iter().enumerate() {
        for i in 0..k {
            jacobian[(r, i)] = sensitivity[(j, i)];
        }
    }
    Ok(ForwardJacobian {
        residual,
        jacobian,
        sensitivity,
        trajectory: traj.truncated(n),
    })
}

/// Full flow derivative `∂x(b; x0)/∂x0` from `S(a) = I`.
pub fn full_sensitivity(p: &BvProblem, x0: &[f64], cfg: &IntegratorConfig) -> Result<Matrix> {
    check_finite(x0)?;
    let n = p.n();
    let aug = AugmentedRhs::new(p, n);
    let y0 = aug.pack(x0, &Matrix::identity(n));
    let (a, b) = p.interval();
    let traj = integrate(&aug, a, b, &y0, cfg)?;
    Ok(aug.unpack_sensitivity(traj.final_state()))
}
