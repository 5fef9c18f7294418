//! Two-point boundary value problems with separated, explicit boundary data.
//!
//! Some state components are fixed at the left endpoint, the remaining ones
//! are unknown there, and an equal number of components are prescribed at the
//! right endpoint. Index sets are kept as sorted, 0-based index lists
//! ([`Selector`]); the 0/1 selection matrices are never formed.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ode::{integrate, IntegratorConfig, Rhs, Trajectory};

pub type RhsFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(f64, &[f64], &mut Matrix) + Send + Sync>;

/// Strictly increasing list of state indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    indices: Vec<usize>,
}

impl Selector {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProblem(format!(
                "selector indices {indices:?} are not strictly increasing"
            )));
        }
        Ok(Self { indices })
    }

    /// All indices in `0..n` that are not in `self`.
    pub fn complement(&self, n: usize) -> Selector {
        let indices = (0..n).filter(|i| self.indices.binary_search(i).is_err()).collect();
        Selector { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Gathers `x[indices[k]]` into position `k`.
    pub fn select(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.indices
            .iter()
            .map(|&i| {
                x.get(i)
                    .copied()
                    .ok_or(Error::IndexOutOfRange { index: i, dim: x.len() })
            })
            .collect()
    }

    /// Writes `values[k]` into `x[indices[k]]`.
    pub fn scatter(&self, values: &[f64], x: &mut [f64]) -> Result<()> {
        if values.len() != self.indices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.indices.len(),
                found: values.len(),
            });
        }
        for (&i, &v) in self.indices.iter().zip(values) {
            let dim = x.len();
            *x.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, dim })? = v;
        }
        Ok(())
    }
}

pub fn select(s: &Selector, x: &[f64]) -> Result<Vec<f64>> {
    s.select(x)
}

#[derive(Clone)]
pub struct BvProblem {
    n: usize,
    interval: (f64, f64),
    rhs: RhsFn,
    jacobian: Option<JacobianFn>,
    fixed: Selector,
    fixed_values: Vec<f64>,
    free: Selector,
    terminal: Selector,
    terminal_values: Vec<f64>,
}

impl fmt::Debug for BvProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BvProblem")
            .field("n", &self.n)
            .field("interval", &self.interval)
            .field("fixed", &self.fixed.indices)
            .field("fixed_values", &self.fixed_values)
            .field("terminal", &self.terminal.indices)
            .field("terminal_values", &self.terminal_values)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl BvProblem {
    /// `fixed_initial` and `target_terminal` are `(index, value)` pairs with
    /// 0-based, strictly increasing indices.
    pub fn new<F>(
        n: usize,
        interval: (f64, f64),
        rhs: F,
        fixed_initial: &[(usize, f64)],
        target_terminal: &[(usize, f64)],
    ) -> Result<Self>
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidProblem(format!("interval [{a}, {b}] must satisfy a < b")));
        }
        if n == 0 {
            return Err(Error::InvalidProblem("state dimension must be positive".into()));
        }
        let fixed = Selector::new(fixed_initial.iter().map(|p| p.0).collect())?;
        let terminal = Selector::new(target_terminal.iter().map(|p| p.0).collect())?;
        if let Some(&i) = fixed.indices.iter().chain(&terminal.indices).find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        let m = fixed.len();
        if m >= n {
            return Err(Error::InvalidProblem(format!(
                "{m} fixed initial values leave no unknowns in dimension {n}"
            )));
        }
        if terminal.len() != n - m {
            return Err(Error::InvalidProblem(format!(
                "expected {} terminal conditions, got {}",
                n - m,
                terminal.len()
            )));
        }
        let fixed_values: Vec<f64> = fixed_initial.iter().map(|p| p.1).collect();
        let terminal_values: Vec<f64> = target_terminal.iter().map(|p| p.1).collect();
        if !fixed_values.iter().chain(&terminal_values).all(|v| v.is_finite()) {
            return Err(Error::InvalidProblem("boundary values must be finite".into()));
        }
        Ok(Self {
            n,
            interval,
            rhs: Arc::new(rhs),
            jacobian: None,
            free: fixed.complement(n),
            fixed,
            fixed_values,
            terminal,
            terminal_values,
        })
    }

    /// Attaches the analytic state Jacobian `∂f/∂x`.
    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &[f64], &mut Matrix) + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of fixed initial values.
    pub fn m(&self) -> usize {
        self.fixed.len()
    }

    /// Number of unknown initial values, `n - m`.
    pub fn unknowns(&self) -> usize {
        self.n - self.fixed.len()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn fixed_selector(&self) -> &Selector {
        &self.fixed
    }

    pub fn free_selector(&self) -> &Selector {
        &self.free
    }

    pub fn terminal_selector(&self) -> &Selector {
        &self.terminal
    }

    pub fn fixed_values(&self) -> &[f64] {
        &self.fixed_values
    }

    pub fn terminal_values(&self) -> &[f64] {
        &self.terminal_values
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval_rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.rhs)(t, x, dx)
    }

    /// The state equation as an integrable right-hand side.
    pub fn rhs(&self) -> ProblemRhs<'_> {
        ProblemRhs(self)
    }

    /// `∂f/∂x` at `(t, x)`: the analytic Jacobian if attached, otherwise
    /// central differences.
    pub fn rhs_jacobian(&self, t: f64, x: &[f64]) -> Result<Matrix> {
        match &self.jacobian {
            Some(jac) => {
                let mut m = Matrix::zeros(self.n, self.n);
                jac(t, x, &mut m);
                if m.is_finite() {
                    Ok(m)
                } else {
                    Err(Error::NonFiniteState { t })
                }
            }
            None => self.fd_rhs_jacobian(t, x),
        }
    }

    /// Central-difference `∂f/∂x` with `h_i = √ε (1 + |x_i|)`.
    pub fn fd_rhs_jacobian(&self, t: f64, x: &[f64]) -> Result<Matrix> {
        let n = self.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let sqrt_eps = f64::EPSILON.sqrt();
        let mut jac = Matrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = sqrt_eps * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            self.eval_rhs(t, &xp, &mut fp);
            xp[j] = x[j] - h;
            self.eval_rhs(t, &xp, &mut fm);
            xp[j] = x[j];
            // the actual spacing after rounding
            let width = (x[j] + h) - (x[j] - h);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / width;
            }
        }
        if jac.is_finite() {
            Ok(jac)
        } else {
            Err(Error::NonFiniteState { t })
        }
    }

    /// Initial state with fixed components from the boundary data and free
    /// components taken from `c` in ascending index order.
    pub fn embed_initial(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.unknowns() {
            return Err(Error::DimensionMismatch {
                expected: self.unknowns(),
                found: c.len(),
            });
        }
        let mut x0 = vec![0.0; self.n];
        self.fixed.scatter(&self.fixed_values, &mut x0)?;
        self.free.scatter(c, &mut x0)?;
        Ok(x0)
    }

    /// Terminal mismatch `x_j(b) - y_T` for `j` in the terminal index set.
    pub fn terminal_mismatch(&self, x_end: &[f64]) -> Result<Vec<f64>> {
        let selected = self.terminal.select(x_end)?;
        Ok(selected.iter().zip(&self.terminal_values).map(|(x, y)| x - y).collect())
    }

    /// Shooting residual `F(c)` together with the state trajectory it came from.
    pub fn residual(&self, c: &[f64], cfg: &IntegratorConfig) -> Result<(Vec<f64>, Trajectory)> {
        check_finite(c)?;
        let x0 = self.embed_initial(c)?;
        let (a, b) = self.interval;
        let traj = integrate(&self.rhs(), a, b, &x0, cfg)?;
        let f = self.terminal_mismatch(traj.final_state())?;
        Ok((f, traj))
    }
}

pub(crate) fn check_finite(c: &[f64]) -> Result<()> {
    if c.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("non-finite unknowns {c:?}")))
    }
}

pub struct ProblemRhs<'a>(&'a BvProblem);

impl Rhs for ProblemRhs<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        self.0.eval_rhs(t, x, dx)
    }
}

pub fn embed_initial(p: &BvProblem, c: &[f64]) -> Result<Vec<f64>> {
    p.embed_initial(c)
}

pub fn residual(p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<(Vec<f64>, Trajectory)> {
    p.residual(c, cfg)
}

pub fn fd_rhs_jacobian(p: &BvProblem, t: f64, x: &[f64]) -> Result<Matrix> {
    p.fd_rhs_jacobian(t, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero_dynamics() -> BvProblem {
        BvProblem::new(
            2,
            (0.0, 1.0),
            |_t, _x, dx: &mut [f64]| dx.fill(0.0),
            &[(0, 0.0)],
            &[(1, 3.0)],
        )
        .unwrap()
    }

    fn example1() -> BvProblem {
        BvProblem::new(
            2,
            (0.0, 1.0),
            |_t, x: &[f64], dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = 2.0 * x[0] * x[1];
            },
            &[(0, 0.0)],
            &[(0, 2.0)],
        )
        .unwrap()
    }

    fn three_state() -> BvProblem {
        BvProblem::new(
            3,
            (0.0, 1.0),
            |_t, _x, dx: &mut [f64]| dx.fill(0.0),
            &[(0, 7.0), (2, 9.0)],
            &[(1, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn embed_scatters_free_values() {
        assert_eq!(example1().embed_initial(&[1.1596576]).unwrap(), vec![0.0, 1.1596576]);
        assert_eq!(three_state().embed_initial(&[4.0]).unwrap(), vec![7.0, 4.0, 9.0]);
        let five = BvProblem::new(
            5,
            (0.0, 5.0),
            |_t, _x, dx: &mut [f64]| dx.fill(0.0),
            &[(0, 0.0), (1, 1.0), (3, 1.0)],
            &[(1, 0.0), (3, 0.0)],
        )
        .unwrap();
        assert_eq!(
            five.embed_initial(&[-1.0, -1.0]).unwrap(),
            vec![0.0, 1.0, -1.0, 1.0, -1.0]
        );
        assert_eq!(five.free_selector().indices(), &[2, 4]);
        assert!(matches!(
            five.embed_initial(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn selector_gather() {
        let s = Selector::new(vec![1, 3]).unwrap();
        assert_eq!(s.select(&[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap(), vec![20.0, 40.0]);
        let all = Selector::new((0..4).collect()).unwrap();
        assert_eq!(all.select(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let bad = Selector::new(vec![4]).unwrap();
        assert_eq!(
            bad.select(&[1.0, 2.0, 3.0]),
            Err(Error::IndexOutOfRange { index: 4, dim: 3 })
        );
        assert!(Selector::new(vec![2, 2]).is_err());
        assert_eq!(s.complement(5).indices(), &[0, 2, 4]);
    }

    #[test]
    fn construction_is_validated() {
        let rhs = |_t: f64, _x: &[f64], dx: &mut [f64]| dx.fill(0.0);
        // no unknowns
        assert!(BvProblem::new(2, (0.0, 1.0), rhs, &[(0, 0.0), (1, 0.0)], &[]).is_err());
        // wrong number of terminal conditions
        assert!(BvProblem::new(2, (0.0, 1.0), rhs, &[(0, 0.0)], &[(0, 1.0), (1, 1.0)]).is_err());
        // reversed interval
        assert!(BvProblem::new(2, (1.0, 0.0), rhs, &[(0, 0.0)], &[(1, 1.0)]).is_err());
        // index out of range
        assert!(matches!(
            BvProblem::new(2, (0.0, 1.0), rhs, &[(0, 0.0)], &[(2, 1.0)]),
            Err(Error::IndexOutOfRange { index: 2, dim: 2 })
        ));
    }

    #[test]
    fn residual_of_constant_dynamics() {
        let p = zero_dynamics();
        let (f, _) = p.residual(&[1.25], &IntegratorConfig::default()).unwrap();
        assert_eq!(f, vec![1.25 - 3.0]);
    }

    #[test]
    fn residual_at_known_solution() {
        let (f, traj) = example1().residual(&[1.1596576], &IntegratorConfig::default()).unwrap();
        assert!(f[0].abs() <= 1e-6, "{f:?}");
        assert_eq!(traj.t_start(), 0.0);
        assert_eq!(traj.t_end(), 1.0);
    }

    #[test]
    fn residual_is_deterministic() {
        let p = example1();
        let cfg = IntegratorConfig::default();
        let (f1, _) = p.residual(&[0.8], &cfg).unwrap();
        let (f2, _) = p.residual(&[0.8], &cfg).unwrap();
        assert_eq!(f1[0].to_bits(), f2[0].to_bits());
    }

    #[test]
    fn fd_jacobian_of_linear_rhs() {
        let p = BvProblem::new(
            2,
            (0.0, 1.0),
            |_t, x: &[f64], dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = 0.0;
            },
            &[(0, 0.0)],
            &[(0, 1.0)],
        )
        .unwrap();
        let j = p.fd_rhs_jacobian(0.3, &[0.7, -1.2]).unwrap();
        assert!(j.max_abs_diff(&Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]])) < 1e-7);
    }

    #[test]
    fn fd_jacobian_of_example1() {
        let j = example1().fd_rhs_jacobian(0.0, &[1.0, 2.0]).unwrap();
        assert!(
            j.max_abs_diff(&Matrix::from_rows(&[[0.0, 1.0], [4.0, 2.0]])) < 1e-6,
            "{j:?}"
        );
    }

    #[test]
    fn fd_jacobian_of_constant_rhs() {
        let p = BvProblem::new(
            2,
            (0.0, 1.0),
            |_t, _x, dx: &mut [f64]| dx.fill(3.5),
            &[(0, 0.0)],
            &[(1, 1.0)],
        )
        .unwrap();
        assert!(p.fd_rhs_jacobian(0.0, &[5.0, -2.0]).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn analytic_jacobian_is_preferred() {
        let p = example1().with_jacobian(|_t, x, j| {
            j.fill(0.0);
            j[(0, 1)] = 1.0;
            j[(1, 0)] = 2.0 * x[1];
            j[(1, 1)] = 2.0 * x[0];
        });
        assert!(p.has_analytic_jacobian());
        let j = p.rhs_jacobian(0.0, &[1.0, 2.0]).unwrap();
        assert_eq!(j, Matrix::from_rows(&[[0.0, 1.0], [4.0, 2.0]]));
    }

    proptest! {
        #[test]
        fn embed_select_round_trip(c in prop::collection::vec(-1e6f64..1e6, 2)) {
            let p = BvProblem::new(
                5,
                (0.0, 1.0),
                |_t, _x, dx: &mut [f64]| dx.fill(0.0),
                &[(0, 0.5), (2, -1.5), (3, 2.0)],
                &[(1, 0.0), (4, 0.0)],
            )
            .unwrap();
            let x0 = p.embed_initial(&c).unwrap();
            prop_assert_eq!(p.free_selector().select(&x0).unwrap(), c);
            prop_assert_eq!(p.fixed_selector().select(&x0).unwrap(), p.fixed_values().to_vec());
        }
    }
}
