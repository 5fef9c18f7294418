//! Backward adjoint computation of the shooting Jacobian.
//!
//! For each terminal index `j`, the adjoint `pʲ` solves `ṗ = -f'ₓ(t, x(t))ᵀ p`
//! backward from `pʲ(b) = eⱼ`. The pairing `⟨p(t), δ(t)⟩` with any solution of
//! the linearized equation `δ̇ = f'ₓ δ` is constant in `t`, which gives
//! `∂xⱼ(b)/∂x₀ₖ = pʲₖ(a)`: the rows of the flow derivative are the adjoint
//! values at the left endpoint. The base trajectory `x(t)` is taken from the
//! stored forward pass by Hermite interpolation; the state is never
//! re-integrated backward.

use std::thread;

use crate::bvp::{check_finite, BvProblem};
use crate::error::{Error, Result};
use crate::linalg::{basis_vector, dot, Matrix};
use crate::ode::{integrate, IntegratorConfig, Rhs, Trajectory};
use crate::sensitivity::full_sensitivity;

fn check_covers(p: &BvProblem, state: &Trajectory) -> Result<()> {
    let (a, b) = p.interval();
    let (lo, hi) = (state.t_start().min(state.t_end()), state.t_start().max(state.t_end()));
    if lo > a || hi < b {
        let t = if lo > a { a } else { b };
        return Err(Error::TimeOutOfRange {
            t,
            start: state.t_start(),
            end: state.t_end(),
        });
    }
    if state.dim() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: state.dim(),
        });
    }
    Ok(())
}

/// `ṗ = -f'ₓ(t, x(t))ᵀ p` along a stored state trajectory.
pub struct AdjointRhs<'a> {
    problem: &'a BvProblem,
    state: &'a Trajectory,
}

impl Rhs for AdjointRhs<'_> {
    fn dim(&self) -> usize {
        self.problem.n()
    }

    fn eval(&self, t: f64, p: &[f64], dp: &mut [f64]) {
        let jac = self.state.interpolate(t).and_then(|x| self.problem.rhs_jacobian(t, &x));
        match jac {
            Ok(jac) => {
                for (d, v) in dp.iter_mut().zip(jac.tr_mul_vec(p)) {
                    *d = -v;
                }
            }
            Err(_) => dp.fill(f64::NAN),
        }
    }
}

pub fn adjoint_rhs<'a>(p: &'a BvProblem, state: &'a Trajectory) -> Result<AdjointRhs<'a>> {
    check_covers(p, state)?;
    Ok(AdjointRhs { problem: p, state })
}

/// Integrates one adjoint solution backward from `p(b) = terminal`.
pub fn adjoint_trajectory(
    p: &BvProblem,
    state: &Trajectory,
    terminal: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let rhs = adjoint_rhs(p, state)?;
    let (a, b) = p.interval();
    integrate(&rhs, b, a, terminal, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointColumn {
    /// State index `j` of the terminal condition `pʲ(b) = eⱼ`.
    pub terminal_index: usize,
    pub p_at_a: Vec<f64>,
}

/// Adjoint values at the left endpoint for a set of terminal indices.
#[derive(Debug, Clone)]
pub struct AdjointBundle {
    pub columns: Vec<AdjointColumn>,
    /// Row `r` is `pʲʳ(a)ᵀ`.
    pub assembled: Matrix,
}

impl AdjointBundle {
    pub fn terminal_indices(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.terminal_index).collect()
    }
}

/// Integrates `pʲ` for every `j` in `indices`. The backward passes are
/// independent and run on scoped threads; output order follows `indices`.
pub fn adjoint_bundle(
    p: &BvProblem,
    state: &Trajectory,
    indices: &[usize],
    cfg: &IntegratorConfig,
) -> Result<AdjointBundle> {
    check_covers(p, state)?;
    let n = p.n();
    let results: Vec<Result<AdjointColumn>> = thread::scope(|scope| {
        let handles: Vec<_> = indices
            .iter()
            .map(|&j| {
                scope.spawn(move || {
                    let e = basis_vector(j, n)?;
                    let traj = adjoint_trajectory(p, state, &e, cfg)?;
                    Ok(AdjointColumn {
                        terminal_index: j,
                        p_at_a: traj.final_state().to_vec(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("adjoint worker panicked"))
            .collect()
    });
    let columns = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut assembled = Matrix::zeros(columns.len(), n);
    for (r, col) in columns.iter().enumerate() {
        for (k, v) in col.p_at_a.iter().enumerate() {
            assembled[(r, k)] = *v;
        }
    }
    Ok(AdjointBundle { columns, assembled })
}

#[derive(Debug, Clone)]
pub struct AdjointJacobian {
    pub residual: Vec<f64>,
    pub jacobian: Matrix,
    pub trajectory: Trajectory,
    pub bundle: AdjointBundle,
}

/// Shooting residual and Jacobian from one forward state pass and `n - m`
/// backward adjoint passes.
pub fn adjoint_jacobian(p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<AdjointJacobian> {
    let (residual, trajectory) = p.residual(c, cfg)?;
    let bundle = adjoint_bundle(p, &trajectory, p.terminal_selector().indices(), cfg)?;
    let free = p.free_selector().indices();
    let k = p.unknowns();
    let mut jacobian = Matrix::zeros(k, k);
    for r in 0..k {
        for (i, &f) in free.iter().enumerate() {
            jacobian[(r, i)] = bundle.assembled[(r, f)];
        }
    }
    Ok(AdjointJacobian {
        residual,
        jacobian,
        trajectory,
        bundle,
    })
}

/// `max |P(a)ᵀ - ∂x(b)/∂x₀|` with all `n` adjoint columns against the
/// forward variational flow from `x0`.
pub fn theorem1_check(p: &BvProblem, x0: &[f64], cfg: &IntegratorConfig) -> Result<f64> {
    check_finite(x0)?;
    let (a, b) = p.interval();
    let state = integrate(&p.rhs(), a, b, x0, cfg)?;
    let all: Vec<usize> = (0..p.n()).collect();
    let bundle = adjoint_bundle(p, &state, &all, cfg)?;
    let flow = full_sensitivity(p, x0, cfg)?;
    Ok(bundle.assembled.max_abs_diff(&flow))
}

/// Solution of the linearized equation `δ̇ = f'ₓ(t, x(t)) δ`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub delta0: Vec<f64>,
    pub trajectory: Trajectory,
}

struct LinearizedRhs<'a> {
    problem: &'a BvProblem,
    state: &'a Trajectory,
}

impl Rhs for LinearizedRhs<'_> {
    fn dim(&self) -> usize {
        self.problem.n()
    }

    fn eval(&self, t: f64, d: &[f64], dd: &mut [f64]) {
        let jac = self.state.interpolate(t).and_then(|x| self.problem.rhs_jacobian(t, &x));
        match jac {
            Ok(jac) => dd.copy_from_slice(&jac.mul_vec(d)),
            Err(_) => dd.fill(f64::NAN),
        }
    }
}

/// Integrates a perturbation of the unknown initial values forward along
/// `state`. Components at fixed initial indices must be zero.
pub fn linearized_perturbation(
    p: &BvProblem,
    state: &Trajectory,
    delta0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Perturbation> {
    check_covers(p, state)?;
    if let Some(&i) = p
        .fixed_selector()
        .indices()
        .iter()
        .find(|&&i| delta0.get(i).is_some_and(|v| *v != 0.0))
    {
        return Err(Error::InvalidProblem(format!(
            "perturbation must vanish at fixed initial index {i}"
        )));
    }
    let rhs = LinearizedRhs { problem: p, state };
    let (a, b) = p.interval();
    let trajectory = integrate(&rhs, a, b, delta0, cfg)?;
    Ok(Perturbation {
        delta0: delta0.to_vec(),
        trajectory,
    })
}

/// Largest drift of `⟨p(t), δ(t)⟩` from its left-endpoint value over
/// `samples` equispaced times.
pub fn bilinear_invariant(p_traj: &Trajectory, d_traj: &Trajectory, samples: usize) -> Result<f64> {
    let lo = d_traj.t_start().min(d_traj.t_end());
    let hi = d_traj.t_start().max(d_traj.t_end());
    let n = samples.max(2);
    let pairing = |t: f64| -> Result<f64> { Ok(dot(&p_traj.interpolate(t)?, &d_traj.interpolate(t)?)) };
    let reference = pairing(lo)?;
    let mut drift: f64 = 0.0;
    for k in 0..n {
        let t = if k == n - 1 {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        };
        drift = drift.max((pairing(t)? - reference).abs());
    }
    Ok(drift)
}

/// Linear system for the correction of the unknown initial values:
/// `A[r][i] = pʲʳ(a)` at the `i`-th free index, `b[r] = y_T[r] - x_{j_r}(b)`.
pub fn correction_system(bundle: &AdjointBundle, p: &BvProblem, x_end: &[f64]) -> Result<(Matrix, Vec<f64>)> {
    if bundle.terminal_indices() != p.terminal_selector().indices() {
        return Err(Error::InvalidProblem(format!(
            "adjoint bundle covers {:?}, terminal indices are {:?}",
            bundle.terminal_indices(),
            p.terminal_selector().indices()
        )));
    }
    let free = p.free_selector().indices();
    let k = p.unknowns();
    let mut a = Matrix::zeros(k, k);
    for r in 0..k {
        for (i, &f) in free.iter().enumerate() {
            a[(r, i)] = bundle.assembled[(r, f)];
        }
    }
    let b = p.terminal_mismatch(x_end)?.into_iter().map(|v| -v).collect();
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{self, toy};
    use crate::linalg::lu_solve;
    use crate::sensitivity::forward_jacobian;

    #[test]
    fn adjoint_rhs_of_zero_dynamics() {
        let p = toy::constant();
        let (_, state) = p.residual(&[1.0], &IntegratorConfig::default()).unwrap();
        let rhs = adjoint_rhs(&p, &state).unwrap();
        let mut dp = [9.0; 2];
        rhs.eval(0.5, &[1.0, -2.0], &mut dp);
        assert_eq!(dp, [0.0, 0.0]);
    }

    #[test]
    fn adjoint_rhs_of_linear_system() {
        let p = toy::nilpotent();
        let (_, state) = p.residual(&[2.0], &IntegratorConfig::default()).unwrap();
        let rhs = adjoint_rhs(&p, &state).unwrap();
        let mut dp = [0.0; 2];
        rhs.eval(0.25, &[3.0, 5.0], &mut dp);
        // -Aᵀ p with A = [[0,1],[0,0]]
        assert_eq!(dp, [0.0, -3.0]);
    }

    #[test]
    fn adjoint_rhs_of_example1() {
        let p = examples::build("ex1", &[]).unwrap().problem;
        let (_, state) = p.residual(&[1.0], &IntegratorConfig::default()).unwrap();
        let rhs = adjoint_rhs(&p, &state).unwrap();
        let t = 0.6;
        let x = state.interpolate(t).unwrap();
        let mut dp = [0.0; 2];
        rhs.eval(t, &[1.0, 0.0], &mut dp);
        // f'ₓ = [[0,1],[2x₂,2x₁]], so -f'ₓᵀ e₁ = (0, -1)
        assert_eq!(dp, [-0.0, -1.0]);
        rhs.eval(t, &[0.0, 1.0], &mut dp);
        assert_eq!(dp, [-2.0 * x[1], -2.0 * x[0]]);
    }

    #[test]
    fn adjoint_rhs_requires_covering_trajectory() {
        let p = examples::build("ex1", &[]).unwrap().problem;
        let short = integrate(&p.rhs(), 0.0, 0.5, &[0.0, 1.0], &IntegratorConfig::default()).unwrap();
        assert!(matches!(adjoint_rhs(&p, &short), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn toy_jacobians() {
        let cfg = IntegratorConfig::default();
        let aj = adjoint_jacobian(&toy::constant(), &[1.0], &cfg).unwrap();
        assert_eq!(aj.jacobian, Matrix::from_rows(&[[1.0]]));
        assert_eq!(aj.bundle.columns[0].p_at_a, vec![0.0, 1.0]);

        let aj = adjoint_jacobian(&toy::nilpotent(), &[0.5], &cfg).unwrap();
        assert!((aj.jacobian[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((aj.bundle.columns[0].p_at_a[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_forward_on_bratu() {
        let p = examples::build("ex3", &[]).unwrap().problem;
        let cfg = IntegratorConfig::default();
        let fwd = forward_jacobian(&p, &[1.9447725], &cfg).unwrap();
        let adj = adjoint_jacobian(&p, &[1.9447725], &cfg).unwrap();
        let scale = 1.0 + fwd.jacobian.max_abs();
        assert!(adj.jacobian.max_abs_diff(&fwd.jacobian) <= 1e-6 * scale);
        assert_eq!(adj.residual, p.residual(&[1.9447725], &cfg).unwrap().0);
    }

    #[test]
    fn theorem1_on_toys() {
        let cfg = IntegratorConfig::default();
        assert_eq!(theorem1_check(&toy::constant(), &[0.0, 1.0], &cfg).unwrap(), 0.0);
        assert!(theorem1_check(&toy::nilpotent(), &[0.0, 1.0], &cfg).unwrap() <= 1e-9);
    }

    #[test]
    fn bilinear_pairing_on_toys() {
        let cfg = IntegratorConfig::default();
        for p in [toy::constant(), toy::nilpotent()] {
            let (_, state) = p.residual(&[1.0], &cfg).unwrap();
            let adj = adjoint_trajectory(&p, &state, &[1.0, 0.0], &cfg).unwrap();
            let d = linearized_perturbation(&p, &state, &[0.0, 1.0], &cfg).unwrap();
            assert!(bilinear_invariant(&adj, &d.trajectory, 25).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn perturbation_must_vanish_on_fixed_indices() {
        let p = toy::nilpotent();
        let (_, state) = p.residual(&[1.0], &IntegratorConfig::default()).unwrap();
        assert!(linearized_perturbation(&p, &state, &[1.0, 0.0], &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn correction_on_constant_toy() {
        let p = toy::constant();
        let cfg = IntegratorConfig::default();
        let aj = adjoint_jacobian(&p, &[1.0], &cfg).unwrap();
        let (a, b) = correction_system(&aj.bundle, &p, aj.trajectory.final_state()).unwrap();
        assert_eq!(a, Matrix::from_rows(&[[1.0]]));
        assert_eq!(b, vec![2.0]);
        assert_eq!(lu_solve(&a, &b).unwrap(), vec![2.0]);
    }

    #[test]
    fn correction_vanishes_at_solution() {
        let p = examples::build("ex4", &[]).unwrap().problem;
        let aj = adjoint_jacobian(&p, &[0.0], &IntegratorConfig::default()).unwrap();
        let (a, b) = correction_system(&aj.bundle, &p, aj.trajectory.final_state()).unwrap();
        let dc = lu_solve(&a, &b).unwrap();
        assert!(dc[0].abs() < 1e-8, "{dc:?}");
    }

    #[test]
    fn rank_deficient_bundle_is_singular() {
        let p = toy::constant();
        let bundle = AdjointBundle {
            columns: vec![AdjointColumn {
                terminal_index: 1,
                p_at_a: vec![1.0, 0.0],
            }],
            assembled: Matrix::from_rows(&[[1.0, 0.0]]),
        };
        let (a, b) = correction_system(&bundle, &p, &[0.0, 0.0]).unwrap();
        assert!(matches!(lu_solve(&a, &b), Err(Error::SingularMatrix { .. })));
    }
}
