//! Newton iteration on the unknown initial values.
//!
//! Plain Newton with no line search: `F'(cᵏ) δc = -F(cᵏ)`, `cᵏ⁺¹ = cᵏ + δc`.
//! A poor starting guess is allowed to fail and is reported as unconverged.

use serde::Serialize;
use thiserror::Error;

use crate::bvp::{check_finite, BvProblem};
use crate::error::{Error, Result};
use crate::jacobian::{JacobianMode, JacobianStrategy, StrategyRegistry};
use crate::linalg::{inf_norm, lu_solve, Matrix};
use crate::ode::{IntegratorConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub jacobian_mode: JacobianMode,
    pub tol_residual: f64,
    pub tol_step: f64,
    /// Maximum number of Newton steps.
    pub max_iter: usize,
    /// Optional cap on `‖δc‖∞`.
    pub step_clamp: Option<f64>,
    pub integrator: IntegratorConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            jacobian_mode: JacobianMode::Forward,
            tol_residual: 1e-8,
            tol_step: 1e-10,
            max_iter: 25,
            step_clamp: None,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_mode(mode: JacobianMode) -> Self {
        Self {
            jacobian_mode: mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tol_residual) || !positive(self.tol_step) {
            return Err(Error::InvalidConfig("Newton tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if let Some(cap) = self.step_clamp {
            if !positive(cap) {
                return Err(Error::InvalidConfig(format!("step clamp {cap} must be positive")));
            }
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iterate {
    pub k: usize,
    pub c: Vec<f64>,
    pub residual_norm: f64,
    /// `‖δc‖∞` of the step taken from this iterate; 0 for the last one.
    pub step_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Residual,
    Step,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub stop_reason: StopReason,
    pub c_final: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: Vec<Iterate>,
    pub final_trajectory: Trajectory,
    pub strategy: &'static str,
}

impl SolveReport {
    /// Number of Newton steps taken.
    pub fn newton_steps(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn final_residual_norm(&self) -> f64 {
        inf_norm(&self.residual)
    }

    /// State at the left endpoint.
    pub fn initial_values(&self) -> &[f64] {
        self.final_trajectory.initial_state()
    }

    /// State at the right endpoint.
    pub fn final_values(&self) -> &[f64] {
        self.final_trajectory.final_state()
    }
}

/// A solve that stopped on an error, with the iterates computed so far.
#[derive(Debug, Clone, Error)]
#[error("Newton iteration failed at c = {c:?}: {error}")]
pub struct SolveFailure {
    #[source]
    pub error: Error,
    pub c: Vec<f64>,
    pub iterations: Vec<Iterate>,
}

impl SolveFailure {
    fn new(error: Error, c: &[f64], iterations: &[Iterate]) -> Self {
        Self {
            error,
            c: c.to_vec(),
            iterations: iterations.to_vec(),
        }
    }
}

pub fn solve_bvp(p: &BvProblem, c0: &[f64], opts: &SolveOptions) -> std::result::Result<SolveReport, SolveFailure> {
    let registry = StrategyRegistry::default();
    let strategy = registry
        .get(opts.jacobian_mode.name())
        .map_err(|e| SolveFailure::new(e, c0, &[]))?;
    solve_with(p, c0, opts, strategy)
}

/// Newton iteration with an explicit Jacobian strategy; `opts.jacobian_mode`
/// is ignored.
pub fn solve_with(
    p: &BvProblem,
    c0: &[f64],
    opts: &SolveOptions,
    strategy: &dyn JacobianStrategy,
) -> std::result::Result<SolveReport, SolveFailure> {
    let fail = |e: Error, c: &[f64], its: &[Iterate]| SolveFailure::new(e, c, its);
    opts.validate().map_err(|e| fail(e, c0, &[]))?;
    if c0.len() != p.unknowns() {
        return Err(fail(
            Error::DimensionMismatch {
                expected: p.unknowns(),
                found: c0.len(),
            },
            c0,
            &[],
        ));
    }
    check_finite(c0).map_err(|e| fail(e, c0, &[]))?;

    let cfg = &opts.integrator;
    let mut c = c0.to_vec();
    let mut iterations: Vec<Iterate> = Vec::new();

    for k in 0..=opts.max_iter {
        let lin = strategy.linearize(p, &c, cfg).map_err(|e| fail(e, &c, &iterations))?;
        let r = inf_norm(&lin.residual);
        if !r.is_finite() {
            return Err(fail(Error::NonFiniteState { t: p.interval().1 }, &c, &iterations));
        }
        if r <= opts.tol_residual || k == opts.max_iter {
            let (converged, stop_reason) = if r <= opts.tol_residual {
                (true, StopReason::Residual)
            } else {
                (false, StopReason::MaxIter)
            };
            iterations.push(Iterate {
                k,
                c: c.clone(),
                residual_norm: r,
                step_norm: 0.0,
            });
            return Ok(SolveReport {
                converged,
                stop_reason,
                c_final: c,
                residual: lin.residual,
                iterations,
                final_trajectory: lin.trajectory,
                strategy: strategy.name(),
            });
        }

        let rhs: Vec<f64> = lin.residual.iter().map(|v| -v).collect();
        let mut dc = lu_solve(&lin.jacobian, &rhs).map_err(|e| fail(e, &c, &iterations))?;
        let mut s = inf_norm(&dc);
        if let Some(cap) = opts.step_clamp {
            if s > cap {
                dc.iter_mut().for_each(|v| *v *= cap / s);
                s = cap;
            }
        }
        iterations.push(Iterate {
            k,
            c: c.clone(),
            residual_norm: r,
            step_norm: s,
        });
        let small_step = s <= opts.tol_step * (1.0 + inf_norm(&c));
        c.iter_mut().zip(&dc).for_each(|(ci, di)| *ci += di);

        if small_step {
            let (residual, trajectory) = p.residual(&c, cfg).map_err(|e| fail(e, &c, &iterations))?;
            let r = inf_norm(&residual);
            iterations.push(Iterate {
                k: k + 1,
                c: c.clone(),
                residual_norm: r,
                step_norm: 0.0,
            });
            return Ok(SolveReport {
                converged: r.is_finite() && r <= 10.0 * opts.tol_residual,
                stop_reason: StopReason::Step,
                c_final: c,
                residual,
                iterations,
                final_trajectory: trajectory,
                strategy: strategy.name(),
            });
        }
    }
    unreachable!("loop returns at k == max_iter")
}

/// Central-difference shooting Jacobian with `hᵢ = 10⁻⁶ (1 + |cᵢ|)`.
pub fn fd_shooting_jacobian(p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<Matrix> {
    check_finite(c)?;
    let k = p.unknowns();
    if c.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: c.len(),
        });
    }
    let mut jac = Matrix::zeros(k, k);
    let mut cp = c.to_vec();
    for i in 0..k {
        let h = 1e-6 * (1.0 + c[i].abs());
        cp[i] = c[i] + h;
        let (fp, _) = p.residual(&cp, cfg)?;
        cp[i] = c[i] - h;
        let (fm, _) = p.residual(&cp, cfg)?;
        cp[i] = c[i];
        let width = (c[i] + h) - (c[i] - h);
        for r in 0..k {
            jac[(r, i)] = (fp[r] - fm[r]) / width;
        }
    }
    Ok(jac)
}
