//! Cross-method agreement checks at a given unknown vector.

use serde::Serialize;

use crate::adjoint::{
    adjoint_jacobian, adjoint_trajectory, bilinear_invariant, linearized_perturbation, theorem1_check,
};
use crate::bvp::BvProblem;
use crate::error::Result;
use crate::linalg::{basis_vector, dot};
use crate::newton::fd_shooting_jacobian;
use crate::ode::IntegratorConfig;
use crate::sensitivity::forward_jacobian;

/// Threshold used by the `verify` command.
pub const VERIFY_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    /// `‖J_forward - J_adjoint‖max`
    pub forward_vs_adjoint: f64,
    /// `‖J_forward - J_fd‖max`
    pub forward_vs_fd: f64,
    /// `‖P(a)ᵀ - ∂x(b)/∂x₀‖max`
    pub theorem1: f64,
    /// Largest drift of `⟨p, δ⟩` over all pairs, relative to `1 + |⟨p(a), δ(a)⟩|`.
    pub bilinear_drift: f64,
}

impl CrossCheck {
    pub fn max_deviation(&self) -> f64 {
        [
            self.forward_vs_adjoint,
            self.forward_vs_fd,
            self.theorem1,
            self.bilinear_drift,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_deviation() <= threshold
    }
}

/// Runs all three Jacobian routes plus the adjoint identities at `c`.
///
/// The bilinear drift uses every unit perturbation of a free initial
/// component paired with every unit terminal adjoint condition.
pub fn cross_check(p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<CrossCheck> {
    let fwd = forward_jacobian(p, c, cfg)?;
    let adj = adjoint_jacobian(p, c, cfg)?;
    let fd = fd_shooting_jacobian(p, c, cfg)?;
    let x0 = p.embed_initial(c)?;
    let theorem1 = theorem1_check(p, &x0, cfg)?;

    let state = &adj.trajectory;
    let mut drift: f64 = 0.0;
    for &k in p.free_selector().indices() {
        let pert = linearized_perturbation(p, state, &basis_vector(k, p.n())?, cfg)?;
        for j in 0..p.n() {
            let adj_traj = adjoint_trajectory(p, state, &basis_vector(j, p.n())?, cfg)?;
            let d = bilinear_invariant(&adj_traj, &pert.trajectory, 51)?;
            let pairing = dot(adj_traj.final_state(), &pert.delta0);
            drift = drift.max(d / (1.0 + pairing.abs()));
        }
    }

    Ok(CrossCheck {
        forward_vs_adjoint: fwd.jacobian.max_abs_diff(&adj.jacobian),
        forward_vs_fd: fwd.jacobian.max_abs_diff(&fd),
        theorem1,
        bilinear_drift: drift,
    })
}
