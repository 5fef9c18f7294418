//! Interchangeable ways of linearizing the shooting residual.
//!
//! Each strategy returns `F(c)`, `F'(c)` and the state trajectory at `c`.
//! Strategies are registered by name and picked at runtime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adjoint::adjoint_jacobian;
use crate::bvp::BvProblem;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::newton::fd_shooting_jacobian;
use crate::ode::{IntegratorConfig, Trajectory};
use crate::sensitivity::forward_jacobian;

#[derive(Debug, Clone)]
pub struct Linearization {
    pub residual: Vec<f64>,
    pub jacobian: Matrix,
    pub trajectory: Trajectory,
}

pub trait JacobianStrategy: Send + Sync {
    /// Stable identifier used on the command line.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn linearize(&self, p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<Linearization>;
}

/// Variational equations integrated alongside the state.
#[derive(Debug, Default, Clone, Copy)]
pub struct ForwardSensitivity;

impl JacobianStrategy for ForwardSensitivity {
    fn name(&self) -> &'static str {
        "forward"
    }

    fn description(&self) -> &'static str {
        "forward variational equations, one augmented pass"
    }

    fn linearize(&self, p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<Linearization> {
        let fj = forward_jacobian(p, c, cfg)?;
        Ok(Linearization {
            residual: fj.residual,
            jacobian: fj.jacobian,
            trajectory: fj.trajectory,
        })
    }
}

/// Adjoint equations integrated backward from unit terminal data.
#[derive(Debug, Default, Clone, Copy)]
pub struct AdjointSystem;

impl JacobianStrategy for AdjointSystem {
    fn name(&self) -> &'static str {
        "adjoint"
    }

    fn description(&self) -> &'static str {
        "forward state pass, then one backward adjoint pass per terminal condition"
    }

    fn linearize(&self, p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<Linearization> {
        let aj = adjoint_jacobian(p, c, cfg)?;
        Ok(Linearization {
            residual: aj.residual,
            jacobian: aj.jacobian,
            trajectory: aj.trajectory,
        })
    }
}

/// Central differences of the residual.
#[derive(Debug, Default, Clone, Copy)]
pub struct FiniteDifference;

impl JacobianStrategy for FiniteDifference {
    fn name(&self) -> &'static str {
        "fd"
    }

    fn description(&self) -> &'static str {
        "central differences on the shooting residual"
    }

    fn linearize(&self, p: &BvProblem, c: &[f64], cfg: &IntegratorConfig) -> Result<Linearization> {
        let (residual, trajectory) = p.residual(c, cfg)?;
        let jacobian = fd_shooting_jacobian(p, c, cfg)?;
        Ok(Linearization {
            residual,
            jacobian,
            trajectory,
        })
    }
}

pub struct StrategyRegistry {
    entries: Vec<Box<dyn JacobianStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self { entries: Vec::new() };
        r.register(ForwardSensitivity);
        r.register(AdjointSystem);
        r.register(FiniteDifference);
        r
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Adds a strategy, replacing any existing one with the same name.
    pub fn register<S: JacobianStrategy + 'static>(&mut self, strategy: S) {
        self.entries.retain(|e| e.name() != strategy.name());
        self.entries.push(Box::new(strategy));
    }

    pub fn get(&self, name: &str) -> Result<&dyn JacobianStrategy> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn JacobianStrategy> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

/// Built-in strategy selector.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    #[default]
    Forward,
    Adjoint,
    #[serde(rename = "fd")]
    FiniteDifference,
}

impl JacobianMode {
    pub const ALL: [JacobianMode; 3] = [
        JacobianMode::Forward,
        JacobianMode::Adjoint,
        JacobianMode::FiniteDifference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JacobianMode::Forward => ForwardSensitivity.name(),
            JacobianMode::Adjoint => AdjointSystem.name(),
            JacobianMode::FiniteDifference => FiniteDifference.name(),
        }
    }
}

impl fmt::Display for JacobianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JacobianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(JacobianMode::Forward),
            "adjoint" => Ok(JacobianMode::Adjoint),
            "fd" | "finite_difference" => Ok(JacobianMode::FiniteDifference),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn registry_lookup() {
        let reg = StrategyRegistry::default();
        assert_eq!(reg.names(), vec!["forward", "adjoint", "fd"]);
        for mode in JacobianMode::ALL {
            assert_eq!(reg.get(mode.name()).unwrap().name(), mode.name());
            assert_eq!(mode.name().parse::<JacobianMode>().unwrap(), mode);
        }
        assert!(matches!(reg.get("secant"), Err(Error::UnknownStrategy(_))));
        assert!("secant".parse::<JacobianMode>().is_err());
    }

    #[test]
    fn register_replaces_by_name() {
        let mut reg = StrategyRegistry::empty();
        reg.register(ForwardSensitivity);
        reg.register(ForwardSensitivity);
        assert_eq!(reg.names(), vec!["forward"]);
    }

    #[test]
    fn strategies_agree_on_example4() {
        let p = examples::build("ex4", &[]).unwrap().problem;
        let cfg = IntegratorConfig::default();
        let reg = StrategyRegistry::default();
        let fwd = reg.get("forward").unwrap().linearize(&p, &[0.25], &cfg).unwrap();
        for s in reg.iter() {
            let lin = s.linearize(&p, &[0.25], &cfg).unwrap();
            let scale = 1.0 + fwd.jacobian.max_abs();
            assert!(lin.jacobian.max_abs_diff(&fwd.jacobian) <= 1e-4 * scale, "{}", s.name());
            assert!((lin.residual[0] - fwd.residual[0]).abs() < 1e-8);
            assert_eq!(lin.trajectory.dim(), 2);
        }
    }
}
