//! Built-in boundary value problems, addressed by name (`ex1` … `ex4`).
//!
//! Higher-order equations are reduced to first order with the state ordered
//! as (function, first derivative, …) per equation, equations concatenated.

use std::f64::consts::E;

use serde::Serialize;

use crate::bvp::BvProblem;
use crate::error::{Error, Result};

/// A registered problem instance with its presentation metadata.
#[derive(Debug, Clone)]
pub struct ExampleSpec {
    pub name: &'static str,
    pub title: &'static str,
    /// Display label per state component, e.g. `y'`.
    pub labels: Vec<&'static str>,
    pub problem: BvProblem,
    pub default_guesses: Vec<Vec<f64>>,
    pub parameters: Vec<(String, f64)>,
}

/// Serializable summary used by `list`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleSummary {
    pub name: String,
    pub title: String,
    pub n: usize,
    pub interval: [f64; 2],
    pub unknowns: usize,
    pub default_guesses: Vec<Vec<f64>>,
    pub parameters: Vec<(String, f64)>,
}

impl ExampleSpec {
    pub fn summary(&self) -> ExampleSummary {
        let (a, b) = self.problem.interval();
        ExampleSummary {
            name: self.name.to_string(),
            title: self.title.to_string(),
            n: self.problem.n(),
            interval: [a, b],
            unknowns: self.problem.unknowns(),
            default_guesses: self.default_guesses.clone(),
            parameters: self.parameters.clone(),
        }
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

struct ExampleDef {
    name: &'static str,
    title: &'static str,
    labels: &'static [&'static str],
    defaults: &'static [(&'static str, f64)],
    guesses: &'static [&'static [f64]],
    build: fn(&[(String, f64)]) -> BvProblem,
}

const PRANDTL: f64 = 0.71;

const DEFS: [ExampleDef; 4] = [
    ExampleDef {
        name: "ex1",
        title: "y'' = 2 y y' on [0,1], y(0) = 0, y(1) = 2",
        labels: &["y", "y'"],
        defaults: &[],
        guesses: &[&[1.0]],
        build: |_| example1(),
    },
    ExampleDef {
        name: "ex2",
        title: "f''' + f f'' - f'^2 = 0, theta'' + k theta' f = 0 on [0,5]",
        labels: &["f", "f'", "f''", "theta", "theta'"],
        defaults: &[("k", PRANDTL)],
        guesses: &[&[0.0, 0.0], &[-1.0, -1.0], &[-2.0, 0.0]],
        build: |params| example2(param(params, "k")),
    },
    ExampleDef {
        name: "ex3",
        title: "u'' + exp(u + 1) = 0 on [0,1], u(0) = u(1) = 0",
        labels: &["u", "u'"],
        defaults: &[],
        guesses: &[&[0.0], &[5.0]],
        build: |_| example3(),
    },
    ExampleDef {
        name: "ex4",
        title: "x1' = x2, x2' = 2 x1^3 - 6 x1 - 2 t^3 on [1,2], x1(1) = 2, x1(2) = 2.5",
        labels: &["x1", "x2"],
        defaults: &[],
        guesses: &[&[0.25]],
        build: |_| example4(),
    },
];

fn param(params: &[(String, f64)], name: &str) -> f64 {
    params
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| *v)
        .expect("parameter list is completed from defaults")
}

pub fn names() -> Vec<&'static str> {
    DEFS.iter().map(|d| d.name).collect()
}

/// All examples with default parameters.
pub fn registry() -> Vec<ExampleSpec> {
    DEFS.iter()
        .map(|d| build(d.name, &[]).expect("defaults are valid"))
        .collect()
}

/// Instantiates a named example, applying parameter overrides.
pub fn build(name: &str, overrides: &[(String, f64)]) -> Result<ExampleSpec> {
    let def = DEFS
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
    let mut params: Vec<(String, f64)> = def.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (key, value) in overrides {
        let slot = params
            .iter_mut()
            .find(|(k, _)| k == key)
            .ok_or_else(|| Error::UnknownParameter {
                problem: name.to_string(),
                name: key.clone(),
            })?;
        if !value.is_finite() {
            return Err(Error::InvalidProblem(format!("parameter {key} must be finite")));
        }
        slot.1 = *value;
    }
    Ok(ExampleSpec {
        name: def.name,
        title: def.title,
        labels: def.labels.to_vec(),
        problem: (def.build)(&params),
        default_guesses: def.guesses.iter().map(|g| g.to_vec()).collect(),
        parameters: params,
    })
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
    .expect("valid problem")
    .with_jacobian(|_t, x, j| {
        j.fill(0.0);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = 2.0 * x[1];
        j[(1, 1)] = 2.0 * x[0];
    })
}

/// State `(f, f', f'', θ, θ')`.
fn example2(k: f64) -> BvProblem {
    BvProblem::new(
        5,
        (0.0, 5.0),
        move |_t, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = x[2];
            dx[2] = x[1] * x[1] - x[0] * x[2];
            dx[3] = x[4];
            dx[4] = -k * x[4] * x[0];
        },
        &[(0, 0.0), (1, 1.0), (3, 1.0)],
        &[(1, 0.0), (3, 0.0)],
    )
    .expect("valid problem")
    .with_jacobian(move |_t, x, j| {
        j.fill(0.0);
        j[(0, 1)] = 1.0;
        j[(1, 2)] = 1.0;
        j[(2, 0)] = -x[2];
        j[(2, 1)] = 2.0 * x[1];
        j[(2, 2)] = -x[0];
        j[(3, 4)] = 1.0;
        j[(4, 0)] = -k * x[4];
        j[(4, 4)] = -k * x[0];
    })
}

fn example3() -> BvProblem {
    BvProblem::new(
        2,
        (0.0, 1.0),
        |_t, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -(x[0] + 1.0).exp();
        },
        &[(0, 0.0)],
        &[(0, 0.0)],
    )
    .expect("valid problem")
    .with_jacobian(|_t, x, j| {
        j.fill(0.0);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = -(x[0] + 1.0).exp();
    })
}

fn example4() -> BvProblem {
    BvProblem::new(
        2,
        (1.0, 2.0),
        |t, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = 2.0 * x[0].powi(3) - 6.0 * x[0] - 2.0 * t.powi(3);
        },
        &[(0, 2.0)],
        &[(0, 2.5)],
    )
    .expect("valid problem")
    .with_jacobian(|_t, x, j| {
        j.fill(0.0);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = 6.0 * x[0] * x[0] - 6.0;
    })
}

fn scalar_newton(mut x: f64, g: impl Fn(f64) -> (f64, f64), what: &str) -> Result<f64> {
    for _ in 0..50 {
        let (v, d) = g(x);
        if v.abs() <= 1e-12 {
            return Ok(x);
        }
        x -= v / d;
        if !x.is_finite() {
            break;
        }
    }
    Err(Error::NotConverged(format!("scalar Newton for {what}")))
}

/// Root of `θ = √(2e) cosh(θ/4)`; branch 1 starts from 3, branch 2 from 7.
pub fn bratu_theta(branch: u8) -> Result<f64> {
    let start = match branch {
        1 => 3.0,
        2 => 7.0,
        _ => {
            return Err(Error::InvalidProblem(format!(
                "Bratu branch must be 1 or 2, got {branch}"
            )))
        }
    };
    let s = (2.0 * E).sqrt();
    scalar_newton(
        start,
        |th| (th - s * (th / 4.0).cosh(), 1.0 - s / 4.0 * (th / 4.0).sinh()),
        "the Bratu constant",
    )
}

/// Constant `a` of the Example 1 solution `y = a tan(a t)`, from `a tan a = 2`.
pub fn example1_constant() -> Result<f64> {
    scalar_newton(
        1.0,
        |a| {
            let (tan, sec2) = (a.tan(), 1.0 / a.cos().powi(2));
            (a * tan - 2.0, tan + a * sec2)
        },
        "a tan a = 2",
    )
}

pub type Reference = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Closed-form solution `t ↦ x(t)`; `branch` selects the Bratu root for `ex3`.
pub fn reference_solution(name: &str, branch: Option<u8>) -> Result<Reference> {
    match name {
        "ex1" => {
            let a = example1_constant()?;
            Ok(Box::new(move |t| {
                let at = a * t;
                vec![a * at.tan(), a * a / at.cos().powi(2)]
            }))
        }
        "ex3" => {
            let branch = branch.ok_or_else(|| Error::InvalidProblem("ex3 reference needs a branch".into()))?;
            let th = bratu_theta(branch)?;
            Ok(Box::new(move |t| {
                let z = (t - 0.5) * th / 2.0;
                vec![-2.0 * (z.cosh() / (th / 4.0).cosh()).ln(), -th * z.tanh()]
            }))
        }
        "ex4" => Ok(Box::new(|t| vec![t + 1.0 / t, 1.0 - 1.0 / (t * t)])),
        "ex2" => Err(Error::NoReference(name.to_string())),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// Small problems with trivially known answers, for tests and demos.
pub mod toy {
    use crate::bvp::BvProblem;

    /// `ẋ = 0`, `x₁(a) = 0`, `x₂(b) = 3`: the residual is `c - 3`.
    pub fn constant() -> BvProblem {
        BvProblem::new(
            2,
            (0.0, 1.0),
            |_t, _x, dx: &mut [f64]| dx.fill(0.0),
            &[(0, 0.0)],
            &[(1, 3.0)],
        )
        .expect("valid problem")
        .with_jacobian(|_t, _x, j| j.fill(0.0))
    }

    /// `ẋ = A x`, `A = [[0,1],[0,0]]` on `[0,1]`, `x₁(0) = 0`, `x₁(1) = 1`.
    pub fn nilpotent() -> BvProblem {
        BvProblem::new(
            2,
            (0.0, 1.0),
            |_t, x: &[f64], dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = 0.0;
            },
            &[(0, 0.0)],
            &[(0, 1.0)],
        )
        .expect("valid problem")
        .with_jacobian(|_t, _x, j| {
            j.fill(0.0);
            j[(0, 1)] = 1.0;
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_has_four_examples() {
        let reg = registry();
        assert_eq!(names(), vec!["ex1", "ex2", "ex3", "ex4"]);
        assert_eq!(reg.len(), 4);
    }

    #[test]
    fn reductions() {
        let ex1 = build("ex1", &[]).unwrap().problem;
        assert_eq!(ex1.n(), 2);
        assert_eq!(ex1.fixed_selector().indices(), &[0]);
        assert_eq!(ex1.terminal_selector().indices(), &[0]);
        assert_eq!(ex1.fixed_values(), &[0.0]);
        assert_eq!(ex1.terminal_values(), &[2.0]);

        let ex2 = build("ex2", &[]).unwrap();
        assert_eq!(ex2.problem.fixed_selector().indices(), &[0, 1, 3]);
        assert_eq!(ex2.problem.terminal_selector().indices(), &[1, 3]);
        assert_eq!(ex2.problem.fixed_values(), &[0.0, 1.0, 1.0]);
        assert_eq!(ex2.problem.terminal_values(), &[0.0, 0.0]);
        assert_eq!(ex2.parameter("k"), Some(0.71));

        let ex4 = build("ex4", &[]).unwrap().problem;
        assert_eq!(ex4.interval(), (1.0, 2.0));
        assert_eq!(ex4.fixed_values(), &[2.0]);
        assert_eq!(ex4.terminal_values(), &[2.5]);
    }

    #[test]
    fn overrides() {
        let ex2 = build("ex2", &[("k".to_string(), 0.5)]).unwrap();
        assert_eq!(ex2.parameter("k"), Some(0.5));
        let mut dx = [0.0; 5];
        ex2.problem.eval_rhs(0.0, &[2.0, 0.0, 0.0, 0.0, 1.0], &mut dx);
        assert_eq!(dx[4], -0.5 * 2.0);
        assert!(matches!(
            build("ex2", &[("pr".to_string(), 0.5)]),
            Err(Error::UnknownParameter { .. })
        ));
        assert!(matches!(
            build("ex1", &[("k".to_string(), 0.5)]),
            Err(Error::UnknownParameter { .. })
        ));
        assert!(matches!(build("ex9", &[]), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn bratu_constants() {
        let s = (2.0 * E).sqrt();
        let t1 = bratu_theta(1).unwrap();
        let t2 = bratu_theta(2).unwrap();
        assert!((t1 - 3.0362318).abs() < 1e-6, "{t1}");
        assert!((t2 - 7.1350055).abs() < 1e-6, "{t2}");
        for th in [t1, t2] {
            assert!((th - s * (th / 4.0).cosh()).abs() <= 1e-12);
        }
        assert!(bratu_theta(3).is_err());
    }

    #[test]
    fn example1_reference() {
        let a = example1_constant().unwrap();
        assert!((a - 1.0768740).abs() < 1e-6, "{a}");
        let r = reference_solution("ex1", None).unwrap();
        assert!((r(0.0)[1] - 1.1596576).abs() < 1e-6);
        assert!((r(1.0)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bratu_reference_slope() {
        let r = reference_solution("ex3", Some(1)).unwrap();
        assert!((r(0.0)[1] - 1.9447725).abs() < 1e-6, "{:?}", r(0.0));
        let th = bratu_theta(1).unwrap();
        assert!((r(0.0)[1] - th * (th / 4.0).tanh()).abs() < 1e-14);
        assert!(reference_solution("ex3", None).is_err());
    }

    #[test]
    fn example4_reference() {
        let r = reference_solution("ex4", None).unwrap();
        assert_eq!(r(2.0), vec![2.5, 0.75]);
        assert_eq!(r(1.0), vec![2.0, 0.0]);
    }

    #[test]
    fn no_reference_for_boundary_layer() {
        assert!(matches!(reference_solution("ex2", None), Err(Error::NoReference(_))));
        assert!(matches!(reference_solution("ex7", None), Err(Error::UnknownProblem(_))));
    }

    /// Closed forms satisfy the ODE (checked by central differences of the
    /// reference itself) and the boundary data.
    #[test]
    fn references_solve_their_problems() {
        let cases: [(&str, Option<u8>); 4] = [("ex1", None), ("ex3", Some(1)), ("ex3", Some(2)), ("ex4", None)];
        for (name, branch) in cases {
            let p = build(name, &[]).unwrap().problem;
            let r = reference_solution(name, branch).unwrap();
            let (a, b) = p.interval();
            let xa = r(a);
            let xb = r(b);
            for (i, v) in p.fixed_selector().indices().iter().zip(p.fixed_values()) {
                assert!((xa[*i] - v).abs() <= 1e-6, "{name}");
            }
            for (j, v) in p.terminal_selector().indices().iter().zip(p.terminal_values()) {
                assert!((xb[*j] - v).abs() <= 1e-6, "{name}");
            }
            let h = 1e-5;
            for k in 1..=50 {
                let t = a + (b - a) * k as f64 / 51.0;
                let x = r(t);
                let mut f = vec![0.0; p.n()];
                p.eval_rhs(t, &x, &mut f);
                let (xp, xm) = (r(t + h), r(t - h));
                for i in 0..p.n() {
                    let d = (xp[i] - xm[i]) / (2.0 * h);
                    assert!((d - f[i]).abs() <= 1e-6 * (1.0 + f[i].abs()), "{name} t={t} i={i}");
                }
            }
        }
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in registry() {
            let p = &spec.problem;
            let (a, b) = p.interval();
            for _ in 0..100 {
                let t = rng.gen_range(a..=b);
                let x: Vec<f64> = (0..p.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let exact = p.rhs_jacobian(t, &x).unwrap();
                let fd = p.fd_rhs_jacobian(t, &x).unwrap();
                assert!(
                    exact.max_abs_diff(&fd) <= 1e-5 * (1.0 + exact.max_abs()),
                    "{} at t={t} x={x:?}",
                    spec.name
                );
            }
        }
    }
}
