//! Adaptive Dormand–Prince 5(4) integrator with dense trajectory storage.
//!
//! Every accepted step is recorded together with `f(t, x)` at the node, so the
//! solution can be evaluated anywhere in the span by cubic Hermite
//! interpolation. Integration runs forward or backward in time depending on
//! the order of the endpoints; backward runs use negative steps directly.

use crate::error::{Error, Result};

/// Right-hand side of `ẋ = f(t, x)`.
pub trait Rhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

impl<R: Rhs + ?Sized> Rhs for &R {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (**self).eval(t, x, dx)
    }
}

/// Adapts a closure `(t, x, dx)` of known dimension into an [`Rhs`].
pub struct FnRhs<F> {
    dim: usize,
    f: F,
}

impl<F> FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Rhs for FnRhs<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// `None` selects the step from one derivative evaluation.
    pub initial_step: Option<f64>,
    /// `None` means `1e-14 * |t_end - t_start|`.
    pub min_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: None,
            min_step: None,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rtol) || !positive(self.atol) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if let Some(h) = self.initial_step {
            if !positive(h) {
                return Err(Error::InvalidConfig(format!("initial step {h} must be positive")));
            }
        }
        if let Some(h) = self.min_step {
            if !positive(h) {
                return Err(Error::InvalidConfig(format!("min step {h} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub t: f64,
    pub x: Vec<f64>,
    /// `f(t, x)` at this node.
    pub dx: Vec<f64>,
}

/// Accepted steps of one integration, in integration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    nodes: Vec<Node>,
    direction: f64,
}

impl Trajectory {
    /// Validates monotonicity and shapes. At least two nodes are required.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidProblem("trajectory needs at least two nodes".into()));
        }
        let dim = nodes[0].x.len();
        let direction = (nodes[1].t - nodes[0].t).signum();
        for w in nodes.windows(2) {
            if (w[1].t - w[0].t) * direction <= 0.0 {
                return Err(Error::InvalidProblem(
                    "trajectory times are not strictly monotone".into(),
                ));
            }
        }
        for n in &nodes {
            if n.x.len() != dim || n.dx.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: n.x.len().min(n.dx.len()),
                });
            }
        }
        Ok(Self { nodes, direction })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].x.len()
    }

    /// `+1.0` for forward integration, `-1.0` for backward.
    pub fn direction(&self) -> f64 {
        self.direction
    }

    pub fn t_start(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.nodes[0].x
    }

    pub fn final_state(&self) -> &[f64] {
        &self.nodes[self.nodes.len() - 1].x
    }

    /// Keeps only the leading `n` components of every node.
    pub fn truncated(&self, n: usize) -> Trajectory {
        let nodes = self
            .nodes
            .iter()
            .map(|node| Node {
                t: node.t,
                x: node.x[..n].to_vec(),
                dx: node.dx[..n].to_vec(),
            })
            .collect();
        Trajectory {
            nodes,
            direction: self.direction,
        }
    }

    /// Cubic Hermite interpolation between the bracketing nodes.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.interpolate_into(t, &mut out)?;
        Ok(out)
    }

    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (lo, hi) = self.span();
        if !(lo..=hi).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                start: self.t_start(),
                end: self.t_end(),
            });
        }
        let d = self.direction;
        // first node strictly past t in integration order
        let k = self.nodes.partition_point(|n| n.t * d <= t * d);
        if k > 0 && self.nodes[k - 1].t == t {
            out.copy_from_slice(&self.nodes[k - 1].x);
            return Ok(());
        }
        let (a, b) = (&self.nodes[k - 1], &self.nodes[k]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h10 = s3 - 2.0 * s2 + s;
        let h11 = s3 - s2;
        for (i, o) in out.iter_mut().enumerate() {
            *o = a.x[i] + h01 * (b.x[i] - a.x[i]) + h * (h10 * a.dx[i] + h11 * b.dx[i]);
        }
        Ok(())
    }

    fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t_start(), self.t_end());
        (a.min(b), a.max(b))
    }
}

/// Weighted RMS norm with per-component scale `atol + rtol * max(|x|, |x_new|)`.
fn error_norm(err: &[f64], x: &[f64], x_new: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(x.iter().zip(x_new))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FACTOR_MIN: f64 = 0.2;
const FACTOR_MAX: f64 = 5.0;

struct Workspace {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    x_new: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            x_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    /// One trial step from `(t, x)` with `k[0] = f(t, x)` already in place.
    /// Leaves the proposal in `x_new`, `f(t + h, x_new)` in `k[6]`, and
    /// returns `false` if any stage produced a non-finite value.
    #[allow(clippy::needless_range_loop)]
    fn trial<R: Rhs + ?Sized>(&mut self, rhs: &R, t: f64, x: &[f64], h: f64) -> bool {
        let n = x.len();
        let rows: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (s, (c, a)) in rows.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    acc += aj * self.k[j][i];
                }
                self.stage[i] = x[i] + h * acc;
            }
            rhs.eval(t + c * h, &self.stage, &mut self.k[s + 1]);
            if !all_finite(&self.k[s + 1]) {
                return false;
            }
        }
        for i in 0..n {
            self.x_new[i] = x[i]
                + h * (B1 * self.k[0][i]
                    + B3 * self.k[2][i]
                    + B4 * self.k[3][i]
                    + B5 * self.k[4][i]
                    + B6 * self.k[5][i]);
        }
        if !all_finite(&self.x_new) {
            return false;
        }
        rhs.eval(t + h, &self.x_new, &mut self.k[6]);
        if !all_finite(&self.k[6]) {
            return false;
        }
        for i in 0..n {
            self.err[i] = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
        }
        true
    }
}

/// Integrates `ẋ = rhs(t, x)` from `t_start` to `t_end` (either order).
pub fn integrate<R: Rhs + ?Sized>(
    rhs: &R,
    t_start: f64,
    t_end: f64,
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = rhs.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if !(t_start.is_finite() && t_end.is_finite()) || t_start == t_end {
        return Err(Error::InvalidConfig(format!(
            "integration span [{t_start}, {t_end}] must be finite and non-empty"
        )));
    }
    if !all_finite(x0) {
        return Err(Error::NonFiniteState { t: t_start });
    }

    let direction = (t_end - t_start).signum();
    let span = (t_end - t_start).abs();
    let min_step = cfg.min_step.unwrap_or(1e-14 * span);

    let mut ws = Workspace::new(n);
    rhs.eval(t_start, x0, &mut ws.k[0]);
    if !all_finite(&ws.k[0]) {
        return Err(Error::NonFiniteState { t: t_start });
    }

    let mut h = match cfg.initial_step {
        Some(h) => h.min(span),
        None => {
            let zero = vec![0.0; n];
            let d0 = error_norm(x0, x0, x0, cfg);
            let d1 = error_norm(&ws.k[0], x0, &zero, cfg);
            let scaled = if d0 > 1e-5 && d1 > 1e-5 {
                0.01 * d0 / d1
            } else {
                f64::INFINITY
            };
            (span / 100.0).min(scaled).max(min_step)
        }
    };

    let mut nodes = vec![Node {
        t: t_start,
        x: x0.to_vec(),
        dx: ws.k[0].clone(),
    }];
    let mut t = t_start;
    let mut x = x0.to_vec();
    let mut attempts = 0usize;

    loop {
        if attempts >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded {
                t,
                max_steps: cfg.max_steps,
            });
        }
        attempts += 1;

        let remaining = (t_end - t).abs();
        let last = h * 1.0001 >= remaining;
        if last {
            h = remaining;
        }
        let signed_h = direction * h;

        if !ws.trial(rhs, t, &x, signed_h) {
            h *= FACTOR_MIN;
            if h < min_step {
                return Err(Error::NonFiniteState { t });
            }
            continue;
        }

        let err = error_norm(&ws.err, &x, &ws.x_new, cfg);
        if err <= 1.0 {
            t = if last { t_end } else { t + signed_h };
            std::mem::swap(&mut x, &mut ws.x_new);
            // FSAL: the last stage is f(t_new, x_new)
            ws.k.swap(0, 6);
            nodes.push(Node {
                t,
                x: x.clone(),
                dx: ws.k[0].clone(),
            });
            if last {
                break;
            }
            let factor = if err == 0.0 {
                FACTOR_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, FACTOR_MAX)
            };
            h *= factor;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(FACTOR_MIN, 1.0);
            if h < min_step {
                return Err(Error::StepSizeUnderflow { t, step: h, min_step });
            }
        }
    }

    Ok(Trajectory { nodes, direction })
}
