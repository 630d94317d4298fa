//! Riemannian gradient descent, used as a yardstick for the accelerated
//! solvers and as the high-precision oracle behind the test suites.

use crate::error::{invalid, Error, Result};
use crate::manifold::{distance, exp_map, log_map, AmbientPoint};
use crate::objectives::ManifoldObjective;

/// Fixed-step gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgdParams {
    pub step: f64,
    pub max_iters: usize,
    pub tol_grad: f64,
    /// Also stop once the value drops to this level. Benchmarks use it to
    /// count the evaluations needed for a known target gap.
    pub stop_below: Option<f64>,
}

impl RgdParams {
    /// Step `1 / L` taken from the objective's declared smoothness.
    pub fn for_objective<O: ManifoldObjective + ?Sized>(obj: &O, max_iters: usize, tol_grad: f64) -> Self {
        RgdParams {
            step: 1.0 / obj.smoothness(),
            max_iters,
            tol_grad,
            stop_below: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid("step", format!("must be positive, got {}", self.step)));
        }
        if !(self.tol_grad >= 0.0) {
            return Err(invalid("tol_grad", format!("must be non-negative, got {}", self.tol_grad)));
        }
        Ok(())
    }
}

/// One point visited by gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct RgdRecord {
    /// 0 for the starting point.
    pub iter: usize,
    pub x: AmbientPoint,
    pub value: f64,
    pub grad_norm: f64,
    /// Cumulative gradient evaluations, including the one at `x`.
    pub grad_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgdOutput {
    pub point: AmbientPoint,
    pub value: f64,
    pub grad_evals: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Pulls `y` back onto the geodesic ball `B(center, r)` along the geodesic
/// from `center`.
pub fn clip_to_ball(center: &AmbientPoint, r: f64, y: AmbientPoint) -> AmbientPoint {
    let dist = distance(center, &y);
    if dist <= r {
        return y;
    }
    exp_map(&log_map(center, &y).scale(r / dist))
}

/// Gradient descent from the center `x0` of the ball of radius `r`, stopping
/// once the gradient norm drops to `tol_grad`, the value to `stop_below`, or
/// after `max_iters` steps.
/// `trace` sees every visited point, starting with `x0`.
pub fn rgd_run<O: ManifoldObjective + ?Sized>(
    f: &O,
    x0: &AmbientPoint,
    r: f64,
    params: &RgdParams,
    trace: &mut dyn FnMut(&RgdRecord),
) -> Result<RgdOutput> {
    params.validate()?;
    let mut x = x0.clone();
    let mut evals = 0;
    let mut iter = 0;
    loop {
        let g = f.riem_grad(&x);
        evals += 1;
        let grad_norm = g.norm();
        let value = f.value(&x);
        trace(&RgdRecord {
            iter,
            x: x.clone(),
            value,
            grad_norm,
            grad_evals: evals,
        });
        let converged = grad_norm <= params.tol_grad || params.stop_below.is_some_and(|v| value <= v);
        if converged || iter == params.max_iters {
            return Ok(RgdOutput {
                point: x,
                value,
                grad_evals: evals,
                iterations: iter,
                converged,
            });
        }
        x = clip_to_ball(x0, r, exp_map(&g.scale(-params.step)));
        iter += 1;
    }
}

/// Gradient-norm target of [`reference_optimum`].
pub const REFERENCE_TOL: f64 = 1e-12;
const REFERENCE_BUDGET: usize = 200_000;

/// High-precision minimizer of `f` over the ball `B(x0, r)` and its value.
///
/// Uses the objective's known minimizer when it has one. Otherwise runs
/// gradient descent with an Armijo step that may grow past `1 / L`, so that
/// loose declared moduli do not slow the oracle down, until the gradient norm
/// reaches [`REFERENCE_TOL`]. Near the optimum, where value decreases drown
/// in rounding, a step is accepted when it shrinks the gradient norm instead;
/// if no step does, the current point is at the rounding floor and is
/// returned.
pub fn reference_optimum<O: ManifoldObjective + ?Sized>(
    f: &O,
    x0: &AmbientPoint,
    r: f64,
) -> Result<(AmbientPoint, f64)> {
    if let Some(x) = f.known_minimizer() {
        let v = f.value(&x);
        return Ok((x, v));
    }
    let mut x = x0.clone();
    let mut fx = f.value(&x);
    let mut step = 1.0 / f.smoothness();
    for _ in 0..REFERENCE_BUDGET {
        let g = f.riem_grad(&x);
        let gn2 = g.norm().powi(2);
        if gn2.sqrt() <= REFERENCE_TOL {
            return Ok((x, fx));
        }
        step *= 2.0;
        loop {
            let y = clip_to_ball(x0, r, exp_map(&g.scale(-step)));
            let fy = f.value(&y);
            let decrease = 0.5 * step * gn2;
            let accept = if decrease <= 1e-12 * fx.abs() {
                // value changes are lost in rounding; require the gradient to shrink instead
                f.riem_grad(&y).norm().powi(2) < 0.81 * gn2
            } else {
                fy <= fx - decrease
            };
            if accept {
                x = y;
                fx = fy;
                break;
            }
            step *= 0.5;
            if step < 1e-6 / f.smoothness() {
                // no progress even for tiny steps: rounding floor
                return Ok((x, fx));
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: REFERENCE_BUDGET,
        grad_norm: f.riem_grad(&x).norm(),
    })
}
