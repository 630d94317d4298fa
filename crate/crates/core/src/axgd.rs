//! Accelerated extra-gradient descent on the image ball.
//!
//! The method discretizes accelerated mirror dynamics with the mirror map
//! `psi = |.|^2 / 2`, whose dual gradient is the projection onto the ball.
//! Because `f = F o h^{-1}` is only convex up to the constants `gamma_n` and
//! `gamma_p`, the coupling weight `lambda` of every step is found by a binary
//! search that certifies
//! `f(x_{i+1}) - f(x_i) <= gamma_hat <grad f(x_{i+1}), x_{i+1} - x_i> + eps_hat`.

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::geodesic_map::{DeformationConstants, MappedPoint};
use crate::objectives::{ManifoldObjective, MappedObjective};

/// First-order oracle on a Euclidean ball.
pub trait BallOracle {
    fn value(&self, x: &DVector<f64>) -> Result<f64>;
    fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn value_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        Ok((self.value(x)?, self.grad(x)?))
    }
}

impl<O: ManifoldObjective> BallOracle for MappedObjective<O> {
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.value_mapped(x)
    }
    fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.grad_mapped(x)
    }
    fn value_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        MappedObjective::value_and_grad(self, x)
    }
}

/// Constants of one solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub l_tilde: f64,
    pub gamma_n: f64,
    pub gamma_p: f64,
    pub epsilon: f64,
    /// Number of outer iterations.
    pub t: usize,
    /// Strong convexity of the mirror map.
    pub sigma: f64,
    pub r_tilde: f64,
}

impl SolverParams {
    /// Iteration count guaranteeing accuracy `epsilon` from a start at
    /// Euclidean distance at most `dist_bound` from the minimizer.
    pub fn iterations_for(l_tilde: f64, gamma_n: f64, gamma_p: f64, epsilon: f64, dist_bound: f64) -> usize {
        let t = (2.0 * l_tilde * dist_bound * dist_bound / (gamma_n * gamma_n * gamma_p * epsilon)).sqrt();
        (t.ceil() as usize).max(1)
    }

    /// Parameters with the iteration count derived from the diameter `2 R~`.
    pub fn auto(c: &DeformationConstants, r_tilde: f64, epsilon: f64) -> Result<Self> {
        Self::with_dist_bound(c, r_tilde, epsilon, 2.0 * r_tilde)
    }

    /// Parameters with the iteration count derived from a known bound on
    /// `|x~0 - x~*|`.
    pub fn with_dist_bound(c: &DeformationConstants, r_tilde: f64, epsilon: f64, dist_bound: f64) -> Result<Self> {
        if !(dist_bound >= 0.0) || !dist_bound.is_finite() {
            return Err(invalid("dist_bound", format!("must be finite and non-negative, got {dist_bound}")));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        let t = Self::iterations_for(c.l_tilde, c.gamma_n, c.gamma_p, epsilon, dist_bound);
        Self::with_iterations(c, r_tilde, epsilon, t)
    }

    pub fn with_iterations(c: &DeformationConstants, r_tilde: f64, epsilon: f64, t: usize) -> Result<Self> {
        let p = SolverParams {
            l_tilde: c.l_tilde,
            gamma_n: c.gamma_n,
            gamma_p: c.gamma_p,
            epsilon,
            t,
            sigma: 1.0,
            r_tilde,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma_n) || !unit(self.gamma_p) {
            return Err(invalid("gamma", format!("need gamma_n, gamma_p in (0, 1], got {}, {}", self.gamma_n, self.gamma_p)));
        }
        if !(self.l_tilde > 0.0) || !self.l_tilde.is_finite() {
            return Err(invalid("L_tilde", format!("must be positive, got {}", self.l_tilde)));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if self.t == 0 {
            return Err(invalid("t", "need at least one iteration"));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.r_tilde > 0.0) || !self.r_tilde.is_finite() {
            return Err(invalid("R_tilde", format!("must be positive, got {}", self.r_tilde)));
        }
        Ok(())
    }

    fn rate(&self) -> f64 {
        self.sigma * self.gamma_n * self.gamma_n * self.gamma_p / self.l_tilde
    }

    /// Step weight `a_i`.
    pub fn a(&self, i: usize) -> f64 {
        i as f64 * self.rate() / 2.0
    }

    /// Cumulative weight `A_i = a_1 + ... + a_i`.
    pub fn a_sum(&self, i: usize) -> f64 {
        (i * (i + 1)) as f64 * self.rate() / 4.0
    }

    /// Line-search tolerance at iteration `i >= 1` (only defined for `t >= 2`).
    pub fn eps_hat(&self, i: usize) -> f64 {
        self.a_sum(self.t) * self.epsilon / (2.0 * (self.t - 1) as f64 * self.a_sum(i))
    }

    /// Probe bound `4 log2(L~ R~ i / (gamma_n eps_hat)) + 4` at iteration `i`.
    pub fn probe_bound(&self, i: usize, eps_hat: f64) -> f64 {
        let arg = self.l_tilde * self.r_tilde * i as f64 / (self.gamma_n * eps_hat);
        4.0 * arg.max(1.0).log2() + 4.0
    }

    /// Hard limit on probes per line search.
    pub fn probe_cap(&self, i: usize, eps_hat: f64) -> usize {
        (4.0 * self.probe_bound(i, eps_hat)).ceil() as usize
    }

    /// Guaranteed gap after `t` iterations from a start at distance `dist`.
    pub fn gap_bound(&self, dist: f64) -> f64 {
        2.0 * self.l_tilde * dist * dist / (self.rate() * (self.t * (self.t + 1)) as f64) + self.epsilon / 2.0
    }

    /// `gamma_hat` corresponding to a coupling weight `lambda` at iteration `i`.
    pub fn gamma_of_lambda(&self, i: usize, lambda: f64) -> f64 {
        let s = self.a(i + 1) / self.gamma_n;
        s * (1.0 - lambda) / (lambda * self.a_sum(i))
    }

    /// Coupling weight for a given `gamma_hat` at iteration `i`.
    pub fn lambda_of_gamma(&self, i: usize, gamma_hat: f64) -> f64 {
        let s = self.a(i + 1) / self.gamma_n;
        s / (self.a_sum(i) * gamma_hat + s)
    }
}

/// Iterate of the method.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub i: usize,
    pub x: DVector<f64>,
    /// Unconstrained dual point.
    pub z: DVector<f64>,
    pub a_sum: f64,
    pub grad_evals: usize,
    /// `f(x)`, carried over from the step that produced `x`.
    pub value: f64,
}

impl SolverState {
    pub fn initial<F: BallOracle + ?Sized>(f: &F, x0: &DVector<f64>) -> Result<Self> {
        Ok(SolverState {
            i: 0,
            x: x0.clone(),
            z: x0.clone(),
            a_sum: 0.0,
            grad_evals: 0,
            value: f.value(x0)?,
        })
    }
}

/// Candidate next iterate produced by one step at a fixed `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProbe {
    pub lambda: f64,
    pub chi: DVector<f64>,
    pub x_next: DVector<f64>,
    pub z_next: DVector<f64>,
    pub value_next: f64,
    pub grad_next: DVector<f64>,
}

/// Dual gradient of the mirror map: projection onto the ball of radius
/// `r_tilde`.
pub fn mirror_dual_grad(z: &DVector<f64>, r_tilde: f64) -> DVector<f64> {
    let n = z.norm();
    if n <= r_tilde {
        z.clone()
    } else {
        z * (r_tilde / n)
    }
}

/// One extra-gradient step with coupling weight `lambda`; costs two gradient
/// evaluations. Does not modify `state`.
pub fn axgd_step<F: BallOracle + ?Sized>(
    state: &SolverState,
    params: &SolverParams,
    f: &F,
    lambda: f64,
) -> Result<StepProbe> {
    let step = params.a(state.i + 1) / params.gamma_n;
    let x = &state.x;
    let chi = x * (1.0 - lambda) + mirror_dual_grad(&state.z, params.r_tilde) * lambda;
    let g_chi = f.grad(&chi)?;
    let zeta = &state.z - g_chi * step;
    let x_next = x * (1.0 - lambda) + mirror_dual_grad(&zeta, params.r_tilde) * lambda;
    let (value_next, grad_next) = f.value_and_grad(&x_next)?;
    let z_next = &state.z - &grad_next * step;
    Ok(StepProbe {
        lambda,
        chi,
        x_next,
        z_next,
        value_next,
        grad_next,
    })
}

/// Outcome of the coupling search at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub lambda: f64,
    pub gamma_hat: f64,
    /// `G(lambda)`, at most `eps_hat` on success.
    pub residual: f64,
    pub probes: usize,
    /// `<grad f(x_{i+1}), x_{i+1} - x_i>` at the accepted point.
    pub inner: f64,
    pub step: StepProbe,
}

/// Searches `lambda` so that the accepted step satisfies
/// `f(x_{i+1}) - f(x_i) <= gamma_hat <grad f(x_{i+1}), x_{i+1} - x_i> + eps_hat`
/// with `gamma_hat` in `[gamma_p, 1/gamma_n]`.
///
/// The endpoints `gamma_hat = 1/gamma_n` and `gamma_hat = gamma_p` are tried
/// first. If both fail, the inner product has opposite signs there and the
/// bracket is bisected keeping that property, which converges to a point
/// where it vanishes and the inequality holds.
pub fn binary_line_search<F: BallOracle + ?Sized>(
    state: &SolverState,
    params: &SolverParams,
    f: &F,
    eps_hat: f64,
) -> Result<LineSearchResult> {
    let i = state.i;
    if i == 0 || !(state.a_sum > 0.0) {
        return Err(invalid("iteration", "the coupling search needs i >= 1"));
    }
    if !(eps_hat > 0.0) {
        return Err(invalid("eps_hat", format!("must be positive, got {eps_hat}")));
    }
    let cap = params.probe_cap(i, eps_hat);
    let mut probes = 0usize;
    let mut evaluate = |lambda: f64, gamma_hat: f64| -> Result<(LineSearchResult, bool)> {
        let step = axgd_step(state, params, f, lambda)?;
        probes += 1;
        let inner = step.grad_next.dot(&(&step.x_next - &state.x));
        let residual = -gamma_hat * inner + step.value_next - state.value;
        let ok = residual <= eps_hat;
        Ok((
            LineSearchResult {
                lambda,
                gamma_hat,
                residual,
                probes,
                inner,
                step,
            },
            ok,
        ))
    };

    let g_lo = 1.0 / params.gamma_n;
    let g_hi = params.gamma_p;
    let mut lo = params.lambda_of_gamma(i, g_lo);
    let mut hi = params.lambda_of_gamma(i, g_hi);
    let (first, ok) = evaluate(lo, g_lo)?;
    if ok {
        return Ok(first);
    }
    if hi == lo {
        return Err(Error::LineSearch {
            iteration: i,
            probes: first.probes,
            lo,
            hi,
            residual: first.residual,
            eps_hat,
        });
    }
    let (second, ok) = evaluate(hi, g_hi)?;
    if ok {
        return Ok(second);
    }
    let lo_negative = first.inner < 0.0;
    let mut last = second;
    loop {
        let mid = 0.5 * (lo + hi);
        if last.probes >= cap || mid <= lo || mid >= hi {
            return Err(Error::LineSearch {
                iteration: i,
                probes: last.probes,
                lo,
                hi,
                residual: last.residual,
                eps_hat,
            });
        }
        let (probe, ok) = evaluate(mid, params.gamma_of_lambda(i, mid))?;
        if ok {
            return Ok(probe);
        }
        if (probe.inner < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
        last = probe;
    }
}

/// What the solver reports after each iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Index of the new iterate `x_i`, starting at 1.
    pub i: usize,
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    /// Cumulative gradient evaluations.
    pub grad_evals: usize,
    pub lambda: f64,
    /// `None` on the first step, which needs no search.
    pub gamma_hat: Option<f64>,
    pub eps_hat: Option<f64>,
    pub probes: usize,
    pub residual: f64,
    /// `f(x_{i-1})`.
    pub prev_value: f64,
    /// `<grad f(x_i), x_i - x_{i-1}>`.
    pub inner: f64,
}

/// Result of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutput {
    pub point: MappedPoint,
    pub value: f64,
    pub grad_evals: usize,
    pub iterations: usize,
}

fn accept(state: &mut SolverState, step: StepProbe, a_next: f64, grad_evals: usize) {
    state.i += 1;
    state.x = step.x_next;
    state.z = step.z_next;
    state.a_sum += a_next;
    state.grad_evals += grad_evals;
    state.value = step.value_next;
}

/// Runs `params.t` iterations from `x0` and returns `x_t`. `trace` is called
/// once per iteration.
pub fn run<F: BallOracle + ?Sized>(
    f: &F,
    params: &SolverParams,
    x0: &MappedPoint,
    trace: &mut dyn FnMut(&IterationRecord),
) -> Result<SolverOutput> {
    params.validate()?;
    let mut state = SolverState::initial(f, x0.coords())?;
    for _ in 0..params.t {
        let i = state.i;
        let prev_value = state.value;
        let prev_x = state.x.clone();
        let a_next = params.a(i + 1);
        let (step, lambda, gamma_hat, eps_hat, probes, residual) = if i == 0 {
            // A_0 = 0: the first step is a plain mirror step and does not
            // depend on gamma_hat.
            let step = axgd_step(&state, params, f, 1.0)?;
            (step, 1.0, None, None, 1, 0.0)
        } else {
            let eps_hat = params.eps_hat(i);
            let ls = binary_line_search(&state, params, f, eps_hat)?;
            (ls.step, ls.lambda, Some(ls.gamma_hat), Some(eps_hat), ls.probes, ls.residual)
        };
        let inner = step.grad_next.dot(&(&step.x_next - &prev_x));
        let grad_norm = step.grad_next.norm();
        accept(&mut state, step, a_next, 2 * probes);
        trace(&IterationRecord {
            i: state.i,
            x: state.x.clone(),
            value: state.value,
            grad_norm,
            grad_evals: state.grad_evals,
            lambda,
            gamma_hat,
            eps_hat,
            probes,
            residual,
            prev_value,
            inner,
        });
    }
    Ok(SolverOutput {
        point: point_unchecked(state.x),
        value: state.value,
        grad_evals: state.grad_evals,
        iterations: state.i,
    })
}

fn point_unchecked(x: DVector<f64>) -> MappedPoint {
    // iterates are convex combinations of points of the ball
    crate::geodesic_map::mapped_point_from_solver(x)
}
