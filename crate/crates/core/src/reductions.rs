//! Reductions between the two regimes.
//!
//! [`solve_strongly_gconvex`] runs the accelerated solver for plain
//! g-convex functions in rounds. Each round is asked for a gap of
//! `mu d^2 / 4`, which by strong convexity halves the squared distance to the
//! minimizer, and may rebuild the geodesic map around the new point.
//!
//! [`solve_gconvex_via_sc`] goes the other way: it minimizes
//! `F + (mu_i / 2) d(., x0)^2` for a halving sequence of `mu_i`, each stage
//! solved by the restart scheme to a quarter of its initial gap.

use std::f64::consts::SQRT_2;

use crate::axgd::{self, IterationRecord, SolverParams};
use crate::error::{invalid, Result};
use crate::geodesic_map::MapFrame;
use crate::manifold::{distance, AmbientPoint};
use crate::objectives::{model_delta, regularized, DeltaConstants, ManifoldObjective, MappedObjective, WithModuli};

/// One accepted solver iteration inside a reduction.
#[derive(Debug)]
pub struct ReductionStep<'a> {
    /// Regularization stage, always 0 for the restart scheme alone.
    pub stage: usize,
    pub round: usize,
    /// Map in whose coordinates `record.x` is expressed.
    pub frame: &'a MapFrame,
    pub record: &'a IterationRecord,
    /// Gradient evaluations of the whole reduction so far.
    pub grad_evals: usize,
    /// Solver parameters of the current round.
    pub params: &'a SolverParams,
}

/// Closed-form schedule of the restart scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartPlan {
    pub mu: f64,
    /// A priori bound on `d(x0, x*)`.
    pub dist0: f64,
    pub epsilon: f64,
    /// Maximum number of rounds.
    pub rounds: usize,
    pub recenter: bool,
}

/// `ceil(log2(mu dist0^2 / epsilon) - 1)`, at least 1.
pub fn restart_rounds(mu: f64, dist0: f64, epsilon: f64) -> usize {
    let r = ((mu * dist0 * dist0 / epsilon).log2() - 1.0).ceil();
    if r.is_finite() && r > 1.0 {
        r as usize
    } else {
        1
    }
}

impl RestartPlan {
    pub fn new(mu: f64, dist0: f64, epsilon: f64, recenter: bool) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(invalid("mu", format!("the restart scheme needs mu > 0, got {mu}")));
        }
        if !(dist0 >= 0.0) || !dist0.is_finite() {
            return Err(invalid("dist0", format!("must be finite and non-negative, got {dist0}")));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(RestartPlan {
            mu,
            dist0,
            epsilon,
            rounds: restart_rounds(mu, dist0, epsilon),
            recenter,
        })
    }

    /// A priori bound on the distance to the minimizer before round `k`.
    pub fn radius(&self, k: usize) -> f64 {
        self.dist0 * 0.5f64.powf(k as f64 / 2.0)
    }

    /// Gap requested from round `k` when only the a priori bound is known.
    pub fn target(&self, k: usize) -> f64 {
        self.mu * self.radius(k).powi(2) / 4.0
    }
}

/// Summary of one restart round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Distance bound used by the round.
    pub radius: f64,
    /// Requested gap `mu radius^2 / 4`.
    pub target: f64,
    pub solver_epsilon: f64,
    pub iterations: usize,
    /// Whether the map was rebuilt around the round's start.
    pub recentered: bool,
    /// Cumulative gradient evaluations after the round.
    pub grad_evals: usize,
    pub start: AmbientPoint,
    pub point: AmbientPoint,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutput {
    pub point: AmbientPoint,
    pub value: f64,
    pub grad_evals: usize,
    pub plan: RestartPlan,
    pub rounds: Vec<RoundRecord>,
}

/// Where the restart scheme starts and what it knows about the minimizer.
#[derive(Debug, Clone, Copy)]
pub struct RestartSetup<'a> {
    /// Center of a ball of radius `r` known to contain the minimizer.
    pub center: &'a AmbientPoint,
    pub r: f64,
    pub start: &'a AmbientPoint,
    /// Bound on `d(start, x*)`.
    pub dist0: f64,
    pub epsilon: f64,
    pub recenter: bool,
    /// Stage index reported to the trace.
    pub stage: usize,
}

/// Minimizes a strongly g-convex `f` over the ball `B(x0, r)` to accuracy
/// `epsilon`, starting at `x0`.
pub fn solve_strongly_gconvex<O: ManifoldObjective + ?Sized>(
    f: &O,
    x0: &AmbientPoint,
    r: f64,
    epsilon: f64,
    recenter: bool,
    trace: &mut dyn FnMut(&ReductionStep),
) -> Result<RestartOutput> {
    let setup = RestartSetup {
        center: x0,
        r,
        start: x0,
        dist0: r,
        epsilon,
        recenter,
        stage: 0,
    };
    restart(f, &setup, trace)
}

/// The restart scheme from an arbitrary start inside the ball.
///
/// Before each round the distance bound is tightened with
/// `d(x, x*) <= |grad F(x)| / mu`, which holds for any `mu`-strongly
/// g-convex function; this costs one gradient evaluation per round. The
/// closed-form round count is an upper limit: the scheme stops as soon as a
/// round's target, or `L bound^2 / 2`, certifies `epsilon`. A round whose
/// bound is zero, or whose target is below the rounding level of `F`, leaves
/// the point unchanged and ends the scheme.
pub fn restart<O: ManifoldObjective + ?Sized>(
    f: &O,
    setup: &RestartSetup,
    trace: &mut dyn FnMut(&ReductionStep),
) -> Result<RestartOutput> {
    let plan = RestartPlan::new(f.strong_convexity(), setup.dist0, setup.epsilon, setup.recenter)?;
    let base = MapFrame::new(setup.center, setup.r)?;
    let l = f.smoothness();
    let mut x = setup.start.clone();
    let mut value = f.value(&x);
    let mut evals = 0;
    let mut bound = setup.dist0;
    let mut rounds = Vec::with_capacity(plan.rounds);
    for k in 0..plan.rounds {
        let start = x.clone();
        let grad = f.riem_grad(&x);
        evals += 1;
        if k > 0 {
            bound /= SQRT_2;
        }
        bound = bound.min(grad.norm() / plan.mu);
        let target = plan.mu * bound * bound / 4.0;
        let solver_epsilon = target * 2.0 / 3.0;
        let negligible = bound == 0.0 || target <= 64.0 * f64::EPSILON * value.abs().max(f64::MIN_POSITIVE);
        let mut record = RoundRecord {
            round: k,
            radius: bound,
            target,
            solver_epsilon,
            iterations: 0,
            recentered: false,
            grad_evals: evals,
            start,
            point: x.clone(),
            value,
        };
        if k > 0 && 0.5 * l * bound * bound <= setup.epsilon {
            // smoothness already certifies the requested accuracy
            break;
        }
        if negligible {
            rounds.push(record);
            break;
        }
        let recentered = setup.recenter && bound < setup.r;
        let (frame, x_start, dist_bound) = if recentered {
            let frame = MapFrame::new(&x, bound)?;
            let origin = frame.origin();
            let d = frame.r_tilde();
            (frame, origin, d)
        } else {
            let lo = base.deformation_constants(l)?.dist_lo;
            let xt = base.to_ball(&x)?;
            let d = (bound / lo).min(2.0 * base.r_tilde());
            (base.clone(), xt, d)
        };
        let c = frame.deformation_constants(l)?;
        let params = SolverParams::with_dist_bound(&c, frame.r_tilde(), solver_epsilon, dist_bound)?;
        let mapped = MappedObjective::new(f, frame);
        let offset = evals;
        let out = axgd::run(&mapped, &params, &x_start, &mut |rec| {
            trace(&ReductionStep {
                stage: setup.stage,
                round: k,
                frame: mapped.frame(),
                record: rec,
                grad_evals: offset + rec.grad_evals,
                params: &params,
            })
        })?;
        evals += out.grad_evals;
        x = mapped.frame().from_ball(&out.point)?;
        value = f.value(&x);
        record.iterations = out.iterations;
        record.recentered = recentered;
        record.grad_evals = evals;
        record.point = x.clone();
        record.value = value;
        rounds.push(record);
        if target <= setup.epsilon {
            break;
        }
    }
    Ok(RestartOutput {
        point: x,
        value,
        grad_evals: evals,
        plan,
        rounds,
    })
}

/// Closed-form schedule of the regularization scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationPlan {
    /// Bound on `F(x0) - F(x*)`.
    pub gap: f64,
    pub r: f64,
    pub epsilon: f64,
    /// `gap / r^2`.
    pub mu0: f64,
    /// Number of stages, `ceil(log2(gap / epsilon) / 2) + 1`, at least 2.
    pub stages: usize,
    pub delta: DeltaConstants,
}

/// `ceil(log2(gap / epsilon) / 2) + 1`, at least 2.
pub fn regularization_stages(gap: f64, epsilon: f64) -> usize {
    let t = ((gap / epsilon).log2() / 2.0).ceil() + 1.0;
    if t.is_finite() && t > 2.0 {
        t as usize
    } else {
        2
    }
}

impl RegularizationPlan {
    pub fn new(gap: f64, r: f64, epsilon: f64, delta: DeltaConstants) -> Result<Self> {
        if !(gap > 0.0) || !gap.is_finite() {
            return Err(invalid("Delta", format!("must be positive, got {gap}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("R", format!("must be positive, got {r}")));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(RegularizationPlan {
            gap,
            r,
            epsilon,
            mu0: gap / (r * r),
            stages: regularization_stages(gap, epsilon),
            delta,
        })
    }

    /// Regularization weight of stage `i`.
    pub fn mu(&self, i: usize) -> f64 {
        self.mu0 * 0.5f64.powi(i as i32)
    }

    /// Bounds on the initial gap of every stage: `gap` for the first one,
    /// then `previous / 4 + mu_i r^2 / 2`.
    pub fn stage_gaps(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.stages);
        let mut g = self.gap;
        for i in 0..self.stages {
            if i > 0 {
                g = g / 4.0 + self.mu(i) * self.r * self.r / 2.0;
            }
            out.push(g);
        }
        out
    }
}

/// Gap bound `2 L r^2` valid for any `L`-smooth function on a ball of radius
/// `r` around the start.
pub fn default_gap_bound(l: f64, r: f64) -> f64 {
    2.0 * l * r * r
}

/// Summary of one regularization stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub mu: f64,
    /// Declared moduli of the regularized objective.
    pub smoothness: f64,
    pub strong_convexity: f64,
    /// Bound on the stage's initial gap.
    pub gap_bound: f64,
    /// Gap requested from the stage, a quarter of `gap_bound`.
    pub stage_epsilon: f64,
    pub rounds: usize,
    /// Cumulative gradient evaluations after the stage.
    pub grad_evals: usize,
    pub point: AmbientPoint,
    /// Value of the unregularized objective at `point`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationOutput {
    pub point: AmbientPoint,
    pub value: f64,
    pub grad_evals: usize,
    pub plan: RegularizationPlan,
    pub stages: Vec<StageRecord>,
}

/// Minimizes a g-convex `f` whose minimizer lies in `B(x0, r)` to accuracy
/// `epsilon`. `gap` bounds `F(x0) - F(x*)` and defaults to `2 L r^2`. The
/// strong convexity declared by `f` is ignored.
pub fn solve_gconvex_via_sc<O: ManifoldObjective + ?Sized>(
    f: &O,
    x0: &AmbientPoint,
    r: f64,
    gap: Option<f64>,
    epsilon: f64,
    recenter: bool,
    trace: &mut dyn FnMut(&ReductionStep),
) -> Result<RegularizationOutput> {
    let l = f.smoothness();
    let gap = gap.unwrap_or_else(|| default_gap_bound(l, r));
    let delta = model_delta(x0.geometry(), r)?;
    let plan = RegularizationPlan::new(gap, r, epsilon, delta)?;
    let plain = WithModuli::new(f, l, 0.0)?;
    let mut x = x0.clone();
    let mut evals = 0;
    let mut stages = Vec::with_capacity(plan.stages);
    for (i, stage_gap) in plan.stage_gaps().into_iter().enumerate() {
        let fi = regularized(&plain, plan.mu(i), x0.clone(), delta)?;
        let mu_sc = fi.strong_convexity();
        let stage_epsilon = stage_gap / 4.0;
        // d(x, x_i*)^2 <= 2 gap / mu and both points lie in B(x0, r)
        let dist0 = (2.0 * stage_gap / mu_sc).sqrt().min(2.0 * r);
        let setup = RestartSetup {
            center: x0,
            r,
            start: &x,
            dist0,
            epsilon: stage_epsilon,
            recenter,
            stage: i,
        };
        let offset = evals;
        let out = restart(&fi, &setup, &mut |step| {
            trace(&ReductionStep {
                grad_evals: offset + step.grad_evals,
                ..*step
            })
        })?;
        evals += out.grad_evals;
        x = out.point;
        stages.push(StageRecord {
            stage: i,
            mu: plan.mu(i),
            smoothness: fi.smoothness(),
            strong_convexity: mu_sc,
            gap_bound: stage_gap,
            stage_epsilon,
            rounds: out.rounds.len(),
            grad_evals: evals,
            point: x.clone(),
            value: f.value(&x),
        });
    }
    let value = f.value(&x);
    Ok(RegularizationOutput {
        point: x,
        value,
        grad_evals: evals,
        plan,
        stages,
    })
}

/// Squared distances `d(x_k, x*)^2` before the first round and after each
/// round.
pub fn round_distances(out: &RestartOutput, x_star: &AmbientPoint) -> Vec<f64> {
    let mut d = Vec::with_capacity(out.rounds.len() + 1);
    if let Some(first) = out.rounds.first() {
        d.push(distance(&first.start, x_star).powi(2));
    }
    d.extend(out.rounds.iter().map(|r| distance(&r.point, x_star).powi(2)));
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::reference_optimum;
    use crate::manifold::{CurvatureClass, Geometry};
    use crate::objectives::FrechetObjective;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(g: Geometry, r: f64, n: usize, seed: u64) -> (AmbientPoint, FrechetObjective) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = AmbientPoint::pole(2, CurvatureClass::unit(g));
        let spread = match g {
            Geometry::Hyperbolic => 0.9 * r,
            Geometry::Spherical => (0.9 * r).min(0.95 * (std::f64::consts::FRAC_PI_2 - r)),
        };
        let anchors = (0..n).map(|_| sampling::point_at_distance(&mut rng, &c, spread)).collect();
        (c.clone(), FrechetObjective::uniform(anchors, &c, r).unwrap())
    }

    #[test]
    fn round_count_closed_form() {
        assert_eq!(restart_rounds(1.0, 1.0, 1e-6), 19);
        assert_eq!(restart_rounds(1.0, 1.0, 1.0), 1);
        assert_eq!(restart_rounds(2.0, 1.0, 1.0), 1);
        assert_eq!(restart_rounds(1.0, 0.0, 1.0), 1);
        assert!(RestartPlan::new(0.0, 1.0, 1e-3, true).is_err());
        let p = RestartPlan::new(0.5, 2.0, 1e-3, false).unwrap();
        assert!((p.radius(2) - 1.0).abs() < 1e-15);
        assert!((p.target(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stage_count_closed_form() {
        assert_eq!(regularization_stages(1.0, 1e-4), 8);
        assert_eq!(regularization_stages(1.0, 0.25), 2);
        assert_eq!(regularization_stages(1.0, 2.0), 2);
        assert_eq!(regularization_stages(16.0, 1.0), 3);
        let delta = model_delta(Geometry::Hyperbolic, 1.0).unwrap();
        let p = RegularizationPlan::new(4.0, 2.0, 1e-3, delta).unwrap();
        assert_eq!(p.mu0, 1.0);
        for i in 1..p.stages {
            assert_eq!(p.mu(i), p.mu(i - 1) / 2.0);
        }
    }

    #[test]
    fn rejects_zero_strong_convexity() {
        let (c, f) = instance(Geometry::Hyperbolic, 1.0, 3, 1);
        let plain = WithModuli::new(&f, f.smoothness(), 0.0).unwrap();
        assert!(solve_strongly_gconvex(&plain, &c, 1.0, 1e-6, true, &mut |_| {}).is_err());
    }

    #[test]
    fn start_at_minimizer_stays_put() {
        let c = AmbientPoint::pole(2, CurvatureClass::hyperbolic());
        let f = FrechetObjective::uniform(vec![c.clone()], &c, 1.0).unwrap();
        let out = solve_strongly_gconvex(&f, &c, 1.0, 1e-6, true, &mut |_| {}).unwrap();
        assert_eq!(out.point, c);
        assert!(out.rounds.iter().all(|r| r.value == 0.0 && r.iterations == 0));
    }

    #[test]
    fn restart_contracts_and_reaches_the_target() {
        for g in [Geometry::Hyperbolic, Geometry::Spherical] {
            for recenter in [true, false] {
                let r = if g == Geometry::Hyperbolic { 1.0 } else { 0.6 };
                let (c, f) = instance(g, r, 5, 7);
                let (x_star, f_star) = reference_optimum(&f, &c, r).unwrap();
                let eps = 1e-6;
                let out = solve_strongly_gconvex(&f, &c, r, eps, recenter, &mut |_| {}).unwrap();
                assert!(out.value - f_star <= eps, "{g} {recenter}: {}", out.value - f_star);
                let d = round_distances(&out, &x_star);
                for w in d.windows(2) {
                    assert!(w[1] <= w[0] / 2.0 * (1.0 + 1e-6), "{g} {recenter}: {d:?}");
                }
                for rec in &out.rounds {
                    assert!(rec.value - f_star <= rec.target, "{g} {recenter}");
                }
            }
        }
    }

    #[test]
    fn regularization_reaches_the_target() {
        let (c, f) = instance(Geometry::Hyperbolic, 1.0, 5, 3);
        let (_, f_star) = reference_optimum(&f, &c, 1.0).unwrap();
        let eps = 1e-4;
        let out = solve_gconvex_via_sc(&f, &c, 1.0, None, eps, true, &mut |_| {}).unwrap();
        assert!(out.value - f_star <= eps, "{}", out.value - f_star);
        let gap = default_gap_bound(f.smoothness(), 1.0);
        assert_eq!(out.stages.len(), regularization_stages(gap, eps));
        assert_eq!(out.plan.mu0, gap);
        for s in &out.stages {
            assert!((s.smoothness - (f.smoothness() + s.mu * out.plan.delta.delta_n)).abs() < 1e-12);
            assert!((s.strong_convexity - s.mu * out.plan.delta.delta_p).abs() < 1e-12);
        }
    }

    #[test]
    fn easy_target_uses_the_minimal_schedule() {
        let (c, f) = instance(Geometry::Hyperbolic, 1.0, 4, 9);
        let (_, f_star) = reference_optimum(&f, &c, 1.0).unwrap();
        let gap = f.value(&c) - f_star + 1e-3;
        let eps = 2.0 * gap;
        let out = solve_gconvex_via_sc(&f, &c, 1.0, Some(gap), eps, false, &mut |_| {}).unwrap();
        assert_eq!(out.stages.len(), 2);
        assert!(out.value - f_star < eps);
    }

    #[test]
    fn regularized_minimizer_is_closer_to_the_start() {
        // the minimizer of F + mu/2 d(., x0)^2 is no farther from x0 than x*
        for seed in 0..4 {
            let (c, f) = instance(Geometry::Hyperbolic, 1.0, 5, seed);
            let (x_star, _) = reference_optimum(&f, &c, 1.0).unwrap();
            let delta = model_delta(Geometry::Hyperbolic, 1.0).unwrap();
            for mu in [4.0, 1.0, 0.25, 1.0 / 16.0] {
                let fi = regularized(&f, mu, c.clone(), delta).unwrap();
                let (xi, _) = reference_optimum(&fi, &c, 1.0).unwrap();
                assert!(distance(&xi, &c) <= distance(&x_star, &c) + 1e-6);
            }
        }
    }

    #[test]
    fn traces_report_cumulative_evaluations() {
        let (c, f) = instance(Geometry::Hyperbolic, 1.0, 3, 5);
        let mut last = 0;
        let out = solve_strongly_gconvex(&f, &c, 1.0, 1e-5, true, &mut |s| {
            assert!(s.grad_evals > last);
            last = s.grad_evals;
        })
        .unwrap();
        assert!(last <= out.grad_evals);
        assert_eq!(out.rounds.last().unwrap().grad_evals, out.grad_evals);
    }
}
