//! Randomized checks of the geodesic-map identities and inequalities over a
//! grid of geometries, dimensions and radii.
//!
//! Every check reports its worst slack: the smallest margin by which a
//! sample satisfied the inequality, after the check's tolerance. A negative
//! slack is a violation.

use std::fmt;

use geoaccel::geodesic_map::{angle_deformation, MapFrame};
use geoaccel::manifold::{distance, exp_map, log_map, AmbientPoint, CurvatureClass, Geometry, TangentVector};
use geoaccel::objectives::{FrechetObjective, ManifoldObjective, MappedObjective};
use geoaccel::sampling;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::problem::generated_reach;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Distances, charts, round trips and the distance, angle and gradient
    /// deformation identities.
    Geometry,
    /// Directional-derivative sandwich and the relaxed convexity bounds.
    Sandwich,
    /// Derivative oracles: finite differences and Euclidean smoothness.
    Derivatives,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub suite: Suite,
    pub samples: usize,
    pub violations: usize,
    pub worst_slack: f64,
}

impl Check {
    fn new(name: &'static str, suite: Suite) -> Self {
        Check {
            name,
            suite,
            samples: 0,
            violations: 0,
            worst_slack: f64::INFINITY,
        }
    }

    /// Records a sample with margin `slack`; NaN counts as a violation.
    fn record(&mut self, slack: f64) {
        self.samples += 1;
        if !(slack >= 0.0) {
            self.violations += 1;
        }
        self.worst_slack = if slack.is_nan() { f64::NEG_INFINITY } else { self.worst_slack.min(slack) };
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.samples > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub geometry: Geometry,
    pub d: usize,
    pub r: f64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} d={} R={}", self.geometry, self.d, self.r)
    }
}

/// `K = -1, +1`, `d = 2, 5, 10` and three radii per geometry.
pub fn grid() -> Vec<Cell> {
    let mut cells = Vec::new();
    for geometry in [Geometry::Hyperbolic, Geometry::Spherical] {
        let radii: [f64; 3] = match geometry {
            Geometry::Hyperbolic => [0.3, 1.0, 1.5],
            Geometry::Spherical => [0.3, 1.0, 1.4],
        };
        for d in [2, 5, 10] {
            for r in radii {
                cells.push(Cell { geometry, d, r });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Samples per check for the geometry and sandwich suites.
    pub samples: usize,
    /// Samples per check for the derivative suite.
    pub fd_samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 10_000,
            fd_samples: 1_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub cell: Cell,
    pub gamma_n: f64,
    pub gamma_p: f64,
    /// Extremes of `<grad F(x), log_x y> / <grad f(x~), y~ - x~>` seen.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub checks: Vec<Check>,
}

impl CellReport {
    pub fn passed(&self, suite: Suite) -> bool {
        self.checks.iter().filter(|c| c.suite == suite).all(Check::passed)
    }

    /// Whether the observed extreme ratios come within `factor` of the
    /// closed-form bounds `gamma_p` and `1 / gamma_n`.
    pub fn bounds_tight_within(&self, factor: f64) -> bool {
        self.ratio_min <= factor * self.gamma_p && self.ratio_max >= 1.0 / (factor * self.gamma_n)
    }
}

/// Stable angle between two vectors given their inner product structure via
/// the unit vectors' sum and difference norms.
fn angle_between(diff: f64, sum: f64) -> f64 {
    2.0 * diff.atan2(sum)
}

fn tangent_angle(u: &TangentVector, v: &TangentVector) -> f64 {
    let a = u.scale(1.0 / u.norm());
    let b = v.scale(1.0 / v.norm());
    angle_between(a.add(&b.scale(-1.0)).norm(), a.add(&b).norm())
}

fn euclid_angle(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let a = u / u.norm();
    let b = v / v.norm();
    angle_between((&a - &b).norm(), (&a + &b).norm())
}

/// Frechet objectives convex on the ball of `frame`: single anchors, which
/// give the widest range of gradient directions, and weighted groups of five.
fn objective_pool<R: Rng>(rng: &mut R, frame: &MapFrame, count: usize) -> Result<Vec<FrechetObjective>> {
    let reach = generated_reach(frame.geometry(), frame.r(), 1.0);
    (0..count)
        .map(|k| {
            let n = if k % 2 == 0 { 1 } else { 5 };
            let anchors: Vec<AmbientPoint> = (0..n)
                .map(|_| {
                    let dist = if n == 1 { reach } else { reach * rng.random::<f64>() };
                    sampling::point_at_distance(rng, frame.x0(), dist)
                })
                .collect();
            let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            Ok(FrechetObjective::new(anchors, weights, frame.x0(), frame.r())?)
        })
        .collect()
}

struct Checks {
    eq1: Check,
    chart_trip: Check,
    exp_log_trip: Check,
    boundary: Check,
    dist_ratio: Check,
    angle: Check,
    orthogonal: Check,
    ratio: Check,
    lower_neg: Check,
    lower_pos: Check,
    pullback_fd: Check,
    composition: Check,
    smoothness: Check,
}

impl Checks {
    fn new() -> Self {
        Checks {
            eq1: Check::new("mapped_distance", Suite::Geometry),
            chart_trip: Check::new("chart_round_trip", Suite::Geometry),
            exp_log_trip: Check::new("exp_log_round_trip", Suite::Geometry),
            boundary: Check::new("boundary_radius", Suite::Geometry),
            dist_ratio: Check::new("distance_ratio", Suite::Geometry),
            angle: Check::new("angle_deformation", Suite::Geometry),
            orthogonal: Check::new("normal_preserved", Suite::Geometry),
            ratio: Check::new("derivative_ratio", Suite::Sandwich),
            lower_neg: Check::new("lower_bound_descent", Suite::Sandwich),
            lower_pos: Check::new("lower_bound_ascent", Suite::Sandwich),
            pullback_fd: Check::new("pullback_vs_fd", Suite::Derivatives),
            composition: Check::new("composition", Suite::Derivatives),
            smoothness: Check::new("euclidean_smoothness", Suite::Derivatives),
        }
    }

    fn into_vec(self) -> Vec<Check> {
        vec![
            self.eq1,
            self.chart_trip,
            self.exp_log_trip,
            self.boundary,
            self.dist_ratio,
            self.angle,
            self.orthogonal,
            self.ratio,
            self.lower_neg,
            self.lower_pos,
            self.pullback_fd,
            self.composition,
            self.smoothness,
        ]
    }
}

/// Runs all checks on one cell. The frame is centered at a random point, not
/// the pole, so that the recentering isometry is exercised as well.
pub fn verify_cell(cell: Cell, opts: &VerifyOptions) -> Result<CellReport> {
    let salt = (cell.d as u64) << 32 ^ cell.r.to_bits() ^ (cell.geometry == Geometry::Spherical) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ salt);
    let class = CurvatureClass::unit(cell.geometry);
    let pole = AmbientPoint::pole(cell.d, class);
    let x0 = sampling::point_at_distance(&mut rng, &pole, 0.7);
    let frame = MapFrame::new(&x0, cell.r)?;
    let consts = frame.deformation_constants(1.0)?;
    let (gn, gp) = (consts.gamma_n, consts.gamma_p);
    let rt = frame.r_tilde();
    let mut c = Checks::new();
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = f64::NEG_INFINITY;

    for _ in 0..opts.samples {
        let xt = sampling::uniform_in_ball(&mut rng, cell.d, rt);
        let yt = sampling::uniform_in_ball(&mut rng, cell.d, rt);
        let x = frame.unchart(&xt)?;
        let y = frame.unchart(&yt)?;
        let dxy = distance(&x, &y);

        let md = geoaccel::geodesic_map::mapped_distance_coords(cell.geometry, &xt, &yt);
        c.eq1.record(1e-9 - (md - dxy).abs());

        let back = frame.unchart(&frame.chart(&x)?)?;
        c.chart_trip.record(1e-10 - distance(&x, &back));

        let v = log_map(&x, &y);
        c.exp_log_trip.record(1e-10 - distance(&exp_map(&v), &y).max((v.norm() - dxy).abs()));

        let u = sampling::unit_vector(&mut rng, cell.d) * rt;
        c.boundary.record(1e-9 - (distance(&x0, &frame.unchart(&u)?) - cell.r).abs());

        let e = (&xt - &yt).norm();
        if e > 1e-6 {
            let ratio = dxy / e;
            let lo = consts.dist_lo * (1.0 - 1e-9);
            let hi = consts.dist_hi * (1.0 + 1e-9);
            c.dist_ratio.record((ratio - lo).min(hi - ratio));
        }

        // angle at x between the directions to x0 and to y
        if xt.norm() > 1e-3 && e > 1e-3 {
            let alpha_t = euclid_angle(&(-&xt), &(&yt - &xt));
            let (s, co) = angle_deformation(xt.norm(), alpha_t, cell.geometry);
            let predicted = s.atan2(co);
            let measured = tangent_angle(&log_map(&x, &x0), &v);
            c.angle.record(1e-8 - (predicted - measured).abs());
        }

        // a tangent vector normal to a random direction stays normal
        let g = sampling::unit_tangent(&mut rng, &x);
        let w = sampling::unit_tangent(&mut rng, &x);
        let w = w.add(&g.scale(-w.inner(&g)));
        if w.norm() > 1e-3 {
            let wt = frame.pushforward_vec(&w)?;
            let gt = frame.pullback_gradient(&g)?;
            c.orthogonal.record(1e-8 * wt.norm() * gt.norm() - wt.dot(&gt).abs());
        }
    }

    let pool = objective_pool(&mut rng, &frame, 16)?;
    for k in 0..opts.samples {
        let obj = &pool[k % pool.len()];
        let xt = sampling::uniform_in_ball(&mut rng, cell.d, rt);
        let yt = sampling::uniform_in_ball(&mut rng, cell.d, rt);
        let x = frame.unchart(&xt)?;
        let y = frame.unchart(&yt)?;
        let grad = obj.riem_grad(&x);
        let gt = frame.pullback_gradient(&grad)?;
        let step = &yt - &xt;
        let den = gt.dot(&step);
        let num = grad.inner(&log_map(&x, &y));
        let scale = gt.norm() * step.norm();
        if den.abs() > 1e-9 * scale {
            let ratio = num / den;
            ratio_min = ratio_min.min(ratio);
            ratio_max = ratio_max.max(ratio);
            c.ratio.record((ratio - gp * (1.0 - 1e-9)).min((1.0 + 1e-9) / gn - ratio));
        }
        let (fx, fy) = (obj.value(&x), obj.value(&y));
        let tol = 1e-10 * fx.abs().max(fy.abs()).max(1e-3);
        if den <= 0.0 {
            c.lower_neg.record(fy - (fx + den / gn) + tol);
        }
        if den >= 0.0 {
            c.lower_pos.record(fy - (fx + gp * den) + tol);
        }
    }

    for k in 0..opts.fd_samples {
        let obj = &pool[k % pool.len()];
        let consts_obj = frame.deformation_constants(obj.smoothness())?;
        let mapped = MappedObjective::new(obj, frame.clone());
        let xt = sampling::uniform_in_ball(&mut rng, cell.d, 0.99 * rt);
        let x = frame.unchart(&xt)?;
        let analytic = mapped.grad_mapped(&xt)?;
        let h = 1e-5 * xt.norm().max(1.0);
        let mut fd = DVector::zeros(cell.d);
        for i in 0..cell.d {
            let mut p = xt.clone();
            let mut m = xt.clone();
            p[i] += h;
            m[i] -= h;
            fd[i] = (mapped.value_mapped(&p)? - mapped.value_mapped(&m)?) / (2.0 * h);
        }
        let rel = (&fd - &analytic).norm() / analytic.norm().max(1e-3);
        c.pullback_fd.record(1e-6 - rel);

        let direct = obj.value(&x);
        let via_map = mapped.value_mapped(&xt)?;
        c.composition.record(4.0 * f64::EPSILON * direct.abs().max(1.0) - (direct - via_map).abs());

        let yt = sampling::uniform_in_ball(&mut rng, cell.d, rt);
        let dist = (&xt - &yt).norm();
        if dist > 1e-6 {
            let lip = (&analytic - mapped.grad_mapped(&yt)?).norm() / dist;
            c.smoothness.record(1.0 - lip / consts_obj.l_tilde);
        }
    }

    Ok(CellReport {
        cell,
        gamma_n: gn,
        gamma_p: gp,
        ratio_min,
        ratio_max,
        checks: c.into_vec(),
    })
}

/// Runs [`verify_cell`] on every grid cell, in parallel, in grid order.
pub fn verify_all(opts: &VerifyOptions) -> Result<Vec<CellReport>> {
    let cells = grid();
    let out: Vec<Result<CellReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = cells.iter().map(|&cell| s.spawn(move || verify_cell(cell, opts))).collect();
        handles.into_iter().map(|h| h.join().expect("verify worker panicked")).collect()
    });
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = grid();
        assert_eq!(g.len(), 18);
        assert!(g.iter().any(|c| c.geometry == Geometry::Spherical && c.r == 1.4));
        assert!(g.iter().all(|c| c.geometry == Geometry::Spherical || c.r != 1.4));
    }

    #[test]
    fn small_run_has_no_violations() {
        let opts = VerifyOptions {
            samples: 300,
            fd_samples: 30,
            seed: 1,
        };
        for cell in [grid()[4], grid()[13]] {
            let rep = verify_cell(cell, &opts).unwrap();
            for ch in &rep.checks {
                assert!(ch.passed(), "{cell} {}: {} violations, worst {}", ch.name, ch.violations, ch.worst_slack);
            }
            assert!(rep.ratio_min <= rep.ratio_max);
        }
    }

    #[test]
    fn nan_is_a_violation() {
        let mut c = Check::new("x", Suite::Geometry);
        c.record(1.0);
        c.record(f64::NAN);
        c.record(2.0);
        assert_eq!(c.violations, 1);
        assert_eq!(c.worst_slack, f64::NEG_INFINITY);
    }
}
