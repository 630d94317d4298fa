//! Objective oracles on the manifold, the induced Euclidean oracle
//! `f = F o h^{-1}` on the image ball, and the weighted Frechet-mean family.

use nalgebra::DVector;
use rand::Rng;
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::geodesic_map::{MapFrame, BALL_TOL};
use crate::manifold::{distance, grad_half_sqdist, log_map, AmbientPoint, Geometry, TangentVector};
use crate::sampling;

/// A smooth geodesically convex function on the unit model.
///
/// `smoothness` and `strong_convexity` are the moduli `L` and `mu` of the
/// quadratic upper and lower bounds along geodesics. They are trusted;
/// [`check_quadratic_bounds`] samples them when in doubt.
pub trait ManifoldObjective {
    fn value(&self, x: &AmbientPoint) -> f64;
    fn riem_grad(&self, x: &AmbientPoint) -> TangentVector;
    fn smoothness(&self) -> f64;
    fn strong_convexity(&self) -> f64;
    fn known_minimizer(&self) -> Option<AmbientPoint> {
        None
    }
}

impl<T: ManifoldObjective + ?Sized> ManifoldObjective for &T {
    fn value(&self, x: &AmbientPoint) -> f64 {
        (**self).value(x)
    }
    fn riem_grad(&self, x: &AmbientPoint) -> TangentVector {
        (**self).riem_grad(x)
    }
    fn smoothness(&self) -> f64 {
        (**self).smoothness()
    }
    fn strong_convexity(&self) -> f64 {
        (**self).strong_convexity()
    }
    fn known_minimizer(&self) -> Option<AmbientPoint> {
        (**self).known_minimizer()
    }
}

/// Curvature distortion of the squared distance on a region of diameter `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaConstants {
    /// Strong-convexity modulus of `x -> d(x, c)^2 / 2`.
    pub delta_p: f64,
    /// Smoothness modulus of `x -> d(x, c)^2 / 2`.
    pub delta_n: f64,
    pub d: f64,
}

/// Moduli of `x -> d(x, c)^2 / 2` on a region of diameter `d` whose sectional
/// curvature lies in `[k_min, k_max]`.
pub fn delta_constants(k_min: f64, k_max: f64, d: f64) -> Result<DeltaConstants> {
    if !(k_min <= k_max) {
        return Err(invalid("K_min, K_max", format!("need K_min <= K_max, got {k_min} > {k_max}")));
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(invalid("D", format!("must be positive, got {d}")));
    }
    let delta_p = if k_max <= 0.0 {
        1.0
    } else {
        let s = k_max.sqrt() * d;
        if s >= FRAC_PI_2 {
            return Err(Error::Hemisphere { radius: s });
        }
        s / s.tan()
    };
    let delta_n = if k_min >= 0.0 {
        1.0
    } else {
        let s = (-k_min).sqrt() * d;
        s / s.tanh()
    };
    Ok(DeltaConstants { delta_p, delta_n, d })
}

/// Distortion constants of the unit model on a ball of radius `r`.
pub fn model_delta(g: Geometry, r: f64) -> Result<DeltaConstants> {
    let k = g.k();
    delta_constants(k, k, 2.0 * r)
}

/// `F(x) = scale * sum_j w_j d(x, a_j)^2 / 2` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FrechetObjective {
    anchors: Vec<AmbientPoint>,
    weights: Vec<f64>,
    scale: f64,
    l: f64,
    mu: f64,
}

impl FrechetObjective {
    /// Anchors must lie in the ball `B(center, radius)`. The moduli hold on
    /// that ball; they come from the largest possible distance to an anchor,
    /// `radius + max_j d(center, a_j)`, which on the sphere must stay below
    /// `pi/2` for the objective to be convex. Weights are normalized to sum to
    /// one.
    pub fn new(anchors: Vec<AmbientPoint>, weights: Vec<f64>, center: &AmbientPoint, radius: f64) -> Result<Self> {
        if anchors.is_empty() {
            return Err(invalid("anchors", "need at least one anchor"));
        }
        if weights.len() != anchors.len() {
            return Err(Error::DimensionMismatch {
                expected: anchors.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "must be positive and finite"));
        }
        let mut spread: f64 = 0.0;
        for a in &anchors {
            if a.geometry() != center.geometry() {
                return Err(Error::ClassMismatch);
            }
            if a.dim() != center.dim() {
                return Err(Error::DimensionMismatch {
                    expected: center.dim(),
                    got: a.dim(),
                });
            }
            let dist = distance(center, a);
            if dist > radius + BALL_TOL {
                return Err(Error::OutOfBall { norm: dist, radius });
            }
            spread = spread.max(dist);
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Every point of the ball is within radius + spread of every anchor.
        let k = center.geometry().k();
        let delta = delta_constants(k, k, radius + spread)?;
        Ok(FrechetObjective {
            anchors,
            weights,
            scale: 1.0,
            l: delta.delta_n,
            mu: delta.delta_p,
        })
    }

    /// Equal weights.
    pub fn uniform(anchors: Vec<AmbientPoint>, center: &AmbientPoint, radius: f64) -> Result<Self> {
        let w = vec![1.0; anchors.len()];
        Self::new(anchors, w, center, radius)
    }

    /// Multiplies the whole objective (and both moduli) by `factor`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(invalid("scale", format!("must be positive, got {factor}")));
        }
        self.scale *= factor;
        self.l *= factor;
        self.mu *= factor;
        Ok(self)
    }

    pub fn anchors(&self) -> &[AmbientPoint] {
        &self.anchors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl ManifoldObjective for FrechetObjective {
    fn value(&self, x: &AmbientPoint) -> f64 {
        let s: f64 = self
            .anchors
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * distance(x, a).powi(2))
            .sum();
        0.5 * self.scale * s
    }

    fn riem_grad(&self, x: &AmbientPoint) -> TangentVector {
        let mut acc = DVector::zeros(x.dim() + 1);
        for (a, w) in self.anchors.iter().zip(&self.weights) {
            acc -= log_map(x, a).vec() * (w * self.scale);
        }
        TangentVector::new(x.clone(), acc).expect("matching dimension")
    }

    fn smoothness(&self) -> f64 {
        self.l
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn known_minimizer(&self) -> Option<AmbientPoint> {
        (self.anchors.len() == 1).then(|| self.anchors[0].clone())
    }
}

/// An objective whose declared moduli are replaced by looser ones: a larger
/// smoothness and/or a smaller strong convexity. The result is still a valid
/// member of the class with the new moduli.
#[derive(Debug, Clone, PartialEq)]
pub struct WithModuli<O> {
    inner: O,
    l: f64,
    mu: f64,
}

impl<O: ManifoldObjective> WithModuli<O> {
    pub fn new(inner: O, l: f64, mu: f64) -> Result<Self> {
        if !(l >= inner.smoothness()) {
            return Err(invalid("L", format!("{l} is below the objective's smoothness {}", inner.smoothness())));
        }
        if !(mu >= 0.0 && mu <= inner.strong_convexity()) {
            return Err(invalid(
                "mu",
                format!("{mu} is outside [0, {}]", inner.strong_convexity()),
            ));
        }
        Ok(WithModuli { inner, l, mu })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: ManifoldObjective> ManifoldObjective for WithModuli<O> {
    fn value(&self, x: &AmbientPoint) -> f64 {
        self.inner.value(x)
    }
    fn riem_grad(&self, x: &AmbientPoint) -> TangentVector {
        self.inner.riem_grad(x)
    }
    fn smoothness(&self) -> f64 {
        self.l
    }
    fn strong_convexity(&self) -> f64 {
        self.mu
    }
    fn known_minimizer(&self) -> Option<AmbientPoint> {
        self.inner.known_minimizer()
    }
}

/// `F(x) + mu_i d(x, center)^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularized<O> {
    inner: O,
    mu_i: f64,
    center: AmbientPoint,
    delta: DeltaConstants,
}

/// Adds the proximal term `mu_i d(x, center)^2 / 2` to `obj`. `delta` holds the
/// moduli of the squared distance on the region where the sum is used.
pub fn regularized<O: ManifoldObjective>(
    obj: O,
    mu_i: f64,
    center: AmbientPoint,
    delta: DeltaConstants,
) -> Result<Regularized<O>> {
    if !(mu_i >= 0.0) || !mu_i.is_finite() {
        return Err(invalid("mu_i", format!("must be non-negative, got {mu_i}")));
    }
    Ok(Regularized {
        inner: obj,
        mu_i,
        center,
        delta,
    })
}

impl<O> Regularized<O> {
    pub fn mu_i(&self) -> f64 {
        self.mu_i
    }

    pub fn center(&self) -> &AmbientPoint {
        &self.center
    }
}

impl<O: ManifoldObjective> ManifoldObjective for Regularized<O> {
    fn value(&self, x: &AmbientPoint) -> f64 {
        self.inner.value(x) + 0.5 * self.mu_i * distance(x, &self.center).powi(2)
    }

    fn riem_grad(&self, x: &AmbientPoint) -> TangentVector {
        let g = self.inner.riem_grad(x);
        if self.mu_i == 0.0 {
            return g;
        }
        g.add(&grad_half_sqdist(x, &self.center).scale(self.mu_i))
    }

    fn smoothness(&self) -> f64 {
        self.inner.smoothness() + self.mu_i * self.delta.delta_n
    }

    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity() + self.mu_i * self.delta.delta_p
    }

    fn known_minimizer(&self) -> Option<AmbientPoint> {
        if self.mu_i == 0.0 {
            self.inner.known_minimizer()
        } else {
            None
        }
    }
}

/// The Euclidean objective `f = F o h^{-1}` on the image ball of `frame`.
#[derive(Debug, Clone)]
pub struct MappedObjective<O> {
    inner: O,
    frame: MapFrame,
}

impl<O: ManifoldObjective> MappedObjective<O> {
    pub fn new(inner: O, frame: MapFrame) -> Self {
        MappedObjective { inner, frame }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn frame(&self) -> &MapFrame {
        &self.frame
    }

    fn lift(&self, xt: &DVector<f64>) -> Result<AmbientPoint> {
        let norm = xt.norm();
        if norm > self.frame.r_tilde() + BALL_TOL {
            return Err(Error::OutOfBall {
                norm,
                radius: self.frame.r_tilde(),
            });
        }
        self.frame.unchart(xt)
    }

    /// `f(x~) = F(h^{-1}(x~))`.
    pub fn value_mapped(&self, xt: &DVector<f64>) -> Result<f64> {
        Ok(self.inner.value(&self.lift(xt)?))
    }

    /// Euclidean gradient of `f` at `x~`.
    pub fn grad_mapped(&self, xt: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.lift(xt)?;
        self.frame.pullback_gradient(&self.inner.riem_grad(&x))
    }

    /// Value and gradient from a single lift.
    pub fn value_and_grad(&self, xt: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let x = self.lift(xt)?;
        let g = self.frame.pullback_gradient(&self.inner.riem_grad(&x))?;
        Ok((self.inner.value(&x), g))
    }
}

/// Worst observed slack of the two quadratic bounds over sampled pairs.
/// Positive numbers are violations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub samples: usize,
    pub worst_upper: f64,
    pub worst_lower: f64,
}

impl BoundCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.worst_upper <= tol && self.worst_lower <= tol
    }
}

/// Samples pairs in the ball of `frame` and measures how far the declared
/// moduli are from being violated:
/// `F(y) <= F(x) + <grad F(x), log_x y> + L/2 d^2` and
/// `F(y) >= F(x) + <grad F(x), log_x y> + mu/2 d^2`.
pub fn check_quadratic_bounds<O: ManifoldObjective, R: Rng + ?Sized>(
    obj: &O,
    frame: &MapFrame,
    samples: usize,
    rng: &mut R,
) -> Result<BoundCheck> {
    let (l, mu) = (obj.smoothness(), obj.strong_convexity());
    let mut out = BoundCheck {
        samples,
        worst_upper: f64::NEG_INFINITY,
        worst_lower: f64::NEG_INFINITY,
    };
    for _ in 0..samples {
        let x = sampling::point_in_ball(rng, frame, 1.0)?;
        let y = sampling::point_in_ball(rng, frame, 1.0)?;
        let (fx, fy) = (obj.value(&x), obj.value(&y));
        let v = log_map(&x, &y);
        let lin = fx + obj.riem_grad(&x).inner(&v);
        let d2 = v.norm().powi(2);
        let scale = fx.abs().max(fy.abs()).max(1.0) * 1e-12;
        out.worst_upper = out.worst_upper.max(fy - (lin + 0.5 * l * d2) - scale);
        out.worst_lower = out.worst_lower.max((lin + 0.5 * mu * d2) - fy - scale);
    }
    Ok(out)
}
