//! The geodesic map `h` from a geodesic ball `B(x0, R)` onto a Euclidean ball
//! of radius `R~` in `R^d`: the Gnomonic projection on the sphere and the
//! Beltrami-Klein projection on hyperbolic space. Geodesics become straight
//! segments, which turns a geodesically convex problem into a (mildly
//! non-convex) constrained Euclidean one.
//!
//! A [`MapFrame`] stores an isometry sending `x0` to the pole so the map can be
//! recentered at any point.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::manifold::{distance, AmbientPoint, CurvatureClass, Geometry, TangentVector};

/// Slack allowed on ball-membership checks.
pub const BALL_TOL: f64 = 1e-9;

/// Coordinates `x~ = h(x)` of a point of the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedPoint {
    coords: DVector<f64>,
}

impl MappedPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

pub(crate) fn mapped_point_from_solver(coords: DVector<f64>) -> MappedPoint {
    MappedPoint { coords }
}

/// Constants measuring how far `h` is from an isometry on the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationConstants {
    pub gamma_n: f64,
    pub gamma_p: f64,
    /// Smoothness bound for `f = F o h^{-1}` on the ball.
    pub l_tilde: f64,
    /// Bounds on `d(x, y) / |x~ - y~|`.
    pub dist_lo: f64,
    pub dist_hi: f64,
}

/// Geodesic map centered at `x0` restricted to the ball of radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFrame {
    class: CurvatureClass,
    x0: AmbientPoint,
    frame: DMatrix<f64>,
    inverse: DMatrix<f64>,
    r: f64,
    r_tilde: f64,
}

/// Completes `x0` to a basis orthonormal for the ambient form, with `x0` last.
/// Seeds are the standard basis vectors; at every step the seed with the
/// largest residual wins (lowest index on ties), which keeps the construction
/// deterministic and well conditioned.
fn complete_basis(g: Geometry, x0: &DVector<f64>) -> DMatrix<f64> {
    let n = x0.len();
    let k = g.k();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let residual = |seed: usize, basis: &[DVector<f64>]| {
        let mut w = DVector::zeros(n);
        w[seed] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            let c = g.inner(&w, x0) * k;
            w -= x0 * c;
            for b in basis {
                let c = g.inner(&w, b);
                w -= b * c;
            }
        }
        w
    };
    for _ in 0..n - 1 {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for seed in (0..n).filter(|&s| !used[s]) {
            let w = residual(seed, &basis);
            let nn = g.inner(&w, &w);
            if best.as_ref().is_none_or(|b| nn > b.2) {
                best = Some((seed, w, nn));
            }
        }
        let (seed, w, nn) = best.expect("a seed remains");
        used[seed] = true;
        basis.push(w / nn.sqrt());
    }
    basis.push(x0.clone());
    DMatrix::from_columns(&basis)
}

fn metric_diag(g: Geometry, n: usize) -> DVector<f64> {
    let mut diag = DVector::from_element(n, 1.0);
    if g == Geometry::Hyperbolic {
        diag[n - 1] = -1.0;
    }
    diag
}

impl MapFrame {
    /// Builds the map centered at `x0` on the ball of geodesic radius `r`.
    pub fn new(x0: &AmbientPoint, r: f64) -> Result<Self> {
        let class = x0.class();
        let g = class.sign;
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("R", format!("must be positive, got {r}")));
        }
        if g == Geometry::Spherical && r >= FRAC_PI_2 {
            return Err(Error::Hemisphere { radius: r });
        }
        let n = x0.coords().len();
        let basis = complete_basis(g, x0.coords());
        let diag = metric_diag(g, n);
        // basis maps the pole to x0 and preserves the form, so its inverse is
        // G basis^T G.
        let mut frame = basis.transpose();
        for i in 0..n {
            for j in 0..n {
                frame[(i, j)] *= diag[i] * diag[j];
            }
        }
        let r_tilde = match g {
            Geometry::Spherical => r.tan(),
            Geometry::Hyperbolic => r.tanh(),
        };
        Ok(MapFrame {
            class,
            x0: x0.clone(),
            frame,
            inverse: basis,
            r,
            r_tilde,
        })
    }

    pub fn class(&self) -> CurvatureClass {
        self.class
    }

    pub fn geometry(&self) -> Geometry {
        self.class.sign
    }

    pub fn k(&self) -> f64 {
        self.class.k()
    }

    pub fn x0(&self) -> &AmbientPoint {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn r_tilde(&self) -> f64 {
        self.r_tilde
    }

    /// The isometry sending `x0` to the pole.
    pub fn frame_matrix(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// The isometry sending the pole to `x0`.
    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Wraps coordinates after checking they lie in the ball.
    pub fn point(&self, coords: DVector<f64>) -> Result<MappedPoint> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        let norm = coords.norm();
        if !(norm <= self.r_tilde + BALL_TOL) {
            return Err(Error::OutOfBall {
                norm,
                radius: self.r_tilde,
            });
        }
        Ok(MappedPoint { coords })
    }

    /// The origin `h(x0)`.
    pub fn origin(&self) -> MappedPoint {
        MappedPoint {
            coords: DVector::zeros(self.dim()),
        }
    }

    fn check_class(&self, x: &AmbientPoint) -> Result<()> {
        if x.geometry() != self.geometry() {
            return Err(Error::ClassMismatch);
        }
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// `h(x)` for any `x` in the chart domain (the open hemisphere around `x0`
    /// on the sphere, everything on hyperbolic space), ignoring the radius.
    pub fn chart(&self, x: &AmbientPoint) -> Result<DVector<f64>> {
        self.check_class(x)?;
        let p = &self.frame * x.coords();
        let d = self.dim();
        let s = p[d];
        if !(s > 0.0) {
            return Err(Error::Domain {
                what: "chart (hemisphere)",
                value: s,
            });
        }
        Ok(p.rows(0, d) / s)
    }

    /// `h^{-1}(x~)` for any `x~` in the chart image (all of `R^d` on the
    /// sphere, the open unit ball on hyperbolic space), ignoring the radius.
    pub fn unchart(&self, xt: &DVector<f64>) -> Result<AmbientPoint> {
        let d = self.dim();
        if xt.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: xt.len(),
            });
        }
        let q = 1.0 + self.k() * xt.norm_squared();
        if !(q > 0.0) {
            return Err(Error::OutOfBall {
                norm: xt.norm(),
                radius: 1.0,
            });
        }
        let s = 1.0 / q.sqrt();
        let mut p = DVector::zeros(d + 1);
        p.rows_mut(0, d).copy_from(&(xt * s));
        p[d] = s;
        Ok(AmbientPoint::from_projected(&self.inverse * p, self.class))
    }

    /// `h(x)` for a point of the ball `B(x0, R)`.
    pub fn to_ball(&self, x: &AmbientPoint) -> Result<MappedPoint> {
        self.check_class(x)?;
        let dist = distance(&self.x0, x);
        if dist > self.r + BALL_TOL {
            return Err(Error::OutOfBall {
                norm: dist,
                radius: self.r,
            });
        }
        let coords = self.chart(x)?;
        Ok(MappedPoint { coords })
    }

    /// `h^{-1}(x~)` for a point of the image ball.
    pub fn from_ball(&self, xt: &MappedPoint) -> Result<AmbientPoint> {
        let norm = xt.norm();
        if norm > self.r_tilde + BALL_TOL {
            return Err(Error::OutOfBall {
                norm,
                radius: self.r_tilde,
            });
        }
        self.unchart(&xt.coords)
    }

    /// Geodesic distance computed from map coordinates alone.
    ///
    /// Uses `cos_K d = (1 + K<x,y>) / sqrt((1 + K|x|^2)(1 + K|y|^2))`, evaluated
    /// through the matching sine so small distances keep full precision.
    pub fn mapped_distance(&self, xt: &MappedPoint, yt: &MappedPoint) -> f64 {
        mapped_distance_coords(self.geometry(), &xt.coords, &yt.coords)
    }

    /// Splits a vector given in frame coordinates at the frame-coordinates
    /// point with map image `xt` into its radial component (along the unit
    /// vector pointing away from `x0`) and its tangential part, returned as a
    /// vector of `R^d` orthogonal to `xt`.
    fn split(&self, xt: &DVector<f64>, v: &DVector<f64>) -> Option<(DVector<f64>, f64, DVector<f64>)> {
        let d = self.dim();
        let r = xt.norm();
        if r == 0.0 {
            return None;
        }
        let k = self.k();
        let g = self.geometry();
        let xhat = xt / r;
        let c = 1.0 / (1.0 + k * r * r).sqrt();
        let mut e1 = DVector::zeros(d + 1);
        e1.rows_mut(0, d).copy_from(&(&xhat * c));
        e1[d] = -k * r * c;
        let radial = g.inner(v, &e1);
        let tangential = (v - &e1 * radial).rows(0, d).into_owned();
        Some((xhat, radial, tangential))
    }

    /// Map image `v~` of a tangent vector: same norm, pointing along the image
    /// of the geodesic `t -> Exp_x(t v)`.
    pub fn pushforward_vec(&self, v: &TangentVector) -> Result<DVector<f64>> {
        let d = self.dim();
        let xt = self.chart(v.base())?;
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(DVector::zeros(d));
        }
        let vp = &self.frame * v.vec();
        let k = self.k();
        let q = 1.0 + k * xt.norm_squared();
        let dir = match self.split(&xt, &vp) {
            Some((xhat, radial, tangential)) => xhat * (q * radial) + tangential * q.sqrt(),
            None => vp.rows(0, d).into_owned(),
        };
        let dn = dir.norm();
        if dn == 0.0 {
            return Ok(DVector::zeros(d));
        }
        Ok(dir * (norm / dn))
    }

    /// Euclidean gradient of `f = F o h^{-1}` at `h(x)` from the Riemannian
    /// gradient of `F` at `x`.
    pub fn pullback_gradient(&self, grad: &TangentVector) -> Result<DVector<f64>> {
        let d = self.dim();
        let xt = self.chart(grad.base())?;
        let gp = &self.frame * grad.vec();
        let k = self.k();
        let q = 1.0 + k * xt.norm_squared();
        Ok(match self.split(&xt, &gp) {
            Some((xhat, radial, tangential)) => xhat * (radial / q) + tangential / q.sqrt(),
            None => gp.rows(0, d).into_owned(),
        })
    }

    /// Deformation constants of this ball for an `L`-smooth objective.
    pub fn deformation_constants(&self, l: f64) -> Result<DeformationConstants> {
        deformation_constants(self.geometry(), self.r, l)
    }
}

/// Stable evaluation of the distance between two chart points.
pub fn mapped_distance_coords(g: Geometry, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let k = g.k();
    let a = x.norm_squared();
    let b = y.norm_squared();
    let c = x.dot(y);
    // |x - y|^2 + K(|x|^2|y|^2 - <x,y>^2) = sin_K(d)^2 (1 + K a)(1 + K b)
    let num = ((x - y).norm_squared() + k * (a * b - c * c)).max(0.0);
    match g {
        Geometry::Spherical => num.sqrt().atan2(1.0 + c),
        Geometry::Hyperbolic => {
            let den = ((1.0 - a) * (1.0 - b)).sqrt();
            (num.sqrt() / den).asinh()
        }
    }
}

/// Manifold-side angle between `Exp_x^{-1}(x0)` and `Exp_x^{-1}(y)` given the
/// Euclidean angle `alpha_tilde` between `x0~ - x~` and `y~ - x~`, where
/// `norm_xt = |x~|`. Returns `(sin alpha, cos alpha)`.
pub fn angle_deformation(norm_xt: f64, alpha_tilde: f64, g: Geometry) -> (f64, f64) {
    let k = g.k();
    let (s, c) = alpha_tilde.sin_cos();
    let kr2 = k * norm_xt * norm_xt;
    let q = 1.0 + kr2 * s * s;
    (s * ((1.0 + kr2) / q).sqrt(), c / q.sqrt())
}

/// Deformation constants for the ball of radius `r` and an `L`-smooth `F`.
pub fn deformation_constants(g: Geometry, r: f64, l: f64) -> Result<DeformationConstants> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(invalid("L", format!("must be positive, got {l}")));
    }
    if !(r >= 0.0) {
        return Err(invalid("R", format!("must be non-negative, got {r}")));
    }
    let base = 44f64.sqrt() * l * r.max(1.0);
    Ok(match g {
        Geometry::Hyperbolic => {
            let ch = r.cosh();
            DeformationConstants {
                gamma_n: ch.powi(-2),
                gamma_p: ch.powi(-3),
                l_tilde: base * ch.powi(4),
                dist_lo: 1.0,
                dist_hi: ch * ch,
            }
        }
        Geometry::Spherical => {
            if r >= FRAC_PI_2 {
                return Err(Error::Hemisphere { radius: r });
            }
            let c = r.cos();
            DeformationConstants {
                gamma_n: c.powi(3),
                gamma_p: c * c,
                l_tilde: base,
                dist_lo: c * c,
                dist_hi: 1.0,
            }
        }
    })
}
