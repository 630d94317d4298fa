//! Points, tangent vectors, distances and exponential/logarithm maps on the
//! unit sphere and on hyperbolic space.
//!
//! The sphere `S^d` is stored as unit vectors of `R^{d+1}`. Hyperbolic space
//! `H^d` is stored as the upper sheet of the hyperboloid
//! `sum_{i<=d} p_i^2 - p_{d+1}^2 = -1` in Minkowski space, with the time-like
//! coordinate last. Both models share the pole `(0, ..., 0, 1)`.

use nalgebra::DVector;
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};

/// How far an inner product may stray outside the domain of `acos`/`acosh`
/// before it is treated as a broken invariant instead of rounding.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Tolerance accepted by [`AmbientPoint::new`] before re-projection.
const CONSTRUCT_TOL: f64 = 1e-8;

/// Sign of the (unit) sectional curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Spherical,
    Hyperbolic,
}

impl Geometry {
    /// The unit curvature `K` of this model, `+1` or `-1`.
    pub fn k(self) -> f64 {
        match self {
            Geometry::Spherical => 1.0,
            Geometry::Hyperbolic => -1.0,
        }
    }

    /// Ambient bilinear form: Euclidean for the sphere, Minkowski for the
    /// hyperboloid.
    pub fn inner(self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let n = a.len();
        match self {
            Geometry::Spherical => a.dot(b),
            Geometry::Hyperbolic => a.rows(0, n - 1).dot(&b.rows(0, n - 1)) - a[n - 1] * b[n - 1],
        }
    }

    /// Projects an arbitrary ambient vector onto the model. Returns `None` for
    /// the zero vector on the sphere.
    fn project_point(self, mut p: DVector<f64>) -> Option<DVector<f64>> {
        let n = p.len();
        match self {
            Geometry::Spherical => {
                let norm = p.norm();
                if norm == 0.0 || !norm.is_finite() {
                    return None;
                }
                p /= norm;
            }
            Geometry::Hyperbolic => {
                let spatial = p.rows(0, n - 1).norm_squared();
                if !spatial.is_finite() {
                    return None;
                }
                p[n - 1] = (1.0 + spatial).sqrt();
            }
        }
        Some(p)
    }

    /// Removes the normal component of `v` at the model point `x`.
    fn project_tangent(self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        // <x, x> is +1 on the sphere and -1 on the hyperboloid.
        let c = self.inner(x, v) * self.k();
        v - x * c
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Geometry::Spherical => "spherical",
            Geometry::Hyperbolic => "hyperbolic",
        })
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spherical" | "sphere" => Ok(Geometry::Spherical),
            "hyperbolic" | "hyperboloid" => Ok(Geometry::Hyperbolic),
            other => Err(invalid("manifold", format!("unknown manifold `{other}`"))),
        }
    }
}

/// Curvature of the user's problem together with the unit model it lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureClass {
    pub sign: Geometry,
    /// Curvature before rescaling to `K = +-1`.
    pub raw_curvature: f64,
}

impl CurvatureClass {
    pub fn new(raw_curvature: f64) -> Result<Self> {
        if raw_curvature == 0.0 || !raw_curvature.is_finite() {
            return Err(Error::ZeroCurvature(raw_curvature));
        }
        let sign = if raw_curvature > 0.0 {
            Geometry::Spherical
        } else {
            Geometry::Hyperbolic
        };
        Ok(CurvatureClass {
            sign,
            raw_curvature,
        })
    }

    pub fn spherical() -> Self {
        CurvatureClass {
            sign: Geometry::Spherical,
            raw_curvature: 1.0,
        }
    }

    pub fn hyperbolic() -> Self {
        CurvatureClass {
            sign: Geometry::Hyperbolic,
            raw_curvature: -1.0,
        }
    }

    pub fn unit(sign: Geometry) -> Self {
        match sign {
            Geometry::Spherical => Self::spherical(),
            Geometry::Hyperbolic => Self::hyperbolic(),
        }
    }

    /// Unit curvature `+-1` of the model.
    pub fn k(&self) -> f64 {
        self.sign.k()
    }
}

/// A point of the unit sphere or of the hyperboloid.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    coords: DVector<f64>,
    class: CurvatureClass,
}

impl AmbientPoint {
    /// Builds a point from ambient coordinates that already satisfy the model
    /// equation up to small drift, then re-projects.
    pub fn new(coords: DVector<f64>, class: CurvatureClass) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid("coords", "need at least two ambient coordinates"));
        }
        let g = class.sign;
        let defect = g.inner(&coords, &coords) - g.k();
        let scale = coords.norm_squared().max(1.0);
        if !(defect.abs() <= CONSTRUCT_TOL * scale) {
            return Err(Error::Domain {
                what: "model equation",
                value: defect,
            });
        }
        if g == Geometry::Hyperbolic && coords[coords.len() - 1] <= 0.0 {
            return Err(Error::Domain {
                what: "hyperboloid sheet",
                value: coords[coords.len() - 1],
            });
        }
        Self::project(coords, class)
    }

    /// Re-projects an arbitrary ambient vector onto the model: normalization on
    /// the sphere, recomputing the time coordinate on the hyperboloid.
    pub fn project(coords: DVector<f64>, class: CurvatureClass) -> Result<Self> {
        let coords = class.sign.project_point(coords).ok_or(Error::Domain {
            what: "projection",
            value: 0.0,
        })?;
        Ok(AmbientPoint { coords, class })
    }

    /// The pole `(0, ..., 0, 1)` of the `d`-dimensional model.
    pub fn pole(d: usize, class: CurvatureClass) -> Self {
        let mut coords = DVector::zeros(d + 1);
        coords[d] = 1.0;
        AmbientPoint { coords, class }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn class(&self) -> CurvatureClass {
        self.class
    }

    pub fn geometry(&self) -> Geometry {
        self.class.sign
    }

    /// Intrinsic dimension `d`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub(crate) fn from_projected(coords: DVector<f64>, class: CurvatureClass) -> Self {
        let coords = class
            .sign
            .project_point(coords)
            .expect("projection of a finite model point");
        AmbientPoint { coords, class }
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: AmbientPoint,
    vec: DVector<f64>,
}

impl TangentVector {
    /// Projects `vec` onto the tangent space at `base`.
    pub fn new(base: AmbientPoint, vec: DVector<f64>) -> Result<Self> {
        if vec.len() != base.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: base.coords.len(),
                got: vec.len(),
            });
        }
        let vec = base.geometry().project_tangent(&base.coords, &vec);
        Ok(TangentVector { base, vec })
    }

    pub fn zero(base: AmbientPoint) -> Self {
        let vec = DVector::zeros(base.coords.len());
        TangentVector { base, vec }
    }

    pub fn base(&self) -> &AmbientPoint {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    /// Riemannian inner product with another vector at the same base.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.base.geometry().inner(&self.vec, &other.vec)
    }

    pub fn norm(&self) -> f64 {
        self.base.geometry().inner(&self.vec, &self.vec).max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            vec: &self.vec * s,
        }
    }

    /// Sum of two vectors at the same base.
    pub fn add(&self, other: &TangentVector) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            vec: &self.vec + &other.vec,
        }
    }

    pub(crate) fn from_parts(base: AmbientPoint, vec: DVector<f64>) -> Self {
        TangentVector { base, vec }
    }
}

fn check_pair(x: &AmbientPoint, y: &AmbientPoint) -> Result<()> {
    if x.geometry() != y.geometry() {
        return Err(Error::ClassMismatch);
    }
    if x.coords.len() != y.coords.len() {
        return Err(Error::DimensionMismatch {
            expected: x.coords.len(),
            got: y.coords.len(),
        });
    }
    Ok(())
}

/// Geodesic distance, with the domain check on `acos`/`acosh` made explicit.
pub fn try_distance(x: &AmbientPoint, y: &AmbientPoint) -> Result<f64> {
    check_pair(x, y)?;
    let g = x.geometry();
    let c = g.inner(&x.coords, &y.coords);
    let diff = &x.coords - &y.coords;
    match g {
        Geometry::Spherical => {
            if c.abs() > 1.0 + DOMAIN_TOL {
                return Err(Error::Domain { what: "acos", value: c });
            }
            let sum = &x.coords + &y.coords;
            Ok(2.0 * diff.norm().atan2(sum.norm()))
        }
        Geometry::Hyperbolic => {
            if -c < 1.0 - DOMAIN_TOL {
                return Err(Error::Domain { what: "acosh", value: -c });
            }
            // <x-y, x-y>_L = 4 sinh^2(d/2); avoids acosh's loss of precision
            // near zero.
            let chord = g.inner(&diff, &diff).max(0.0).sqrt();
            Ok(2.0 * (0.5 * chord).asinh())
        }
    }
}

/// Geodesic distance between two points of the same model.
///
/// Panics if the points live on different manifolds or have different
/// dimensions; use [`try_distance`] to get an error instead.
pub fn distance(x: &AmbientPoint, y: &AmbientPoint) -> f64 {
    match try_distance(x, y) {
        Ok(d) => d,
        Err(e) => panic!("distance: {e}"),
    }
}

/// `Exp_x(v)`.
pub fn exp_map(v: &TangentVector) -> AmbientPoint {
    let x = &v.base;
    let n = v.norm();
    if n == 0.0 {
        return x.clone();
    }
    let (c, s) = match x.geometry() {
        Geometry::Spherical => (n.cos(), n.sin()),
        Geometry::Hyperbolic => (n.cosh(), n.sinh()),
    };
    let p = &x.coords * c + &v.vec * (s / n);
    AmbientPoint::from_projected(p, x.class)
}

/// `Exp_x^{-1}(y)`. Returns the zero vector when `y = x`.
///
/// Panics on mismatched manifolds. On the sphere `y` must not be antipodal
/// to `x`.
pub fn log_map(x: &AmbientPoint, y: &AmbientPoint) -> TangentVector {
    let d = distance(x, y);
    let g = x.geometry();
    let w = &y.coords - &x.coords;
    let u = g.project_tangent(&x.coords, &w);
    let un = g.inner(&u, &u).max(0.0).sqrt();
    if d == 0.0 || un == 0.0 {
        return TangentVector::zero(x.clone());
    }
    TangentVector::from_parts(x.clone(), u * (d / un))
}

/// Riemannian gradient of `x -> d(x, anchor)^2 / 2`, i.e. `-Exp_x^{-1}(anchor)`.
pub fn grad_half_sqdist(x: &AmbientPoint, anchor: &AmbientPoint) -> TangentVector {
    log_map(x, anchor).scale(-1.0)
}

/// Problem constants after rescaling the curvature to `+-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledProblem {
    pub unit_r: f64,
    pub unit_l: f64,
    pub unit_mu: f64,
    pub class: CurvatureClass,
}

/// Rescales a problem on a manifold of curvature `k` to the unit model.
///
/// Distances scale by `sqrt|k|`, so a ball of radius `r` becomes one of radius
/// `sqrt|k| r` and the smoothness and strong-convexity moduli are divided by
/// `|k|`.
pub fn rescale_to_unit(k: f64, r: f64, l: f64, mu: f64) -> Result<RescaledProblem> {
    let class = CurvatureClass::new(k)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("R", format!("must be positive, got {r}")));
    }
    if !(mu >= 0.0) || !(l >= mu) || !l.is_finite() {
        return Err(invalid("L, mu", format!("need L >= mu >= 0, got L={l}, mu={mu}")));
    }
    let unit_r = k.abs().sqrt() * r;
    if k > 0.0 && unit_r >= FRAC_PI_2 {
        return Err(Error::Hemisphere { radius: unit_r });
    }
    Ok(RescaledProblem {
        unit_r,
        unit_l: l / k.abs(),
        unit_mu: mu / k.abs(),
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hyp(v: &[f64]) -> AmbientPoint {
        AmbientPoint::new(DVector::from_column_slice(v), CurvatureClass::hyperbolic()).unwrap()
    }

    fn sph(v: &[f64]) -> AmbientPoint {
        AmbientPoint::new(DVector::from_column_slice(v), CurvatureClass::spherical()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let x = hyp(&[0.0, 1.0]);
        let y = hyp(&[1f64.sinh(), 1f64.cosh()]);
        assert_abs_diff_eq!(distance(&x, &y), 1.0, epsilon = 1e-14);
        assert_eq!(distance(&x, &x), 0.0);

        let p = sph(&[0.0, 0.0, 1.0]);
        let q = sph(&[0.3f64.sin(), 0.0, 0.3f64.cos()]);
        assert_abs_diff_eq!(distance(&p, &q), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn distance_rejects_mismatch_and_drift() {
        let x = hyp(&[0.0, 1.0]);
        let s = sph(&[0.0, 1.0]);
        assert_eq!(try_distance(&x, &s), Err(Error::ClassMismatch));
        // Bypass the constructor to plant an off-model point.
        let bad = AmbientPoint {
            coords: DVector::from_column_slice(&[0.0, 0.5]),
            class: CurvatureClass::hyperbolic(),
        };
        assert!(matches!(try_distance(&x, &bad), Err(Error::Domain { .. })));
    }

    #[test]
    fn exp_example_and_zero() {
        let x = hyp(&[0.0, 1.0]);
        let v = TangentVector::new(x.clone(), DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        let y = exp_map(&v);
        assert_abs_diff_eq!(y.coords()[0], 1f64.sinh(), epsilon = 1e-14);
        assert_abs_diff_eq!(y.coords()[1], 1f64.cosh(), epsilon = 1e-14);
        assert_eq!(exp_map(&TangentVector::zero(x.clone())), x);
        let back = log_map(&x, &y);
        assert_abs_diff_eq!(back.vec()[0], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(back.vec()[1], 0.0, epsilon = 1e-13);
        assert_eq!(log_map(&y, &y).norm(), 0.0);
    }

    #[test]
    fn constructor_reprojects_and_rejects() {
        let p = sph(&[0.0, 0.6, 0.8 + 1e-10]);
        assert_abs_diff_eq!(p.coords().norm(), 1.0, epsilon = 1e-15);
        assert!(AmbientPoint::new(DVector::from_column_slice(&[0.0, 2.0]), CurvatureClass::spherical()).is_err());
        assert!(AmbientPoint::new(DVector::from_column_slice(&[0.0, -1.0]), CurvatureClass::hyperbolic()).is_err());
    }

    #[test]
    fn rescale_examples() {
        let r = rescale_to_unit(-4.0, 0.5, 8.0, 2.0).unwrap();
        assert_eq!((r.unit_r, r.unit_l, r.unit_mu), (1.0, 2.0, 0.5));
        let r = rescale_to_unit(0.25, 2.0, 1.0, 0.0).unwrap();
        assert_eq!((r.unit_r, r.unit_l, r.unit_mu), (1.0, 4.0, 0.0));
        let r = rescale_to_unit(-1.0, 0.7, 3.0, 1.5).unwrap();
        assert_eq!((r.unit_r, r.unit_l, r.unit_mu), (0.7, 3.0, 1.5));
        assert_eq!(rescale_to_unit(0.0, 1.0, 1.0, 0.0), Err(Error::ZeroCurvature(0.0)));
        assert!(matches!(rescale_to_unit(4.0, 0.8, 1.0, 0.0), Err(Error::Hemisphere { .. })));
        assert!(rescale_to_unit(-1.0, 1.0, 1.0, 2.0).is_err());
    }

    fn point(g: Geometry, raw: &[f64]) -> AmbientPoint {
        let class = CurvatureClass::unit(g);
        let mut v = DVector::from_column_slice(raw);
        let n = v.len();
        match g {
            // keep the sphere samples in the upper hemisphere
            Geometry::Spherical => v[n - 1] = v[n - 1].abs() + 0.2,
            Geometry::Hyperbolic => v[n - 1] = 0.0,
        }
        AmbientPoint::project(v, class).unwrap()
    }

    fn geometry() -> impl Strategy<Value = Geometry> {
        prop_oneof![Just(Geometry::Spherical), Just(Geometry::Hyperbolic)]
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(
            g in geometry(),
            a in proptest::collection::vec(-1.0f64..1.0, 4),
            b in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let x = point(g, &a);
            let y = point(g, &b);
            let v = log_map(&x, &y);
            let d = distance(&x, &y);
            prop_assert!((v.norm() - d).abs() <= 1e-10);
            let back = exp_map(&v);
            prop_assert!((back.coords() - y.coords()).norm() <= 1e-9);
            prop_assert!((distance(&y, &x) - d).abs() <= 1e-12);
            let g_ = grad_half_sqdist(&x, &y);
            prop_assert!((g_.norm() - d).abs() <= 1e-10);
        }

        #[test]
        fn triangle_inequality(
            g in geometry(),
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
            c in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let (x, y, z) = (point(g, &a), point(g, &b), point(g, &c));
            prop_assert!(distance(&x, &z) <= distance(&x, &y) + distance(&y, &z) + 1e-9);
        }

        #[test]
        fn half_sqdist_gradient_matches_finite_differences(
            g in geometry(),
            a in proptest::collection::vec(-1.0f64..1.0, 4),
            b in proptest::collection::vec(-1.0f64..1.0, 4),
            dir in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let x = point(g, &a);
            let anchor = point(g, &b);
            let u = TangentVector::new(x.clone(), DVector::from_vec(dir)).unwrap();
            prop_assume!(u.norm() > 1e-3);
            let u = u.scale(1.0 / u.norm());
            let h = 1e-5;
            let f = |t: f64| 0.5 * distance(&exp_map(&u.scale(t)), &anchor).powi(2);
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let an = grad_half_sqdist(&x, &anchor).inner(&u);
            let gn = grad_half_sqdist(&x, &anchor).norm();
            prop_assert!((fd - an).abs() <= 1e-6 * gn.max(1e-3), "fd {} analytic {}", fd, an);
        }

        #[test]
        fn rescaling_scales_distances(
            k in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            a in proptest::collection::vec(-1.0f64..1.0, 3),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            // A manifold of curvature k is the unit model with lengths scaled
            // by 1/sqrt|k|; rescaling multiplies them back by sqrt|k|.
            let g = if k > 0.0 { Geometry::Spherical } else { Geometry::Hyperbolic };
            let (x, y) = (point(g, &a), point(g, &b));
            let unit = distance(&x, &y);
            let raw = unit / k.abs().sqrt();
            let p = rescale_to_unit(k, raw.max(1e-3) * 0.5, 1.0, 0.5);
            if let Ok(p) = p {
                prop_assert!((p.unit_r - 0.5 * raw.max(1e-3) * k.abs().sqrt()).abs() <= 1e-12);
            }
            prop_assert!((raw * k.abs().sqrt() - unit).abs() <= 1e-10 * unit.max(1.0));
        }
    }
}
