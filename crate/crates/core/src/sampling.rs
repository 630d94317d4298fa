//! Random points and directions, used by the instance generators and by the
//! property suites.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::geodesic_map::MapFrame;
use crate::manifold::{exp_map, AmbientPoint, TangentVector};

/// Uniformly distributed unit vector of `R^d`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform sample from the Euclidean ball of radius `radius` in `R^d`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> DVector<f64> {
    let u: f64 = rng.random();
    unit_vector(rng, d) * (radius * u.powf(1.0 / d as f64))
}

/// Random unit tangent vector at `x`.
pub fn unit_tangent<R: Rng + ?Sized>(rng: &mut R, x: &AmbientPoint) -> TangentVector {
    loop {
        let raw = DVector::from_fn(x.dim() + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = TangentVector::new(x.clone(), raw).expect("matching dimension");
        let n = v.norm();
        if n > 1e-8 {
            return v.scale(1.0 / n);
        }
    }
}

/// Point at geodesic distance `dist` from `x` in a random direction.
pub fn point_at_distance<R: Rng + ?Sized>(rng: &mut R, x: &AmbientPoint, dist: f64) -> AmbientPoint {
    exp_map(&unit_tangent(rng, x).scale(dist))
}

/// Point whose map image is uniform in the ball of radius `frac * R~`.
pub fn point_in_ball<R: Rng + ?Sized>(rng: &mut R, frame: &MapFrame, frac: f64) -> Result<AmbientPoint> {
    let xt = uniform_in_ball(rng, frame.dim(), frac * frame.r_tilde());
    frame.unchart(&xt)
}
