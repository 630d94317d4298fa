//! Turns a configuration into a Frechet-mean instance on the unit model.
//!
//! A problem on curvature `K` is solved on the model of curvature `sign(K)`:
//! the ball radius becomes `sqrt|K| R` and objective values are `|K|` times
//! larger, so reported gaps are divided by `|K|` and distances by `sqrt|K|`.

use std::f64::consts::FRAC_PI_2;

use geoaccel::manifold::{rescale_to_unit, AmbientPoint, CurvatureClass, Geometry, TangentVector};
use geoaccel::objectives::{FrechetObjective, ManifoldObjective, WithModuli};
use geoaccel::sampling;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anchors::read_anchor_file;
use crate::config::{AnchorSource, ExperimentConfig, WeightScheme};
use crate::error::{BenchError, Result};

/// The benchmark objective, possibly with a looser declared smoothness.
#[derive(Debug, Clone)]
pub enum Objective {
    Natural(FrechetObjective),
    Declared(WithModuli<FrechetObjective>),
}

impl Objective {
    pub fn frechet(&self) -> &FrechetObjective {
        match self {
            Objective::Natural(f) => f,
            Objective::Declared(w) => w.inner(),
        }
    }
}

impl ManifoldObjective for Objective {
    fn value(&self, x: &AmbientPoint) -> f64 {
        self.frechet().value(x)
    }
    fn riem_grad(&self, x: &AmbientPoint) -> TangentVector {
        self.frechet().riem_grad(x)
    }
    fn smoothness(&self) -> f64 {
        match self {
            Objective::Natural(f) => f.smoothness(),
            Objective::Declared(w) => w.smoothness(),
        }
    }
    fn strong_convexity(&self) -> f64 {
        match self {
            Objective::Natural(f) => f.strong_convexity(),
            Objective::Declared(w) => w.strong_convexity(),
        }
    }
    fn known_minimizer(&self) -> Option<AmbientPoint> {
        self.frechet().known_minimizer()
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub geometry: Geometry,
    /// Curvature of the user's problem.
    pub curvature: f64,
    /// Center of the feasible ball: the pole of the unit model.
    pub center: AmbientPoint,
    /// Ball radius on the unit model.
    pub r_unit: f64,
    pub objective: Objective,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let unit = rescale_to_unit(cfg.curvature, cfg.radius, 1.0, 0.0)?;
        let class = CurvatureClass::unit(cfg.manifold);
        let center = AmbientPoint::pole(cfg.d, class);
        let r = unit.unit_r;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let anchors = match &cfg.anchors {
            AnchorSource::File(path) => {
                let (g, d, pts) = read_anchor_file(path)?;
                if g != cfg.manifold || d != cfg.d {
                    return Err(BenchError::config(
                        None,
                        "anchors",
                        format!("file holds {g} points of dimension {d}, config asks for {} and {}", cfg.manifold, cfg.d),
                    ));
                }
                pts
            }
            AnchorSource::Generated { count, spread } => {
                let reach = generated_reach(cfg.manifold, r, *spread);
                (0..*count)
                    .map(|_| {
                        let dist = reach * rng.random::<f64>();
                        sampling::point_at_distance(&mut rng, &center, dist)
                    })
                    .collect()
            }
        };
        let weights = match cfg.weights {
            WeightScheme::Uniform => vec![1.0; anchors.len()],
            WeightScheme::Random => (0..anchors.len()).map(|_| rng.random_range(0.5..2.0)).collect(),
        };
        let frechet = FrechetObjective::new(anchors, weights, &center, r).map_err(|e| match e {
            geoaccel::error::Error::Hemisphere { .. } => BenchError::config(
                None,
                "anchors",
                format!("anchors too far from the ball for a convex objective on the sphere: {e}"),
            ),
            other => other.into(),
        })?;
        let objective = match cfg.condition {
            None => Objective::Natural(frechet),
            Some(kappa) => {
                let mu = frechet.strong_convexity();
                let natural = frechet.smoothness();
                let declared = WithModuli::new(frechet, kappa * mu, mu).map_err(|_| {
                    BenchError::config(
                        None,
                        "condition",
                        format!("{kappa} is below the natural ratio L/mu = {}", natural / mu),
                    )
                })?;
                Objective::Declared(declared)
            }
        };
        Ok(Problem {
            geometry: cfg.manifold,
            curvature: cfg.curvature,
            center,
            r_unit: r,
            objective,
        })
    }

    /// Factor turning unit-model values into problem values.
    pub fn value_scale(&self) -> f64 {
        1.0 / self.curvature.abs()
    }

    /// Factor turning unit-model distances into problem distances.
    pub fn dist_scale(&self) -> f64 {
        1.0 / self.curvature.abs().sqrt()
    }
}

/// How far from the center generated anchors may lie. On the sphere every
/// point of the ball must stay within `pi/2` of every anchor.
pub fn generated_reach(g: Geometry, r: f64, spread: f64) -> f64 {
    match g {
        Geometry::Hyperbolic => spread * r,
        Geometry::Spherical => (spread * r).min(0.95 * (FRAC_PI_2 - r)),
    }
}
