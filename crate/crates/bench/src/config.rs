//! Experiment configuration: flat `key = value` lines, `#` starts a comment.
//!
//! ```text
//! manifold = hyperbolic
//! d = 2
//! radius = 1.0
//! anchor_count = 5        # or: anchors = points.txt
//! solver = axgd
//! epsilon = 1e-4
//! seed = 7
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geoaccel::manifold::{rescale_to_unit, Geometry};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Axgd,
    Rgd,
    RestartSc,
    ReduceGc,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Axgd, SolverKind::Rgd, SolverKind::RestartSc, SolverKind::ReduceGc];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Axgd => "axgd",
            SolverKind::Rgd => "rgd",
            SolverKind::RestartSc => "restart_sc",
            SolverKind::ReduceGc => "reduce_gc",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown solver `{s}` (expected axgd, rgd, restart_sc or reduce_gc)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Uniform,
    /// Independent weights drawn uniformly from `[0.5, 2]`.
    Random,
}

impl FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(WeightScheme::Uniform),
            "random" => Ok(WeightScheme::Random),
            _ => Err(format!("unknown weight scheme `{s}` (expected uniform or random)")),
        }
    }
}

/// Where the anchors of the Frechet objective come from.
#[derive(Debug, Clone, PartialEq)]
pub enum AnchorSource {
    File(PathBuf),
    /// `count` random anchors within `spread * R` of the center.
    Generated { count: usize, spread: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub manifold: Geometry,
    pub d: usize,
    /// Sectional curvature of the problem; its sign must match `manifold`.
    pub curvature: f64,
    /// Radius of the feasible ball around the pole, in problem units.
    pub radius: f64,
    pub anchors: AnchorSource,
    pub weights: WeightScheme,
    /// Declares `L = condition * mu` instead of the natural smoothness, which
    /// must not be larger.
    pub condition: Option<f64>,
    pub solver: SolverKind,
    pub epsilon: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Rebuild the geodesic map between restart rounds.
    pub recenter: bool,
    /// Bound on `F(x0) - F(x*)` for `reduce_gc`; defaults to `2 L R^2`.
    pub gap: Option<f64>,
    /// Iteration cap for `rgd`.
    pub max_iters: usize,
    /// Fill the `wall_ns` column. Off by default so that runs are
    /// byte-reproducible.
    pub wall_time: bool,
}

impl ExperimentConfig {
    /// Defaults for everything but the geometry.
    pub fn new(manifold: Geometry, d: usize, radius: f64) -> Self {
        ExperimentConfig {
            manifold,
            d,
            curvature: manifold.k(),
            radius,
            anchors: AnchorSource::Generated { count: 5, spread: 0.9 },
            weights: WeightScheme::Uniform,
            condition: None,
            solver: SolverKind::Axgd,
            epsilon: 1e-4,
            seed: 0,
            output: None,
            recenter: true,
            gap: None,
            max_iters: 10_000_000,
            wall_time: false,
        }
    }

    /// Parses a configuration file; relative paths inside it are resolved
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut seen = HashMap::new();
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let n = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(BenchError::config(Some(n), content, "expected `key = value`"));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), n).is_some() {
                return Err(BenchError::config(Some(n), key, "given more than once"));
            }
            raw.set(key, value, Some(n), base_dir)?;
        }
        // point cross-field and range errors at the line that set the field
        raw.finish().map_err(|e| match e {
            BenchError::Config { line: None, field, message } => {
                let line = seen.get(&field).copied();
                BenchError::Config { line, field, message }
            }
            other => other,
        })
    }

    /// Applies a command-line override, e.g. `("epsilon", "1e-6")`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut raw = RawConfig::from_config(self);
        raw.set(key, value, None, Path::new("."))?;
        *self = raw.finish()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: String| Err(BenchError::config(None, f, m));
        if self.d == 0 {
            return field("d", "must be at least 1".into());
        }
        if (self.curvature > 0.0) != (self.manifold == Geometry::Spherical) || self.curvature == 0.0 {
            return field(
                "curvature",
                format!("{} does not match manifold {}", self.curvature, self.manifold),
            );
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return field("radius", format!("must be positive, got {}", self.radius));
        }
        if let Err(e) = rescale_to_unit(self.curvature, self.radius, 1.0, 0.0) {
            return field("radius", e.to_string());
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return field("epsilon", format!("must be positive, got {}", self.epsilon));
        }
        if let AnchorSource::Generated { count, spread } = self.anchors {
            if count == 0 {
                return field("anchor_count", "must be at least 1".into());
            }
            if !(spread > 0.0 && spread <= 1.0) {
                return field("spread", format!("must lie in (0, 1], got {spread}"));
            }
        }
        if let Some(c) = self.condition {
            if !(c >= 1.0) || !c.is_finite() {
                return field("condition", format!("must be at least 1, got {c}"));
            }
        }
        if let Some(g) = self.gap {
            if !(g > 0.0) || !g.is_finite() {
                return field("gap", format!("must be positive, got {g}"));
            }
        }
        Ok(())
    }
}

/// Field values before defaults and cross-field checks.
#[derive(Default)]
struct RawConfig {
    manifold: Option<Geometry>,
    d: Option<usize>,
    curvature: Option<f64>,
    radius: Option<f64>,
    anchors_file: Option<PathBuf>,
    anchor_count: Option<usize>,
    spread: Option<f64>,
    weights: Option<WeightScheme>,
    condition: Option<f64>,
    solver: Option<SolverKind>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    recenter: Option<bool>,
    gap: Option<f64>,
    max_iters: Option<usize>,
    wall_time: Option<bool>,
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: Option<usize>) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| BenchError::config(line, key, format!("cannot parse `{value}`: {e}")))
}

impl RawConfig {
    fn from_config(c: &ExperimentConfig) -> Self {
        let (anchors_file, anchor_count, spread) = match &c.anchors {
            AnchorSource::File(p) => (Some(p.clone()), None, None),
            AnchorSource::Generated { count, spread } => (None, Some(*count), Some(*spread)),
        };
        RawConfig {
            manifold: Some(c.manifold),
            d: Some(c.d),
            curvature: Some(c.curvature),
            radius: Some(c.radius),
            anchors_file,
            anchor_count,
            spread,
            weights: Some(c.weights),
            condition: c.condition,
            solver: Some(c.solver),
            epsilon: Some(c.epsilon),
            seed: Some(c.seed),
            output: c.output.clone(),
            recenter: Some(c.recenter),
            gap: c.gap,
            max_iters: Some(c.max_iters),
            wall_time: Some(c.wall_time),
        }
    }

    fn set(&mut self, key: &str, value: &str, line: Option<usize>, base: &Path) -> Result<()> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        match key {
            "manifold" => {
                self.manifold = Some(
                    value
                        .parse::<Geometry>()
                        .map_err(|_| BenchError::config(line, key, format!("unknown manifold `{value}` (expected hyperbolic or spherical)")))?,
                )
            }
            "d" => self.d = Some(parse_value(key, value, line)?),
            "curvature" => self.curvature = Some(parse_value(key, value, line)?),
            "radius" => self.radius = Some(parse_value(key, value, line)?),
            "anchors" => self.anchors_file = Some(path(value)),
            "anchor_count" => self.anchor_count = Some(parse_value(key, value, line)?),
            "spread" => self.spread = Some(parse_value(key, value, line)?),
            "weights" => self.weights = Some(parse_value(key, value, line)?),
            "condition" => self.condition = Some(parse_value(key, value, line)?),
            "solver" => self.solver = Some(parse_value(key, value, line)?),
            "epsilon" => self.epsilon = Some(parse_value(key, value, line)?),
            "seed" => self.seed = Some(parse_value(key, value, line)?),
            "output" => self.output = Some(path(value)),
            "recenter" => self.recenter = Some(parse_value(key, value, line)?),
            "gap" => self.gap = Some(parse_value(key, value, line)?),
            "max_iters" => self.max_iters = Some(parse_value(key, value, line)?),
            "wall_time" => self.wall_time = Some(parse_value(key, value, line)?),
            _ => return Err(BenchError::config(line, key, "unknown key")),
        }
        Ok(())
    }

    fn finish(self) -> Result<ExperimentConfig> {
        let missing = |f: &str| BenchError::config(None, f, "required but not given");
        let manifold = self.manifold.ok_or_else(|| missing("manifold"))?;
        let d = self.d.ok_or_else(|| missing("d"))?;
        let radius = self.radius.ok_or_else(|| missing("radius"))?;
        let mut c = ExperimentConfig::new(manifold, d, radius);
        c.anchors = match self.anchors_file {
            Some(p) => {
                if self.anchor_count.is_some() || self.spread.is_some() {
                    return Err(BenchError::config(
                        None,
                        "anchors",
                        "an anchor file excludes anchor_count and spread",
                    ));
                }
                AnchorSource::File(p)
            }
            None => AnchorSource::Generated {
                count: self.anchor_count.unwrap_or(5),
                spread: self.spread.unwrap_or(0.9),
            },
        };
        if let Some(k) = self.curvature {
            c.curvature = k;
        }
        if let Some(w) = self.weights {
            c.weights = w;
        }
        c.condition = self.condition;
        if let Some(s) = self.solver {
            c.solver = s;
        }
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.output = self.output;
        if let Some(r) = self.recenter {
            c.recenter = r;
        }
        c.gap = self.gap;
        if let Some(m) = self.max_iters {
            c.max_iters = m;
        }
        if let Some(w) = self.wall_time {
            c.wall_time = w;
        }
        c.validate()?;
        Ok(c)
    }
}
