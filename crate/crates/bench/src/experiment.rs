//! Runs one configured experiment and turns its trace into CSV rows.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use geoaccel::axgd::{self, IterationRecord, SolverParams};
use geoaccel::baselines::{reference_optimum, rgd_run, RgdParams};
use geoaccel::geodesic_map::MapFrame;
use geoaccel::manifold::{distance, AmbientPoint};
use geoaccel::objectives::{ManifoldObjective, MappedObjective};
use geoaccel::reductions::{solve_gconvex_via_sc, solve_strongly_gconvex, ReductionStep};

use crate::config::{ExperimentConfig, SolverKind};
use crate::error::{BenchError, Result};
use crate::problem::Problem;

pub const CSV_HEADER: &str = "iter,grad_evals,f_gap,dist_to_opt,lambda,gamma_hat,wall_ns";

/// One line of the trace. Gaps and distances are in problem units.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub iter: usize,
    pub grad_evals: usize,
    pub f_gap: f64,
    pub dist_to_opt: f64,
    pub lambda: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub wall_ns: u64,
}

/// Per-iteration checks of the accelerated solver's guarantees.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepAudit {
    /// Iterations that ran a coupling search.
    pub searches: usize,
    /// Searches whose probe count exceeded `4 log2(L~ R~ i / (gamma_n eps_hat)) + 4`.
    pub probe_violations: usize,
    /// Largest `probes / bound` seen.
    pub worst_probe_ratio: f64,
    /// Accepted steps violating
    /// `f(x_{i+1}) - f(x_i) <= gamma_hat <grad f(x_{i+1}), x_{i+1} - x_i> + eps_hat`.
    pub step_violations: usize,
}

impl StepAudit {
    fn observe(&mut self, rec: &IterationRecord, params: &SolverParams) {
        let (Some(gamma_hat), Some(eps_hat)) = (rec.gamma_hat, rec.eps_hat) else {
            return;
        };
        self.searches += 1;
        let bound = params.probe_bound(rec.i - 1, eps_hat);
        let ratio = rec.probes as f64 / bound;
        self.worst_probe_ratio = self.worst_probe_ratio.max(ratio);
        if ratio > 1.0 {
            self.probe_violations += 1;
        }
        if rec.value - rec.prev_value > gamma_hat * rec.inner + eps_hat {
            self.step_violations += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub solver: SolverKind,
    pub epsilon: f64,
    pub total_evals: usize,
    /// Number of rows after the starting point.
    pub iterations: usize,
    pub final_gap: f64,
    pub final_dist: f64,
    /// Optimal value used for the gaps, in problem units.
    pub reference_value: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub audit: StepAudit,
    /// Solver parameters of a plain `axgd` run.
    pub axgd_params: Option<SolverParams>,
    /// Rounds run by `restart_sc`.
    pub rounds: Option<usize>,
    /// Stage count and `mu0` of `reduce_gc`.
    pub stages: Option<usize>,
    pub mu0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<Row>,
    pub summary: Summary,
}

fn float(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

impl RunReport {
    /// The trace as CSV: [`CSV_HEADER`], then one line per row, floats with
    /// 17 significant digits and empty cells where a column does not apply.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},", r.iter, r.grad_evals);
            float(&mut out, r.f_gap);
            out.push(',');
            float(&mut out, r.dist_to_opt);
            out.push(',');
            if let Some(l) = r.lambda {
                float(&mut out, l);
            }
            out.push(',');
            if let Some(g) = r.gamma_hat {
                float(&mut out, g);
            }
            let _ = writeln!(out, ",{}", r.wall_ns);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        }
        std::fs::write(path, self.to_csv()).map_err(|e| BenchError::io(path, e))
    }

    /// `key=value` lines for the terminal.
    pub fn summary_lines(&self) -> Vec<String> {
        let s = &self.summary;
        let mut v = vec![
            format!("solver={}", s.solver),
            format!("epsilon={:e}", s.epsilon),
            format!("grad_evals={}", s.total_evals),
            format!("iterations={}", s.iterations),
            format!("final_gap={:e}", s.final_gap),
            format!("final_dist={:e}", s.final_dist),
            format!("L={} mu={}", s.smoothness, s.strong_convexity),
        ];
        if s.audit.searches > 0 {
            v.push(format!(
                "searches={} probe_violations={} worst_probe_ratio={:.3} step_violations={}",
                s.audit.searches, s.audit.probe_violations, s.audit.worst_probe_ratio, s.audit.step_violations
            ));
        }
        if let Some(r) = s.rounds {
            v.push(format!("rounds={r}"));
        }
        if let (Some(t), Some(mu0)) = (s.stages, s.mu0) {
            v.push(format!("stages={t} mu0={mu0:e}"));
        }
        v
    }
}

/// A visited point before gaps are known.
struct RawRow {
    iter: usize,
    grad_evals: usize,
    x: AmbientPoint,
    value: f64,
    lambda: Option<f64>,
    gamma_hat: Option<f64>,
    wall_ns: u64,
}

struct Recorder {
    rows: Vec<RawRow>,
    clock: Option<Instant>,
    audit: StepAudit,
}

impl Recorder {
    fn new(wall_time: bool) -> Self {
        Recorder {
            rows: Vec::new(),
            clock: wall_time.then(Instant::now),
            audit: StepAudit::default(),
        }
    }

    fn push(&mut self, grad_evals: usize, x: AmbientPoint, value: f64, lambda: Option<f64>, gamma_hat: Option<f64>) {
        let wall_ns = self.clock.map_or(0, |c| c.elapsed().as_nanos() as u64);
        self.rows.push(RawRow {
            iter: self.rows.len(),
            grad_evals,
            x,
            value,
            lambda,
            gamma_hat,
            wall_ns,
        });
    }

    fn reduction_step(&mut self, s: &ReductionStep) -> Result<()> {
        self.audit.observe(s.record, s.params);
        let x = s.frame.unchart(&s.record.x)?;
        self.push(s.grad_evals, x, s.record.value, Some(s.record.lambda), s.record.gamma_hat);
        Ok(())
    }
}

/// Runs the configured solver, computes gaps against the reference optimum
/// and writes the CSV when `cfg.output` is set. Deterministic for a fixed
/// configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let problem = Problem::build(cfg)?;
    let obj = &problem.objective;
    let center = &problem.center;
    let r = problem.r_unit;
    let eps_unit = cfg.epsilon / problem.value_scale();
    let (x_star, f_star_ref) = reference_optimum(obj, center, r)?;

    let mut rec = Recorder::new(cfg.wall_time);
    rec.push(0, center.clone(), obj.value(center), None, None);
    let mut summary = Summary {
        solver: cfg.solver,
        epsilon: cfg.epsilon,
        total_evals: 0,
        iterations: 0,
        final_gap: 0.0,
        final_dist: 0.0,
        reference_value: 0.0,
        smoothness: obj.smoothness() / problem.value_scale() * problem.dist_scale().powi(2),
        strong_convexity: obj.strong_convexity() / problem.value_scale() * problem.dist_scale().powi(2),
        audit: StepAudit::default(),
        axgd_params: None,
        rounds: None,
        stages: None,
        mu0: None,
    };

    let mut failure: Option<BenchError> = None;
    let final_point = match cfg.solver {
        SolverKind::Axgd => {
            let frame = MapFrame::new(center, r)?;
            let c = frame.deformation_constants(obj.smoothness())?;
            let params = SolverParams::auto(&c, frame.r_tilde(), eps_unit)?;
            let mapped = MappedObjective::new(obj, frame);
            let out = axgd::run(&mapped, &params, &mapped.frame().origin(), &mut |ir| {
                rec.audit.observe(ir, &params);
                match mapped.frame().unchart(&ir.x) {
                    Ok(x) => rec.push(ir.grad_evals, x, ir.value, Some(ir.lambda), ir.gamma_hat),
                    Err(e) => {
                        failure.get_or_insert(e.into());
                    }
                }
            })?;
            summary.total_evals = out.grad_evals;
            summary.axgd_params = Some(params);
            mapped.frame().from_ball(&out.point)?
        }
        SolverKind::Rgd => {
            let params = RgdParams {
                stop_below: Some(f_star_ref + eps_unit),
                ..RgdParams::for_objective(obj, cfg.max_iters, 0.0)
            };
            rec.rows.clear();
            let out = rgd_run(obj, center, r, &params, &mut |s| {
                rec.push(s.grad_evals, s.x.clone(), s.value, None, None);
            })?;
            summary.total_evals = out.grad_evals;
            out.point
        }
        SolverKind::RestartSc => {
            let out = solve_strongly_gconvex(obj, center, r, eps_unit, cfg.recenter, &mut |s| {
                if let Err(e) = rec.reduction_step(s) {
                    failure.get_or_insert(e);
                }
            })?;
            summary.total_evals = out.grad_evals;
            summary.rounds = Some(out.rounds.len());
            out.point
        }
        SolverKind::ReduceGc => {
            let gap = cfg.gap.map(|g| g / problem.value_scale());
            let out = solve_gconvex_via_sc(obj, center, r, gap, eps_unit, cfg.recenter, &mut |s| {
                if let Err(e) = rec.reduction_step(s) {
                    failure.get_or_insert(e);
                }
            })?;
            summary.total_evals = out.grad_evals;
            summary.stages = Some(out.stages.len());
            summary.mu0 = Some(out.plan.mu0 * problem.value_scale() / problem.dist_scale().powi(2));
            out.point
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }

    // The true optimum is no larger than any visited value.
    let final_value = obj.value(&final_point);
    let f_star = rec
        .rows
        .iter()
        .map(|r| r.value)
        .fold(f_star_ref.min(final_value), f64::min);
    let vs = problem.value_scale();
    let ds = problem.dist_scale();
    let rows: Vec<Row> = rec
        .rows
        .into_iter()
        .map(|raw| Row {
            iter: raw.iter,
            grad_evals: raw.grad_evals,
            f_gap: (raw.value - f_star) * vs,
            dist_to_opt: distance(&raw.x, &x_star) * ds,
            lambda: raw.lambda,
            gamma_hat: raw.gamma_hat,
            wall_ns: raw.wall_ns,
        })
        .collect();
    summary.iterations = rows.len().saturating_sub(1);
    summary.final_gap = (final_value - f_star) * vs;
    summary.final_dist = distance(&final_point, &x_star) * ds;
    summary.reference_value = f_star * vs;
    summary.audit = rec.audit;
    let report = RunReport { rows, summary };
    if let Some(path) = &cfg.output {
        report.write_csv(path)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoaccel::manifold::Geometry;

    fn base(solver: SolverKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Geometry::Hyperbolic, 2, 1.0);
        c.solver = solver;
        c.epsilon = 1e-3;
        c.seed = 3;
        c
    }

    #[test]
    fn every_solver_reaches_its_target() {
        for s in SolverKind::ALL {
            let rep = run_experiment(&base(s)).unwrap();
            let sum = &rep.summary;
            assert!(sum.final_gap <= 1e-3, "{s}: {}", sum.final_gap);
            assert!(rep.rows.iter().all(|r| r.f_gap >= 0.0), "{s}");
            assert_eq!(rep.rows[0].iter, 0);
            assert_eq!(sum.audit.step_violations, 0, "{s}");
            assert!(rep.rows.windows(2).all(|w| w[1].grad_evals >= w[0].grad_evals), "{s}");
        }
    }

    #[test]
    fn csv_layout() {
        let rep = run_experiment(&base(SolverKind::Axgd)).unwrap();
        let csv = rep.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 7);
        assert_eq!(&first[..2], &["0", "0"]);
        assert_eq!(first[4], "");
        assert_eq!(first[6], "0");
        let second: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(second[4], "1.0000000000000000e0");
        // 17 significant digits
        assert_eq!(second[2].split('e').next().unwrap().len(), 18);
    }

    #[test]
    fn curvature_scales_gaps_and_distances() {
        let mut unit = base(SolverKind::Axgd);
        unit.radius = 1.0;
        let mut scaled = unit.clone();
        scaled.curvature = -4.0;
        scaled.radius = 0.5;
        scaled.epsilon = unit.epsilon / 4.0;
        let a = run_experiment(&unit).unwrap();
        let b = run_experiment(&scaled).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        let (ra, rb) = (&a.rows[10], &b.rows[10]);
        assert!((ra.f_gap / 4.0 - rb.f_gap).abs() <= 1e-12 * ra.f_gap);
        assert!((ra.dist_to_opt / 2.0 - rb.dist_to_opt).abs() <= 1e-12 * ra.dist_to_opt);
    }
}
