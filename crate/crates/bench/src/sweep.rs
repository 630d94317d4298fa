//! Batches of experiments run on worker threads, results kept in input order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::experiment::{run_experiment, RunReport};
use crate::fit::fit_rate_exponent;

/// Runs every configuration, each solver on its own thread, and returns the
/// reports in the order of `configs`.
pub fn run_all(configs: &[ExperimentConfig]) -> Vec<Result<RunReport>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunReport>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let out = run_experiment(cfg);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot is filled"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub epsilons: Vec<f64>,
    pub reports: Vec<RunReport>,
    /// Log-deflated exponent of evaluations against `1/epsilon`, when the
    /// sweep is wide enough to fit one.
    pub exponent: Option<f64>,
}

impl SweepReport {
    pub fn series(&self) -> Vec<(f64, usize)> {
        self.epsilons
            .iter()
            .zip(&self.reports)
            .map(|(&e, r)| (e, r.summary.total_evals))
            .collect()
    }

    /// `epsilon,grad_evals,final_gap,final_dist`, one line per run.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("epsilon,grad_evals,final_gap,final_dist\n");
        for (e, r) in self.epsilons.iter().zip(&self.reports) {
            let s = &r.summary;
            let _ = writeln!(out, "{e:.16e},{},{:.16e},{:.16e}", s.total_evals, s.final_gap, s.final_dist);
        }
        out
    }
}

/// File name of the trace for one accuracy, e.g. `eps_1e-4.csv`.
pub fn trace_file_name(epsilon: f64) -> String {
    format!("eps_{epsilon:e}.csv")
}

/// Runs `base` once per accuracy. With an output directory every trace is
/// written there together with `summary.csv`.
pub fn run_sweep(base: &ExperimentConfig, epsilons: &[f64], output_dir: Option<&Path>) -> Result<SweepReport> {
    if epsilons.is_empty() {
        return Err(BenchError::config(None, "epsilons", "empty list"));
    }
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let configs = epsilons
        .iter()
        .map(|&e| {
            let mut c = base.clone();
            c.epsilon = e;
            c.output = output_dir.map(|d| d.join(trace_file_name(e)));
            c.validate().map_err(|err| match err {
                BenchError::Config { message, .. } => BenchError::config(None, "epsilons", message),
                other => other,
            })?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = run_all(&configs).into_iter().collect::<Result<Vec<_>>>()?;
    let mut sweep = SweepReport {
        epsilons: epsilons.to_vec(),
        reports,
        exponent: None,
    };
    sweep.exponent = fit_rate_exponent(&sweep.series(), true).ok();
    if let Some(dir) = output_dir {
        let path: PathBuf = dir.join("summary.csv");
        std::fs::write(&path, sweep.summary_csv()).map_err(|e| BenchError::io(path, e))?;
    }
    Ok(sweep)
}

/// Parses `1e-2,1e-3,...`.
pub fn parse_epsilons(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|e| *e > 0.0 && e.is_finite())
                .ok_or_else(|| BenchError::config(None, "epsilons", format!("`{t}` is not a positive number")))
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(BenchError::config(None, "epsilons", "empty list"))
            } else {
                Ok(v)
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoaccel::manifold::Geometry;

    #[test]
    fn parallel_order_matches_sequential() {
        let base = ExperimentConfig::new(Geometry::Hyperbolic, 2, 0.5);
        let configs: Vec<ExperimentConfig> = (0..5)
            .map(|s| {
                let mut c = base.clone();
                c.seed = s;
                c.epsilon = 1e-3;
                c
            })
            .collect();
        let par = run_all(&configs);
        for (c, r) in configs.iter().zip(par) {
            assert_eq!(r.unwrap(), run_experiment(c).unwrap());
        }
    }

    #[test]
    fn sweep_writes_traces_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let base = ExperimentConfig::new(Geometry::Hyperbolic, 2, 0.5);
        let eps = [1e-2, 1e-3, 1e-4, 1e-5];
        let s = run_sweep(&base, &eps, Some(dir.path())).unwrap();
        assert!(s.exponent.is_some());
        for e in eps {
            assert!(dir.path().join(trace_file_name(e)).exists());
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 5);
        assert_eq!(trace_file_name(1e-4), "eps_1e-4.csv");
    }

    #[test]
    fn epsilon_lists() {
        assert_eq!(parse_epsilons("1e-2, 1e-3,").unwrap(), vec![1e-2, 1e-3]);
        assert!(parse_epsilons("1e-2,x").is_err());
        assert!(parse_epsilons("-1").is_err());
        assert!(parse_epsilons("").is_err());
    }
}
