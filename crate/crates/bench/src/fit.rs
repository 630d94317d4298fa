//! Least-squares rate exponents on log-log data.

use crate::error::{BenchError, Result};

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(BenchError::Fit(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(BenchError::Fit("need at least two points".into()));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(BenchError::Fit(format!("log-log fit needs positive finite data, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(BenchError::Fit("all abscissae are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Exponent `p` in `grad_evals ~ (1/epsilon)^p` from `(epsilon, grad_evals)`
/// pairs. With `deflate` the evaluation counts are first divided by
/// `ln(1/epsilon)` to strip one logarithmic factor. Needs at least four
/// points spanning two decades of `epsilon`.
pub fn fit_rate_exponent(series: &[(f64, usize)], deflate: bool) -> Result<f64> {
    if series.len() < 4 {
        return Err(BenchError::Fit(format!("need at least 4 points, got {}", series.len())));
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(e, _)| (lo.min(e), hi.max(e)));
    if !(lo > 0.0) || !(hi / lo >= 100.0 * (1.0 - 1e-12)) {
        return Err(BenchError::Fit(format!("epsilons span [{lo:e}, {hi:e}], less than two decades")));
    }
    if deflate && hi >= 1.0 {
        return Err(BenchError::Fit(format!("deflation needs epsilon < 1, got {hi:e}")));
    }
    let xs: Vec<f64> = series.iter().map(|&(e, _)| 1.0 / e).collect();
    let ys: Vec<f64> = series
        .iter()
        .map(|&(e, n)| if deflate { n as f64 / (1.0 / e).ln() } else { n as f64 })
        .collect();
    fit_log_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

    #[test]
    fn exact_power_laws() {
        let sqrt: Vec<(f64, usize)> = EPS.iter().map(|&e| (e, (1e3 / e.sqrt()).round() as usize)).collect();
        assert!((fit_rate_exponent(&sqrt, false).unwrap() - 0.5).abs() < 1e-6);
        let lin: Vec<(f64, usize)> = EPS.iter().map(|&e| (e, (7.0 / e).round() as usize)).collect();
        assert!((fit_rate_exponent(&lin, false).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deflation_removes_a_log_factor() {
        let s: Vec<(f64, usize)> = EPS
            .iter()
            .map(|&e| (e, (1e4 * (1.0 / e).ln() / e.sqrt()).round() as usize))
            .collect();
        assert!((fit_rate_exponent(&s, true).unwrap() - 0.5).abs() < 1e-5);
        assert!(fit_rate_exponent(&s, false).unwrap() > 0.55);
    }

    #[test]
    fn insufficient_span_is_rejected() {
        let few = [(1e-2, 10), (1e-3, 30), (1e-4, 100)];
        assert!(matches!(fit_rate_exponent(&few, false), Err(BenchError::Fit(_))));
        let narrow = [(1e-2, 10), (5e-3, 14), (2e-3, 22), (1.5e-3, 26)];
        assert!(fit_rate_exponent(&narrow, false).is_err());
        assert!(fit_log_slope(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(fit_log_slope(&[1.0, 2.0], &[0.0, 3.0]).is_err());
    }
}
