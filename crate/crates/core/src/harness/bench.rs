use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{draw_trial, fit_regression_with, ExperimentSpec, Method, Scenario, TrialData};
use crate::error::{Error, Result};

/// Wall time of one method relative to the plain mean-gradient baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub mean_ms: f64,
    /// Mean and standard deviation over replicates of `t_method / t_Mean`.
    pub relative_mean: f64,
    pub relative_std: f64,
}

/// Times every method on the regression or contamination cells of `spec`,
/// sequentially, with early stopping disabled so each fit performs exactly
/// `t_max` updates. `Mean` is always included as the baseline.
pub fn run_bench(spec: &ExperimentSpec) -> Result<Vec<BenchRow>> {
    if !matches!(spec.scenario, Scenario::Regression | Scenario::Contamination) {
        return Err(Error::InvalidInput("bench runs on regression or contamination data".into()));
    }
    spec.validate()?;
    let mut methods = spec.methods.clone();
    if !methods.contains(&Method::Mean) {
        methods.insert(0, Method::Mean);
    }
    let mut timed = spec.clone();
    timed.methods = methods.clone();
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
    for cell in timed.cells() {
        let tuning = timed.tuning(cell.d, timed.n)?;
        for rep in 0..timed.reps {
            let TrialData::Regression { data, w0 } = draw_trial(&timed, &cell, rep)? else {
                unreachable!("regression scenarios draw regression data")
            };
            for (slot, &m) in times.iter_mut().zip(&methods) {
                let start = Instant::now();
                // a failed fit still costs time; the timing is what is reported
                let _ = fit_regression_with(&timed, &tuning, m, &data, &w0, false);
                slot.push(start.elapsed().as_secs_f64() * 1e3);
            }
        }
    }
    let base = methods.iter().position(|&m| m == Method::Mean).expect("Mean present");
    let base_times = times[base].clone();
    Ok(methods
        .iter()
        .zip(&times)
        .map(|(m, ts)| {
            let ratios: Vec<f64> = ts.iter().zip(&base_times).map(|(t, b)| t / b.max(1e-9)).collect();
            let k = ratios.len() as f64;
            let mean = ratios.iter().sum::<f64>() / k;
            let var = if ratios.len() > 1 {
                ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            BenchRow {
                method: m.name().to_string(),
                mean_ms: ts.iter().sum::<f64>() / k,
                relative_mean: mean,
                relative_std: var.sqrt(),
            }
        })
        .collect())
}

pub fn write_bench<W: std::io::Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
