use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catoni::{check_hdelta, default_alpha, deviation_bound, solve_catoni, CatoniConfig, HDeltaReport};
use crate::datagen::{RngStream, SymPareto};
use crate::error::{Error, Result};
use crate::influence::{InfluenceSpec, MomentParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoverageInfluence {
    Wide,
    Narrow,
    /// φ(x) = x, i.e. the sample mean. Comparison baseline only.
    LinearTestOnly,
}

/// Monte-Carlo check of the deviation bound for the mean of symmetrized
/// Pareto samples (true mean 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSpec {
    pub p: f64,
    pub tail_a: f64,
    pub n: usize,
    pub delta: f64,
    pub h: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub influence: CoverageInfluence,
    /// Overrides the default α when set.
    pub alpha: Option<f64>,
}

impl CoverageSpec {
    pub fn new(p: f64, tail_a: f64, n: usize, delta: f64, h: f64, reps: usize) -> Self {
        Self {
            p,
            tail_a,
            n,
            delta,
            h,
            reps,
            master_seed: 42,
            influence: CoverageInfluence::Wide,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub trials: usize,
    pub violations: usize,
    pub fraction: f64,
    pub bound: f64,
    pub alpha: f64,
    /// `E|X|^p = a/(a − p)` for the symmetrized Pareto law.
    pub v: f64,
    pub hdelta: HDeltaReport,
    pub estimates: Vec<f64>,
}

/// Draws `reps` samples of size `n`, estimates the mean of each, and counts
/// how often the error exceeds the deviation bound at the configured α.
pub fn run_mean_estimation_coverage(spec: &CoverageSpec) -> Result<CoverageReport> {
    if spec.tail_a.is_nan() || spec.p.is_nan() || spec.tail_a <= spec.p {
        return Err(Error::Domain(format!(
            "E|X|^p is infinite for tail a = {} ≤ p = {}",
            spec.tail_a, spec.p
        )));
    }
    if spec.reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    let law = SymPareto::new(spec.tail_a)?;
    let v = law.abs_moment(spec.p).expect("moment exists for a > p");
    let moments = MomentParams::new(spec.p, v)?;
    let alpha = match spec.alpha {
        Some(a) => a,
        None => default_alpha(&moments, spec.h, spec.delta, spec.n)?,
    };
    let cfg = CatoniConfig::new(alpha, spec.h, spec.delta, spec.n, moments)?;
    let bound = deviation_bound(&cfg);
    let influence = match spec.influence {
        CoverageInfluence::Wide => InfluenceSpec::wide(spec.p)?,
        CoverageInfluence::Narrow => InfluenceSpec::narrow(spec.p)?,
        CoverageInfluence::LinearTestOnly => InfluenceSpec::linear_test_only(spec.p)?,
    };
    let settings = Default::default();
    let estimates = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(spec.master_seed, rep as u64).rng();
            let xs: Vec<f64> = (0..spec.n).map(|_| law.sample(&mut rng)).collect();
            match spec.influence {
                CoverageInfluence::LinearTestOnly => Ok(xs.iter().sum::<f64>() / xs.len() as f64),
                _ => solve_catoni(&xs, alpha, &influence, &settings),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let violations = estimates.iter().filter(|m| m.abs() > bound).count();
    Ok(CoverageReport {
        trials: spec.reps,
        violations,
        fraction: violations as f64 / spec.reps as f64,
        bound,
        alpha,
        v,
        hdelta: check_hdelta(&cfg),
        estimates,
    })
}
