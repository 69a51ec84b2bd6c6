//! Synthetic experiment orchestration: scenario grids, per-trial fits,
//! result tables and their aggregation.
//!
//! Every replicate draws its data and initial point from its own
//! [`RngStream`], indexed by `(cell ordinal << 32) | rep`, and all methods in
//! a replicate share them. Replicates run on the rayon pool; rows come back in
//! grid order, so output does not depend on the number of threads.

mod bench;
mod coverage;
mod io;
mod matching;
mod methods;

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bench::{run_bench, write_bench, BenchRow};
pub use coverage::{run_mean_estimation_coverage, CoverageInfluence, CoverageReport, CoverageSpec};
pub use io::{
    parse_values, read_results, read_values_file, write_results, write_summary, CellSummary, TrialResult,
    RESULTS_HEADER,
};
pub use matching::{label_accuracy, match_columns, ColumnMatch, MAX_MATCH_K};
pub use methods::{parse_methods, Method};

use crate::catoni::{erm_alpha, grad_alpha, trunc_level};
use crate::datagen::{
    cluster_dataset, contaminated_cluster_dataset, contaminated_regression, default_w_star, regression_dataset,
    ClusterData, RegressionData, RngStream, TrialRng,
};
use crate::error::{Error, Result};
use crate::influence::{InfluenceSpec, MomentParams};
use crate::models::{KMeans, Regression};
use crate::optim::{self, geometric_median_select, kmeans_alternate, Direction, GDConfig, OptimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Regression,
    Contamination,
    KMeans,
    GeoMedianCompare,
    MeanEstimation,
}

/// A grid of experiment cells plus the shared tuning constants.
///
/// Cells are the Cartesian product `dims × tails × etas × ks`, where an empty
/// `etas` or `ks` list contributes a single "not applicable" entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub p: f64,
    pub h: f64,
    pub delta: f64,
    /// Moment bound plugged into the tuning formulas.
    pub v: f64,
    pub dims: Vec<usize>,
    pub n: usize,
    /// Pareto shape parameters.
    pub tails: Vec<f64>,
    pub etas: Vec<f64>,
    pub ks: Vec<usize>,
    /// Cluster proportions; uniform when `None`.
    pub pi: Option<Vec<f64>>,
    /// Spacing between consecutive true centroids along the first axis.
    pub separation: f64,
    /// Number of subsets `M` for the geometric-median estimator.
    pub subsets: usize,
    pub reps: usize,
    pub t_max: usize,
    pub gamma: f64,
    pub master_seed: u64,
}

impl ExperimentSpec {
    /// Paper-style defaults for `scenario`.
    pub fn new(scenario: Scenario) -> Self {
        let mut spec = Self {
            scenario,
            methods: Method::SIX.to_vec(),
            p: 1.5,
            h: 0.5,
            delta: 0.05,
            v: 1.0,
            dims: vec![2, 4, 8, 16, 32],
            n: 1000,
            tails: vec![0.5, 1.0, 1.5],
            etas: Vec::new(),
            ks: Vec::new(),
            pi: None,
            separation: 10.0,
            subsets: 10,
            reps: 50,
            t_max: 1000,
            gamma: 0.1,
            master_seed: 42,
        };
        match scenario {
            Scenario::Regression | Scenario::MeanEstimation => {}
            Scenario::Contamination => {
                spec.dims = vec![8];
                spec.etas = vec![0.05, 0.1, 0.2, 0.3, 0.4];
            }
            Scenario::KMeans => {
                spec.dims = vec![2];
                spec.tails = vec![1.0];
                spec.ks = vec![2, 3, 4, 5, 6];
            }
            Scenario::GeoMedianCompare => {
                spec.methods = vec![Method::ErmNarrow, Method::GeoMedian];
                spec.dims = vec![5, 10, 20];
                spec.tails = vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.6, 2.0];
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("method set is empty".into());
        }
        if self.n == 0 || self.t_max == 0 {
            return bad("n and t_max must be at least 1".into());
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dimensions must be a non-empty list of positive integers".into());
        }
        if self.tails.is_empty() || self.tails.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("tail parameters must be a non-empty list of positive numbers".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.etas.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
            return bad("contamination rates must lie in [0, 1]".into());
        }
        MomentParams::new(self.p, self.v)?;
        for (name, x) in [("h", self.h), ("delta", self.delta)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1), got {x}")));
            }
        }
        let needs = |ok: bool, msg: &str| if ok { Ok(()) } else { bad(msg.into()) };
        match self.scenario {
            Scenario::Regression | Scenario::GeoMedianCompare => {
                needs(self.etas.is_empty(), "contamination rates apply only to contamination and kmeans")?;
                needs(self.ks.is_empty(), "K applies only to kmeans")?;
            }
            Scenario::Contamination => {
                needs(!self.etas.is_empty(), "contamination needs at least one rate")?;
                needs(self.ks.is_empty(), "K applies only to kmeans")?;
            }
            Scenario::KMeans => {
                needs(!self.ks.is_empty(), "kmeans needs at least one K")?;
                if let Some(&k) = self.ks.iter().find(|&&k| k == 0 || k > MAX_MATCH_K) {
                    return bad(format!("K must lie in 1..={MAX_MATCH_K}, got {k}"));
                }
                if let Some(m) = self.methods.iter().find(|m| matches!(m, Method::Dw | Method::GeoMedian)) {
                    return bad(format!("method {m} is not available for kmeans"));
                }
                if let Some(pi) = &self.pi {
                    needs(self.ks.iter().all(|&k| k == pi.len()), "pi must have one entry per cluster")?;
                }
                needs(self.separation > 0.0 && self.separation.is_finite(), "separation must be positive")?;
            }
            Scenario::MeanEstimation => {
                return bad("mean estimation runs through the coverage harness".into());
            }
        }
        if self.methods.contains(&Method::GeoMedian) && (self.subsets == 0 || self.subsets > self.n) {
            return bad(format!("M must lie in 1..=n, got {}", self.subsets));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let etas: Vec<Option<f64>> = if self.etas.is_empty() {
            vec![None]
        } else {
            self.etas.iter().copied().map(Some).collect()
        };
        let ks: Vec<Option<usize>> = if self.ks.is_empty() {
            vec![None]
        } else {
            self.ks.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &d in &self.dims {
            for &a in &self.tails {
                for &eta in &etas {
                    for &k in &ks {
                        out.push(Cell {
                            ordinal: out.len() as u64,
                            d,
                            a,
                            eta,
                            k,
                        });
                    }
                }
            }
        }
        out
    }

    fn moments(&self) -> Result<MomentParams> {
        MomentParams::new(self.p, self.v)
    }

    /// Step-size and truncation constants for a problem of parameter
    /// dimension `d` fitted on `n` samples.
    pub fn tuning(&self, d: usize, n: usize) -> Result<Tuning> {
        let m = self.moments()?;
        Ok(Tuning {
            alpha_erm: erm_alpha(&m, self.h, self.delta, n, self.t_max)?,
            alpha_grad: grad_alpha(&m, self.h, self.delta, n, d, self.t_max)?,
            trunc_b: trunc_level(&m, self.delta, n, d, self.t_max)?,
        })
    }

    /// The RNG stream owned by replicate `rep` of `cell`.
    pub fn stream(&self, cell: &Cell, rep: usize) -> RngStream {
        RngStream::new(self.master_seed, (cell.ordinal << 32) | rep as u64)
    }

    /// True centroids for `k` clusters in dimension `d`: `W*_j = j·separation·e_1`.
    pub fn true_centroids(&self, d: usize, k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|j| {
                let mut c = vec![0.0; d];
                c[0] = j as f64 * self.separation;
                c
            })
            .collect()
    }

    fn proportions(&self, k: usize) -> Vec<f64> {
        self.pi.clone().unwrap_or_else(|| vec![1.0 / k as f64; k])
    }
}

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub ordinal: u64,
    pub d: usize,
    pub a: f64,
    pub eta: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuning {
    pub alpha_erm: f64,
    pub alpha_grad: f64,
    pub trunc_b: f64,
}

/// Rows of a finished experiment together with the spec that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub spec: ExperimentSpec,
    pub rows: Vec<TrialResult>,
}

impl ResultTable {
    /// Mean, standard error and median of the error per (cell, method),
    /// in grid order. Failed trials are counted but left out of the
    /// statistics.
    pub fn summarize(&self) -> Vec<CellSummary> {
        let mut out: Vec<(CellSummary, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            let same = |s: &CellSummary| {
                s.method == r.method
                    && s.d == r.d
                    && s.a.to_bits() == r.a.to_bits()
                    && s.eta.map(f64::to_bits) == r.eta.map(f64::to_bits)
                    && s.k == r.k
            };
            let idx = match out.iter().position(|(s, _)| same(s)) {
                Some(i) => i,
                None => {
                    out.push((
                        CellSummary {
                            scenario: r.scenario,
                            method: r.method.clone(),
                            p: r.p,
                            d: r.d,
                            a: r.a,
                            eta: r.eta,
                            k: r.k,
                            n: r.n,
                            reps: 0,
                            failed: 0,
                            mean_error: f64::NAN,
                            stderr: f64::NAN,
                            median_error: f64::NAN,
                        },
                        Vec::new(),
                    ));
                    out.len() - 1
                }
            };
            let (s, errs) = &mut out[idx];
            s.reps += 1;
            if r.failed() {
                s.failed += 1;
            } else {
                errs.push(r.error);
            }
        }
        out.into_iter()
            .map(|(mut s, mut errs)| {
                let m = errs.len();
                if m > 0 {
                    let mean = errs.iter().sum::<f64>() / m as f64;
                    s.mean_error = mean;
                    s.stderr = if m > 1 {
                        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
                        (var / m as f64).sqrt()
                    } else {
                        0.0
                    };
                    errs.sort_by(f64::total_cmp);
                    s.median_error = median_sorted(&errs);
                }
                s
            })
            .collect()
    }
}

pub(crate) fn median_sorted(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

fn standard_normal_vec(rng: &mut TrialRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Descent settings for `method`; `None` for methods without a single
/// descent rule.
fn method_config(
    spec: &ExperimentSpec,
    tuning: &Tuning,
    method: Method,
    early_stop: bool,
) -> Result<Option<(GDConfig, Direction)>> {
    let p = spec.p;
    let (alpha, influence, rule) = match method {
        Method::ErmWide => (tuning.alpha_erm, InfluenceSpec::wide(p)?, Direction::Erm),
        Method::ErmNarrow => (tuning.alpha_erm, InfluenceSpec::narrow(p)?, Direction::Erm),
        Method::GradWide => (tuning.alpha_grad, InfluenceSpec::wide(p)?, Direction::Robust),
        Method::GradNarrow => (tuning.alpha_grad, InfluenceSpec::narrow(p)?, Direction::Robust),
        Method::Mean => (tuning.alpha_erm, InfluenceSpec::wide(p)?, Direction::Mean),
        Method::Trim => (tuning.alpha_erm, InfluenceSpec::wide(p)?, Direction::Trim),
        Method::ClippedNorm => (tuning.alpha_erm, InfluenceSpec::wide(p)?, Direction::ClippedNorm),
        Method::TrimmedLoss => (tuning.alpha_erm, InfluenceSpec::wide(p)?, Direction::TrimmedLoss),
        Method::GeoMedian | Method::Dw => return Ok(None),
    };
    let mut cfg = GDConfig::new(alpha, influence);
    cfg.gamma = spec.gamma;
    cfg.t_max = spec.t_max;
    cfg.trunc_b = tuning.trunc_b;
    cfg.record_trace = false;
    if !early_stop {
        cfg.stop_grad_norm = 0.0;
        cfg.stop_step_norm = 0.0;
    }
    Ok(Some((cfg, rule)))
}

fn base_config(spec: &ExperimentSpec, tuning: &Tuning, early_stop: bool) -> Result<GDConfig> {
    Ok(method_config(spec, tuning, Method::Mean, early_stop)?
        .expect("Mean has a descent rule")
        .0)
}

/// Fits `method` on a regression dataset from `w0`; returns the estimate and
/// the number of parameter updates.
pub fn fit_regression(
    spec: &ExperimentSpec,
    tuning: &Tuning,
    method: Method,
    data: &RegressionData,
    w0: &[f64],
) -> Result<(Vec<f64>, usize)> {
    fit_regression_with(spec, tuning, method, data, w0, true)
}

pub(crate) fn fit_regression_with(
    spec: &ExperimentSpec,
    tuning: &Tuning,
    method: Method,
    data: &RegressionData,
    w0: &[f64],
    early_stop: bool,
) -> Result<(Vec<f64>, usize)> {
    let problem = Regression::squared(data);
    let done = |r: OptimResult| (r.w, r.iterations);
    match method {
        Method::Dw => {
            let mut cfg = base_config(spec, tuning, early_stop)?;
            cfg.spec = InfluenceSpec::wide(spec.p)?;
            optim::dw_gd(&problem, w0, &cfg).map(done)
        }
        Method::GeoMedian => geomedian_fit_with(spec, tuning, data, w0, early_stop),
        _ => {
            let (cfg, rule) = method_config(spec, tuning, method, early_stop)?.expect("single-rule method");
            optim::descend(&problem, w0, &cfg, rule).map(done)
        }
    }
}

/// Mean-gradient fits on `M` contiguous, near-equal row blocks, followed by
/// geometric-median selection. With `M = 1` the single fit is returned.
pub fn geomedian_fit(
    spec: &ExperimentSpec,
    tuning: &Tuning,
    data: &RegressionData,
    w0: &[f64],
) -> Result<(Vec<f64>, usize)> {
    geomedian_fit_with(spec, tuning, data, w0, true)
}

fn geomedian_fit_with(
    spec: &ExperimentSpec,
    tuning: &Tuning,
    data: &RegressionData,
    w0: &[f64],
    early_stop: bool,
) -> Result<(Vec<f64>, usize)> {
    let m = spec.subsets;
    if m == 0 || m > data.n {
        return Err(Error::InvalidInput(format!("M must lie in 1..={}, got {m}", data.n)));
    }
    let cfg = base_config(spec, tuning, early_stop)?;
    let mut fits = Vec::with_capacity(m);
    let mut iters = 0;
    for j in 0..m {
        let rows: Vec<usize> = (j * data.n / m..(j + 1) * data.n / m).collect();
        let block = data.subset(&rows);
        let r = optim::mean_gd(&Regression::squared(&block), w0, &cfg)?;
        iters += r.iterations;
        fits.push(r.w);
    }
    if m == 1 {
        return Ok((fits.pop().expect("one fit"), iters));
    }
    let choice = geometric_median_select(&fits)?;
    Ok((choice.vector, iters))
}

/// k-means++ seeding: the first centroid is a uniform draw, each further one
/// is drawn with probability proportional to the squared distance to the
/// nearest centroid chosen so far.
pub fn kmeans_plus_plus(data: &ClusterData, k: usize, rng: &mut TrialRng) -> Result<Vec<f64>> {
    if k == 0 || data.n == 0 {
        return Err(Error::InvalidInput("k-means++ needs K ≥ 1 and at least one point".into()));
    }
    let d = data.d;
    let mut w = Vec::with_capacity(k * d);
    let first = rng.random_range(0..data.n);
    w.extend_from_slice(data.point(first));
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut nearest: Vec<f64> = (0..data.n).map(|i| sq(data.point(i), data.point(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = data.n - 1;
            for (i, &dist) in nearest.iter().enumerate() {
                acc += dist;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..data.n)
        };
        let c = data.point(pick).to_vec();
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sq(data.point(i), &c));
        }
        w.extend_from_slice(&c);
    }
    Ok(w)
}

/// Data and initial point shared by every method in one replicate.
enum TrialData {
    Regression { data: RegressionData, w0: Vec<f64> },
    Clusters { data: ClusterData, w0: Vec<f64>, k: usize },
}

fn draw_trial(spec: &ExperimentSpec, cell: &Cell, rep: usize) -> Result<TrialData> {
    let mut rng = spec.stream(cell, rep).rng();
    let d = cell.d;
    match spec.scenario {
        Scenario::Regression | Scenario::GeoMedianCompare | Scenario::Contamination => {
            let w_star = default_w_star(d);
            let data = match cell.eta {
                Some(eta) => contaminated_regression(d, spec.n, &w_star, cell.a, eta, &mut rng)?,
                None => regression_dataset(d, spec.n, &w_star, cell.a, &mut rng)?,
            };
            let w0 = standard_normal_vec(&mut rng, d);
            Ok(TrialData::Regression { data, w0 })
        }
        Scenario::KMeans => {
            let k = cell.k.expect("kmeans cell has K");
            let centroids = spec.true_centroids(d, k);
            let pi = spec.proportions(k);
            let data = match cell.eta {
                Some(eta) => contaminated_cluster_dataset(d, spec.n, &pi, &centroids, cell.a, eta, &mut rng)?,
                None => cluster_dataset(d, spec.n, &pi, &centroids, cell.a, &mut rng)?,
            };
            let w0 = kmeans_plus_plus(&data, k, &mut rng)?;
            Ok(TrialData::Clusters { data, w0, k })
        }
        Scenario::MeanEstimation => Err(Error::InvalidInput("no trial data for mean estimation".into())),
    }
}

/// Outcome of one method on one K-means replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub w: Vec<f64>,
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub matching: ColumnMatch,
}

/// Runs `method` on `data` from `w0` and matches the fitted centroids to
/// the true ones.
pub fn fit_kmeans(
    spec: &ExperimentSpec,
    method: Method,
    data: &ClusterData,
    k: usize,
    w0: &[f64],
) -> Result<KMeansFit> {
    // each centroid sees about n/K points
    let tuning = spec.tuning(data.d, (data.n / k).max(1))?;
    let (cfg, rule) = method_config(spec, &tuning, method, true)?
        .ok_or_else(|| Error::InvalidInput(format!("method {method} is not available for kmeans")))?;
    let problem = KMeans::new(data, k)?;
    let res = kmeans_alternate(&problem, w0, &cfg, rule)?;
    let truth: Vec<f64> = spec.true_centroids(data.d, k).concat();
    let matching = match_columns(&res.w, &truth, data.d, k)?;
    Ok(KMeansFit {
        w: res.w,
        labels: res.labels,
        iterations: res.iterations,
        matching,
    })
}

/// Draws the data for replicate `rep` of `cell` and fits every method.
pub fn run_trial(spec: &ExperimentSpec, cell: &Cell, rep: usize) -> Result<Vec<TrialResult>> {
    let trial = draw_trial(spec, cell, rep)?;
    let tuning = spec.tuning(cell.d, spec.n)?;
    let mut rows = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let start = Instant::now();
        let outcome = match &trial {
            TrialData::Regression { data, w0 } => {
                let w_star = default_w_star(cell.d);
                fit_regression(spec, &tuning, method, data, w0).map(|(w, it)| (euclid(&w, &w_star), it))
            }
            TrialData::Clusters { data, w0, k } => {
                fit_kmeans(spec, method, data, *k, w0).map(|f| (f.matching.distance, f.iterations))
            }
        };
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        let (error, iters) = outcome.unwrap_or((f64::NAN, 0));
        rows.push(TrialResult {
            scenario: spec.scenario,
            method: method.name().to_string(),
            p: spec.p,
            d: cell.d,
            a: cell.a,
            eta: cell.eta,
            k: cell.k,
            n: spec.n,
            rep,
            seed: spec.master_seed,
            error,
            iters,
            elapsed_ms,
        });
    }
    Ok(rows)
}

/// Runs every (cell, replicate) of `spec` in parallel and returns the rows
/// in grid order: cell, then replicate, then method.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let jobs: Vec<(Cell, usize)> = spec
        .cells()
        .into_iter()
        .flat_map(|c| (0..spec.reps).map(move |r| (c, r)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|(cell, rep)| run_trial(spec, cell, *rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable {
        spec: spec.clone(),
        rows: chunks.into_iter().flatten().collect(),
    })
}

fn run_as(spec: &ExperimentSpec, scenario: Scenario) -> Result<ResultTable> {
    if spec.scenario != scenario {
        return Err(Error::InvalidInput(format!(
            "expected a {scenario:?} spec, got {:?}",
            spec.scenario
        )));
    }
    run_experiment(spec)
}

pub fn run_regression(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_as(spec, Scenario::Regression)
}

pub fn run_contamination(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_as(spec, Scenario::Contamination)
}

pub fn run_kmeans(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_as(spec, Scenario::KMeans)
}

pub fn run_geomedian(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_as(spec, Scenario::GeoMedianCompare)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(scenario);
        s.dims = vec![2];
        s.tails = vec![2.0];
        s.n = 120;
        s.reps = 3;
        s.t_max = 200;
        s
    }

    #[test]
    fn validation_rules() {
        assert!(small(Scenario::Regression).validate().is_ok());
        let mut s = small(Scenario::Regression);
        s.etas = vec![0.1];
        assert!(s.validate().is_err());
        let mut s = small(Scenario::Contamination);
        s.etas.clear();
        assert!(s.validate().is_err());
        let mut s = small(Scenario::KMeans);
        s.methods = vec![Method::Dw];
        assert!(s.validate().is_err());
        let mut s = small(Scenario::KMeans);
        s.ks = vec![9];
        assert!(s.validate().is_err());
        let mut s = small(Scenario::Regression);
        s.reps = 0;
        assert!(s.validate().is_err());
        let mut s = small(Scenario::Regression);
        s.p = 2.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn grid_order_and_streams() {
        let mut s = small(Scenario::Contamination);
        s.dims = vec![2, 3];
        s.etas = vec![0.0, 0.5];
        let cells = s.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].d, cells[1].eta), (2, Some(0.5)));
        assert_eq!(cells[3].ordinal, 3);
        assert_ne!(s.stream(&cells[0], 1), s.stream(&cells[1], 0));
    }

    #[test]
    fn rows_per_method_and_rep() {
        let mut s = small(Scenario::Regression);
        s.methods = vec![Method::ErmNarrow, Method::Mean, Method::Dw, Method::GeoMedian];
        s.subsets = 3;
        let t = run_regression(&s).unwrap();
        assert_eq!(t.rows.len(), 12);
        assert!(t.rows.iter().all(|r| r.error.is_finite() && r.error >= 0.0));
        let sum = t.summarize();
        assert_eq!(sum.len(), 4);
        let mean_rows: Vec<f64> = t.rows.iter().filter(|r| r.method == "Mean").map(|r| r.error).collect();
        let want = mean_rows.iter().sum::<f64>() / 3.0;
        let got = sum.iter().find(|c| c.method == "Mean").unwrap().mean_error;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        assert!(run_kmeans(&small(Scenario::Regression)).is_err());
    }

    #[test]
    fn single_subset_geomedian_equals_mean_fit() {
        let mut s = small(Scenario::GeoMedianCompare);
        s.subsets = 1;
        let cell = s.cells()[0];
        let TrialData::Regression { data, w0 } = draw_trial(&s, &cell, 0).unwrap() else {
            unreachable!()
        };
        let tuning = s.tuning(2, s.n).unwrap();
        let geo = geomedian_fit(&s, &tuning, &data, &w0).unwrap();
        let mean = fit_regression(&s, &tuning, Method::Mean, &data, &w0).unwrap();
        assert_eq!(geo, mean);
    }

    #[test]
    fn kmeans_plus_plus_picks_data_points() {
        let s = small(Scenario::KMeans);
        let cell = s.cells()[1];
        let TrialData::Clusters { data, w0, k } = draw_trial(&s, &cell, 0).unwrap() else {
            unreachable!()
        };
        assert_eq!(w0.len(), k * data.d);
        for c in w0.chunks(data.d) {
            assert!((0..data.n).any(|i| data.point(i) == c));
        }
    }

    #[test]
    fn summary_skips_failed_trials() {
        let mut t = run_regression(&{
            let mut s = small(Scenario::Regression);
            s.methods = vec![Method::Mean];
            s
        })
        .unwrap();
        t.rows[1].error = f64::NAN;
        let s = &t.summarize()[0];
        assert_eq!((s.reps, s.failed), (3, 1));
        assert!((s.mean_error - 0.5 * (t.rows[0].error + t.rows[2].error)).abs() < 1e-15);
    }
}
