//! Gradient-descent drivers: coordinate-wise robust gradients, the
//! Catoni-risk gradient, the double-weighted variant and the baselines.
//!
//! All methods take a fixed step `γ` and stop when the descent direction is
//! small, when the iterate stops moving, or after `t_max` updates.

mod geomedian;
mod kmeans;

use std::io::Write;

pub use geomedian::{geometric_median_select, GeoMedianChoice};
pub use kmeans::{kmeans_alternate, KMeansIteration, KMeansResult};

use crate::catoni::{solve_catoni, RootSolveSettings};
use crate::error::{Error, Result};
use crate::influence::InfluenceSpec;
use crate::models::ModelProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GDConfig {
    /// Constant step size.
    pub gamma: f64,
    pub t_max: usize,
    pub alpha: f64,
    pub spec: InfluenceSpec,
    /// Stop once the direction norm is at most this.
    pub stop_grad_norm: f64,
    /// Stop once an update moves the iterate by at most this.
    pub stop_step_norm: f64,
    /// Truncation level for [`Direction::Trim`] and [`Direction::TrimmedLoss`].
    pub trunc_b: f64,
    pub root: RootSolveSettings,
    /// Bracket width for the initial risk proxy of [`dw_gd`]; `None` uses `alpha`.
    pub proxy_init_tol: Option<f64>,
    pub record_trace: bool,
}

impl GDConfig {
    pub fn new(alpha: f64, spec: InfluenceSpec) -> Self {
        Self {
            gamma: 0.1,
            t_max: 1000,
            alpha,
            spec,
            stop_grad_norm: 1e-8,
            stop_step_norm: 1e-12,
            trunc_b: f64::INFINITY,
            root: RootSolveSettings::default(),
            proxy_init_tol: None,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && !x.is_nan() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {x}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("alpha", self.alpha)?;
        positive("trunc_b", self.trunc_b)?;
        if self.t_max == 0 {
            return Err(Error::InvalidInput("t_max must be at least 1".into()));
        }
        if !(self.stop_grad_norm >= 0.0 && self.stop_step_norm >= 0.0) {
            return Err(Error::InvalidInput("stopping thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

/// How the descent direction is formed from per-sample losses and gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Coordinate-wise Catoni estimate of the mean gradient.
    Robust,
    /// Gradient of the Catoni risk estimate, `Σ ν_i ∇f_i`.
    Erm,
    Mean,
    /// Mean of gradients after zeroing coordinates with `|g| > B`.
    Trim,
    /// Gradient of `mean(min{f_i, B})`.
    TrimmedLoss,
    /// Mean gradient scaled to unit length.
    ClippedNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub w: Vec<f64>,
    pub grad_norm: f64,
    /// Catoni risk estimate (exact root or running proxy).
    pub mu_hat: Option<f64>,
    /// Shannon entropy of the sample weights.
    pub weight_entropy: Option<f64>,
    /// Mean loss at `w`.
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimTrace {
    /// Writes `t,grad_norm,mu_hat,loss_objective`; `mu_hat` is empty when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "grad_norm", "mu_hat", "loss_objective"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.grad_norm.to_string(),
                r.mu_hat.map(|m| m.to_string()).unwrap_or_default(),
                r.objective.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientNorm,
    StepNorm,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub w: Vec<f64>,
    /// Number of parameter updates performed.
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: OptimTrace,
}

/// Direction at one iterate plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub g: Vec<f64>,
    pub mu_hat: Option<f64>,
    pub weight_entropy: Option<f64>,
}

/// Reusable per-sample buffers.
#[derive(Debug, Default)]
struct Scratch {
    losses: Vec<f64>,
    grads: Vec<f64>,
    column: Vec<f64>,
    weights: Vec<f64>,
}

impl Scratch {
    fn per_sample_grads<P: ModelProblem + ?Sized>(&mut self, problem: &P, w: &[f64]) {
        let (n, d) = (problem.n_samples(), problem.dim());
        self.grads.resize(n * d, 0.0);
        for i in 0..n {
            problem.grad_at(w, i, &mut self.grads[i * d..(i + 1) * d]);
        }
    }

    fn losses<P: ModelProblem + ?Sized>(&mut self, problem: &P, w: &[f64]) {
        self.losses.resize(problem.n_samples(), 0.0);
        problem.losses_into(w, &mut self.losses);
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn entropy(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `ν_i = φ'(α(f_i − μ)) / Σ_j φ'(α(f_j − μ))`.
fn catoni_weights(losses: &[f64], mu: f64, alpha: f64, spec: &InfluenceSpec, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    out.extend(losses.iter().map(|&f| spec.phi_prime(alpha * (f - mu))));
    let total: f64 = out.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::saturation());
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(())
}

fn weighted_gradient(grads: &[f64], weights: &[f64], d: usize) -> Vec<f64> {
    let mut g = vec![0.0; d];
    for (row, &v) in grads.chunks_exact(d).zip(weights) {
        for (gj, x) in g.iter_mut().zip(row) {
            *gj += v * x;
        }
    }
    g
}

fn mean_of_rows(grads: &[f64], d: usize, n: usize, keep: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let mut g = vec![0.0; d];
    for (i, row) in grads.chunks_exact(d).enumerate() {
        for (gj, &x) in g.iter_mut().zip(row) {
            *gj += keep(i, x);
        }
    }
    g.iter_mut().for_each(|v| *v /= n as f64);
    g
}

/// `Trunc(x, B) = x · 1{|x| ≤ B}`: entries beyond the level are zeroed.
pub fn trunc(x: f64, b: f64) -> f64 {
    if x.abs() <= b {
        x
    } else {
        0.0
    }
}

fn direction_with<P: ModelProblem + ?Sized>(
    problem: &P,
    w: &[f64],
    cfg: &GDConfig,
    rule: Direction,
    scratch: &mut Scratch,
) -> Result<Step> {
    let (n, d) = (problem.n_samples(), problem.dim());
    if n == 0 {
        return Err(Error::InvalidInput("problem has no samples".into()));
    }
    if w.len() != d {
        return Err(Error::InvalidInput(format!("parameter has length {}, expected {d}", w.len())));
    }
    let plain = |g| Step {
        g,
        mu_hat: None,
        weight_entropy: None,
    };
    match rule {
        Direction::Mean | Direction::ClippedNorm => {
            scratch.per_sample_grads(problem, w);
            Ok(plain(mean_of_rows(&scratch.grads, d, n, |_, x| x)))
        }
        Direction::Trim => {
            scratch.per_sample_grads(problem, w);
            Ok(plain(mean_of_rows(&scratch.grads, d, n, |_, x| trunc(x, cfg.trunc_b))))
        }
        Direction::TrimmedLoss => {
            scratch.per_sample_grads(problem, w);
            scratch.losses(problem, w);
            let losses = &scratch.losses;
            Ok(plain(mean_of_rows(&scratch.grads, d, n, |i, x| {
                if losses[i] <= cfg.trunc_b {
                    x
                } else {
                    0.0
                }
            })))
        }
        Direction::Robust => {
            scratch.per_sample_grads(problem, w);
            let mut g = vec![0.0; d];
            for (j, gj) in g.iter_mut().enumerate() {
                scratch.column.clear();
                scratch.column.extend(scratch.grads.iter().skip(j).step_by(d));
                *gj = solve_catoni(&scratch.column, cfg.alpha, &cfg.spec, &cfg.root)
                    .map_err(|e| e.within(format!("coordinate {j}")))?;
            }
            Ok(plain(g))
        }
        Direction::Erm => {
            scratch.losses(problem, w);
            let mu = solve_catoni(&scratch.losses, cfg.alpha, &cfg.spec, &cfg.root)?;
            catoni_weights(&scratch.losses, mu, cfg.alpha, &cfg.spec, &mut scratch.weights)?;
            scratch.per_sample_grads(problem, w);
            Ok(Step {
                g: weighted_gradient(&scratch.grads, &scratch.weights, d),
                mu_hat: Some(mu),
                weight_entropy: Some(entropy(&scratch.weights)),
            })
        }
    }
}

/// Descent direction of `rule` at `w`.
pub fn direction<P: ModelProblem + ?Sized>(problem: &P, w: &[f64], cfg: &GDConfig, rule: Direction) -> Result<Step> {
    direction_with(problem, w, cfg, rule, &mut Scratch::default())
}

/// Runs fixed-step descent along `rule` from `w0`.
pub fn descend<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig, rule: Direction) -> Result<OptimResult> {
    cfg.validate()?;
    let mut scratch = Scratch::default();
    let mut w = w0.to_vec();
    let mut trace = OptimTrace::default();
    for t in 0..cfg.t_max {
        let step = direction_with(problem, &w, cfg, rule, &mut scratch)?;
        let g_norm = norm(&step.g);
        if cfg.record_trace {
            trace.records.push(TraceRecord {
                t,
                w: w.clone(),
                grad_norm: g_norm,
                mu_hat: step.mu_hat,
                weight_entropy: step.weight_entropy,
                objective: problem.objective(&w),
            });
        }
        if g_norm <= cfg.stop_grad_norm || (rule == Direction::ClippedNorm && g_norm == 0.0) {
            return Ok(OptimResult {
                w,
                iterations: t,
                stop: StopReason::GradientNorm,
                trace,
            });
        }
        let scale = if rule == Direction::ClippedNorm {
            cfg.gamma / g_norm
        } else {
            cfg.gamma
        };
        let mut moved = 0.0;
        for (wj, gj) in w.iter_mut().zip(&step.g) {
            let delta = scale * gj;
            *wj -= delta;
            moved += delta * delta;
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("iterate diverged at step {t}")));
        }
        if moved.sqrt() <= cfg.stop_step_norm {
            return Ok(OptimResult {
                w,
                iterations: t + 1,
                stop: StopReason::StepNorm,
                trace,
            });
        }
    }
    Ok(OptimResult {
        w,
        iterations: cfg.t_max,
        stop: StopReason::MaxIterations,
        trace,
    })
}

/// Robust gradient descent: each gradient coordinate is a Catoni estimate
/// over the per-sample gradients. A bounded influence function is the
/// intended input.
pub fn robust_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    descend(problem, w0, cfg, Direction::Robust)
}

/// Empirical-risk gradient descent: re-solves the Catoni risk estimate at
/// every iterate and follows its exact gradient.
pub fn erm_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    descend(problem, w0, cfg, Direction::Erm)
}

pub fn mean_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    descend(problem, w0, cfg, Direction::Mean)
}

pub fn trim_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    descend(problem, w0, cfg, Direction::Trim)
}

pub fn clipped_norm_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    descend(problem, w0, cfg, Direction::ClippedNorm)
}

pub fn trimmed_loss_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    descend(problem, w0, cfg, Direction::TrimmedLoss)
}

/// Double-weighted gradient descent.
///
/// The risk estimate is solved once, to within `proxy_init_tol` (default
/// `α`), and afterwards carried forward as
/// `μ⁽ᵗ⁺¹⁾ = μ⁽ᵗ⁾ + Σ ν_i⁽ᵗ⁾ (f_{w⁽ᵗ⁺¹⁾}(X_i) − f_{w⁽ᵗ⁾}(X_i))`; the same
/// weights form the descent direction.
pub fn dw_gd<P: ModelProblem + ?Sized>(problem: &P, w0: &[f64], cfg: &GDConfig) -> Result<OptimResult> {
    cfg.validate()?;
    let (n, d) = (problem.n_samples(), problem.dim());
    if n == 0 || w0.len() != d {
        return Err(Error::InvalidInput(format!(
            "need samples and a parameter of length {d}, got n = {n}, len = {}",
            w0.len()
        )));
    }
    let mut scratch = Scratch::default();
    let mut w = w0.to_vec();
    scratch.losses(problem, &w);
    let init = RootSolveSettings {
        abs_tol: Some(cfg.proxy_init_tol.unwrap_or(cfg.alpha)),
        ..cfg.root
    };
    let mut mu = solve_catoni(&scratch.losses, cfg.alpha, &cfg.spec, &init)?;
    let mut weights = Vec::with_capacity(n);
    catoni_weights(&scratch.losses, mu, cfg.alpha, &cfg.spec, &mut weights)?;
    let mut next_losses = vec![0.0; n];
    let mut trace = OptimTrace::default();

    for t in 0..cfg.t_max {
        scratch.per_sample_grads(problem, &w);
        let g = weighted_gradient(&scratch.grads, &weights, d);
        let g_norm = norm(&g);
        if cfg.record_trace {
            trace.records.push(TraceRecord {
                t,
                w: w.clone(),
                grad_norm: g_norm,
                mu_hat: Some(mu),
                weight_entropy: Some(entropy(&weights)),
                objective: scratch.losses.iter().sum::<f64>() / n as f64,
            });
        }
        if g_norm <= cfg.stop_grad_norm {
            return Ok(OptimResult {
                w,
                iterations: t,
                stop: StopReason::GradientNorm,
                trace,
            });
        }
        let mut moved = 0.0;
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= cfg.gamma * gj;
            moved += (cfg.gamma * gj).powi(2);
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("iterate diverged at step {t}")));
        }
        problem.losses_into(&w, &mut next_losses);
        mu += weights
            .iter()
            .zip(next_losses.iter().zip(&scratch.losses))
            .map(|(v, (new, old))| v * (new - old))
            .sum::<f64>();
        std::mem::swap(&mut scratch.losses, &mut next_losses);
        catoni_weights(&scratch.losses, mu, cfg.alpha, &cfg.spec, &mut weights)
            .map_err(|e| e.within(format!("iteration {}", t + 1)))?;
        if moved.sqrt() <= cfg.stop_step_norm {
            return Ok(OptimResult {
                w,
                iterations: t + 1,
                stop: StopReason::StepNorm,
                trace,
            });
        }
    }
    Ok(OptimResult {
        w,
        iterations: cfg.t_max,
        stop: StopReason::MaxIterations,
        trace,
    })
}
