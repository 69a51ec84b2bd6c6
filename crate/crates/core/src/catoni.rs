//! Generalized Catoni M-estimation of a mean (or of a risk, when fed losses).
//!
//! The estimate solves `Σ_i φ(α(X_i − μ)) = 0`. The left side is
//! non-increasing in `μ`; for saturating φ it can vanish on a whole interval,
//! in which case the midpoint of that interval is returned.

use crate::error::{Error, Result};
use crate::influence::{InfluenceSpec, MomentParams};

/// Stopping rules for [`solve_catoni`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolveSettings {
    /// Absolute bracket width at which the search stops. `None` selects
    /// `1e-10 · (1 + 1/α)`, a fixed accuracy in units of φ's argument that
    /// does not degrade when a few samples are enormous. Searches also stop
    /// once the bracket reaches floating-point resolution.
    pub abs_tol: Option<f64>,
    /// Iteration cap for each bracketing search.
    pub max_iter: usize,
    /// Iteration cap for each of the two searches that delimit a flat zero set.
    pub flat_probe: usize,
}

impl Default for RootSolveSettings {
    fn default() -> Self {
        Self {
            abs_tol: None,
            max_iter: 2000,
            flat_probe: 2000,
        }
    }
}

impl RootSolveSettings {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol: Some(abs_tol),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.abs_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!("abs_tol must be non-negative, got {t}")));
            }
        }
        if self.max_iter == 0 || self.flat_probe == 0 {
            return Err(Error::InvalidInput("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tuning bundle for the estimator and its guarantees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatoniConfig {
    pub alpha: f64,
    pub h: f64,
    pub delta: f64,
    pub n: usize,
    pub moments: MomentParams,
}

impl CatoniConfig {
    pub fn new(alpha: f64, h: f64, delta: f64, n: usize, moments: MomentParams) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        check_unit_open("h", h)?;
        check_unit_open("delta", delta)?;
        if n == 0 {
            return Err(Error::Domain("sample size n must be at least 1".into()));
        }
        Ok(Self {
            alpha,
            h,
            delta,
            n,
            moments,
        })
    }

    /// Same as [`new`](Self::new) with `α` from [`default_alpha`].
    pub fn with_default_alpha(h: f64, delta: f64, n: usize, moments: MomentParams) -> Result<Self> {
        let alpha = default_alpha(&moments, h, delta, n)?;
        Self::new(alpha, h, delta, n, moments)
    }

    /// `(h, δ)`-condition report; a failing inequality is not an error.
    pub fn hdelta_report(&self) -> HDeltaReport {
        check_hdelta(self)
    }

    /// `h^{-ε} C_p α^ε v`, the bias part shared by several bounds.
    fn bias_term(&self) -> f64 {
        let m = &self.moments;
        self.h.powf(-m.epsilon()) * m.c_p() * self.alpha.powf(m.epsilon()) * m.v()
    }
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Sum of `φ(α(x_i − μ))` together with the sum of magnitudes, which sets the
/// rounding scale used to decide whether the sum is zero.
#[inline]
fn score(values: &[f64], alpha: f64, spec: &InfluenceSpec, mu: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut mag = 0.0;
    for &x in values {
        let y = spec.phi(alpha * (x - mu));
        sum += y;
        mag += y.abs();
    }
    (sum, mag)
}

/// Side of the zero set a trial point falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Zero,
    Right,
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    mu: f64,
    sum: f64,
    // rounding scale below which the score counts as zero
    tol: f64,
}

impl Probe {
    fn side(&self) -> Side {
        if self.sum > self.tol {
            Side::Left
        } else if self.sum < -self.tol {
            Side::Right
        } else {
            Side::Zero
        }
    }
}

const ROUNDING_SLACK: f64 = 16.0 * f64::EPSILON;

fn probe(values: &[f64], alpha: f64, spec: &InfluenceSpec, mu: f64) -> Probe {
    let (sum, mag) = score(values, alpha, spec, mu);
    Probe {
        mu,
        sum,
        tol: ROUNDING_SLACK * mag,
    }
}

enum Search {
    Bracket(Probe, Probe),
    Stopped(Probe),
}

/// Locates the sign change of the non-increasing `f` on `[lo, hi]`, where
/// `f(lo) > 0 ≥ f(hi)`. Illinois false position with a bisection fallback,
/// so the bracket at least halves every few steps. Stops early on the first
/// probe satisfying `stop`.
fn bracket_search(
    mut lo: Probe,
    mut hi: Probe,
    abs_tol: f64,
    max_iter: usize,
    eval: impl Fn(f64) -> Probe,
    f: impl Fn(&Probe) -> f64,
    stop: impl Fn(&Probe) -> bool,
) -> Result<Search> {
    let mut f_lo = f(&lo);
    let mut f_hi = f(&hi);
    // +1 = last move replaced lo, -1 = replaced hi
    let mut last = 0i8;
    let mut slow = 0u8;
    for _ in 0..max_iter {
        let width = hi.mu - lo.mu;
        let mid = lo.mu + 0.5 * width;
        if width <= abs_tol || mid <= lo.mu || mid >= hi.mu {
            return Ok(Search::Bracket(lo, hi));
        }
        let mut candidate = mid;
        if slow < 2 && f_lo > 0.0 && f_hi < 0.0 {
            let c = lo.mu + width * (f_lo / (f_lo - f_hi));
            if c > lo.mu && c < hi.mu {
                candidate = c;
            }
        }
        let p = eval(candidate);
        if stop(&p) {
            return Ok(Search::Stopped(p));
        }
        let fp = f(&p);
        if fp > 0.0 {
            lo = p;
            f_lo = fp;
            if last == 1 {
                f_hi *= 0.5;
            }
            last = 1;
        } else {
            hi = p;
            f_hi = fp;
            if last == -1 {
                f_lo *= 0.5;
            }
            last = -1;
        }
        slow = if candidate != mid && hi.mu - lo.mu > 0.5 * width {
            slow + 1
        } else {
            0
        };
    }
    if hi.mu - lo.mu <= abs_tol {
        Ok(Search::Bracket(lo, hi))
    } else {
        Err(Error::Numeric(format!(
            "root bracket [{}, {}] still wider than {abs_tol} after {max_iter} iterations",
            lo.mu, hi.mu
        )))
    }
}

/// Solves `Σ_i φ(α(X_i − μ)) = 0` for `μ`.
///
/// The initial bracket is `[min X − 1/α, max X + 1/α]`, widened geometrically
/// if the score has no sign change there. When the zero set is an interval
/// (possible for saturating φ) both ends are located and the midpoint is
/// returned.
pub fn solve_catoni(
    values: &[f64],
    alpha: f64,
    spec: &InfluenceSpec,
    settings: &RootSolveSettings,
) -> Result<f64> {
    settings.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot estimate from an empty sample".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in values {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite sample value {x}")));
        }
        min = min.min(x);
        max = max.max(x);
    }
    if min == max {
        return Ok(min);
    }
    let abs_tol = settings.abs_tol.unwrap_or(1e-10 * (1.0 + 1.0 / alpha));
    let eval = |mu: f64| probe(values, alpha, spec, mu);

    let mut reach = 1.0 / alpha;
    let mut lo = eval(min - reach);
    let mut hi = eval(max + reach);
    let mut widenings = 0;
    while lo.side() != Side::Left || hi.side() != Side::Right {
        widenings += 1;
        if widenings > 64 || !reach.is_finite() {
            return Err(Error::saturation());
        }
        reach *= 2.0;
        if lo.side() != Side::Left {
            lo = eval(min - reach);
        }
        if hi.side() != Side::Right {
            hi = eval(max + reach);
        }
    }

    let z = match bracket_search(
        lo,
        hi,
        abs_tol,
        settings.max_iter,
        eval,
        |p| p.sum,
        |p| p.side() == Side::Zero,
    )? {
        Search::Bracket(a, b) => return Ok(0.5 * (a.mu + b.mu)),
        Search::Stopped(z) => z,
    };

    // Zero set is [left, right]: left bounds the strictly positive scores,
    // right the strictly negative ones.
    let ends = |search: Search| match search {
        Search::Bracket(a, b) => 0.5 * (a.mu + b.mu),
        Search::Stopped(p) => p.mu,
    };
    let no_stop = |_: &Probe| false;
    let left = ends(bracket_search(
        lo,
        z,
        abs_tol,
        settings.flat_probe,
        eval,
        |p| p.sum - p.tol,
        no_stop,
    )?);
    let right = ends(bracket_search(
        z,
        hi,
        abs_tol,
        settings.flat_probe,
        eval,
        |p| p.sum + p.tol,
        no_stop,
    )?);
    Ok(0.5 * (left + right))
}

/// `α = (log(2/δ) / (n C_p v))^{1/(1+ε)} · h^{ε/(1+ε)}`.
pub fn default_alpha(moments: &MomentParams, h: f64, delta: f64, n: usize) -> Result<f64> {
    check_unit_open("h", h)?;
    check_unit_open("delta", delta)?;
    check_n(n)?;
    let e = moments.epsilon();
    let ratio = (2.0 / delta).ln() / (n as f64 * moments.c_p() * moments.v());
    Ok(ratio.powf(1.0 / (1.0 + e)) * h.powf(e / (1.0 + e)))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("sample size n must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_count(name: &str, k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Domain(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

/// Scale used by the experiment-style tuning rules, with `log_term` the
/// logarithm appearing inside the `1/p` power.
fn experiment_alpha(moments: &MomentParams, h: f64, n: usize, log_term: f64) -> f64 {
    let p = moments.p();
    moments.v().powf(-1.0 / p)
        * (p - 1.0).powf(-1.0 / p)
        * h.powf((p - 1.0) / p)
        * moments.c_p().powf(-1.0 / p)
        * (log_term / n as f64).powf(1.0 / p)
}

/// `α_erm = v^{-1/p}(p-1)^{-1/p} h^{(p-1)/p} C_p^{-1/p} (log(2 T_max/δ)/n)^{1/p}`.
pub fn erm_alpha(moments: &MomentParams, h: f64, delta: f64, n: usize, t_max: usize) -> Result<f64> {
    check_unit_open("h", h)?;
    check_unit_open("delta", delta)?;
    check_n(n)?;
    check_count("t_max", t_max)?;
    Ok(experiment_alpha(moments, h, n, (2.0 * t_max as f64 / delta).ln()))
}

/// `α_grad`: [`erm_alpha`] with the logarithm `log(2 d T_max/δ)`.
pub fn grad_alpha(
    moments: &MomentParams,
    h: f64,
    delta: f64,
    n: usize,
    d: usize,
    t_max: usize,
) -> Result<f64> {
    check_unit_open("h", h)?;
    check_unit_open("delta", delta)?;
    check_n(n)?;
    check_count("d", d)?;
    check_count("t_max", t_max)?;
    Ok(experiment_alpha(moments, h, n, (2.0 * d as f64 * t_max as f64 / delta).ln()))
}

/// Truncation level `B = v^{1/p} (n / log(2 d T_max/δ))^{1/p}`.
pub fn trunc_level(moments: &MomentParams, delta: f64, n: usize, d: usize, t_max: usize) -> Result<f64> {
    check_unit_open("delta", delta)?;
    check_n(n)?;
    check_count("d", d)?;
    check_count("t_max", t_max)?;
    let p = moments.p();
    let l = (2.0 * d as f64 * t_max as f64 / delta).ln();
    Ok(moments.v().powf(1.0 / p) * (n as f64 / l).powf(1.0 / p))
}

/// One inequality of a condition report: holds iff `lhs` is below `rhs`
/// (strictly or not, per the inequality); `slack = rhs − lhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Inequality {
    fn strict(lhs: f64, rhs: f64) -> Self {
        Self {
            holds: lhs < rhs,
            lhs,
            rhs,
            slack: rhs - lhs,
        }
    }

    fn weak(lhs: f64, rhs: f64) -> Self {
        Self {
            holds: lhs <= rhs,
            lhs,
            rhs,
            slack: rhs - lhs,
        }
    }
}

/// The three `(h, δ)` inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HDeltaReport {
    pub ineq1: Inequality,
    pub ineq2: Inequality,
    pub ineq3: Inequality,
}

impl HDeltaReport {
    pub fn all_hold(&self) -> bool {
        self.ineq1.holds && self.ineq2.holds && self.ineq3.holds
    }

    pub fn margins(&self) -> [f64; 3] {
        [self.ineq1.slack, self.ineq2.slack, self.ineq3.slack]
    }
}

pub fn check_hdelta(cfg: &CatoniConfig) -> HDeltaReport {
    let m = &cfg.moments;
    let (e, c, v) = (m.epsilon(), m.c_p(), m.v());
    let (a, h, n) = (cfg.alpha, cfg.h, cfg.n as f64);
    let log_term = (2.0 / cfg.delta).ln();
    let curvature = c * a.powf(e) * (1.0 - h).powf(-e);

    let ineq1 = Inequality::strict(curvature, 0.5);
    let lhs2 = h.powf(-e) * a.powf(1.0 + e) * c * v + log_term / n;
    let rhs2 = (e / (1.0 + e)) * (1.0 - h) * (1.0 / ((1.0 + e) * c)).powf(1.0 / e);
    let ineq2 = Inequality::weak(lhs2, rhs2);
    let lhs3 = cfg.bias_term() + curvature + log_term / (a * n);
    let ineq3 = Inequality::strict(lhs3, 1.0);
    HDeltaReport { ineq1, ineq2, ineq3 }
}

/// Left side of the η-condition,
/// `C_p α^ε (1−h)^{−ε} 2^p (h^{−ε} C_p α^ε v + 2η)^{p−1}`.
pub fn eta_condition_lhs(cfg: &CatoniConfig, eta: f64) -> f64 {
    let m = &cfg.moments;
    let e = m.epsilon();
    m.c_p()
        * cfg.alpha.powf(e)
        * (1.0 - cfg.h).powf(-e)
        * 2f64.powf(m.p())
        * (cfg.bias_term() + 2.0 * eta).powf(m.p() - 1.0)
}

/// True iff the η-condition holds (left side strictly below 1).
pub fn check_eta_condition(cfg: &CatoniConfig, eta: f64) -> Result<bool> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("eta must be non-negative, got {eta}")));
    }
    Ok(eta_condition_lhs(cfg, eta) < 1.0)
}

/// Largest `α` for which the η-condition can hold, i.e. the root of
/// `lhs(α) = 1`, found by bisection in log-space (the left side increases
/// with `α`). Other fields of `cfg` are kept.
pub fn eta_alpha_boundary(cfg: &CatoniConfig, eta: f64) -> Result<f64> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("eta must be non-negative, got {eta}")));
    }
    let at = |alpha: f64| {
        let mut c = *cfg;
        c.alpha = alpha;
        eta_condition_lhs(&c, eta) - 1.0
    };
    let (mut lo, mut hi) = (1e-300f64, 1e300f64);
    if at(lo) >= 0.0 || at(hi) <= 0.0 {
        return Err(Error::Numeric("eta-condition boundary not bracketed".into()));
    }
    for _ in 0..400 {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `A_α(δ) = 2 (h^{-ε} C_p α^ε v + log(2/δ)/(α n))`.
pub fn a_alpha(cfg: &CatoniConfig) -> f64 {
    2.0 * (cfg.bias_term() + (2.0 / cfg.delta).ln() / (cfg.alpha * cfg.n as f64))
}

/// Deviation bound `|μ̂ − μ| ≤ A_α(δ)` holding with probability `1 − δ` under
/// the `(h, δ)`-condition.
pub fn deviation_bound(cfg: &CatoniConfig) -> f64 {
    a_alpha(cfg)
}

/// Deviation bound at the [`default_alpha`] choice:
/// `4 (C_p v)^{1/(1+ε)} h^{−ε/(1+ε)} (log(2/δ)/n)^{ε/(1+ε)}`.
pub fn deviation_bound_opt_alpha(moments: &MomentParams, h: f64, delta: f64, n: usize) -> Result<f64> {
    check_unit_open("h", h)?;
    check_unit_open("delta", delta)?;
    check_n(n)?;
    let e = moments.epsilon();
    Ok(4.0
        * (moments.c_p() * moments.v()).powf(1.0 / (1.0 + e))
        * h.powf(-e / (1.0 + e))
        * ((2.0 / delta).ln() / n as f64).powf(e / (1.0 + e)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySelection {
    pub index: usize,
    pub estimates: Vec<f64>,
    /// Excess-risk bound `4(h^{−ε}C_p α^ε v + log(2|F|/δ)/(α n))`.
    pub bound: f64,
}

/// Picks the candidate with the smallest estimated risk (lowest index on ties).
/// `cfg.alpha` is used for every solve; the sample size is taken from the
/// candidates themselves.
pub fn select_finite_family<S: AsRef<[f64]>>(
    losses: &[S],
    cfg: &CatoniConfig,
    spec: &InfluenceSpec,
    settings: &RootSolveSettings,
) -> Result<FamilySelection> {
    let Some(first) = losses.first() else {
        return Err(Error::InvalidInput("no candidates to select from".into()));
    };
    let n = first.as_ref().len();
    if let Some(bad) = losses.iter().position(|l| l.as_ref().len() != n) {
        return Err(Error::InvalidInput(format!(
            "candidate {bad} has {} samples, expected {n}",
            losses[bad].as_ref().len()
        )));
    }
    let estimates = losses
        .iter()
        .enumerate()
        .map(|(k, l)| {
            solve_catoni(l.as_ref(), cfg.alpha, spec, settings).map_err(|e| e.within(format!("candidate {k}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let index = estimates
        .iter()
        .enumerate()
        .fold(0, |best, (k, &mu)| if mu < estimates[best] { k } else { best });
    let bound = 4.0
        * (cfg.bias_term() + (2.0 * losses.len() as f64 / cfg.delta).ln() / (cfg.alpha * n as f64));
    Ok(FamilySelection {
        index,
        estimates,
        bound,
    })
}
