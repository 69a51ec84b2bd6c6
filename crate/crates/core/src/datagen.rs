//! Reproducible heavy-tailed synthetic data.
//!
//! Every trial draws from its own ChaCha8 stream selected by
//! `(master_seed, trial_index)`, so trials can run in any order or in
//! parallel and still produce the same datasets.

use std::io::Write;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type TrialRng = ChaCha8Rng;

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self {
            master_seed,
            trial_index,
        }
    }

    pub fn rng(&self) -> TrialRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trial_index);
        rng
    }
}

/// Smallest and largest uniform fed to the inverse CDF.
const U_MIN: f64 = f64::EPSILON;
const U_MAX: f64 = 1.0 - f64::EPSILON;

/// Random sign times a Pareto(a) draw with `F(x) = 1 - x^{-a}` on `[1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymPareto {
    a: f64,
}

impl SymPareto {
    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && !a.is_nan() {
            Ok(Self { a })
        } else {
            Err(Error::Domain(format!("Pareto shape must be positive, got {a}")))
        }
    }

    pub fn shape(&self) -> f64 {
        self.a
    }

    /// Deterministic map from the two uniforms consumed per draw: `sign_u`
    /// picks the sign (`< 0.5` is negative), `mag_u` goes through the inverse
    /// CDF after clamping away from 0 and 1.
    pub fn from_uniforms(&self, sign_u: f64, mag_u: f64) -> f64 {
        let u = mag_u.clamp(U_MIN, U_MAX);
        let magnitude = u.powf(-1.0 / self.a);
        if sign_u < 0.5 {
            -magnitude
        } else {
            magnitude
        }
    }

    /// `E|ξ|^p = a/(a − p)`, finite only for `a > p`.
    pub fn abs_moment(&self, p: f64) -> Option<f64> {
        (self.a > p).then(|| self.a / (self.a - p))
    }
}

impl Distribution<f64> for SymPareto {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sign_u: f64 = rng.random();
        let mag_u: f64 = rng.random();
        self.from_uniforms(sign_u, mag_u)
    }
}

/// One symmetrized Pareto draw.
pub fn sym_pareto<R: Rng + ?Sized>(a: f64, rng: &mut R) -> Result<f64> {
    Ok(SymPareto::new(a)?.sample(rng))
}

/// Additive noise law for the generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLaw {
    SymPareto(SymPareto),
    Gaussian,
    /// No noise; still consumes nothing from the stream.
    Zero,
}

impl NoiseLaw {
    pub fn sym_pareto(a: f64) -> Result<Self> {
        Ok(NoiseLaw::SymPareto(SymPareto::new(a)?))
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::SymPareto(d) => d.sample(rng),
            NoiseLaw::Gaussian => rng.sample(StandardNormal),
            NoiseLaw::Zero => 0.0,
        }
    }
}

/// Covariates `x` (row-major, `n × d`) and responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub d: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Rows whose response was replaced by pure noise (all false when no
    /// contamination was applied).
    pub contaminated: Vec<bool>,
}

impl RegressionData {
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if d == 0 || x.len() != y.len() * d {
            return Err(Error::InvalidInput(format!(
                "design of length {} does not match {} responses in dimension {d}",
                x.len(),
                y.len()
            )));
        }
        let n = y.len();
        Ok(Self {
            d,
            n,
            x,
            y,
            contaminated: vec![false; n],
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Keeps the listed rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut x = Vec::with_capacity(rows.len() * self.d);
        let mut y = Vec::with_capacity(rows.len());
        let mut contaminated = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
            contaminated.push(self.contaminated[i]);
        }
        Self {
            d: self.d,
            n: rows.len(),
            x,
            y,
            contaminated,
        }
    }
}

fn check_dims(d: usize, n: usize, w_star: &[f64]) -> Result<()> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidInput(format!("need d, n ≥ 1, got d = {d}, n = {n}")));
    }
    if w_star.len() != d {
        return Err(Error::InvalidInput(format!(
            "true parameter has length {}, expected {d}",
            w_star.len()
        )));
    }
    Ok(())
}

fn gaussian_row<R: Rng + ?Sized>(d: usize, rng: &mut R, x: &mut Vec<f64>) {
    x.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First canonical basis vector of length `d`.
pub fn default_w_star(d: usize) -> Vec<f64> {
    let mut w = vec![0.0; d];
    if let Some(first) = w.first_mut() {
        *first = 1.0;
    }
    w
}

/// `Y_i = X_i·w* + ξ_i` with standard normal covariates and symmetrized
/// Pareto(a) noise.
pub fn regression_dataset<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    w_star: &[f64],
    a: f64,
    rng: &mut R,
) -> Result<RegressionData> {
    regression_dataset_with_noise(d, n, w_star, NoiseLaw::sym_pareto(a)?, rng)
}

/// [`regression_dataset`] with an arbitrary noise law.
pub fn regression_dataset_with_noise<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    w_star: &[f64],
    noise: NoiseLaw,
    rng: &mut R,
) -> Result<RegressionData> {
    check_dims(d, n, w_star)?;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        gaussian_row(d, rng, &mut x);
        let signal = dot(&x[i * d..], w_star);
        y.push(signal + noise.draw(rng));
    }
    RegressionData::new(d, x, y)
}

/// Gaussian-noise regression whose responses are replaced, independently with
/// probability `eta`, by a symmetrized Pareto(a) draw.
///
/// Each row consumes the same number of draws whatever `eta` is, so datasets
/// for different contamination rates share covariates and clean noise.
pub fn contaminated_regression<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    w_star: &[f64],
    a: f64,
    eta: f64,
    rng: &mut R,
) -> Result<RegressionData> {
    check_dims(d, n, w_star)?;
    check_rate(eta)?;
    let outlier = SymPareto::new(a)?;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut contaminated = Vec::with_capacity(n);
    for i in 0..n {
        gaussian_row(d, rng, &mut x);
        let clean = dot(&x[i * d..], w_star) + rng.sample::<f64, _>(StandardNormal);
        let coin: f64 = rng.random();
        let replacement = outlier.sample(rng);
        let hit = coin < eta;
        contaminated.push(hit);
        y.push(if hit { replacement } else { clean });
    }
    let mut data = RegressionData::new(d, x, y)?;
    data.contaminated = contaminated;
    Ok(data)
}

fn check_rate(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("contamination rate must lie in [0, 1], got {eta}")))
    }
}

/// Points `y` (row-major, `n × d`) drawn around `K` centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterData {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub y: Vec<f64>,
    pub labels: Vec<usize>,
    pub contaminated: Vec<bool>,
}

impl ClusterData {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.y[i * self.d..(i + 1) * self.d]
    }
}

fn check_clusters(d: usize, n: usize, pi: &[f64], centroids: &[Vec<f64>]) -> Result<()> {
    if d == 0 || n == 0 || pi.is_empty() {
        return Err(Error::InvalidInput("need d, n, K ≥ 1".into()));
    }
    if centroids.len() != pi.len() || centroids.iter().any(|c| c.len() != d) {
        return Err(Error::InvalidInput(format!(
            "expected {} centroids of dimension {d}",
            pi.len()
        )));
    }
    let total: f64 = pi.iter().sum();
    if pi.iter().any(|&w| !(w > 0.0 && w <= 1.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("mixture weights {pi:?} are not a simplex point")));
    }
    Ok(())
}

fn draw_label<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &w) in pi.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    pi.len() - 1
}

/// `Y_i = W*_{c_i} + ξ_i`, `c_i ~ Multinomial(π)`, each noise coordinate
/// symmetrized Pareto(a). `centroids[k]` is the k-th column of `W*`.
pub fn cluster_dataset<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    pi: &[f64],
    centroids: &[Vec<f64>],
    a: f64,
    rng: &mut R,
) -> Result<ClusterData> {
    cluster_dataset_with_noise(d, n, pi, centroids, NoiseLaw::sym_pareto(a)?, rng)
}

pub fn cluster_dataset_with_noise<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    pi: &[f64],
    centroids: &[Vec<f64>],
    noise: NoiseLaw,
    rng: &mut R,
) -> Result<ClusterData> {
    check_clusters(d, n, pi, centroids)?;
    let mut y = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = draw_label(pi, rng);
        labels.push(c);
        y.extend(centroids[c].iter().map(|&m| m + noise.draw(rng)));
    }
    Ok(ClusterData {
        d,
        n,
        k: pi.len(),
        y,
        labels,
        contaminated: vec![false; n],
    })
}

/// Gaussian clusters whose points are replaced, with probability `eta`, by a
/// vector of independent symmetrized Pareto(a) coordinates.
pub fn contaminated_cluster_dataset<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    pi: &[f64],
    centroids: &[Vec<f64>],
    a: f64,
    eta: f64,
    rng: &mut R,
) -> Result<ClusterData> {
    check_clusters(d, n, pi, centroids)?;
    check_rate(eta)?;
    let outlier = SymPareto::new(a)?;
    let mut y = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut contaminated = Vec::with_capacity(n);
    let mut replacement = vec![0.0; d];
    for _ in 0..n {
        let c = draw_label(pi, rng);
        labels.push(c);
        let start = y.len();
        y.extend(centroids[c].iter().map(|&m| m + rng.sample::<f64, _>(StandardNormal)));
        let coin: f64 = rng.random();
        for r in replacement.iter_mut() {
            *r = outlier.sample(rng);
        }
        let hit = coin < eta;
        if hit {
            y[start..].copy_from_slice(&replacement);
        }
        contaminated.push(hit);
    }
    Ok(ClusterData {
        d,
        n,
        k: pi.len(),
        y,
        labels,
        contaminated,
    })
}

/// Dumps a regression dataset as `trial,row,x_0..x_{d-1},y`. The header is
/// written when `header` is true.
pub fn write_regression_csv<W: Write>(
    out: W,
    trial: u64,
    data: &RegressionData,
    header: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        let mut cols = vec!["trial".to_string(), "row".to_string()];
        cols.extend((0..data.d).map(|j| format!("x_{j}")));
        cols.push("y".into());
        w.write_record(&cols)?;
    }
    for i in 0..data.n {
        let mut rec = vec![trial.to_string(), i.to_string()];
        rec.extend(data.row(i).iter().map(|v| v.to_string()));
        rec.push(data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(trial: u64) -> TrialRng {
        RngStream::new(7, trial).rng()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r1 = rng(3);
        let mut r2 = rng(3);
        let mut r3 = rng(4);
        let x1: Vec<u64> = (0..16).map(|_| r1.random()).collect();
        let x2: Vec<u64> = (0..16).map(|_| r2.random()).collect();
        let x3: Vec<u64> = (0..16).map(|_| r3.random()).collect();
        assert_eq!(x1, x2);
        assert_ne!(x1, x3);
    }

    #[test]
    fn pareto_magnitude_at_least_one() {
        let dist = SymPareto::new(0.5).unwrap();
        let mut r = rng(0);
        for _ in 0..100_000 {
            let x = dist.sample(&mut r);
            assert!(x.abs() >= 1.0 && x.is_finite());
        }
        assert!(dist.from_uniforms(0.9, 0.0).is_finite());
        assert!(SymPareto::new(0.0).is_err());
        assert!(SymPareto::new(f64::NAN).is_err());
    }

    #[test]
    fn sign_flip_of_uniform_negates_draw() {
        let dist = SymPareto::new(1.3).unwrap();
        for k in 0..1000 {
            let s = (k as f64 + 0.25) / 1000.0;
            let m = ((k * 37) % 1000) as f64 / 1000.0;
            assert_eq!(dist.from_uniforms(1.0 - s, m), -dist.from_uniforms(s, m));
        }
    }

    #[test]
    fn pareto_median_and_mean() {
        // |ξ| has median 2^{1/a}
        let mut r = rng(11);
        let d1 = SymPareto::new(1.0).unwrap();
        let mut mags: Vec<f64> = (0..1_000_000).map(|_| d1.sample(&mut r).abs()).collect();
        mags.sort_by(f64::total_cmp);
        let med = 0.5 * (mags[499_999] + mags[500_000]);
        assert!((med - 2.0).abs() < 0.04, "{med}");

        let d2 = SymPareto::new(2.0).unwrap();
        let draws: Vec<f64> = (0..1_000_000).map(|_| d2.sample(&mut r)).collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * (var / n).sqrt(), "{mean}");
        let m15 = draws.iter().map(|x| x.abs().powf(1.5)).sum::<f64>() / n;
        assert!((m15 / d2.abs_moment(1.5).unwrap() - 1.0).abs() < 0.05, "{m15}");
    }

    #[test]
    fn near_bounded_noise() {
        let w = default_w_star(3);
        let data = regression_dataset(3, 200, &w, 1e6, &mut rng(1)).unwrap();
        for i in 0..data.n {
            let r = (data.y[i] - dot(data.row(i), &w)).abs();
            assert!((1.0..=1.0 + 1e-5).contains(&r), "{r}");
        }
    }

    #[test]
    fn zero_noise_is_exact() {
        let w = vec![0.5, -2.0, 1.0];
        let data = regression_dataset_with_noise(3, 50, &w, NoiseLaw::Zero, &mut rng(2)).unwrap();
        for i in 0..data.n {
            assert_eq!(data.y[i], dot(data.row(i), &w));
        }
    }

    #[test]
    fn design_columns_centred() {
        let d = 3;
        let n = 100_000;
        let data = regression_dataset(d, n, &default_w_star(d), 2.0, &mut rng(5)).unwrap();
        for j in 0..d {
            let mean = (0..n).map(|i| data.row(i)[j]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "column {j}: {mean}");
        }
    }

    #[test]
    fn dimension_checks() {
        assert!(regression_dataset(0, 5, &[], 1.0, &mut rng(0)).is_err());
        assert!(regression_dataset(2, 5, &[1.0], 1.0, &mut rng(0)).is_err());
        assert!(contaminated_regression(2, 5, &[1.0, 0.0], 1.0, 1.5, &mut rng(0)).is_err());
    }

    #[test]
    fn contamination_fraction() {
        let n = 100_000;
        let data = contaminated_regression(2, n, &default_w_star(2), 1.0, 0.3, &mut rng(9)).unwrap();
        let frac = data.contaminated.iter().filter(|&&c| c).count() as f64 / n as f64;
        assert!((frac - 0.3).abs() < 0.005, "{frac}");
    }

    #[test]
    fn full_contamination_decorrelates() {
        let n = 100_000;
        let data = contaminated_regression(1, n, &[1.0], 3.0, 1.0, &mut rng(12)).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| data.row(i)[0]).collect();
        let (mx, my) = (
            xs.iter().sum::<f64>() / n as f64,
            data.y.iter().sum::<f64>() / n as f64,
        );
        let cov: f64 = xs.iter().zip(&data.y).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = data.y.iter().map(|y| (y - my).powi(2)).sum();
        let rho = cov / (vx * vy).sqrt();
        assert!(rho.abs() < 3.0 / (n as f64).sqrt(), "{rho}");
    }

    #[test]
    fn no_contamination_leaves_gaussian_residuals() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = 100_000;
        let w = default_w_star(2);
        let data = contaminated_regression(2, n, &w, 1.0, 0.0, &mut rng(21)).unwrap();
        let mut res: Vec<f64> = (0..n).map(|i| data.y[i] - dot(data.row(i), &w)).collect();
        res.sort_by(f64::total_cmp);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let ks = res
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let f = normal.cdf(r);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov critical value at level 0.01: 1.628 / sqrt(n)
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn cluster_single_component_and_zero_noise() {
        let cents = vec![vec![1.0, -1.0]];
        let data = cluster_dataset(2, 100, &[1.0], &cents, 2.0, &mut rng(3)).unwrap();
        assert!(data.labels.iter().all(|&l| l == 0));

        let cents = vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![-3.0, 1.0]];
        let data =
            cluster_dataset_with_noise(2, 300, &[0.2, 0.3, 0.5], &cents, NoiseLaw::Zero, &mut rng(4)).unwrap();
        for i in 0..data.n {
            assert_eq!(data.point(i), cents[data.labels[i]].as_slice());
        }
    }

    #[test]
    fn cluster_label_frequencies() {
        let n = 100_000;
        let pi = [0.2, 0.3, 0.5];
        let cents = vec![vec![0.0]; 3];
        let data = cluster_dataset(1, n, &pi, &cents, 2.0, &mut rng(8)).unwrap();
        for (k, &w) in pi.iter().enumerate() {
            let f = data.labels.iter().filter(|&&l| l == k).count() as f64 / n as f64;
            let se = (w * (1.0 - w) / n as f64).sqrt();
            assert!((f - w).abs() < 3.0 * se, "cluster {k}: {f}");
        }
    }

    #[test]
    fn cluster_rejects_bad_simplex() {
        let cents = vec![vec![0.0]; 2];
        assert!(matches!(
            cluster_dataset(1, 10, &[0.5, 0.6], &cents, 1.0, &mut rng(0)),
            Err(Error::Domain(_))
        ));
        assert!(cluster_dataset(1, 10, &[1.0, 0.0], &cents, 1.0, &mut rng(0)).is_err());
    }

    #[test]
    fn generators_deterministic() {
        let w = default_w_star(4);
        let a = regression_dataset(4, 64, &w, 0.5, &mut rng(30)).unwrap();
        let b = regression_dataset(4, 64, &w, 0.5, &mut rng(30)).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn csv_dump_layout() {
        let data = RegressionData::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -1.0]).unwrap();
        let mut buf = Vec::new();
        write_regression_csv(&mut buf, 3, &data, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "trial,row,x_0,x_1,y\n3,0,1,2,0.5\n3,1,3,4,-1\n");
    }
}
