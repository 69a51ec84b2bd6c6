//! Loss families `f_w(X_i)` with per-sample gradients.

use crate::datagen::{ClusterData, RegressionData};
use crate::error::{Error, Result};

/// A parametric family of non-negative per-sample losses.
///
/// `loss_at`/`grad_at` index without bounds checks beyond slice indexing;
/// use [`loss`] and [`grad`] for checked access.
pub trait ModelProblem: Sync {
    /// Length of the parameter vector.
    fn dim(&self) -> usize;

    fn n_samples(&self) -> usize;

    fn loss_at(&self, w: &[f64], i: usize) -> f64;

    /// Writes `∂f_w(X_i)/∂w` into `out` (length [`dim`](Self::dim)).
    fn grad_at(&self, w: &[f64], i: usize, out: &mut [f64]);

    fn losses_into(&self, w: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.loss_at(w, i);
        }
    }

    /// Mean loss over the samples.
    fn objective(&self, w: &[f64]) -> f64 {
        let n = self.n_samples();
        (0..n).map(|i| self.loss_at(w, i)).sum::<f64>() / n as f64
    }
}

fn check_access<P: ModelProblem + ?Sized>(problem: &P, w: &[f64], i: usize) -> Result<()> {
    if i >= problem.n_samples() {
        return Err(Error::InvalidInput(format!(
            "sample index {i} out of range for {} samples",
            problem.n_samples()
        )));
    }
    if w.len() != problem.dim() {
        return Err(Error::InvalidInput(format!(
            "parameter has length {}, expected {}",
            w.len(),
            problem.dim()
        )));
    }
    Ok(())
}

pub fn loss<P: ModelProblem + ?Sized>(problem: &P, w: &[f64], i: usize) -> Result<f64> {
    check_access(problem, w, i)?;
    Ok(problem.loss_at(w, i))
}

pub fn grad<P: ModelProblem + ?Sized>(problem: &P, w: &[f64], i: usize) -> Result<Vec<f64>> {
    check_access(problem, w, i)?;
    let mut out = vec![0.0; problem.dim()];
    problem.grad_at(w, i, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionLoss {
    /// `(Y − X·w)²`
    Squared,
    /// `|Y − X·w|`
    Absolute,
}

#[derive(Debug, Clone, Copy)]
pub struct Regression<'a> {
    pub data: &'a RegressionData,
    pub loss: RegressionLoss,
}

impl<'a> Regression<'a> {
    pub fn squared(data: &'a RegressionData) -> Self {
        Self {
            data,
            loss: RegressionLoss::Squared,
        }
    }

    pub fn absolute(data: &'a RegressionData) -> Self {
        Self {
            data,
            loss: RegressionLoss::Absolute,
        }
    }

    #[inline]
    fn residual(&self, w: &[f64], i: usize) -> f64 {
        let x = self.data.row(i);
        self.data.y[i] - x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl ModelProblem for Regression<'_> {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn n_samples(&self) -> usize {
        self.data.n
    }

    fn loss_at(&self, w: &[f64], i: usize) -> f64 {
        let r = self.residual(w, i);
        match self.loss {
            RegressionLoss::Squared => r * r,
            RegressionLoss::Absolute => r.abs(),
        }
    }

    fn grad_at(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let r = self.residual(w, i);
        let scale = match self.loss {
            RegressionLoss::Squared => -2.0 * r,
            // subgradient 0 at an exact fit
            RegressionLoss::Absolute => {
                if r > 0.0 {
                    -1.0
                } else if r < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        for (o, x) in out.iter_mut().zip(self.data.row(i)) {
            *o = scale * x;
        }
    }
}

/// Point-to-centroid discrepancy `l(Y, W_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterDistance {
    SquaredEuclidean,
    /// Sum of absolute coordinate differences.
    Absolute,
}

impl ClusterDistance {
    #[inline]
    pub fn eval(&self, y: &[f64], c: &[f64]) -> f64 {
        match self {
            ClusterDistance::SquaredEuclidean => y.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum(),
            ClusterDistance::Absolute => y.iter().zip(c).map(|(a, b)| (a - b).abs()).sum(),
        }
    }

    /// Gradient of `l(y, c)` with respect to `c`.
    #[inline]
    pub fn grad_centroid(&self, y: &[f64], c: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(y).zip(c) {
            let r = a - b;
            *o = match self {
                ClusterDistance::SquaredEuclidean => -2.0 * r,
                ClusterDistance::Absolute => {
                    if r > 0.0 {
                        -1.0
                    } else if r < 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }
}

/// `f_W(Y_i) = min_k l(Y_i, W_k)`. The parameter stacks the K centroids:
/// `w[k*d..(k+1)*d]` is column `k` of `W`.
#[derive(Debug, Clone, Copy)]
pub struct KMeans<'a> {
    pub data: &'a ClusterData,
    pub k: usize,
    pub distance: ClusterDistance,
}

impl<'a> KMeans<'a> {
    pub fn new(data: &'a ClusterData, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("K-means needs K ≥ 1".into()));
        }
        Ok(Self {
            data,
            k,
            distance: ClusterDistance::SquaredEuclidean,
        })
    }

    pub fn centroid<'w>(&self, w: &'w [f64], k: usize) -> &'w [f64] {
        let d = self.data.d;
        &w[k * d..(k + 1) * d]
    }

    /// Nearest centroid, lowest index on ties.
    pub fn assign(&self, w: &[f64], i: usize) -> usize {
        let y = self.data.point(i);
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for k in 0..self.k {
            let dist = self.distance.eval(y, self.centroid(w, k));
            if dist < best_dist {
                best = k;
                best_dist = dist;
            }
        }
        best
    }

    pub fn assign_checked(&self, w: &[f64], i: usize) -> Result<usize> {
        check_access(self, w, i)?;
        Ok(self.assign(w, i))
    }

    pub fn assign_all(&self, w: &[f64]) -> Vec<usize> {
        (0..self.data.n).map(|i| self.assign(w, i)).collect()
    }

    /// `Σ_i l(Y_i, W_{c_i})` for given labels.
    pub fn labelled_objective(&self, w: &[f64], labels: &[usize]) -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, &k)| self.distance.eval(self.data.point(i), self.centroid(w, k)))
            .sum()
    }
}

impl ModelProblem for KMeans<'_> {
    fn dim(&self) -> usize {
        self.data.d * self.k
    }

    fn n_samples(&self) -> usize {
        self.data.n
    }

    fn loss_at(&self, w: &[f64], i: usize) -> f64 {
        let k = self.assign(w, i);
        self.distance.eval(self.data.point(i), self.centroid(w, k))
    }

    fn grad_at(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let d = self.data.d;
        let k = self.assign(w, i);
        out.fill(0.0);
        self.distance
            .grad_centroid(self.data.point(i), self.centroid(w, k), &mut out[k * d..(k + 1) * d]);
    }
}

/// Loss `l(Y_i, c)` of a single centroid `c` over a fixed set of member points.
/// This is the per-cluster subproblem of the K-means alternation.
#[derive(Debug, Clone)]
pub struct Centroid<'a> {
    pub data: &'a ClusterData,
    pub members: Vec<usize>,
    pub distance: ClusterDistance,
}

impl ModelProblem for Centroid<'_> {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn n_samples(&self) -> usize {
        self.members.len()
    }

    fn loss_at(&self, w: &[f64], i: usize) -> f64 {
        self.distance.eval(self.data.point(self.members[i]), w)
    }

    fn grad_at(&self, w: &[f64], i: usize, out: &mut [f64]) {
        self.distance.grad_centroid(self.data.point(self.members[i]), w, out);
    }
}
