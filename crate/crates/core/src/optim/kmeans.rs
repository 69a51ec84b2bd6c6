use super::{direction_with, norm, Direction, GDConfig, Scratch};
use crate::error::{Error, Result};
use crate::models::{Centroid, KMeans};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansIteration {
    pub t: usize,
    /// Labelled objective after the centroid step, before reassignment.
    pub objective_before_assign: f64,
    pub objective_after_assign: f64,
    /// Largest per-cluster direction norm.
    pub max_grad_norm: f64,
    /// Clusters with no members during this step; their centroids were frozen.
    pub empty_clusters: Vec<usize>,
    pub labels_changed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Stacked centroids, `w[k*d..(k+1)*d]`.
    pub w: Vec<f64>,
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub trace: Vec<KMeansIteration>,
}

/// Alternates one descent step per centroid, each using `rule` on the
/// points currently assigned to it, with full nearest-centroid
/// reassignment.
///
/// Stops after `t_max` rounds, or once the labels are unchanged and the
/// centroids have stopped moving (or every direction is below
/// `stop_grad_norm`). A cluster with no members keeps its centroid.
pub fn kmeans_alternate(problem: &KMeans<'_>, w0: &[f64], cfg: &GDConfig, rule: Direction) -> Result<KMeansResult> {
    cfg.validate()?;
    let (d, k) = (problem.data.d, problem.k);
    if w0.len() != d * k {
        return Err(Error::InvalidInput(format!(
            "initial centroids have length {}, expected {}",
            w0.len(),
            d * k
        )));
    }
    let mut w = w0.to_vec();
    let mut labels = problem.assign_all(&w);
    let mut trace = Vec::new();
    let mut scratch = Scratch::default();
    let mut sub = Centroid {
        data: problem.data,
        members: Vec::new(),
        distance: problem.distance,
    };

    for t in 0..cfg.t_max {
        let mut empty = Vec::new();
        let mut max_g = 0.0f64;
        let mut moved = 0.0;
        for c in 0..k {
            sub.members.clear();
            sub.members.extend(labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i));
            if sub.members.is_empty() {
                empty.push(c);
                continue;
            }
            let wk = &mut w[c * d..(c + 1) * d];
            let step = direction_with(&sub, wk, cfg, rule, &mut scratch)
                .map_err(|e| e.within(format!("cluster {c}, round {t}")))?;
            let g_norm = norm(&step.g);
            max_g = max_g.max(g_norm);
            if g_norm == 0.0 {
                continue;
            }
            let scale = if rule == Direction::ClippedNorm {
                cfg.gamma / g_norm
            } else {
                cfg.gamma
            };
            for (x, g) in wk.iter_mut().zip(&step.g) {
                *x -= scale * g;
                moved += (scale * g).powi(2);
            }
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("centroids diverged at round {t}")));
        }
        let before = problem.labelled_objective(&w, &labels);
        let next = problem.assign_all(&w);
        let after = problem.labelled_objective(&w, &next);
        let changed = next.iter().zip(&labels).filter(|(a, b)| a != b).count();
        labels = next;
        trace.push(KMeansIteration {
            t,
            objective_before_assign: before,
            objective_after_assign: after,
            max_grad_norm: max_g,
            empty_clusters: empty,
            labels_changed: changed,
        });
        if changed == 0 && (moved.sqrt() <= cfg.stop_step_norm || max_g <= cfg.stop_grad_norm) {
            return Ok(KMeansResult {
                w,
                labels,
                iterations: t + 1,
                trace,
            });
        }
    }
    Ok(KMeansResult {
        w,
        labels,
        iterations: cfg.t_max,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{cluster_dataset, cluster_dataset_with_noise, NoiseLaw, RngStream};
    use crate::influence::InfluenceSpec;

    fn cfg() -> GDConfig {
        let mut c = GDConfig::new(0.1, InfluenceSpec::wide(1.5).unwrap());
        c.t_max = 200;
        c
    }

    #[test]
    fn noiseless_start_at_truth_is_stationary() {
        let centroids = vec![vec![0.0, 0.0], vec![10.0, 10.0]];
        let data = cluster_dataset_with_noise(2, 50, &[0.5, 0.5], &centroids, NoiseLaw::Zero, &mut RngStream::new(1, 0).rng())
            .unwrap();
        let km = KMeans::new(&data, 2).unwrap();
        let w0 = [0.0, 0.0, 10.0, 10.0];
        for rule in [Direction::Erm, Direction::Robust, Direction::Mean] {
            let res = kmeans_alternate(&km, &w0, &cfg(), rule).unwrap();
            assert_eq!(res.labels, data.labels);
            assert_eq!(res.w, w0.to_vec());
            assert_eq!(res.iterations, 1);
        }
    }

    #[test]
    fn single_cluster_mean_converges_to_sample_mean() {
        let data = cluster_dataset(3, 80, &[1.0], &[vec![1.0, 2.0, 3.0]], 3.0, &mut RngStream::new(2, 0).rng()).unwrap();
        let km = KMeans::new(&data, 1).unwrap();
        let mut c = cfg();
        c.t_max = 500;
        let res = kmeans_alternate(&km, &[0.0; 3], &c, Direction::Mean).unwrap();
        for j in 0..3 {
            let mean = (0..80).map(|i| data.point(i)[j]).sum::<f64>() / 80.0;
            assert!((res.w[j] - mean).abs() < 1e-8);
        }
    }

    #[test]
    fn reassignment_never_increases_objective() {
        let centroids = vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]];
        let data = cluster_dataset(2, 150, &[0.3, 0.3, 0.4], &centroids, 2.5, &mut RngStream::new(3, 0).rng()).unwrap();
        let km = KMeans::new(&data, 3).unwrap();
        let w0 = [1.0, 1.0, 2.0, -1.0, -1.0, 2.0];
        for rule in [Direction::Erm, Direction::Robust, Direction::Mean, Direction::ClippedNorm] {
            let res = kmeans_alternate(&km, &w0, &cfg(), rule).unwrap();
            for it in &res.trace {
                assert!(it.objective_after_assign <= it.objective_before_assign + 1e-9);
            }
        }
    }

    #[test]
    fn empty_cluster_is_frozen_and_flagged() {
        let data = cluster_dataset_with_noise(1, 20, &[1.0], &[vec![0.0]], NoiseLaw::Gaussian, &mut RngStream::new(4, 0).rng())
            .unwrap();
        let km = KMeans::new(&data, 2).unwrap();
        let mut c = cfg();
        c.t_max = 5;
        let res = kmeans_alternate(&km, &[0.0, 1e6], &c, Direction::Mean).unwrap();
        assert_eq!(res.w[1], 1e6);
        assert!(res.trace.iter().all(|it| it.empty_clusters == vec![1]));
    }

    #[test]
    fn wrong_initial_length_is_rejected() {
        let data = cluster_dataset(2, 10, &[1.0], &[vec![0.0, 0.0]], 3.0, &mut RngStream::new(5, 0).rng()).unwrap();
        let km = KMeans::new(&data, 1).unwrap();
        assert!(kmeans_alternate(&km, &[0.0], &cfg(), Direction::Mean).is_err());
    }
}
