use crate::error::{Error, Result};

/// Largest K for which exhaustive column matching is attempted.
pub const MAX_MATCH_K: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMatch {
    /// `perm[j]` is the true centroid matched to fitted column `j`.
    pub perm: Vec<usize>,
    /// `‖Ŵ − W*_perm‖_F` under the best permutation.
    pub distance: f64,
}

/// Matches fitted centroids to true ones by minimizing the Frobenius
/// distance over all `K!` column permutations. Both inputs stack `K`
/// columns of length `d`.
pub fn match_columns(w_hat: &[f64], w_star: &[f64], d: usize, k: usize) -> Result<ColumnMatch> {
    if k == 0 || k > MAX_MATCH_K {
        return Err(Error::InvalidInput(format!("column matching needs 1 ≤ K ≤ {MAX_MATCH_K}, got {k}")));
    }
    if w_hat.len() != d * k || w_star.len() != d * k {
        return Err(Error::InvalidInput("centroid matrices must both be d × K".into()));
    }
    // cost[j][l] = squared distance between fitted column j and true column l
    let cost: Vec<Vec<f64>> = w_hat
        .chunks(d)
        .map(|a| {
            w_star
                .chunks(d)
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum())
                .collect()
        })
        .collect();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, perm.clone());
    let total = |perm: &[usize]| perm.iter().enumerate().map(|(j, &l)| cost[j][l]).sum::<f64>();
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; k];
    let cur = total(&perm);
    if cur < best.0 {
        best = (cur, perm.clone());
    }
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let cur = total(&perm);
            if cur < best.0 {
                best = (cur, perm.clone());
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(ColumnMatch {
        perm: best.1,
        distance: best.0.sqrt(),
    })
}

/// Fraction of points whose fitted cluster, mapped through `perm`, equals
/// the true label.
pub fn label_accuracy(labels: &[usize], truth: &[usize], perm: &[usize]) -> f64 {
    let hits = labels.iter().zip(truth).filter(|(&l, &t)| perm[l] == t).count();
    hits as f64 / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_shuffled_columns() {
        let truth = [0.0, 0.0, 10.0, 0.0, 20.0, 0.0, 30.0, 0.0];
        let fitted = [30.1, 0.0, 0.0, 0.2, 19.9, 0.0, 10.0, 0.0];
        let m = match_columns(&fitted, &truth, 2, 4).unwrap();
        assert_eq!(m.perm, vec![3, 0, 2, 1]);
        let want = (0.1f64.powi(2) + 0.2f64.powi(2) + 0.1f64.powi(2)).sqrt();
        assert!((m.distance - want).abs() < 1e-12);
    }

    #[test]
    fn enumerates_all_permutations() {
        // the optimum is the reversal, reachable only if every permutation is visited
        let k = 6;
        let truth: Vec<f64> = (0..k).map(|j| j as f64).collect();
        let fitted: Vec<f64> = (0..k).rev().map(|j| j as f64).collect();
        let m = match_columns(&fitted, &truth, 1, k).unwrap();
        assert_eq!(m.perm, (0..k).rev().collect::<Vec<_>>());
        assert_eq!(m.distance, 0.0);
    }

    #[test]
    fn accuracy() {
        assert_eq!(label_accuracy(&[0, 1, 1], &[1, 0, 1], &[1, 0]), 2.0 / 3.0);
    }

    #[test]
    fn rejects_large_k() {
        assert!(match_columns(&[0.0; 9], &[0.0; 9], 1, 9).is_err());
    }
}
