use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GeoMedianChoice {
    pub index: usize,
    pub vector: Vec<f64>,
    /// `r_i`: median distance from estimate `i` to the others.
    pub r: Vec<f64>,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Picks the estimate whose median Euclidean distance to the other
/// estimates is smallest (lowest index on ties). For an even number of
/// distances the median is the mean of the two central ones.
pub fn geometric_median_select<V: AsRef<[f64]>>(estimates: &[V]) -> Result<GeoMedianChoice> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 estimates, got {m}")));
    }
    let d = estimates[0].as_ref().len();
    if estimates.iter().any(|e| e.as_ref().len() != d) {
        return Err(Error::InvalidInput("estimates differ in dimension".into()));
    }
    if estimates.iter().any(|e| e.as_ref().iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidInput("estimates must be finite".into()));
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut r = Vec::with_capacity(m);
    let mut row = Vec::with_capacity(m - 1);
    for i in 0..m {
        row.clear();
        row.extend(
            (0..m)
                .filter(|&j| j != i)
                .map(|j| dist(estimates[i].as_ref(), estimates[j].as_ref())),
        );
        row.sort_by(f64::total_cmp);
        r.push(median(&row));
    }
    let mut index = 0;
    for (i, &ri) in r.iter().enumerate() {
        if ri < r[index] {
            index = i;
        }
    }
    Ok(GeoMedianChoice {
        index,
        vector: estimates[index].as_ref().to_vec(),
        r,
    })
}
