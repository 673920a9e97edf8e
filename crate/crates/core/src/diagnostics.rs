//! Density-based silhouette: how strongly each event's own cluster
//! dominates the best alternative in posterior probability.

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::cluster::cluster_models;
use crate::error::{Error, Result};
use crate::kde::{Bandwidths, DensityModel};
use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbsEntry<T> {
    /// Allocated cluster.
    pub cluster: usize,
    /// Cluster with the highest posterior among the others.
    pub runner_up: usize,
    pub posterior: T,
    pub runner_up_posterior: T,
    /// `ln(p_cluster / p_runner_up)`.
    pub log_ratio: T,
    pub dbs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbsReport<T> {
    pub events: Vec<DbsEntry<T>>,
    pub cluster_means: Vec<T>,
    pub mean: T,
}

impl<T: Scalar> DbsReport<T> {
    /// Per cluster, `(event index, dbs)` sorted by decreasing dbs: the data
    /// behind a silhouette plot.
    pub fn silhouette(&self) -> Vec<Vec<(usize, T)>> {
        let mut out = vec![Vec::new(); self.cluster_means.len()];
        for (i, e) in self.events.iter().enumerate() {
            out[e.cluster].push((i, e.dbs));
        }
        for c in &mut out {
            c.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite dbs").then(a.0.cmp(&b.0)));
        }
        out
    }
}

/// Silhouette of `labels` (`0..models.len()`) at `points`, with priors set
/// to the cluster proportions. All arithmetic is in log space.
pub fn dbs<T: Scalar>(points: ArrayView2<T>, labels: &[usize], models: &[DensityModel<T>]) -> Result<DbsReport<T>> {
    let sizes = cluster_sizes(points.nrows(), labels, models.len())?;
    let priors: Vec<T> = sizes.iter().map(|&s| T::of_usize(s)).collect();
    dbs_with_priors(points, labels, models, &priors)
}

fn cluster_sizes(n: usize, labels: &[usize], m: usize) -> Result<Vec<usize>> {
    if m < 2 {
        return Err(Error::Undefined(format!(
            "density-based silhouette needs at least 2 clusters, got {m}"
        )));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
    }
    let mut sizes = vec![0usize; m];
    for &l in labels {
        if l >= m {
            return Err(Error::InvalidInput(format!("label {l} outside 0..{m}")));
        }
        sizes[l] += 1;
    }
    if let Some(j) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Undefined(format!("cluster {j} has no members, prior is zero")));
    }
    Ok(sizes)
}

/// Silhouette with explicit prior weights. The weights need not sum to one;
/// only their ratios matter.
pub fn dbs_with_priors<T: Scalar>(
    points: ArrayView2<T>,
    labels: &[usize],
    models: &[DensityModel<T>],
    priors: &[T],
) -> Result<DbsReport<T>> {
    let m = models.len();
    let n = points.nrows();
    let sizes = cluster_sizes(n, labels, m)?;
    if priors.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: priors.len() });
    }
    if priors.iter().any(|&p| !(p > T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidInput("priors must be positive and finite".into()));
    }
    let nf = T::of_usize(n);
    let total = priors.iter().copied().fold(T::zero(), |a, b| a + b);
    let log_prior: Vec<T> = priors.iter().map(|&p| (p / total).ln()).collect();
    let log_dens: Vec<Vec<T>> = models
        .par_iter()
        .map(|model| model.evaluate(points).map(|s| s.log_values))
        .collect::<Result<_>>()?;

    let mut events: Vec<DbsEntry<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let scores: Vec<T> = (0..m).map(|j| log_prior[j] + log_dens[j][i]).collect();
            let norm = log_sum_exp(&scores);
            let own = labels[i];
            let runner_up = (0..m)
                .filter(|&j| j != own)
                .fold(None::<usize>, |best, j| match best {
                    Some(b) if scores[b] >= scores[j] => Some(b),
                    _ => Some(j),
                })
                .expect("at least two clusters");
            DbsEntry {
                cluster: own,
                runner_up,
                posterior: (scores[own] - norm).exp(),
                runner_up_posterior: (scores[runner_up] - norm).exp(),
                log_ratio: scores[own] - scores[runner_up],
                dbs: T::zero(),
            }
        })
        .collect();

    let scale = events.iter().map(|e| e.log_ratio.abs()).fold(T::zero(), T::max);
    if scale > T::zero() {
        events.iter_mut().for_each(|e| e.dbs = e.log_ratio / scale);
    }
    let mut sums = vec![T::zero(); m];
    for e in &events {
        sums[e.cluster] = sums[e.cluster] + e.dbs;
    }
    let cluster_means = sums.iter().zip(&sizes).map(|(&s, &c)| s / T::of_usize(c)).collect();
    let mean = events.iter().map(|e| e.dbs).sum::<T>() / nf;
    Ok(DbsReport {
        events,
        cluster_means,
        mean,
    })
}

/// Builds one estimate per cluster from `groups` (final members, or cores)
/// with shared bandwidths and scores `labels` against them.
pub fn dbs_from_groups<T: Scalar>(
    points: ArrayView2<T>,
    labels: &[usize],
    groups: &[Vec<usize>],
    bandwidths: &Bandwidths<T>,
) -> Result<DbsReport<T>> {
    if groups.len() < 2 {
        return Err(Error::Undefined(format!(
            "density-based silhouette needs at least 2 clusters, got {}",
            groups.len()
        )));
    }
    let models = cluster_models(points, groups, bandwidths)?;
    dbs(points, labels, &models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn models(points: &ndarray::Array2<f64>, groups: &[Vec<usize>]) -> Vec<DensityModel<f64>> {
        cluster_models(points.view(), groups, &Bandwidths::new(vec![1.0, 1.0]).unwrap()).unwrap()
    }

    #[test]
    fn single_cluster_is_an_error() {
        let p = array![[0.0, 0.0], [1.0, 1.0]];
        let m = models(&p, &[vec![0, 1]]);
        assert!(matches!(dbs(p.view(), &[0, 0], &m), Err(Error::Undefined(_))));
    }

    #[test]
    fn balanced_point_scores_zero_and_extreme_scores_one() {
        // Symmetric configuration: event 2 sits midway between equal clusters.
        let p = array![[-3.0, 0.0], [3.0, 0.0], [0.0, 0.0]];
        let m = models(&p, &[vec![0], vec![1]]);
        let labels = [0, 1, 0];
        let r = dbs(p.view(), &labels, &m).unwrap();
        assert!(r.events.iter().all(|e| (-1.0..=1.0).contains(&e.dbs)));
        // Priors differ (2/3 vs 1/3) so event 2 favours cluster 0 only through the prior.
        assert!(r.events[2].dbs > 0.0);
        let max_abs = r.events.iter().map(|e| e.dbs.abs()).fold(0.0, f64::max);
        assert_eq!(max_abs, 1.0);

        let labels = [0, 1];
        let p2 = array![[-3.0, 0.0], [3.0, 0.0]];
        let m2 = models(&p2, &[vec![0], vec![1]]);
        let r2 = dbs(p2.view(), &labels, &m2).unwrap();
        assert_eq!(r2.events[0].dbs, 1.0);
        assert_eq!(r2.events[1].dbs, 1.0);

        let mid = array![[-3.0, 0.0], [3.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let m3 = models(&mid, &[vec![0, 2], vec![1, 3]]);
        let r3 = dbs(mid.view(), &[0, 1, 0, 1], &m3).unwrap();
        assert_eq!(r3.events[2].log_ratio, 0.0);
        assert_eq!(r3.events[2].dbs, 0.0);
    }

    #[test]
    fn mislabeled_point_is_negative() {
        let p = array![[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [8.0, 0.0], [8.5, 0.0], [0.2, 0.2]];
        let labels = [0, 0, 0, 1, 1, 1];
        let m = models(&p, &[vec![0, 1, 2], vec![3, 4, 5]]);
        let r = dbs(p.view(), &labels, &m).unwrap();
        assert!(r.events[5].dbs < 0.0);
        assert_eq!(r.events[5].runner_up, 0);
        let sil = r.silhouette();
        assert_eq!(sil.len(), 2);
        assert!(sil[1].windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
