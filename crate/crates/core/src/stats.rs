//! Rank-based tests: Kruskal-Wallis, Wilcoxon rank-sum, Bonferroni.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Exact enumeration is used below this minimum group size.
pub const EXACT_BELOW: usize = 8;
/// Upper bound on the work of the exact rank-sum distribution.
const EXACT_WORK_LIMIT: f64 = 5.0e8;
/// Smallest p-value worth printing as a number.
pub const P_FLOOR: f64 = 1e-15;

/// Values grouped by category.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSamples {
    groups: Vec<Vec<f64>>,
}

impl GroupedSamples {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::TooFew { what: "groups", required: 2, found: groups.len() });
        }
        if let Some(g) = groups.iter().position(Vec::is_empty) {
            return Err(Error::InvalidInput(format!("group {g} is empty")));
        }
        if groups.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value".into()));
        }
        Ok(Self { groups })
    }

    /// Groups `values` by `labels` (`0..count`); empty groups are rejected.
    pub fn from_labels(values: &[f64], labels: &[usize], count: usize) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: values.len() });
        }
        let mut groups = vec![Vec::new(); count];
        for (&v, &l) in values.iter().zip(labels) {
            groups
                .get_mut(l)
                .ok_or_else(|| Error::InvalidInput(format!("label {l} outside 0..{count}")))?
                .push(v);
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PMethod {
    ChiSquare,
    Exact,
    Normal,
    /// No variation in the pooled data; p set to 1 by convention.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom for chi-square tests.
    pub df: Option<f64>,
    pub sizes: Vec<usize>,
    pub tie_correction_applied: bool,
    pub method: PMethod,
}

/// Average ranks (1-based) and the sizes of tied runs longer than one.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        order[i..j].iter().for_each(|&k| ranks[k] = rank);
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

/// Kruskal-Wallis H with midranks and the usual tie correction; p-value
/// from the chi-square upper tail with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(samples: &GroupedSamples) -> Result<TestResult> {
    let groups = samples.groups();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len();
    if n < groups.len() + 1 {
        return Err(Error::TooFew { what: "observations", required: groups.len() + 1, found: n });
    }
    let (ranks, ties) = midranks(&pooled);
    let nf = n as f64;
    let correction = 1.0 - tie_term(&ties) / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Err(Error::Degenerate("all values are tied".into()));
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0)) / correction;
    let df = (groups.len() - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(TestResult {
        statistic: h,
        p_value: chi.sf(h.max(0.0)).clamp(0.0, 1.0),
        df: Some(df),
        sizes: groups.iter().map(Vec::len).collect(),
        tie_correction_applied: !ties.is_empty(),
        method: PMethod::ChiSquare,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum WilcoxonMethod {
    /// Exact below [`EXACT_BELOW`], normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Two-sided Wilcoxon rank-sum test. The statistic is
/// `W = R_a - n_a (n_a + 1) / 2`, with `R_a` the midrank sum of `a`.
///
/// The exact path enumerates the permutation distribution of the midrank
/// sum (ties included) by dynamic programming; the normal path uses the
/// tie-corrected variance and a continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], method: WilcoxonMethod) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("both samples must be nonempty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..na].iter().sum();
    let w = rank_sum - (na * (na + 1)) as f64 / 2.0;
    let sizes = vec![na, nb];
    let tie_corrected = !ties.is_empty();

    if ties.len() == 1 && ties[0] == n {
        log::warn!("all pooled values identical; rank-sum p-value set to 1");
        return Ok(TestResult {
            statistic: w,
            p_value: 1.0,
            df: None,
            sizes,
            tie_correction_applied: tie_corrected,
            method: PMethod::Degenerate,
        });
    }

    let small = na.min(nb);
    let exact_work = n as f64 * small as f64 * (2 * small * n) as f64;
    let use_exact = match method {
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
        WilcoxonMethod::Auto if small < EXACT_BELOW => {
            if exact_work > EXACT_WORK_LIMIT {
                log::info!("exact rank-sum distribution too large ({na} x {nb}); using normal approximation");
            }
            exact_work <= EXACT_WORK_LIMIT
        }
        WilcoxonMethod::Auto => false,
    };
    let p_value = if use_exact {
        exact_rank_sum_p(&ranks, na)
    } else {
        let (nfa, nfb, nf) = (na as f64, nb as f64, n as f64);
        let centered = w - nfa * nfb / 2.0;
        let variance = nfa * nfb / 12.0 * ((nf + 1.0) - tie_term(&ties) / (nf * (nf - 1.0)));
        let z = (centered.abs() - 0.5).max(0.0) / variance.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.cdf(z).min(normal.sf(z))).min(1.0)
    };
    Ok(TestResult {
        statistic: w,
        p_value,
        df: None,
        sizes,
        tie_correction_applied: tie_corrected,
        method: if use_exact { PMethod::Exact } else { PMethod::Normal },
    })
}

/// Two-sided exact p-value for the midrank sum of the first `na` pooled
/// observations, under random assignment of ranks to the two groups.
fn exact_rank_sum_p(ranks: &[f64], na: usize) -> f64 {
    let n = ranks.len();
    // Doubled midranks are integers. Work with the smaller group.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let (k, observed) = if na <= n - na {
        (na, doubled[..na].iter().sum::<usize>())
    } else {
        (n - na, doubled[na..].iter().sum::<usize>())
    };
    let mut sorted = doubled.clone();
    sorted.sort_unstable();
    let max_sum: usize = sorted[n - k..].iter().sum();

    // ways[c][s]: number of c-subsets of the ranks seen so far summing to s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    let mut reach = 0;
    for &d in &doubled {
        reach = (reach + d).min(max_sum);
        for c in (1..=k).rev() {
            let (lower, upper) = ways.split_at_mut(c);
            let (prev, cur) = (&lower[c - 1], &mut upper[0]);
            for s in (d..=reach).rev() {
                cur[s] += prev[s - d];
            }
        }
    }
    let dist = &ways[k];
    let total: f64 = dist.iter().sum();
    let below: f64 = dist[..=observed.min(max_sum)].iter().sum();
    let above: f64 = dist[observed.min(max_sum + 1)..].iter().sum();
    (2.0 * (below / total).min(above / total)).min(1.0)
}

/// Bonferroni-adjusted threshold and per-test significance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bonferroni {
    pub threshold: f64,
    pub significant: Vec<bool>,
}

pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Bonferroni> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    if p_values.is_empty() {
        return Err(Error::InvalidInput("no p-values".into()));
    }
    let threshold = alpha / p_values.len() as f64;
    Ok(Bonferroni {
        threshold,
        significant: p_values.iter().map(|&p| p < threshold).collect(),
    })
}

/// Symmetric matrix of pairwise two-sided rank-sum p-values; the diagonal
/// is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueMatrix {
    pub values: Vec<Vec<Option<f64>>>,
}

impl PValueMatrix {
    /// Upper-triangle p-values in row order.
    pub fn upper(&self) -> Vec<f64> {
        let m = self.values.len();
        (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j].expect("off-diagonal"))
            .collect()
    }
}

pub fn pairwise_wilcoxon_matrix(samples: &GroupedSamples) -> Result<PValueMatrix> {
    let groups = samples.groups();
    let m = groups.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let results: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| wilcoxon_rank_sum(&groups[i], &groups[j], WilcoxonMethod::Auto).map(|r| r.p_value))
        .collect::<Result<_>>()?;
    let mut values = vec![vec![None; m]; m];
    for (&(i, j), &p) in pairs.iter().zip(&results) {
        values[i][j] = Some(p);
        values[j][i] = Some(p);
    }
    Ok(PValueMatrix { values })
}

/// Formats a p-value, printing anything below [`P_FLOOR`] as `<1e-15`.
pub fn format_p_value(p: f64) -> String {
    if p < P_FLOOR {
        "<1e-15".to_string()
    } else {
        format!("{p:.6}")
    }
}

/// Spearman rank correlation with midranks. Returns 0 when either variable
/// is constant (no association can be measured).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::TooFew { what: "pairs", required: 2, found: x.len() });
    }
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_two_sided(a: &[f64], b: &[f64]) -> f64 {
        // Enumerate every way of choosing |a| positions from the pooled ranks.
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let (ranks, _) = midranks(&pooled);
        let n = pooled.len();
        let k = a.len();
        let observed: f64 = ranks[..k].iter().sum();
        let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            total += 1;
            if s <= observed + 1e-9 {
                le += 1;
            }
            if s >= observed - 1e-9 {
                ge += 1;
            }
        }
        (2.0 * (le.min(ge) as f64) / total as f64).min(1.0)
    }

    #[test]
    fn midranks_average_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![2]);
    }

    #[test]
    fn kruskal_wallis_hand_example() {
        // R = {6, 15}: H = 12/42 (36/3 + 225/3) - 21 = 27/7.
        let g = GroupedSamples::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let r = kruskal_wallis(&g).unwrap();
        assert!((r.statistic - 27.0 / 7.0).abs() < 1e-12);
        assert!((r.p_value - 0.049_534).abs() < 1e-5);
        assert_eq!(r.df, Some(1.0));
        assert!(!r.tie_correction_applied);
    }

    #[test]
    fn kruskal_wallis_errors() {
        let tied = GroupedSamples::new(vec![vec![1.0, 1.0], vec![1.0]]).unwrap();
        assert!(matches!(kruskal_wallis(&tied), Err(Error::Degenerate(_))));
        assert!(GroupedSamples::new(vec![vec![1.0], vec![]]).is_err());
        let tiny = GroupedSamples::new(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(kruskal_wallis(&tiny).is_err());
    }

    #[test]
    fn kruskal_wallis_tie_correction() {
        let g = GroupedSamples::new(vec![vec![1.0, 2.0, 2.0], vec![2.0, 3.0, 4.0]]).unwrap();
        let r = kruskal_wallis(&g).unwrap();
        assert!(r.tie_correction_applied);
        // ranks: 1, 3, 3 | 3, 5, 6 -> R = 7, 14; H0 = 12/42 (49/3 + 196/3) - 21 = 7/3 - ... exact:
        let h0 = 12.0 / 42.0 * (49.0 / 3.0 + 196.0 / 3.0) - 21.0;
        let c = 1.0 - 24.0 / 210.0;
        assert!((r.statistic - h0 / c).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_exact_examples() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], WilcoxonMethod::Auto).unwrap();
        assert_eq!(r.method, PMethod::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        assert_eq!(r.statistic, 0.0);
        let same = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], WilcoxonMethod::Auto).unwrap();
        assert_eq!(same.p_value, 1.0);
    }

    #[test]
    fn exact_path_matches_enumeration_with_ties() {
        let cases: [(&[f64], &[f64]); 4] = [
            (&[1.0, 4.0, 4.0, 7.0], &[2.0, 3.0, 4.0, 9.0, 9.0]),
            (&[0.5, 0.7], &[0.1, 0.2, 0.3, 0.9, 1.1, 1.3]),
            (&[5.0, 5.0, 5.0], &[5.0, 6.0, 1.0, 2.0]),
            (&[3.0, 1.0, 8.0, 2.0, 6.0, 6.0, 10.0], &[4.0, 12.0, 11.0, 9.0, 6.0, 7.0]),
        ];
        for (a, b) in cases {
            let got = wilcoxon_rank_sum(a, b, WilcoxonMethod::Exact).unwrap().p_value;
            let want = brute_force_two_sided(a, b);
            assert!((got - want).abs() < 1e-12, "{a:?} {b:?}: {got} vs {want}");
            let swapped = wilcoxon_rank_sum(b, a, WilcoxonMethod::Exact).unwrap().p_value;
            assert!((got - swapped).abs() < 1e-12);
        }
    }

    #[test]
    fn wilcoxon_degenerate_and_normal() {
        let r = wilcoxon_rank_sum(&[2.0, 2.0], &[2.0], WilcoxonMethod::Auto).unwrap();
        assert_eq!((r.p_value, r.method), (1.0, PMethod::Degenerate));
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (100..130).map(f64::from).collect();
        let r = wilcoxon_rank_sum(&a, &b, WilcoxonMethod::Auto).unwrap();
        assert_eq!(r.method, PMethod::Normal);
        assert!(r.p_value < 1e-9);
        assert!(wilcoxon_rank_sum(&[], &[1.0], WilcoxonMethod::Auto).is_err());
    }

    #[test]
    fn bonferroni_threshold() {
        let ten = vec![0.0181; 10];
        let b = bonferroni(&ten, 0.05).unwrap();
        assert!((b.threshold - 0.005).abs() < 1e-15);
        assert!(b.significant.iter().all(|s| !s));
        assert_eq!(bonferroni(&[0.01], 0.05).unwrap().threshold, 0.05);
        assert!(bonferroni(&[], 0.05).is_err());
        assert!(bonferroni(&[0.1], 1.5).is_err());
    }

    #[test]
    fn pairwise_matrix_layout() {
        let g = GroupedSamples::new(vec![
            vec![1.0, 2.0, 3.0],
            vec![10.0, 11.0, 12.0],
            vec![20.0, 21.0, 22.0],
            vec![30.0, 31.0, 32.0],
            vec![40.0, 41.0, 42.0],
        ])
        .unwrap();
        let m = pairwise_wilcoxon_matrix(&g).unwrap();
        assert_eq!(m.upper().len(), 10);
        for i in 0..5 {
            assert_eq!(m.values[i][i], None);
            for j in 0..5 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn p_value_formatting() {
        assert_eq!(format_p_value(0.0), "<1e-15");
        assert_eq!(format_p_value(1e-16), "<1e-15");
        assert_eq!(format_p_value(0.0181), "0.018100");
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn normal_path_centred_statistic_has_unit_p() {
        let a = [1.0, 4.0, 5.0, 8.0, 9.0, 12.0, 13.0, 16.0];
        let b = [2.0, 3.0, 6.0, 7.0, 10.0, 11.0, 14.0, 15.0];
        let r = wilcoxon_rank_sum(&a, &b, WilcoxonMethod::Normal).unwrap();
        assert_eq!(r.statistic, 32.0);
        assert_eq!(r.p_value, 1.0);
    }
}
