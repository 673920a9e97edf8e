//! Agreement between two partitions of the same events: contingency tables,
//! skill scores, the adjusted Rand index, optimal label matching and the
//! day-over-day consistency sweep.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{filter_by, EventCatalog};
use crate::cluster::{pdf_cluster_locations, ClusterOptions};
use crate::error::{Error, Result};

/// Cross-counts `counts[i][j]` of events with forecast label `i` and
/// observed label `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let cols = counts.first().map_or(0, Vec::len);
        if counts.is_empty() || cols == 0 || counts.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("contingency counts must form a nonempty rectangle".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts[0].len()
    }

    /// Forecast totals `N(F_i)`.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Observed totals `N(O_j)`.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal_sum(&self) -> u64 {
        (0..self.rows().min(self.cols())).map(|i| self.counts[i][i]).sum()
    }

    /// Table with forecast row `i` moved to row `map[i]`.
    pub fn relabel_rows(&self, map: &[usize]) -> Result<Self> {
        if map.len() != self.rows() {
            return Err(Error::DimensionMismatch { expected: self.rows(), found: map.len() });
        }
        let mut counts = vec![vec![0; self.cols()]; self.rows()];
        for (i, &target) in map.iter().enumerate() {
            counts[target] = self.counts[i].clone();
        }
        Self::from_counts(counts)
    }
}

/// Tabulates two label lists over `0..K`, where `K` covers both.
pub fn contingency(forecast: &[usize], observed: &[usize]) -> Result<ContingencyTable> {
    if forecast.len() != observed.len() {
        return Err(Error::DimensionMismatch { expected: forecast.len(), found: observed.len() });
    }
    if forecast.is_empty() {
        return Err(Error::InvalidInput("no labels".into()));
    }
    let k = forecast.iter().chain(observed).max().expect("nonempty") + 1;
    let mut counts = vec![vec![0u64; k]; k];
    for (&f, &o) in forecast.iter().zip(observed) {
        counts[f][o] += 1;
    }
    ContingencyTable::from_counts(counts)
}

/// Maps arbitrary integer labels onto `0..K` in increasing label order.
pub fn compact_labels(labels: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let distinct: BTreeMap<i64, usize> = labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let mapped = labels.iter().map(|l| distinct[l]).collect();
    (mapped, distinct.into_keys().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkillScores {
    pub nss: f64,
    pub hss: f64,
    pub hk: f64,
}

/// Proportion correct, Heidke and Hanssen-Kuipers scores of a square table.
///
/// `HK = HSS (N^2 - sum N(F_i) N(O_i)) / (N^2 - sum N(O_i)^2)`.
pub fn skill_scores(table: &ContingencyTable) -> Result<SkillScores> {
    if table.rows() != table.cols() {
        return Err(Error::InvalidInput("skill scores need a square table".into()));
    }
    let n = table.total() as f64;
    if n == 0.0 {
        return Err(Error::InvalidInput("empty contingency table".into()));
    }
    let (rows, cols) = (table.row_sums(), table.col_sums());
    let n2 = n * n;
    let chance_products: f64 = rows.iter().zip(&cols).map(|(&f, &o)| f as f64 * o as f64).sum();
    let observed_squares: f64 = cols.iter().map(|&o| (o as f64).powi(2)).sum();
    let nss = table.diagonal_sum() as f64 / n;
    let c = chance_products / n2;
    if c == 1.0 {
        return Err(Error::Undefined("single-category table: Heidke score undefined".into()));
    }
    let hss = (nss - c) / (1.0 - c);
    if observed_squares == n2 {
        return Err(Error::Undefined("single observed category: Hanssen-Kuipers score undefined".into()));
    }
    let hk = hss * (n2 - chance_products) / (n2 - observed_squares);
    Ok(SkillScores { nss, hss, hk })
}

/// How the chance expectation of the pair count is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ExpectationMode {
    /// Hubert-Arabie: `E(r) = |N(O)| |N(F)| / (N (N - 1) / 2)`.
    #[default]
    Standard,
    /// `E(r) = |N(O)| |N(F)| / (2 N (N - 1))`, a quarter of the standard value.
    Paper,
}

impl std::str::FromStr for ExpectationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "paper" => Ok(Self::Paper),
            other => Err(Error::InvalidInput(format!("unknown expectation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjustedRand {
    /// Pairs joined in both partitions.
    pub r: f64,
    pub expected: f64,
    pub max: f64,
    /// Pairs joined in the observed partition, `|N(O)|`.
    pub observed_pairs: f64,
    /// Pairs joined in the forecast partition, `|N(F)|`.
    pub forecast_pairs: f64,
    pub ha: f64,
}

fn pairs(k: u64) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

pub fn adjusted_rand(table: &ContingencyTable, mode: ExpectationMode) -> Result<AdjustedRand> {
    let n = table.total();
    if n < 2 {
        return Err(Error::TooFew { what: "events for the adjusted Rand index", required: 2, found: n as usize });
    }
    let r: f64 = table.counts().iter().flatten().map(|&c| pairs(c)).sum();
    let observed_pairs: f64 = table.col_sums().into_iter().map(pairs).sum();
    let forecast_pairs: f64 = table.row_sums().into_iter().map(pairs).sum();
    let nf = n as f64;
    let expected = match mode {
        ExpectationMode::Standard => observed_pairs * forecast_pairs / (nf * (nf - 1.0) / 2.0),
        ExpectationMode::Paper => 0.5 * observed_pairs * forecast_pairs / (nf * (nf - 1.0)),
    };
    let max = 0.5 * (observed_pairs + forecast_pairs);
    if max == expected {
        return Err(Error::Undefined("adjusted Rand index undefined: max(r) equals E(r)".into()));
    }
    Ok(AdjustedRand {
        r,
        expected,
        max,
        observed_pairs,
        forecast_pairs,
        ha: (r - expected) / (max - expected),
    })
}

/// Adjusted Rand index (standard mode) between two label lists with
/// arbitrary label values.
pub fn adjusted_rand_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    Ok(adjusted_rand(&contingency(a, b)?, ExpectationMode::Standard)?.ha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementScores {
    pub nss: f64,
    pub hss: f64,
    pub hk: f64,
    pub ha: f64,
}

/// Minimum-cost assignment of rows to columns of a square matrix
/// (shortest augmenting paths with potentials). Returns `assignment[row]`.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = INF;
            let mut col1 = 0;
            for col in 1..=n {
                if !used[col] {
                    let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                    if reduced < minv[col] {
                        minv[col] = reduced;
                        way[col] = col0;
                    }
                    if minv[col] < delta {
                        delta = minv[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

fn best_value(gain: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> i64 {
    let cost: Vec<Vec<i64>> = rows.iter().map(|&r| cols.iter().map(|&c| -gain[r][c]).collect()).collect();
    let assignment = hungarian(&cost);
    rows.iter().zip(&assignment).map(|(&r, &k)| gain[r][cols[k]]).sum()
}

/// Permutation `map` of forecast labels maximising `sum_i counts[i][map[i]]`.
/// Among optimal permutations the lexicographically smallest is returned.
pub fn match_labels(table: &ContingencyTable) -> Result<Vec<usize>> {
    let k = table.rows();
    if k != table.cols() {
        return Err(Error::InvalidInput(format!(
            "label matching needs a square table, got {k} x {}",
            table.cols()
        )));
    }
    let gain: Vec<Vec<i64>> = table
        .counts()
        .iter()
        .map(|r| r.iter().map(|&c| c as i64).collect())
        .collect();
    let all: Vec<usize> = (0..k).collect();
    let optimum = best_value(&gain, &all, &all);

    let mut map = Vec::with_capacity(k);
    let mut free: Vec<usize> = all.clone();
    let mut fixed = 0i64;
    for row in 0..k {
        let rest_rows: Vec<usize> = (row + 1..k).collect();
        let choice = free
            .iter()
            .copied()
            .find(|&c| {
                let rest_cols: Vec<usize> = free.iter().copied().filter(|&x| x != c).collect();
                fixed + gain[row][c] + best_value(&gain, &rest_rows, &rest_cols) == optimum
            })
            .expect("some column completes an optimal assignment");
        fixed += gain[row][choice];
        free.retain(|&c| c != choice);
        map.push(choice);
    }
    Ok(map)
}

/// All four indexes for a square table after optimal label matching.
pub fn agreement_scores(table: &ContingencyTable, mode: ExpectationMode) -> Result<AgreementScores> {
    let map = match_labels(table)?;
    let matched = table.relabel_rows(&map)?;
    let skill = skill_scores(&matched)?;
    let ha = adjusted_rand(&matched, mode)?.ha;
    Ok(AgreementScores {
        nss: skill.nss,
        hss: skill.hss,
        hk: skill.hk,
        ha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalOptions {
    pub cluster: ClusterOptions,
    /// First day `t` compared against `t - 1` (day 0 holds the first event).
    pub start_day: i64,
    pub days: usize,
    /// Day 0 starts at this date's midnight UTC; defaults to the first event's date.
    pub origin: Option<NaiveDate>,
    pub mode: ExpectationMode,
}

impl Default for TemporalOptions {
    fn default() -> Self {
        Self {
            cluster: ClusterOptions::default(),
            start_day: 1,
            days: 1,
            origin: None,
            mode: ExpectationMode::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayComparison {
    pub day: i64,
    /// Events present at both days.
    pub n_common: usize,
    /// Cluster count at day `t` (equal to day `t - 1` unless skipped).
    pub clusters: usize,
    pub scores: Option<AgreementScores>,
    /// Why the comparison was skipped.
    pub skipped: Option<String>,
}

fn day_index(origin: DateTime<Utc>, t: DateTime<Utc>) -> i64 {
    (t - origin).num_seconds().div_euclid(Duration::days(1).num_seconds())
}

/// Clusters the cumulative catalog at the end of every day in
/// `start_day - 1 ..= start_day + days - 1` and compares each day with the
/// previous one on their common events. Days whose cluster counts differ are
/// skipped.
pub fn temporal_consistency(catalog: &EventCatalog, options: &TemporalOptions) -> Result<Vec<DayComparison>> {
    if catalog.is_empty() {
        return Err(Error::InvalidInput("empty catalog".into()));
    }
    if options.days == 0 {
        return Err(Error::InvalidInput("no days requested".into()));
    }
    let origin = match options.origin {
        Some(d) => d.and_hms_opt(0, 0, 0).expect("midnight").and_utc(),
        None => {
            let first = catalog.events.iter().map(|e| e.time).min().expect("nonempty");
            first.date_naive().and_hms_opt(0, 0, 0).expect("midnight").and_utc()
        }
    };
    let first_day = options.start_day - 1;
    let last_day = options.start_day + options.days as i64 - 1;
    let runs: Vec<(i64, Result<(Vec<u64>, Vec<usize>, usize)>)> = (first_day..=last_day)
        .into_par_iter()
        .map(|day| {
            let subset = filter_by(catalog, |e| day_index(origin, e.time) <= day);
            let result = pdf_cluster_locations(&subset.locations(), &options.cluster).map(|r| {
                let ids = subset.events.iter().map(|e| e.id).collect();
                (ids, r.partition.labels, r.partition.cluster_count)
            });
            (day, result)
        })
        .collect();

    let mut out = Vec::with_capacity(options.days);
    for pair in runs.windows(2) {
        let (day, current) = (&pair[1].0, &pair[1].1);
        let previous = &pair[0].1;
        let comparison = match (previous, current) {
            (Err(e), _) | (_, Err(e)) => DayComparison {
                day: *day,
                n_common: 0,
                clusters: 0,
                scores: None,
                skipped: Some(format!("clustering failed: {e}")),
            },
            (Ok((prev_ids, prev_labels, prev_k)), Ok((ids, labels, k))) => {
                compare_days(*day, (prev_ids, prev_labels, *prev_k), (ids, labels, *k), options.mode)
            }
        };
        if let Some(reason) = &comparison.skipped {
            log::info!("day {day}: skipped ({reason})");
        }
        out.push(comparison);
    }
    if out.iter().all(|c| c.scores.is_none()) {
        return Err(Error::Undefined("no valid comparison days".into()));
    }
    Ok(out)
}

fn compare_days(
    day: i64,
    (prev_ids, prev_labels, prev_k): (&[u64], &[usize], usize),
    (ids, labels, k): (&[u64], &[usize], usize),
    mode: ExpectationMode,
) -> DayComparison {
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let (mut observed, mut forecast) = (Vec::new(), Vec::new());
    for (&id, &l) in prev_ids.iter().zip(prev_labels) {
        if let Some(&i) = index.get(&id) {
            observed.push(l);
            forecast.push(labels[i]);
        }
    }
    let n_common = observed.len();
    let skip = |reason: String| DayComparison {
        day,
        n_common,
        clusters: k,
        scores: None,
        skipped: Some(reason),
    };
    if k != prev_k {
        return skip(format!("cluster count changed from {prev_k} to {k}"));
    }
    if n_common < 2 {
        return skip("fewer than two common events".into());
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&f, &o) in forecast.iter().zip(&observed) {
        counts[f][o] += 1;
    }
    let scores = ContingencyTable::from_counts(counts).and_then(|t| agreement_scores(&t, mode));
    match scores {
        Ok(s) => DayComparison {
            day,
            n_common,
            clusters: k,
            scores: Some(s),
            skipped: None,
        },
        Err(e) => skip(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[u64]]) -> ContingencyTable {
        ContingencyTable::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn contingency_basics() {
        let t = contingency(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap();
        assert_eq!(t.counts(), &[vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        let anti = contingency(&[0, 1], &[1, 0]).unwrap();
        assert_eq!(anti.counts(), &[vec![0, 1], vec![1, 0]]);
        assert!(contingency(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn skill_score_fixtures() {
        let diag = table(&[&[5, 0, 0], &[0, 3, 0], &[0, 0, 7]]);
        let s = skill_scores(&diag).unwrap();
        assert_eq!((s.nss, s.hss, s.hk), (1.0, 1.0, 1.0));

        let flat = skill_scores(&table(&[&[25, 25], &[25, 25]])).unwrap();
        assert_eq!((flat.nss, flat.hss, flat.hk), (0.5, 0.0, 0.0));

        let s = skill_scores(&table(&[&[40, 10], &[10, 40]])).unwrap();
        assert!((s.nss - 0.8).abs() < 1e-15);
        assert!((s.hss - 0.6).abs() < 1e-15);
        assert!((s.hk - 0.6).abs() < 1e-15);
    }

    #[test]
    fn skill_score_degenerate_tables() {
        assert!(matches!(skill_scores(&table(&[&[4, 0], &[0, 0]])), Err(Error::Undefined(_))));
        // One observed category but two forecast categories: HSS defined, HK not.
        assert!(matches!(skill_scores(&table(&[&[3, 0], &[2, 0]])), Err(Error::Undefined(_))));
    }

    #[test]
    fn adjusted_rand_identical_partitions() {
        let diag = table(&[&[5, 0], &[0, 3]]);
        for mode in [ExpectationMode::Standard, ExpectationMode::Paper] {
            assert_eq!(adjusted_rand(&diag, mode).unwrap().ha, 1.0);
        }
    }

    #[test]
    fn adjusted_rand_big_cluster_vs_singletons() {
        let n = 6u64;
        let forecast = vec![0usize; n as usize];
        let observed: Vec<usize> = (0..n as usize).collect();
        let t = contingency(&forecast, &observed).unwrap();
        let a = adjusted_rand(&t, ExpectationMode::Standard).unwrap();
        assert_eq!(a.r, 0.0);
        assert_eq!(a.observed_pairs, 0.0);
        assert_eq!(a.forecast_pairs, 15.0);
        assert_eq!(a.ha, 0.0);
    }

    #[test]
    fn adjusted_rand_paper_mode_is_quarter_expectation() {
        let t = table(&[&[3, 1], &[2, 4]]);
        let s = adjusted_rand(&t, ExpectationMode::Standard).unwrap();
        let p = adjusted_rand(&t, ExpectationMode::Paper).unwrap();
        assert!((s.expected - 4.0 * p.expected).abs() < 1e-12);
        // Hand values: r = 3 + 0 + 1 + 6 = 10; |N(F)| = 6 + 15 = 21; |N(O)| = 10 + 10 = 20.
        assert_eq!((s.r, s.forecast_pairs, s.observed_pairs), (10.0, 21.0, 20.0));
        assert!((s.expected - 420.0 / 45.0).abs() < 1e-12);
        assert!(adjusted_rand(&table(&[&[4]]), ExpectationMode::Standard).is_err());
    }

    #[test]
    fn matching_simple_tables() {
        assert_eq!(match_labels(&table(&[&[0, 5], &[7, 0]])).unwrap(), vec![1, 0]);
        assert_eq!(match_labels(&table(&[&[5, 0], &[0, 7]])).unwrap(), vec![0, 1]);
        // All permutations tie; the lexicographically first wins.
        assert_eq!(match_labels(&table(&[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]])).unwrap(), vec![0, 1, 2]);
        assert!(match_labels(&table(&[&[1, 2, 3], &[4, 5, 6]])).is_err());
    }

    #[test]
    fn compaction() {
        let (m, keys) = compact_labels(&[7, -1, 7, 3]);
        assert_eq!(m, vec![2, 0, 2, 1]);
        assert_eq!(keys, vec![-1, 3, 7]);
    }

    #[test]
    fn permuted_labels_score_perfectly_after_matching() {
        let t = contingency(&[2, 2, 0, 1, 1, 1], &[0, 0, 1, 2, 2, 2]).unwrap();
        let s = agreement_scores(&t, ExpectationMode::Standard).unwrap();
        assert_eq!((s.nss, s.hss, s.hk, s.ha), (1.0, 1.0, 1.0, 1.0));
    }
}
