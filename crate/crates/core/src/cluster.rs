//! Level-set clustering: sweep density thresholds over the sample, track the
//! connected components of each high-density set on the Delaunay graph, read
//! the modes off the resulting tree and allocate the remaining points by
//! likelihood ratio.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kde::{normal_reference_bandwidth, Bandwidths, DensityModel};
use crate::scalar::{LogSumAcc, Scalar};
use crate::topology::{connected_components, delaunay, ComponentLabeling, TriangulationGraph};

/// Density thresholds, strictly increasing and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid<T> {
    levels: Vec<T>,
}

impl<T: Scalar> AlphaGrid<T> {
    pub fn new(levels: Vec<T>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("empty alpha grid".into()));
        }
        if levels.iter().any(|a| !(a.is_finite() && *a >= T::zero())) {
            return Err(Error::InvalidInput("alpha levels must be finite and non-negative".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("alpha levels must be strictly increasing".into()));
        }
        Ok(Self { levels })
    }

    /// Quantiles of `densities` at probabilities `k / (count + 1)`,
    /// `k = 1..=count` (linear interpolation between order statistics),
    /// with repeated values dropped.
    pub fn quantiles(densities: &[T], count: usize) -> Result<Self> {
        if densities.is_empty() || count == 0 {
            return Err(Error::InvalidInput("quantile grid needs densities and a positive count".into()));
        }
        let mut sorted = densities.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite density"));
        let n = sorted.len();
        let mut levels: Vec<T> = (1..=count)
            .map(|k| {
                let pos = (k as f64 / (count + 1) as f64) * (n - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                let frac = T::of(pos - lo as f64);
                sorted[lo] + (sorted[hi] - sorted[lo]) * frac
            })
            .collect();
        levels.dedup();
        Self::new(levels)
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModePoint<T> {
    pub alpha: T,
    /// Fraction of the sample with density at least `alpha`.
    pub p: f64,
    /// Number of connected components at this level.
    pub m: usize,
}

/// Empirical mode function, one point per threshold, ordered by increasing
/// `alpha` (so `p` is non-increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFunction<T> {
    pub points: Vec<ModePoint<T>>,
}

impl<T: Scalar> ModeFunction<T> {
    /// Total positive increments of `m(p)` with `m(0) = m(1) = 0`.
    pub fn mode_count(&self) -> usize {
        let mut previous = 0usize;
        let mut total = 0;
        for point in self.points.iter().rev() {
            total += point.m.saturating_sub(previous);
            previous = point.m;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<T> {
    pub id: usize,
    /// Component at the next lower threshold containing this one.
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Index into the threshold list (0 = lowest `alpha`).
    pub level: usize,
    pub alpha: T,
    /// Sorted event indices.
    pub members: Vec<usize>,
}

/// Components of every level set, linked by containment across adjacent
/// thresholds. Roots sit at the lowest threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree<T> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> ClusterTree<T> {
    /// Nodes without children, one per detected mode, in node order.
    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.children.is_empty()).map(|n| n.id).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_empty()).count()
    }
}

struct Level<T> {
    alpha: T,
    /// Size of the whole level set, counted components or not.
    size: usize,
    /// Components with at least the minimum number of members.
    labeling: ComponentLabeling,
}

const UNLABELED: u32 = u32::MAX;

fn label_lookup(labeling: &ComponentLabeling, n: usize) -> Vec<u32> {
    let mut out = vec![UNLABELED; n];
    for (&m, &l) in labeling.members.iter().zip(&labeling.labels) {
        out[m] = l as u32;
    }
    out
}

fn level_set<T: Scalar>(densities: &[T], graph: &TriangulationGraph, alpha: T, min_size: usize) -> Level<T> {
    let members: Vec<usize> = (0..densities.len()).filter(|&i| densities[i] >= alpha).collect();
    let size = members.len();
    let labeling = significant(connected_components(graph, &members).expect("indices in range"), min_size);
    Level { alpha, size, labeling }
}

/// Drops components with fewer than `min_size` members, renumbering the rest.
fn significant(labeling: ComponentLabeling, min_size: usize) -> ComponentLabeling {
    let mut sizes = vec![0usize; labeling.component_count];
    labeling.labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().all(|&s| s >= min_size) {
        return labeling;
    }
    let mut renumber = vec![usize::MAX; sizes.len()];
    let mut count = 0;
    let (mut members, mut labels) = (Vec::new(), Vec::new());
    for (&m, &l) in labeling.members.iter().zip(&labeling.labels) {
        if sizes[l] < min_size {
            continue;
        }
        if renumber[l] == usize::MAX {
            renumber[l] = count;
            count += 1;
        }
        members.push(m);
        labels.push(renumber[l]);
    }
    ComponentLabeling { members, labels, component_count: count }
}

/// `(births, merges)` when stepping from `upper` (higher alpha) down to `lower`.
fn step_events(lower: &ComponentLabeling, upper: &ComponentLabeling, n: usize) -> (usize, usize) {
    let lookup = label_lookup(lower, n);
    let mut children = vec![0usize; lower.component_count];
    for group in upper.groups() {
        children[lookup[group[0]] as usize] += 1;
    }
    let births = children.iter().filter(|&&c| c == 0).count();
    let merges = children.iter().map(|&c| c.saturating_sub(1)).sum();
    (births, merges)
}

/// Sweeps the thresholds, linking components into a tree.
///
/// Only components with at least `min_size` members count: smaller ones
/// are isolated high-density points rather than modes. The size is lowered
/// to the largest component of the lowest level set when needed, so the
/// tree is never empty.
///
/// A step between adjacent thresholds in which a component is born while
/// others merge would hide the birth from `m(p)`. Such steps are refined by
/// inserting sample density values lying strictly between the two
/// thresholds until every step is clean or no sample value remains in the
/// gap. After refinement the positive increments of `m(p)` equal the number
/// of tree leaves.
pub fn build_mode_function<T: Scalar>(
    densities: &[T],
    graph: &TriangulationGraph,
    grid: &AlphaGrid<T>,
    min_size: usize,
) -> Result<(ModeFunction<T>, ClusterTree<T>)> {
    let n = densities.len();
    if n != graph.event_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.event_count(),
            found: n,
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("no densities".into()));
    }
    let max = densities.iter().copied().fold(T::neg_infinity(), T::max);
    let mut alphas = grid.levels().to_vec();
    if alphas.iter().any(|&a| a > max) {
        log::warn!("alpha grid exceeds the maximum sample density {max}; clamping");
        alphas.iter_mut().for_each(|a| *a = a.min(max));
        alphas.dedup();
    }

    let lowest = level_set(densities, graph, alphas[0], 1);
    let largest = lowest.labeling.groups().iter().map(Vec::len).max().unwrap_or(1);
    let min_size = min_size.clamp(1, largest);
    let mut levels: Vec<Level<T>> = alphas
        .par_iter()
        .map(|&a| level_set(densities, graph, a, min_size))
        .collect();

    let mut sorted_densities = densities.to_vec();
    sorted_densities.sort_by(|a, b| a.partial_cmp(b).expect("finite density"));
    sorted_densities.dedup();
    loop {
        let inserts: Vec<T> = levels
            .par_windows(2)
            .filter_map(|w| {
                let (births, merges) = step_events(&w[0].labeling, &w[1].labeling, n);
                if births == 0 || merges == 0 {
                    return None;
                }
                let lo = sorted_densities.partition_point(|&d| d <= w[0].alpha);
                let hi = sorted_densities.partition_point(|&d| d < w[1].alpha);
                if lo >= hi {
                    log::warn!(
                        "tied densities between {} and {}: a birth and a merge share one step",
                        w[0].alpha,
                        w[1].alpha
                    );
                    return None;
                }
                Some(sorted_densities[lo + (hi - lo) / 2])
            })
            .collect();
        if inserts.is_empty() {
            break;
        }
        let fresh: Vec<Level<T>> = inserts
            .par_iter()
            .map(|&a| level_set(densities, graph, a, min_size))
            .collect();
        levels.extend(fresh);
        levels.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).expect("finite alpha"));
    }

    let nf = n as f64;
    let mode_function = ModeFunction {
        points: levels
            .iter()
            .map(|l| ModePoint {
                alpha: l.alpha,
                p: l.size as f64 / nf,
                m: l.labeling.component_count,
            })
            .collect(),
    };

    let mut nodes: Vec<TreeNode<T>> = Vec::new();
    let mut previous: Option<(usize, Vec<u32>)> = None;
    for (k, level) in levels.iter().enumerate() {
        let first_id = nodes.len();
        for group in level.labeling.groups() {
            let id = nodes.len();
            let parent = previous
                .as_ref()
                .map(|(base, lookup)| base + lookup[group[0]] as usize);
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            nodes.push(TreeNode {
                id,
                parent,
                children: Vec::new(),
                level: k,
                alpha: level.alpha,
                members: group,
            });
        }
        previous = Some((first_id, label_lookup(&level.labeling, n)));
    }
    Ok((mode_function, ClusterTree { nodes }))
}

/// Points attached to one mode before low-density points are allocated.
#[derive(Debug, Clone, PartialEq)]
pub struct Core<T> {
    /// Sorted event indices.
    pub members: Vec<usize>,
    /// Leaf node the core descends from.
    pub leaf: usize,
    /// Threshold at which the core was taken.
    pub alpha: T,
}

/// One core per leaf: the largest component on the leaf's branch, i.e. the
/// last component before the branch merges with another one (or the
/// lowest-threshold component if it never merges).
pub fn extract_cores<T: Scalar>(tree: &ClusterTree<T>) -> Vec<Core<T>> {
    tree.leaves()
        .into_iter()
        .map(|leaf| {
            let mut node = &tree.nodes[leaf];
            while let Some(p) = node.parent {
                let parent = &tree.nodes[p];
                if parent.children.len() != 1 {
                    break;
                }
                node = parent;
            }
            Core {
                members: node.members.clone(),
                leaf,
                alpha: node.alpha,
            }
        })
        .collect()
}

/// When the per-cluster densities are re-estimated during allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum AllocationPolicy {
    /// Densities from the initial cores only.
    Static,
    /// Re-estimate after every allocated point, highest density first.
    Sequential,
    /// Re-estimate after each tenth of the points, highest density first.
    #[default]
    Batch,
}

impl std::str::FromStr for AllocationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Self::Static),
            "seq" | "sequential" => Ok(Self::Sequential),
            "batch" => Ok(Self::Batch),
            other => Err(Error::InvalidInput(format!("unknown allocation policy {other:?}"))),
        }
    }
}

/// Final clustering of the sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Cluster of each event, `0..cluster_count`.
    pub labels: Vec<usize>,
    /// Whether the event belonged to a cluster core.
    pub core: Vec<bool>,
    pub cluster_count: usize,
    /// Events whose allocation was decided by a tie (lowest cluster won).
    pub ties: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count];
        self.labels.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }
}

/// Index of the best score; exact ties go to the lowest index.
fn best<T: Scalar>(scores: &[T]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        match s.partial_cmp(&scores[best]) {
            Some(Ordering::Greater) => (best, tied) = (j, false),
            Some(Ordering::Equal) => tied = true,
            _ => {}
        }
    }
    (best, tied)
}

fn exponent<T: Scalar>(points: ArrayView2<T>, h: &[T], a: usize, b: usize) -> T {
    let mut acc = T::zero();
    for (j, &hj) in h.iter().enumerate() {
        let z = (points[[a, j]] - points[[b, j]]) / hj;
        acc = acc + z * z;
    }
    -T::of(0.5) * acc
}

/// Assigns every non-core point to the cluster whose core density is
/// highest at that point, which maximises `f_j(x) / max_{k != j} f_k(x)`.
///
/// `densities` orders the points for the updating policies (highest first,
/// ties by index).
pub fn allocate<T: Scalar>(
    cores: &[Vec<usize>],
    points: ArrayView2<T>,
    bandwidths: &Bandwidths<T>,
    policy: AllocationPolicy,
    densities: &[T],
) -> Result<Partition> {
    let n = points.nrows();
    if bandwidths.dim() != points.ncols() {
        return Err(Error::DimensionMismatch {
            expected: points.ncols(),
            found: bandwidths.dim(),
        });
    }
    if densities.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: densities.len() });
    }
    if cores.is_empty() {
        return Err(Error::InvalidInput("no cluster cores".into()));
    }
    let m = cores.len();
    let mut labels = vec![usize::MAX; n];
    let mut core = vec![false; n];
    for (j, c) in cores.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::InvalidInput(format!("cluster core {j} is empty")));
        }
        for &i in c {
            if i >= n {
                return Err(Error::InvalidInput(format!("core member {i} out of range")));
            }
            if core[i] {
                return Err(Error::InvalidInput(format!("event {i} lies in two cores")));
            }
            core[i] = true;
            labels[i] = j;
        }
    }

    let mut pending: Vec<usize> = (0..n).filter(|&i| !core[i]).collect();
    pending.sort_by(|&a, &b| {
        densities[b]
            .partial_cmp(&densities[a])
            .expect("finite density")
            .then(a.cmp(&b))
    });
    let h = bandwidths.as_slice();
    let mut counts: Vec<usize> = cores.iter().map(Vec::len).collect();

    // acc[k][j]: log-sum of kernel exponents between pending[k] and cluster j.
    let mut acc: Vec<Vec<LogSumAcc<T>>> = pending
        .par_iter()
        .map(|&u| {
            cores
                .iter()
                .map(|c| {
                    let mut a = LogSumAcc::default();
                    c.iter().for_each(|&v| a.push(exponent(points, h, u, v)));
                    a
                })
                .collect()
        })
        .collect();

    let batch = match policy {
        AllocationPolicy::Static => pending.len().max(1),
        AllocationPolicy::Sequential => 1,
        AllocationPolicy::Batch => pending.len().div_ceil(10).max(1),
    };
    let mut ties = Vec::new();
    let mut start = 0;
    while start < pending.len() {
        let end = (start + batch).min(pending.len());
        let decided: Vec<(usize, bool)> = acc[start..end]
            .iter()
            .map(|row| {
                let scores: Vec<T> = row
                    .iter()
                    .zip(&counts)
                    .map(|(a, &c)| a.value() - T::of_usize(c).ln())
                    .collect();
                best(&scores)
            })
            .collect();
        for (k, &(j, tied)) in decided.iter().enumerate() {
            let u = pending[start + k];
            labels[u] = j;
            if tied {
                log::debug!("allocation tie for event {u}; assigned to cluster {j}");
                ties.push(u);
            }
            counts[j] += 1;
        }
        if policy != AllocationPolicy::Static && end < pending.len() {
            let added: Vec<(usize, usize)> = (start..end).map(|k| (pending[k], decided[k - start].0)).collect();
            let rest = &pending[end..];
            acc[end..].par_iter_mut().zip(rest.par_iter()).for_each(|(row, &u)| {
                for &(v, j) in &added {
                    row[j].push(exponent(points, h, u, v));
                }
            });
        }
        start = end;
    }
    ties.sort_unstable();
    Ok(Partition {
        labels,
        core,
        cluster_count: m,
        ties,
    })
}

/// Options for [`pdf_cluster`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterOptions {
    /// Number of density quantiles used as thresholds.
    pub alpha_levels: usize,
    pub policy: AllocationPolicy,
    /// Cores with fewer members are dropped and their points reallocated.
    pub min_core: usize,
    /// Multiplier applied to the normal-reference bandwidths.
    pub bandwidth_scale: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            alpha_levels: 99,
            policy: AllocationPolicy::Batch,
            min_core: 3,
            bandwidth_scale: 1.0,
        }
    }
}

/// Everything produced by a clustering run.
#[derive(Debug, Clone)]
pub struct ClusterResult<T> {
    pub partition: Partition,
    pub tree: ClusterTree<T>,
    pub mode_function: ModeFunction<T>,
    pub model: DensityModel<T>,
    /// Density of each event under `model`.
    pub densities: Vec<T>,
    pub log_densities: Vec<T>,
    /// Retained cores, indexed by cluster.
    pub cores: Vec<Core<T>>,
    pub graph: TriangulationGraph,
}

/// Runs the whole procedure on an `n x 2` matrix of locations.
pub fn pdf_cluster<T: Scalar>(points: ArrayView2<T>, options: &ClusterOptions) -> Result<ClusterResult<T>> {
    let n = points.nrows();
    if points.ncols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: points.ncols() });
    }
    if n < 3 {
        return Err(Error::TooFew { what: "events", required: 3, found: n });
    }
    if !(options.bandwidth_scale.is_finite() && options.bandwidth_scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth scale {} must be positive",
            options.bandwidth_scale
        )));
    }
    let bandwidths = normal_reference_bandwidth(points)?.scaled(T::of(options.bandwidth_scale))?;
    let model = DensityModel::new(points.to_owned(), bandwidths.clone())?;
    let surface = model.evaluate(points)?;
    let (densities, log_densities) = (surface.values, surface.log_values);

    let xy: Vec<[T; 2]> = points.outer_iter().map(|r| [r[0], r[1]]).collect();
    let graph = delaunay(&xy)?;
    let grid = AlphaGrid::quantiles(&densities, options.alpha_levels)?;
    let (mode_function, tree) = build_mode_function(&densities, &graph, &grid, options.min_core)?;

    let peak = |c: &Core<T>| c.members.iter().map(|&i| densities[i]).fold(T::neg_infinity(), T::max);
    let mut cores = extract_cores(&tree);
    cores.sort_by(|a, b| {
        peak(b)
            .partial_cmp(&peak(a))
            .expect("finite density")
            .then(a.members[0].cmp(&b.members[0]))
    });
    let (kept, dropped): (Vec<_>, Vec<_>) = cores.into_iter().partition(|c| c.members.len() >= options.min_core);
    let cores = if kept.is_empty() {
        let largest = dropped
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.members.len().cmp(&b.members.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("tree has at least one leaf");
        log::warn!("every core is below the minimum size {}; keeping the largest", options.min_core);
        vec![dropped[largest].clone()]
    } else {
        if !dropped.is_empty() {
            log::info!("dropped {} cores smaller than {}", dropped.len(), options.min_core);
        }
        kept
    };

    let member_sets: Vec<Vec<usize>> = cores.iter().map(|c| c.members.clone()).collect();
    let partition = allocate(&member_sets, points, &bandwidths, options.policy, &densities)?;
    Ok(ClusterResult {
        partition,
        tree,
        mode_function,
        model,
        densities,
        log_densities,
        cores,
        graph,
    })
}

/// Convenience wrapper: clusters `(lon, lat)` pairs.
pub fn pdf_cluster_locations<T: Scalar>(locations: &[[T; 2]], options: &ClusterOptions) -> Result<ClusterResult<T>> {
    let flat: Vec<T> = locations.iter().flatten().copied().collect();
    let points = Array2::from_shape_vec((locations.len(), 2), flat).expect("n x 2 shape");
    pdf_cluster(points.view(), options)
}

/// Per-cluster density estimates sharing `bandwidths`.
pub fn cluster_models<T: Scalar>(
    points: ArrayView2<T>,
    groups: &[Vec<usize>],
    bandwidths: &Bandwidths<T>,
) -> Result<Vec<DensityModel<T>>> {
    groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                Err(Error::InvalidInput("empty cluster".into()))
            } else {
                DensityModel::new(points.select(Axis(0), g), bandwidths.clone())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn square_graph() -> TriangulationGraph {
        delaunay(&[[0.0f64, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [5.0, 0.5]]).unwrap()
    }

    #[test]
    fn quantile_grid_is_strictly_increasing() {
        let d: Vec<f64> = (0..200).map(|i| (i % 37) as f64).collect();
        let g = AlphaGrid::quantiles(&d, 99).unwrap();
        assert!(g.levels().windows(2).all(|w| w[0] < w[1]));
        assert!(AlphaGrid::<f64>::new(vec![]).is_err());
        assert!(AlphaGrid::new(vec![0.2, 0.1]).is_err());
    }

    #[test]
    fn zero_level_gives_one_component() {
        let g = square_graph();
        let d = [0.3, 0.1, 0.2, 0.05, 0.01];
        let (mf, tree) = build_mode_function(&d, &g, &AlphaGrid::new(vec![0.0]).unwrap(), 1).unwrap();
        assert_eq!(mf.points.len(), 1);
        assert_eq!(mf.points[0].m, 1);
        assert_eq!(mf.points[0].p, 1.0);
        assert_eq!(mf.mode_count(), 1);
        assert_eq!(tree.leaf_count(), 1);
        let cores = extract_cores(&tree);
        assert_eq!(cores[0].members, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn grid_above_maximum_is_clamped() {
        let g = square_graph();
        let d = [0.3, 0.1, 0.2, 0.05, 0.01];
        let (mf, _) = build_mode_function(&d, &g, &AlphaGrid::new(vec![0.0, 0.5, 0.9]).unwrap(), 1).unwrap();
        assert_eq!(mf.points.last().unwrap().alpha, 0.3);
        assert_eq!(mf.points.last().unwrap().m, 1);
    }

    #[test]
    fn mode_count_counts_positive_increments() {
        let pts = |ms: &[usize]| ModeFunction {
            points: ms.iter().enumerate().map(|(k, &m)| ModePoint { alpha: k as f64, p: 0.0, m }).collect(),
        };
        // From high alpha to low: 1, 2, 2, 1, 3, 1 -> increments 1 + 1 + 2.
        assert_eq!(pts(&[1, 3, 1, 2, 2, 1]).mode_count(), 4);
        assert_eq!(pts(&[1, 1, 1]).mode_count(), 1);
    }

    #[test]
    fn two_peaks_on_a_path() {
        // Path 0-1-2-3-4 along a line perturbed into a thin strip.
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, if i % 2 == 0 { 0.0 } else { 0.1 }]).collect();
        let g = delaunay(&pts).unwrap();
        let d = [0.9, 0.5, 0.1, 0.6, 0.8];
        let grid = AlphaGrid::new(vec![0.05, 0.3, 0.55, 0.7]).unwrap();
        let (mf, tree) = build_mode_function(&d, &g, &grid, 1).unwrap();
        assert_eq!(mf.mode_count(), tree.leaf_count());
        let cores = extract_cores(&tree);
        assert_eq!(cores.len(), tree.leaf_count());
        for (a, b) in cores.iter().zip(cores.iter().skip(1)) {
            assert!(a.members.iter().all(|m| !b.members.contains(m)));
        }
    }

    #[test]
    fn coincident_point_goes_to_its_core() {
        let points = array![[0.0f64, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0], [0.0, 0.0]];
        let h = Bandwidths::new(vec![1.0, 1.0]).unwrap();
        let d = vec![1.0; 5];
        for policy in [AllocationPolicy::Static, AllocationPolicy::Sequential, AllocationPolicy::Batch] {
            let p = allocate(&[vec![0, 1], vec![2, 3]], points.view(), &h, policy, &d).unwrap();
            assert_eq!(p.labels, vec![0, 0, 1, 1, 0]);
            assert_eq!(p.core, vec![true, true, true, true, false]);
        }
    }

    #[test]
    fn single_core_takes_everything() {
        let points = array![[0.0f64, 0.0], [3.0, 1.0], [-2.0, 4.0]];
        let h = Bandwidths::new(vec![1.0, 1.0]).unwrap();
        let p = allocate(&[vec![1]], points.view(), &h, AllocationPolicy::Sequential, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(p.labels, vec![0, 0, 0]);
        assert_eq!(p.cluster_count, 1);
    }

    #[test]
    fn allocation_errors_and_ties() {
        let points = array![[0.0f64, 0.0], [2.0, 0.0], [1.0, 0.0]];
        let h = Bandwidths::new(vec![1.0, 1.0]).unwrap();
        let d = [0.1, 0.1, 0.1];
        assert!(allocate(&[vec![0], vec![]], points.view(), &h, AllocationPolicy::Static, &d).is_err());
        assert!(allocate(&[vec![0], vec![0]], points.view(), &h, AllocationPolicy::Static, &d).is_err());
        let p = allocate(&[vec![1], vec![0]], points.view(), &h, AllocationPolicy::Static, &d).unwrap();
        assert_eq!(p.labels[2], 0);
        assert_eq!(p.ties, vec![2]);
    }

    #[test]
    fn too_few_events() {
        let err = pdf_cluster_locations(&[[0.0f64, 0.0], [1.0, 1.0]], &ClusterOptions::default());
        assert!(matches!(err, Err(Error::TooFew { required: 3, found: 2, .. })));
    }

    #[test]
    fn policy_names() {
        assert_eq!("seq".parse::<AllocationPolicy>().unwrap(), AllocationPolicy::Sequential);
        assert_eq!("batch".parse::<AllocationPolicy>().unwrap(), AllocationPolicy::Batch);
        assert!("other".parse::<AllocationPolicy>().is_err());
    }
}
