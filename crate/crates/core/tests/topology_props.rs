use std::collections::HashMap;

use proptest::prelude::*;

use npcluster::topology::{connected_components, delaunay, TriangulationGraph};

/// Integer coordinates keep the oracle arithmetic exact and produce plenty
/// of duplicates, collinear runs and cocircular quadruples.
fn lattice_points() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-12i32..12, -12i32..12), 3..60)
        .prop_map(|v| v.into_iter().map(|(x, y)| [f64::from(x), f64::from(y)]).collect())
}

fn orient(a: [i128; 2], b: [i128; 2], c: [i128; 2]) -> i128 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn incircle(a: [i128; 2], b: [i128; 2], c: [i128; 2], d: [i128; 2]) -> i128 {
    let row = |p: [i128; 2]| {
        let (x, y) = (p[0] - d[0], p[1] - d[1]);
        (x, y, x * x + y * y)
    };
    let (ax, ay, a2) = row(a);
    let (bx, by, b2) = row(b);
    let (cx, cy, c2) = row(c);
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

fn exact(graph: &TriangulationGraph, v: usize) -> [i128; 2] {
    let p = graph.point(v);
    [p[0] as i128, p[1] as i128]
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Component partition of `subset` computed by union-find over the edge list.
fn oracle_components(graph: &TriangulationGraph, subset: &[bool]) -> Vec<Vec<usize>> {
    let n = graph.event_count();
    let mut uf = UnionFind((0..n).collect());
    let mut at_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in (0..n).filter(|&e| subset[e]) {
        at_vertex.entry(graph.vertex_of(e)).or_default().push(e);
    }
    for events in at_vertex.values() {
        events.windows(2).for_each(|w| uf.union(w[0], w[1]));
    }
    for &(u, v) in graph.edges() {
        if let (Some(a), Some(b)) = (at_vertex.get(&u), at_vertex.get(&v)) {
            uf.union(a[0], b[0]);
        }
    }
    canonical((0..n).filter(|&e| subset[e]).map(|e| (e, uf.find(e))))
}

fn canonical(pairs: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (e, root) in pairs {
        groups.entry(root).or_default().push(e);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.iter_mut().for_each(|g| g.sort_unstable());
    out.sort();
    out
}

fn library_components(graph: &TriangulationGraph, subset: &[bool]) -> Vec<Vec<usize>> {
    let members: Vec<usize> = (0..subset.len()).filter(|&e| subset[e]).collect();
    let labeling = connected_components(graph, &members).unwrap();
    canonical(labeling.members.iter().copied().zip(labeling.labels.iter().copied()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn circumcircles_are_empty(points in lattice_points()) {
        let Ok(graph) = delaunay(&points) else {
            return Ok(());
        };
        for t in graph.triangles() {
            let [a, b, c] = t.map(|v| exact(&graph, v));
            let o = orient(a, b, c);
            prop_assert!(o != 0, "degenerate triangle {t:?}");
            for v in 0..graph.vertex_count() {
                if t.contains(&v) {
                    continue;
                }
                let inside = incircle(a, b, c, exact(&graph, v)) * o.signum();
                prop_assert!(inside <= 0, "vertex {v} inside circumcircle of {t:?}");
            }
        }
    }

    #[test]
    fn components_match_union_find(points in lattice_points(), mask in prop::collection::vec(any::<bool>(), 60)) {
        let Ok(graph) = delaunay(&points) else {
            return Ok(());
        };
        let subset = &mask[..points.len()];
        prop_assert_eq!(library_components(&graph, subset), oracle_components(&graph, subset));
    }

    #[test]
    fn enlarging_the_subset_never_disconnects(
        points in lattice_points(),
        small in prop::collection::vec(any::<bool>(), 60),
        extra in prop::collection::vec(any::<bool>(), 60),
    ) {
        let Ok(graph) = delaunay(&points) else {
            return Ok(());
        };
        let n = points.len();
        let a: Vec<bool> = small[..n].to_vec();
        let b: Vec<bool> = (0..n).map(|i| small[i] || extra[i]).collect();
        let big = library_components(&graph, &b);
        let home = |e: usize| big.iter().position(|g| g.contains(&e));
        for group in library_components(&graph, &a) {
            let first = home(group[0]);
            prop_assert!(first.is_some());
            prop_assert!(group.iter().all(|&e| home(e) == first));
        }
    }
}
