//! Delaunay connectivity of the sample and connected components of its
//! induced subgraphs.
//!
//! The triangulation is built by a lexicographic sweep (every new point is a
//! hull vertex of the points seen so far and is fanned to its visible hull
//! edges) followed by Lawson edge flips until every interior edge is locally
//! Delaunay. Both stages rely only on the exact-sign predicates in
//! [`predicates`], so the result is a valid Delaunay triangulation even for
//! near-degenerate input. Cocircular quadruples are left unflipped; any of
//! the valid tessellations may be returned.
//!
//! Duplicate coordinates collapse onto one vertex. Every event maps to a
//! vertex through [`TriangulationGraph::vertex_of`].

pub mod predicates;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use predicates::{incircle, orient2d, Point};

/// Delaunay edges over the distinct sample locations.
#[derive(Debug, Clone)]
pub struct TriangulationGraph {
    event_count: usize,
    vertex_of: Vec<usize>,
    representative: Vec<usize>,
    points: Vec<Point>,
    edges: Vec<(usize, usize)>,
    triangles: Vec<[usize; 3]>,
    adjacency: Vec<Vec<usize>>,
}

impl TriangulationGraph {
    /// Number of input events (duplicates included).
    pub fn event_count(&self) -> usize {
        self.event_count
    }

    /// Number of distinct locations.
    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    pub fn vertex_of(&self, event: usize) -> usize {
        self.vertex_of[event]
    }

    /// Lowest event index located at `vertex`.
    pub fn representative(&self, vertex: usize) -> usize {
        self.representative[vertex]
    }

    pub fn point(&self, vertex: usize) -> Point {
        self.points[vertex]
    }

    /// Sorted `(u, v)` vertex pairs with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Counter-clockwise vertex triples.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        &self.adjacency[vertex]
    }

    /// Writes `i,j` event-index pairs (vertex representatives), one per line.
    pub fn write_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j")?;
        for &(u, v) in &self.edges {
            writeln!(w, "{},{}", self.representative[u], self.representative[v])?;
        }
        Ok(())
    }
}

/// Triangulates `points` (`(x, y)` per event).
pub fn delaunay<T: Scalar>(points: &[[T; 2]]) -> Result<TriangulationGraph> {
    let n = points.len();
    if n < 3 {
        return Err(Error::TooFew {
            what: "points for a triangulation",
            required: 3,
            found: n,
        });
    }
    let coords: Vec<Point> = points.iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect();
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex(coords[a], coords[b]).then(a.cmp(&b)));
    let mut vertex_of = vec![0; n];
    let mut representative = Vec::new();
    let mut unique: Vec<Point> = Vec::new();
    for &i in &order {
        if unique.last().is_none_or(|&last| lex(last, coords[i]) != Ordering::Equal) {
            unique.push(coords[i]);
            representative.push(i);
        }
        vertex_of[i] = unique.len() - 1;
    }

    let triangles = triangulate(&unique)?;
    let mut edges: Vec<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut adjacency = vec![Vec::new(); unique.len()];
    for &(u, v) in &edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    adjacency.iter_mut().for_each(|a| a.sort_unstable());
    let mut triangles = triangles;
    triangles.sort_unstable();

    Ok(TriangulationGraph {
        event_count: n,
        vertex_of,
        representative,
        points: unique,
        edges,
        triangles,
        adjacency,
    })
}

fn lex(a: Point, b: Point) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

/// Delaunay triangles of distinct, lexicographically sorted points.
fn triangulate(pts: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    let first_off_line = (2..n)
        .find(|&k| orient2d(pts[0], pts[1], pts[k]) != Ordering::Equal)
        .ok_or_else(|| {
            Error::Degenerate(format!("all {n} distinct points are collinear"))
        })?;

    // Directed edge (u, v) -> w for every counter-clockwise triangle (u, v, w).
    let mut opposite: HashMap<(usize, usize), usize> = HashMap::with_capacity(6 * n);
    let add = |map: &mut HashMap<(usize, usize), usize>, t: [usize; 3]| {
        map.insert((t[0], t[1]), t[2]);
        map.insert((t[1], t[2]), t[0]);
        map.insert((t[2], t[0]), t[1]);
    };

    let apex = first_off_line;
    let mut hull: Vec<usize>;
    if orient2d(pts[0], pts[apex - 1], pts[apex]) == Ordering::Greater {
        for i in 0..apex - 1 {
            add(&mut opposite, [i, i + 1, apex]);
        }
        hull = (0..=apex).collect();
    } else {
        for i in 0..apex - 1 {
            add(&mut opposite, [i + 1, i, apex]);
        }
        hull = vec![0, apex];
        hull.extend((1..apex).rev());
    }

    for q in apex + 1..n {
        let h = hull.len();
        let visible: Vec<bool> = (0..h)
            .map(|i| orient2d(pts[hull[i]], pts[hull[(i + 1) % h]], pts[q]) == Ordering::Less)
            .collect();
        let start = (0..h)
            .find(|&i| visible[i] && !visible[(i + h - 1) % h])
            .expect("a point outside the hull sees some edge");
        let mut k = start;
        while visible[k] {
            let (u, v) = (hull[k], hull[(k + 1) % h]);
            add(&mut opposite, [u, q, v]);
            k = (k + 1) % h;
        }
        // Hull vertices strictly between start and k are now interior.
        let mut next = Vec::with_capacity(h + 1);
        let mut i = k;
        loop {
            next.push(hull[i]);
            if i == start {
                break;
            }
            i = (i + 1) % h;
        }
        next.push(q);
        hull = next;
    }

    let mut stack: Vec<(usize, usize)> = opposite.keys().copied().filter(|&(a, b)| a < b).collect();
    stack.sort_unstable();
    while let Some((a, b)) = stack.pop() {
        let (Some(&c), Some(&d)) = (opposite.get(&(a, b)), opposite.get(&(b, a))) else {
            continue;
        };
        if incircle(pts[a], pts[b], pts[c], pts[d]) != Ordering::Greater {
            continue;
        }
        opposite.remove(&(a, b));
        opposite.remove(&(b, a));
        add(&mut opposite, [a, d, c]);
        add(&mut opposite, [d, b, c]);
        stack.extend([(a, d), (d, b), (b, c), (c, a)]);
    }

    let mut triangles: Vec<[usize; 3]> = opposite
        .iter()
        .filter(|(&(u, v), &w)| u < v && u < w)
        .map(|(&(u, v), &w)| [u, v, w])
        .collect();
    triangles.sort_unstable();
    Ok(triangles)
}

/// Connected components of the subgraph induced by a set of events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// Sorted, distinct event indices.
    pub members: Vec<usize>,
    /// Component of each member, numbered by first appearance in `members`.
    pub labels: Vec<usize>,
    pub component_count: usize,
}

impl ComponentLabeling {
    /// Members grouped by component, in component order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.component_count];
        for (&m, &l) in self.members.iter().zip(&self.labels) {
            groups[l].push(m);
        }
        groups
    }
}

/// Labels the components formed by `subset` when only edges with both
/// endpoints in the subset may be used. Events sharing a location are always
/// connected to each other.
pub fn connected_components(graph: &TriangulationGraph, subset: &[usize]) -> Result<ComponentLabeling> {
    let mut members = subset.to_vec();
    members.sort_unstable();
    members.dedup();
    if let Some(&bad) = members.iter().find(|&&m| m >= graph.event_count) {
        return Err(Error::InvalidInput(format!(
            "event index {bad} outside 0..{}",
            graph.event_count
        )));
    }
    const NONE: usize = usize::MAX;
    const PENDING: usize = usize::MAX - 1;
    let mut component = vec![NONE; graph.vertex_count()];
    for &m in &members {
        component[graph.vertex_of[m]] = PENDING;
    }
    let mut labels = Vec::with_capacity(members.len());
    let mut count = 0;
    let mut queue = Vec::new();
    for &m in &members {
        let root = graph.vertex_of[m];
        if component[root] == PENDING {
            component[root] = count;
            queue.push(root);
            while let Some(v) = queue.pop() {
                for &w in &graph.adjacency[v] {
                    if component[w] == PENDING {
                        component[w] = count;
                        queue.push(w);
                    }
                }
            }
            count += 1;
        }
        labels.push(component[root]);
    }
    Ok(ComponentLabeling {
        members,
        labels,
        component_count: count,
    })
}
