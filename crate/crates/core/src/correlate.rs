//! Slip/aftershock correlation workflow: gridded slip input, bilinear
//! sampling, log transforms, masked evaluation grids, distances to the
//! trench and per-cluster summaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kde::{lattice, DensityModel};
use crate::scalar::Scalar;
use crate::stats::spearman;

/// Default offset in `ln(k + slip)`: one centimetre.
pub const LOG_SLIP_OFFSET: f64 = 0.01;
/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Slip in metres on a complete rectilinear `(lon, lat)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipField<T> {
    lons: Vec<T>,
    lats: Vec<T>,
    /// Row-major by latitude: `slip[j * lons.len() + i]`; `None` is no-data.
    slip: Vec<Option<T>>,
}

/// How an interpolated value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SampleStatus {
    Inside,
    /// Outside the lattice; value set to 0.
    OutOfDomain,
    /// A surrounding node carries no data; value set to 0.
    NoData,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipSample<T> {
    pub value: T,
    pub status: SampleStatus,
}

impl<T: Scalar> SlipField<T> {
    pub fn new(lons: Vec<T>, lats: Vec<T>, slip: Vec<Option<T>>) -> Result<Self> {
        for (name, axis) in [("longitude", &lons), ("latitude", &lats)] {
            if axis.len() < 2 {
                return Err(Error::InvalidInput(format!("{name} axis needs at least 2 nodes")));
            }
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput(format!("{name} axis is not strictly increasing")));
            }
        }
        if slip.len() != lons.len() * lats.len() {
            return Err(Error::DimensionMismatch { expected: lons.len() * lats.len(), found: slip.len() });
        }
        if let Some(v) = slip.iter().flatten().find(|v| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::InvalidInput(format!("slip {v} must be finite and non-negative")));
        }
        Ok(Self { lons, lats, slip })
    }

    pub fn lons(&self) -> &[T] {
        &self.lons
    }

    pub fn lats(&self) -> &[T] {
        &self.lats
    }

    pub fn node_count(&self) -> usize {
        self.slip.len()
    }

    pub fn node(&self, i: usize, j: usize) -> Option<T> {
        self.slip[j * self.lons.len() + i]
    }

    pub fn max_slip(&self) -> Option<T> {
        self.slip.iter().flatten().copied().reduce(T::max)
    }

    /// Bilinear interpolation; exact at nodes.
    pub fn sample(&self, lon: T, lat: T) -> SlipSample<T> {
        let (Some((i, tx)), Some((j, ty))) = (locate(&self.lons, lon), locate(&self.lats, lat)) else {
            return SlipSample { value: T::zero(), status: SampleStatus::OutOfDomain };
        };
        let corners = [self.node(i, j), self.node(i + 1, j), self.node(i, j + 1), self.node(i + 1, j + 1)];
        let weights = [
            (T::one() - tx) * (T::one() - ty),
            tx * (T::one() - ty),
            (T::one() - tx) * ty,
            tx * ty,
        ];
        let mut value = T::zero();
        for (c, w) in corners.iter().zip(weights) {
            if w == T::zero() {
                continue;
            }
            match c {
                Some(v) => value = value + *v * w,
                None => return SlipSample { value: T::zero(), status: SampleStatus::NoData },
            }
        }
        SlipSample { value, status: SampleStatus::Inside }
    }

    pub fn interpolate(&self, points: &[[T; 2]]) -> Vec<SlipSample<T>> {
        points.par_iter().map(|p| self.sample(p[0], p[1])).collect()
    }

    /// Writes `lon,lat,slip` rows, empty slip for no-data nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lon,lat,slip")?;
        for (j, lat) in self.lats.iter().enumerate() {
            for (i, lon) in self.lons.iter().enumerate() {
                match self.node(i, j) {
                    Some(v) => writeln!(w, "{lon},{lat},{v}")?,
                    None => writeln!(w, "{lon},{lat},")?,
                }
            }
        }
        Ok(())
    }
}

/// Cell index and fractional offset of `x` along `axis`, or `None` outside.
fn locate<T: Scalar>(axis: &[T], x: T) -> Option<(usize, T)> {
    let (first, last) = (axis[0], axis[axis.len() - 1]);
    if !(x >= first && x <= last) {
        return None;
    }
    let upper = axis.partition_point(|&a| a <= x).min(axis.len() - 1).max(1);
    let i = upper - 1;
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    Some((i, t))
}

fn parse_number<T: Scalar>(raw: &str, line: usize, what: &str) -> Result<T> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::of)
        .ok_or_else(|| Error::Parse { line, message: format!("{what}={raw:?} is not a number") })
}

/// Reads `lon,lat,slip` rows (header required, any row order). An empty,
/// `nan` or `nodata` slip marks a no-data node.
pub fn read_slip<T: Scalar, R: Read>(reader: R) -> Result<SlipField<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut nodes: BTreeMap<(u64, u64), Option<T>> = BTreeMap::new();
    let key = |v: T| v.as_f64().to_bits();
    let mut lons: Vec<T> = Vec::new();
    let mut lats: Vec<T> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() < 3 {
            return Err(Error::Parse { line, message: "expected lon,lat,slip".into() });
        }
        let lon: T = parse_number(&record[0], line, "lon")?;
        let lat: T = parse_number(&record[1], line, "lat")?;
        let raw = record[2].trim();
        let slip = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("nodata") {
            None
        } else {
            let v: T = parse_number(raw, line, "slip")?;
            if v < T::zero() {
                return Err(Error::Parse { line, message: format!("negative slip {v}") });
            }
            Some(v)
        };
        if nodes.insert((key(lon), key(lat)), slip).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate node ({lon}, {lat})") });
        }
        lons.push(lon);
        lats.push(lat);
    }
    let sort = |v: &mut Vec<T>| {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v.dedup();
    };
    sort(&mut lons);
    sort(&mut lats);
    if nodes.len() != lons.len() * lats.len() {
        return Err(Error::InvalidInput(format!(
            "{} nodes do not form a complete {} x {} lattice",
            nodes.len(),
            lons.len(),
            lats.len()
        )));
    }
    let mut slip = Vec::with_capacity(nodes.len());
    for &lat in &lats {
        for &lon in &lons {
            slip.push(nodes[&(key(lon), key(lat))]);
        }
    }
    SlipField::new(lons, lats, slip)
}

pub fn load_slip<T: Scalar>(path: &Path) -> Result<SlipField<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_slip(text.as_bytes())
}

/// `ln(k + slip)`.
pub fn log_slip<T: Scalar>(slip: T, k: T) -> Result<T> {
    if !(slip >= T::zero()) {
        return Err(Error::InvalidInput(format!("slip {slip} must be non-negative")));
    }
    Ok((k + slip).ln())
}

/// Reads `(lon, lat)` vertex lists: one `lon,lat` (or whitespace-separated)
/// pair per line, lists separated by blank lines, `#` starts a comment.
pub fn read_polylines<R: Read>(mut reader: R) -> Result<Vec<Vec<[f64; 2]>>> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(Error::Parse { line: k + 1, message: format!("expected lon,lat, got {line:?}") });
        }
        current.push([parse_number(fields[0], k + 1, "lon")?, parse_number(fields[1], k + 1, "lat")?]);
    }
    if !current.is_empty() {
        out.push(current);
    }
    Ok(out)
}

pub fn load_polylines(path: &Path) -> Result<Vec<Vec<[f64; 2]>>> {
    let file = fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_polylines(file)
}

/// Simple polygon given by its vertices (closing edge implied).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::Degenerate(format!("polygon with {} vertices", vertices.len())));
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % vertices.len()]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area2 == 0.0 {
            return Err(Error::Degenerate("polygon has zero area".into()));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Even-odd rule; points on an edge count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            if on_segment(a, b, p) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    use crate::topology::predicates::orient2d;
    orient2d(a, b, p) == std::cmp::Ordering::Equal
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Regular lattice points retained by a set of mask polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedGrid {
    pub nx: usize,
    pub ny: usize,
    /// `[lon_min, lon_max, lat_min, lat_max]`.
    pub bbox: [f64; 4],
    pub polygons: Vec<Polygon>,
    pub points: Vec<[f64; 2]>,
}

impl MaskedGrid {
    pub fn candidate_count(&self) -> usize {
        self.nx * self.ny
    }
}

/// `nx x ny` lattice over `bbox` keeping points inside any polygon. With no
/// polygons every lattice point is kept.
pub fn build_masked_grid(bbox: [f64; 4], nx: usize, ny: usize, polygons: Vec<Polygon>) -> Result<MaskedGrid> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidInput(format!("grid {nx} x {ny} needs at least 2 nodes per axis")));
    }
    if !(bbox[0] < bbox[1] && bbox[2] < bbox[3]) {
        return Err(Error::InvalidInput(format!("bad bounding box {bbox:?}")));
    }
    let grid = lattice(bbox, nx, ny);
    let points: Vec<[f64; 2]> = grid
        .outer_iter()
        .map(|r| [r[0], r[1]])
        .filter(|&p| polygons.is_empty() || polygons.iter().any(|poly| poly.contains(p)))
        .collect();
    log::info!("masked grid keeps {} of {} points", points.len(), nx * ny);
    Ok(MaskedGrid { nx, ny, bbox, polygons, points })
}

/// Great-circle distance in kilometres between `(lon, lat)` points in degrees.
pub fn haversine_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lat1, lat2) = (a[1].to_radians(), b[1].to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b[0] - a[0]).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Trench trace as an ordered `(lon, lat)` polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrenchLine {
    vertices: Vec<[f64; 2]>,
}

impl TrenchLine {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("trench needs at least 2 vertices".into()));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("consecutive trench vertices coincide".into()));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Distance in kilometres from `p` to the nearest point of the line.
    ///
    /// Each segment is projected onto a local equirectangular plane centred
    /// on `p` to find the closest point; the distance to that point (or to a
    /// segment end, if nearer) is then measured along the great circle. The
    /// planar step is accurate to well under 1% for segments a few hundred
    /// kilometres long.
    pub fn distance_km(&self, p: [f64; 2]) -> f64 {
        let k = p[1].to_radians().cos();
        let project = |q: [f64; 2]| [(q[0] - p[0]) * k, q[1] - p[1]];
        self.vertices
            .windows(2)
            .map(|w| {
                let (a, b) = (project(w[0]), project(w[1]));
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = if len2 > 0.0 { (-(a[0] * d[0] + a[1] * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let closest = [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])];
                haversine_km(p, closest).min(haversine_km(p, w[0])).min(haversine_km(p, w[1]))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn trench_distance(points: &[[f64; 2]], trench: &TrenchLine) -> Vec<f64> {
    points.par_iter().map(|&p| trench.distance_km(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub lon: f64,
    pub lat: f64,
    pub slip: f64,
    pub log_slip: f64,
    pub log_density: f64,
    pub status: SampleStatus,
    pub cluster: Option<usize>,
}

/// One row per point: slip, `ln(k + slip)`, log-density and optional label.
pub fn scatter_table<T: Scalar>(
    points: &[[f64; 2]],
    field: &SlipField<T>,
    density: &DensityModel<T>,
    labels: Option<&[usize]>,
    k: f64,
) -> Result<Vec<ScatterRow>> {
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: l.len() });
        }
    }
    let flat: Vec<T> = points.iter().flatten().map(|&v| T::of(v)).collect();
    let queries = Array2::from_shape_vec((points.len(), 2), flat).expect("n x 2 shape");
    let log_density = density.evaluate(queries.view())?.log_values;
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = field.sample(T::of(p[0]), T::of(p[1]));
            let slip = s.value.as_f64();
            Ok(ScatterRow {
                lon: p[0],
                lat: p[1],
                slip,
                log_slip: log_slip(slip, k)?,
                log_density: log_density[i].as_f64(),
                status: s.status,
                cluster: labels.map(|l| l[i]),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSlipSummary {
    pub cluster: usize,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; absent for a single event.
    pub sd: Option<f64>,
    pub dist_min: f64,
    pub dist_max: f64,
    pub dist_mean: f64,
}

/// Per-cluster slip statistics and trench distances. Empty clusters are
/// omitted.
pub fn cluster_slip_summary(labels: &[usize], slip: &[f64], trench_km: &[f64]) -> Result<Vec<ClusterSlipSummary>> {
    if slip.len() != labels.len() || trench_km.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: slip.len().min(trench_km.len()) });
    }
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    Ok(groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(cluster, g)| {
            let n = g.len() as f64;
            let values: Vec<f64> = g.iter().map(|&i| slip[i]).collect();
            let dists: Vec<f64> = g.iter().map(|&i| trench_km[i]).collect();
            let mean = values.iter().sum::<f64>() / n;
            let sd = (g.len() > 1)
                .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
            ClusterSlipSummary {
                cluster,
                n: g.len(),
                mean,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                sd,
                dist_min: dists.iter().copied().fold(f64::INFINITY, f64::min),
                dist_max: dists.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                dist_mean: dists.iter().sum::<f64>() / n,
            }
        })
        .collect())
}

/// Spearman correlation between log-slip and log-density within each
/// cluster of a scatter table, as `(cluster, rho, n)`.
pub fn cluster_spearman(rows: &[ScatterRow]) -> Result<Vec<(usize, f64, usize)>> {
    let mut by_cluster: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        if let Some(c) = r.cluster {
            let entry = by_cluster.entry(c).or_default();
            entry.0.push(r.log_slip);
            entry.1.push(r.log_density);
        }
    }
    by_cluster
        .into_iter()
        .filter(|(_, (x, _))| x.len() >= 2)
        .map(|(c, (x, y))| Ok((c, spearman(&x, &y)?, x.len())))
        .collect()
}
