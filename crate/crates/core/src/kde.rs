//! Gaussian product-kernel density estimation.
//!
//! The sample is stored sorted lexicographically by row, so every density is
//! summed in the same order regardless of how the caller ordered the input.
//! Shuffling the sample therefore leaves results unchanged to the last bit.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Queries evaluated per parallel work unit.
const TILE: usize = 256;

/// Per-coordinate kernel standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidths<T>(Vec<T>);

impl<T: Scalar> Bandwidths<T> {
    pub fn new(h: Vec<T>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidInput("no bandwidths".into()));
        }
        if let Some((j, v)) = h.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > T::zero())) {
            return Err(Error::InvalidInput(format!("bandwidth {j} = {v} must be positive and finite")));
        }
        Ok(Self(h))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.0.iter().map(|&h| h * factor).collect())
    }
}

/// Normal-reference rule `h_j = s_j (4 / ((d + 2) n))^(1 / (d + 4))`, with
/// `s_j` the sample standard deviation of coordinate `j`.
pub fn normal_reference_bandwidth<T: Scalar>(sample: ArrayView2<T>) -> Result<Bandwidths<T>> {
    let (n, d) = sample.dim();
    if n < 2 {
        return Err(Error::TooFew {
            what: "sample points for a bandwidth",
            required: 2,
            found: n,
        });
    }
    let nf = T::of_usize(n);
    let factor = (T::of(4.0) / (T::of_usize(d + 2) * nf)).powf(T::one() / T::of_usize(d + 4));
    let mut h = Vec::with_capacity(d);
    for (j, column) in sample.axis_iter(Axis(1)).enumerate() {
        let mean = column.iter().copied().sum::<T>() / nf;
        let ss: T = column.iter().map(|&v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (nf - T::one())).sqrt();
        if !(sd > T::zero()) {
            return Err(Error::ZeroVariance(j));
        }
        h.push(sd * factor);
    }
    Bandwidths::new(h)
}

/// A kernel estimate: sample points plus bandwidths.
#[derive(Debug, Clone)]
pub struct DensityModel<T> {
    sorted: Array2<T>,
    /// `position[i]` is where original row `i` sits in `sorted`.
    position: Vec<usize>,
    bandwidths: Bandwidths<T>,
    log_norm: T,
}

/// Densities at a batch of query points.
#[derive(Debug, Clone)]
pub struct DensitySurface<T> {
    pub query_points: Array2<T>,
    pub values: Vec<T>,
    pub log_values: Vec<T>,
}

impl<T: Scalar> DensityModel<T> {
    pub fn new(sample: Array2<T>, bandwidths: Bandwidths<T>) -> Result<Self> {
        let (n, d) = sample.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!("empty sample ({n} x {d})")));
        }
        if bandwidths.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bandwidths.dim(),
            });
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample contains non-finite values".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (sample.row(a), sample.row(b));
            ra.iter()
                .zip(rb.iter())
                .map(|(x, y)| x.partial_cmp(y).expect("finite"))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let sorted = sample.select(Axis(0), &order);
        let mut position = vec![0; n];
        for (slot, &orig) in order.iter().enumerate() {
            position[orig] = slot;
        }
        let half_log_two_pi = T::of(0.5 * (2.0 * std::f64::consts::PI).ln());
        let log_norm = -T::of_usize(n).ln()
            - bandwidths.as_slice().iter().map(|h| h.ln()).sum::<T>()
            - T::of_usize(d) * half_log_two_pi;
        Ok(Self {
            sorted,
            position,
            bandwidths,
            log_norm,
        })
    }

    /// Builds the estimate from the given rows of `points`.
    pub fn from_rows(points: ArrayView2<T>, rows: &[usize], bandwidths: Bandwidths<T>) -> Result<Self> {
        Self::new(points.select(Axis(0), rows), bandwidths)
    }

    pub fn len(&self) -> usize {
        self.sorted.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.sorted.ncols()
    }

    pub fn bandwidths(&self) -> &Bandwidths<T> {
        &self.bandwidths
    }

    /// Sample in the original row order.
    pub fn sample(&self) -> Array2<T> {
        self.sorted.select(Axis(0), &self.position)
    }

    /// `ln` of the constant `1 / (n (2 pi)^(d/2) prod h_j)`.
    pub fn log_normalizer(&self) -> T {
        self.log_norm
    }

    /// Fills `exponents[i] = -0.5 * sum_j ((q_j - x_ij) / h_j)^2`.
    fn exponents(&self, query: ArrayView1<T>, exponents: &mut [T]) {
        let h = self.bandwidths.as_slice();
        let half = T::of(0.5);
        for (e, row) in exponents.iter_mut().zip(self.sorted.outer_iter()) {
            let mut acc = T::zero();
            for ((&q, &x), &hj) in query.iter().zip(row.iter()).zip(h) {
                let z = (q - x) / hj;
                acc = acc + z * z;
            }
            *e = -half * acc;
        }
    }

    fn evaluate_one(&self, query: ArrayView1<T>, scratch: &mut [T]) -> (T, T) {
        self.exponents(query, scratch);
        let max = scratch.iter().copied().fold(T::neg_infinity(), T::max);
        let mut linear = T::zero();
        let mut scaled = T::zero();
        for &e in scratch.iter() {
            linear = linear + e.exp();
            scaled = scaled + (e - max).exp();
        }
        let value = linear * self.log_norm.exp();
        let log_value = self.log_norm + max + scaled.ln();
        (value, log_value)
    }

    /// Log-density at a single point.
    pub fn log_density(&self, query: &[T]) -> Result<T> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        let mut scratch = vec![T::zero(); self.len()];
        Ok(self.evaluate_one(ArrayView1::from(query), &mut scratch).1)
    }

    /// Evaluates the estimate at every row of `queries`.
    pub fn evaluate(&self, queries: ArrayView2<T>) -> Result<DensitySurface<T>> {
        if queries.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: queries.ncols(),
            });
        }
        let m = queries.nrows();
        let mut values = vec![T::zero(); m];
        let mut log_values = vec![T::zero(); m];
        values
            .par_chunks_mut(TILE)
            .zip(log_values.par_chunks_mut(TILE))
            .enumerate()
            .for_each(|(tile, (vals, logs))| {
                let mut scratch = vec![T::zero(); self.len()];
                let start = tile * TILE;
                for (k, (v, lv)) in vals.iter_mut().zip(logs.iter_mut()).enumerate() {
                    (*v, *lv) = self.evaluate_one(queries.row(start + k), &mut scratch);
                }
            });
        Ok(DensitySurface {
            query_points: queries.to_owned(),
            values,
            log_values,
        })
    }

    /// Densities at the sample points, in the original row order.
    pub fn at_sample(&self) -> Vec<T> {
        self.evaluate_at_sample().values
    }

    /// Log-densities at the sample points, in the original row order.
    pub fn log_at_sample(&self) -> Vec<T> {
        self.evaluate_at_sample().log_values
    }

    fn evaluate_at_sample(&self) -> DensitySurface<T> {
        let original = self.sample();
        self.evaluate(original.view())
            .expect("sample has the model's dimension")
    }
}

/// Regular `nx x ny` lattice over `[x0, x1] x [y0, y1]`, x varying fastest.
/// The end points are hit exactly.
pub fn lattice<T: Scalar>(bbox: [T; 4], nx: usize, ny: usize) -> Array2<T> {
    let [x0, x1, y0, y1] = bbox;
    let coord = |lo: T, hi: T, i: usize, count: usize| {
        if count < 2 {
            return lo;
        }
        let t = T::of_usize(i) / T::of_usize(count - 1);
        lo * (T::one() - t) + hi * t
    };
    let mut grid = Array2::zeros((nx * ny, 2));
    for j in 0..ny {
        for i in 0..nx {
            let r = j * nx + i;
            grid[[r, 0]] = coord(x0, x1, i, nx);
            grid[[r, 1]] = coord(y0, y1, j, ny);
        }
    }
    grid
}
