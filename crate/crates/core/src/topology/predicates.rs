//! Orientation and in-circle predicates.
//!
//! Each predicate first evaluates its determinant in `f64` and compares it
//! with Shewchuk's forward error bound for that expression. When the
//! magnitude clears the bound the sign is certain. Otherwise the determinant
//! is recomputed exactly over big rationals: every finite `f64` is a dyadic
//! rational, so the exact path never rounds.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

const EPSILON: f64 = f64::EPSILON * 0.5;
const CCW_BOUND: f64 = (3.0 + 16.0 * EPSILON) * EPSILON;
const INCIRCLE_BOUND: f64 = (10.0 + 96.0 * EPSILON) * EPSILON;

pub type Point = [f64; 2];

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite coordinate")
}

fn sign_of(v: &BigRational) -> Ordering {
    if v.is_zero() {
        Ordering::Equal
    } else if v.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

fn sign_f64(v: f64) -> Ordering {
    v.partial_cmp(&0.0).expect("finite determinant")
}

/// Sign of the signed area of `(a, b, c)`: `Greater` when counter-clockwise.
pub fn orient2d(a: Point, b: Point, c: Point) -> Ordering {
    let left = (a[0] - c[0]) * (b[1] - c[1]);
    let right = (a[1] - c[1]) * (b[0] - c[0]);
    let det = left - right;
    let bound = CCW_BOUND * (left.abs() + right.abs());
    if det.abs() > bound {
        return sign_f64(det);
    }
    orient2d_exact(a, b, c)
}

pub(crate) fn orient2d_exact(a: Point, b: Point, c: Point) -> Ordering {
    let [ax, ay, bx, by, cx, cy] = [a[0], a[1], b[0], b[1], c[0], c[1]].map(exact);
    let det = (&ax - &cx) * (&by - &cy) - (&ay - &cy) * (&bx - &cx);
    sign_of(&det)
}

/// `Greater` when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `(a, b, c)`, `Equal` when cocircular.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> Ordering {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);

    let (bdxcdy, cdxbdy) = (bdx * cdy, cdx * bdy);
    let alift = adx * adx + ady * ady;
    let (cdxady, adxcdy) = (cdx * ady, adx * cdy);
    let blift = bdx * bdx + bdy * bdy;
    let (adxbdy, bdxady) = (adx * bdy, bdx * ady);
    let clift = cdx * cdx + cdy * cdy;

    let det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * alift
        + (cdxady.abs() + adxcdy.abs()) * blift
        + (adxbdy.abs() + bdxady.abs()) * clift;
    if det.abs() > INCIRCLE_BOUND * permanent {
        return sign_f64(det);
    }
    incircle_exact(a, b, c, d)
}

pub(crate) fn incircle_exact(a: Point, b: Point, c: Point, d: Point) -> Ordering {
    let [ax, ay, bx, by, cx, cy, dx, dy] = [a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]].map(exact);
    let (adx, ady) = (&ax - &dx, &ay - &dy);
    let (bdx, bdy) = (&bx - &dx, &by - &dy);
    let (cdx, cdy) = (&cx - &dx, &cy - &dy);
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let det = alift * (&bdx * &cdy - &cdx * &bdy)
        + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    sign_of(&det)
}
