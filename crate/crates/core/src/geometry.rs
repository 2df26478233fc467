//! Planar predicates.
//!
//! `orient2d` and `incircle` evaluate in floating point first and accept the
//! sign when it clears a forward error bound; otherwise the determinant is
//! re-evaluated exactly over big integers. Only the sign is exact.

use std::cmp::Ordering;

use num_bigint::BigInt;

pub type Point = [f64; 2];

const EPS: f64 = f64::EPSILON * 0.5;
const CCW_BOUND: f64 = (3.0 + 16.0 * EPS) * EPS;
const ICC_BOUND: f64 = (10.0 + 96.0 * EPS) * EPS;

/// Positive when `a, b, c` turn counterclockwise, zero when collinear.
pub fn orient2d(a: Point, b: Point, c: Point) -> Ordering {
    let l = (a[0] - c[0]) * (b[1] - c[1]);
    let r = (a[1] - c[1]) * (b[0] - c[0]);
    let det = l - r;
    if det.abs() > CCW_BOUND * (l.abs() + r.abs()) {
        return det.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
    }
    orient2d_exact(a, b, c)
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `a, b, c`.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> Ordering {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;
    let (bc1, bc2) = (bdx * cdy, cdx * bdy);
    let (ca1, ca2) = (cdx * ady, adx * cdy);
    let (ab1, ab2) = (adx * bdy, bdx * ady);
    let det = alift * (bc1 - bc2) + blift * (ca1 - ca2) + clift * (ab1 - ab2);
    let permanent = alift * (bc1.abs() + bc2.abs())
        + blift * (ca1.abs() + ca2.abs())
        + clift * (ab1.abs() + ab2.abs());
    if det.abs() > ICC_BOUND * permanent {
        return det.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
    }
    incircle_exact(a, b, c, d)
}

/// Exact integers for a batch of coordinates, all scaled by one common power
/// of two.
fn to_common_integers<const N: usize>(xs: [f64; N]) -> [BigInt; N] {
    let decoded = xs.map(decode);
    let emin = decoded.iter().map(|&(_, e)| e).min().unwrap_or(0);
    decoded.map(|(m, e)| BigInt::from(m) << ((e - emin) as usize))
}

fn decode(x: f64) -> (i64, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    if exp_bits == 0 {
        (sign * frac, -1074)
    } else {
        (sign * (frac | (1i64 << 52)), exp_bits - 1075)
    }
}

fn sign_of(v: &BigInt) -> Ordering {
    v.sign().cmp(&num_bigint::Sign::NoSign)
}

fn orient2d_exact(a: Point, b: Point, c: Point) -> Ordering {
    let [ax, ay, bx, by, cx, cy] = to_common_integers([a[0], a[1], b[0], b[1], c[0], c[1]]);
    let det = (&ax - &cx) * (&by - &cy) - (&ay - &cy) * (&bx - &cx);
    sign_of(&det)
}

fn incircle_exact(a: Point, b: Point, c: Point, d: Point) -> Ordering {
    let [ax, ay, bx, by, cx, cy, dx, dy] =
        to_common_integers([a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]]);
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

/// Twice the signed area, plain floating point.
#[inline]
pub fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Circumcentre and squared circumradius; `None` for degenerate triangles.
pub fn circumcircle(a: Point, b: Point, c: Point) -> Option<(Point, f64)> {
    let d = 2.0 * signed_area2(a, b, c);
    if d == 0.0 {
        return None;
    }
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Some(([a[0] + ux, a[1] + uy], ux * ux + uy * uy))
}

/// Relative penetration `(R² − |d − o|²) / R²` of `d` into the circumcircle
/// of `a, b, c`; positive means strictly inside.
pub fn incircle_normalized(a: Point, b: Point, c: Point, d: Point) -> f64 {
    match circumcircle(a, b, c) {
        Some((o, r2)) => {
            let dist2 = (d[0] - o[0]).powi(2) + (d[1] - o[1]).powi(2);
            (r2 - dist2) / r2
        }
        None => f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orientation_basic() {
        assert_eq!(orient2d([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]), Ordering::Greater);
        assert_eq!(orient2d([0.0, 0.0], [0.0, 1.0], [1.0, 0.0]), Ordering::Less);
        assert_eq!(orient2d([0.0, 0.0], [0.5, 0.5], [1.0, 1.0]), Ordering::Equal);
    }

    #[test]
    fn near_collinear_resolved_exactly() {
        // 0.1 + 0.2 is not 0.3 in binary; the float path alone gives noise.
        let a = [0.1, 0.1];
        let b = [0.2, 0.2];
        let c = [0.1 + 0.2, 0.3];
        let exact = orient2d_exact(a, b, c);
        assert_eq!(orient2d(a, b, c), exact);
        assert_eq!(orient2d([0.0, 0.0], [1e-300, 1e-300], [3e-300, 3e-300]), Ordering::Equal);
    }

    #[test]
    fn cocircular_square_is_zero() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(incircle(sq[0], sq[1], sq[2], sq[3]), Ordering::Equal);
        assert_eq!(incircle(sq[0], sq[1], sq[2], [0.5, 0.5]), Ordering::Greater);
        assert_eq!(incircle(sq[0], sq[1], sq[2], [2.0, 2.0]), Ordering::Less);
    }

    #[test]
    fn circumcircle_of_right_triangle() {
        let (o, r2) = circumcircle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!((o[0] - 0.5).abs() < 1e-15 && (o[1] - 0.5).abs() < 1e-15);
        assert!((r2 - 0.5).abs() < 1e-15);
        assert!(circumcircle([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]).is_none());
    }

    proptest! {
        #[test]
        fn filter_agrees_with_exact(
            pts in proptest::array::uniform8(0.0f64..1.0),
        ) {
            let a = [pts[0], pts[1]];
            let b = [pts[2], pts[3]];
            let c = [pts[4], pts[5]];
            let d = [pts[6], pts[7]];
            prop_assert_eq!(orient2d(a, b, c), orient2d_exact(a, b, c));
            prop_assert_eq!(incircle(a, b, c, d), incircle_exact(a, b, c, d));
        }
    }
}
