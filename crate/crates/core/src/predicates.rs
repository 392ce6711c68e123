//! Orientation and in-sphere predicates.
//!
//! Two independent routes are provided. [`orient`] and [`insphere`] call
//! Shewchuk's adaptive-precision predicates for d = 2, 3 and fall back to
//! integer arithmetic otherwise; they drive mesh construction. The
//! [`exact`] module evaluates the same determinants over big integers after
//! scaling the dyadic inputs to a common exponent, behind a float filter with
//! a conservative error bound; mesh audits use it.
//!
//! Conventions, for points `p_0, …, p_d` in R^d:
//! `orient > 0` iff `det[p_1 − p_0; …; p_d − p_0] > 0`, and
//! `insphere(simplex, q) > 0` iff `q` lies strictly inside the circumsphere,
//! whatever the orientation of the simplex.

use robust::{Coord, Coord3D};

fn c2(p: &[f64]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn c3(p: &[f64]) -> Coord3D<f64> {
    Coord3D { x: p[0], y: p[1], z: p[2] }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign of the orientation of `d + 1` points in R^d.
pub fn orient(pts: &[&[f64]]) -> i8 {
    let d = pts.len() - 1;
    match d {
        2 => sign(robust::orient2d(c2(pts[0]), c2(pts[1]), c2(pts[2]))),
        3 => -sign(robust::orient3d(c3(pts[0]), c3(pts[1]), c3(pts[2]), c3(pts[3]))),
        _ => exact::orient(pts),
    }
}

/// +1 if `q` is strictly inside the circumsphere of the nondegenerate simplex,
/// −1 if strictly outside, 0 if on it.
pub fn insphere(simplex: &[&[f64]], q: &[f64]) -> i8 {
    let d = simplex.len() - 1;
    match d {
        2 => {
            let (a, b, c) = (c2(simplex[0]), c2(simplex[1]), c2(simplex[2]));
            sign(robust::incircle(a, b, c, c2(q))) * sign(robust::orient2d(a, b, c))
        }
        3 => {
            let (a, b, c, e) = (c3(simplex[0]), c3(simplex[1]), c3(simplex[2]), c3(simplex[3]));
            sign(robust::insphere(a, b, c, e, c3(q))) * sign(robust::orient3d(a, b, c, e))
        }
        _ => exact::insphere(simplex, q),
    }
}

/// Big-integer predicates over dyadic inputs.
pub mod exact {
    use num_bigint::BigInt;
    use num_traits::float::FloatCore;
    use num_traits::{Signed, Zero};

    /// Scales every coordinate to an integer with one common power of two.
    pub fn scaled(values: &[f64]) -> Vec<BigInt> {
        let decoded: Vec<(u64, i16, i8)> = values.iter().map(|v| FloatCore::integer_decode(*v)).collect();
        let min_exp = decoded
            .iter()
            .filter(|(m, _, _)| *m != 0)
            .map(|(_, e, _)| *e)
            .min()
            .unwrap_or(0);
        decoded
            .iter()
            .map(|&(m, e, s)| {
                let v = BigInt::from(m) << ((e - min_exp) as usize);
                if s < 0 {
                    -v
                } else {
                    v
                }
            })
            .collect()
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(mut m: Vec<Vec<BigInt>>) -> BigInt {
        let n = m.len();
        let mut sign_flip = false;
        let mut prev = BigInt::from(1);
        for k in 0..n {
            if m[k][k].is_zero() {
                match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                    Some(r) => {
                        m.swap(k, r);
                        sign_flip = !sign_flip;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                    m[i][j] = v;
                }
            }
            prev = m[k][k].clone();
        }
        let d = m[n - 1][n - 1].clone();
        if sign_flip {
            -d
        } else {
            d
        }
    }

    fn big_sign(x: &BigInt) -> i8 {
        if x.is_positive() {
            1
        } else if x.is_negative() {
            -1
        } else {
            0
        }
    }

    /// Float determinant by cofactor expansion with the matching permanent.
    fn det_with_permanent(m: &[Vec<f64>], rows: &mut Vec<usize>, col: usize) -> (f64, f64) {
        let n = m.len();
        if col == n - 1 {
            let r = rows[0];
            return (m[r][col], m[r][col].abs());
        }
        let mut det = 0.0;
        let mut perm = 0.0;
        for k in 0..rows.len() {
            let r = rows.remove(k);
            let (sd, sp) = det_with_permanent(m, rows, col + 1);
            rows.insert(k, r);
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            det += s * m[r][col] * sd;
            perm += m[r][col].abs() * sp;
        }
        (det, perm)
    }

    /// Sign of a float determinant if the filter certifies it.
    fn filtered_sign(m: &[Vec<f64>]) -> Option<i8> {
        let n = m.len();
        let mut rows: Vec<usize> = (0..n).collect();
        let (d, p) = det_with_permanent(m, &mut rows, 0);
        let bound = 64.0 * (n as f64 + 2.0) * f64::EPSILON * p;
        if !d.is_finite() || !p.is_finite() {
            return None;
        }
        if d > bound {
            Some(1)
        } else if d < -bound {
            Some(-1)
        } else {
            None
        }
    }

    fn orient_matrix_f64(pts: &[&[f64]]) -> Vec<Vec<f64>> {
        let d = pts.len() - 1;
        (1..=d).map(|i| (0..d).map(|k| pts[i][k] - pts[0][k]).collect()).collect()
    }

    /// Exact `orient`.
    pub fn orient(pts: &[&[f64]]) -> i8 {
        if let Some(s) = filtered_sign(&orient_matrix_f64(pts)) {
            return s;
        }
        orient_unfiltered(pts)
    }

    /// `orient` without the float filter.
    pub fn orient_unfiltered(pts: &[&[f64]]) -> i8 {
        big_sign(&orient_det(pts))
    }

    fn scaled_points(pts: &[&[f64]]) -> Vec<Vec<BigInt>> {
        let d = pts[0].len();
        let flat: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
        let s = scaled(&flat);
        s.chunks(d).map(|c| c.to_vec()).collect()
    }

    /// `det[p_1 − p_0; …; p_d − p_0]` in units of the common dyadic scale.
    pub fn orient_det(pts: &[&[f64]]) -> BigInt {
        let sp = scaled_points(pts);
        let d = pts.len() - 1;
        let m = (1..=d).map(|i| (0..d).map(|k| &sp[i][k] - &sp[0][k]).collect()).collect();
        det(m)
    }

    /// Rank of the affine hull of a point set (dimension of its span).
    pub fn affine_rank(pts: &[&[f64]]) -> usize {
        if pts.len() < 2 {
            return 0;
        }
        let sp = scaled_points(pts);
        let d = pts[0].len();
        let mut rows: Vec<Vec<BigInt>> =
            sp[1..].iter().map(|p| (0..d).map(|k| &p[k] - &sp[0][k]).collect()).collect();
        let mut rank = 0;
        for c in 0..d {
            let Some(piv) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
                continue;
            };
            rows.swap(rank, piv);
            for r in 0..rows.len() {
                if r == rank || rows[r][c].is_zero() {
                    continue;
                }
                let (a, b) = (rows[rank][c].clone(), rows[r][c].clone());
                for k in 0..d {
                    let v = &rows[r][k] * &a - &rows[rank][k] * &b;
                    rows[r][k] = v;
                }
            }
            rank += 1;
        }
        rank
    }

    /// +1 if the lift `(q, hq)` lies strictly below the hyperplane through the
    /// lifted simplex `(p_i, h_i)`, −1 if strictly above, 0 if on it.
    ///
    /// With `h = |x|²` this is the in-sphere test.
    pub fn lifted_below(simplex: &[&[f64]], heights: &[f64], q: &[f64], hq: f64) -> i8 {
        let d = simplex.len() - 1;
        let parity: i8 = if d % 2 == 0 { 1 } else { -1 };
        let o = orient(simplex);
        let rows: Vec<Vec<f64>> = simplex
            .iter()
            .zip(heights)
            .map(|(p, h)| {
                let mut row: Vec<f64> = (0..d).map(|k| p[k] - q[k]).collect();
                row.push(h - hq);
                row
            })
            .collect();
        if let Some(s) = filtered_sign(&rows) {
            return s * o * parity;
        }
        let mut all: Vec<&[f64]> = simplex.to_vec();
        all.push(q);
        let sp = scaled_points(&all);
        let mut hs: Vec<f64> = heights.to_vec();
        hs.push(hq);
        let sh = scaled(&hs);
        let m: Vec<Vec<BigInt>> = (0..=d)
            .map(|i| {
                let mut row: Vec<BigInt> = (0..d).map(|k| &sp[i][k] - &sp[d + 1][k]).collect();
                row.push(&sh[i] - &sh[d + 1]);
                row
            })
            .collect();
        big_sign(&det(m)) * o * parity
    }

    /// Exact `insphere`; the simplex must be nondegenerate.
    pub fn insphere(simplex: &[&[f64]], q: &[f64]) -> i8 {
        let d = simplex.len() - 1;
        let parity: i8 = if d % 2 == 0 { 1 } else { -1 };
        let lifted: Vec<Vec<f64>> = simplex
            .iter()
            .map(|p| {
                let mut row: Vec<f64> = (0..d).map(|k| p[k] - q[k]).collect();
                row.push(row.iter().map(|x| x * x).sum());
                row
            })
            .collect();
        let o = orient(simplex);
        if let Some(s) = filtered_sign(&lifted) {
            return s * o * parity;
        }
        insphere_unfiltered(simplex, q)
    }

    /// `insphere` without the float filter.
    pub fn insphere_unfiltered(simplex: &[&[f64]], q: &[f64]) -> i8 {
        let d = simplex.len() - 1;
        let parity: i8 = if d % 2 == 0 { 1 } else { -1 };
        let mut all: Vec<&[f64]> = simplex.to_vec();
        all.push(q);
        let sp = scaled_points(&all);
        let sq = &sp[d + 1];
        let m: Vec<Vec<BigInt>> = sp[..=d]
            .iter()
            .map(|p| {
                let mut row: Vec<BigInt> = (0..d).map(|k| &p[k] - &sq[k]).collect();
                let n2: BigInt = row.iter().map(|x| x * x).sum();
                row.push(n2);
                row
            })
            .collect();
        big_sign(&det(m)) * orient_unfiltered(simplex) * parity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_conventions_agree() {
        let a: &[f64] = &[0.0, 0.0];
        let b: &[f64] = &[1.0, 0.0];
        let c: &[f64] = &[0.0, 1.0];
        assert_eq!(orient(&[a, b, c]), 1);
        assert_eq!(exact::orient(&[a, b, c]), 1);
        assert_eq!(orient(&[a, c, b]), -1);
        let o: &[f64] = &[0.0, 0.0, 0.0];
        let x: &[f64] = &[1.0, 0.0, 0.0];
        let y: &[f64] = &[0.0, 1.0, 0.0];
        let z: &[f64] = &[0.0, 0.0, 1.0];
        assert_eq!(orient(&[o, x, y, z]), 1);
        assert_eq!(exact::orient_unfiltered(&[o, x, y, z]), 1);
        assert_eq!(orient(&[o, y, x, z]), -1);
    }

    #[test]
    fn insphere_is_orientation_free() {
        for d in 2..=4 {
            let mut pts: Vec<Vec<f64>> = vec![vec![0.0; d]];
            for i in 0..d {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                pts.push(e);
            }
            let inside = vec![0.25; d];
            let outside = vec![2.0; d];
            let on = vec![1.0; d];
            for flip in [false, true] {
                let mut s: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
                if flip {
                    s.swap(0, 1);
                }
                assert_eq!(insphere(&s, &inside), 1);
                assert_eq!(insphere(&s, &outside), -1);
                assert_eq!(insphere(&s, &on), 0);
                assert_eq!(exact::insphere_unfiltered(&s, &inside), 1);
                assert_eq!(exact::insphere_unfiltered(&s, &outside), -1);
                assert_eq!(exact::insphere_unfiltered(&s, &on), 0);
                assert_eq!(exact::insphere(&s, &inside), 1);
            }
        }
    }

    #[test]
    fn exact_handles_near_degenerate_input() {
        // nearly collinear points that naive float evaluation gets wrong
        let a: &[f64] = &[0.5, 0.5];
        let b: &[f64] = &[12.0, 12.0];
        let c: &[f64] = &[24.0, 24.0];
        let mut q = [0.5 + f64::EPSILON, 0.5];
        assert_eq!(exact::orient(&[a, b, c]), 0);
        let qq: &[f64] = &q;
        assert_eq!(exact::orient(&[qq, b, c]), orient(&[qq, b, c]));
        q[0] = 0.5;
        assert_eq!(exact::orient_unfiltered(&[&q, b, c]), 0);
    }
}
