//! Generators and independent integer oracles shared by the integration tests.
#![allow(dead_code)]

use hstv::mesh::{Triangulation, VertexSet};
use hstv::radial::{Piece, RadialProfile};
use hstv::schatten::GeneralMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, d: usize) -> GeneralMatrix {
    GeneralMatrix::from_row_major(d, (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Orthogonal matrix from Gram–Schmidt on a random square.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize) -> GeneralMatrix {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut ok = true;
        for j in 0..d {
            for k in 0..j {
                let dot: f64 = (0..d).map(|i| cols[j][i] * cols[k][i]).sum();
                for i in 0..d {
                    cols[j][i] -= dot * cols[k][i];
                }
            }
            let n: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-3 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= n);
        }
        if ok {
            let mut entries = vec![0.0; d * d];
            for j in 0..d {
                for i in 0..d {
                    entries[i * d + j] = cols[j][i];
                }
            }
            return GeneralMatrix::from_row_major(d, entries).unwrap();
        }
    }
}

/// Continuous random piecewise cubic on `(0, outer)` in the plane.
pub fn random_profile(rng: &mut impl Rng, outer: f64) -> RadialProfile {
    let k = rng.gen_range(1..=4);
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.05..0.95) * outer).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(outer);
    let mut pieces: Vec<Piece> = Vec::new();
    for w in bounds.windows(2) {
        let mut c: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if let Some(prev) = pieces.last() {
            let b = w[0];
            let tail: f64 = (1..4).map(|j| c[j] * b.powi(j as i32)).sum();
            c[0] = prev.value(b) - tail;
        }
        pieces.push(Piece::polynomial(w[0], w[1], &c));
    }
    RadialProfile::from_pieces(2, outer, pieces).unwrap()
}

/// Distinct points with integer coordinates in `[0, 2^bits)`, scaled by
/// `2^-bits` so every coordinate is an exact dyadic.
pub fn dyadic_points(rng: &mut impl Rng, n: usize, d: usize, bits: u32) -> (Vec<Vec<i64>>, VertexSet) {
    let mut ints: Vec<Vec<i64>> = Vec::with_capacity(n);
    while ints.len() < n {
        let p: Vec<i64> = (0..d).map(|_| rng.gen_range(0..1i64 << bits)).collect();
        if !ints.contains(&p) {
            ints.push(p);
        }
    }
    let scale = (-(bits as i32) as f64).exp2();
    let pts: Vec<Vec<f64>> = ints.iter().map(|p| p.iter().map(|&x| x as f64 * scale).collect()).collect();
    (ints, VertexSet::from_points(d, &pts).unwrap())
}

/// Determinant of a square integer matrix by cofactor expansion.
pub fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<i128>> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect()).collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * m[0][j] * det_i128(&minor)
            })
            .sum(),
    }
}

/// `det[p_1 − p_0, …, p_d − p_0]`.
pub fn orient_i128(p: &[&[i64]]) -> i128 {
    let rows: Vec<Vec<i128>> = p[1..].iter().map(|q| q.iter().zip(p[0]).map(|(a, b)| (*a - *b) as i128).collect()).collect();
    det_i128(&rows)
}

fn lifted_det(simplex: &[Vec<i128>], q: &[i128]) -> i128 {
    let rows: Vec<Vec<i128>> = simplex
        .iter()
        .map(|p| {
            let diff: Vec<i128> = p.iter().zip(q).map(|(a, b)| a - b).collect();
            let lift = diff.iter().map(|v| v * v).sum();
            diff.into_iter().chain([lift]).collect()
        })
        .collect();
    det_i128(&rows)
}

/// Positive iff `q` lies strictly inside the circumsphere of the simplex.
///
/// The sign is calibrated against the centroid, which is always inside;
/// coordinates are scaled by `d + 1` to keep the centroid integral.
pub fn insphere_i128(simplex: &[&[i64]], q: &[i64]) -> i128 {
    let k = simplex.len() as i128;
    let scaled: Vec<Vec<i128>> = simplex.iter().map(|p| p.iter().map(|&x| x as i128 * k).collect()).collect();
    let centroid: Vec<i128> = (0..q.len()).map(|i| simplex.iter().map(|p| p[i] as i128).sum()).collect();
    let q: Vec<i128> = q.iter().map(|&x| x as i128 * k).collect();
    lifted_det(&scaled, &q).signum() * lifted_det(&scaled, &centroid).signum()
}

/// Number of (element, vertex) pairs violating the empty-ball property.
pub fn delaunay_violations(t: &Triangulation, ints: &[Vec<i64>]) -> usize {
    let mut count = 0;
    for el in t.elements() {
        let s: Vec<&[i64]> = el.iter().map(|&v| ints[v].as_slice()).collect();
        for (v, q) in ints.iter().enumerate() {
            if !el.contains(&v) && insphere_i128(&s, q) > 0 {
                count += 1;
            }
        }
    }
    count
}

/// `d!·vol` of the mesh, in integer units.
pub fn mesh_volume_i128(t: &Triangulation, ints: &[Vec<i64>]) -> i128 {
    t.elements()
        .iter()
        .map(|el| {
            let s: Vec<&[i64]> = el.iter().map(|&v| ints[v].as_slice()).collect();
            orient_i128(&s).abs()
        })
        .sum()
}

/// `2·area` of the convex hull (monotone chain).
pub fn hull_area2_i128(ints: &[Vec<i64>]) -> i128 {
    let mut pts: Vec<(i64, i64)> = ints.iter().map(|p| (p[0], p[1])).collect();
    pts.sort();
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
    };
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a.0 as i128 * b.1 as i128 - b.0 as i128 * a.1 as i128
        })
        .sum::<i128>()
        .abs()
}

/// `6·volume` of the convex hull by brute-force facet enumeration; `None`
/// when four input points are coplanar on a candidate facet.
pub fn hull_volume6_i128(ints: &[Vec<i64>]) -> Option<i128> {
    let n = ints.len();
    let mut total: i128 = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (mut pos, mut neg, mut zero) = (false, false, false);
                for (m, q) in ints.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    match orient_i128(&[&ints[i], &ints[j], &ints[k], q]).signum() {
                        1 => pos = true,
                        -1 => neg = true,
                        _ => zero = true,
                    }
                    if pos && neg {
                        break;
                    }
                }
                if pos && neg {
                    continue;
                }
                if zero {
                    return None;
                }
                // Facet with every other point on one side; its signed cone
                // volume from the origin, oriented outward.
                let origin = [0i64, 0, 0];
                let v = orient_i128(&[&origin, &ints[i], &ints[j], &ints[k]]);
                total += if pos { -v } else { v };
            }
        }
    }
    Some(total.abs())
}
