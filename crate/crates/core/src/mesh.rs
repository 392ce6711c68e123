//! Triangulations of bounded point sets and their regularity audits.

use crate::error::{Error, Result};
use crate::predicates::{self, exact};
use crate::schatten::GeneralMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box corners must have equal positive dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("box must satisfy lo < hi in every coordinate"));
        }
        Ok(AxisBox { lo, hi })
    }

    /// The cube of side `side` centred at `center`.
    pub fn cube(center: &[f64], side: f64) -> Self {
        AxisBox {
            lo: center.iter().map(|c| c - 0.5 * side).collect(),
            hi: center.iter().map(|c| c + 0.5 * side).collect(),
        }
    }

    pub fn unit(dim: usize) -> Self {
        AxisBox { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a < *v && *v < *b)
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b) && self.hi.iter().zip(&other.hi).all(|(a, b)| b <= a)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Finite set of distinct points in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    dim: usize,
    coords: Vec<f64>,
}

impl VertexSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::invalid("coordinate count is not a multiple of the dimension"));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("vertex coordinates must be finite"));
        }
        let v = VertexSet { dim, coords };
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v.point(a).partial_cmp(v.point(b)).unwrap());
        for w in order.windows(2) {
            if v.point(w[0]) == v.point(w[1]) {
                return Err(Error::invalid(format!("vertices {} and {} coincide", w[0], w[1])));
            }
        }
        Ok(v)
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("point has wrong dimension"));
        }
        Self::new(dim, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn bounding_box(&self) -> Option<AxisBox> {
        if self.is_empty() {
            return None;
        }
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.iter() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some(AxisBox { lo, hi })
    }
}

/// Facet of a triangulation with its one or two incident elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Sorted vertex indices.
    pub vertices: Vec<usize>,
    /// Incident elements with the local index of the opposite vertex.
    pub elements: Vec<(usize, usize)>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.elements.len() == 2
    }
}

/// Simplicial mesh: vertices, elements of `d + 1` vertex indices, and faces.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: VertexSet,
    elements: Vec<Vec<usize>>,
    faces: Vec<Face>,
}

impl PartialEq for Triangulation {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.elements == other.elements
    }
}

impl Triangulation {
    /// Validates indices, element volumes and the face table.
    pub fn new(vertices: VertexSet, elements: Vec<Vec<usize>>) -> Result<Self> {
        let d = vertices.dim();
        let n = vertices.len();
        for (e, el) in elements.iter().enumerate() {
            if el.len() != d + 1 {
                return Err(Error::invalid(format!("element {e} does not have {} vertices", d + 1)));
            }
            if el.iter().any(|&i| i >= n) {
                return Err(Error::invalid(format!("element {e} references a missing vertex")));
            }
            let pts: Vec<&[f64]> = el.iter().map(|&i| vertices.point(i)).collect();
            if predicates::orient(&pts) == 0 {
                return Err(Error::degenerate(format!("element {e} has zero volume")));
            }
        }
        let faces = build_faces(d, &elements)?;
        Ok(Triangulation { vertices, elements, faces })
    }

    pub fn dim(&self) -> usize {
        self.vertices.dim()
    }

    pub fn vertices(&self) -> &VertexSet {
        &self.vertices
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn element_points(&self, e: usize) -> Vec<&[f64]> {
        self.elements[e].iter().map(|&i| self.vertices.point(i)).collect()
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        simplex_volume(&self.element_points(e))
    }

    pub fn element_diameter(&self, e: usize) -> f64 {
        let pts = self.element_points(e);
        let mut m: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                m = m.max(dist(pts[i], pts[j]));
            }
        }
        m
    }

    /// Sign of the orientation of element `e`.
    pub fn element_orientation(&self, e: usize) -> i8 {
        predicates::orient(&self.element_points(e))
    }

    /// Sum of element volumes in units of `2^{-k d}/d!`, together with `k`.
    ///
    /// Exact for dyadic coordinates; two meshes over the same vertex set can
    /// be compared with [`Triangulation::exact_volume_times_factorial`].
    pub fn exact_volume_times_factorial(&self) -> (num_bigint::BigInt, i32) {
        exact_volume(&self.vertices, self.elements.iter().map(|e| e.as_slice()))
    }

    /// Geometric conformity: orientations of the two elements at every
    /// interior face are compatible and no vertex lies in an element it does
    /// not belong to.
    pub fn check_conformity(&self) -> Result<()> {
        let d = self.dim();
        for f in &self.faces {
            if f.elements.len() != 2 {
                continue;
            }
            let sides: Vec<i8> = f
                .elements
                .iter()
                .map(|&(e, local)| {
                    let el = &self.elements[e];
                    let mut pts: Vec<&[f64]> = f.vertices.iter().map(|&i| self.vertices.point(i)).collect();
                    pts.push(self.vertices.point(el[local]));
                    predicates::orient(&pts)
                })
                .collect();
            if sides[0] == sides[1] {
                return Err(Error::Audit(format!(
                    "elements {} and {} overlap across a shared face",
                    f.elements[0].0, f.elements[1].0
                )));
            }
        }
        let grid = PointGrid::new(&self.vertices, None);
        for (e, el) in self.elements.iter().enumerate() {
            let pts = self.element_points(e);
            let (lo, hi) = bbox(&pts);
            for v in grid.in_box(&lo, &hi) {
                if el.contains(&v) {
                    continue;
                }
                let q = self.vertices.point(v);
                if point_in_simplex(&pts, q) {
                    return Err(Error::Audit(format!("vertex {v} lies in element {e} (hanging vertex)")));
                }
            }
        }
        let _ = d;
        Ok(())
    }

    /// Elements that contain `x` (closed simplices).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        (0..self.elements.len()).find(|&e| point_in_simplex(&self.element_points(e), x))
    }
}

fn build_faces(d: usize, elements: &[Vec<usize>]) -> Result<Vec<Face>> {
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    for (e, el) in elements.iter().enumerate() {
        for local in 0..=d {
            let mut key: Vec<usize> = el.iter().enumerate().filter(|(k, _)| *k != local).map(|(_, &v)| v).collect();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("element {e} repeats a vertex")));
            }
            match index.get(&key) {
                Some(&fi) => {
                    if faces[fi].elements.len() >= 2 {
                        return Err(Error::invalid("a face is shared by more than two elements"));
                    }
                    faces[fi].elements.push((e, local));
                }
                None => {
                    index.insert(key.clone(), faces.len());
                    faces.push(Face { vertices: key, elements: vec![(e, local)] });
                }
            }
        }
    }
    Ok(faces)
}

pub(crate) fn exact_volume<'a>(
    vertices: &VertexSet,
    elements: impl Iterator<Item = &'a [usize]>,
) -> (num_bigint::BigInt, i32) {
    use num_traits::Signed;
    let d = vertices.dim();
    let scaled = exact::scaled(vertices.coords());
    let min_exp = vertices
        .coords()
        .iter()
        .filter(|x| **x != 0.0)
        .map(|x| num_traits::float::FloatCore::integer_decode(*x).1 as i32)
        .min()
        .unwrap_or(0);
    let mut total = num_bigint::BigInt::from(0);
    for el in elements {
        let m = (1..=d)
            .map(|i| (0..d).map(|k| &scaled[el[i] * d + k] - &scaled[el[0] * d + k]).collect())
            .collect();
        total += exact::det(m).abs();
    }
    (total, -min_exp)
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn bbox(pts: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = pts[0].len();
    let mut lo = pts[0].to_vec();
    let mut hi = lo.clone();
    for p in pts {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Volume of a simplex given by `d + 1` points.
pub fn simplex_volume(pts: &[&[f64]]) -> f64 {
    let d = pts.len() - 1;
    let m = GeneralMatrix::from_row_major(
        d,
        (1..=d).flat_map(|i| (0..d).map(move |k| pts[i][k] - pts[0][k])).collect(),
    )
    .expect("finite coordinates");
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    m.determinant().abs() / fact
}

/// Barycentric coordinates of `x` with respect to a nondegenerate simplex.
pub fn barycentric(pts: &[&[f64]], x: &[f64]) -> Vec<f64> {
    let d = pts.len() - 1;
    // solve [p_1 − p_0, …, p_d − p_0] λ = x − p_0
    let mut a: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut row: Vec<f64> = (1..=d).map(|i| pts[i][k] - pts[0][k]).collect();
            row.push(x[k] - pts[0][k]);
            row
        })
        .collect();
    let lam = solve_augmented(&mut a);
    let mut out = Vec::with_capacity(d + 1);
    out.push(1.0 - lam.iter().sum::<f64>());
    out.extend(lam);
    out
}

/// Gaussian elimination with partial pivoting on an augmented `n × (n+1)` system.
pub(crate) fn solve_augmented(a: &mut [Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        let p = a[c][c];
        if p == 0.0 {
            continue;
        }
        for r in c + 1..n {
            let f = a[r][c] / p;
            if f == 0.0 {
                continue;
            }
            for j in c..=n {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = if a[r][r] != 0.0 { (a[r][n] - s) / a[r][r] } else { 0.0 };
    }
    x
}

/// Closed-simplex membership by exact orientation tests.
pub fn point_in_simplex(pts: &[&[f64]], x: &[f64]) -> bool {
    let o = predicates::orient(pts);
    let mut q = pts.to_vec();
    for i in 0..pts.len() {
        q[i] = x;
        let s = predicates::orient(&q);
        q[i] = pts[i];
        if s != 0 && s != o {
            return false;
        }
    }
    true
}

/// Circumcentre and circumradius of a nondegenerate simplex.
pub fn circumsphere(pts: &[&[f64]]) -> (Vec<f64>, f64) {
    let d = pts.len() - 1;
    let mut a: Vec<Vec<f64>> = (1..=d)
        .map(|i| {
            let mut row: Vec<f64> = (0..d).map(|k| 2.0 * (pts[i][k] - pts[0][k])).collect();
            row.push((0..d).map(|k| (pts[i][k] - pts[0][k]).powi(2)).sum());
            row
        })
        .collect();
    let c = solve_augmented(&mut a);
    let r = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (c.iter().zip(pts[0]).map(|(a, b)| a + b).collect(), r)
}

/// Euclidean distance from `q` to a simplex.
pub fn distance_to_simplex(pts: &[&[f64]], q: &[f64]) -> f64 {
    let n = pts.len();
    let mut best = f64::INFINITY;
    // closest point lies in the relative interior of some face
    for mask in 1u32..(1 << n) {
        let sub: Vec<&[f64]> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]).collect();
        let k = sub.len() - 1;
        let y = if k == 0 {
            Some(sub[0].to_vec())
        } else {
            // least squares on the face's affine hull
            let mut g: Vec<Vec<f64>> = (1..=k)
                .map(|i| {
                    let mut row: Vec<f64> = (1..=k)
                        .map(|j| (0..q.len()).map(|c| (sub[i][c] - sub[0][c]) * (sub[j][c] - sub[0][c])).sum())
                        .collect();
                    row.push((0..q.len()).map(|c| (sub[i][c] - sub[0][c]) * (q[c] - sub[0][c])).sum());
                    row
                })
                .collect();
            let lam = solve_augmented(&mut g);
            let l0 = 1.0 - lam.iter().sum::<f64>();
            if l0 < -1e-12 || lam.iter().any(|l| *l < -1e-12) {
                None
            } else {
                Some(
                    (0..q.len())
                        .map(|c| sub[0][c] + (1..=k).map(|i| lam[i - 1] * (sub[i][c] - sub[0][c])).sum::<f64>())
                        .collect(),
                )
            }
        };
        if let Some(y) = y {
            best = best.min(dist(&y, q));
        }
    }
    best
}

/// Uniform bucket grid over a vertex set.
pub(crate) struct PointGrid<'a> {
    vs: &'a VertexSet,
    lo: Vec<f64>,
    h: f64,
    dims: Vec<usize>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> PointGrid<'a> {
    pub fn new(vs: &'a VertexSet, h: Option<f64>) -> Self {
        let d = vs.dim();
        let bb = vs.bounding_box().unwrap_or(AxisBox { lo: vec![0.0; d], hi: vec![1.0; d] });
        let vol: f64 = bb.lo.iter().zip(&bb.hi).map(|(a, b)| (b - a).max(1e-300)).product();
        let h = h.unwrap_or_else(|| {
            let n = vs.len().max(1) as f64;
            let ext = bb.lo.iter().zip(&bb.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
            let g = (vol / n).powf(1.0 / d as f64);
            let g = if g.is_finite() { g } else { 0.0 };
            g.max(ext / n).max(1e-12 * ext.max(1.0))
        });
        let dims = bb.lo.iter().zip(&bb.hi).map(|(a, b)| ((b - a) / h).floor() as usize + 1).collect();
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let lo = bb.lo.clone();
        for (i, p) in vs.iter().enumerate() {
            let key = p.iter().zip(&lo).map(|(x, l)| ((x - l) / h).floor() as i64).collect();
            cells.entry(key).or_default().push(i);
        }
        PointGrid { vs, lo, h, dims, cells }
    }

    fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter().zip(&self.lo).map(|(x, l)| ((x - l) / self.h).floor() as i64).collect()
    }

    /// Vertex indices in cells meeting the box `[lo, hi]`, sorted.
    pub fn in_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let d = lo.len();
        let a: Vec<i64> = self.cell_of(lo).iter().map(|&c| c.max(0)).collect();
        let b: Vec<i64> = self.cell_of(hi).iter().zip(&self.dims).map(|(&c, &m)| c.min(m as i64)).collect();
        let mut out = Vec::new();
        if a.iter().zip(&b).any(|(x, y)| x > y) {
            return out;
        }
        let count: i64 = a.iter().zip(&b).map(|(x, y)| y - x + 1).product();
        if count as usize > 4 * self.cells.len() {
            // the box covers most of the grid
            for (key, list) in &self.cells {
                if key.iter().zip(a.iter().zip(&b)).all(|(k, (x, y))| x <= k && k <= y) {
                    out.extend(list);
                }
            }
            out.sort_unstable();
            return out;
        }
        let mut key = a.clone();
        loop {
            if let Some(list) = self.cells.get(&key) {
                out.extend(list);
            }
            let mut k = 0;
            loop {
                if k == d {
                    out.sort_unstable();
                    return out;
                }
                key[k] += 1;
                if key[k] <= b[k] {
                    break;
                }
                key[k] = a[k];
                k += 1;
            }
        }
    }

    /// Vertices within distance `r` of `x`.
    pub fn in_ball(&self, x: &[f64], r: f64) -> Vec<usize> {
        let lo: Vec<f64> = x.iter().map(|c| c - r).collect();
        let hi: Vec<f64> = x.iter().map(|c| c + r).collect();
        self.in_box(&lo, &hi).into_iter().filter(|&i| dist(self.vs.point(i), x) <= r).collect()
    }

    /// Nearest vertex to `x`, optionally skipping one index.
    pub fn nearest(&self, x: &[f64], skip: Option<usize>) -> Option<(usize, f64)> {
        if self.vs.len() <= usize::from(skip.is_some()) {
            return None;
        }
        let mut r = self.h;
        loop {
            let cand = self.in_box(
                &x.iter().map(|c| c - r).collect::<Vec<_>>(),
                &x.iter().map(|c| c + r).collect::<Vec<_>>(),
            );
            let best = cand
                .into_iter()
                .filter(|&i| Some(i) != skip)
                .map(|i| (i, dist(self.vs.point(i), x)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, dd)) = best {
                if dd <= r {
                    return Some((i, dd));
                }
            }
            r *= 2.0;
        }
    }
}

/// Outcome of an empty-ball audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaunayReport {
    pub ok: bool,
    /// (element, offending vertex) pairs, ordered.
    pub violations: Vec<(usize, usize)>,
    /// Largest `(R − |x − c|)/R` over offending vertices, 0 if none.
    pub worst_violation: f64,
}

/// Empty-circumball audit in floating point with relative tolerance `1e−12`.
pub fn check_delaunay(t: &Triangulation) -> DelaunayReport {
    let grid = PointGrid::new(t.vertices(), None);
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for (e, el) in t.elements().iter().enumerate() {
        let pts = t.element_points(e);
        let (c, r) = circumsphere(&pts);
        for v in grid.in_ball(&c, r) {
            if el.contains(&v) {
                continue;
            }
            let margin = r - dist(t.vertices().point(v), &c);
            if margin > 1e-12 * r {
                violations.push((e, v));
                worst = worst.max(margin / r);
            }
        }
    }
    DelaunayReport { ok: violations.is_empty(), violations, worst_violation: worst }
}

/// Empty-circumball audit with exact in-sphere signs; cospherical vertices
/// are allowed.
pub fn check_delaunay_exact(t: &Triangulation) -> DelaunayReport {
    let grid = PointGrid::new(t.vertices(), None);
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for (e, el) in t.elements().iter().enumerate() {
        let pts = t.element_points(e);
        let (c, r) = circumsphere(&pts);
        let reach = r * (1.0 + 1e-6) + 1e-12;
        for v in grid.in_ball(&c, reach) {
            if el.contains(&v) {
                continue;
            }
            let q = t.vertices().point(v);
            if exact::insphere(&pts, q) > 0 {
                violations.push((e, v));
                worst = worst.max(((r - dist(q, &c)) / r).max(0.0));
            }
        }
    }
    DelaunayReport { ok: violations.is_empty(), violations, worst_violation: worst }
}

/// Largest `(diam e)^d / vol(e)` over the elements.
pub fn check_nondegenerate(t: &Triangulation) -> Result<f64> {
    let d = t.dim() as i32;
    let mut c: f64 = 0.0;
    for e in 0..t.elements().len() {
        let vol = t.element_volume(e);
        if !(vol > 0.0) {
            return Err(Error::degenerate(format!("element {e} has zero volume")));
        }
        c = c.max(t.element_diameter(e).powi(d) / vol);
    }
    Ok(c)
}

/// Separation and covering constants of a vertex set at scale `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Uniformity {
    pub c_bar: f64,
    pub c_bar_min_dist: f64,
    pub c_bar_cover: f64,
    pub eps: f64,
    pub probe_pitch: f64,
}

/// Smallest `c̄` with `|x − y| ≥ ε/c̄` and every probe of the box within `c̄ε`
/// of a vertex.
pub fn check_uniform(v: &VertexSet, eps: f64, domain: &AxisBox) -> Result<Uniformity> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    if v.is_empty() {
        return Err(Error::invalid("empty vertex set"));
    }
    let grid = PointGrid::new(v, None);
    let mut min_d = f64::INFINITY;
    for i in 0..v.len() {
        if let Some((_, dd)) = grid.nearest(v.point(i), Some(i)) {
            min_d = min_d.min(dd);
        }
    }
    let c_min = if min_d.is_finite() { eps / min_d } else { 0.0 };
    let d = domain.dim();
    let counts: Vec<usize> = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(a, b)| ((b - a) / (eps / 8.0)).ceil() as usize)
        .collect();
    let pitch = domain
        .lo
        .iter()
        .zip(&domain.hi)
        .zip(&counts)
        .map(|((a, b), n)| (b - a) / *n as f64)
        .fold(0.0, f64::max);
    let mut cover: f64 = 0.0;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for k in 0..d {
            x[k] = domain.lo[k] + (domain.hi[k] - domain.lo[k]) * idx[k] as f64 / counts[k] as f64;
        }
        if let Some((_, dd)) = grid.nearest(&x, None) {
            cover = cover.max(dd);
        }
        let mut k = 0;
        loop {
            if k == d {
                let c_cov = cover / eps;
                return Ok(Uniformity {
                    c_bar: c_min.max(c_cov),
                    c_bar_min_dist: c_min,
                    c_bar_cover: c_cov,
                    eps,
                    probe_pitch: pitch,
                });
            }
            idx[k] += 1;
            if idx[k] <= counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Checks that elements near `q` are corner sets of cells of `εRZ^d`.
///
/// The vertices in `B_r(q)` must be exactly the lattice points there;
/// otherwise an error is returned.
pub fn check_local_lattice(t: &Triangulation, q: &[f64], r: f64, eps: f64, rot: &GeneralMatrix) -> Result<bool> {
    let d = t.dim();
    let tol = 1e-9;
    let rt = rot.transpose();
    let grid = PointGrid::new(t.vertices(), None);
    let to_lattice = |x: &[f64]| -> Vec<f64> { rt.mul_vec(x).iter().map(|c| c / eps).collect() };
    let inside = grid.in_ball(q, r);
    for &v in &inside {
        let k = to_lattice(t.vertices().point(v));
        if k.iter().any(|c| (c - c.round()).abs() > tol) {
            return Err(Error::invalid(format!("vertex {v} in the ball is not a lattice point")));
        }
    }
    // every lattice point in the ball must be a vertex
    let kq = to_lattice(q);
    let span = (r / eps).ceil() as i64 + 1;
    let mut off = vec![-span; d];
    loop {
        let k: Vec<f64> = kq.iter().zip(&off).map(|(c, o)| c.round() + *o as f64).collect();
        let x: Vec<f64> = rot.mul_vec(&k).iter().map(|c| c * eps).collect();
        if dist(&x, q) < r * (1.0 - 1e-12) {
            let near = grid.in_ball(&x, tol * eps);
            if near.is_empty() {
                return Err(Error::invalid("a lattice point in the ball is missing from the vertex set"));
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                return local_lattice_elements(t, q, r, eps, &to_lattice);
            }
            off[i] += 1;
            if off[i] <= span {
                break;
            }
            off[i] = -span;
            i += 1;
        }
    }
}

fn local_lattice_elements(
    t: &Triangulation,
    q: &[f64],
    r: f64,
    eps: f64,
    to_lattice: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<bool> {
    let d = t.dim();
    let inner = r - (d as f64).sqrt() * eps;
    if inner <= 0.0 {
        return Ok(true);
    }
    for e in 0..t.elements().len() {
        let pts = t.element_points(e);
        if pts.iter().all(|p| dist(p, q) > inner + 2.0 * r) {
            continue;
        }
        if distance_to_simplex(&pts, q) > inner {
            continue;
        }
        let ks: Vec<Vec<f64>> = pts.iter().map(|p| to_lattice(p)).collect();
        for c in 0..d {
            let lo = ks.iter().map(|k| k[c]).fold(f64::INFINITY, f64::min);
            let hi = ks.iter().map(|k| k[c]).fold(f64::NEG_INFINITY, f64::max);
            if ks.iter().any(|k| (k[c] - k[c].round()).abs() > 1e-9) || hi - lo > 1.0 + 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exact volume of a simplex with integer vertices; `degenerate` iff it is zero.
pub fn lattice_simplex_volume_bound(v: &[Vec<i64>]) -> (bool, f64) {
    let d = v.len() - 1;
    let m = (1..=d)
        .map(|i| (0..d).map(|k| num_bigint::BigInt::from(v[i][k] - v[0][k])).collect())
        .collect();
    let det = exact::det(m);
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    let vol = num_traits::ToPrimitive::to_f64(&det).unwrap_or(f64::INFINITY).abs() / fact;
    (vol == 0.0, vol)
}

/// Combined audit report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshAudit {
    pub delaunay_ok: bool,
    pub worst_insphere_violation: f64,
    pub nondegeneracy_c: f64,
    pub uniformity: Option<Uniformity>,
    pub elements: usize,
    pub vertices: usize,
}

pub fn audit(t: &Triangulation, eps: Option<f64>, domain: Option<&AxisBox>) -> Result<MeshAudit> {
    let del = check_delaunay_exact(t);
    let c = check_nondegenerate(t)?;
    let uniformity = match eps {
        Some(e) => {
            let bb;
            let dom = match domain {
                Some(b) => b,
                None => {
                    bb = t.vertices().bounding_box().ok_or_else(|| Error::invalid("empty mesh"))?;
                    &bb
                }
            };
            Some(check_uniform(t.vertices(), e, dom)?)
        }
        None => None,
    };
    Ok(MeshAudit {
        delaunay_ok: del.ok,
        worst_insphere_violation: del.worst_violation,
        nondegeneracy_c: c,
        uniformity,
        elements: t.elements().len(),
        vertices: t.vertices().len(),
    })
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
}

impl Triangulation {
    pub fn to_json(&self) -> String {
        let file = MeshFile {
            dim: self.dim(),
            vertices: self.vertices.iter().map(|p| p.to_vec()).collect(),
            elements: self.elements.clone(),
        };
        serde_json::to_string(&file).expect("mesh serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeshFile = serde_json::from_str(text)?;
        let vs = VertexSet::from_points(file.dim, &file.vertices)?;
        Triangulation::new(vs, file.elements)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(diag_02: bool) -> Triangulation {
        let vs = VertexSet::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let el = if diag_02 { vec![vec![0, 1, 2], vec![0, 2, 3]] } else { vec![vec![0, 1, 3], vec![1, 2, 3]] };
        Triangulation::new(vs, el).unwrap()
    }

    #[test]
    fn square_is_delaunay_either_way() {
        for diag in [true, false] {
            let t = square(diag);
            assert!(check_delaunay(&t).ok);
            assert!(check_delaunay_exact(&t).ok);
            t.check_conformity().unwrap();
            assert_eq!(t.faces().iter().filter(|f| f.is_interior()).count(), 1);
        }
    }

    #[test]
    fn circumcenter_vertex_is_a_violation() {
        // fifth vertex at the circumcentre of triangle (0,1,2) of the unit square
        let vs = VertexSet::from_points(
            2,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.5, 0.5]],
        )
        .unwrap();
        let t = Triangulation::new(vs, vec![vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        let rep = check_delaunay(&t);
        assert!(!rep.ok);
        assert!(rep.violations.contains(&(0, 4)));
        assert!(t.check_conformity().is_err());
    }

    #[test]
    fn nondegeneracy_constants() {
        let vs = VertexSet::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let t = Triangulation::new(vs, vec![vec![0, 1, 2]]).unwrap();
        assert_relative_eq!(check_nondegenerate(&t).unwrap(), 4.0, max_relative = 1e-14);
        assert!(check_delaunay(&t).ok);
        let h = 3f64.sqrt() / 2.0;
        let vs = VertexSet::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
        let t = Triangulation::new(vs, vec![vec![0, 1, 2]]).unwrap();
        assert_relative_eq!(check_nondegenerate(&t).unwrap(), 4.0 / 3f64.sqrt(), max_relative = 1e-14);
        let vs = VertexSet::from_points(2, &[vec![0.0, 0.0], vec![8.0, 0.0], vec![4.0, 8.0 * h]]).unwrap();
        let t = Triangulation::new(vs, vec![vec![0, 1, 2]]).unwrap();
        assert_relative_eq!(check_nondegenerate(&t).unwrap(), 4.0 / 3f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn uniformity_examples() {
        let eps = 0.125;
        let mut pts = Vec::new();
        for i in 0..=8 {
            for j in 0..=8 {
                pts.push(vec![i as f64 * eps, j as f64 * eps]);
            }
        }
        let vs = VertexSet::from_points(2, &pts).unwrap();
        let u = check_uniform(&vs, eps, &AxisBox::unit(2)).unwrap();
        assert_relative_eq!(u.c_bar, 1.0, max_relative = 1e-12);
        assert!(u.c_bar_cover <= 0.5f64.sqrt() + 1e-12);

        let vs = VertexSet::from_points(2, &[vec![0.5, 0.5]]).unwrap();
        let u = check_uniform(&vs, 0.01, &AxisBox::new(vec![0.4, 0.4], vec![0.6, 0.6]).unwrap()).unwrap();
        assert!(u.c_bar_cover > 10.0 && u.c_bar == u.c_bar_cover);

        let vs = VertexSet::from_points(2, &[vec![0.0, 0.0], vec![0.25, 0.0]]).unwrap();
        let u = check_uniform(&vs, 1.0, &AxisBox::new(vec![0.0, -0.1], vec![0.25, 0.1]).unwrap()).unwrap();
        assert!(u.c_bar >= 4.0);
    }

    #[test]
    fn lattice_volumes() {
        assert_eq!(lattice_simplex_volume_bound(&[vec![0, 0], vec![1, 0], vec![0, 1]]), (false, 0.5));
        assert_eq!(lattice_simplex_volume_bound(&[vec![0, 0], vec![1, 0], vec![2, 0]]), (true, 0.0));
        assert_eq!(lattice_simplex_volume_bound(&[vec![0, 0], vec![1, 2], vec![3, 4]]), (false, 1.0));
    }

    #[test]
    fn hanging_vertex_is_rejected() {
        // vertex 4 sits on edge (0,1) but only one side uses it
        let vs = VertexSet::from_points(
            2,
            &[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0], vec![1.0, -1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let t = Triangulation::new(vs, vec![vec![0, 1, 2], vec![0, 3, 4], vec![4, 3, 1]]).unwrap();
        assert!(t.check_conformity().is_err());
    }

    #[test]
    fn distance_to_simplex_cases() {
        let a: &[f64] = &[0.0, 0.0];
        let b: &[f64] = &[1.0, 0.0];
        let c: &[f64] = &[0.0, 1.0];
        assert_eq!(distance_to_simplex(&[a, b, c], &[0.2, 0.2]), 0.0);
        assert_relative_eq!(distance_to_simplex(&[a, b, c], &[0.5, -1.0]), 1.0, max_relative = 1e-14);
        assert_relative_eq!(distance_to_simplex(&[a, b, c], &[2.0, 0.0]), 1.0, max_relative = 1e-14);
        assert_relative_eq!(distance_to_simplex(&[a, b, c], &[1.0, 1.0]), 0.5f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn mesh_json_round_trip() {
        let t = square(true);
        let back = Triangulation::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        assert_eq!(t.to_json(), back.to_json());
    }
}
