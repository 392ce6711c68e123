//! Orientation-adapted vertex sets.
//!
//! The construction starts from the background lattice `εZ^d` and, inside
//! each cube `Q_δ(z)` of an orientation field, replaces it by the rotated
//! lattice `εR(z)Z^d`. The two lattices are glued by a boundary layer of
//! perturbed points on `∂Q_{(M−1)ε}(z)`, chosen one at a time so that no new
//! point is close to the affine hull of an earlier face. The result is
//! uniform, and its Delaunay triangulation is non-degenerate; both are
//! audited rather than assumed.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::delaunay::delaunay_triangulate;
use crate::error::{Error, Result};
use crate::mesh::{self, AxisBox, MeshAudit, PointGrid, Triangulation, VertexSet};
use crate::radial::unit_ball_volume;
use crate::schatten::GeneralMatrix;

const ORTHO_TOL: f64 = 1e-12;

/// Maximum number of times the margin threshold is halved.
pub const MAX_HALVINGS: u32 = 8;

/// One δ-cell of an orientation field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCell {
    pub z: Vec<f64>,
    pub rotation: GeneralMatrix,
}

/// Assignment of rotations to the centres of disjoint cubes of side `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    dim: usize,
    delta: f64,
    cells: Vec<FieldCell>,
}

impl OrientationField {
    pub fn new(dim: usize, delta: f64, cells: Vec<FieldCell>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid("delta must be positive and finite"));
        }
        for c in &cells {
            if c.z.len() != dim || c.rotation.dim() != dim {
                return Err(Error::invalid("cell dimension mismatch"));
            }
            if c.z.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("cell centre must be finite"));
            }
            check_rotation(&c.rotation)?;
        }
        // cubes may touch but not overlap
        let key = |z: &[f64]| -> Vec<i64> { z.iter().map(|x| (x / delta).round() as i64).collect() };
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, c) in cells.iter().enumerate() {
            buckets.entry(key(&c.z)).or_default().push(i);
        }
        for (i, c) in cells.iter().enumerate() {
            let k = key(&c.z);
            for off in neighbour_offsets(dim, 1) {
                let nk: Vec<i64> = k.iter().zip(&off).map(|(a, b)| a + b).collect();
                for &j in buckets.get(&nk).into_iter().flatten() {
                    if j <= i {
                        continue;
                    }
                    let sep = c.z.iter().zip(&cells[j].z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if sep < delta * (1.0 - 1e-12) {
                        return Err(Error::invalid(format!("cells {i} and {j} overlap")));
                    }
                }
            }
        }
        Ok(OrientationField { dim, delta, cells })
    }

    /// Cells centred at `anchor + δk` whose cubes meet the open box, with
    /// rotations given by `f(z)`.
    pub fn from_fn(
        delta: f64,
        domain: &AxisBox,
        anchor: &[f64],
        f: impl Fn(&[f64]) -> GeneralMatrix,
    ) -> Result<Self> {
        let d = domain.dim();
        if anchor.len() != d {
            return Err(Error::invalid("anchor dimension mismatch"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid("delta must be positive and finite"));
        }
        let lo: Vec<i64> = (0..d).map(|i| ((domain.lo[i] - anchor[i]) / delta - 0.5).floor() as i64).collect();
        let hi: Vec<i64> = (0..d).map(|i| ((domain.hi[i] - anchor[i]) / delta + 0.5).ceil() as i64).collect();
        let mut cells = Vec::new();
        for k in box_indices(&lo, &hi) {
            let z: Vec<f64> = (0..d).map(|i| anchor[i] + delta * k[i] as f64).collect();
            let meets = (0..d).all(|i| z[i] + delta / 2.0 > domain.lo[i] && z[i] - delta / 2.0 < domain.hi[i]);
            if meets {
                let rotation = f(&z);
                cells.push(FieldCell { z, rotation });
            }
        }
        OrientationField::new(d, delta, cells)
    }

    /// The same rotation on every cell.
    pub fn constant(delta: f64, domain: &AxisBox, anchor: &[f64], rotation: &GeneralMatrix) -> Result<Self> {
        OrientationField::from_fn(delta, domain, anchor, |_| rotation.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells(&self) -> &[FieldCell] {
        &self.cells
    }

    pub fn to_json(&self) -> String {
        let file = FieldFile {
            delta: self.delta,
            cells: self
                .cells
                .iter()
                .map(|c| CellFile {
                    z: c.z.clone(),
                    r: (0..self.dim).map(|i| (0..self.dim).map(|j| c.rotation.get(i, j)).collect()).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("field serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FieldFile = serde_json::from_str(text)?;
        let dim = file
            .cells
            .first()
            .map(|c| c.z.len())
            .ok_or_else(|| Error::invalid("orientation field has no cells"))?;
        let cells = file
            .cells
            .into_iter()
            .map(|c| Ok(FieldCell { z: c.z, rotation: GeneralMatrix::from_rows(&c.r)? }))
            .collect::<Result<Vec<_>>>()?;
        OrientationField::new(dim, file.delta, cells)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldFile {
    delta: f64,
    cells: Vec<CellFile>,
}

#[derive(Serialize, Deserialize)]
struct CellFile {
    z: Vec<f64>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

fn check_rotation(r: &GeneralMatrix) -> Result<()> {
    let d = r.dim();
    let rtr = r.transpose().mul(r);
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { 1.0 } else { 0.0 };
            if (rtr.get(i, j) - want).abs() > ORTHO_TOL {
                return Err(Error::invalid("rotation is not orthogonal"));
            }
        }
    }
    if (r.determinant() - 1.0).abs() > ORTHO_TOL {
        return Err(Error::invalid("rotation must have determinant +1"));
    }
    Ok(())
}

/// Counter-clockwise rotation of the plane by `theta` radians.
pub fn rotation_2d(theta: f64) -> GeneralMatrix {
    let (s, c) = theta.sin_cos();
    GeneralMatrix::from_row_major(2, vec![c, -s, s, c]).expect("2x2")
}

/// Rotation of space by `angle` about `axis` (Rodrigues' formula).
pub fn rotation_axis_angle(axis: [f64; 3], angle: f64) -> Result<GeneralMatrix> {
    let n = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid("rotation axis must be nonzero"));
    }
    let k = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let cross = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let mut e = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            e.push(c * id + s * cross[i][j] + (1.0 - c) * k[i] * k[j]);
        }
    }
    GeneralMatrix::from_row_major(3, e)
}

/// Cayley rotation `(I + W)(I − W)^{-1}` of the skew matrix `W = [w]×`:
/// a turn by `2·atan|w|` about `w`. Rational `w` gives rational entries.
pub fn rotation_cayley_3d(w: [f64; 3]) -> GeneralMatrix {
    let n2 = w.iter().map(|a| a * a).sum::<f64>();
    let cross = [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]];
    let mut e = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            // W² = wwᵀ − |w|²I
            let sq = w[i] * w[j] - n2 * id;
            e.push(id + 2.0 / (1.0 + n2) * (cross[i][j] + sq));
        }
    }
    GeneralMatrix::from_row_major(3, e).expect("3x3")
}

/// True if `R` maps `Z^d` onto itself (a signed permutation).
pub fn is_lattice_symmetry(r: &GeneralMatrix) -> bool {
    r.entries().iter().all(|&x| x.abs() < ORTHO_TOL || (x.abs() - 1.0).abs() < ORTHO_TOL)
}

/// Largest vertex count [`GridParams::validate`] accepts.
pub const MAX_GRID_VERTICES: usize = 4_000_000;

/// Construction constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridParams {
    pub eps: f64,
    pub delta: f64,
    /// Grid constant: uniformity cap and orientation shrinkage `δ − C_G ε`.
    pub c_g: f64,
    /// Side of the inner cube `Q_{Mε}` in units of `ε`.
    pub m: usize,
    pub domain: AxisBox,
    /// Admissible faces for the margin test lie within this distance of `u_j`.
    pub face_radius: f64,
    /// Number of candidate positions per boundary-layer point.
    pub candidates: usize,
    /// Largest accepted `(diam e)^d / vol(e)`.
    pub nondegeneracy_cap: f64,
    /// Run the probe-based uniformity audit.
    pub audit_uniformity: bool,
}

impl GridParams {
    /// Conservative constants: `ℓ = 2d`, `M = ⌊δ/ε⌋ − 4ℓ`,
    /// `C_G = max(7 + 2d + 4ℓ, 4ℓ + 3)` and the full face radius
    /// `(2(1 + 2d) + 1/(4d))ε`. These need `δ/ε` of several dozen.
    pub fn conservative(eps: f64, delta: f64, domain: AxisBox) -> Result<Self> {
        let d = domain.dim();
        let l = 2 * d;
        let m = cells_per_delta(eps, delta)? - (4 * l) as i64;
        let p = GridParams {
            eps,
            delta,
            c_g: ((7 + 2 * d + 4 * l).max(4 * l + 3)) as f64,
            m: m.max(0) as usize,
            face_radius: (2.0 * (1 + 2 * d) as f64 + 1.0 / (4 * d) as f64) * eps,
            domain,
            candidates: 256,
            nondegeneracy_cap: 1e6,
            audit_uniformity: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Tighter constants that fit `δ = 16ε`: `M = ⌊δ/ε⌋ − 2`, `C_G = 4d`,
    /// and faces within `3ε/4` of each layer point. The short face radius
    /// keeps the worst element quality stable under refinement.
    pub fn practical(eps: f64, delta: f64, domain: AxisBox) -> Result<Self> {
        let d = domain.dim();
        let m = cells_per_delta(eps, delta)? - 2;
        let p = GridParams {
            eps,
            delta,
            c_g: (4 * d) as f64,
            m: m.max(0) as usize,
            face_radius: 0.75 * eps,
            domain,
            candidates: 256,
            nondegeneracy_cap: 1e6,
            audit_uniformity: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(2..=3).contains(&d) {
            return Err(Error::invalid("oriented grids are implemented for d = 2 and d = 3"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite() && self.delta.is_finite()) {
            return Err(Error::invalid("eps must be positive and finite"));
        }
        if self.delta < self.c_g * self.eps {
            return Err(Error::invalid(format!(
                "delta = {} is below C_G·eps = {}",
                self.delta,
                self.c_g * self.eps
            )));
        }
        if self.m < 6 + 2 * d {
            return Err(Error::invalid(format!("M = {} is below 6 + 2d = {}", self.m, 6 + 2 * d)));
        }
        if self.m as f64 * self.eps > self.delta * (1.0 + 1e-12) {
            return Err(Error::invalid("inner cube exceeds the cell"));
        }
        if self.delta - self.c_g * self.eps > (self.m - 2) as f64 * self.eps * (1.0 + 1e-12) {
            return Err(Error::invalid("C_G too small: orientation cube exceeds the rotated core"));
        }
        if !(self.face_radius > 0.0) || self.candidates == 0 {
            return Err(Error::invalid("face radius and candidate count must be positive"));
        }
        let estimate: f64 = (0..d).map(|k| (self.domain.hi[k] - self.domain.lo[k]) / self.eps + 1.0).product();
        if estimate > MAX_GRID_VERTICES as f64 {
            return Err(Error::invalid(format!(
                "grid would hold about {estimate:.3e} vertices, above the limit of {MAX_GRID_VERTICES}"
            )));
        }
        Ok(())
    }
}

fn cells_per_delta(eps: f64, delta: f64) -> Result<i64> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::invalid("eps and delta must be positive"));
    }
    // tolerate δ/ε = 15.999999… from decimal input
    Ok((delta / eps * (1.0 + 1e-12)).floor() as i64)
}

/// Per-cell construction summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub z: Vec<f64>,
    /// The cell lies inside the domain and received a rotated patch.
    pub active: bool,
    pub lattice_symmetry: bool,
    pub mid_points: usize,
    /// Smallest certified margin threshold `γ` used in this cell.
    pub gamma: Option<f64>,
    /// Smallest achieved margin, in units of `ε`.
    pub min_margin: Option<f64>,
    pub max_halvings: u32,
}

struct Layer {
    inner: Vec<Vec<f64>>,
    mid: Vec<Vec<f64>>,
    outer: Vec<Vec<f64>>,
    report: CellReport,
}

/// Boundary-layer vertex set of a single cell: the rotated lattice inside
/// `Q_{(M−2)ε}(z)`, the layer near `∂Q_{(M−1)ε}(z)` and the background
/// lattice outside `Q_{Mε}(z)` up to a few `ε` beyond it.
pub fn boundary_layer_vertices(z: &[f64], params: &GridParams, rot: &GeneralMatrix) -> Result<(VertexSet, CellReport)> {
    params.validate()?;
    if z.len() != params.dim() || rot.dim() != params.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    check_rotation(rot)?;
    let layer = build_layer(z, params, rot)?;
    let mut pts = layer.inner;
    pts.extend(layer.mid);
    pts.extend(layer.outer);
    Ok((sorted_set(params.dim(), pts)?, layer.report))
}

/// Integer numerators and common denominator of `R` when its entries are
/// rationals with denominator at most 64.
fn rational_form(rot: &GeneralMatrix) -> Option<(Vec<i64>, i64)> {
    (1..=64i64).find_map(|den| {
        let nums: Vec<f64> = rot.entries().iter().map(|x| x * den as f64).collect();
        nums.iter()
            .all(|v| (v - v.round()).abs() < 1e-9)
            .then(|| (nums.iter().map(|v| v.round() as i64).collect(), den))
    })
}

/// `εRk`. Rational rotations are evaluated as `(Nk)·(ε/D)`, which is exact
/// whenever `ε/D` is a power of two; exact ties in the rotated lattice then
/// stay ties for the Delaunay predicates.
fn rotated_point(rot: &GeneralMatrix, k: &[i64], eps: f64) -> Vec<f64> {
    let d = k.len();
    if let Some((nums, den)) = rational_form(rot) {
        let unit = eps / den as f64;
        return (0..d).map(|i| (0..d).map(|j| nums[i * d + j] * k[j]).sum::<i64>() as f64 * unit).collect();
    }
    let kf: Vec<f64> = k.iter().map(|&c| c as f64).collect();
    rot.mul_vec(&kf).into_iter().map(|c| c * eps).collect()
}

fn cheb(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Points `εRk` with `|x − z|_∞ < half` (or `≤` when `closed`).
fn rotated_lattice_in_cube(z: &[f64], half: f64, rot: &GeneralMatrix, eps: f64, closed: bool) -> Vec<Vec<f64>> {
    let d = z.len();
    let centre = rot.transpose().mul_vec(z);
    let span = ((d as f64).sqrt() * half / eps).ceil() as i64 + 1;
    let lo: Vec<i64> = centre.iter().map(|c| (c / eps).round() as i64 - span).collect();
    let hi: Vec<i64> = centre.iter().map(|c| (c / eps).round() as i64 + span).collect();
    box_indices(&lo, &hi)
        .map(|k| rotated_point(rot, &k, eps))
        .filter(|x| {
            let c = cheb(x, z);
            if closed {
                c <= half
            } else {
                c < half
            }
        })
        .collect()
}

fn build_layer(z: &[f64], params: &GridParams, rot: &GeneralMatrix) -> Result<Layer> {
    let d = params.dim();
    let eps = params.eps;
    let m = params.m;
    let h_in = (m - 2) as f64 * eps / 2.0;
    let h_mid = (m - 1) as f64 * eps / 2.0;
    let h_out = m as f64 * eps / 2.0;
    let symmetric = is_lattice_symmetry(rot);
    let mut report = CellReport {
        z: z.to_vec(),
        active: true,
        lattice_symmetry: symmetric,
        mid_points: 0,
        gamma: None,
        min_margin: None,
        max_halvings: 0,
    };

    let pad = params.face_radius + eps;
    let span = ((h_out + pad) / eps).ceil() as i64 + 1;
    let lo: Vec<i64> = z.iter().map(|c| (c / eps).round() as i64 - span).collect();
    let hi: Vec<i64> = z.iter().map(|c| (c / eps).round() as i64 + span).collect();
    let outer: Vec<Vec<f64>> = box_indices(&lo, &hi)
        .map(|k| k.iter().map(|&c| c as f64 * eps).collect::<Vec<f64>>())
        .filter(|x| {
            let c = cheb(x, z);
            c >= h_out && c <= h_out + pad
        })
        .collect();

    if symmetric {
        // εRZ^d = εZ^d: the background lattice already fills the cube
        let inner = box_indices(&lo, &hi)
            .map(|k| k.iter().map(|&c| c as f64 * eps).collect::<Vec<f64>>())
            .filter(|x| cheb(x, z) < h_out)
            .collect();
        return Ok(Layer { inner, mid: Vec::new(), outer, report });
    }

    let inner = rotated_lattice_in_cube(z, h_in, rot, eps, true);

    // layer sites U_ε on ∂Q_mid, spaced ε/d, starting from the corner p
    let n = (d * (m - 1)) as i64;
    let step = eps / d as f64;
    let corner: Vec<f64> = z.iter().map(|c| c - h_mid).collect();
    let sites: Vec<Vec<f64>> = box_indices(&vec![0; d], &vec![n; d])
        .filter(|k| k.iter().any(|&c| c == 0 || c == n))
        .map(|k| (0..d).map(|i| corner[i] + step * k[i] as f64).collect())
        .collect();

    let rho = eps / (4 * d) as f64;
    let offsets = candidate_offsets(d, params.candidates, rho);
    let bucket = |x: &[f64]| -> Vec<i64> { x.iter().map(|c| (c / eps).floor() as i64).collect() };
    let mut by_cell: HashMap<Vec<i64>, Vec<(u8, usize)>> = HashMap::new();
    for (i, x) in inner.iter().enumerate() {
        by_cell.entry(bucket(x)).or_default().push((0, i));
    }
    for (i, x) in outer.iter().enumerate() {
        by_cell.entry(bucket(x)).or_default().push((1, i));
    }
    let reach = (params.face_radius / eps).ceil() as i64;
    let near_offsets = neighbour_offsets(d, reach);
    let vol_ratio = 0.5 * unit_ball_volume(d) * (1.0 / (4 * d) as f64).powi(d as i32);
    let face_weight = 2f64.powi(2 - d as i32) * (d as f64).powi(1 - d as i32);

    let mut mid: Vec<Vec<f64>> = Vec::with_capacity(sites.len());
    let mut gamma_min = f64::INFINITY;
    let mut margin_min = f64::INFINITY;
    let mut max_halvings = 0;
    for u in &sites {
        let key = bucket(u);
        let (mut a_pts, mut b_pts, mut shared) = (Vec::new(), Vec::new(), Vec::new());
        for off in &near_offsets {
            let k: Vec<i64> = key.iter().zip(off).map(|(a, b)| a + b).collect();
            for &(kind, i) in by_cell.get(&k).into_iter().flatten() {
                let x = match kind {
                    0 => &inner[i],
                    1 => &outer[i],
                    _ => &mid[i],
                };
                if mesh::dist(x, u) > params.face_radius {
                    continue;
                }
                match kind {
                    0 => a_pts.push(x.as_slice()),
                    1 => b_pts.push(x.as_slice()),
                    _ => shared.push(x.as_slice()),
                }
            }
        }
        let mut faces = Vec::new();
        collect_faces(d, &shared, &a_pts, &mut faces);
        collect_faces(d, &shared, &b_pts, &mut faces);
        // faces made of layer points only
        collect_faces(d, &[], &shared, &mut faces);

        let (best, margin) = best_candidate(u, &offsets, &faces);
        if !faces.is_empty() {
            let gamma = vol_ratio / (faces.len() as f64 * face_weight);
            let mut s = 0;
            while margin < gamma * eps * 0.5f64.powi(s as i32) {
                s += 1;
                if s > MAX_HALVINGS {
                    return Err(Error::Audit(format!(
                        "margin search failed near {u:?}: best margin {:.3e}·ε below γ/2^{MAX_HALVINGS}",
                        margin / eps
                    )));
                }
            }
            gamma_min = gamma_min.min(gamma * 0.5f64.powi(s as i32));
            margin_min = margin_min.min(margin / eps);
            max_halvings = max_halvings.max(s);
        }
        by_cell.entry(bucket(&best)).or_default().push((2, mid.len()));
        mid.push(best);
    }
    report.mid_points = mid.len();
    report.gamma = gamma_min.is_finite().then_some(gamma_min);
    report.min_margin = margin_min.is_finite().then_some(margin_min);
    report.max_halvings = max_halvings;
    Ok(Layer { inner, mid, outer, report })
}

/// A face as a base point and unit normal of its affine hull.
struct Hyperplane {
    base: Vec<f64>,
    normal: Vec<f64>,
}

/// Adds every affinely independent `d`-subset of `shared ∪ own` that uses at
/// least one point of `own`.
fn collect_faces(d: usize, shared: &[&[f64]], own: &[&[f64]], out: &mut Vec<Hyperplane>) {
    let all: Vec<&[f64]> = own.iter().chain(shared.iter()).copied().collect();
    let n_own = own.len();
    let mut push = |pts: &[&[f64]]| {
        if let Some(h) = hyperplane(pts) {
            out.push(h);
        }
    };
    match d {
        2 => {
            for i in 0..n_own {
                for j in i + 1..all.len() {
                    push(&[all[i], all[j]]);
                }
            }
        }
        3 => {
            for i in 0..n_own {
                for j in i + 1..all.len() {
                    for k in j + 1..all.len() {
                        push(&[all[i], all[j], all[k]]);
                    }
                }
            }
        }
        _ => unreachable!("dimension validated"),
    }
}

fn hyperplane(pts: &[&[f64]]) -> Option<Hyperplane> {
    let normal = match pts.len() {
        2 => {
            let t = [pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]];
            vec![-t[1], t[0]]
        }
        3 => {
            let a: Vec<f64> = (0..3).map(|i| pts[1][i] - pts[0][i]).collect();
            let b: Vec<f64> = (0..3).map(|i| pts[2][i] - pts[0][i]).collect();
            vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        }
        _ => return None,
    };
    let scale: f64 = pts.iter().map(|p| mesh::dist(p, pts[0])).fold(0.0, f64::max);
    let n = normal.iter().map(|c| c * c).sum::<f64>().sqrt();
    // zero (d−1)-measure
    if !(n > 1e-12 * scale.powi(pts.len() as i32 - 1)) {
        return None;
    }
    Some(Hyperplane { base: pts[0].to_vec(), normal: normal.into_iter().map(|c| c / n).collect() })
}

/// Candidate with the largest minimum distance to the face hyperplanes.
fn best_candidate(u: &[f64], offsets: &[Vec<f64>], faces: &[Hyperplane]) -> (Vec<f64>, f64) {
    let mut best = (u.to_vec(), f64::NEG_INFINITY);
    for off in offsets {
        let c: Vec<f64> = u.iter().zip(off).map(|(a, b)| a + b).collect();
        let mut margin = f64::INFINITY;
        for f in faces {
            let s: f64 = (0..c.len()).map(|i| (c[i] - f.base[i]) * f.normal[i]).sum();
            margin = margin.min(s.abs());
            if margin <= best.1 {
                break;
            }
        }
        if margin > best.1 {
            best = (c, margin);
        }
    }
    best
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The centre followed by Halton points inside the open ball of radius `rho`.
fn candidate_offsets(d: usize, count: usize, rho: f64) -> Vec<Vec<f64>> {
    const BASES: [u64; 3] = [2, 3, 5];
    let mut out = vec![vec![0.0; d]];
    let mut i = 1u64;
    while out.len() < count + 1 {
        let p: Vec<f64> = (0..d).map(|k| 2.0 * halton(i, BASES[k]) - 1.0).collect();
        i += 1;
        if p.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            out.push(p.into_iter().map(|c| c * rho).collect());
        }
    }
    out
}

fn neighbour_offsets(d: usize, r: i64) -> Vec<Vec<i64>> {
    box_indices(&vec![-r; d], &vec![r; d]).collect()
}

/// All integer vectors in the closed box `[lo, hi]`, last coordinate slowest.
fn box_indices(lo: &[i64], hi: &[i64]) -> impl Iterator<Item = Vec<i64>> {
    let lo = lo.to_vec();
    let hi = hi.to_vec();
    let empty = lo.iter().zip(&hi).any(|(a, b)| a > b);
    let mut cur = if empty { None } else { Some(lo.clone()) };
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let next = cur.as_mut().expect("present");
        let mut k = 0;
        loop {
            if k == next.len() {
                cur = None;
                break;
            }
            next[k] += 1;
            if next[k] <= hi[k] {
                break;
            }
            next[k] = lo[k];
            k += 1;
        }
        Some(out)
    })
}

fn sorted_set(d: usize, mut pts: Vec<Vec<f64>>) -> Result<VertexSet> {
    pts.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    pts.dedup();
    VertexSet::from_points(d, &pts)
}

fn cell_inside(z: &[f64], delta: f64, domain: &AxisBox) -> bool {
    let tol = 1e-12 * delta;
    (0..z.len()).all(|i| z[i] - delta / 2.0 >= domain.lo[i] - tol && z[i] + delta / 2.0 <= domain.hi[i] + tol)
}

/// Worker count: `HSTV_THREADS` if set, otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("HSTV_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Background lattice outside the inner cubes plus each full cell's rotated
/// patch and boundary layer, as a sorted vertex set.
pub fn oriented_vertices(field: &OrientationField, params: &GridParams) -> Result<(VertexSet, Vec<CellReport>)> {
    params.validate()?;
    let d = params.dim();
    if field.dim() != d {
        return Err(Error::invalid("field and domain dimensions differ"));
    }
    if (field.delta() - params.delta).abs() > 1e-12 * params.delta {
        return Err(Error::invalid("field delta differs from the grid delta"));
    }
    let delta = params.delta;
    let full: Vec<bool> = field.cells().iter().map(|c| cell_inside(&c.z, delta, &params.domain)).collect();
    if !full.iter().any(|&b| b) {
        return Err(Error::invalid("domain is smaller than one cell of the field"));
    }

    let active: Vec<usize> = (0..field.cells().len())
        .filter(|&i| full[i] && !is_lattice_symmetry(&field.cells()[i].rotation))
        .collect();
    let layers = build_layers_parallel(field, params, &active)?;

    let eps = params.eps;
    let h_out = params.m as f64 * eps / 2.0;
    let mut covered: HashSet<Vec<i64>> = HashSet::new();
    for &i in &active {
        let z = &field.cells()[i].z;
        let lo: Vec<i64> = z.iter().map(|c| ((c - h_out) / eps).floor() as i64).collect();
        let hi: Vec<i64> = z.iter().map(|c| ((c + h_out) / eps).ceil() as i64).collect();
        for k in box_indices(&lo, &hi) {
            let x: Vec<f64> = k.iter().map(|&c| c as f64 * eps).collect();
            if cheb(&x, z) < h_out {
                covered.insert(k);
            }
        }
    }
    let dom = &params.domain;
    let lo: Vec<i64> = dom.lo.iter().map(|c| (c / eps).ceil() as i64).collect();
    let hi: Vec<i64> = dom.hi.iter().map(|c| (c / eps).floor() as i64).collect();
    let mut pts: Vec<Vec<f64>> = box_indices(&lo, &hi)
        .filter(|k| !covered.contains(k))
        .map(|k| k.iter().map(|&c| c as f64 * eps).collect())
        .filter(|x: &Vec<f64>| dom.contains(x))
        .collect();

    let mut reports = Vec::with_capacity(field.cells().len());
    let mut layer_iter = layers.into_iter();
    for (i, c) in field.cells().iter().enumerate() {
        if active.contains(&i) {
            let layer = layer_iter.next().expect("one layer per active cell");
            pts.extend(layer.inner);
            pts.extend(layer.mid);
            reports.push(layer.report);
        } else {
            reports.push(CellReport {
                z: c.z.clone(),
                active: false,
                lattice_symmetry: is_lattice_symmetry(&c.rotation),
                mid_points: 0,
                gamma: None,
                min_margin: None,
                max_halvings: 0,
            });
        }
    }
    Ok((sorted_set(d, pts)?, reports))
}

fn build_layers_parallel(field: &OrientationField, params: &GridParams, active: &[usize]) -> Result<Vec<Layer>> {
    let workers = worker_count().min(active.len()).max(1);
    let chunk = active.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<Layer>>> = std::thread::scope(|s| {
        let handles: Vec<_> = active
            .chunks(chunk)
            .map(|ids| {
                s.spawn(move || {
                    ids.iter()
                        .map(|&i| {
                            let c = &field.cells()[i];
                            build_layer(&c.z, params, &c.rotation)
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("layer worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(active.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Outcome of the per-cell set-equality check
/// `V ∩ Q_{δ−C_Gε}(z) = εR(z)Z^d ∩ Q_{δ−C_Gε}(z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOrientation {
    pub z: Vec<f64>,
    /// False for cells not fully inside the domain, which are not checked.
    pub checked: bool,
    pub ok: bool,
    pub lattice_points: usize,
}

pub fn orientation_audit(v: &VertexSet, field: &OrientationField, params: &GridParams) -> Vec<CellOrientation> {
    let grid = PointGrid::new(v, Some(params.eps));
    let half = (params.delta - params.c_g * params.eps) / 2.0;
    let tol = 1e-12 * params.eps;
    field
        .cells()
        .iter()
        .map(|c| {
            if !cell_inside(&c.z, params.delta, &params.domain) {
                return CellOrientation { z: c.z.clone(), checked: false, ok: true, lattice_points: 0 };
            }
            if half <= 0.0 {
                return CellOrientation { z: c.z.clone(), checked: true, ok: true, lattice_points: 0 };
            }
            let expected = rotated_lattice_in_cube(&c.z, half, &c.rotation, params.eps, false);
            let lo: Vec<f64> = c.z.iter().map(|x| x - half).collect();
            let hi: Vec<f64> = c.z.iter().map(|x| x + half).collect();
            let present = grid.in_box(&lo, &hi).into_iter().filter(|&i| cheb(v.point(i), &c.z) < half).count();
            let all_found = expected.iter().all(|x| !grid.in_ball(x, tol).is_empty());
            CellOrientation {
                z: c.z.clone(),
                checked: true,
                ok: all_found && present == expected.len(),
                lattice_points: expected.len(),
            }
        })
        .collect()
}

/// Audit report attached to an oriented triangulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAudit {
    pub mesh: MeshAudit,
    pub c_g: f64,
    pub nondegeneracy_cap: f64,
    /// Largest element diameter divided by `ε`.
    pub max_diameter_over_eps: f64,
    pub orientation_ok: bool,
    pub orientation: Vec<CellOrientation>,
    pub cells: Vec<CellReport>,
}

/// Delaunay triangulation of [`oriented_vertices`] with its audits. Fails if
/// any audit exceeds the configured caps.
pub fn oriented_triangulation(field: &OrientationField, params: &GridParams) -> Result<(Triangulation, GridAudit)> {
    let (v, cells) = oriented_vertices(field, params)?;
    let orientation = orientation_audit(&v, field, params);
    let t = delaunay_triangulate(&v)?;
    let eps = params.audit_uniformity.then_some(params.eps);
    let mesh_audit = mesh::audit(&t, eps, Some(&params.domain))?;
    let max_diam = (0..t.elements().len()).map(|e| t.element_diameter(e)).fold(0.0, f64::max);
    let audit = GridAudit {
        orientation_ok: orientation.iter().all(|o| o.ok),
        mesh: mesh_audit,
        c_g: params.c_g,
        nondegeneracy_cap: params.nondegeneracy_cap,
        max_diameter_over_eps: max_diam / params.eps,
        orientation,
        cells,
    };
    if !audit.mesh.delaunay_ok {
        return Err(Error::Audit("triangulation is not Delaunay".into()));
    }
    if !audit.orientation_ok {
        return Err(Error::Audit("orientation set-equality failed".into()));
    }
    if let Some(u) = &audit.mesh.uniformity {
        if u.c_bar > params.c_g {
            return Err(Error::Audit(format!("uniformity constant {} exceeds C_G = {}", u.c_bar, params.c_g)));
        }
    }
    if audit.mesh.nondegeneracy_c > params.nondegeneracy_cap {
        return Err(Error::Audit(format!(
            "non-degeneracy constant {} exceeds the cap {}",
            audit.mesh.nondegeneracy_c, params.nondegeneracy_cap
        )));
    }
    Ok((t, audit))
}
