//! Continuous piecewise-linear (CPWL) functions on simplicial meshes.
//!
//! The Hessian of a CPWL function is a measure concentrated on the mesh
//! faces. Across a face with unit normal `ν` the gradient jumps by `J = j ν`,
//! so the density is the rank-one matrix `j ν ⊗ ν` and every Schatten norm of
//! it equals `|j|`. The variation on a box is then the sum of `|J|` times the
//! face measure inside the box.

use crate::error::{Error, Result};
use crate::mesh::{self, AxisBox, Triangulation, VertexSet};
use crate::schatten::PExponent;
use serde::{Deserialize, Serialize};

/// Vertex values on a triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CpwlFunction {
    mesh: Triangulation,
    values: Vec<f64>,
}

/// Contribution of one face to the variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceTerm {
    pub face: usize,
    pub measure: f64,
    pub jump: f64,
}

/// Variation split by face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HtvBreakdown {
    pub total: f64,
    pub per_face: Vec<FaceTerm>,
}

impl CpwlFunction {
    pub fn new(mesh: Triangulation, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertices().len() {
            return Err(Error::invalid("one value per vertex is required"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values must be finite"));
        }
        Ok(CpwlFunction { mesh, values })
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `x`, or `None` outside the mesh.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let e = self.mesh.locate(x)?;
        Some(self.eval_in_element(e, x))
    }

    /// Affine extension of element `e` evaluated at `x`.
    pub fn eval_in_element(&self, e: usize, x: &[f64]) -> f64 {
        let pts = self.mesh.element_points(e);
        let lam = mesh::barycentric(&pts, x);
        lam.iter().zip(&self.mesh.elements()[e]).map(|(l, &v)| l * self.values[v]).sum()
    }

    pub fn to_json(&self) -> String {
        let file = CpwlFile {
            dim: self.mesh.dim(),
            vertices: self.mesh.vertices().iter().map(|p| p.to_vec()).collect(),
            elements: self.mesh.elements().to_vec(),
            values: self.values.clone(),
        };
        serde_json::to_string(&file).expect("cpwl serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CpwlFile = serde_json::from_str(text)?;
        let vs = VertexSet::from_points(file.dim, &file.vertices)?;
        CpwlFunction::new(Triangulation::new(vs, file.elements)?, file.values)
    }
}

#[derive(Serialize, Deserialize)]
struct CpwlFile {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
    values: Vec<f64>,
}

/// Interpolant of `w` at the mesh vertices.
pub fn interpolate<W: Fn(&[f64]) -> f64>(mesh: &Triangulation, w: W) -> Result<CpwlFunction> {
    let values = mesh.vertices().iter().map(|p| w(p)).collect();
    CpwlFunction::new(mesh.clone(), values)
}

/// Constant gradient of `f` on element `e`.
pub fn element_gradient(f: &CpwlFunction, e: usize) -> Result<Vec<f64>> {
    let t = &f.mesh;
    if e >= t.elements().len() {
        return Err(Error::invalid(format!("element {e} does not exist")));
    }
    let d = t.dim();
    let el = &t.elements()[e];
    let p0 = t.vertices().point(el[0]);
    let mut a: Vec<Vec<f64>> = (1..=d)
        .map(|i| {
            let pi = t.vertices().point(el[i]);
            let mut row: Vec<f64> = (0..d).map(|k| pi[k] - p0[k]).collect();
            row.push(f.values[el[i]] - f.values[el[0]]);
            row
        })
        .collect();
    if t.element_volume(e) <= 0.0 {
        return Err(Error::degenerate(format!("element {e} has zero volume")));
    }
    Ok(mesh::solve_augmented(&mut a))
}

fn norm(v: &[f64]) -> f64 {
    PExponent::TWO.norm(v)
}

/// Neumaier-compensated sum in the given order.
pub fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Variation of `f` on the open box `omega`.
///
/// If `omega` reaches outside the mesh, `f` is extended by zero, which is
/// continuous only when `f` vanishes on the mesh boundary; otherwise an error
/// is returned. The result does not depend on `p`.
pub fn htv(f: &CpwlFunction, omega: &AxisBox, p: PExponent) -> Result<HtvBreakdown> {
    let _ = p;
    let t = &f.mesh;
    let d = t.dim();
    if omega.dim() != d {
        return Err(Error::invalid("box dimension differs from mesh dimension"));
    }
    if d != 2 && d != 3 {
        return Err(Error::invalid("face clipping is implemented for d = 2 and d = 3"));
    }
    let grads: Vec<Vec<f64>> = (0..t.elements().len()).map(|e| element_gradient(f, e)).collect::<Result<_>>()?;
    let inside_hull = box_corners(omega).iter().all(|c| t.locate(c).is_some());
    if !inside_hull {
        let scale = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for face in t.faces().iter().filter(|fc| !fc.is_interior()) {
            if face.vertices.iter().any(|&v| f.values[v].abs() > 1e-12 * scale.max(1.0)) {
                return Err(Error::invalid(
                    "box exceeds the mesh and the function does not vanish on the mesh boundary",
                ));
            }
        }
    }
    let gscale = grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
    let mut per_face = Vec::new();
    for (fi, face) in t.faces().iter().enumerate() {
        let jump_vec: Vec<f64> = match face.elements.as_slice() {
            [(a, _), (b, _)] => grads[*a].iter().zip(&grads[*b]).map(|(x, y)| x - y).collect(),
            [(a, _)] => {
                if inside_hull {
                    continue;
                }
                grads[*a].clone()
            }
            _ => unreachable!("faces have one or two elements"),
        };
        let jump = norm(&jump_vec);
        if jump <= 1e-12 * gscale.max(1.0) {
            continue;
        }
        let pts: Vec<&[f64]> = face.vertices.iter().map(|&v| t.vertices().point(v)).collect();
        let measure = clipped_measure(&pts, omega);
        if measure > 0.0 {
            per_face.push(FaceTerm { face: fi, measure, jump });
        }
    }
    let total = compensated_sum(per_face.iter().map(|f| f.measure * f.jump));
    Ok(HtvBreakdown { total, per_face })
}

fn box_corners(b: &AxisBox) -> Vec<Vec<f64>> {
    let d = b.dim();
    (0..1usize << d)
        .map(|m| (0..d).map(|k| if m & (1 << k) != 0 { b.hi[k] } else { b.lo[k] }).collect())
        .collect()
}

/// Faces with a nonzero gradient jump lying inside `∂omega` with positive
/// measure. [`htv`] ignores them (Ω is open); callers may want to warn.
pub fn faces_on_box_boundary(f: &CpwlFunction, omega: &AxisBox) -> Result<Vec<usize>> {
    let t = &f.mesh;
    let d = t.dim();
    let mut out = Vec::new();
    for (fi, face) in t.faces().iter().enumerate() {
        let pts: Vec<&[f64]> = face.vertices.iter().map(|&v| t.vertices().point(v)).collect();
        let Some((k, _)) = (0..d)
            .flat_map(|k| [(k, omega.lo[k]), (k, omega.hi[k])])
            .find(|&(k, b)| pts.iter().all(|p| p[k] == b))
        else {
            continue;
        };
        let mut wider = omega.clone();
        wider.lo[k] -= 1.0;
        wider.hi[k] += 1.0;
        if clipped_measure(&pts, &wider) <= 0.0 {
            continue;
        }
        let jump = match face.elements.as_slice() {
            [(a, _), (b, _)] => {
                let (ga, gb) = (element_gradient(f, *a)?, element_gradient(f, *b)?);
                norm(&ga.iter().zip(&gb).map(|(x, y)| x - y).collect::<Vec<_>>())
            }
            [(a, _)] => norm(&element_gradient(f, *a)?),
            _ => 0.0,
        };
        if jump > 1e-12 {
            out.push(fi);
        }
    }
    Ok(out)
}

/// Measure of `face ∩ omega`, with faces inside `∂omega` contributing zero.
pub fn clipped_measure(face: &[&[f64]], omega: &AxisBox) -> f64 {
    let d = omega.dim();
    for k in 0..d {
        for bound in [omega.lo[k], omega.hi[k]] {
            if face.iter().all(|p| p[k] == bound) {
                return 0.0;
            }
        }
    }
    let mut poly: Vec<Vec<f64>> = face.iter().map(|p| p.to_vec()).collect();
    for k in 0..d {
        poly = clip_halfspace(&poly, k, omega.lo[k], true);
        poly = clip_halfspace(&poly, k, omega.hi[k], false);
        if poly.is_empty() {
            return 0.0;
        }
    }
    match d {
        2 => {
            if poly.len() < 2 {
                0.0
            } else {
                mesh::dist(&poly[0], &poly[poly.len() - 1])
            }
        }
        3 => polygon_area(&poly),
        _ => 0.0,
    }
}

/// Sutherland–Hodgman step against `x_k >= c` (`lower`) or `x_k <= c`.
///
/// For segments (two points) the output is the clipped segment.
fn clip_halfspace(poly: &[Vec<f64>], k: usize, c: f64, lower: bool) -> Vec<Vec<f64>> {
    let inside = |p: &Vec<f64>| if lower { p[k] >= c } else { p[k] <= c };
    let cut = |a: &Vec<f64>, b: &Vec<f64>| -> Vec<f64> {
        let t = (c - a[k]) / (b[k] - a[k]);
        let mut x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
        x[k] = c;
        x
    };
    if poly.len() == 2 {
        let (a, b) = (&poly[0], &poly[1]);
        return match (inside(a), inside(b)) {
            (true, true) => poly.to_vec(),
            (false, false) => Vec::new(),
            (true, false) => vec![a.clone(), cut(a, b)],
            (false, true) => vec![cut(a, b), b.clone()],
        };
    }
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let cur = &poly[i];
        let prev = &poly[(i + poly.len() - 1) % poly.len()];
        match (inside(prev), inside(cur)) {
            (true, true) => out.push(cur.clone()),
            (true, false) => out.push(cut(prev, cur)),
            (false, true) => {
                out.push(cut(prev, cur));
                out.push(cur.clone());
            }
            (false, false) => {}
        }
    }
    out
}

fn polygon_area(poly: &[Vec<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = [0.0; 3];
    let o = &poly[0];
    for i in 1..poly.len() - 1 {
        let a: Vec<f64> = (0..3).map(|k| poly[i][k] - o[k]).collect();
        let b: Vec<f64> = (0..3).map(|k| poly[i + 1][k] - o[k]).collect();
        acc[0] += a[1] * b[2] - a[2] * b[1];
        acc[1] += a[2] * b[0] - a[0] * b[2];
        acc[2] += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * norm(&acc)
}

/// The pyramid `max(1 − ‖x − c‖_∞, 0)` on its eight-triangle fan.
pub fn pyramid(center: [f64; 2]) -> CpwlFunction {
    let [cx, cy] = center;
    let ring = [(1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 0.0), (-1.0, -1.0), (0.0, -1.0), (1.0, -1.0)];
    let mut pts = vec![vec![cx, cy]];
    pts.extend(ring.iter().map(|(x, y)| vec![cx + x, cy + y]));
    let elements = (0..8).map(|k| vec![0, 1 + k, 1 + (k + 1) % 8]).collect();
    let mut values = vec![0.0; 9];
    values[0] = 1.0;
    let mesh = Triangulation::new(VertexSet::from_points(2, &pts).unwrap(), elements).unwrap();
    CpwlFunction::new(mesh, values).unwrap()
}

/// Sum of two pyramids centred at `±e_1`, on the union of their fans.
pub fn double_pyramid() -> CpwlFunction {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    let index = |p: Vec<f64>, v: f64, pts: &mut Vec<Vec<f64>>, values: &mut Vec<f64>| -> usize {
        if let Some(i) = pts.iter().position(|q| *q == p) {
            i
        } else {
            pts.push(p);
            values.push(v);
            pts.len() - 1
        }
    };
    let mut elements = Vec::new();
    for c in [-1.0, 1.0] {
        let one = pyramid([c, 0.0]);
        let map: Vec<usize> = one
            .mesh()
            .vertices()
            .iter()
            .zip(one.values())
            .map(|(p, &v)| index(p.to_vec(), v, &mut pts, &mut values))
            .collect();
        for el in one.mesh().elements() {
            elements.push(el.iter().map(|&i| map[i]).collect());
        }
    }
    let mesh = Triangulation::new(VertexSet::from_points(2, &pts).unwrap(), elements).unwrap();
    CpwlFunction::new(mesh, values).unwrap()
}

/// The family `G_h`, `0 ≤ h < 1/4`, with `G_0` the double pyramid.
///
/// For `h > 0` the function equals the pyramids `1 − ‖x ∓ (1+h)e_1‖_∞` on
/// their outer three faces, `|x_1| − h` on two pentagons reaching the
/// vertical axis, and `|x_2| − 1` on two small triangles at `(0, ±1)`.
/// It takes the value `−h` at `(0, ±(1−h))` and vanishes outside
/// `[−2−h, 2+h] × [−1, 1]`.
pub fn remnotclosed_fixtures(h: f64) -> Result<CpwlFunction> {
    if !(0.0..0.25).contains(&h) {
        return Err(Error::invalid(format!("h must lie in [0, 1/4), got {h}")));
    }
    if h == 0.0 {
        return Ok(double_pyramid());
    }
    let a = 1.0 + h;
    let b = 2.0 + h;
    let m = 1.0 - h;
    // right half, then mirrored
    let mut pts: Vec<Vec<f64>> = vec![
        vec![0.0, m],  // 0 top marker
        vec![0.0, -m], // 1 bottom marker
    ];
    let mut values = vec![-h, -h];
    let mut elements: Vec<Vec<usize>> = Vec::new();
    for s in [1.0, -1.0] {
        let base = pts.len();
        pts.extend([
            vec![s * a, 0.0],  // apex
            vec![s * h, 1.0],  // inner top
            vec![s * h, -1.0], // inner bottom
            vec![s * b, 1.0],  // outer top
            vec![s * b, -1.0], // outer bottom
        ]);
        values.extend([1.0, 0.0, 0.0, 0.0, 0.0]);
        let (apex, it, ib, ot, ob) = (base, base + 1, base + 2, base + 3, base + 4);
        elements.push(vec![apex, ot, it]);
        elements.push(vec![apex, ob, ot]);
        elements.push(vec![apex, ib, ob]);
        elements.push(vec![apex, it, 0]);
        elements.push(vec![apex, 0, 1]);
        elements.push(vec![apex, 1, ib]);
    }
    // vertices 3/4 are the right inner top/bottom, 8/9 the left ones
    elements.push(vec![3, 8, 0]);
    elements.push(vec![4, 1, 9]);
    let mesh = Triangulation::new(VertexSet::from_points(2, &pts)?, elements)?;
    CpwlFunction::new(mesh, values)
}
