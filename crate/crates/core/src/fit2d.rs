//! HTV-regularised fitting over CPWL functions on a fixed planar mesh.
//!
//! The HTV of a CPWL function is `Σ_e ℓ_e·|jump of ∂_n u across e|`, linear
//! in the vertex values up to the absolute value, so with an `ℓ¹` fidelity
//! the whole problem is a linear program. Hard interpolation (`λ = ∞`) and
//! pinned vertices are substituted out of the LP instead of penalised.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::cpwl::compensated_sum;
use crate::error::{Error, Result};
use crate::lp::{self, Certificate, LinearProgram};
use crate::mesh::{Triangulation, VertexSet};
use crate::schatten::PExponent;

/// Largest LP the dense solver is asked to handle.
pub const MAX_VARIABLES: usize = 20_000;

/// How the function behaves outside the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exterior {
    /// Only the mesh interior counts; boundary values are free.
    Free,
    /// Extended by zero: boundary vertices are pinned to 0 and the gradient
    /// jump across boundary edges is charged.
    Zero,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub mesh: Triangulation,
    /// Vertex index of each data site.
    pub sites: Vec<usize>,
    pub targets: Vec<f64>,
    /// Fidelity weight; `f64::INFINITY` requests exact interpolation.
    pub lambda: f64,
    /// Accepted for the record only: the HTV of a CPWL function does not
    /// depend on `p`.
    pub p: PExponent,
    pub q: PExponent,
    pub exterior: Exterior,
    /// Extra vertices held at fixed values.
    pub pinned: Vec<(usize, f64)>,
}

impl FitProblem {
    pub fn new(mesh: Triangulation, sites: Vec<usize>, targets: Vec<f64>, lambda: f64) -> Result<Self> {
        let prob = FitProblem {
            mesh,
            sites,
            targets,
            lambda,
            p: PExponent::ONE,
            q: PExponent::ONE,
            exterior: Exterior::Free,
            pinned: Vec::new(),
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_exterior(mut self, exterior: Exterior) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        FitProblem { lambda, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh.dim() != 2 {
            return Err(Error::invalid("fitting is implemented for planar meshes only"));
        }
        if self.q != PExponent::ONE {
            return Err(Error::invalid("only q = 1 fidelity is supported"));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::invalid(format!("lambda must lie in [0, inf], got {}", self.lambda)));
        }
        if self.sites.len() != self.targets.len() {
            return Err(Error::invalid("sites and targets differ in length"));
        }
        if self.targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("targets must be finite"));
        }
        let n = self.mesh.vertices().len();
        let mut seen = vec![false; n];
        for &s in &self.sites {
            if s >= n {
                return Err(Error::invalid(format!("site vertex {s} does not exist")));
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::invalid(format!("vertex {s} carries two data sites")));
            }
        }
        for &(v, val) in &self.pinned {
            if v >= n || !val.is_finite() {
                return Err(Error::invalid(format!("bad pin on vertex {v}")));
            }
        }
        Ok(())
    }
}

/// Snaps data points `(x, y, value)` to their nearest mesh vertices.
///
/// Returns the site indices, targets and snap distances. Two points landing
/// on one vertex is an error.
pub fn snap_points(mesh: &Triangulation, points: &[[f64; 3]]) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let grid = crate::mesh::PointGrid::new(mesh.vertices(), None);
    let mut sites = Vec::with_capacity(points.len());
    let mut dists = Vec::with_capacity(points.len());
    let mut owner = BTreeMap::new();
    for (k, p) in points.iter().enumerate() {
        let (v, d) = grid.nearest(&p[..2], None).ok_or_else(|| Error::invalid("mesh has no vertices"))?;
        if let Some(prev) = owner.insert(v, k) {
            return Err(Error::invalid(format!("points {prev} and {k} snap to the same vertex {v}")));
        }
        sites.push(v);
        dists.push(d);
    }
    Ok((sites, points.iter().map(|p| p[2]).collect(), dists))
}

/// One HTV term: `length · |Σ coeffs·u|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTerm {
    pub vertices: [usize; 2],
    pub length: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// Gradients of the three barycentric hat functions on a triangle.
fn hat_gradients(p: [&[f64]; 3]) -> [[f64; 2]; 3] {
    let (ax, ay) = (p[1][0] - p[0][0], p[1][1] - p[0][1]);
    let (bx, by) = (p[2][0] - p[0][0], p[2][1] - p[0][1]);
    let det = ax * by - ay * bx;
    // Rows of the inverse of [[ax, ay], [bx, by]] transpose.
    let g1 = [by / det, -bx / det];
    let g2 = [-ay / det, ax / det];
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

/// The normal-derivative jump functional of every charged edge.
pub fn edge_terms(mesh: &Triangulation, exterior: Exterior) -> Vec<EdgeTerm> {
    let mut out = Vec::new();
    for face in mesh.faces() {
        if !face.is_interior() && exterior == Exterior::Free {
            continue;
        }
        let (a, b) = (face.vertices[0], face.vertices[1]);
        let (pa, pb) = (mesh.vertices().point(a), mesh.vertices().point(b));
        let (tx, ty) = (pb[0] - pa[0], pb[1] - pa[1]);
        let length = tx.hypot(ty);
        let normal = [-ty / length, tx / length];
        let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
        for (k, &(e, _)) in face.elements.iter().enumerate() {
            let el = &mesh.elements()[e];
            let g = hat_gradients([mesh.vertices().point(el[0]), mesh.vertices().point(el[1]), mesh.vertices().point(el[2])]);
            let sign = if k == 0 { 1.0 } else { -1.0 };
            for (local, &v) in el.iter().enumerate() {
                *coeffs.entry(v).or_default() += sign * (g[local][0] * normal[0] + g[local][1] * normal[1]);
            }
        }
        out.push(EdgeTerm { vertices: [a, b], length, coeffs: coeffs.into_iter().collect() });
    }
    out
}

/// HTV of the CPWL function with the given vertex values.
pub fn discrete_htv(mesh: &Triangulation, values: &[f64], exterior: Exterior) -> f64 {
    htv_of_terms(&edge_terms(mesh, exterior), values)
}

fn htv_of_terms(terms: &[EdgeTerm], values: &[f64]) -> f64 {
    compensated_sum(terms.iter().map(|t| t.length * compensated_sum(t.coeffs.iter().map(|&(v, c)| c * values[v])).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub htv_part: f64,
    pub fidelity_part: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub lambda: f64,
    /// Largest LP residual relative to `1 + |objective|`.
    pub certificate: f64,
    pub lp: Certificate,
    pub iterations: usize,
    /// Filled in by callers that snapped scattered points.
    pub snap_distances: Vec<f64>,
}

/// Collects every pinned value, rejecting contradictions.
fn pins(prob: &FitProblem) -> Result<Vec<Option<f64>>> {
    let n = prob.mesh.vertices().len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut set = |v: usize, val: f64, what: &str| -> Result<()> {
        match fixed[v] {
            Some(old) if old != val => {
                Err(Error::invalid(format!("vertex {v} pinned to {old} and to {val} ({what})")))
            }
            _ => {
                fixed[v] = Some(val);
                Ok(())
            }
        }
    };
    if prob.exterior == Exterior::Zero {
        for face in prob.mesh.faces().iter().filter(|f| !f.is_interior()) {
            for &v in &face.vertices {
                set(v, 0.0, "zero exterior")?;
            }
        }
    }
    for &(v, val) in &prob.pinned {
        set(v, val, "explicit pin")?;
    }
    if prob.lambda.is_infinite() {
        for (&s, &y) in prob.sites.iter().zip(&prob.targets) {
            set(s, y, "interpolation")?;
        }
    }
    Ok(fixed)
}

pub fn solve(prob: &FitProblem) -> Result<FitSolution> {
    prob.validate()?;
    let n = prob.mesh.vertices().len();
    let fixed = pins(prob)?;
    let terms = edge_terms(&prob.mesh, prob.exterior);

    let mut lp = LinearProgram::new();
    // Free vertex values split as u = u⁺ − u⁻.
    let mut split = vec![None; n];
    for v in 0..n {
        if fixed[v].is_none() {
            split[v] = Some((lp.add_variable(0.0), lp.add_variable(0.0)));
        }
    }
    let linear = |coeffs: &[(usize, f64)]| -> (Vec<(usize, f64)>, f64) {
        let mut row = Vec::new();
        let mut constant = 0.0;
        for &(v, c) in coeffs {
            match (split[v], fixed[v]) {
                (Some((plus, minus)), _) => {
                    row.push((plus, c));
                    row.push((minus, -c));
                }
                (None, Some(val)) => constant += c * val,
                (None, None) => unreachable!(),
            }
        }
        (row, constant)
    };
    for t in &terms {
        let (mut row, constant) = linear(&t.coeffs);
        let p = lp.add_variable(t.length);
        let m = lp.add_variable(t.length);
        row.push((p, -1.0));
        row.push((m, 1.0));
        lp.add_row(&row, -constant);
    }
    if prob.lambda.is_finite() {
        for (&s, &y) in prob.sites.iter().zip(&prob.targets) {
            let (mut row, constant) = linear(&[(s, 1.0)]);
            let over = lp.add_variable(prob.lambda);
            let under = lp.add_variable(prob.lambda);
            row.push((over, -1.0));
            row.push((under, 1.0));
            lp.add_row(&row, y - constant);
        }
    }
    if lp.variables() > MAX_VARIABLES {
        return Err(Error::invalid(format!(
            "fit needs {} LP variables, above the cap of {MAX_VARIABLES}",
            lp.variables()
        )));
    }
    let sol = lp::solve(&lp)?;

    let values: Vec<f64> = (0..n)
        .map(|v| match (split[v], fixed[v]) {
            (Some((plus, minus)), _) => sol.x[plus] - sol.x[minus],
            (None, Some(val)) => val,
            (None, None) => unreachable!(),
        })
        .collect();
    let htv_part = htv_of_terms(&terms, &values);
    let fidelity_part = compensated_sum(prob.sites.iter().zip(&prob.targets).map(|(&s, &y)| (values[s] - y).abs()));
    let objective = if prob.lambda.is_infinite() || prob.lambda == 0.0 {
        // ∞·0 = 0 and 0·anything = 0.
        htv_part
    } else {
        htv_part + prob.lambda * fidelity_part
    };
    let certificate = sol.certificate.relative(sol.objective);
    let tol = 1e-7;
    if certificate > tol {
        return Err(Error::Solver(format!("optimality certificate {certificate:e} exceeds {tol:e}")));
    }
    Ok(FitSolution {
        values,
        objective,
        htv_part,
        fidelity_part,
        lambda: prob.lambda,
        certificate,
        lp: sol.certificate,
        iterations: sol.iterations,
        snap_distances: Vec::new(),
    })
}

/// Boundary vertices of a mesh (endpoints of faces with one element).
pub fn boundary_vertices(mesh: &Triangulation) -> Vec<usize> {
    let mut out: Vec<usize> =
        mesh.faces().iter().filter(|f| !f.is_interior()).flat_map(|f| f.vertices.iter().copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpCost {
    pub site: usize,
    pub radius: f64,
    pub value: f64,
    /// Continuous lower bound `4π` for unit bumps with compact support.
    pub lower_bound: f64,
    /// `max(0, lower_bound − value)`; nonzero only through round-off.
    pub tol_discrete: f64,
    pub values: Vec<f64>,
    pub certificate: f64,
}

/// Cheapest CPWL function on `mesh` with `u(site) = 1` and `u = 0` at every
/// vertex with `|x − x_site| ≥ radius`, extended by zero outside the mesh.
pub fn bump_cost(mesh: &Triangulation, site: usize, radius: f64) -> Result<BumpCost> {
    if mesh.dim() != 2 {
        return Err(Error::invalid("fitting is implemented for planar meshes only"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let verts = mesh.vertices();
    if site >= verts.len() {
        return Err(Error::invalid(format!("site vertex {site} does not exist")));
    }
    let boundary = boundary_vertices(mesh);
    if boundary.contains(&site) {
        return Err(Error::invalid(format!("site vertex {site} lies on the mesh boundary")));
    }
    let x = verts.point(site);
    let dist = |v: usize| {
        let p = verts.point(v);
        (p[0] - x[0]).hypot(p[1] - x[1])
    };
    // Rim vertices placed with sin/cos sit within rounding of the radius.
    let reach = radius * (1.0 - 1e-12);
    if boundary.iter().any(|&b| dist(b) < reach) {
        return Err(Error::invalid(format!("ball of radius {radius} around vertex {site} exceeds the mesh")));
    }
    let pinned = (0..verts.len()).filter(|&v| v != site && dist(v) >= reach).map(|v| (v, 0.0)).collect();
    let prob = FitProblem {
        mesh: mesh.clone(),
        sites: vec![site],
        targets: vec![1.0],
        lambda: f64::INFINITY,
        p: PExponent::ONE,
        q: PExponent::ONE,
        exterior: Exterior::Zero,
        pinned,
    };
    let sol = solve(&prob)?;
    let lower_bound = 4.0 * PI;
    Ok(BumpCost {
        site,
        radius,
        value: sol.objective,
        lower_bound,
        tol_discrete: (lower_bound - sol.objective).max(0.0),
        values: sol.values,
        certificate: sol.certificate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaRow {
    #[serde(with = "crate::io::extended_f64")]
    pub lambda: f64,
    pub objective: f64,
    pub htv_part: f64,
    pub fidelity_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub rows: Vec<LambdaRow>,
    pub bumps: Vec<BumpCost>,
    /// `max_i bump_cost(i)`.
    pub threshold: f64,
    pub infinite_objective: f64,
    /// (a) objective nondecreasing in λ.
    pub monotone: bool,
    /// (b) objective equals the `λ = ∞` value for every λ ≥ threshold.
    pub plateau: bool,
    /// (c) the modified fit satisfies `F_∞(f̃) ≤ F_λ(f) + 1e−9` at the threshold.
    pub modification_ok: bool,
    pub modified_htv: f64,
    pub threshold_objective: f64,
}

/// Sweeps λ, adding the bump threshold and `∞`, and checks the plateau.
///
/// Each site's bump radius is its distance to the nearest other site or
/// boundary vertex, so the bumps vanish at every other site.
pub fn lambda_threshold_experiment(base: &FitProblem, lambdas: &[f64]) -> Result<ThresholdReport> {
    base.validate()?;
    if base.sites.is_empty() {
        return Err(Error::invalid("the experiment needs at least one site"));
    }
    let verts = base.mesh.vertices();
    let boundary = boundary_vertices(&base.mesh);
    let dist = |a: usize, b: usize| {
        let (p, q) = (verts.point(a), verts.point(b));
        (p[0] - q[0]).hypot(p[1] - q[1])
    };
    if let Some(s) = base.sites.iter().find(|s| boundary.contains(s)) {
        return Err(Error::invalid(format!(
            "site vertex {s} lies on the mesh boundary, where no bump fits; the threshold sweep needs interior sites"
        )));
    }
    let mut bumps = Vec::with_capacity(base.sites.len());
    for &s in &base.sites {
        let radius = base
            .sites
            .iter()
            .filter(|&&t| t != s)
            .chain(&boundary)
            .map(|&t| dist(s, t))
            .fold(f64::INFINITY, f64::min);
        bumps.push(bump_cost(&base.mesh, s, radius)?);
    }
    let threshold = bumps.iter().map(|b| b.value).fold(0.0, f64::max);

    let mut sweep: Vec<f64> = lambdas.iter().copied().chain([threshold, f64::INFINITY]).collect();
    if sweep.iter().any(|l| l.is_nan() || *l < 0.0) {
        return Err(Error::invalid("lambdas must lie in [0, inf]"));
    }
    sweep.sort_by(f64::total_cmp);
    sweep.dedup();
    let solutions = solve_sweep(base, &sweep)?;
    let rows: Vec<LambdaRow> = sweep
        .iter()
        .zip(&solutions)
        .map(|(&lambda, s)| LambdaRow {
            lambda,
            objective: s.objective,
            htv_part: s.htv_part,
            fidelity_part: s.fidelity_part,
        })
        .collect();
    let infinite_objective = rows.last().expect("sweep contains inf").objective;
    let monotone = rows.windows(2).all(|w| w[1].objective >= w[0].objective - 1e-9 * (1.0 + w[0].objective.abs()));
    let plateau = rows
        .iter()
        .filter(|r| r.lambda >= threshold)
        .all(|r| (r.objective - infinite_objective).abs() <= 1e-6 * infinite_objective.abs() + 1e-12);

    let at = sweep.iter().position(|&l| l == threshold).expect("threshold in sweep");
    let f = &solutions[at];
    let mut modified = f.values.clone();
    for (k, (&s, &y)) in base.sites.iter().zip(&base.targets).enumerate() {
        let c = f.values[s] - y;
        for (m, g) in modified.iter_mut().zip(&bumps[k].values) {
            *m -= c * g;
        }
    }
    let fits = base.sites.iter().zip(&base.targets).all(|(&s, &y)| (modified[s] - y).abs() <= 1e-9 * (1.0 + y.abs()));
    let modified_htv = discrete_htv(&base.mesh, &modified, base.exterior);
    let modification_ok = fits && modified_htv <= f.objective + 1e-9;
    Ok(ThresholdReport {
        rows,
        bumps,
        threshold,
        infinite_objective,
        monotone,
        plateau,
        modification_ok,
        modified_htv,
        threshold_objective: f.objective,
    })
}

/// Solves one problem per λ on scoped worker threads; results keep input order.
pub fn solve_sweep(base: &FitProblem, lambdas: &[f64]) -> Result<Vec<FitSolution>> {
    let workers = crate::oriented_grid::worker_count().min(lambdas.len()).max(1);
    let mut slots: Vec<Option<Result<FitSolution>>> = (0..lambdas.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(lambdas.len().div_ceil(workers)).collect();
        let mut start = 0;
        for chunk in chunks {
            let begin = start;
            start += chunk.len();
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(solve(&base.with_lambda(lambdas[begin + k])));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Centre plus `k` rim vertices on the circle of radius `radius`.
pub fn polygon_fan(k: usize, radius: f64) -> Result<Triangulation> {
    if k < 3 || !(radius > 0.0) {
        return Err(Error::invalid("a fan needs k ≥ 3 sectors and a positive radius"));
    }
    let mut pts = vec![vec![0.0, 0.0]];
    for j in 0..k {
        let t = 2.0 * PI * j as f64 / k as f64;
        pts.push(vec![radius * t.cos(), radius * t.sin()]);
    }
    let elements = (0..k).map(|j| vec![0, 1 + j, 1 + (j + 1) % k]).collect();
    Triangulation::new(VertexSet::from_points(2, &pts)?, elements)
}

/// The eight-triangle fan of `[−1, 1]²` around the origin.
pub fn square_fan() -> Triangulation {
    crate::cpwl::pyramid([0.0, 0.0]).mesh().clone()
}

/// Structured mesh of `[−half, half]²` with `n × n` squares, each cut along
/// its rising diagonal.
pub fn grid_mesh(n: usize, half: f64) -> Result<Triangulation> {
    if n == 0 || !(half > 0.0) {
        return Err(Error::invalid("grid needs n ≥ 1 and a positive half-width"));
    }
    let h = 2.0 * half / n as f64;
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            pts.push(vec![-half + i as f64 * h, -half + j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            elements.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Triangulation::new(VertexSet::from_points(2, &pts)?, elements)
}

/// Splits every triangle into four through its edge midpoints.
pub fn refine_uniform(mesh: &Triangulation) -> Result<Triangulation> {
    if mesh.dim() != 2 {
        return Err(Error::invalid("uniform refinement is implemented for planar meshes"));
    }
    let mut pts: Vec<Vec<f64>> = mesh.vertices().iter().map(|p| p.to_vec()).collect();
    let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut midpoint = |a: usize, b: usize, pts: &mut Vec<Vec<f64>>| {
        *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
            let p = vec![0.5 * (pts[a][0] + pts[b][0]), 0.5 * (pts[a][1] + pts[b][1])];
            pts.push(p);
            pts.len() - 1
        })
    };
    let mut elements = Vec::with_capacity(4 * mesh.elements().len());
    for el in mesh.elements() {
        let (a, b, c) = (el[0], el[1], el[2]);
        let ab = midpoint(a, b, &mut pts);
        let bc = midpoint(b, c, &mut pts);
        let ca = midpoint(c, a, &mut pts);
        elements.extend([vec![a, ab, ca], vec![ab, b, bc], vec![ca, bc, c], vec![ab, bc, ca]]);
    }
    Triangulation::new(VertexSet::from_points(2, &pts)?, elements)
}
