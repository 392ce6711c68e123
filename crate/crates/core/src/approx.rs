//! Interpolation of smooth targets on orientation-adapted grids.
//!
//! On a lattice aligned with the eigenvectors of `∇²w`, the interpolant's
//! gradient jumps across lattice faces add up to `∫ |∇²w|₁`, the smallest
//! possible value. Misaligned lattices pay for the off-diagonal part of the
//! Hessian, and no refinement removes that cost.

use serde::Serialize;

use crate::cpwl::{htv, interpolate, CpwlFunction};
use crate::error::{Error, Result};
use crate::io::fmt12;
use crate::mesh::AxisBox;
use crate::oriented_grid::{oriented_triangulation, GridAudit, GridParams, OrientationField};
use crate::quadrature::integrate_to_width;
use crate::schatten::{GeneralMatrix, PExponent, SymMatrix};

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type HessianFn = Box<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>;

/// A `C²` function with an exact Hessian.
pub struct Target {
    name: String,
    dim: usize,
    value: ScalarFn,
    hessian: HessianFn,
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Target").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl Target {
    /// Names accepted by [`Target::builtin`].
    pub const BUILTIN: [&'static str; 4] = ["quad_iso", "quad_saddle", "gauss", "cone"];

    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static,
    ) -> Self {
        Target { name: name.into(), dim, value: Box::new(value), hessian: Box::new(hessian) }
    }

    /// Built-in targets:
    ///
    /// - `quad_iso`: `|x|²/2`
    /// - `quad_saddle`: `x₁x₂`
    /// - `gauss`: `exp(−|x − c|²/(2σ²))` with `c = (½, …, ½)`, `σ = 1/4`
    /// - `cone`: `(|x − c|² + η²)^{1/2}` with `η = 1/10`, a cone smoothed at its tip
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("targets need d ≥ 2"));
        }
        let t = match name {
            "quad_iso" => Target::new(
                name,
                dim,
                |x: &[f64]| 0.5 * x.iter().map(|c| c * c).sum::<f64>(),
                move |_: &[f64]| SymMatrix::diag(&vec![1.0; dim]),
            ),
            "quad_saddle" => Target::new(
                name,
                dim,
                |x: &[f64]| x[0] * x[1],
                move |_: &[f64]| {
                    let mut m = GeneralMatrix::diag(&vec![0.0; dim]);
                    m.set(0, 1, 1.0);
                    m.set(1, 0, 1.0);
                    SymMatrix::new(m).expect("symmetric")
                },
            ),
            "gauss" => {
                const S2: f64 = 1.0 / 16.0;
                Target::new(
                    name,
                    dim,
                    |x: &[f64]| (-x.iter().map(|c| (c - 0.5).powi(2)).sum::<f64>() / (2.0 * S2)).exp(),
                    move |x: &[f64]| {
                        let y: Vec<f64> = x.iter().map(|c| c - 0.5).collect();
                        let g = (-y.iter().map(|c| c * c).sum::<f64>() / (2.0 * S2)).exp();
                        let mut m = GeneralMatrix::outer(&y, &y).expect("same length");
                        for i in 0..dim {
                            for j in 0..dim {
                                let id = if i == j { 1.0 / S2 } else { 0.0 };
                                m.set(i, j, g * (m.get(i, j) / (S2 * S2) - id));
                            }
                        }
                        SymMatrix::symmetrize(&m)
                    },
                )
            }
            "cone" => {
                const ETA2: f64 = 0.01;
                Target::new(
                    name,
                    dim,
                    |x: &[f64]| (x.iter().map(|c| (c - 0.5).powi(2)).sum::<f64>() + ETA2).sqrt(),
                    move |x: &[f64]| {
                        let y: Vec<f64> = x.iter().map(|c| c - 0.5).collect();
                        let r = (y.iter().map(|c| c * c).sum::<f64>() + ETA2).sqrt();
                        let mut m = GeneralMatrix::outer(&y, &y).expect("same length");
                        for i in 0..dim {
                            for j in 0..dim {
                                let id = if i == j { 1.0 / r } else { 0.0 };
                                m.set(i, j, id - m.get(i, j) / (r * r * r));
                            }
                        }
                        SymMatrix::symmetrize(&m)
                    },
                )
            }
            _ => {
                return Err(Error::invalid(format!(
                    "unknown target `{name}`; expected one of {}",
                    Target::BUILTIN.join(", ")
                )))
            }
        };
        Ok(t)
    }

    /// `a·x + b`.
    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        let dim = a.len();
        Target::new(
            "affine",
            dim,
            move |x: &[f64]| b + a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>(),
            move |_: &[f64]| SymMatrix::diag(&vec![0.0; dim]),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        (self.hessian)(x)
    }
}

/// Rotation diagonalizing `h`, chosen closest to the identity.
///
/// Columns are eigenvectors, permuted and signed to maximize the diagonal,
/// with determinant `+1`. Repeated eigenvalues are resolved by projecting the
/// coordinate axes onto the eigenspace, so a multiple of the identity gives
/// the identity.
pub fn hessian_rotation(h: &SymMatrix) -> GeneralMatrix {
    let d = h.dim();
    let (vals, vecs) = h.eigen();
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (vals[end] - vals[start]).abs() <= tol {
            end += 1;
        }
        let block: Vec<Vec<f64>> = (start..end).map(|j| vecs.column(j)).collect();
        if block.len() == 1 {
            cols.extend(block);
        } else {
            cols.extend(axis_aligned_basis(&block, d));
        }
        start = end;
    }

    let mut best_perm: Vec<usize> = (0..d).collect();
    let mut best = f64::NEG_INFINITY;
    for perm in permutations(d) {
        let score: f64 = (0..d).map(|i| cols[perm[i]][i].abs()).sum();
        if score > best + 1e-14 {
            best = score;
            best_perm = perm;
        }
    }
    let mut r = GeneralMatrix::identity(d);
    for i in 0..d {
        let c = &cols[best_perm[i]];
        let sign = if c[i] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..d {
            r.set(k, i, sign * c[k]);
        }
    }
    if r.determinant() < 0.0 {
        let j = (0..d).min_by(|&a, &b| r.get(a, a).abs().total_cmp(&r.get(b, b).abs())).expect("d ≥ 1");
        for k in 0..d {
            r.set(k, j, -r.get(k, j));
        }
    }
    r
}

/// Orthonormal basis of span(`block`) built from the projected coordinate
/// axes, longest projections first.
fn axis_aligned_basis(block: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let project = |e: usize| -> Vec<f64> {
        let mut p = vec![0.0; d];
        for v in block {
            for k in 0..d {
                p[k] += v[e] * v[k];
            }
        }
        p
    };
    let mut axes: Vec<(usize, Vec<f64>)> = (0..d).map(|e| (e, project(e))).collect();
    axes.sort_by(|a, b| dot(&b.1, &b.1).total_cmp(&dot(&a.1, &a.1)).then(a.0.cmp(&b.0)));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (_, mut p) in axes {
        if basis.len() == block.len() {
            break;
        }
        for b in &basis {
            let c = dot(&p, b);
            for k in 0..d {
                p[k] -= c * b[k];
            }
        }
        let n = dot(&p, &p).sqrt();
        if n > 1e-8 {
            basis.push(p.into_iter().map(|c| c / n).collect());
        }
    }
    basis
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Field on the cells `centre(domain) + δZ^d` meeting the domain, with the
/// eigenbasis of `∇²w` at each cell centre.
pub fn hessian_orientation_field(w: &Target, delta: f64, domain: &AxisBox) -> Result<OrientationField> {
    if w.dim() != domain.dim() {
        return Err(Error::invalid("target and box dimensions differ"));
    }
    OrientationField::from_fn(delta, domain, &domain.center(), |z| hessian_rotation(&w.hessian(z)))
}

/// `∫_Ω |∇²w|₁` by nested adaptive Gauss–Legendre quadrature.
///
/// The integrand is smooth except where an eigenvalue of `∇²w` changes sign;
/// along each innermost line those points are located by bisection and the
/// smooth pieces integrated separately.
pub fn target_htv_exact(w: &Target, omega: &AxisBox) -> Result<f64> {
    let d = omega.dim();
    if w.dim() != d {
        return Err(Error::invalid("target and box dimensions differ"));
    }
    let mid = omega.center();
    let rough = nuclear(&hessian_eigenvalues(&w.hessian(&mid))).max(1e-3) * omega.volume();
    nested(w, omega, &vec![0.0; d], 0, 1e-12 * rough)
}

fn hessian_eigenvalues(h: &SymMatrix) -> Vec<f64> {
    if h.dim() == 2 {
        let (a, b, c) = (h.get(0, 0), h.get(0, 1), h.get(1, 1));
        let m = 0.5 * (a + c);
        let r = (0.5 * (a - c)).hypot(b);
        return vec![m + r, m - r];
    }
    h.eigenvalues()
}

fn nuclear(vals: &[f64]) -> f64 {
    vals.iter().map(|v| v.abs()).sum()
}

fn sign_pattern(vals: &[f64]) -> (usize, usize) {
    (vals.iter().filter(|&&v| v > 0.0).count(), vals.iter().filter(|&&v| v < 0.0).count())
}

fn nested(w: &Target, omega: &AxisBox, x: &[f64], axis: usize, tol: f64) -> Result<f64> {
    let d = omega.dim();
    let (a, b) = (omega.lo[axis], omega.hi[axis]);
    let at = |t: f64| {
        let mut y = x.to_vec();
        y[axis] = t;
        y
    };
    if axis + 1 == d {
        let eig = |t: f64| hessian_eigenvalues(&w.hessian(&at(t)));
        let f = |t: f64| nuclear(&eig(t));
        const SAMPLES: usize = 64;
        let mut breaks = vec![a];
        let mut prev = (a, sign_pattern(&eig(a)));
        for i in 1..=SAMPLES {
            let t = a + (b - a) * i as f64 / SAMPLES as f64;
            let pat = sign_pattern(&eig(t));
            if pat != prev.1 {
                let (mut lo, mut hi) = (prev.0, t);
                for _ in 0..80 {
                    let m = 0.5 * (lo + hi);
                    if m <= lo || m >= hi {
                        break;
                    }
                    if sign_pattern(&eig(m)) == prev.1 {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                breaks.push(0.5 * (lo + hi));
            }
            prev = (t, pat);
        }
        breaks.push(b);
        let share = tol / (breaks.len() - 1) as f64;
        let mut sum = 0.0;
        for p in breaks.windows(2) {
            sum += integrate_to_width(&f, p[0], p[1], share, 1e-12 * (b - a))?;
        }
        return Ok(sum);
    }
    // inner error must stay well below the outer panel tolerance at every depth
    let inner_tol = 1e-3 * tol / (b - a);
    let failure = std::cell::RefCell::new(None);
    let g = |t: f64| match nested(w, omega, &at(t), axis + 1, inner_tol) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let v = integrate_to_width(&g, a, b, tol, 1e-10 * (b - a))?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Orientation used at every level of a density experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldChoice {
    /// Eigenbasis of the target's Hessian per cell.
    Adapted,
    /// `R ≡ I`: the plain lattice.
    Identity,
}

impl std::str::FromStr for FieldChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adapted" => Ok(FieldChoice::Adapted),
            "identity" => Ok(FieldChoice::Identity),
            _ => Err(Error::invalid(format!("field must be `adapted` or `identity`, got `{s}`"))),
        }
    }
}

/// `δ = max(C_G·ε, round(c√ε/ε)·ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaRule {
    pub c: f64,
}

impl Default for DeltaRule {
    /// `c = 10`, the smallest round constant for which one cell covers the
    /// unit square at `ε = 1/64`.
    fn default() -> Self {
        DeltaRule { c: 10.0 }
    }
}

impl DeltaRule {
    /// `min_ratio` is the smallest admissible `δ/ε` of the grid construction.
    pub fn delta(&self, eps: f64, min_ratio: f64) -> f64 {
        let raw = self.c * eps.sqrt();
        (min_ratio * eps).max((raw / eps).round() * eps)
    }
}

/// One level of a density experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityRow {
    pub eps: f64,
    pub delta: f64,
    pub htv: f64,
    pub target: f64,
    /// `|htv − target| / target`, or the absolute difference when the target is 0.
    pub gap: f64,
}

/// Working box made of whole cells centred on `omega`, plus a margin of `2ε`.
fn working_box(omega: &AxisBox, delta: f64, eps: f64) -> Result<AxisBox> {
    let c = omega.center();
    let mut lo = Vec::with_capacity(c.len());
    let mut hi = Vec::with_capacity(c.len());
    for i in 0..c.len() {
        let side = omega.hi[i] - omega.lo[i];
        let mut n = (side / delta).ceil() as i64;
        if n % 2 == 0 {
            n += 1;
        }
        let half = n as f64 * delta / 2.0 + 2.0 * eps;
        lo.push(c[i] - half);
        hi.push(c[i] + half);
    }
    AxisBox::new(lo, hi)
}

/// Interpolant of `w` on the oriented triangulation at scale `eps`.
pub fn adapted_interpolant(
    w: &Target,
    eps: f64,
    delta: f64,
    omega: &AxisBox,
    choice: FieldChoice,
) -> Result<(CpwlFunction, GridAudit)> {
    let domain = working_box(omega, delta, eps)?;
    // validate sizes before building the field
    let params = GridParams { audit_uniformity: false, ..GridParams::practical(eps, delta, domain.clone())? };
    let field = match choice {
        FieldChoice::Adapted => hessian_orientation_field(w, delta, &domain)?,
        FieldChoice::Identity => {
            OrientationField::constant(delta, &domain, &omega.center(), &GeneralMatrix::identity(w.dim()))?
        }
    };
    let (mesh, audit) = oriented_triangulation(&field, &params)?;
    Ok((interpolate(&mesh, |x| w.value(x))?, audit))
}

/// HTV of adapted interpolants of `w` over `omega` along a decreasing
/// sequence of grid scales, against the exact value `∫_Ω |∇²w|₁`.
pub fn density_experiment(
    w: &Target,
    eps_seq: &[f64],
    rule: DeltaRule,
    omega: &AxisBox,
    choice: FieldChoice,
) -> Result<Vec<DensityRow>> {
    if eps_seq.is_empty() {
        return Err(Error::invalid("empty eps sequence"));
    }
    if eps_seq.windows(2).any(|p| !(p[1] < p[0])) {
        return Err(Error::invalid("eps sequence must be decreasing"));
    }
    let d = omega.dim();
    let min_ratio = ((4 * d).max(8 + 2 * d)) as f64;
    for &eps in eps_seq {
        let delta = rule.delta(eps, min_ratio);
        GridParams::practical(eps, delta, working_box(omega, delta, eps)?)?;
    }
    let target = target_htv_exact(w, omega)?;
    eps_seq
        .iter()
        .map(|&eps| {
            // δ ≥ C_G·ε and M = δ/ε − 2 ≥ 6 + 2d
            let delta = rule.delta(eps, min_ratio);
            let (u, _) = adapted_interpolant(w, eps, delta, omega, choice)?;
            let total = htv(&u, omega, PExponent::ONE)?.total;
            let gap = if target > 0.0 { (total - target).abs() / target } else { (total - target).abs() };
            Ok(DensityRow { eps, delta, htv: total, target, gap })
        })
        .collect()
}

/// CSV with header `eps,delta,htv,target,gap`.
pub fn rows_to_csv(rows: &[DensityRow]) -> String {
    let mut out = String::from("eps,delta,htv,target,gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt12(r.eps),
            fmt12(r.delta),
            fmt12(r.htv),
            fmt12(r.target),
            fmt12(r.gap)
        ));
    }
    out
}
