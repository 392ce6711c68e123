//! Delaunay triangulations and lower convex envelopes of lifted point sets.
//!
//! Construction is incremental (Bowyer–Watson) with ghost simplices carrying
//! a vertex at infinity, so the result covers the convex hull exactly. Ties
//! are broken by symbolic perturbation: vertex `i` is lifted to height
//! `h(x_i) + ρ^{i+2}` and the sign of each degenerate test is read off the
//! lowest power of `ρ` with a nonzero coefficient. The output is therefore
//! the `ρ → 0` limit of the triangulations induced by the perturbed lifts,
//! and it depends only on the input order.

use crate::error::{Error, Result};
use crate::mesh::{Triangulation, VertexSet};
use crate::predicates::{self, exact};
use std::collections::HashMap;

const GHOST: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Cell {
    v: Vec<usize>,
    nbr: Vec<usize>,
    alive: bool,
}

#[derive(Clone, Copy)]
enum Lift<'a> {
    Paraboloid,
    Heights(&'a [f64]),
}

struct Builder<'a> {
    pts: &'a VertexSet,
    lift: Lift<'a>,
    d: usize,
    cells: Vec<Cell>,
    free: Vec<usize>,
    last: usize,
    rng: u64,
    stamp: u32,
    in_cavity: Vec<u32>,
    rejected: Vec<u32>,
    redundant: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(pts: &'a VertexSet, lift: Lift<'a>) -> Result<Self> {
        let d = pts.dim();
        if d < 2 {
            return Err(Error::invalid("triangulation needs dim >= 2"));
        }
        let mut b = Builder {
            pts,
            lift,
            d,
            cells: Vec::new(),
            free: Vec::new(),
            last: 0,
            rng: 0x9E37_79B9_7F4A_7C15,
            stamp: 0,
            in_cavity: Vec::new(),
            rejected: Vec::new(),
            redundant: Vec::new(),
        };
        let start = b.initial_simplex()?;
        let n = pts.len();
        for i in 0..n {
            if !start.contains(&i) {
                b.insert(i);
            }
        }
        Ok(b)
    }

    fn point(&self, i: usize) -> &'a [f64] {
        self.pts.point(i)
    }

    fn orient_replace(&self, v: &[usize], i: usize, p: usize) -> i8 {
        let pts: Vec<&[f64]> =
            v.iter().enumerate().map(|(k, &x)| if k == i { self.point(p) } else { self.point(x) }).collect();
        predicates::orient(&pts)
    }

    fn initial_simplex(&mut self) -> Result<Vec<usize>> {
        let d = self.d;
        let mut chosen = vec![0usize];
        for i in 1..self.pts.len() {
            if chosen.len() == d + 1 {
                break;
            }
            let mut cand: Vec<&[f64]> = chosen.iter().map(|&k| self.point(k)).collect();
            cand.push(self.point(i));
            if exact::affine_rank(&cand) == chosen.len() {
                chosen.push(i);
            }
        }
        if chosen.len() < d + 1 {
            return Err(Error::degenerate("points are affinely dependent"));
        }
        let mut v = chosen.clone();
        let pts: Vec<&[f64]> = v.iter().map(|&k| self.point(k)).collect();
        if predicates::orient(&pts) < 0 {
            v.swap(0, 1);
        }
        let mut ids = vec![self.alloc(v.clone())];
        for i in 0..=d {
            let mut g = v.clone();
            g[i] = GHOST;
            let others: Vec<usize> = (0..=d).filter(|&k| k != i).take(2).collect();
            g.swap(others[0], others[1]);
            ids.push(self.alloc(g));
        }
        self.link(&ids);
        self.last = ids[0];
        Ok(chosen)
    }

    fn alloc(&mut self, v: Vec<usize>) -> usize {
        let cell = Cell { nbr: vec![GHOST; v.len()], v, alive: true };
        if let Some(i) = self.free.pop() {
            self.cells[i] = cell;
            self.in_cavity[i] = 0;
            self.rejected[i] = 0;
            i
        } else {
            self.cells.push(cell);
            self.in_cavity.push(0);
            self.rejected.push(0);
            self.cells.len() - 1
        }
    }

    /// Pairs up unset neighbour slots of `ids` through shared facets.
    fn link(&mut self, ids: &[usize]) {
        let mut open: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for &c in ids {
            for j in 0..=self.d {
                if self.cells[c].nbr[j] != GHOST {
                    continue;
                }
                let mut key: Vec<usize> =
                    self.cells[c].v.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &x)| x).collect();
                key.sort_unstable();
                if let Some((o, oj)) = open.remove(&key) {
                    self.cells[c].nbr[j] = o;
                    self.cells[o].nbr[oj] = c;
                } else {
                    open.insert(key, (c, j));
                }
            }
        }
        debug_assert!(open.is_empty(), "unmatched facets after linking");
    }

    fn ghost_slot(&self, c: usize) -> Option<usize> {
        self.cells[c].v.iter().position(|&x| x == GHOST)
    }

    fn conflict(&self, c: usize, p: usize) -> bool {
        match self.ghost_slot(c) {
            Some(g) => {
                let s = self.orient_replace(&self.cells[c].v, g, p);
                if s != 0 {
                    return s > 0;
                }
                // on the hull facet's plane: decided inside the facet
                self.conflict_real(self.cells[c].nbr[g], p)
            }
            None => self.conflict_real(c, p),
        }
    }

    fn conflict_real(&self, c: usize, p: usize) -> bool {
        let v = &self.cells[c].v;
        let pts: Vec<&[f64]> = v.iter().map(|&x| self.point(x)).collect();
        let s = match self.lift {
            Lift::Paraboloid => predicates::insphere(&pts, self.point(p)),
            Lift::Heights(h) => {
                let hs: Vec<f64> = v.iter().map(|&x| h[x]).collect();
                exact::lifted_below(&pts, &hs, self.point(p), h[p])
            }
        };
        if s != 0 {
            return s > 0;
        }
        self.perturbed_sign(v, p)
    }

    /// Sign of the ρ-expansion of the lifted test at a degenerate
    /// configuration: coefficient of `ρ^{φ(i)}` is the barycentric coordinate
    /// of `p` for simplex vertex `i`, and −1 for `p` itself.
    fn perturbed_sign(&self, v: &[usize], p: usize) -> bool {
        let mut order: Vec<(usize, Option<usize>)> = v.iter().enumerate().map(|(k, &x)| (x, Some(k))).collect();
        order.push((p, None));
        order.sort_unstable_by_key(|x| x.0);
        for (_, slot) in order {
            match slot {
                None => return false,
                Some(k) => {
                    let s = self.orient_replace(v, k, p);
                    if s != 0 {
                        return s > 0;
                    }
                }
            }
        }
        false
    }

    fn next_rand(&mut self) -> usize {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        (self.rng >> 33) as usize
    }

    /// Cell containing `p`, or a ghost whose outer side contains it.
    fn locate(&mut self, p: usize) -> usize {
        let mut c = self.last;
        if !self.cells[c].alive {
            c = self.cells.iter().position(|x| x.alive).expect("live cell");
        }
        if let Some(g) = self.ghost_slot(c) {
            c = self.cells[c].nbr[g];
        }
        let limit = 4 * self.cells.len() + 16;
        for _ in 0..limit {
            if self.ghost_slot(c).is_some() {
                return c;
            }
            let start = self.next_rand() % (self.d + 1);
            let mut moved = false;
            for k in 0..=self.d {
                let i = (start + k) % (self.d + 1);
                if self.orient_replace(&self.cells[c].v, i, p) < 0 {
                    c = self.cells[c].nbr[i];
                    moved = true;
                    break;
                }
            }
            if !moved {
                return c;
            }
        }
        // walk did not settle; fall back to a scan
        (0..self.cells.len())
            .find(|&x| self.cells[x].alive && self.ghost_slot(x).is_none() && self.contains(x, p))
            .or_else(|| (0..self.cells.len()).find(|&x| self.cells[x].alive && self.conflict(x, p)))
            .expect("some cell contains or sees the point")
    }

    fn contains(&self, c: usize, p: usize) -> bool {
        (0..=self.d).all(|i| self.orient_replace(&self.cells[c].v, i, p) >= 0)
    }

    fn insert(&mut self, p: usize) {
        let mut start = self.locate(p);
        if !self.conflict(start, p) && matches!(self.lift, Lift::Paraboloid) {
            // every site is a Delaunay vertex; recover from a bad walk
            start = (0..self.cells.len())
                .find(|&c| self.cells[c].alive && self.conflict(c, p))
                .expect("some cell conflicts with a new site");
        }
        if !self.conflict(start, p) {
            // lift lies above the envelope
            self.redundant.push(p);
            return;
        }
        self.stamp += 1;
        let stamp = self.stamp;
        let mut cavity = vec![start];
        self.in_cavity[start] = stamp;
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        let mut k = 0;
        while k < cavity.len() {
            let c = cavity[k];
            k += 1;
            for i in 0..=self.d {
                let nb = self.cells[c].nbr[i];
                if self.in_cavity[nb] == stamp {
                    continue;
                }
                if self.rejected[nb] != stamp && self.conflict(nb, p) {
                    self.in_cavity[nb] = stamp;
                    cavity.push(nb);
                } else {
                    self.rejected[nb] = stamp;
                    boundary.push((c, i));
                }
            }
        }
        let mut created = Vec::with_capacity(boundary.len());
        for &(c, i) in &boundary {
            let mut v = self.cells[c].v.clone();
            v[i] = p;
            let outside = self.cells[c].nbr[i];
            let id = self.alloc(v);
            self.cells[id].nbr[i] = outside;
            let back = self.cells[outside].nbr.iter().position(|&x| x == c).expect("reciprocal neighbour");
            self.cells[outside].nbr[back] = id;
            created.push(id);
        }
        for &c in &cavity {
            self.cells[c].alive = false;
            self.in_cavity[c] = 0;
            self.free.push(c);
        }
        self.link(&created);
        debug_assert!(created.iter().all(|&c| {
            self.ghost_slot(c).is_some() || {
                let pts: Vec<&[f64]> = self.cells[c].v.iter().map(|&x| self.point(x)).collect();
                predicates::orient(&pts) > 0
            }
        }));
        self.last = created[0];
    }

    fn real_cells(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&c| self.cells[c].alive && self.ghost_slot(c).is_none()).collect()
    }
}

/// Delaunay triangulation of a finite vertex set; elements are positively
/// oriented.
pub fn delaunay_triangulate(v: &VertexSet) -> Result<Triangulation> {
    let b = Builder::new(v, Lift::Paraboloid)?;
    let elements: Vec<Vec<usize>> = b.real_cells().into_iter().map(|c| b.cells[c].v.clone()).collect();
    Triangulation::new(v.clone(), elements)
}

/// Cell of a lower convex envelope: the vertices where it touches the lift
/// and the affine map `x ↦ gradient·x + offset` it restricts to.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCell {
    pub vertices: Vec<usize>,
    pub gradient: Vec<f64>,
    pub offset: f64,
    /// Simplices of the perturbed construction that make up this cell.
    pub simplices: Vec<Vec<usize>>,
}

impl EnvelopeCell {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.gradient.iter().zip(x).map(|(g, x)| g * x).sum::<f64>() + self.offset
    }
}

/// Lower convex envelope of `{(x_v, f_v)}` over the convex hull of the points,
/// split into maximal affine cells.
pub fn convex_envelope_cpwl(v: &VertexSet, f: &[f64]) -> Result<Vec<EnvelopeCell>> {
    if f.len() != v.len() {
        return Err(Error::invalid("one value per vertex is required"));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("envelope values must be finite"));
    }
    if v.len() < v.dim() + 1 {
        return Err(Error::invalid("need at least d + 1 points"));
    }
    let b = Builder::new(v, Lift::Heights(f))?;
    let d = v.dim();
    let cells = b.real_cells();
    let local: HashMap<usize, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut parent: Vec<usize> = (0..cells.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let n = parent[y];
            parent[y] = r;
            y = n;
        }
        r
    }
    let lifted_on = |c: usize, q: usize| -> bool {
        let vs = &b.cells[c].v;
        let pts: Vec<&[f64]> = vs.iter().map(|&x| v.point(x)).collect();
        let hs: Vec<f64> = vs.iter().map(|&x| f[x]).collect();
        exact::lifted_below(&pts, &hs, v.point(q), f[q]) == 0
    };
    for (k, &c) in cells.iter().enumerate() {
        for i in 0..=d {
            let nb = b.cells[c].nbr[i];
            let Some(&kn) = local.get(&nb) else { continue };
            let apex = *b.cells[nb].v.iter().find(|x| !b.cells[c].v.contains(x)).unwrap();
            if lifted_on(c, apex) {
                let (ra, rb) = (find(&mut parent, k), find(&mut parent, kn));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_index: HashMap<usize, usize> = HashMap::new();
    for k in 0..cells.len() {
        let r = find(&mut parent, k);
        let g = *root_index.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    let mut out: Vec<EnvelopeCell> = groups
        .iter()
        .map(|g| {
            let mut verts: Vec<usize> = g.iter().flat_map(|&k| b.cells[cells[k]].v.clone()).collect();
            verts.sort_unstable();
            verts.dedup();
            let first = &b.cells[cells[g[0]]].v;
            let (gradient, offset) = affine_through(v, first, f);
            EnvelopeCell {
                vertices: verts,
                gradient,
                offset,
                simplices: g.iter().map(|&k| b.cells[cells[k]].v.clone()).collect(),
            }
        })
        .collect();
    // points skipped by the construction that still touch a cell
    for &q in &b.redundant {
        for (gi, g) in groups.iter().enumerate() {
            let hit = g.iter().any(|&k| {
                let c = cells[k];
                let pts: Vec<&[f64]> = b.cells[c].v.iter().map(|&x| v.point(x)).collect();
                crate::mesh::point_in_simplex(&pts, v.point(q)) && lifted_on(c, q)
            });
            if hit {
                out[gi].vertices.push(q);
                out[gi].vertices.sort_unstable();
                break;
            }
        }
    }
    Ok(out)
}

fn affine_through(v: &VertexSet, simplex: &[usize], f: &[f64]) -> (Vec<f64>, f64) {
    let d = v.dim();
    let p0 = v.point(simplex[0]);
    let mut a: Vec<Vec<f64>> = (1..=d)
        .map(|i| {
            let pi = v.point(simplex[i]);
            let mut row: Vec<f64> = (0..d).map(|k| pi[k] - p0[k]).collect();
            row.push(f[simplex[i]] - f[simplex[0]]);
            row
        })
        .collect();
    let g = crate::mesh::solve_augmented(&mut a);
    let offset = f[simplex[0]] - g.iter().zip(p0).map(|(g, x)| g * x).sum::<f64>();
    (g, offset)
}
