//! Dense revised simplex for `min cᵀx` subject to `Ax = b`, `x ≥ 0`.
//!
//! Pricing picks the most negative reduced cost; after a run of degenerate
//! pivots it switches to Bland's rule (smallest eligible index) until the
//! objective moves again. The ratio test breaks ties by smallest basic
//! index, so the method cannot cycle and is deterministic. The basis inverse is kept dense and refactored
//! periodically; problems of a few thousand rows are the intended scale.

use serde::Serialize;

use crate::error::{Error, Result};

/// A linear program in equality form with nonnegative variables.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    cost: Vec<f64>,
    /// Column-major sparse matrix.
    columns: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with objective coefficient `cost` and returns its index.
    pub fn add_variable(&mut self, cost: f64) -> usize {
        self.cost.push(cost);
        self.columns.push(Vec::new());
        self.cost.len() - 1
    }

    /// Adds the row `Σ a_j x_j = rhs` and returns its index.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.rhs.len();
        self.rhs.push(rhs);
        for &(j, a) in coeffs {
            if a != 0.0 {
                match self.columns[j].last_mut() {
                    Some((row, v)) if *row == r => *v += a,
                    _ => self.columns[j].push((r, a)),
                }
            }
        }
        r
    }

    pub fn variables(&self) -> usize {
        self.cost.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }
}

/// Evidence of optimality for a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `|cᵀx − bᵀy|`.
    pub duality_gap: f64,
    /// `‖Ax − b‖_∞`.
    pub primal_residual: f64,
    /// `max(0, −min_j (c_j − A_jᵀy))`.
    pub dual_infeasibility: f64,
    /// `Σ_j x_j·|c_j − A_jᵀy|`.
    pub complementarity: f64,
}

impl Certificate {
    /// Largest residual, relative to `1 + |objective|`.
    pub fn relative(&self, objective: f64) -> f64 {
        self.duality_gap.max(self.primal_residual).max(self.dual_infeasibility).max(self.complementarity)
            / (1.0 + objective.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub certificate: Certificate,
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Optimality tolerance on reduced costs.
    pub tolerance: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots after which pricing switches from
    /// most-negative reduced cost to Bland's rule until progress resumes.
    pub bland_after: usize,
    /// Relative size of the phase-2 lift of the basic solution; 0 disables it.
    pub perturbation: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iterations: 200_000, tolerance: 1e-10, refactor_every: 100, bland_after: 50, perturbation: 1e-7 }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, SimplexOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: SimplexOptions) -> Result<LpSolution> {
    let m = lp.rows();
    let n = lp.variables();
    if lp.cost.iter().chain(&lp.rhs).any(|v| !v.is_finite()) {
        return Err(Error::invalid("linear program has non-finite data"));
    }

    // Starting basis: a singleton column per row whose sign keeps the basic
    // value nonnegative, else an artificial variable.
    let mut singleton = vec![None; m];
    for j in 0..n {
        if let [(r, a)] = lp.columns[j].as_slice() {
            let ok = (*a > 0.0 && lp.rhs[*r] >= 0.0) || (*a < 0.0 && lp.rhs[*r] <= 0.0);
            if ok && singleton[*r].is_none() {
                singleton[*r] = Some(j);
            }
        }
    }
    let mut work = lp.clone();
    let mut basis = Vec::with_capacity(m);
    let mut artificials = Vec::new();
    for r in 0..m {
        match singleton[r] {
            Some(j) => basis.push(j),
            None => {
                let j = work.add_variable(0.0);
                let sign = if lp.rhs[r] >= 0.0 { 1.0 } else { -1.0 };
                work.columns[j].push((r, sign));
                artificials.push(j);
                basis.push(j);
            }
        }
    }
    let total = work.variables();
    let mut state = Simplex::new(&work, basis)?;
    let mut iterations = 0;
    if !artificials.is_empty() {
        let mut phase1 = vec![0.0; total];
        for &j in &artificials {
            phase1[j] = 1.0;
        }
        iterations += state.run(&work, &phase1, &vec![true; total], opts, iterations)?;
        let infeasibility: f64 = state.basis.iter().zip(&state.x_b).filter(|(j, _)| **j >= n).map(|(_, v)| *v).sum();
        let scale = 1.0 + lp.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if infeasibility > 1e-9 * scale {
            return Err(Error::Solver("linear program is infeasible".into()));
        }
        state.drive_out_artificials(&work, n)?;
    }
    let mut cost = work.cost.clone();
    cost.resize(total, 0.0);
    let allowed: Vec<bool> = (0..total).map(|j| j < n).collect();
    // Degenerate vertices are common (many zero jumps), so phase 2 runs on a
    // slightly lifted basic solution; the true right-hand side is restored
    // afterwards and any small infeasibility is removed by dual pivots.
    state.perturb(&work, opts.perturbation)?;
    iterations += state.run(&work, &cost, &allowed, opts, iterations)?;
    state.shift.iter_mut().for_each(|v| *v = 0.0);
    state.refactor(&work)?;
    iterations += state.dual_cleanup(&work, &cost, &allowed, opts, iterations)?;
    iterations += state.run(&work, &cost, &allowed, opts, iterations)?;
    state.refactor(&work)?;

    let mut x = vec![0.0; n];
    for (i, &j) in state.basis.iter().enumerate() {
        if j < n {
            x[j] = state.x_b[i].max(0.0);
        }
    }
    let dual = state.dual(&cost);
    let objective = crate::cpwl::compensated_sum((0..n).map(|j| lp.cost[j] * x[j]));
    let certificate = certify(lp, &x, &dual, objective);
    Ok(LpSolution { x, dual, objective, iterations, certificate })
}

/// Recomputes every residual of a primal-dual pair from the original data.
pub fn certify(lp: &LinearProgram, x: &[f64], dual: &[f64], objective: f64) -> Certificate {
    let m = lp.rows();
    let mut ax = vec![0.0; m];
    let mut dual_inf: f64 = 0.0;
    let mut comp = 0.0;
    for j in 0..lp.variables() {
        let mut reduced = lp.cost[j];
        for &(r, a) in &lp.columns[j] {
            ax[r] += a * x[j];
            reduced -= a * dual[r];
        }
        dual_inf = dual_inf.max(-reduced);
        comp += x[j] * reduced.abs();
    }
    let primal_residual = ax.iter().zip(&lp.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dual_obj: f64 = crate::cpwl::compensated_sum(lp.rhs.iter().zip(dual).map(|(b, y)| b * y));
    Certificate {
        duality_gap: (objective - dual_obj).abs(),
        primal_residual,
        dual_infeasibility: dual_inf.max(0.0),
        complementarity: comp,
    }
}

struct Simplex {
    m: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Row-major `B⁻¹`.
    inv: Vec<f64>,
    x_b: Vec<f64>,
    /// Added to the right-hand side while perturbed.
    shift: Vec<f64>,
    since_refactor: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram, basis: Vec<usize>) -> Result<Self> {
        let m = lp.rows();
        let mut in_basis = vec![false; lp.variables()];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut s = Simplex { m, basis, in_basis, inv: vec![0.0; m * m], x_b: vec![0.0; m], shift: vec![0.0; m], since_refactor: 0 };
        s.refactor(lp)?;
        Ok(s)
    }

    /// Rebuilds `B⁻¹` by Gauss–Jordan elimination and recomputes `x_B`.
    fn refactor(&mut self, lp: &LinearProgram) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &lp.columns[j] {
                a[r * m + i] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs()))
                .expect("nonempty range");
            if a[piv * m + col].abs() < 1e-13 {
                return Err(Error::Solver("singular basis".into()));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.inv = inv;
        for i in 0..m {
            self.x_b[i] = (0..m).map(|r| self.inv[i * m + r] * (lp.rhs[r] + self.shift[r])).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Raises every basic value by a small deterministic amount, i.e. moves
    /// the right-hand side to `b + Bδ`, which stays consistent even when
    /// rows are redundant.
    fn perturb(&mut self, lp: &LinearProgram, size: f64) -> Result<()> {
        if size == 0.0 {
            return Ok(());
        }
        let scale = 1.0 + lp.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (i, &j) in self.basis.iter().enumerate() {
            // Golden-ratio sequence keeps the offsets distinct.
            let delta = size * scale * (1.0 + (i as f64 * 0.618_033_988_749_895).fract());
            for &(r, a) in &lp.columns[j] {
                self.shift[r] += a * delta;
            }
        }
        self.refactor(lp)
    }

    /// Dual simplex pivots from a dual-feasible basis until `x_B ≥ 0`.
    fn dual_cleanup(
        &mut self,
        lp: &LinearProgram,
        cost: &[f64],
        allowed: &[bool],
        opts: SimplexOptions,
        done: usize,
    ) -> Result<usize> {
        let m = self.m;
        let scale = 1.0 + lp.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut iterations = 0;
        loop {
            let leaving = (0..m)
                .filter(|&i| self.x_b[i] < -1e-12 * scale)
                .min_by(|&a, &b| self.x_b[a].total_cmp(&self.x_b[b]).then(self.basis[a].cmp(&self.basis[b])));
            let Some(r) = leaving else {
                return Ok(iterations);
            };
            if done + iterations >= opts.max_iterations {
                return Err(Error::Solver(format!("iteration cap of {} reached", opts.max_iterations)));
            }
            let y = self.dual(cost);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..lp.variables() {
                if self.in_basis[j] || !allowed[j] {
                    continue;
                }
                let alpha: f64 = lp.columns[j].iter().map(|&(row, a)| self.inv[r * m + row] * a).sum();
                if alpha < -1e-11 {
                    let reduced = (cost[j] - lp.columns[j].iter().map(|&(row, a)| a * y[row]).sum::<f64>()).max(0.0);
                    let ratio = reduced / -alpha;
                    if best.is_none_or(|(_, b)| ratio < b) {
                        best = Some((j, ratio));
                    }
                }
            }
            let Some((j, _)) = best else {
                return Err(Error::Solver("linear program is infeasible".into()));
            };
            let mut w = vec![0.0; m];
            for &(row, a) in &lp.columns[j] {
                for i in 0..m {
                    w[i] += self.inv[i * m + row] * a;
                }
            }
            let theta = self.x_b[r] / w[r];
            self.pivot(r, j, &w, theta);
            iterations += 1;
            if self.since_refactor >= opts.refactor_every {
                self.refactor(lp)?;
            }
        }
    }

    fn dual(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                for r in 0..m {
                    y[r] += c * self.inv[i * m + r];
                }
            }
        }
        y
    }

    fn run(
        &mut self,
        lp: &LinearProgram,
        cost: &[f64],
        allowed: &[bool],
        opts: SimplexOptions,
        done: usize,
    ) -> Result<usize> {
        let m = self.m;
        let cscale = 1.0 + cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        let mut iterations = 0;
        let mut degenerate_run = 0;
        loop {
            let y = self.dual(cost);
            let reduced = |j: usize| cost[j] - lp.columns[j].iter().map(|&(r, a)| a * y[r]).sum::<f64>();
            let eligible = |j: &usize| !self.in_basis[*j] && allowed[*j];
            let threshold = -opts.tolerance * cscale;
            let entering = if degenerate_run >= opts.bland_after {
                (0..lp.variables()).filter(eligible).find(|&j| reduced(j) < threshold)
            } else {
                (0..lp.variables())
                    .filter(eligible)
                    .map(|j| (j, reduced(j)))
                    .filter(|&(_, d)| d < threshold)
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|(j, _)| j)
            };
            let Some(j) = entering else {
                return Ok(iterations);
            };
            if done + iterations >= opts.max_iterations {
                return Err(Error::Solver(format!("iteration cap of {} reached", opts.max_iterations)));
            }
            let mut w = vec![0.0; m];
            for &(r, a) in &lp.columns[j] {
                for i in 0..m {
                    w[i] += self.inv[i * m + r] * a;
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if w[i] > 1e-11 {
                    let theta = self.x_b[i].max(0.0) / w[i];
                    let better = match leave {
                        None => true,
                        Some((k, best)) => {
                            theta < best - 1e-14 * (1.0 + best)
                                || (theta <= best + 1e-14 * (1.0 + best) && self.basis[i] < self.basis[k])
                        }
                    };
                    if better {
                        leave = Some((i, theta));
                    }
                }
            }
            let Some((r, theta)) = leave else {
                return Err(Error::Solver("linear program is unbounded".into()));
            };
            if theta <= 1e-13 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, j, &w, theta);
            iterations += 1;
            if self.since_refactor >= opts.refactor_every {
                self.refactor(lp)?;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize, w: &[f64], theta: f64) {
        let m = self.m;
        for i in 0..m {
            self.x_b[i] -= theta * w[i];
        }
        self.x_b[r] = theta;
        let p = w[r];
        for k in 0..m {
            self.inv[r * m + k] /= p;
        }
        for i in 0..m {
            if i != r && w[i] != 0.0 {
                let f = w[i];
                for k in 0..m {
                    self.inv[i * m + k] -= f * self.inv[r * m + k];
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[j] = true;
        self.basis[r] = j;
        self.since_refactor += 1;
    }

    /// Replaces basic artificials (all at zero) by structural columns where
    /// possible; rows where none exists are redundant and keep theirs.
    fn drive_out_artificials(&mut self, lp: &LinearProgram, n: usize) -> Result<()> {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < n {
                continue;
            }
            let found = (0..n).filter(|&j| !self.in_basis[j]).find_map(|j| {
                let wr: f64 = lp.columns[j].iter().map(|&(row, a)| self.inv[r * m + row] * a).sum();
                (wr.abs() > 1e-9).then_some(j)
            });
            if let Some(j) = found {
                let mut w = vec![0.0; m];
                for &(row, a) in &lp.columns[j] {
                    for i in 0..m {
                        w[i] += self.inv[i * m + row] * a;
                    }
                }
                self.pivot(r, j, &w, 0.0);
            }
        }
        self.refactor(lp)
    }
}
