//! Bounded-variable revised simplex.
//!
//! Every row `i` receives a slack column `e_i`, so the working matrix `[A | I]`
//! always has full row rank and the slack basis is a valid starting point.
//! Rows whose slack cannot absorb the initial residual get an artificial
//! column; phase 1 drives those to zero, after which they are fixed at zero
//! and pivoted out where possible.
//!
//! The basis inverse is kept as an explicit dense matrix and updated with
//! elementary row operations; it is rebuilt from scratch every
//! `refactor_every` pivots and before optimality is declared.

use crate::problem::{LinearProgram, RowSense};
use crate::{LpError, LpSolution, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Final basis of a solve: one status per structural variable followed by one
/// per row slack. Feed it back to [`solve_warm`] after changing the objective
/// or the right-hand sides.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Basis {
    pub statuses: Vec<VarStatus>,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Primal feasibility tolerance on the scaled problem.
    pub tol_feas: f64,
    /// Reduced-cost optimality tolerance on the scaled problem.
    pub tol_opt: f64,
    /// Smallest admissible pivot element.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots after which Bland's rule takes over.
    pub bland_after: usize,
    pub refactor_every: usize,
    pub scale: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-7,
            tol_opt: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 100_000,
            bland_after: 50,
            refactor_every: 200,
            scale: true,
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, None, &SolverOptions::default())
}

/// Starts from `basis` when it is primal feasible (objective changed) or dual
/// feasible (right-hand sides changed); otherwise falls back to a cold start.
pub fn solve_warm(lp: &LinearProgram, basis: &Basis) -> Result<LpSolution, LpError> {
    solve_with(lp, Some(basis), &SolverOptions::default())
}

pub fn solve_with(
    lp: &LinearProgram,
    warm: Option<&Basis>,
    opts: &SolverOptions,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut work = Work::new(lp, opts);
    if let Some(basis) = warm {
        if basis.statuses.len() == work.n + work.m {
            if let Some(status) = work.try_warm(basis) {
                return Ok(work.finish(lp, status));
            }
        }
        work = Work::new(lp, opts);
    }
    let status = work.cold();
    Ok(work.finish(lp, status))
}

enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
    Failure,
}

struct Work {
    m: usize,
    n: usize,
    opts: SolverOptions,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    // Column-compressed [A | I | artificials].
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    true_cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    y: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    has_artificials: bool,
}

fn pow2(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v.log2().round().exp2()
    } else {
        1.0
    }
}

impl Work {
    fn new(lp: &LinearProgram, opts: &SolverOptions) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();

        // Merge duplicate entries per row, then build columns.
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for row in &lp.rows {
            let mut c = row.coeffs.clone();
            c.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
            for (j, a) in c {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|&(_, a)| a != 0.0);
            rows.push(merged);
        }

        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        if opts.scale {
            for (i, r) in rows.iter().enumerate() {
                let mx = r.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
                row_scale[i] = if mx > 0.0 { pow2(1.0 / mx) } else { 1.0 };
            }
            let mut col_max = vec![0.0f64; n];
            for (i, r) in rows.iter().enumerate() {
                for &(j, a) in r {
                    col_max[j] = col_max[j].max((a * row_scale[i]).abs());
                }
            }
            for j in 0..n {
                col_scale[j] = if col_max[j] > 0.0 { pow2(1.0 / col_max[j]) } else { 1.0 };
            }
        }

        let mut counts = vec![0usize; n];
        for r in &rows {
            for &(j, _) in r {
                counts[j] += 1;
            }
        }
        let mut col_start = Vec::with_capacity(n + m + 1);
        col_start.push(0);
        for j in 0..n {
            col_start.push(col_start[j] + counts[j]);
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a * row_scale[i] * col_scale[j];
                fill[j] += 1;
            }
        }
        for i in 0..m {
            col_row.push(i);
            col_val.push(1.0);
            col_start.push(col_start.last().unwrap() + 1);
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut true_cost = Vec::with_capacity(n + m);
        for j in 0..n {
            lower.push(lp.lower[j] / col_scale[j]);
            upper.push(lp.upper[j] / col_scale[j]);
            true_cost.push(lp.objective[j] * col_scale[j]);
        }
        for row in &lp.rows {
            let (l, u) = match row.sense {
                RowSense::Eq => (0.0, 0.0),
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lower.push(l);
            upper.push(u);
            true_cost.push(0.0);
        }
        let b: Vec<f64> = lp.rows.iter().enumerate().map(|(i, r)| r.rhs * row_scale[i]).collect();

        Self {
            m,
            n,
            opts: opts.clone(),
            row_scale,
            col_scale,
            col_start,
            col_row,
            col_val,
            lower,
            upper,
            cost: true_cost.clone(),
            true_cost,
            b,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            basis: (n..n + m).collect(),
            binv: Vec::new(),
            y: vec![0.0; m],
            iterations: 0,
            since_refactor: 0,
            has_artificials: false,
        }
    }

    fn ncols(&self) -> usize {
        self.col_start.len() - 1
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        self.col_row[s..e].iter().copied().zip(self.col_val[s..e].iter().copied())
    }

    fn nonbasic_home(&self, j: usize) -> (VarStatus, f64) {
        let (l, u) = (self.lower[j], self.upper[j]);
        if l.is_finite() {
            (VarStatus::AtLower, l)
        } else if u.is_finite() {
            (VarStatus::AtUpper, u)
        } else {
            (VarStatus::Free, 0.0)
        }
    }

    fn cold(&mut self) -> Outcome {
        let (m, n) = (self.m, self.n);
        for j in 0..n {
            let (s, v) = self.nonbasic_home(j);
            self.status[j] = s;
            self.x[j] = v;
        }
        let mut resid = self.b.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != 0.0 {
                for (i, a) in self.column(j).collect::<Vec<_>>() {
                    resid[i] -= a * xj;
                }
            }
        }
        self.basis = Vec::with_capacity(m);
        let mut art_cost = vec![0.0; n + m];
        for i in 0..m {
            let s = n + i;
            let r = resid[i];
            if r >= self.lower[s] - self.opts.tol_feas && r <= self.upper[s] + self.opts.tol_feas {
                self.status[s] = VarStatus::Basic;
                self.x[s] = r;
                self.basis.push(s);
            } else {
                let bound = if r < self.lower[s] { self.lower[s] } else { self.upper[s] };
                self.status[s] = if r < self.lower[s] { VarStatus::AtLower } else { VarStatus::AtUpper };
                self.x[s] = bound;
                let excess = r - bound;
                let sign = if excess > 0.0 { 1.0 } else { -1.0 };
                let a = self.ncols();
                self.col_row.push(i);
                self.col_val.push(sign);
                self.col_start.push(self.col_start[a] + 1);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.true_cost.push(0.0);
                art_cost.push(1.0);
                self.x.push(excess.abs());
                self.status.push(VarStatus::Basic);
                self.basis.push(a);
                self.has_artificials = true;
            }
        }
        self.cost = if self.has_artificials { art_cost } else { self.true_cost.clone() };
        if !self.refactor() {
            return Outcome::Failure;
        }

        if self.has_artificials {
            match self.primal() {
                Outcome::Optimal => {}
                Outcome::Unbounded | Outcome::Infeasible => return Outcome::Failure,
                Outcome::Failure => return Outcome::Failure,
            }
            let infeas: f64 = (n + m..self.ncols()).map(|j| self.x[j].max(0.0)).sum();
            if infeas > self.opts.tol_feas * (1.0 + self.m as f64).sqrt() {
                return Outcome::Infeasible;
            }
            for j in n + m..self.ncols() {
                self.upper[j] = 0.0;
                if self.status[j] != VarStatus::Basic {
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = 0.0;
                }
            }
            self.drive_out_artificials();
        }
        self.cost = self.true_cost.clone();
        if !self.refactor() {
            return Outcome::Failure;
        }
        self.primal()
    }

    /// Degenerate pivots replacing basic artificials by real columns.
    fn drive_out_artificials(&mut self) {
        let first_art = self.n + self.m;
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let rho: Vec<f64> = self.binv[r * self.m..(r + 1) * self.m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..first_art {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let arj: f64 = self.column(j).map(|(i, a)| rho[i] * a).sum();
                if arj.abs() > 1e-7 && best.is_none_or(|(_, v)| arj.abs() > v) {
                    best = Some((j, arj.abs()));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                let leaving = self.basis[r];
                self.x[leaving] = 0.0;
                self.status[leaving] = VarStatus::AtLower;
                self.pivot(r, q, &alpha, 0.0);
                self.status[q] = VarStatus::Basic;
            }
        }
    }

    fn try_warm(&mut self, warm: &Basis) -> Option<Outcome> {
        let (m, n) = (self.m, self.n);
        let mut basis = Vec::with_capacity(m);
        for j in 0..n + m {
            let (l, u) = (self.lower[j], self.upper[j]);
            match warm.statuses[j] {
                VarStatus::Basic => {
                    self.status[j] = VarStatus::Basic;
                    basis.push(j);
                }
                s => {
                    let s = match s {
                        VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
                        VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
                        _ => self.nonbasic_home(j).0,
                    };
                    self.status[j] = s;
                    self.x[j] = match s {
                        VarStatus::AtLower => l,
                        VarStatus::AtUpper => u,
                        _ => 0.0,
                    };
                }
            }
        }
        if basis.len() != m {
            return None;
        }
        self.basis = basis;
        if !self.refactor() {
            return None;
        }
        if self.primal_infeasibility() <= self.opts.tol_feas {
            return Some(self.primal());
        }
        if !self.dual_feasible(1e-7) {
            return None;
        }
        match self.dual() {
            Outcome::Optimal => Some(self.primal()),
            Outcome::Infeasible => Some(Outcome::Infeasible),
            _ => None,
        }
    }

    fn primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&v| (self.lower[v] - self.x[v]).max(self.x[v] - self.upper[v]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn dual_feasible(&self, tol: f64) -> bool {
        (0..self.ncols()).all(|j| {
            let d = self.reduced_cost(j);
            match self.status[j] {
                VarStatus::Basic => true,
                _ if self.lower[j] == self.upper[j] => true,
                VarStatus::AtLower => d >= -tol,
                VarStatus::AtUpper => d <= tol,
                VarStatus::Free => d.abs() <= tol,
            }
        })
    }

    /// Rebuilds the inverse by Gauss-Jordan elimination with partial pivoting
    /// and recomputes basic values and duals.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            let (s, e) = (self.col_start[j], self.col_start[j + 1]);
            for p in s..e {
                bmat[self.col_row[p] * m + k] = self.col_val[p];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv = k;
            let mut best = bmat[k * m + k].abs();
            for i in k + 1..m {
                let v = bmat[i * m + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-11 {
                return false;
            }
            if piv != k {
                for c in 0..m {
                    bmat.swap(k * m + c, piv * m + c);
                    inv.swap(k * m + c, piv * m + c);
                }
            }
            let p = bmat[k * m + k];
            let (head, rest) = bmat.split_at_mut(k * m);
            let (prow, tail) = rest.split_at_mut(m);
            let (ihead, irest) = inv.split_at_mut(k * m);
            let (iprow, itail) = irest.split_at_mut(m);
            for c in 0..m {
                prow[c] /= p;
                iprow[c] /= p;
            }
            for (block, iblock) in [(head, ihead), (tail, itail)] {
                for (row, irow) in block.chunks_exact_mut(m).zip(iblock.chunks_exact_mut(m)) {
                    let f = row[k];
                    if f != 0.0 {
                        for c in 0..m {
                            row[c] -= f * prow[c];
                        }
                        for c in 0..m {
                            irow[c] -= f * iprow[c];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.compute_xb();
        self.compute_y();
        true
    }

    fn compute_xb(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for j in 0..self.ncols() {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                let (s, e) = (self.col_start[j], self.col_start[j + 1]);
                for p in s..e {
                    r[self.col_row[p]] -= self.col_val[p] * xj;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
    }

    fn compute_y(&mut self) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let c = self.cost[self.basis[i]];
            if c != 0.0 {
                for (yk, &bk) in y.iter_mut().zip(&self.binv[i * m..(i + 1) * m]) {
                    *yk += c * bk;
                }
            }
        }
        self.y = y;
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        for p in s..e {
            d -= self.y[self.col_row[p]] * self.col_val[p];
        }
        d
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for (k, a) in self.column(j) {
            for i in 0..m {
                alpha[i] += self.binv[i * m + k] * a;
            }
        }
        alpha
    }

    /// Replaces the basic variable of row `r` by `q`. `dq` is the reduced
    /// cost of `q` before the pivot and keeps `y` current.
    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], dq: f64) {
        let m = self.m;
        let ar = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= ar;
        }
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (i, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + i];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        if dq != 0.0 {
            for (yk, &p) in self.y.iter_mut().zip(prow.iter()) {
                *yk += dq * p;
            }
        }
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn entering_direction(&self, j: usize, d: f64) -> f64 {
        let tol = self.opts.tol_opt;
        match self.status[j] {
            VarStatus::Basic => 0.0,
            _ if self.lower[j] == self.upper[j] => 0.0,
            VarStatus::AtLower if d < -tol => 1.0,
            VarStatus::AtUpper if d > tol => -1.0,
            VarStatus::Free if d < -tol => 1.0,
            VarStatus::Free if d > tol => -1.0,
            _ => 0.0,
        }
    }

    fn primal(&mut self) -> Outcome {
        let tol = self.opts.tol_feas;
        let mut bland = false;
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::Failure;
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return Outcome::Failure;
            }

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.ncols() {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let d = self.reduced_cost(j);
                let dir = self.entering_direction(j, d);
                if dir == 0.0 {
                    continue;
                }
                if bland {
                    entering = Some((j, dir, d));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                    entering = Some((j, dir, d));
                }
            }
            let Some((q, dir, dq)) = entering else {
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return Outcome::Failure;
                    }
                    continue;
                }
                return Outcome::Optimal;
            };

            let alpha = self.ftran(q);
            let flip = self.upper[q] - self.lower[q];

            // Harris pass 1: largest step keeping every basic variable within
            // its tolerance-relaxed bounds.
            let mut theta_max = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let v = self.basis[i];
                let rate = -dir * a;
                let t = if rate < 0.0 && self.lower[v].is_finite() {
                    (self.x[v] - self.lower[v] + tol) / -rate
                } else if rate > 0.0 && self.upper[v].is_finite() {
                    (self.upper[v] + tol - self.x[v]) / rate
                } else {
                    continue;
                };
                theta_max = theta_max.min(t);
            }
            if theta_max == f64::INFINITY && !flip.is_finite() {
                return Outcome::Unbounded;
            }

            // Pass 2: among rows blocking within theta_max pick the largest
            // pivot (Bland: the lowest variable index at the exact minimum).
            let mut leave: Option<(usize, f64, f64)> = None;
            let mut exact_min = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let v = self.basis[i];
                let rate = -dir * a;
                let t = if rate < 0.0 && self.lower[v].is_finite() {
                    (self.x[v] - self.lower[v]) / -rate
                } else if rate > 0.0 && self.upper[v].is_finite() {
                    (self.upper[v] - self.x[v]) / rate
                } else {
                    continue;
                };
                let t = t.max(0.0);
                if bland {
                    let better = match leave {
                        None => true,
                        Some((li, _, lt)) => t < lt - 1e-12 || (t <= lt + 1e-12 && v < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, t, a.abs()));
                    }
                } else if t <= theta_max && leave.is_none_or(|(_, _, best)| a.abs() > best) {
                    leave = Some((i, t, a.abs()));
                }
                exact_min = exact_min.min(t);
            }

            let step_limit = if bland { exact_min } else { theta_max };
            if flip.is_finite() && (leave.is_none() || flip <= step_limit) {
                let theta = flip;
                for (i, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        self.x[self.basis[i]] -= dir * a * theta;
                    }
                }
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.status[q] = VarStatus::AtUpper;
                } else {
                    self.x[q] = self.lower[q];
                    self.status[q] = VarStatus::AtLower;
                }
                self.iterations += 1;
                degenerate_streak = 0;
                bland = false;
                continue;
            }
            let Some((r, theta, _)) = leave else {
                return Outcome::Unbounded;
            };

            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= dir * a * theta;
                }
            }
            let v = self.basis[r];
            if -dir * alpha[r] < 0.0 {
                self.x[v] = self.lower[v];
                self.status[v] = VarStatus::AtLower;
            } else {
                self.x[v] = self.upper[v];
                self.status[v] = VarStatus::AtUpper;
            }
            self.x[q] += dir * theta;
            self.pivot(r, q, &alpha, dq);
            self.status[q] = VarStatus::Basic;

            if theta * dq.abs() <= 1e-12 {
                degenerate_streak += 1;
                if degenerate_streak > self.opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
                bland = false;
            }
        }
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual(&mut self) -> Outcome {
        let m = self.m;
        let tol = self.opts.tol_feas;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::Failure;
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return Outcome::Failure;
            }
            let mut leave: Option<(usize, f64)> = None;
            for (i, &v) in self.basis.iter().enumerate() {
                let infeas = (self.lower[v] - self.x[v]).max(self.x[v] - self.upper[v]);
                if infeas > tol && leave.is_none_or(|(_, best)| infeas > best) {
                    leave = Some((i, infeas));
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Optimal;
            };
            let v = self.basis[r];
            let increase = self.x[v] < self.lower[v];
            let target = if increase { self.lower[v] } else { self.upper[v] };
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.ncols() {
                if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let arj: f64 = self.column(j).map(|(i, a)| rho[i] * a).sum();
                if arj.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let eligible = match self.status[j] {
                    VarStatus::AtLower => (arj < 0.0) == increase,
                    VarStatus::AtUpper => (arj > 0.0) == increase,
                    VarStatus::Free => true,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j);
                let ratio = (d.abs() / arj.abs()).max(0.0);
                let better = match entering {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && arj.abs() > ba),
                };
                if better {
                    entering = Some((j, ratio, arj.abs()));
                }
            }
            let Some((q, _, _)) = entering else {
                return Outcome::Infeasible;
            };
            let alpha = self.ftran(q);
            if alpha[r].abs() <= self.opts.pivot_tol {
                return Outcome::Failure;
            }
            let dq = self.reduced_cost(q);
            let delta = (self.x[v] - target) / alpha[r];
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * delta;
                }
            }
            self.x[q] += delta;
            self.x[v] = target;
            self.status[v] = if increase { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.pivot(r, q, &alpha, dq);
            self.status[q] = VarStatus::Basic;
        }
    }

    fn finish(mut self, lp: &LinearProgram, outcome: Outcome) -> LpSolution {
        let (n, m) = (self.n, self.m);
        let mut status = match outcome {
            Outcome::Optimal => Status::Optimal,
            Outcome::Unbounded => Status::Unbounded,
            Outcome::Infeasible => Status::Infeasible,
            Outcome::Failure => Status::NumericalFailure,
        };
        let x: Vec<f64> = (0..n).map(|j| self.x[j] * self.col_scale[j]).collect();
        let row_duals: Vec<f64> = (0..m).map(|i| self.y.get(i).copied().unwrap_or(0.0) * self.row_scale[i]).collect();
        let mut reduced_costs = lp.objective.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                reduced_costs[j] -= row_duals[i] * a;
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

        if status == Status::Optimal {
            // Guard against drift: the unscaled point must satisfy the data.
            let mut worst = 0.0f64;
            for row in &lp.rows {
                let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                let mag: f64 = row.coeffs.iter().map(|&(j, a)| (a * x[j]).abs()).sum::<f64>() + row.rhs.abs();
                let viol = match row.sense {
                    RowSense::Eq => (act - row.rhs).abs(),
                    RowSense::Le => (act - row.rhs).max(0.0),
                    RowSense::Ge => (row.rhs - act).max(0.0),
                };
                worst = worst.max(viol / (1.0 + mag));
            }
            for j in 0..n {
                let viol = (lp.lower[j] - x[j]).max(x[j] - lp.upper[j]).max(0.0);
                worst = worst.max(viol / (1.0 + x[j].abs()));
            }
            if worst > 1e-6 {
                status = Status::NumericalFailure;
            }
        }

        let basis = if self.basis.iter().all(|&v| v < n + m) && self.status.len() >= n + m {
            Some(Basis { statuses: self.status[..n + m].to_vec() })
        } else {
            None
        };
        self.binv.clear();
        LpSolution { status, x, objective, row_duals, reduced_costs, basis, iterations: self.iterations }
    }
}
