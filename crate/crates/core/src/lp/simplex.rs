//! Bounded-variable revised primal simplex.
//!
//! Two phases with one artificial per row, Dantzig pricing with a switch to
//! Bland's rule after a run of degenerate pivots, a two-pass (Harris) ratio
//! test and an explicit dense basis inverse updated by elementary row
//! operations and rebuilt periodically. No randomization: the pivot
//! sequence is a pure function of the input.

use serde::{Deserialize, Serialize};

use super::presolve::{self, Outcome, RowRef};
use super::problem::LpProblem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Primal feasibility tolerance used inside the simplex.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance, relative to the largest objective coefficient.
    pub optimality_tol: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot_tol: f64,
    /// Largest row or bound violation accepted for an optimal answer.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Pivots between rebuilds of the basis inverse.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            residual_tol: 1e-8,
            max_iterations: 1_000_000,
            refactor_interval: 100,
            bland_after: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// Row multipliers `y` with `y_ineq >= 0` and
    /// `min_{lower <= x <= upper} y'A x > y'b`.
    Farkas { equality: Vec<f64>, inequality: Vec<f64> },
    /// Direction `d` with `A_eq d = 0`, `A_ineq d <= 0`, `c'd > 0`,
    /// along which every bound stays satisfied.
    Ray(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_primal_residual: f64,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
}

impl Certificate {
    /// Margin by which the certificate proves its claim on `lp`; positive
    /// means valid.
    pub fn margin(&self, lp: &LpProblem) -> f64 {
        match self {
            Certificate::Farkas { equality, inequality } => {
                if inequality.iter().any(|&y| y < 0.0) {
                    return f64::NEG_INFINITY;
                }
                let mut g = vec![0.0; lp.num_cols];
                for &(r, c, v) in &lp.equalities.triplets {
                    g[c] += equality[r] * v;
                }
                for &(r, c, v) in &lp.inequalities.triplets {
                    g[c] += inequality[r] * v;
                }
                let yb: f64 = equality.iter().zip(&lp.equalities.rhs).map(|(y, b)| y * b).sum::<f64>()
                    + inequality.iter().zip(&lp.inequalities.rhs).map(|(y, b)| y * b).sum::<f64>();
                let mut min_gx = 0.0;
                for j in 0..lp.num_cols {
                    if g[j] > 0.0 {
                        min_gx += g[j] * lp.lower[j];
                    } else if g[j] < 0.0 {
                        min_gx += g[j] * lp.upper[j];
                    }
                }
                min_gx - yb
            }
            Certificate::Ray(d) => {
                let mut worst: f64 = 0.0;
                for v in lp.equalities.apply(d) {
                    worst = worst.max(v.abs());
                }
                for v in lp.inequalities.apply(d) {
                    worst = worst.max(v);
                }
                for (j, &dj) in d.iter().enumerate() {
                    if (dj > 0.0 && lp.upper[j].is_finite()) || (dj < 0.0 && lp.lower[j].is_finite()) {
                        worst = worst.max(dj.abs());
                    }
                }
                lp.objective_at(d) - worst
            }
        }
    }
}

/// Solves with the default configuration.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    solve_with(problem, &SolverConfig::default())
}

pub fn solve_with(problem: &LpProblem, cfg: &SolverConfig) -> Result<LpSolution> {
    problem.check()?;
    let reduced = match presolve::run(problem, 1e-11) {
        Outcome::Reduced(r) => r,
        Outcome::Infeasible { row, sign, log } => {
            let mut y_eq = vec![0.0; problem.equalities.num_rows()];
            let mut y_ineq = vec![0.0; problem.inequalities.num_rows()];
            match row {
                RowRef::Eq(r) => y_eq[r] = sign,
                RowRef::Ineq(r) => y_ineq[r] = sign,
            }
            presolve::lift_certificate(problem, &log, &mut y_eq, &mut y_ineq);
            return Ok(infeasible(problem, y_eq, y_ineq, 0));
        }
    };

    let mut spx = Simplex::new(&reduced, cfg);
    spx.phase_one()?;
    let infeasibility: f64 = spx.artificial_sum();
    let b_scale = 1.0 + reduced.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if infeasibility > cfg.feasibility_tol * b_scale {
        let pi = spx.duals();
        let mut y_eq = vec![0.0; problem.equalities.num_rows()];
        let mut y_ineq = vec![0.0; problem.inequalities.num_rows()];
        for (i, &p) in pi.iter().enumerate() {
            if i < reduced.eq_rows.len() {
                y_eq[reduced.eq_rows[i]] = p;
            } else {
                y_ineq[reduced.ineq_rows[i - reduced.eq_rows.len()]] = p.max(0.0);
            }
        }
        presolve::lift_certificate(problem, &reduced.log, &mut y_eq, &mut y_ineq);
        return Ok(infeasible(problem, y_eq, y_ineq, spx.iterations));
    }

    spx.start_phase_two();
    match spx.iterate()? {
        Step::Optimal => {}
        Step::Unbounded { entering, dir, alpha } => {
            let mut ray = vec![0.0; problem.num_cols];
            if entering < reduced.cols.len() {
                ray[reduced.cols[entering]] = dir;
            }
            for (i, &col) in spx.basis.iter().enumerate() {
                if col < reduced.cols.len() {
                    ray[reduced.cols[col]] = -dir * alpha[i];
                }
            }
            return Ok(LpSolution {
                status: Status::Unbounded,
                values: vec![f64::NAN; problem.num_cols],
                objective: f64::INFINITY,
                max_primal_residual: f64::NAN,
                certificate: Some(Certificate::Ray(ray)),
                iterations: spx.iterations,
            });
        }
    }

    let mut values = assemble(problem, &reduced, &spx.x);
    let mut residual = problem.max_violation(&values);
    if residual > cfg.residual_tol {
        spx.refactor()?;
        values = assemble(problem, &reduced, &spx.x);
        residual = problem.max_violation(&values);
        if residual > cfg.residual_tol {
            return Err(Error::Numerical(format!(
                "optimal basis leaves a primal residual of {residual:e}"
            )));
        }
    }
    Ok(LpSolution {
        status: Status::Optimal,
        objective: problem.objective_at(&values),
        values,
        max_primal_residual: residual,
        certificate: None,
        iterations: spx.iterations,
    })
}

fn infeasible(problem: &LpProblem, equality: Vec<f64>, inequality: Vec<f64>, iterations: usize) -> LpSolution {
    LpSolution {
        status: Status::Infeasible,
        values: vec![f64::NAN; problem.num_cols],
        objective: f64::NEG_INFINITY,
        max_primal_residual: f64::NAN,
        certificate: Some(Certificate::Farkas { equality, inequality }),
        iterations,
    }
}

fn assemble(problem: &LpProblem, reduced: &presolve::Reduced, x: &[f64]) -> Vec<f64> {
    let mut values: Vec<f64> = reduced.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    for (k, &j) in reduced.cols.iter().enumerate() {
        values[j] = x[k];
    }
    for (j, v) in values.iter_mut().enumerate() {
        *v = v.clamp(problem.lower[j], problem.upper[j]);
    }
    values
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

enum Step {
    Optimal,
    Unbounded { entering: usize, dir: f64, alpha: Vec<f64> },
}

const HARRIS_TOL: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;

struct Simplex<'a> {
    cfg: &'a SolverConfig,
    m: usize,
    first_artificial: usize,
    // columns in compressed form: structural, slacks, artificials
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Column-major `B^{-1}`: entry (i, k) at `k * m + i`.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    opt_tol: f64,
    objective: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(r: &presolve::Reduced, cfg: &'a SolverConfig) -> Self {
        let m = r.rows.len();
        let n = r.cols.len();
        let n_ineq = r.ineq_rows.len();
        let first_slack = n;
        let first_artificial = n + n_ineq;
        let total = first_artificial + m;

        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
        for (i, row) in r.rows.iter().enumerate() {
            for &(c, v) in row {
                per_col[c].push((i, v));
            }
        }
        let mut lower = r.lower.clone();
        let mut upper = r.upper.clone();
        lower.resize(total, 0.0);
        upper.resize(total, f64::INFINITY);
        let mut x: Vec<f64> = lower.clone();
        let mut state = vec![VarState::Lower; total];

        // residual of the rows with every structural column at its lower bound
        let mut resid = r.rhs.clone();
        for (i, row) in r.rows.iter().enumerate() {
            for &(c, v) in row {
                resid[i] -= v * x[c];
            }
        }

        let mut basis = vec![0; m];
        let mut binv = vec![0.0; m * m];
        let n_eq = m - n_ineq;
        for i in 0..m {
            let art = first_artificial + i;
            if i >= n_eq && resid[i] >= 0.0 {
                let slack = first_slack + (i - n_eq);
                per_col[slack].push((i, 1.0));
                per_col[art].push((i, 1.0));
                upper[art] = 0.0;
                basis[i] = slack;
                state[slack] = VarState::Basic;
                x[slack] = resid[i];
                binv[i * m + i] = 1.0;
            } else {
                if i >= n_eq {
                    per_col[first_slack + (i - n_eq)].push((i, 1.0));
                }
                let sign = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
                per_col[art].push((i, sign));
                basis[i] = art;
                state[art] = VarState::Basic;
                x[art] = resid[i].abs();
                binv[i * m + i] = sign;
            }
        }

        let mut col_start = Vec::with_capacity(total + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for col in per_col {
            for (i, v) in col {
                col_row.push(i);
                col_val.push(v);
            }
            col_start.push(col_row.len());
        }

        let mut cost = vec![0.0; total];
        cost[first_artificial..].iter_mut().for_each(|c| *c = -1.0);

        Self {
            cfg,
            m,
            first_artificial,
            col_start,
            col_row,
            col_val,
            lower,
            upper,
            cost,
            rhs: r.rhs.clone(),
            x,
            state,
            basis,
            binv,
            iterations: 0,
            since_refactor: 0,
            opt_tol: cfg.optimality_tol,
            objective: r.cost.clone(),
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        self.col_row[s..e].iter().copied().zip(self.col_val[s..e].iter().copied())
    }

    fn artificial_sum(&self) -> f64 {
        self.x[self.first_artificial..].iter().sum()
    }

    fn phase_one(&mut self) -> Result<()> {
        match self.iterate()? {
            Step::Optimal => Ok(()),
            // the phase-one objective is bounded above by zero
            Step::Unbounded { .. } => Err(Error::Numerical("phase one reported an unbounded ray".into())),
        }
    }

    fn start_phase_two(&mut self) {
        for j in self.first_artificial..self.cost.len() {
            self.upper[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.x[j] = 0.0;
                self.state[j] = VarState::Lower;
            }
        }
        self.drive_out_artificials();
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        let mut scale: f64 = 0.0;
        for (j, &c) in self.objective.iter().enumerate() {
            self.cost[j] = c;
            scale = scale.max(c.abs());
        }
        self.opt_tol = self.cfg.optimality_tol * if scale > 0.0 { scale } else { 1.0 };
    }

    /// Replaces basic artificials (all at zero after phase one) by any
    /// non-artificial column with a usable pivot in their row.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let row: Vec<f64> = (0..m).map(|k| self.binv[k * m + r]).collect();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.first_artificial {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let v: f64 = self.column(j).map(|(i, a)| row[i] * a).sum();
                if v.abs() > self.cfg.pivot_tol.max(1e-7) && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                let leaving = self.basis[r];
                self.x[leaving] = 0.0;
                self.state[leaving] = VarState::Lower;
                self.pivot(r, j, &alpha);
                self.state[j] = VarState::Basic;
            }
        }
    }

    /// `pi' = c_B' B^{-1}`.
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        (0..m)
            .map(|k| {
                let col = &self.binv[k * m..(k + 1) * m];
                col.iter().zip(&cb).map(|(b, c)| b * c).sum()
            })
            .collect()
    }

    /// `B^{-1} a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (r, v) in self.column(j) {
            let col = &self.binv[r * m..(r + 1) * m];
            for (o, b) in out.iter_mut().zip(col) {
                *o += v * b;
            }
        }
        out
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let br = col[r] * inv;
            if br != 0.0 {
                for (i, c) in col.iter_mut().enumerate() {
                    *c -= alpha[i] * br;
                }
            }
            col[r] = br;
        }
        self.basis[r] = q;
        self.since_refactor += 1;
    }

    fn pricing(&self, pi: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cost.len() {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.cost[j] - self.column(j).map(|(i, a)| pi[i] * a).sum::<f64>();
            let eligible = match st {
                VarState::Lower => d > self.opt_tol,
                VarState::Upper => d < -self.opt_tol,
                VarState::Basic => false,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if best.is_none_or(|(_, b)| d.abs() > b.abs()) {
                best = Some((j, d));
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<Step> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.cfg.max_iterations {
                return Err(Error::Numerical(format!(
                    "simplex did not converge within {} iterations",
                    self.cfg.max_iterations
                )));
            }
            if self.since_refactor >= self.cfg.refactor_interval.max(self.m / 4) {
                self.refactor()?;
            }
            let bland = degenerate_run >= self.cfg.bland_after;
            let pi = self.duals();
            let Some((q, _)) = self.pricing(&pi, bland) else {
                return Ok(Step::Optimal);
            };
            self.iterations += 1;
            let alpha = self.ftran(q);
            let dir = if self.state[q] == VarState::Lower { 1.0 } else { -1.0 };

            let (leave, theta) = self.ratio_test(&alpha, dir, bland);
            let flip = self.upper[q] - self.lower[q];
            let step = match leave {
                Some(_) if theta < flip => theta,
                _ if flip.is_finite() => flip,
                _ => return Ok(Step::Unbounded { entering: q, dir, alpha }),
            };
            degenerate_run = if step <= DEGENERATE_STEP { degenerate_run + 1 } else { 0 };

            for (i, &col) in self.basis.iter().enumerate() {
                self.x[col] -= dir * step * alpha[i];
            }
            self.x[q] += dir * step;

            match leave {
                Some(r) if theta < flip => {
                    let out = self.basis[r];
                    // snap the leaving variable onto the bound it reached
                    let moving_down = -dir * alpha[r] < 0.0;
                    if moving_down {
                        self.x[out] = self.lower[out];
                        self.state[out] = VarState::Lower;
                    } else {
                        self.x[out] = self.upper[out];
                        self.state[out] = VarState::Upper;
                    }
                    self.pivot(r, q, &alpha);
                    self.state[q] = VarState::Basic;
                }
                _ => {
                    self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
            }
        }
    }

    /// Returns the leaving row and the step length.
    fn ratio_test(&self, alpha: &[f64], dir: f64, bland: bool) -> (Option<usize>, f64) {
        let ptol = self.cfg.pivot_tol;
        // distance a basic variable can move before hitting a bound, with slack `tol`
        let limit = |i: usize, tol: f64| -> Option<f64> {
            let a = alpha[i];
            if a.abs() <= ptol {
                return None;
            }
            let col = self.basis[i];
            let delta = -dir * a;
            if delta < 0.0 {
                let l = self.lower[col];
                l.is_finite().then(|| ((self.x[col] - l + tol) / -delta).max(0.0))
            } else {
                let u = self.upper[col];
                u.is_finite().then(|| ((u - self.x[col] + tol) / delta).max(0.0))
            }
        };

        if bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if let Some(t) = limit(i, 0.0) {
                    let better = match best {
                        None => true,
                        Some((b, bt)) => t < bt - DEGENERATE_STEP || (t <= bt + DEGENERATE_STEP && self.basis[i] < self.basis[b]),
                    };
                    if better {
                        best = Some((i, t));
                    }
                }
            }
            return match best {
                Some((i, t)) => (Some(i), t),
                None => (None, f64::INFINITY),
            };
        }

        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            if let Some(t) = limit(i, HARRIS_TOL) {
                theta_max = theta_max.min(t);
            }
        }
        if theta_max == f64::INFINITY {
            return (None, f64::INFINITY);
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if let Some(t) = limit(i, 0.0) {
                if t <= theta_max && best.is_none_or(|(b, _)| alpha[i].abs() > alpha[b].abs()) {
                    best = Some((i, t));
                }
            }
        }
        match best {
            Some((i, t)) => (Some(i), t),
            None => (None, f64::INFINITY),
        }
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan elimination and recomputes the
    /// basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // row-major working copy of B augmented with the identity
        let mut a = vec![0.0; m * m];
        for (k, &col) in self.basis.iter().enumerate() {
            for (i, v) in self.column(col) {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            for i in c + 1..m {
                if a[i * m + c].abs() > a[p * m + c].abs() {
                    p = i;
                }
            }
            let piv = a[p * m + c];
            if piv.abs() < 1e-13 {
                return Err(Error::Numerical("basis matrix became singular".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let s = 1.0 / piv;
            for k in 0..m {
                a[c * m + k] *= s;
                inv[c * m + k] *= s;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = a[i * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[i * m + k] -= f * a[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        // inv is row-major B^{-1}; store column-major
        for i in 0..m {
            for k in 0..m {
                self.binv[k * m + i] = inv[i * m + k];
            }
        }

        let mut r = self.rhs.clone();
        for j in 0..self.cost.len() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for (i, v) in self.column(j) {
                    r[i] -= v * self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (k, &rk) in r.iter().enumerate() {
            if rk != 0.0 {
                let col = &self.binv[k * m..(k + 1) * m];
                for (x, b) in xb.iter_mut().zip(col) {
                    *x += rk * b;
                }
            }
        }
        for (i, &col) in self.basis.iter().enumerate() {
            self.x[col] = xb[i];
        }
        Ok(())
    }
}
