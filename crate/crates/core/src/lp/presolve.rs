//! Forcing-row presolve.
//!
//! A row whose right-hand side equals its minimum (or maximum) activity
//! over the current bounds pins every variable in it to the bound that
//! attains that activity. Applied to the occupation-measure programs this
//! removes every (time, state) pair that is unreachable, which shrinks the
//! basis the simplex has to carry by an order of magnitude.
//!
//! Fixings are logged so that an infeasibility certificate found on the
//! reduced problem can be lifted back to the original rows.

use std::collections::VecDeque;

use super::problem::LpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowRef {
    Eq(usize),
    Ineq(usize),
}

/// Row `row` forced the columns in `cols` to their min-activity bounds
/// (`at_min`) or max-activity bounds.
#[derive(Debug, Clone)]
pub(crate) struct Forcing {
    pub row: RowRef,
    pub cols: Vec<usize>,
    pub at_min: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    /// Reduced column -> original column.
    pub cols: Vec<usize>,
    pub eq_rows: Vec<usize>,
    pub ineq_rows: Vec<usize>,
    /// Rows over reduced columns: equalities first, then inequalities.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: Vec<f64>,
    /// Value of every original column removed by presolve.
    pub fixed: Vec<Option<f64>>,
    pub log: Vec<Forcing>,
}

#[derive(Debug, Clone)]
pub(crate) enum Outcome {
    Reduced(Reduced),
    /// `row` cannot be satisfied; `sign` orients the unit multiplier.
    Infeasible {
        row: RowRef,
        sign: f64,
        log: Vec<Forcing>,
    },
}

/// Merged, zero-free rows of the original problem, equalities first.
pub(crate) fn merged_rows(lp: &LpProblem) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); lp.equalities.num_rows() + lp.inequalities.num_rows()];
    for &(r, c, v) in &lp.equalities.triplets {
        rows[r].push((c, v));
    }
    let off = lp.equalities.num_rows();
    for &(r, c, v) in &lp.inequalities.triplets {
        rows[off + r].push((c, v));
    }
    for row in &mut rows {
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        *row = merged;
    }
    rows
}

pub(crate) fn run(lp: &LpProblem, tol: f64) -> Outcome {
    let rows = merged_rows(lp);
    let n_eq = lp.equalities.num_rows();
    let rhs: Vec<f64> = lp.equalities.rhs.iter().chain(&lp.inequalities.rhs).copied().collect();
    let row_ref = |i: usize| if i < n_eq { RowRef::Eq(i) } else { RowRef::Ineq(i - n_eq) };

    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); lp.num_cols];
    for (i, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            col_rows[c].push(i);
        }
    }

    let mut fixed: Vec<Option<f64>> = (0..lp.num_cols)
        .map(|j| (lp.lower[j] == lp.upper[j]).then_some(lp.lower[j]))
        .collect();
    let mut done = vec![false; rows.len()];
    let mut queued = vec![true; rows.len()];
    let mut queue: VecDeque<usize> = (0..rows.len()).collect();
    let mut log = Vec::new();

    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        if done[i] {
            continue;
        }
        let is_eq = i < n_eq;
        let mut b = rhs[i];
        let (mut min_act, mut max_act) = (0.0f64, 0.0f64);
        let mut free = Vec::new();
        for &(c, a) in &rows[i] {
            match fixed[c] {
                Some(v) => b -= a * v,
                None => {
                    free.push((c, a));
                    let (l, u) = (lp.lower[c], lp.upper[c]);
                    if a > 0.0 {
                        min_act += a * l;
                        max_act += a * u;
                    } else {
                        min_act += a * u;
                        max_act += a * l;
                    }
                }
            }
        }
        let scale = tol * (1.0 + b.abs());
        if free.is_empty() {
            let violated = if is_eq { b.abs() > scale } else { b < -scale };
            if violated {
                // 0 = b with b > 0 is refuted by multiplier -1, and vice versa
                return Outcome::Infeasible {
                    row: row_ref(i),
                    sign: if b > 0.0 { -1.0 } else { 1.0 },
                    log,
                };
            }
            done[i] = true;
            continue;
        }
        if min_act > b + scale {
            return Outcome::Infeasible {
                row: row_ref(i),
                sign: 1.0,
                log,
            };
        }
        if is_eq && max_act < b - scale {
            return Outcome::Infeasible {
                row: row_ref(i),
                sign: -1.0,
                log,
            };
        }
        let at_min = (min_act - b).abs() <= scale;
        let at_max = is_eq && !at_min && (max_act - b).abs() <= scale;
        if !(at_min || at_max) {
            continue;
        }
        let mut cols = Vec::with_capacity(free.len());
        for &(c, a) in &free {
            let lower_side = (a > 0.0) == at_min;
            fixed[c] = Some(if lower_side { lp.lower[c] } else { lp.upper[c] });
            cols.push(c);
            for &k in &col_rows[c] {
                if !done[k] && !queued[k] && k != i {
                    queued[k] = true;
                    queue.push_back(k);
                }
            }
        }
        done[i] = true;
        log.push(Forcing {
            row: row_ref(i),
            cols,
            at_min,
        });
    }

    let cols: Vec<usize> = (0..lp.num_cols).filter(|&j| fixed[j].is_none()).collect();
    let mut reduced_index = vec![usize::MAX; lp.num_cols];
    for (k, &j) in cols.iter().enumerate() {
        reduced_index[j] = k;
    }
    let obj = lp.objective_dense();

    let mut out_rows = Vec::new();
    let mut out_rhs = Vec::new();
    let mut eq_rows = Vec::new();
    let mut ineq_rows = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if done[i] {
            continue;
        }
        let mut b = rhs[i];
        let mut entries = Vec::new();
        for &(c, a) in row {
            match fixed[c] {
                Some(v) => b -= a * v,
                None => entries.push((reduced_index[c], a)),
            }
        }
        if i < n_eq {
            eq_rows.push(i);
        } else {
            ineq_rows.push(i - n_eq);
        }
        out_rows.push(entries);
        out_rhs.push(b);
    }
    // equalities were visited first, so `out_rows` is already eq-then-ineq

    Outcome::Reduced(Reduced {
        lower: cols.iter().map(|&j| lp.lower[j]).collect(),
        upper: cols.iter().map(|&j| lp.upper[j]).collect(),
        cost: cols.iter().map(|&j| obj[j]).collect(),
        cols,
        eq_rows,
        ineq_rows,
        rows: out_rows,
        rhs: out_rhs,
        fixed,
        log,
    })
}

/// Adds multiples of forcing rows to `(y_eq, y_ineq)` so that a Farkas
/// certificate valid with the presolve fixings stays valid on the original
/// bounds. Processes the log in reverse order of fixing.
pub(crate) fn lift_certificate(lp: &LpProblem, log: &[Forcing], y_eq: &mut [f64], y_ineq: &mut [f64]) {
    let rows = merged_rows(lp);
    let n_eq = lp.equalities.num_rows();
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_cols];
    for (i, row) in rows.iter().enumerate() {
        for &(c, a) in row {
            col_rows[c].push((i, a));
        }
    }
    let weight = |i: usize, y_eq: &[f64], y_ineq: &[f64]| if i < n_eq { y_eq[i] } else { y_ineq[i - n_eq] };

    for f in log.iter().rev() {
        let i = match f.row {
            RowRef::Eq(r) => r,
            RowRef::Ineq(r) => n_eq + r,
        };
        let coef = |c: usize| rows[i].iter().find(|e| e.0 == c).map_or(0.0, |e| e.1);
        // Need g_j + lambda * a_j >= 0 at min bounds, <= 0 at max bounds.
        let mut lambda: f64 = 0.0;
        for &c in &f.cols {
            let g: f64 = col_rows[c].iter().map(|&(k, a)| weight(k, y_eq, y_ineq) * a).sum();
            let a = coef(c);
            let need = -g / a;
            lambda = if f.at_min { lambda.max(need) } else { lambda.min(need) };
        }
        if lambda != 0.0 {
            match f.row {
                RowRef::Eq(r) => y_eq[r] += lambda,
                RowRef::Ineq(r) => y_ineq[r] += lambda,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mass_rows_propagate() {
        // x0 + x1 = 0 ; x2 - x0 = 0 ; x2 + x3 = 1 with x3 in [0, 2]
        let mut lp = LpProblem::with_unit_box(4);
        lp.upper[3] = 2.0;
        lp.equalities.push_row([(0, 1.0), (1, 1.0)], 0.0);
        lp.equalities.push_row([(2, 1.0), (0, -1.0)], 0.0);
        lp.equalities.push_row([(2, 1.0), (3, 1.0)], 1.0);
        let Outcome::Reduced(r) = run(&lp, 1e-11) else {
            panic!("unexpected infeasibility")
        };
        assert_eq!(r.cols, vec![3]);
        assert_eq!(r.fixed[0], Some(0.0));
        assert_eq!(r.fixed[2], Some(0.0));
        assert_eq!(r.rows, vec![vec![(0, 1.0)]]);
        assert_eq!(r.rhs, vec![1.0]);
    }

    #[test]
    fn contradiction_is_detected() {
        let mut lp = LpProblem::with_unit_box(2);
        lp.equalities.push_row([(0, 1.0)], 0.0);
        lp.equalities.push_row([(0, 1.0), (1, 1.0)], 3.0);
        assert!(matches!(run(&lp, 1e-11), Outcome::Infeasible { .. }));
    }

    #[test]
    fn max_activity_forcing() {
        let mut lp = LpProblem::with_unit_box(2);
        lp.equalities.push_row([(0, 1.0), (1, 1.0)], 2.0);
        let Outcome::Reduced(r) = run(&lp, 1e-11) else {
            panic!()
        };
        assert_eq!(r.fixed, vec![Some(1.0), Some(1.0)]);
        assert!(r.rows.is_empty());
    }
}
