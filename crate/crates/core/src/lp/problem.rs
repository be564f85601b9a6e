//! Sparse linear programs and their plain-text exchange format.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Sparse rows stored as `(row, col, value)` triplets plus a right-hand side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl SparseRows {
    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Appends a row and returns its index.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> usize {
        let row = self.rhs.len();
        self.rhs.push(rhs);
        self.triplets
            .extend(entries.into_iter().filter(|(_, v)| *v != 0.0).map(|(c, v)| (row, c, v)));
        row
    }

    /// `A x` for every row.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rhs.len()];
        for &(r, c, v) in &self.triplets {
            out[r] += v * x[c];
        }
        out
    }
}

/// `maximize c'x  s.t.  A_eq x = b_eq,  A_ineq x <= b_ineq,  lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub num_cols: usize,
    pub objective: Vec<(usize, f64)>,
    pub equalities: SparseRows,
    pub inequalities: SparseRows,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Empty problem with `num_cols` variables boxed in `[0, 1]`.
    pub fn with_unit_box(num_cols: usize) -> Self {
        Self {
            num_cols,
            objective: Vec::new(),
            equalities: SparseRows::default(),
            inequalities: SparseRows::default(),
            lower: vec![0.0; num_cols],
            upper: vec![1.0; num_cols],
        }
    }

    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_cols];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, v)| v * x[j]).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (ax, b) in self.equalities.apply(x).iter().zip(&self.equalities.rhs) {
            worst = worst.max((ax - b).abs());
        }
        for (ax, b) in self.inequalities.apply(x).iter().zip(&self.inequalities.rhs) {
            worst = worst.max(ax - b);
        }
        for j in 0..self.num_cols {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// Checks dimensions and rejects NaN or infinite coefficients.
    pub fn check(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Rejected(what));
        if self.lower.len() != self.num_cols || self.upper.len() != self.num_cols {
            return bad("bound vectors do not match the column count".into());
        }
        for &(j, v) in &self.objective {
            if j >= self.num_cols {
                return bad(format!("objective column {j} out of range"));
            }
            if !v.is_finite() {
                return bad(format!("objective coefficient of column {j} is {v}"));
            }
        }
        for (name, rows) in [("equality", &self.equalities), ("inequality", &self.inequalities)] {
            for &(r, c, v) in &rows.triplets {
                if r >= rows.num_rows() || c >= self.num_cols {
                    return bad(format!("{name} entry ({r}, {c}) out of range"));
                }
                if !v.is_finite() {
                    return bad(format!("{name} entry ({r}, {c}) is {v}"));
                }
            }
            if let Some((r, b)) = rows.rhs.iter().enumerate().find(|(_, b)| !b.is_finite()) {
                return bad(format!("{name} right-hand side {r} is {b}"));
            }
        }
        for j in 0..self.num_cols {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !l.is_finite() || l.is_nan() || u.is_nan() || u == f64::NEG_INFINITY {
                return bad(format!("column {j} has unsupported bounds [{l}, {u}]"));
            }
            if l > u {
                return bad(format!("column {j} has empty bounds [{l}, {u}]"));
            }
        }
        Ok(())
    }

    /// Plain-text sparse export, one nonzero per line.
    ///
    /// ```text
    /// lp-sparse 1
    /// sense max
    /// columns <n>
    /// objective <nnz>
    /// <col> <value>
    /// equalities <rows> <nnz>
    /// <row> <col> <value>
    /// rhs
    /// <row> <value>          (one line per row)
    /// inequalities <rows> <nnz>
    /// ...
    /// bounds
    /// <col> <lower> <upper>  (one line per column)
    /// end
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lp-sparse 1\nsense max\ncolumns {}", self.num_cols);
        let _ = writeln!(s, "objective {}", self.objective.len());
        for &(j, v) in &self.objective {
            let _ = writeln!(s, "{j} {}", fmt_f64(v));
        }
        for (name, rows) in [("equalities", &self.equalities), ("inequalities", &self.inequalities)] {
            let _ = writeln!(s, "{name} {} {}", rows.num_rows(), rows.triplets.len());
            for &(r, c, v) in &rows.triplets {
                let _ = writeln!(s, "{r} {c} {}", fmt_f64(v));
            }
            let _ = writeln!(s, "rhs");
            for (r, b) in rows.rhs.iter().enumerate() {
                let _ = writeln!(s, "{r} {}", fmt_f64(*b));
            }
        }
        let _ = writeln!(s, "bounds");
        for j in 0..self.num_cols {
            let _ = writeln!(s, "{j} {} {}", fmt_f64(self.lower[j]), fmt_f64(self.upper[j]));
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = Parser::new(text);
        p.expect_line(&["lp-sparse", "1"])?;
        p.expect_line(&["sense", "max"])?;
        let num_cols = p.header("columns", 1)?[0];
        let nnz = p.header("objective", 1)?[0];
        let mut objective = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let f = p.fields(2)?;
            objective.push((p.index(f[0])?, p.float(f[1])?));
        }
        let equalities = p.rows("equalities")?;
        let inequalities = p.rows("inequalities")?;
        p.expect_line(&["bounds"])?;
        let mut lower = vec![0.0; num_cols];
        let mut upper = vec![0.0; num_cols];
        for j in 0..num_cols {
            let f = p.fields(3)?;
            if p.index(f[0])? != j {
                return Err(p.error("bounds must be listed in column order"));
            }
            lower[j] = p.float(f[1])?;
            upper[j] = p.float(f[2])?;
        }
        p.expect_line(&["end"])?;
        let lp = Self {
            num_cols,
            objective,
            equalities,
            inequalities,
            lower,
            upper,
        };
        lp.check()?;
        Ok(lp)
    }
}

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        // shortest representation that round-trips
        format!("{v:?}")
    }
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line_no: 0,
        }
    }

    fn error(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("line {}: {msg}", self.line_no))
    }

    fn next_fields(&mut self) -> Result<Vec<&'a str>> {
        for (i, line) in self.lines.by_ref() {
            self.line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(line.split_whitespace().collect());
        }
        Err(Error::Parse(format!("unexpected end of input after line {}", self.line_no)))
    }

    fn fields(&mut self, n: usize) -> Result<Vec<&'a str>> {
        let f = self.next_fields()?;
        if f.len() != n {
            return Err(self.error(format!("expected {n} fields, found {}", f.len())));
        }
        Ok(f)
    }

    fn expect_line(&mut self, want: &[&str]) -> Result<()> {
        let f = self.next_fields()?;
        if f != want {
            return Err(self.error(format!("expected `{}`", want.join(" "))));
        }
        Ok(())
    }

    fn header(&mut self, keyword: &str, n: usize) -> Result<Vec<usize>> {
        let f = self.fields(n + 1)?;
        if f[0] != keyword {
            return Err(self.error(format!("expected `{keyword}` section")));
        }
        f[1..].iter().map(|s| self.index(s)).collect()
    }

    fn index(&self, s: &str) -> Result<usize> {
        s.parse().map_err(|_| self.error(format!("invalid index `{s}`")))
    }

    fn float(&self, s: &str) -> Result<f64> {
        match s {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => s.parse().map_err(|_| self.error(format!("invalid number `{s}`"))),
        }
    }

    fn rows(&mut self, keyword: &str) -> Result<SparseRows> {
        let h = self.header(keyword, 2)?;
        let (num_rows, nnz) = (h[0], h[1]);
        let mut triplets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let f = self.fields(3)?;
            triplets.push((self.index(f[0])?, self.index(f[1])?, self.float(f[2])?));
        }
        self.expect_line(&["rhs"])?;
        let mut rhs = vec![0.0; num_rows];
        for (r, slot) in rhs.iter_mut().enumerate() {
            let f = self.fields(2)?;
            if self.index(f[0])? != r {
                return Err(self.error("right-hand sides must be listed in row order"));
            }
            *slot = self.float(f[1])?;
        }
        Ok(SparseRows { triplets, rhs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> LpProblem {
        let mut lp = LpProblem::with_unit_box(3);
        lp.objective = vec![(0, 1.0), (2, -0.25)];
        lp.equalities.push_row([(0, 1.0), (1, 1.0)], 1.0);
        lp.inequalities.push_row([(0, 1.0)], 0.5);
        lp.upper[2] = f64::INFINITY;
        lp
    }

    #[test]
    fn text_round_trip() {
        let lp = small();
        let text = lp.to_text();
        assert!(text.contains("2 0.0 inf"), "{text}");
        assert_eq!(LpProblem::from_text(&text).unwrap(), lp);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = small().to_text().replace("sense max", "sense min");
        let err = LpProblem::from_text(&text).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let text = small().to_text().replace("0 1 1.0", "0 1 abc");
        assert!(LpProblem::from_text(&text).is_err());
    }

    #[test]
    fn check_rejects_non_finite_data() {
        let mut lp = small();
        lp.equalities.triplets[0].2 = f64::NAN;
        assert!(lp.check().is_err());
        let mut lp = small();
        lp.objective[0].1 = f64::INFINITY;
        assert!(lp.check().is_err());
        let mut lp = small();
        lp.lower[1] = f64::NEG_INFINITY;
        assert!(lp.check().is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_problems_survive_text_export(
            cols in 1usize..6,
            entries in proptest::collection::vec((0usize..6, 0usize..4, -1e6f64..1e6), 0..20),
            rhs in proptest::collection::vec(-1e3f64..1e3, 4),
        ) {
            let mut lp = LpProblem::with_unit_box(cols);
            for (c, r, v) in &entries {
                if *c < cols && *r < 2 {
                    lp.equalities.triplets.push((*r, *c, *v));
                } else if *c < cols {
                    lp.inequalities.triplets.push((*r - 2, *c, *v));
                    lp.objective.push((*c, v / 3.0));
                }
            }
            lp.equalities.rhs = rhs[..2].to_vec();
            lp.inequalities.rhs = rhs[2..].to_vec();
            let back = LpProblem::from_text(&lp.to_text()).unwrap();
            prop_assert_eq!(back, lp);
        }
    }
}
