//! Dense two-phase primal simplex.
//!
//! Solves `min cᵀx` subject to linear rows (`≤`, `=`, `≥`) and `x ≥ 0`.
//! The tableau is stored densely but row updates only visit the nonzeros of
//! the pivot row and column, which keeps assignment-shaped programs with a
//! few thousand columns fast.
//!
//! Pricing is Dantzig's rule (most negative reduced cost, lowest index on
//! ties). After a run of degenerate pivots the solver switches to Bland's
//! rule until the objective moves again, so it cannot cycle. Every choice
//! is deterministic.

use std::fmt;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    IterationLimit(usize),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "program is infeasible"),
            LpError::Unbounded => write!(f, "program is unbounded"),
            LpError::IterationLimit(n) => write!(f, "no convergence after {n} pivots"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Structural variables in the final basis.
    pub basic: Vec<usize>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, objective: vec![0.0; num_vars], rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    /// Adds a row and returns its index. Repeated variables are summed.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        assert!(coeffs.iter().all(|&(v, _)| v < self.num_vars), "row references unknown variable");
        self.rows.push(Row { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_from(&[])
    }

    /// Solves starting from a crash basis: `(row, var)` pairs pivoted in
    /// before any pricing. If the resulting basis is primal feasible and
    /// covers every equality row, phase one is skipped. Otherwise the hint
    /// is discarded.
    pub fn solve_from(&self, crash: &[(usize, usize)]) -> Result<LpSolution, LpError> {
        if !crash.is_empty() {
            let mut t = Tableau::build(self);
            if t.crash(crash) {
                return t.finish(self);
            }
        }
        let mut t = Tableau::build(self);
        t.phase_one()?;
        t.finish(self)
    }
}

const ARTIFICIAL: usize = usize::MAX;

struct Tableau {
    /// structural + slack columns, then rhs
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    num_struct: usize,
    width: usize,
    obj: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
    scratch: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let num_struct = lp.num_vars;
        let num_slack = lp.rows.iter().filter(|r| r.kind != RowKind::Eq).count();
        let width = num_struct + num_slack;
        let mut rows = Vec::with_capacity(lp.rows.len());
        let mut basis = Vec::with_capacity(lp.rows.len());
        let mut slack = num_struct;
        for r in &lp.rows {
            let mut row = vec![0.0; width + 1];
            for &(v, c) in &r.coeffs {
                row[v] += c;
            }
            row[width] = r.rhs;
            let mut kind = r.kind;
            if r.rhs < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                kind = match kind {
                    RowKind::Le => RowKind::Ge,
                    RowKind::Ge => RowKind::Le,
                    RowKind::Eq => RowKind::Eq,
                };
            }
            match kind {
                RowKind::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                }
                RowKind::Ge => {
                    row[slack] = -1.0;
                    basis.push(ARTIFICIAL);
                }
                RowKind::Eq => basis.push(ARTIFICIAL),
            }
            if r.kind != RowKind::Eq {
                slack += 1;
            }
            rows.push(row);
        }
        let max_pivots = 50 * (rows.len() + width) + 1000;
        Self {
            rows,
            basis,
            num_struct,
            width,
            obj: vec![0.0; width + 1],
            pivots: 0,
            max_pivots,
            scratch: Vec::new(),
        }
    }

    fn crash(&mut self, crash: &[(usize, usize)]) -> bool {
        for &(r, v) in crash {
            if r >= self.rows.len() || v >= self.num_struct || self.rows[r][v].abs() < PIVOT_TOL {
                return false;
            }
            self.pivot(r, v);
        }
        let feasible = self.rows.iter().all(|row| row[self.width] >= -FEAS_TOL);
        let covered = self.basis.iter().all(|&b| b != ARTIFICIAL);
        if feasible {
            for row in &mut self.rows {
                if row[self.width] < 0.0 {
                    row[self.width] = 0.0;
                }
            }
        }
        feasible && covered
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        if self.basis.iter().all(|&b| b != ARTIFICIAL) {
            return Ok(());
        }
        // minimize the sum of artificials, written in nonbasic terms
        let mut obj = vec![0.0; self.width + 1];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b == ARTIFICIAL {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= v;
                }
            }
        }
        self.obj = obj;
        self.optimize()?;
        if -self.obj[self.width] > FEAS_TOL * (1.0 + self.rows.len() as f64) {
            return Err(LpError::Infeasible);
        }
        // drive zero-level artificials out, dropping redundant rows
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] == ARTIFICIAL {
                let col = (0..self.width).find(|&j| self.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        Ok(())
    }

    fn finish(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let mut obj = vec![0.0; self.width + 1];
        obj[..self.num_struct].copy_from_slice(&lp.objective);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let c = if b < self.num_struct { lp.objective[b] } else { 0.0 };
            if c != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= c * v;
                }
            }
        }
        self.obj = obj;
        self.optimize()?;

        let mut x = vec![0.0; self.num_struct];
        let mut basic = Vec::new();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.num_struct {
                x[b] = row[self.width].max(0.0);
                basic.push(b);
            }
        }
        basic.sort_unstable();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective, basic, pivots: self.pivots })
    }

    fn optimize(&mut self) -> Result<(), LpError> {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some(enter) = self.entering(bland) else {
                return Ok(());
            };
            let Some(leave) = self.leaving(enter) else {
                return Err(LpError::Unbounded);
            };
            if self.rows[leave][self.width] <= FEAS_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(leave, enter);
            if self.pivots > self.max_pivots {
                return Err(LpError::IterationLimit(self.pivots));
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_cost = -COST_TOL;
        for j in 0..self.width {
            let d = self.obj[j];
            if d < best_cost {
                best = Some(j);
                if bland {
                    break;
                }
                best_cost = d;
            }
        }
        best
    }

    fn leaving(&self, enter: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[enter];
            if a > PIVOT_TOL {
                let ratio = row[self.width].max(0.0) / a;
                let better = match best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < br - FEAS_TOL * br.abs().max(1.0) * 1e-3
                            || (ratio <= br + FEAS_TOL * br.abs().max(1.0) * 1e-3
                                && self.basis_order(i) < self.basis_order(bi))
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    // artificials leave first, then lowest variable index
    fn basis_order(&self, row: usize) -> (u8, usize) {
        match self.basis[row] {
            ARTIFICIAL => (0, row),
            b => (1, b),
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let inv = 1.0 / self.rows[r][c];
        {
            let row = &mut self.rows[r];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[c] = 1.0;
        }
        let mut nz = std::mem::take(&mut self.scratch);
        nz.clear();
        nz.extend((0..=self.width).filter(|&j| self.rows[r][j] != 0.0));
        let pivot_row = std::mem::take(&mut self.rows[r]);

        let eliminate = |row: &mut Vec<f64>, nz: &[usize]| {
            let f = row[c];
            if f == 0.0 {
                return;
            }
            for &j in nz {
                let v = row[j] - f * pivot_row[j];
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[c] = 0.0;
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row, &nz);
            }
        }
        eliminate(&mut self.obj, &nz);

        self.rows[r] = pivot_row;
        self.scratch = nz;
        self.basis[r] = c;
    }
}
