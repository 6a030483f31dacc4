//! Dense tableau simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The all-slack basis is feasible, so no phase one is needed. Primal pivots
//! use Bland's rule. Rows can be appended to a solved tableau and the
//! optimum restored with dual simplex pivots, which is what the
//! cutting-plane solver needs.

use crate::error::{validation, Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row, read from the slack reduced costs.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub struct Tableau {
    n: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced costs `z_j - c_j`; optimal when all are nonnegative.
    obj: Vec<f64>,
    obj_val: f64,
    basis: Vec<usize>,
    pivots: usize,
    status: Option<LpStatus>,
}

impl Tableau {
    pub fn new(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let n = c.len();
        if a.len() != b.len() {
            return Err(validation!("{} constraint rows but {} right-hand sides", a.len(), b.len()));
        }
        if c.iter().chain(b).chain(a.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(validation!("LP data must be finite"));
        }
        if let Some(i) = b.iter().position(|&v| v < 0.0) {
            return Err(validation!("right-hand side {i} is negative; the slack basis must be feasible"));
        }
        let m = a.len();
        let mut rows = Vec::with_capacity(m);
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(validation!("row {i} has {} entries, expected {n}", row.len()));
            }
            let mut r = Vec::with_capacity(n + m);
            r.extend_from_slice(row);
            r.resize(n + m, 0.0);
            r[n + i] = 1.0;
            rows.push(r);
        }
        let mut obj: Vec<f64> = c.iter().map(|v| -v).collect();
        obj.resize(n + m, 0.0);
        Ok(Self {
            n,
            rows,
            rhs: b.to_vec(),
            obj,
            obj_val: 0.0,
            basis: (n..n + m).collect(),
            pivots: 0,
            status: None,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn ncols(&self) -> usize {
        self.obj.len()
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        let inv = 1.0 / p;
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        self.rows[r][col] = 1.0;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let pivot_rhs = self.rhs[r];
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[col] = 0.0;
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, &pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[col] = 0.0;
            self.obj_val -= f * pivot_rhs;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = col;
        self.pivots += 1;
    }

    fn count_pivot(&self) -> Result<()> {
        if self.pivots >= MAX_PIVOTS {
            return Err(Error::Unconverged(format!("simplex exceeded {MAX_PIVOTS} pivots")));
        }
        Ok(())
    }

    /// Primal simplex from the current (primal feasible) basis.
    pub fn solve(&mut self) -> Result<LpStatus> {
        loop {
            self.count_pivot()?;
            let Some(col) = (0..self.ncols()).find(|&j| self.obj[j] < -PIVOT_EPS) else {
                self.status = Some(LpStatus::Optimal);
                return Ok(LpStatus::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let better = match best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => {
                    self.status = Some(LpStatus::Unbounded);
                    return Ok(LpStatus::Unbounded);
                }
            }
        }
    }

    /// Appends `a.x <= b` and restores optimality by dual simplex.
    /// The tableau must be optimal before the call.
    pub fn add_row(&mut self, a: &[f64], b: f64) -> Result<()> {
        if a.len() != self.n {
            return Err(validation!("cut has {} entries, expected {}", a.len(), self.n));
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(validation!("cut data must be finite"));
        }
        for row in self.rows.iter_mut() {
            row.push(0.0);
        }
        self.obj.push(0.0);
        let ncols = self.ncols();
        let mut row = Vec::with_capacity(ncols);
        row.extend_from_slice(a);
        row.resize(ncols, 0.0);
        row[ncols - 1] = 1.0;
        let mut rhs = b;
        for (i, &bv) in self.basis.iter().enumerate() {
            let f = row[bv];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&self.rows[i]) {
                    *v -= f * pv;
                }
                row[bv] = 0.0;
                rhs -= f * self.rhs[i];
            }
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        self.basis.push(ncols - 1);
        self.status = None;
        Ok(())
    }

    /// Dual simplex until primal feasible, then primal clean-up pivots.
    pub fn reoptimize(&mut self) -> Result<LpStatus> {
        loop {
            self.count_pivot()?;
            let mut leave: Option<usize> = None;
            for (i, &v) in self.rhs.iter().enumerate() {
                if v < -1e-10 && leave.is_none_or(|l| v < self.rhs[l]) {
                    leave = Some(i);
                }
            }
            let Some(r) = leave else { break };
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.ncols() {
                let a = self.rows[r][j];
                if a < -PIVOT_EPS {
                    let ratio = self.obj[j].max(0.0) / -a;
                    if best.is_none_or(|(_, br)| ratio < br - 1e-14) {
                        best = Some((j, ratio));
                    }
                }
            }
            match best {
                Some((col, _)) => self.pivot(r, col),
                None => {
                    self.status = Some(LpStatus::Infeasible);
                    return Ok(LpStatus::Infeasible);
                }
            }
        }
        for v in self.rhs.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.solve()
    }

    pub fn solution(&self) -> LpSolution {
        let mut x = vec![0.0; self.n];
        for (i, &bv) in self.basis.iter().enumerate() {
            if bv < self.n {
                x[bv] = self.rhs[i];
            }
        }
        // Slack of original row i sits in column n + i for the initial rows;
        // appended rows take the next columns in order.
        let duals = (0..self.rows.len()).map(|i| self.obj[self.n + i].max(0.0)).collect();
        LpSolution {
            status: self.status.unwrap_or(LpStatus::Optimal),
            x,
            objective: self.obj_val,
            duals,
            pivots: self.pivots,
        }
    }
}

/// Solves `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
pub fn solve_lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let mut t = Tableau::new(c, a, b)?;
    t.solve()?;
    Ok(t.solution())
}
