//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated as `min c'x` subject to `G x <= h` with all
//! variables free. Free variables are split into positive parts, slacks
//! are added, and the standard-form tableau is solved with
//! steepest-edge pricing, switching to Bland's rule after
//! `10 * (rows + cols)` iterations so termination is guaranteed.
//! Optimal solutions come with dual values and a certification residual
//! (dual feasibility + complementary slackness + duality gap).

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use ndarray::{Array1, Array2};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients; the problem is a minimization.
    pub objective: Vec<f64>,
    /// Constraint rows of `G x <= h`.
    pub lhs: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint row (`>= 0`, for the `<=` form).
    pub dual: Vec<f64>,
    /// Max of dual-infeasibility, complementary-slackness and gap
    /// residuals; small values certify optimality.
    pub certification_residual: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // m rows, each ncols + 1 wide (last entry rhs)
    cost: Vec<f64>,      // reduced costs, ncols + 1 wide (last entry -objective)
    basis: Vec<usize>,
    ncols: usize,
    banned: Vec<bool>,
    iterations: u64,
    bland_after: u64,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

impl Tableau {
    fn reprice(&mut self, costs: &[f64]) {
        let ncols = self.ncols;
        self.cost = costs.to_vec();
        self.cost.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                for j in 0..=ncols {
                    self.cost[j] -= cb * self.rows[i][j];
                }
            }
        }
    }

    fn entering(&self) -> Option<usize> {
        if self.iterations >= self.bland_after {
            // Bland: lowest-index improving column.
            return (0..self.ncols)
                .find(|&j| !self.banned[j] && self.cost[j] < -COST_TOL);
        }
        // Steepest-edge flavored pricing on the tableau columns.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if self.banned[j] || self.cost[j] >= -COST_TOL {
                continue;
            }
            let col_sq: f64 = self.rows.iter().map(|r| r[j] * r[j]).sum();
            let score = self.cost[j] * self.cost[j] / (1.0 + col_sq);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn step(&mut self) -> Step {
        let Some(col) = self.entering() else {
            return Step::Optimal;
        };
        let rhs = self.ncols;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.rows.len() {
            let a = self.rows[i][col];
            if a > PIVOT_TOL {
                let ratio = self.rows[i][rhs] / a;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-12
                            || (ratio < lr + 1e-12 && self.basis[i] < self.basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return Step::Unbounded;
        };
        self.pivot(row, col);
        self.iterations += 1;
        Step::Pivoted
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[row].clone();
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for (v, p) in self.rows[i].iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
            }
        }
        self.basis[row] = col;
    }

    fn run(&mut self, max_iters: u64) -> Result<Step> {
        loop {
            match self.step() {
                Step::Pivoted => {
                    if self.iterations > max_iters {
                        return Err(Error::InvalidArgument(
                            "simplex iteration cap exceeded".into(),
                        ));
                    }
                }
                other => return Ok(other),
            }
        }
    }

    fn objective_value(&self) -> f64 {
        -self.cost[self.ncols]
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<LpOutcome> {
        let m = self.lhs.len();
        let n = self.objective.len();
        if self.rhs.len() != m || self.lhs.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "linear program rows/objective disagree".into(),
            ));
        }

        // Standard form: x = u - v, u,v >= 0; slack s >= 0 per row;
        // rows with negative rhs are negated, their slack turns -1 and
        // an artificial takes its place in the initial basis.
        let flipped: Vec<bool> = self.rhs.iter().map(|&b| b < 0.0).collect();
        let n_art = flipped.iter().filter(|f| **f).count();
        let ncols = 2 * n + m + n_art;

        let mut std_rows = vec![vec![0.0; ncols + 1]; m];
        let mut art_col = 2 * n + m;
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            let s = if flipped[i] { -1.0 } else { 1.0 };
            for j in 0..n {
                std_rows[i][j] = s * self.lhs[i][j];
                std_rows[i][n + j] = -s * self.lhs[i][j];
            }
            std_rows[i][2 * n + i] = s; // slack
            std_rows[i][ncols] = s * self.rhs[i];
            if flipped[i] {
                std_rows[i][art_col] = 1.0;
                basis.push(art_col);
                art_col += 1;
            } else {
                basis.push(2 * n + i);
            }
        }

        let std_matrix = std_rows.clone();
        let mut std_cost = vec![0.0; ncols];
        for j in 0..n {
            std_cost[j] = self.objective[j];
            std_cost[n + j] = -self.objective[j];
        }

        let mut tab = Tableau {
            rows: std_rows,
            cost: Vec::new(),
            basis,
            ncols,
            banned: vec![false; ncols],
            iterations: 0,
            bland_after: 10 * (m as u64 + ncols as u64),
        };
        let max_iters = 2_000 + 200 * (m as u64 + ncols as u64);

        // Phase 1.
        if n_art > 0 {
            let mut phase1 = vec![0.0; ncols];
            for c in phase1.iter_mut().take(ncols).skip(2 * n + m) {
                *c = 1.0;
            }
            tab.reprice(&phase1);
            if let Step::Unbounded = tab.run(max_iters)? {
                return Err(Error::InvalidArgument(
                    "phase-1 objective unbounded (internal)".into(),
                ));
            }
            if tab.objective_value() > FEAS_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            // Pivot lingering artificials out where possible.
            for i in 0..m {
                if tab.basis[i] >= 2 * n + m {
                    if let Some(col) =
                        (0..2 * n + m).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL)
                    {
                        tab.pivot(i, col);
                    }
                }
            }
            for b in tab.banned.iter_mut().take(ncols).skip(2 * n + m) {
                *b = true;
            }
        }

        // Phase 2.
        tab.iterations = 0;
        tab.reprice(&std_cost);
        if let Step::Unbounded = tab.run(max_iters)? {
            return Ok(LpOutcome::Unbounded);
        }

        // Primal solution.
        let mut z = vec![0.0; ncols];
        for (i, &b) in tab.basis.iter().enumerate() {
            z[b] = tab.rows[i][ncols];
        }
        let x: Vec<f64> = (0..n).map(|j| z[j] - z[n + j]).collect();
        let objective: f64 = self
            .objective
            .iter()
            .zip(x.iter())
            .map(|(c, v)| c * v)
            .sum();

        // Duals from the original standard-form basis: solve B' y = c_B.
        let mut bmat = Array2::zeros((m, m));
        let mut cb = Array1::zeros(m);
        for (i, &b) in tab.basis.iter().enumerate() {
            for r in 0..m {
                bmat[[r, i]] = std_matrix[r][b];
            }
            cb[i] = if b < ncols { std_cost.get(b).copied().unwrap_or(0.0) } else { 0.0 };
        }
        let y = solve_dense(&bmat.t().to_owned(), &cb)
            .ok_or_else(|| Error::InvalidArgument("singular simplex basis (internal)".into()))?;

        // Certification residuals in standard form.
        let mut residual: f64 = 0.0;
        for j in 0..2 * n + m {
            let mut rc = std_cost[j];
            for i in 0..m {
                rc -= y[i] * std_matrix[i][j];
            }
            residual = residual.max(-rc); // dual feasibility: rc >= 0
            residual = residual.max((z[j] * rc).abs()); // complementary slackness
        }
        let dual_obj: f64 = (0..m).map(|i| y[i] * std_matrix[i][ncols]).sum();
        residual = residual.max((dual_obj - objective).abs());

        // Map equality-form duals back to the `<=` rows; flipped rows
        // change sign. Multipliers come out <= 0 for a minimization, so
        // report lambda = -y >= 0.
        let dual: Vec<f64> = (0..m)
            .map(|i| {
                let v = if flipped[i] { -y[i] } else { y[i] };
                -v
            })
            .collect();

        Ok(LpOutcome::Optimal(LpSolution {
            x,
            objective,
            dual,
            certification_residual: residual.max(0.0),
        }))
    }
}
