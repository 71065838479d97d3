//! Dense two-phase simplex for small linear programs.
//!
//! Problems are `max/min c^T x` subject to `A x <= b` and per-variable bounds
//! (infinite bounds allowed). Rows and columns are equilibrated before the
//! tableau is built, and the returned point is re-checked against the raw
//! constraints.

use crate::error::{Result, SolveError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    /// Inequality rows `a^T x <= b`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    pub value: f64,
}

impl LinearProgram {
    /// Nonnegative variables, no rows.
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        Self {
            objective,
            sense,
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.n_vars());
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    /// Largest violation of rows and bounds at `x`, each row measured relative
    /// to the largest magnitude among its coefficients and rhs.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = row
                .iter()
                .zip(x)
                .map(|(a, v)| (a * v).abs())
                .fold(b.abs(), f64::max)
                .max(1.0);
            worst = worst.max((lhs - b) / scale);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n || self.rows.len() != self.rhs.len() {
            return Err(SolveError::Numerical("inconsistent LP dimensions".into()));
        }
        for row in &self.rows {
            if row.len() != n || row.iter().any(|v| !v.is_finite()) {
                return Err(SolveError::Numerical("malformed LP row".into()));
            }
        }
        if self.objective.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(SolveError::Numerical("non-finite LP data".into()));
        }
        Ok(())
    }
}

const PIVOT_TOL: f64 = 1e-11;
const OPT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

/// How an original variable maps to nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + sign * y`.
    Shift { col: usize, offset: f64, sign: f64 },
    /// `x = y_plus - y_minus`.
    Free { plus: usize, minus: usize },
}

struct Tableau {
    /// Row-major `(m + 1) x (width)`; the last row is the objective, the last
    /// column the right-hand side.
    t: Vec<f64>,
    m: usize,
    width: usize,
    basis: Vec<usize>,
    /// Columns that may not enter the basis.
    blocked: Vec<bool>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        self.t[r * w + c] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes the objective row (stored as reduced costs `-c_j`).
    /// Returns false when unbounded.
    fn run(&mut self, max_pivots: usize) -> Result<bool> {
        let obj = self.m;
        let cols = self.width - 1;
        let mut stall = 0usize;
        let mut last_value = f64::NEG_INFINITY;
        for _ in 0..max_pivots {
            let bland = stall > 50;
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..cols {
                if self.blocked[j] {
                    continue;
                }
                let rc = self.at(obj, j);
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(c) = enter else {
                return Ok(true);
            };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let r = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => r < ratio - 1e-12 || (r <= ratio + 1e-12 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        ratio = r;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
            let value = self.rhs(obj);
            if value > last_value + 1e-12 {
                stall = 0;
                last_value = value;
            } else {
                stall += 1;
            }
        }
        Err(SolveError::Numerical("simplex pivot limit reached".into()))
    }
}

/// Solves `lp` to optimality, or reports infeasibility/unboundedness.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.n_vars();
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                value: f64::NAN,
            });
        }
    }

    // Column scales from the magnitude of each variable's coefficients.
    let col_scale: Vec<f64> = (0..n)
        .map(|j| {
            let m = lp.rows.iter().map(|r| r[j].abs()).fold(lp.objective[j].abs(), f64::max);
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    // In scaled variables x = d x', so a bound l on x becomes l / d on x'.
    let mut maps = Vec::with_capacity(n);
    let mut n_cols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let d = col_scale[j];
        let (l, u) = (lp.lower[j] / d, lp.upper[j] / d);
        if l.is_finite() {
            maps.push(VarMap::Shift { col: n_cols, offset: l, sign: 1.0 });
            if u.is_finite() {
                bound_rows.push((n_cols, u - l));
            }
            n_cols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Shift { col: n_cols, offset: u, sign: -1.0 });
            n_cols += 1;
        } else {
            maps.push(VarMap::Free { plus: n_cols, minus: n_cols + 1 });
            n_cols += 2;
        }
    }

    // Assemble rows over the y columns.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(lp.rows.len() + bound_rows.len());
    for (row, &b) in lp.rows.iter().zip(&lp.rhs) {
        let mut y = vec![0.0; n_cols];
        let mut rhs = b;
        for j in 0..n {
            let a = row[j] * col_scale[j];
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, offset, sign } => {
                    y[col] += a * sign;
                    rhs -= a * offset;
                }
                VarMap::Free { plus, minus } => {
                    y[plus] += a;
                    y[minus] -= a;
                }
            }
        }
        let s = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s == 0.0 {
            if rhs < -FEAS_TOL * b.abs().max(1.0) {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    x: Vec::new(),
                    value: f64::NAN,
                });
            }
            continue;
        }
        rows.push((y.iter().map(|v| v / s).collect(), rhs / s));
    }
    for &(col, cap) in &bound_rows {
        let mut y = vec![0.0; n_cols];
        y[col] = 1.0;
        rows.push((y, cap));
    }

    let sign = if lp.sense == Sense::Maximize { 1.0 } else { -1.0 };
    let mut cost = vec![0.0; n_cols];
    for j in 0..n {
        let c = sign * lp.objective[j] * col_scale[j];
        match maps[j] {
            VarMap::Shift { col, sign: s, .. } => {
                cost[col] += c * s;
            }
            VarMap::Free { plus, minus } => {
                cost[plus] += c;
                cost[minus] -= c;
            }
        }
    }
    let cmax = cost.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cost_scale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };

    let m = rows.len();
    let n_art = rows.iter().filter(|(_, b)| *b < 0.0).count();
    let slack0 = n_cols;
    let art0 = n_cols + m;
    let width = n_cols + m + n_art + 1;
    let mut tab = Tableau {
        t: vec![0.0; (m + 1) * width],
        m,
        width,
        basis: vec![0; m],
        blocked: vec![false; width - 1],
    };
    let mut next_art = art0;
    for (i, (y, b)) in rows.iter().enumerate() {
        let flip = if *b < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in y.iter().enumerate() {
            tab.t[i * width + j] = flip * v;
        }
        tab.t[i * width + slack0 + i] = flip;
        tab.t[i * width + width - 1] = flip * b;
        if flip < 0.0 {
            tab.t[i * width + next_art] = 1.0;
            tab.basis[i] = next_art;
            next_art += 1;
        } else {
            tab.basis[i] = slack0 + i;
        }
    }
    let max_pivots = 50 * (m + width);

    if n_art > 0 {
        // Phase I: maximize -sum(artificials).
        let obj = m * width;
        for j in art0..art0 + n_art {
            tab.t[obj + j] = 1.0;
        }
        for i in 0..m {
            if tab.basis[i] >= art0 {
                for j in 0..width {
                    tab.t[obj + j] -= tab.t[i * width + j];
                }
            }
        }
        tab.run(max_pivots)?;
        let infeas = -tab.rhs(m);
        let rhs_scale = rows.iter().fold(1.0f64, |s, (_, b)| s.max(b.abs()));
        if infeas > FEAS_TOL * rhs_scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                value: f64::NAN,
            });
        }
        // Drive remaining artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= art0 {
                let col = (0..art0).find(|&j| tab.at(i, j).abs() > 1e-9);
                if let Some(c) = col {
                    tab.pivot(i, c);
                }
            }
        }
        for j in art0..art0 + n_art {
            tab.blocked[j] = true;
        }
    }

    // Phase II objective row.
    let obj = m * width;
    for j in 0..width {
        tab.t[obj + j] = 0.0;
    }
    for (j, c) in cost.iter().enumerate() {
        tab.t[obj + j] = -c * cost_scale;
    }
    for i in 0..m {
        let c = tab.at(m, tab.basis[i]);
        if c != 0.0 {
            for j in 0..width {
                tab.t[obj + j] -= c * tab.t[i * width + j];
            }
        }
    }
    if !tab.run(max_pivots)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            value: f64::NAN,
        });
    }

    let mut y = vec![0.0; width - 1];
    for i in 0..m {
        y[tab.basis[i]] = tab.rhs(i).max(0.0);
    }
    let mut x = vec![0.0; n];
    for j in 0..n {
        let scaled = match maps[j] {
            VarMap::Shift { col, offset, sign } => offset + sign * y[col],
            VarMap::Free { plus, minus } => y[plus] - y[minus],
        };
        x[j] = (scaled * col_scale[j]).clamp(lp.lower[j], lp.upper[j]);
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let viol = lp.max_violation(&x);
    if viol > 1e-7 {
        return Err(SolveError::Numerical(format!("LP solution violates constraints by {viol:.3e}")));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_max() {
        let mut lp = LinearProgram::new(vec![1.0], Sense::Maximize);
        lp.add_row(vec![1.0], 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_variable_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0], Sense::Maximize);
        lp.add_row(vec![1.0], -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0], Sense::Maximize);
        lp.add_row(vec![1.0, -1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_and_minimization() {
        // min t s.t. t >= x - 3, t >= 1 - x, x in [0, 10], t free -> t = -1 at x = 2.
        let mut lp = LinearProgram::new(vec![0.0, 1.0], Sense::Minimize);
        lp.set_bounds(0, 0.0, 10.0);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![1.0, -1.0], 3.0);
        lp.add_row(vec![-1.0, -1.0], -1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value + 1.0).abs() < 1e-10, "{s:?}");
        assert!((s.x[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn badly_scaled_rows() {
        // max x + y s.t. 1e6 x + 2e6 y <= 4e6, 3e-4 x + 1e-4 y <= 3e-4.
        let mut lp = LinearProgram::new(vec![1.0, 1.0], Sense::Maximize);
        lp.add_row(vec![1e6, 2e6], 4e6);
        lp.add_row(vec![3e-4, 1e-4], 3e-4);
        let s = solve_lp(&lp).unwrap();
        // Vertex at x = 0.4, y = 1.8.
        assert!((s.value - 2.2).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn negative_lower_bounds_and_equality_pair() {
        // max x1 - x2 with x1 + x2 = 1 (two rows), x in [-5, 5].
        let mut lp = LinearProgram::new(vec![1.0, -1.0], Sense::Maximize);
        lp.set_bounds(0, -5.0, 5.0);
        lp.set_bounds(1, -5.0, 5.0);
        lp.add_row(vec![1.0, 1.0], 1.0);
        lp.add_row(vec![-1.0, -1.0], -1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 9.0).abs() < 1e-10, "{s:?}");
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling LP (converted to max).
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0], Sense::Maximize);
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.value - 0.05).abs() < 1e-9, "{s:?}");
    }
}
