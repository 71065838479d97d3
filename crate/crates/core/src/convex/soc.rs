//! Log-barrier interior point method for small problems with linear and
//! second-order-cone constraints.
//!
//! Constraints are `a_i^T x <= b_i` and `||F_j x + f_j|| <= d_j^T x + e_j`.
//! Objectives are linear or a sum of logarithms of positive affine terms,
//! both maximized. Feasibility is decided by a phase-I problem that minimizes
//! a common slack `s` added to every constraint.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolveError};

/// `||f x + f0|| <= d^T x + d0`
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub f: DMatrix<f64>,
    pub f0: DVector<f64>,
    pub d: DVector<f64>,
    pub d0: f64,
}

impl SocConstraint {
    /// `d^T x + d0 - ||f x + f0||`; nonnegative when satisfied.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.d.dot(x) + self.d0 - (&self.f * x + &self.f0).norm()
    }

    fn scaled(&self) -> SocConstraint {
        let s = self.f.norm().max(self.d.norm()).max(self.f0.norm()).max(self.d0.abs());
        if s == 0.0 {
            return self.clone();
        }
        SocConstraint {
            f: &self.f / s,
            f0: &self.f0 / s,
            d: &self.d / s,
            d0: self.d0 / s,
        }
    }
}

/// Linear inequalities plus cones over `n` variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeProgram {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub cones: Vec<SocConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximize `c^T x`.
    Linear(Vec<f64>),
    /// Maximize `sum_i log(p_i^T x + q_i)`.
    SumLog(Vec<(Vec<f64>, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution {
    pub x: Vec<f64>,
    /// Objective at `x` in the caller's units.
    pub value: f64,
}

impl ConeProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn add_row(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.n);
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn add_cone(&mut self, cone: SocConstraint) {
        debug_assert_eq!(cone.f.ncols(), self.n);
        self.cones.push(cone);
    }

    /// Largest violation of any constraint (rows normalized to unit norm).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let mut worst: f64 = 0.0;
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max((lhs - b) / norm);
        }
        for c in &self.cones {
            let c = c.scaled();
            worst = worst.max(-c.margin(&xv));
        }
        worst
    }

    fn normalized(&self) -> Normalized {
        let n = self.n;
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (i, (row, &r)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = if norm > 0.0 { norm } else { 1.0 };
            for j in 0..n {
                a[(i, j)] = row[j] / s;
            }
            b[i] = r / s;
        }
        Normalized {
            a,
            b,
            cones: self.cones.iter().map(SocConstraint::scaled).collect(),
        }
    }
}

struct Normalized {
    a: DMatrix<f64>,
    b: DVector<f64>,
    cones: Vec<SocConstraint>,
}

enum Obj {
    Linear(DVector<f64>),
    SumLog(Vec<(DVector<f64>, f64)>),
}

impl Obj {
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        match self {
            Obj::Linear(c) => Some(c.dot(x)),
            Obj::SumLog(terms) => {
                let mut v = 0.0;
                for (p, q) in terms {
                    let y = p.dot(x) + q;
                    if y <= 0.0 {
                        return None;
                    }
                    v += y.ln();
                }
                Some(v)
            }
        }
    }
}

/// Barrier state for `maximize t * obj(x) + sum log(slacks)`.
struct Barrier<'a> {
    p: &'a Normalized,
    obj: &'a Obj,
    nu: f64,
}

impl Barrier<'_> {
    /// Negated barrier objective (to minimize); `None` outside the domain.
    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = -t * self.obj.value(x)?;
        let r = &self.p.b - &self.p.a * x;
        for &ri in r.iter() {
            if ri <= 0.0 {
                return None;
            }
            v -= ri.ln();
        }
        for c in &self.p.cones {
            let u = c.d.dot(x) + c.d0;
            let w = &c.f * x + &c.f0;
            let q = u * u - w.norm_squared();
            if u <= 0.0 || q <= 0.0 {
                return None;
            }
            v -= q.ln();
        }
        Some(v)
    }

    fn grad_hess(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        match self.obj {
            Obj::Linear(c) => g -= c * t,
            Obj::SumLog(terms) => {
                for (p, q) in terms {
                    let y = p.dot(x) + q;
                    g -= p * (t / y);
                    h.ger(t / (y * y), p, p, 1.0);
                }
            }
        }
        let r = &self.p.b - &self.p.a * x;
        for i in 0..r.len() {
            let ai = self.p.a.row(i).transpose();
            g += &ai / r[i];
            h.ger(1.0 / (r[i] * r[i]), &ai, &ai, 1.0);
        }
        for c in &self.p.cones {
            let u = c.d.dot(x) + c.d0;
            let w = &c.f * x + &c.f0;
            let q = u * u - w.norm_squared();
            let grad_q = &c.d * (2.0 * u) - c.f.transpose() * (&w * 2.0);
            g -= &grad_q / q;
            // Hessian of -log q: -(2 d d^T - 2 F^T F)/q + grad_q grad_q^T / q^2.
            h.ger(-2.0 / q, &c.d, &c.d, 1.0);
            h += c.f.transpose() * &c.f * (2.0 / q);
            h.ger(1.0 / (q * q), &grad_q, &grad_q, 1.0);
        }
        (g, h)
    }

    /// Newton centering from a strictly feasible `x`.
    fn center(&self, mut x: DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let mut fx = self
            .value(&x, t)
            .ok_or_else(|| SolveError::Numerical("barrier start is not strictly feasible".into()))?;
        for _ in 0..200 {
            let (g, h) = self.grad_hess(&x, t);
            let dx = newton_step(&h, &g)?;
            let dec = -g.dot(&dx);
            if !(dec > 0.0) || dec / 2.0 < 1e-12 {
                return Ok(x);
            }
            let mut s = 1.0;
            loop {
                let cand = &x + &dx * s;
                if let Some(fc) = self.value(&cand, t) {
                    if fc <= fx - 0.25 * s * dec {
                        x = cand;
                        fx = fc;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    return Ok(x);
                }
            }
        }
        Ok(x)
    }

    /// Path following until the duality gap `nu / t` is below `gap`, or `stop`
    /// accepts an iterate.
    fn follow(&self, x0: DVector<f64>, gap: f64, stop: &dyn Fn(&DVector<f64>, f64) -> bool) -> Result<(DVector<f64>, f64)> {
        let mut t = 1.0;
        let mut x = x0;
        loop {
            x = self.center(x, t)?;
            if stop(&x, t) || self.nu / t < gap {
                return Ok((x, t));
            }
            t *= 20.0;
            if t > 1e16 {
                return Ok((x, t));
            }
        }
    }
}

fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return Ok(-ch.solve(g));
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    Err(SolveError::Numerical("barrier Hessian is not positive definite".into()))
}

const FEAS_TOL: f64 = 1e-7;

/// Finds a point satisfying all constraints (within `1e-7` on normalized
/// constraints), or returns `None` when the phase-I optimum certifies
/// infeasibility. `start` seeds the search.
pub fn solve_soc_feasibility(prog: &ConeProgram, start: Option<&[f64]>) -> Result<Option<Vec<f64>>> {
    let norm = prog.normalized();
    let n = prog.n;
    let x0 = match start {
        Some(s) => DVector::from_column_slice(s),
        None => DVector::zeros(n),
    };
    // Already strictly feasible?
    if strictly_feasible(&norm, &x0) {
        return Ok(Some(x0.as_slice().to_vec()));
    }

    // Phase I over (x, s): every constraint relaxed by s, plus s >= -1.
    let m = norm.a.nrows();
    let mut a = DMatrix::zeros(m + 1, n + 1);
    let mut b = DVector::zeros(m + 1);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = norm.a[(i, j)];
        }
        a[(i, n)] = -1.0;
        b[i] = norm.b[i];
    }
    a[(m, n)] = -1.0;
    b[m] = 1.0;
    let cones: Vec<SocConstraint> = norm
        .cones
        .iter()
        .map(|c| {
            let k = c.f.nrows();
            let mut f = DMatrix::zeros(k, n + 1);
            f.view_mut((0, 0), (k, n)).copy_from(&c.f);
            let mut d = DVector::zeros(n + 1);
            d.rows_mut(0, n).copy_from(&c.d);
            d[n] = 1.0;
            SocConstraint {
                f,
                f0: c.f0.clone(),
                d,
                d0: c.d0,
            }
        })
        .collect();
    let mut s0: f64 = 0.0;
    let r = &norm.b - &norm.a * &x0;
    for &ri in r.iter() {
        s0 = s0.max(-ri);
    }
    for c in &norm.cones {
        s0 = s0.max(-c.margin(&x0));
    }
    let s0 = s0 + 1.0;
    let aug = Normalized { a, b, cones };
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    let obj = Obj::Linear(c);
    let nu = (m + 1) as f64 + 2.0 * aug.cones.len() as f64;
    let barrier = Barrier { p: &aug, obj: &obj, nu };
    let mut z0 = DVector::zeros(n + 1);
    z0.rows_mut(0, n).copy_from(&x0);
    z0[n] = s0;
    let stop = |z: &DVector<f64>, t: f64| z[n] < 0.0 || z[n] - nu / t > 0.0;
    let (z, t) = barrier.follow(z0, 1e-10, &stop)?;
    let s = z[n];
    let x = z.rows(0, n).into_owned();
    if s < 0.0 && strictly_feasible(&norm, &x) {
        return Ok(Some(x.as_slice().to_vec()));
    }
    if s - nu / t > 0.0 {
        return Ok(None);
    }
    if prog.max_violation(x.as_slice()) <= FEAS_TOL {
        return Ok(Some(x.as_slice().to_vec()));
    }
    Ok(None)
}

fn strictly_feasible(p: &Normalized, x: &DVector<f64>) -> bool {
    let r = &p.b - &p.a * x;
    r.iter().all(|&v| v > 0.0)
        && p.cones.iter().all(|c| {
            let u = c.d.dot(x) + c.d0;
            u > 0.0 && u * u - (&c.f * x + &c.f0).norm_squared() > 0.0
        })
}

/// Maximizes `objective` over the constraint set. Returns `None` when the set
/// is infeasible. The result is optimal to a barrier duality gap of `gap`.
pub fn maximize(prog: &ConeProgram, objective: &Objective, start: Option<&[f64]>, gap: f64) -> Result<Option<ConeSolution>> {
    let Some(x0) = solve_soc_feasibility(prog, start)? else {
        return Ok(None);
    };
    let norm = prog.normalized();
    let x0 = DVector::from_vec(x0);
    if !strictly_feasible(&norm, &x0) {
        // Feasible only on the boundary; nothing better can be certified.
        let value = objective_value(objective, x0.as_slice());
        return Ok(Some(ConeSolution {
            x: x0.as_slice().to_vec(),
            value,
        }));
    }
    let obj = match objective {
        Objective::Linear(c) => {
            let s = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let s = if s > 0.0 { s } else { 1.0 };
            Obj::Linear(DVector::from_iterator(c.len(), c.iter().map(|v| v / s)))
        }
        Objective::SumLog(terms) => Obj::SumLog(
            terms
                .iter()
                .map(|(p, q)| {
                    let s = p.iter().fold(q.abs(), |m, v| m.max(v.abs()));
                    (DVector::from_iterator(p.len(), p.iter().map(|v| v / s)), q / s)
                })
                .collect(),
        ),
    };
    if obj.value(&x0).is_none() {
        return Err(SolveError::Numerical("objective undefined at the feasible start".into()));
    }
    let nu = norm.a.nrows() as f64 + 2.0 * norm.cones.len() as f64;
    let barrier = Barrier { p: &norm, obj: &obj, nu };
    let (x, _) = barrier.follow(x0, gap, &|_, _| false)?;
    let x = x.as_slice().to_vec();
    Ok(Some(ConeSolution {
        value: objective_value(objective, &x),
        x,
    }))
}

fn objective_value(objective: &Objective, x: &[f64]) -> f64 {
    match objective {
        Objective::Linear(c) => c.iter().zip(x).map(|(a, b)| a * b).sum(),
        Objective::SumLog(terms) => terms
            .iter()
            .map(|(p, q)| (p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + q).ln())
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm_cone_1d() -> SocConstraint {
        // |x| <= 1
        SocConstraint {
            f: DMatrix::from_element(1, 1, 1.0),
            f0: DVector::zeros(1),
            d: DVector::zeros(1),
            d0: 1.0,
        }
    }

    #[test]
    fn unit_ball_with_lower_bound_is_feasible() {
        let mut p = ConeProgram::new(1);
        p.add_cone(norm_cone_1d());
        p.add_row(vec![-1.0], -0.5);
        let x = solve_soc_feasibility(&p, None).unwrap().expect("feasible");
        assert!(x[0] >= 0.5 - 1e-7 && x[0] <= 1.0 + 1e-7);
    }

    #[test]
    fn unit_ball_beyond_reach_is_infeasible() {
        let mut p = ConeProgram::new(1);
        p.add_cone(norm_cone_1d());
        p.add_row(vec![-1.0], -2.0);
        assert!(solve_soc_feasibility(&p, None).unwrap().is_none());
    }

    #[test]
    fn linear_objective_over_disc() {
        // max x + y over x^2 + y^2 <= 4 -> sqrt(8).
        let mut p = ConeProgram::new(2);
        p.add_cone(SocConstraint {
            f: DMatrix::identity(2, 2),
            f0: DVector::zeros(2),
            d: DVector::zeros(2),
            d0: 2.0,
        });
        let s = maximize(&p, &Objective::Linear(vec![1.0, 1.0]), None, 1e-10).unwrap().unwrap();
        assert!((s.value - 8f64.sqrt()).abs() < 1e-7, "{s:?}");
    }

    #[test]
    fn sum_log_over_simplex() {
        // max log(1 + 4a) + log(1 + b), a + b <= 1, a, b >= 0.
        // Water-filling: 1/4 + a = 1 + b, a + b = 1 -> a = 7/8, b = 1/8.
        let mut p = ConeProgram::new(2);
        p.add_row(vec![1.0, 1.0], 1.0);
        p.add_row(vec![-1.0, 0.0], 0.0);
        p.add_row(vec![0.0, -1.0], 0.0);
        let obj = Objective::SumLog(vec![(vec![4.0, 0.0], 1.0), (vec![0.0, 1.0], 1.0)]);
        let s = maximize(&p, &obj, None, 1e-10).unwrap().unwrap();
        assert!((s.x[0] - 0.875).abs() < 1e-6, "{s:?}");
        assert!((s.x[1] - 0.125).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn infeasible_linear_system() {
        let mut p = ConeProgram::new(2);
        p.add_row(vec![1.0, 1.0], 1.0);
        p.add_row(vec![-1.0, -1.0], -3.0);
        assert!(solve_soc_feasibility(&p, None).unwrap().is_none());
        assert!(maximize(&p, &Objective::Linear(vec![1.0, 0.0]), None, 1e-9).unwrap().is_none());
    }
}
