//! Max-sum secrecy rate.
//!
//! In the lower case the achievable ratios `y_g = (1 + S_g alpha_{g,1}) / (1 + z_g)`
//! form a normal set and `sum log2 y_g` is increasing, so an outer polyblock
//! approximation finds the global optimum. Projections onto the ratio set are
//! weighted max-min problems solved by Dinkelbach iterations. The upper case
//! reuses the alternating scheme of the MMSR solver with a sum-log objective.

use crate::convex::{maximize, solve_lp, LinearProgram, LpStatus, Objective, Sense};
use crate::error::{Result, SolveError};
use crate::mmsr::{alternate, dinkelbach, power_update_program};
use crate::rates::{PowerAllocation, SlackVector};
use crate::scenario::{EveCase, Scenario};
use crate::solution::{SolveResult, SolveStatus, SolverOptions};
use crate::sop::BernsteinParams;

/// Relative accuracy of each projection, as a fraction of the outer tolerance.
const PROJECTION_TOL: f64 = 1e-3;

/// `lambda u`, the projection of vertex `u` onto the upper boundary of the
/// achievable ratio set, with the allocation that attains it.
#[derive(Debug, Clone)]
pub struct Projection {
    pub lambda: f64,
    pub point: Vec<f64>,
    pub alloc: PowerAllocation,
    pub slack: SlackVector,
}

impl Projection {
    /// `sum_g log2` of the ratios actually achieved by the allocation, which
    /// dominate `point`.
    pub fn value(&self, scn: &Scenario) -> f64 {
        scn.secrecy_rates(&self.alloc, &self.slack).iter().sum()
    }
}

/// Largest `beta` with `beta u` achievable, by Dinkelbach on
/// `min_g (1 + S_g alpha_{g,1}) / (u_g (1 + z_g))`. Coordinates equal to one
/// belong to clusters whose ratio cannot exceed one; they are held at
/// `alpha_{g,1} = z_g = 0` and left out of the minimum unless all are.
pub fn project(scn: &Scenario, params: BernsteinParams, u: &[f64], tol: f64) -> Result<Projection> {
    if u.iter().any(|&v| v < 1.0 - 1e-12) {
        return Err(SolveError::Numerical("polyblock vertex below the all-ones corner".into()));
    }
    let weights: Vec<f64> = if u.iter().all(|&v| v <= 1.0) {
        u.to_vec()
    } else {
        u.iter().map(|&v| if v <= 1.0 { 0.0 } else { v }).collect()
    };
    let d = dinkelbach(scn, params, &weights, 0.0, tol, 200)?;
    Ok(Projection {
        lambda: d.lambda,
        point: u.iter().map(|v| v * d.lambda).collect(),
        alloc: d.alloc,
        slack: d.slack,
    })
}

#[derive(Debug, Clone)]
struct Vertex {
    u: Vec<f64>,
    proj: Projection,
}

impl Vertex {
    fn bound(&self) -> f64 {
        self.u.iter().map(|v| v.log2()).sum()
    }

}

/// Outer polyblock state: proper vertices with cached projections and the
/// best allocation seen.
#[derive(Debug, Clone)]
pub struct Polyblock {
    vertices: Vec<Vertex>,
    best: Projection,
    best_value: f64,
    pub iteration: usize,
}

impl Polyblock {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// `max_v sum log2 v` over the vertices; bounds the optimum from above.
    pub fn bound(&self) -> f64 {
        self.vertices.iter().map(Vertex::bound).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    fn offer(&mut self, scn: &Scenario, proj: &Projection) {
        let v = proj.value(scn);
        if v > self.best_value {
            self.best_value = v;
            self.best = proj.clone();
        }
    }

    fn is_proper(&self) -> bool {
        self.vertices.iter().enumerate().all(|(i, a)| {
            a.u.iter().all(|&v| v >= 1.0)
                && self.vertices.iter().enumerate().all(|(j, b)| i == j || !dominates(&b.u, &a.u))
        })
    }
}

/// `a >= b` componentwise.
fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Componentwise bound on the achievable ratios: for each cluster alone,
/// `(1 + S_g a) / (1 + c a)` at the largest SU power `a` that QoS and the
/// power budget allow (or at `a = 0` when the ratio decreases in `a`).
/// Never exceeds `1 + S_g`.
pub fn initial_vertex(scn: &Scenario, params: BernsteinParams) -> Result<Vec<f64>> {
    let n = scn.n_alpha();
    let c = scn.eve_scale() * params.rank_one_factor();
    (0..scn.n_clusters)
        .map(|g| {
            let s = scn.su_gain[g];
            if s <= c {
                return Ok(1.0);
            }
            let mut obj = vec![0.0; n];
            obj[scn.alpha_index(g, 0)] = 1.0;
            let mut lp = LinearProgram::new(obj, Sense::Maximize);
            for (row, rhs) in scn.qos_rows(n) {
                lp.add_row(row, rhs);
            }
            let (row, rhs) = scn.power_row(n);
            lp.add_row(row, rhs);
            let sol = solve_lp(&lp)?;
            if sol.status != LpStatus::Optimal {
                return Err(SolveError::Infeasible("QoS and power constraints admit no allocation".into()));
            }
            // Slightly enlarged so the box still covers the LP's rounding.
            let a = (sol.value * (1.0 + 1e-9)).min(1.0);
            Ok(((1.0 + s * a) / (1.0 + c * a)).min(1.0 + s))
        })
        .collect()
}

/// Global MSSR in the lower case by outer polyblock approximation.
///
/// Starts from the vertex of [`initial_vertex`], replaces the selected vertex `u` by its
/// children with coordinate `g` lowered to the projection, prunes improper
/// vertices and refines the vertex with the largest sum-log value next.
/// Stops once the best feasible value is within relative `delta` of that
/// bound.
pub fn mssr_lower(scn: &Scenario, params: BernsteinParams, opts: SolverOptions) -> Result<SolveResult> {
    let tol = opts.tolerance * PROJECTION_TOL;
    let g_count = scn.n_clusters;
    let seed = project(scn, params, &vec![1.0; g_count], tol)?;
    let u1 = initial_vertex(scn, params)?;
    let live: Vec<bool> = u1.iter().map(|&v| v > 1.0).collect();
    let first = Vertex {
        proj: project(scn, params, &u1, tol)?,
        u: u1,
    };
    let mut pb = Polyblock {
        vertices: vec![first],
        best_value: seed.value(scn),
        best: seed,
        iteration: 0,
    };
    let p = pb.vertices[0].proj.clone();
    pb.offer(scn, &p);

    let mut trace = Vec::new();
    let mut bound_trace = Vec::new();
    let mut status = SolveStatus::IterationCap;
    while pb.iteration < opts.max_iters {
        pb.iteration += 1;
        let bound = pb.bound();
        trace.push(pb.best_value);
        bound_trace.push(bound);
        if relative_gap(bound, pb.best_value) <= opts.tolerance {
            status = SolveStatus::Optimal;
            break;
        }
        let current = pb
            .vertices
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.bound().total_cmp(&b.1.bound()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let v = pb.vertices.swap_remove(current);
        for g in (0..g_count).filter(|&g| live[g]) {
            let mut u = v.u.clone();
            u[g] = v.proj.point[g];
            if u[g] < 1.0 {
                continue;
            }
            if pb.vertices.iter().any(|w| dominates(&w.u, &u)) {
                continue;
            }
            pb.vertices.retain(|w| !dominates(&u, &w.u));
            let proj = project(scn, params, &u, tol)?;
            pb.offer(scn, &proj);
            pb.vertices.push(Vertex { u, proj });
        }
        if pb.vertices.is_empty() {
            // Only the all-ones corner remains, which the seed projection covers.
            status = SolveStatus::Optimal;
            break;
        }
        debug_assert!(pb.is_proper());
    }

    let bound = pb.bound().max(pb.best_value);
    let best = pb.best.clone();
    let mut res = SolveResult::evaluate(scn, EveCase::Lower, best.alloc, best.slack, status)?;
    res.objective = res.sum_rate();
    res.trace = trace;
    res.bound_trace = bound_trace;
    res.gap = Some(relative_gap(bound, res.objective));
    res.iterations = pb.iteration;
    Ok(res)
}

/// `(bound - value) / bound`, zero when both vanish.
pub fn relative_gap(bound: f64, value: f64) -> f64 {
    if bound <= 0.0 {
        0.0
    } else {
        ((bound - value) / bound).max(0.0)
    }
}

/// With slacks fixed, maximizes `sum_g log(1 + S_g alpha_{g,1})` over QoS,
/// power and the surrogate cones.
fn sum_power_update(scn: &Scenario, slack: &SlackVector, params: BernsteinParams, start: &PowerAllocation, _level: f64, tol: f64) -> Result<PowerAllocation> {
    let n = scn.n_alpha();
    let prog = power_update_program(scn, slack, params);
    let terms = (0..scn.n_clusters)
        .map(|g| {
            let mut p = vec![0.0; n];
            p[scn.alpha_index(g, 0)] = scn.su_gain[g];
            (p, 1.0)
        })
        .collect();
    let x0: Vec<f64> = start.alpha.iter().flatten().copied().collect();
    match maximize(&prog, &Objective::SumLog(terms), Some(&x0), tol)? {
        Some(sol) => Ok(scn.alloc_from(&sol.x)),
        None => Err(SolveError::Infeasible("power update has no feasible point".into())),
    }
}

/// Alternating optimization for the upper-case MSSR problem from a feasible
/// `alpha_init`.
pub fn mssr_upper(scn: &Scenario, params: BernsteinParams, alpha_init: PowerAllocation, opts: SolverOptions) -> Result<SolveResult> {
    alternate(scn, params, alpha_init, opts, sum_power_update, |r: &[f64]| r.iter().sum())
}
