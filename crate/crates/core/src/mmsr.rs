//! Max-min secrecy rate.
//!
//! The lower case is a generalized linear-fractional program solved to global
//! optimality by Dinkelbach iterations over LPs. The upper case alternates
//! between per-cluster slack minimization and a power update with the slacks
//! fixed.

use crate::convex::{min_feasible_from_zero, solve_lp, solve_soc_feasibility, ConeProgram, LinearProgram, LpStatus, Sense};
use crate::error::{Result, SolveError};
use crate::rates::{PowerAllocation, SlackVector};
use crate::scenario::{EveCase, Scenario};
use crate::solution::{SolveResult, SolveStatus, SolverOptions};
use crate::sop::BernsteinParams;

/// Result of a weighted Dinkelbach run: the best ratio `lambda` with the
/// point that attains it.
#[derive(Debug, Clone)]
pub struct Dinkelbach {
    pub lambda: f64,
    pub alloc: PowerAllocation,
    pub slack: SlackVector,
    /// `lambda` after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// `min_g (1 + S_g alpha_{g,1}) / (u_g (1 + z_g))` over clusters with `u_g > 0`.
pub fn weighted_ratio(scn: &Scenario, weights: &[f64], alloc: &PowerAllocation, slack: &SlackVector) -> f64 {
    (0..scn.n_clusters)
        .filter(|&g| weights[g] > 0.0)
        .map(|g| (1.0 + scn.sinr_su(g, alloc)) / (weights[g] * (1.0 + slack.z[g])))
        .fold(f64::INFINITY, f64::min)
}

/// Dinkelbach iterations for `max min_g (1 + S_g alpha_{g,1}) / (u_g (1 + z_g))`
/// over the lower-case feasible polytope, starting from `lambda0` (which must
/// not exceed the optimum). Each step solves
/// `max tau` s.t. `1 + S_g alpha_{g,1} - lambda u_g (1 + z_g) >= tau`, QoS,
/// total power and the linear SOP rows, and stops once `tau <= tol`.
///
/// A zero weight drops cluster `g` from the objective and pins its SU power
/// and slack to zero.
pub fn dinkelbach(scn: &Scenario, params: BernsteinParams, weights: &[f64], lambda0: f64, tol: f64, max_iters: usize) -> Result<Dinkelbach> {
    let g_count = scn.n_clusters;
    let n_alpha = scn.n_alpha();
    let n = n_alpha + g_count + 1;
    let tau = n - 1;

    let mut base = LinearProgram::new(vec![0.0; n], Sense::Maximize);
    base.objective[tau] = 1.0;
    for j in 0..n_alpha {
        base.set_bounds(j, 0.0, 1.0);
    }
    base.set_bounds(tau, f64::NEG_INFINITY, f64::INFINITY);
    for (row, rhs) in scn.qos_rows(n) {
        base.add_row(row, rhs);
    }
    let (row, rhs) = scn.power_row(n);
    base.add_row(row, rhs);
    for (row, rhs) in scn.lower_sop_rows(n, params) {
        base.add_row(row, rhs);
    }
    let live: Vec<usize> = (0..g_count).filter(|&g| weights[g] > 0.0).collect();
    if live.is_empty() {
        return Err(SolveError::Numerical("no cluster has a positive weight".into()));
    }
    for g in (0..g_count).filter(|g| !live.contains(g)) {
        base.set_bounds(scn.alpha_index(g, 0), 0.0, 0.0);
        base.set_bounds(scn.z_index(g), 0.0, 0.0);
    }
    let first_ratio_row = base.rows.len();
    for &g in &live {
        let mut row = vec![0.0; n];
        row[tau] = 1.0;
        row[scn.alpha_index(g, 0)] = -scn.su_gain[g];
        base.add_row(row, 1.0);
    }

    let mut lambda = lambda0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let mut lp = base.clone();
        for (r, &g) in live.iter().enumerate() {
            let w = lambda * weights[g];
            lp.rows[first_ratio_row + r][scn.z_index(g)] = w;
            lp.rhs[first_ratio_row + r] = 1.0 - w;
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(SolveError::Infeasible("QoS and power constraints admit no allocation".into())),
            LpStatus::Unbounded => return Err(SolveError::Numerical("Dinkelbach LP is unbounded".into())),
        }
        let alloc = scn.alloc_from(&sol.x);
        let slack = scn.slack_from(&sol.x);
        let ratio = weighted_ratio(scn, weights, &alloc, &slack);
        if best.as_ref().is_none_or(|(l, _)| ratio > *l) {
            best = Some((ratio, sol.x.clone()));
        }
        let current = best.as_ref().map(|b| b.0).unwrap_or(ratio);
        trace.push(current);
        if sol.x[tau] <= tol {
            converged = true;
            break;
        }
        if current <= lambda {
            // No progress possible beyond the LP's accuracy.
            converged = true;
            break;
        }
        lambda = current;
    }
    let (lambda, x) = best.ok_or_else(|| SolveError::Numerical("no Dinkelbach iterations were run".into()))?;
    Ok(Dinkelbach {
        lambda,
        alloc: scn.alloc_from(&x),
        slack: scn.slack_from(&x),
        trace,
        converged,
    })
}

/// Dinkelbach solution of the lower-case MMSR problem; `MSR = log2(lambda)`.
pub fn mmsr_lower(scn: &Scenario, params: BernsteinParams, opts: SolverOptions) -> Result<SolveResult> {
    let ones = vec![1.0; scn.n_clusters];
    let d = dinkelbach(scn, params, &ones, 0.0, opts.tolerance, opts.max_iters)?;
    let status = if d.converged { SolveStatus::Optimal } else { SolveStatus::IterationCap };
    let mut res = SolveResult::evaluate(scn, EveCase::Lower, d.alloc, d.slack, status)?;
    res.trace = d.trace.iter().map(|l| l.log2()).collect();
    res.iterations = d.trace.len();
    Ok(res)
}

/// Power allocation maximizing `min_g (1 + S_g alpha_{g,1})` under QoS and
/// total power only, then scaled so that every cluster admits a slack
/// satisfying the upper-case surrogate SOP constraint.
///
/// The SU powers are scaled by a common factor found by bisection; a factor
/// of zero is always admissible and only lowers interference at the QUs.
pub fn init_power(scn: &Scenario, params: BernsteinParams) -> Result<PowerAllocation> {
    let n_alpha = scn.n_alpha();
    let n = n_alpha + 1;
    let tau = n_alpha;
    let mut lp = LinearProgram::new(vec![0.0; n], Sense::Maximize);
    lp.objective[tau] = 1.0;
    lp.set_bounds(tau, f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..n_alpha {
        lp.set_bounds(j, 0.0, 1.0);
    }
    for (row, rhs) in scn.qos_rows(n) {
        lp.add_row(row, rhs);
    }
    let (row, rhs) = scn.power_row(n);
    lp.add_row(row, rhs);
    for g in 0..scn.n_clusters {
        let mut row = vec![0.0; n];
        row[tau] = 1.0;
        row[scn.alpha_index(g, 0)] = -scn.su_gain[g];
        lp.add_row(row, 1.0);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SolveError::Infeasible("QoS and power constraints admit no allocation".into()));
    }
    let alloc = scn.alloc_from(&sol.x);
    if upper_slacks(scn, &alloc, params).is_ok() {
        return Ok(alloc);
    }
    let scaled = |t: f64| {
        let mut a = alloc.clone();
        for row in a.alpha.iter_mut() {
            row[0] *= t;
        }
        a
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if upper_slacks(scn, &scaled(mid), params).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(scaled(lo))
}

/// Smallest slack per cluster satisfying the upper-case surrogate at `alloc`.
pub fn upper_slacks(scn: &Scenario, alloc: &PowerAllocation, params: BernsteinParams) -> Result<SlackVector> {
    let z = (0..scn.n_clusters)
        .map(|g| {
            let scale = scn.eve_scale() * alloc.alpha[g][0].max(1e-12);
            min_feasible_from_zero(|z| scn.upper_surrogate(g, alloc, z, params), scale, 1e-12)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SlackVector { z })
}

/// Common constraint set for the power update with slacks fixed:
/// QoS, total power, `alpha >= 0` and one surrogate cone per cluster.
pub(crate) fn power_update_program(scn: &Scenario, slack: &SlackVector, params: BernsteinParams) -> ConeProgram {
    let n = scn.n_alpha();
    let mut prog = ConeProgram::new(n);
    for (row, rhs) in scn.qos_rows(n) {
        prog.add_row(row, rhs);
    }
    let (row, rhs) = scn.power_row(n);
    prog.add_row(row, rhs);
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = -1.0;
        prog.add_row(row, 0.0);
    }
    for g in 0..scn.n_clusters {
        prog.add_cone(scn.upper_sop_cone(g, slack.z[g], params, n));
    }
    prog
}

/// With slacks fixed, the largest `tau` such that
/// `1 + S_g alpha_{g,1} >= 2^tau (1 + z_g)` for all `g` is feasible, found by
/// bisection over cone feasibility problems. `start` must be feasible and
/// attains `tau_lo`.
fn max_min_power_update(scn: &Scenario, slack: &SlackVector, params: BernsteinParams, start: &PowerAllocation, tau_lo: f64, tol: f64) -> Result<PowerAllocation> {
    let n = scn.n_alpha();
    let base = power_update_program(scn, slack, params);
    let tau_hi = (0..scn.n_clusters)
        .map(|g| ((1.0 + scn.su_gain[g]) / (1.0 + slack.z[g])).log2())
        .fold(f64::INFINITY, f64::min);
    let mut best: Vec<f64> = start.alpha.iter().flatten().copied().collect();
    let (mut lo, mut hi) = (tau_lo, tau_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let mut prog = base.clone();
        let target = mid.exp2();
        for g in 0..scn.n_clusters {
            let mut row = vec![0.0; n];
            row[scn.alpha_index(g, 0)] = -scn.su_gain[g];
            prog.add_row(row, 1.0 - target * (1.0 + slack.z[g]));
        }
        match solve_soc_feasibility(&prog, Some(&best))? {
            Some(x) => {
                best = x;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Ok(scn.alloc_from(&best))
}

/// One AO sweep: power update with slacks fixed, then minimal slacks.
/// Returns `None` when the update cannot be turned into a valid point.
fn ao_step(
    scn: &Scenario,
    params: BernsteinParams,
    alloc: &PowerAllocation,
    slack: &SlackVector,
    objective: f64,
    tol: f64,
    update: impl Fn(&Scenario, &SlackVector, BernsteinParams, &PowerAllocation, f64, f64) -> Result<PowerAllocation>,
    score: impl Fn(&[f64]) -> f64,
) -> Result<Option<(PowerAllocation, SlackVector, f64)>> {
    // A failed update ends the alternation at the current point.
    let Ok(next) = update(scn, slack, params, alloc, objective, tol) else {
        return Ok(None);
    };
    if !scn.qos_satisfied(&next, 1e-6) {
        return Ok(None);
    }
    let Ok(z) = upper_slacks(scn, &next, params) else {
        return Ok(None);
    };
    let value = score(&scn.secrecy_rates(&next, &z));
    Ok(Some((next, z, value)))
}

/// Alternating optimization shared by the MMSR and MSSR upper cases.
pub(crate) fn alternate(
    scn: &Scenario,
    params: BernsteinParams,
    alpha_init: PowerAllocation,
    opts: SolverOptions,
    update: impl Fn(&Scenario, &SlackVector, BernsteinParams, &PowerAllocation, f64, f64) -> Result<PowerAllocation> + Copy,
    score: impl Fn(&[f64]) -> f64 + Copy,
) -> Result<SolveResult> {
    if !scn.qos_satisfied(&alpha_init, 1e-6) || !alpha_init.is_valid() {
        return Err(SolveError::Infeasible("initial allocation violates QoS or power".into()));
    }
    let mut alloc = alpha_init;
    let mut slack = upper_slacks(scn, &alloc, params)?;
    let mut value = score(&scn.secrecy_rates(&alloc, &slack));
    let mut trace = vec![value];
    let inner_tol = opts.tolerance / 10.0;
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        iterations += 1;
        let Some((a, z, v)) = ao_step(scn, params, &alloc, &slack, value, inner_tol, update, score)? else {
            break;
        };
        if v <= value {
            break;
        }
        let gain = v - value;
        alloc = a;
        slack = z;
        value = v;
        trace.push(value);
        if gain < opts.tolerance {
            break;
        }
    }
    let mut res = SolveResult::evaluate(scn, EveCase::Upper, alloc, slack, SolveStatus::Stationary)?;
    res.objective = score(&res.per_su_rate);
    res.trace = trace;
    res.iterations = iterations;
    Ok(res)
}

fn min_of(rates: &[f64]) -> f64 {
    rates.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Alternating optimization for the upper-case MMSR problem from a feasible
/// `alpha_init` (see [`init_power`]).
pub fn mmsr_upper(scn: &Scenario, params: BernsteinParams, alpha_init: PowerAllocation, opts: SolverOptions) -> Result<SolveResult> {
    alternate(scn, params, alpha_init, opts, max_min_power_update, min_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scheduling::schedule_realization;

    /// Strongly correlated QUs with a mild QoS target, so that most
    /// realizations are feasible.
    pub(crate) fn feasible_config() -> ScenarioConfig {
        ScenarioConfig {
            correlation: 0.99,
            corr_threshold: Some(0.9),
            qos_thresholds: vec![0.5, 0.5],
            ..ScenarioConfig::default()
        }
    }

    fn scenario(seed: u64) -> Scenario {
        let cfg = feasible_config();
        let r = schedule_realization(&cfg, seed).unwrap();
        Scenario::from_realization(&r, &cfg.qos_thresholds)
    }

    fn single_su(gain: f64) -> Scenario {
        let mut cfg = ScenarioConfig {
            n_antennas: 1,
            n_clusters: 1,
            ..ScenarioConfig::default()
        };
        cfg.set_users_per_cluster(1);
        let r = schedule_realization(&cfg, 1).unwrap();
        let mut s = Scenario::from_realization(&r, &cfg.qos_thresholds);
        s.su_gain = vec![gain];
        s.gain = vec![vec![vec![gain]]];
        s
    }

    #[test]
    fn single_user_matches_closed_form() {
        let s = single_su(2.0e6);
        let p = BernsteinParams::from_eps0(0.01);
        let c = s.eve_scale() * p.rank_one_factor();
        let res = mmsr_lower(&s, p, SolverOptions::default()).unwrap();
        let expected = ((1.0 + 2.0e6) / (1.0 + c)).log2();
        assert!((res.objective - expected).abs() < 1e-6, "{} vs {expected}", res.objective);
        assert_eq!(res.status, SolveStatus::Optimal);
    }

    #[test]
    fn lambda_trace_is_nondecreasing() {
        let s = scenario(2);
        let res = mmsr_lower(&s, BernsteinParams::from_eps0(0.01), SolverOptions::default()).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(res.iterations <= 50);
        assert!(s.qos_satisfied(&res.alloc, 1e-7));
    }

    #[test]
    fn impossible_qos_is_infeasible() {
        let cfg = ScenarioConfig {
            qos_thresholds: vec![1e9, 1e9],
            ..ScenarioConfig::default()
        };
        let r = schedule_realization(&cfg, 0).unwrap();
        let s = Scenario::from_realization(&r, &cfg.qos_thresholds);
        let p = BernsteinParams::from_eps0(0.01);
        assert!(matches!(mmsr_lower(&s, p, SolverOptions::default()), Err(SolveError::Infeasible(_))));
        assert!(matches!(init_power(&s, p), Err(SolveError::Infeasible(_))));
    }

    #[test]
    fn init_power_single_user_takes_full_power() {
        let s = single_su(1e6);
        let a = init_power(&s, BernsteinParams::from_eps0(0.5)).unwrap();
        assert!((a.alpha[0][0] - 1.0).abs() < 1e-9, "{:?}", a);
    }

    #[test]
    fn init_power_is_upper_feasible() {
        let s = scenario(4);
        let p = BernsteinParams::from_eps0(0.01);
        let a = init_power(&s, p).unwrap();
        assert!(s.qos_satisfied(&a, 1e-7));
        let z = upper_slacks(&s, &a, p).unwrap();
        for g in 0..s.n_clusters {
            assert!(z.z[g] >= s.upper_surrogate(g, &a, z.z[g], p) - 1e-9);
        }
    }

    #[test]
    fn upper_ao_improves_monotonically() {
        let s = scenario(6);
        let p = BernsteinParams::from_eps0(0.3);
        let a = init_power(&s, p).unwrap();
        let res = mmsr_upper(&s, p, a, SolverOptions::default()).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(res.status, SolveStatus::Stationary);
        assert!(s.qos_satisfied(&res.alloc, 1e-6));
    }

    #[test]
    fn power_update_recovers_current_level() {
        let s = scenario(0);
        let p = BernsteinParams::from_eps0(1.0);
        let a = init_power(&s, p).unwrap();
        let z = upper_slacks(&s, &a, p).unwrap();
        let level = min_of(&s.secrecy_rates(&a, &z));
        // Start from a strictly worse point; the bisection must climb back.
        let weak = PowerAllocation {
            alpha: a.alpha.iter().map(|r| r.iter().map(|v| v * 0.5).collect()).collect(),
        };
        let got = max_min_power_update(&s, &z, p, &weak, level - 3.0, 1e-3).unwrap();
        let reached = min_of(&s.secrecy_rates(&got, &z));
        assert!(reached >= level - 2e-3, "{reached} vs {level}");
    }
}
