//! Conventional OMA baseline.
//!
//! Each cluster splits its time equally among its `K` users. In the SU slot
//! only the `G` SUs are served, so the SU problem is the NOMA problem with
//! one user per cluster, and every rate carries a `1/K` pre-log. QU slots do
//! not interact with SU slots; their QoS is reported, not enforced.

use crate::error::Result;
use crate::mmsr::{init_power, mmsr_lower, mmsr_upper};
use crate::mssr::{mssr_lower, mssr_upper};
use crate::scenario::{EveCase, Scenario};
use crate::solution::{SolveResult, SolverOptions};
use crate::sop::BernsteinParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MaxMin,
    MaxSum,
}

/// SU-slot solution of the OMA baseline with rates scaled by `1/K`.
/// SOPs are those of the SU slot.
pub fn oma_baseline(scn: &Scenario, case: EveCase, objective: Objective, params: BernsteinParams, opts: SolverOptions) -> Result<SolveResult> {
    let su = scn.su_only();
    let mut res = match (case, objective) {
        (EveCase::Lower, Objective::MaxMin) => mmsr_lower(&su, params, opts)?,
        (EveCase::Lower, Objective::MaxSum) => mssr_lower(&su, params, opts)?,
        (EveCase::Upper, Objective::MaxMin) => mmsr_upper(&su, params, init_power(&su, params)?, opts)?,
        (EveCase::Upper, Objective::MaxSum) => mssr_upper(&su, params, init_power(&su, params)?, opts)?,
    };
    let share = 1.0 / scn.users_per_cluster as f64;
    res.objective *= share;
    for r in res.per_su_rate.iter_mut().chain(res.trace.iter_mut()).chain(res.bound_trace.iter_mut()) {
        *r *= share;
    }
    Ok(res)
}

/// Whether every QU meets its SINR target in its own slot when the `G` QUs
/// of that slot share the power equally over the ZF beams.
pub fn oma_qu_qos_met(scn: &Scenario) -> bool {
    let g_count = scn.n_clusters;
    let p = 1.0 / g_count as f64;
    (1..scn.users_per_cluster).all(|k| {
        (0..g_count).all(|g| {
            let gains = &scn.gain[g][k];
            let inter: f64 = (0..g_count).filter(|&i| i != g).map(|i| gains[i] * p).sum();
            gains[g] * p / (inter + 1.0) >= scn.qos[g][k]
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scheduling::schedule_realization;

    fn scenario(cfg: &ScenarioConfig, seed: u64) -> Scenario {
        let r = schedule_realization(cfg, seed).unwrap();
        Scenario::from_realization(&r, &cfg.qos_thresholds)
    }

    #[test]
    fn single_user_clusters_coincide_with_noma() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_users_per_cluster(1);
        let s = scenario(&cfg, 3);
        let p = BernsteinParams::from_eps0(0.2);
        let opts = SolverOptions::default();
        let oma = oma_baseline(&s, EveCase::Lower, Objective::MaxMin, p, opts).unwrap();
        let noma = mmsr_lower(&s, p, opts).unwrap();
        assert_eq!(oma.objective, noma.objective);
    }

    #[test]
    fn rates_are_scaled_su_only_rates() {
        let s = scenario(&ScenarioConfig::default(), 1);
        let p = BernsteinParams::from_eps0(0.2);
        let opts = SolverOptions::default();
        let oma = oma_baseline(&s, EveCase::Lower, Objective::MaxSum, p, opts).unwrap();
        let su = mssr_lower(&s.su_only(), p, opts).unwrap();
        assert!((oma.objective - su.objective / 3.0).abs() < 1e-12);
        let sum: f64 = oma.per_su_rate.iter().sum();
        assert!((sum - oma.objective).abs() < 1e-9);
    }

    #[test]
    fn qos_diagnostic_tracks_threshold() {
        let mut s = scenario(&ScenarioConfig::default(), 0);
        for row in s.qos.iter_mut() {
            for r in row.iter_mut().skip(1) {
                *r = 0.0;
            }
        }
        assert!(oma_qu_qos_met(&s));
        for row in s.qos.iter_mut() {
            for r in row.iter_mut().skip(1) {
                *r = 1e12;
            }
        }
        assert!(!oma_qu_qos_met(&s));
    }
}
