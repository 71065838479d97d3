//! QU admission by channel correlation and SIC ordering inside each cluster.

use crate::beamforming::{effective_gain, zf_beams, BeamMatrix};
use crate::channel::{CVector, ChannelSampler, ChannelSet};
use crate::config::ScenarioConfig;
use crate::error::{Result, SolveError};

/// Correlation statistic `Re(h_qu^H h_su) / (h_su^H h_su)`.
pub fn correlation_ratio(h_qu: &CVector, h_su: &CVector) -> Result<f64> {
    let e = h_su.norm_squared();
    if e == 0.0 {
        return Err(SolveError::ZeroVector);
    }
    Ok(h_qu.dotc(h_su).re / e)
}

pub fn check_correlation(h_qu: &CVector, h_su: &CVector, threshold: f64) -> Result<bool> {
    Ok(correlation_ratio(h_qu, h_su)? > threshold)
}

/// SIC order of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOrder {
    /// Original user indices by decoding position; `order[0] == 0` (the SU).
    pub order: Vec<usize>,
    /// Effective gains `|h_{g,k}^H w_g|^2` in decoding order.
    pub gains: Vec<f64>,
    pub su_not_strongest: bool,
}

/// Sorts the QUs of cluster `g` by descending effective gain (ties by index),
/// keeping the SU first and flagging it when it is not strictly strongest.
pub fn order_cluster(channels: &ChannelSet, beams: &BeamMatrix, g: usize) -> ClusterOrder {
    let w = &beams.w[g];
    let raw: Vec<f64> = channels.h[g].iter().map(|h| effective_gain(h, w)).collect();
    let mut qus: Vec<usize> = (1..raw.len()).collect();
    qus.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
    let su_not_strongest = qus.first().is_some_and(|&q| raw[q] >= raw[0]);
    let mut order = vec![0];
    order.extend(qus);
    let gains = order.iter().map(|&i| raw[i]).collect();
    ClusterOrder {
        order,
        gains,
        su_not_strongest,
    }
}

/// Per-cluster scheduling outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub order: Vec<ClusterOrder>,
    /// Correlation test result per original QU index (`accepted[g][0]` is the SU).
    pub accepted: Vec<Vec<bool>>,
    /// QU redraws used per cluster.
    pub resamples: Vec<usize>,
}

impl ClusterAssignment {
    pub fn total_resamples(&self) -> usize {
        self.resamples.iter().sum()
    }
}

/// A scheduled realization: channels reordered into SIC order plus ZF beams.
#[derive(Debug, Clone)]
pub struct Realization {
    pub channels: ChannelSet,
    pub beams: BeamMatrix,
    pub assignment: ClusterAssignment,
    pub seed: u64,
}

fn cluster_ok(channels: &ChannelSet, beams: &BeamMatrix, g: usize, threshold: f64) -> Result<(bool, Vec<bool>, ClusterOrder)> {
    let su = &channels.small_scale[g][0];
    let mut accepted = vec![true];
    for qu in &channels.small_scale[g][1..] {
        accepted.push(check_correlation(qu, su, threshold)?);
    }
    let order = order_cluster(channels, beams, g);
    let ok = accepted.iter().all(|&a| a) && !order.su_not_strongest;
    Ok((ok, accepted, order))
}

/// Draws a realization and redraws the QUs of any cluster that fails the
/// correlation test or SU superiority, up to `cfg.retry_cap` times.
///
/// The correlation test runs on small-scale fading, where the generative
/// correlation lives; composite channels also carry the path-loss ratio.
pub fn schedule_realization(cfg: &ScenarioConfig, seed: u64) -> Result<Realization> {
    let mut sampler = ChannelSampler::new(cfg, seed);
    // SU channels never change across QU redraws, so neither do the beams.
    let beams = zf_beams(sampler.channels())?;
    let threshold = cfg.corr_threshold();
    let g_count = cfg.n_clusters;
    let mut orders = Vec::with_capacity(g_count);
    let mut accepted = Vec::with_capacity(g_count);
    let mut resamples = vec![0; g_count];
    for g in 0..g_count {
        loop {
            let (ok, acc, order) = cluster_ok(sampler.channels(), &beams, g, threshold)?;
            if ok {
                orders.push(order);
                accepted.push(acc);
                break;
            }
            if resamples[g] >= cfg.retry_cap {
                return Err(SolveError::Unschedulable {
                    cluster: g,
                    attempts: resamples[g] + 1,
                });
            }
            resamples[g] += 1;
            sampler.resample_cluster(g);
        }
    }
    let mut channels = sampler.into_channels();
    for (g, ord) in orders.iter().enumerate() {
        channels.h[g] = ord.order.iter().map(|&i| channels.h[g][i].clone()).collect();
        channels.small_scale[g] = ord.order.iter().map(|&i| channels.small_scale[g][i].clone()).collect();
        channels.distances[g] = ord.order.iter().map(|&i| channels.distances[g][i]).collect();
    }
    Ok(Realization {
        channels,
        beams,
        assignment: ClusterAssignment {
            order: orders,
            accepted,
            resamples,
        },
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identical_vectors_pass() {
        let h = DVector::from_vec(vec![c(1.0), Complex64::new(0.5, -2.0)]);
        assert!(check_correlation(&h, &h, 0.9).unwrap());
    }

    #[test]
    fn orthogonal_vectors_fail() {
        let a = DVector::from_vec(vec![c(1.0), c(0.0)]);
        let b = DVector::from_vec(vec![c(0.0), c(1.0)]);
        assert!(!check_correlation(&a, &b, 0.5).unwrap());
    }

    #[test]
    fn zero_su_is_an_error() {
        let a = DVector::from_vec(vec![c(1.0), c(0.0)]);
        let z = DVector::from_vec(vec![c(0.0), c(0.0)]);
        assert_eq!(check_correlation(&a, &z, 0.5), Err(SolveError::ZeroVector));
    }

    fn scalar_cluster(gains: &[f64]) -> (ChannelSet, BeamMatrix) {
        let row = gains.iter().map(|g| DVector::from_vec(vec![c(g.sqrt())])).collect::<Vec<_>>();
        let ch = ChannelSet {
            h: vec![row.clone()],
            small_scale: vec![row],
            distances: vec![vec![1.0; gains.len()]],
            gamma_e: 1.0,
            rho: 1.0,
        };
        let beams = BeamMatrix {
            w: vec![DVector::from_vec(vec![c(1.0)])],
            leakage: DMatrix::zeros(1, 1),
            condition: 1.0,
        };
        (ch, beams)
    }

    #[test]
    fn sorts_qus_and_keeps_su_first() {
        let (ch, beams) = scalar_cluster(&[5.0, 3.0, 4.0]);
        let o = order_cluster(&ch, &beams, 0);
        assert_eq!(o.order, vec![0, 2, 1]);
        assert!(!o.su_not_strongest);
        assert!((o.gains[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_cluster_is_trivial() {
        let (ch, beams) = scalar_cluster(&[2.0]);
        let o = order_cluster(&ch, &beams, 0);
        assert_eq!(o.order, vec![0]);
        assert!(!o.su_not_strongest);
    }

    #[test]
    fn weak_su_is_flagged() {
        let (ch, beams) = scalar_cluster(&[1.0, 3.0]);
        assert!(order_cluster(&ch, &beams, 0).su_not_strongest);
        let (ch, beams) = scalar_cluster(&[3.0, 3.0]);
        assert!(order_cluster(&ch, &beams, 0).su_not_strongest);
    }

    #[test]
    fn scheduled_realization_is_ordered() {
        let cfg = ScenarioConfig::default();
        for seed in 0..10 {
            let r = schedule_realization(&cfg, seed).unwrap();
            for g in 0..cfg.n_clusters {
                let gains: Vec<f64> = r.channels.h[g].iter().map(|h| effective_gain(h, &r.beams.w[g])).collect();
                for k in 1..gains.len() {
                    assert!(gains[k - 1] > gains[k]);
                }
                for qu in &r.channels.small_scale[g][1..] {
                    assert!(correlation_ratio(qu, &r.channels.small_scale[g][0]).unwrap() > cfg.correlation);
                }
            }
        }
    }

    #[test]
    fn retry_cap_exhaustion_is_reported() {
        let cfg = ScenarioConfig {
            corr_threshold: Some(10.0),
            retry_cap: 3,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            schedule_realization(&cfg, 0),
            Err(SolveError::Unschedulable { cluster: 0, attempts: 4 })
        ));
    }
}
