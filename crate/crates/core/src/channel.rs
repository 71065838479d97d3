//! Seeded channel realizations for the clustered downlink.
//!
//! Small-scale fading of the SU in each cluster is i.i.d. CN(0, 1); the QUs of
//! the cluster are correlated with it through
//! `g_k = sqrt(phi) g_1 + sqrt(1 - phi) e_k`. Each vector is then scaled by
//! `d^{-a/2}`.
//!
//! Random draws are split into independent ChaCha streams: stream 0 feeds the
//! SU vectors and SU distances, stream `1 + g` feeds the QUs of cluster `g`.
//! Redrawing the QUs of one cluster therefore never shifts any other draw.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;

pub type CVector = DVector<Complex64>;

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Composite channel `h[g][k]`; `k = 0` is the SU.
    pub h: Vec<Vec<CVector>>,
    /// Small-scale fading `g[g][k]` before path loss.
    pub small_scale: Vec<Vec<CVector>>,
    pub distances: Vec<Vec<f64>>,
    /// Eve covariance scale `d_e^{-a}`.
    pub gamma_e: f64,
    /// Transmit SNR `P / sigma^2`.
    pub rho: f64,
}

impl ChannelSet {
    pub fn n_antennas(&self) -> usize {
        self.h[0][0].len()
    }

    pub fn n_clusters(&self) -> usize {
        self.h.len()
    }

    pub fn users_per_cluster(&self) -> usize {
        self.h[0].len()
    }

    pub fn su(&self, g: usize) -> &CVector {
        &self.h[g][0]
    }
}

/// Draws a vector with i.i.d. standard circular complex Gaussian entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stateful generator for one realization; supports per-cluster QU redraws.
pub struct ChannelSampler {
    cfg: ScenarioConfig,
    cluster_rngs: Vec<ChaCha8Rng>,
    frozen: Option<Vec<Vec<f64>>>,
    channels: ChannelSet,
}

impl ChannelSampler {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Self {
        let (n, g_count, k_count) = (cfg.n_antennas, cfg.n_clusters, cfg.users_per_cluster);
        let frozen = cfg.freeze_distances.then(|| {
            let mut rng = stream_rng(cfg.rng_seed, u64::MAX);
            (0..g_count)
                .map(|_| {
                    cfg.distance_ranges
                        .iter()
                        .map(|&(lo, hi)| rng.random_range(lo..hi))
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>()
        });

        let mut su_rng = stream_rng(seed, 0);
        let mut small_scale = Vec::with_capacity(g_count);
        let mut distances = Vec::with_capacity(g_count);
        for g in 0..g_count {
            let su = complex_gaussian(&mut su_rng, n);
            let (lo, hi) = cfg.distance_ranges[0];
            let d_su = match &frozen {
                Some(d) => d[g][0],
                None => su_rng.random_range(lo..hi),
            };
            let mut row = Vec::with_capacity(k_count);
            row.push(su);
            small_scale.push(row);
            let mut drow = Vec::with_capacity(k_count);
            drow.push(d_su);
            distances.push(drow);
        }
        let channels = ChannelSet {
            h: Vec::new(),
            small_scale,
            distances,
            gamma_e: cfg.gamma_e(),
            rho: cfg.rho(),
        };
        let cluster_rngs = (0..g_count).map(|g| stream_rng(seed, 1 + g as u64)).collect();
        let mut sampler = Self {
            cfg: cfg.clone(),
            cluster_rngs,
            frozen,
            channels,
        };
        for g in 0..g_count {
            sampler.draw_cluster_qus(g);
        }
        sampler.rebuild_composite();
        sampler
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn into_channels(self) -> ChannelSet {
        self.channels
    }

    /// Redraws the correlated QU vectors (and their distances) of cluster `g`.
    pub fn resample_cluster(&mut self, g: usize) {
        self.draw_cluster_qus(g);
        let a = self.cfg.pathloss_exp;
        self.channels.h[g] = composite_row(&self.channels.small_scale[g], &self.channels.distances[g], a);
    }

    fn draw_cluster_qus(&mut self, g: usize) {
        let n = self.cfg.n_antennas;
        let phi = self.cfg.correlation;
        let (a, b) = (phi.sqrt(), (1.0 - phi).sqrt());
        let rng = &mut self.cluster_rngs[g];
        let su = self.channels.small_scale[g][0].clone();
        let mut row = vec![su.clone()];
        let mut drow = vec![self.channels.distances[g][0]];
        for k in 1..self.cfg.users_per_cluster {
            let e = complex_gaussian(rng, n);
            row.push(su.map(|x| x * a) + e.map(|x| x * b));
            let (lo, hi) = self.cfg.distance_ranges[k];
            let d = match &self.frozen {
                Some(d) => d[g][k],
                None => rng.random_range(lo..hi),
            };
            drow.push(d);
        }
        self.channels.small_scale[g] = row;
        self.channels.distances[g] = drow;
    }

    fn rebuild_composite(&mut self) {
        let a = self.cfg.pathloss_exp;
        self.channels.h = self
            .channels
            .small_scale
            .iter()
            .zip(&self.channels.distances)
            .map(|(row, drow)| composite_row(row, drow, a))
            .collect();
    }
}

fn composite_row(small: &[CVector], distances: &[f64], a: f64) -> Vec<CVector> {
    small
        .iter()
        .zip(distances)
        .map(|(v, &d)| v * Complex64::from(d.powf(-a / 2.0)))
        .collect()
}

/// Draws one realization without any scheduling checks.
pub fn gen_channels(cfg: &ScenarioConfig, seed: u64) -> ChannelSet {
    ChannelSampler::new(cfg, seed).into_channels()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_with(phi: f64) -> ScenarioConfig {
        ScenarioConfig {
            correlation: phi,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn full_correlation_copies_su_fading() {
        let ch = gen_channels(&cfg_with(1.0), 7);
        for row in &ch.small_scale {
            for v in &row[1..] {
                assert!((v - &row[0]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = ScenarioConfig::default();
        assert_eq!(gen_channels(&cfg, 3), gen_channels(&cfg, 3));
        assert_ne!(gen_channels(&cfg, 3), gen_channels(&cfg, 4));
    }

    #[test]
    fn distances_fall_in_ranges() {
        let cfg = ScenarioConfig::default();
        for seed in 0..20 {
            let ch = gen_channels(&cfg, seed);
            for drow in &ch.distances {
                for (d, &(lo, hi)) in drow.iter().zip(&cfg.distance_ranges) {
                    assert!(*d >= lo && *d < hi);
                }
            }
        }
    }

    #[test]
    fn path_loss_scaling_is_exact() {
        let ch = gen_channels(&cfg_with(1.0), 11);
        let (d1, d2) = (ch.distances[0][0], ch.distances[0][1]);
        let ratio = ch.h[0][1].norm() / ch.h[0][0].norm();
        let expected = (d2 / d1).powf(-2.0);
        assert!((ratio / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resampling_touches_only_that_cluster() {
        let cfg = ScenarioConfig::default();
        let mut s = ChannelSampler::new(&cfg, 5);
        let before = s.channels().clone();
        s.resample_cluster(2);
        let after = s.channels();
        for g in 0..cfg.n_clusters {
            assert_eq!(before.h[g][0], after.h[g][0]);
            if g != 2 {
                assert_eq!(before.h[g], after.h[g]);
            }
        }
        assert_ne!(before.h[2][1], after.h[2][1]);
    }

    #[test]
    fn frozen_distances_ignore_seed() {
        let cfg = ScenarioConfig {
            freeze_distances: true,
            ..ScenarioConfig::default()
        };
        assert_eq!(gen_channels(&cfg, 1).distances, gen_channels(&cfg, 2).distances);
    }

    #[test]
    fn eve_scale_matches_reference() {
        let ch = gen_channels(&ScenarioConfig::default(), 0);
        assert_eq!(ch.gamma_e, 200f64.powf(-4.0));
    }
}
