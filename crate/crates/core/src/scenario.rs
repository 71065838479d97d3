//! Precomputed per-realization problem data shared by all solvers.
//!
//! Optimization variables are laid out as `alpha[g][k]` at `g * K + k`,
//! followed by `z[g]` at `G * K + g` and, where needed, one auxiliary
//! variable after that.

use nalgebra::DMatrix;

use crate::beamforming::{effective_gain, BeamMatrix};
use crate::channel::ChannelSet;
use crate::convex::SocConstraint;
use crate::error::Result;
use crate::rates::{eve_form_lower, eve_form_upper, HermitianForm, PowerAllocation, SlackVector};
use crate::scheduling::Realization;
use crate::sop::{exact_sop, BernsteinParams};

/// Eavesdropper capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EveCase {
    /// Perfect multiuser detection: Eve sees the SU stream interference-free.
    Lower,
    /// No multiuser detection: all other streams interfere at Eve.
    Upper,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub n_clusters: usize,
    pub users_per_cluster: usize,
    pub rho: f64,
    pub gamma_e: f64,
    /// `S_g = rho |h_{g,1}^H w_g|^2`.
    pub su_gain: Vec<f64>,
    /// `gain[g][k][i] = rho |h_{g,k}^H w_i|^2`.
    pub gain: Vec<Vec<Vec<f64>>>,
    /// `qos[g][k]` for `k >= 1`; `qos[g][0]` is unused and zero.
    pub qos: Vec<Vec<f64>>,
    pub beams: BeamMatrix,
    /// `overlap[(i, j)] = |w_i^H w_j|^2`.
    pub overlap: DMatrix<f64>,
    /// `L` with `overlap = L L^T`.
    pub overlap_sqrt: DMatrix<f64>,
}

impl Scenario {
    pub fn new(channels: &ChannelSet, beams: &BeamMatrix, qos_thresholds: &[f64]) -> Self {
        let g_count = channels.n_clusters();
        let k_count = channels.users_per_cluster();
        let rho = channels.rho;
        let gain: Vec<Vec<Vec<f64>>> = (0..g_count)
            .map(|g| {
                (0..k_count)
                    .map(|k| beams.w.iter().map(|w| rho * effective_gain(&channels.h[g][k], w)).collect())
                    .collect()
            })
            .collect();
        let su_gain = (0..g_count).map(|g| gain[g][0][g]).collect();
        let qos = (0..g_count)
            .map(|_| {
                let mut row = vec![0.0];
                row.extend_from_slice(&qos_thresholds[..k_count - 1]);
                row
            })
            .collect();
        let overlap = DMatrix::from_fn(g_count, g_count, |i, j| beams.w[i].dotc(&beams.w[j]).norm_sqr());
        let overlap_sqrt = psd_sqrt(&overlap);
        Self {
            n_clusters: g_count,
            users_per_cluster: k_count,
            rho,
            gamma_e: channels.gamma_e,
            su_gain,
            gain,
            qos,
            beams: beams.clone(),
            overlap,
            overlap_sqrt,
        }
    }

    pub fn from_realization(r: &Realization, qos_thresholds: &[f64]) -> Self {
        Self::new(&r.channels, &r.beams, qos_thresholds)
    }

    /// The same clusters with only their SUs (one user per cluster).
    pub fn su_only(&self) -> Self {
        Self {
            users_per_cluster: 1,
            gain: self.gain.iter().map(|row| vec![row[0].clone()]).collect(),
            qos: vec![vec![0.0]; self.n_clusters],
            ..self.clone()
        }
    }

    pub fn n_alpha(&self) -> usize {
        self.n_clusters * self.users_per_cluster
    }

    pub fn alpha_index(&self, g: usize, k: usize) -> usize {
        g * self.users_per_cluster + k
    }

    pub fn z_index(&self, g: usize) -> usize {
        self.n_alpha() + g
    }

    /// `Gamma_e rho`: scale of Eve's received SU power per unit `alpha`.
    pub fn eve_scale(&self) -> f64 {
        self.gamma_e * self.rho
    }

    pub fn alloc_from(&self, x: &[f64]) -> PowerAllocation {
        let k = self.users_per_cluster;
        PowerAllocation {
            alpha: (0..self.n_clusters).map(|g| x[g * k..(g + 1) * k].iter().map(|v| v.max(0.0)).collect()).collect(),
        }
    }

    pub fn slack_from(&self, x: &[f64]) -> SlackVector {
        let base = self.n_alpha();
        SlackVector {
            z: (0..self.n_clusters).map(|g| x[base + g].max(0.0)).collect(),
        }
    }

    /// QoS rows `r (I1 + I2) - S <= -r` over the first `n_alpha` of `n_vars` variables.
    pub fn qos_rows(&self, n_vars: usize) -> Vec<(Vec<f64>, f64)> {
        let (gc, kc) = (self.n_clusters, self.users_per_cluster);
        let mut rows = Vec::new();
        for g in 0..gc {
            for k in 1..kc {
                let r = self.qos[g][k];
                let gains = &self.gain[g][k];
                let own = gains[g];
                let mut row = vec![0.0; n_vars];
                row[self.alpha_index(g, k)] -= own;
                for j in 0..k {
                    row[self.alpha_index(g, j)] += r * own;
                }
                for i in 0..gc {
                    if i != g {
                        for j in 0..kc {
                            row[self.alpha_index(i, j)] += r * gains[i];
                        }
                    }
                }
                rows.push((row, -r));
            }
        }
        rows
    }

    /// `sum alpha <= 1`.
    pub fn power_row(&self, n_vars: usize) -> (Vec<f64>, f64) {
        let mut row = vec![0.0; n_vars];
        for v in row.iter_mut().take(self.n_alpha()) {
            *v = 1.0;
        }
        (row, 1.0)
    }

    /// Lower-case SOP rows `c alpha_{g,1} - z_g <= 0` with
    /// `c = Gamma_e rho (1 + sqrt(2 sigma) + sigma)`.
    pub fn lower_sop_rows(&self, n_vars: usize, params: BernsteinParams) -> Vec<(Vec<f64>, f64)> {
        let c = self.eve_scale() * params.rank_one_factor();
        (0..self.n_clusters)
            .map(|g| {
                let mut row = vec![0.0; n_vars];
                row[self.alpha_index(g, 0)] = c;
                row[self.z_index(g)] = -1.0;
                (row, 0.0)
            })
            .collect()
    }

    pub fn sinr_su(&self, g: usize, alloc: &PowerAllocation) -> f64 {
        self.su_gain[g] * alloc.alpha[g][0]
    }

    /// SINR of decoding position `k` in cluster `g` after SIC.
    pub fn sinr_user(&self, g: usize, k: usize, alloc: &PowerAllocation) -> f64 {
        let gains = &self.gain[g][k];
        let signal = gains[g] * alloc.alpha[g][k];
        let intra = gains[g] * alloc.alpha[g][..k].iter().sum::<f64>();
        let inter: f64 = (0..self.n_clusters).filter(|&i| i != g).map(|i| gains[i] * alloc.cluster(i)).sum();
        signal / (intra + inter + 1.0)
    }

    /// Smallest `SINR / r` margin over all QUs (>= 1 when QoS holds).
    pub fn qos_margin(&self, alloc: &PowerAllocation) -> f64 {
        let mut worst = f64::INFINITY;
        for g in 0..self.n_clusters {
            for k in 1..self.users_per_cluster {
                let r = self.qos[g][k];
                if r > 0.0 {
                    worst = worst.min(self.sinr_user(g, k, alloc) / r);
                }
            }
        }
        worst
    }

    pub fn qos_satisfied(&self, alloc: &PowerAllocation, rel_tol: f64) -> bool {
        self.qos_margin(alloc) >= 1.0 - rel_tol
    }

    /// Unclamped `log2((1 + SINR_{g,1}) / (1 + z_g))`.
    pub fn secrecy_rate(&self, g: usize, alloc: &PowerAllocation, slack: &SlackVector) -> f64 {
        ((1.0 + self.sinr_su(g, alloc)) / (1.0 + slack.z[g])).log2()
    }

    pub fn secrecy_rates(&self, alloc: &PowerAllocation, slack: &SlackVector) -> Vec<f64> {
        (0..self.n_clusters).map(|g| self.secrecy_rate(g, alloc, slack)).collect()
    }

    pub fn eve_form(&self, case: EveCase, g: usize, alloc: &PowerAllocation, z: f64) -> HermitianForm {
        match case {
            EveCase::Lower => eve_form_lower(g, &self.beams, self.rho, self.gamma_e, alloc),
            EveCase::Upper => eve_form_upper(g, &self.beams, self.rho, self.gamma_e, alloc, z),
        }
    }

    /// Exact SOP of every SU at `(alloc, slack)`.
    pub fn actual_sop(&self, case: EveCase, alloc: &PowerAllocation, slack: &SlackVector) -> Result<Vec<f64>> {
        (0..self.n_clusters)
            .map(|g| exact_sop(&self.eve_form(case, g, alloc, slack.z[g]), slack.z[g]))
            .collect()
    }

    /// Coefficients `c_hat` of the upper form on the beam outer products,
    /// normalized by `Gamma_e rho`: `c_hat_g = alpha_{g,1} - z sum_{k>1} alpha_{g,k}`
    /// and `c_hat_i = -z sum_k alpha_{i,k}` for `i != g`.
    pub fn upper_coefficients(&self, g: usize, alloc: &PowerAllocation, z: f64) -> Vec<f64> {
        (0..self.n_clusters)
            .map(|i| {
                if i == g {
                    alloc.alpha[g][0] - z * alloc.cluster_qus(g)
                } else {
                    -z * alloc.cluster(i)
                }
            })
            .collect()
    }

    /// Surrogate threshold `Tr(Q) + kappa ||Q||_F` of the upper form, in
    /// absolute units. Bounds the Bernstein threshold from above because
    /// `{lambda_max}^+ <= ||Q||_F`.
    pub fn upper_surrogate(&self, g: usize, alloc: &PowerAllocation, z: f64, params: BernsteinParams) -> f64 {
        let c = self.upper_coefficients(g, alloc, z);
        let trace: f64 = c.iter().sum();
        let frob = self.frobenius_from_coefficients(&c);
        self.eve_scale() * (trace + params.kappa() * frob)
    }

    /// `||sum_i c_i w_i w_i^H||_F = ||L^T c||`.
    pub fn frobenius_from_coefficients(&self, c: &[f64]) -> f64 {
        let n = c.len();
        let mut s = 0.0;
        for j in 0..self.overlap_sqrt.ncols() {
            let v: f64 = (0..n).map(|i| self.overlap_sqrt[(i, j)] * c[i]).sum();
            s += v * v;
        }
        s.sqrt()
    }

    /// Upper-case surrogate constraint for cluster `g` with `z` fixed, as a
    /// cone over the `alpha` block of `n_vars` variables (normalized by
    /// `Gamma_e rho`): `kappa ||L^T C alpha|| <= z / (Gamma_e rho) - 1^T C alpha`.
    pub fn upper_sop_cone(&self, g: usize, z: f64, params: BernsteinParams, n_vars: usize) -> SocConstraint {
        let (gc, kc) = (self.n_clusters, self.users_per_cluster);
        // C maps alpha to c_hat.
        let mut cmat = DMatrix::zeros(gc, n_vars);
        for i in 0..gc {
            for k in 0..kc {
                let j = self.alpha_index(i, k);
                cmat[(i, j)] = if i == g {
                    if k == 0 {
                        1.0
                    } else {
                        -z
                    }
                } else {
                    -z
                };
            }
        }
        let f = self.overlap_sqrt.transpose() * &cmat * params.kappa();
        let mut d = nalgebra::DVector::zeros(n_vars);
        for j in 0..n_vars {
            d[j] = -(0..gc).map(|i| cmat[(i, j)]).sum::<f64>();
        }
        SocConstraint {
            f,
            f0: nalgebra::DVector::zeros(gc),
            d,
            d0: z / self.eve_scale(),
        }
    }
}

/// Symmetric square root factor via eigendecomposition (negative
/// eigenvalues from round-off are clipped).
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for i in 0..l.nrows() {
            l[(i, j)] *= s;
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::rates;
    use crate::scheduling::schedule_realization;
    use crate::sop::bernstein_threshold;

    fn fixture(seed: u64) -> (Realization, Scenario) {
        let cfg = ScenarioConfig::default();
        let r = schedule_realization(&cfg, seed).unwrap();
        let s = Scenario::from_realization(&r, &cfg.qos_thresholds);
        (r, s)
    }

    fn spread_alloc(s: &Scenario) -> PowerAllocation {
        PowerAllocation {
            alpha: (0..s.n_clusters)
                .map(|g| (0..s.users_per_cluster).map(|k| 0.01 + 0.003 * (g + 2 * k) as f64).collect())
                .collect(),
        }
    }

    #[test]
    fn sinrs_match_reference_formulas() {
        let (r, s) = fixture(3);
        let alloc = spread_alloc(&s);
        for g in 0..s.n_clusters {
            let a = s.sinr_su(g, &alloc);
            assert!((a - rates::sinr_su(g, &r.channels, &r.beams, &alloc)).abs() <= 1e-12 * a);
            for k in 1..s.users_per_cluster {
                let b = s.sinr_user(g, k, &alloc);
                let c = rates::sinr_qu(g, k, &r.channels, &r.beams, &alloc);
                assert!((b - c).abs() <= 1e-12 * c);
            }
        }
    }

    #[test]
    fn qos_rows_match_sinr_margin() {
        let (_, s) = fixture(5);
        let alloc = spread_alloc(&s);
        let x: Vec<f64> = alloc.alpha.iter().flatten().copied().collect();
        let mut idx = 0;
        for g in 0..s.n_clusters {
            for k in 1..s.users_per_cluster {
                let (row, rhs) = &s.qos_rows(x.len())[idx];
                idx += 1;
                let lhs: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                let ok_row = lhs <= *rhs;
                let ok_sinr = s.sinr_user(g, k, &alloc) >= s.qos[g][k];
                assert_eq!(ok_row, ok_sinr);
            }
        }
    }

    #[test]
    fn frobenius_and_trace_of_upper_form() {
        let (_, s) = fixture(8);
        let alloc = spread_alloc(&s);
        for g in 0..s.n_clusters {
            let z = 0.7 + g as f64;
            let q = s.eve_form(EveCase::Upper, g, &alloc, z);
            let c = s.upper_coefficients(g, &alloc, z);
            let scale = s.eve_scale();
            let frob = scale * s.frobenius_from_coefficients(&c);
            assert!((frob - q.frobenius()).abs() <= 1e-9 * q.frobenius());
            let tr = scale * c.iter().sum::<f64>();
            assert!((tr - q.trace()).abs() <= 1e-9 * q.frobenius());
        }
    }

    #[test]
    fn surrogate_dominates_bernstein_threshold() {
        let (_, s) = fixture(9);
        let alloc = spread_alloc(&s);
        let p = BernsteinParams::from_eps0(0.05);
        for g in 0..s.n_clusters {
            for z in [0.0, 0.3, 2.0] {
                let q = s.eve_form(EveCase::Upper, g, &alloc, z);
                let b = bernstein_threshold(&q, p.sigma);
                let sur = s.upper_surrogate(g, &alloc, z, p);
                assert!(sur >= b - 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn upper_form_has_at_most_one_positive_eigenvalue() {
        let (_, s) = fixture(10);
        let alloc = spread_alloc(&s);
        for g in 0..s.n_clusters {
            let q = s.eve_form(EveCase::Upper, g, &alloc, 1.5);
            let ev = q.eigenvalues();
            let tiny = 1e-12 * ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(ev.iter().filter(|&&v| v > tiny).count() <= 1);
        }
    }

    #[test]
    fn cone_matches_surrogate() {
        let (_, s) = fixture(11);
        let alloc = spread_alloc(&s);
        let p = BernsteinParams::from_eps0(0.2);
        let x = nalgebra::DVector::from_iterator(s.n_alpha(), alloc.alpha.iter().flatten().copied());
        for g in 0..s.n_clusters {
            let z = 50.0 * (g + 1) as f64;
            let cone = s.upper_sop_cone(g, z, p, s.n_alpha());
            let margin = cone.margin(&x) * s.eve_scale();
            let direct = z - s.upper_surrogate(g, &alloc, z, p);
            assert!((margin - direct).abs() <= 1e-9 * z.max(1.0), "{margin} vs {direct}");
        }
    }

    #[test]
    fn su_only_drops_qus() {
        let (_, s) = fixture(12);
        let r = s.su_only();
        assert_eq!(r.users_per_cluster, 1);
        assert_eq!(r.su_gain, s.su_gain);
        assert!(r.qos_rows(r.n_alpha()).is_empty());
    }
}
