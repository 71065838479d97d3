//! SINRs, eavesdropper quadratic forms and secrecy rates.
//!
//! User indices are zero-based decoding positions: `k = 0` is the SU and
//! users `0..k` are cancelled by SIC before user `k` decodes.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::beamforming::{effective_gain, BeamMatrix};
use crate::channel::ChannelSet;

/// Power fractions `alpha[g][k]` of the total transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub alpha: Vec<Vec<f64>>,
}

impl PowerAllocation {
    pub fn zeros(g: usize, k: usize) -> Self {
        Self {
            alpha: vec![vec![0.0; k]; g],
        }
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().flatten().sum()
    }

    /// Power of cluster `g` (all users).
    pub fn cluster(&self, g: usize) -> f64 {
        self.alpha[g].iter().sum()
    }

    /// Power of the QUs of cluster `g`.
    pub fn cluster_qus(&self, g: usize) -> f64 {
        self.alpha[g][1..].iter().sum()
    }

    pub fn is_valid(&self) -> bool {
        self.alpha.iter().flatten().all(|&a| a >= 0.0) && self.total() <= 1.0 + 1e-9
    }
}

/// Eve-SINR slack `z[g]` per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackVector {
    pub z: Vec<f64>,
}

/// Hermitian matrix with lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct HermitianForm {
    pub q: DMatrix<Complex64>,
    eigenvalues: OnceLock<Vec<f64>>,
}

impl HermitianForm {
    pub fn new(q: DMatrix<Complex64>) -> Self {
        Self {
            q,
            eigenvalues: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.get_or_init(|| {
            let mut ev: Vec<f64> = self.q.clone().symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            ev
        })
    }

    pub fn trace(&self) -> f64 {
        self.q.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.q.norm()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `||Q - Q^H|| / ||Q||`
    pub fn asymmetry(&self) -> f64 {
        let n = self.q.norm();
        if n == 0.0 {
            0.0
        } else {
            (&self.q - self.q.adjoint()).norm() / n
        }
    }

    /// `x^H Q x`
    pub fn eval(&self, x: &nalgebra::DVector<Complex64>) -> f64 {
        x.dotc(&(&self.q * x)).re
    }
}

impl PartialEq for HermitianForm {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q
    }
}

pub fn sinr_su(g: usize, channels: &ChannelSet, beams: &BeamMatrix, alloc: &PowerAllocation) -> f64 {
    effective_gain(channels.su(g), &beams.w[g]) * channels.rho * alloc.alpha[g][0]
}

/// SINR of user `k` in cluster `g` after cancelling users `0..k`, including
/// inter-cluster leakage. For `k = 0` this is the SU SINR without assuming ZF.
pub fn sinr_qu(g: usize, k: usize, channels: &ChannelSet, beams: &BeamMatrix, alloc: &PowerAllocation) -> f64 {
    let h = &channels.h[g][k];
    let rho = channels.rho;
    let own = effective_gain(h, &beams.w[g]);
    let signal = own * rho * alloc.alpha[g][k];
    let intra = own * rho * alloc.alpha[g][..k].iter().sum::<f64>();
    let inter: f64 = (0..beams.w.len())
        .filter(|&i| i != g)
        .map(|i| effective_gain(h, &beams.w[i]) * rho * alloc.cluster(i))
        .sum();
    signal / (intra + inter + 1.0)
}

fn outer(w: &nalgebra::DVector<Complex64>) -> DMatrix<Complex64> {
    w * w.adjoint()
}

/// `Gamma_e rho alpha_{g,1} w_g w_g^H`: Eve decodes the SU stream interference-free.
pub fn eve_form_lower(g: usize, beams: &BeamMatrix, rho: f64, gamma_e: f64, alloc: &PowerAllocation) -> HermitianForm {
    let scale = gamma_e * rho * alloc.alpha[g][0];
    HermitianForm::new(outer(&beams.w[g]) * Complex64::from(scale))
}

/// Eve without multiuser detection: the event `SINR_e > z` is `h~^H Q h~ > z` with
/// `Q = Gamma_e [ rho(alpha_{g,1} - z sum_{k>1} alpha_{g,k}) w_g w_g^H
///               - z sum_{i != g} rho sum_k alpha_{i,k} w_i w_i^H ]`.
pub fn eve_form_upper(
    g: usize,
    beams: &BeamMatrix,
    rho: f64,
    gamma_e: f64,
    alloc: &PowerAllocation,
    z: f64,
) -> HermitianForm {
    let mut q = eve_form_lower(g, beams, rho, gamma_e, alloc).q;
    if z == 0.0 {
        return HermitianForm::new(q);
    }
    let own = gamma_e * z * rho * alloc.cluster_qus(g);
    if own != 0.0 {
        q -= outer(&beams.w[g]) * Complex64::from(own);
    }
    for i in 0..beams.w.len() {
        let p = alloc.cluster(i);
        if i != g && p != 0.0 {
            q -= outer(&beams.w[i]) * Complex64::from(gamma_e * z * rho * p);
        }
    }
    HermitianForm::new(q)
}

/// Instantaneous Eve SINR without multiuser detection for a channel `h_e`.
pub fn eve_sinr_upper(g: usize, h_e: &nalgebra::DVector<Complex64>, beams: &BeamMatrix, rho: f64, alloc: &PowerAllocation) -> f64 {
    let own = effective_gain(h_e, &beams.w[g]);
    let signal = own * rho * alloc.alpha[g][0];
    let intra = own * rho * alloc.cluster_qus(g);
    let inter: f64 = (0..beams.w.len())
        .filter(|&i| i != g)
        .map(|i| effective_gain(h_e, &beams.w[i]) * rho * alloc.cluster(i))
        .sum();
    signal / (intra + inter + 1.0)
}

/// `log2((1 + SINR_{g,1}) / (1 + z_g))`, unclamped.
pub fn secrecy_rate(g: usize, channels: &ChannelSet, beams: &BeamMatrix, alloc: &PowerAllocation, slack: &SlackVector) -> f64 {
    ((1.0 + sinr_su(g, channels, beams, alloc)) / (1.0 + slack.z[g])).log2()
}

/// `{x}^+`
pub fn clamp_rate(r: f64) -> f64 {
    r.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduling::schedule_realization;
    use crate::config::ScenarioConfig;
    use nalgebra::DVector;

    fn unit_beam(n: usize, i: usize) -> nalgebra::DVector<Complex64> {
        DVector::from_fn(n, |j, _| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
    }

    fn single_cluster(gain: f64, k: usize) -> (ChannelSet, BeamMatrix) {
        let h = DVector::from_vec(vec![Complex64::new(gain.sqrt(), 0.0)]);
        let ch = ChannelSet {
            h: vec![vec![h.clone(); k]],
            small_scale: vec![vec![h; k]],
            distances: vec![vec![1.0; k]],
            gamma_e: 1.0,
            rho: 10.0,
        };
        let beams = BeamMatrix {
            w: vec![unit_beam(1, 0)],
            leakage: DMatrix::zeros(1, 1),
            condition: 1.0,
        };
        (ch, beams)
    }

    #[test]
    fn su_sinr_aligned_channel() {
        let (ch, beams) = single_cluster(4.0, 1);
        let alloc = PowerAllocation { alpha: vec![vec![0.5]] };
        assert!((sinr_su(0, &ch, &beams, &alloc) - 20.0).abs() < 1e-12);
        let zero = PowerAllocation::zeros(1, 1);
        assert_eq!(sinr_su(0, &ch, &beams, &zero), 0.0);
    }

    #[test]
    fn qu_sinr_two_user_cluster() {
        let (ch, beams) = single_cluster(1.0, 2);
        let alloc = PowerAllocation {
            alpha: vec![vec![0.5, 0.5]],
        };
        assert!((sinr_qu(0, 1, &ch, &beams, &alloc) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(sinr_qu(0, 1, &ch, &beams, &PowerAllocation::zeros(1, 2)), 0.0);
    }

    #[test]
    fn lower_form_rank_one_algebra() {
        let beams = BeamMatrix {
            w: vec![unit_beam(3, 1)],
            leakage: DMatrix::zeros(1, 1),
            condition: 1.0,
        };
        let alloc = PowerAllocation { alpha: vec![vec![0.1]] };
        let q = eve_form_lower(0, &beams, 100.0, 1.0, &alloc);
        assert!((q.trace() - 10.0).abs() < 1e-12);
        assert!((q.lambda_max() - 10.0).abs() < 1e-12);
        assert!((q.frobenius() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn upper_form_at_zero_slack_is_lower_form() {
        let r = schedule_realization(&ScenarioConfig::default(), 2).unwrap();
        let alloc = PowerAllocation {
            alpha: vec![vec![0.05, 0.06, 0.055]; 6],
        };
        for g in 0..6 {
            let lo = eve_form_lower(g, &r.beams, r.channels.rho, r.channels.gamma_e, &alloc);
            let up = eve_form_upper(g, &r.beams, r.channels.rho, r.channels.gamma_e, &alloc, 0.0);
            assert_eq!(lo.q, up.q);
        }
    }

    #[test]
    fn su_sinr_agrees_with_general_formula() {
        let r = schedule_realization(&ScenarioConfig::default(), 4).unwrap();
        let alloc = PowerAllocation {
            alpha: vec![vec![0.08, 0.04, 0.03]; 6],
        };
        for g in 0..6 {
            let a = sinr_su(g, &r.channels, &r.beams, &alloc);
            let b = sinr_qu(g, 0, &r.channels, &r.beams, &alloc);
            assert!((a - b).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn secrecy_rate_identities() {
        let (ch, beams) = single_cluster(0.3, 1);
        let alloc = PowerAllocation { alpha: vec![vec![1.0]] };
        let rate = secrecy_rate(0, &ch, &beams, &alloc, &SlackVector { z: vec![1.0] });
        assert!((rate - 1.0).abs() < 1e-12);
        let s = sinr_su(0, &ch, &beams, &alloc);
        assert!(secrecy_rate(0, &ch, &beams, &alloc, &SlackVector { z: vec![s] }).abs() < 1e-15);
    }
}
