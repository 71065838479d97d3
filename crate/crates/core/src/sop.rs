//! Secrecy outage machinery for quadratic forms `x^H Q x` of a standard
//! circular complex Gaussian `x`: the Bernstein-type threshold, the exact tail
//! probability from the spectrum, a Monte Carlo estimator and the bisection
//! that calibrates the surrogate outage level.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::complex_gaussian;
use crate::error::{Result, SolveError};
use crate::rates::HermitianForm;

/// Bernstein exponent `sigma = ln(1 / eps0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinParams {
    pub sigma: f64,
    pub eps0: f64,
}

impl BernsteinParams {
    pub fn from_eps0(eps0: f64) -> Self {
        Self {
            sigma: -eps0.ln(),
            eps0,
        }
    }

    pub fn from_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            eps0: (-sigma).exp(),
        }
    }

    /// `sqrt(2 sigma) + sigma`, the multiplier of the spread term.
    pub fn kappa(&self) -> f64 {
        (2.0 * self.sigma).sqrt() + self.sigma
    }

    /// Threshold factor `1 + sqrt(2 sigma) + sigma` for rank-one PSD forms.
    pub fn rank_one_factor(&self) -> f64 {
        1.0 + self.kappa()
    }
}

/// `Tr(Q) + sqrt(2 sigma) ||Q||_F + sigma {lambda_max(Q)}^+`.
pub fn bernstein_threshold(q: &HermitianForm, sigma: f64) -> f64 {
    let lmax = if sigma > 0.0 { q.lambda_max().max(0.0) } else { 0.0 };
    q.trace() + (2.0 * sigma).sqrt() * q.frobenius() + sigma * lmax
}

/// Eigenvalues closer than this (relative) count as coincident.
const DISTINCT_TOL: f64 = 1e-9;
const JITTER: f64 = 1e-7;

/// `Pr{x^H Q x > z}` for `z >= 0`.
pub fn exact_sop(q: &HermitianForm, z: f64) -> Result<f64> {
    exact_sop_from_eigenvalues(q.eigenvalues(), z)
}

/// Tail probability from a spectrum, via the partial-fraction expansion over
/// the positive eigenvalues:
/// `sum_i prod_{l != i} (1 - lambda_l / lambda_i)^{-1} exp(-z / lambda_i)`.
///
/// Eigenvalues below `1e-12 max |lambda|` in magnitude are set to zero.
/// Positive eigenvalues that coincide to relative `1e-9` are spread apart
/// multiplicatively by multiples of `1e-7` with alternating signs.
pub fn exact_sop_from_eigenvalues(eigenvalues: &[f64], z: f64) -> Result<f64> {
    let scale = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if scale == 0.0 {
        return Ok(if z < 0.0 { 1.0 } else { 0.0 });
    }
    let cut = 1e-12 * scale;
    let mut lam: Vec<f64> = eigenvalues.iter().map(|&l| if l.abs() <= cut { 0.0 } else { l }).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    let n_pos = lam.iter().take_while(|&&l| l > 0.0).count();
    if n_pos == 0 {
        return Ok(0.0);
    }
    separate_positive(&mut lam[..n_pos]);
    for i in 1..n_pos {
        if (lam[i - 1] - lam[i]) <= DISTINCT_TOL * lam[i - 1] {
            return Err(SolveError::DegenerateSpectrum(lam[i - 1], lam[i]));
        }
    }

    let mut total = 0.0;
    for i in 0..n_pos {
        let li = lam[i];
        let mut log_mag = -z / li;
        let mut sign = 1.0;
        for (l, &ll) in lam.iter().enumerate() {
            if l == i || ll == 0.0 {
                continue;
            }
            // (li - ll) / li keeps full relative precision for close eigenvalues.
            let factor = (li - ll) / li;
            if factor < 0.0 {
                sign = -sign;
            }
            log_mag -= factor.abs().ln();
        }
        total += sign * log_mag.exp();
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Spreads runs of (relatively) coincident positive eigenvalues, sorted
/// descending, so that Lemma-style partial fractions are defined.
fn separate_positive(lam: &mut [f64]) {
    let mut start = 0;
    while start < lam.len() {
        let mut end = start + 1;
        while end < lam.len() && lam[end - 1] - lam[end] <= DISTINCT_TOL * lam[end - 1] {
            end += 1;
        }
        if end - start > 1 {
            for (j, l) in lam[start..end].iter_mut().enumerate() {
                let step = (j / 2 + 1) as f64 * JITTER;
                *l *= if j % 2 == 0 { 1.0 + step } else { 1.0 - step };
            }
        }
        start = end;
    }
    lam.sort_by(|a, b| b.total_cmp(a));
}

/// Monte Carlo estimate of `Pr{x^H Q x > z}` with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    fn from_count(count: usize, n: usize) -> Self {
        let p = count as f64 / n as f64;
        Self {
            estimate: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_samples: n,
        }
    }

    /// Whether `value` lies within `k` standard errors, taking the larger of
    /// the estimated error and the error implied by `value` itself.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        let n = self.n_samples as f64;
        let se = self.std_error.max((value * (1.0 - value) / n).max(0.0).sqrt());
        (self.estimate - value).abs() <= k * se
    }
}

const BLOCK: usize = 1 << 15;

pub fn mc_sop(q: &HermitianForm, z: f64, n_samples: usize, seed: u64) -> McEstimate {
    mc_sop_multi(q, &[z], n_samples, seed)[0]
}

/// Estimates the tail at several thresholds from one shared sample set.
/// Samples are drawn in fixed-size blocks, block `b` from ChaCha stream `b`,
/// so the result does not depend on the thread count.
pub fn mc_sop_multi(q: &HermitianForm, zs: &[f64], n_samples: usize, seed: u64) -> Vec<McEstimate> {
    let n_samples = n_samples.max(1);
    let n = q.dim();
    let n_blocks = n_samples.div_ceil(BLOCK);
    let counts = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = BLOCK.min(n_samples - b * BLOCK);
            let mut counts = vec![0usize; zs.len()];
            for _ in 0..len {
                let x = complex_gaussian(&mut rng, n);
                let v = q.eval(&x);
                for (c, &z) in counts.iter_mut().zip(zs) {
                    if v > z {
                        *c += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0usize; zs.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    counts.into_iter().map(|c| McEstimate::from_count(c, n_samples)).collect()
}

/// Outcome of the surrogate-level bisection.
#[derive(Debug, Clone)]
pub struct Calibration<T> {
    pub params: BernsteinParams,
    pub solution: T,
    /// Actual SOP achieved by `solution`.
    pub actual: f64,
    /// `(eps0, actual)` for every probe, in evaluation order.
    pub probes: Vec<(f64, f64)>,
    /// True when even `eps0 = 1` leaves the actual SOP below target.
    pub saturated: bool,
    /// Probe pairs whose ordering contradicted monotonicity in `eps0`.
    pub monotonicity_violations: usize,
}

/// Bisection on `eps0 in [eps, 1]` so that the actual SOP returned by `solve`
/// meets `eps` within `tol` from below.
///
/// `solve` maps surrogate parameters to a solution and its worst-case actual
/// SOP. The search assumes the actual SOP is nondecreasing in `eps0`; probe
/// pairs that contradict this are counted rather than trusted. The returned
/// solution never exceeds `eps + tol` unless the very first probe does.
pub fn calibrate_epsilon0<T: Clone>(
    mut solve: impl FnMut(BernsteinParams) -> Result<(T, f64)>,
    eps: f64,
    tol: f64,
) -> Result<Calibration<T>> {
    let mut probes = Vec::new();
    let mut eval = |eps0: f64, probes: &mut Vec<(f64, f64)>| -> Result<(T, f64)> {
        let (sol, actual) = solve(BernsteinParams::from_eps0(eps0))?;
        probes.push((eps0, actual));
        Ok((sol, actual))
    };
    let finish = |params, solution, actual, probes: Vec<(f64, f64)>, saturated| {
        let monotonicity_violations = count_violations(&probes);
        Ok(Calibration {
            params,
            solution,
            actual,
            probes,
            saturated,
            monotonicity_violations,
        })
    };

    let (sol_lo, act_lo) = eval(eps, &mut probes)?;
    if act_lo >= eps - tol {
        return finish(BernsteinParams::from_eps0(eps), sol_lo, act_lo, probes, false);
    }
    let (sol_hi, act_hi) = eval(1.0, &mut probes)?;
    if act_hi <= eps + tol {
        let saturated = act_hi < eps - tol;
        return finish(BernsteinParams::from_eps0(1.0), sol_hi, act_hi, probes, saturated);
    }

    let (mut lo, mut hi) = (eps, 1.0);
    let mut best = (lo, sol_lo, act_lo);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let (sol, act) = eval(mid, &mut probes)?;
        if (act - eps).abs() <= tol {
            return finish(BernsteinParams::from_eps0(mid), sol, act, probes, false);
        }
        if act < eps {
            lo = mid;
            best = (mid, sol, act);
        } else {
            hi = mid;
        }
    }
    let (eps0, sol, act) = best;
    finish(BernsteinParams::from_eps0(eps0), sol, act, probes, false)
}

fn count_violations(probes: &[(f64, f64)]) -> usize {
    let mut v = 0;
    for (i, a) in probes.iter().enumerate() {
        for b in &probes[i + 1..] {
            let (lo, hi) = if a.0 < b.0 { (a, b) } else { (b, a) };
            if lo.1 > hi.1 + 1e-12 {
                v += 1;
            }
        }
    }
    v
}
