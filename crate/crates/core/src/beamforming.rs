//! Zero-forcing beams over the secure users.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{CVector, ChannelSet};
use crate::error::{Result, SolveError};

/// Gram matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Unit-norm ZF beam per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix {
    pub w: Vec<CVector>,
    /// `leakage[(i, g)] = |h_{i,1}^H w_g|^2`.
    pub leakage: DMatrix<f64>,
    /// Condition number of the row-normalized SU Gram matrix.
    pub condition: f64,
}

impl BeamMatrix {
    /// Largest off-diagonal leakage relative to the receiving SU channel energy.
    pub fn max_relative_leakage(&self, channels: &ChannelSet) -> f64 {
        let g_count = self.w.len();
        let mut worst: f64 = 0.0;
        for i in 0..g_count {
            let e = channels.su(i).norm_squared();
            for g in 0..g_count {
                if i != g {
                    worst = worst.max(self.leakage[(i, g)] / e);
                }
            }
        }
        worst
    }
}

/// `h^H w`
pub fn inner(h: &CVector, w: &CVector) -> Complex64 {
    h.dotc(w)
}

/// Builds ZF beams from the SU channels of `channels`.
///
/// Rows of the SU matrix are normalized first; that scales the columns of the
/// pseudo-inverse but leaves their directions unchanged. Each beam is rotated
/// so that `h_{g,1}^H w_g` is real and positive.
pub fn zf_beams(channels: &ChannelSet) -> Result<BeamMatrix> {
    let sus: Vec<&CVector> = (0..channels.n_clusters()).map(|g| channels.su(g)).collect();
    zf_from_rows(&sus)
}

pub fn zf_from_rows(rows: &[&CVector]) -> Result<BeamMatrix> {
    let g_count = rows.len();
    let n = rows[0].len();
    if g_count > n {
        return Err(SolveError::SingularChannel { condition: f64::INFINITY });
    }
    // A has rows h_g^H / |h_g|.
    let mut a = DMatrix::<Complex64>::zeros(g_count, n);
    for (g, h) in rows.iter().enumerate() {
        let norm = h.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SolveError::ZeroVector);
        }
        for j in 0..n {
            a[(g, j)] = h[j].conj() / norm;
        }
    }
    let ah = a.adjoint();
    let gram = &a * &ah;

    let eig = gram.clone().symmetric_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(SolveError::SingularChannel { condition });
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(SolveError::SingularChannel { condition })?;

    let identity = DMatrix::<Complex64>::identity(g_count, g_count);
    let mut x = chol.solve(&identity);
    // Two rounds of iterative refinement on A W = I.
    for _ in 0..2 {
        let residual = &identity - &gram * &x;
        x += chol.solve(&residual);
    }
    let w_tilde = &ah * x;

    let mut w = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let col: CVector = w_tilde.column(g).into_owned();
        let col = &col / Complex64::from(col.norm());
        let c = inner(rows[g], &col);
        let phase = if c.norm() > 0.0 { c.conj() / c.norm() } else { Complex64::new(1.0, 0.0) };
        w.push(col * phase);
    }
    let leakage = DMatrix::from_fn(g_count, g_count, |i, g| inner(rows[i], &w[g]).norm_sqr());
    Ok(BeamMatrix { w, leakage, condition })
}

/// Effective gain `|h^H w|^2`.
pub fn effective_gain(h: &CVector, w: &CVector) -> f64 {
    inner(h, w).norm_sqr()
}
