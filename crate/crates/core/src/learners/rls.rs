use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, from_dmatrix, inverse_spd, log_det_spd, mat_vec_into, quad_form, to_dmatrix};

/// Rank-one updates between full refactorizations of the inverse.
pub const REFRESH_EVERY: u32 = 512;

/// Regularized least-squares sufficient statistics for one representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlsState {
    pub dim: usize,
    pub reg: f64,
    /// `sum phi phi^T`, row-major; `V = reg I + xtx`.
    pub xtx: Vec<f64>,
    /// `V^{-1}`, row-major.
    pub gram_inv: Vec<f64>,
    /// `b = sum phi y`.
    pub moment: Vec<f64>,
    /// `c = sum y^2`.
    pub sq_sum: f64,
    pub theta: Vec<f64>,
    pub log_det: f64,
    /// Number of samples absorbed; the round counter is `n_samples + 1`.
    pub n_samples: u64,
    pub feature_bound: f64,
    pub param_bound: f64,
    pub sigma: f64,
    since_refresh: u32,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl RlsState {
    pub fn new(dim: usize, reg: f64, feature_bound: f64, param_bound: f64, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        if !(reg > 0.0) {
            return Err(Error::arg("regularization must be positive"));
        }
        let mut gram_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            gram_inv[i * dim + i] = 1.0 / reg;
        }
        Ok(RlsState {
            dim,
            reg,
            xtx: vec![0.0; dim * dim],
            gram_inv,
            moment: vec![0.0; dim],
            sq_sum: 0.0,
            theta: vec![0.0; dim],
            log_det: dim as f64 * reg.ln(),
            n_samples: 0,
            feature_bound,
            param_bound,
            sigma,
            since_refresh: 0,
            scratch: vec![0.0; dim],
        })
    }

    /// Round index `t` (1 before any update).
    pub fn t(&self) -> u64 {
        self.n_samples + 1
    }

    /// `V = reg I + xtx`, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let mut v = self.xtx.clone();
        for i in 0..self.dim {
            v[i * self.dim + i] += self.reg;
        }
        v
    }

    pub fn update(&mut self, phi: &[f64], y: f64) {
        let d = self.dim;
        debug_assert_eq!(phi.len(), d);
        if self.scratch.len() != d {
            self.scratch = vec![0.0; d];
        }
        let mut u = std::mem::take(&mut self.scratch);
        mat_vec_into(&self.gram_inv, phi, &mut u);
        let denom = 1.0 + dot(phi, &u);
        for i in 0..d {
            if u[i] == 0.0 {
                continue;
            }
            let ui = u[i] / denom;
            let row = &mut self.gram_inv[i * d..(i + 1) * d];
            for (r, uj) in row.iter_mut().zip(&u) {
                *r -= ui * uj;
            }
        }
        self.log_det += denom.ln();
        for i in 0..d {
            if phi[i] == 0.0 {
                continue;
            }
            let row = &mut self.xtx[i * d..(i + 1) * d];
            for (r, pj) in row.iter_mut().zip(phi) {
                *r += phi[i] * pj;
            }
            self.moment[i] += y * phi[i];
        }
        self.sq_sum += y * y;
        self.n_samples += 1;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.refresh();
        }
        mat_vec_into(&self.gram_inv, &self.moment, &mut self.theta);
        self.scratch = u;
    }

    /// Recomputes the inverse (and log-determinant) from `V` by Cholesky.
    pub fn refresh(&mut self) {
        let v = to_dmatrix(&self.gram(), self.dim);
        if let (Some(inv), Some(ld)) = (inverse_spd(&v), log_det_spd(&v)) {
            self.gram_inv = from_dmatrix(&inv);
            // the inverse of a symmetric matrix is symmetric; remove round-off
            let d = self.dim;
            for i in 0..d {
                for j in (i + 1)..d {
                    let m = 0.5 * (self.gram_inv[i * d + j] + self.gram_inv[j * d + i]);
                    self.gram_inv[i * d + j] = m;
                    self.gram_inv[j * d + i] = m;
                }
            }
            self.log_det = ld;
        }
        self.since_refresh = 0;
        mat_vec_into(&self.gram_inv, &self.moment, &mut self.theta);
    }

    /// Confidence radius `beta_t(delta)`.
    pub fn beta(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::arg(format!("delta = {delta} outside (0, 1)")));
        }
        Ok(self.beta_unchecked(delta))
    }

    #[inline]
    pub(crate) fn beta_unchecked(&self, delta: f64) -> f64 {
        let d = self.dim as f64;
        let inner = 0.5 * self.log_det - 0.5 * d * self.reg.ln() - delta.ln();
        self.sigma * (2.0 * inner.max(0.0)).sqrt() + self.reg.sqrt() * self.param_bound
    }

    /// `||phi||_{V^{-1}}`.
    #[inline]
    pub fn weighted_norm(&self, phi: &[f64]) -> f64 {
        quad_form(&self.gram_inv, phi).max(0.0).sqrt()
    }

    /// `phi^T theta + beta ||phi||_{V^{-1}}` with a precomputed radius.
    #[inline]
    pub fn ucb_with_beta(&self, phi: &[f64], beta: f64) -> f64 {
        dot(phi, &self.theta) + beta * self.weighted_norm(phi)
    }

    pub fn ucb_value(&self, phi: &[f64], delta: f64) -> Result<f64> {
        if phi.len() != self.dim {
            return Err(Error::arg(format!(
                "feature has length {}, expected {}",
                phi.len(),
                self.dim
            )));
        }
        Ok(self.ucb_with_beta(phi, self.beta(delta)?))
    }

    /// Mean squared error `(theta^T A theta - 2 theta^T b + c) / n` with `A = xtx`.
    pub fn mse(&self, theta: &[f64]) -> f64 {
        let n = self.n_samples.max(1) as f64;
        (quad_form(&self.xtx, theta) - 2.0 * dot(theta, &self.moment) + self.sq_sum) / n
    }

    /// Replaces the estimate, e.g. to load a known parameter in tests.
    pub fn set_theta(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
    }
}

/// Arm with the largest UCB in a `K x d` block; ties go to the lowest index.
pub fn linucb_select(state: &RlsState, block: &[f64], delta: f64) -> Result<usize> {
    let d = state.dim;
    if block.is_empty() || block.len() % d != 0 {
        return Err(Error::arg("arm block must hold at least one feature of length d"));
    }
    let beta = state.beta(delta)?;
    Ok(argmax_ucb(state, block, beta))
}

#[inline]
pub(crate) fn argmax_ucb(state: &RlsState, block: &[f64], beta: f64) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (a, phi) in block.chunks(state.dim).enumerate() {
        let v = state.ucb_with_beta(phi, beta);
        if v > best_val {
            best = a;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_at_initialization() {
        let s = RlsState::new(3, 1.0, 1.0, 1.0, 1.0).unwrap();
        let expected = (2.0 * 10f64.ln()).sqrt() + 1.0;
        assert!((s.beta(0.1).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn beta_noiseless() {
        let mut s = RlsState::new(2, 4.0, 1.0, 1.5, 0.0).unwrap();
        s.update(&[1.0, 2.0], 0.3);
        assert_eq!(s.beta(0.05).unwrap(), 2.0 * 1.5);
    }

    #[test]
    fn beta_rejects_bad_delta() {
        let s = RlsState::new(2, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(s.beta(0.0).is_err());
        assert!(s.beta(1.0).is_err());
    }

    #[test]
    fn zero_feature_update() {
        let mut s = RlsState::new(2, 1.0, 1.0, 1.0, 1.0).unwrap();
        s.update(&[1.0, -1.0], 2.0);
        let before = s.clone();
        s.update(&[0.0, 0.0], 3.0);
        assert_eq!(s.xtx, before.xtx);
        assert_eq!(s.gram_inv, before.gram_inv);
        assert_eq!(s.theta, before.theta);
        assert_eq!(s.log_det, before.log_det);
        assert_eq!(s.n_samples, before.n_samples + 1);
        assert_eq!(s.sq_sum, before.sq_sum + 9.0);
    }

    #[test]
    fn ucb_zero_feature_and_initial() {
        let s = RlsState::new(2, 1.0, 1.0, 1.0, 0.3).unwrap();
        assert_eq!(s.ucb_value(&[0.0, 0.0], 0.01).unwrap(), 0.0);
        let beta = s.beta(0.01).unwrap();
        assert!((s.ucb_value(&[3.0, 4.0], 0.01).unwrap() - 5.0 * beta).abs() < 1e-12);
        assert!(s.ucb_value(&[1.0], 0.01).is_err());
    }

    #[test]
    fn select_by_norm_at_start() {
        let s = RlsState::new(2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let block = [1.0, 0.0, 0.0, 2.0, 0.0, 1.0];
        assert_eq!(linucb_select(&s, &block, 0.1).unwrap(), 1);
        assert_eq!(linucb_select(&s, &block[..2], 0.1).unwrap(), 0);
        assert!(linucb_select(&s, &[], 0.1).is_err());
    }
}
