//! Closed-form regret, suboptimal-pull and time-to-constant-regret expressions.
//!
//! All logarithms are natural. The expressions assume `lambda`, `S`, `sigma`
//! and `Delta_max` are at least 1; [`BoundInputs::clamped`] enforces this and
//! reports every adjustment.

use serde::{Deserialize, Serialize};

use crate::diversity::{moment_matrix, Which};
use crate::error::{Error, Result};
use crate::problem::ContextualProblem;

/// Problem and algorithm constants entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d: usize,
    pub l: f64,
    pub s: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub delta: f64,
    pub gap: f64,
    pub gap_max: f64,
    pub lambda_hls: f64,
}

impl BoundInputs {
    /// Copy with `lambda`, `S`, `sigma` and `Delta_max` raised to 1 where smaller,
    /// plus one warning per adjusted input.
    pub fn clamped(&self) -> (BoundInputs, Vec<String>) {
        let mut out = *self;
        let mut warnings = Vec::new();
        for (name, v) in [
            ("lambda", &mut out.lambda),
            ("S", &mut out.s),
            ("sigma", &mut out.sigma),
            ("Delta_max", &mut out.gap_max),
        ] {
            if *v < 1.0 {
                warnings.push(format!("{name} = {v} raised to 1"));
                *v = 1.0;
            }
        }
        (out, warnings)
    }

    fn check(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::arg("bounds need d >= 1"));
        }
        if !(self.gap > 0.0) {
            return Err(Error::arg(format!("bounds need a positive gap, got {}", self.gap)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0 + 1e-15) {
            return Err(Error::arg(format!("delta = {} outside (0, 1]", self.delta)));
        }
        Ok(())
    }

    fn log_term(&self, m: f64, t: f64) -> f64 {
        let d = self.d as f64;
        2.0 * (m / self.delta).ln() + d * (1.0 + t * self.l * self.l / (self.lambda * d)).ln()
    }
}

/// Inputs measured on representation `rep` of a finite problem: `L`, `S`,
/// `lambda_hls` from the representation (0 below full rank), gaps and `sigma`
/// from the problem.
pub fn measured_inputs(problem: &ContextualProblem, rep: usize, delta: f64, lambda: f64) -> Result<BoundInputs> {
    let r = problem
        .representations
        .get(rep)
        .ok_or_else(|| Error::arg(format!("representation {rep} does not exist")))?;
    let gaps = problem.gap_profile()?;
    let moments = moment_matrix(problem, r, Which::Optimal)?;
    Ok(BoundInputs {
        d: r.dim(),
        l: r.feature_bound(),
        s: r.param_bound(),
        sigma: problem.noise_sigma,
        lambda,
        delta,
        gap: gaps.min_gap,
        gap_max: gaps.max_gap,
        lambda_hls: if moments.full_rank() { moments.lambda_min } else { 0.0 },
    })
}

/// Maximum number of suboptimal pulls of LinUCB up to round `t` under the good event.
pub fn suboptimal_pulls_bound(inputs: &BoundInputs, t: f64) -> Result<f64> {
    inputs.check()?;
    if !(t >= 1.0) {
        return Err(Error::arg(format!("t = {t} must be at least 1")));
    }
    let p = inputs;
    let k = p.log_term(1.0, t);
    Ok(32.0 * p.gap_max * p.gap_max * p.lambda * p.s * p.s * p.sigma * p.sigma * k * k / (p.gap * p.gap))
}

/// Time after which an HLS representation incurs no regret, with flags for clamped logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauValue {
    pub tau: f64,
    pub branch_gap: f64,
    pub branch_eig: f64,
    /// A logarithm argument fell below `e` and was raised to `e`.
    pub log_clamped: bool,
}

/// Explicit `tau` for an HLS representation; `+inf` when `lambda_hls <= 0`.
pub fn tau_hls(inputs: &BoundInputs) -> Result<TauValue> {
    inputs.check()?;
    let p = inputs;
    if !(p.lambda_hls > 0.0) {
        return Ok(TauValue {
            tau: f64::INFINITY,
            branch_gap: f64::INFINITY,
            branch_eig: f64::INFINITY,
            log_clamped: false,
        });
    }
    let d = p.d as f64;
    let e = std::f64::consts::E;
    let mut clamped = false;
    let mut ln_at_least_one = |x: f64| {
        if x < e {
            clamped = true;
            1.0
        } else {
            x.ln()
        }
    };
    let sl = p.lambda.sqrt();
    let arg1 = 64.0 * d * d * p.l.powi(3) * p.sigma * p.s * sl / (p.lambda_hls.sqrt() * p.gap * p.delta);
    let ln1 = ln_at_least_one(arg1);
    let branch_gap = 384f64.powi(2) * d * d * p.l * p.l * p.s * p.s * p.sigma * p.sigma * p.lambda
        / (p.lambda_hls * p.gap * p.gap)
        * ln1
        * ln1;
    let arg2 = 512.0 * d * p.l.powi(4) / (p.delta * p.lambda_hls * p.lambda_hls);
    let ln2 = ln_at_least_one(arg2);
    let branch_eig = 768.0 * p.l.powi(4) / (p.lambda_hls * p.lambda_hls) * ln2;
    if clamped {
        log::warn!("tau: logarithm argument below e, clamped");
    }
    Ok(TauValue {
        tau: branch_gap.max(branch_eig),
        branch_gap,
        branch_eig,
        log_clamped: clamped,
    })
}

/// High-probability regret after `n` rounds of a learner holding `m_reps`
/// representations, one of which reaches constant regret at `tau`.
pub fn regret_bound(inputs: &BoundInputs, n: f64, tau: f64, m_reps: usize) -> Result<f64> {
    inputs.check()?;
    if !(n >= 1.0) {
        return Err(Error::arg(format!("n = {n} must be at least 1")));
    }
    if m_reps == 0 {
        return Err(Error::arg("regret bound needs at least one representation"));
    }
    let p = inputs;
    let k = p.log_term(m_reps as f64, n.min(tau));
    Ok(32.0 * p.lambda * p.gap_max * p.gap_max * p.s * p.s * p.sigma * p.sigma / p.gap * k * k)
}
