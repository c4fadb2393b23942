use std::any::Any;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rls::{argmax_ucb, RlsState};
use super::{display_name, AlgorithmSpec, BuildContext, ConfidenceSchedule, Decision, Policy, Step};
use crate::error::{Error, Result};

/// Implicit-exploration parameter `gamma = sqrt(2 ln M / (n K))`.
pub fn exp4ix_gamma(m: usize, horizon: u64, k: usize) -> f64 {
    (2.0 * (m as f64).ln() / (horizon as f64 * k as f64)).sqrt()
}

/// EXP4.IX over per-representation LinUCB experts. Every expert absorbs every sample.
#[derive(Debug, Clone)]
pub struct Exp4IxPolicy {
    name: String,
    pub experts: Vec<RlsState>,
    pub rep_ids: Vec<usize>,
    pub log_weights: Vec<f64>,
    pub gamma: f64,
    pub eta: f64,
    /// Rewards are mapped to losses by `(hi - y) / (hi - lo)`, clipped to `[0, 1]`.
    pub reward_range: (f64, f64),
    pub delta: f64,
    pub schedule: ConfidenceSchedule,
    rng: ChaCha8Rng,
    recs: Vec<usize>,
    probs: Vec<f64>,
}

impl Exp4IxPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        experts: Vec<RlsState>,
        rep_ids: Vec<usize>,
        n_arms: usize,
        horizon: u64,
        reward_range: (f64, f64),
        delta: f64,
        schedule: ConfidenceSchedule,
        seed: u64,
    ) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::Config("exp4ix needs at least one expert".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("exp4ix needs the horizon".into()));
        }
        if !(reward_range.1 > reward_range.0) {
            return Err(Error::Config("exp4ix needs a non-degenerate reward range".into()));
        }
        let m = experts.len();
        let gamma = exp4ix_gamma(m, horizon, n_arms);
        Ok(Exp4IxPolicy {
            name: name.into(),
            experts,
            rep_ids,
            log_weights: vec![0.0; m],
            gamma,
            eta: 2.0 * gamma,
            reward_range,
            delta,
            schedule,
            rng: ChaCha8Rng::seed_from_u64(seed),
            recs: vec![0; m],
            probs: vec![0.0; n_arms],
        })
    }

    /// Expert weights normalized to a distribution.
    pub fn weights(&self) -> Vec<f64> {
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }

    /// Arm distribution induced by the current recommendations.
    pub fn arm_probs(&self) -> &[f64] {
        &self.probs
    }
}

impl Policy for Exp4IxPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, step: &Step) -> Decision {
        let delta = self.schedule.delta_at(self.delta, step.t);
        for (i, (s, &r)) in self.experts.iter().zip(&self.rep_ids).enumerate() {
            self.recs[i] = argmax_ucb(s, &step.features[r], s.beta_unchecked(delta));
        }
        let w = self.weights();
        self.probs.iter_mut().for_each(|p| *p = 0.0);
        for (&a, wi) in self.recs.iter().zip(&w) {
            self.probs[a] += wi;
        }
        let u: f64 = self.rng.random();
        let mut cum = 0.0;
        let mut arm = self.recs[0];
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                arm = a;
                cum += p;
                if u < cum {
                    break;
                }
            }
        }
        Decision {
            arm,
            selecting_rep: None,
        }
    }

    fn update(&mut self, step: &Step, arm: usize, reward: f64) {
        let (lo, hi) = self.reward_range;
        let loss = ((hi - reward) / (hi - lo)).clamp(0.0, 1.0);
        let estimate = loss / (self.probs[arm] + self.gamma);
        for (lw, &rec) in self.log_weights.iter_mut().zip(&self.recs) {
            if rec == arm {
                *lw -= self.eta * estimate;
            }
        }
        for (s, &r) in self.experts.iter_mut().zip(&self.rep_ids) {
            let d = s.dim;
            s.update(&step.features[r][arm * d..(arm + 1) * d], reward);
        }
    }

    fn report(&self) -> Vec<String> {
        vec![format!("final expert weights {:?}", self.weights())]
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub(crate) fn build(spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
    let reps = ctx.rep_subset(spec)?;
    let experts = reps.iter().map(|&r| ctx.rls_for(r)).collect::<Result<Vec<_>>>()?;
    let (lo, hi) = ctx.problem.reward_range();
    let pad = 3.0 * ctx.problem.noise_sigma;
    Ok(Box::new(Exp4IxPolicy::new(
        display_name(spec, ctx),
        experts,
        reps,
        ctx.problem.n_arms,
        ctx.horizon,
        (lo - pad, hi + pad),
        ctx.delta,
        ctx.schedule_for(spec),
        ctx.seed,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Context;

    #[test]
    fn gamma_plug_in() {
        let g = exp4ix_gamma(2, 100, 5);
        assert!((g - (2.0 * 2f64.ln() / 500.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_expert_is_followed() {
        let s = RlsState::new(1, 1.0, 1.0, 1.0, 0.3).unwrap();
        let mut p = Exp4IxPolicy::new("x", vec![s], vec![0], 3, 100, (-1.0, 1.0), 0.01, ConfidenceSchedule::Fixed, 0).unwrap();
        let feats = vec![vec![0.1, 0.9, 0.3]];
        for t in 1..50 {
            let step = Step { t, context: Context::Index(0), features: &feats };
            let d = p.select(&step);
            let expected = argmax_ucb(&p.experts[0], &feats[0], p.experts[0].beta_unchecked(0.01));
            assert_eq!(d.arm, expected);
            p.update(&step, d.arm, 0.5);
        }
    }

    #[test]
    fn identical_recommendations_are_certain() {
        let s = RlsState::new(1, 1.0, 1.0, 1.0, 0.3).unwrap();
        let mut p = Exp4IxPolicy::new("x", vec![s.clone(), s], vec![0, 1], 2, 100, (-1.0, 1.0), 0.01, ConfidenceSchedule::Fixed, 0).unwrap();
        let feats = vec![vec![0.2, 1.0], vec![0.1, 0.5]];
        let step = Step { t: 1, context: Context::Index(0), features: &feats };
        assert_eq!(p.select(&step).arm, 1);
        assert_eq!(p.arm_probs(), &[0.0, 1.0]);
    }
}
