use std::any::Any;

use super::rls::{argmax_ucb, RlsState};
use super::{display_name, AlgorithmSpec, BuildContext, ConfidenceSchedule, Decision, Policy, Step};
use crate::error::{Error, Result};

/// Regret oracle `u = 4 beta(delta) sqrt(t_i log det V_i)` of a base selected `t_i` times.
pub fn regret_oracle(state: &RlsState, count: u64, delta: f64) -> f64 {
    4.0 * state.beta_unchecked(delta) * (count as f64 * state.log_det.max(0.0)).sqrt()
}

/// Regret balancing: play the base whose oracle value is smallest.
#[derive(Debug, Clone)]
pub struct RegBalPolicy {
    name: String,
    pub bases: Vec<RlsState>,
    pub rep_ids: Vec<usize>,
    pub counts: Vec<u64>,
    pub cum_reward: Vec<f64>,
    pub delta: f64,
    pub schedule: ConfidenceSchedule,
    pub shared_updates: bool,
    pub current: usize,
}

impl RegBalPolicy {
    pub fn new(
        name: impl Into<String>,
        bases: Vec<RlsState>,
        rep_ids: Vec<usize>,
        delta: f64,
        schedule: ConfidenceSchedule,
        shared_updates: bool,
    ) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Config("regbal needs at least one base".into()));
        }
        let m = bases.len();
        Ok(RegBalPolicy {
            name: name.into(),
            bases,
            rep_ids,
            counts: vec![0; m],
            cum_reward: vec![0.0; m],
            delta,
            schedule,
            shared_updates,
            current: 0,
        })
    }

    pub fn oracle_values(&self, t: u64) -> Vec<f64> {
        let delta = self.schedule.delta_at(self.delta, t);
        self.bases
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| regret_oracle(s, c, delta))
            .collect()
    }
}

impl Policy for RegBalPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, step: &Step) -> Decision {
        let u = self.oracle_values(step.t);
        let mut best = 0;
        for (i, v) in u.iter().enumerate() {
            if *v < u[best] {
                best = i;
            }
        }
        self.current = best;
        let s = &self.bases[best];
        let delta = self.schedule.delta_at(self.delta, step.t);
        Decision {
            arm: argmax_ucb(s, &step.features[self.rep_ids[best]], s.beta_unchecked(delta)),
            selecting_rep: Some(self.rep_ids[best]),
        }
    }

    fn update(&mut self, step: &Step, arm: usize, reward: f64) {
        self.counts[self.current] += 1;
        self.cum_reward[self.current] += reward;
        for (i, (s, &r)) in self.bases.iter_mut().zip(&self.rep_ids).enumerate() {
            if self.shared_updates || i == self.current {
                let d = s.dim;
                s.update(&step.features[r][arm * d..(arm + 1) * d], reward);
            }
        }
    }

    fn report(&self) -> Vec<String> {
        vec![format!("selection counts {:?}", self.counts)]
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub(crate) fn build(spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
    let reps = ctx.rep_subset(spec)?;
    let bases = reps.iter().map(|&r| ctx.rls_for(r)).collect::<Result<Vec<_>>>()?;
    Ok(Box::new(RegBalPolicy::new(
        display_name(spec, ctx),
        bases,
        reps,
        ctx.delta,
        ctx.schedule_for(spec),
        spec.shared_updates.unwrap_or(ctx.shared_updates),
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Context;

    #[test]
    fn identical_bases_round_robin() {
        let s = RlsState::new(2, 1.0, 1.0, 1.0, 0.3).unwrap();
        let mut p = RegBalPolicy::new("r", vec![s.clone(), s.clone(), s], vec![0, 1, 2], 0.01, ConfidenceSchedule::Fixed, false).unwrap();
        let block = vec![1.0, 0.0, 0.0, 1.0];
        let feats = vec![block.clone(), block.clone(), block];
        let mut seen = Vec::new();
        for t in 1..=6 {
            let step = Step { t, context: Context::Index(0), features: &feats };
            let d = p.select(&step);
            seen.push(d.selecting_rep.unwrap());
            p.update(&step, d.arm, 1.0);
        }
        assert_eq!(seen, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn zero_feature_base_always_selected() {
        let s = RlsState::new(2, 1.0, 1.0, 1.0, 0.3).unwrap();
        let mut p = RegBalPolicy::new("r", vec![s.clone(), s], vec![0, 1], 0.01, ConfidenceSchedule::Fixed, false).unwrap();
        let feats = vec![vec![0.0; 4], vec![1.0, 0.0, 0.0, 1.0]];
        for t in 1..=100 {
            let step = Step { t, context: Context::Index(0), features: &feats };
            let d = p.select(&step);
            assert_eq!(d.selecting_rep, Some(0));
            p.update(&step, d.arm, 1.0);
        }
        assert_eq!(p.oracle_values(101)[0], 0.0);
    }
}
