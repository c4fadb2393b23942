//! Generalized likelihood ratio stopping rule for best-arm identification.
//!
//! The test stops once, for every positive-probability context `x` and every
//! non-greedy arm `a`, the estimated gap in `V^{-1}`-norm units exceeds the
//! confidence radius:
//!
//! `min_{x, a != a*_x} (phi(x,a*) - phi(x,a))^T theta / ||phi(x,a*) - phi(x,a)||_{V^{-1}} > beta`.

use std::any::Any;

use super::rls::{argmax_ucb, RlsState};
use super::{display_name, AlgorithmSpec, BuildContext, ConfidenceSchedule, Decision, Policy, Step};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::problem::{Context, FiniteRepresentation, EXACT_TOL};

/// GLR statistic and the greedy arm of every context.
///
/// A context whose greedy arm is not unique (within `EXACT_TOL`) makes the
/// statistic `-inf`; a pair with identical features contributes ratio 0.
pub fn glr_statistic(state: &RlsState, rep: &FiniteRepresentation, probs: &[f64]) -> (f64, Vec<usize>) {
    let d = rep.dim;
    let mut stat = f64::INFINITY;
    let mut recommended = Vec::with_capacity(rep.n_contexts);
    let mut diff = vec![0.0; d];
    for x in 0..rep.n_contexts {
        let values: Vec<f64> = (0..rep.n_arms)
            .map(|a| dot(rep.feature(x, a), &state.theta))
            .collect();
        let best = super::argmax(values.iter().copied());
        recommended.push(best);
        if probs[x] <= 0.0 {
            continue;
        }
        let tied = values
            .iter()
            .enumerate()
            .any(|(a, v)| a != best && (values[best] - v).abs() <= EXACT_TOL);
        if tied {
            stat = f64::NEG_INFINITY;
            continue;
        }
        let star = rep.feature(x, best);
        for a in 0..rep.n_arms {
            if a == best {
                continue;
            }
            for ((o, s), f) in diff.iter_mut().zip(star).zip(rep.feature(x, a)) {
                *o = s - f;
            }
            let den = state.weighted_norm(&diff);
            let ratio = if den == 0.0 {
                0.0
            } else {
                (values[best] - values[a]) / den
            };
            stat = stat.min(ratio);
        }
    }
    (stat, recommended)
}

/// Stopping decision against a radius `beta`, with the recommended arms.
pub fn glr_stop(state: &RlsState, rep: &FiniteRepresentation, probs: &[f64], beta: f64) -> (bool, Vec<usize>) {
    let (stat, rec) = glr_statistic(state, rep, probs);
    (stat > beta, rec)
}

/// LinUCB on one representation until the GLR test stops, then the greedy
/// recommendation of the stopping round is played forever.
#[derive(Debug, Clone)]
pub struct GlrPolicy {
    name: String,
    pub rep: usize,
    pub state: RlsState,
    features: FiniteRepresentation,
    probs: Vec<f64>,
    pub delta: f64,
    pub schedule: ConfidenceSchedule,
    /// Round at which the test stopped.
    pub stopped_at: Option<u64>,
    pub recommendation: Vec<usize>,
}

impl GlrPolicy {
    pub fn new(
        name: impl Into<String>,
        rep: usize,
        state: RlsState,
        features: FiniteRepresentation,
        probs: Vec<f64>,
        delta: f64,
        schedule: ConfidenceSchedule,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta = {delta} outside (0, 1)")));
        }
        Ok(GlrPolicy {
            name: name.into(),
            rep,
            state,
            features,
            probs,
            delta,
            schedule,
            stopped_at: None,
            recommendation: Vec::new(),
        })
    }
}

impl Policy for GlrPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, step: &Step) -> Decision {
        if self.stopped_at.is_some() {
            if let Context::Index(x) = step.context {
                return Decision {
                    arm: self.recommendation[x],
                    selecting_rep: None,
                };
            }
        }
        let beta = self.state.beta_unchecked(self.schedule.delta_at(self.delta, step.t));
        Decision {
            arm: argmax_ucb(&self.state, &step.features[self.rep], beta),
            selecting_rep: None,
        }
    }

    fn update(&mut self, step: &Step, arm: usize, reward: f64) {
        if self.stopped_at.is_some() {
            return;
        }
        let d = self.state.dim;
        self.state
            .update(&step.features[self.rep][arm * d..(arm + 1) * d], reward);
        let beta = self.state.beta_unchecked(self.schedule.delta_at(self.delta, step.t + 1));
        let (stop, rec) = glr_stop(&self.state, &self.features, &self.probs, beta);
        if stop {
            self.stopped_at = Some(step.t);
            self.recommendation = rec;
        }
    }

    fn report(&self) -> Vec<String> {
        match self.stopped_at {
            Some(t) => vec![format!("stopped at round {t}, recommending {:?}", self.recommendation)],
            None => vec!["did not stop".to_string()],
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub(crate) fn build(spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
    let rep = ctx.single_rep(spec)?;
    let probs = ctx
        .problem
        .probs()
        .ok_or_else(|| Error::Config("glr_bai needs a finite problem".into()))?
        .to_vec();
    let features = ctx.problem.finite_rep(rep)?.clone();
    Ok(Box::new(GlrPolicy::new(
        display_name(spec, ctx),
        rep,
        ctx.rls_for(rep)?,
        features,
        probs,
        ctx.delta,
        ctx.schedule_for(spec),
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_context() -> FiniteRepresentation {
        FiniteRepresentation::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0], "g").unwrap()
    }

    #[test]
    fn closed_form_two_vectors() {
        let mut s = RlsState::new(2, 1.0, 1.0, 1.0, 0.3).unwrap();
        s.set_theta(&[1.0, 0.0]);
        let (stat, rec) = glr_statistic(&s, &single_context(), &[1.0]);
        assert!((stat - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(rec, vec![0]);
        assert!(glr_stop(&s, &single_context(), &[1.0], 0.5).0);
        assert!(!glr_stop(&s, &single_context(), &[1.0], f64::INFINITY).0);
    }

    #[test]
    fn zero_theta_never_stops() {
        let s = RlsState::new(2, 1.0, 1.0, 1.0, 0.3).unwrap();
        assert!(!glr_stop(&s, &single_context(), &[1.0], 0.0).0);
    }

    #[test]
    fn identical_features_give_zero_ratio() {
        let rep = FiniteRepresentation::new(1, 3, 1, vec![1.0, 1.0, 0.0], vec![1.0], "i").unwrap();
        let mut s = RlsState::new(1, 1.0, 1.0, 1.0, 0.3).unwrap();
        s.set_theta(&[1.0]);
        // arms 0 and 1 tie: no unique greedy arm
        assert_eq!(glr_statistic(&s, &rep, &[1.0]).0, f64::NEG_INFINITY);
        let rep = FiniteRepresentation::new(1, 2, 1, vec![1.0, 0.0], vec![1.0], "j").unwrap();
        assert!(glr_statistic(&s, &rep, &[1.0]).0 > 0.0);
    }
}
