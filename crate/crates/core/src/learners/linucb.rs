use std::any::Any;

use super::rls::{argmax_ucb, RlsState};
use super::{display_name, AlgorithmSpec, BuildContext, ConfidenceSchedule, Decision, Policy, Step};
use crate::error::{Error, Result};

/// LinUCB/OFUL on a single representation.
#[derive(Debug, Clone)]
pub struct LinUcbPolicy {
    name: String,
    pub rep: usize,
    pub state: RlsState,
    pub delta: f64,
    pub schedule: ConfidenceSchedule,
}

impl LinUcbPolicy {
    pub fn new(name: impl Into<String>, rep: usize, state: RlsState, delta: f64, schedule: ConfidenceSchedule) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta = {delta} outside (0, 1)")));
        }
        Ok(LinUcbPolicy {
            name: name.into(),
            rep,
            state,
            delta,
            schedule,
        })
    }
}

impl Policy for LinUcbPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, step: &Step) -> Decision {
        let beta = self.state.beta_unchecked(self.schedule.delta_at(self.delta, step.t));
        Decision {
            arm: argmax_ucb(&self.state, &step.features[self.rep], beta),
            selecting_rep: None,
        }
    }

    fn update(&mut self, step: &Step, arm: usize, reward: f64) {
        let d = self.state.dim;
        self.state
            .update(&step.features[self.rep][arm * d..(arm + 1) * d], reward);
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub(crate) fn build(spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
    let rep = ctx.single_rep(spec)?;
    let state = ctx.rls_for(rep)?;
    Ok(Box::new(LinUcbPolicy::new(
        display_name(spec, ctx),
        rep,
        state,
        ctx.delta,
        ctx.schedule_for(spec),
    )?))
}
