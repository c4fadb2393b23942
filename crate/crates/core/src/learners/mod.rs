//! Step-wise learners behind a common [`Policy`] trait, selected by name
//! through a [`Registry`].
//!
//! A run feeds every policy the same [`Step`]: the context and, for every
//! representation of the problem, the `K x d` block of arm features.

use std::any::Any;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Context, ContextualProblem};

pub mod exp4ix;
pub mod glr;
pub mod leader;
pub mod linucb;
pub mod regbal;
pub mod rls;

pub use exp4ix::Exp4IxPolicy;
pub use glr::{glr_statistic, glr_stop, GlrPolicy};
pub use leader::{alpha, EliminationConfig, LeaderPolicy, LeaderState};
pub use linucb::LinUcbPolicy;
pub use regbal::RegBalPolicy;
pub use rls::{linucb_select, RlsState};

/// One interaction round as seen by a policy.
#[derive(Debug, Clone, Copy)]
pub struct Step<'a> {
    /// 1-based round index.
    pub t: u64,
    pub context: Context,
    /// Per representation of the problem, the row-major `K x d` arm features.
    pub features: &'a [Vec<f64>],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub arm: usize,
    /// Representation responsible for the choice, when the policy has one.
    pub selecting_rep: Option<usize>,
}

pub trait Policy: Send {
    fn name(&self) -> &str;
    fn select(&mut self, step: &Step) -> Decision;
    fn update(&mut self, step: &Step, arm: usize, reward: f64);
    /// Number of representations still in play, for eliminating policies.
    fn active_set_size(&self) -> Option<usize> {
        None
    }
    /// Human-readable end-of-run diagnostics.
    fn report(&self) -> Vec<String> {
        Vec::new()
    }
    fn as_any(&self) -> &dyn Any;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceSchedule {
    /// `delta_t = delta`.
    #[default]
    Fixed,
    /// `delta_t = min(delta, t^-3)`.
    Cubic,
}

impl ConfidenceSchedule {
    #[inline]
    pub fn delta_at(&self, delta: f64, t: u64) -> f64 {
        match self {
            ConfidenceSchedule::Fixed => delta,
            ConfidenceSchedule::Cubic => delta.min((t as f64).powi(-3)),
        }
    }
}

/// Algorithm entry of an experiment configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Registry name.
    pub name: String,
    /// Display name in outputs; defaults to one derived from `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Single representation (`linucb`, `glr_bai`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep: Option<usize>,
    /// Representation subset for multi-representation policies (default: all).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<Vec<usize>>,
    /// Update every base, not only the selected one (`regbal`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_updates: Option<bool>,
    /// Use ridge estimates instead of norm-constrained minimizers in the elimination test (`eleader`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plain_rls: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ConfidenceSchedule>,
}

impl AlgorithmSpec {
    pub fn named(name: &str) -> Self {
        AlgorithmSpec {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn with_rep(mut self, rep: usize) -> Self {
        self.rep = Some(rep);
        self
    }

    pub fn with_reps(mut self, reps: Vec<usize>) -> Self {
        self.reps = Some(reps);
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }
}

/// Experiment-level parameters shared by all policies of a run.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext<'a> {
    pub problem: &'a ContextualProblem,
    pub delta: f64,
    pub lambda: f64,
    pub horizon: u64,
    /// Seed for policies with internal randomization.
    pub seed: u64,
    pub schedule: ConfidenceSchedule,
    /// Default for `shared_updates` when an algorithm entry leaves it unset.
    pub shared_updates: bool,
}

impl BuildContext<'_> {
    pub(crate) fn rls_for(&self, rep: usize) -> Result<RlsState> {
        let r = self
            .problem
            .representations
            .get(rep)
            .ok_or_else(|| Error::Config(format!("representation {rep} does not exist")))?;
        RlsState::new(
            r.dim(),
            self.lambda,
            r.feature_bound(),
            r.param_bound(),
            self.problem.noise_sigma,
        )
    }

    pub(crate) fn rep_subset(&self, spec: &AlgorithmSpec) -> Result<Vec<usize>> {
        let m = self.problem.representations.len();
        let reps = spec.reps.clone().unwrap_or_else(|| (0..m).collect());
        if reps.is_empty() {
            return Err(Error::Config(format!("'{}' needs at least one representation", spec.name)));
        }
        if let Some(&bad) = reps.iter().find(|&&r| r >= m) {
            return Err(Error::Config(format!("representation {bad} does not exist")));
        }
        Ok(reps)
    }

    pub(crate) fn single_rep(&self, spec: &AlgorithmSpec) -> Result<usize> {
        spec.rep
            .ok_or_else(|| Error::Config(format!("'{}' needs a `rep` index", spec.name)))
    }

    pub(crate) fn schedule_for(&self, spec: &AlgorithmSpec) -> ConfidenceSchedule {
        spec.schedule.unwrap_or(self.schedule)
    }
}

pub type Constructor = fn(&AlgorithmSpec, &BuildContext) -> Result<Box<dyn Policy>>;

struct Entry {
    name: &'static str,
    description: &'static str,
    build: Constructor,
}

/// Name-to-constructor table of the available policies.
pub struct Registry {
    entries: Vec<Entry>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Registry::empty();
        r.register("linucb", "LinUCB/OFUL on one representation (`rep`)", linucb::build);
        r.register("leader", "LEADER: argmax over arms of the minimum UCB across representations", leader::build_leader);
        r.register("eleader", "E-LEADER: LEADER with MSE-based elimination of misspecified representations", leader::build_eleader);
        r.register("glr_bai", "LinUCB on `rep` until the GLR test stops, then commits to the recommended arms", glr::build);
        r.register("exp4ix", "EXP4.IX over per-representation LinUCB experts", exp4ix::build);
        r.register("regbal", "Regret balancing over per-representation LinUCB bases", regbal::build);
        r
    }

    /// Adds or replaces an entry.
    pub fn register(&mut self, name: &'static str, description: &'static str, build: Constructor) {
        self.entries.retain(|e| e.name != name);
        self.entries.push(Entry {
            name,
            description,
            build,
        });
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|e| (e.name, e.description)).collect()
    }

    pub fn build(&self, spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
        let entry = self
            .entries
            .iter()
            .find(|e| e.name == spec.name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown algorithm '{}' (known: {})",
                    spec.name,
                    self.names().join(", ")
                ))
            })?;
        (entry.build)(spec, ctx)
    }
}

/// Label for output files: explicit label, else `name` plus the representation.
pub(crate) fn display_name(spec: &AlgorithmSpec, ctx: &BuildContext) -> String {
    if let Some(l) = &spec.label {
        return l.clone();
    }
    match spec.rep.and_then(|r| ctx.problem.representations.get(r)) {
        Some(rep) => format!("{}:{}", spec.name, rep.label()),
        None => spec.name.clone(),
    }
}

/// Index of the largest value, lowest index on ties.
#[inline]
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
