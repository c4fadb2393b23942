//! LEADER and its eliminating variant E-LEADER.
//!
//! Every representation keeps its own ridge statistics and all of them absorb
//! every sample. At each round the arm maximizing the smallest UCB across the
//! active representations is played, each UCB using confidence `delta / M`.
//!
//! With elimination enabled, after each update a representation `i` stays
//! active only if its constrained mean squared error satisfies
//! `E_i <= min_j (E_j + alpha_j)`, the minimum ranging over all `M`
//! representations.

use std::any::Any;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rls::RlsState;
use super::{display_name, AlgorithmSpec, BuildContext, ConfidenceSchedule, Decision, Policy, Step};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, rank_threshold, sym_eigen};

/// Bisection budget for the norm-constrained least-squares minimizer.
pub const BISECTION_ITERS: usize = 50;
pub const BISECTION_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationConfig {
    /// Evaluate the test at the ridge estimate instead of the constrained minimizer.
    pub plain_rls: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeaderState {
    pub states: Vec<RlsState>,
    /// Problem index of each state.
    pub rep_ids: Vec<usize>,
    /// Positions into `states`, ascending.
    pub active: Vec<usize>,
    pub delta: f64,
    /// `M` in the per-representation confidence `delta / M`.
    pub confidence_reps: usize,
    pub schedule: ConfidenceSchedule,
    pub elimination: Option<EliminationConfig>,
    /// Last evaluated `(lower, upper)` bounds on each constrained MSE (equal when exact).
    pub mse_cache: Vec<(f64, f64)>,
    /// `(round, position)` of every elimination.
    pub eliminations: Vec<(u64, usize)>,
    /// Rounds where the test would have emptied the active set.
    pub anomalies: u64,
}

impl LeaderState {
    pub fn new(
        states: Vec<RlsState>,
        rep_ids: Vec<usize>,
        delta: f64,
        schedule: ConfidenceSchedule,
        elimination: Option<EliminationConfig>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Config("LEADER needs at least one representation".into()));
        }
        if states.len() != rep_ids.len() {
            return Err(Error::arg("one representation id per state"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta = {delta} outside (0, 1)")));
        }
        let m = states.len();
        Ok(LeaderState {
            states,
            rep_ids,
            active: (0..m).collect(),
            delta,
            confidence_reps: m,
            schedule,
            elimination,
            mse_cache: vec![(0.0, 0.0); m],
            eliminations: Vec::new(),
            anomalies: 0,
        })
    }

    /// A LEADER (no elimination) over the given positions, sharing this
    /// state's statistics and per-representation confidence level.
    pub fn restricted(&self, keep: &[usize]) -> LeaderState {
        LeaderState {
            states: keep.iter().map(|&i| self.states[i].clone()).collect(),
            rep_ids: keep.iter().map(|&i| self.rep_ids[i]).collect(),
            active: (0..keep.len()).collect(),
            delta: self.delta,
            confidence_reps: self.confidence_reps,
            schedule: self.schedule,
            elimination: None,
            mse_cache: vec![(0.0, 0.0); keep.len()],
            eliminations: Vec::new(),
            anomalies: 0,
        }
    }

    /// Per-representation confidence at round `t`.
    pub fn rep_delta(&self, t: u64) -> f64 {
        self.schedule.delta_at(self.delta, t) / self.confidence_reps as f64
    }

    /// `U_i(a)` for every position `i` (active or not) and arm.
    pub fn ucb_table(&self, blocks: &[&[f64]], t: u64) -> Vec<Vec<f64>> {
        let dl = self.rep_delta(t);
        self.states
            .iter()
            .zip(blocks)
            .map(|(s, block)| {
                let beta = s.beta_unchecked(dl);
                block.chunks(s.dim).map(|phi| s.ucb_with_beta(phi, beta)).collect()
            })
            .collect()
    }

    /// `(arm, position)`: argmax over arms of the minimum UCB over active
    /// positions; lowest index wins ties in both reductions.
    pub fn select(&self, blocks: &[&[f64]], t: u64) -> (usize, usize) {
        let dl = self.rep_delta(t);
        let n_arms = blocks[self.active[0]].len() / self.states[self.active[0]].dim;
        let betas: Vec<f64> = self
            .active
            .iter()
            .map(|&i| self.states[i].beta_unchecked(dl))
            .collect();
        let mut best = (0, self.active[0]);
        let mut best_val = f64::NEG_INFINITY;
        for a in 0..n_arms {
            let mut min_val = f64::INFINITY;
            let mut min_rep = self.active[0];
            for (&i, &beta) in self.active.iter().zip(&betas) {
                let s = &self.states[i];
                let u = s.ucb_with_beta(&blocks[i][a * s.dim..(a + 1) * s.dim], beta);
                if u < min_val {
                    min_val = u;
                    min_rep = i;
                }
            }
            if min_val > best_val {
                best_val = min_val;
                best = (a, min_rep);
            }
        }
        best
    }

    /// Feeds the played feature of every representation (active or not) and,
    /// when enabled, runs the elimination test.
    pub fn update_all(&mut self, blocks: &[&[f64]], arm: usize, reward: f64, t: u64) {
        for (s, block) in self.states.iter_mut().zip(blocks) {
            let d = s.dim;
            s.update(&block[arm * d..(arm + 1) * d], reward);
        }
        if self.elimination.is_some() {
            self.eliminate_step(t + 1);
        }
    }

    /// Applies the elimination test defining the active set of round `t`
    /// from the `t - 1` samples absorbed so far.
    pub fn eliminate_step(&mut self, t: u64) {
        let Some(cfg) = self.elimination else { return };
        let n = t.saturating_sub(1);
        if n == 0 || self.active.len() <= 1 && self.states.len() == 1 {
            return;
        }
        let m = self.states.len();
        let alphas: Vec<f64> = self
            .states
            .iter()
            .map(|s| alpha(n, m, s.dim, s.feature_bound, s.param_bound, self.delta))
            .collect();
        let mut bounds: Vec<(f64, f64)> = self
            .states
            .iter()
            .map(|s| mse_bounds(s, cfg.plain_rls))
            .collect();
        let threshold = |b: &[(f64, f64)], pick: fn(&(f64, f64)) -> f64| {
            b.iter()
                .zip(&alphas)
                .map(|(v, a)| pick(v) + a)
                .fold(f64::INFINITY, f64::min)
        };
        let mut t_lo = threshold(&bounds, |b| b.0);
        let mut t_hi = threshold(&bounds, |b| b.1);
        let conclusive = |bounds: &[(f64, f64)], t_lo: f64, t_hi: f64, i: usize| {
            bounds[i].1 <= t_lo || bounds[i].0 > t_hi
        };
        if self
            .active
            .iter()
            .any(|&i| !conclusive(&bounds, t_lo, t_hi, i))
        {
            for (b, s) in bounds.iter_mut().zip(&self.states) {
                if b.0 != b.1 {
                    let v = constrained_mse(s).0;
                    *b = (v, v);
                }
            }
            t_lo = threshold(&bounds, |b| b.0);
            t_hi = t_lo;
        }
        let keep: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&i| bounds[i].1 <= t_lo || !(bounds[i].0 > t_hi))
            .collect();
        self.mse_cache = bounds.clone();
        if keep.is_empty() {
            // the realizable subset should never fail; keep the best fit
            let best = self
                .active
                .iter()
                .copied()
                .min_by(|&a, &b| bounds[a].0.total_cmp(&bounds[b].0))
                .unwrap();
            for &i in &self.active {
                if i != best {
                    self.eliminations.push((t, i));
                }
            }
            self.active = vec![best];
            self.anomalies += 1;
            return;
        }
        for &i in &self.active {
            if !keep.contains(&i) {
                self.eliminations.push((t, i));
            }
        }
        self.active = keep;
    }

    pub fn active_rep_ids(&self) -> Vec<usize> {
        self.active.iter().map(|&i| self.rep_ids[i]).collect()
    }
}

/// Elimination slack
/// `alpha = 20/n * ln(8 M^2 (12 L S n)^d n^3 / delta) + 1/n` with `n = t - 1` samples.
pub fn alpha(n: u64, m: usize, d: usize, l: f64, s: f64, delta: f64) -> f64 {
    let n = n as f64;
    let log_term = 8f64.ln() + 2.0 * (m as f64).ln() + d as f64 * (12.0 * l * s * n).ln()
        + 3.0 * n.ln()
        - delta.ln();
    20.0 / n * log_term + 1.0 / n
}

/// Cheap bounds `(lower, upper)` on the constrained MSE; equal when exact.
fn mse_bounds(s: &RlsState, plain: bool) -> (f64, f64) {
    if plain {
        let v = s.mse(&s.theta);
        return (v, v);
    }
    let d = s.dim;
    let a = DMatrix::from_row_slice(d, d, &s.xtx);
    let n = s.n_samples.max(1) as f64;
    match a.cholesky() {
        Some(chol) => {
            let theta0 = chol.solve(&DVector::from_column_slice(&s.moment));
            let theta0: Vec<f64> = theta0.iter().copied().collect();
            let r = norm(&theta0);
            if r <= s.param_bound {
                let v = s.mse(&theta0);
                (v, v)
            } else {
                let lower = ((s.sq_sum - dot(&s.moment, &theta0)) / n).max(0.0);
                let scaled: Vec<f64> = theta0.iter().map(|v| v * s.param_bound / r).collect();
                (lower, s.mse(&scaled))
            }
        }
        None => {
            let r = norm(&s.theta);
            let scale = if r > s.param_bound { s.param_bound / r } else { 1.0 };
            let feasible: Vec<f64> = s.theta.iter().map(|v| v * scale).collect();
            (0.0, s.mse(&feasible))
        }
    }
}

/// Minimizer of the mean squared error over `||theta|| <= S` and its value.
///
/// Uses the eigen-decomposition of `A = sum phi phi^T`: the minimum-norm
/// unconstrained solution when feasible, otherwise bisection on the ridge
/// multiplier `nu` in `theta(nu) = (A + nu I)^{-1} b` until `||theta(nu)|| <= S`.
pub fn constrained_mse(s: &RlsState) -> (f64, Vec<f64>) {
    let d = s.dim;
    let a = DMatrix::from_row_slice(d, d, &s.xtx);
    let eig = sym_eigen(&a);
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    let tol = rank_threshold(lambda_max);
    let b = DVector::from_column_slice(&s.moment);
    let bt: Vec<f64> = (0..d)
        .map(|i| {
            if eig.values[i] > tol {
                eig.vectors.column(i).dot(&b)
            } else {
                0.0
            }
        })
        .collect();
    let theta_of = |nu: f64| -> Vec<f64> {
        let mut th = vec![0.0; d];
        for i in 0..d {
            if bt[i] == 0.0 {
                continue;
            }
            let c = bt[i] / (eig.values[i] + nu);
            for (j, t) in th.iter_mut().enumerate() {
                *t += c * eig.vectors[(j, i)];
            }
        }
        th
    };
    let norm_of = |nu: f64| -> f64 {
        bt.iter()
            .zip(&eig.values)
            .map(|(c, l)| if *c == 0.0 { 0.0 } else { (c / (l + nu)).powi(2) })
            .sum::<f64>()
            .sqrt()
    };
    let bound = s.param_bound;
    let theta = if norm_of(0.0) <= bound {
        theta_of(0.0)
    } else {
        let (mut lo, mut hi) = (0.0, norm(&s.moment) / bound);
        for _ in 0..BISECTION_ITERS {
            if hi - lo <= BISECTION_GAP * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if norm_of(mid) > bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        theta_of(hi)
    };
    (s.mse(&theta), theta)
}

/// LEADER / E-LEADER as a [`Policy`].
#[derive(Debug, Clone)]
pub struct LeaderPolicy {
    name: String,
    pub leader: LeaderState,
}

impl LeaderPolicy {
    pub fn new(name: impl Into<String>, leader: LeaderState) -> Self {
        LeaderPolicy {
            name: name.into(),
            leader,
        }
    }

    fn blocks<'a>(&self, step: &'a Step) -> Vec<&'a [f64]> {
        self.leader
            .rep_ids
            .iter()
            .map(|&r| step.features[r].as_slice())
            .collect()
    }
}

impl Policy for LeaderPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, step: &Step) -> Decision {
        let blocks = self.blocks(step);
        let (arm, pos) = self.leader.select(&blocks, step.t);
        Decision {
            arm,
            selecting_rep: Some(self.leader.rep_ids[pos]),
        }
    }

    fn update(&mut self, step: &Step, arm: usize, reward: f64) {
        let blocks = self.blocks(step);
        self.leader.update_all(&blocks, arm, reward, step.t);
    }

    fn active_set_size(&self) -> Option<usize> {
        self.leader.elimination.map(|_| self.leader.active.len())
    }

    fn report(&self) -> Vec<String> {
        let mut out = Vec::new();
        for &(t, i) in &self.leader.eliminations {
            out.push(format!("eliminated rep {} at round {t}", self.leader.rep_ids[i]));
        }
        if self.leader.anomalies > 0 {
            out.push(format!(
                "{} rounds would have emptied the active set",
                self.leader.anomalies
            ));
        }
        out
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

fn build_with(spec: &AlgorithmSpec, ctx: &BuildContext, elimination: Option<EliminationConfig>) -> Result<Box<dyn Policy>> {
    let reps = ctx.rep_subset(spec)?;
    let states = reps.iter().map(|&r| ctx.rls_for(r)).collect::<Result<Vec<_>>>()?;
    let leader = LeaderState::new(states, reps, ctx.delta, ctx.schedule_for(spec), elimination)?;
    Ok(Box::new(LeaderPolicy::new(display_name(spec, ctx), leader)))
}

pub(crate) fn build_leader(spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
    build_with(spec, ctx, None)
}

pub(crate) fn build_eleader(spec: &AlgorithmSpec, ctx: &BuildContext) -> Result<Box<dyn Policy>> {
    let cfg = EliminationConfig {
        plain_rls: spec.plain_rls.unwrap_or(false),
    };
    build_with(spec, ctx, Some(cfg))
}
