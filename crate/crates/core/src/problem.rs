//! Contextual problems, linear representations and exact gap structure.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Absolute tolerance for exact-arithmetic comparisons (ties, symmetry).
pub const EXACT_TOL: f64 = 1e-12;
/// Absolute tolerance for accumulated sums (realizability checks).
pub const SUM_TOL: f64 = 1e-9;

/// A context drawn from the problem's context distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Context {
    /// Index into a finite context set.
    Index(usize),
    /// A point of a continuous context space.
    Point([f64; 2]),
}

impl Context {
    pub fn index(&self) -> Option<usize> {
        match self {
            Context::Index(i) => Some(*i),
            Context::Point(_) => None,
        }
    }
}

/// Feature tensor `N x K x d` with its parameter, for a finite context set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteRepresentation {
    pub n_contexts: usize,
    pub n_arms: usize,
    pub dim: usize,
    /// Row-major `[x][a][j]`.
    pub features: Vec<f64>,
    pub param: Vec<f64>,
    pub feature_bound: f64,
    pub param_bound: f64,
    /// Optional misspecification table `f(x, a)`, row-major `[x][a]`.
    pub misspec: Option<Vec<f64>>,
    pub label: String,
}

impl FiniteRepresentation {
    /// Builds a representation with tight bounds: `L = max ||phi||`, `S = max(1, ||theta||)`.
    pub fn new(
        n_contexts: usize,
        n_arms: usize,
        dim: usize,
        features: Vec<f64>,
        param: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if n_contexts == 0 || n_arms == 0 || dim == 0 {
            return Err(Error::arg("representation sizes must be positive"));
        }
        if features.len() != n_contexts * n_arms * dim {
            return Err(Error::arg(format!(
                "feature tensor has {} entries, expected {}x{}x{}",
                features.len(),
                n_contexts,
                n_arms,
                dim
            )));
        }
        if param.len() != dim {
            return Err(Error::arg(format!(
                "parameter has length {}, expected {dim}",
                param.len()
            )));
        }
        let mut rep = FiniteRepresentation {
            n_contexts,
            n_arms,
            dim,
            features,
            param,
            feature_bound: 1.0,
            param_bound: 1.0,
            misspec: None,
            label: label.into(),
        };
        rep.refresh_bounds();
        Ok(rep)
    }

    /// Recomputes `L` and `S` from the current tensor and parameter.
    pub fn refresh_bounds(&mut self) {
        let max_norm = self
            .features
            .chunks(self.dim)
            .map(norm)
            .fold(0.0f64, f64::max);
        self.feature_bound = if max_norm > 0.0 { max_norm } else { 1.0 };
        self.param_bound = norm(&self.param).max(1.0);
    }

    #[inline]
    pub fn feature(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_arms + a) * self.dim;
        &self.features[start..start + self.dim]
    }

    #[inline]
    pub fn feature_mut(&mut self, x: usize, a: usize) -> &mut [f64] {
        let start = (x * self.n_arms + a) * self.dim;
        &mut self.features[start..start + self.dim]
    }

    /// All arm features of context `x` as a contiguous `K x d` block.
    #[inline]
    pub fn context_block(&self, x: usize) -> &[f64] {
        let len = self.n_arms * self.dim;
        &self.features[x * len..(x + 1) * len]
    }

    pub fn misspec_at(&self, x: usize, a: usize) -> f64 {
        self.misspec
            .as_ref()
            .map_or(0.0, |f| f[x * self.n_arms + a])
    }

    /// `phi(x,a)^T theta + f(x,a)`.
    pub fn predicted_reward(&self, x: usize, a: usize) -> f64 {
        dot(self.feature(x, a), &self.param) + self.misspec_at(x, a)
    }

    /// Sup-norm of the misspecification table (0 when realizable).
    pub fn misspecification_level(&self) -> f64 {
        self.misspec
            .as_ref()
            .map_or(0.0, |f| f.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn is_realizable(&self) -> bool {
        self.misspecification_level() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.n_contexts * self.n_arms * self.dim
            || self.param.len() != self.dim
        {
            return Err(Error::Malformed(format!(
                "representation '{}' has inconsistent shapes",
                self.label
            )));
        }
        if let Some(f) = &self.misspec {
            if f.len() != self.n_contexts * self.n_arms {
                return Err(Error::Malformed(format!(
                    "misspecification table of '{}' has wrong shape",
                    self.label
                )));
            }
        }
        if !(self.feature_bound > 0.0) || self.param_bound < 1.0 {
            return Err(Error::Malformed(format!(
                "representation '{}' needs L > 0 and S >= 1",
                self.label
            )));
        }
        for chunk in self.features.chunks(self.dim) {
            if norm(chunk) > self.feature_bound + EXACT_TOL {
                return Err(Error::Malformed(format!(
                    "feature norm exceeds L = {} in '{}'",
                    self.feature_bound, self.label
                )));
            }
        }
        if norm(&self.param) > self.param_bound + EXACT_TOL {
            return Err(Error::Malformed(format!(
                "parameter norm exceeds S = {} in '{}'",
                self.param_bound, self.label
            )));
        }
        Ok(())
    }
}

/// Named feature maps for the continuous half-disc problem.
///
/// Arms are the vectors `[0,0], [0,1], [1,0], [1,1]` in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMap {
    /// `[x1 a1, x2 a2]`.
    HalfDiscNatural,
    /// `[x1 a1 - x1, x2 a2 - x2, x1 + x2]`.
    HalfDiscLifted,
}

pub const HALF_DISC_ARMS: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::HalfDiscNatural => 2,
            FeatureMap::HalfDiscLifted => 3,
        }
    }

    pub fn n_arms(&self) -> usize {
        HALF_DISC_ARMS.len()
    }

    /// Upper bound on the feature norm over the unit disc.
    pub fn feature_bound(&self) -> f64 {
        match self {
            FeatureMap::HalfDiscNatural => 1.0,
            FeatureMap::HalfDiscLifted => 3f64.sqrt(),
        }
    }

    pub fn write(&self, x: [f64; 2], arm: usize, out: &mut [f64]) {
        let a = HALF_DISC_ARMS[arm];
        match self {
            FeatureMap::HalfDiscNatural => {
                out[0] = x[0] * a[0];
                out[1] = x[1] * a[1];
            }
            FeatureMap::HalfDiscLifted => {
                out[0] = x[0] * a[0] - x[0];
                out[1] = x[1] * a[1] - x[1];
                out[2] = x[0] + x[1];
            }
        }
    }
}

/// A representation defined by a named feature map over a continuous context space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRepresentation {
    pub map: FeatureMap,
    pub param: Vec<f64>,
    pub feature_bound: f64,
    pub param_bound: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Representation {
    Finite(FiniteRepresentation),
    Map(MapRepresentation),
}

impl From<FiniteRepresentation> for Representation {
    fn from(r: FiniteRepresentation) -> Self {
        Representation::Finite(r)
    }
}

impl Representation {
    pub fn dim(&self) -> usize {
        match self {
            Representation::Finite(r) => r.dim,
            Representation::Map(r) => r.map.dim(),
        }
    }

    pub fn param(&self) -> &[f64] {
        match self {
            Representation::Finite(r) => &r.param,
            Representation::Map(r) => &r.param,
        }
    }

    pub fn feature_bound(&self) -> f64 {
        match self {
            Representation::Finite(r) => r.feature_bound,
            Representation::Map(r) => r.feature_bound,
        }
    }

    pub fn param_bound(&self) -> f64 {
        match self {
            Representation::Finite(r) => r.param_bound,
            Representation::Map(r) => r.param_bound,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Representation::Finite(r) => &r.label,
            Representation::Map(r) => &r.label,
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteRepresentation> {
        match self {
            Representation::Finite(r) => Some(r),
            Representation::Map(_) => None,
        }
    }

    pub fn misspecification_level(&self) -> f64 {
        match self {
            Representation::Finite(r) => r.misspecification_level(),
            Representation::Map(_) => 0.0,
        }
    }

    /// Writes the feature vector of `(context, arm)` into `out` (length `dim`).
    pub fn write_feature(&self, context: Context, arm: usize, out: &mut [f64]) -> Result<()> {
        match (self, context) {
            (Representation::Finite(r), Context::Index(x)) => {
                if x >= r.n_contexts || arm >= r.n_arms {
                    return Err(Error::arg(format!("({x}, {arm}) out of range")));
                }
                out.copy_from_slice(r.feature(x, arm));
                Ok(())
            }
            (Representation::Map(r), Context::Point(p)) => {
                if arm >= r.map.n_arms() {
                    return Err(Error::arg(format!("arm {arm} out of range")));
                }
                r.map.write(p, arm, out);
                Ok(())
            }
            _ => Err(Error::arg("context kind does not match representation")),
        }
    }

    /// Writes the `K x d` feature block for `context` into `out`.
    pub fn write_block(&self, context: Context, out: &mut [f64]) -> Result<()> {
        match (self, context) {
            (Representation::Finite(r), Context::Index(x)) => {
                if x >= r.n_contexts {
                    return Err(Error::arg(format!("context {x} out of range")));
                }
                out.copy_from_slice(r.context_block(x));
                Ok(())
            }
            (Representation::Map(r), Context::Point(p)) => {
                let d = r.map.dim();
                for a in 0..r.map.n_arms() {
                    r.map.write(p, a, &mut out[a * d..(a + 1) * d]);
                }
                Ok(())
            }
            _ => Err(Error::arg("context kind does not match representation")),
        }
    }
}

/// Samplers for continuous context spaces, referenced by name so problems stay serializable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Uniform over `{x in R^2 : ||x|| <= 1, x2 <= 0}`.
    HalfDisc,
}

impl SamplerSpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match self {
            SamplerSpec::HalfDisc => loop {
                let x1: f64 = rng.random_range(-1.0..1.0);
                let x2: f64 = -rng.random::<f64>();
                if x1 * x1 + x2 * x2 <= 1.0 {
                    return [x1, x2];
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContextSpace {
    Finite { probs: Vec<f64> },
    Continuous { sampler: SamplerSpec, mc_samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RewardModel {
    /// Row-major `N x K` mean-reward table.
    Table(Vec<f64>),
    /// `mu(x, a) = x1 a1 + x2 a2` with the half-disc arm vectors.
    HalfDiscSelect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualProblem {
    pub label: String,
    pub contexts: ContextSpace,
    pub n_arms: usize,
    pub reward: RewardModel,
    pub noise_sigma: f64,
    pub representations: Vec<Representation>,
    /// Free-form provenance notes (construction choices, groupings, measured misspecification).
    pub notes: Vec<String>,
}

/// Exact gap structure of a finite problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapProfile {
    /// Row-major `N x K` table of `mu*(x) - mu(x, a)`.
    pub gaps: Vec<f64>,
    /// Minimum positive gap over positive-probability contexts; 0 if any such
    /// context has a tied optimum or no positive gap exists.
    pub min_gap: f64,
    /// Minimum gap ignoring tied arms (infimum over strictly positive gaps), 0 if none.
    pub min_positive_gap: f64,
    pub max_gap: f64,
    pub optimal_arm: Vec<usize>,
    pub optimal_value: Vec<f64>,
    pub tie_flags: Vec<bool>,
}

/// One interaction round: a context and the per-arm reward noise.
///
/// Noise is drawn for every arm up front so that `(t, arm)` always maps to the
/// same draw regardless of which arm a learner picks.
#[derive(Debug, Clone)]
pub struct Round {
    pub context: Context,
    pub noise: Vec<f64>,
}

impl Round {
    pub fn noisy_reward(&self, problem: &ContextualProblem, arm: usize) -> f64 {
        problem.mean_reward(self.context, arm) + self.noise[arm]
    }
}

impl ContextualProblem {
    pub fn n_contexts(&self) -> Option<usize> {
        match &self.contexts {
            ContextSpace::Finite { probs } => Some(probs.len()),
            ContextSpace::Continuous { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.contexts, ContextSpace::Finite { .. })
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match &self.contexts {
            ContextSpace::Finite { probs } => Some(probs),
            ContextSpace::Continuous { .. } => None,
        }
    }

    pub fn finite_rep(&self, i: usize) -> Result<&FiniteRepresentation> {
        self.representations
            .get(i)
            .ok_or_else(|| Error::arg(format!("representation {i} out of range")))?
            .as_finite()
            .ok_or_else(|| Error::Unsupported("representation is not finite".into()))
    }

    /// True mean reward `mu(x, a)`.
    pub fn mean_reward(&self, context: Context, arm: usize) -> f64 {
        match (&self.reward, context) {
            (RewardModel::Table(mu), Context::Index(x)) => mu[x * self.n_arms + arm],
            (RewardModel::HalfDiscSelect, Context::Point(p)) => {
                let a = HALF_DISC_ARMS[arm];
                p[0] * a[0] + p[1] * a[1]
            }
            _ => panic!("context kind does not match reward model"),
        }
    }

    /// Smallest and largest mean reward over all contexts and arms.
    pub fn reward_range(&self) -> (f64, f64) {
        match &self.reward {
            RewardModel::Table(mu) => mu
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v))),
            // x on the lower half of the unit disc, arms in {0,1}^2
            RewardModel::HalfDiscSelect => (-std::f64::consts::SQRT_2, 1.0),
        }
    }

    /// Optimal arm and value for a context; ties broken by lowest index at `EXACT_TOL`.
    pub fn optimal_arm(&self, context: Context) -> (usize, f64) {
        let mut best = 0;
        let mut best_val = self.mean_reward(context, 0);
        for a in 1..self.n_arms {
            let v = self.mean_reward(context, a);
            if v > best_val + EXACT_TOL {
                best = a;
                best_val = v;
            }
        }
        (best, best_val)
    }

    /// Reward predicted by representation `rep_index`: `phi^T theta + f`.
    pub fn reward(&self, rep_index: usize, context: Context, arm: usize) -> Result<f64> {
        let rep = self
            .representations
            .get(rep_index)
            .ok_or_else(|| Error::arg(format!("representation {rep_index} out of range")))?;
        if arm >= self.n_arms {
            return Err(Error::arg(format!("arm {arm} out of range")));
        }
        match (rep, context) {
            (Representation::Finite(r), Context::Index(x)) => {
                if x >= r.n_contexts {
                    return Err(Error::arg(format!("context {x} out of range")));
                }
                Ok(r.predicted_reward(x, arm))
            }
            (Representation::Map(r), Context::Point(p)) => {
                let mut buf = vec![0.0; r.map.dim()];
                r.map.write(p, arm, &mut buf);
                Ok(dot(&buf, &r.param))
            }
            _ => Err(Error::arg("context kind does not match representation")),
        }
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        match &self.contexts {
            ContextSpace::Finite { probs } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut last_positive = 0;
                for (i, &p) in probs.iter().enumerate() {
                    if p > 0.0 {
                        last_positive = i;
                        cum += p;
                        if u < cum {
                            return Context::Index(i);
                        }
                    }
                }
                Context::Index(last_positive)
            }
            ContextSpace::Continuous { sampler, .. } => Context::Point(sampler.sample(rng)),
        }
    }

    /// Draws a context from `rho` and `N(0, sigma^2)` noise for every arm.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Round {
        let context = self.sample_context(rng);
        let noise = (0..self.n_arms)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                self.noise_sigma * z
            })
            .collect();
        Round { context, noise }
    }

    pub fn gap_profile(&self) -> Result<GapProfile> {
        let (probs, mu) = match (&self.contexts, &self.reward) {
            (ContextSpace::Finite { probs }, RewardModel::Table(mu)) => (probs, mu),
            _ => {
                return Err(Error::Unsupported(
                    "gap profile needs a finite context set".into(),
                ))
            }
        };
        let k = self.n_arms;
        let n = probs.len();
        let mut gaps = vec![0.0; n * k];
        let mut optimal_arm = Vec::with_capacity(n);
        let mut optimal_value = Vec::with_capacity(n);
        let mut tie_flags = Vec::with_capacity(n);
        let mut min_gap = f64::INFINITY;
        let mut max_gap = 0.0f64;
        let mut any_tie = false;
        for x in 0..n {
            let (best, best_val) = self.optimal_arm(Context::Index(x));
            let mut tie = false;
            for a in 0..k {
                let g = best_val - mu[x * k + a];
                if a != best && g.abs() <= EXACT_TOL {
                    tie = true;
                }
                gaps[x * k + a] = if a == best { 0.0 } else { g.max(0.0) };
                if probs[x] > 0.0 {
                    max_gap = max_gap.max(gaps[x * k + a]);
                    if gaps[x * k + a] > EXACT_TOL {
                        min_gap = min_gap.min(gaps[x * k + a]);
                    }
                }
            }
            if tie && probs[x] > 0.0 {
                any_tie = true;
            }
            optimal_arm.push(best);
            optimal_value.push(best_val);
            tie_flags.push(tie);
        }
        let min_positive_gap = if min_gap.is_finite() { min_gap } else { 0.0 };
        Ok(GapProfile {
            gaps,
            min_gap: if any_tie { 0.0 } else { min_positive_gap },
            min_positive_gap,
            max_gap,
            optimal_arm,
            optimal_value,
            tie_flags,
        })
    }

    /// Checks distribution, shapes and realizability of attached representations.
    pub fn validate(&self) -> Result<()> {
        if self.n_arms == 0 {
            return Err(Error::Malformed("problem needs at least one arm".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Malformed("noise sigma must be >= 0".into()));
        }
        match (&self.contexts, &self.reward) {
            (ContextSpace::Finite { probs }, RewardModel::Table(mu)) => {
                if probs.is_empty() {
                    return Err(Error::Malformed("empty context distribution".into()));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::Malformed("negative context probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > EXACT_TOL * probs.len().max(1) as f64 {
                    return Err(Error::Malformed(format!(
                        "context probabilities sum to {total}"
                    )));
                }
                if mu.len() != probs.len() * self.n_arms {
                    return Err(Error::Malformed("reward table has wrong shape".into()));
                }
                for rep in &self.representations {
                    let r = rep.as_finite().ok_or_else(|| {
                        Error::Malformed("finite problem with a map representation".into())
                    })?;
                    r.validate()?;
                    if r.n_contexts != probs.len() || r.n_arms != self.n_arms {
                        return Err(Error::Malformed(format!(
                            "representation '{}' does not match problem shape",
                            r.label
                        )));
                    }
                    for x in 0..r.n_contexts {
                        for a in 0..r.n_arms {
                            let err = (r.predicted_reward(x, a) - mu[x * self.n_arms + a]).abs();
                            if err > SUM_TOL {
                                return Err(Error::Malformed(format!(
                                    "representation '{}' does not reproduce mu at ({x}, {a}): error {err:e}",
                                    r.label
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
            (ContextSpace::Continuous { mc_samples, .. }, RewardModel::HalfDiscSelect) => {
                if *mc_samples == 0 {
                    return Err(Error::Malformed("Monte Carlo budget must be positive".into()));
                }
                for rep in &self.representations {
                    match rep {
                        Representation::Map(m) if m.map.n_arms() == self.n_arms => {}
                        _ => {
                            return Err(Error::Malformed(
                                "continuous problem needs map representations".into(),
                            ))
                        }
                    }
                }
                Ok(())
            }
            _ => Err(Error::Malformed(
                "context space and reward model disagree".into(),
            )),
        }
    }
}

/// Convenience constructor for a finite problem from a reward table.
pub fn finite_problem(
    label: impl Into<String>,
    probs: Vec<f64>,
    n_arms: usize,
    mu: Vec<f64>,
    noise_sigma: f64,
    representations: Vec<FiniteRepresentation>,
) -> Result<ContextualProblem> {
    let p = ContextualProblem {
        label: label.into(),
        contexts: ContextSpace::Finite { probs },
        n_arms,
        reward: RewardModel::Table(mu),
        noise_sigma,
        representations: representations.into_iter().map(Representation::Finite).collect(),
        notes: Vec::new(),
    };
    p.validate()?;
    Ok(p)
}

/// Builds a problem whose reward table is defined by a realizable representation.
pub fn problem_from_representation(
    label: impl Into<String>,
    probs: Vec<f64>,
    rep: FiniteRepresentation,
    noise_sigma: f64,
) -> Result<ContextualProblem> {
    let mut mu = Vec::with_capacity(rep.n_contexts * rep.n_arms);
    for x in 0..rep.n_contexts {
        for a in 0..rep.n_arms {
            mu.push(rep.predicted_reward(x, a));
        }
    }
    let k = rep.n_arms;
    finite_problem(label, probs, k, mu, noise_sigma, vec![rep])
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cmb_example() -> ContextualProblem {
        // x1: [1,1] [1,0]; x2: [0,1] [1,1]; theta = [1,1]
        let rep = FiniteRepresentation::new(
            2,
            2,
            2,
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0],
            "cmb",
        )
        .unwrap();
        problem_from_representation("cmb", uniform(2), rep, 0.0).unwrap()
    }

    #[test]
    fn reward_of_cmb_example() {
        let p = cmb_example();
        assert_eq!(p.reward(0, Context::Index(0), 0).unwrap(), 2.0);
    }

    #[test]
    fn reward_zero_parameter() {
        let rep = FiniteRepresentation::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 0.0], "z")
            .unwrap();
        let p = problem_from_representation("z", vec![1.0], rep, 0.0).unwrap();
        assert_eq!(p.reward(0, Context::Index(0), 1).unwrap(), 0.0);
    }

    #[test]
    fn reward_index_errors() {
        let p = cmb_example();
        assert!(matches!(p.reward(3, Context::Index(0), 0), Err(Error::Argument(_))));
        assert!(matches!(p.reward(0, Context::Index(5), 0), Err(Error::Argument(_))));
        assert!(matches!(p.reward(0, Context::Index(0), 9), Err(Error::Argument(_))));
    }

    #[test]
    fn noiseless_round_is_exact() {
        let p = cmb_example();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = p.sample_round(&mut rng);
            for a in 0..2 {
                assert_eq!(r.noisy_reward(&p, a), p.mean_reward(r.context, a));
            }
        }
    }

    #[test]
    fn degenerate_distribution() {
        let rep = FiniteRepresentation::new(3, 1, 1, vec![1.0, 2.0, 3.0], vec![1.0], "d").unwrap();
        let p = problem_from_representation("d", vec![1.0, 0.0, 0.0], rep, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(p.sample_round(&mut rng).context, Context::Index(0));
        }
    }

    #[test]
    fn gap_profile_two_by_two() {
        let rep = FiniteRepresentation::new(
            2,
            2,
            2,
            vec![2.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 2.0],
            vec![1.0, 1.0],
            "g",
        )
        .unwrap();
        let p = problem_from_representation("g", uniform(2), rep, 0.0).unwrap();
        let g = p.gap_profile().unwrap();
        assert_eq!(g.min_gap, 1.0);
        assert_eq!(g.max_gap, 1.0);
        assert_eq!(g.optimal_arm, vec![0, 1]);
        assert_eq!(g.tie_flags, vec![false, false]);
    }

    #[test]
    fn gap_profile_all_ties() {
        let p = finite_problem("t", uniform(3), 2, vec![1.0; 6], 0.1, vec![]).unwrap();
        let g = p.gap_profile().unwrap();
        assert_eq!(g.min_gap, 0.0);
        assert!(g.tie_flags.iter().all(|&t| t));
        assert_eq!(g.optimal_arm, vec![0, 0, 0]);
    }

    #[test]
    fn gap_profile_ignores_zero_probability_contexts() {
        // context 1 has a tiny gap but zero probability
        let mu = vec![1.0, 0.0, 1.0, 0.999];
        let p = finite_problem("z", vec![1.0, 0.0], 2, mu, 0.0, vec![]).unwrap();
        let g = p.gap_profile().unwrap();
        assert_eq!(g.min_gap, 1.0);
    }

    #[test]
    fn continuous_gap_profile_unsupported() {
        let p = ContextualProblem {
            label: "c".into(),
            contexts: ContextSpace::Continuous {
                sampler: SamplerSpec::HalfDisc,
                mc_samples: 10,
            },
            n_arms: 4,
            reward: RewardModel::HalfDiscSelect,
            noise_sigma: 0.2,
            representations: vec![],
            notes: vec![],
        };
        assert!(matches!(p.gap_profile(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn validate_rejects_unrealizable_rep() {
        let rep = FiniteRepresentation::new(1, 2, 1, vec![1.0, 2.0], vec![1.0], "r").unwrap();
        let err = finite_problem("bad", vec![1.0], 2, vec![1.0, 3.0], 0.0, vec![rep]);
        assert!(matches!(err, Err(Error::Malformed(_))));
    }

    #[test]
    fn half_disc_sampler_stays_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let [a, b] = SamplerSpec::HalfDisc.sample(&mut rng);
            assert!(a * a + b * b <= 1.0 && b <= 0.0);
        }
    }
}
