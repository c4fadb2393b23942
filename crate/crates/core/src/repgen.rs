//! Constructions and transforms producing equivalent representations, and
//! the named experiment presets built from them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diversity::{check_condition, check_mixed_hls, Condition};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::problem::{
    problem_from_representation, uniform, Context, ContextSpace, ContextualProblem, FeatureMap,
    FiniteRepresentation, MapRepresentation, Representation, RewardModel, SamplerSpec, EXACT_TOL,
};

/// Minimum `|det A|` accepted when sampling random invertible transforms.
pub const RANDOM_DET_FLOOR: f64 = 1e-6;
/// Minimum `|det A|` accepted by [`TransformSpec::InvertibleLinear`].
pub const INVERTIBLE_DET_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransformSpec {
    /// `phi' = A^T phi`, `theta' = A^{-1} theta`, with `A` row-major `d x d`.
    InvertibleLinear(Vec<f64>),
    /// Reduce the rank of the optimal-feature moment matrix to at most `k`.
    Derank(usize),
    /// Replace each group of coordinates by its `theta`-weighted sum, kept at
    /// the group's smallest index with parameter entry 1.
    MergeFeatures(Vec<Vec<usize>>),
    /// Rescale so that `||theta|| = 1`.
    Normalize,
    /// Rescale coordinates `coords` to unit parameter weight, then replace the
    /// two coordinates by two copies of their average on every optimal pair and
    /// on the listed extra `(context, arm)` pairs.
    MixSplit {
        coords: (usize, usize),
        extra_pairs: Vec<(usize, usize)>,
    },
}

fn optimal_arms(problem: &ContextualProblem) -> Result<Vec<usize>> {
    Ok(problem.gap_profile()?.optimal_arm)
}

/// Builds a representation of dimension `d` whose first coordinate is the
/// reward itself and whose remaining coordinates are scaled indicators of
/// `d - 1` anchor contexts.
pub fn build_hls_from_reward(problem: &ContextualProblem, d: usize) -> Result<FiniteRepresentation> {
    if d == 0 {
        return Err(Error::arg("dimension must be positive"));
    }
    let (probs, mu) = match (&problem.contexts, &problem.reward) {
        (ContextSpace::Finite { probs }, RewardModel::Table(mu)) => (probs, mu),
        _ => return Err(Error::Unsupported("construction needs a finite problem".into())),
    };
    let gaps = problem.gap_profile()?;
    let positive: Vec<usize> = (0..probs.len()).filter(|&x| probs[x] > 0.0).collect();
    if positive.len() < d {
        return Err(Error::Construction(format!(
            "need at least {d} positive-probability contexts, found {}",
            positive.len()
        )));
    }
    let first = positive
        .iter()
        .copied()
        .find(|&x| gaps.optimal_value[x] != 0.0)
        .ok_or_else(|| Error::Construction("every optimal reward is zero".into()))?;
    let mut anchors = vec![first];
    anchors.extend(positive.iter().copied().filter(|&x| x != first).take(d - 1));
    let scale = anchors
        .iter()
        .map(|&x| gaps.optimal_value[x].abs())
        .fold(0.0f64, f64::max)
        + 1.0;
    let (n, k) = (probs.len(), problem.n_arms);
    let mut features = vec![0.0; n * k * d];
    for x in 0..n {
        let indicator = anchors[1..].iter().position(|&xa| xa == x);
        for a in 0..k {
            let base = (x * k + a) * d;
            features[base] = mu[x * k + a];
            if let Some(j) = indicator {
                features[base + 1 + j] = scale;
            }
        }
    }
    let mut param = vec![0.0; d];
    param[0] = 1.0;
    FiniteRepresentation::new(n, k, d, features, param, format!("hls_from_reward_d{d}"))
}

/// Applies one transform. The output reproduces the same rewards.
pub fn apply_transform(
    rep: &FiniteRepresentation,
    problem: &ContextualProblem,
    spec: &TransformSpec,
) -> Result<FiniteRepresentation> {
    match spec {
        TransformSpec::InvertibleLinear(a) => invertible_linear(rep, a),
        TransformSpec::Derank(k) => derank(rep, problem, *k),
        TransformSpec::MergeFeatures(groups) => merge_features(rep, groups),
        TransformSpec::Normalize => normalize(rep),
        TransformSpec::MixSplit {
            coords,
            extra_pairs,
        } => mix_split(rep, problem, *coords, extra_pairs),
    }
}

fn invertible_linear(rep: &FiniteRepresentation, a: &[f64]) -> Result<FiniteRepresentation> {
    let d = rep.dim;
    if a.len() != d * d {
        return Err(Error::arg(format!("transform must be {d}x{d}")));
    }
    let m = DMatrix::from_row_slice(d, d, a);
    let det = m.determinant();
    if !(det.abs() > INVERTIBLE_DET_FLOOR) {
        return Err(Error::arg(format!("transform is singular (det = {det:e})")));
    }
    let theta = m
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(&rep.param))
        .ok_or_else(|| Error::arg("transform is singular"))?;
    let mut out = rep.clone();
    for (src, dst) in rep.features.chunks(d).zip(out.features.chunks_mut(d)) {
        for (j, o) in dst.iter_mut().enumerate() {
            // skip exact zeros so the identity reproduces inputs bit for bit
            let mut acc: Option<f64> = None;
            for i in 0..d {
                let w = a[i * d + j];
                if w != 0.0 {
                    let term = src[i] * w;
                    acc = Some(acc.map_or(term, |s| s + term));
                }
            }
            *o = acc.unwrap_or(0.0);
        }
    }
    out.param = theta.iter().copied().collect();
    out.refresh_bounds();
    Ok(out)
}

fn normalize(rep: &FiniteRepresentation) -> Result<FiniteRepresentation> {
    let s = norm(&rep.param);
    if s == 0.0 {
        return Err(Error::arg("cannot normalize a zero parameter"));
    }
    let mut out = rep.clone();
    out.features.iter_mut().for_each(|v| *v *= s);
    out.param.iter_mut().for_each(|v| *v /= s);
    out.feature_bound = rep.feature_bound * s;
    out.param_bound = norm(&out.param).max(1.0);
    Ok(out)
}

/// Contexts with positive probability, by descending probability then index.
fn derank_order(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&x| probs[x] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

fn derank(rep: &FiniteRepresentation, problem: &ContextualProblem, k: usize) -> Result<FiniteRepresentation> {
    let d = rep.dim;
    if k == 0 || k >= d {
        return Err(Error::arg(format!("derank target must satisfy 1 <= k < {d}")));
    }
    let probs = problem
        .probs()
        .ok_or_else(|| Error::Unsupported("derank needs a finite problem".into()))?;
    let best = optimal_arms(problem)?;
    let order = derank_order(probs);
    if k > order.len() {
        return Err(Error::arg(format!(
            "derank target {k} exceeds the {} positive-probability contexts",
            order.len()
        )));
    }
    let q = order.len() - k + 1;
    let rows = &order[..q];
    let mu_q: Vec<f64> = rows
        .iter()
        .map(|&x| rep.predicted_reward(x, best[x]) - rep.misspec_at(x, best[x]))
        .collect();
    let mu_norm2 = dot(&mu_q, &mu_q);
    if mu_norm2 == 0.0 {
        return Err(Error::Construction(
            "optimal rewards of the deranked contexts are all zero".into(),
        ));
    }
    // w = Phi_q^T mu_q / ||mu_q||^2; each deranked row becomes mu*(x) w
    let mut w = vec![0.0; d];
    for (&x, &m) in rows.iter().zip(&mu_q) {
        for (wj, fj) in w.iter_mut().zip(rep.feature(x, best[x])) {
            *wj += m * fj;
        }
    }
    w.iter_mut().for_each(|v| *v /= mu_norm2);
    let mut out = rep.clone();
    for (&x, &m) in rows.iter().zip(&mu_q) {
        for (o, wj) in out.feature_mut(x, best[x]).iter_mut().zip(&w) {
            *o = m * wj;
        }
    }
    out.refresh_bounds();
    Ok(out)
}

fn merge_features(rep: &FiniteRepresentation, groups: &[Vec<usize>]) -> Result<FiniteRepresentation> {
    let d = rep.dim;
    let mut owner: Vec<Option<usize>> = vec![None; d];
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::arg("merge groups must be non-empty"));
        }
        for &j in group {
            if j >= d {
                return Err(Error::arg(format!("coordinate {j} out of range")));
            }
            if owner[j].replace(g).is_some() {
                return Err(Error::arg(format!("coordinate {j} appears in two groups")));
            }
        }
    }
    // each kept coordinate: either an untouched original or a group leader
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for j in 0..d {
        match owner[j] {
            None => kept.push(vec![j]),
            Some(g) => {
                let leader = *groups[g].iter().min().unwrap();
                if leader == j {
                    kept.push(groups[g].clone());
                }
            }
        }
    }
    let new_d = kept.len();
    let mut features = Vec::with_capacity(rep.n_contexts * rep.n_arms * new_d);
    for chunk in rep.features.chunks(d) {
        for members in &kept {
            if members.len() == 1 && owner[members[0]].is_none() {
                features.push(chunk[members[0]]);
            } else {
                features.push(members.iter().map(|&j| rep.param[j] * chunk[j]).sum());
            }
        }
    }
    let param: Vec<f64> = kept
        .iter()
        .map(|members| {
            if members.len() == 1 && owner[members[0]].is_none() {
                rep.param[members[0]]
            } else {
                1.0
            }
        })
        .collect();
    let mut out = FiniteRepresentation::new(
        rep.n_contexts,
        rep.n_arms,
        new_d,
        features,
        param,
        rep.label.clone(),
    )?;
    out.misspec = rep.misspec.clone();
    Ok(out)
}

fn mix_split(
    rep: &FiniteRepresentation,
    problem: &ContextualProblem,
    (j, k): (usize, usize),
    extra_pairs: &[(usize, usize)],
) -> Result<FiniteRepresentation> {
    let d = rep.dim;
    if j >= d || k >= d || j == k {
        return Err(Error::arg(format!("invalid coordinate pair ({j}, {k})")));
    }
    if rep.param[j].abs() < EXACT_TOL || rep.param[k].abs() < EXACT_TOL {
        return Err(Error::Construction(
            "split coordinates need nonzero parameter entries".into(),
        ));
    }
    let best = optimal_arms(problem)?;
    let mut out = rep.clone();
    let (tj, tk) = (rep.param[j], rep.param[k]);
    for chunk in out.features.chunks_mut(d) {
        chunk[j] *= tj;
        chunk[k] *= tk;
    }
    out.param[j] = 1.0;
    out.param[k] = 1.0;
    let mut average = |x: usize, a: usize| {
        let f = out.feature_mut(x, a);
        let m = 0.5 * (f[j] + f[k]);
        f[j] = m;
        f[k] = m;
    };
    for (x, &a) in best.iter().enumerate() {
        average(x, a);
    }
    for &(x, a) in extra_pairs {
        if x >= rep.n_contexts || a >= rep.n_arms {
            return Err(Error::arg(format!("pair ({x}, {a}) out of range")));
        }
        average(x, a);
    }
    out.refresh_bounds();
    Ok(out)
}

/// Standard-normal matrix with `|det| >= RANDOM_DET_FLOOR`, row-major.
pub fn random_invertible<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let a: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
        if DMatrix::from_row_slice(d, d, &a).determinant().abs() >= RANDOM_DET_FLOOR {
            return a;
        }
    }
}

/// Random invertible transform followed by normalization.
pub fn randomize<R: Rng + ?Sized>(
    rep: &FiniteRepresentation,
    problem: &ContextualProblem,
    rng: &mut R,
) -> Result<FiniteRepresentation> {
    let a = random_invertible(rep.dim, rng);
    let t = apply_transform(rep, problem, &TransformSpec::InvertibleLinear(a))?;
    apply_transform(&t, problem, &TransformSpec::Normalize)
}

/// Random realizable problem with uniform contexts and `sigma = 0.3`,
/// regenerated until its representation is HLS.
pub fn random_problem<R: Rng + ?Sized>(
    n_contexts: usize,
    n_arms: usize,
    d: usize,
    rng: &mut R,
) -> Result<(ContextualProblem, FiniteRepresentation)> {
    if n_contexts == 0 || n_arms == 0 || d == 0 {
        return Err(Error::arg("sizes must be positive"));
    }
    loop {
        let features: Vec<f64> = (0..n_contexts * n_arms * d)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let s = norm(&raw);
        if s == 0.0 {
            continue;
        }
        let param: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let rep = FiniteRepresentation::new(n_contexts, n_arms, d, features, param, "orig")?;
        let problem = problem_from_representation("random", uniform(n_contexts), rep.clone(), 0.3)?;
        let as_rep = Representation::Finite(rep.clone());
        if check_condition(&problem, &as_rep, Condition::Hls)?.0 {
            return Ok((problem, rep));
        }
    }
}

/// Least-squares refit of `theta` on the problem's rewards over all pairs;
/// the residual becomes the misspecification table.
pub fn refit_misspecified(
    problem: &ContextualProblem,
    features: Vec<f64>,
    dim: usize,
    label: &str,
) -> Result<FiniteRepresentation> {
    let mu = match &problem.reward {
        RewardModel::Table(mu) => mu,
        RewardModel::HalfDiscSelect => {
            return Err(Error::Unsupported("refit needs a finite problem".into()))
        }
    };
    let rows = mu.len();
    let x = DMatrix::from_row_slice(rows, dim, &features);
    let y = DVector::from_column_slice(mu);
    let theta = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Construction(format!("least-squares refit failed: {e}")))?;
    let n_contexts = rows / problem.n_arms;
    let rep = FiniteRepresentation::new(
        n_contexts,
        problem.n_arms,
        dim,
        features,
        theta.iter().copied().collect(),
        label,
    )?;
    let mut rep = normalize(&rep)?;
    let f: Vec<f64> = (0..rows)
        .map(|i| mu[i] - dot(&rep.features[i * dim..(i + 1) * dim], &rep.param))
        .collect();
    rep.misspec = Some(f);
    Ok(rep)
}

pub const PRESETS: [&str; 5] = ["fig1", "vardim", "mixing", "continuous", "misspec_toy"];

pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => "20x5 random problem: HLS rep plus derank-5..1 copies, each transformed and normalized",
        "vardim" => "HLS rep plus derank-1 copies of dimension 2..6 (trailing coordinates merged)",
        "mixing" => "six non-HLS 6-dim reps that are jointly mixed-HLS",
        "continuous" => "half-disc contexts, 4 arms, a 2-dim non-HLS map and a 3-dim HLS map",
        "misspec_toy" => "vardim plus four misspecified reps (two truncations, two random)",
        _ => return None,
    })
}

const BASE_CONTEXTS: usize = 20;
const BASE_ARMS: usize = 5;
const BASE_DIM: usize = 6;

/// Builds a named preset. Representations are attached to the returned problem.
pub fn preset(name: &str, seed: u64) -> Result<ContextualProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "fig1" => fig1(&mut rng),
        "vardim" => vardim(&mut rng),
        "mixing" => mixing(&mut rng),
        "continuous" => Ok(continuous()),
        "misspec_toy" => misspec_toy(&mut rng),
        _ => Err(Error::arg(format!(
            "unknown preset '{name}' (known: {})",
            PRESETS.join(", ")
        ))),
    }
}

fn base(rng: &mut ChaCha8Rng) -> Result<(ContextualProblem, FiniteRepresentation)> {
    random_problem(BASE_CONTEXTS, BASE_ARMS, BASE_DIM, rng)
}

fn attach(mut problem: ContextualProblem, label: &str, reps: Vec<FiniteRepresentation>) -> Result<ContextualProblem> {
    problem.label = label.to_string();
    problem.representations = reps.into_iter().map(Representation::Finite).collect();
    problem.validate()?;
    Ok(problem)
}

fn fig1(rng: &mut ChaCha8Rng) -> Result<ContextualProblem> {
    let (problem, orig) = base(rng)?;
    let mut reps = Vec::new();
    let mut r = randomize(&orig, &problem, rng)?;
    r.label = "orig".into();
    reps.push(r);
    for k in (1..BASE_DIM).rev() {
        let dr = apply_transform(&orig, &problem, &TransformSpec::Derank(k))?;
        let mut r = randomize(&dr, &problem, rng)?;
        r.label = format!("rank{k}");
        reps.push(r);
    }
    let mut p = attach(problem, "fig1", reps)?;
    p.notes.push("rep 0 is HLS; rep i has optimal-feature rank 6 - i".into());
    Ok(p)
}

fn vardim_reps(
    problem: &ContextualProblem,
    orig: &FiniteRepresentation,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<FiniteRepresentation>, Vec<String>)> {
    let mut reps = Vec::new();
    let mut notes = Vec::new();
    let mut r = randomize(orig, problem, rng)?;
    r.label = "orig".into();
    reps.push(r);
    for dim in 2..=BASE_DIM {
        let merged = if dim < BASE_DIM {
            let group: Vec<usize> = (dim - 1..BASE_DIM).collect();
            notes.push(format!("dim{dim}: coordinates {group:?} merged"));
            apply_transform(orig, problem, &TransformSpec::MergeFeatures(vec![group]))?
        } else {
            notes.push(format!("dim{dim}: no merge"));
            orig.clone()
        };
        let dr = apply_transform(&merged, problem, &TransformSpec::Derank(1))?;
        let mut r = randomize(&dr, problem, rng)?;
        r.label = format!("dim{dim}");
        reps.push(r);
    }
    Ok((reps, notes))
}

fn vardim(rng: &mut ChaCha8Rng) -> Result<ContextualProblem> {
    let (problem, orig) = base(rng)?;
    let (reps, notes) = vardim_reps(&problem, &orig, rng)?;
    let mut p = attach(problem, "vardim", reps)?;
    p.notes.extend(notes);
    p.notes.push("rep 0 is HLS; the others have optimal-feature rank 1".into());
    Ok(p)
}

/// Coordinate pairs averaged by the six mixing reps; every coordinate is left
/// intact by at least one of them.
pub const MIX_PAIRS: [(usize, usize); 6] = [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0)];

fn mixing(rng: &mut ChaCha8Rng) -> Result<ContextualProblem> {
    let (problem, orig) = base(rng)?;
    let best = optimal_arms(&problem)?;
    let mut assigned: Vec<Vec<(usize, usize)>> = vec![Vec::new(); MIX_PAIRS.len()];
    let mut slot = 0;
    for x in 0..BASE_CONTEXTS {
        for a in 0..BASE_ARMS {
            if a != best[x] {
                assigned[slot % MIX_PAIRS.len()].push((x, a));
                slot += 1;
            }
        }
    }
    let mut reps = Vec::new();
    for (i, (&coords, extra)) in MIX_PAIRS.iter().zip(assigned).enumerate() {
        let split = apply_transform(
            &orig,
            &problem,
            &TransformSpec::MixSplit {
                coords,
                extra_pairs: extra,
            },
        )?;
        let mut r = randomize(&split, &problem, rng)?;
        r.label = format!("mix{i}_{}{}", coords.0, coords.1);
        reps.push(r);
    }
    let mut p = attach(problem, "mixing", reps)?;
    p.notes.push(format!(
        "rep i averages coordinate pair MIX_PAIRS[i] on optimal pairs and on every 6th non-optimal pair (offset i); pairs {MIX_PAIRS:?}"
    ));
    let refs: Vec<&Representation> = p.representations.iter().collect();
    if !check_mixed_hls(&p, &refs)?.mixed_hls {
        return Err(Error::Construction("mixing set is not mixed-HLS".into()));
    }
    Ok(p)
}

/// Half-disc continuous problem with the natural and lifted feature maps.
pub fn continuous() -> ContextualProblem {
    let map_rep = |map: FeatureMap, label: &str| {
        let param = vec![1.0; map.dim()];
        Representation::Map(MapRepresentation {
            map,
            param_bound: norm(&param).max(1.0),
            param,
            feature_bound: map.feature_bound(),
            label: label.into(),
        })
    };
    ContextualProblem {
        label: "continuous".into(),
        contexts: ContextSpace::Continuous {
            sampler: SamplerSpec::HalfDisc,
            mc_samples: crate::diversity::DEFAULT_MC_SAMPLES,
        },
        n_arms: FeatureMap::HalfDiscNatural.n_arms(),
        reward: RewardModel::HalfDiscSelect,
        noise_sigma: 0.2,
        representations: vec![
            map_rep(FeatureMap::HalfDiscNatural, "phi1"),
            map_rep(FeatureMap::HalfDiscLifted, "phi2"),
        ],
        notes: vec!["phi1 is not HLS under the half-disc distribution; phi2 is".into()],
    }
}

fn truncate(rep: &FiniteRepresentation, keep: usize) -> Vec<f64> {
    rep.features
        .chunks(rep.dim)
        .flat_map(|c| c[..keep].iter().copied())
        .collect()
}

fn misspec_toy(rng: &mut ChaCha8Rng) -> Result<ContextualProblem> {
    let (problem, orig) = base(rng)?;
    let (mut reps, mut notes) = vardim_reps(&problem, &orig, rng)?;
    let rows = BASE_CONTEXTS * BASE_ARMS;
    let candidates = [
        ("trunc_half", BASE_DIM / 2, truncate(&orig, BASE_DIM / 2)),
        ("trunc_third", BASE_DIM / 3, truncate(&orig, BASE_DIM / 3)),
        (
            "random3",
            3,
            (0..rows * 3).map(|_| rng.sample(StandardNormal)).collect(),
        ),
        (
            "random9",
            9,
            (0..rows * 9).map(|_| rng.sample(StandardNormal)).collect(),
        ),
    ];
    for (label, dim, features) in candidates {
        let r = refit_misspecified(&problem, features, dim, label)?;
        notes.push(format!("{label}: misspecification eps = {:.6}", r.misspecification_level()));
        reps.push(r);
    }
    let mut p = attach(problem, "misspec_toy", reps)?;
    p.notes.extend(notes);
    Ok(p)
}

/// Contexts whose optimal reward is nonzero (anchor candidates for the HLS construction).
pub fn nonzero_optimal_contexts(problem: &ContextualProblem) -> Result<Vec<usize>> {
    let n = problem
        .n_contexts()
        .ok_or_else(|| Error::Unsupported("needs a finite problem".into()))?;
    Ok((0..n)
        .filter(|&x| problem.optimal_arm(Context::Index(x)).1 != 0.0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::{moment_matrix, Which};

    fn rewards_match(problem: &ContextualProblem, rep: &FiniteRepresentation) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..rep.n_contexts {
            for a in 0..rep.n_arms {
                let mu = problem.mean_reward(Context::Index(x), a);
                worst = worst.max((rep.predicted_reward(x, a) - mu).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_transform_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, rep) = random_problem(6, 3, 4, &mut rng).unwrap();
        let mut eye = vec![0.0; 16];
        (0..4).for_each(|i| eye[i * 4 + i] = 1.0);
        let out = apply_transform(&rep, &p, &TransformSpec::InvertibleLinear(eye)).unwrap();
        for (a, b) in rep.features.iter().zip(&out.features) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn singular_transform_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (p, rep) = random_problem(4, 2, 2, &mut rng).unwrap();
        let err = apply_transform(&rep, &p, &TransformSpec::InvertibleLinear(vec![1.0, 2.0, 2.0, 4.0]));
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn normalize_scales_bounds() {
        let rep = FiniteRepresentation::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![2.0, 0.0], "n").unwrap();
        let p = problem_from_representation("n", vec![1.0], rep.clone(), 0.0).unwrap();
        let out = apply_transform(&rep, &p, &TransformSpec::Normalize).unwrap();
        assert_eq!(norm(&out.param), 1.0);
        assert_eq!(out.feature_bound, 2.0 * rep.feature_bound);
        assert!(rewards_match(&p, &out) < 1e-12);
    }

    #[test]
    fn derank_to_one_on_random_six_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, rep) = random_problem(20, 5, 6, &mut rng).unwrap();
        let out = apply_transform(&rep, &p, &TransformSpec::Derank(1)).unwrap();
        let m = moment_matrix(&p, &Representation::Finite(out.clone()), Which::Optimal).unwrap();
        assert_eq!(m.rank, 1);
        assert!(rewards_match(&p, &out) < 1e-9);
    }

    #[test]
    fn derank_rejects_bad_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (p, rep) = random_problem(5, 2, 3, &mut rng).unwrap();
        assert!(apply_transform(&rep, &p, &TransformSpec::Derank(0)).is_err());
        assert!(apply_transform(&rep, &p, &TransformSpec::Derank(3)).is_err());
    }

    #[test]
    fn merge_preserves_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (p, rep) = random_problem(8, 3, 5, &mut rng).unwrap();
        let out = apply_transform(&rep, &p, &TransformSpec::MergeFeatures(vec![vec![1, 3], vec![2, 4]])).unwrap();
        assert_eq!(out.dim, 3);
        assert_eq!(out.param[1], 1.0);
        assert!(rewards_match(&p, &out) < 1e-12);
    }

    #[test]
    fn build_hls_one_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (p, _) = random_problem(5, 3, 2, &mut rng).unwrap();
        let rep = build_hls_from_reward(&p, 1).unwrap();
        assert_eq!(rep.param, vec![1.0]);
        for x in 0..5 {
            for a in 0..3 {
                assert_eq!(rep.feature(x, a)[0], p.mean_reward(Context::Index(x), a));
            }
        }
    }

    #[test]
    fn build_hls_needs_enough_contexts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (p, _) = random_problem(3, 2, 2, &mut rng).unwrap();
        assert!(matches!(build_hls_from_reward(&p, 4), Err(Error::Construction(_))));
    }

    #[test]
    fn build_hls_rejects_all_zero_rewards() {
        let p = crate::problem::finite_problem("z", uniform(3), 2, vec![0.0; 6], 0.0, vec![]).unwrap();
        assert!(matches!(build_hls_from_reward(&p, 2), Err(Error::Construction(_))));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("nope", 0), Err(Error::Argument(_))));
    }

    #[test]
    fn random_problem_deterministic() {
        let a = random_problem(20, 5, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_problem(20, 5, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.0, b.0);
    }
}
