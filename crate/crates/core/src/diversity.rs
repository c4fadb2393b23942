//! Diversity conditions on linear representations.
//!
//! Every condition reduces to "some expected outer product of features has
//! full rank". A matrix has full rank when its smallest eigenvalue exceeds
//! [`rank_threshold`]`(lambda_max)`.
//!
//! Optimal features use the canonical optimal arm of each context (lowest
//! index among ties), both for HLS and for the per-arm optimal sets of WYS.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, rank_threshold, sym_eigen, SymEigen};
use crate::problem::{Context, ContextSpace, ContextualProblem, FiniteRepresentation, Representation};

/// Default Monte Carlo budget for continuous context spaces.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
/// Number of random directions used by the randomized BBK check.
pub const BBK_RANDOM_DIRECTIONS: usize = 10_000;
/// Relative residual tolerance for membership in a representation's image space.
pub const IMAGE_RESIDUAL_RTOL: f64 = 1e-8;
const BBK_SEED: u64 = 0x5eed_bbb0;
const MC_SEED: u64 = 0x5eed_0c0c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Which {
    /// `E[phi* phi*^T]`.
    Optimal,
    /// `E[phi(x,a) phi(x,a)^T]`.
    Arm(usize),
    /// `E[phi(x,a) phi(x,a)^T 1{a is optimal at x}]`.
    OptimalRestricted(usize),
    /// `(1/K) sum_a E[phi(x,a) phi(x,a)^T]`.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimation {
    Exact,
    MonteCarlo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    NonRedundant,
    Cmb,
    Bbk,
    Hls,
    Wys,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BbkMethod {
    Exact,
    Randomized(usize),
}

#[derive(Debug, Clone)]
pub struct MomentMatrix {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigvals: Vec<f64>,
    /// Orthonormal columns matching `eigvals`.
    pub eigvecs: DMatrix<f64>,
    pub rank: usize,
    pub lambda_min: f64,
    /// Smallest eigenvalue above tolerance (0 when rank is 0).
    pub lambda_min_pos: f64,
    pub tol: f64,
    pub estimation: Estimation,
}

impl MomentMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>, estimation: Estimation) -> Self {
        let SymEigen { values, vectors } = sym_eigen(&matrix);
        let d = values.len();
        let lambda_max = values.last().copied().unwrap_or(0.0);
        let tol = rank_threshold(lambda_max);
        let rank = values.iter().filter(|&&v| v > tol).count();
        let lambda_min = values.first().copied().unwrap_or(0.0);
        let lambda_min_pos = if rank > 0 { values[d - rank] } else { 0.0 };
        MomentMatrix {
            matrix,
            eigvals: values,
            eigvecs: vectors,
            rank,
            lambda_min,
            lambda_min_pos,
            tol,
            estimation,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.dim()
    }

    /// Orthonormal basis of the image space (eigenvectors above tolerance), as columns.
    pub fn image_basis(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.eigvecs.columns(d - self.rank, self.rank).into_owned()
    }
}

fn finite_parts<'a>(
    problem: &'a ContextualProblem,
    rep: &'a Representation,
) -> Result<(&'a [f64], &'a FiniteRepresentation)> {
    let probs = problem
        .probs()
        .ok_or_else(|| Error::Unsupported("operation needs a finite context set".into()))?;
    let r = rep
        .as_finite()
        .ok_or_else(|| Error::Unsupported("operation needs a finite representation".into()))?;
    if r.n_contexts != probs.len() || r.n_arms != problem.n_arms {
        return Err(Error::arg(format!(
            "representation '{}' does not match problem shape",
            r.label
        )));
    }
    Ok((probs, r))
}

fn add_outer(m: &mut DMatrix<f64>, w: f64, phi: &[f64]) {
    let d = phi.len();
    for i in 0..d {
        let wi = w * phi[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            m[(i, j)] += wi * phi[j];
        }
    }
}

fn check_which(which: Which, n_arms: usize) -> Result<()> {
    match which {
        Which::Arm(a) | Which::OptimalRestricted(a) if a >= n_arms => {
            Err(Error::arg(format!("arm {a} out of range")))
        }
        _ => Ok(()),
    }
}

/// Accumulates the weighted outer products selected by `which` for one context.
fn accumulate(
    m: &mut DMatrix<f64>,
    w: f64,
    which: Which,
    k: usize,
    best: usize,
    mut feature: impl FnMut(usize) -> Vec<f64>,
) {
    match which {
        Which::Optimal => add_outer(m, w, &feature(best)),
        Which::Arm(a) => add_outer(m, w, &feature(a)),
        Which::OptimalRestricted(a) => {
            if best == a {
                add_outer(m, w, &feature(a))
            }
        }
        Which::All => {
            for a in 0..k {
                add_outer(m, w / k as f64, &feature(a));
            }
        }
    }
}

/// Exact moment matrix on a finite problem; Monte Carlo with a fixed seed on
/// a continuous one.
pub fn moment_matrix(
    problem: &ContextualProblem,
    rep: &Representation,
    which: Which,
) -> Result<MomentMatrix> {
    match &problem.contexts {
        ContextSpace::Finite { .. } => exact_moment_matrix(problem, rep, which),
        ContextSpace::Continuous { mc_samples, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
            monte_carlo_moment_matrix(problem, rep, which, *mc_samples, &mut rng)
        }
    }
}

fn exact_moment_matrix(
    problem: &ContextualProblem,
    rep: &Representation,
    which: Which,
) -> Result<MomentMatrix> {
    let (probs, r) = finite_parts(problem, rep)?;
    check_which(which, r.n_arms)?;
    let mut m = DMatrix::zeros(r.dim, r.dim);
    for (x, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let (best, _) = problem.optimal_arm(Context::Index(x));
        accumulate(&mut m, p, which, r.n_arms, best, |a| r.feature(x, a).to_vec());
    }
    Ok(MomentMatrix::from_matrix(m, Estimation::Exact))
}

/// Monte Carlo estimate from `n_samples` contexts drawn from the problem's distribution.
pub fn monte_carlo_moment_matrix<R: Rng + ?Sized>(
    problem: &ContextualProblem,
    rep: &Representation,
    which: Which,
    n_samples: usize,
    rng: &mut R,
) -> Result<MomentMatrix> {
    if n_samples == 0 {
        return Err(Error::arg("Monte Carlo budget must be positive"));
    }
    check_which(which, problem.n_arms)?;
    let d = rep.dim();
    let k = problem.n_arms;
    let mut m = DMatrix::zeros(d, d);
    let w = 1.0 / n_samples as f64;
    let mut buf = vec![0.0; d];
    for _ in 0..n_samples {
        let ctx = problem.sample_context(rng);
        let (best, _) = problem.optimal_arm(ctx);
        let mut err = None;
        accumulate(&mut m, w, which, k, best, |a| {
            if let Err(e) = rep.write_feature(ctx, a, &mut buf) {
                err = Some(e);
            }
            buf.clone()
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(MomentMatrix::from_matrix(m, Estimation::MonteCarlo(n_samples)))
}

/// Decides one condition. The returned value is the witness eigenvalue: the
/// smallest `lambda_min` over the matrices the condition inspects.
pub fn check_condition(
    problem: &ContextualProblem,
    rep: &Representation,
    condition: Condition,
) -> Result<(bool, f64)> {
    match condition {
        Condition::NonRedundant => {
            let m = moment_matrix(problem, rep, Which::All)?;
            Ok((m.full_rank(), m.lambda_min))
        }
        Condition::Hls => {
            let m = moment_matrix(problem, rep, Which::Optimal)?;
            Ok((m.full_rank(), m.lambda_min))
        }
        Condition::Cmb => per_arm(problem, rep, Which::Arm),
        Condition::Wys => per_arm(problem, rep, Which::OptimalRestricted),
        Condition::Bbk => check_bbk(problem, rep).map(|(ok, w, _)| (ok, w)),
    }
}

fn per_arm(
    problem: &ContextualProblem,
    rep: &Representation,
    which: fn(usize) -> Which,
) -> Result<(bool, f64)> {
    let mut ok = true;
    let mut witness = f64::INFINITY;
    for a in 0..problem.n_arms {
        let m = moment_matrix(problem, rep, which(a))?;
        ok &= m.full_rank();
        witness = witness.min(m.lambda_min);
    }
    Ok((ok, witness))
}

/// BBK check: exact cell enumeration for `d <= 3`, randomized directions otherwise.
pub fn check_bbk(
    problem: &ContextualProblem,
    rep: &Representation,
) -> Result<(bool, f64, BbkMethod)> {
    let (probs, r) = finite_parts(problem, rep)?;
    let method = if r.dim <= 3 {
        BbkMethod::Exact
    } else {
        BbkMethod::Randomized(BBK_RANDOM_DIRECTIONS)
    };
    let random_dirs = match method {
        BbkMethod::Exact => Vec::new(),
        BbkMethod::Randomized(n) => random_directions(r.dim, n),
    };
    let mut witness = f64::INFINITY;
    for a in 0..r.n_arms {
        let feats: Vec<(f64, &[f64])> = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(x, &p)| (p, r.feature(x, a)))
            .collect();
        // u = 0 keeps every feature: this is the CMB matrix of the arm.
        let full = halfspace_moment(&feats, None, r.dim);
        witness = witness.min(full.lambda_min);
        if !full.full_rank() {
            return Ok((false, witness, method));
        }
        let dirs = match method {
            BbkMethod::Exact => {
                let normals: Vec<&[f64]> = feats
                    .iter()
                    .map(|(_, f)| *f)
                    .filter(|f| norm(f) > 0.0)
                    .collect();
                cell_representatives(&normals, r.dim)
            }
            BbkMethod::Randomized(_) => random_dirs.clone(),
        };
        for u in &dirs {
            let m = halfspace_moment(&feats, Some(u), r.dim);
            witness = witness.min(m.lambda_min);
            if !m.full_rank() {
                return Ok((false, witness, method));
            }
        }
    }
    Ok((true, witness, method))
}

fn halfspace_moment(feats: &[(f64, &[f64])], u: Option<&Vec<f64>>, d: usize) -> MomentMatrix {
    let mut m = DMatrix::zeros(d, d);
    for (p, f) in feats {
        if u.is_none_or(|u| dot(f, u) >= 0.0) {
            add_outer(&mut m, *p, f);
        }
    }
    MomentMatrix::from_matrix(m, Estimation::Exact)
}

fn random_directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(BBK_SEED);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm(&v);
        if s > 1e-12 {
            out.push(v.iter().map(|x| x / s).collect());
        }
    }
    out
}

/// One direction inside every open cell of the central arrangement with the
/// given hyperplane normals (`d <= 3`).
pub fn cell_representatives(normals: &[&[f64]], d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let normals2: Vec<[f64; 2]> = normals.iter().map(|n| [n[0], n[1]]).collect();
            sector_midpoints(&normals2)
                .into_iter()
                .map(|[a, b]| vec![a, b])
                .collect()
        }
        3 => cells_3d(normals),
        _ => panic!("exact cell enumeration supports d <= 3"),
    }
}

/// Midpoint directions of the angular sectors cut out by lines `n^T w = 0`.
fn sector_midpoints(normals: &[[f64; 2]]) -> Vec<[f64; 2]> {
    use std::f64::consts::{PI, TAU};
    let mut angles: Vec<f64> = Vec::with_capacity(2 * normals.len());
    for n in normals {
        if n[0] == 0.0 && n[1] == 0.0 {
            continue;
        }
        let base = n[1].atan2(n[0]) + PI / 2.0;
        for b in [base, base + PI] {
            angles.push(b.rem_euclid(TAU));
        }
    }
    if angles.is_empty() {
        return vec![[1.0, 0.0]];
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut out = Vec::with_capacity(angles.len());
    for i in 0..angles.len() {
        let lo = angles[i];
        let hi = if i + 1 < angles.len() {
            angles[i + 1]
        } else {
            angles[0] + TAU
        };
        let mid = 0.5 * (lo + hi);
        out.push([mid.cos(), mid.sin()]);
    }
    out
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn cells_3d(normals: &[&[f64]]) -> Vec<Vec<f64>> {
    // distinct plane directions up to scale
    let mut planes: Vec<[f64; 3]> = Vec::new();
    for n in normals {
        let s = norm(n);
        let unit = [n[0] / s, n[1] / s, n[2] / s];
        let dup = planes.iter().any(|p| norm(&cross(p, &unit)) < 1e-12);
        if !dup {
            planes.push(unit);
        }
    }
    match planes.len() {
        0 => return vec![vec![1.0, 0.0, 0.0]],
        1 => {
            let p = planes[0];
            return vec![p.to_vec(), p.iter().map(|v| -v).collect()];
        }
        _ => {}
    }
    let mut out = Vec::new();
    for i in 0..planes.len() {
        for j in (i + 1)..planes.len() {
            let c = cross(&planes[i], &planes[j]);
            let s = norm(&c);
            let v0 = [c[0] / s, c[1] / s, c[2] / s];
            for sign in [1.0, -1.0] {
                let v = [sign * v0[0], sign * v0[1], sign * v0[2]];
                out.extend(cells_around_vertex(&planes, v));
            }
        }
    }
    out
}

/// Cells of the arrangement touching the ray through `v`.
fn cells_around_vertex(planes: &[[f64; 3]], v: [f64; 3]) -> Vec<Vec<f64>> {
    let mut through = Vec::new();
    let mut margin = f64::INFINITY;
    for p in planes {
        let s = dot(p, &v);
        if s.abs() < 1e-12 {
            through.push(*p);
        } else {
            margin = margin.min(s.abs());
        }
    }
    let eps = if margin.is_finite() { 0.5 * margin } else { 0.5 };
    // orthonormal basis of the plane orthogonal to v
    let seed = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = {
        let c = cross(&v, &seed);
        let s = norm(&c);
        [c[0] / s, c[1] / s, c[2] / s]
    };
    let e2 = cross(&v, &e1);
    let projected: Vec<[f64; 2]> = through.iter().map(|p| [dot(p, &e1), dot(p, &e2)]).collect();
    sector_midpoints(&projected)
        .into_iter()
        .map(|[a, b]| {
            (0..3)
                .map(|k| v[k] + eps * (a * e1[k] + b * e2[k]))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DiversityReport {
    pub label: String,
    pub non_redundant: bool,
    pub cmb: bool,
    pub bbk: bool,
    pub hls: bool,
    pub wys: bool,
    /// `lambda_min(E[phi* phi*^T])`.
    pub lambda_hls: f64,
    /// Smallest eigenvalue above tolerance of the same matrix.
    pub lambda_plus: f64,
    pub bbk_method: BbkMethod,
    pub notes: Vec<String>,
}

pub fn diversity_report(problem: &ContextualProblem, rep: &Representation) -> Result<DiversityReport> {
    let optimal = moment_matrix(problem, rep, Which::Optimal)?;
    let (non_redundant, _) = check_condition(problem, rep, Condition::NonRedundant)?;
    let (cmb, _) = check_condition(problem, rep, Condition::Cmb)?;
    let (wys, _) = check_condition(problem, rep, Condition::Wys)?;
    let (bbk, _, bbk_method) = check_bbk(problem, rep)?;
    let mut notes = vec![
        "BBK requires per-direction positivity at the rank tolerance".to_string(),
    ];
    if let BbkMethod::Randomized(n) = bbk_method {
        notes.push(if bbk {
            format!("BBK true (randomized over {n} directions): evidence, not a certificate")
        } else {
            "BBK false: a deficient direction was found".to_string()
        });
    }
    if let Ok(gaps) = problem.gap_profile() {
        if gaps.tie_flags.iter().any(|&t| t) {
            notes.push("tied optimal arms resolved to the lowest index".to_string());
        }
    }
    Ok(DiversityReport {
        label: rep.label().to_string(),
        non_redundant,
        cmb,
        bbk,
        hls: optimal.full_rank(),
        wys,
        lambda_hls: optimal.lambda_min,
        lambda_plus: optimal.lambda_min_pos,
        bbk_method,
        notes,
    })
}

impl DiversityReport {
    /// The inclusion structure between conditions.
    pub fn inclusions_hold(&self) -> bool {
        let any = self.hls || self.cmb || self.bbk || self.wys;
        (!self.wys || (self.cmb && self.hls)) && (!self.bbk || self.cmb) && (!any || self.non_redundant)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MixedHlsReport {
    pub mixed_hls: bool,
    /// Row-major `N x K`: indices (into the checked list) of the representations covering each pair.
    pub coverage: Vec<Vec<usize>>,
    /// Positive-probability pairs covered by no representation.
    pub uncovered: Vec<(usize, usize)>,
    pub n_arms: usize,
}

/// Checks whether the image spaces of the optimal-feature moment matrices
/// jointly cover every positive-probability context-arm pair.
pub fn check_mixed_hls(problem: &ContextualProblem, reps: &[&Representation]) -> Result<MixedHlsReport> {
    if reps.is_empty() {
        return Err(Error::arg("mixed-HLS check needs at least one representation"));
    }
    let probs = problem
        .probs()
        .ok_or_else(|| Error::Unsupported("mixed-HLS needs a finite context set".into()))?;
    let k = problem.n_arms;
    let mut coverage = vec![Vec::new(); probs.len() * k];
    for (i, rep) in reps.iter().enumerate() {
        let (_, r) = finite_parts(problem, rep)?;
        if !r.is_realizable() {
            return Err(Error::arg(format!("representation '{}' is not realizable", r.label)));
        }
        let basis = moment_matrix(problem, rep, Which::Optimal)?.image_basis();
        for x in 0..probs.len() {
            for a in 0..k {
                if in_image(&basis, r.feature(x, a)) {
                    coverage[x * k + a].push(i);
                }
            }
        }
    }
    let uncovered: Vec<(usize, usize)> = (0..probs.len())
        .filter(|&x| probs[x] > 0.0)
        .flat_map(|x| (0..k).map(move |a| (x, a)))
        .filter(|&(x, a)| coverage[x * k + a].is_empty())
        .collect();
    Ok(MixedHlsReport {
        mixed_hls: uncovered.is_empty(),
        coverage,
        uncovered,
        n_arms: k,
    })
}

/// `||phi - B B^T phi|| <= rtol ||phi||` for an orthonormal column basis `B`.
pub fn in_image(basis: &DMatrix<f64>, phi: &[f64]) -> bool {
    let d = phi.len();
    let mut residual = phi.to_vec();
    for c in 0..basis.ncols() {
        let col = basis.column(c);
        let coef: f64 = (0..d).map(|j| col[j] * phi[j]).sum();
        for j in 0..d {
            residual[j] -= coef * col[j];
        }
    }
    norm(&residual) <= IMAGE_RESIDUAL_RTOL * norm(phi)
}
