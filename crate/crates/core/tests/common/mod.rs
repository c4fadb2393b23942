//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use banditlab::diversity::diversity_report;
use banditlab::problem::{finite_problem, problem_from_representation, uniform, FiniteRepresentation};
use banditlab::ContextualProblem;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Flags = (bool, bool, bool, bool, bool);

/// `rows[x][a]` is the feature of arm `a` in context `x`; rewards come from `theta = (1, 1)`.
pub fn problem(rows: &[&[[f64; 2]]]) -> ContextualProblem {
    let n = rows.len();
    let k = rows[0].len();
    let f: Vec<f64> = rows.iter().flat_map(|r| r.iter().flatten().copied()).collect();
    let rep = FiniteRepresentation::new(n, k, 2, f, vec![1.0, 1.0], "fixture").unwrap();
    problem_from_representation("fixture", uniform(n), rep, 0.1).unwrap()
}

/// Several representations over a shared reward table, each realizable with `theta = (1, 1)`.
pub fn mixed_problem(reps: &[&[&[[f64; 2]]]]) -> ContextualProblem {
    let n = reps[0].len();
    let k = reps[0][0].len();
    let built: Vec<FiniteRepresentation> = reps
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            let f: Vec<f64> = rows.iter().flat_map(|r| r.iter().flatten().copied()).collect();
            FiniteRepresentation::new(n, k, 2, f, vec![1.0, 1.0], format!("phi{}", i + 1)).unwrap()
        })
        .collect();
    let mu: Vec<f64> = (0..n)
        .flat_map(|x| (0..k).map(move |a| (x, a)))
        .map(|(x, a)| built[0].predicted_reward(x, a))
        .collect();
    finite_problem("mixed", uniform(n), k, mu, 0.1, built).unwrap()
}

/// `(non_redundant, cmb, bbk, hls, wys)` of the first representation; panics if the inclusions fail.
pub fn flags(p: &ContextualProblem) -> Flags {
    let r = diversity_report(p, &p.representations[0]).unwrap();
    assert!(r.inclusions_hold(), "{r:?}");
    (r.non_redundant, r.cmb, r.bbk, r.hls, r.wys)
}

pub fn nr_not_cmb() -> ContextualProblem {
    problem(&[&[[1.0, 1.0], [0.5, 0.5]], &[[0.0, 1.0], [1.0, 1.0]]])
}

pub fn cmb_not_hls() -> ContextualProblem {
    problem(&[&[[1.0, 1.0], [1.0, 0.0]], &[[0.0, 1.0], [1.0, 1.0]]])
}

pub fn hls_not_cmb() -> ContextualProblem {
    problem(&[&[[2.0, 0.0], [0.5, 0.5]], &[[0.0, 2.0], [0.5, 0.5]]])
}

pub fn hls_cmb_not_wys() -> ContextualProblem {
    problem(&[&[[2.0, 0.0], [1.0, 0.0]], &[[0.0, 2.0], [0.0, 1.0]]])
}

pub fn bbk_not_hls() -> ContextualProblem {
    problem(&[
        &[[2.0, 0.0], [0.0, 1.0]],
        &[[0.0, 1.0], [2.0, 0.0]],
        &[[-1.0, 0.0], [0.0, -2.0]],
        &[[0.0, -2.0], [-1.0, 0.0]],
    ])
}

pub fn bbk_not_wys() -> ContextualProblem {
    problem(&[
        &[[2.0, 0.0], [1.0, 0.0]],
        &[[0.0, 2.0], [0.0, 1.0]],
        &[[-1.0, 0.0], [-2.0, 0.0]],
        &[[0.0, -1.0], [0.0, -2.0]],
    ])
}

pub fn wys_not_bbk() -> ContextualProblem {
    problem(&[
        &[[2.0, 0.0], [1.0, 0.0]],
        &[[0.0, 2.0], [0.0, 1.0]],
        &[[1.0, 0.0], [2.0, 0.0]],
        &[[0.0, 1.0], [0.0, 2.0]],
    ])
}

pub fn all_conditions() -> ContextualProblem {
    problem(&[
        &[[2.0, 0.0], [1.0, 0.0]],
        &[[0.0, 2.0], [0.0, 1.0]],
        &[[-2.0, 0.0], [-1.0, 0.0]],
        &[[0.0, -2.0], [0.0, -1.0]],
    ])
}

/// The nine explicit two-dimensional examples with their expected flags.
/// The first two share one representation.
pub fn nine_fixtures() -> Vec<(&'static str, ContextualProblem, Flags)> {
    vec![
        ("non-redundant, not CMB", nr_not_cmb(), (true, false, false, false, false)),
        ("non-redundant, not HLS", nr_not_cmb(), (true, false, false, false, false)),
        ("CMB, not HLS", cmb_not_hls(), (true, true, false, false, false)),
        ("HLS, not CMB", hls_not_cmb(), (true, false, false, true, false)),
        ("HLS and CMB, not WYS", hls_cmb_not_wys(), (true, true, false, true, false)),
        ("BBK, not HLS", bbk_not_hls(), (true, true, true, false, false)),
        ("BBK and HLS, not WYS", bbk_not_wys(), (true, true, true, true, false)),
        ("WYS, not BBK", wys_not_bbk(), (true, true, false, true, true)),
        ("BBK, HLS and WYS", all_conditions(), (true, true, true, true, true)),
    ]
}

/// Checks the inclusion structure on `count` random integer representations
/// with `d <= 3`. Returns the number of representations satisfying each flag.
pub fn random_inclusions(count: usize, seed: u64) -> [usize; 5] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = [0usize; 5];
    for _ in 0..count {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=4);
        let k = rng.random_range(2..=3);
        let features: Vec<f64> = (0..n * k * d).map(|_| rng.random_range(-2..=2) as f64).collect();
        let param: Vec<f64> = (0..d).map(|_| rng.random_range(-1..=1) as f64).collect();
        let rep = FiniteRepresentation::new(n, k, d, features, param, "rand").unwrap();
        let p = problem_from_representation("rand", uniform(n), rep, 0.1).unwrap();
        let r = diversity_report(&p, &p.representations[0]).unwrap();
        assert!(r.inclusions_hold(), "{r:?}");
        for (i, f) in [r.non_redundant, r.cmb, r.bbk, r.hls, r.wys].into_iter().enumerate() {
            seen[i] += f as usize;
        }
    }
    seen
}

pub type Mat = Vec<Vec<f64>>;

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes. Ascending.
pub fn jacobi_eigenvalues(mut a: Mat) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Gaussian elimination with partial pivoting; returns the solution and `ln|det|`.
pub fn solve_and_logdet(mut a: Mat, mut b: Vec<f64>) -> (Vec<f64>, f64) {
    let n = a.len();
    let mut logdet = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        logdet += a[col][col].abs().ln();
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    (x, logdet)
}

pub fn gram_of(vectors: &[Vec<f64>], d: usize) -> Mat {
    let mut g = vec![vec![0.0; d]; d];
    for v in vectors {
        for i in 0..d {
            for j in 0..d {
                g[i][j] += v[i] * v[j];
            }
        }
    }
    g
}

pub fn to_dmatrix(m: &Mat) -> DMatrix<f64> {
    let d = m.len();
    DMatrix::from_fn(d, d, |i, j| m[i][j])
}
