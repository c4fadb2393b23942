//! Seeded multi-run experiments.
//!
//! Within a run every algorithm consumes the same round stream: one context
//! draw and one noise draw per arm per round, so the reward observed for
//! `(t, arm)` is identical across algorithms.

mod config;
mod export;
mod summary;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{default_algorithms, ExperimentConfig, WORKERS_ENV};
pub use export::{merge_run_files, read_csv, render_svg, write_csv, write_run_rows, CSV_HEADER};
pub use summary::{checkpoints, summarize, AlgorithmSummary, Summary};

use crate::error::{Error, Result};
use crate::learners::{BuildContext, Policy, Registry, Step};
use crate::problem::{Context, ContextualProblem, Round};

/// Per-step record of one algorithm in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub run_id: usize,
    pub seed: u64,
    pub algorithm: String,
    pub inst_regret: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub arm: Vec<usize>,
    pub selecting_rep: Vec<Option<usize>>,
    pub active_set_size: Vec<Option<usize>>,
}

impl RegretTrace {
    fn with_capacity(run_id: usize, seed: u64, algorithm: &str, n: usize) -> Self {
        RegretTrace {
            run_id,
            seed,
            algorithm: algorithm.to_string(),
            inst_regret: Vec::with_capacity(n),
            cum_regret: Vec::with_capacity(n),
            arm: Vec::with_capacity(n),
            selecting_rep: Vec::with_capacity(n),
            active_set_size: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.inst_regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inst_regret.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    /// Last round (1-based) with positive instantaneous regret, 0 if none.
    pub fn last_positive_regret(&self) -> u64 {
        self.inst_regret
            .iter()
            .rposition(|&r| r > 0.0)
            .map_or(0, |i| i as u64 + 1)
    }

    /// Whether every round after `from` (1-based, exclusive) has zero regret.
    pub fn zero_after(&self, from: u64) -> bool {
        self.last_positive_regret() <= from
    }
}

/// Everything one run produced: traces and the final policy objects.
pub struct RunOutput {
    pub run_id: usize,
    pub seed: u64,
    pub traces: Vec<RegretTrace>,
    pub policies: Vec<Box<dyn Policy>>,
}

/// Round generator shared by all algorithms of a run.
pub struct Stream<'a> {
    problem: &'a ContextualProblem,
    rng: ChaCha8Rng,
    blocks: Vec<Vec<f64>>,
    round: Round,
    t: u64,
    optimal_value: f64,
}

impl<'a> Stream<'a> {
    pub fn new(problem: &'a ContextualProblem, seed: u64) -> Self {
        let k = problem.n_arms;
        Stream {
            problem,
            rng: ChaCha8Rng::seed_from_u64(seed),
            blocks: problem
                .representations
                .iter()
                .map(|r| vec![0.0; k * r.dim()])
                .collect(),
            round: Round {
                context: Context::Index(0),
                noise: vec![0.0; k],
            },
            t: 0,
            optimal_value: 0.0,
        }
    }

    /// Draws the next round and fills the feature blocks of every representation.
    pub fn advance(&mut self) -> Result<()> {
        self.round = self.problem.sample_round(&mut self.rng);
        for (rep, block) in self.problem.representations.iter().zip(&mut self.blocks) {
            rep.write_block(self.round.context, block)?;
        }
        self.optimal_value = self.problem.optimal_arm(self.round.context).1;
        self.t += 1;
        Ok(())
    }

    pub fn step(&self) -> Step<'_> {
        Step {
            t: self.t,
            context: self.round.context,
            features: &self.blocks,
        }
    }

    pub fn round(&self) -> &Round {
        &self.round
    }

    pub fn reward(&self, arm: usize) -> f64 {
        self.round.noisy_reward(self.problem, arm)
    }

    /// Pseudo-regret of `arm` in the current round, from the true means.
    pub fn regret(&self, arm: usize) -> f64 {
        self.optimal_value - self.problem.mean_reward(self.round.context, arm)
    }
}

/// Policy seed for algorithm `index` of a run.
pub fn policy_seed(run_seed: u64, index: usize) -> u64 {
    run_seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1)
}

/// Problem described by the configuration, with the noise override applied.
pub fn resolve_problem(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<ContextualProblem> {
    let mut problem = if crate::repgen::PRESETS.contains(&config.problem.as_str()) {
        crate::repgen::preset(&config.problem, config.problem_seed)?
    } else {
        let path = match base_dir {
            Some(dir) => dir.join(&config.problem),
            None => config.problem.clone().into(),
        };
        crate::io::load_problem(&path)?
    };
    if let Some(s) = config.sigma {
        problem.noise_sigma = s;
    }
    problem.validate()?;
    Ok(problem)
}

/// Builds the configured policies for one run.
pub fn build_policies(
    problem: &ContextualProblem,
    config: &ExperimentConfig,
    registry: &Registry,
    run_seed: u64,
) -> Result<Vec<Box<dyn Policy>>> {
    let specs = config.algorithm_list(problem);
    let mut out = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let ctx = BuildContext {
            problem,
            delta: config.delta,
            lambda: config.lambda,
            horizon: config.horizon,
            seed: policy_seed(run_seed, i),
            schedule: config.schedule,
            shared_updates: config.shared_updates,
        };
        out.push(registry.build(spec, &ctx)?);
    }
    let mut names: Vec<&str> = out.iter().map(|p| p.name()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!(
            "two algorithms share the name '{}'; set `label` to tell them apart",
            w[0]
        )));
    }
    Ok(out)
}

/// Runs one seed of the experiment in lockstep.
pub fn run_single(
    problem: &ContextualProblem,
    config: &ExperimentConfig,
    registry: &Registry,
    run_id: usize,
) -> Result<RunOutput> {
    let seed = config.run_seed(run_id);
    let mut policies = build_policies(problem, config, registry, seed)?;
    let n = config.horizon as usize;
    let mut traces: Vec<RegretTrace> = policies
        .iter()
        .map(|p| RegretTrace::with_capacity(run_id, seed, p.name(), n))
        .collect();
    let mut stream = Stream::new(problem, seed);
    let mut cum = vec![0.0; policies.len()];
    for _ in 0..n {
        stream.advance()?;
        let step = stream.step();
        for ((policy, trace), c) in policies.iter_mut().zip(&mut traces).zip(&mut cum) {
            let decision = policy.select(&step);
            if decision.arm >= problem.n_arms {
                return Err(Error::Construction(format!(
                    "'{}' chose arm {} of {}",
                    policy.name(),
                    decision.arm,
                    problem.n_arms
                )));
            }
            let reward = stream.reward(decision.arm);
            policy.update(&step, decision.arm, reward);
            let r = stream.regret(decision.arm);
            *c += r;
            trace.inst_regret.push(r);
            trace.cum_regret.push(*c);
            trace.arm.push(decision.arm);
            trace.selecting_rep.push(decision.selecting_rep);
            trace.active_set_size.push(policy.active_set_size());
        }
    }
    Ok(RunOutput {
        run_id,
        seed,
        traces,
        policies,
    })
}

/// Worker pool sized from `BANDITLAB_WORKERS`, or rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} = '{v}' is not a worker count")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every seed in parallel and reduces each run with `reduce` on its worker.
/// Results come back in run order.
pub fn run_experiment_map<T, F>(
    problem: &ContextualProblem,
    config: &ExperimentConfig,
    registry: &Registry,
    reduce: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RunOutput) -> Result<T> + Sync,
{
    config.validate()?;
    let pool = worker_pool()?;
    pool.install(|| {
        (0..config.n_runs)
            .into_par_iter()
            .map(|r| run_single(problem, config, registry, r).and_then(&reduce))
            .collect()
    })
}

/// All traces of all runs, run-major.
pub fn run_experiment(problem: &ContextualProblem, config: &ExperimentConfig) -> Result<Vec<RegretTrace>> {
    let registry = Registry::standard();
    let runs = run_experiment_map(problem, config, &registry, |out| Ok(out.traces))?;
    Ok(runs.into_iter().flatten().collect())
}

/// Files produced by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: Summary,
    pub trace_csv: std::path::PathBuf,
    pub summary_csv: std::path::PathBuf,
    pub plot_svg: std::path::PathBuf,
    pub reports: Vec<(usize, String, Vec<String>)>,
}

/// Runs the experiment, streaming per-run CSV files, then merges them and
/// writes the summary table and the plot.
pub fn run_to_dir(problem: &ContextualProblem, config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let parts = out_dir.join("runs.partial");
    std::fs::create_dir_all(&parts).map_err(|e| Error::io(&parts, e))?;
    let grid = checkpoints(config.horizon, config.checkpoints);
    let registry = Registry::standard();
    let per_run = run_experiment_map(problem, config, &registry, |out| {
        let path = parts.join(format!("run_{:05}.csv", out.run_id));
        write_run_rows(&path, &out.traces, config.csv_stride)?;
        let values: Vec<(String, Vec<f64>)> = out
            .traces
            .iter()
            .map(|tr| {
                let v = grid.iter().map(|&t| tr.cum_regret[t as usize - 1]).collect();
                (tr.algorithm.clone(), v)
            })
            .collect();
        let reports: Vec<(usize, String, Vec<String>)> = out
            .policies
            .iter()
            .map(|p| (out.run_id, p.name().to_string(), p.report()))
            .collect();
        Ok((path, values, reports))
    })?;
    let trace_csv = out_dir.join("trace.csv");
    let files: Vec<_> = per_run.iter().map(|(p, _, _)| p.clone()).collect();
    merge_run_files(&files, &trace_csv)?;
    std::fs::remove_dir_all(&parts).map_err(|e| Error::io(&parts, e))?;

    let summary = Summary::from_checkpoint_values(
        grid,
        per_run.iter().map(|(_, v, _)| v.as_slice()),
    )?;
    let summary_csv = out_dir.join("summary.csv");
    summary.write_csv(&summary_csv)?;
    let plot_svg = out_dir.join("regret.svg");
    let svg = render_svg(&summary, &problem.label, config.log_x);
    std::fs::write(&plot_svg, svg).map_err(|e| Error::io(&plot_svg, e))?;
    let reports = per_run.into_iter().flat_map(|(_, _, r)| r).collect();
    Ok(RunArtifacts {
        summary,
        trace_csv,
        summary_csv,
        plot_svg,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::AlgorithmSpec;

    fn small_config(problem: &str) -> ExperimentConfig {
        ExperimentConfig {
            problem: problem.into(),
            horizon: 200,
            n_runs: 2,
            algorithms: vec![AlgorithmSpec::named("linucb").with_rep(0), AlgorithmSpec::named("leader")],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn horizon_one() {
        let cfg = ExperimentConfig { horizon: 1, n_runs: 1, ..small_config("fig1") };
        let p = resolve_problem(&cfg, None).unwrap();
        let tr = run_experiment(&p, &cfg).unwrap();
        assert_eq!(tr.len(), 2);
        for t in &tr {
            assert_eq!(t.len(), 1);
            assert_eq!(t.cum_regret[0], t.inst_regret[0]);
        }
    }

    #[test]
    fn repeatable() {
        let cfg = small_config("fig1");
        let p = resolve_problem(&cfg, None).unwrap();
        assert_eq!(run_experiment(&p, &cfg).unwrap(), run_experiment(&p, &cfg).unwrap());
    }

    #[test]
    fn continuous_runs_and_glr_is_rejected() {
        let cfg = small_config("continuous");
        let p = resolve_problem(&cfg, None).unwrap();
        assert_eq!(run_experiment(&p, &cfg).unwrap().len(), 4);
        let bad = ExperimentConfig {
            algorithms: vec![AlgorithmSpec::named("glr_bai").with_rep(0)],
            ..cfg
        };
        assert!(run_experiment(&p, &bad).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let cfg = ExperimentConfig {
            algorithms: vec![AlgorithmSpec::named("leader"), AlgorithmSpec::named("leader")],
            ..small_config("fig1")
        };
        let p = resolve_problem(&cfg, None).unwrap();
        assert!(run_experiment(&p, &cfg).is_err());
    }
}
