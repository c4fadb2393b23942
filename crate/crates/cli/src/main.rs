use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};

use banditlab::bounds::{measured_inputs, regret_bound, tau_hls};
use banditlab::diversity::{check_condition, check_mixed_hls, diversity_report, Condition};
use banditlab::harness::{resolve_problem, run_to_dir, ExperimentConfig};
use banditlab::learners::Registry;
use banditlab::repgen::{preset, preset_description, PRESETS};
use banditlab::ContextualProblem;

#[derive(Parser)]
#[command(name = "banditlab", version, about = "Linear contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Base seed; run r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Update every base of policies with optional sharing.
        #[arg(long)]
        shared_updates: bool,
    },
    /// Named problem presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Gap structure and diversity conditions of every representation.
    Check {
        /// Preset name or problem JSON file.
        problem: String,
        /// Preset generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time-to-constant-regret and regret envelope per representation.
    Bounds {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Registered learning algorithms.
    Algorithms,
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Write a preset problem as JSON.
    Export {
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_any(problem: &str, seed: u64) -> Result<ContextualProblem> {
    if PRESETS.contains(&problem) {
        Ok(preset(problem, seed)?)
    } else {
        banditlab::io::load_problem(Path::new(problem)).with_context(|| format!("loading '{problem}'"))
    }
}

fn run(
    config_path: &Path,
    seed: Option<u64>,
    horizon: Option<u64>,
    runs: Option<usize>,
    out: Option<PathBuf>,
    shared_updates: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    if let Some(r) = runs {
        cfg.n_runs = r;
    }
    if shared_updates {
        cfg.shared_updates = true;
    }
    cfg.validate()?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out_dir = out
        .or_else(|| cfg.output.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("results"));
    let problem = resolve_problem(&cfg, Some(base))?;
    log::info!(
        "{}: {} runs x {} rounds, {} algorithms",
        problem.label,
        cfg.n_runs,
        cfg.horizon,
        cfg.algorithm_list(&problem).len()
    );
    let artifacts = run_to_dir(&problem, &cfg, &out_dir)?;
    let resolved = out_dir.join("config.resolved.toml");
    std::fs::write(&resolved, cfg.to_toml_string()?).with_context(|| format!("writing {}", resolved.display()))?;
    for (run_id, name, lines) in &artifacts.reports {
        for l in lines {
            log::info!("run {run_id} {name}: {l}");
        }
    }
    print!("{}", artifacts.summary.ranking_table());
    println!("trace:   {}", artifacts.trace_csv.display());
    println!("summary: {}", artifacts.summary_csv.display());
    println!("plot:    {}", artifacts.plot_svg.display());
    Ok(())
}

fn check(problem: &ContextualProblem) -> Result<()> {
    println!(
        "{}: {} arms, sigma {}, {} representations",
        problem.label,
        problem.n_arms,
        problem.noise_sigma,
        problem.representations.len()
    );
    if problem.is_finite() {
        let g = problem.gap_profile()?;
        println!(
            "contexts {}, min gap {:.6}, min positive gap {:.6}, max gap {:.6}, ties in {} contexts",
            problem.n_contexts().unwrap_or(0),
            g.min_gap,
            g.min_positive_gap,
            g.max_gap,
            g.tie_flags.iter().filter(|&&t| t).count()
        );
    } else {
        println!("continuous contexts: HLS only, moments estimated by Monte Carlo");
    }
    println!(
        "{:>3}  {:<14} {:>3} {:>9} {:>5} {:>5} {:>5} {:>5} {:>5} {:>11}",
        "#", "label", "d", "misspec", "nonr", "cmb", "bbk", "hls", "wys", "lambda_hls"
    );
    for (i, rep) in problem.representations.iter().enumerate() {
        if !problem.is_finite() {
            let (hls, lambda_hls) = check_condition(problem, rep, Condition::Hls)?;
            println!(
                "{:>3}  {:<14} {:>3} {:>9.2e} {:>5} {:>5} {:>5} {:>5} {:>5} {:>11.4e}",
                i,
                rep.label(),
                rep.dim(),
                rep.misspecification_level(),
                "-",
                "-",
                "-",
                hls,
                "-",
                lambda_hls
            );
            continue;
        }
        let r = diversity_report(problem, rep)?;
        println!(
            "{:>3}  {:<14} {:>3} {:>9.2e} {:>5} {:>5} {:>5} {:>5} {:>5} {:>11.4e}",
            i,
            r.label,
            rep.dim(),
            rep.misspecification_level(),
            r.non_redundant,
            r.cmb,
            r.bbk,
            r.hls,
            r.wys,
            r.lambda_hls
        );
    }
    if !problem.is_finite() {
        return Ok(());
    }
    let refs: Vec<_> = problem
        .representations
        .iter()
        .filter(|r| r.misspecification_level() == 0.0)
        .collect();
    if refs.is_empty() {
        println!("mixed-HLS: no realizable representation");
        return Ok(());
    }
    let mixed = check_mixed_hls(problem, &refs)?;
    println!(
        "mixed-HLS over the {} realizable representations: {} ({} of {} context-arm pairs uncovered)",
        refs.len(),
        mixed.mixed_hls,
        mixed.uncovered.len(),
        mixed.coverage.len()
    );
    Ok(())
}

fn bounds(problem: &ContextualProblem, horizon: u64, delta: f64, lambda: f64) -> Result<()> {
    if !problem.is_finite() {
        bail!("bounds need a finite problem");
    }
    let m = problem.representations.len();
    println!("{:>3}  {:<14} {:>11} {:>14} {:>14}", "#", "label", "lambda_hls", "tau", "regret bound");
    let mut envelope = f64::INFINITY;
    for i in 0..m {
        let (inputs, warnings) = measured_inputs(problem, i, delta, lambda)?.clamped();
        if i == 0 {
            for w in warnings {
                log::warn!("{w} for every representation");
            }
        }
        let tau = tau_hls(&inputs)?;
        let r = regret_bound(&inputs, horizon as f64, tau.tau, m)?;
        envelope = envelope.min(r);
        println!(
            "{:>3}  {:<14} {:>11.4e} {:>14.4e} {:>14.4e}{}",
            i,
            problem.representations[i].label(),
            inputs.lambda_hls,
            tau.tau,
            r,
            if tau.log_clamped { "  (log clamped)" } else { "" }
        );
    }
    println!("LEADER envelope at n = {horizon}: {envelope:.4e}");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            horizon,
            runs,
            out,
            shared_updates,
        } => run(&config, seed, horizon, runs, out, shared_updates),
        Command::Preset { action } => match action {
            PresetAction::List => {
                for name in PRESETS {
                    println!("{name:<12} {}", preset_description(name).unwrap_or(""));
                }
                Ok(())
            }
            PresetAction::Export { name, seed, out } => {
                let p = preset(&name, seed)?;
                banditlab::io::save_problem(&p, &out)?;
                println!("wrote {}", out.display());
                Ok(())
            }
        },
        Command::Check { problem, seed } => check(&load_any(&problem, seed)?),
        Command::Bounds {
            preset: name,
            seed,
            horizon,
            delta,
            lambda,
        } => bounds(&preset(&name, seed)?, horizon, delta, lambda),
        Command::Algorithms => {
            for (name, desc) in Registry::standard().describe() {
                println!("{name:<9} {desc}");
            }
            Ok(())
        }
    }
}
