use clap::{Parser, Subcommand};
use neumann_pinn::harness::{self, metrics_to_csv, ReferenceRule, RunConfig, RunMetrics};
use neumann_pinn::oracle::FourierSeriesSolution;
use neumann_pinn::{builtin_problem, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "neumann-pinn",
    about = "PINN solver for the 1D diffusion equation with hard-constrained Neumann boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single configuration and write metrics, loss history, and the
    /// best-loss checkpoint.
    Run {
        /// Path to a TOML run config.
        config: PathBuf,
        /// Output directory (default: runs/<config-stem>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the published scale: 3x100 network, 2e4/500/1e3 points, 1e6 iterations.
        #[arg(long)]
        paper_scale: bool,
        /// Override a seed, e.g. --seed-override weights=7 (repeatable).
        #[arg(long = "seed-override")]
        seed_overrides: Vec<String>,
    },
    /// Run every *.toml config in a directory and emit a comparison table
    /// of relative improvements.
    Suite {
        /// Directory containing run configs.
        configs: PathBuf,
        #[arg(long, default_value = "suite-out")]
        out: PathBuf,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long = "seed-override")]
        seed_overrides: Vec<String>,
        /// Fixed-time mode: give every run the wall-clock budget the
        /// soft-strategy run of its problem needs for this many iterations.
        #[arg(long)]
        fixed_time_iters: Option<u64>,
        /// Reference selection: "best-soft" or "strategy:embedding_kind".
        #[arg(long, default_value = "best-soft")]
        reference: String,
    },
    /// Measure mean wall-clock per training iteration.
    Probe {
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        warmup: u64,
        #[arg(long, default_value_t = 50)]
        iters: u64,
        #[arg(long)]
        paper_scale: bool,
    },
    /// Dump the analytic series solution of a built-in problem as CSV.
    Oracle {
        /// Problem name (low_frequency, high_frequency, multiscale,
        /// polynom3, polynom4).
        problem: String,
        #[arg(long, default_value = "oracle.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        nx: usize,
        #[arg(long, default_value_t = 101)]
        nt: usize,
        #[arg(long, default_value_t = 200)]
        series_terms: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(exit) => std::process::exit(exit),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out, paper_scale, seed_overrides } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_common(&mut cfg, paper_scale, &seed_overrides)?;
            let stem = config
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "run".to_string());
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(&stem));
            let metrics = harness::run(&cfg)?;
            write_run_outputs(&out, &metrics)?;
            println!(
                "{} {} {}: iters={} best_loss={:.3e} rel_l2={:.3e}{}",
                metrics.row.problem,
                metrics.row.strategy,
                metrics.row.embedding_kind,
                metrics.row.iters,
                metrics.row.best_loss,
                metrics.row.rel_l2,
                if metrics.diverged { " DIVERGED" } else { "" }
            );
            println!("outputs in {}", out.display());
            Ok(if metrics.diverged { 2 } else { 0 })
        }
        Command::Suite {
            configs,
            out,
            paper_scale,
            seed_overrides,
            fixed_time_iters,
            reference,
        } => {
            let rule = parse_reference(&reference)?;
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&configs)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            entries.sort();
            if entries.is_empty() {
                return Err(neumann_pinn::Error::Config(format!(
                    "no .toml configs in {}",
                    configs.display()
                )));
            }
            let mut cfgs = Vec::new();
            for path in &entries {
                let mut cfg = RunConfig::load(path)?;
                apply_common(&mut cfg, paper_scale, &seed_overrides)?;
                cfgs.push((path.clone(), cfg));
            }
            if let Some(target_iters) = fixed_time_iters {
                apply_fixed_time(&mut cfgs, target_iters)?;
            }
            let mut all = Vec::new();
            let mut any_diverged = false;
            for (path, cfg) in &cfgs {
                let stem = path.file_stem().unwrap().to_string_lossy().to_string();
                println!("running {stem} ...");
                let metrics = harness::run(cfg)?;
                any_diverged |= metrics.diverged;
                write_run_outputs(&out.join(&stem), &metrics)?;
                println!(
                    "  {} {} {}: rel_l2={:.3e}{}",
                    metrics.row.problem,
                    metrics.row.strategy,
                    metrics.row.embedding_kind,
                    metrics.row.rel_l2,
                    if metrics.diverged { " DIVERGED" } else { "" }
                );
                all.push(metrics);
            }
            let rows = harness::compare_suite(&all, &rule)?;
            let table = metrics_to_csv(&rows);
            std::fs::write(out.join("comparison.csv"), &table)?;
            println!("\n{table}");
            println!("comparison written to {}", out.join("comparison.csv").display());
            Ok(if any_diverged { 2 } else { 0 })
        }
        Command::Probe { config, warmup, iters, paper_scale } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_common(&mut cfg, paper_scale, &[])?;
            let ms = harness::timing_probe(&cfg, warmup, iters)?;
            println!("{ms:.3} ms/iteration (warmup {warmup}, measured {iters})");
            Ok(0)
        }
        Command::Oracle { problem, out, nx, nt, series_terms } => {
            let p = builtin_problem(&problem)?;
            let sol = FourierSeriesSolution::for_problem(&p, series_terms)?;
            std::fs::write(&out, sol.to_csv(nx, nt))?;
            println!("oracle for {problem} ({nx}x{nt} grid) written to {}", out.display());
            Ok(0)
        }
    }
}

fn apply_common(cfg: &mut RunConfig, paper_scale: bool, overrides: &[String]) -> Result<()> {
    if paper_scale {
        cfg.apply_paper_scale();
    }
    for spec in overrides {
        cfg.override_seed(spec)?;
    }
    Ok(())
}

fn parse_reference(s: &str) -> Result<ReferenceRule> {
    if s == "best-soft" {
        return Ok(ReferenceRule::BestSoft);
    }
    match s.split_once(':') {
        Some((strategy, kind)) => Ok(ReferenceRule::Named {
            strategy: strategy.to_string(),
            embedding_kind: kind.to_string(),
        }),
        None => Err(neumann_pinn::Error::Parse(format!(
            "reference must be 'best-soft' or 'strategy:embedding_kind', got '{s}'"
        ))),
    }
}

/// Fixed-time protocol: per problem, probe the soft run and give every run
/// the wall-clock budget the soft run needs for `target_iters` iterations.
fn apply_fixed_time(cfgs: &mut [(PathBuf, RunConfig)], target_iters: u64) -> Result<()> {
    let mut budgets: Vec<(String, f64)> = Vec::new();
    for (_, cfg) in cfgs.iter() {
        let problem = cfg.build_problem()?.name;
        if budgets.iter().any(|(p, _)| p == &problem) {
            continue;
        }
        if cfg.constraint.strategy != neumann_pinn::Strategy::Soft {
            continue;
        }
        println!("probing soft baseline for {problem} ...");
        let ms = harness::timing_probe(cfg, 10, 30)?;
        budgets.push((problem, ms * target_iters as f64 / 1000.0));
    }
    for (_, cfg) in cfgs.iter_mut() {
        let problem = cfg.build_problem()?.name;
        let budget = budgets
            .iter()
            .find(|(p, _)| p == &problem)
            .map(|(_, b)| *b)
            .ok_or_else(|| {
                neumann_pinn::Error::Config(format!(
                    "fixed-time mode needs a soft-strategy config for problem '{problem}'"
                ))
            })?;
        cfg.training.iterations = None;
        cfg.training.wall_clock_secs = Some(budget);
    }
    Ok(())
}

fn write_run_outputs(dir: &Path, metrics: &RunMetrics) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("metrics.csv"),
        metrics_to_csv(std::slice::from_ref(&metrics.row)),
    )?;
    std::fs::write(
        dir.join("loss_history.csv"),
        harness::history_to_csv(&metrics.history),
    )?;
    std::fs::write(dir.join("config_echo.toml"), &metrics.config_echo)?;
    metrics.best_params.save(&dir.join("checkpoint.npc"))?;
    Ok(())
}
