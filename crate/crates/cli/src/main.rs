use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use explore_core::gridmap::{load_map, save_map, OccupancyGrid};
use explore_core::harness::{
    build_strategy, emit_plots, parse_config, run_scalability, run_trials, ExperimentConfig,
};
use explore_core::mapgen::{corridor_with_side_room, BUNDLED, LARGE};
use explore_core::rl::{train, train_weight_head, write_train_log, ExplorationEnv};
use explore_core::strategies::{Strategy, StrategyKind};
use explore_core::valuenet::{load_checkpoint, save_checkpoint};

/// Frontier-based exploration trials, training and plots.
#[derive(Parser)]
#[command(name = "explore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run paired-seed trials of one strategy and write CSV results.
    Run {
        /// Map file (PGM); repeat to cycle trials over several maps.
        #[arg(long, required = true)]
        map: Vec<PathBuf>,
        #[arg(long)]
        strategy: StrategyKind,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Network checkpoint for the weight and dqn strategies.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train the value network on every map in a directory.
    Train {
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render SVG plots from the CSV files of one or more runs.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One episode on a large map, reporting the cloud size.
    Scale {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        strategy: StrategyKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write the bundled maps as PGM files with sidecars; the large map and
    /// the corridor go to an `extra` subdirectory.
    Genmaps {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn strategy(kind: StrategyKind, cfg: &ExperimentConfig, model: Option<&Path>) -> Result<Strategy> {
    let net = match (kind.needs_network(), model) {
        (false, _) => None,
        (true, None) => bail!("strategy `{kind}` needs --model <checkpoint>"),
        (true, Some(p)) => Some(load_checkpoint(p, None).with_context(|| format!("loading {}", p.display()))?),
    };
    Ok(build_strategy(kind, &cfg.trial, net)?)
}

fn read_map(path: &Path) -> Result<OccupancyGrid> {
    load_map(path).with_context(|| format!("loading map {}", path.display()))
}

fn maps_in(dir: &Path) -> Result<Vec<OccupancyGrid>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm maps in {}", dir.display());
    }
    paths.iter().map(|p| read_map(p)).collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            map,
            strategy: kind,
            trials,
            seed,
            out,
            config,
            model,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(t) = trials {
                cfg.trial.trials = t;
            }
            if let Some(s) = seed {
                cfg.trial.seed = s;
            }
            let maps = map.iter().map(|p| read_map(p)).collect::<Result<Vec<_>>>()?;
            let strategy = strategy(kind, &cfg, model.as_deref())?;
            let report = run_trials(&maps, &strategy, &cfg.trial)?;
            report.save(&out)?;
            let s = &report.summary;
            let show = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.3}"));
            println!(
                "{}: {} trials, {} succeeded, {} failed; path length mean {} min {} variance {}",
                s.strategy,
                s.trials,
                s.succeeded,
                s.failed,
                show(s.mean),
                show(s.min),
                show(s.variance)
            );
            for r in &report.records {
                if let Err(e) = &r.outcome {
                    eprintln!("trial {} on {}: {e}", r.trial, r.map);
                }
            }
        }
        Command::Train { maps, config, out, seed } => {
            let cfg = load_config(config.as_deref())?;
            let maps = maps_in(&maps)?;
            let checkpoints = out.join("checkpoints");
            std::fs::create_dir_all(&checkpoints).with_context(|| format!("creating {}", checkpoints.display()))?;
            std::fs::write(out.join("config.txt"), cfg.to_text())?;
            let seed = seed.unwrap_or(cfg.trial.seed);
            let mut env = ExplorationEnv::new(&maps, cfg.trial.sim, cfg.train.clone())?;
            let outcome = train(&mut env, &cfg.net, &cfg.train, seed, Some(&checkpoints))?;
            std::fs::write(out.join("train_log.csv"), write_train_log(&outcome.log))?;
            println!(
                "{} updates over {} environment steps in {} episodes ({} cut off), {} target syncs",
                outcome.updates, outcome.env_steps, outcome.episodes, outcome.failed_episodes, outcome.syncs
            );
            let mut params = outcome.params;
            if cfg.weight.episodes > 0 {
                let losses = train_weight_head(&mut env, &mut params, &cfg.weight, seed ^ 0x5eed)?;
                let tail = &losses[losses.len().saturating_sub(50)..];
                if !tail.is_empty() {
                    println!(
                        "weight head: {} decisions, recent loss {:.4}",
                        losses.len(),
                        tail.iter().sum::<f64>() / tail.len() as f64
                    );
                }
            }
            let model = out.join("model.net");
            save_checkpoint(&params, &model)?;
            println!("wrote {}", model.display());
        }
        Command::Plot { input, out } => {
            for path in emit_plots(&input, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Scale {
            map,
            strategy: kind,
            seed,
            config,
            model,
        } => {
            let cfg = load_config(config.as_deref())?;
            let grid = read_map(&map)?;
            let strategy = strategy(kind, &cfg, model.as_deref())?;
            let report = run_scalability(&grid, &strategy, &cfg.trial, seed.unwrap_or(cfg.trial.seed))?;
            let name = grid.name().map_or_else(|| map.display().to_string(), str::to_owned);
            print!("{}", report.render(&name, kind.name()));
        }
        Command::Genmaps { out } => {
            let extra = out.join("extra");
            std::fs::create_dir_all(&extra).with_context(|| format!("creating {}", extra.display()))?;
            let maps = BUNDLED
                .iter()
                .map(|m| (&out, m.generate()))
                .chain([(&extra, LARGE.generate()), (&extra, corridor_with_side_room())]);
            for (dir, grid) in maps {
                let path = dir.join(format!("{}.pgm", grid.name().unwrap_or("map")));
                save_map(&grid, &path)?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
