//! Trial runner: paired-seed episodes, summary statistics, CSV and SVG
//! output, and the large-map scalability run.

mod config;
mod csv;
mod plot;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gridmap::{Cell, OccupancyGrid, Pose};
use crate::sim::{random_start_pose, Explorer, NavStatus, SimConfig};
use crate::strategies::{DecisionContext, Strategy, StrategyKind, DEFAULT_CLUSTERS, DEFAULT_COST_WEIGHT};
use crate::valuenet::NetworkParams;

pub use config::{parse_config, ExperimentConfig};
pub use csv::{
    parse_curves_csv, parse_trajectories_csv, parse_trials_csv, write_curves_csv, write_decisions_csv,
    write_summary_csv, write_trajectories_csv, write_trials_csv, CurveRow, TrajectoryRow, TrialRow, CURVES_HEADER,
    DECISIONS_HEADER, SUMMARY_HEADER, TRAJECTORIES_HEADER, TRIALS_HEADER,
};
pub use plot::{boxplot_svg, curves_svg, emit_plots, trajectory_svg};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialConfig {
    pub trials: usize,
    pub seed: u64,
    /// Explored ratio that ends an episode successfully.
    pub done_ratio: f64,
    /// Decisions before an episode is cut off as a failure.
    pub max_decisions: usize,
    pub sim: SimConfig,
    pub cost_weight: f64,
    pub clusters: usize,
    /// Exploration rate of the dqn strategy at evaluation time.
    pub epsilon: f64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            trials: 20,
            seed: 0,
            done_ratio: 0.95,
            max_decisions: 2000,
            sim: SimConfig::default(),
            cost_weight: DEFAULT_COST_WEIGHT,
            clusters: DEFAULT_CLUSTERS,
            epsilon: 0.0,
            threads: 0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.done_ratio > 0.0 && self.done_ratio <= 1.0) {
            return Err(Error::Config(format!("done_ratio {} is outside (0, 1]", self.done_ratio)));
        }
        if self.max_decisions == 0 {
            return Err(Error::Config("max_decisions must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cost_weight) {
            return Err(Error::Config(format!("cost_weight {} is outside [0, 1]", self.cost_weight)));
        }
        if self.clusters == 0 {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} is outside [0, 1]", self.epsilon)));
        }
        self.sim.laser.validate()
    }
}

/// Builds a strategy with the trial's cost weight, cluster count and
/// evaluation epsilon.
pub fn build_strategy(kind: StrategyKind, cfg: &TrialConfig, net: Option<NetworkParams>) -> Result<Strategy> {
    Ok(match Strategy::from_kind(kind, net)? {
        Strategy::Cost { .. } => Strategy::Cost {
            weight: cfg.cost_weight,
            clusters: cfg.clusters,
        },
        Strategy::Weight { net, .. } => Strategy::Weight {
            net,
            clusters: cfg.clusters,
        },
        Strategy::Dqn { net, .. } => Strategy::Dqn {
            net,
            epsilon: cfg.epsilon,
        },
        s => s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    /// Meters.
    pub path_length: f64,
    pub explored_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionRecord {
    pub pose: Pose,
    pub frontier: Cell,
    /// Size of the 4D cloud the decision was made on.
    pub cloud_points: usize,
    pub frontier_points: usize,
    /// Length of the trajectory when the decision was made.
    pub trajectory_index: usize,
    pub status: NavStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub start: Pose,
    /// Path length when the episode ended; the length at the done ratio
    /// when `success` holds.
    pub path_length_at_done: f64,
    pub final_ratio: f64,
    /// One sample at the start and one after every decision. The ratio is
    /// the best seen so far, since noisy scans can turn a free cell back
    /// into an obstacle.
    pub curve: Vec<CurvePoint>,
    pub decisions: Vec<DecisionRecord>,
    pub trajectory: Vec<(f64, f64)>,
    pub success: bool,
    /// Seconds.
    pub wall_time: f64,
}

impl EpisodeMetrics {
    /// Decision index owning each trajectory point.
    pub fn trajectory_decisions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.trajectory.len());
        let mut d = 0;
        for k in 0..self.trajectory.len() {
            while d + 1 < self.decisions.len() && self.decisions[d + 1].trajectory_index <= k {
                d += 1;
            }
            out.push(d);
        }
        out
    }

    pub fn peak_cloud_points(&self) -> usize {
        self.decisions.iter().map(|d| d.cloud_points).max().unwrap_or(0)
    }
}

/// Start-pose and episode random streams derived from one seed.
fn episode_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut start = ChaCha8Rng::seed_from_u64(seed);
    start.set_stream(0);
    let mut run = ChaCha8Rng::seed_from_u64(seed);
    run.set_stream(1);
    (start, run)
}

/// The start pose `run_episode` uses for `seed`.
pub fn start_pose(map: &OccupancyGrid, cfg: &TrialConfig, seed: u64) -> Result<Pose> {
    let (mut rng, _) = episode_rngs(seed);
    random_start_pose(map, cfg.sim.robot_radius, &mut rng)
}

/// Spin, then decide and navigate until the done ratio is reached, no
/// frontier is left, or the decision cap is hit.
pub fn run_episode(map: &OccupancyGrid, strategy: &Strategy, cfg: &TrialConfig, seed: u64) -> Result<EpisodeMetrics> {
    cfg.validate()?;
    let clock = Instant::now();
    let (mut start_rng, mut rng) = episode_rngs(seed);
    let start = random_start_pose(map, cfg.sim.robot_radius, &mut start_rng)?;
    let mut explorer = Explorer::new(map, start, cfg.sim, &mut rng)?;
    let mut best = explorer.explored_ratio();
    let mut curve = vec![CurvePoint {
        path_length: 0.0,
        explored_ratio: best,
    }];
    let mut decisions = Vec::new();
    let mut success = false;

    loop {
        if explorer.explored_ratio() >= cfg.done_ratio {
            success = true;
            break;
        }
        if decisions.len() >= cfg.max_decisions {
            break;
        }
        let obs = explorer.observe()?;
        if obs.cloud.frontier.is_empty() {
            break;
        }
        let choice = {
            let mut ctx = DecisionContext {
                cloud: &obs.cloud,
                observed: explorer.observed(),
                laser: &cfg.sim.laser,
                rng: &mut rng as &mut dyn RngCore,
            };
            strategy.select(&mut ctx)?
        };
        let pose = explorer.pose();
        let trajectory_index = explorer.trajectory().len();
        let outcome = explorer.navigate(choice.cell, &mut rng)?;
        decisions.push(DecisionRecord {
            pose,
            frontier: choice.cell,
            cloud_points: obs.cloud.len(),
            frontier_points: obs.cloud.frontier.len(),
            trajectory_index,
            status: outcome.status,
        });
        best = best.max(explorer.explored_ratio());
        curve.push(CurvePoint {
            path_length: explorer.path_length(),
            explored_ratio: best,
        });
    }

    Ok(EpisodeMetrics {
        start,
        path_length_at_done: explorer.path_length(),
        final_ratio: explorer.explored_ratio(),
        curve,
        decisions,
        trajectory: explorer.trajectory().to_vec(),
        success,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// Seeds of the first `n` trials; independent of the strategy, so every
/// strategy sees the same maps and start poses.
pub fn trial_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

fn map_name(map: &OccupancyGrid, index: usize) -> String {
    map.name().map(str::to_owned).unwrap_or_else(|| format!("map{index}"))
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub map: String,
    pub seed: u64,
    /// The error message when the episode could not run.
    pub outcome: std::result::Result<EpisodeMetrics, String>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> Option<&EpisodeMetrics> {
        self.outcome.as_ref().ok().filter(|m| m.success)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub strategy: String,
    pub trials: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Statistics over successful trials only; `None` when there are none.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    /// Population variance.
    pub variance: Option<f64>,
}

impl Summary {
    pub fn from_lengths(strategy: &str, trials: usize, lengths: &[f64]) -> Self {
        let n = lengths.len();
        let (mean, min, variance) = if n == 0 {
            (None, None, None)
        } else {
            let mean = lengths.iter().sum::<f64>() / n as f64;
            let min = lengths.iter().copied().fold(f64::INFINITY, f64::min);
            let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64;
            (Some(mean), Some(min), Some(var))
        };
        Summary {
            strategy: strategy.to_owned(),
            trials,
            succeeded: n,
            failed: trials - n,
            mean,
            min,
            variance,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialReport {
    pub strategy: String,
    /// Sorted by trial index.
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

impl TrialReport {
    /// Path lengths of successful trials in trial order.
    pub fn lengths(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.succeeded().map(|m| m.path_length_at_done))
            .collect()
    }

    /// Writes `trials_`, `curves_`, `trajectories_`, `decisions_` and
    /// `summary_<strategy>.csv` into `dir`.
    pub fn save(&self, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let s = &self.strategy;
        let files = [
            (format!("trials_{s}.csv"), write_trials_csv(self)),
            (format!("curves_{s}.csv"), write_curves_csv(self)),
            (format!("trajectories_{s}.csv"), write_trajectories_csv(self)),
            (format!("decisions_{s}.csv"), write_decisions_csv(self)),
            (format!("summary_{s}.csv"), write_summary_csv(&[self.summary.clone()])),
        ];
        let mut out = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Runs `cfg.trials` episodes. Trial `i` uses map `i mod maps.len()` and the
/// `i`-th trial seed. Trials run in parallel; failed trials are kept in the
/// report but left out of the statistics.
pub fn run_trials(maps: &[OccupancyGrid], strategy: &Strategy, cfg: &TrialConfig) -> Result<TrialReport> {
    cfg.validate()?;
    if maps.is_empty() {
        return Err(Error::Config("trials need at least one map".into()));
    }
    let seeds = trial_seeds(cfg.seed, cfg.trials);
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(cfg.trials);
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(cfg.trials));
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfg.trials {
                    break;
                }
                let m = i % maps.len();
                let outcome = run_episode(&maps[m], strategy, cfg, seeds[i]).map_err(|e| e.to_string());
                let record = TrialRecord {
                    trial: i,
                    map: map_name(&maps[m], m),
                    seed: seeds[i],
                    outcome,
                };
                results.lock().expect("no worker panicked").push(record);
            });
        }
    });
    let mut records = results.into_inner().expect("no worker panicked");
    records.sort_by_key(|r| r.trial);
    let name = strategy.kind().name().to_owned();
    let mut report = TrialReport {
        summary: Summary::from_lengths(&name, cfg.trials, &[]),
        strategy: name,
        records,
    };
    report.summary = Summary::from_lengths(&report.strategy, cfg.trials, &report.lengths());
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct ScaleReport {
    pub metrics: EpisodeMetrics,
    pub total_cells: usize,
    pub peak_cloud_points: usize,
    /// Largest cloud size over all decisions as a fraction of the map.
    pub peak_fraction: f64,
}

impl ScaleReport {
    /// The cloud never reached `fraction` of the map's cells.
    pub fn within(&self, fraction: f64) -> bool {
        self.peak_fraction < fraction
    }

    pub fn render(&self, map: &str, strategy: &str) -> String {
        let m = &self.metrics;
        format!(
            "map {map} ({} cells), strategy {strategy}\n\
             success {} after {} decisions, path {:.2} m, explored {:.3}, {:.2} s\n\
             peak cloud {} points ({:.2}% of cells)\n\
             the map was used at full resolution; no resizing or padding\n",
            self.total_cells,
            m.success,
            m.decisions.len(),
            m.path_length_at_done,
            m.final_ratio,
            m.wall_time,
            self.peak_cloud_points,
            100.0 * self.peak_fraction,
        )
    }
}

/// One episode on a large map, reporting the cloud size against the cell
/// count.
pub fn run_scalability(map: &OccupancyGrid, strategy: &Strategy, cfg: &TrialConfig, seed: u64) -> Result<ScaleReport> {
    let metrics = run_episode(map, strategy, cfg, seed)?;
    let peak = metrics.peak_cloud_points();
    Ok(ScaleReport {
        total_cells: map.len(),
        peak_cloud_points: peak,
        peak_fraction: peak as f64 / map.len() as f64,
        metrics,
    })
}
