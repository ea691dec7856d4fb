use std::fmt::Display;
use std::str::FromStr;

use super::TrialConfig;
use crate::error::{Error, Result};
use crate::rl::{TrainConfig, WeightTrainConfig};
use crate::valuenet::NetConfig;

/// Everything a run or training job can be configured with.
///
/// The text form is one `key = value` per line; `#` starts a comment.
/// Keys are the field names of the underlying structs. `max_decisions`
/// and `map_change_threshold` set both the trial and the training value,
/// `net` loads a preset before later keys refine it, and weight-head keys
/// carry a `weight_` prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub trial: TrialConfig,
    pub train: TrainConfig,
    pub net: NetConfig,
    pub weight: WeightTrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trial: TrialConfig::default(),
            train: TrainConfig::default(),
            net: NetConfig::tiny(),
            weight: WeightTrainConfig::default(),
        }
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|s| num(s.trim())).collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Sets one key; the error is the reason the value was rejected.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let (t, tr, n, w) = (&mut self.trial, &mut self.train, &mut self.net, &mut self.weight);
        let (laser, track) = (&mut t.sim.laser, &mut t.sim.track);
        match key {
            "trials" => t.trials = num(v)?,
            "seed" => t.seed = num(v)?,
            "done_ratio" => t.done_ratio = num(v)?,
            "max_decisions" => {
                t.max_decisions = num(v)?;
                tr.max_decisions = t.max_decisions;
            }
            "cost_weight" => t.cost_weight = num(v)?,
            "clusters" => {
                t.clusters = num(v)?;
                w.clusters = t.clusters;
            }
            "epsilon" => t.epsilon = num(v)?,
            "threads" => t.threads = num(v)?,
            "robot_radius" => t.sim.robot_radius = num(v)?,
            "max_commands_per_decision" => t.sim.max_commands_per_decision = num(v)?,
            "max_replans_per_decision" => t.sim.max_replans_per_decision = num(v)?,
            "map_change_threshold" => {
                t.sim.map_change_threshold = num(v)?;
                tr.map_change_threshold = t.sim.map_change_threshold;
            }
            "max_range" => laser.max_range = num(v)?,
            "fov" => laser.fov = num(v)?,
            "beam_count" => laser.beam_count = num(v)?,
            "noise_std" => laser.noise_std = num(v)?,
            "noise_mean" => laser.noise_mean = num(v)?,
            "linear_step" => track.linear_step = num(v)?,
            "angular_step" => track.angular_step = num(v)?,
            "replan_threshold" => track.replan_threshold = num(v)?,
            "goal_tolerance" => track.goal_tolerance = num(v)?,
            "gamma" => tr.gamma = num(v)?,
            "learning_rate" => tr.learning_rate = num(v)?,
            "target_sync_every" => tr.target_sync_every = num(v)?,
            "epsilon_decay_steps" => tr.epsilon_decay_steps = num(v)?,
            "epsilon_start" => tr.epsilon_start = num(v)?,
            "epsilon_end" => tr.epsilon_end = num(v)?,
            "learning_starts" => tr.learning_starts = num(v)?,
            "updates_per_env_step" => tr.updates_per_env_step = num(v)?,
            "batch_size" => tr.batch_size = num(v)?,
            "reward_action_coeff" => tr.reward_action_coeff = num(v)?,
            "explored_done_ratio" => tr.explored_done_ratio = num(v)?,
            "replay_capacity" => tr.replay_capacity = num(v)?,
            "max_updates" => tr.max_updates = num(v)?,
            "max_env_steps" => tr.max_env_steps = num(v)?,
            "checkpoint_every" => tr.checkpoint_every = num(v)?,
            "huber_delta" => tr.huber_delta = num(v)?,
            "net" => *n = NetConfig::preset(v).ok_or_else(|| format!("unknown network preset {v:?}"))?,
            "k_neighbors" => n.k_neighbors = num(v)?,
            "edgeconv_dims" => n.edgeconv_dims = list(v)?,
            "global_dim" => n.global_dim = num(v)?,
            "head_dims" => n.head_dims = list(v)?,
            "dynamic_graph" => n.dynamic_graph = num(v)?,
            "weight_episodes" => w.episodes = num(v)?,
            "weight_candidates" => w.candidates = list(v)?,
            "weight_learning_rate" => w.learning_rate = num(v)?,
            "weight_max_decisions" => w.max_decisions = num(v)?,
            "weight_freeze_trunk" => w.freeze_trunk = num(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every key with its current value, in the order `to_text` writes
    /// them.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (t, tr, n, w) = (&self.trial, &self.train, &self.net, &self.weight);
        let (laser, track) = (&t.sim.laser, &t.sim.track);
        vec![
            ("trials", t.trials.to_string()),
            ("seed", t.seed.to_string()),
            ("done_ratio", t.done_ratio.to_string()),
            ("max_decisions", t.max_decisions.to_string()),
            ("cost_weight", t.cost_weight.to_string()),
            ("clusters", t.clusters.to_string()),
            ("epsilon", t.epsilon.to_string()),
            ("threads", t.threads.to_string()),
            ("robot_radius", t.sim.robot_radius.to_string()),
            ("max_commands_per_decision", t.sim.max_commands_per_decision.to_string()),
            ("max_replans_per_decision", t.sim.max_replans_per_decision.to_string()),
            ("map_change_threshold", t.sim.map_change_threshold.to_string()),
            ("max_range", laser.max_range.to_string()),
            ("fov", laser.fov.to_string()),
            ("beam_count", laser.beam_count.to_string()),
            ("noise_std", laser.noise_std.to_string()),
            ("noise_mean", laser.noise_mean.to_string()),
            ("linear_step", track.linear_step.to_string()),
            ("angular_step", track.angular_step.to_string()),
            ("replan_threshold", track.replan_threshold.to_string()),
            ("goal_tolerance", track.goal_tolerance.to_string()),
            ("gamma", tr.gamma.to_string()),
            ("learning_rate", tr.learning_rate.to_string()),
            ("target_sync_every", tr.target_sync_every.to_string()),
            ("epsilon_decay_steps", tr.epsilon_decay_steps.to_string()),
            ("epsilon_start", tr.epsilon_start.to_string()),
            ("epsilon_end", tr.epsilon_end.to_string()),
            ("learning_starts", tr.learning_starts.to_string()),
            ("updates_per_env_step", tr.updates_per_env_step.to_string()),
            ("batch_size", tr.batch_size.to_string()),
            ("reward_action_coeff", tr.reward_action_coeff.to_string()),
            ("explored_done_ratio", tr.explored_done_ratio.to_string()),
            ("replay_capacity", tr.replay_capacity.to_string()),
            ("max_updates", tr.max_updates.to_string()),
            ("max_env_steps", tr.max_env_steps.to_string()),
            ("checkpoint_every", tr.checkpoint_every.to_string()),
            ("huber_delta", tr.huber_delta.to_string()),
            ("k_neighbors", n.k_neighbors.to_string()),
            ("edgeconv_dims", join(&n.edgeconv_dims)),
            ("global_dim", n.global_dim.to_string()),
            ("head_dims", join(&n.head_dims)),
            ("dynamic_graph", n.dynamic_graph.to_string()),
            ("weight_episodes", w.episodes.to_string()),
            ("weight_candidates", join(&w.candidates)),
            ("weight_learning_rate", w.learning_rate.to_string()),
            ("weight_max_decisions", w.max_decisions.to_string()),
            ("weight_freeze_trunk", w.freeze_trunk.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.trial.validate()?;
        self.train.validate()?;
        self.net.validate()
    }
}

/// Applies `key = value` lines on top of the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        cfg.set(key.trim(), value.trim())
            .map_err(|m| Error::Config(format!("line {}: {}: {m}", i + 1, key.trim())))?;
    }
    cfg.validate()?;
    Ok(cfg)
}
