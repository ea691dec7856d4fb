//! Double DQN over a variable action space: the actions available in a
//! state are exactly its frontier points.

mod env;
mod train;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::frontier::PointCloud4D;
use crate::gridmap::Pose;
use crate::strategies::argmax;
use crate::valuenet::{self, NetworkParams};

pub use env::{ChainMdp, Environment, ExplorationEnv, StepResult};
pub use train::{
    train, train_weight_head, write_train_log, TrainLogRow, TrainOutcome, WeightTrainConfig, TRAIN_LOG_HEADER,
};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub target_sync_every: usize,
    pub epsilon_decay_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub learning_starts: usize,
    pub updates_per_env_step: usize,
    pub batch_size: usize,
    /// Penalty per movement command.
    pub reward_action_coeff: f64,
    pub explored_done_ratio: f64,
    pub map_change_threshold: usize,
    pub replay_capacity: usize,
    /// Decisions per episode before it is cut off as a failure.
    pub max_decisions: usize,
    /// Total gradient updates before training stops.
    pub max_updates: usize,
    /// Environment steps before training stops, whether or not the update
    /// budget was used.
    pub max_env_steps: usize,
    pub checkpoint_every: usize,
    pub huber_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            learning_rate: 0.001,
            target_sync_every: 4000,
            epsilon_decay_steps: 15_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            learning_starts: 3000,
            updates_per_env_step: 32,
            batch_size: 1,
            reward_action_coeff: 0.01,
            explored_done_ratio: 0.95,
            map_change_threshold: 0,
            replay_capacity: 50_000,
            max_decisions: 2000,
            max_updates: 20_000,
            max_env_steps: usize::MAX,
            checkpoint_every: 5000,
            huber_delta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("target_sync_every", self.target_sync_every),
            ("epsilon_decay_steps", self.epsilon_decay_steps),
            ("updates_per_env_step", self.updates_per_env_step),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("max_decisions", self.max_decisions),
            ("checkpoint_every", self.checkpoint_every),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} is outside [0, 1]", self.gamma)));
        }
        if !(self.learning_rate >= 0.0 && self.huber_delta > 0.0) {
            return Err(Error::Config("learning_rate must be ≥ 0 and huber_delta > 0".into()));
        }
        if !(self.explored_done_ratio > 0.0 && self.explored_done_ratio <= 1.0) {
            return Err(Error::Config("explored_done_ratio must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end` over
    /// `epsilon_decay_steps` environment steps.
    pub fn epsilon(&self, env_step: usize) -> f64 {
        if env_step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let t = env_step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Bookkeeping at a decision point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeState {
    pub pose: Pose,
    /// Meters driven so far.
    pub path_length: f64,
    /// Commands executed since the previous decision.
    pub commands: usize,
    pub frontier_groups: usize,
    pub meters_per_cell: f64,
}

/// The three reward components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardTerms {
    pub area: f64,
    pub frontier: f64,
    pub action: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.area + self.frontier + self.action
    }
}

pub fn reward_terms(
    prev: &EpisodeState,
    cur: &EpisodeState,
    newly_explored: usize,
    commands: usize,
    cfg: &TrainConfig,
) -> RewardTerms {
    RewardTerms {
        area: newly_explored as f64 * cur.meters_per_cell * cur.meters_per_cell,
        frontier: if cur.frontier_groups < prev.frontier_groups { 1.0 } else { 0.0 },
        action: -cfg.reward_action_coeff * commands as f64,
    }
}

/// Newly explored area (m²), plus 1 if the frontier split into fewer
/// groups, minus the per-command penalty.
pub fn compute_reward(
    prev: &EpisodeState,
    cur: &EpisodeState,
    newly_explored: usize,
    commands: usize,
    cfg: &TrainConfig,
) -> f64 {
    reward_terms(prev, cur, newly_explored, commands, cfg).total()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Arc<PointCloud4D>,
    pub action: usize,
    pub next_state: Arc<PointCloud4D>,
    pub reward: f64,
    pub terminal: bool,
}

impl Transition {
    pub fn new(state: Arc<PointCloud4D>, action: usize, next_state: Arc<PointCloud4D>, reward: f64, terminal: bool) -> Result<Self> {
        if action >= state.frontier.len() {
            return Err(Error::contract(format!(
                "action {action} is not a frontier index (state has {})",
                state.frontier.len()
            )));
        }
        Ok(Transition {
            state,
            action,
            next_state,
            reward,
            terminal,
        })
    }
}

/// First-in first-out replay memory.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Uniform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Transition> {
        if self.items.is_empty() {
            return None;
        }
        self.items.get(rng.random_range(0..self.items.len()))
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

/// `r` for terminal transitions, otherwise `r + γ·target[argmax online]`.
pub fn bootstrap_target(reward: f64, gamma: f64, terminal: bool, online: &[f64], target: &[f64]) -> f64 {
    match argmax(online) {
        Some(a) if !terminal => reward + gamma * target[a],
        _ => reward,
    }
}

/// Double-DQN target: the online network picks the next action and the
/// target network values it.
pub fn double_dqn_target(tr: &Transition, online: &NetworkParams, target: &NetworkParams, gamma: f64) -> Result<f64> {
    if tr.terminal || tr.next_state.frontier.is_empty() || gamma == 0.0 {
        return Ok(tr.reward);
    }
    let q_online = valuenet::values(online, &tr.next_state)?;
    let q_target = valuenet::values(target, &tr.next_state)?;
    Ok(bootstrap_target(tr.reward, gamma, false, &q_online, &q_target))
}

pub fn huber(error: f64, delta: f64) -> f64 {
    if error.abs() <= delta {
        0.5 * error * error
    } else {
        delta * (error.abs() - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to the error.
pub fn huber_grad(error: f64, delta: f64) -> f64 {
    error.clamp(-delta, delta)
}

/// One semi-gradient step on the Huber loss between `Q(s, a)` and the
/// double-DQN target. Returns the loss before the step.
pub fn td_update(online: &mut NetworkParams, tr: &Transition, target: &NetworkParams, cfg: &TrainConfig) -> Result<f64> {
    td_update_batch(online, std::slice::from_ref(tr), target, cfg)
}

/// Averages the gradients of several transitions into one step.
pub fn td_update_batch(
    online: &mut NetworkParams,
    batch: &[Transition],
    target: &NetworkParams,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut total_loss = 0.0;
    let mut grads = valuenet::Gradients::zeros_like(online);
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut acc: Option<Vec<f64>> = None;
    for tr in batch {
        let g = double_dqn_target(tr, online, target, cfg.gamma)?;
        let (out, cache) = valuenet::forward(online, &tr.state)?;
        let q = *out
            .values
            .get(tr.action)
            .ok_or_else(|| Error::contract(format!("action {} out of range", tr.action)))?;
        let err = q - g;
        let loss = huber(err, cfg.huber_delta);
        if !loss.is_finite() {
            return Err(Error::TrainingFault(format!(
                "non-finite loss {loss}: q = {q}, target = {g}, reward = {}, action = {}, state has {} frontier / {} obstacle points",
                tr.reward,
                tr.action,
                tr.state.frontier.len(),
                tr.state.obstacle.len()
            )));
        }
        total_loss += loss;
        let mut upstream = vec![0.0; out.values.len()];
        upstream[tr.action] = huber_grad(err, cfg.huber_delta) * scale;
        let gr = valuenet::backward(online, &cache, &upstream)?;
        if batch.len() == 1 {
            grads = gr;
        } else {
            let flat: Vec<f64> = (0..gr.len()).map(|i| gr.get(i)).collect();
            match &mut acc {
                Some(a) => a.iter_mut().zip(flat).for_each(|(x, y)| *x += y),
                None => acc = Some(flat),
            }
        }
    }
    if let Some(a) = acc {
        grads = valuenet::Gradients::from_flat(online, &a);
    }
    online.apply_gradients(&grads, cfg.learning_rate)?;
    if !online.is_finite() {
        return Err(Error::TrainingFault("parameters became non-finite after an update".into()));
    }
    Ok(total_loss * scale)
}

/// Copies the online parameters into the target network.
pub fn sync_target(online: &NetworkParams, target: &mut NetworkParams) -> Result<()> {
    target.copy_from(online)
}
