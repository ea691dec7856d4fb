use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::env::{Environment, ExplorationEnv};
use super::{sync_target, td_update_batch, ReplayBuffer, TrainConfig, Transition};
use crate::error::{Error, Result};
use crate::strategies::{argmax, select_cost, DecisionContext, DEFAULT_CLUSTERS};
use crate::valuenet::{self, save_checkpoint, NetConfig, NetworkParams};

pub const TRAIN_LOG_HEADER: &str = "update_index,env_step,episode,loss,epsilon,episode_reward_so_far";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainLogRow {
    pub update_index: usize,
    pub env_step: usize,
    pub episode: usize,
    pub loss: f64,
    pub epsilon: f64,
    pub episode_reward_so_far: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub target: NetworkParams,
    pub log: Vec<TrainLogRow>,
    pub env_steps: usize,
    pub updates: usize,
    pub episodes: usize,
    /// Episodes cut off by the decision cap.
    pub failed_episodes: usize,
    pub syncs: usize,
    pub checkpoints: Vec<PathBuf>,
}

/// ε-greedy double-DQN training with uniform replay.
///
/// Stops when either the update budget or the environment-step budget is
/// spent. Checkpoints go to `checkpoint_dir` every `checkpoint_every`
/// updates when a directory is given.
pub fn train(
    env: &mut dyn Environment,
    net: &NetConfig,
    cfg: &TrainConfig,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut online = NetworkParams::init(net, rng.next_u64())?;
    let mut target = online.clone();
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let (mut env_steps, mut updates, mut episodes, mut failed, mut syncs) = (0, 0, 0, 0, 0);

    'episodes: while updates < cfg.max_updates && env_steps < cfg.max_env_steps {
        episodes += 1;
        let mut state = env.reset(&mut rng)?;
        let mut episode_reward = 0.0;
        let mut decisions = 0;
        loop {
            if decisions >= cfg.max_decisions {
                failed += 1;
                break;
            }
            let epsilon = cfg.epsilon(env_steps);
            let action = if rng.random::<f64>() < epsilon {
                rng.random_range(0..state.frontier.len())
            } else {
                argmax(&valuenet::values(&online, &state)?).expect("nonempty frontier")
            };
            let step = env.step(action, &mut rng)?;
            decisions += 1;
            if step.recorded {
                buffer.push(Transition::new(state.clone(), action, step.next.clone(), step.reward, step.terminal)?);
                env_steps += 1;
                episode_reward += step.reward;
                if env_steps >= cfg.learning_starts {
                    for _ in 0..cfg.updates_per_env_step {
                        if updates >= cfg.max_updates {
                            break;
                        }
                        let batch: Vec<Transition> = (0..cfg.batch_size)
                            .map(|_| buffer.sample(&mut rng).expect("buffer is nonempty").clone())
                            .collect();
                        let loss = td_update_batch(&mut online, &batch, &target, cfg)?;
                        updates += 1;
                        if updates % cfg.target_sync_every == 0 {
                            sync_target(&online, &mut target)?;
                            syncs += 1;
                        }
                        log.push(TrainLogRow {
                            update_index: updates,
                            env_step: env_steps,
                            episode: episodes,
                            loss,
                            epsilon,
                            episode_reward_so_far: episode_reward,
                        });
                        if let Some(dir) = checkpoint_dir {
                            if updates % cfg.checkpoint_every == 0 {
                                let path = dir.join(format!("checkpoint_{updates:07}.net"));
                                save_checkpoint(&online, &path)?;
                                checkpoints.push(path);
                            }
                        }
                    }
                }
            }
            if step.terminal || step.next.frontier.is_empty() {
                break;
            }
            state = step.next;
            if updates >= cfg.max_updates || env_steps >= cfg.max_env_steps {
                break 'episodes;
            }
        }
    }
    Ok(TrainOutcome {
        params: online,
        target,
        log,
        env_steps,
        updates,
        episodes,
        failed_episodes: failed,
        syncs,
        checkpoints,
    })
}

/// Renders the training log as CSV.
pub fn write_train_log(rows: &[TrainLogRow]) -> String {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.9},{:.6},{:.6}",
            r.update_index, r.env_step, r.episode, r.loss, r.epsilon, r.episode_reward_so_far
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightTrainConfig {
    pub episodes: usize,
    /// Weights tried at every decision to label the best one.
    pub candidates: Vec<f64>,
    pub learning_rate: f64,
    pub clusters: usize,
    pub max_decisions: usize,
    /// Update only the weight head, leaving the value outputs untouched.
    pub freeze_trunk: bool,
}

impl Default for WeightTrainConfig {
    fn default() -> Self {
        WeightTrainConfig {
            episodes: 20,
            candidates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            learning_rate: 0.05,
            clusters: DEFAULT_CLUSTERS,
            max_decisions: 300,
            freeze_trunk: true,
        }
    }
}

/// Fits the scalar weight head by regression onto one-step rollout labels.
///
/// At each decision every candidate weight is tried on a copy of the
/// episode; the label is the mean of the candidates whose rollout earned
/// the highest reward. The robot then acts with the network's own weight.
/// Returns the squared-error loss of every decision.
pub fn train_weight_head(
    env: &mut ExplorationEnv,
    params: &mut NetworkParams,
    cfg: &WeightTrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if cfg.candidates.is_empty() {
        return Err(Error::Config("weight training needs candidate weights".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses = Vec::new();
    for _ in 0..cfg.episodes {
        env.reset(&mut rng)?;
        for _ in 0..cfg.max_decisions {
            let obs = env.observation().expect("reset sets an observation").clone();
            let (out, cache) = valuenet::forward(params, &obs.cloud)?;
            let laser = env.sim_config().laser;

            let mut rewards = Vec::with_capacity(cfg.candidates.len());
            let probe_seed = rng.next_u64();
            for &w in &cfg.candidates {
                let mut probe_rng = ChaCha8Rng::seed_from_u64(probe_seed);
                let explorer = env.explorer().expect("reset sets an explorer");
                let goal = {
                    let mut ctx = DecisionContext {
                        cloud: &obs.cloud,
                        observed: explorer.observed(),
                        laser: &laser,
                        rng: &mut probe_rng,
                    };
                    select_cost(&mut ctx, w, cfg.clusters)?.cell
                };
                let mut probe = env.clone();
                rewards.push(probe.step_to(goal, &mut probe_rng)?.reward);
            }
            let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<f64> = cfg
                .candidates
                .iter()
                .zip(&rewards)
                .filter(|(_, &r)| r == best)
                .map(|(&w, _)| w)
                .collect();
            let label = winners.iter().sum::<f64>() / winners.len() as f64;
            let err = out.weight - label;
            losses.push(0.5 * err * err);
            let mut grads = valuenet::backward_weight(params, &cache, err)?;
            if cfg.freeze_trunk {
                grads.retain_layers(|name| name.starts_with("weight"));
            }
            params.apply_gradients(&grads, cfg.learning_rate)?;

            let goal = {
                let explorer = env.explorer().expect("reset sets an explorer");
                let mut ctx = DecisionContext {
                    cloud: &obs.cloud,
                    observed: explorer.observed(),
                    laser: &laser,
                    rng: &mut rng,
                };
                select_cost(&mut ctx, out.weight, cfg.clusters)?.cell
            };
            let step = env.step_to(goal, &mut rng)?;
            if step.terminal {
                break;
            }
        }
    }
    Ok(losses)
}
