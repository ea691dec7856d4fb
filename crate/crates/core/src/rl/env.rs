use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{compute_reward, EpisodeState, TrainConfig};
use crate::error::{Error, Result};
use crate::frontier::{CloudPoint, PointCloud4D};
use crate::gridmap::{Cell, OccupancyGrid};
use crate::sim::{random_start_pose, Explorer, NavStatus, Observation, SimConfig};

pub struct StepResult {
    pub next: Arc<PointCloud4D>,
    pub reward: f64,
    pub terminal: bool,
    /// `false` when the chosen frontier was dropped without the robot
    /// acting; no transition should be stored.
    pub recorded: bool,
}

/// A decision process whose actions are frontier indices.
pub trait Environment {
    /// Starts a new episode and returns its first state.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Arc<PointCloud4D>>;
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<StepResult>;
}

/// Exploration episodes on randomly chosen maps and start poses.
#[derive(Clone)]
pub struct ExplorationEnv<'m> {
    maps: &'m [OccupancyGrid],
    sim: SimConfig,
    cfg: TrainConfig,
    explorer: Option<Explorer<'m>>,
    observation: Option<Observation>,
    state: Option<EpisodeState>,
}

impl<'m> ExplorationEnv<'m> {
    pub fn new(maps: &'m [OccupancyGrid], sim: SimConfig, cfg: TrainConfig) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Config("training needs at least one map".into()));
        }
        let sim = SimConfig {
            map_change_threshold: cfg.map_change_threshold,
            ..sim
        };
        Ok(ExplorationEnv {
            maps,
            sim,
            cfg,
            explorer: None,
            observation: None,
            state: None,
        })
    }

    pub fn explorer(&self) -> Option<&Explorer<'m>> {
        self.explorer.as_ref()
    }

    pub fn observation(&self) -> Option<&Observation> {
        self.observation.as_ref()
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.sim
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn episode_state(&self, explorer: &Explorer, obs: &Observation, commands: usize) -> EpisodeState {
        EpisodeState {
            pose: explorer.pose(),
            path_length: explorer.path_length(),
            commands,
            frontier_groups: obs.groups,
            meters_per_cell: explorer.truth().meters_per_cell(),
        }
    }

    fn done(&self, explorer: &Explorer, obs: &Observation) -> bool {
        obs.cloud.frontier.is_empty() || explorer.explored_ratio() >= self.cfg.explored_done_ratio
    }

    /// Drives to `goal` and returns the resulting transition data.
    pub(crate) fn step_to(&mut self, goal: Cell, rng: &mut dyn RngCore) -> Result<StepResult> {
        let mut explorer = self
            .explorer
            .take()
            .ok_or_else(|| Error::contract("step called before reset"))?;
        let outcome = explorer.navigate(goal, rng);
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                self.explorer = Some(explorer);
                return Err(e);
            }
        };
        let obs = explorer.observe()?;
        let prev = self.state.expect("state set at reset");
        let cur = self.episode_state(&explorer, &obs, outcome.commands);
        let reward = compute_reward(&prev, &cur, outcome.newly_explored, outcome.commands, &self.cfg);
        let terminal = self.done(&explorer, &obs);
        let recorded = !(outcome.status == NavStatus::Unreachable && outcome.commands == 0);
        let next = Arc::new(obs.cloud.clone());
        self.state = Some(cur);
        self.observation = Some(obs);
        self.explorer = Some(explorer);
        Ok(StepResult {
            next,
            reward,
            terminal,
            recorded,
        })
    }
}

impl Environment for ExplorationEnv<'_> {
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<Arc<PointCloud4D>> {
        // maps fully visible from the start give no decision to learn from
        for _ in 0..100 {
            let map = &self.maps[rng.random_range(0..self.maps.len())];
            let start = random_start_pose(map, self.sim.robot_radius, rng)?;
            let explorer = Explorer::new(map, start, self.sim, rng)?;
            let obs = explorer.observe()?;
            if self.done(&explorer, &obs) {
                continue;
            }
            let cloud = Arc::new(obs.cloud.clone());
            self.state = Some(self.episode_state(&explorer, &obs, 0));
            self.observation = Some(obs);
            self.explorer = Some(explorer);
            return Ok(cloud);
        }
        Err(Error::Setup("no start pose leaves anything to explore".into()))
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<StepResult> {
        let goal = self
            .observation
            .as_ref()
            .and_then(|o| o.cloud.frontier.get(action))
            .map(|p| p.cell)
            .ok_or_else(|| Error::contract(format!("action {action} is not a current frontier index")))?;
        self.step_to(goal, rng)
    }
}

/// Two-state chain with two frontier actions per state.
///
/// In the first state, action 0 ends the episode with reward 0.2 and
/// action 1 moves to the second state with reward 0. There, action 0 ends
/// with reward 1 and action 1 ends with reward 0. With γ close to 1 the
/// optimal greedy policy is (1, 0).
#[derive(Clone, Debug)]
pub struct ChainMdp {
    states: [Arc<PointCloud4D>; 2],
    current: usize,
}

impl ChainMdp {
    pub const OPTIMAL: [usize; 2] = [1, 0];

    pub fn new() -> Self {
        let p = |x: f64, y: f64, b: u8, d: f64| CloudPoint {
            x,
            y,
            b,
            d,
            cell: Cell::new(0, 0),
        };
        let first = PointCloud4D {
            frontier: vec![p(1.0, 0.5, 1, 1.2), p(-1.5, 0.2, 1, 2.0)],
            obstacle: vec![p(0.0, 1.0, 0, 1.0), p(0.5, -1.0, 0, 1.1), p(-0.5, -0.8, 0, 0.9)],
        };
        let second = PointCloud4D {
            frontier: vec![p(2.5, 2.0, 1, 3.5), p(3.5, -2.5, 1, 4.0)],
            obstacle: vec![p(3.0, 0.0, 0, 3.0), p(2.0, -1.0, 0, 2.6), p(4.0, 1.0, 0, 4.2)],
        };
        ChainMdp {
            states: [Arc::new(first), Arc::new(second)],
            current: 0,
        }
    }

    pub fn state(&self, i: usize) -> &Arc<PointCloud4D> {
        &self.states[i]
    }
}

impl Default for ChainMdp {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for ChainMdp {
    fn reset(&mut self, _rng: &mut dyn RngCore) -> Result<Arc<PointCloud4D>> {
        self.current = 0;
        Ok(self.states[0].clone())
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<StepResult> {
        let (reward, next, terminal) = match (self.current, action) {
            (0, 0) => (0.2, 0, true),
            (0, 1) => (0.0, 1, false),
            (1, 0) => (1.0, 1, true),
            (1, 1) => (0.0, 1, true),
            _ => return Err(Error::contract(format!("action {action} is not valid in the chain"))),
        };
        self.current = next;
        Ok(StepResult {
            next: self.states[next].clone(),
            reward,
            terminal,
            recorded: true,
        })
    }
}
