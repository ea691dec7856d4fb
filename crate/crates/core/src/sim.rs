//! The exploration simulator: a robot with known pose moving through a
//! ground-truth map, scanning after every command and building its own
//! observed map.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::frontier::{frontier_group_count, has_unknown_neighbor, observe, PointCloud4D};
use crate::gridmap::{
    explored_ratio, inflation_cells, normalize_angle, Cell, CellState, OccupancyGrid, Pose, StartFrame,
    Walkability,
};
use crate::planner::{apply_command, astar, Command, PathTracker, TrackAction, TrackParams};
use crate::sensor::{initial_spin, integrate_scan, simulate_scan, LaserParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub laser: LaserParams,
    pub track: TrackParams,
    /// Meters.
    pub robot_radius: f64,
    /// Stop navigating once this many cells were newly explored since the
    /// decision; 0 disables the trigger so decisions happen on arrival only.
    pub map_change_threshold: usize,
    pub max_commands_per_decision: usize,
    pub max_replans_per_decision: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            laser: LaserParams::default(),
            track: TrackParams::default(),
            robot_radius: 0.15,
            map_change_threshold: 0,
            max_commands_per_decision: 600,
            max_replans_per_decision: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavStatus {
    Arrived,
    /// The map-change trigger fired before arrival.
    MapChanged,
    /// No path to the goal.
    Unreachable,
    /// Command or replan budget exhausted.
    Stuck,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavOutcome {
    pub status: NavStatus,
    pub commands: usize,
    pub newly_explored: usize,
    /// Meters driven.
    pub distance: f64,
}

/// What the robot knows at a decision point.
#[derive(Clone, Debug)]
pub struct Observation {
    pub cloud: PointCloud4D,
    /// Number of 8-connected frontier groups.
    pub groups: usize,
    /// Cell the contour search started from.
    pub robot_cell: Cell,
}

/// Returns true when the robot disc at `(x, y)` overlaps an occupied cell
/// center of `truth`.
pub fn collides(truth: &OccupancyGrid, x: f64, y: f64, radius: f64) -> bool {
    let res = truth.meters_per_cell();
    let Some(center) = truth.cell_of(x, y) else {
        return true;
    };
    let reach = (radius / res).ceil() as isize + 1;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (cx, cy) = (center.x as isize + dx, center.y as isize + dy);
            match truth.try_get(cx, cy) {
                Some(CellState::Occupied) => {
                    let (ox, oy) = ((cx as f64 + 0.5) * res, (cy as f64 + 0.5) * res);
                    if (ox - x).hypot(oy - y) < radius {
                        return true;
                    }
                }
                _ => {}
            }
        }
    }
    false
}

/// Samples the straight move from `a` to `b` at half-cell spacing.
fn move_collides(truth: &OccupancyGrid, a: &Pose, b: &Pose, radius: f64) -> bool {
    let len = a.distance_to(b.x, b.y);
    let n = (len / (truth.meters_per_cell() / 2.0)).ceil().max(1.0) as usize;
    (1..=n).any(|k| {
        let t = k as f64 / n as f64;
        collides(truth, a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, radius)
    })
}

/// Cells whose center keeps the robot clear of every obstacle, with the
/// planner's inflation applied to the ground truth.
pub fn valid_start_cells(truth: &OccupancyGrid, robot_radius: f64) -> Vec<Cell> {
    let walk = Walkability::new(truth, inflation_cells(robot_radius, truth.meters_per_cell()));
    (0..truth.len())
        .map(|i| truth.cell_at(i))
        .filter(|&c| walk.is_walkable(c))
        .collect()
}

/// Uniformly random start pose on a valid start cell.
pub fn random_start_pose<R: Rng + ?Sized>(truth: &OccupancyGrid, robot_radius: f64, rng: &mut R) -> Result<Pose> {
    let cells = valid_start_cells(truth, robot_radius);
    if cells.is_empty() {
        return Err(Error::Setup(format!(
            "map {} has no free cell with clearance {robot_radius} m",
            truth.name().unwrap_or("<unnamed>")
        )));
    }
    let cell = cells[rng.random_range(0..cells.len())];
    let (x, y) = truth.cell_center(cell);
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Ok(Pose::new(x, y, heading))
}

/// One exploration episode in progress.
#[derive(Clone, Debug)]
pub struct Explorer<'a> {
    truth: &'a OccupancyGrid,
    observed: OccupancyGrid,
    pose: Pose,
    frame: StartFrame,
    config: SimConfig,
    inflation: usize,
    path_length: f64,
    trajectory: Vec<(f64, f64)>,
    abandoned: HashSet<Cell>,
}

impl<'a> Explorer<'a> {
    /// Places the robot and performs the initial 360° spin.
    pub fn new<R: Rng + ?Sized>(truth: &'a OccupancyGrid, start: Pose, config: SimConfig, rng: &mut R) -> Result<Self> {
        config.laser.validate()?;
        if collides(truth, start.x, start.y, config.robot_radius) {
            return Err(Error::Setup(format!("start pose {start:?} collides with the map")));
        }
        let mut observed = truth.unknown_like();
        initial_spin(truth, &mut observed, start, &config.laser, rng)?;
        Ok(Explorer {
            truth,
            observed,
            pose: start,
            frame: StartFrame::new(start),
            config,
            inflation: inflation_cells(config.robot_radius, truth.meters_per_cell()),
            path_length: 0.0,
            trajectory: vec![(start.x, start.y)],
            abandoned: HashSet::new(),
        })
    }

    pub fn truth(&self) -> &OccupancyGrid {
        self.truth
    }

    pub fn observed(&self) -> &OccupancyGrid {
        &self.observed
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn frame(&self) -> StartFrame {
        self.frame
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Sum of executed forward steps, meters.
    pub fn path_length(&self) -> f64 {
        self.path_length
    }

    pub fn trajectory(&self) -> &[(f64, f64)] {
        &self.trajectory
    }

    pub fn explored_ratio(&self) -> f64 {
        explored_ratio(&self.observed, self.truth).expect("observed map shares the truth's shape")
    }

    pub fn walkability(&self) -> Walkability {
        Walkability::new(&self.observed, self.inflation)
    }

    /// Nearest walkable cell to the robot, searching outward ring by ring.
    fn anchor_cell(&self, walk: &Walkability) -> Result<Cell> {
        let here = self
            .observed
            .cell_of(self.pose.x, self.pose.y)
            .ok_or_else(|| Error::contract("robot left the map"))?;
        if walk.is_walkable(here) {
            return Ok(here);
        }
        let max_ring = 4 * (self.inflation as isize + 2);
        for ring in 1..=max_ring {
            let mut best: Option<(f64, Cell)> = None;
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let (x, y) = (here.x as isize + dx, here.y as isize + dy);
                    if x < 0 || y < 0 {
                        continue;
                    }
                    let c = Cell::new(x as usize, y as usize);
                    if !walk.is_walkable(c) {
                        continue;
                    }
                    let (cx, cy) = self.observed.cell_center(c);
                    let d = self.pose.distance_to(cx, cy);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
            if let Some((_, c)) = best {
                return Ok(c);
            }
        }
        Err(Error::contract(format!("no walkable cell near the robot at {:?}", self.pose)))
    }

    /// Builds the current 4D cloud. Frontier cells the robot already failed
    /// to reach are reported as obstacle points.
    pub fn observe(&self) -> Result<Observation> {
        let walk = self.walkability();
        let robot_cell = self.anchor_cell(&walk)?;
        let (mut cloud, _) = observe(&self.observed, &walk, robot_cell, &self.frame)?;
        if !self.abandoned.is_empty() {
            let (keep, drop): (Vec<_>, Vec<_>) =
                cloud.frontier.into_iter().partition(|p| !self.abandoned.contains(&p.cell));
            cloud.frontier = keep;
            cloud.obstacle.extend(drop.into_iter().map(|mut p| {
                p.b = 0;
                p
            }));
        }
        let cells: Vec<Cell> = cloud.frontier.iter().map(|p| p.cell).collect();
        Ok(Observation {
            groups: frontier_group_count(&cells),
            cloud,
            robot_cell,
        })
    }

    fn scan(&mut self, rng: &mut (impl Rng + ?Sized)) -> Result<usize> {
        let scan = simulate_scan(self.truth, self.pose, &self.config.laser, rng)?;
        Ok(integrate_scan(&mut self.observed, &scan))
    }

    /// Executes one command, scanning afterwards. Returns `None` when a
    /// forward move was rejected for collision.
    fn execute<R: Rng + ?Sized>(&mut self, command: Command, rng: &mut R) -> Result<Option<usize>> {
        let next = apply_command(&self.pose, command, &self.config.track);
        if command == Command::Forward {
            if move_collides(self.truth, &self.pose, &next, self.config.robot_radius) {
                return Ok(None);
            }
            self.path_length += self.config.track.linear_step;
            self.trajectory.push((next.x, next.y));
        }
        self.pose = next;
        self.scan(rng).map(Some)
    }

    /// Drives toward `goal` until arrival, the map-change trigger, or
    /// failure. Goals that cannot be reached are remembered and no longer
    /// offered as frontier points.
    pub fn navigate<R: Rng + ?Sized>(&mut self, goal: Cell, rng: &mut R) -> Result<NavOutcome> {
        let mut outcome = NavOutcome {
            status: NavStatus::Arrived,
            commands: 0,
            newly_explored: 0,
            distance: 0.0,
        };
        let start_length = self.path_length;

        let plan = |me: &Self| -> Result<Option<crate::planner::Path>> {
            let walk = me.walkability();
            let start = me.anchor_cell(&walk)?;
            match astar(&me.observed, &walk, start, goal) {
                Ok(p) => Ok(Some(p)),
                Err(Error::Unreachable { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };

        let Some(path) = plan(self)? else {
            outcome.status = NavStatus::Unreachable;
            self.abandon(goal);
            return Ok(outcome);
        };
        let mut tracker = PathTracker::new(&path, &self.observed, self.config.track);
        let mut replans = 0;

        loop {
            if outcome.commands >= self.config.max_commands_per_decision {
                outcome.status = NavStatus::Stuck;
                break;
            }
            if self.config.map_change_threshold > 0 && outcome.newly_explored > self.config.map_change_threshold {
                outcome.status = NavStatus::MapChanged;
                break;
            }
            match tracker.step(&self.pose) {
                TrackAction::Arrived => {
                    outcome.status = NavStatus::Arrived;
                    break;
                }
                TrackAction::Replan => {
                    replans += 1;
                    if replans > self.config.max_replans_per_decision {
                        outcome.status = NavStatus::Stuck;
                        break;
                    }
                    match plan(self)? {
                        Some(p) => tracker.replace_path(&p, &self.observed),
                        None => {
                            outcome.status = NavStatus::Unreachable;
                            break;
                        }
                    }
                }
                TrackAction::Command(cmd) => {
                    outcome.commands += 1;
                    match self.execute(cmd, rng)? {
                        Some(n) => outcome.newly_explored += n,
                        None => {
                            tracker.mark_blocked(&self.pose);
                            replans += 1;
                            if replans > self.config.max_replans_per_decision {
                                outcome.status = NavStatus::Stuck;
                                break;
                            }
                        }
                    }
                }
            }
        }

        if outcome.status == NavStatus::Arrived {
            let (turns, newly) = self.look_at_unknown(goal, rng)?;
            outcome.commands += turns;
            outcome.newly_explored += newly;
        }
        if matches!(outcome.status, NavStatus::Stuck | NavStatus::Unreachable) {
            self.abandon(goal);
        }
        outcome.distance = self.path_length - start_length;
        Ok(outcome)
    }

    /// After arriving, turns toward the goal's unknown neighbors if they are
    /// still unseen.
    fn look_at_unknown<R: Rng + ?Sized>(&mut self, goal: Cell, rng: &mut R) -> Result<(usize, usize)> {
        let mut turns = 0;
        let mut newly = 0;
        let half_turns = (std::f64::consts::PI / self.config.track.angular_step).round() as usize;
        while turns <= half_turns && has_unknown_neighbor(&self.observed, goal) {
            let unknown: Vec<(f64, f64)> = self
                .observed
                .neighbors8(goal)
                .filter(|(n, _)| self.observed.get(*n) == CellState::Unknown)
                .map(|(n, _)| self.observed.cell_center(n))
                .collect();
            let k = unknown.len() as f64;
            let (ux, uy) = unknown
                .iter()
                .fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / k, acc.1 + p.1 / k));
            let err = normalize_angle((uy - self.pose.y).atan2(ux - self.pose.x) - self.pose.heading);
            if err.abs() <= self.config.track.angular_step / 2.0 {
                break;
            }
            let cmd = if err >= 0.0 { Command::TurnLeft } else { Command::TurnRight };
            turns += 1;
            newly += self.execute(cmd, rng)?.unwrap_or(0);
        }
        if has_unknown_neighbor(&self.observed, goal) {
            self.abandon(goal);
        }
        Ok((turns, newly))
    }

    /// Marks the goal and nearby cells as not worth selecting again.
    fn abandon(&mut self, goal: Cell) {
        let r = (self.config.track.linear_step / self.observed.meters_per_cell()).ceil() as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                let (x, y) = (goal.x as isize + dx, goal.y as isize + dy);
                if x >= 0 && y >= 0 {
                    self.abandoned.insert(Cell::new(x as usize, y as usize));
                }
            }
        }
    }
}
