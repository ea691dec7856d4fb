//! A* navigation over the walkable part of the observed map and tracking of
//! the resulting cell path with discrete movement commands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gridmap::{normalize_angle, Cell, OccupancyGrid, Pose, Walkability, NEIGHBORS8};

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    /// Start to goal, consecutive cells 8-adjacent.
    pub waypoints: Vec<Cell>,
    /// Meters.
    pub length: f64,
    /// Same length in cell units.
    pub cost: f64,
}

/// Discrete robot commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Forward,
    TurnLeft,
    TurnRight,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    f: f64,
    h: f64,
    index: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimal-cost 8-connected path over walkable cells, octile heuristic.
///
/// Open-list ties are broken by the smaller heuristic, then by row-major
/// cell order.
pub fn astar(grid: &OccupancyGrid, walkable: &Walkability, start: Cell, goal: Cell) -> Result<Path> {
    if !walkable.is_walkable(start) {
        return Err(Error::contract(format!("path start {start:?} is not walkable")));
    }
    if !walkable.is_walkable(goal) {
        return Err(Error::Unreachable { start, goal });
    }
    let n = grid.len();
    let (w, h) = (grid.width() as isize, grid.height() as isize);
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let s = grid.index(start);
    let goal_index = grid.index(goal);
    g[s] = 0.0;
    let h0 = start.octile(goal);
    open.push(Node { f: h0, h: h0, index: s });

    while let Some(Node { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_index {
            break;
        }
        let cur = grid.cell_at(index);
        for &(dx, dy, step) in &NEIGHBORS8 {
            let (nx, ny) = (cur.x as isize + dx, cur.y as isize + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let near = Cell::new(nx as usize, ny as usize);
            let ni = grid.index(near);
            if closed[ni] || !walkable.is_walkable(near) {
                continue;
            }
            let candidate = g[index] + step;
            if candidate < g[ni] {
                g[ni] = candidate;
                parent[ni] = index;
                let hn = near.octile(goal);
                open.push(Node {
                    f: candidate + hn,
                    h: hn,
                    index: ni,
                });
            }
        }
    }

    if !closed[goal_index] {
        return Err(Error::Unreachable { start, goal });
    }
    let mut waypoints = vec![goal];
    let mut i = goal_index;
    while i != s {
        i = parent[i];
        waypoints.push(grid.cell_at(i));
    }
    waypoints.reverse();
    let cost = g[goal_index];
    Ok(Path {
        waypoints,
        length: cost * grid.meters_per_cell(),
        cost,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackParams {
    /// Forward step length, meters.
    pub linear_step: f64,
    /// Turn step, radians.
    pub angular_step: f64,
    /// Replan when the nearest unvisited waypoint is farther than this, meters.
    pub replan_threshold: f64,
    /// Arrival radius around the final waypoint, meters.
    pub goal_tolerance: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            linear_step: 0.3,
            angular_step: 15f64.to_radians(),
            replan_threshold: 0.6,
            goal_tolerance: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackAction {
    Command(Command),
    Replan,
    Arrived,
}

/// Follows a cell path: aims at the farthest waypoint within one forward
/// step past the nearest unvisited one, turning first whenever the heading
/// error exceeds half a turn step.
#[derive(Clone, Debug)]
pub struct PathTracker {
    points: Vec<(f64, f64)>,
    next: usize,
    params: TrackParams,
    /// Headings whose forward move was rejected at the current position.
    blocked: Vec<f64>,
    blocked_at: Option<(f64, f64)>,
    /// Heading chosen to get around a rejected move.
    detour: Option<f64>,
}

impl PathTracker {
    pub fn new(path: &Path, grid: &OccupancyGrid, params: TrackParams) -> Self {
        assert!(!path.waypoints.is_empty(), "cannot track an empty path");
        PathTracker {
            points: path.waypoints.iter().map(|&c| grid.cell_center(c)).collect(),
            next: 0,
            params,
            blocked: Vec::new(),
            blocked_at: None,
            detour: None,
        }
    }

    /// Swaps in a freshly planned path, keeping memory of rejected moves.
    pub fn replace_path(&mut self, path: &Path, grid: &OccupancyGrid) {
        assert!(!path.waypoints.is_empty(), "cannot track an empty path");
        self.points = path.waypoints.iter().map(|&c| grid.cell_center(c)).collect();
        self.next = 0;
    }

    pub fn goal(&self) -> (f64, f64) {
        *self.points.last().expect("path is nonempty")
    }

    /// Index of the nearest waypoint not yet passed.
    pub fn progress(&self) -> usize {
        self.next
    }

    pub fn step(&mut self, pose: &Pose) -> TrackAction {
        let p = &self.params;
        let goal = self.goal();
        if pose.distance_to(goal.0, goal.1) <= p.goal_tolerance {
            return TrackAction::Arrived;
        }
        if self.blocked_at.is_some_and(|(x, y)| pose.distance_to(x, y) > 1e-9) {
            self.blocked.clear();
            self.blocked_at = None;
            self.detour = None;
        }

        let dist = |i: usize| pose.distance_to(self.points[i].0, self.points[i].1);
        let mut near = self.next;
        for i in self.next..self.points.len() {
            if dist(i) < dist(near) {
                near = i;
            }
        }
        self.next = near;
        if dist(near) > p.replan_threshold {
            return TrackAction::Replan;
        }

        let mut target = near;
        while target + 1 < self.points.len() && dist(target + 1) <= p.linear_step {
            target += 1;
        }
        let (tx, ty) = self.points[target];
        let desired = self.detour.unwrap_or_else(|| (ty - pose.y).atan2(tx - pose.x));
        let err = normalize_angle(desired - pose.heading);
        if err.abs() > p.angular_step / 2.0 + 1e-9 {
            return TrackAction::Command(turn_toward(err));
        }
        if self.is_blocked(pose.heading) {
            match self.pick_detour(pose, (tx, ty)) {
                Some(h) => {
                    self.detour = Some(h);
                    return TrackAction::Command(turn_toward(normalize_angle(h - pose.heading)));
                }
                None => return TrackAction::Replan,
            }
        }
        TrackAction::Command(Command::Forward)
    }

    /// Records that a forward move from `pose` was rejected.
    pub fn mark_blocked(&mut self, pose: &Pose) {
        if self.blocked_at.is_none_or(|(x, y)| pose.distance_to(x, y) > 1e-9) {
            self.blocked.clear();
        }
        self.blocked_at = Some((pose.x, pose.y));
        self.blocked.push(pose.heading);
        self.detour = None;
    }

    fn is_blocked(&self, heading: f64) -> bool {
        self.blocked
            .iter()
            .any(|&b| normalize_angle(b - heading).abs() < self.params.angular_step / 4.0)
    }

    /// Nearest reachable heading (whole turn steps away) that still makes
    /// progress toward `target` and has not been rejected here.
    fn pick_detour(&self, pose: &Pose, target: (f64, f64)) -> Option<f64> {
        let turns = (std::f64::consts::PI / self.params.angular_step).round() as i32;
        let now = pose.distance_to(target.0, target.1);
        for k in 1..=turns {
            for sign in [1, -1] {
                let h = normalize_angle(pose.heading + (sign * k) as f64 * self.params.angular_step);
                if self.is_blocked(h) {
                    continue;
                }
                let moved = (
                    pose.x + self.params.linear_step * h.cos(),
                    pose.y + self.params.linear_step * h.sin(),
                );
                if (moved.0 - target.0).hypot(moved.1 - target.1) < now {
                    return Some(h);
                }
            }
        }
        None
    }
}

fn turn_toward(err: f64) -> Command {
    // exact ties turn left
    if err >= 0.0 {
        Command::TurnLeft
    } else {
        Command::TurnRight
    }
}

/// Single-shot form of [`PathTracker::step`] for a fresh tracker.
pub fn track(pose: &Pose, path: &Path, grid: &OccupancyGrid, params: TrackParams) -> TrackAction {
    PathTracker::new(path, grid, params).step(pose)
}

/// Pose after executing `command`, ignoring collisions.
pub fn apply_command(pose: &Pose, command: Command, params: &TrackParams) -> Pose {
    match command {
        Command::Forward => Pose::new(
            pose.x + params.linear_step * pose.heading.cos(),
            pose.y + params.linear_step * pose.heading.sin(),
            pose.heading,
        ),
        Command::TurnLeft => Pose::new(pose.x, pose.y, pose.heading + params.angular_step),
        Command::TurnRight => Pose::new(pose.x, pose.y, pose.heading - params.angular_step),
    }
}
