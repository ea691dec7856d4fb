//! Frontier-selection policies.
//!
//! Every strategy maps the current cloud to an index into its frontier
//! list. The cost-based strategies first reduce the frontier to at most `k`
//! cluster centers and score only those.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::frontier::PointCloud4D;
use crate::gridmap::{Cell, CellState, OccupancyGrid};
use crate::sensor::LaserParams;
use crate::valuenet::{self, NetworkParams};

/// Default cap on the number of frontier clusters.
pub const DEFAULT_CLUSTERS: usize = 8;
/// Fixed weight of the cost baseline.
pub const DEFAULT_COST_WEIGHT: f64 = 0.5;

const KMEANS_MAX_ITERS: usize = 50;

/// Everything a strategy may look at when choosing a frontier.
pub struct DecisionContext<'a> {
    pub cloud: &'a PointCloud4D,
    pub observed: &'a OccupancyGrid,
    pub laser: &'a LaserParams,
    pub rng: &'a mut dyn RngCore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrontierChoice {
    /// Position in `cloud.frontier`.
    pub index: usize,
    pub cell: Cell,
}

impl DecisionContext<'_> {
    fn require_frontier(&self) -> Result<usize> {
        match self.cloud.frontier.len() {
            0 => Err(Error::contract("no frontier to choose from")),
            n => Ok(n),
        }
    }

    fn choice(&self, index: usize) -> FrontierChoice {
        FrontierChoice {
            index,
            cell: self.cloud.frontier[index].cell,
        }
    }
}

pub fn select_random(ctx: &mut DecisionContext) -> Result<FrontierChoice> {
    let n = ctx.require_frontier()?;
    let i = ctx.rng.random_range(0..n);
    Ok(ctx.choice(i))
}

/// Nearest frontier by travel distance; ties go to the smaller index.
pub fn select_greedy(ctx: &mut DecisionContext) -> Result<FrontierChoice> {
    ctx.require_frontier()?;
    let mut best = 0;
    for (i, p) in ctx.cloud.frontier.iter().enumerate() {
        if p.d < ctx.cloud.frontier[best].d {
            best = i;
        }
    }
    Ok(ctx.choice(best))
}

/// Result of [`kmeans`].
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Index of the member point each center was snapped to.
    pub centers: Vec<usize>,
    /// Cluster of every input point.
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn nearest(p: (f64, f64), centers: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (c, &m) in centers.iter().enumerate() {
        if dist2(p, m) < dist2(p, centers[best]) {
            best = c;
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Centers are snapped to the
/// nearest point of their own cluster so they are always selectable.
pub fn kmeans<R: Rng + ?Sized>(points: &[(f64, f64)], k: usize, rng: &mut R) -> Result<Clustering> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::contract(format!("k = {k} is out of range for {n} points")));
    }

    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // only duplicates of existing centers remain
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, points[next]));
        }
    }

    let mut means: Vec<(f64, f64)> = chosen.iter().map(|&i| points[i]).collect();
    let mut assignment: Vec<usize> = points.iter().map(|&p| nearest(p, &means)).collect();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERS {
        iterations += 1;
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&p, &a) in points.iter().zip(&assignment) {
            sums[a].0 += p.0;
            sums[a].1 += p.1;
            sums[a].2 += 1;
        }
        for (m, s) in means.iter_mut().zip(&sums) {
            if s.2 > 0 {
                *m = (s.0 / s.2 as f64, s.1 / s.2 as f64);
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &means)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }

    let mut centers = Vec::with_capacity(k);
    for (c, &m) in means.iter().enumerate() {
        let members = (0..n).filter(|&i| assignment[i] == c);
        let best = members
            .min_by(|&a, &b| dist2(points[a], m).total_cmp(&dist2(points[b], m)).then(a.cmp(&b)))
            // an empty cluster keeps the closest point not already used
            .or_else(|| {
                (0..n)
                    .filter(|i| !centers.contains(i))
                    .min_by(|&a, &b| dist2(points[a], m).total_cmp(&dist2(points[b], m)).then(a.cmp(&b)))
            })
            .expect("k ≤ n leaves a point for every center");
        centers.push(best);
    }
    Ok(Clustering {
        centers,
        assignment,
        iterations,
    })
}

/// Whether the open segment between two cell centers avoids the interior
/// of every occupied cell strictly between them.
///
/// The walk is an exact integer DDA; where the segment passes through a
/// lattice corner it steps diagonally, since it touches neither side cell.
pub fn line_of_sight(grid: &OccupancyGrid, from: Cell, to: Cell) -> bool {
    let (dx, dy) = (to.x as isize - from.x as isize, to.y as isize - from.y as isize);
    let (ax, ay) = (dx.unsigned_abs() as i64, dy.unsigned_abs() as i64);
    let (sx, sy) = (dx.signum(), dy.signum());
    let (mut x, mut y) = (from.x as isize, from.y as isize);
    let (mut nx, mut ny) = (0i64, 0i64);
    while nx < ax || ny < ay {
        // next vertical boundary at t = (2nx+1)/(2ax), horizontal at (2ny+1)/(2ay)
        let order = if ax == 0 {
            std::cmp::Ordering::Greater
        } else if ay == 0 {
            std::cmp::Ordering::Less
        } else {
            ((2 * nx + 1) * ay).cmp(&((2 * ny + 1) * ax))
        };
        match order {
            std::cmp::Ordering::Less => {
                x += sx;
                nx += 1;
            }
            std::cmp::Ordering::Greater => {
                y += sy;
                ny += 1;
            }
            std::cmp::Ordering::Equal => {
                x += sx;
                y += sy;
                nx += 1;
                ny += 1;
            }
        }
        if (x, y) == (to.x as isize, to.y as isize) {
            break;
        }
        if grid.try_get(x, y) == Some(CellState::Occupied) {
            return false;
        }
    }
    true
}

/// Area (m²) of unknown cells within laser range of `center` that are in
/// line of sight from it.
pub fn information_gain(observed: &OccupancyGrid, center: Cell, laser: &LaserParams) -> f64 {
    let res = observed.meters_per_cell();
    let reach = (laser.max_range / res).floor() as isize;
    let r2 = (laser.max_range / res).powi(2);
    let (cx, cy) = (center.x as isize, center.y as isize);
    let mut count = 0usize;
    for y in (cy - reach).max(0)..=(cy + reach).min(observed.height() as isize - 1) {
        for x in (cx - reach).max(0)..=(cx + reach).min(observed.width() as isize - 1) {
            if (((x - cx).pow(2) + (y - cy).pow(2)) as f64) > r2 {
                continue;
            }
            let cell = Cell::new(x as usize, y as usize);
            if observed.get(cell) == CellState::Unknown && line_of_sight(observed, center, cell) {
                count += 1;
            }
        }
    }
    count as f64 * res * res
}

/// Index minimizing `w·d̂ + (1 − w)(1 − ĝ)` over `(distance, gain)` pairs,
/// with `d̂` and `ĝ` normalized by their maxima. Ties go to the smaller raw
/// distance, then the smaller index.
pub fn cost_argmin(candidates: &[(f64, f64)], w: f64) -> Option<usize> {
    let dmax = candidates.iter().map(|c| c.0).fold(0.0, f64::max);
    let gmax = candidates.iter().map(|c| c.1).fold(0.0, f64::max);
    let norm = |v: f64, max: f64| if max > 0.0 { v / max } else { 0.0 };
    let cost = |&(d, g): &(f64, f64)| w * norm(d, dmax) + (1.0 - w) * (1.0 - norm(g, gmax));
    (0..candidates.len()).min_by(|&a, &b| {
        cost(&candidates[a])
            .total_cmp(&cost(&candidates[b]))
            .then(candidates[a].0.total_cmp(&candidates[b].0))
            .then(a.cmp(&b))
    })
}

/// Frontier indices of the cluster centers used by the cost strategies.
pub fn frontier_centers(ctx: &mut DecisionContext, k: usize) -> Result<Vec<usize>> {
    let n = ctx.require_frontier()?;
    let pts: Vec<(f64, f64)> = ctx.cloud.frontier.iter().map(|p| (p.x, p.y)).collect();
    Ok(kmeans(&pts, k.clamp(1, n), ctx.rng)?.centers)
}

/// Cost baseline: cluster, score centers by distance and information
/// gain, pick the cheapest.
pub fn select_cost(ctx: &mut DecisionContext, w: f64, k: usize) -> Result<FrontierChoice> {
    let centers = frontier_centers(ctx, k)?;
    let scored: Vec<(f64, f64)> = centers
        .iter()
        .map(|&i| {
            let p = &ctx.cloud.frontier[i];
            (p.d, information_gain(ctx.observed, p.cell, ctx.laser))
        })
        .collect();
    let best = cost_argmin(&scored, w).expect("at least one center");
    Ok(ctx.choice(centers[best]))
}

/// Weighted cost: the network's scalar head sets `w`.
pub fn select_weighted(ctx: &mut DecisionContext, net: &NetworkParams, k: usize) -> Result<FrontierChoice> {
    ctx.require_frontier()?;
    let (out, _) = valuenet::forward(net, ctx.cloud)?;
    select_cost(ctx, out.weight, k)
}

/// Index of the largest value; ties go to the smaller index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// ε-greedy over the network's per-frontier values.
pub fn select_dqn(ctx: &mut DecisionContext, net: &NetworkParams, epsilon: f64) -> Result<FrontierChoice> {
    let n = ctx.require_frontier()?;
    if epsilon > 0.0 && ctx.rng.random::<f64>() < epsilon {
        let i = ctx.rng.random_range(0..n);
        return Ok(ctx.choice(i));
    }
    let values = valuenet::values(net, ctx.cloud)?;
    Ok(ctx.choice(argmax(&values).expect("nonempty")))
}

/// Strategy names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Random,
    Greedy,
    Cost,
    Weight,
    Dqn,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::Greedy,
        StrategyKind::Cost,
        StrategyKind::Weight,
        StrategyKind::Dqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Greedy => "greedy",
            StrategyKind::Cost => "cost",
            StrategyKind::Weight => "weight",
            StrategyKind::Dqn => "dqn",
        }
    }

    pub fn needs_network(self) -> bool {
        matches!(self, StrategyKind::Weight | StrategyKind::Dqn)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}` (expected random|greedy|cost|weight|dqn)")))
    }
}

/// A configured strategy.
#[derive(Clone, Debug)]
pub enum Strategy {
    Random,
    Greedy,
    Cost { weight: f64, clusters: usize },
    Weight { net: NetworkParams, clusters: usize },
    Dqn { net: NetworkParams, epsilon: f64 },
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Random => StrategyKind::Random,
            Strategy::Greedy => StrategyKind::Greedy,
            Strategy::Cost { .. } => StrategyKind::Cost,
            Strategy::Weight { .. } => StrategyKind::Weight,
            Strategy::Dqn { .. } => StrategyKind::Dqn,
        }
    }

    /// Builds a strategy with default settings; `net` is required for the
    /// learned ones.
    pub fn from_kind(kind: StrategyKind, net: Option<NetworkParams>) -> Result<Self> {
        let need = || Error::Config(format!("strategy `{kind}` needs network parameters"));
        Ok(match kind {
            StrategyKind::Random => Strategy::Random,
            StrategyKind::Greedy => Strategy::Greedy,
            StrategyKind::Cost => Strategy::Cost {
                weight: DEFAULT_COST_WEIGHT,
                clusters: DEFAULT_CLUSTERS,
            },
            StrategyKind::Weight => Strategy::Weight {
                net: net.ok_or_else(need)?,
                clusters: DEFAULT_CLUSTERS,
            },
            StrategyKind::Dqn => Strategy::Dqn {
                net: net.ok_or_else(need)?,
                epsilon: 0.0,
            },
        })
    }

    pub fn select(&self, ctx: &mut DecisionContext) -> Result<FrontierChoice> {
        match self {
            Strategy::Random => select_random(ctx),
            Strategy::Greedy => select_greedy(ctx),
            Strategy::Cost { weight, clusters } => select_cost(ctx, *weight, *clusters),
            Strategy::Weight { net, clusters } => select_weighted(ctx, net, *clusters),
            Strategy::Dqn { net, epsilon } => select_dqn(ctx, net, *epsilon),
        }
    }
}
