//! Contour extraction with shortest-path distances, frontier classification
//! and assembly of the 4D point cloud `(x, y, b, d)`.
//!
//! [`extract_contour`] is a Dijkstra search that never stops early: it
//! settles every walkable cell reachable from the robot and records each
//! settled cell that touches something non-walkable (occupied, unknown,
//! inflated or off-grid). One pass therefore yields both the contour of the
//! reachable free space and the exact 8-connected travel cost to every cell
//! on it.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gridmap::{Cell, CellState, OccupancyGrid, StartFrame, Walkability, NEIGHBORS8};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourEntry {
    pub cell: Cell,
    /// Path length from the robot in cell units (diagonal steps cost √2).
    pub cost: f64,
}

/// Travel cost from the search origin to every settled cell.
#[derive(Clone, Debug)]
pub struct DistanceField {
    width: usize,
    costs: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, cell: Cell) -> Option<f64> {
        if cell.x >= self.width {
            return None;
        }
        self.costs
            .get(cell.y * self.width + cell.x)
            .copied()
            .filter(|c| c.is_finite())
    }

    /// Number of cells reached by the search.
    pub fn reached(&self) -> usize {
        self.costs.iter().filter(|c| c.is_finite()).count()
    }
}

#[derive(Clone, Debug)]
pub struct Contour {
    /// Contour cells in the order they were settled (nondecreasing cost).
    pub entries: Vec<ContourEntry>,
    pub distances: DistanceField,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Open {
    cost: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then index
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs the contour-extracting Dijkstra search from `robot`.
///
/// A settled cell joins the contour when any of its 8 neighbors is not
/// walkable; each cell appears once, with its final (minimal) cost.
pub fn extract_contour(
    observed: &OccupancyGrid,
    walkable: &Walkability,
    robot: Cell,
) -> Result<Contour> {
    if walkable.width() != observed.width() || walkable.height() != observed.height() {
        return Err(Error::contract("walkability mask does not match the map"));
    }
    if !observed.in_bounds(robot) || !walkable.is_walkable(robot) {
        return Err(Error::contract(format!("robot cell {robot:?} is not walkable free space")));
    }

    let (w, h) = (observed.width() as isize, observed.height() as isize);
    let mut cost = vec![f64::INFINITY; observed.len()];
    let mut closed = vec![false; observed.len()];
    let mut open = BinaryHeap::new();
    let mut entries = Vec::new();

    let start = observed.index(robot);
    cost[start] = 0.0;
    open.push(Open { cost: 0.0, index: start });

    while let Some(Open { cost: c, index }) = open.pop() {
        if closed[index] || c > cost[index] {
            continue;
        }
        closed[index] = true;
        let cur = observed.cell_at(index);
        let mut on_contour = false;
        for &(dx, dy, step) in &NEIGHBORS8 {
            let (nx, ny) = (cur.x as isize + dx, cur.y as isize + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                on_contour = true;
                continue;
            }
            let near = Cell::new(nx as usize, ny as usize);
            let ni = observed.index(near);
            if closed[ni] {
                continue;
            }
            if !walkable.is_walkable(near) {
                on_contour = true;
                continue;
            }
            let candidate = c + step;
            if candidate < cost[ni] {
                cost[ni] = candidate;
                open.push(Open {
                    cost: candidate,
                    index: ni,
                });
            }
        }
        if on_contour {
            entries.push(ContourEntry { cell: cur, cost: c });
        }
    }

    for (i, settled) in closed.iter().enumerate() {
        if !settled {
            cost[i] = f64::INFINITY;
        }
    }
    Ok(Contour {
        entries,
        distances: DistanceField {
            width: observed.width(),
            costs: cost,
        },
    })
}

/// Splits contour cells into frontier cells (some 8-neighbor is unknown) and
/// obstacle cells (everything else).
pub fn classify_contour(entries: &[ContourEntry], observed: &OccupancyGrid) -> (Vec<Cell>, Vec<Cell>) {
    let mut frontier = Vec::new();
    let mut obstacle = Vec::new();
    for e in entries {
        if has_unknown_neighbor(observed, e.cell) {
            frontier.push(e.cell);
        } else {
            obstacle.push(e.cell);
        }
    }
    (frontier, obstacle)
}

pub(crate) fn has_unknown_neighbor(grid: &OccupancyGrid, cell: Cell) -> bool {
    grid.neighbors8(cell).any(|(n, _)| grid.get(n) == CellState::Unknown)
}

/// One point of the 4D cloud.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudPoint {
    /// Start-frame position, meters.
    pub x: f64,
    pub y: f64,
    /// 1 for frontier points, 0 for obstacle points.
    pub b: u8,
    /// Collision-free travel distance from the robot, meters.
    pub d: f64,
    /// Grid cell the point was built from.
    pub cell: Cell,
}

impl CloudPoint {
    pub fn features(&self) -> [f64; 4] {
        [self.x, self.y, self.b as f64, self.d]
    }
}

/// The state: frontier points `F_t` and obstacle points `O_t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud4D {
    pub frontier: Vec<CloudPoint>,
    pub obstacle: Vec<CloudPoint>,
}

impl PointCloud4D {
    pub fn len(&self) -> usize {
        self.frontier.len() + self.obstacle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `true` when no accessible frontier is left.
    pub fn is_complete(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Frontier points followed by obstacle points.
    pub fn points(&self) -> impl Iterator<Item = &CloudPoint> {
        self.frontier.iter().chain(&self.obstacle)
    }

    /// CSV with header `x,y,b,d`, six decimals, frontier rows first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,b,d\n");
        for p in self.points() {
            let _ = writeln!(out, "{:.6},{:.6},{},{:.6}", p.x, p.y, p.b, p.d);
        }
        out
    }
}

/// Converts classified contour cells into cloud points in the start frame.
pub fn build_cloud(
    frontier: &[Cell],
    obstacle: &[Cell],
    distances: &DistanceField,
    frame: &StartFrame,
    grid: &OccupancyGrid,
) -> Result<PointCloud4D> {
    let res = grid.meters_per_cell();
    let point = |cell: Cell, b: u8| -> Result<CloudPoint> {
        let cost = distances
            .get(cell)
            .ok_or_else(|| Error::contract(format!("no distance for contour cell {cell:?}")))?;
        let (wx, wy) = grid.cell_center(cell);
        let (x, y) = frame.to_start_frame(wx, wy);
        Ok(CloudPoint {
            x,
            y,
            b,
            d: cost * res,
            cell,
        })
    };
    Ok(PointCloud4D {
        frontier: frontier.iter().map(|&c| point(c, 1)).collect::<Result<_>>()?,
        obstacle: obstacle.iter().map(|&c| point(c, 0)).collect::<Result<_>>()?,
    })
}

/// Full observation pipeline: contour search, classification and cloud.
pub fn observe(
    observed: &OccupancyGrid,
    walkable: &Walkability,
    robot: Cell,
    frame: &StartFrame,
) -> Result<(PointCloud4D, Contour)> {
    let contour = extract_contour(observed, walkable, robot)?;
    let (frontier, obstacle) = classify_contour(&contour.entries, observed);
    let cloud = build_cloud(&frontier, &obstacle, &contour.distances, frame, observed)?;
    Ok((cloud, contour))
}

/// Number of 8-connected groups in a set of frontier cells.
pub fn frontier_group_count(cells: &[Cell]) -> usize {
    let index: HashMap<Cell, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut seen = vec![false; cells.len()];
    let mut groups = 0;
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if seen[start] {
            continue;
        }
        groups += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let c = cells[i];
            for &(dx, dy, _) in &NEIGHBORS8 {
                let (nx, ny) = (c.x as isize + dx, c.y as isize + dy);
                if nx < 0 || ny < 0 {
                    continue;
                }
                if let Some(&j) = index.get(&Cell::new(nx as usize, ny as usize)) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    groups
}
