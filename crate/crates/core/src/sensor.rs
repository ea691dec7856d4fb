//! Limited-range laser simulation and scan integration.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gridmap::{Cell, CellState, OccupancyGrid, Pose};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserParams {
    /// Meters.
    pub max_range: f64,
    /// Radians.
    pub fov: f64,
    pub beam_count: usize,
    pub noise_std: f64,
    pub noise_mean: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        LaserParams {
            max_range: 2.0,
            fov: PI,
            beam_count: 181,
            noise_std: 0.02,
            noise_mean: 0.0,
        }
    }
}

impl LaserParams {
    pub fn noiseless() -> Self {
        LaserParams {
            noise_std: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_range > 0.0) || self.beam_count < 2 || !(self.noise_std >= 0.0) {
            return Err(Error::Config(format!("invalid laser parameters {self:?}")));
        }
        Ok(())
    }

    /// Beam angle for beam `i` of a scan taken at `heading`.
    pub fn beam_angle(&self, heading: f64, i: usize) -> f64 {
        heading - self.fov / 2.0 + self.fov * i as f64 / (self.beam_count - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub pose: Pose,
    pub fov: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
    pub hit_flags: Vec<bool>,
}

impl Scan {
    pub fn beam_angle(&self, i: usize) -> f64 {
        self.pose.heading - self.fov / 2.0 + self.fov * i as f64 / (self.ranges.len() - 1) as f64
    }
}

/// Casts one ray through `truth` with an exact grid traversal and returns
/// the distance to the boundary of the first occupied cell, capped at
/// `max_range`, together with whether an obstacle was hit.
pub fn raycast(
    truth: &OccupancyGrid,
    origin: (f64, f64),
    angle: f64,
    max_range: f64,
) -> Result<(f64, bool)> {
    let res = truth.meters_per_cell();
    let start = truth
        .cell_of(origin.0, origin.1)
        .ok_or_else(|| Error::contract(format!("ray origin {origin:?} outside the map")))?;
    if truth.get(start) != CellState::Free {
        return Err(Error::contract(format!("ray origin {origin:?} is not in free space")));
    }

    let (dy, dx) = angle.sin_cos();
    // positions in cell units
    let (px, py) = (origin.0 / res, origin.1 / res);
    let (mut cx, mut cy) = (start.x as isize, start.y as isize);
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (cx as f64 + 1.0 - px) * t_delta_x
    } else if dx < 0.0 {
        (px - cx as f64) * t_delta_x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cy as f64 + 1.0 - py) * t_delta_y
    } else if dy < 0.0 {
        (py - cy as f64) * t_delta_y
    } else {
        f64::INFINITY
    };

    let limit = max_range / res;
    loop {
        let t = if t_max_x < t_max_y {
            let t = t_max_x;
            t_max_x += t_delta_x;
            cx += step_x;
            t
        } else {
            let t = t_max_y;
            t_max_y += t_delta_y;
            cy += step_y;
            t
        };
        if t >= limit {
            return Ok((max_range, false));
        }
        match truth.try_get(cx, cy) {
            Some(CellState::Free) => {}
            _ => return Ok((t * res, true)),
        }
    }
}

/// Simulates one noisy scan from `pose`.
pub fn simulate_scan<R: Rng + ?Sized>(
    truth: &OccupancyGrid,
    pose: Pose,
    params: &LaserParams,
    rng: &mut R,
) -> Result<Scan> {
    params.validate()?;
    let noise = if params.noise_std > 0.0 || params.noise_mean != 0.0 {
        Some(
            Normal::new(params.noise_mean, params.noise_std)
                .map_err(|e| Error::Config(format!("laser noise: {e}")))?,
        )
    } else {
        None
    };
    let mut ranges = Vec::with_capacity(params.beam_count);
    let mut hit_flags = Vec::with_capacity(params.beam_count);
    for i in 0..params.beam_count {
        let angle = params.beam_angle(pose.heading, i);
        let (range, hit) = raycast(truth, (pose.x, pose.y), angle, params.max_range)?;
        let noisy = match &noise {
            Some(n) => (range + n.sample(rng)).clamp(0.0, params.max_range),
            None => range,
        };
        ranges.push(noisy);
        hit_flags.push(hit);
    }
    Ok(Scan {
        pose,
        fov: params.fov,
        max_range: params.max_range,
        ranges,
        hit_flags,
    })
}

/// Cells on the 8-connected Bresenham line from `a` to `b`, inclusive.
pub fn bresenham(a: (isize, isize), b: (isize, isize)) -> Vec<(isize, isize)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x, y));
        if x == b.0 && y == b.1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

// Keeps noiseless endpoints inside the cell that was hit rather than on its
// boundary.
const ENDPOINT_EPS: f64 = 1e-9;

/// Cells on an 8-connected Bresenham-style walk between two world points.
///
/// The line is sampled once per column (or row, for steep lines) at the
/// cell center along the major axis, clamped to the segment, so neighboring
/// rays sample the same positions.
pub fn trace_cells(from: (f64, f64), to: (f64, f64), meters_per_cell: f64) -> Vec<(isize, isize)> {
    let (sx, sy) = (from.0 / meters_per_cell, from.1 / meters_per_cell);
    let (ex, ey) = (to.0 / meters_per_cell, to.1 / meters_per_cell);
    let (dx, dy) = (ex - sx, ey - sy);
    let x_major = dx.abs() >= dy.abs();
    // walk along the major axis; `a` is major, `b` minor
    let (sa, ea, sb, slope) = if x_major {
        (sx, ex, sy, if dx != 0.0 { dy / dx } else { 0.0 })
    } else {
        (sy, ey, sx, dx / dy)
    };
    let (first, last) = (sa.floor() as isize, ea.floor() as isize);
    let step: isize = if last >= first { 1 } else { -1 };
    let (lo, hi) = (sa.min(ea), sa.max(ea));
    let mut out = Vec::with_capacity(first.abs_diff(last) + 1);
    let mut a = first;
    loop {
        let at = (a as f64 + 0.5).clamp(lo, hi);
        let b = (sb + (at - sa) * slope).floor() as isize;
        out.push(if x_major { (a, b) } else { (b, a) });
        if a == last {
            break;
        }
        a += step;
    }
    // the endpoints themselves must be part of the walk
    let end_cell = (ex.floor() as isize, ey.floor() as isize);
    if out.last() != Some(&end_cell) {
        let prev = *out.last().expect("walk is nonempty");
        if (prev.0 - end_cell.0).abs() > 1 || (prev.1 - end_cell.1).abs() > 1 {
            out.push(((prev.0 + end_cell.0).div_euclid(2), (prev.1 + end_cell.1).div_euclid(2)));
        }
        out.push(end_cell);
    }
    out
}

/// Cells touched by beam `i` of `scan`, in order from the pose outward.
pub fn beam_trace(observed: &OccupancyGrid, scan: &Scan, i: usize) -> Vec<(isize, isize)> {
    let angle = scan.beam_angle(i);
    let r = scan.ranges[i] + ENDPOINT_EPS;
    let end = (scan.pose.x + r * angle.cos(), scan.pose.y + r * angle.sin());
    trace_cells((scan.pose.x, scan.pose.y), end, observed.meters_per_cell())
}

/// Writes a scan into the observed map and returns how many cells changed
/// from `Unknown`.
///
/// Cells along each beam become free; the terminal cell of a beam that hit
/// something becomes occupied. Later evidence overwrites earlier evidence.
pub fn integrate_scan(observed: &mut OccupancyGrid, scan: &Scan) -> usize {
    let mut newly = 0;
    if let Some(cell) = observed.cell_of(scan.pose.x, scan.pose.y) {
        if observed.get(cell) == CellState::Unknown {
            newly += 1;
        }
        observed.set(cell, CellState::Free);
    }
    for i in 0..scan.ranges.len() {
        let trace = beam_trace(observed, scan, i);
        let last = trace.len() - 1;
        for (k, &(x, y)) in trace.iter().enumerate() {
            if observed.try_get(x, y).is_none() {
                break;
            }
            let cell = Cell::new(x as usize, y as usize);
            let state = if k == last && scan.hit_flags[i] {
                CellState::Occupied
            } else {
                CellState::Free
            };
            if observed.get(cell) == CellState::Unknown {
                newly += 1;
            }
            observed.set(cell, state);
        }
    }
    newly
}

/// Two opposed half scans covering the full circle around `pose`.
pub fn initial_spin<R: Rng + ?Sized>(
    truth: &OccupancyGrid,
    observed: &mut OccupancyGrid,
    pose: Pose,
    params: &LaserParams,
    rng: &mut R,
) -> Result<usize> {
    let mut newly = 0;
    for turn in [0.0, PI] {
        let heading_pose = Pose::new(pose.x, pose.y, pose.heading + turn);
        let scan = simulate_scan(truth, heading_pose, params, rng)?;
        newly += integrate_scan(observed, &scan);
    }
    Ok(newly)
}
