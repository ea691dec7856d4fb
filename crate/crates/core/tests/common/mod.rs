//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use explore_core::frontier::{CloudPoint, PointCloud4D};
use explore_core::gridmap::{Cell, CellState, OccupancyGrid, Walkability};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn point(x: f64, y: f64, b: u8, d: f64) -> CloudPoint {
    CloudPoint {
        x,
        y,
        b,
        d,
        cell: Cell::new(0, 0),
    }
}

/// Cloud with continuous random coordinates, so distance ties have
/// probability zero.
pub fn random_cloud(rng: &mut ChaCha8Rng, nf: usize, nw: usize) -> PointCloud4D {
    let mut p = |b| {
        point(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            b,
            rng.random_range(0.0..6.0),
        )
    };
    PointCloud4D {
        frontier: (0..nf).map(|_| p(1)).collect(),
        obstacle: (0..nw).map(|_| p(0)).collect(),
    }
}

/// Random map with an Occupied border, scattered Occupied and Unknown
/// cells, and a Free robot cell.
pub fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, p_occ: f64, p_unknown: f64) -> (OccupancyGrid, Cell) {
    let mut g = OccupancyGrid::new(w, h, CellState::Free, 1.0 / 16.0);
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            let border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            let r: f64 = rng.random();
            let s = if border || r < p_occ {
                CellState::Occupied
            } else if r < p_occ + p_unknown {
                CellState::Unknown
            } else {
                CellState::Free
            };
            g.set(c, s);
        }
    }
    let robot = Cell::new(rng.random_range(1..w - 1), rng.random_range(1..h - 1));
    g.set(robot, CellState::Free);
    (g, robot)
}

/// Textbook Dijkstra over walkable cells with 8-connectivity, returning
/// the cost to every cell (infinity when unreached).
pub fn dijkstra(grid: &OccupancyGrid, walk: &Walkability, start: Cell) -> Vec<f64> {
    let (w, h) = (grid.width(), grid.height());
    let mut dist = vec![f64::INFINITY; w * h];
    let mut done = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    let key = |d: f64| Reverse((d * 1e12) as u128);
    dist[start.y * w + start.x] = 0.0;
    heap.push((key(0.0), start.y * w + start.x));
    while let Some((_, i)) = heap.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let c = Cell::new(nx as usize, ny as usize);
                if !walk.is_walkable(c) {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let j = c.y * w + c.x;
                let nd = dist[i] + step;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push((key(nd), j));
                }
            }
        }
    }
    dist
}
