//! Seeded generator for synthetic indoor floorplans (rooms joined by door
//! openings), used for the bundled map set.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gridmap::{Cell, CellState, OccupancyGrid, DEFAULT_METERS_PER_CELL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloorplanParams {
    /// Smallest room side, cells (walls excluded).
    pub min_room: usize,
    /// Rooms larger than this are always split further.
    pub max_room: usize,
    pub wall: usize,
    pub door: usize,
}

impl Default for FloorplanParams {
    fn default() -> Self {
        FloorplanParams {
            min_room: 36,
            max_room: 90,
            wall: 3,
            door: 16,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn w(&self) -> usize {
        self.x1 - self.x0
    }
    fn h(&self) -> usize {
        self.y1 - self.y0
    }
}

struct Builder<'a> {
    grid: OccupancyGrid,
    params: FloorplanParams,
    rng: &'a mut ChaCha8Rng,
    // (vertical split?, split coordinate, extent along the wall) per internal node
    splits: Vec<(bool, usize, usize, usize)>,
}

impl Builder<'_> {
    fn split(&mut self, r: Rect) {
        let p = self.params;
        let leaf = p.min_room + p.wall;
        let can_v = r.w() >= 2 * leaf;
        let can_h = r.h() >= 2 * leaf;
        let big = r.w() - p.wall > p.max_room || r.h() - p.wall > p.max_room;
        let stop = !big && self.rng.random_bool(0.3);
        if (!can_v && !can_h) || stop {
            self.carve(r);
            return;
        }
        let vertical = match (can_v, can_h) {
            (true, false) => true,
            (false, true) => false,
            _ if r.w() * 4 > r.h() * 5 => true,
            _ if r.h() * 4 > r.w() * 5 => false,
            _ => self.rng.random_bool(0.5),
        };
        if vertical {
            let at = r.x0 + self.rng.random_range(leaf..=r.w() - leaf);
            self.split(Rect { x1: at, ..r });
            self.split(Rect { x0: at, ..r });
            self.splits.push((true, at, r.y0, r.y1));
        } else {
            let at = r.y0 + self.rng.random_range(leaf..=r.h() - leaf);
            self.split(Rect { y1: at, ..r });
            self.split(Rect { y0: at, ..r });
            self.splits.push((false, at, r.x0, r.x1));
        }
    }

    fn carve(&mut self, r: Rect) {
        let wall = self.params.wall;
        for y in r.y0 + wall..r.y1 {
            for x in r.x0 + wall..r.x1 {
                self.grid.set(Cell::new(x, y), CellState::Free);
            }
        }
    }

    fn free(&self, x: usize, y: usize) -> bool {
        self.grid.get(Cell::new(x, y)) == CellState::Free
    }

    /// Opens a door through the wall at each split where both sides have
    /// room space along a full door width.
    fn doors(&mut self) {
        let (wall, door) = (self.params.wall, self.params.door);
        let splits = std::mem::take(&mut self.splits);
        for (vertical, at, lo, hi) in splits {
            // wall occupies [at, at + wall) across the split axis
            let mut spans = Vec::new();
            let mut run = 0;
            for t in lo..hi {
                let open = if vertical {
                    at >= 1 && at + wall < self.grid.width() && self.free(at - 1, t) && self.free(at + wall, t)
                } else {
                    at >= 1 && at + wall < self.grid.height() && self.free(t, at - 1) && self.free(t, at + wall)
                };
                run = if open { run + 1 } else { 0 };
                if run >= door {
                    spans.push(t + 1 - door);
                }
            }
            let Some(&start) = spans.choose(self.rng) else {
                continue;
            };
            for t in start..start + door {
                for k in at..at + wall {
                    let c = if vertical { Cell::new(k, t) } else { Cell::new(t, k) };
                    self.grid.set(c, CellState::Free);
                }
            }
        }
    }

    /// Scatters a few rectangular obstacles in the larger rooms.
    fn furniture(&mut self, count: usize) {
        let (w, h) = (self.grid.width(), self.grid.height());
        let mut placed = 0;
        let mut tries = 0;
        while placed < count && tries < count * 50 {
            tries += 1;
            let bw = self.rng.random_range(4..10);
            let bh = self.rng.random_range(4..10);
            if w < bw + 40 || h < bh + 40 {
                return;
            }
            let x = self.rng.random_range(20..w - bw - 20);
            let y = self.rng.random_range(20..h - bh - 20);
            // keep a generous free margin so the block never narrows a passage
            let margin = 14;
            let clear = (y - margin..y + bh + margin).all(|yy| (x - margin..x + bw + margin).all(|xx| self.free(xx, yy)));
            if !clear {
                continue;
            }
            for yy in y..y + bh {
                for xx in x..x + bw {
                    self.grid.set(Cell::new(xx, yy), CellState::Occupied);
                }
            }
            placed += 1;
        }
    }
}

/// Generates a closed floorplan of `width`×`height` cells.
pub fn floorplan(width: usize, height: usize, seed: u64, params: FloorplanParams) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = OccupancyGrid::new(width, height, CellState::Occupied, DEFAULT_METERS_PER_CELL);
    let furniture = (width * height) / 12_000;
    let mut b = Builder {
        grid,
        params,
        rng: &mut rng,
        splits: Vec::new(),
    };
    b.split(Rect {
        x0: 0,
        y0: 0,
        x1: width - params.wall,
        y1: height - params.wall,
    });
    b.doors();
    b.furniture(furniture);
    b.grid
}

/// A bundled map: name, size and generator seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BundledMap {
    pub name: &'static str,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

/// The comparison set: twelve floorplans from 64×64 to 256×256 plus a
/// 234×191 test map.
pub const BUNDLED: [BundledMap; 13] = [
    BundledMap { name: "house01", width: 64, height: 64, seed: 101 },
    BundledMap { name: "house02", width: 80, height: 96, seed: 102 },
    BundledMap { name: "house03", width: 96, height: 96, seed: 103 },
    BundledMap { name: "house04", width: 112, height: 128, seed: 104 },
    BundledMap { name: "house05", width: 128, height: 128, seed: 105 },
    BundledMap { name: "house06", width: 144, height: 160, seed: 106 },
    BundledMap { name: "house07", width: 160, height: 160, seed: 107 },
    BundledMap { name: "house08", width: 176, height: 192, seed: 108 },
    BundledMap { name: "house09", width: 192, height: 192, seed: 109 },
    BundledMap { name: "house10", width: 224, height: 208, seed: 110 },
    BundledMap { name: "house11", width: 240, height: 240, seed: 111 },
    BundledMap { name: "house12", width: 256, height: 256, seed: 112 },
    BundledMap { name: "test1", width: 234, height: 191, seed: 201 },
];

/// The large map for the scalability run.
pub const LARGE: BundledMap = BundledMap {
    name: "large1",
    width: 531,
    height: 201,
    seed: 301,
};

impl BundledMap {
    pub fn generate(&self) -> OccupancyGrid {
        let mut g = floorplan(self.width, self.height, self.seed, FloorplanParams::default());
        g.set_name(self.name);
        g
    }
}

/// Looks up a bundled map by name (including the large map).
pub fn bundled(name: &str) -> Option<BundledMap> {
    BUNDLED.iter().copied().chain([LARGE]).find(|m| m.name == name)
}

/// A straight corridor with one side room, small enough to enumerate
/// decision sequences on.
pub fn corridor_with_side_room() -> OccupancyGrid {
    let mut g = OccupancyGrid::new(140, 60, CellState::Occupied, DEFAULT_METERS_PER_CELL);
    let mut open = |x0: usize, x1: usize, y0: usize, y1: usize| {
        for y in y0..y1 {
            for x in x0..x1 {
                g.set(Cell::new(x, y), CellState::Free);
            }
        }
    };
    // corridor
    open(3, 137, 40, 56);
    // side room above, connected by a doorway
    open(50, 90, 4, 34);
    open(62, 78, 34, 40);
    g.set_name("corridor_room");
    g
}
