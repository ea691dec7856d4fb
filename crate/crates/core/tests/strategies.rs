mod common;

use common::random_cloud;
use explore_core::frontier::PointCloud4D;
use explore_core::gridmap::{Cell, CellState, OccupancyGrid};
use explore_core::sensor::LaserParams;
use explore_core::strategies::{
    frontier_centers, information_gain, kmeans, select_cost, select_dqn, select_greedy, select_random,
    select_weighted, DecisionContext, FrontierChoice,
};
use explore_core::valuenet::{NetConfig, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn open_grid() -> OccupancyGrid {
    OccupancyGrid::new(20, 20, CellState::Free, 1.0 / 16.0)
}

fn run<T>(cloud: &PointCloud4D, grid: &OccupancyGrid, rng: &mut ChaCha8Rng, f: impl FnOnce(&mut DecisionContext) -> T) -> T {
    let laser = LaserParams::default();
    let mut ctx = DecisionContext {
        cloud,
        observed: grid,
        laser: &laser,
        rng,
    };
    f(&mut ctx)
}

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expect = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn random_choice_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cloud = random_cloud(&mut rng, 4, 0);
    let grid = open_grid();
    let mut counts = [0u64; 4];
    run(&cloud, &grid, &mut rng, |ctx| {
        for _ in 0..100_000 {
            counts[select_random(ctx).unwrap().index] += 1;
        }
    });
    for c in counts {
        let f = c as f64 / 1e5;
        assert!((0.24..=0.26).contains(&f), "frequency {f}");
    }
}

#[test]
fn dqn_with_full_exploration_matches_random_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cloud = random_cloud(&mut rng, 5, 3);
    let grid = open_grid();
    let net = NetworkParams::init(&NetConfig::tiny(), 0).unwrap();
    let mut counts = [0u64; 5];
    run(&cloud, &grid, &mut rng, |ctx| {
        for _ in 0..100_000 {
            counts[select_dqn(ctx, &net, 1.0).unwrap().index] += 1;
        }
    });
    let p = chi_square_p(&counts);
    assert!(p > 0.001, "p = {p}, counts {counts:?}");
}

#[test]
fn greedy_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = open_grid();
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let mut cloud = random_cloud(&mut rng, n, 2);
        // coarse distances so ties happen
        for p in &mut cloud.frontier {
            p.d = (p.d * 2.0).round();
        }
        let mut best = 0;
        for i in 1..n {
            if cloud.frontier[i].d < cloud.frontier[best].d {
                best = i;
            }
        }
        assert_eq!(run(&cloud, &grid, &mut rng, |c| select_greedy(c)).unwrap().index, best);
    }
}

fn sse(points: &[(f64, f64)], groups: &[Vec<usize>]) -> f64 {
    groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let m = g.iter().fold((0.0, 0.0), |a, &i| (a.0 + points[i].0, a.1 + points[i].1));
            let m = (m.0 / g.len() as f64, m.1 / g.len() as f64);
            g.iter().map(|&i| (points[i].0 - m.0).powi(2) + (points[i].1 - m.1).powi(2)).sum::<f64>()
        })
        .sum()
}

#[test]
fn kmeans_finds_the_optimal_two_partition_of_separated_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.random_range(4..=12);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let base = if i % 2 == 0 { (0.0, 0.0) } else { (20.0, 5.0) };
                (base.0 + rng.random_range(-1.0..1.0), base.1 + rng.random_range(-1.0..1.0))
            })
            .collect();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask & (1 << i) != 0);
            best = best.min(sse(&points, &[a, b]));
        }
        let result = kmeans(&points, 2, &mut rng).unwrap();
        let groups: Vec<Vec<usize>> = (0..2)
            .map(|c| (0..n).filter(|&i| result.assignment[i] == c).collect())
            .collect();
        assert!((sse(&points, &groups) - best).abs() < 1e-9);
        // one snapped center per blob
        let blobs: Vec<usize> = result.centers.iter().map(|&c| c % 2).collect();
        assert!(blobs.contains(&0) && blobs.contains(&1));
    }
}

/// Exact test of whether the open segment between two cell centers meets
/// the open interior of a cell square (Liang–Barsky clipping).
fn segment_enters(a: (f64, f64), b: (f64, f64), cell: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let checks = [
        (-dx, a.0 - cell.0),
        (dx, cell.0 + 1.0 - a.0),
        (-dy, a.1 - cell.1),
        (dy, cell.1 + 1.0 - a.1),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q <= 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 < t1
}

fn gain_oracle(grid: &OccupancyGrid, center: Cell, range: f64) -> f64 {
    let res = grid.meters_per_cell();
    let a = (center.x as f64 + 0.5, center.y as f64 + 0.5);
    let mut count = 0;
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let cell = Cell::new(x, y);
            let b = (x as f64 + 0.5, y as f64 + 0.5);
            if grid.get(cell) != CellState::Unknown || ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt() * res > range {
                continue;
            }
            let blocked = (0..grid.height()).any(|oy| {
                (0..grid.width()).any(|ox| {
                    let o = Cell::new(ox, oy);
                    o != center && o != cell && grid.get(o) == CellState::Occupied && segment_enters(a, b, (ox as f64, oy as f64))
                })
            });
            if !blocked {
                count += 1;
            }
        }
    }
    count as f64 * res * res
}

#[test]
fn information_gain_matches_exhaustive_visibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let laser = LaserParams {
        max_range: 0.75,
        ..LaserParams::default()
    };
    for _ in 0..15 {
        let (w, h) = (24, 24);
        let mut grid = OccupancyGrid::new(w, h, CellState::Free, 1.0 / 16.0);
        for y in 0..h {
            for x in 0..w {
                let r: f64 = rng.random();
                let s = if r < 0.12 {
                    CellState::Occupied
                } else if r < 0.6 {
                    CellState::Unknown
                } else {
                    CellState::Free
                };
                grid.set(Cell::new(x, y), s);
            }
        }
        let center = Cell::new(rng.random_range(0..w), rng.random_range(0..h));
        grid.set(center, CellState::Free);
        let got = information_gain(&grid, center, &laser);
        let want = gain_oracle(&grid, center, laser.max_range);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn information_gain_half_plane_bound() {
    // free left half, unknown right half, center on the boundary
    let (w, h) = (100, 100);
    let mut grid = OccupancyGrid::new(w, h, CellState::Free, 1.0 / 16.0);
    for y in 0..h {
        for x in 50..w {
            grid.set(Cell::new(x, y), CellState::Unknown);
        }
    }
    let laser = LaserParams::default();
    let gain = information_gain(&grid, Cell::new(49, 50), &laser);
    let half_disc = std::f64::consts::PI * 4.0 / 2.0;
    assert!(gain <= half_disc + 0.05, "{gain}");
    assert!(gain > 0.97 * half_disc, "{gain}");

    let nothing = OccupancyGrid::new(w, h, CellState::Free, 1.0 / 16.0);
    assert_eq!(information_gain(&nothing, Cell::new(50, 50), &laser), 0.0);
}

fn net_with_weight(logit: f64) -> NetworkParams {
    let mut net = NetworkParams::init(&NetConfig::tiny(), 9).unwrap();
    let hidden = NetConfig::tiny().head_dims[0];
    let last = net.len() - 1;
    for i in last - hidden..last {
        net.set(i, 0.0);
    }
    net.set(last, logit);
    net
}

/// Clouds built on real grid cells so information gain is meaningful.
fn grid_cloud(rng: &mut ChaCha8Rng, grid: &OccupancyGrid, n: usize) -> PointCloud4D {
    let mut cloud = random_cloud(rng, n, 4);
    for p in &mut cloud.frontier {
        p.cell = Cell::new(rng.random_range(0..grid.width()), rng.random_range(0..grid.height()));
        p.x = p.cell.x as f64 / 16.0;
        p.y = p.cell.y as f64 / 16.0;
    }
    cloud
}

fn mixed_grid(rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(60, 60, CellState::Free, 1.0 / 16.0);
    for y in 0..60 {
        for x in 0..60 {
            if rng.random::<f64>() < 0.4 {
                grid.set(Cell::new(x, y), CellState::Unknown);
            }
        }
    }
    grid
}

#[test]
fn weighted_delegates_to_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let one = net_with_weight(1000.0);
    let half = net_with_weight(0.0);
    for seed in 0..30 {
        let grid = mixed_grid(&mut rng);
        let cloud = grid_cloud(&mut rng, &grid, 25);
        let pick = |f: &dyn Fn(&mut DecisionContext) -> FrontierChoice| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            run(&cloud, &grid, &mut r, |c| f(c))
        };
        let nearest_center = pick(&|c| {
            let centers = frontier_centers(c, 8).unwrap();
            let best = centers
                .iter()
                .copied()
                .min_by(|&a, &b| c.cloud.frontier[a].d.total_cmp(&c.cloud.frontier[b].d).then(a.cmp(&b)))
                .unwrap();
            FrontierChoice {
                index: best,
                cell: c.cloud.frontier[best].cell,
            }
        });
        assert_eq!(pick(&|c| select_weighted(c, &one, 8).unwrap()), nearest_center);
        assert_eq!(
            pick(&|c| select_weighted(c, &half, 8).unwrap()),
            pick(&|c| select_cost(c, 0.5, 8).unwrap())
        );
    }
}

#[test]
fn weighted_choice_is_always_a_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = NetworkParams::init(&NetConfig::tiny(), 1).unwrap();
    for seed in 0..30 {
        let grid = mixed_grid(&mut rng);
        let n = rng.random_range(1..40);
        let cloud = grid_cloud(&mut rng, &grid, n);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let centers = run(&cloud, &grid, &mut r, |c| frontier_centers(c, 8).unwrap());
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let choice = run(&cloud, &grid, &mut r, |c| select_weighted(c, &net, 8).unwrap());
        assert!(centers.contains(&choice.index));
    }
}

#[test]
fn dqn_argmax_ignores_constant_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = open_grid();
    let base = NetworkParams::init(&NetConfig::tiny(), 4).unwrap();
    let mut shifted = base.clone();
    // the last head bias adds a constant to every value
    let head_bias = {
        let mut offset = 0;
        let mut found = None;
        for l in base.layers() {
            offset += l.weight.len();
            if l.name == "head2" {
                found = Some(offset);
            }
            offset += l.bias.len();
        }
        found.unwrap()
    };
    shifted.set(head_bias, base.get(head_bias) + 3.7);
    for _ in 0..20 {
        let cloud = random_cloud(&mut rng, 7, 10);
        let a = run(&cloud, &grid, &mut rng, |c| select_dqn(c, &base, 0.0).unwrap());
        let b = run(&cloud, &grid, &mut rng, |c| select_dqn(c, &shifted, 0.0).unwrap());
        assert_eq!(a, b);
    }
}
