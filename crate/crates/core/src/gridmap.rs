//! Occupancy grids, map files and the robot-start coordinate frame.
//!
//! A grid is a row-major lattice of [`CellState`]s. Cell `(x, y)` covers the
//! world square `[x, x+1) × [y, y+1)` scaled by `meters_per_cell`, so world
//! coordinates grow with the column (x) and row (y) indices.
//!
//! Ground-truth maps are stored as plain-text PGM (`P2`) bitmaps where 255 is
//! free and 0 is occupied. An optional `<stem>.meta` sidecar holds
//! `key=value` lines (`meters_per_cell`, `name`).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Default resolution: 16 cells per meter.
pub const DEFAULT_METERS_PER_CELL: f64 = 1.0 / 16.0;

const PGM_FREE: u8 = 255;
const PGM_OCCUPIED: u8 = 0;
const PGM_UNKNOWN: u8 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Integer grid coordinates (`x` = column, `y` = row).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    /// Octile distance in cell units.
    pub fn octile(self, other: Cell) -> f64 {
        let dx = self.x.abs_diff(other.x) as f64;
        let dy = self.y.abs_diff(other.y) as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        (hi - lo) + lo * std::f64::consts::SQRT_2
    }
}

/// The 8 neighbor offsets in row-major order with their step costs.
pub(crate) const NEIGHBORS8: [(isize, isize, f64); 8] = [
    (-1, -1, std::f64::consts::SQRT_2),
    (0, -1, 1.0),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, 0, 1.0),
    (1, 0, 1.0),
    (-1, 1, std::f64::consts::SQRT_2),
    (0, 1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
];

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<CellState>,
    meters_per_cell: f64,
    name: Option<String>,
}

impl OccupancyGrid {
    /// Creates a grid filled with `fill`.
    pub fn new(width: usize, height: usize, fill: CellState, meters_per_cell: f64) -> Self {
        assert!(meters_per_cell > 0.0, "meters_per_cell must be positive");
        OccupancyGrid {
            width,
            height,
            cells: vec![fill; width * height],
            meters_per_cell,
            name: None,
        }
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        cells: Vec<CellState>,
        meters_per_cell: f64,
    ) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::contract(format!(
                "{} cells supplied for a {width}x{height} grid",
                cells.len()
            )));
        }
        if !(meters_per_cell > 0.0 && meters_per_cell.is_finite()) {
            return Err(Error::contract("meters_per_cell must be positive"));
        }
        Ok(OccupancyGrid {
            width,
            height,
            cells,
            meters_per_cell,
            name: None,
        })
    }

    /// Parses an ASCII drawing: `#` occupied, `.` free, `?` unknown. Rows
    /// are separated by newlines; surrounding whitespace is ignored.
    pub fn from_ascii(art: &str) -> Result<Self> {
        let rows: Vec<&str> = art
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Format {
                    path: "<ascii>".into(),
                    line: i + 1,
                    message: "ragged row".into(),
                });
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '#' => CellState::Occupied,
                    '.' => CellState::Free,
                    '?' => CellState::Unknown,
                    other => {
                        return Err(Error::Format {
                            path: "<ascii>".into(),
                            line: i + 1,
                            message: format!("unrecognized glyph {other:?}"),
                        })
                    }
                });
            }
        }
        Self::from_cells(width, height, cells, DEFAULT_METERS_PER_CELL)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn meters_per_cell(&self) -> f64 {
        self.meters_per_cell
    }

    pub fn set_meters_per_cell(&mut self, meters_per_cell: f64) {
        assert!(meters_per_cell > 0.0, "meters_per_cell must be positive");
        self.meters_per_cell = meters_per_cell;
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = Some(name.into());
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> CellState {
        self.cells[self.index(cell)]
    }

    /// Like [`get`](Self::get) but `None` outside the grid.
    #[inline]
    pub fn try_get(&self, x: isize, y: isize) -> Option<CellState> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.cells[y as usize * self.width + x as usize])
        }
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, state: CellState) {
        let i = self.index(cell);
        self.cells[i] = state;
    }

    /// In-bounds 8-neighbors of `cell` with their step costs (cell units).
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        let (w, h) = (self.width as isize, self.height as isize);
        NEIGHBORS8.iter().filter_map(move |&(dx, dy, cost)| {
            let nx = cell.x as isize + dx;
            let ny = cell.y as isize + dy;
            (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| (Cell::new(nx as usize, ny as usize), cost))
        })
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Grid cell containing a world point, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let cx = (x / self.meters_per_cell).floor();
        let cy = (y / self.meters_per_cell).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return None;
        }
        Some(Cell::new(cx as usize, cy as usize))
    }

    /// World coordinates of a cell center, meters.
    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.x as f64 + 0.5) * self.meters_per_cell,
            (cell.y as f64 + 0.5) * self.meters_per_cell,
        )
    }

    /// A grid of the same shape and resolution, all `Unknown`.
    pub fn unknown_like(&self) -> Self {
        let mut g = OccupancyGrid::new(self.width, self.height, CellState::Unknown, self.meters_per_cell);
        g.name = self.name.clone();
        g
    }

    fn same_shape(&self, other: &OccupancyGrid) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// A robot pose in world coordinates. `heading` is kept in `[-π, π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = (a + PI).rem_euclid(two_pi) - PI;
    if r >= PI {
        r -= two_pi;
    }
    r
}

/// The episode's start pose; cloud coordinates are expressed relative to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StartFrame {
    origin: Pose,
}

impl StartFrame {
    pub fn new(origin: Pose) -> Self {
        StartFrame { origin }
    }

    pub fn origin(&self) -> Pose {
        self.origin
    }

    /// Rigid transform of a world point into the start frame.
    pub fn to_start_frame(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.origin.x, y - self.origin.y);
        let (s, c) = self.origin.heading.sin_cos();
        (dx * c + dy * s, -dx * s + dy * c)
    }
}

/// Fraction of ground-truth free cells that are free in `observed`.
pub fn explored_ratio(observed: &OccupancyGrid, truth: &OccupancyGrid) -> Result<f64> {
    if !observed.same_shape(truth) {
        return Err(Error::contract(format!(
            "explored_ratio on {}x{} vs {}x{} grids",
            observed.width, observed.height, truth.width, truth.height
        )));
    }
    let mut free = 0usize;
    let mut seen = 0usize;
    for (o, t) in observed.cells.iter().zip(&truth.cells) {
        if *t == CellState::Free {
            free += 1;
            if *o == CellState::Free {
                seen += 1;
            }
        }
    }
    if free == 0 {
        return Ok(1.0);
    }
    Ok(seen as f64 / free as f64)
}

/// Free cells that keep at least `inflation` cells (center-to-center,
/// Euclidean) away from every occupied cell.
#[derive(Clone, Debug)]
pub struct Walkability {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl Walkability {
    pub fn new(grid: &OccupancyGrid, inflation: usize) -> Self {
        let mut mask: Vec<bool> = grid.cells.iter().map(|&c| c == CellState::Free).collect();
        if inflation > 0 {
            let r = inflation as isize;
            let disc: Vec<(isize, isize)> = (-r..=r)
                .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
                .filter(|&(dx, dy)| dx * dx + dy * dy <= r * r)
                .collect();
            let (w, h) = (grid.width as isize, grid.height as isize);
            for (i, &c) in grid.cells.iter().enumerate() {
                if c != CellState::Occupied {
                    continue;
                }
                let (x, y) = ((i % grid.width) as isize, (i / grid.width) as isize);
                for &(dx, dy) in &disc {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        mask[(ny * w + nx) as usize] = false;
                    }
                }
            }
        }
        Walkability {
            width: grid.width,
            height: grid.height,
            mask,
        }
    }

    #[inline]
    pub fn is_walkable(&self, cell: Cell) -> bool {
        cell.x < self.width && cell.y < self.height && self.mask[cell.y * self.width + cell.x]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Number of cells to inflate occupied space by for a robot of `radius` meters.
pub fn inflation_cells(radius: f64, meters_per_cell: f64) -> usize {
    (radius / meters_per_cell - 1e-9).ceil().max(0.0) as usize
}

// ---------------------------------------------------------------------------
// Map files

/// Parses PGM text into a ground-truth grid.
pub fn parse_map(text: &str, source: &str) -> Result<OccupancyGrid> {
    let fmt_err = |line: usize, message: String| Error::Format {
        path: source.to_string(),
        line,
        message,
    };

    // (line number, token)
    let tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content.split_ascii_whitespace().map(move |t| (i + 1, t))
    });
    let mut tokens = tokens.peekable();
    let mut header = |what: &str| -> Result<(usize, &str)> {
        tokens
            .next()
            .ok_or_else(|| fmt_err(0, format!("unexpected end of file reading {what}")))
    };

    let (line, magic) = header("magic")?;
    if magic != "P2" {
        return Err(fmt_err(line, format!("expected magic `P2`, found `{magic}`")));
    }
    let mut dim = |what: &str| -> Result<usize> {
        let (line, tok) = header(what)?;
        tok.parse::<usize>()
            .map_err(|_| fmt_err(line, format!("invalid {what} `{tok}`")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("maxval")?;
    if maxval != 255 {
        return Err(fmt_err(0, format!("maxval must be 255, found {maxval}")));
    }
    if width < 3 || height < 3 {
        return Err(Error::Validation(format!("map {width}x{height} is too small")));
    }

    let mut cells = Vec::with_capacity(width * height);
    for (line, tok) in tokens {
        if cells.len() == width * height {
            return Err(fmt_err(line, format!("trailing data `{tok}`")));
        }
        let state = match tok.parse::<u16>() {
            Ok(v) if v == PGM_FREE as u16 => CellState::Free,
            Ok(v) if v == PGM_OCCUPIED as u16 => CellState::Occupied,
            Ok(v) if v == PGM_UNKNOWN as u16 => {
                return Err(Error::Validation(format!(
                    "line {line}: ground-truth maps must not contain unknown cells"
                )))
            }
            _ => return Err(fmt_err(line, format!("unrecognized cell value `{tok}`"))),
        };
        cells.push(state);
    }
    if cells.len() != width * height {
        return Err(fmt_err(
            text.lines().count(),
            format!("expected {} cells, found {}", width * height, cells.len()),
        ));
    }

    let grid = OccupancyGrid::from_cells(width, height, cells, DEFAULT_METERS_PER_CELL)?;
    for x in 0..width {
        for y in [0, height - 1] {
            if grid.get(Cell::new(x, y)) != CellState::Occupied {
                return Err(Error::Validation(format!("border cell ({x}, {y}) is not occupied")));
            }
        }
    }
    for y in 0..height {
        for x in [0, width - 1] {
            if grid.get(Cell::new(x, y)) != CellState::Occupied {
                return Err(Error::Validation(format!("border cell ({x}, {y}) is not occupied")));
            }
        }
    }
    Ok(grid)
}

fn apply_sidecar(grid: &mut OccupancyGrid, text: &str, source: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fmt_err = |message: String| Error::Format {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fmt_err(format!("expected key=value, found `{line}`")))?;
        match key.trim() {
            "meters_per_cell" => {
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| fmt_err(format!("invalid meters_per_cell `{value}`")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(fmt_err("meters_per_cell must be positive".into()));
                }
                grid.meters_per_cell = v;
            }
            "name" => grid.name = Some(value.trim().to_string()),
            other => return Err(fmt_err(format!("unknown key `{other}`"))),
        }
    }
    Ok(())
}

/// Path of the metadata sidecar belonging to a map file.
pub fn sidecar_path(map: &Path) -> std::path::PathBuf {
    map.with_extension("meta")
}

/// Loads a ground-truth map and its optional sidecar.
pub fn load_map(path: impl AsRef<Path>) -> Result<OccupancyGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut grid = parse_map(&text, &path.display().to_string())?;
    let meta = sidecar_path(path);
    if meta.exists() {
        let meta_text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        apply_sidecar(&mut grid, &meta_text, &meta.display().to_string())?;
    }
    if grid.name.is_none() {
        grid.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(grid)
}

/// Canonical PGM text: LF line endings, one grid row per line, single spaces.
pub fn to_pgm(grid: &OccupancyGrid) -> String {
    let mut out = String::with_capacity(grid.len() * 4 + 32);
    let _ = write!(out, "P2\n{} {}\n255\n", grid.width, grid.height);
    for row in grid.cells.chunks(grid.width) {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let v = match c {
                CellState::Free => PGM_FREE,
                CellState::Occupied => PGM_OCCUPIED,
                CellState::Unknown => PGM_UNKNOWN,
            };
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Canonical sidecar text.
pub fn to_sidecar(grid: &OccupancyGrid) -> String {
    let mut out = format!("meters_per_cell={}\n", grid.meters_per_cell);
    if let Some(name) = &grid.name {
        let _ = writeln!(out, "name={name}");
    }
    out
}

/// Writes the map and its sidecar.
pub fn save_map(grid: &OccupancyGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_pgm(grid)).map_err(|e| Error::io(path, e))?;
    let meta = sidecar_path(path);
    std::fs::write(&meta, to_sidecar(grid)).map_err(|e| Error::io(&meta, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_room() -> OccupancyGrid {
        OccupancyGrid::from_ascii(
            "####
             #..#
             #..#
             ####",
        )
        .unwrap()
    }

    #[test]
    fn smallest_valid_map_loads() {
        let grid = parse_map(&to_pgm(&small_room()), "room").unwrap();
        assert_eq!((grid.width(), grid.height()), (4, 4));
        assert_eq!(grid.count(CellState::Free), 4);
        assert_eq!(grid.count(CellState::Unknown), 0);
    }

    #[test]
    fn unrecognized_glyph_is_a_format_error() {
        let text = "P2\n4 4\n255\n0 0 0 0\n0 255 17 0\n0 255 255 0\n0 0 0 0\n";
        match parse_map(text, "bad.pgm") {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("17"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn open_border_is_a_validation_error() {
        let text = "P2\n4 4\n255\n0 0 0 0\n255 255 255 0\n0 255 255 0\n0 0 0 0\n";
        assert!(matches!(parse_map(text, "open.pgm"), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_cells_are_rejected_in_ground_truth() {
        let text = "P2\n4 4\n255\n0 0 0 0\n0 128 255 0\n0 255 255 0\n0 0 0 0\n";
        assert!(matches!(parse_map(text, "u.pgm"), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_header_is_reported() {
        assert!(matches!(parse_map("P5\n4 4\n255\n", "x"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(parse_map("P2\n4 four\n255\n", "x"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(
            parse_map("P2\n4 4\n255\n0 0 0 0\n", "x"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn comments_and_loose_whitespace_canonicalize() {
        let text = "P2\n# a comment\n4   4\n255\n0 0 0 0 0 255 255 0\r\n0 255 255 0\n0 0 0 0";
        let grid = parse_map(text, "loose").unwrap();
        assert_eq!(to_pgm(&grid), to_pgm(&small_room()));
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("room.pgm");
        let mut grid = small_room();
        grid.set_name("room");
        grid.set_meters_per_cell(0.05);
        save_map(&grid, &path).unwrap();
        let loaded = load_map(&path).unwrap();
        assert_eq!(loaded, grid);
        let first = std::fs::read(&path).unwrap();
        save_map(&loaded, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn bad_sidecar_key() {
        let mut grid = small_room();
        assert!(apply_sidecar(&mut grid, "resolution=3\n", "m.meta").is_err());
        assert!(apply_sidecar(&mut grid, "meters_per_cell=-1\n", "m.meta").is_err());
        apply_sidecar(&mut grid, "# note\nmeters_per_cell=0.1\nname=lab\n", "m.meta").unwrap();
        assert_eq!(grid.meters_per_cell(), 0.1);
        assert_eq!(grid.name(), Some("lab"));
    }

    #[test]
    fn start_frame_examples() {
        let id = StartFrame::new(Pose::new(0.0, 0.0, 0.0));
        assert_eq!(id.to_start_frame(3.0, 4.0), (3.0, 4.0));

        let rot = StartFrame::new(Pose::new(10.0, 10.0, PI / 2.0));
        let (x, y) = rot.to_start_frame(10.0, 12.0);
        assert!((x - 2.0).abs() < 1e-12 && y.abs() < 1e-12, "({x}, {y})");

        let flip = StartFrame::new(Pose::new(1.0, 0.0, PI));
        let (x, y) = flip.to_start_frame(0.0, 0.0);
        assert!((x - 1.0).abs() < 1e-12 && y.abs() < 1e-12, "({x}, {y})");
    }

    #[test]
    fn heading_is_normalized() {
        assert_eq!(Pose::new(0.0, 0.0, PI).heading, -PI);
        assert!((Pose::new(0.0, 0.0, 3.0 * PI / 2.0).heading + PI / 2.0).abs() < 1e-12);
        assert!((normalize_angle(-7.0 * PI) + PI).abs() < 1e-12);
    }

    #[test]
    fn explored_ratio_examples() {
        let truth = small_room();
        assert_eq!(explored_ratio(&truth.unknown_like(), &truth).unwrap(), 0.0);
        assert_eq!(explored_ratio(&truth, &truth).unwrap(), 1.0);

        // 200 free truth cells, 190 observed free
        let mut truth = OccupancyGrid::new(22, 12, CellState::Occupied, DEFAULT_METERS_PER_CELL);
        for y in 1..11 {
            for x in 1..21 {
                truth.set(Cell::new(x, y), CellState::Free);
            }
        }
        assert_eq!(truth.count(CellState::Free), 200);
        let mut observed = truth.unknown_like();
        let mut marked = 0;
        for (i, c) in truth.cells().iter().enumerate() {
            if *c == CellState::Free && marked < 190 {
                observed.set(truth.cell_at(i), CellState::Free);
                marked += 1;
            }
        }
        assert!((explored_ratio(&observed, &truth).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn explored_ratio_rejects_mismatched_shapes() {
        let a = OccupancyGrid::new(4, 4, CellState::Free, 0.1);
        let b = OccupancyGrid::new(5, 4, CellState::Free, 0.1);
        assert!(matches!(explored_ratio(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn inflation_blocks_cells_near_walls() {
        let grid = OccupancyGrid::from_ascii(
            "#########
             #.......#
             #.......#
             #.......#
             #.......#
             #.......#
             #########",
        )
        .unwrap();
        let w = Walkability::new(&grid, 1);
        assert!(!w.is_walkable(Cell::new(1, 1)));
        assert!(w.is_walkable(Cell::new(2, 2)));
        let w = Walkability::new(&grid, 2);
        assert!(w.is_walkable(Cell::new(4, 3)));
        assert!(!w.is_walkable(Cell::new(3, 2)));
        assert_eq!(inflation_cells(0.15, DEFAULT_METERS_PER_CELL), 3);
        assert_eq!(inflation_cells(0.125, DEFAULT_METERS_PER_CELL), 2);
    }

    proptest! {
        #[test]
        fn start_frame_is_an_isometry(
            ox in -50.0..50.0f64, oy in -50.0..50.0f64, h in -10.0..10.0f64,
            ax in -50.0..50.0f64, ay in -50.0..50.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64,
        ) {
            let frame = StartFrame::new(Pose::new(ox, oy, h));
            let (pa, pb) = (frame.to_start_frame(ax, ay), frame.to_start_frame(bx, by));
            let before = (ax - bx).hypot(ay - by);
            let after = (pa.0 - pb.0).hypot(pa.1 - pb.1);
            prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
        }

        #[test]
        fn normalized_heading_in_range(a in -100.0..100.0f64) {
            let n = normalize_angle(a);
            prop_assert!((-PI..PI).contains(&n));
            prop_assert!(((a - n) / (2.0 * PI)).fract().abs() < 1e-9 || (1.0 - ((a - n) / (2.0 * PI)).fract().abs()) < 1e-9);
        }
    }
}
