//! Grid world: occupancy maps, discrete viewpoints, primitive motion, field of
//! view and shortest paths.
//!
//! Cells are addressed by `(col, row)`. Headings are measured counter-clockwise
//! from the +col axis ("east") in 45° steps, with +row as the 90° direction.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default edge length of one grid cell, in meters.
pub const DEFAULT_CELL_SIZE: f64 = 0.25;

const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }

    pub fn offset(self, dc: i32, dr: i32) -> Self {
        Self::new(self.col + dc, self.row + dr)
    }

    pub fn dist_sq(self, other: Cell) -> i64 {
        let dc = (self.col - other.col) as i64;
        let dr = (self.row - other.row) as i64;
        dc * dc + dr * dr
    }

    /// Euclidean distance between cell centers, in cells.
    pub fn dist(self, other: Cell) -> f64 {
        (self.dist_sq(other) as f64).sqrt()
    }
}

impl From<[i32; 2]> for Cell {
    fn from([col, row]: [i32; 2]) -> Self {
        Cell::new(col, row)
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// One of eight headings at 45° increments. Serialized as degrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u16")]
pub struct Heading(u8);

const STEPS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

impl Heading {
    pub const EAST: Heading = Heading(0);
    pub const NORTH: Heading = Heading(2);
    pub const WEST: Heading = Heading(4);
    pub const SOUTH: Heading = Heading(6);

    pub const ALL: [Heading; 8] = [
        Heading(0),
        Heading(1),
        Heading(2),
        Heading(3),
        Heading(4),
        Heading(5),
        Heading(6),
        Heading(7),
    ];

    pub fn from_degrees(deg: i64) -> Result<Self> {
        if deg % 45 != 0 {
            return Err(Error::InvalidHeading(deg));
        }
        Ok(Heading((deg / 45).rem_euclid(8) as u8))
    }

    pub fn from_index(index: usize) -> Self {
        Heading((index % 8) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn degrees(self) -> u16 {
        self.0 as u16 * 45
    }

    /// Counter-clockwise by 45°.
    pub fn left(self) -> Self {
        Heading((self.0 + 1) % 8)
    }

    /// Clockwise by 45°.
    pub fn right(self) -> Self {
        Heading((self.0 + 7) % 8)
    }

    /// Unit grid step `(dcol, drow)` along this heading.
    pub fn step(self) -> (i32, i32) {
        STEPS[self.0 as usize]
    }

    /// Heading whose direction is angularly closest to `to - from`.
    /// Returns `None` when the two cells coincide.
    pub fn toward(from: Cell, to: Cell) -> Option<Self> {
        if from == to {
            return None;
        }
        let dc = (to.col - from.col) as f64;
        let dr = (to.row - from.row) as f64;
        let angle = dr.atan2(dc).to_degrees().rem_euclid(360.0);
        Some(Heading(((angle / 45.0).round() as i64).rem_euclid(8) as u8))
    }

    /// Number of 45° rotations needed to turn from `self` to `other`.
    pub fn rotations_to(self, other: Heading) -> u32 {
        let d = (other.0 as i32 - self.0 as i32).rem_euclid(8);
        d.min(8 - d) as u32
    }
}

impl TryFrom<i64> for Heading {
    type Error = Error;

    fn try_from(deg: i64) -> Result<Self> {
        Heading::from_degrees(deg)
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.degrees()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
}

impl Pose {
    pub const fn new(cell: Cell, heading: Heading) -> Self {
        Self { cell, heading }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.cell, self.heading.degrees())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MoveAction {
    MoveAhead,
    RotateLeft,
    RotateRight,
}

impl MoveAction {
    pub const ALL: [MoveAction; 3] = [
        MoveAction::MoveAhead,
        MoveAction::RotateLeft,
        MoveAction::RotateRight,
    ];

    pub fn is_translation(self) -> bool {
        matches!(self, MoveAction::MoveAhead)
    }
}

#[derive(Serialize, Deserialize)]
struct GridMapRepr {
    width: u32,
    height: u32,
    #[serde(default = "default_cell_size")]
    cell_size: f64,
    #[serde(default)]
    obstacles: Vec<Cell>,
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE
}

/// Rectangular occupancy grid. Free cells are both the robot's motion domain
/// and the set of possible object locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridMapRepr", into = "GridMapRepr")]
pub struct GridMap {
    width: u32,
    height: u32,
    cell_size: f64,
    blocked: Vec<bool>,
}

impl TryFrom<GridMapRepr> for GridMap {
    type Error = Error;

    fn try_from(r: GridMapRepr) -> Result<Self> {
        GridMap::new(r.width, r.height, r.cell_size, r.obstacles)
    }
}

impl From<GridMap> for GridMapRepr {
    fn from(m: GridMap) -> Self {
        GridMapRepr {
            width: m.width,
            height: m.height,
            cell_size: m.cell_size,
            obstacles: m.obstacles().collect(),
        }
    }
}

impl GridMap {
    pub fn new(
        width: u32,
        height: u32,
        cell_size: f64,
        obstacles: impl IntoIterator<Item = Cell>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMap(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidMap(format!("cell size {cell_size}")));
        }
        let mut map = GridMap {
            width,
            height,
            cell_size,
            blocked: vec![false; (width * height) as usize],
        };
        for c in obstacles {
            if !map.in_bounds(c) {
                return Err(Error::InvalidMap(format!("obstacle {c} outside the grid")));
            }
            let i = map.index(c);
            map.blocked[i] = true;
        }
        Ok(map)
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::new(width, height, DEFAULT_CELL_SIZE, []).expect("positive dimensions")
    }

    /// Parses a picture of the map, one string per row starting at row 0.
    /// `#` marks an obstacle, anything else is free.
    pub fn from_rows(rows: &[&str], cell_size: f64) -> Result<Self> {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as u32;
        if rows.iter().any(|r| r.chars().count() as u32 != width) {
            return Err(Error::InvalidMap("ragged rows".into()));
        }
        let obstacles = rows.iter().enumerate().flat_map(|(row, line)| {
            line.chars()
                .enumerate()
                .filter(|&(_, ch)| ch == '#')
                .map(move |(col, _)| Cell::new(col as i32, row as i32))
        });
        GridMap::new(width, height, cell_size, obstacles.collect::<Vec<_>>())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn num_cells(&self) -> usize {
        self.blocked.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as u32) < self.width && (c.row as u32) < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)]
    }

    /// Row-major index; `c` must be in bounds.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c), "{c} out of bounds");
        c.row as usize * self.width as usize + c.col as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let w = self.width as usize;
        Cell::new((index % w) as i32, (index / w) as i32)
    }

    pub fn is_free_index(&self, index: usize) -> bool {
        !self.blocked[index]
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells()).map(|i| self.cell_at(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .filter(|&i| self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    pub fn num_free(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// Copy of the map with `c` toggled free.
    pub fn without_obstacle(&self, c: Cell) -> GridMap {
        let mut m = self.clone();
        if m.in_bounds(c) {
            let i = m.index(c);
            m.blocked[i] = false;
        }
        m
    }

    pub fn with_obstacle(&self, c: Cell) -> GridMap {
        let mut m = self.clone();
        if m.in_bounds(c) {
            let i = m.index(c);
            m.blocked[i] = true;
        }
        m
    }

    /// Distance between cell centers in meters.
    pub fn meters(&self, a: Cell, b: Cell) -> f64 {
        a.dist(b) * self.cell_size
    }

    /// `‖a − b‖ ≤ meters`, with a small tolerance for exact boundary cases.
    pub fn within(&self, a: Cell, b: Cell, meters: f64) -> bool {
        self.meters(a, b) <= meters + EPS
    }
}

/// Deterministic transition for a primitive move. Blocked or out-of-bounds
/// `MoveAhead` leaves the pose unchanged.
pub fn apply_move(pose: Pose, action: MoveAction, map: &GridMap) -> Pose {
    match action {
        MoveAction::RotateLeft => Pose::new(pose.cell, pose.heading.left()),
        MoveAction::RotateRight => Pose::new(pose.cell, pose.heading.right()),
        MoveAction::MoveAhead => {
            let (dc, dr) = pose.heading.step();
            let next = pose.cell.offset(dc, dr);
            if map.is_free(next) {
                Pose::new(next, pose.heading)
            } else {
                pose
            }
        }
    }
}

/// Whether `c` lies inside the 90° field of view of `pose` (cell-center
/// geometry, boundary rays included). The pose's own cell is never inside.
pub fn in_field_of_view(pose: Pose, c: Cell) -> bool {
    let dx = (c.col - pose.cell.col) as i64;
    let dy = (c.row - pose.cell.row) as i64;
    if dx == 0 && dy == 0 {
        return false;
    }
    let (hx, hy) = pose.heading.step();
    let (hx, hy) = (hx as i64, hy as i64);
    let dot = hx * dx + hy * dy;
    // cos(angle) >= 1/sqrt(2)  <=>  dot >= 0 && 2 dot^2 >= |h|^2 |v|^2
    dot > 0 && 2 * dot * dot >= (hx * hx + hy * hy) * (dx * dx + dy * dy)
}

/// True when the segment between the centers of `from` and `to` passes
/// through no obstacle cell. Endpoint cells are not tested. A segment that
/// only touches a cell at a corner does not pass through it.
pub fn line_of_sight(map: &GridMap, from: Cell, to: Cell) -> bool {
    let dx = to.col - from.col;
    let dy = to.row - from.row;
    let (sx, sy) = (dx.signum(), dy.signum());
    let (adx, ady) = (dx.abs() as i64, dy.abs() as i64);
    // Boundary crossings happen at t = (2i+1)/(2|dx|) and (2j+1)/(2|dy|);
    // compare them exactly in integers.
    let (mut i, mut j) = (0i64, 0i64);
    let mut cur = from;
    loop {
        if cur == to {
            return true;
        }
        if cur != from && !map.is_free(cur) {
            return false;
        }
        let step_x;
        let step_y;
        if adx == 0 {
            step_x = false;
            step_y = true;
        } else if ady == 0 {
            step_x = true;
            step_y = false;
        } else {
            let lhs = (2 * i + 1) * ady;
            let rhs = (2 * j + 1) * adx;
            step_x = lhs <= rhs;
            step_y = rhs <= lhs;
        }
        if step_x {
            cur.col += sx;
            i += 1;
        }
        if step_y {
            cur.row += sy;
            j += 1;
        }
    }
}

/// Free cells inside the field of view of `pose` with an unobstructed line of
/// sight, in row-major order.
pub fn visible_cells(pose: Pose, map: &GridMap) -> Vec<Cell> {
    map.free_cells()
        .filter(|&c| in_field_of_view(pose, c) && line_of_sight(map, pose.cell, c))
        .collect()
}

/// Translation distance of a shortest route, or no route at all.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathLength {
    Meters(f64),
    Unreachable,
}

impl PathLength {
    pub fn meters(self) -> Option<f64> {
        match self {
            PathLength::Meters(m) => Some(m),
            PathLength::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, PathLength::Meters(_))
    }
}

/// Breadth-first step counts over the 8-connected `MoveAhead` graph from
/// `start`, indexed by cell. Obstacles and unreachable cells are `None`.
pub fn step_distances(map: &GridMap, start: Cell) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.num_cells()];
    if !map.is_free(start) {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[map.index(start)] = Some(0);
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        let d = dist[map.index(c)].unwrap();
        for (dc, dr) in STEPS {
            let n = c.offset(dc, dr);
            if map.is_free(n) {
                let k = map.index(n);
                if dist[k].is_none() {
                    dist[k] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

/// Shortest translation distance from `from` to any free cell within
/// `success_distance` of `to_cell`. Rotations are free; each `MoveAhead`
/// counts one cell length.
pub fn shortest_path_length(
    map: &GridMap,
    from: Pose,
    to_cell: Cell,
    success_distance: f64,
) -> PathLength {
    let dist = step_distances(map, from.cell);
    map.free_cells()
        .filter(|&c| map.within(c, to_cell, success_distance))
        .filter_map(|c| dist[map.index(c)])
        .min()
        .map_or(PathLength::Unreachable, |steps| {
            PathLength::Meters(steps as f64 * map.cell_size())
        })
}

/// Task success: within range of the target and the target is visible.
pub fn success_check(pose: Pose, target: Cell, map: &GridMap, success_distance: f64) -> bool {
    map.within(pose.cell, target, success_distance)
        && map.is_free(target)
        && in_field_of_view(pose, target)
        && line_of_sight(map, pose.cell, target)
}

/// Precomputed visibility for every pose on a free cell.
#[derive(Clone, Debug)]
pub struct FovTable {
    num_cells: usize,
    words: usize,
    visible: Vec<Vec<u32>>,
    bits: Vec<u64>,
}

impl FovTable {
    pub fn new(map: &GridMap) -> Self {
        let num_cells = map.num_cells();
        let words = num_cells.div_ceil(64);
        let mut visible = vec![Vec::new(); num_cells * 8];
        let mut bits = vec![0u64; num_cells * 8 * words];
        for cell in map.free_cells() {
            for h in Heading::ALL {
                let pose = Pose::new(cell, h);
                let p = map.index(cell) * 8 + h.index();
                let list: Vec<u32> = visible_cells(pose, map)
                    .into_iter()
                    .map(|c| map.index(c) as u32)
                    .collect();
                for &k in &list {
                    bits[p * words + k as usize / 64] |= 1 << (k % 64);
                }
                visible[p] = list;
            }
        }
        Self {
            num_cells,
            words,
            visible,
            bits,
        }
    }

    #[inline]
    fn pose_slot(&self, map_width: u32, pose: Pose) -> usize {
        (pose.cell.row as usize * map_width as usize + pose.cell.col as usize) * 8
            + pose.heading.index()
    }

    /// Indices of the cells visible from `pose`.
    #[inline]
    pub fn visible(&self, map: &GridMap, pose: Pose) -> &[u32] {
        &self.visible[self.pose_slot(map.width(), pose)]
    }

    #[inline]
    pub fn sees(&self, map: &GridMap, pose: Pose, cell_index: usize) -> bool {
        debug_assert!(cell_index < self.num_cells);
        let p = self.pose_slot(map.width(), pose);
        self.bits[p * self.words + cell_index / 64] >> (cell_index % 64) & 1 == 1
    }
}

/// A map bundled with its visibility table, shared by every model built on
/// the same scenario.
#[derive(Clone, Debug)]
pub struct World {
    pub map: GridMap,
    pub fov: FovTable,
}

impl World {
    pub fn new(map: GridMap) -> Self {
        let fov = FovTable::new(&map);
        Self { map, fov }
    }

    #[inline]
    pub fn visible(&self, pose: Pose) -> &[u32] {
        self.fov.visible(&self.map, pose)
    }

    #[inline]
    pub fn sees(&self, pose: Pose, cell_index: usize) -> bool {
        self.fov.sees(&self.map, pose, cell_index)
    }

    pub fn success(&self, pose: Pose, target: Cell, success_distance: f64) -> bool {
        self.map.within(pose.cell, target, success_distance)
            && self.map.in_bounds(target)
            && self.sees(pose, self.map.index(target))
    }
}
