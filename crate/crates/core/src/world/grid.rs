use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use crate::error::{Error, Result};

/// A grid cell. `y` grows downward, so `Up` decreases it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// Neighbor in the direction of a movement action; `Land` returns `self`.
    pub fn step(self, action: Action) -> Cell {
        match action.delta() {
            Some((dx, dy)) => Cell::new(self.x + dx, self.y + dy),
            None => self,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// The five-way discrete action set shared by both drones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Land = 4,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Land];
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn delta(self) -> Option<(i32, i32)> {
        match self {
            Action::Up => Some((0, -1)),
            Action::Down => Some((0, 1)),
            Action::Left => Some((-1, 0)),
            Action::Right => Some((1, 0)),
            Action::Land => None,
        }
    }

    pub fn is_move(self) -> bool {
        self != Action::Land
    }
}

/// Static obstacles plus the two dynamic hazard layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    obstacles: Vec<bool>,
    wind: Vec<bool>,
    lowsig: Vec<bool>,
}

impl GridMap {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        GridMap { width, height, obstacles: vec![false; n], wind: vec![false; n], lowsig: vec![false; n] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    /// Out-of-bounds cells count as obstacles.
    pub fn is_obstacle(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.obstacles[self.index(c)]
    }

    pub fn is_wind(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.wind[self.index(c)]
    }

    pub fn is_lowsig(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.lowsig[self.index(c)]
    }

    pub fn set_obstacle(&mut self, c: Cell) {
        let i = self.index(c);
        self.obstacles[i] = true;
        self.wind[i] = false;
        self.lowsig[i] = false;
    }

    /// Marks a wind cell; obstacle cells are left untouched.
    pub fn mark_wind(&mut self, c: Cell) {
        if !self.is_obstacle(c) {
            let i = self.index(c);
            self.wind[i] = true;
        }
    }

    pub fn mark_lowsig(&mut self, c: Cell) {
        if !self.is_obstacle(c) {
            let i = self.index(c);
            self.lowsig[i] = true;
        }
    }

    pub fn clear_hazards(&mut self) {
        self.wind.fill(false);
        self.lowsig.fill(false);
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacles.iter().filter(|&&o| o).count()
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.collect_cells(&self.obstacles)
    }

    pub fn wind_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.collect_cells(&self.wind)
    }

    pub fn lowsig_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.collect_cells(&self.lowsig)
    }

    fn collect_cells<'a>(&'a self, layer: &'a [bool]) -> impl Iterator<Item = Cell> + 'a {
        layer.iter().enumerate().filter(|(_, &on)| on).map(move |(i, _)| self.cell_at(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.obstacles.iter().enumerate().filter(|(_, &o)| !o).map(move |(i, _)| self.cell_at(i))
    }
}

/// Shortest 4-connected obstacle-avoiding path, inclusive of both endpoints.
///
/// Returns `Ok(None)` when the goal is unreachable.
pub fn astar_path(grid: &GridMap, start: Cell, goal: Cell) -> Result<Option<Vec<Cell>>> {
    astar_path_avoiding(grid, start, goal, |_| false)
}

/// Like [`astar_path`] with extra impassable cells (other than `start` and `goal`).
pub fn astar_path_avoiding(
    grid: &GridMap,
    start: Cell,
    goal: Cell,
    blocked: impl Fn(Cell) -> bool,
) -> Result<Option<Vec<Cell>>> {
    for (name, c) in [("start", start), ("goal", goal)] {
        if grid.is_obstacle(c) {
            return Err(Error::Argument(format!("{name} cell ({c}) is an obstacle or out of bounds")));
        }
    }
    if start == goal {
        return Ok(Some(vec![start]));
    }

    let n = grid.cell_count();
    let mut g = vec![u32::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    // (f, insertion order, cell index); the counter makes expansion FIFO among equal f.
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let s = grid.index(start);
    let t = grid.index(goal);
    g[s] = 0;
    open.push(Reverse((start.manhattan(goal), seq, s)));

    while let Some(Reverse((_, _, cur))) = open.pop() {
        if closed[cur] {
            continue;
        }
        if cur == t {
            let mut path = vec![goal];
            let mut i = cur;
            while i != s {
                i = parent[i];
                path.push(grid.cell_at(i));
            }
            path.reverse();
            return Ok(Some(path));
        }
        closed[cur] = true;
        let here = grid.cell_at(cur);
        for action in Action::MOVES {
            let next = here.step(action);
            if grid.is_obstacle(next) || (next != goal && blocked(next)) {
                continue;
            }
            let ni = grid.index(next);
            let cand = g[cur] + 1;
            if !closed[ni] && cand < g[ni] {
                g[ni] = cand;
                parent[ni] = cur;
                seq += 1;
                open.push(Reverse((cand + next.manhattan(goal), seq, ni)));
            }
        }
    }
    Ok(None)
}
