//! A* over poses with unit cost per primitive move (rotations included).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::grid::{apply_move, Cell, GridMap, Heading, MoveAction, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Navigation {
    Arrived,
    Move(MoveAction),
    Unreachable,
}

fn slot(map: &GridMap, p: Pose) -> usize {
    map.index(p.cell) * 8 + p.heading.index()
}

// Chebyshev distance: a diagonal `MoveAhead` covers one row and one column.
fn heuristic(from: Cell, goal: Cell) -> u32 {
    (from.col - goal.col).unsigned_abs().max((from.row - goal.row).unsigned_abs())
}

/// Minimal-cost primitive sequence from `pose` to any pose on `goal`.
pub fn astar_path(goal: Cell, pose: Pose, map: &GridMap) -> Option<Vec<MoveAction>> {
    if !map.is_free(goal) || !map.is_free(pose.cell) {
        return None;
    }
    if pose.cell == goal {
        return Some(Vec::new());
    }
    let n = map.num_cells() * 8;
    let mut g = vec![u32::MAX; n];
    let mut parent: Vec<Option<(usize, MoveAction)>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut tie = 0u64;
    let start = slot(map, pose);
    g[start] = 0;
    heap.push(Reverse((heuristic(pose.cell, goal), 0u32, tie, pose.cell.col, pose.cell.row, pose.heading.index())));
    while let Some(Reverse((_, cost, _, col, row, h))) = heap.pop() {
        let p = Pose::new(Cell::new(col, row), Heading::from_index(h));
        let s = slot(map, p);
        if closed[s] {
            continue;
        }
        closed[s] = true;
        if p.cell == goal {
            let mut actions = Vec::new();
            let mut cur = s;
            while let Some((prev, a)) = parent[cur] {
                actions.push(a);
                cur = prev;
            }
            actions.reverse();
            return Some(actions);
        }
        for a in MoveAction::ALL {
            let q = apply_move(p, a, map);
            if q == p {
                continue;
            }
            let t = slot(map, q);
            let c = cost + 1;
            if c < g[t] {
                g[t] = c;
                parent[t] = Some((s, a));
                tie += 1;
                heap.push(Reverse((c + heuristic(q.cell, goal), c, tie, q.cell.col, q.cell.row, q.heading.index())));
            }
        }
    }
    None
}

/// First primitive of a minimal-cost route to `goal`, replanned from scratch.
pub fn astar_action(goal: Cell, pose: Pose, map: &GridMap) -> Navigation {
    match astar_path(goal, pose, map) {
        None => Navigation::Unreachable,
        Some(path) => path.first().map_or(Navigation::Arrived, |&a| Navigation::Move(a)),
    }
}
