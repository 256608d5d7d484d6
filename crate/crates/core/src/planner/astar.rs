use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gridmap::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    cell: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // min-heap on f, then on cell index for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected A* over free cells of a planar label map with a Euclidean
/// heuristic. Diagonal steps may not cut corners of non-free cells. The
/// start cell is always treated as traversable. Returns the cell sequence
/// from `start` to `goal`, both included.
pub fn astar(labels: &LabelMap, start: usize, goal: usize) -> Result<Vec<usize>> {
    let g = &labels.geometry;
    let res = g.resolution();
    let passable = |c: usize| c == start || labels.get(c).is_free();
    if !passable(goal) {
        return Err(Error::NoPath);
    }
    let center = |c: usize| g.cell_center(c);
    let dist = |a: usize, b: usize| {
        let (p, q) = (center(a), center(b));
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    };

    let n = labels.labels.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    cost[start] = 0.0;
    open.push(Open {
        f: dist(start, goal),
        cell: start,
    });
    while let Some(Open { cell, .. }) = open.pop() {
        if closed[cell] {
            continue;
        }
        if cell == goal {
            let mut path = vec![goal];
            let mut c = goal;
            while c != start {
                c = parent[c];
                path.push(c);
            }
            path.reverse();
            return Ok(path);
        }
        closed[cell] = true;
        let [x, y, z] = g.coords(cell);
        for nb in g.neighbors8(cell) {
            if closed[nb] || !passable(nb) {
                continue;
            }
            let [nx, ny, _] = g.coords(nb);
            if nx != x
                && ny != y
                && !(passable(g.index([nx, y, z])) && passable(g.index([x, ny, z])))
            {
                continue;
            }
            let step = if nx != x && ny != y {
                res * std::f64::consts::SQRT_2
            } else {
                res
            };
            let c = cost[cell] + step;
            if c < cost[nb] {
                cost[nb] = c;
                parent[nb] = cell;
                open.push(Open {
                    f: c + dist(nb, goal),
                    cell: nb,
                });
            }
        }
    }
    Err(Error::NoPath)
}
