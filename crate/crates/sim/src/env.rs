//! Ground-truth worlds: planar multi-class mazes, their binary variants, an
//! analytic 3-D box-world and CSV-loaded class grids.

use std::path::Path;

use semap_core::octree::{NodeState, OctreeParams, SemanticOctree};
use semap_core::{GridGeometry, Point3};

use crate::config::{ConfigError, EnvironmentConfig};

/// Ground-truth class grid. Class 0 is free space.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub name: String,
    pub geometry: GridGeometry,
    pub truth: Vec<u8>,
    pub num_classes: usize,
}

impl Environment {
    pub fn new(
        name: impl Into<String>,
        geometry: GridGeometry,
        truth: Vec<u8>,
        num_classes: usize,
    ) -> Self {
        assert_eq!(truth.len(), geometry.num_cells());
        assert!(truth.iter().all(|&c| (c as usize) <= num_classes));
        Self {
            name: name.into(),
            geometry,
            truth,
            num_classes,
        }
    }

    pub fn class_of(&self, cell: usize) -> usize {
        self.truth[cell] as usize
    }

    pub fn class_at(&self, p: Point3) -> Option<usize> {
        self.geometry
            .cell_of(p)
            .map(|c| self.class_of(self.geometry.index(c)))
    }

    pub fn free_cells(&self) -> Vec<usize> {
        (0..self.truth.len())
            .filter(|&c| self.truth[c] == 0)
            .collect()
    }

    /// Same layout with every object class merged into class 1.
    pub fn binary(&self) -> Self {
        Self {
            name: format!("{}_binary", self.name),
            geometry: self.geometry,
            truth: self.truth.iter().map(|&c| u8::from(c > 0)).collect(),
            num_classes: 1,
        }
    }

    /// Parses a planar ASCII map, first line at the top. `.` is free, `#`
    /// class 1 and `a`, `b`, `c`, ... classes 2, 3, 4, ...
    pub fn from_ascii(name: &str, rows: &[&str], resolution: f64, num_classes: usize) -> Self {
        let ny = rows.len();
        let nx = rows[0].len();
        let geometry = GridGeometry::planar(nx, ny, resolution).expect("valid maze geometry");
        let mut truth = vec![0u8; nx * ny];
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), nx, "ragged maze row {r}");
            for (x, ch) in row.bytes().enumerate() {
                truth[geometry.index([x, ny - 1 - r, 0])] = match ch {
                    b'.' => 0,
                    b'#' => 1,
                    c @ b'a'..=b'z' => c - b'a' + 2,
                    other => panic!("unexpected maze character {:?}", other as char),
                };
            }
        }
        Self::new(name, geometry, truth, num_classes)
    }

    /// Parses a CSV grid of class ids, first row at the top.
    pub fn from_csv(
        name: &str,
        text: &str,
        resolution: f64,
        num_classes: Option<usize>,
    ) -> Result<Self, ConfigError> {
        let rows: Vec<Vec<u8>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(r, line)| {
                line.split(',')
                    .map(|v| {
                        v.trim().parse::<u8>().map_err(|e| {
                            ConfigError::invalid("environment.file", format!("row {r}: {e}"))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let ny = rows.len();
        let nx = rows.first().map_or(0, Vec::len);
        if ny == 0 || nx == 0 || rows.iter().any(|r| r.len() != nx) {
            return Err(ConfigError::invalid(
                "environment.file",
                "grid must be a non-empty rectangle",
            ));
        }
        let max = rows.iter().flatten().copied().max().unwrap_or(0) as usize;
        let k = num_classes.unwrap_or(max.max(1));
        if max > k || k == 0 {
            return Err(ConfigError::invalid(
                "environment.num_classes",
                format!("grid uses class {max}, more than {k}"),
            ));
        }
        let geometry = GridGeometry::planar(nx, ny, resolution)
            .map_err(|e| ConfigError::invalid("environment.resolution", e.to_string()))?;
        let mut truth = vec![0u8; nx * ny];
        for (r, row) in rows.iter().enumerate() {
            for (x, &c) in row.iter().enumerate() {
                truth[geometry.index([x, ny - 1 - r, 0])] = c;
            }
        }
        let env = Self::new(name, geometry, truth, k);
        if !env.border_is_closed() {
            return Err(ConfigError::invalid(
                "environment.file",
                "border cells must be occupied",
            ));
        }
        Ok(env)
    }

    pub fn border_is_closed(&self) -> bool {
        let [nx, ny, nz] = self.geometry.shape();
        (0..self.truth.len()).all(|i| {
            let [x, y, z] = self.geometry.coords(i);
            let border = x == 0
                || y == 0
                || x == nx - 1
                || y == ny - 1
                || (nz > 1 && (z == 0 || z == nz - 1));
            !border || self.truth[i] != 0
        })
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "maze_a" => Some(Self::from_ascii("maze_a", MAZE_A, MAZE_RESOLUTION, 4)),
            "maze_b" => Some(Self::from_ascii("maze_b", MAZE_B, MAZE_RESOLUTION, 4)),
            "maze_a_binary" => Self::builtin("maze_a").map(|e| e.binary()),
            "maze_b_binary" => Self::builtin("maze_b").map(|e| e.binary()),
            "boxworld" => Some(BoxWorld::standard().rasterize(0.2)),
            _ => None,
        }
    }

    pub fn from_config(c: &EnvironmentConfig) -> Result<Self, ConfigError> {
        match (&c.builtin, &c.file) {
            (Some(name), None) => Self::builtin(name).ok_or_else(|| {
                ConfigError::invalid(
                    "environment.builtin",
                    format!("unknown environment {name:?}"),
                )
            }),
            (None, Some(path)) => {
                let resolution = c.resolution.ok_or_else(|| {
                    ConfigError::invalid("environment.resolution", "required with `file`")
                })?;
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                let name = Path::new(path)
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("file");
                Self::from_csv(name, &text, resolution, c.num_classes)
            }
            _ => Err(ConfigError::invalid(
                "environment",
                "set exactly one of `builtin` or `file`",
            )),
        }
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "maze_a",
    "maze_b",
    "maze_a_binary",
    "maze_b_binary",
    "boxworld",
];

pub const MAZE_RESOLUTION: f64 = 0.25;

const MAZE_A: &[&str] = &[
    "########################################",
    "#..........#...........#...............#",
    "#..........#...........#.......bbb.....#",
    "#...aa.....#...........#.......bbb.....#",
    "#...aa.....#....cc.....#...............#",
    "#..........#....cc.....................#",
    "#......................#...............#",
    "#..........#...........#####....########",
    "#..........#...........#...............#",
    "#####..#####...........#...............#",
    "#..........#######..####.....aaa.......#",
    "#..........#...........#.....aaa.......#",
    "#...bb.....#...........#...............#",
    "#...bb.................#...............#",
    "#..........#...........#..........cc...#",
    "#..........#.....aa....#..........cc...#",
    "#..........#.....aa....#...............#",
    "#######..###...........######...########",
    "#..............#.......................#",
    "#..............#.......................#",
    "#....ccc.......#.......bb..............#",
    "#....ccc.......#.......bb.......aa.....#",
    "#..............#................aa.....#",
    "#......................................#",
    "#..............#.......................#",
    "#..............#########.....###########",
    "#..............#.......................#",
    "#....aa........#.......cc..............#",
    "#..............................bb......#",
    "########################################",
];

const MAZE_B: &[&str] = &[
    "########################################",
    "#.................#....................#",
    "#..cc.............#......aaaa..........#",
    "#..cc.............#......aaaa..........#",
    "#.................#....................#",
    "#.........bbb..........................#",
    "#.........bbb.....#.............cc.....#",
    "#.................#.............cc.....#",
    "########....#######....................#",
    "#.................##########....########",
    "#.................#....................#",
    "#...aaa...........#....................#",
    "#...aaa...........#.......bb...........#",
    "#.................#.......bb.......c...#",
    "#......................................#",
    "#.................#................c...#",
    "#.........cc......#....................#",
    "#.........cc......######....############",
    "#.................#....................#",
    "#####....##########....................#",
    "#.................#.....aa.............#",
    "#.................#.....aa.......bbb...#",
    "#..bb..................................#",
    "#..bb.............#....................#",
    "#.................#.........cc.........#",
    "#.......aa........#.........cc.........#",
    "#.......aa........#....................#",
    "#.................#....................#",
    "#.................#....................#",
    "########################################",
];

/// Axis-aligned class boxes inside a closed cube; analytic ground truth for
/// resolution studies.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxWorld {
    pub size: f64,
    pub wall: f64,
    /// `(lo, hi, class)`
    pub boxes: Vec<(Point3, Point3, u8)>,
    pub num_classes: usize,
}

impl BoxWorld {
    /// 12.8 m cube with 0.4 m walls (class 1) and box corners on a 0.4 m
    /// lattice, so every resolution `0.4 / 2^n` aligns with all faces.
    pub fn standard() -> Self {
        let b = |lo: [f64; 3], hi: [f64; 3], c: u8| (lo, hi, c);
        Self {
            size: 12.8,
            wall: 0.4,
            boxes: vec![
                b([2.0, 2.0, 0.4], [3.6, 4.4, 2.8], 2),
                b([7.2, 1.6, 0.4], [9.2, 2.8, 1.6], 3),
                b([4.8, 7.6, 0.4], [6.0, 10.0, 4.0], 2),
                b([9.6, 8.0, 0.4], [11.2, 11.2, 2.0], 3),
                b([1.6, 9.2, 0.4], [2.8, 10.4, 6.4], 1),
                b([6.0, 4.8, 6.0], [8.4, 6.0, 7.2], 3),
            ],
            num_classes: 3,
        }
    }

    fn inside(p: &Point3, lo: &Point3, hi: &Point3) -> bool {
        (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a])
    }

    pub fn class_at(&self, p: Point3) -> u8 {
        if (0..3).any(|a| p[a] < self.wall || p[a] >= self.size - self.wall) {
            return 1;
        }
        self.boxes
            .iter()
            .find(|(lo, hi, _)| Self::inside(&p, lo, hi))
            .map_or(0, |b| b.2)
    }

    /// Class shared by the whole cube `[lo, lo + size)`, if uniform.
    pub fn uniform_class(&self, lo: Point3, size: f64) -> Option<u8> {
        let hi = [lo[0] + size, lo[1] + size, lo[2] + size];
        let overlaps =
            |blo: &Point3, bhi: &Point3| (0..3).all(|a| lo[a] < bhi[a] && blo[a] < hi[a]);
        let contains =
            |blo: &Point3, bhi: &Point3| (0..3).all(|a| blo[a] <= lo[a] && hi[a] <= bhi[a]);
        let inner_lo = [self.wall; 3];
        let inner_hi = [self.size - self.wall; 3];
        if !contains(&inner_lo, &inner_hi) {
            // entirely inside the wall shell
            return (!overlaps(&inner_lo, &inner_hi)).then_some(1);
        }
        let mut hits = self.boxes.iter().filter(|(blo, bhi, _)| overlaps(blo, bhi));
        match (hits.next(), hits.next()) {
            (None, _) => Some(0),
            (Some((blo, bhi, c)), None) if contains(blo, bhi) => Some(*c),
            _ => None,
        }
    }

    pub fn rasterize(&self, resolution: f64) -> Environment {
        let n = (self.size / resolution).round() as usize;
        let geometry = GridGeometry::new([n; 3], resolution).expect("valid box-world geometry");
        let truth = (0..geometry.num_cells())
            .map(|i| self.class_at(geometry.cell_center(i)))
            .collect();
        Environment::new("boxworld", geometry, truth, self.num_classes)
    }

    /// Octree depth whose leaves have edge `resolution`.
    pub fn depth_for(&self, resolution: f64) -> u8 {
        (self.size / resolution).log2().round() as u8
    }

    /// A fully mapped, pruned octree: free space and boxes saturated at the
    /// clamping thresholds.
    pub fn octree(&self, resolution: f64, base: OctreeParams) -> SemanticOctree {
        let params = OctreeParams {
            resolution,
            max_depth: self.depth_for(resolution),
            ..base
        };
        let k = self.num_classes;
        let free = saturated(0, k, &params);
        let states: Vec<NodeState> = (1..=k).map(|c| saturated(c, k, &params)).collect();
        let state = |c: u8| if c == 0 { free } else { states[c as usize - 1] };
        SemanticOctree::from_classifier(params, k, |lo, size| {
            if size <= resolution * 1.000001 {
                let centre = [lo[0] + size / 2.0, lo[1] + size / 2.0, lo[2] + size / 2.0];
                return Some(state(self.class_at(centre)));
            }
            self.uniform_class(lo, size).map(state)
        })
        .expect("box-world classifier covers every leaf")
    }
}

/// Node state at the clamping limits: class `c` at `max_thresh` and the
/// rest at `min_thresh`, or everything at `min_thresh` for free space.
pub fn saturated(c: usize, k: usize, params: &OctreeParams) -> NodeState {
    let mut slots: Vec<(u16, f64)> = Vec::new();
    if c > 0 {
        slots.push((c as u16, params.max_thresh));
    }
    for other in (1..=k).filter(|&o| o != c) {
        if slots.len() == 3 {
            break;
        }
        slots.push((other as u16, params.min_thresh));
    }
    NodeState::from_parts(&slots, params.min_thresh, params).expect("valid saturated state")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_closed_and_consistent() {
        for name in BUILTIN_NAMES {
            let e = Environment::builtin(name).unwrap();
            assert!(e.border_is_closed(), "{name}");
            assert!(e.truth.iter().all(|&c| c as usize <= e.num_classes));
        }
        let m = Environment::builtin("maze_a").unwrap();
        assert_eq!(m.geometry.shape(), [40, 30, 1]);
        for k in 1..=4u8 {
            assert!(m.truth.contains(&k), "class {k} missing");
        }
        let b = Environment::builtin("maze_a_binary").unwrap();
        assert_eq!(b.num_classes, 1);
        assert_eq!(b.free_cells(), m.free_cells());
    }

    #[test]
    fn maze_free_space_is_connected() {
        for name in ["maze_a", "maze_b"] {
            let e = Environment::builtin(name).unwrap();
            let free = e.free_cells();
            let mut seen = vec![false; e.truth.len()];
            let mut stack = vec![free[0]];
            seen[free[0]] = true;
            let mut count = 0;
            while let Some(c) = stack.pop() {
                count += 1;
                let [x, y, _] = e.geometry.coords(c);
                for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                    let n =
                        e.geometry
                            .index([(x as i64 + dx) as usize, (y as i64 + dy) as usize, 0]);
                    if e.truth[n] == 0 && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
            assert_eq!(count, free.len(), "{name}");
        }
    }

    #[test]
    fn csv_loading() {
        let e = Environment::from_csv("t", "1,1,1\n1,0,1\n1,2,1\n", 0.5, None).unwrap();
        assert_eq!(e.num_classes, 2);
        assert_eq!(e.class_at([0.75, 0.25, 0.25]), Some(2));
        assert_eq!(e.class_at([0.75, 0.75, 0.25]), Some(0));
        assert!(Environment::from_csv("t", "1,1\n1,0\n", 0.5, None).is_err());
        assert!(Environment::from_csv("t", "1,1,1\n1,0\n", 0.5, None).is_err());
    }

    #[test]
    fn box_octree_matches_point_classes() {
        let w = BoxWorld::standard();
        let params = OctreeParams::default();
        let t = w.octree(0.4, params);
        let g = *t.leaf_geometry();
        for i in (0..g.num_cells()).step_by(97) {
            let p = g.cell_center(i);
            let (s, _) = t.query(p, None).unwrap();
            let c = w.class_at(p) as usize;
            assert_eq!(s, saturated(c, 3, t.params()), "at {p:?}");
        }
        // faces lie on the 0.4 m lattice, so finer leaves never survive pruning
        let fine = w.octree(0.1, params);
        assert_eq!(
            fine.stats().leaf_count,
            w.octree(0.2, params).stats().leaf_count
        );
        assert!(fine.stats().leaf_count < fine.leaf_geometry().num_cells() / 100);
    }
}
