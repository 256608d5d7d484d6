//! Regular grid geometry and exact parametric ray traversal.
//!
//! Planar maps are a single layer of cells (`shape[2] == 1`); 2-D and 3-D
//! traversal share the same code path and a planar ray simply has a zero
//! `z` direction component.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    shape: [usize; 3],
    resolution: f64,
}

impl GridGeometry {
    pub fn new(shape: [usize; 3], resolution: f64) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidParameter {
                name: "shape",
                reason: format!("all dimensions must be positive, got {shape:?}"),
            });
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: format!("must be positive, got {resolution}"),
            });
        }
        Ok(Self { shape, resolution })
    }

    pub fn planar(nx: usize, ny: usize, resolution: f64) -> Result<Self> {
        Self::new([nx, ny, 1], resolution)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn is_planar(&self) -> bool {
        self.shape[2] == 1
    }

    pub fn num_cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn extent(&self) -> Point3 {
        [
            self.shape[0] as f64 * self.resolution,
            self.shape[1] as f64 * self.resolution,
            self.shape[2] as f64 * self.resolution,
        ]
    }

    /// Height at which planar sensors sit (middle of the single layer).
    pub fn planar_height(&self) -> f64 {
        0.5 * self.resolution
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        debug_assert!(c[0] < self.shape[0] && c[1] < self.shape[1] && c[2] < self.shape[2]);
        (c[2] * self.shape[1] + c[1]) * self.shape[0] + c[0]
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.shape[0];
        let rest = index / self.shape[0];
        [x, rest % self.shape[1], rest / self.shape[1]]
    }

    pub fn contains(&self, p: Point3) -> bool {
        let e = self.extent();
        (0..3).all(|a| p[a] >= 0.0 && p[a] < e[a])
    }

    pub fn cell_of(&self, p: Point3) -> Option<[usize; 3]> {
        if !self.contains(p) {
            return None;
        }
        let mut c = [0; 3];
        for a in 0..3 {
            c[a] = ((p[a] / self.resolution).floor() as usize).min(self.shape[a] - 1);
        }
        Some(c)
    }

    pub fn cell_center(&self, index: usize) -> Point3 {
        let c = self.coords(index);
        [
            (c[0] as f64 + 0.5) * self.resolution,
            (c[1] as f64 + 0.5) * self.resolution,
            (c[2] as f64 + 0.5) * self.resolution,
        ]
    }

    /// Linear indices of the (up to 8) planar neighbours of a cell.
    pub fn neighbors8(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let [x, y, z] = self.coords(index);
        let (nx, ny) = (self.shape[0] as isize, self.shape[1] as isize);
        (-1isize..=1)
            .flat_map(|dy| (-1isize..=1).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx != 0 || dy != 0)
            .filter_map(move |(dx, dy)| {
                let (cx, cy) = (x as isize + dx, y as isize + dy);
                (cx >= 0 && cy >= 0 && cx < nx && cy < ny)
                    .then(|| self.index([cx as usize, cy as usize, z]))
            })
    }
}

/// Cells crossed by a beam, in order of increasing distance from the origin.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RayTrace {
    pub cells: Vec<usize>,
    /// Traversal length inside each cell, in meters.
    pub lengths: Vec<f64>,
    /// Position of the hit cell within `cells`, if the beam ended on an obstacle.
    pub hit_index: Option<usize>,
}

impl RayTrace {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }
}

/// Crossings closer together than this (in meters) are stepped together,
/// which skips zero-volume slivers at cell corners.
const SIMULTANEOUS_CROSSING: f64 = 1e-12;

/// Walks the grid from `origin` along `direction` for `range` meters.
///
/// Every cell the segment passes through is reported once together with the
/// exact length of the segment inside it. The walk stops early if the ray
/// leaves the map.
pub fn raycast(
    geom: &GridGeometry,
    origin: Point3,
    direction: Point3,
    range: f64,
) -> Result<RayTrace> {
    let start = geom
        .cell_of(origin)
        .ok_or(Error::OutOfBounds { point: origin })?;
    let mut trace = RayTrace::default();
    if range.is_nan() || range <= 0.0 {
        return Ok(trace);
    }
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "direction",
            reason: format!("must be a finite non-zero vector, got {direction:?}"),
        });
    }
    let d = [
        direction[0] / norm,
        direction[1] / norm,
        direction[2] / norm,
    ];
    let res = geom.resolution;
    let shape = geom.shape;

    let mut cell = [start[0] as isize, start[1] as isize, start[2] as isize];
    let step: [isize; 3] = std::array::from_fn(|a| match d[a] {
        x if x > 0.0 => 1,
        x if x < 0.0 => -1,
        _ => 0,
    });
    // parametric distance at which the ray leaves the current cell along each axis
    let boundary = |cell: &[isize; 3], a: usize| -> f64 {
        match step[a] {
            0 => f64::INFINITY,
            1 => ((cell[a] + 1) as f64 * res - origin[a]) / d[a],
            _ => (cell[a] as f64 * res - origin[a]) / d[a],
        }
    };

    let mut t = 0.0;
    loop {
        let t_cross = (0..3)
            .map(|a| boundary(&cell, a))
            .fold(f64::INFINITY, f64::min);
        let t_next = t_cross.min(range);
        let len = t_next - t;
        if len > 0.0 {
            trace
                .cells
                .push(geom.index([cell[0] as usize, cell[1] as usize, cell[2] as usize]));
            trace.lengths.push(len);
        }
        if t_next >= range {
            break;
        }
        for a in 0..3 {
            if boundary(&cell, a) <= t_next + SIMULTANEOUS_CROSSING {
                cell[a] += step[a];
            }
        }
        if (0..3).any(|a| cell[a] < 0 || cell[a] >= shape[a] as isize) {
            break;
        }
        t = t_next.max(t);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_aligned_trace() {
        let g = GridGeometry::planar(8, 8, 1.0).unwrap();
        let t = raycast(&g, [0.5, 0.5, 0.5], [1.0, 0.0, 0.0], 2.5).unwrap();
        let coords: Vec<_> = t.cells.iter().map(|&c| g.coords(c)).collect();
        assert_eq!(coords, vec![[0, 0, 0], [1, 0, 0], [2, 0, 0]]);
        assert_eq!(t.lengths, vec![0.5, 1.0, 1.0]);
    }

    #[test]
    fn zero_range_is_empty() {
        let g = GridGeometry::planar(4, 4, 1.0).unwrap();
        assert!(raycast(&g, [1.5, 1.5, 0.5], [0.0, 1.0, 0.0], 0.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn diagonal_through_corner() {
        // Parametric oracle: the segment (0,0)->(2,2) meets x = 1 and y = 1 at
        // the same parameter t = sqrt(2), so exactly two cells are crossed.
        let g = GridGeometry::planar(2, 2, 1.0).unwrap();
        let r = 2f64.sqrt() * 2.0;
        let t = raycast(&g, [0.0, 0.0, 0.5], [1.0, 1.0, 0.0], r).unwrap();
        let coords: Vec<_> = t.cells.iter().map(|&c| g.coords(c)).collect();
        assert_eq!(coords, vec![[0, 0, 0], [1, 1, 0]]);
        for l in &t.lengths {
            assert!((l - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_outside_is_an_error() {
        let g = GridGeometry::planar(4, 4, 1.0).unwrap();
        assert!(matches!(
            raycast(&g, [-0.1, 1.0, 0.5], [1.0, 0.0, 0.0], 1.0),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn negative_direction_from_boundary_skips_empty_cell() {
        let g = GridGeometry::planar(4, 1, 1.0).unwrap();
        let t = raycast(&g, [2.0, 0.5, 0.5], [-1.0, 0.0, 0.0], 1.5).unwrap();
        let xs: Vec<_> = t.cells.iter().map(|&c| g.coords(c)[0]).collect();
        assert_eq!(xs, vec![1, 0]);
        assert_eq!(t.lengths, vec![1.0, 0.5]);
    }

    #[test]
    fn stops_at_map_border() {
        let g = GridGeometry::planar(3, 1, 1.0).unwrap();
        let t = raycast(&g, [0.5, 0.5, 0.5], [1.0, 0.0, 0.0], 10.0).unwrap();
        assert_eq!(t.len(), 3);
        assert!((t.total_length() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn index_roundtrip() {
        let g = GridGeometry::new([5, 4, 3], 0.2).unwrap();
        for i in 0..g.num_cells() {
            assert_eq!(g.index(g.coords(i)), i);
        }
    }

    proptest! {
        #[test]
        fn lengths_sum_to_range_and_cells_are_adjacent(
            ox in 0.0f64..16.0, oy in 0.0f64..16.0, oz in 0.0f64..16.0,
            dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0,
            range in 0.0f64..5.0,
        ) {
            prop_assume!(dx.abs() + dy.abs() + dz.abs() > 1e-3);
            let g = GridGeometry::new([16, 16, 16], 1.0).unwrap();
            let o = [ox, oy, oz];
            let t = raycast(&g, o, [dx, dy, dz], range).unwrap();
            // the 5 m ray may leave the 16 m cube only from near its faces
            let n = (dx * dx + dy * dy + dz * dz).sqrt();
            let end: Vec<f64> = (0..3).map(|a| o[a] + [dx, dy, dz][a] / n * range).collect();
            if end.iter().all(|&e| (0.0..16.0).contains(&e)) {
                prop_assert!((t.total_length() - range).abs() < 1e-9);
            }
            prop_assert!(t.lengths.iter().all(|&l| l > 0.0));
            for w in t.cells.windows(2) {
                let (a, b) = (g.coords(w[0]), g.coords(w[1]));
                let dist: usize = (0..3).map(|k| a[k].abs_diff(b[k])).sum();
                prop_assert!((1..=3).contains(&dist));
            }
            let mut seen = std::collections::HashSet::new();
            prop_assert!(t.cells.iter().all(|c| seen.insert(*c)));
        }
    }
}
