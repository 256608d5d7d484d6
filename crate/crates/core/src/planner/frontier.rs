use crate::geometry::Point3;
use crate::gridmap::{CellLabel, LabelMap};

/// A connected cluster of frontier cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    /// Cell indices in ascending order.
    pub cells: Vec<usize>,
    pub centroid: Point3,
}

impl Frontier {
    /// The member cell closest to the centroid; ties go to the lower index.
    pub fn goal_cell(&self, labels: &LabelMap) -> usize {
        let mut best = (f64::INFINITY, self.cells[0]);
        for &c in &self.cells {
            let p = labels.geometry.cell_center(c);
            let d = (0..2)
                .map(|a| (p[a] - self.centroid[a]).powi(2))
                .sum::<f64>();
            if d < best.0 {
                best = (d, c);
            }
        }
        best.1
    }
}

fn is_frontier(labels: &LabelMap, cell: usize) -> bool {
    labels.get(cell).is_free()
        && labels
            .geometry
            .neighbors8(cell)
            .any(|n| labels.get(n) == CellLabel::Unknown)
}

/// Free cells with at least one unknown 8-neighbour, clustered into
/// 8-connected components. Clusters smaller than `min_size` are dropped.
/// Clusters are ordered by their lowest cell index.
pub fn find_frontiers(labels: &LabelMap, min_size: usize) -> Vec<Frontier> {
    let n = labels.labels.len();
    let frontier: Vec<bool> = (0..n).map(|c| is_frontier(labels, c)).collect();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for seed in 0..n {
        if !frontier[seed] || seen[seed] {
            continue;
        }
        seen[seed] = true;
        let mut stack = vec![seed];
        let mut cells = Vec::new();
        while let Some(c) = stack.pop() {
            cells.push(c);
            for nb in labels.geometry.neighbors8(c) {
                if frontier[nb] && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        if cells.len() < min_size.max(1) {
            continue;
        }
        cells.sort_unstable();
        let mut centroid = [0.0; 3];
        for &c in &cells {
            let p = labels.geometry.cell_center(c);
            (0..3).for_each(|a| centroid[a] += p[a]);
        }
        centroid.iter_mut().for_each(|x| *x /= cells.len() as f64);
        out.push(Frontier { cells, centroid });
    }
    out
}
