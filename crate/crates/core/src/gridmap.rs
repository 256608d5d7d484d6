//! Dense multi-class occupancy grid with additive log-odds Bayes updates.
//!
//! This map is the exact reference: unless a clamp is configured explicitly
//! the stored log ratios are never saturated.

use std::io::{self, Write};

use crate::error::Result;
use crate::geometry::GridGeometry;
use crate::logodds::{entropy, softmax, Categorical, LogOdds};
use crate::sensor::{beam_trace, inverse_log_odds, CellObservation, Measurement, SensorParams};

/// Read access to per-cell beliefs, shared by the dense grid, the octree
/// and derived views.
pub trait BeliefMap: Sync {
    fn geometry(&self) -> &GridGeometry;
    fn prior(&self) -> &LogOdds;
    fn log_odds(&self, cell: usize) -> LogOdds;

    fn num_classes(&self) -> usize {
        self.prior().num_classes()
    }

    fn categorical(&self, cell: usize) -> Categorical {
        softmax(&self.log_odds(cell))
    }
}

/// One Bayes step: `h + (l - prior)`.
pub fn update_cell(h: &LogOdds, l: &LogOdds, prior: &LogOdds) -> LogOdds {
    h + &(l - prior)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassGrid {
    geometry: GridGeometry,
    prior: LogOdds,
    cells: Vec<LogOdds>,
    clamp: Option<(f64, f64)>,
}

impl MultiClassGrid {
    pub fn new(geometry: GridGeometry, prior: LogOdds) -> Self {
        let cells = vec![prior.clone(); geometry.num_cells()];
        Self {
            geometry,
            prior,
            cells,
            clamp: None,
        }
    }

    /// Saturates object-class log ratios into `[min, max]` after each update.
    /// Only used to mirror the octree; the default map is unclamped.
    pub fn with_clamp(mut self, min: f64, max: f64) -> Self {
        self.clamp = Some((min, max));
        self
    }

    pub fn cells(&self) -> &[LogOdds] {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> &LogOdds {
        &self.cells[index]
    }

    pub fn set_cell(&mut self, index: usize, h: LogOdds) {
        assert_eq!(h.len(), self.prior.len());
        self.cells[index] = h;
    }

    pub fn apply(&mut self, index: usize, l: &LogOdds) {
        let mut h = update_cell(&self.cells[index], l, &self.prior);
        if let Some((min, max)) = self.clamp {
            h.clamp(min, max);
        }
        self.cells[index] = h;
    }

    /// Integrates every beam of a scan, in order. Returns the touched cells
    /// in first-touch order. Nothing is modified if any beam is invalid.
    pub fn integrate_scan(
        &mut self,
        scan: &[Measurement],
        params: &SensorParams,
    ) -> Result<Vec<usize>> {
        let traces = scan
            .iter()
            .map(|m| beam_trace(&self.geometry, params, m).map(|t| (m.label, t)))
            .collect::<Result<Vec<_>>>()?;
        let free = inverse_log_odds(CellObservation::Free, params, &self.prior)?;
        let mut touched = Vec::new();
        let mut seen = vec![false; self.cells.len()];
        for (label, trace) in traces {
            let hit = match trace.hit_index {
                Some(i) => Some((
                    i,
                    inverse_log_odds(CellObservation::Occupied(label), params, &self.prior)?,
                )),
                None => None,
            };
            for (pos, &cell) in trace.cells.iter().enumerate() {
                match &hit {
                    Some((i, occ)) if *i == pos => self.apply(cell, occ),
                    _ => self.apply(cell, &free),
                }
                if !std::mem::replace(&mut seen[cell], true) {
                    touched.push(cell);
                }
            }
        }
        Ok(touched)
    }

    pub fn map_entropy(&self) -> f64 {
        self.cells.iter().map(|h| entropy(&softmax(h))).sum()
    }

    /// Per-cell argmax class; cells still exactly at the prior are unknown.
    pub fn most_likely_map(&self) -> LabelMap {
        let labels = self
            .cells
            .iter()
            .map(|h| {
                if *h == self.prior {
                    CellLabel::Unknown
                } else {
                    CellLabel::Class(argmax_class(h))
                }
            })
            .collect();
        LabelMap {
            geometry: self.geometry,
            labels,
        }
    }

    /// Binary PGM (P5) of the most likely map using [`gray_level`].
    pub fn write_pgm<W: Write>(&self, w: W) -> io::Result<()> {
        self.most_likely_map().write_pgm(w)
    }

    /// CSV with header `cell,p0,...,pK`, one row per cell in index order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "cell")?;
        for k in 0..=self.num_classes() {
            write!(w, ",p{k}")?;
        }
        writeln!(w)?;
        for (i, h) in self.cells.iter().enumerate() {
            write!(w, "{i}")?;
            for p in softmax(h).as_slice() {
                write!(w, ",{}", format_sig9(*p))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl BeliefMap for MultiClassGrid {
    fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    fn prior(&self) -> &LogOdds {
        &self.prior
    }

    fn log_odds(&self, cell: usize) -> LogOdds {
        self.cells[cell].clone()
    }
}

/// Index of the largest log ratio; ties go to the lowest class id.
pub fn argmax_class(h: &LogOdds) -> usize {
    let mut best = 0;
    for (k, &v) in h.as_slice().iter().enumerate().skip(1) {
        if v > h.get(best) {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Unknown,
    /// Class id, `0` being free space.
    Class(usize),
}

impl CellLabel {
    pub fn is_free(self) -> bool {
        self == CellLabel::Class(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub geometry: GridGeometry,
    pub labels: Vec<CellLabel>,
}

impl LabelMap {
    pub fn get(&self, index: usize) -> CellLabel {
        self.labels[index]
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        let [nx, ny, nz] = self.geometry.shape();
        // volumetric maps are written as layers stacked along y
        writeln!(w, "P5\n{} {}\n255", nx, ny * nz)?;
        let mut row = vec![0u8; nx];
        for z in 0..nz {
            for y in (0..ny).rev() {
                for (x, px) in row.iter_mut().enumerate() {
                    *px = gray_level(self.labels[self.geometry.index([x, y, z])]);
                }
                w.write_all(&row)?;
            }
        }
        Ok(())
    }
}

/// Fixed palette: unknown 205, free 254, object classes on darker levels.
pub fn gray_level(label: CellLabel) -> u8 {
    match label {
        CellLabel::Unknown => 205,
        CellLabel::Class(0) => 254,
        CellLabel::Class(k) => (((k - 1) * 37) % 185) as u8,
    }
}

/// Scientific notation with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}
