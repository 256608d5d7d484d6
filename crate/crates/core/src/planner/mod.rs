//! Frontier-based exploration planning scored by information per cost.
//!
//! Each frontier cluster yields one candidate: an A* path from the robot to
//! the frontier cell nearest the cluster centroid. A strategy assigns the
//! path a utility and the candidate with the best utility / cost wins.

mod astar;
mod frontier;
mod strategy;

pub use astar::astar;
pub use frontier::{find_frontiers, Frontier};
pub use strategy::{
    binary_sensor, collapse_to_binary, BinaryMi, BinaryView, NearestFrontier, SemanticMi, Strategy,
    StrategyRegistry,
};

use std::collections::HashSet;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridmap::{argmax_class, BeliefMap, CellLabel, LabelMap};
use crate::sensor::{SensorParams, SensorPose};

/// Terminal cost added to every path, in meters.
pub const TERMINAL_COST: f64 = 0.1;

/// Planar robot pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`.
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn sensor_pose(&self, height: f64) -> SensorPose {
        SensorPose::new([self.x, self.y, height], self.theta)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Motion between consecutive poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePlan {
    /// Index of the frontier this plan leads to.
    pub frontier: usize,
    pub goal_cell: usize,
    pub poses: Vec<Pose2>,
    pub controls: Vec<Control>,
    pub mi: f64,
    pub cost: f64,
    pub score: f64,
}

impl CandidatePlan {
    pub fn length(&self) -> f64 {
        self.cost - TERMINAL_COST
    }
}

/// Plans a path from `start` to `goal_cell` over free cells. Poses sit at
/// cell centres (the first is `start` itself) and face along each step.
/// The cost is the path length plus [`TERMINAL_COST`]; utilities are left
/// at zero.
pub fn plan_path(start: Pose2, goal_cell: usize, labels: &LabelMap) -> Result<CandidatePlan> {
    let g = &labels.geometry;
    let start_cell = g
        .cell_of([start.x, start.y, g.planar_height()])
        .map(|c| g.index(c))
        .ok_or(Error::OutOfBounds {
            point: [start.x, start.y, 0.0],
        })?;
    let cells = astar(labels, start_cell, goal_cell)?;
    let mut poses = vec![start];
    let mut controls = Vec::new();
    let mut length = 0.0;
    for &c in &cells[1..] {
        let prev = *poses.last().expect("non-empty");
        let p = g.cell_center(c);
        let (dx, dy) = (p[0] - prev.x, p[1] - prev.y);
        let next = Pose2::new(p[0], p[1], dy.atan2(dx));
        length += dx.hypot(dy);
        controls.push(Control {
            dx,
            dy,
            dtheta: wrap_angle(next.theta - prev.theta),
        });
        poses.push(next);
    }
    Ok(CandidatePlan {
        frontier: 0,
        goal_cell,
        poses,
        controls,
        mi: 0.0,
        cost: length + TERMINAL_COST,
        score: 0.0,
    })
}

/// Per-cell argmax labels of any belief map; cells equal to the prior are
/// unknown.
pub fn most_likely_labels(map: &dyn BeliefMap) -> LabelMap {
    let geometry = *map.geometry();
    let prior = map.prior();
    let labels = (0..geometry.num_cells())
        .map(|c| {
            let h = map.log_odds(c);
            if h == *prior {
                CellLabel::Unknown
            } else {
                CellLabel::Class(argmax_class(&h))
            }
        })
        .collect();
    LabelMap { geometry, labels }
}

#[derive(Debug, Clone, Default)]
pub struct PlannerConfig {
    /// Frontier clusters with fewer cells are ignored.
    pub min_frontier_size: usize,
    /// Goal cells that must not be selected again (already visited).
    pub visited_goals: HashSet<usize>,
}

/// All evaluated candidates, in frontier order, and the chosen one.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub candidates: Vec<CandidatePlan>,
    pub chosen: usize,
}

impl Selection {
    pub fn best(&self) -> &CandidatePlan {
        &self.candidates[self.chosen]
    }
}

/// Poses whose scans a plan is credited with: every pose after the start,
/// or the start alone when the robot is already at the goal.
fn scan_poses(plan: &CandidatePlan, height: f64) -> Vec<SensorPose> {
    let from = usize::from(plan.poses.len() > 1);
    plan.poses[from..]
        .iter()
        .map(|p| p.sensor_pose(height))
        .collect()
}

/// Scores one candidate per reachable frontier and returns the best by
/// utility / cost; ties go to the lowest frontier index. Fails with
/// [`Error::Exhausted`] when no frontier is left to visit.
pub fn select_plan(
    map: &dyn BeliefMap,
    start: Pose2,
    sensor: &SensorParams,
    strategy: &dyn Strategy,
    config: &PlannerConfig,
) -> Result<Selection> {
    let geometry = map.geometry();
    if !geometry.is_planar() {
        return Err(Error::InvalidParameter {
            name: "map",
            reason: "planning requires a planar map".into(),
        });
    }
    let labels = most_likely_labels(map);
    let frontiers = find_frontiers(&labels, config.min_frontier_size);
    let height = geometry.planar_height();
    let scored: Vec<Option<CandidatePlan>> = frontiers
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let goal = f.goal_cell(&labels);
            if config.visited_goals.contains(&goal) {
                return Ok(None);
            }
            let mut plan = match plan_path(start, goal, &labels) {
                Ok(p) => p,
                Err(Error::NoPath) => return Ok(None),
                Err(e) => return Err(e),
            };
            plan.frontier = i;
            plan.mi = strategy.utility(map, sensor, &scan_poses(&plan, height))?;
            plan.score = plan.mi / plan.cost;
            Ok(Some(plan))
        })
        .collect::<Result<_>>()?;
    let candidates: Vec<CandidatePlan> = scored.into_iter().flatten().collect();
    let mut chosen: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if chosen.is_none_or(|b| c.score > candidates[b].score) {
            chosen = Some(i);
        }
    }
    let chosen = chosen.ok_or(Error::Exhausted)?;
    Ok(Selection { candidates, chosen })
}
