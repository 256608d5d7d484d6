//! The trajectory bound against exhaustive enumeration of every joint beam
//! outcome, on maps small enough to enumerate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semap_core::mutinfo::trajectory_traces;
use semap_core::{
    trajectory_mi, BeliefMap, GridGeometry, InformationModel, LogOdds, MultiClassGrid, RayTrace,
    SensorParams, SensorPose,
};

fn probs(h: &[f64]) -> Vec<f64> {
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = h.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn bayes(p: &[f64], inverse: &[f64], prior: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = (0..p.len()).map(|c| p[c] * inverse[c] / prior[c]).collect();
    let s: f64 = u.iter().sum();
    u.iter().map(|x| x / s).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

struct Enumeration<'a> {
    traces: &'a [RayTrace],
    occupied: Vec<Vec<f64>>,
    free: Vec<f64>,
    prior: Vec<f64>,
    start: &'a [Vec<f64>],
}

impl Enumeration<'_> {
    /// Expected KL between the map after every remaining beam and the
    /// starting map, weighting each outcome sequence by its probability.
    fn expected_gain(&self, map: &mut Vec<Vec<f64>>, beam: usize) -> f64 {
        let Some(trace) = self.traces.get(beam) else {
            return map.iter().zip(self.start).map(|(p, q)| kl(p, q)).sum();
        };
        let mut total = 0.0;
        let mut all_free = 1.0;
        for (n, &cell) in trace.cells.iter().enumerate() {
            for (y, inv) in self.occupied.iter().enumerate() {
                let prob = all_free * map[cell][y + 1];
                if prob == 0.0 {
                    continue;
                }
                let saved = map.clone();
                for &c in &trace.cells[..n] {
                    map[c] = bayes(&map[c], &self.free, &self.prior);
                }
                map[cell] = bayes(&map[cell], inv, &self.prior);
                total += prob * self.expected_gain(map, beam + 1);
                *map = saved;
            }
            all_free *= map[cell][0];
        }
        if all_free > 0.0 {
            let saved = map.clone();
            for &c in &trace.cells {
                map[c] = bayes(&map[c], &self.free, &self.prior);
            }
            total += all_free * self.expected_gain(map, beam + 1);
            *map = saved;
        }
        total
    }
}

#[test]
fn filtered_bound_never_exceeds_joint_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut overlapping = 0;
    for case in 0..200 {
        let k = rng.random_range(1..=2);
        let geom = GridGeometry::planar(4, 4, 1.0).unwrap();
        let lo = |v: Vec<f64>| LogOdds::new(v).unwrap();
        let vec_k = |rng: &mut ChaCha8Rng, lo_: f64, hi: f64| -> Vec<f64> {
            std::iter::once(0.0)
                .chain((0..k).map(|_| rng.random_range(lo_..hi)))
                .collect()
        };
        let phi = lo(vec_k(&mut rng, -0.3, 0.3));
        let psi = lo(vec_k(&mut rng, 0.5, 2.0));
        let minus = lo(vec_k(&mut rng, -1.5, -0.2));
        let r_max = rng.random_range(1.0..2.5);
        let rays = SensorParams::planar_fan(rng.random_range(1..=2), std::f64::consts::TAU);
        let sensor = SensorParams::new(phi, psi, minus, r_max, rays).unwrap();
        let mut grid = MultiClassGrid::new(geom, LogOdds::zeros(k));
        for cell in 0..geom.num_cells() {
            grid.set_cell(cell, lo(vec_k(&mut rng, -2.0, 2.0)));
        }
        let poses: Vec<SensorPose> = (0..rng.random_range(1..=2))
            .map(|_| {
                SensorPose::new(
                    [rng.random_range(0.2..3.8), rng.random_range(0.2..3.8), 0.5],
                    rng.random_range(-3.0..3.0),
                )
            })
            .collect();
        let model = InformationModel::new(&sensor, grid.prior()).unwrap();
        let bound = trajectory_mi(&poses, &sensor, &grid, &model).unwrap();

        let traces = trajectory_traces(&poses, &sensor, &geom).unwrap();
        let start: Vec<Vec<f64>> = grid.cells().iter().map(|h| probs(h.as_slice())).collect();
        let all_cells: usize = traces.iter().map(|t| t.len()).sum();
        let mut distinct: Vec<usize> = traces
            .iter()
            .flat_map(|t| t.cells.iter().copied())
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        overlapping += usize::from(distinct.len() < all_cells);
        let e = Enumeration {
            traces: &traces,
            occupied: (1..=k)
                .map(|y| probs(sensor.occupied_log_odds(y).unwrap().as_slice()))
                .collect(),
            free: probs(sensor.phi_minus.as_slice()),
            prior: probs(grid.prior().as_slice()),
            start: &start,
        };
        let joint = e.expected_gain(&mut start.clone(), 0);
        assert!(
            bound <= joint * (1.0 + 1e-9),
            "case {case}: bound {bound} > joint {joint}"
        );
    }
    assert!(
        overlapping > 20,
        "too few overlapping instances: {overlapping}"
    );
}
