//! Dense vs run-length MI timing across octree resolutions.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

use semap_core::mutinfo::{beam_beliefs, beam_mi_dense, beam_mi_rle, BeamRuns};
use semap_core::octree::OctreeParams;
use semap_core::{raycast, InformationModel, LogOdds, Point3, SensorParams};

use crate::env::BoxWorld;

/// One benchmark row. `n_mean` and `q_mean` are cells and runs per beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub resolution: f64,
    pub n_mean: f64,
    pub q_mean: f64,
    pub dense_ns: f64,
    pub rle_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub r_max: f64,
    pub origins: Vec<Point3>,
    pub directions: Vec<Point3>,
    /// Shortest wall time of one timed batch.
    pub min_batch: Duration,
    /// Timed batches per kernel; the fastest is kept.
    pub trials: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            r_max: 5.6,
            origins: vec![
                [6.4, 6.4, 1.0],
                [4.6, 6.5, 3.3],
                [8.9, 4.1, 2.5],
                [3.3, 3.3, 5.3],
            ],
            directions: sphere_directions(32),
            min_batch: Duration::from_millis(10),
            trials: 25,
        }
    }
}

/// Fibonacci lattice on the unit sphere.
pub fn sphere_directions(n: usize) -> Vec<Point3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) * 2.0 / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

fn bench_sensor(k: usize, r_max: f64) -> SensorParams {
    let v = |x: f64| {
        LogOdds::new(std::iter::once(0.0).chain(std::iter::repeat_n(x, k))).expect("finite")
    };
    SensorParams::new(v(0.3), v(2.0), v(-2.0), r_max, vec![[1.0, 0.0, 0.0]])
        .expect("valid bench sensor")
}

/// Repetitions needed for one batch of `f` to last `min_batch`.
fn calibrate(min_batch: Duration, f: &mut dyn FnMut() -> f64) -> u64 {
    let mut reps = 1u64;
    loop {
        let t = Instant::now();
        for _ in 0..reps {
            black_box(f());
        }
        if t.elapsed() >= min_batch {
            return reps;
        }
        reps *= 2;
    }
}

fn batch_ns(reps: u64, f: &mut dyn FnMut() -> f64) -> f64 {
    let t = Instant::now();
    for _ in 0..reps {
        black_box(f());
    }
    t.elapsed().as_nanos() as f64 / reps as f64
}

struct Case {
    resolution: f64,
    beams: Vec<Vec<LogOdds>>,
    runs: Vec<BeamRuns>,
}

/// Builds the pruned box-world octree at each resolution and times both MI
/// kernels over the same beam set. Only the kernels are timed; ray casting
/// and belief lookup happen beforehand. Times are per full beam set, the
/// fastest of `trials` batches; trials cycle through all resolutions so a
/// slow stretch of wall time does not land on one row.
pub fn bench_resolution_scaling(
    world: &BoxWorld,
    resolutions: &[f64],
    settings: &BenchSettings,
) -> Vec<BenchRow> {
    let sensor = bench_sensor(world.num_classes, settings.r_max);
    let model = InformationModel::new(&sensor, &LogOdds::zeros(world.num_classes))
        .expect("matching class count");
    let cases: Vec<Case> = resolutions
        .iter()
        .map(|&resolution| {
            let tree = world.octree(resolution, OctreeParams::default());
            let geometry = *tree.leaf_geometry();
            let beams: Vec<Vec<LogOdds>> = settings
                .origins
                .iter()
                .flat_map(|o| settings.directions.iter().map(move |d| (o, d)))
                .filter_map(|(o, d)| raycast(&geometry, *o, *d, settings.r_max).ok())
                .map(|trace| beam_beliefs(&trace, &tree))
                .collect();
            let runs = beams.iter().map(|b| BeamRuns::from_beliefs(b)).collect();
            Case {
                resolution,
                beams,
                runs,
            }
        })
        .collect();
    let dense = |c: &Case| {
        c.beams
            .iter()
            .map(|b| beam_mi_dense(b, &model))
            .sum::<f64>()
    };
    let rle = |c: &Case| c.runs.iter().map(|r| beam_mi_rle(r, &model)).sum::<f64>();
    let reps: Vec<(u64, u64)> = cases
        .iter()
        .map(|c| {
            (
                calibrate(settings.min_batch, &mut || dense(c)),
                calibrate(settings.min_batch, &mut || rle(c)),
            )
        })
        .collect();
    let mut best = vec![(f64::INFINITY, f64::INFINITY); cases.len()];
    for _ in 0..settings.trials.max(1) {
        for (i, c) in cases.iter().enumerate() {
            best[i].0 = best[i].0.min(batch_ns(reps[i].0, &mut || dense(c)));
            best[i].1 = best[i].1.min(batch_ns(reps[i].1, &mut || rle(c)));
        }
    }
    cases
        .iter()
        .zip(best)
        .map(|(c, (dense_ns, rle_ns))| {
            let beams_n = c.beams.len().max(1) as f64;
            BenchRow {
                resolution: c.resolution,
                n_mean: c.beams.iter().map(Vec::len).sum::<usize>() as f64 / beams_n,
                q_mean: c.runs.iter().map(BeamRuns::len).sum::<usize>() as f64 / beams_n,
                dense_ns,
                rle_ns,
            }
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("resolution,N,Q,dense_ns,rle_ns\n");
    for r in rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.0},{:.0}",
            r.resolution, r.n_mean, r.q_mean, r.dense_ns, r.rle_ns
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_resolution_doubles_cells_per_beam() {
        let settings = BenchSettings {
            min_batch: Duration::from_micros(100),
            trials: 1,
            ..BenchSettings::default()
        };
        let rows = bench_resolution_scaling(&BoxWorld::standard(), &[0.4, 0.2], &settings);
        let ratio = rows[1].n_mean / rows[0].n_mean;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
        assert!(rows[1].q_mean < 1.5 * rows[0].q_mean);
    }

    #[test]
    fn directions_are_unit() {
        for d in sphere_directions(17) {
            assert!((d.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
