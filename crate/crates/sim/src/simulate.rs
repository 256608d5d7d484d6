//! Noisy range-category scans against a ground-truth environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use semap_core::{raycast, Measurement, SensorParams, SensorPose};

use crate::env::Environment;

/// Independent random substreams of one seed. Each consumer owns its
/// stream, so extra draws in one subsystem never shift another.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub range_noise: ChaCha8Rng,
    pub class_noise: ChaCha8Rng,
    pub init_pose: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            range_noise: stream(1),
            class_noise: stream(2),
            init_pose: stream(3),
        }
    }
}

/// Label corruption model.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassNoise {
    /// The true class with probability `1 - p`, otherwise uniform over the
    /// other object classes.
    Uniform(f64),
    /// Row `y - 1` gives the reported-label distribution for true class `y`.
    Confusion(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub range_sigma: f64,
    pub class: ClassNoise,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            range_sigma: 0.0,
            class: ClassNoise::Uniform(0.0),
        }
    }

    fn label(&self, truth: usize, k: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        match &self.class {
            ClassNoise::Uniform(p) => {
                if k < 2 || u >= *p {
                    return truth;
                }
                let pick = rng.random_range(0..k - 1) + 1;
                if pick >= truth {
                    pick + 1
                } else {
                    pick
                }
            }
            ClassNoise::Confusion(rows) => {
                let row = &rows[truth - 1];
                let mut acc = 0.0;
                for (i, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i + 1;
                    }
                }
                truth
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScanError {
    #[error("sensor pose {0:?} is outside the environment")]
    OutOfBounds([f64; 3]),
    #[error("sensor pose {0:?} lies inside an occupied cell")]
    InsideObstacle([f64; 3]),
}

/// True range and class along one ray: the distance at which the ray
/// enters the first occupied cell, or `None` if there is none within `r_max`.
pub fn true_return(
    env: &Environment,
    origin: [f64; 3],
    dir: [f64; 3],
    r_max: f64,
) -> Option<(f64, usize)> {
    let trace = raycast(&env.geometry, origin, dir, r_max).ok()?;
    let mut dist = 0.0;
    for (&cell, &len) in trace.cells.iter().zip(&trace.lengths) {
        let c = env.class_of(cell);
        if c != 0 {
            return Some((dist, c));
        }
        dist += len;
    }
    None
}

/// Simulates one scan. Range noise is Gaussian, clamped to `[0, r_max]`;
/// rays without a return within `r_max` report `(r_max, 0)` without noise.
pub fn simulate_scan(
    env: &Environment,
    pose: SensorPose,
    sensor: &SensorParams,
    noise: &NoiseModel,
    rng: &mut RngStreams,
) -> Result<Vec<Measurement>, ScanError> {
    let p = pose.position;
    match env.class_at(p) {
        None => return Err(ScanError::OutOfBounds(p)),
        Some(c) if c != 0 => return Err(ScanError::InsideObstacle(p)),
        _ => {}
    }
    let normal = (noise.range_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.range_sigma).expect("valid sigma"));
    let k = sensor.num_classes();
    let mut scan = Vec::with_capacity(sensor.rays.len());
    for (i, ray) in sensor.rays.iter().enumerate() {
        let (range, label) = match true_return(env, p, pose.rotate(*ray), sensor.r_max) {
            Some((r, class)) => {
                let e = normal
                    .as_ref()
                    .map_or(0.0, |n| n.sample(&mut rng.range_noise));
                (
                    (r + e).clamp(0.0, sensor.r_max),
                    noise.label(class, k, &mut rng.class_noise),
                )
            }
            None => (sensor.r_max, 0),
        };
        scan.push(Measurement {
            range,
            label,
            ray_index: i,
            pose,
        });
    }
    Ok(scan)
}
