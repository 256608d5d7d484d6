//! Range-category sensor: inverse observation model, beam rasterization and
//! the marginal likelihood of a beam outcome.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{raycast, GridGeometry, Point3, RayTrace};
use crate::logodds::{Categorical, LogOdds};

/// Extra distance a returned range is pushed past the surface so that the
/// endpoint falls inside the obstacle cell rather than on its boundary.
pub const HIT_NUDGE: f64 = 1e-9;

/// Inverse-model parameters and beam layout of a range-category sensor.
///
/// A hit labelled `y` raises class `k` by `phi_plus[k]` plus `psi_plus[k]`
/// when `k == y`; a pass-through adds `phi_minus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub phi_plus: LogOdds,
    pub psi_plus: LogOdds,
    pub phi_minus: LogOdds,
    pub r_max: f64,
    /// Unit beam directions in the sensor frame.
    pub rays: Vec<Point3>,
}

impl SensorParams {
    pub fn new(
        phi_plus: LogOdds,
        psi_plus: LogOdds,
        phi_minus: LogOdds,
        r_max: f64,
        rays: Vec<Point3>,
    ) -> Result<Self> {
        let params = Self {
            phi_plus,
            psi_plus,
            phi_minus,
            r_max,
            rays,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.phi_plus.num_classes();
        for (name, v) in [("psi_plus", &self.psi_plus), ("phi_minus", &self.phi_minus)] {
            if v.num_classes() != k {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("has {} classes, phi_plus has {k}", v.num_classes()),
                });
            }
        }
        if self.phi_minus.as_slice()[1..].iter().any(|&v| v > 0.0) {
            return Err(Error::InvalidParameter {
                name: "phi_minus",
                reason: "object-class entries must be non-positive".into(),
            });
        }
        if self.psi_plus.as_slice()[1..].iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "psi_plus",
                reason: "object-class entries must be positive".into(),
            });
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "r_max",
                reason: format!("must be positive, got {}", self.r_max),
            });
        }
        for r in &self.rays {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let unit = (n - 1.0).abs() < 1e-9;
            if !unit {
                return Err(Error::InvalidParameter {
                    name: "rays",
                    reason: format!("direction {r:?} is not a unit vector"),
                });
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.phi_plus.num_classes()
    }

    /// `n` evenly spaced planar beams covering `fov` radians, centred on +x.
    /// A full circle (`fov >= 2 pi`) does not repeat the first beam.
    pub fn planar_fan(n: usize, fov: f64) -> Vec<Point3> {
        let full = fov >= std::f64::consts::TAU - 1e-12;
        (0..n)
            .map(|i| {
                let a = if n == 1 {
                    0.0
                } else if full {
                    -std::f64::consts::PI + fov * i as f64 / n as f64
                } else {
                    -0.5 * fov + fov * i as f64 / (n - 1) as f64
                };
                [a.cos(), a.sin(), 0.0]
            })
            .collect()
    }

    /// `phi_plus + E_{y+1} psi_plus`: the log ratios after a hit labelled `y`.
    pub fn occupied_log_odds(&self, y: usize) -> Result<LogOdds> {
        let k = self.num_classes();
        if y == 0 || y > k {
            return Err(Error::InvalidClass { class: y, max: k });
        }
        let values = self
            .phi_plus
            .as_slice()
            .iter()
            .zip(self.psi_plus.as_slice())
            .enumerate()
            .map(|(c, (&phi, &psi))| phi + if c == y { psi } else { 0.0 })
            .collect();
        Ok(LogOdds::from_pivoted(values))
    }
}

/// What a beam says about one cell it passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellObservation {
    Occupied(usize),
    Free,
    Unobserved,
}

/// Log ratios of the inverse observation model for one cell.
pub fn inverse_log_odds(
    obs: CellObservation,
    params: &SensorParams,
    prior: &LogOdds,
) -> Result<LogOdds> {
    match obs {
        CellObservation::Occupied(y) => params.occupied_log_odds(y),
        CellObservation::Free => Ok(params.phi_minus.clone()),
        CellObservation::Unobserved => Ok(prior.clone()),
    }
}

/// Sensor position and heading (rotation about +z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub position: Point3,
    pub yaw: f64,
}

impl SensorPose {
    pub fn new(position: Point3, yaw: f64) -> Self {
        Self { position, yaw }
    }

    pub fn rotate(&self, v: Point3) -> Point3 {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
    }
}

/// One beam outcome: range and class label along `rays[ray_index]`.
/// `label == 0` means the beam reached `r_max` without a return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub range: f64,
    pub label: usize,
    pub ray_index: usize,
    pub pose: SensorPose,
}

/// Rasterizes a measurement. For a return, the cell containing the endpoint
/// is the hit cell and every cell before it is observed free; a max-range
/// pass observes every cell up to `r_max` as free.
pub fn beam_trace(geom: &GridGeometry, params: &SensorParams, m: &Measurement) -> Result<RayTrace> {
    let dir = params.rays.get(m.ray_index).ok_or_else(|| {
        Error::InvalidMeasurement(format!("ray index {} out of range", m.ray_index))
    })?;
    let k = params.num_classes();
    if m.label > k {
        return Err(Error::InvalidClass {
            class: m.label,
            max: k,
        });
    }
    if m.range.is_nan() || m.range < 0.0 || m.range > params.r_max * (1.0 + 1e-12) {
        return Err(Error::InvalidMeasurement(format!(
            "range {} outside [0, {}]",
            m.range, params.r_max
        )));
    }
    let world = m.pose.rotate(*dir);
    if m.label == 0 {
        if m.range != params.r_max {
            return Err(Error::InvalidMeasurement(format!(
                "free label with range {} below r_max {}",
                m.range, params.r_max
            )));
        }
        return raycast(geom, m.pose.position, world, params.r_max);
    }
    if m.range == 0.0 {
        return raycast(geom, m.pose.position, world, 0.0);
    }
    let mut trace = raycast(geom, m.pose.position, world, m.range + HIT_NUDGE)?;
    trace.hit_index = trace.len().checked_sub(1);
    Ok(trace)
}

/// Likelihood of observing `label` given the current beliefs.
///
/// With a hit cell `i*`, returns `p(m_i* = label) / gamma(i*)` times the
/// probability that every earlier cell is free. For a max-range pass
/// (`hit_index == None`, `label == 0`) returns the probability that every
/// cell is free, a discrete atom rather than a density.
pub fn ray_pdf<F>(trace: &RayTrace, label: usize, belief: F) -> f64
where
    F: Fn(usize) -> Categorical,
{
    match trace.hit_index {
        Some(hit) => {
            let free: f64 = trace.cells[..hit]
                .iter()
                .map(|&c| belief(c).free())
                .product();
            belief(trace.cells[hit]).prob(label) / trace.lengths[hit] * free
        }
        None => trace.cells.iter().map(|&c| belief(c).free()).product(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logodds::softmax;

    fn lo(v: &[f64]) -> LogOdds {
        LogOdds::new(v.iter().copied()).unwrap()
    }

    fn params() -> SensorParams {
        SensorParams::new(
            lo(&[0.0, 0.2, 0.2]),
            lo(&[0.0, 1.0, 1.0]),
            lo(&[0.0, -0.4, -0.4]),
            4.0,
            SensorParams::planar_fan(4, std::f64::consts::TAU),
        )
        .unwrap()
    }

    #[test]
    fn inverse_model_cases() {
        let p = params();
        let prior = LogOdds::zeros(2);
        let occ = inverse_log_odds(CellObservation::Occupied(1), &p, &prior).unwrap();
        assert_eq!(occ.as_slice(), &[0.0, 1.2, 0.2]);
        let free = inverse_log_odds(CellObservation::Free, &p, &prior).unwrap();
        assert_eq!(free.as_slice(), &[0.0, -0.4, -0.4]);
        let un = inverse_log_odds(CellObservation::Unobserved, &p, &prior).unwrap();
        assert_eq!(un.as_slice(), &[0.0, 0.0, 0.0]);
        assert!(matches!(
            inverse_log_odds(CellObservation::Occupied(0), &p, &prior),
            Err(Error::InvalidClass { class: 0, .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        let bad = SensorParams::new(
            lo(&[0.0, 0.2]),
            lo(&[0.0, 1.0]),
            lo(&[0.0, 0.4]),
            4.0,
            vec![[1.0, 0.0, 0.0]],
        );
        assert!(matches!(
            bad,
            Err(Error::InvalidParameter {
                name: "phi_minus",
                ..
            })
        ));
        let bad = SensorParams::new(
            lo(&[0.0, 0.2]),
            lo(&[0.0, 0.0]),
            lo(&[0.0, -0.4]),
            4.0,
            vec![[1.0, 0.0, 0.0]],
        );
        assert!(matches!(
            bad,
            Err(Error::InvalidParameter {
                name: "psi_plus",
                ..
            })
        ));
    }

    #[test]
    fn planar_fan_full_circle_has_no_duplicate() {
        let rays = SensorParams::planar_fan(4, std::f64::consts::TAU);
        assert_eq!(rays.len(), 4);
        assert!((rays[0][0] + 1.0).abs() < 1e-12);
        assert!((rays[2][0] - 1.0).abs() < 1e-12);
    }

    fn uniform_binary(_: usize) -> Categorical {
        Categorical::new([0.5, 0.5]).unwrap()
    }

    #[test]
    fn ray_pdf_examples() {
        let trace = RayTrace {
            cells: vec![0, 1],
            lengths: vec![1.0, 1.0],
            hit_index: Some(1),
        };
        assert_eq!(ray_pdf(&trace, 1, uniform_binary), 0.25);

        let certain = RayTrace {
            cells: vec![7],
            lengths: vec![0.25],
            hit_index: Some(0),
        };
        let p = ray_pdf(&certain, 1, |_| Categorical::new([0.0, 1.0]).unwrap());
        assert_eq!(p, 4.0);
    }

    #[test]
    fn beam_trace_marks_hit_cell() {
        let g = GridGeometry::planar(10, 10, 1.0).unwrap();
        let p = params();
        let pose = SensorPose::new([0.5, 0.5, 0.5], 0.0);
        // ray 2 of the fan points along +x
        let m = Measurement {
            range: 2.0,
            label: 2,
            ray_index: 2,
            pose,
        };
        let t = beam_trace(&g, &p, &m).unwrap();
        assert_eq!(t.hit_index, Some(2));
        assert_eq!(g.coords(t.cells[2]), [2, 0, 0]);

        // a return exactly on a boundary lands in the cell beyond it
        let edge = Measurement { range: 1.5, ..m };
        let t = beam_trace(&g, &p, &edge).unwrap();
        assert_eq!(g.coords(t.cells[t.hit_index.unwrap()]), [2, 0, 0]);
        assert_eq!(t.len(), 3);

        let pass = Measurement {
            range: 4.0,
            label: 0,
            ..m
        };
        let t = beam_trace(&g, &p, &pass).unwrap();
        assert_eq!(t.hit_index, None);
        assert!((t.total_length() - 4.0).abs() < 1e-12);

        let bad = Measurement {
            range: 2.0,
            label: 0,
            ..m
        };
        assert!(beam_trace(&g, &p, &bad).is_err());
    }

    /// Outcome enumeration: every (hit cell, class) outcome plus the
    /// max-range atom, with densities converted to probabilities by the
    /// traversal length of the hit cell, must sum to one.
    #[test]
    fn beam_outcomes_sum_to_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = rng.random_range(1..5usize);
            let beliefs: Vec<Categorical> = (0..5)
                .map(|_| {
                    softmax(&lo(&(0..=k)
                        .map(|_| rng.random_range(-4.0..4.0))
                        .collect::<Vec<_>>()))
                })
                .collect();
            let lengths: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.5)).collect();
            let full = RayTrace {
                cells: (0..5).collect(),
                lengths: lengths.clone(),
                hit_index: None,
            };
            let mut total = ray_pdf(&full, 0, |c| beliefs[c].clone());
            for n in 0..5 {
                let t = RayTrace {
                    cells: (0..=n).collect(),
                    lengths: lengths[..=n].to_vec(),
                    hit_index: Some(n),
                };
                for y in 1..=k {
                    total += ray_pdf(&t, y, |c| beliefs[c].clone()) * lengths[n];
                }
            }
            assert!((total - 1.0).abs() < 1e-9, "total {total}");
        }
    }
}
