//! Closed-form Shannon mutual information between a map belief and future
//! range-category beams.
//!
//! Every beam outcome is a (hit cell `n`, class `k`) pair. Its probability
//! is `p(n,k) = p(m_n = k) * prod_{i<n} p(m_i = 0)` and the information it
//! carries decomposes per cell into `f` terms, so the per-beam sum can be
//! accumulated in one pass. The traversal lengths that make the ray PDF a
//! density cancel against the outcome interval widths, so all quantities
//! here are plain probabilities.

mod rle;

pub use rle::{beam_mi_rle, beam_mi_rle_counted, geometric_sums, rle_segments, BeamRuns, Run};

use std::collections::HashSet;

use crate::error::Result;
use crate::geometry::{raycast, RayTrace};
use crate::gridmap::{update_cell, BeliefMap};
use crate::logodds::{f_gain_slices, softmax, softmax_values, LogOdds};
use crate::sensor::{ray_pdf, SensorParams, SensorPose};

/// Log-odds increments of the inverse sensor model relative to the map
/// prior, one per possible hit class plus the pass-through increment.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationModel {
    plus: Vec<LogOdds>,
    minus: LogOdds,
    zero_prior: bool,
}

impl InformationModel {
    pub fn new(params: &SensorParams, prior: &LogOdds) -> Result<Self> {
        let k = params.num_classes();
        if prior.num_classes() != k {
            return Err(crate::Error::LengthMismatch {
                expected: k + 1,
                actual: prior.len(),
            });
        }
        let plus = (1..=k)
            .map(|y| params.occupied_log_odds(y).map(|l| &l - prior))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            plus,
            minus: &params.phi_minus - prior,
            zero_prior: prior.is_zero(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.plus.len()
    }

    /// Increment applied to the hit cell when class `k >= 1` is returned.
    pub fn plus(&self, k: usize) -> &LogOdds {
        &self.plus[k - 1]
    }

    pub fn minus(&self) -> &LogOdds {
        &self.minus
    }

    pub fn has_zero_prior(&self) -> bool {
        self.zero_prior
    }
}

/// Beliefs of the cells a beam crosses, in beam order.
pub fn beam_beliefs<M: BeliefMap + ?Sized>(trace: &RayTrace, map: &M) -> Vec<LogOdds> {
    trace.cells.iter().map(|&c| map.log_odds(c)).collect()
}

/// Explicit `p(n,k)` and `C(n,k)` tables of one beam, row-major with `K`
/// columns for classes `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutcomeTable {
    pub num_cells: usize,
    pub num_classes: usize,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
}

impl BeamOutcomeTable {
    pub fn new(beliefs: &[LogOdds], model: &InformationModel) -> Self {
        let k = model.num_classes();
        let mut table = Self {
            num_cells: beliefs.len(),
            num_classes: k,
            p: Vec::with_capacity(beliefs.len() * k),
            c: Vec::with_capacity(beliefs.len() * k),
        };
        let mut free = 1.0;
        let mut passed = 0.0;
        for h in beliefs {
            let probs = softmax_values(h.as_slice());
            for y in 1..=k {
                table.p.push(probs[y] * free);
                table
                    .c
                    .push(f_gain_slices(model.plus(y).as_slice(), h.as_slice()) + passed);
            }
            passed += f_gain_slices(model.minus.as_slice(), h.as_slice());
            free *= probs[0];
        }
        table
    }

    pub fn p(&self, n: usize, k: usize) -> f64 {
        self.p[n * self.num_classes + k - 1]
    }

    pub fn c(&self, n: usize, k: usize) -> f64 {
        self.c[n * self.num_classes + k - 1]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().zip(&self.c).map(|(p, c)| p * c).sum()
    }
}

/// Mutual information lower bound of one full-length beam, in nats.
pub fn beam_mi_dense(beliefs: &[LogOdds], model: &InformationModel) -> f64 {
    beam_mi_dense_counted(beliefs, model, &mut 0)
}

/// [`beam_mi_dense`], adding the number of `(cell, class)` terms evaluated
/// to `ops`.
pub fn beam_mi_dense_counted(beliefs: &[LogOdds], model: &InformationModel, ops: &mut u64) -> f64 {
    let k = model.num_classes();
    let mut mi = 0.0;
    let mut free = 1.0;
    let mut passed = 0.0;
    for h in beliefs {
        let probs = softmax_values(h.as_slice());
        for y in 1..=k {
            let c = f_gain_slices(model.plus(y).as_slice(), h.as_slice()) + passed;
            mi += probs[y] * free * c;
        }
        *ops += k as u64;
        passed += f_gain_slices(model.minus.as_slice(), h.as_slice());
        free *= probs[0];
    }
    mi
}

/// Brute-force expected information gain of one beam.
///
/// Enumerates every outcome, weights it by the ray PDF times the hit cell's
/// traversal length, applies the Bayes update to each cell it touches and
/// sums the KL divergences between updated and current beliefs. With
/// `include_max_range` the no-return outcome (all cells free) is added.
pub fn beam_mi_oracle(
    trace: &RayTrace,
    beliefs: &[LogOdds],
    params: &SensorParams,
    prior: &LogOdds,
    include_max_range: bool,
) -> Result<f64> {
    assert_eq!(trace.len(), beliefs.len());
    let current: Vec<_> = beliefs.iter().map(softmax).collect();
    let position = |cell: usize| {
        trace
            .cells
            .iter()
            .position(|&c| c == cell)
            .expect("cell on beam")
    };
    let belief = |cell: usize| current[position(cell)].clone();
    let gain = |pos: usize, l: &LogOdds| {
        softmax(&update_cell(&beliefs[pos], l, prior)).kl_divergence(&current[pos])
    };

    let mut total = 0.0;
    for n in 0..trace.len() {
        let prefix = RayTrace {
            cells: trace.cells[..=n].to_vec(),
            lengths: trace.lengths[..=n].to_vec(),
            hit_index: Some(n),
        };
        for y in 1..=params.num_classes() {
            let prob = ray_pdf(&prefix, y, belief) * trace.lengths[n];
            let occupied = params.occupied_log_odds(y)?;
            let info: f64 =
                (0..n).map(|i| gain(i, &params.phi_minus)).sum::<f64>() + gain(n, &occupied);
            total += prob * info;
        }
    }
    if include_max_range {
        let pass = RayTrace {
            hit_index: None,
            ..trace.clone()
        };
        let prob = ray_pdf(&pass, 0, belief);
        total += prob
            * (0..trace.len())
                .map(|i| gain(i, &params.phi_minus))
                .sum::<f64>();
    }
    Ok(total)
}

/// Greedy, in input order: keeps a trace iff none of its cells belongs to
/// an already kept trace. Returns the indices of the kept traces.
pub fn filter_nonoverlapping(traces: &[RayTrace]) -> Vec<usize> {
    let mut taken = HashSet::new();
    let mut kept = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        if t.cells.iter().all(|c| !taken.contains(c)) {
            taken.extend(t.cells.iter().copied());
            kept.push(i);
        }
    }
    kept
}

/// Full-length traces of every beam at every pose, pose-major.
pub fn trajectory_traces(
    poses: &[SensorPose],
    params: &SensorParams,
    geometry: &crate::geometry::GridGeometry,
) -> Result<Vec<RayTrace>> {
    let mut traces = Vec::with_capacity(poses.len() * params.rays.len());
    for pose in poses {
        for ray in &params.rays {
            traces.push(raycast(
                geometry,
                pose.position,
                pose.rotate(*ray),
                params.r_max,
            )?);
        }
    }
    Ok(traces)
}

/// Mutual information lower bound of a pose sequence against a frozen
/// belief: all beams are traced, overlapping ones dropped and the rest
/// summed with [`beam_mi_dense`].
pub fn trajectory_mi<M: BeliefMap + ?Sized>(
    poses: &[SensorPose],
    params: &SensorParams,
    map: &M,
    model: &InformationModel,
) -> Result<f64> {
    let traces = trajectory_traces(poses, params, map.geometry())?;
    Ok(filter_nonoverlapping(&traces)
        .into_iter()
        .map(|i| beam_mi_dense(&beam_beliefs(&traces[i], map), model))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridGeometry;
    use crate::gridmap::MultiClassGrid;
    use crate::logodds::f_gain;
    use rand::{Rng, SeedableRng};

    fn lo(v: &[f64]) -> LogOdds {
        LogOdds::new(v.iter().copied()).unwrap()
    }

    fn params(k: usize, rng: &mut impl Rng) -> SensorParams {
        let mut phi = vec![0.0];
        let mut psi = vec![0.0];
        let mut minus = vec![0.0];
        for _ in 1..=k {
            phi.push(rng.random_range(-0.5..0.5));
            psi.push(rng.random_range(0.2..2.0));
            minus.push(rng.random_range(-1.5..0.0));
        }
        SensorParams::new(lo(&phi), lo(&psi), lo(&minus), 5.0, vec![[1.0, 0.0, 0.0]]).unwrap()
    }

    fn random_beam(rng: &mut impl Rng, k: usize, n: usize) -> (RayTrace, Vec<LogOdds>) {
        let trace = RayTrace {
            cells: (0..n).collect(),
            lengths: (0..n).map(|_| rng.random_range(0.05..1.0)).collect(),
            hit_index: None,
        };
        let beliefs = (0..n)
            .map(|_| {
                lo(&(0..=k)
                    .map(|_| rng.random_range(-4.0..4.0))
                    .collect::<Vec<_>>())
            })
            .collect();
        (trace, beliefs)
    }

    #[test]
    fn single_uniform_binary_cell() {
        let p = SensorParams::new(
            lo(&[0.0, 0.0]),
            lo(&[0.0, 1.0]),
            lo(&[0.0, 0.0]),
            1.0,
            vec![[1.0, 0.0, 0.0]],
        )
        .unwrap();
        let prior = LogOdds::zeros(1);
        let model = InformationModel::new(&p, &prior).unwrap();
        let mi = beam_mi_dense(std::slice::from_ref(&prior), &model);
        let expect = 0.5 * f_gain(&lo(&[0.0, 1.0]), &prior);
        assert!((mi - expect).abs() < 1e-15);
        assert!((mi - 0.055472).abs() < 1e-6);
        let trace = RayTrace {
            cells: vec![0],
            lengths: vec![0.3],
            hit_index: None,
        };
        let oracle =
            beam_mi_oracle(&trace, std::slice::from_ref(&prior), &p, &prior, false).unwrap();
        assert!((oracle - mi).abs() < 1e-15);
    }

    #[test]
    fn known_free_beam_has_negligible_information() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = params(3, &mut rng);
        let model = InformationModel::new(&p, &LogOdds::zeros(3)).unwrap();
        let beliefs = vec![lo(&[0.0, -60.0, -60.0, -60.0]); 8];
        assert!(beam_mi_dense(&beliefs, &model) < 1e-6);
        assert_eq!(beam_mi_dense(&[], &model), 0.0);
    }

    #[test]
    fn uninformative_sensor_gives_zero() {
        let prior = lo(&[0.0, 0.3, -0.2]);
        let p = SensorParams {
            phi_plus: prior.clone(),
            psi_plus: lo(&[0.0, 1.0, 1.0]),
            phi_minus: prior.clone(),
            r_max: 3.0,
            rays: vec![[1.0, 0.0, 0.0]],
        };
        let mut model = InformationModel::new(&p, &prior).unwrap();
        // l+(k) == prior for every k
        model.plus.iter_mut().for_each(|l| *l = LogOdds::zeros(2));
        let beliefs = vec![lo(&[0.0, 1.0, 2.0]), lo(&[0.0, -1.0, 0.5])];
        assert_eq!(beam_mi_dense(&beliefs, &model), 0.0);
    }

    #[test]
    fn dense_matches_oracle_and_table() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=12);
            let p = params(k, &mut rng);
            let prior = lo(&(0..=k)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>());
            let model = InformationModel::new(&p, &prior).unwrap();
            let (trace, beliefs) = random_beam(&mut rng, k, n);
            let dense = beam_mi_dense(&beliefs, &model);
            let oracle = beam_mi_oracle(&trace, &beliefs, &p, &prior, false).unwrap();
            assert!(dense >= 0.0);
            assert!(
                (dense - oracle).abs() <= 1e-9 * oracle.abs().max(1e-300),
                "{dense} vs {oracle}"
            );
            let table = BeamOutcomeTable::new(&beliefs, &model);
            assert!((table.total() - dense).abs() <= 1e-12 * dense.max(1e-300));
            assert!(table.p.iter().sum::<f64>() <= 1.0 + 1e-12);
            let with_atom = beam_mi_oracle(&trace, &beliefs, &p, &prior, true).unwrap();
            assert!(with_atom >= oracle);
        }
    }

    #[test]
    fn operation_count_is_cells_times_classes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let p = params(4, &mut rng);
        let model = InformationModel::new(&p, &LogOdds::zeros(4)).unwrap();
        let (_, beliefs) = random_beam(&mut rng, 4, 37);
        let mut ops = 0;
        beam_mi_dense_counted(&beliefs, &model, &mut ops);
        assert_eq!(ops, 37 * 4);
    }

    #[test]
    fn filter_examples() {
        let t = |cells: Vec<usize>| RayTrace {
            lengths: vec![1.0; cells.len()],
            cells,
            hit_index: None,
        };
        assert_eq!(
            filter_nonoverlapping(&[t(vec![1, 2]), t(vec![1, 2])]),
            vec![0]
        );
        assert_eq!(
            filter_nonoverlapping(&[t(vec![1, 2]), t(vec![3, 4]), t(vec![5])]),
            vec![0, 1, 2]
        );
        assert_eq!(
            filter_nonoverlapping(&[t(vec![1, 2]), t(vec![2, 3]), t(vec![3, 4])]),
            vec![0, 2]
        );
    }

    #[test]
    fn kept_traces_are_pairwise_disjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let g = GridGeometry::planar(20, 20, 0.5).unwrap();
        let rays = SensorParams::planar_fan(36, std::f64::consts::TAU);
        for _ in 0..50 {
            let poses: Vec<_> = (0..3)
                .map(|_| {
                    SensorPose::new(
                        [
                            rng.random_range(0.0..10.0),
                            rng.random_range(0.0..10.0),
                            0.25,
                        ],
                        0.0,
                    )
                })
                .collect();
            let mut traces = Vec::new();
            for pose in &poses {
                for r in &rays {
                    traces.push(raycast(&g, pose.position, *r, 4.0).unwrap());
                }
            }
            let kept = filter_nonoverlapping(&traces);
            for (i, &a) in kept.iter().enumerate() {
                for &b in &kept[i + 1..] {
                    assert!(traces[a].cells.iter().all(|c| !traces[b].cells.contains(c)));
                }
            }
        }
    }

    #[test]
    fn trajectory_mi_basics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let g = GridGeometry::planar(12, 12, 0.5).unwrap();
        let mut p = params(2, &mut rng);
        p.rays = SensorParams::planar_fan(16, std::f64::consts::TAU);
        p.r_max = 2.0;
        let prior = LogOdds::zeros(2);
        let map = MultiClassGrid::new(g, prior.clone());
        let model = InformationModel::new(&p, &prior).unwrap();
        assert_eq!(trajectory_mi(&[], &p, &map, &model).unwrap(), 0.0);

        let pose = SensorPose::new([3.1, 2.9, 0.25], 0.4);
        let mi = trajectory_mi(&[pose], &p, &map, &model).unwrap();
        let traces = trajectory_traces(&[pose], &p, &g).unwrap();
        let expect: f64 = filter_nonoverlapping(&traces)
            .into_iter()
            .map(|i| beam_mi_dense(&beam_beliefs(&traces[i], &map), &model))
            .sum();
        assert_eq!(mi, expect);
        assert!(mi > 0.0);
    }
}
