//! Run-length form of the beam information.
//!
//! Along a beam through a pruned octree many consecutive cells share one
//! belief. Within a run of `omega` equal cells the per-cell sums collapse to
//! two geometric series in the run's free probability, so a beam costs
//! `O(Q K)` for `Q` runs instead of `O(N K)` for `N` cells.

use super::{beam_beliefs, beam_mi_dense_counted, InformationModel};
use crate::geometry::RayTrace;
use crate::gridmap::BeliefMap;
use crate::logodds::{f_gain_slices, softmax, Categorical, LogOdds};

/// `omega` consecutive cells with log odds `chi` and class probabilities `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub omega: usize,
    pub chi: LogOdds,
    pub pi: Categorical,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeamRuns {
    runs: Vec<Run>,
}

impl BeamRuns {
    /// Merges consecutive exactly equal beliefs.
    pub fn from_beliefs(beliefs: &[LogOdds]) -> Self {
        let mut runs: Vec<Run> = Vec::new();
        for h in beliefs {
            match runs.last_mut() {
                Some(last) if last.chi == *h => last.omega += 1,
                _ => runs.push(Run {
                    omega: 1,
                    chi: h.clone(),
                    pi: softmax(h),
                }),
            }
        }
        Self { runs }
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Number of runs `Q`.
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of cells `N`.
    pub fn num_cells(&self) -> usize {
        self.runs.iter().map(|r| r.omega).sum()
    }

    pub fn expand(&self) -> Vec<LogOdds> {
        self.runs
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.chi.clone(), r.omega))
            .collect()
    }
}

pub fn rle_segments<M: BeliefMap + ?Sized>(trace: &RayTrace, map: &M) -> BeamRuns {
    BeamRuns::from_beliefs(&beam_beliefs(trace, map))
}

/// `A(x) = (1 - e^-x) / x` and `A'(x)`, by power series for `x <= 1`.
fn damped(x: f64) -> (f64, f64) {
    if x > 1.0 {
        let a = -(-x).exp_m1() / x;
        return (a, ((-x).exp() - a) / x);
    }
    // A(x) = sum_n (-x)^n / (n+1)!,  A'(x) = sum_{n>=1} n (-1)^n x^(n-1) / (n+1)!
    let mut a = 1.0;
    let mut da = 0.0;
    let mut term = 1.0; // (-x)^(n-1) / n!
    for n in 1..24 {
        let nf = n as f64;
        // term becomes (-1)^n x^(n-1) / (n+1)!
        term *= -1.0 / (nf + 1.0);
        da += nf * term;
        a += term * x;
        term *= x;
    }
    (a, da)
}

/// `S0 = sum_{j<omega} pi0^j` and `S1 = sum_{j<omega} j pi0^j`.
///
/// With `u = -ln pi0` both sums are written through `A(x) = (1 - e^-x)/x`:
/// `S0 = omega A(omega u) / A(u)` and `S1 = -dS0/du`. When `omega u` is
/// small this form is evaluated by series, which stays accurate as `pi0`
/// approaches 1 and reduces to `omega` and `omega (omega - 1) / 2` there.
/// Otherwise the textbook closed forms are used.
pub fn geometric_sums(pi0: f64, omega: usize) -> (f64, f64) {
    debug_assert!((0.0..=1.0).contains(&pi0));
    if omega == 0 {
        return (0.0, 0.0);
    }
    if omega == 1 || pi0 == 0.0 {
        return (1.0, 0.0);
    }
    let w = omega as f64;
    let u = -(-(1.0 - pi0)).ln_1p();
    if w * u > 1.0 {
        let eps = 1.0 - pi0;
        let pw = pi0.powi(omega.min(i32::MAX as usize) as i32);
        let s0 = (1.0 - pw) / eps;
        let s1 = (pi0 - w * pw + (w - 1.0) * pw * pi0) / (eps * eps);
        return (s0, s1);
    }
    let (a_w, da_w) = damped(w * u);
    let (a_1, da_1) = damped(u);
    let s0 = w * a_w / a_1;
    let s1 = -w * (w * da_w * a_1 - a_w * da_1) / (a_1 * a_1);
    (s0, s1)
}

/// Run-length evaluation of [`super::beam_mi_dense`]. Requires a uniform
/// (all-zero) prior; other priors fall back to the dense sum.
pub fn beam_mi_rle(runs: &BeamRuns, model: &InformationModel) -> f64 {
    beam_mi_rle_counted(runs, model, &mut 0)
}

/// [`beam_mi_rle`], adding the number of `(run, class)` terms evaluated to
/// `ops`.
pub fn beam_mi_rle_counted(runs: &BeamRuns, model: &InformationModel, ops: &mut u64) -> f64 {
    if !model.has_zero_prior() {
        return beam_mi_dense_counted(&runs.expand(), model, ops);
    }
    let k = model.num_classes();
    let mut mi = 0.0;
    // a: probability that every earlier run is free; b: information of
    // those earlier runs being observed free
    let mut a = 1.0;
    let mut b = 0.0;
    for run in &runs.runs {
        let h = run.chi.as_slice();
        let pi0 = run.pi.free();
        let (s0, s1) = geometric_sums(pi0, run.omega);
        let f_minus = f_gain_slices(model.minus().as_slice(), h);
        for y in 1..=k {
            let b_q = f_gain_slices(model.plus(y).as_slice(), h) + b;
            mi += run.pi.prob(y) * a * (b_q * s0 + f_minus * s1);
        }
        *ops += k as u64;
        b += run.omega as f64 * f_minus;
        a *= pi0.powi(run.omega.min(i32::MAX as usize) as i32);
    }
    mi
}
