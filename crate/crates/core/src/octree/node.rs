//! Compressed node belief: the three most likely object classes plus a
//! lumped *others* log ratio, all relative to the implicit free pivot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logodds::{log_sum_exp, LogOdds};
use crate::sensor::SensorParams;

pub const TOP_SLOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OctreeParams {
    /// Edge length of a leaf at `max_depth`, in meters.
    pub resolution: f64,
    pub max_depth: u8,
    /// Share of the *others* mass handed to a newly observed class.
    pub alpha: f64,
    pub min_thresh: f64,
    pub max_thresh: f64,
    /// Increment of the *others* slot when an unlisted class is observed.
    pub phi_plus_others: f64,
}

impl Default for OctreeParams {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            max_depth: 8,
            alpha: 0.5,
            min_thresh: -2.0,
            max_thresh: 3.5,
            phi_plus_others: 0.0,
        }
    }
}

impl OctreeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: format!("must be positive, got {}", self.resolution),
            });
        }
        if self.max_depth == 0 || self.max_depth > 20 {
            return Err(Error::InvalidParameter {
                name: "max_depth",
                reason: format!("must be in 1..=20, got {}", self.max_depth),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be in (0, 1), got {}", self.alpha),
            });
        }
        if !(self.min_thresh < 0.0 && 0.0 < self.max_thresh) {
            return Err(Error::InvalidParameter {
                name: "min_thresh/max_thresh",
                reason: format!(
                    "need min < 0 < max, got [{}, {}]",
                    self.min_thresh, self.max_thresh
                ),
            });
        }
        if !self.phi_plus_others.is_finite() {
            return Err(Error::InvalidParameter {
                name: "phi_plus_others",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeObservation {
    Free,
    Class(usize),
}

/// Slots are kept sorted by descending log ratio, ties by ascending class id.
/// With `K <= 3` every class has its own slot, *others* is empty and pinned
/// at `min_thresh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    top: [(u16, f64); TOP_SLOTS],
    n_top: u8,
    others: f64,
}

fn canonical_order(a: &(u16, f64), b: &(u16, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl NodeState {
    /// Uniform belief (zero prior log ratios) for `k` object classes.
    pub fn prior(k: usize, params: &OctreeParams) -> Self {
        let n = k.min(TOP_SLOTS);
        let mut top = [(0u16, 0.0); TOP_SLOTS];
        for (i, slot) in top.iter_mut().take(n).enumerate() {
            *slot = ((i + 1) as u16, 0.0);
        }
        let others = if k > TOP_SLOTS {
            ((k - TOP_SLOTS) as f64).ln()
        } else {
            params.min_thresh
        };
        let mut s = Self {
            top,
            n_top: n as u8,
            others,
        };
        s.finish(params);
        s
    }

    /// Builds a state from explicit slots, sorting them canonically.
    pub fn from_parts(slots: &[(u16, f64)], others: f64, params: &OctreeParams) -> Result<Self> {
        if slots.is_empty() || slots.len() > TOP_SLOTS {
            return Err(Error::InvalidParameter {
                name: "slots",
                reason: format!("need 1..={TOP_SLOTS} slots, got {}", slots.len()),
            });
        }
        let mut top = [(0u16, 0.0); TOP_SLOTS];
        for (i, &(c, v)) in slots.iter().enumerate() {
            if c == 0 || !v.is_finite() || slots[..i].iter().any(|s| s.0 == c) {
                return Err(Error::InvalidParameter {
                    name: "slots",
                    reason: format!("bad slot ({c}, {v})"),
                });
            }
            top[i] = (c, v);
        }
        let mut s = Self {
            top,
            n_top: slots.len() as u8,
            others,
        };
        s.finish(params);
        Ok(s)
    }

    pub fn top(&self) -> &[(u16, f64)] {
        &self.top[..self.n_top as usize]
    }

    pub fn others(&self) -> f64 {
        self.others
    }

    pub fn contains(&self, class: usize) -> bool {
        self.top().iter().any(|&(c, _)| c as usize == class)
    }

    fn slot_value(&self, class: usize) -> Option<f64> {
        self.top()
            .iter()
            .find(|&&(c, _)| c as usize == class)
            .map(|s| s.1)
    }

    /// Expands to a full `K + 1` log-odds vector. Classes outside the top
    /// slots share the *others* mass equally.
    pub fn to_log_odds(&self, k: usize) -> LogOdds {
        let rest = k.saturating_sub(self.n_top as usize);
        let spread = if rest > 0 {
            self.others - (rest as f64).ln()
        } else {
            0.0
        };
        let mut v = vec![spread; k + 1];
        v[0] = 0.0;
        for &(c, x) in self.top() {
            v[c as usize] = x;
        }
        LogOdds::new(v).expect("node state holds finite values")
    }

    fn has_others(&self, k: usize) -> bool {
        k > self.n_top as usize
    }

    /// Log of the mean of `exp(inc[c])` over classes not held in a slot.
    fn others_increment(&self, k: usize, inc: &[f64]) -> f64 {
        let rest: Vec<f64> = (1..=k)
            .filter(|&c| !self.contains(c))
            .map(|c| inc[c])
            .collect();
        if rest.iter().all(|&x| x == rest[0]) {
            rest[0]
        } else {
            log_sum_exp(&rest) - (rest.len() as f64).ln()
        }
    }

    fn finish(&mut self, params: &OctreeParams) {
        let n = self.n_top as usize;
        for slot in self.top[..n].iter_mut() {
            slot.1 = slot.1.clamp(params.min_thresh, params.max_thresh);
        }
        self.others = self.others.clamp(params.min_thresh, params.max_thresh);
        self.top[..n].sort_by(canonical_order);
    }
}

/// Applies one observation to a node.
///
/// Free adds `l-` to every slot. A class already in the top slots adds
/// `l+(y)`. An unlisted class is seeded with a share `alpha` of *others*,
/// competes with the top slots after adding `l+(y)`, and the loser is folded
/// back into *others* by log-sum-exp. Slots are clamped to the thresholds.
pub fn node_update(
    state: &NodeState,
    obs: NodeObservation,
    sensor: &SensorParams,
    params: &OctreeParams,
) -> Result<NodeState> {
    let k = sensor.num_classes();
    let mut next = *state;
    match obs {
        NodeObservation::Free => {
            let inc = sensor.phi_minus.as_slice();
            let n = next.n_top as usize;
            for slot in next.top[..n].iter_mut() {
                slot.1 += inc[slot.0 as usize];
            }
            if state.has_others(k) {
                next.others += state.others_increment(k, inc);
            }
        }
        NodeObservation::Class(y) => {
            let l = sensor.occupied_log_odds(y)?;
            let inc = l.as_slice();
            if state.contains(y) {
                let n = next.n_top as usize;
                for slot in next.top[..n].iter_mut() {
                    slot.1 += inc[slot.0 as usize];
                }
                if state.has_others(k) {
                    next.others += state.others_increment(k, sensor.phi_plus.as_slice());
                }
            } else {
                let aux = state.others + params.alpha.ln();
                let others = state.others + params.phi_plus_others + (1.0 - params.alpha).ln();
                let mut cand: Vec<(u16, f64)> = state
                    .top()
                    .iter()
                    .map(|&(c, v)| (c, v + inc[c as usize]))
                    .collect();
                cand.push((y as u16, aux + inc[y]));
                cand.sort_by(canonical_order);
                let n = next.n_top as usize;
                next.top[..n].copy_from_slice(&cand[..n]);
                next.others = log_sum_exp(&[cand[n].1, others]);
            }
        }
    }
    next.finish(params);
    Ok(next)
}

/// Fuses two sibling states into one: missing classes are filled from a
/// slice of each side's *others*, the aligned vectors are averaged, the best
/// three survive and the rest are folded into *others*.
pub fn fuse_children(a: &NodeState, b: &NodeState, k: usize, params: &OctreeParams) -> NodeState {
    let sliced_others = |q: &NodeState, other: &NodeState| {
        let missing = other
            .top()
            .iter()
            .filter(|&&(c, _)| !q.contains(c as usize))
            .count();
        q.others - (1.0 + missing as f64).ln()
    };
    let oa = sliced_others(a, b);
    let ob = sliced_others(b, a);

    let mut classes: Vec<u16> = a.top().iter().chain(b.top()).map(|s| s.0).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut fused: Vec<(u16, f64)> = classes
        .into_iter()
        .map(|c| {
            let va = a.slot_value(c as usize).unwrap_or(oa);
            let vb = b.slot_value(c as usize).unwrap_or(ob);
            (c, (va + vb) / 2.0)
        })
        .collect();
    fused.sort_by(canonical_order);

    let n = a.n_top as usize;
    let mut out = *a;
    out.top[..n].copy_from_slice(&fused[..n]);
    out.others = if k > n {
        let mut terms = vec![(oa + ob) / 2.0];
        terms.extend(fused[n..].iter().map(|s| s.1));
        log_sum_exp(&terms)
    } else {
        params.min_thresh
    };
    out.finish(params);
    out
}
