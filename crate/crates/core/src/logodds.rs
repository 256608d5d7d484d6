//! Log-odds algebra over the class set `{0 (free), 1..=K}`.
//!
//! A [`LogOdds`] vector stores `log p(k) / p(0)` for every class, so its
//! first entry (the free-class pivot) is always exactly zero. Bayesian
//! updates become vector additions and probabilities are recovered with a
//! stabilized softmax.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub(crate) type Values = SmallVec<[f64; 8]>;

/// Number of object classes `K`, excluding the free class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ClassCount(usize);

impl ClassCount {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::TooFewClasses(1));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Length of a log-odds vector for this class count (`K + 1`).
    pub fn vector_len(self) -> usize {
        self.0 + 1
    }
}

impl TryFrom<usize> for ClassCount {
    type Error = Error;
    fn try_from(k: usize) -> Result<Self> {
        Self::new(k)
    }
}

impl From<ClassCount> for usize {
    fn from(k: ClassCount) -> usize {
        k.0
    }
}

/// Per-cell belief as log ratios against the free class.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogOdds {
    values: Values,
}

impl LogOdds {
    /// Builds a log-odds vector, re-pivoting so that `values[0] == 0`.
    pub fn new(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut values: Values = values.into_iter().collect();
        if values.len() < 2 {
            return Err(Error::TooFewClasses(values.len()));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let pivot = values[0];
        if pivot != 0.0 {
            for v in values.iter_mut() {
                *v -= pivot;
            }
        }
        values[0] = 0.0;
        Ok(Self { values })
    }

    /// The uniform belief for `k` object classes.
    pub fn zeros(k: usize) -> Self {
        assert!(k >= 1, "need at least one object class");
        Self {
            values: SmallVec::from_elem(0.0, k + 1),
        }
    }

    /// Log ratios of a categorical distribution. Zero-probability classes
    /// map to `-inf`, so callers wanting a finite vector must pass strictly
    /// positive probabilities.
    pub fn from_categorical(c: &Categorical) -> Result<Self> {
        let p0 = c.probs[0];
        Self::new(c.probs.iter().map(|p| (p / p0).ln()))
    }

    /// Internal constructor for vectors already known to satisfy the pivot
    /// invariant (sums and differences of pivoted vectors).
    pub(crate) fn from_pivoted(values: Values) -> Self {
        debug_assert_eq!(values[0], 0.0);
        Self { values }
    }

    pub fn num_classes(&self) -> usize {
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, class: usize) -> f64 {
        self.values[class]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Clamps every object-class entry into `[min, max]`; the pivot stays 0.
    pub fn clamp(&mut self, min: f64, max: f64) {
        for v in self.values[1..].iter_mut() {
            *v = v.clamp(min, max);
        }
    }

    pub(crate) fn zip_with(&self, other: &LogOdds, op: impl Fn(f64, f64) -> f64) -> LogOdds {
        assert_eq!(
            self.values.len(),
            other.values.len(),
            "log-odds vectors of different class counts"
        );
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| op(a, b))
            .collect();
        LogOdds { values }
    }
}

impl fmt::Debug for LogOdds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.values.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for LogOdds {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LogOdds> for Vec<f64> {
    fn from(h: LogOdds) -> Vec<f64> {
        h.values.into_vec()
    }
}

impl Add for &LogOdds {
    type Output = LogOdds;
    fn add(self, rhs: &LogOdds) -> LogOdds {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &LogOdds {
    type Output = LogOdds;
    fn sub(self, rhs: &LogOdds) -> LogOdds {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// A probability distribution over `{0..=K}`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    probs: Values,
}

const CATEGORICAL_SUM_TOL: f64 = 1e-12;

impl Categorical {
    pub fn new(probs: impl IntoIterator<Item = f64>) -> Result<Self> {
        let probs: Values = probs.into_iter().collect();
        if probs.len() < 2 {
            return Err(Error::TooFewClasses(probs.len()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidCategorical(format!(
                "entry {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > CATEGORICAL_SUM_TOL {
            return Err(Error::InvalidCategorical(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.probs[class]
    }

    pub fn free(&self) -> f64 {
        self.probs[0]
    }

    /// `KL(self || other)` in nats, evaluated term by term.
    pub fn kl_divergence(&self, other: &Categorical) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        self.probs
            .iter()
            .zip(other.probs.iter())
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &q)| p * (p / q).ln())
            .sum()
    }
}

impl fmt::Debug for Categorical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.probs.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Vec<f64> {
        c.probs.into_vec()
    }
}

/// `log(sum(exp(x)))`, stabilized by the maximum. A single element is
/// returned unchanged.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    match xs {
        [] => f64::NEG_INFINITY,
        [x] => *x,
        _ => {
            let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        }
    }
}

pub(crate) fn softmax_values(h: &[f64]) -> Values {
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Values = h.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= s;
    }
    out
}

/// Class probabilities from a log-odds vector.
pub fn softmax(h: &LogOdds) -> Categorical {
    Categorical {
        probs: softmax_values(&h.values),
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(c: &Categorical) -> f64 {
    -c.probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Expected per-cell information of a log-odds increment `phi` applied to
/// belief `h`:
///
/// `f(phi, h) = log(1'exp(h) / 1'exp(phi + h)) + phi' softmax(phi + h)`
///
/// which equals `KL(softmax(phi + h) || softmax(h))` and is therefore
/// non-negative.
pub fn f_gain(phi: &LogOdds, h: &LogOdds) -> f64 {
    f_gain_slices(&phi.values, &h.values)
}

pub(crate) fn f_gain_slices(phi: &[f64], h: &[f64]) -> f64 {
    assert_eq!(
        phi.len(),
        h.len(),
        "log-odds vectors of different class counts"
    );
    let shifted: Values = phi.iter().zip(h).map(|(a, b)| a + b).collect();
    let post = softmax_values(&shifted);
    let cross: f64 = phi.iter().zip(post.iter()).map(|(a, p)| a * p).sum();
    // rounding can leave a tiny negative where the divergence is zero
    (log_sum_exp(h) - log_sum_exp(&shifted) + cross).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lo(v: &[f64]) -> LogOdds {
        LogOdds::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn construction_repivots() {
        let h = lo(&[1.0, 2.0, 0.5]);
        assert_eq!(h.as_slice(), &[0.0, 1.0, -0.5]);
        assert!(LogOdds::new([0.0]).is_err());
        assert!(matches!(
            LogOdds::new([0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&LogOdds::zeros(2));
        for &p in u.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let b = softmax(&lo(&[0.0, 1.0]));
        assert!((b.prob(0) - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert!((b.prob(1) - 0.731_058_578_630_004_9).abs() < 1e-15);

        let big = softmax(&lo(&[0.0, 700.0, 700.0]));
        assert!(big.prob(0) < 1e-300);
        assert_eq!(big.prob(1), 0.5);
        assert_eq!(big.prob(2), 0.5);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&Categorical::new([1.0, 0.0, 0.0]).unwrap()), 0.0);
        let u = Categorical::new([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((entropy(&u) - 3f64.ln()).abs() < 1e-15);
        let c = Categorical::new([0.5, 0.25, 0.25]).unwrap();
        assert!((entropy(&c) - 1.039_720_770_839_917_9).abs() < 1e-15);
    }

    #[test]
    fn categorical_validation() {
        assert!(Categorical::new([0.5, 0.6]).is_err());
        assert!(Categorical::new([-0.1, 1.1]).is_err());
        assert!(Categorical::new([1.0]).is_err());
    }

    #[test]
    fn f_gain_examples() {
        let h = lo(&[0.0, 0.3, -2.0]);
        assert_eq!(f_gain(&LogOdds::zeros(2), &h), 0.0);
        let v = f_gain(&lo(&[0.0, 1.0]), &LogOdds::zeros(1));
        assert!((v - 0.110_944_071_671_727_35).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_single_element_is_identity() {
        for x in [-3.7, 0.0, 1e-300, 812.5] {
            assert_eq!(log_sum_exp(&[x]), x);
        }
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-8.0f64..8.0, len)
    }

    fn pair_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|k| (vec_strategy(k + 1), vec_strategy(k + 1)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn f_gain_is_kl_of_update((phi, h) in pair_strategy()) {
            let phi = lo(&phi);
            let h = lo(&h);
            let post = softmax(&(&phi + &h));
            let prior = softmax(&h);
            let kl = post.kl_divergence(&prior);
            let f = f_gain(&phi, &h);
            prop_assert!(f >= -1e-15);
            prop_assert!((f - kl).abs() < 1e-12, "f={f} kl={kl}");
        }

        #[test]
        fn f_gain_invariant_to_shifted_belief((phi, h) in pair_strategy(), c in -20.0f64..20.0) {
            let phi = lo(&phi);
            let shifted = lo(&h.iter().map(|v| v + c).collect::<Vec<_>>());
            let h = lo(&h);
            prop_assert!((f_gain(&phi, &h) - f_gain(&phi, &shifted)).abs() < 1e-12);
        }

        #[test]
        fn softmax_inverts_pivoted_log_ratios(raw in proptest::collection::vec(0.01f64..1.0, 2..7)) {
            let s: f64 = raw.iter().sum();
            let c = Categorical::new(raw.iter().map(|p| p / s)).unwrap_or_else(|_| {
                // renormalize once more when rounding leaves the sum off by an ulp
                let p: Vec<f64> = raw.iter().map(|p| p / s).collect();
                let t: f64 = p.iter().sum();
                Categorical::new(p.iter().map(|x| x / t)).unwrap()
            });
            let back = softmax(&LogOdds::from_categorical(&c).unwrap());
            for (a, b) in back.as_slice().iter().zip(c.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
