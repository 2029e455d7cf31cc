//! User degree distributions and the erasure-induced distribution seen by the receiver.
//!
//! A distribution is a probability vector indexed by repetition degree `0..=q`.
//! The text form used by the CLI is a list of `degree:prob` pairs, e.g.
//! `2:0.25,3:0.6,8:0.15`; unlisted degrees carry zero mass.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::binomial;

/// Tolerance on the simplex constraint.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over repetition degrees `0..=q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DegreeDistribution {
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// Checks a raw probability vector. Never renormalizes.
    pub fn validate(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyVector);
        }
        if raw.len() < 2 {
            return Err(Error::MaxDegreeTooSmall(raw.len()));
        }
        for (degree, &value) in raw.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeEntry { degree, value });
            }
            if value > 1.0 {
                return Err(Error::EntryAboveOne { degree, value });
            }
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::SumNotOne(sum));
        }
        Ok(Self { probs: raw })
    }

    /// All mass on a single degree, padded to `q = max(degree, 1)`.
    pub fn point_mass(degree: usize) -> Self {
        let mut probs = vec![0.0; degree.max(1) + 1];
        probs[degree] = 1.0;
        Self { probs }
    }

    /// Builds a distribution from `(degree, prob)` pairs; unlisted degrees are zero.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let q = pairs.iter().map(|&(d, _)| d).max().unwrap_or(0).max(1);
        let mut probs = vec![0.0; q + 1];
        for &(degree, p) in pairs {
            probs[degree] += p;
        }
        Self::validate(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Maximum degree `q`.
    pub fn max_degree(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability of degree `l`; zero beyond `q`.
    pub fn prob(&self, degree: usize) -> f64 {
        self.probs.get(degree).copied().unwrap_or(0.0)
    }

    /// Largest degree carrying non-zero mass.
    pub fn max_supported_degree(&self) -> usize {
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// Degrees with non-zero mass, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(l, _)| l)
    }

    /// Evaluates the generating polynomial `sum_l probs[l] x^l` for `x` in `[0, 1]`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::DomainError(x));
        }
        Ok(horner(&self.probs, x))
    }

    pub fn mean_degree(&self) -> f64 {
        self.probs.iter().enumerate().map(|(l, &p)| l as f64 * p).sum()
    }

    /// Edge-perspective distribution: entry `l - 1` is `l probs[l] / mean_degree`.
    pub fn edge_perspective(&self) -> Result<Vec<f64>> {
        let mean = self.mean_degree();
        if mean <= 0.0 {
            return Err(Error::ZeroMeanDegree);
        }
        Ok(self
            .probs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, &p)| l as f64 * p / mean)
            .collect())
    }

    /// Degree distribution observed by the receiver after independent per-copy erasures.
    ///
    /// `induced[l] = sum_{k >= l} C(k, l) eps^(k - l) (1 - eps)^l probs[k]`.
    pub fn induce(&self, channel: ChannelModel) -> Self {
        let eps = channel.epsilon();
        if eps == 0.0 {
            return self.clone();
        }
        let q = self.max_degree();
        let mut induced = vec![0.0; q + 1];
        for (k, &pk) in self.probs.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for (l, slot) in induced.iter_mut().enumerate().take(k + 1) {
                *slot += binomial(k, l) * eps.powi((k - l) as i32) * (1.0 - eps).powi(l as i32) * pk;
            }
        }
        Self { probs: induced }
    }
}

/// Evaluates `sum_i coeffs[i] x^i`.
pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl TryFrom<Vec<f64>> for DegreeDistribution {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        Self::validate(raw)
    }
}

impl From<DegreeDistribution> for Vec<f64> {
    fn from(d: DegreeDistribution) -> Self {
        d.probs
    }
}

impl FromStr for DegreeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (degree, prob) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected degree:prob, got {item:?}")))?;
            let degree: usize = degree
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad degree {degree:?}")))?;
            let prob: f64 = prob
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad probability {prob:?}")))?;
            if pairs.iter().any(|&(d, _)| d == degree) {
                return Err(Error::Parse(format!("degree {degree} listed twice")));
            }
            pairs.push((degree, prob));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyVector);
        }
        Self::from_pairs(&pairs)
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (l, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{l}:{p}")?;
            first = false;
        }
        Ok(())
    }
}

/// Packet erasure channel: each transmitted copy is lost independently with probability `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    epsilon: f64,
}

impl ChannelModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::DomainError(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn erasure_free() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn liva() -> DegreeDistribution {
        DegreeDistribution::validate(vec![0.0, 0.0, 0.25, 0.6, 0.0, 0.0, 0.0, 0.0, 0.15]).unwrap()
    }

    #[test]
    fn validate_accepts_liva() {
        let d = liva();
        assert_eq!(d.max_degree(), 8);
    }

    #[test]
    fn validate_boundaries() {
        assert_eq!(DegreeDistribution::validate(vec![]), Err(Error::EmptyVector));
        assert_eq!(DegreeDistribution::validate(vec![1.0]), Err(Error::MaxDegreeTooSmall(1)));
        assert!(DegreeDistribution::validate(vec![1.0, 0.0]).is_ok());
        assert!(matches!(DegreeDistribution::validate(vec![0.5, 0.4]), Err(Error::SumNotOne(_))));
        assert!(matches!(
            DegreeDistribution::validate(vec![-0.1, 1.1]),
            Err(Error::NegativeEntry { degree: 0, .. })
        ));
        assert!(matches!(
            DegreeDistribution::validate(vec![f64::NAN, 1.0]),
            Err(Error::NegativeEntry { .. })
        ));
    }

    #[test]
    fn induce_liva_floor() {
        let induced = liva().induce(ChannelModel::new(0.03).unwrap());
        // 0.25 * 0.03^2 + 0.6 * 0.03^3 + 0.15 * 0.03^8
        let expected = 0.25 * 0.0009 + 0.6 * 0.000027 + 0.15 * 0.03f64.powi(8);
        assert!((induced.prob(0) - expected).abs() < 1e-15);
        // printed to two significant digits as 2.4e-4
        assert_eq!(format!("{:.1e}", induced.prob(0)), "2.4e-4");
    }

    #[test]
    fn induce_identity_and_binomial() {
        let d = liva();
        assert_eq!(d.induce(ChannelModel::erasure_free()), d);
        let pure2 = DegreeDistribution::point_mass(2);
        let half = pure2.induce(ChannelModel::new(0.5).unwrap());
        for (a, b) in half.probs().iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn induce_total_erasure_is_point_mass_at_zero() {
        let induced = liva().induce(ChannelModel::new(1.0).unwrap());
        assert_eq!(induced.prob(0), 1.0);
        assert!(induced.probs()[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn evaluate_examples() {
        let d = liva();
        assert!((d.evaluate(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(d.evaluate(0.0).unwrap(), 0.0);
        assert_eq!(format!("{:.1e}", d.evaluate(0.03).unwrap()), "2.4e-4");
        assert_eq!(d.evaluate(1.5), Err(Error::DomainError(1.5)));
        assert_eq!(d.evaluate(-0.1), Err(Error::DomainError(-0.1)));
    }

    #[test]
    fn edge_perspective_examples() {
        let pure2 = DegreeDistribution::point_mass(2).edge_perspective().unwrap();
        assert_eq!(pure2, vec![0.0, 1.0]);
        let mixed = DegreeDistribution::validate(vec![0.0, 0.5, 0.5]).unwrap().edge_perspective().unwrap();
        assert!((mixed[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((mixed[1] - 2.0 / 3.0).abs() < 1e-15);
        let e = liva().edge_perspective().unwrap();
        assert!((e[2] - 1.8 / 3.5).abs() < 1e-15);
        assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(
            DegreeDistribution::point_mass(0).edge_perspective(),
            Err(Error::ZeroMeanDegree)
        );
    }

    #[test]
    fn mean_degree_examples() {
        assert_eq!(DegreeDistribution::point_mass(2).mean_degree(), 2.0);
        assert!((liva().mean_degree() - 3.5).abs() < 1e-15);
        assert_eq!(DegreeDistribution::validate(vec![1.0, 0.0]).unwrap().mean_degree(), 0.0);
    }

    #[test]
    fn text_format() {
        let d: DegreeDistribution = "2:0.25,3:0.6,8:0.15".parse().unwrap();
        assert_eq!(d, liva());
        assert_eq!(d.to_string(), "2:0.25,3:0.6,8:0.15");
        assert!(matches!("2:0.5".parse::<DegreeDistribution>(), Err(Error::SumNotOne(_))));
        assert!(matches!("2=1".parse::<DegreeDistribution>(), Err(Error::Parse(_))));
        assert!(matches!("2:1,2:0".parse::<DegreeDistribution>(), Err(Error::Parse(_))));
        assert_eq!("".parse::<DegreeDistribution>(), Err(Error::EmptyVector));
    }

    #[test]
    fn channel_domain() {
        assert!(ChannelModel::new(1.0).is_ok());
        assert!(ChannelModel::new(-0.01).is_err());
        assert!(ChannelModel::new(1.01).is_err());
    }

    fn arb_distribution() -> impl Strategy<Value = DegreeDistribution> {
        prop::collection::vec(0.0f64..1.0, 2..10).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| {
                let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
                let tail: f64 = probs[1..].iter().sum();
                probs[0] = 1.0 - tail;
                DegreeDistribution::validate(probs).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn induced_is_a_distribution(d in arb_distribution(), eps in 0.0f64..=1.0) {
            let induced = d.induce(ChannelModel::new(eps).unwrap());
            prop_assert_eq!(induced.max_degree(), d.max_degree());
            prop_assert!((induced.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((induced.evaluate(1.0).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((induced.prob(0) - d.evaluate(eps).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn induced_zero_mass_monotone(d in arb_distribution(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let p_lo = d.induce(ChannelModel::new(lo).unwrap()).prob(0);
            let p_hi = d.induce(ChannelModel::new(hi).unwrap()).prob(0);
            prop_assert!(p_lo <= p_hi + 1e-15);
        }
    }
}
