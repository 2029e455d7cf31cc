//! Analytic error-floor prediction.
//!
//! The loss rate of a degree-`l` user seen by the receiver is approximated by
//! summing the occurrence estimates of the catalog stopping sets that contain
//! degree-`l` users, weighted by how many such users each set holds, and
//! dividing by the expected number of degree-`l` users in the frame.

use serde::{Deserialize, Serialize};

use crate::distributions::{ChannelModel, DegreeDistribution};
use crate::error::Result;
use crate::math::binomial;
use crate::stopping_sets::CATALOG;

/// Raw predictions above this are outside the low-load regime the approximation targets.
pub const VALIDITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlrFlag {
    Valid,
    /// Raw union-bound value exceeded [`VALIDITY_LIMIT`]; the reported value is clamped to `[0, 1]`.
    OutOfValidity,
    /// No users of this degree; reported as zero.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreePlr {
    pub values: Vec<f64>,
    pub flags: Vec<PlrFlag>,
}

/// Per-degree loss rates `p_l` keyed by received degree.
pub fn plr_per_degree(m: usize, n: usize, induced: &DegreeDistribution) -> Result<DegreePlr> {
    let q = induced.max_degree();
    let mut raw = vec![0.0; q + 1];
    for class in &CATALOG {
        let rho = class.rho(m, n, induced)?;
        if rho == 0.0 {
            continue;
        }
        for (l, &count) in class.profile.iter().enumerate() {
            if l <= q {
                raw[l] += count as f64 * rho;
            }
        }
    }
    let mut values = vec![0.0; q + 1];
    let mut flags = vec![PlrFlag::Valid; q + 1];
    values[0] = 1.0;
    for l in 1..=q {
        let lambda = induced.prob(l);
        if lambda == 0.0 || m == 0 {
            flags[l] = PlrFlag::NotApplicable;
            continue;
        }
        let p = raw[l] / (m as f64 * lambda);
        if p > VALIDITY_LIMIT {
            flags[l] = PlrFlag::OutOfValidity;
        }
        values[l] = p.clamp(0.0, 1.0);
    }
    Ok(DegreePlr { values, flags })
}

/// Loss rate per original degree: `sum_k p_k C(l, k) eps^(l-k) (1-eps)^k`, zero where the original distribution has no mass.
pub fn plr_user_perspective(p: &[f64], original: &DegreeDistribution, channel: ChannelModel) -> Vec<f64> {
    let eps = channel.epsilon();
    (0..=original.max_degree())
        .map(|l| {
            if original.prob(l) == 0.0 {
                return 0.0;
            }
            (0..=l)
                .map(|k| {
                    p.get(k).copied().unwrap_or(0.0) * binomial(l, k) * eps.powi((l - k) as i32) * (1.0 - eps).powi(k as i32)
                })
                .sum()
        })
        .collect()
}

/// Average loss rate `sum_l lambda_l p_l`.
pub fn average_plr(p: &[f64], dist: &DegreeDistribution) -> f64 {
    p.iter().enumerate().map(|(l, &pl)| dist.prob(l) * pl).sum()
}

/// Lower bound on the average loss rate: the fraction of users with every copy erased.
pub fn floor_lower_bound(original: &DegreeDistribution, channel: ChannelModel) -> f64 {
    original.evaluate(channel.epsilon()).expect("epsilon is validated to [0, 1]")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlrReport {
    pub source: Source,
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub distribution: DegreeDistribution,
    /// `p_l` by received degree.
    pub per_degree: Vec<f64>,
    pub flags: Vec<PlrFlag>,
    /// `p~_l` by original degree.
    pub user_perspective: Vec<f64>,
    pub average: f64,
    /// `t = g (1 - average)`.
    pub throughput: f64,
    pub floor_lower_bound: f64,
}

impl PlrReport {
    pub fn analytic(m: usize, n: usize, original: &DegreeDistribution, channel: ChannelModel) -> Result<Self> {
        let induced = original.induce(channel);
        let DegreePlr { values, flags } = plr_per_degree(m, n, &induced)?;
        let user_perspective = plr_user_perspective(&values, original, channel);
        let average = average_plr(&values, &induced);
        Ok(Self {
            source: Source::Analytic,
            m,
            n,
            epsilon: channel.epsilon(),
            distribution: original.clone(),
            throughput: m as f64 / n as f64 * (1.0 - average),
            floor_lower_bound: floor_lower_bound(original, channel),
            per_degree: values,
            flags,
            user_perspective,
            average,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn liva() -> DegreeDistribution {
        "2:0.25,3:0.6,8:0.15".parse().unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn liva_low_load_values() {
        let p = plr_per_degree(40, 200, &liva()).unwrap();
        // (2 rho(S5) + 3 rho(S6) + rho(S7)) / (40 * 0.25)
        assert!(rel(p.values[2], 5.190e-4) < 1e-3, "{}", p.values[2]);
        // (2 rho(S7) + 2 rho(S8)) / (40 * 0.6); S6 holds no degree-3 users
        assert!(rel(p.values[3], 2.2818e-5) < 1e-3, "{}", p.values[3]);
        assert_eq!(p.values[8], 0.0);
        assert_eq!(p.flags[8], PlrFlag::Valid);
        assert_eq!(p.flags[4], PlrFlag::NotApplicable);
        assert!(rel(average_plr(&p.values, &liva()), 1.4344e-4) < 1e-3);
    }

    #[test]
    fn degree_zero_always_lost() {
        let induced = liva().induce(ChannelModel::new(0.1).unwrap());
        let p = plr_per_degree(40, 200, &induced).unwrap();
        assert_eq!(p.values[0], 1.0);
        assert!(p.values[1] > 0.0);
    }

    #[test]
    fn high_load_is_clamped_and_flagged() {
        let p = plr_per_degree(2000, 10, &"2:1".parse().unwrap()).unwrap();
        assert_eq!(p.values[2], 1.0);
        assert_eq!(p.flags[2], PlrFlag::OutOfValidity);
    }

    #[test]
    fn user_perspective_examples() {
        let original = liva();
        let p = plr_per_degree(40, 200, &original).unwrap().values;
        let up = plr_user_perspective(&p, &original, ChannelModel::erasure_free());
        for l in original.support() {
            assert_eq!(up[l], p[l]);
        }
        assert_eq!(up[5], 0.0);
        let d: DegreeDistribution = "2:1".parse().unwrap();
        let up = plr_user_perspective(&[1.0, 0.5, 0.1], &d, ChannelModel::new(0.5).unwrap());
        assert!((up[2] - 0.525).abs() < 1e-15);
    }

    #[test]
    fn average_examples() {
        let d = liva();
        assert!((average_plr(&[1.0; 9], &d) - 1.0).abs() < 1e-15);
        let half = DegreeDistribution::validate(vec![0.5, 0.5]).unwrap();
        assert_eq!(average_plr(&[1.0, 0.0], &half), 0.5);
    }

    #[test]
    fn floor_bound_examples() {
        let d = liva();
        assert_eq!(format!("{:.1e}", floor_lower_bound(&d, ChannelModel::new(0.03).unwrap())), "2.4e-4");
        assert_eq!(floor_lower_bound(&d, ChannelModel::erasure_free()), 0.0);
        assert!((floor_lower_bound(&d, ChannelModel::new(1.0).unwrap()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_is_consistent() {
        let r = PlrReport::analytic(40, 200, &liva(), ChannelModel::new(0.03).unwrap()).unwrap();
        let induced = liva().induce(ChannelModel::new(0.03).unwrap());
        assert!((r.average - average_plr(&r.per_degree, &induced)).abs() < 1e-12);
        assert!(r.average >= r.floor_lower_bound);
        assert!(r.per_degree.iter().chain(&r.user_perspective).all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn decreasing_in_frame_length_at_fixed_load() {
        for g in [0.1, 0.2, 0.3] {
            let avg: Vec<f64> = [100usize, 200, 400]
                .iter()
                .map(|&n| {
                    let m = (g * n as f64).round() as usize;
                    average_plr(&plr_per_degree(m, n, &liva()).unwrap().values, &liva())
                })
                .collect();
            assert!(avg[0] > avg[1] && avg[1] > avg[2], "g={g}: {avg:?}");
        }
    }

    #[test]
    fn degree_one_terms_scale_inverse_in_n() {
        // At fixed m, the degree-1 loss is dominated by the 1/n pair-collision term.
        let d: DegreeDistribution = "1:0.5,2:0.5".parse().unwrap();
        let p1 = |n| plr_per_degree(20, n, &d).unwrap().values[1];
        let ratio = p1(10_000) / p1(20_000);
        assert!((ratio - 2.0).abs() < 0.01, "{ratio}");
    }

    proptest! {
        #[test]
        fn both_averages_agree(
            w in prop::collection::vec(0.01f64..1.0, 4),
            eps in 0.0f64..0.5,
            m in 4usize..80,
        ) {
            let s: f64 = w.iter().sum();
            let mut probs = vec![0.0];
            probs.extend(w.iter().map(|x| x / s));
            let tail: f64 = probs[2..].iter().sum();
            probs[1] = 1.0 - tail;
            let original = DegreeDistribution::validate(probs).unwrap();
            let channel = ChannelModel::new(eps).unwrap();
            let induced = original.induce(channel);
            let p = plr_per_degree(m, 100, &induced).unwrap().values;
            let up = plr_user_perspective(&p, &original, channel);
            prop_assert!((average_plr(&up, &original) - average_plr(&p, &induced)).abs() < 1e-12);
            prop_assert!(average_plr(&p, &induced) >= floor_lower_bound(&original, channel) - 1e-15);
        }
    }
}
