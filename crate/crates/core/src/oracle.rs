//! Exact ground truth by exhaustive enumeration of slot assignments.
//!
//! Every user independently picks one of the `C(n, l)` slot subsets of its
//! degree, so each joint assignment is equally likely. Counting assignments
//! gives exact rational probabilities. Shape matching here uses its own
//! canonical forms and does not go through the residual classifier.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::decoder::peel;
use crate::error::{Error, Result};
use crate::frame::FrameGraph;
use crate::math::binomial_u128;
use crate::stopping_sets::{StoppingSetClass, StoppingSetId, CATALOG};

/// Largest number of joint assignments the oracle will walk.
pub const ENUMERATION_LIMIT: u128 = 100_000_000;

/// All `l`-subsets of `0..n` as bitmasks, in lexicographic order.
fn subsets(n: usize, l: usize) -> Vec<u64> {
    fn rec(start: usize, n: usize, left: usize, acc: u64, out: &mut Vec<u64>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for s in start..=(n - left) {
            rec(s + 1, n, left - 1, acc | (1 << s), out);
        }
    }
    let mut out = Vec::new();
    if l <= n {
        rec(0, n, l, 0, &mut out);
    }
    out
}

fn assignment_count(degrees: &[usize], n: usize) -> Result<u128> {
    if n > 64 {
        return Err(Error::EnumerationTooLarge(u128::MAX));
    }
    let mut total: u128 = 1;
    for &l in degrees {
        total = total.saturating_mul(binomial_u128(n as u64, l as u64));
    }
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge(total));
    }
    Ok(total)
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Canonical form of a user multiset over `k` occupied slots: the lexicographically
/// smallest sorted list of relabeled user masks over all slot relabelings.
fn canonical(users: &[u64]) -> Vec<u64> {
    let union = users.iter().fold(0u64, |a, &b| a | b);
    let slots: Vec<usize> = (0..64).filter(|&s| union >> s & 1 == 1).collect();
    let mut best: Option<Vec<u64>> = None;
    for perm in permutations(&(0..slots.len()).collect::<Vec<_>>()) {
        let mut relabeled: Vec<u64> = users
            .iter()
            .map(|&mask| {
                slots.iter().enumerate().filter(|&(_, &s)| mask >> s & 1 == 1).fold(0u64, |acc, (i, _)| acc | 1 << perm[i])
            })
            .collect();
        relabeled.sort_unstable();
        if best.as_ref().is_none_or(|b| relabeled < *b) {
            best = Some(relabeled);
        }
    }
    best.unwrap_or_default()
}

fn template_masks(class: &StoppingSetClass) -> Vec<u64> {
    class.topology.iter().map(|u| u.iter().fold(0u64, |acc, &s| acc | 1 << s)).collect()
}

struct Shape {
    id: StoppingSetId,
    slots: u32,
    users: usize,
    canon: Vec<u64>,
}

fn catalog_shapes() -> Vec<Shape> {
    CATALOG
        .iter()
        .map(|c| {
            let masks = template_masks(c);
            Shape { id: c.id, slots: masks.iter().fold(0u64, |a, &b| a | b).count_ones(), users: masks.len(), canon: canonical(&masks) }
        })
        .collect()
}

fn match_shape(shapes: &[Shape], users: &[u64]) -> Option<StoppingSetId> {
    let occupied = users.iter().fold(0u64, |a, &b| a | b).count_ones();
    let candidates: Vec<&Shape> = shapes.iter().filter(|s| s.users == users.len() && s.slots == occupied).collect();
    if candidates.is_empty() {
        return None;
    }
    let canon = canonical(users);
    candidates.into_iter().find(|s| s.canon == canon).map(|s| s.id)
}

fn ratio(count: u128, total: u128) -> BigRational {
    BigRational::new(BigInt::from(count), BigInt::from(total))
}

/// Exact probability that the class's users, placed uniformly and independently
/// in `n` slots, form the class topology.
pub fn exact_beta(id: StoppingSetId, n: usize) -> Result<BigRational> {
    let class = id.class();
    let degrees = class.degrees();
    let total = assignment_count(&degrees, n)?;
    let target = canonical(&template_masks(class));
    let limit = target.iter().fold(0u64, |a, &b| a | b).count_ones();
    let tables: Vec<Vec<u64>> = degrees.iter().map(|&l| subsets(n, l)).collect();

    fn walk(tables: &[Vec<u64>], depth: usize, union: u64, chosen: &mut Vec<u64>, limit: u32, target: &[u64], hits: &mut u128) {
        if depth == tables.len() {
            if union.count_ones() == limit && canonical(chosen) == target {
                *hits += 1;
            }
            return;
        }
        for &mask in &tables[depth] {
            let u = union | mask;
            if u.count_ones() > limit {
                continue;
            }
            chosen.push(mask);
            walk(tables, depth + 1, u, chosen, limit, target, hits);
            chosen.pop();
        }
    }
    let mut hits = 0u128;
    walk(&tables, 0, 0, &mut Vec::new(), limit, &target, &mut hits);
    Ok(ratio(hits, total))
}

/// The printed placement probability as an exact rational.
pub fn printed_beta(id: StoppingSetId, n: usize) -> Result<BigRational> {
    let (num, den) = id.class().beta_fraction(n)?;
    Ok(ratio(num, den))
}

/// Exact outcome distribution of decoding a fixed user multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProbabilities {
    pub n: usize,
    pub degrees: Vec<usize>,
    pub assignments: u128,
    /// Probability of each number of unresolved users.
    pub unresolved: BTreeMap<usize, BigRational>,
    /// Probability of each residual shape: `"none"`, a catalog id, or `"Other"`.
    pub residual: BTreeMap<String, BigRational>,
}

impl EventProbabilities {
    pub fn residual_probability(&self, label: &str) -> BigRational {
        self.residual.get(label).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Expected number of unresolved users.
    pub fn expected_unresolved(&self) -> BigRational {
        self.unresolved.iter().fold(BigRational::zero(), |acc, (&k, p)| acc + p * BigInt::from(k))
    }

    pub fn to_json(&self) -> Value {
        let fmt = |m: &BTreeMap<String, BigRational>| -> Value {
            m.iter()
                .map(|(k, p)| (k.clone(), json!({ "exact": p.to_string(), "value": p.to_f64() })))
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        let unresolved: BTreeMap<String, BigRational> = self.unresolved.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        json!({
            "n": self.n,
            "degrees": self.degrees,
            "assignments": self.assignments.to_string(),
            "unresolved": fmt(&unresolved),
            "residual": fmt(&self.residual),
        })
    }
}

/// Decodes every joint slot assignment of users with the given degrees and tallies exact outcome probabilities.
pub fn exact_event_probabilities(degrees: &[usize], n: usize) -> Result<EventProbabilities> {
    let total = assignment_count(degrees, n)?;
    let tables: Vec<Vec<u64>> = degrees.iter().map(|&l| subsets(n, l)).collect();
    let shapes = catalog_shapes();
    let mut unresolved: BTreeMap<usize, u128> = BTreeMap::new();
    let mut residual: BTreeMap<String, u128> = BTreeMap::new();
    let mut index = vec![0usize; degrees.len()];
    loop {
        let masks: Vec<u64> = index.iter().zip(&tables).map(|(&i, t)| t[i]).collect();
        let users: Vec<Vec<usize>> = masks.iter().map(|&m| (0..n).filter(|&s| m >> s & 1 == 1).collect()).collect();
        let graph = FrameGraph::from_slot_sets(n, &users)?;
        let outcome = peel(&graph);
        *unresolved.entry(outcome.residual_users.len()).or_default() += 1;
        let label = if outcome.residual_users.is_empty() {
            "none".to_string()
        } else {
            let left: Vec<u64> = outcome.residual_users.iter().map(|&u| masks[u]).collect();
            match_shape(&shapes, &left).map_or_else(|| "Other".to_string(), |id| id.to_string())
        };
        *residual.entry(label).or_default() += 1;

        // odometer over subset indices
        let mut d = degrees.len();
        loop {
            if d == 0 {
                return Ok(EventProbabilities {
                    n,
                    degrees: degrees.to_vec(),
                    assignments: total,
                    unresolved: unresolved.into_iter().map(|(k, c)| (k, ratio(c, total))).collect(),
                    residual: residual.into_iter().map(|(k, c)| (k, ratio(c, total))).collect(),
                });
            }
            d -= 1;
            index[d] += 1;
            if index[d] < tables[d].len() {
                break;
            }
            index[d] = 0;
        }
    }
}
