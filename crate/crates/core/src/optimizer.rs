//! Degree-distribution search trading asymptotic threshold against the analytic error floor.
//!
//! The objective is `J = w_threshold * threshold - w_floor * average_plr`, where
//! the threshold comes from density evolution on the user-side distribution and
//! the average loss rate is the analytic prediction at load `g_target` in a
//! frame of `n` slots over the erasure channel. Higher is better.
//!
//! Search: a fifth of the budget goes to uniform random points of the simplex
//! over the allowed degrees, the rest to perturbations of the incumbent that
//! shrink geometrically.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_evolution::{threshold, DEFAULT_TOL};
use crate::distributions::{ChannelModel, DegreeDistribution};
use crate::error::{Error, Result};
use crate::predictor::{average_plr, plr_per_degree};

pub const DEFAULT_W_THRESHOLD: f64 = 1.0;
pub const DEFAULT_W_FLOOR: f64 = 1000.0;

const REFINE_BATCH: usize = 32;
const STEP_START: f64 = 0.5;
const STEP_END: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    /// Allowed degrees, ascending, all at least 2.
    pub support: Vec<usize>,
    pub w_threshold: f64,
    pub w_floor: f64,
    pub g_target: f64,
    pub n: usize,
    pub epsilon: f64,
}

impl ObjectiveSpec {
    pub fn new(mut support: Vec<usize>, w_threshold: f64, w_floor: f64, g_target: f64, n: usize, epsilon: f64) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::Config("empty support".into()));
        }
        if support[0] < 2 {
            return Err(Error::Config("support degrees must be at least 2".into()));
        }
        if !(w_threshold >= 0.0 && w_floor >= 0.0 && w_threshold + w_floor > 0.0) {
            return Err(Error::Config("weights must be non-negative and not both zero".into()));
        }
        if g_target.is_nan() || g_target <= 0.0 {
            return Err(Error::Config(format!("g_target must be positive (got {g_target})")));
        }
        let q = *support.last().unwrap();
        if n < q.max(crate::stopping_sets::MIN_SLOTS) {
            return Err(Error::SlotCountTooSmall { n, q });
        }
        ChannelModel::new(epsilon)?;
        Ok(Self { support, w_threshold, w_floor, g_target, n, epsilon })
    }

    pub fn max_degree(&self) -> usize {
        *self.support.last().unwrap()
    }

    /// Users in the frame used for the floor term.
    pub fn users(&self) -> usize {
        ((self.g_target * self.n as f64).round() as usize).max(1)
    }

    fn distribution(&self, weights: &[f64]) -> DegreeDistribution {
        let mut probs = vec![0.0; self.max_degree() + 1];
        for (&d, &w) in self.support.iter().zip(weights) {
            probs[d] = w;
        }
        DegreeDistribution::validate(probs).expect("weights lie on the simplex")
    }
}

/// Analytic average loss rate at the objective's operating point.
pub fn analytic_floor(dist: &DegreeDistribution, spec: &ObjectiveSpec) -> Result<f64> {
    let induced = dist.induce(ChannelModel::new(spec.epsilon)?);
    let p = plr_per_degree(spec.users(), spec.n, &induced)?;
    Ok(average_plr(&p.values, &induced))
}

pub fn objective(dist: &DegreeDistribution, spec: &ObjectiveSpec) -> Result<f64> {
    let mut j = 0.0;
    if spec.w_threshold > 0.0 {
        j += spec.w_threshold * threshold(dist, DEFAULT_TOL)?;
    }
    if spec.w_floor > 0.0 {
        j -= spec.w_floor * analytic_floor(dist, spec)?;
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub distribution: String,
    pub weights: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: DegreeDistribution,
    pub best_objective: f64,
    /// Every evaluated candidate, in evaluation order.
    pub trace: Vec<Candidate>,
}

/// Uniform point of the simplex (Dirichlet with unit concentration).
fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    normalize(&mut w);
    w
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    } else {
        let k = w.len() as f64;
        w.iter_mut().for_each(|x| *x = 1.0 / k);
    }
    // push rounding residue into the largest entry so the sum is 1 to machine precision
    let residue = 1.0 - w.iter().sum::<f64>();
    if let Some(i) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        w[i] = (w[i] + residue).max(0.0);
    }
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.objective.total_cmp(&b.objective) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.weights.iter().zip(&b.weights).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(Ordering::Less),
    }
}

fn evaluate_batch(spec: &ObjectiveSpec, batch: Vec<Vec<f64>>) -> Result<Vec<Candidate>> {
    batch
        .into_par_iter()
        .map(|weights| {
            let dist = spec.distribution(&weights);
            let objective = objective(&dist, spec)?;
            Ok(Candidate { distribution: dist.to_string(), weights, objective })
        })
        .collect()
}

/// Searches the simplex over `spec.support` with `budget` objective evaluations.
pub fn optimize<R: Rng + ?Sized>(spec: &ObjectiveSpec, budget: usize, rng: &mut R) -> Result<OptimizeResult> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let k = spec.support.len();
    let restarts = (budget / 5).max(1);
    let refinements = budget - restarts;

    let seeds: Vec<Vec<f64>> = (0..restarts).map(|_| dirichlet(rng, k)).collect();
    let mut trace = evaluate_batch(spec, seeds)?;
    let mut best = trace[0].clone();
    for c in &trace[1..] {
        if better(c, &best) {
            best = c.clone();
        }
    }

    let mut done = 0;
    while done < refinements {
        let size = REFINE_BATCH.min(refinements - done);
        let batch: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                let t = (done + i) as f64 / refinements as f64;
                let step = STEP_START * (STEP_END / STEP_START).powf(t);
                let target = dirichlet(rng, k);
                let mut w: Vec<f64> = best.weights.iter().zip(&target).map(|(b, u)| (1.0 - step) * b + step * u).collect();
                normalize(&mut w);
                w
            })
            .collect();
        let evaluated = evaluate_batch(spec, batch)?;
        for c in &evaluated {
            if better(c, &best) {
                best = c.clone();
            }
        }
        trace.extend(evaluated);
        done += size;
    }

    Ok(OptimizeResult { best: spec.distribution(&best.weights), best_objective: best.objective, trace })
}
