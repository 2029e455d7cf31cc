//! Asymptotic decoder analysis for frames with `n -> inf` at fixed load `g`.
//!
//! Slot degrees are Poisson with mean `g * mean_degree`. Writing `q` for the
//! probability that a user-to-slot edge is still unknown and `p` for the
//! probability that a slot-to-user edge is still unknown:
//!
//! ```text
//! p <- 1 - exp(-g * mean_degree * q)
//! q <- sum_l (l lambda_l / mean_degree) p^(l-1)
//! ```
//!
//! starting from `q = p = 1`. Degree-0 and degree-1 users are rejected: the
//! recursion does not describe how the peeling decoder treats them.

use serde::{Deserialize, Serialize};

use crate::distributions::{horner, DegreeDistribution};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Bisection stops once the bracket is this narrow.
pub const BISECTION_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    /// Residual user-to-slot erasure probability.
    pub fixed_point_q: f64,
    /// `sum_l lambda_l p^l` at exit: probability that no slot reveals a user.
    pub unresolved_fraction: f64,
    pub converged: bool,
    pub iterations: usize,
}

struct Recursion {
    edge: Vec<f64>,
    mean: f64,
}

impl Recursion {
    fn new(dist: &DegreeDistribution) -> Result<Self> {
        let low = dist.prob(0) + dist.prob(1);
        if low > 0.0 {
            return Err(Error::DegreeOneUnsupported(low));
        }
        Ok(Self { edge: dist.edge_perspective()?, mean: dist.mean_degree() })
    }
}

fn run(rec: &Recursion, dist: &DegreeDistribution, g: f64, tol: f64, max_iter: usize, mut trace: impl FnMut(f64)) -> DeResult {
    let mut q = 1.0;
    let mut p = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        p = 1.0 - (-g * rec.mean * q).exp();
        let next = horner(&rec.edge, p);
        trace(next);
        let delta = (q - next).abs();
        q = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let unresolved_fraction = horner(dist.probs(), p).clamp(0.0, 1.0);
    DeResult { fixed_point_q: q.clamp(0.0, 1.0), unresolved_fraction, converged, iterations }
}

/// Runs the recursion at load `g`.
pub fn de_fixed_point(dist: &DegreeDistribution, g: f64, tol: f64, max_iter: usize) -> Result<DeResult> {
    if g.is_nan() || g <= 0.0 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!("density evolution needs g > 0 and tol > 0 (g={g}, tol={tol})")));
    }
    let rec = Recursion::new(dist)?;
    Ok(run(&rec, dist, g, tol, max_iter, |_| {}))
}

/// Sequence of `q` values produced by the recursion; used to check monotonicity.
pub fn de_trajectory(dist: &DegreeDistribution, g: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let rec = Recursion::new(dist)?;
    let mut qs = vec![1.0];
    run(&rec, dist, g, tol, max_iter, |q| qs.push(q));
    Ok(qs)
}

/// Largest load in `[0, 1]` at which the unresolved fraction stays below `tol`, by bisection.
pub fn threshold(dist: &DegreeDistribution, tol: f64) -> Result<f64> {
    let rec = Recursion::new(dist)?;
    let below = |g: f64| run(&rec, dist, g, tol, DEFAULT_MAX_ITER, |_| {}).unresolved_fraction < tol;
    let (mut lo, mut hi) = (0.0, 1.0);
    if below(hi) {
        return Ok(hi);
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ChannelModel;

    fn pure(d: usize) -> DegreeDistribution {
        DegreeDistribution::point_mass(d)
    }

    #[test]
    fn pure_degree_two_regimes() {
        let below = de_fixed_point(&pure(2), 0.4, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(below.converged);
        assert!(below.unresolved_fraction < DEFAULT_TOL);
        let above = de_fixed_point(&pure(2), 0.6, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(above.converged);
        // p = 1 - exp(-1.2 p) has a root near 0.314
        assert!(above.unresolved_fraction > 0.05, "{above:?}");
    }

    #[test]
    fn vanishing_load() {
        let r = de_fixed_point(&"2:0.3,3:0.7".parse().unwrap(), 1e-6, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(r.unresolved_fraction < 1e-12);
    }

    #[test]
    fn thresholds() {
        let t2 = threshold(&pure(2), DEFAULT_TOL).unwrap();
        assert!((t2 - 0.5).abs() <= 0.005, "{t2}");
        let t3 = threshold(&pure(3), DEFAULT_TOL).unwrap();
        assert!(t3 > 0.80 && t3 < 0.84, "{t3}");
        let t50 = threshold(&pure(50), DEFAULT_TOL).unwrap();
        assert!(t50 <= 1.0);
    }

    #[test]
    fn rejects_low_degrees() {
        let d: DegreeDistribution = "1:0.1,2:0.9".parse().unwrap();
        assert!(matches!(de_fixed_point(&d, 0.3, DEFAULT_TOL, 10), Err(Error::DegreeOneUnsupported(_))));
        assert!(matches!(threshold(&d, DEFAULT_TOL), Err(Error::DegreeOneUnsupported(_))));
        let induced = pure(3).induce(ChannelModel::new(0.01).unwrap());
        assert!(matches!(threshold(&induced, DEFAULT_TOL), Err(Error::DegreeOneUnsupported(_))));
        assert!(de_fixed_point(&pure(2), 0.0, DEFAULT_TOL, 10).is_err());
    }

    #[test]
    fn unresolved_fraction_grows_with_load() {
        let d: DegreeDistribution = "2:0.25,3:0.6,8:0.15".parse().unwrap();
        let mut prev = 0.0;
        for i in 1..=40 {
            let g = i as f64 * 0.025;
            let r = de_fixed_point(&d, g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(r.unresolved_fraction >= prev - 1e-12, "g={g}");
            prev = r.unresolved_fraction;
        }
    }

    #[test]
    fn trajectory_is_non_increasing() {
        for (d, g) in [(pure(2), 0.45), (pure(3), 0.9), ("2:0.5,3:0.3,6:0.2".parse().unwrap(), 0.7)] {
            let qs = de_trajectory(&d, g, DEFAULT_TOL, 5000).unwrap();
            assert!(qs.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }
}
