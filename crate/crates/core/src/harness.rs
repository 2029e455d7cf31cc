//! Monte Carlo sweeps over channel load.
//!
//! Each sweep point draws `frames` independent frames, decodes them, and tallies
//! unresolved users per degree together with the classes of the residual
//! components. Frame `f` of point `i` always uses the random stream
//! `(seed, i, f)`, and chunk tallies are merged in chunk order, so output is
//! identical for any worker count.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::decoder::{peel, DegreeKeying};
use crate::distributions::{ChannelModel, DegreeDistribution};
use crate::error::{Error, Result};
use crate::frame::{FrameConfig, FrameSampler, SamplingMode};
use crate::predictor::{floor_lower_bound, PlrReport};
use crate::rng::StreamKey;
use crate::stopping_sets::{classify, components, ClassHistogram, MIN_SLOTS};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub const CSV_HEADER: &str = "g,m,n,frames,degree,plr_sim,ci95,plr_analytic,keying";

const CHUNK_FRAMES: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonInterval {
    /// Observed proportion.
    pub estimate: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval at 95% for `successes` out of `trials`.
pub fn confidence_interval(successes: u64, trials: u64) -> WilsonInterval {
    assert!(trials >= 1, "confidence interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half_width = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    WilsonInterval {
        estimate: p,
        half_width,
        lower: if successes == 0 { 0.0 } else { (center - half_width).max(0.0) },
        upper: if successes == trials { 1.0 } else { (center + half_width).min(1.0) },
    }
}

/// Parses `start:stop:step` or a comma-separated list of loads.
pub fn parse_loads(text: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> { s.trim().parse().map_err(|_| Error::Parse(format!("bad load {s:?}"))) };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(Error::Parse(format!("bad load range {text:?}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round away accumulated binary noise so 0.15 prints as 0.15
        Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
    } else if parts.len() == 1 {
        text.split(',').filter(|s| !s.trim().is_empty()).map(parse).collect()
    } else {
        Err(Error::Parse(format!("bad load grid {text:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub distribution: DegreeDistribution,
    pub n: usize,
    pub epsilon: f64,
    pub loads: Vec<f64>,
    pub frames: u64,
    pub seed: u64,
    pub keying: DegreeKeying,
    pub sampling_mode: SamplingMode,
    pub workers: usize,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
}

impl SweepPlan {
    pub fn new(distribution: DegreeDistribution, n: usize, epsilon: f64, loads: Vec<f64>, frames: u64, seed: u64) -> Self {
        Self {
            distribution,
            n,
            epsilon,
            loads,
            frames,
            seed,
            keying: DegreeKeying::Induced,
            sampling_mode: SamplingMode::Physical,
            workers: 1,
            out_csv: None,
            out_json: None,
        }
    }

    pub fn users_at(&self, g: f64) -> usize {
        (g * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let channel = ChannelModel::new(self.epsilon)?;
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.loads.is_empty() {
            return Err(Error::Config("empty load grid".into()));
        }
        if self.n < MIN_SLOTS {
            return Err(Error::SlotCountTooSmall { n: self.n, q: MIN_SLOTS });
        }
        for &g in &self.loads {
            if !(g > 0.0 && g <= 2.0) {
                return Err(Error::Config(format!("load {g} outside (0, 2]")));
            }
            if self.users_at(g) == 0 {
                return Err(Error::Config(format!("load {g} gives no users with n = {}", self.n)));
            }
        }
        FrameConfig::new(1, self.n, self.distribution.clone(), channel).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeRow {
    pub degree: usize,
    /// Users of this degree seen over all frames.
    pub users: u64,
    pub unresolved: u64,
    pub plr_sim: f64,
    pub ci95: f64,
    pub plr_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub g: f64,
    pub m: usize,
    pub n: usize,
    pub frames: u64,
    pub keying: DegreeKeying,
    pub degrees: Vec<DegreeRow>,
    pub total_users: u64,
    pub total_unresolved: u64,
    pub plr_sim_avg: f64,
    pub ci95_avg: f64,
    pub plr_analytic_avg: f64,
    pub floor_lower_bound: f64,
    pub histogram: ClassHistogram,
}

impl SweepRow {
    pub fn degree(&self, l: usize) -> Option<&DegreeRow> {
        self.degrees.iter().find(|r| r.degree == l)
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    users: Vec<u64>,
    unresolved: Vec<u64>,
    histogram: ClassHistogram,
}

impl Tally {
    fn new(q: usize) -> Self {
        Self { users: vec![0; q + 1], unresolved: vec![0; q + 1], histogram: ClassHistogram::default() }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.users.iter_mut().zip(&other.users) {
            *a += b;
        }
        for (a, b) in self.unresolved.iter_mut().zip(&other.unresolved) {
            *a += b;
        }
        self.histogram.merge(&other.histogram);
    }
}

fn run_chunk(sampler: &FrameSampler, key: &StreamKey, keying: DegreeKeying, q: usize, frames: std::ops::Range<u64>) -> Tally {
    let mut tally = Tally::new(q);
    for f in frames {
        let graph = sampler.sample(&mut key.stream(f));
        let outcome = peel(&graph);
        for u in 0..graph.user_count() {
            tally.users[keying.degree_of(&graph, u)] += 1;
        }
        for &u in &outcome.residual_users {
            tally.unresolved[keying.degree_of(&graph, u)] += 1;
        }
        for part in components(&outcome.residual) {
            tally.histogram.record(classify(&part));
        }
        tally.histogram.frames += 1;
    }
    tally
}

fn ratio_with_ci(unresolved: u64, users: u64) -> (f64, f64) {
    if users == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let ci = confidence_interval(unresolved, users);
        (ci.estimate, ci.half_width)
    }
}

/// Runs every point of the plan. Nothing is returned unless every point completes.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let channel = ChannelModel::new(plan.epsilon)?;
    let q = plan.distribution.max_degree();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let mut rows = Vec::with_capacity(plan.loads.len());
    for (point, &g) in plan.loads.iter().enumerate() {
        let m = plan.users_at(g);
        let config = FrameConfig::new(m, plan.n, plan.distribution.clone(), channel).with_mode(plan.sampling_mode);
        let sampler = FrameSampler::new(&config)?;
        let key = StreamKey::new(plan.seed, point as u64);
        let chunks = plan.frames.div_ceil(CHUNK_FRAMES);
        let partial: Vec<Tally> = pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let start = c * CHUNK_FRAMES;
                    let end = (start + CHUNK_FRAMES).min(plan.frames);
                    run_chunk(&sampler, &key, plan.keying, q, start..end)
                })
                .collect()
        });
        let mut tally = Tally::new(q);
        for t in &partial {
            tally.merge(t);
        }

        let report = PlrReport::analytic(m, plan.n, &plan.distribution, channel)?;
        let analytic = match plan.keying {
            DegreeKeying::Induced => &report.per_degree,
            DegreeKeying::Original => &report.user_perspective,
        };
        let degrees = (0..=q)
            .map(|l| {
                let (plr_sim, ci95) = ratio_with_ci(tally.unresolved[l], tally.users[l]);
                DegreeRow {
                    degree: l,
                    users: tally.users[l],
                    unresolved: tally.unresolved[l],
                    plr_sim,
                    ci95,
                    plr_analytic: analytic[l],
                }
            })
            .collect();
        let total_users: u64 = tally.users.iter().sum();
        let total_unresolved: u64 = tally.unresolved.iter().sum();
        let (plr_sim_avg, ci95_avg) = ratio_with_ci(total_unresolved, total_users);
        rows.push(SweepRow {
            g,
            m,
            n: plan.n,
            frames: plan.frames,
            keying: plan.keying,
            degrees,
            total_users,
            total_unresolved,
            plr_sim_avg,
            ci95_avg,
            plr_analytic_avg: report.average,
            floor_lower_bound: floor_lower_bound(&plan.distribution, channel),
            histogram: tally.histogram,
        });
    }
    Ok(rows)
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

/// Which degrees get a CSV row: those the keyed distribution can produce.
fn csv_degrees(plan: &SweepPlan) -> Vec<usize> {
    let dist = match plan.keying {
        DegreeKeying::Induced => plan.distribution.induce(ChannelModel::new(plan.epsilon).expect("validated")),
        DegreeKeying::Original => plan.distribution.clone(),
    };
    dist.support().collect()
}

pub fn to_csv(plan: &SweepPlan, rows: &[SweepRow]) -> String {
    let degrees = csv_degrees(plan);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let prefix = format!("{},{},{},{}", format_sig9(row.g), row.m, row.n, row.frames);
        for d in row.degrees.iter().filter(|d| degrees.contains(&d.degree)) {
            let _ = writeln!(
                out,
                "{prefix},{},{},{},{},{}",
                d.degree,
                format_sig9(d.plr_sim),
                format_sig9(d.ci95),
                format_sig9(d.plr_analytic),
                row.keying.as_str()
            );
        }
        let _ = writeln!(
            out,
            "{prefix},avg,{},{},{},{}",
            format_sig9(row.plr_sim_avg),
            format_sig9(row.ci95_avg),
            format_sig9(row.plr_analytic_avg),
            row.keying.as_str()
        );
    }
    out
}

pub fn to_json(rows: &[SweepRow]) -> Result<String> {
    serde_json::to_string_pretty(rows).map_err(|e| Error::Config(format!("json: {e}")))
}

/// Writes whichever outputs the plan names.
pub fn write_outputs(plan: &SweepPlan, rows: &[SweepRow]) -> std::io::Result<()> {
    if let Some(path) = &plan.out_csv {
        std::fs::write(path, to_csv(plan, rows))?;
    }
    if let Some(path) = &plan.out_json {
        let json = to_json(rows).map_err(std::io::Error::other)?;
        std::fs::write(path, json)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let zero = confidence_interval(0, 100);
        assert_eq!(zero.estimate, 0.0);
        assert!(zero.half_width > 0.0);
        assert_eq!(zero.lower, 0.0);
        let half = confidence_interval(50, 100);
        assert_eq!(half.estimate, 0.5);
        assert!((half.half_width - 0.097).abs() < 1e-3, "{}", half.half_width);
        let all = confidence_interval(100, 100);
        assert_eq!(all.estimate, 1.0);
        assert!((all.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_bounds_solve_the_score_equation() {
        // Endpoints are the roots of (p_hat - p)^2 = z^2 p (1 - p) / n.
        for (s, t) in [(3u64, 40u64), (17, 1000), (0, 7), (9, 9)] {
            let ci = confidence_interval(s, t);
            let p_hat = s as f64 / t as f64;
            for p in [ci.lower, ci.upper] {
                let lhs = (p_hat - p).powi(2);
                let rhs = Z95 * Z95 * p * (1.0 - p) / t as f64;
                assert!((lhs - rhs).abs() < 1e-12, "{s}/{t}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn load_grids() {
        assert_eq!(parse_loads("0.2,0.5").unwrap(), vec![0.2, 0.5]);
        let g = parse_loads("0.05:0.9:0.05").unwrap();
        assert_eq!(g.len(), 18);
        assert_eq!(g[2], 0.15);
        assert_eq!(*g.last().unwrap(), 0.9);
        assert!(parse_loads("0.5:0.1:0.1").is_err());
        assert!(parse_loads("a,b").is_err());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.2), "0.2");
        assert_eq!(format_sig9(1.454e-4), "0.0001454");
        assert_eq!(format_sig9(2.41620000001e-5), "2.4162e-05");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(123456789012.0), "1.23456789e+11");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(f64::NAN), "nan");
    }

    fn plan(dist: &str, n: usize, eps: f64, loads: Vec<f64>, frames: u64) -> SweepPlan {
        SweepPlan::new(dist.parse().unwrap(), n, eps, loads, frames, 42)
    }

    #[test]
    fn plan_validation() {
        assert!(plan("2:1", 200, 0.0, vec![0.2], 0).validate().is_err());
        assert!(plan("2:1", 200, 0.0, vec![2.5], 1).validate().is_err());
        assert!(plan("2:1", 200, 0.0, vec![0.001], 1).validate().is_err());
        assert!(plan("2:1", 200, 1.5, vec![0.2], 1).validate().is_err());
        assert!(plan("8:1", 6, 0.0, vec![0.5], 1).validate().is_err());
        assert!(plan("2:1", 200, 0.0, vec![], 1).validate().is_err());
    }

    #[test]
    fn lone_degree_one_user_always_resolved() {
        let rows = run_sweep(&plan("1:1", 4, 0.0, vec![0.25], 1)).unwrap();
        assert_eq!(rows[0].m, 1);
        assert_eq!(rows[0].degree(1).unwrap().plr_sim, 0.0);
    }

    #[test]
    fn total_erasure_loses_everyone() {
        let rows = run_sweep(&plan("2:0.25,3:0.6,8:0.15", 20, 1.0, vec![0.5, 1.0], 50)).unwrap();
        for r in &rows {
            assert_eq!(r.plr_sim_avg, 1.0);
            assert_eq!(r.histogram.count(crate::stopping_sets::ComponentClass::Degree0), 50 * r.m as u64);
        }
    }

    #[test]
    fn conservation_and_floor() {
        let p = plan("2:0.25,3:0.6,8:0.15", 50, 0.1, vec![0.3, 0.8], 400);
        for r in run_sweep(&p).unwrap() {
            assert_eq!(r.total_users, r.frames * r.m as u64);
            assert_eq!(r.degrees.iter().map(|d| d.users).sum::<u64>(), r.total_users);
            assert!(r.degrees.iter().all(|d| d.unresolved <= d.users));
            assert!(r.plr_sim_avg >= r.floor_lower_bound - 3.0 * r.ci95_avg);
        }
    }

    #[test]
    fn csv_layout() {
        let p = plan("2:0.5,3:0.5", 20, 0.0, vec![0.5], 10);
        let csv = to_csv(&p, &run_sweep(&p).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.5,10,20,10,2,"));
        assert!(lines[1].ends_with(",induced"));
        assert!(lines[3].starts_with("0.5,10,20,10,avg,"));
    }

    #[test]
    fn original_keying_uses_user_perspective() {
        let mut p = plan("2:0.5,3:0.5", 30, 0.2, vec![0.4], 200);
        p.keying = DegreeKeying::Original;
        let rows = run_sweep(&p).unwrap();
        let r = &rows[0];
        assert_eq!(r.degree(0).unwrap().users, 0);
        assert!(r.degree(2).unwrap().users > 0);
        let csv = to_csv(&p, &rows);
        assert_eq!(csv.lines().count(), 1 + 2 + 1);
        assert!(csv.lines().nth(1).unwrap().ends_with(",original"));
    }
}
