//! Contention frames as bipartite user/slot graphs.
//!
//! Users pick a degree, place that many copies in distinct uniformly chosen
//! slots, and each copy then survives the erasure channel independently.
//! Only surviving copies become edges of the graph.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{ChannelModel, DegreeDistribution};
use crate::error::{Error, Result};
use crate::math::ln_factorial;

/// How user degrees are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Draw the original degree, place copies, then erase copies one by one.
    #[default]
    Physical,
    /// Draw the received degree directly from the induced distribution.
    Induced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub m: usize,
    pub n: usize,
    pub dist: DegreeDistribution,
    pub channel: ChannelModel,
    pub sampling_mode: SamplingMode,
}

impl FrameConfig {
    pub fn new(m: usize, n: usize, dist: DegreeDistribution, channel: ChannelModel) -> Self {
        Self { m, n, dist, channel, sampling_mode: SamplingMode::Physical }
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.sampling_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.dist.max_supported_degree();
        if self.n == 0 || self.n < q {
            return Err(Error::SlotCountTooSmall { n: self.n, q });
        }
        Ok(())
    }

    /// Channel load `g = m / n`.
    pub fn load(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// Bipartite graph of one frame after erasures, stored in compressed rows.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameGraph {
    n: usize,
    original_degree: Vec<u32>,
    offsets: Vec<u32>,
    slots: Vec<u32>,
}

impl FrameGraph {
    pub fn new(n: usize) -> Self {
        Self { n, original_degree: Vec::new(), offsets: vec![0], slots: Vec::new() }
    }

    /// Builds a graph from `(original_degree, slots)` records.
    pub fn from_users<S: AsRef<[usize]>>(n: usize, users: &[(usize, S)]) -> Result<Self> {
        let mut g = Self::new(n);
        for (deg, slots) in users {
            g.push_user(*deg, slots.as_ref())?;
        }
        Ok(g)
    }

    /// Builds a graph whose users were all received intact (original degree = slot count).
    pub fn from_slot_sets<S: AsRef<[usize]>>(n: usize, users: &[S]) -> Result<Self> {
        let mut g = Self::new(n);
        for slots in users {
            g.push_user(slots.as_ref().len(), slots.as_ref())?;
        }
        Ok(g)
    }

    /// Appends a user; slot indices must be distinct, below `n`, and no more than the original degree.
    pub fn push_user(&mut self, original_degree: usize, slots: &[usize]) -> Result<()> {
        if slots.len() > original_degree {
            return Err(Error::Config(format!(
                "user with original degree {original_degree} has {} surviving copies",
                slots.len()
            )));
        }
        let mut sorted: Vec<u32> = Vec::with_capacity(slots.len());
        for &s in slots {
            if s >= self.n {
                return Err(Error::Config(format!("slot {s} outside frame of {} slots", self.n)));
            }
            sorted.push(s as u32);
        }
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate slot within a user".into()));
        }
        self.push_sorted(original_degree as u32, &sorted);
        Ok(())
    }

    fn push_sorted(&mut self, original_degree: u32, sorted: &[u32]) {
        self.original_degree.push(original_degree);
        self.slots.extend_from_slice(sorted);
        self.offsets.push(self.slots.len() as u32);
    }

    /// Number of slots `n`.
    pub fn slot_count(&self) -> usize {
        self.n
    }

    /// Number of users `m`.
    pub fn user_count(&self) -> usize {
        self.original_degree.len()
    }

    pub fn edge_count(&self) -> usize {
        self.slots.len()
    }

    pub fn user_slots(&self, user: usize) -> &[u32] {
        &self.slots[self.offsets[user] as usize..self.offsets[user + 1] as usize]
    }

    pub fn original_degree(&self, user: usize) -> usize {
        self.original_degree[user] as usize
    }

    /// Number of surviving copies of `user`.
    pub fn induced_degree(&self, user: usize) -> usize {
        (self.offsets[user + 1] - self.offsets[user]) as usize
    }

    /// Subgraph made of the listed users, keeping slot indices.
    pub fn subgraph(&self, users: &[usize]) -> Self {
        let mut g = Self::new(self.n);
        for &u in users {
            g.push_sorted(self.original_degree[u], self.user_slots(u));
        }
        g
    }

    /// Number of incident users per slot.
    pub fn slot_occupancy(&self) -> Vec<u32> {
        let mut occ = vec![0u32; self.n];
        for &s in &self.slots {
            occ[s as usize] += 1;
        }
        occ
    }

    /// Counts users by received degree.
    pub fn profile(&self) -> GraphProfile {
        let q = self.original_degree.iter().copied().max().unwrap_or(0) as usize;
        let mut counts = vec![0usize; q + 1];
        for u in 0..self.user_count() {
            counts[self.induced_degree(u)] += 1;
        }
        GraphProfile { counts }
    }

    /// Text dump: header `n=<n>`, then `original_degree<TAB>slot,slot,...` per user.
    pub fn dump(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for u in 0..self.user_count() {
            let slots: Vec<String> = self.user_slots(u).iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{}\t{}", self.original_degree[u], slots.join(","));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty frame dump".into()))?;
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad frame header {header:?}")))?;
        let mut g = Self::new(n);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (deg, slots) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("bad frame line {line:?}")))?;
            let deg: usize = deg.trim().parse().map_err(|_| Error::Parse(format!("bad degree {deg:?}")))?;
            let slots: Vec<usize> = slots
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad slot {s:?}"))))
                .collect::<Result<_>>()?;
            g.push_user(deg, &slots)?;
        }
        Ok(g)
    }
}

/// Per-degree user counts `v[l]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphProfile {
    pub counts: Vec<usize>,
}

impl GraphProfile {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn get(&self, degree: usize) -> usize {
        self.counts.get(degree).copied().unwrap_or(0)
    }

    /// `||v||_1`, the number of users.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Multinomial probability of profile `u` among `m` users drawn from `dist`; zero if `||u||_1 != m`.
pub fn multinomial_pmf(u: &GraphProfile, dist: &DegreeDistribution, m: usize) -> f64 {
    if u.total() != m {
        return 0.0;
    }
    let mut log_p = ln_factorial(m);
    for (l, &count) in u.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let p = dist.prob(l);
        if p == 0.0 {
            return 0.0;
        }
        log_p += count as f64 * p.ln() - ln_factorial(count);
    }
    log_p.exp()
}

/// Inverse-CDF degree sampler.
#[derive(Debug, Clone)]
struct DegreeSampler {
    cumulative: Vec<f64>,
    last: usize,
}

impl DegreeSampler {
    fn new(dist: &DegreeDistribution) -> Self {
        let mut acc = 0.0;
        let cumulative = dist
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative, last: dist.max_supported_degree() }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        // the partition point lands on a zero-mass degree only through rounding at the top
        let l = self.cumulative.partition_point(|&c| c <= u);
        l.min(self.last)
    }
}

/// Uniform `k`-subset of `0..n` by Floyd's algorithm, appended to `out` in ascending order.
fn floyd_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, out: &mut Vec<u32>) {
    let start = out.len();
    for j in (n - k)..n {
        let t = rng.random_range(0..=j) as u32;
        if out[start..].contains(&t) {
            out.push(j as u32);
        } else {
            out.push(t);
        }
    }
    out[start..].sort_unstable();
}

/// Reusable sampler for frames under a fixed configuration.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    m: usize,
    n: usize,
    epsilon: f64,
    mode: SamplingMode,
    degrees: DegreeSampler,
}

impl FrameSampler {
    pub fn new(config: &FrameConfig) -> Result<Self> {
        config.validate()?;
        let degrees = match config.sampling_mode {
            SamplingMode::Physical => DegreeSampler::new(&config.dist),
            SamplingMode::Induced => DegreeSampler::new(&config.dist.induce(config.channel)),
        };
        Ok(Self {
            m: config.m,
            n: config.n,
            epsilon: config.channel.epsilon(),
            mode: config.sampling_mode,
            degrees,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FrameGraph {
        let mut g = FrameGraph::new(self.n);
        g.original_degree.reserve(self.m);
        g.offsets.reserve(self.m);
        let mut placed = Vec::with_capacity(self.degrees.last);
        for _ in 0..self.m {
            let l = self.degrees.draw(rng);
            placed.clear();
            floyd_subset(rng, self.n, l, &mut placed);
            if self.mode == SamplingMode::Physical && self.epsilon > 0.0 {
                placed.retain(|_| rng.random::<f64>() >= self.epsilon);
            }
            g.push_sorted(l as u32, &placed);
        }
        g
    }
}

/// Samples one frame; deterministic for a given random stream.
pub fn sample_frame<R: Rng + ?Sized>(config: &FrameConfig, rng: &mut R) -> Result<FrameGraph> {
    Ok(FrameSampler::new(config)?.sample(rng))
}
