//! The eight dominant stopping-set classes, their occurrence estimates, and a
//! classifier for residual graph components.
//!
//! Each class is a small user multiset with a fixed slot topology. Its
//! occurrence probability in a random frame is estimated as `alpha * beta`:
//! `alpha` is the expected number of ways to pick the class's users out of the
//! frame, `beta` the probability that those users land in the class topology.

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::distributions::DegreeDistribution;
use crate::error::{Error, Result};
use crate::frame::FrameGraph;
use crate::math::falling_factorial;

/// Smallest frame for which every catalog entry fits.
pub const MIN_SLOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StoppingSetId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
}

impl StoppingSetId {
    pub const ALL: [StoppingSetId; 8] = [
        StoppingSetId::S1,
        StoppingSetId::S2,
        StoppingSetId::S3,
        StoppingSetId::S4,
        StoppingSetId::S5,
        StoppingSetId::S6,
        StoppingSetId::S7,
        StoppingSetId::S8,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn class(self) -> &'static StoppingSetClass {
        &CATALOG[self.index()]
    }
}

impl fmt::Display for StoppingSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index() + 1)
    }
}

impl FromStr for StoppingSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StoppingSetId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown stopping set {s:?}")))
    }
}

/// One catalog entry. Slot labels in `topology` are abstract and distinct.
#[derive(Debug)]
pub struct StoppingSetClass {
    pub id: StoppingSetId,
    /// `profile[l]` users of degree `l`.
    pub profile: &'static [usize],
    /// Slot labels of each user.
    pub topology: &'static [&'static [u8]],
}

pub static CATALOG: [StoppingSetClass; 8] = [
    StoppingSetClass { id: StoppingSetId::S1, profile: &[0, 2], topology: &[&[0], &[0]] },
    StoppingSetClass { id: StoppingSetId::S2, profile: &[0, 2, 1], topology: &[&[0, 1], &[0], &[1]] },
    StoppingSetClass { id: StoppingSetId::S3, profile: &[0, 3, 0, 1], topology: &[&[0, 1, 2], &[0], &[1], &[2]] },
    StoppingSetClass { id: StoppingSetId::S4, profile: &[0, 1, 1, 1], topology: &[&[0, 1, 2], &[0, 1], &[2]] },
    StoppingSetClass { id: StoppingSetId::S5, profile: &[0, 0, 2], topology: &[&[0, 1], &[0, 1]] },
    StoppingSetClass { id: StoppingSetId::S6, profile: &[0, 0, 3], topology: &[&[0, 1], &[1, 2], &[0, 2]] },
    StoppingSetClass { id: StoppingSetId::S7, profile: &[0, 0, 1, 2], topology: &[&[0, 2, 3], &[1, 2, 3], &[0, 1]] },
    StoppingSetClass { id: StoppingSetId::S8, profile: &[0, 0, 0, 2], topology: &[&[0, 1, 2], &[0, 1, 2]] },
];

impl StoppingSetClass {
    /// Number of users `||v(S)||_1`.
    pub fn size(&self) -> usize {
        self.profile.iter().sum()
    }

    /// Number of distinct slots the topology occupies.
    pub fn slot_count(&self) -> usize {
        self.topology.iter().flat_map(|u| u.iter()).map(|&s| s as usize + 1).max().unwrap_or(0)
    }

    /// User degrees in topology order.
    pub fn degrees(&self) -> Vec<usize> {
        self.topology.iter().map(|u| u.len()).collect()
    }

    /// Number of users of degree `l`.
    pub fn users_of_degree(&self, l: usize) -> usize {
        self.profile.get(l).copied().unwrap_or(0)
    }

    /// Placement probability as an exact fraction `(numerator, denominator)`.
    pub fn beta_fraction(&self, n: usize) -> Result<(u128, u128)> {
        if n < MIN_SLOTS {
            return Err(Error::SlotCountTooSmall { n, q: MIN_SLOTS });
        }
        let n = n as u128;
        Ok(match self.id {
            StoppingSetId::S1 => (1, n),
            StoppingSetId::S2 => (2, n * n),
            StoppingSetId::S3 => (6, n * n * n),
            StoppingSetId::S4 => (6, (n - 1) * n * n),
            StoppingSetId::S5 => (2, (n - 1) * n),
            StoppingSetId::S6 => (4 * (n - 3), (n - 2) * n * n * n),
            StoppingSetId::S7 => (36 * (n - 3), (n - 2) * (n - 1) * n * n * n),
            StoppingSetId::S8 => (6, (n - 2) * (n - 1) * n),
        })
    }

    /// Probability that the class's users, placed uniformly in a frame of `n` slots, form the class topology.
    pub fn beta(&self, n: usize) -> Result<f64> {
        let (num, den) = self.beta_fraction(n)?;
        Ok(num as f64 / den as f64)
    }

    /// Expected number of ways to select this class's user multiset from `m` users of the induced distribution:
    /// `C(m, s) p_mn(v(S), lambda, s)` with `s = ||v(S)||_1`.
    pub fn alpha(&self, m: usize, induced: &DegreeDistribution) -> Result<f64> {
        let s = self.size();
        if m < s {
            return Err(Error::TooFewUsers { m, needed: s });
        }
        let mut value = falling_factorial(m, s);
        for (l, &count) in self.profile.iter().enumerate() {
            if count > 0 {
                value *= induced.prob(l).powi(count as i32) / falling_factorial(count, count);
            }
        }
        Ok(value)
    }

    /// Occurrence estimate `alpha * beta`; zero when the frame has too few users.
    pub fn rho(&self, m: usize, n: usize, induced: &DegreeDistribution) -> Result<f64> {
        let beta = self.beta(n)?;
        match self.alpha(m, induced) {
            Ok(alpha) => Ok(alpha * beta),
            Err(Error::TooFewUsers { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    /// The topology instantiated on concrete slots `labels[a]`, `labels[b]`, ...
    pub fn instantiate(&self, n: usize, labels: &[usize]) -> Result<FrameGraph> {
        let users: Vec<Vec<usize>> =
            self.topology.iter().map(|u| u.iter().map(|&s| labels[s as usize]).collect()).collect();
        FrameGraph::from_slot_sets(n, &users)
    }
}

/// True iff the fragment is non-empty, all users have surviving copies, and every occupied slot has two or more users.
pub fn is_stopping_set(fragment: &FrameGraph) -> bool {
    if fragment.user_count() == 0 {
        return false;
    }
    if (0..fragment.user_count()).any(|u| fragment.induced_degree(u) == 0) {
        return false;
    }
    fragment.slot_occupancy().iter().all(|&c| c != 1)
}

/// Connected components of the user/slot incidence graph; users without edges come out as their own fragments.
pub fn components(residual: &FrameGraph) -> Vec<FrameGraph> {
    let m = residual.user_count();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: Vec<Option<usize>> = vec![None; residual.slot_count()];
    for u in 0..m {
        for &s in residual.user_slots(u) {
            match owner[s as usize] {
                None => owner[s as usize] = Some(u),
                Some(v) => {
                    let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root = vec![usize::MAX; m];
    for u in 0..m {
        let r = find(&mut parent, u);
        if group_of_root[r] == usize::MAX {
            group_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of_root[r]].push(u);
    }
    groups.iter().map(|users| residual.subgraph(users)).collect()
}

/// Label assigned to a residual component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComponentClass {
    Catalog(StoppingSetId),
    Degree0,
    Other,
}

impl ComponentClass {
    /// Position in [`ClassHistogram`]: S1..S8, then Degree0, then Other.
    pub fn index(self) -> usize {
        match self {
            ComponentClass::Catalog(id) => id.index(),
            ComponentClass::Degree0 => 8,
            ComponentClass::Other => 9,
        }
    }

    pub fn label(self) -> String {
        match self {
            ComponentClass::Catalog(id) => id.to_string(),
            ComponentClass::Degree0 => "Degree0".into(),
            ComponentClass::Other => "Other".into(),
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn sorted_sets(sets: impl Iterator<Item = Vec<usize>>) -> Vec<Vec<usize>> {
    let mut v: Vec<Vec<usize>> = sets
        .map(|mut s| {
            s.sort_unstable();
            s
        })
        .collect();
    v.sort();
    v
}

fn matches_topology(component: &FrameGraph, class: &StoppingSetClass) -> bool {
    let mut slots: Vec<usize> = (0..component.user_count())
        .flat_map(|u| component.user_slots(u).iter().map(|&s| s as usize))
        .collect();
    slots.sort_unstable();
    slots.dedup();
    if slots.len() != class.slot_count() {
        return false;
    }
    let target = sorted_sets((0..component.user_count()).map(|u| component.user_slots(u).iter().map(|&s| s as usize).collect()));
    permutations(slots.len()).into_iter().any(|perm| {
        let mapped = sorted_sets(class.topology.iter().map(|u| u.iter().map(|&s| slots[perm[s as usize]]).collect()));
        mapped == target
    })
}

/// Classifies a connected residual component (or an isolated degree-0 user).
pub fn classify(component: &FrameGraph) -> ComponentClass {
    if component.user_count() == 1 && component.induced_degree(0) == 0 {
        return ComponentClass::Degree0;
    }
    let profile = component.profile();
    for class in &CATALOG {
        let same_profile = (0..profile.counts.len().max(class.profile.len()))
            .all(|l| profile.get(l) == class.users_of_degree(l));
        if same_profile && matches_topology(component, class) {
            return ComponentClass::Catalog(class.id);
        }
    }
    ComponentClass::Other
}

/// Labels of all components of a residual.
pub fn classify_residual(residual: &FrameGraph) -> Vec<ComponentClass> {
    components(residual).iter().map(classify).collect()
}

/// Occurrence counts of component classes over a number of frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassHistogram {
    pub counts: [u64; 10],
    pub frames: u64,
}

impl ClassHistogram {
    pub const LABELS: [&'static str; 10] = ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "Degree0", "Other"];

    pub fn record(&mut self, class: ComponentClass) {
        self.counts[class.index()] += 1;
    }

    pub fn merge(&mut self, other: &ClassHistogram) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.frames += other.frames;
    }

    pub fn count(&self, class: ComponentClass) -> u64 {
        self.counts[class.index()]
    }

    /// Occurrences per frame.
    pub fn rate(&self, class: ComponentClass) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.count(class) as f64 / self.frames as f64
        }
    }
}

#[derive(Serialize)]
struct HistogramEntry {
    count: u64,
    rate: f64,
}

impl Serialize for ClassHistogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(10))?;
        for (i, label) in Self::LABELS.iter().enumerate() {
            let rate = if self.frames == 0 { 0.0 } else { self.counts[i] as f64 / self.frames as f64 };
            map.serialize_entry(label, &HistogramEntry { count: self.counts[i], rate })?;
        }
        map.end()
    }
}
