//! Routing policies and the idle-server pool.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("jsq_d needs 1 <= d <= n (d={d}, n={n})")]
    InvalidD { d: usize, n: usize },
    #[error("jiq_biased needs lambda_bar in [lambda, 1) (lambda_bar={lambda_bar}, lambda={lambda})")]
    InvalidLambdaBar { lambda_bar: f64, lambda: f64 },
    #[error("bias weights violate the per-server cap: max weight {max} > {cap}")]
    BiasCapExceeded { max: f64, cap: f64 },
    #[error("preferred tag {tag} does not exist")]
    UnknownTag { tag: u16 },
}

/// Set of idle servers with O(1) insert, remove and uniform sampling.
///
/// `members` is a dense array and `position_of` its inverse; removal swaps
/// the last member into the vacated slot.
#[derive(Debug, Clone, PartialEq)]
pub struct IdlePool {
    members: Vec<u32>,
    position_of: Vec<u32>,
}

impl IdlePool {
    /// An empty pool over server indices `0..n`.
    pub fn new(n: usize) -> Self {
        IdlePool { members: Vec::new(), position_of: vec![ABSENT; n] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.position_of[i] != ABSENT
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    /// Panics if `i` is already idle: that means the engine lost track of a server.
    pub fn insert(&mut self, i: usize) {
        assert!(!self.contains(i), "idle pool desync: server {i} inserted twice");
        self.position_of[i] = self.members.len() as u32;
        self.members.push(i as u32);
    }

    /// Panics if `i` is not idle.
    pub fn remove(&mut self, i: usize) {
        assert!(self.contains(i), "idle pool desync: server {i} is not idle");
        let slot = self.position_of[i] as usize;
        self.members.swap_remove(slot);
        if let Some(&moved) = self.members.get(slot) {
            self.position_of[moved as usize] = slot as u32;
        }
        self.position_of[i] = ABSENT;
    }

    /// Uniform draw over the current members. Panics on an empty pool.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        assert!(!self.is_empty(), "sample from empty idle pool");
        self.members[rng.random_range(0..self.members.len())] as usize
    }

    /// Most recently inserted member, as long as removals have only taken
    /// the last member (which is what lifo routing does).
    pub fn last(&self) -> Option<usize> {
        self.members.last().map(|&i| i as usize)
    }
}

/// Idle servers partitioned by subset tag.
#[derive(Debug, Clone, PartialEq)]
pub struct IdleSet {
    pools: Vec<IdlePool>,
    tag_of: Vec<u16>,
    idle_since: Vec<u64>,
    stamp: u64,
    total: usize,
}

impl IdleSet {
    pub fn new(tag_of: Vec<u16>) -> Self {
        let n = tag_of.len();
        let tags = tag_of.iter().map(|&t| t as usize + 1).max().unwrap_or(1);
        IdleSet {
            pools: (0..tags).map(|_| IdlePool::new(n)).collect(),
            tag_of,
            idle_since: vec![0; n],
            stamp: 0,
            total: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn num_tags(&self) -> usize {
        self.pools.len()
    }

    pub fn pool(&self, tag: u16) -> &IdlePool {
        &self.pools[tag as usize]
    }

    pub fn contains(&self, i: usize) -> bool {
        self.pools[self.tag_of[i] as usize].contains(i)
    }

    pub fn insert(&mut self, i: usize) {
        self.pools[self.tag_of[i] as usize].insert(i);
        self.stamp += 1;
        self.idle_since[i] = self.stamp;
        self.total += 1;
    }

    pub fn remove(&mut self, i: usize) {
        self.pools[self.tag_of[i] as usize].remove(i);
        self.total -= 1;
    }

    /// Uniform over all idle servers regardless of tag.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        assert!(self.total > 0, "sample from empty idle set");
        if self.pools.len() == 1 {
            return self.pools[0].sample_uniform(rng);
        }
        let mut k = rng.random_range(0..self.total);
        for pool in &self.pools {
            if k < pool.len() {
                return pool.members()[k] as usize;
            }
            k -= pool.len();
        }
        unreachable!("idle count out of sync with pools")
    }

    /// Most recently idled server across tags.
    pub fn most_recent(&self) -> Option<usize> {
        self.pools.iter().filter_map(IdlePool::last).max_by_key(|&i| self.idle_since[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Jiq,
    JsqD,
    Random,
    JiqBiased,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Jiq => "jiq",
            PolicyKind::JsqD => "jsq_d",
            PolicyKind::Random => "random",
            PolicyKind::JiqBiased => "jiq_biased",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [PolicyKind::Jiq, PolicyKind::JsqD, PolicyKind::Random, PolicyKind::JiqBiased]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdleSelection {
    #[default]
    Uniform,
    Lifo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub d: usize,
    pub idle_selection: IdleSelection,
    pub lambda_bar: Option<f64>,
    /// Idle servers of this subset are used first (subset experiments).
    pub preferred_tag: Option<u16>,
}

impl PolicySpec {
    pub fn jiq() -> Self {
        PolicySpec { kind: PolicyKind::Jiq, d: 1, idle_selection: IdleSelection::Uniform, lambda_bar: None, preferred_tag: None }
    }

    pub fn of_kind(kind: PolicyKind) -> Self {
        PolicySpec { kind, ..PolicySpec::jiq() }
    }

    /// Whether the policy is invariant under relabeling of servers.
    pub fn is_symmetric(&self) -> bool {
        match self.kind {
            PolicyKind::Jiq => self.idle_selection == IdleSelection::Uniform && self.preferred_tag.is_none(),
            PolicyKind::Random => true,
            PolicyKind::JsqD => false,
            PolicyKind::JiqBiased => false,
        }
    }
}

/// Per-server weights for the all-busy lottery of `jiq_biased`, normalized to
/// mean 1 so that server `i` is chosen with probability `weight_i / n`.
#[derive(Debug, Clone)]
pub struct BiasTable {
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl BiasTable {
    /// Checks `max_i weight_i <= lambda_bar / lambda`.
    pub fn from_weights(raw: Vec<f64>, lambda: f64, lambda_bar: f64) -> Result<Self, PolicyError> {
        let n = raw.len() as f64;
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w * n / total).collect();
        let cap = lambda_bar / lambda;
        let max = weights.iter().copied().fold(0.0, f64::max);
        if max > cap * (1.0 + 1e-12) {
            return Err(PolicyError::BiasCapExceeded { max, cap });
        }
        let index = WeightedIndex::new(&weights).map_err(|_| PolicyError::BiasCapExceeded { max, cap })?;
        Ok(BiasTable { weights, index })
    }

    /// Geometric weights `q^i`, with `q` chosen so the largest weight sits
    /// just below the cap `lambda_bar / lambda`.
    pub fn geometric(n: usize, lambda: f64, lambda_bar: f64) -> Result<Self, PolicyError> {
        if !(lambda > 0.0 && lambda_bar >= lambda && lambda_bar < 1.0) {
            return Err(PolicyError::InvalidLambdaBar { lambda_bar, lambda });
        }
        let target = ((lambda_bar / lambda) * (1.0 - 1e-6)).min(n as f64);
        // max/mean of q^i over i < n is n (1 - q) / (1 - q^n), decreasing in q.
        let ratio = |q: f64| {
            if q >= 1.0 {
                1.0
            } else {
                n as f64 * (1.0 - q) / (1.0 - q.powi(n as i32))
            }
        };
        let (mut lo, mut hi) = (1e-12, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = hi;
        let raw = (0..n).map(|i| q.powi(i as i32)).collect();
        BiasTable::from_weights(raw, lambda, lambda_bar)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-arrival probability that server `i` is chosen in the all-busy case.
    pub fn probability(&self, i: usize) -> f64 {
        self.weights[i] / self.weights.len() as f64
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// Read access to the server state needed by routing decisions.
pub trait ServerView {
    fn n(&self) -> usize;
    fn queue_len(&self, i: usize) -> usize;
    fn is_full(&self, i: usize) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    To(usize),
    /// The chosen server's buffer is full; the customer leaves.
    Blocked(usize),
}

impl Route {
    pub fn server(self) -> usize {
        match self {
            Route::To(i) | Route::Blocked(i) => i,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Router {
    spec: PolicySpec,
    bias: Option<BiasTable>,
}

impl Router {
    pub fn new(spec: PolicySpec, n: usize, lambda: f64, num_tags: usize) -> Result<Self, PolicyError> {
        if spec.kind == PolicyKind::JsqD && !(1..=n).contains(&spec.d) {
            return Err(PolicyError::InvalidD { d: spec.d, n });
        }
        if let Some(tag) = spec.preferred_tag {
            if tag as usize >= num_tags {
                return Err(PolicyError::UnknownTag { tag });
            }
        }
        let bias = match spec.kind {
            PolicyKind::JiqBiased => {
                let lambda_bar = spec.lambda_bar.unwrap_or(f64::NAN);
                Some(BiasTable::geometric(n, lambda, lambda_bar)?)
            }
            _ => None,
        };
        Ok(Router { spec, bias })
    }

    /// Replaces the all-busy lottery of `jiq_biased` with explicit weights.
    pub fn with_bias(mut self, table: BiasTable) -> Self {
        self.bias = Some(table);
        self
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn bias(&self) -> Option<&BiasTable> {
        self.bias.as_ref()
    }

    fn pick_idle<R: Rng + ?Sized>(&self, idle: &IdleSet, rng: &mut R) -> usize {
        if let Some(tag) = self.spec.preferred_tag {
            let pool = idle.pool(tag);
            if !pool.is_empty() {
                return match self.spec.idle_selection {
                    IdleSelection::Uniform => pool.sample_uniform(rng),
                    IdleSelection::Lifo => pool.last().expect("nonempty pool"),
                };
            }
        }
        match self.spec.idle_selection {
            IdleSelection::Uniform => idle.sample_uniform(rng),
            IdleSelection::Lifo => idle.most_recent().expect("nonempty idle set"),
        }
    }

    pub fn route<V: ServerView, R: Rng + ?Sized>(&self, view: &V, idle: &IdleSet, rng: &mut R) -> Route {
        let n = view.n();
        let dest = match self.spec.kind {
            PolicyKind::Jiq | PolicyKind::JiqBiased if !idle.is_empty() => self.pick_idle(idle, rng),
            PolicyKind::Jiq | PolicyKind::Random => rng.random_range(0..n),
            PolicyKind::JiqBiased => self.bias.as_ref().expect("bias table built for jiq_biased").sample(rng),
            PolicyKind::JsqD => {
                let mut best = rng.random_range(0..n);
                for _ in 1..self.spec.d {
                    let c = rng.random_range(0..n);
                    let (lc, lb) = (view.queue_len(c), view.queue_len(best));
                    if lc < lb || (lc == lb && c < best) {
                        best = c;
                    }
                }
                best
            }
        };
        if view.is_full(dest) {
            Route::Blocked(dest)
        } else {
            Route::To(dest)
        }
    }
}
