//! Static directed communication graphs and the set predicates used to
//! certify resilient propagation over them.
//!
//! An edge `(head, tail)` means `head` can send to `tail`. Graphs are simple
//! (no self-loops, no parallel edges) and immutable once built, so a single
//! [`Digraph`] can be shared read-only across concurrent runs.
//!
//! Strong `r`-robustness w.r.t. a source set `S` asks that every nonempty
//! `C ⊆ V \ S` contains a node with at least `r` in-neighbors outside `C`.
//! [`strongly_robust_wrt`] decides it by a peeling fixpoint in `O(n + |E|)`
//! per round; [`strongly_robust_bruteforce`] enumerates every subset and is
//! kept as an independent oracle.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense agent index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for AgentId {
    fn from(i: usize) -> Self {
        AgentId(i)
    }
}

pub type AgentSet = BTreeSet<AgentId>;

/// Convenience for building an [`AgentSet`] from plain indices.
pub fn agent_set<I: IntoIterator<Item = usize>>(ids: I) -> AgentSet {
    ids.into_iter().map(AgentId).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    // Sorted adjacency in both directions.
    inn: Vec<Vec<usize>>,
    out: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Digraph {
    /// Builds a graph from `(head, tail)` pairs. Duplicate pairs and
    /// self-loops are rejected rather than silently dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut inn = vec![Vec::new(); n];
        let mut out = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (head, tail) in edges {
            for v in [head, tail] {
                if v >= n {
                    return Err(Error::InvalidAgent { index: v, n });
                }
            }
            if head == tail {
                return Err(Error::InvalidArgument(format!("self-loop at agent {head}")));
            }
            if !seen.insert((head, tail)) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge ({head}, {tail})"
                )));
            }
            out[head].push(tail);
            inn[tail].push(head);
        }
        for adj in inn.iter_mut().chain(out.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(Digraph {
            n,
            inn,
            out,
            edge_count: seen.len(),
        })
    }

    pub fn empty(n: usize) -> Self {
        Digraph {
            n,
            inn: vec![Vec::new(); n],
            out: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Complete digraph: every ordered pair of distinct agents.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        Self::from_edges(n, edges).expect("complete graph is simple")
    }

    /// Directed path `0 -> 1 -> ... -> n-1`.
    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path is simple")
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "cycle needs n >= 2, got {n}"
            )));
        }
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Random digraph with each ordered pair present independently with
    /// probability `p`. Deterministic in `seed`.
    pub fn gnp(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, edges).expect("gnp graph is simple")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n).map(AgentId)
    }

    pub fn check(&self, i: AgentId) -> Result<usize> {
        if i.0 < self.n {
            Ok(i.0)
        } else {
            Err(Error::InvalidAgent {
                index: i.0,
                n: self.n,
            })
        }
    }

    pub fn contains_edge(&self, head: usize, tail: usize) -> bool {
        head < self.n && self.out[head].binary_search(&tail).is_ok()
    }

    /// In-neighbors as a sorted slice of raw indices. Panics on a bad index.
    #[inline]
    pub fn in_slice(&self, i: usize) -> &[usize] {
        &self.inn[i]
    }

    /// Out-neighbors as a sorted slice of raw indices. Panics on a bad index.
    #[inline]
    pub fn out_slice(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(h, tails)| tails.iter().map(move |&t| (h, t)))
    }

    /// Parses the `head tail` edge-list text format. Blank lines and `#`
    /// comments are skipped. Without an explicit `n` the agent count is one
    /// past the largest index seen.
    pub fn from_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|s| s.parse().ok()).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "edge list line {}: expected `head tail`, got `{raw}`",
                        lineno + 1
                    ))
                })
            };
            let head = parse(parts.next())?;
            let tail = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::InvalidArgument(format!(
                    "edge list line {}: trailing tokens in `{raw}`",
                    lineno + 1
                )));
            }
            edges.push((head, tail));
        }
        let n = n.unwrap_or_else(|| edges.iter().map(|&(h, t)| h.max(t) + 1).max().unwrap_or(0));
        Self::from_edges(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (h, t) in self.edges() {
            s.push_str(&format!("{h} {t}\n"));
        }
        s
    }
}

/// `{j : (j, i) ∈ E}`.
pub fn in_neighbors(g: &Digraph, i: AgentId) -> Result<AgentSet> {
    let i = g.check(i)?;
    Ok(g.inn[i].iter().copied().map(AgentId).collect())
}

pub fn out_neighbors(g: &Digraph, i: AgentId) -> Result<AgentSet> {
    let i = g.check(i)?;
    Ok(g.out[i].iter().copied().map(AgentId).collect())
}

/// In-neighbors together with `i` itself.
pub fn inclusive_neighbors(g: &Digraph, i: AgentId) -> Result<AgentSet> {
    let mut set = in_neighbors(g, i)?;
    set.insert(i);
    Ok(set)
}

/// k-circulant graph: agent `i` sends to `(i + m) mod n` for `m = 1..=k`.
/// The undirected variant adds every reverse edge.
pub fn k_circulant(n: usize, k: usize, undirected: bool) -> Result<Digraph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "k-circulant needs n >= 2, got {n}"
        )));
    }
    if k < 1 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k-circulant needs 1 <= k <= n-1, got k={k}, n={n}"
        )));
    }
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for m in 1..=k {
            let j = (i + m) % n;
            edges.insert((i, j));
            if undirected {
                edges.insert((j, i));
            }
        }
    }
    Digraph::from_edges(n, edges)
}

fn check_members(g: &Digraph, set: &AgentSet) -> Result<()> {
    for &a in set {
        g.check(a)?;
    }
    Ok(())
}

fn membership(g: &Digraph, set: &AgentSet) -> Vec<bool> {
    let mut mask = vec![false; g.n];
    for a in set {
        mask[a.0] = true;
    }
    mask
}

/// At most `f` suspects in the in-neighborhood of every agent outside the
/// suspect set.
pub fn is_f_local(g: &Digraph, suspects: &AgentSet, f: usize) -> Result<bool> {
    Ok(f_local_violation(g, suspects, f)?.is_none())
}

/// First outsider whose in-neighborhood holds more than `f` suspects, with
/// that count.
pub fn f_local_violation(
    g: &Digraph,
    suspects: &AgentSet,
    f: usize,
) -> Result<Option<(AgentId, usize)>> {
    check_members(g, suspects)?;
    let is_suspect = membership(g, suspects);
    for i in 0..g.n {
        if is_suspect[i] {
            continue;
        }
        let count = g.inn[i].iter().filter(|&&j| is_suspect[j]).count();
        if count > f {
            return Ok(Some((AgentId(i), count)));
        }
    }
    Ok(None)
}

pub fn is_f_total(suspects: &AgentSet, f: usize) -> bool {
    suspects.len() <= f
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RobustnessCertificate {
    pub holds: bool,
    pub r: usize,
    /// `(round, agents)` absorbed at each peeling round, starting at round 1.
    pub peel_order: Vec<(usize, AgentSet)>,
    /// On failure, the stalled set: no member has `r` in-neighbors outside it.
    pub witness: AgentSet,
}

impl RobustnessCertificate {
    pub fn rounds(&self) -> usize {
        self.peel_order.len()
    }
}

/// Peeling decision procedure for strong `r`-robustness w.r.t. `s`.
///
/// Starting from `reached = s`, every agent with at least `r` in-neighbors
/// in `reached` is absorbed, all eligible agents per round at once. The graph
/// is robust iff the fixpoint covers `V`; otherwise `V \ reached` is a
/// nonempty set with no `r`-reachable member.
pub fn strongly_robust_wrt(g: &Digraph, s: &AgentSet, r: usize) -> Result<RobustnessCertificate> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("source set must be nonempty".into()));
    }
    if r < 1 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    check_members(g, s)?;

    let mut reached = membership(g, s);
    // Number of in-neighbors already in `reached`, maintained incrementally.
    let mut support = vec![0usize; g.n];
    for a in s {
        for &t in &g.out[a.0] {
            support[t] += 1;
        }
    }
    let mut frontier: Vec<usize> = (0..g.n)
        .filter(|&i| !reached[i] && support[i] >= r)
        .collect();
    let mut peel_order = Vec::new();
    let mut round = 0;
    while !frontier.is_empty() {
        round += 1;
        for &i in &frontier {
            reached[i] = true;
        }
        let mut next = BTreeSet::new();
        for &i in &frontier {
            for &t in &g.out[i] {
                support[t] += 1;
                if !reached[t] && support[t] >= r {
                    next.insert(t);
                }
            }
        }
        peel_order.push((round, frontier.iter().copied().map(AgentId).collect()));
        frontier = next.into_iter().collect();
    }

    let witness: AgentSet = (0..g.n).filter(|&i| !reached[i]).map(AgentId).collect();
    Ok(RobustnessCertificate {
        holds: witness.is_empty(),
        r,
        peel_order,
        witness,
    })
}

pub const BRUTEFORCE_LIMIT: usize = 20;

/// Definitional check: every nonempty `C ⊆ V \ s` has a member with at least
/// `r` in-neighbors outside `C`. Exponential in `|V \ s|`.
pub fn strongly_robust_bruteforce(g: &Digraph, s: &AgentSet, r: usize) -> Result<bool> {
    check_members(g, s)?;
    let free: Vec<usize> = (0..g.n).filter(|i| !s.contains(&AgentId(*i))).collect();
    if free.len() > BRUTEFORCE_LIMIT {
        return Err(Error::Capacity {
            free: free.len(),
            limit: BRUTEFORCE_LIMIT,
        });
    }
    // Position of each agent within `free`, if any.
    let mut pos = vec![usize::MAX; g.n];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    let in_masks: Vec<u32> = free
        .iter()
        .map(|&i| {
            g.inn[i]
                .iter()
                .filter(|&&j| pos[j] != usize::MAX)
                .fold(0u32, |m, &j| m | (1 << pos[j]))
        })
        .collect();
    let in_deg: Vec<u32> = free.iter().map(|&i| g.inn[i].len() as u32).collect();

    let r = r as u32;
    for c in 1u32..(1u32 << free.len()) {
        let reachable = (0..free.len())
            .any(|k| c & (1 << k) != 0 && in_deg[k] - (in_masks[k] & c).count_ones() >= r);
        if !reachable {
            return Ok(false);
        }
    }
    Ok(true)
}
