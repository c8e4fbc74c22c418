//! Directed graphs over instrument nodes, predictor nodes and the response.
//!
//! Node-disjoint path counts and minimum vertex cuts are computed as a unit
//! vertex-capacity max flow on the node-split graph; by Menger's theorem the
//! two quantities coincide, and the saturated vertex arcs give the cut.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{NoiseSpec, Scm};

/// Default magnitude below which a coefficient is treated as a missing edge.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// Enumeration budget for B3 before the size guard triggers.
const B3_GUARD_MAX_D: usize = 30;
const B3_GUARD_MAX_PARENTS: usize = 4;

/// A node, with 0-based indices. Displayed 1-based as `I3`, `X7`, `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Instrument(usize),
    Predictor(usize),
    Response,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Instrument(k) => write!(f, "I{}", k + 1),
            Node::Predictor(j) => write!(f, "X{}", j + 1),
            Node::Response => f.write_str("Y"),
        }
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "Y" {
            return Ok(Node::Response);
        }
        let bad = || Error::InvalidEdge(alloc::format!("unrecognised node label {s:?}"));
        let (kind, idx) = s.split_at(s.char_indices().nth(1).map(|(i, _)| i).ok_or_else(bad)?);
        let idx: usize = idx.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "I" => Ok(Node::Instrument(idx - 1)),
            "X" => Ok(Node::Predictor(idx - 1)),
            _ => Err(bad()),
        }
    }
}

/// Graph of a linear IV model. Predictors may be marked absent (after
/// marginalization) while keeping their original indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    m: usize,
    d: usize,
    present: Vec<bool>,
    adj: Vec<Vec<bool>>,
}

impl CausalGraph {
    /// Graph with `m` instruments, `d` predictors, the response and no edges.
    pub fn new(m: usize, d: usize) -> Self {
        let n = m + d + 1;
        Self { m, d, present: vec![true; d], adj: vec![vec![false; n]; n] }
    }

    pub fn instrument_count(&self) -> usize {
        self.m
    }

    pub fn predictor_count(&self) -> usize {
        self.d
    }

    fn node_count(&self) -> usize {
        self.m + self.d + 1
    }

    fn index(&self, node: Node) -> usize {
        match node {
            Node::Instrument(k) => k,
            Node::Predictor(j) => self.m + j,
            Node::Response => self.m + self.d,
        }
    }

    fn node(&self, idx: usize) -> Node {
        if idx < self.m {
            Node::Instrument(idx)
        } else if idx < self.m + self.d {
            Node::Predictor(idx - self.m)
        } else {
            Node::Response
        }
    }

    /// Whether `node` exists in this graph (predictors removed by marginalization do not).
    pub fn contains(&self, node: Node) -> bool {
        match node {
            Node::Instrument(k) => k < self.m,
            Node::Predictor(j) => j < self.d && self.present[j],
            Node::Response => true,
        }
    }

    fn live(&self, idx: usize) -> bool {
        self.contains(self.node(idx))
    }

    /// Predictor indices currently in the graph.
    pub fn predictors(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| self.present[j]).collect()
    }

    /// Adds `from -> to`, rejecting edges into instruments, out of `Y`, and cycles.
    pub fn add_edge(&mut self, from: Node, to: Node) -> Result<()> {
        if !self.contains(from) || !self.contains(to) {
            return Err(Error::InvalidEdge(alloc::format!("{from} -> {to}: unknown node")));
        }
        match (from, to) {
            (_, Node::Instrument(_)) => {
                return Err(Error::InvalidEdge(alloc::format!("{from} -> {to}: edge into an instrument")))
            }
            (Node::Response, _) => {
                return Err(Error::InvalidEdge(alloc::format!("{from} -> {to}: edge out of the response")))
            }
            _ => {}
        }
        let (u, v) = (self.index(from), self.index(to));
        if u == v || self.reaches(v, u) {
            return Err(Error::CyclicGraph);
        }
        self.adj[u][v] = true;
        Ok(())
    }

    pub fn has_edge(&self, from: Node, to: Node) -> bool {
        self.contains(from) && self.contains(to) && self.adj[self.index(from)][self.index(to)]
    }

    /// All edges in node order.
    pub fn edges(&self) -> Vec<(Node, Node)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if self.adj[u][v] {
                    out.push((self.node(u), self.node(v)));
                }
            }
        }
        out
    }

    /// Predictor parents of `Y`, ascending.
    pub fn response_parents(&self) -> Vec<usize> {
        let y = self.index(Node::Response);
        (0..self.d).filter(|&j| self.present[j] && self.adj[self.m + j][y]).collect()
    }

    fn children(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[u].iter().enumerate().filter(|(_, &e)| e).map(|(v, _)| v)
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            if core::mem::replace(&mut seen[u], true) {
                continue;
            }
            stack.extend(self.children(u));
        }
        false
    }

    /// Graph of `scm`: an edge wherever the coefficient exceeds `zero_tol` in magnitude.
    pub fn from_scm(scm: &Scm, zero_tol: f64) -> Result<Self> {
        let (d, m) = (scm.d(), scm.m());
        let mut g = Self::new(m, d);
        for j in 0..d {
            for k in 0..m {
                if scm.a()[(j, k)].abs() > zero_tol {
                    g.add_edge(Node::Instrument(k), Node::Predictor(j))?;
                }
            }
            for i in 0..d {
                if scm.b()[(j, i)].abs() > zero_tol {
                    g.add_edge(Node::Predictor(i), Node::Predictor(j))?;
                }
            }
            if scm.beta_star()[j].abs() > zero_tol {
                g.add_edge(Node::Predictor(j), Node::Response)?;
            }
        }
        Ok(g)
    }

    /// Instruments with a directed path into some predictor of `set`.
    pub fn instrument_ancestors(&self, set: &[usize]) -> Vec<usize> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> =
            set.iter().filter(|&&j| j < self.d && self.present[j]).map(|&j| self.m + j).collect();
        while let Some(v) = stack.pop() {
            if core::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend((0..n).filter(|&u| self.adj[u][v] && !seen[u]));
        }
        (0..self.m).filter(|&k| seen[k]).collect()
    }

    /// Latent projection onto the predictors in `keep`: retains all instruments,
    /// `keep` and `Y`, with an edge `u -> w` whenever a directed path from `u` to `w`
    /// has no intermediate node in `keep`.
    pub fn marginalize(&self, keep: &[usize]) -> Self {
        let n = self.node_count();
        let mut kept = vec![false; self.d];
        for &j in keep {
            if j < self.d && self.present[j] {
                kept[j] = true;
            }
        }
        let is_kept = |idx: usize| match self.node(idx) {
            Node::Predictor(j) => kept[j],
            _ => true,
        };
        let mut out = Self { m: self.m, d: self.d, present: kept.clone(), adj: vec![vec![false; n]; n] };
        for u in (0..n).filter(|&u| self.live(u) && is_kept(u)) {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = self.children(u).collect();
            while let Some(w) = stack.pop() {
                if core::mem::replace(&mut seen[w], true) {
                    continue;
                }
                if is_kept(w) {
                    out.adj[u][w] = true;
                } else {
                    stack.extend(self.children(w));
                }
            }
        }
        out
    }

    /// Maximum number of node-disjoint directed paths from the `sources`
    /// instruments to the `targets` predictors, with a minimum vertex cut of the
    /// same size. Endpoints may belong to the cut.
    pub fn max_node_disjoint_paths(&self, sources: &[usize], targets: &[usize]) -> DisjointPaths {
        let n = self.node_count();
        let src = 2 * n;
        let snk = 2 * n + 1;
        let inf = n + 1;
        let mut net = FlowNetwork::new(2 * n + 2);
        for v in (0..n).filter(|&v| self.live(v)) {
            net.add_arc(2 * v, 2 * v + 1, 1);
            for w in self.children(v).filter(|&w| self.live(w)) {
                net.add_arc(2 * v + 1, 2 * w, inf);
            }
        }
        for &k in sources.iter().filter(|&&k| k < self.m) {
            net.add_arc(src, 2 * k, inf);
        }
        for &j in targets.iter().filter(|&&j| j < self.d && self.present[j]) {
            let v = self.m + j;
            net.add_arc(2 * v + 1, snk, inf);
        }
        let count = net.max_flow(src, snk);
        let reach = net.residual_reachable(src);
        let cut = (0..n).filter(|&v| self.live(v) && reach[2 * v] && !reach[2 * v + 1]).map(|v| self.node(v)).collect();
        DisjointPaths { count, cut }
    }

    /// Graphical identifiability checks with respect to the response parents.
    pub fn check_b_conditions(&self, force: bool) -> Result<GraphReport> {
        let pa = self.response_parents();
        if pa.is_empty() {
            return Err(Error::InvalidConfig("the response has no parents".into()));
        }
        let live = self.predictors();
        if !force && live.len() > B3_GUARD_MAX_D && pa.len() > B3_GUARD_MAX_PARENTS {
            return Err(Error::SizeGuard {
                count: binomial(live.len(), pa.len()),
                budget: binomial(B3_GUARD_MAX_D, B3_GUARD_MAX_PARENTS),
            });
        }
        let instruments: Vec<usize> = (0..self.m).collect();
        let b1 = self.max_node_disjoint_paths(&instruments, &pa);
        let pa_ancestors = self.instrument_ancestors(&pa);

        let mut checks = Vec::new();
        let mut witness = None;
        for set in live.iter().copied().combinations(pa.len()) {
            if set == pa {
                continue;
            }
            if self.instrument_ancestors(&set) != pa_ancestors {
                continue;
            }
            let check = self.b3_check(&set);
            let ok = check.satisfied(pa.len());
            checks.push(check.clone());
            if !ok {
                witness = Some(check);
                break;
            }
        }
        Ok(GraphReport {
            b1: b1.count >= pa.len(),
            b1_paths: b1.count,
            b1_cut: b1.cut,
            b3: witness.is_none(),
            b3_checks: checks,
            b3_witness: witness,
            pa_y: pa,
        })
    }

    /// Evaluates both B3 alternatives for one candidate set against the response parents.
    pub fn b3_check(&self, set: &[usize]) -> B3Check {
        let pa = self.response_parents();
        let instruments: Vec<usize> = (0..self.m).collect();
        let union: Vec<usize> = set.iter().chain(pa.iter()).copied().sorted().dedup().collect();
        let cut = self.max_node_disjoint_paths(&instruments, &union);
        B3Check {
            set: set.to_vec(),
            ancestors_differ: self.instrument_ancestors(set) != self.instrument_ancestors(&pa),
            cut_size: cut.count,
            cut: cut.cut,
        }
    }

    /// Draws every edge coefficient i.i.d. uniform on `(-1.5, -0.5) U (0.5, 1.5)`.
    pub fn random_scm(&self, seed: u64, noise: NoiseSpec) -> Result<Scm> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, d) = (self.m, self.d);
        let mut a = DMatrix::zeros(d, m);
        let mut b = DMatrix::zeros(d, d);
        let mut beta = DVector::zeros(d);
        for (from, to) in self.edges() {
            let w = random_coefficient(&mut rng);
            match (from, to) {
                (Node::Instrument(k), Node::Predictor(j)) => a[(j, k)] = w,
                (Node::Predictor(i), Node::Predictor(j)) => b[(j, i)] = w,
                (Node::Predictor(j), Node::Response) => beta[j] = w,
                _ => unreachable!("edge kinds are validated on insertion"),
            }
        }
        Scm::new(b, a, beta, noise)
    }

    /// Graphviz rendering; instruments are boxes.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph G {\n  rankdir=LR;\n");
        for k in 0..self.m {
            let _ = writeln!(s, "  {} [shape=box];", Node::Instrument(k));
        }
        for j in self.predictors() {
            let _ = writeln!(s, "  {} [shape=circle];", Node::Predictor(j));
        }
        let _ = writeln!(s, "  Y [shape=circle, style=filled];");
        for (u, v) in self.edges() {
            let _ = writeln!(s, "  {u} -> {v};");
        }
        s.push_str("}\n");
        s
    }
}

/// Uniform on `(-1.5, -0.5) U (0.5, 1.5)`.
pub fn random_coefficient<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(0.5..1.5);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Result of a node-disjoint path computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjointPaths {
    pub count: usize,
    pub cut: Vec<Node>,
}

/// One candidate set examined for B3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct B3Check {
    pub set: Vec<usize>,
    /// Condition (i): instrument ancestors differ from those of the parents.
    pub ancestors_differ: bool,
    /// Minimum vertex cut between instruments and `set` union parents.
    pub cut_size: usize,
    pub cut: Vec<Node>,
}

impl B3Check {
    pub fn satisfied(&self, parent_count: usize) -> bool {
        self.ancestors_differ || self.cut_size > parent_count
    }
}

/// Outcome of the graphical checks. `b3_checks` lists every set whose
/// instrument ancestors coincide with the parents' (the sets that must be
/// rescued by the vertex-cut condition), up to the first violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphReport {
    pub pa_y: Vec<usize>,
    pub b1: bool,
    pub b1_paths: usize,
    pub b1_cut: Vec<Node>,
    pub b3: bool,
    pub b3_checks: Vec<B3Check>,
    pub b3_witness: Option<B3Check>,
}

/// Dense residual network for small max-flow problems (Edmonds-Karp).
struct FlowNetwork {
    cap: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        Self { cap: vec![vec![0; n]; n] }
    }

    fn add_arc(&mut self, u: usize, v: usize, c: usize) {
        self.cap[u][v] += c;
    }

    fn bfs_parents(&self, s: usize) -> Vec<Option<usize>> {
        let n = self.cap.len();
        let mut parent = vec![None; n];
        parent[s] = Some(s);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (v, &c) in self.cap[u].iter().enumerate() {
                if parent[v].is_none() && c > 0 {
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    fn max_flow(&mut self, s: usize, t: usize) -> usize {
        let mut flow = 0;
        loop {
            let parent = self.bfs_parents(s);
            if parent[t].is_none() {
                return flow;
            }
            let mut bottleneck = usize::MAX;
            let mut v = t;
            while v != s {
                let u = parent[v].unwrap();
                bottleneck = bottleneck.min(self.cap[u][v]);
                v = u;
            }
            let mut v = t;
            while v != s {
                let u = parent[v].unwrap();
                self.cap[u][v] -= bottleneck;
                self.cap[v][u] += bottleneck;
                v = u;
            }
            flow += bottleneck;
        }
    }

    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        self.bfs_parents(s).iter().map(Option::is_some).collect()
    }
}
