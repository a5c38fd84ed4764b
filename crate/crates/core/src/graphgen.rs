//! Uniform-ish sampling of k-regular multispecies graphs by half-edge
//! matching, neighbourhood extraction, and the tree-likeness estimate.
//!
//! Each class-pair block is matched independently on its own RNG stream, so
//! the sampling order of one block never perturbs another. Loops and
//! multi-edges left by the matching are repaired by double-edge swaps that
//! preserve all class-degree counts; if a block cannot be repaired it is
//! resampled from scratch, up to 100 times.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{feasible_sizes, validate_spec, ModelSpec};

const RESAMPLE_CAP: u32 = 100;

/// A concrete labeled graph realization with exact per-class regularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultispeciesGraph {
    n_vertices: usize,
    class_of: Vec<usize>,
    adjacency: Vec<Vec<u32>>,
    seed: u64,
}

impl MultispeciesGraph {
    pub fn vertex_count(&self) -> usize {
        self.n_vertices
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.class_of[v]
    }

    pub fn classes(&self) -> &[usize] {
        &self.class_of
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Undirected edges (u < v), lexicographic.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.n_vertices {
            for &v in &self.adjacency[u] {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    /// Edge-list text format: header "N n", then N lines "vertex class"
    /// (classes 1-based), then one "u v" line per edge.
    pub fn to_edge_list(&self, n_classes: usize) -> String {
        let mut out = format!("{} {}\n", self.n_vertices, n_classes);
        for v in 0..self.n_vertices {
            out.push_str(&format!("{} {}\n", v, self.class_of[v] + 1));
        }
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str, seed: u64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty graph file".into()))?;
        let mut it = header.split_whitespace();
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|x| x.parse().ok())
                .ok_or_else(|| Error::InvalidInput("bad graph header".into()))
        };
        let n_vertices = parse(it.next())?;
        let n_classes = parse(it.next())?;
        let mut class_of = vec![0usize; n_vertices];
        for _ in 0..n_vertices {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidInput("truncated vertex section".into()))?;
            let mut it = line.split_whitespace();
            let v = parse(it.next())?;
            let c = parse(it.next())?;
            if v >= n_vertices || c == 0 || c > n_classes {
                return Err(Error::InvalidInput(format!("bad vertex line {line:?}")));
            }
            class_of[v] = c - 1;
        }
        let mut adjacency = vec![Vec::new(); n_vertices];
        for line in lines {
            let mut it = line.split_whitespace();
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidInput(format!("bad edge line {line:?}")));
            }
            adjacency[u].push(v as u32);
            adjacency[v].push(u as u32);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n_vertices,
            class_of,
            adjacency,
            seed,
        })
    }

    /// JSON metadata sidecar for a serialized graph.
    pub fn metadata_json(&self, spec: &ModelSpec) -> String {
        serde_json::to_string_pretty(&json!({
            "schema_version": 1,
            "spec_hash": spec.hash(),
            "seed": self.seed,
            "n_vertices": self.n_vertices,
        }))
        .expect("json encoding cannot fail")
    }
}

/// One class-pair block of the matching: either bipartite (a < b) or
/// intra-class (a == b).
struct BlockEdges {
    edges: Vec<(u32, u32)>,
    counts: HashMap<(u32, u32), u32>,
}

impl BlockEdges {
    fn new(edges: Vec<(u32, u32)>) -> Self {
        let mut counts = HashMap::new();
        for &e in &edges {
            *counts.entry(normalize(e)).or_insert(0) += 1;
        }
        Self { edges, counts }
    }

    fn occupied(&self, e: (u32, u32)) -> u32 {
        self.counts.get(&normalize(e)).copied().unwrap_or(0)
    }

    fn replace(&mut self, idx: usize, new_edge: (u32, u32)) {
        let old = normalize(self.edges[idx]);
        if let Some(c) = self.counts.get_mut(&old) {
            *c -= 1;
            if *c == 0 {
                self.counts.remove(&old);
            }
        }
        *self.counts.entry(normalize(new_edge)).or_insert(0) += 1;
        self.edges[idx] = new_edge;
    }

    /// Indices of edges that are self-loops or extra copies of a pair.
    fn bad_indices(&self) -> Vec<usize> {
        let mut seen: HashMap<(u32, u32), u32> = HashMap::new();
        let mut bad = Vec::new();
        for (i, &e) in self.edges.iter().enumerate() {
            let key = normalize(e);
            if e.0 == e.1 {
                bad.push(i);
                continue;
            }
            let c = seen.entry(key).or_insert(0);
            *c += 1;
            if *c > 1 {
                bad.push(i);
            }
        }
        bad
    }
}

fn normalize(e: (u32, u32)) -> (u32, u32) {
    (e.0.min(e.1), e.0.max(e.1))
}

/// Samples a simple k-regular multispecies graph. Deterministic in
/// (spec, n_vertices, seed).
pub fn generate(spec: &ModelSpec, n_vertices: u64, seed: u64) -> Result<MultispeciesGraph> {
    let report = validate_spec(spec);
    if !report.verdict {
        return Err(Error::InvalidInput(format!(
            "spec violates conditions {:?}",
            report.violated_conditions
        )));
    }
    if !feasible_sizes(spec, n_vertices).contains(&n_vertices) {
        return Err(Error::Infeasible {
            n: n_vertices,
            reason: "conditions iii/iv fail (alpha_a N integer, N_a k_aa even)".into(),
        });
    }
    let n_classes = spec.n();
    let n_vertices = n_vertices as usize;
    // class a occupies the contiguous vertex range [start[a], start[a+1])
    let mut start = vec![0usize; n_classes + 1];
    for a in 0..n_classes {
        let na = spec.alpha(a) * crate::model::Rational::from_integer(n_vertices as i64);
        start[a + 1] = start[a] + *na.numer() as usize;
    }
    let class_of: Vec<usize> = (0..n_classes)
        .flat_map(|a| std::iter::repeat(a).take(start[a + 1] - start[a]))
        .collect();

    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n_vertices];
    let mut block_id = 0u64;
    for a in 0..n_classes {
        for b in a..n_classes {
            if spec.k(a, b) == 0 {
                continue;
            }
            block_id += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block_id);
            let block = if a == b {
                sample_intra_block(&mut rng, start[a] as u32, start[a + 1] as u32, spec.k(a, a))?
            } else {
                sample_bipartite_block(
                    &mut rng,
                    (start[a] as u32, start[a + 1] as u32),
                    (start[b] as u32, start[b + 1] as u32),
                    spec.k(a, b),
                    spec.k(b, a),
                )?
            };
            for (u, v) in block {
                adjacency[u as usize].push(v);
                adjacency[v as usize].push(u);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(MultispeciesGraph {
        n_vertices,
        class_of,
        adjacency,
        seed,
    })
}

fn sample_intra_block(
    rng: &mut ChaCha8Rng,
    lo: u32,
    hi: u32,
    k: u32,
) -> Result<Vec<(u32, u32)>> {
    let mut stubs: Vec<u32> = (lo..hi)
        .flat_map(|v| std::iter::repeat(v).take(k as usize))
        .collect();
    for _ in 0..RESAMPLE_CAP {
        shuffle(rng, &mut stubs);
        let edges: Vec<(u32, u32)> = stubs.chunks(2).map(|c| (c[0], c[1])).collect();
        let mut block = BlockEdges::new(edges);
        if repair_block(rng, &mut block, false) {
            return Ok(block.edges);
        }
    }
    Err(Error::SamplingFailed {
        block: format!("intra-class block on [{lo},{hi})"),
        resamples: RESAMPLE_CAP,
        detail: "double-edge swaps kept reintroducing loops or multi-edges".into(),
    })
}

fn sample_bipartite_block(
    rng: &mut ChaCha8Rng,
    (a_lo, a_hi): (u32, u32),
    (b_lo, b_hi): (u32, u32),
    k_ab: u32,
    k_ba: u32,
) -> Result<Vec<(u32, u32)>> {
    let left: Vec<u32> = (a_lo..a_hi)
        .flat_map(|v| std::iter::repeat(v).take(k_ab as usize))
        .collect();
    let mut right: Vec<u32> = (b_lo..b_hi)
        .flat_map(|v| std::iter::repeat(v).take(k_ba as usize))
        .collect();
    debug_assert_eq!(left.len(), right.len(), "condition ii/iii bookkeeping");
    for _ in 0..RESAMPLE_CAP {
        shuffle(rng, &mut right);
        let edges: Vec<(u32, u32)> = left.iter().copied().zip(right.iter().copied()).collect();
        let mut block = BlockEdges::new(edges);
        if repair_block(rng, &mut block, true) {
            return Ok(block.edges);
        }
    }
    Err(Error::SamplingFailed {
        block: format!("bipartite block [{a_lo},{a_hi}) x [{b_lo},{b_hi})"),
        resamples: RESAMPLE_CAP,
        detail: "double-edge swaps kept reintroducing multi-edges".into(),
    })
}

/// Random double-edge swaps until the block is simple. Swaps preserve every
/// vertex's stub count. Returns false when the attempt budget runs out.
fn repair_block(rng: &mut ChaCha8Rng, block: &mut BlockEdges, bipartite: bool) -> bool {
    let budget = 200 * block.edges.len() + 200;
    let mut attempts = 0usize;
    loop {
        let bad = block.bad_indices();
        if bad.is_empty() {
            return true;
        }
        for &i in &bad {
            attempts += 1;
            if attempts > budget {
                return false;
            }
            let j = rng.gen_range(0..block.edges.len());
            if i == j {
                continue;
            }
            let (u1, v1) = block.edges[i];
            let (u2, v2) = block.edges[j];
            // bipartite blocks must keep (left, right) orientation
            let (new_i, new_j) = if bipartite || rng.gen_bool(0.5) {
                ((u1, v2), (u2, v1))
            } else {
                ((u1, u2), (v1, v2))
            };
            if new_i.0 == new_i.1 || new_j.0 == new_j.1 {
                continue;
            }
            let same_pair = normalize(new_i) == normalize(new_j);
            if block.occupied(new_i) > 0 || block.occupied(new_j) > 0 || same_pair {
                continue;
            }
            block.replace(i, new_i);
            block.replace(j, new_j);
        }
    }
}

/// Fisher-Yates with the block's own stream.
fn shuffle(rng: &mut ChaCha8Rng, items: &mut [u32]) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Exact regularity check: the graph is simple and every class-a vertex has
/// exactly k_ab class-b neighbours.
pub fn verify_regularity(graph: &MultispeciesGraph, spec: &ModelSpec) -> bool {
    let n_classes = spec.n();
    if graph.classes().iter().any(|&c| c >= n_classes) {
        return false;
    }
    for v in 0..graph.vertex_count() {
        let neighbors = graph.neighbors(v);
        // sorted adjacency: loops and duplicates show up as equal neighbours
        if neighbors.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        if neighbors.iter().any(|&u| u as usize == v) {
            return false;
        }
        let mut counts = vec![0u32; n_classes];
        for &u in neighbors {
            counts[graph.class_of(u as usize)] += 1;
        }
        let a = graph.class_of(v);
        if (0..n_classes).any(|b| counts[b] != spec.k(a, b)) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallCenter {
    Vertex(usize),
    Edge(usize, usize),
}

/// A radius-t neighbourhood: the induced subgraph on all vertices within
/// distance t of the center (of either endpoint for an edge center).
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: BallCenter,
    pub radius: usize,
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub is_tree: bool,
}

pub fn ball(graph: &MultispeciesGraph, center: BallCenter, radius: usize) -> Ball {
    let seeds: Vec<usize> = match center {
        BallCenter::Vertex(v) => vec![v],
        BallCenter::Edge(u, v) => vec![u, v],
    };
    let mut dist = vec![usize::MAX; graph.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    for &s in &seeds {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        if dist[v] == radius {
            continue;
        }
        for &u in graph.neighbors(v) {
            let u = u as usize;
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let vertices: Vec<usize> = (0..graph.vertex_count())
        .filter(|&v| dist[v] != usize::MAX)
        .collect();
    let inside = |v: usize| dist[v] != usize::MAX;
    let mut edges = Vec::new();
    for &v in &vertices {
        for &u in graph.neighbors(v) {
            let u = u as usize;
            if u > v && inside(u) {
                edges.push((v, u));
            }
        }
    }
    // the ball is connected by construction, so tree <=> |E| = |V| - 1
    let is_tree = edges.len() + 1 == vertices.len();
    Ball {
        center,
        radius,
        vertices,
        edges,
        is_tree,
    }
}

/// Monte Carlo estimate of P(ball of radius t around a uniform vertex is a
/// tree), over independent graph draws.
#[derive(Debug, Clone, Copy)]
pub struct TreeFraction {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u32,
}

pub fn tree_fraction_estimate(
    spec: &ModelSpec,
    n_vertices: u64,
    radius: usize,
    trials: u32,
    seed: u64,
) -> Result<TreeFraction> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    master.set_stream(u64::MAX);
    let mut hits = 0u32;
    for _ in 0..trials {
        let graph_seed = master.gen::<u64>();
        let center = master.gen_range(0..n_vertices) as usize;
        let graph = generate(spec, n_vertices, graph_seed)?;
        if ball(&graph, BallCenter::Vertex(center), radius).is_tree {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok(TreeFraction {
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}
