//! Problem-instance representation and feasibility analysis.
//!
//! A model instance is a class count `n`, an integer degree matrix `k`
//! (`k[a][b]` = number of class-`b` neighbours of every class-`a` vertex),
//! exact rational class ratios `alpha`, symmetric couplings `beta` on the
//! class-pair edge set, and per-class external fields `h`.
//!
//! Feasibility of `(k, alpha)` is an exact integer statement, so `alpha` is
//! kept as rationals throughout; floats never enter conditions i-iii.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// A full problem instance: `(n, k, alpha, beta, h)`.
///
/// Class indices are 0-based internally; the file format and all reports use
/// 1-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    n: usize,
    k: Vec<Vec<u32>>,
    alpha: Vec<Rational>,
    beta: BTreeMap<(usize, usize), f64>,
    h: Vec<f64>,
}

impl ModelSpec {
    /// Builds a spec and checks structural validity: consistent dimensions,
    /// positive ratios, couplings given exactly on the unordered pairs with
    /// `k_ab != 0`, and `beta >= 0` (antiferromagnetic couplings are out of
    /// scope). Feasibility conditions i/ii are *not* checked here; see
    /// [`validate_spec`].
    pub fn new(
        k: Vec<Vec<u32>>,
        alpha: Vec<Rational>,
        beta: BTreeMap<(usize, usize), f64>,
        h: Vec<f64>,
    ) -> Result<Self> {
        let n = k.len();
        if n == 0 {
            return Err(Error::InvalidInput("class count n must be >= 1".into()));
        }
        if k.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!(
                "degree matrix must be {n}x{n}"
            )));
        }
        if alpha.len() != n || h.len() != n {
            return Err(Error::InvalidInput(format!(
                "alpha and h must have length n={n} (got {} and {})",
                alpha.len(),
                h.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_positive()) {
            return Err(Error::InvalidInput("all alpha_a must be positive".into()));
        }
        for (&(a, b), &v) in &beta {
            if a > b || b >= n {
                return Err(Error::InvalidInput(format!(
                    "beta key ({},{}) is not an ordered class pair below n",
                    a + 1,
                    b + 1
                )));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "beta[{},{}] = {v} must be finite and >= 0",
                    a + 1,
                    b + 1
                )));
            }
        }
        // Couplings must cover exactly the unordered pairs of the edge set.
        for a in 0..n {
            for b in a..n {
                let present = k[a][b] != 0 || k[b][a] != 0;
                let given = beta.contains_key(&(a, b));
                if present && !given {
                    return Err(Error::InvalidInput(format!(
                        "missing beta for class pair ({},{})",
                        a + 1,
                        b + 1
                    )));
                }
                if !present && given {
                    return Err(Error::InvalidInput(format!(
                        "beta given for ({},{}) but k_ab = k_ba = 0",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("fields h must be finite".into()));
        }
        Ok(Self {
            n,
            k,
            alpha,
            beta,
            h,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self, a: usize, b: usize) -> u32 {
        self.k[a][b]
    }

    /// Vertex degree of class `a`: `k_a = sum_b k_ab`.
    pub fn degree(&self, a: usize) -> u32 {
        self.k[a].iter().sum()
    }

    pub fn alpha(&self, a: usize) -> Rational {
        self.alpha[a]
    }

    pub fn alpha_f64(&self, a: usize) -> f64 {
        *self.alpha[a].numer() as f64 / *self.alpha[a].denom() as f64
    }

    /// Coupling on the unordered pair `{a, b}`; 0 when the pair is not in E.
    pub fn beta(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b), a.max(b));
        self.beta.get(&key).copied().unwrap_or(0.0)
    }

    pub fn h(&self, a: usize) -> f64 {
        self.h[a]
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    /// All couplings equal (required by the homogeneous-beta critical line).
    pub fn beta_homogeneous(&self) -> Option<f64> {
        let mut it = self.beta.values();
        let first = *it.next()?;
        it.all(|&v| v == first).then_some(first)
    }

    /// Returns a copy with every coupling multiplied by `t` (the homothety
    /// used when integrating the pressure from beta = 0).
    pub fn scaled_beta(&self, t: f64) -> Self {
        let mut out = self.clone();
        for v in out.beta.values_mut() {
            *v *= t;
        }
        out
    }

    /// Returns a copy with the unordered coupling `{a,b}` replaced by `value`.
    pub fn with_beta(&self, a: usize, b: usize, value: f64) -> Result<Self> {
        let key = (a.min(b), a.max(b));
        let mut out = self.clone();
        match out.beta.get_mut(&key) {
            Some(v) => {
                *v = value;
                Ok(out)
            }
            None => Err(Error::InvalidInput(format!(
                "({},{}) is not an edge of the class graph",
                a + 1,
                b + 1
            ))),
        }
    }

    /// Returns a copy with fields replaced by `h`.
    pub fn with_fields(&self, h: Vec<f64>) -> Result<Self> {
        if h.len() != self.n {
            return Err(Error::InvalidInput("field vector length mismatch".into()));
        }
        let mut out = self.clone();
        out.h = h;
        Ok(out)
    }

    pub fn zero_field(&self) -> bool {
        self.h.iter().all(|&x| x == 0.0)
    }

    /// SHA-256 of the canonical serialization; identifies the instance in
    /// run manifests and graph sidecars.
    pub fn hash(&self) -> String {
        let json = self.to_json();
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("spec parse error: {e}")))?;
        file.into_spec()
    }

    pub fn to_json(&self) -> String {
        let file = SpecFile::from_spec(self);
        serde_json::to_string_pretty(&file).expect("spec serialization cannot fail")
    }
}

/// On-disk spec schema. Unknown keys are rejected.
///
/// `k` is the row-major n*n degree matrix, `alpha` holds exact "p/q" strings,
/// `beta` lists one entry per unordered class pair of the edge set, and class
/// labels `a`, `b` are 1-based.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    n: usize,
    k: Vec<u32>,
    alpha: Vec<String>,
    beta: Vec<BetaEntry>,
    h: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaEntry {
    a: usize,
    b: usize,
    value: f64,
}

fn parse_rational(text: &str) -> Result<Rational> {
    let parse_int = |s: &str| -> Result<i64> {
        s.trim()
            .parse::<i64>()
            .map_err(|_| Error::InvalidInput(format!("bad rational component {s:?}")))
    };
    match text.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (parse_int(p)?, parse_int(q)?);
            if q == 0 {
                return Err(Error::InvalidInput(format!("zero denominator in {text:?}")));
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(parse_int(text)?)),
    }
}

impl SpecFile {
    fn into_spec(self) -> Result<ModelSpec> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidInput("n must be >= 1".into()));
        }
        if self.k.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "k must hold n*n = {} entries, got {}",
                n * n,
                self.k.len()
            )));
        }
        let k: Vec<Vec<u32>> = self.k.chunks(n).map(|row| row.to_vec()).collect();
        let alpha = self
            .alpha
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let mut beta = BTreeMap::new();
        for entry in &self.beta {
            if entry.a == 0 || entry.b == 0 || entry.a > n || entry.b > n {
                return Err(Error::InvalidInput(format!(
                    "beta labels must be 1-based class indices <= n, got ({},{})",
                    entry.a, entry.b
                )));
            }
            let key = ((entry.a - 1).min(entry.b - 1), (entry.a - 1).max(entry.b - 1));
            if beta.insert(key, entry.value).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate beta entry for pair ({},{})",
                    entry.a, entry.b
                )));
            }
        }
        ModelSpec::new(k, alpha, beta, self.h)
    }

    fn from_spec(spec: &ModelSpec) -> Self {
        SpecFile {
            n: spec.n,
            k: spec.k.iter().flatten().copied().collect(),
            alpha: spec
                .alpha
                .iter()
                .map(|r| format!("{}/{}", r.numer(), r.denom()))
                .collect(),
            beta: spec
                .beta
                .iter()
                .map(|(&(a, b), &value)| BetaEntry {
                    a: a + 1,
                    b: b + 1,
                    value,
                })
                .collect(),
            h: spec.h.clone(),
        }
    }
}

/// The directed index set E = {(a,b): k_ab != 0} in lexicographic order.
///
/// This order is the canonical index map for every cavity vector and
/// non-backtracking matrix downstream, so serialized results are reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEdgeSet {
    edges: Vec<(usize, usize)>,
    index: BTreeMap<(usize, usize), usize>,
    neighbors: Vec<Vec<usize>>,
}

impl ClassEdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> (usize, usize) {
        self.edges[idx]
    }

    pub fn index_of(&self, a: usize, b: usize) -> Option<usize> {
        self.index.get(&(a, b)).copied()
    }

    /// E_a: neighbours of class `a` in the class graph.
    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.neighbors[a]
    }
}

/// Labels for the exact feasibility conditions on `(k, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionLabel {
    /// sum_a alpha_a = 1
    I,
    /// alpha_a k_ab = alpha_b k_ba for all a < b
    II,
    /// the support of k is strongly connected
    Irreducibility,
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionLabel::I => "i",
            ConditionLabel::II => "ii",
            ConditionLabel::Irreducibility => "irreducibility",
        };
        f.write_str(s)
    }
}

/// Outcome of [`validate_spec`]. Conditions iii/iv depend on N and are
/// reported through `smallest_feasible_n` and [`feasible_sizes`].
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub verdict: bool,
    pub violated_conditions: Vec<ConditionLabel>,
    pub smallest_feasible_n: Option<u64>,
    pub simply_cyclic: bool,
    pub notes: Vec<String>,
}

/// Checks conditions i, ii and irreducibility of `k`, and reports the class
/// graph's structural flags.
pub fn validate_spec(spec: &ModelSpec) -> FeasibilityReport {
    let n = spec.n();
    let mut violated = Vec::new();

    let total: Rational = (0..n).map(|a| spec.alpha(a)).sum();
    if total != Rational::one() {
        violated.push(ConditionLabel::I);
    }

    if (0..n).any(|a| {
        (a + 1..n).any(|b| {
            spec.alpha(a) * Rational::from_integer(spec.k(a, b) as i64)
                != spec.alpha(b) * Rational::from_integer(spec.k(b, a) as i64)
        })
    }) {
        violated.push(ConditionLabel::II);
    }

    if !support_strongly_connected(spec) {
        violated.push(ConditionLabel::Irreducibility);
    }

    let mut notes = Vec::new();
    for (&(a, b), &v) in &spec.beta {
        if v == 0.0 {
            notes.push(format!(
                "beta[{},{}] = 0 on an edge of E; the theory assumes beta > 0",
                a + 1,
                b + 1
            ));
        }
    }

    let verdict = violated.is_empty();
    FeasibilityReport {
        verdict,
        violated_conditions: violated,
        smallest_feasible_n: if verdict {
            smallest_feasible_n(spec)
        } else {
            None
        },
        simply_cyclic: is_simply_cyclic(spec),
        notes,
    }
}

/// BFS reachability on the boolean support of k, in both directions.
fn support_strongly_connected(spec: &ModelSpec) -> bool {
    let n = spec.n();
    let reach = |transpose: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(a) = stack.pop() {
            for b in 0..n {
                let connected = if transpose {
                    spec.k(b, a) != 0
                } else {
                    spec.k(a, b) != 0
                };
                if connected && !seen[b] {
                    seen[b] = true;
                    count += 1;
                    stack.push(b);
                }
            }
        }
        count
    };
    reach(false) == n && reach(true) == n
}

/// Smallest N satisfying conditions iii (alpha_a N integer) and iv
/// (N_a k_aa even), computed exactly from the alpha denominators.
fn smallest_feasible_n(spec: &ModelSpec) -> Option<u64> {
    let n0 = (0..spec.n())
        .map(|a| *spec.alpha(a).denom() as u64)
        .fold(1u64, |acc, d| acc.lcm(&d));
    for mult in [1u64, 2] {
        let cand = n0 * mult;
        if size_is_feasible(spec, cand) {
            return Some(cand);
        }
    }
    None
}

fn size_is_feasible(spec: &ModelSpec, n_vertices: u64) -> bool {
    (0..spec.n()).all(|a| {
        let na = spec.alpha(a) * Rational::from_integer(n_vertices as i64);
        if !na.is_integer() {
            return false;
        }
        let na = *na.numer() as u64;
        (na * spec.k(a, a) as u64) % 2 == 0
    })
}

/// All N <= n_max on which a k-regular graph exists (conditions iii and iv),
/// ascending.
pub fn feasible_sizes(spec: &ModelSpec, n_max: u64) -> Vec<u64> {
    (1..=n_max)
        .filter(|&n_vertices| size_is_feasible(spec, n_vertices))
        .collect()
}

/// Builds the deterministic, lexicographically ordered edge set of the class
/// graph.
pub fn class_edge_set(spec: &ModelSpec) -> ClassEdgeSet {
    let n = spec.n();
    let mut edges = Vec::new();
    let mut neighbors = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            if spec.k(a, b) != 0 {
                edges.push((a, b));
                neighbors[a].push(b);
            }
        }
    }
    let index = edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect::<BTreeMap<_, _>>();
    ClassEdgeSet {
        edges,
        index,
        neighbors,
    }
}

/// Whether the class graph consists of exactly the two oppositely directed
/// n-cycles, with at most one of them able to backtrack.
///
/// Convention: n = 1 is never simply cyclic. The definition's +/- adjacency
/// degenerates mod 1, and the single-class self-loop case is governed by the
/// k_a >= 2 hypotheses elsewhere.
pub fn is_simply_cyclic(spec: &ModelSpec) -> bool {
    let n = spec.n();
    if n == 1 {
        return false;
    }
    let plus_adjacent = |a: usize, b: usize| (a + 1) % n == b % n;
    let minus_adjacent = |a: usize, b: usize| (b + 1) % n == a % n;
    for a in 0..n {
        for b in 0..n {
            let adjacent = plus_adjacent(a, b) || minus_adjacent(a, b);
            if (spec.k(a, b) > 0) != adjacent {
                return false;
            }
        }
    }
    let heavy_plus = (0..n).any(|a| (0..n).any(|b| plus_adjacent(a, b) && spec.k(a, b) >= 2));
    let heavy_minus = (0..n).any(|a| (0..n).any(|b| minus_adjacent(a, b) && spec.k(a, b) >= 2));
    !(heavy_plus && heavy_minus)
}

/// For each class f, the smallest depth s at which the pruned tree
/// T_a^(b)(s) contains a class-f vertex.
///
/// Computed by BFS over *walks on the class graph: a step c -> d needs
/// k_cd >= 1, returning to the parent class needs k_cd >= 2, and the initial
/// step a -> b is allowed only when k_ab >= 2.
pub fn star_walk_reach(spec: &ModelSpec, a: usize, b: usize) -> Result<Vec<usize>> {
    let n = spec.n();
    if a >= n || b >= n || spec.k(a, b) == 0 {
        return Err(Error::InvalidInput(format!(
            "({},{}) is not an edge of the class graph",
            a + 1,
            b + 1
        )));
    }
    if let Some(c) = (0..n).find(|&c| spec.degree(c) < 2) {
        return Err(Error::UnsupportedRegime(format!(
            "star-walk reach requires k_c >= 2 for every class; class {} has degree {}",
            c + 1,
            spec.degree(c)
        )));
    }
    // BFS state: (current class, class of the tree parent).
    let mut depth_of_state = vec![vec![usize::MAX; n]; n];
    let mut reach = vec![usize::MAX; n];
    reach[a] = 0;
    let mut frontier = vec![(a, b)];
    depth_of_state[a][b] = 0;
    let mut depth = 0usize;
    while !frontier.is_empty() && reach.iter().any(|&d| d == usize::MAX) {
        depth += 1;
        let mut next = Vec::new();
        for &(c, parent) in &frontier {
            for d in 0..n {
                if spec.k(c, d) == 0 {
                    continue;
                }
                if d == parent && spec.k(c, d) < 2 {
                    continue; // backtracking across a weight-1 edge
                }
                if depth_of_state[d][c] == usize::MAX {
                    depth_of_state[d][c] = depth;
                    if reach[d] == usize::MAX {
                        reach[d] = depth;
                    }
                    next.push((d, c));
                }
            }
        }
        frontier = next;
    }
    Ok(reach)
}
