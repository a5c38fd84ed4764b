//! Brute-force Gibbs oracle on small graphs and explicit k-regular trees.
//!
//! Everything here is a deliberately dumb, independent check: exact sums over
//! all spin configurations, explicit tree construction by the generation
//! rules, and scalar bisection for the single-class fixed points. No belief
//! propagation shortcuts are allowed inside this module.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cavity::{self, CavityVector};
use crate::error::{Error, Result};
use crate::model::{class_edge_set, ModelSpec};

/// Enumeration budget: exact sums run over 2^m states of the unpinned spins.
pub const MAX_FREE_SPINS: usize = 26;
/// Tree building budget; enumeration constraints are the caller's business.
const MAX_TREE_VERTICES: usize = 1_000_000;
/// Incremental-energy drift control: recompute the configuration energy from
/// scratch this often while walking the Gray code.
const RESYNC_PERIOD: u64 = 4096;

/// A small labeled spin system. Vertices carry extended-real fields: a field
/// of +inf or -inf pins the spin to +1 or -1, and enumeration then runs over
/// the remaining free spins only.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    fields: Vec<f64>,
}

impl SpinSystem {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, fields: Vec<f64>) -> Result<Self> {
        if fields.len() != n {
            return Err(Error::InvalidInput(
                "field vector length must equal the vertex count".into(),
            ));
        }
        for &(u, v, beta) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u},{v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at vertex {u}")));
            }
            if beta.is_nan() {
                return Err(Error::InvalidInput("NaN coupling".into()));
            }
        }
        if fields.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidInput("NaN field".into()));
        }
        Ok(Self { n, edges, fields })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// Pins a vertex to the given sign (the +/-infinite-field limit).
    pub fn pin(&mut self, vertex: usize, sign: i8) {
        self.fields[vertex] = if sign >= 0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }

    pub fn free_spin_count(&self) -> usize {
        self.fields.iter().filter(|f| f.is_finite()).count()
    }
}

/// Compensated accumulator; the moment sums see millions of additions and the
/// oracle gaps are asserted down to 1e-12.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// The reduced enumeration problem after pinning: free spins, effective
/// fields (original plus pinned-neighbor couplings), and free-free edges.
struct FreeProblem {
    free_vertices: Vec<usize>,
    free_index: Vec<Option<usize>>,
    pinned_sign: Vec<i8>,
    eff_fields: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
    /// Couplings between two pinned spins (constant energy offset).
    base_gain: f64,
}

impl FreeProblem {
    fn build(system: &SpinSystem) -> Result<Self> {
        let n = system.n;
        let mut pinned_sign = vec![0i8; n];
        let mut free_vertices = Vec::new();
        let mut free_index = vec![None; n];
        for v in 0..n {
            let f = system.fields[v];
            if f.is_finite() {
                free_index[v] = Some(free_vertices.len());
                free_vertices.push(v);
            } else {
                pinned_sign[v] = if f > 0.0 { 1 } else { -1 };
            }
        }
        let m = free_vertices.len();
        if m > MAX_FREE_SPINS {
            return Err(Error::TooLarge(format!(
                "{m} free spins exceed the enumeration budget of {MAX_FREE_SPINS}"
            )));
        }
        let mut eff_fields: Vec<f64> = free_vertices.iter().map(|&v| system.fields[v]).collect();
        let mut adj = vec![Vec::new(); m];
        let mut base_gain = 0.0;
        for &(u, v, beta) in &system.edges {
            match (free_index[u], free_index[v]) {
                (Some(i), Some(j)) => {
                    adj[i].push((j, beta));
                    adj[j].push((i, beta));
                }
                (Some(i), None) => eff_fields[i] += beta * pinned_sign[v] as f64,
                (None, Some(j)) => eff_fields[j] += beta * pinned_sign[u] as f64,
                (None, None) => {
                    base_gain += beta * (pinned_sign[u] as f64) * (pinned_sign[v] as f64)
                }
            }
        }
        Ok(Self {
            free_vertices,
            free_index,
            pinned_sign,
            eff_fields,
            adj,
            base_gain,
        })
    }

    fn gain_of(&self, spins: &[i8]) -> f64 {
        let mut g = self.base_gain;
        for (i, &s) in spins.iter().enumerate() {
            g += self.eff_fields[i] * s as f64;
            for &(j, beta) in &self.adj[i] {
                if j > i {
                    g += beta * (s as f64) * (spins[j] as f64);
                }
            }
        }
        g
    }

    /// Walks all 2^m free configurations in Gray-code order, handing the
    /// Boltzmann gain (log-weight) and the spin array to the visitor.
    fn walk(&self, mut visit: impl FnMut(f64, &[i8])) {
        let m = self.free_vertices.len();
        let mut spins = vec![-1i8; m];
        let mut gain = self.gain_of(&spins);
        visit(gain, &spins);
        let total: u64 = 1u64 << m;
        for i in 1..total {
            let bit = i.trailing_zeros() as usize;
            let old = spins[bit] as f64;
            let mut local = self.eff_fields[bit];
            for &(j, beta) in &self.adj[bit] {
                local += beta * spins[j] as f64;
            }
            spins[bit] = -spins[bit];
            gain -= 2.0 * old * local;
            if i % RESYNC_PERIOD == 0 {
                gain = self.gain_of(&spins);
            }
            visit(gain, &spins);
        }
    }

    /// Two-pass enumeration: find the max gain, then hand max-shifted weights
    /// to the accumulator. Returns (log_z,) via the closure's byproducts.
    fn weighted_walk(&self, mut visit: impl FnMut(f64, &[i8])) -> f64 {
        let mut max_gain = f64::NEG_INFINITY;
        self.walk(|g, _| {
            if g > max_gain {
                max_gain = g;
            }
        });
        let mut z = Kahan::default();
        self.walk(|g, spins| {
            let w = (g - max_gain).exp();
            z.add(w);
            visit(w, spins);
        });
        max_gain + z.value().ln()
    }
}

/// Exact Gibbs summary: log partition function, all single-spin expectations,
/// and the two-spin expectation along every edge of the system.
///
/// Pinned vertices report magnetization +/-1 exactly; their (infinite) field
/// terms are left out of log Z.
#[derive(Debug, Clone)]
pub struct GibbsSummary {
    pub log_z: f64,
    pub magnetization: Vec<f64>,
    pub edge_correlation: Vec<f64>,
}

pub fn gibbs_enumerate(system: &SpinSystem) -> Result<GibbsSummary> {
    let problem = FreeProblem::build(system)?;
    let m = problem.free_vertices.len();
    let mut z = Kahan::default();
    let mut mag = vec![Kahan::default(); m];
    let mut corr = vec![Kahan::default(); system.edges.len()];
    let edge_pairs: Vec<(Option<usize>, Option<usize>)> = system
        .edges
        .iter()
        .map(|&(u, v, _)| (problem.free_index[u], problem.free_index[v]))
        .collect();
    let log_z = problem.weighted_walk(|w, spins| {
        z.add(w);
        for (i, acc) in mag.iter_mut().enumerate() {
            acc.add(w * spins[i] as f64);
        }
        for (e, acc) in corr.iter_mut().enumerate() {
            let (u, v, _) = system.edges[e];
            let su = match edge_pairs[e].0 {
                Some(i) => spins[i] as f64,
                None => problem.pinned_sign[u] as f64,
            };
            let sv = match edge_pairs[e].1 {
                Some(j) => spins[j] as f64,
                None => problem.pinned_sign[v] as f64,
            };
            acc.add(w * su * sv);
        }
    });
    let z = z.value();
    let mut magnetization = vec![0.0; system.n];
    for v in 0..system.n {
        magnetization[v] = match problem.free_index[v] {
            Some(i) => mag[i].value() / z,
            None => problem.pinned_sign[v] as f64,
        };
    }
    let edge_correlation = corr.iter().map(|c| c.value() / z).collect();
    Ok(GibbsSummary {
        log_z,
        magnetization,
        edge_correlation,
    })
}

/// Reduces a spin multiset to a subset by sigma_i^2 = 1.
fn reduce_multiset(indices: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut count = vec![0u32; n];
    for &i in indices {
        if i >= n {
            return Err(Error::InvalidInput(format!("vertex {i} out of range")));
        }
        count[i] += 1;
    }
    Ok((0..n).filter(|&i| count[i] % 2 == 1).collect())
}

/// Exact moments <sigma_A> for a list of index multisets A.
pub fn gibbs_moments(system: &SpinSystem, subsets: &[Vec<usize>]) -> Result<Vec<f64>> {
    let problem = FreeProblem::build(system)?;
    let reduced: Vec<Vec<usize>> = subsets
        .iter()
        .map(|s| reduce_multiset(s, system.n))
        .collect::<Result<_>>()?;
    // split each subset into its pinned sign and free-index part
    let mut fixed_sign = vec![1.0f64; reduced.len()];
    let mut free_parts: Vec<Vec<usize>> = Vec::with_capacity(reduced.len());
    for (r, subset) in reduced.iter().enumerate() {
        let mut part = Vec::new();
        for &v in subset {
            match problem.free_index[v] {
                Some(i) => part.push(i),
                None => fixed_sign[r] *= problem.pinned_sign[v] as f64,
            }
        }
        free_parts.push(part);
    }
    let mut z = Kahan::default();
    let mut sums = vec![Kahan::default(); reduced.len()];
    problem.weighted_walk(|w, spins| {
        z.add(w);
        for (r, part) in free_parts.iter().enumerate() {
            let mut prod = 1.0;
            for &i in part {
                prod *= spins[i] as f64;
            }
            sums[r].add(w * prod);
        }
    });
    let z = z.value();
    Ok(sums
        .iter()
        .zip(&fixed_sign)
        .map(|(s, sign)| sign * s.value() / z)
        .collect())
}

/// An explicit k-regular tree (or pruned subtree), vertex 0 is the root.
#[derive(Debug, Clone)]
pub struct ExplicitTree {
    pub classes: Vec<usize>,
    pub parents: Vec<Option<usize>>,
    pub depths: Vec<usize>,
    /// Vertices of the last generation T_*.
    pub boundary: Vec<usize>,
    pub depth: usize,
    pub variant: TreeVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeVariant {
    /// T_a(t): the root has k_ab children of every class b.
    Full,
    /// T_a^(b)(t): the root has k_ab - 1 children of class b.
    Pruned(usize),
}

impl ExplicitTree {
    pub fn vertex_count(&self) -> usize {
        self.classes.len()
    }
}

/// Builds the tree by the generation rules: a class-b vertex with a class-c
/// parent has k_bc - 1 children of class c and k_bd children of every other
/// class d.
pub fn build_tree(
    spec: &ModelSpec,
    root_class: usize,
    t: usize,
    variant: TreeVariant,
) -> Result<ExplicitTree> {
    let n = spec.n();
    if root_class >= n {
        return Err(Error::InvalidInput("root class out of range".into()));
    }
    if let TreeVariant::Pruned(b) = variant {
        if b >= n || spec.k(root_class, b) == 0 {
            return Err(Error::InvalidInput(format!(
                "({},{}) is not an edge of the class graph",
                root_class + 1,
                b + 1
            )));
        }
    }
    let mut classes = vec![root_class];
    let mut parents = vec![None];
    let mut depths = vec![0usize];
    let mut frontier = vec![0usize];
    for depth in 1..=t {
        let mut next = Vec::new();
        for &v in &frontier {
            let class = classes[v];
            for child_class in 0..n {
                let mut count = spec.k(class, child_class);
                if count == 0 {
                    continue;
                }
                let parent_class = match parents[v] {
                    Some(p) => Some(classes[p]),
                    None => match variant {
                        TreeVariant::Pruned(b) => Some(b),
                        TreeVariant::Full => None,
                    },
                };
                if parent_class == Some(child_class) {
                    count -= 1;
                }
                for _ in 0..count {
                    if classes.len() >= MAX_TREE_VERTICES {
                        return Err(Error::TooLarge(format!(
                            "tree exceeds {MAX_TREE_VERTICES} vertices"
                        )));
                    }
                    classes.push(child_class);
                    parents.push(Some(v));
                    depths.push(depth);
                    next.push(classes.len() - 1);
                }
            }
        }
        frontier = next;
    }
    let boundary = (0..classes.len()).filter(|&v| depths[v] == t).collect();
    Ok(ExplicitTree {
        classes,
        parents,
        depths,
        boundary,
        depth: t,
        variant,
    })
}

/// Ising system on an explicit tree: couplings beta_{class,class} along tree
/// edges, fields h_class everywhere, plus the boundary field
/// h*_{class}^{(parent class)} on the last generation.
pub fn tree_spin_system(
    spec: &ModelSpec,
    tree: &ExplicitTree,
    h_star: &CavityVector,
) -> Result<SpinSystem> {
    let edges_set = class_edge_set(spec);
    if h_star.len() != edges_set.len() {
        return Err(Error::Structural(
            "boundary field does not match the edge set".into(),
        ));
    }
    let mut fields: Vec<f64> = tree.classes.iter().map(|&c| spec.h(c)).collect();
    for &v in &tree.boundary {
        let class = tree.classes[v];
        let parent_class = match tree.parents[v] {
            Some(p) => tree.classes[p],
            None => match tree.variant {
                TreeVariant::Pruned(b) => b,
                TreeVariant::Full => {
                    // A depth-0 full tree has no parent direction; only a
                    // homogeneous boundary field is meaningful there.
                    let first = h_star.get(0);
                    if h_star.values().iter().any(|&x| x != first) {
                        return Err(Error::InvalidInput(
                            "depth-0 full tree needs a homogeneous boundary field".into(),
                        ));
                    }
                    fields[v] += first;
                    continue;
                }
            },
        };
        let idx = edges_set.index_of(class, parent_class).ok_or_else(|| {
            Error::Structural(format!(
                "boundary vertex pair ({},{}) missing from the edge set",
                class + 1,
                parent_class + 1
            ))
        })?;
        fields[v] += h_star.get(idx);
    }
    let mut edges = Vec::with_capacity(tree.vertex_count().saturating_sub(1));
    for v in 1..tree.vertex_count() {
        let p = tree.parents[v].expect("non-root vertex has a parent");
        edges.push((p, v, spec.beta(tree.classes[p], tree.classes[v])));
    }
    SpinSystem::new(tree.vertex_count(), edges, fields)
}

/// One oracle comparison: the recursion value against the exact enumeration.
#[derive(Debug, Clone)]
pub struct ComparisonRecord {
    pub recursion_value: f64,
    pub exact_value: f64,
    pub gap: f64,
}

impl ComparisonRecord {
    fn new(recursion_value: f64, exact_value: f64) -> Self {
        ComparisonRecord {
            recursion_value,
            exact_value,
            gap: (recursion_value - exact_value).abs(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "recursion_value": self.recursion_value,
            "exact_value": self.exact_value,
            "gap": self.gap,
        }))
        .expect("json encoding cannot fail")
    }
}

/// Compares the depth-t recursion magnetization of the root against exact
/// enumeration of the corresponding explicit tree with boundary field
/// `h_star`.
pub fn tree_recursion_oracle(
    spec: &ModelSpec,
    root_class: usize,
    t: usize,
    variant: TreeVariant,
    h_star: &CavityVector,
) -> Result<ComparisonRecord> {
    let tree = build_tree(spec, root_class, t, variant)?;
    let system = tree_spin_system(spec, &tree, h_star)?;
    let exact = gibbs_moments(&system, &[vec![0]])?[0];

    let recursion_mag = match variant {
        TreeVariant::Pruned(b) => {
            let states = cavity::recursion_trajectory(spec, h_star, t)?;
            let edges = class_edge_set(spec);
            let idx = edges
                .index_of(root_class, b)
                .ok_or_else(|| Error::InvalidInput("pruned direction not in E".into()))?;
            states[t].get(idx).tanh()
        }
        TreeVariant::Full => {
            if t == 0 {
                (spec.h(root_class) + h_star.get(0)).tanh()
            } else {
                let states = cavity::recursion_trajectory(spec, h_star, t - 1)?;
                let edges = class_edge_set(spec);
                let mut z = spec.h(root_class);
                for &c in edges.neighbors(root_class) {
                    let idx = edges.index_of(c, root_class).expect("symmetric edge set");
                    z += spec.k(root_class, c) as f64
                        * cavity::f_beta(spec.beta(root_class, c), states[t - 1].get(idx))?;
                }
                z.tanh()
            }
        }
    };
    Ok(ComparisonRecord::new(recursion_mag, exact))
}

/// Compares the two-point formula
/// tanh(beta + atanh(m_w^(w') m_w'^(w))) — with the two split-subtree root
/// magnetizations taken from enumeration — against the direct two-spin
/// expectation on the edge-rooted tree. Free boundary.
pub fn tree_two_point_oracle(
    spec: &ModelSpec,
    class_a: usize,
    class_b: usize,
    t: usize,
) -> Result<ComparisonRecord> {
    let edges_set = class_edge_set(spec);
    if edges_set.index_of(class_a, class_b).is_none() {
        return Err(Error::InvalidInput(format!(
            "({},{}) is not an edge of the class graph",
            class_a + 1,
            class_b + 1
        )));
    }
    let side_a = build_tree(spec, class_a, t, TreeVariant::Pruned(class_b))?;
    let side_b = build_tree(spec, class_b, t, TreeVariant::Pruned(class_a))?;
    let zero = CavityVector::zeros(edges_set.len());
    let sys_a = tree_spin_system(spec, &side_a, &zero)?;
    let sys_b = tree_spin_system(spec, &side_b, &zero)?;

    // split-subtree magnetizations, each from its own enumeration
    let m_a = gibbs_moments(&sys_a, &[vec![0]])?[0];
    let m_b = gibbs_moments(&sys_b, &[vec![0]])?[0];
    let beta = spec.beta(class_a, class_b);
    let formula = (beta + (m_a * m_b).atanh()).tanh();

    // joint tree: side_b vertices shifted, roots joined by one edge
    let offset = sys_a.vertex_count();
    let mut edges: Vec<(usize, usize, f64)> = sys_a.edges().to_vec();
    edges.extend(
        sys_b
            .edges()
            .iter()
            .map(|&(u, v, w)| (u + offset, v + offset, w)),
    );
    edges.push((0, offset, beta));
    let mut fields = sys_a.fields().to_vec();
    fields.extend_from_slice(sys_b.fields());
    let joint = SpinSystem::new(offset + sys_b.vertex_count(), edges, fields)?;
    let direct = gibbs_moments(&joint, &[vec![0, offset]])?[0];

    Ok(ComparisonRecord::new(formula, direct))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityFamily {
    Gks,
    Fkg,
    Ghs,
}

impl InequalityFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            InequalityFamily::Gks => "GKS",
            InequalityFamily::Fkg => "FKG",
            InequalityFamily::Ghs => "GHS",
        }
    }
}

#[derive(Debug, Clone)]
pub struct InequalityVerdict {
    pub family: InequalityFamily,
    pub ok: bool,
    /// Smallest signed margin seen; the inequality asks margin >= 0 and the
    /// verdict tolerates numerical noise down to -1e-12.
    pub worst_margin: f64,
    pub checks: usize,
}

pub const INEQUALITY_MARGIN: f64 = -1e-12;

/// Checks one family of correlation inequalities on an enumerable system by
/// exact moments, over all small subsets plus a seeded random sample of
/// larger ones.
pub fn inequality_suite(
    system: &SpinSystem,
    family: InequalityFamily,
    seed: u64,
) -> Result<InequalityVerdict> {
    let n = system.vertex_count();
    let nonneg_couplings = system.edges().iter().all(|&(_, _, b)| b >= 0.0);
    let nonneg_fields = system.fields().iter().all(|&h| h >= 0.0);
    match family {
        InequalityFamily::Gks | InequalityFamily::Ghs => {
            if !nonneg_couplings || !nonneg_fields {
                return Err(Error::UnsupportedRegime(format!(
                    "{} requires h >= 0 and beta >= 0",
                    family.as_str()
                )));
            }
        }
        InequalityFamily::Fkg => {
            if !nonneg_couplings {
                return Err(Error::UnsupportedRegime(
                    "FKG requires beta >= 0".into(),
                ));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut checks = 0usize;
    let mut record = |margin: f64| {
        worst = worst.min(margin);
        checks += 1;
    };

    match family {
        InequalityFamily::Gks => {
            // all subsets of size <= 3, plus 50 random larger ones
            let mut subsets: Vec<Vec<usize>> = vec![vec![]];
            for i in 0..n {
                subsets.push(vec![i]);
                for j in i + 1..n {
                    subsets.push(vec![i, j]);
                    for l in j + 1..n {
                        subsets.push(vec![i, j, l]);
                    }
                }
            }
            for _ in 0..50 {
                let size = rng.gen_range(1..=n);
                let mut s: Vec<usize> = (0..n).collect();
                for i in 0..size {
                    let j = rng.gen_range(i..n);
                    s.swap(i, j);
                }
                s.truncate(size);
                s.sort_unstable();
                subsets.push(s);
            }
            let pairs: Vec<(usize, usize)> = (0..200)
                .map(|_| {
                    (
                        rng.gen_range(0..subsets.len()),
                        rng.gen_range(0..subsets.len()),
                    )
                })
                .collect();
            // moment of A union B via symmetric difference and A, B alone
            let mut wanted: Vec<Vec<usize>> = Vec::new();
            for &(i, j) in &pairs {
                let mut joined = subsets[i].clone();
                joined.extend_from_slice(&subsets[j]);
                wanted.push(joined);
            }
            wanted.extend(subsets.iter().cloned());
            let moments = gibbs_moments(system, &wanted)?;
            let sub_moment = |idx: usize| moments[pairs.len() + idx];
            for (p, &(i, j)) in pairs.iter().enumerate() {
                record(moments[p] - sub_moment(i) * sub_moment(j));
            }

            // the four derivative forms, on random index tuples (repeats allowed)
            let tuples: Vec<Vec<usize>> = (0..100)
                .map(|_| (0..4).map(|_| rng.gen_range(0..n)).collect())
                .collect();
            let mut wanted = Vec::new();
            for t in &tuples {
                let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
                wanted.push(vec![i, j]); // <ij>
                wanted.push(vec![i]);
                wanted.push(vec![j]);
                wanted.push(vec![i, j, k]); // <ijk>
                wanted.push(vec![j, k]);
                wanted.push(vec![k]);
                wanted.push(vec![i, j, k, l]); // <ijkl>
                wanted.push(vec![k, l]);
            }
            let m = gibbs_moments(system, &wanted)?;
            for (t, _) in tuples.iter().enumerate() {
                let base = 8 * t;
                let (m_ij, m_i, m_j, m_ijk, m_jk, m_k, m_ijkl, m_kl) = (
                    m[base],
                    m[base + 1],
                    m[base + 2],
                    m[base + 3],
                    m[base + 4],
                    m[base + 5],
                    m[base + 6],
                    m[base + 7],
                );
                record(m_ij - m_i * m_j); // d m_i / d h_j
                record(m_ijk - m_i * m_jk); // d m_i / d beta_jk
                record(m_ijk - m_ij * m_k); // d <ij> / d h_k
                record(m_ijkl - m_ij * m_kl); // d <ij> / d beta_kl
            }
        }
        InequalityFamily::Fkg => {
            // random monotone threshold functions f(s) = 1[sum w_i s_i >= theta],
            // w_i >= 0; reproducible via the seeded generator.
            let problem = FreeProblem::build(system)?;
            let m_free = problem.free_vertices.len();
            let n_pairs = 100;
            let mut funcs: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * n_pairs);
            for _ in 0..2 * n_pairs {
                let w: Vec<f64> = (0..m_free).map(|_| rng.gen_range(0.0..1.0)).collect();
                let total: f64 = w.iter().sum();
                let theta = rng.gen_range(-total..=total.max(1e-9));
                funcs.push((w, theta));
            }
            let mut z = Kahan::default();
            let mut ef = vec![Kahan::default(); 2 * n_pairs];
            let mut efg = vec![Kahan::default(); n_pairs];
            problem.weighted_walk(|w, spins| {
                z.add(w);
                let vals: Vec<f64> = funcs
                    .iter()
                    .map(|(wt, theta)| {
                        let s: f64 = wt
                            .iter()
                            .zip(spins)
                            .map(|(wi, &si)| wi * si as f64)
                            .sum();
                        if s >= *theta {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (i, &v) in vals.iter().enumerate() {
                    ef[i].add(w * v);
                }
                for p in 0..n_pairs {
                    efg[p].add(w * vals[2 * p] * vals[2 * p + 1]);
                }
            });
            let z = z.value();
            for p in 0..n_pairs {
                let f = ef[2 * p].value() / z;
                let g = ef[2 * p + 1].value() / z;
                record(efg[p].value() / z - f * g);
            }
        }
        InequalityFamily::Ghs => {
            // all triples i <= j <= k (with repeats): the third field
            // derivative of the magnetization must be <= 0.
            let mut wanted = Vec::new();
            let mut triples = Vec::new();
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        triples.push((i, j, k));
                        wanted.push(vec![i, j, k]);
                        wanted.push(vec![i]);
                        wanted.push(vec![j]);
                        wanted.push(vec![k]);
                        wanted.push(vec![j, k]);
                        wanted.push(vec![i, k]);
                        wanted.push(vec![i, j]);
                    }
                }
            }
            let m = gibbs_moments(system, &wanted)?;
            for (t, _) in triples.iter().enumerate() {
                let b = 7 * t;
                let (m_ijk, m_i, m_j, m_k, m_jk, m_ik, m_ij) =
                    (m[b], m[b + 1], m[b + 2], m[b + 3], m[b + 4], m[b + 5], m[b + 6]);
                let second = m_ijk + 2.0 * m_i * m_j * m_k
                    - (m_i * m_jk + m_j * m_ik + m_k * m_ij);
                record(-second);
            }
        }
    }

    Ok(InequalityVerdict {
        family,
        ok: worst >= INEQUALITY_MARGIN,
        worst_margin: worst,
        checks,
    })
}

/// Margins CSV for a batch of verdicts.
pub fn margins_csv(verdicts: &[InequalityVerdict]) -> String {
    let mut out = String::from("family,checks,worst_margin,ok\n");
    for v in verdicts {
        out.push_str(&format!(
            "{},{},{},{}\n",
            v.family.as_str(),
            v.checks,
            v.worst_margin,
            v.ok
        ));
    }
    out
}

/// Independent scalar oracle for n = 1: bisection of
/// z = h + (k-1) F_beta(z) on [0, h + (k-1) beta], valid for h >= 0 where the
/// non-negative root is unique.
pub fn scalar_cavity_bisection(k: u32, beta: f64, h: f64, tol: f64) -> f64 {
    assert!(h >= 0.0 && beta >= 0.0 && k >= 1);
    let km1 = (k - 1) as f64;
    let g = |z: f64| h + km1 * (beta.tanh() * z.tanh()).atanh() - z;
    let mut lo = 0.0;
    let mut hi = h + km1 * beta + 1.0;
    debug_assert!(g(lo) >= 0.0 && g(hi) <= 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The strictly positive root of z = (k-1) F_beta(z); returns 0 in the
/// subcritical regime (k-1) tanh(beta) <= 1 where no such root exists.
pub fn scalar_zero_field_bisection(k: u32, beta: f64, tol: f64) -> f64 {
    assert!(beta >= 0.0 && k >= 1);
    let km1 = (k - 1) as f64;
    if km1 * beta.tanh() <= 1.0 {
        return 0.0;
    }
    let g = |z: f64| km1 * (beta.tanh() * z.tanh()).atanh() - z;
    let mut lo = 1e-15;
    let mut hi = km1 * beta + 1.0;
    debug_assert!(g(lo) > 0.0 && g(hi) <= 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
