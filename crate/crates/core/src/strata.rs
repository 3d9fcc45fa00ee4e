//! Filtrations of self graph maps: transition matrices, EG/NEG/zero
//! classification with an exact λ = 1 test, Perron–Frobenius eigenvalues by
//! power iteration, and the single-edge extension taxonomy.

use thiserror::Error;

use crate::graph::{GraphError, GraphSelfMap, MarkedGraph, UnionFind};
use crate::words::Letter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrataError {
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge within {max_iters} iterations")]
    NoConvergence { max_iters: u64 },
    #[error("subgraphs are not nested")]
    NotNested,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Default stopping tolerance for the eigenvalue iteration.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration bound for the eigenvalue iteration.
pub const DEFAULT_MAX_ITERS: u64 = 1_000_000;

/// Square nonnegative integer matrix indexed by a stratum's positive edges:
/// entry `(i, j)` counts how often `[f(e_i)]` crosses `e_j` or `e_j⁻¹`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMatrix {
    edges: Vec<usize>,
    entries: Vec<u64>,
}

impl TransitionMatrix {
    pub fn from_map(map: &GraphSelfMap, stratum_edges: &[usize]) -> TransitionMatrix {
        let n = stratum_edges.len();
        let mut entries = vec![0u64; n * n];
        for (row, &i) in stratum_edges.iter().enumerate() {
            let image = map.image_of(Letter::generator(i as u32 + 1));
            for l in image.letters() {
                if let Some(col) = stratum_edges.iter().position(|&j| j as u32 + 1 == l.index()) {
                    entries[row * n + col] += 1;
                }
            }
        }
        TransitionMatrix {
            edges: stratum_edges.to_vec(),
            entries,
        }
    }

    /// Ad hoc matrix over anonymous indices (tests, random fixtures).
    pub fn from_rows(rows: &[Vec<u64>]) -> TransitionMatrix {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        TransitionMatrix {
            edges: (0..n).collect(),
            entries: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn entry(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.size() + j]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        let n = self.size();
        (0..n).map(|i| self.entries[i * n..(i + 1) * n].to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    /// Irreducible iff the support digraph is strongly connected (a 1×1 zero
    /// matrix is not irreducible).
    pub fn is_irreducible(&self) -> bool {
        let n = self.size();
        if n == 0 {
            return false;
        }
        if n == 1 {
            return self.entries[0] > 0;
        }
        let reach = |start: usize| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for w in 0..n {
                    if !seen[w] && self.entry(v, w) > 0 {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        };
        (0..n).all(|i| reach(i).iter().all(|&s| s))
    }

    /// Exact integer criterion for λ = 1 on irreducible matrices: true iff
    /// the matrix is a permutation matrix on its support.  Any extra weight
    /// makes closed-walk counts grow exponentially, so λ > 1.
    pub fn is_permutation_on_support(&self) -> bool {
        let n = self.size();
        let rows_ok = (0..n).all(|i| (0..n).map(|j| self.entry(i, j)).sum::<u64>() == 1);
        let cols_ok = (0..n).all(|j| (0..n).map(|i| self.entry(i, j)).sum::<u64>() == 1);
        rows_ok && cols_ok && self.entries.iter().all(|&e| e <= 1)
    }

    /// Perron–Frobenius eigenvalue of an irreducible matrix, by power
    /// iteration on `M + I` (which is primitive, so ratio convergence holds
    /// even for imprimitive `M`).  Stops when successive Rayleigh quotients
    /// differ by less than `tol`; the deterministic start vector is all ones.
    pub fn pf_eigenvalue(&self, tol: f64, max_iters: u64) -> Result<f64, StrataError> {
        if !self.is_irreducible() {
            return Err(StrataError::NotIrreducible);
        }
        let n = self.size();
        let mut v = vec![1.0f64; n];
        let mut prev_rq = f64::NAN;
        for _ in 0..max_iters {
            // w = (M + I)·v
            let mut w = vec![0.0f64; n];
            for i in 0..n {
                let mut acc = v[i];
                for j in 0..n {
                    let m = self.entry(i, j);
                    if m > 0 {
                        acc += m as f64 * v[j];
                    }
                }
                w[i] = acc;
            }
            let dot_vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let dot_vv: f64 = v.iter().map(|a| a * a).sum();
            let rq = dot_vw / dot_vv;
            let max = w.iter().cloned().fold(0.0f64, f64::max);
            for x in &mut w {
                *x /= max;
            }
            v = w;
            if (rq - prev_rq).abs() < tol {
                return Ok(rq - 1.0);
            }
            prev_rq = rq;
        }
        Err(StrataError::NoConvergence { max_iters })
    }
}

/// Sub-classification of a single-edge NEG stratum.  Linearity certification
/// depends on the Nielsen search bounds, so the superlinear label is
/// bound-qualified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NegEdgeKind {
    Fixed,
    /// `f(e) = e·ρ` with `ρ` a certified Nielsen path of the stated period.
    Linear { nielsen_period: u32 },
    SuperlinearWithinBounds,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StratumClass {
    Zero,
    Eg { lambda: f64 },
    Neg { edge_kind: Option<NegEdgeKind> },
}

#[derive(Clone, Debug)]
pub struct Stratum {
    /// Positive edge indices of this stratum.
    pub edges: Vec<usize>,
    pub matrix: TransitionMatrix,
    pub class: StratumClass,
}

/// Maximal invariant filtration: strata in inclusion order, prefix unions
/// `G_r` invariant.
#[derive(Clone, Debug)]
pub struct Filtration {
    pub strata: Vec<Stratum>,
}

impl Filtration {
    /// Edge set of the cumulative subgraph `G_r` (1-based `r`; `r = 0` is
    /// empty).
    pub fn prefix_edges(&self, r: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.strata[..r].iter().flat_map(|s| s.edges.clone()).collect();
        out.sort_unstable();
        out
    }
}

/// Bounds used when classifying strata.
#[derive(Clone, Copy, Debug)]
pub struct StrataConfig {
    pub tol: f64,
    pub max_iters: u64,
    pub nielsen_max_period: u32,
    pub nielsen_cap: u64,
}

impl Default for StrataConfig {
    fn default() -> Self {
        StrataConfig {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            nielsen_max_period: 16,
            nielsen_cap: 1 << 20,
        }
    }
}

/// Reachability digraph on positive edges: arc `e → e'` iff `[f(e)]` crosses
/// `e'` or its inverse.
pub fn edge_reachability(map: &GraphSelfMap) -> Vec<Vec<usize>> {
    let n = map.graph().edge_count();
    (0..n)
        .map(|i| {
            let image = map.image_of(Letter::generator(i as u32 + 1));
            let mut targets: Vec<usize> = image
                .letters()
                .iter()
                .map(|l| (l.index() - 1) as usize)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            targets
        })
        .collect()
}

/// Strongly connected components of the reachability digraph, emitted in
/// Tarjan completion order, which is reverse topological: every stratum maps
/// into its own prefix union.  Singleton components without a self-arc are
/// the zero strata.
pub fn maximal_filtration(map: &GraphSelfMap, config: &StrataConfig) -> Filtration {
    let adj = edge_reachability(map);
    let components = tarjan_scc(&adj);
    let strata = components
        .into_iter()
        .map(|mut edges| {
            edges.sort_unstable();
            let matrix = TransitionMatrix::from_map(map, &edges);
            let class = classify_stratum(map, &edges, config);
            Stratum {
                edges,
                matrix,
                class,
            }
        })
        .collect();
    Filtration { strata }
}

/// Classify one stratum.  Zero iff the transition matrix vanishes; otherwise
/// the exact permutation-on-support test separates NEG (λ = 1) from EG
/// (λ > 1), never a floating comparison.
pub fn classify_stratum(
    map: &GraphSelfMap,
    stratum_edges: &[usize],
    config: &StrataConfig,
) -> StratumClass {
    let matrix = TransitionMatrix::from_map(map, stratum_edges);
    if matrix.is_zero() {
        return StratumClass::Zero;
    }
    if matrix.is_permutation_on_support() {
        let edge_kind = if stratum_edges.len() == 1 {
            Some(classify_neg_edge(map, stratum_edges[0], config))
        } else {
            None
        };
        return StratumClass::Neg { edge_kind };
    }
    let lambda = matrix
        .pf_eigenvalue(config.tol, config.max_iters)
        .unwrap_or(f64::NAN);
    StratumClass::Eg { lambda }
}

fn classify_neg_edge(map: &GraphSelfMap, edge: usize, config: &StrataConfig) -> NegEdgeKind {
    let e = Letter::generator(edge as u32 + 1);
    let image = map.image_of(e);
    if image.letters() == [e] {
        return NegEdgeKind::Fixed;
    }
    // Linear means f(e) = e·ρ with ρ a nontrivial Nielsen path off the edge.
    if image.letters().first() == Some(&e)
        && image.len() > 1
        && image.letters()[1..].iter().all(|l| l.index() != e.index())
    {
        let rho = crate::words::Word::reduce(
            map.graph().edge_rank(),
            image.letters()[1..].iter().copied(),
        );
        if let Ok(Some(period)) =
            map.nielsen_period_of_path(&rho, config.nielsen_max_period, config.nielsen_cap)
        {
            return NegEdgeKind::Linear {
                nielsen_period: period,
            };
        }
    }
    NegEdgeKind::SuperlinearWithinBounds
}

fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: usize,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        comps: Vec<Vec<usize>>,
    }

    fn connect(v: usize, st: &mut State) {
        st.idx[v] = Some(st.index);
        st.low[v] = st.index;
        st.index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in st.adj[v].iter() {
            if st.idx[w].is_none() {
                connect(w, st);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.idx[w].expect("visited"));
            }
        }
        if st.low[v] == st.idx[v].expect("set above") {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("stack nonempty");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.comps.push(comp);
        }
    }

    let n = adj.len();
    let mut st = State {
        adj,
        index: 0,
        idx: vec![None; n],
        low: vec![0; n],
        stack: Vec::new(),
        on_stack: vec![false; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            connect(v, &mut st);
        }
    }
    st.comps
}

/// Single-edge extension taxonomy for nested subgraphs of one marked graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionKind {
    /// A disjoint loop edge was added.
    Circle,
    /// One edge joins two distinct non-contractible components.
    Barbell,
    /// One edge attaches, both ends, to a single component.
    Handle,
    /// Anything else.
    MultiEdge,
}

pub fn extension_kind(
    graph: &MarkedGraph,
    inner: &[usize],
    outer: &[usize],
) -> Result<ExtensionKind, StrataError> {
    let inner_set: std::collections::BTreeSet<usize> = inner.iter().copied().collect();
    let outer_set: std::collections::BTreeSet<usize> = outer.iter().copied().collect();
    if !inner_set.is_subset(&outer_set) {
        return Err(StrataError::NotNested);
    }
    let added: Vec<usize> = outer_set.difference(&inner_set).copied().collect();
    if added.len() != 1 {
        return Ok(ExtensionKind::MultiEdge);
    }
    let e = Letter::generator(added[0] as u32 + 1);
    let (o, t) = (graph.origin(e), graph.terminus(e));

    // Component structure of the inner subgraph.
    let mut uf = UnionFind::new(graph.vertex_count());
    let mut edge_count = std::collections::HashMap::new();
    for &i in &inner_set {
        let ie = Letter::generator(i as u32 + 1);
        uf.union(graph.origin(ie), graph.terminus(ie));
    }
    let mut inner_vertices = std::collections::BTreeSet::new();
    for &i in &inner_set {
        let ie = Letter::generator(i as u32 + 1);
        inner_vertices.insert(graph.origin(ie));
        inner_vertices.insert(graph.terminus(ie));
        *edge_count.entry(uf.find(graph.origin(ie))).or_insert(0usize) += 1;
    }
    let mut vertex_count = std::collections::HashMap::new();
    for &v in &inner_vertices {
        *vertex_count.entry(uf.find(v)).or_insert(0usize) += 1;
    }
    let non_contractible = |root: usize| {
        edge_count.get(&root).copied().unwrap_or(0) >= vertex_count.get(&root).copied().unwrap_or(0)
    };

    if o == t && !inner_vertices.contains(&o) {
        return Ok(ExtensionKind::Circle);
    }
    if inner_vertices.contains(&o) && inner_vertices.contains(&t) {
        let (ro, rt) = (uf.find(o), uf.find(t));
        if ro == rt {
            return Ok(ExtensionKind::Handle);
        }
        if non_contractible(ro) && non_contractible(rt) {
            return Ok(ExtensionKind::Barbell);
        }
    }
    Ok(ExtensionKind::MultiEdge)
}
