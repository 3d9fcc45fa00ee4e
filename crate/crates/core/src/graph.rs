//! Marked graphs and self graph maps: tightening, the derivative map and
//! gates, Nielsen-circuit search, bounded cancellation, legal-segment
//! goodness.
//!
//! Oriented edges are encoded as [`Letter`]s over the positive-edge alphabet
//! (letter `i` is edge `i`, its inverse the reversed edge), so edge paths
//! reuse the word machinery: a tight path is a reduced word that is also
//! composable in the graph.

use std::fmt;
use std::sync::OnceLock;

use num_rational::Ratio;
use thiserror::Error;

use crate::auto::Automorphism;
use crate::words::{CyclicWord, Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("marked graph invalid: {0}")]
    BadGraph(String),
    #[error("self map invalid: {0}")]
    BadMap(String),
    #[error("edge path not composable at position {position}")]
    NonComposable { position: usize },
    #[error("length cap {cap} exceeded")]
    CapExceeded { cap: u64 },
    #[error("enumeration budget {budget} exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("path is empty")]
    EmptyPath,
    #[error("directions do not share an origin vertex")]
    NotATurn,
    #[error("map does not fix the marked edge pointwise")]
    MarkedEdgeNotFixed,
    #[error("path is a power of the marked edge")]
    OnlyMarkedEdge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct EdgeInfo {
    origin: usize,
    terminus: usize,
    in_tree: bool,
    marking: Word,
}

/// A connected graph with first Betti number `N`, a spanning tree, and a
/// marking word in `F_N` per positive edge (trivial exactly on tree edges).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedGraph {
    rank: u32,
    vertex_count: usize,
    edges: Vec<EdgeInfo>,
}

impl MarkedGraph {
    pub fn new(
        rank: u32,
        vertex_count: usize,
        edges: Vec<(usize, usize, bool, Word)>,
    ) -> Result<MarkedGraph, GraphError> {
        if vertex_count == 0 || edges.is_empty() {
            return Err(GraphError::BadGraph("graph must be nonempty".into()));
        }
        for (i, (o, t, _, m)) in edges.iter().enumerate() {
            if *o >= vertex_count || *t >= vertex_count {
                return Err(GraphError::BadGraph(format!(
                    "edge {i} has endpoint outside 0..{vertex_count}"
                )));
            }
            if m.rank() != rank {
                return Err(GraphError::BadGraph(format!(
                    "edge {i} marking has rank {} instead of {rank}",
                    m.rank()
                )));
            }
        }
        let mut uf = UnionFind::new(vertex_count);
        for (o, t, _, _) in &edges {
            uf.union(*o, *t);
        }
        if (0..vertex_count).any(|v| uf.find(v) != uf.find(0)) {
            return Err(GraphError::BadGraph("graph is not connected".into()));
        }
        let betti = edges.len() as i64 - vertex_count as i64 + 1;
        if betti != rank as i64 {
            return Err(GraphError::BadGraph(format!(
                "first Betti number is {betti}, expected {rank}"
            )));
        }
        let mut tree_uf = UnionFind::new(vertex_count);
        let mut tree_count = 0;
        for (i, (o, t, in_tree, m)) in edges.iter().enumerate() {
            if !in_tree {
                if m.is_empty() {
                    return Err(GraphError::BadGraph(format!(
                        "non-tree edge {i} needs a nontrivial marking"
                    )));
                }
                continue;
            }
            tree_count += 1;
            if !m.is_empty() {
                return Err(GraphError::BadGraph(format!(
                    "tree edge {i} must carry the trivial marking"
                )));
            }
            if !tree_uf.union(*o, *t) {
                return Err(GraphError::BadGraph(format!("tree edge {i} closes a cycle")));
            }
        }
        if tree_count != vertex_count - 1 {
            return Err(GraphError::BadGraph(format!(
                "{tree_count} tree edges cannot span {vertex_count} vertices"
            )));
        }
        Ok(MarkedGraph {
            rank,
            vertex_count,
            edges: edges
                .into_iter()
                .map(|(origin, terminus, in_tree, marking)| EdgeInfo {
                    origin,
                    terminus,
                    in_tree,
                    marking,
                })
                .collect(),
        })
    }

    /// The `N`-rose: one vertex, edge `i` marked `x_i`.
    pub fn rose(rank: u32) -> MarkedGraph {
        let edges = (1..=rank)
            .map(|i| (0, 0, false, Word::generator(rank, i)))
            .collect();
        MarkedGraph::new(rank, 1, edges).expect("rose is always valid")
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Rank of the edge alphabet (positive edges as letters).
    pub fn edge_rank(&self) -> u32 {
        self.edges.len() as u32
    }

    pub fn is_tree_edge(&self, index: usize) -> bool {
        self.edges[index].in_tree
    }

    pub fn origin(&self, e: Letter) -> usize {
        let info = &self.edges[(e.index() - 1) as usize];
        if e.is_inverse() {
            info.terminus
        } else {
            info.origin
        }
    }

    pub fn terminus(&self, e: Letter) -> usize {
        self.origin(e.inverse())
    }

    /// Marking word of an oriented edge.
    pub fn marking(&self, e: Letter) -> Word {
        let info = &self.edges[(e.index() - 1) as usize];
        if e.is_inverse() {
            info.marking.inverse()
        } else {
            info.marking.clone()
        }
    }

    /// Whether consecutive letters compose head to tail.
    pub fn is_path(&self, letters: &[Letter]) -> bool {
        letters
            .windows(2)
            .all(|w| self.terminus(w[0]) == self.origin(w[1]))
    }

    /// Whether a nonempty path closes up.
    pub fn is_circuit(&self, letters: &[Letter]) -> bool {
        !letters.is_empty()
            && self.is_path(letters)
            && self.terminus(letters[letters.len() - 1]) == self.origin(letters[0])
    }

    /// Free reduction of a composable edge sequence: the tight path.
    pub fn tighten(&self, letters: &[Letter]) -> Result<Word, GraphError> {
        if let Some(position) =
            (1..letters.len()).find(|&i| self.terminus(letters[i - 1]) != self.origin(letters[i]))
        {
            return Err(GraphError::NonComposable { position });
        }
        Ok(Word::reduce(self.edge_rank(), letters.iter().copied()))
    }

    /// The word in `F_N` a path reads through the marking.
    pub fn path_word(&self, path: &Word) -> Word {
        let mut out = Word::identity(self.rank);
        for &e in path.letters() {
            out = out.concat(&self.marking(e));
        }
        out
    }

    /// Unique reduced tree path between two vertices, as an edge word.
    pub fn tree_path(&self, from: usize, to: usize) -> Word {
        self.tree_path_within(from, to, None)
    }

    fn tree_path_within(&self, from: usize, to: usize, tree: Option<&[usize]>) -> Word {
        if from == to {
            return Word::identity(self.edge_rank());
        }
        let in_tree = |i: usize| match tree {
            Some(t) => t.contains(&i),
            None => self.edges[i].in_tree,
        };
        let mut prev: Vec<Option<(usize, Letter)>> = vec![None; self.vertex_count];
        let mut queue = std::collections::VecDeque::from([from]);
        prev[from] = Some((from, Letter::generator(1))); // sentinel
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for i in 0..self.edges.len() {
                if !in_tree(i) {
                    continue;
                }
                let e = Letter::generator(i as u32 + 1);
                for d in [e, e.inverse()] {
                    if self.origin(d) == v && prev[self.terminus(d)].is_none() {
                        prev[self.terminus(d)] = Some((v, d));
                        queue.push_back(self.terminus(d));
                    }
                }
            }
        }
        let mut letters = Vec::new();
        let mut v = to;
        while v != from {
            let (p, d) = prev[v].expect("tree connects the endpoints");
            letters.push(d);
            v = p;
        }
        letters.reverse();
        Word::reduce(self.edge_rank(), letters)
    }

    /// Loop at vertex 0 through a non-tree edge: tree path, edge, tree path.
    pub fn edge_loop(&self, index: usize) -> Word {
        let e = Letter::generator(index as u32 + 1);
        self.tree_path(0, self.origin(e))
            .concat(&Word::reduce(self.edge_rank(), [e]))
            .concat(&self.tree_path(self.terminus(e), 0))
    }

    /// Generator word lists for the free factor system spanned by an edge
    /// subset: one list per non-contractible component, basis words read
    /// through the marking from a spanning tree of the component.  Word lists
    /// only; equality of free factor systems is not decided here.
    pub fn subgraph_free_factors(&self, edge_set: &[usize]) -> Vec<Vec<Word>> {
        let mut uf = UnionFind::new(self.vertex_count);
        for &i in edge_set {
            uf.union(self.edges[i].origin, self.edges[i].terminus);
        }
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &i in edge_set {
            by_root
                .entry(uf.find(self.edges[i].origin))
                .or_default()
                .push(i);
        }
        let mut out = Vec::new();
        for (_, edges) in by_root {
            let vertices: std::collections::BTreeSet<usize> = edges
                .iter()
                .flat_map(|&i| [self.edges[i].origin, self.edges[i].terminus])
                .collect();
            if edges.len() < vertices.len() {
                continue; // tree component, trivial factor
            }
            let mut comp_uf = UnionFind::new(self.vertex_count);
            let mut tree: Vec<usize> = Vec::new();
            let mut extra: Vec<usize> = Vec::new();
            for &i in &edges {
                if comp_uf.union(self.edges[i].origin, self.edges[i].terminus) {
                    tree.push(i);
                } else {
                    extra.push(i);
                }
            }
            let root = *vertices.iter().next().expect("component is nonempty");
            let mut words = Vec::new();
            for &i in &extra {
                let e = Letter::generator(i as u32 + 1);
                let path = self
                    .tree_path_within(root, self.origin(e), Some(&tree))
                    .concat(&Word::reduce(self.edge_rank(), [e]))
                    .concat(&self.tree_path_within(self.terminus(e), root, Some(&tree)));
                words.push(self.path_word(&path));
            }
            out.push(words);
        }
        out
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns false if already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// An unordered pair of directions at a common vertex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Turn {
    a: Letter,
    b: Letter,
}

impl Turn {
    pub fn directions(&self) -> (Letter, Letter) {
        (self.a, self.b)
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }
}

/// Gate partition of the directions at each vertex: two directions share a
/// gate exactly when some common iterate of the derivative map equates them.
#[derive(Clone, Debug)]
pub struct GateStructure {
    gate_of: Vec<usize>,          // indexed by direction code
    gates: Vec<Vec<Vec<Letter>>>, // per vertex, sorted directions per gate
}

impl GateStructure {
    pub fn same_gate(&self, d1: Letter, d2: Letter) -> bool {
        self.gate_of[d1.code()] == self.gate_of[d2.code()]
    }

    /// Gates at one vertex.
    pub fn at_vertex(&self, v: usize) -> &[Vec<Letter>] {
        &self.gates[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.gates.len()
    }

    /// All illegal turns between distinct directions.  Degenerate turns are
    /// always illegal and not listed.
    pub fn illegal_turns(&self) -> Vec<Turn> {
        let mut out = Vec::new();
        for per_vertex in &self.gates {
            for gate in per_vertex {
                for i in 0..gate.len() {
                    for j in i + 1..gate.len() {
                        out.push(Turn {
                            a: gate[i],
                            b: gate[j],
                        });
                    }
                }
            }
        }
        out
    }
}

/// A self graph map with tight edge images and the outer class it represents.
pub struct GraphSelfMap {
    graph: MarkedGraph,
    vertex_map: Vec<usize>,
    edge_images: Vec<Word>,
    induced: Automorphism,
    gates: OnceLock<GateStructure>,
}

impl Clone for GraphSelfMap {
    fn clone(&self) -> Self {
        let gates = OnceLock::new();
        if let Some(g) = self.gates.get() {
            let _ = gates.set(g.clone());
        }
        GraphSelfMap {
            graph: self.graph.clone(),
            vertex_map: self.vertex_map.clone(),
            edge_images: self.edge_images.clone(),
            induced: self.induced.clone(),
            gates,
        }
    }
}

impl fmt::Debug for GraphSelfMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GraphSelfMap[{}:", self.induced.label())?;
        for (i, img) in self.edge_images.iter().enumerate() {
            write!(f, " {:?}↦{}", Letter::generator(i as u32 + 1), img)?;
        }
        write!(f, "]")
    }
}

impl GraphSelfMap {
    /// Verify and assemble a self map.  Checks image tightness and endpoint
    /// compatibility, and that the map read through the marking induces the
    /// declared outer class on every non-tree generator loop, as cyclic words.
    pub fn new(
        graph: MarkedGraph,
        vertex_map: Vec<usize>,
        edge_images: Vec<Word>,
        induced: Automorphism,
    ) -> Result<GraphSelfMap, GraphError> {
        if vertex_map.len() != graph.vertex_count() {
            return Err(GraphError::BadMap("vertex map has wrong length".into()));
        }
        if vertex_map.iter().any(|&v| v >= graph.vertex_count()) {
            return Err(GraphError::BadMap("vertex map target out of range".into()));
        }
        if edge_images.len() != graph.edge_count() {
            return Err(GraphError::BadMap("one image per positive edge".into()));
        }
        if induced.rank() != graph.rank() {
            return Err(GraphError::BadMap(format!(
                "induced class has rank {}, graph has rank {}",
                induced.rank(),
                graph.rank()
            )));
        }
        for (i, img) in edge_images.iter().enumerate() {
            if img.rank() != graph.edge_rank() {
                return Err(GraphError::BadMap(format!(
                    "image of edge {i} is over the wrong edge alphabet"
                )));
            }
            if img.is_empty() {
                return Err(GraphError::BadMap(format!(
                    "image of edge {i} is empty; edges map to immersed paths"
                )));
            }
            if !graph.is_path(img.letters()) {
                return Err(GraphError::BadMap(format!("image of edge {i} is not a path")));
            }
            let e = Letter::generator(i as u32 + 1);
            if graph.origin(img.letters()[0]) != vertex_map[graph.origin(e)]
                || graph.terminus(*img.letters().last().expect("nonempty"))
                    != vertex_map[graph.terminus(e)]
            {
                return Err(GraphError::BadMap(format!(
                    "image of edge {i} does not respect the vertex map"
                )));
            }
        }
        let map = GraphSelfMap {
            graph,
            vertex_map,
            edge_images,
            induced,
            gates: OnceLock::new(),
        };
        for i in 0..map.graph.edge_count() {
            if map.graph.is_tree_edge(i) {
                continue;
            }
            let loop_path = map.graph.edge_loop(i);
            let before = map.graph.path_word(&loop_path);
            let image_path = map.substitute(&loop_path, u64::MAX)?;
            let after = map.graph.path_word(&image_path);
            let expected = map
                .induced
                .apply(&before)
                .map_err(|e| GraphError::BadMap(format!("marking word: {e}")))?;
            let lhs = CyclicWord::canonical(&after).ok();
            let rhs = CyclicWord::canonical(&expected).ok();
            if lhs.is_none() || lhs != rhs {
                return Err(GraphError::BadMap(format!(
                    "map does not induce the declared outer class on edge {i}"
                )));
            }
        }
        Ok(map)
    }

    /// Topological representative of `phi` on the rose: edge images are the
    /// generator images.
    pub fn rose_map(phi: &Automorphism) -> GraphSelfMap {
        let graph = MarkedGraph::rose(phi.rank());
        GraphSelfMap::new(graph, vec![0], phi.images().to_vec(), phi.clone())
            .expect("rose transcription of a verified automorphism")
    }

    pub fn graph(&self) -> &MarkedGraph {
        &self.graph
    }

    pub fn induced_class(&self) -> &Automorphism {
        &self.induced
    }

    pub fn vertex_map(&self) -> &[usize] {
        &self.vertex_map
    }

    /// Tight image of one oriented edge.
    pub fn image_of(&self, e: Letter) -> Word {
        let img = &self.edge_images[(e.index() - 1) as usize];
        if e.is_inverse() {
            img.inverse()
        } else {
            img.clone()
        }
    }

    /// One substitution round with free reduction, capped.
    fn substitute(&self, path: &Word, cap: u64) -> Result<Word, GraphError> {
        let mut letters: Vec<Letter> = Vec::new();
        for &e in path.letters() {
            let img = &self.edge_images[(e.index() - 1) as usize];
            if e.is_inverse() {
                for &l in img.letters().iter().rev() {
                    push_reduced(&mut letters, l.inverse());
                }
            } else {
                for &l in img.letters() {
                    push_reduced(&mut letters, l);
                }
            }
            if letters.len() as u64 > cap {
                return Err(GraphError::CapExceeded { cap });
            }
        }
        Ok(Word::reduce(self.graph.edge_rank(), letters))
    }

    /// `[f^k(γ)]` for a tight path `γ`, by `k` rounds of substitution and
    /// tightening.  Aborts with `CapExceeded` instead of truncating.
    pub fn map_path(&self, path: &Word, k: u32, cap: u64) -> Result<Word, GraphError> {
        if !self.graph.is_path(path.letters()) {
            return Err(GraphError::NonComposable { position: 0 });
        }
        let mut out = path.clone();
        for _ in 0..k {
            out = self.substitute(&out, cap)?;
        }
        Ok(out)
    }

    /// `[f^k(ρ)]` of a circuit, tightened cyclically, in canonical rotation.
    pub fn map_circuit(
        &self,
        circuit: &CyclicWord,
        k: u32,
        cap: u64,
    ) -> Result<CyclicWord, GraphError> {
        let mut word = circuit.as_word();
        for _ in 0..k {
            word = self.substitute(&word, cap)?;
            word = CyclicWord::canonical(&word)
                .map_err(|_| GraphError::BadMap("image of an essential circuit is trivial".into()))?
                .as_word();
        }
        Ok(CyclicWord::canonical(&word).expect("nonempty circuit"))
    }

    /// Derivative map on directions: the first edge of the image.
    pub fn derivative(&self, d: Letter) -> Letter {
        self.image_of(d).letters()[0]
    }

    /// Gate partition, computed on first use.  Directions collide iff some
    /// common `Df` iterate equates them; any collision shows up within
    /// `|directions|` steps, since trajectories in a functional graph merge
    /// no later than their tail lengths and cycle entry offsets allow.
    pub fn gates(&self) -> &GateStructure {
        self.gates.get_or_init(|| {
            let dirs: Vec<Letter> = (0..2 * self.graph.edge_count())
                .map(Letter::from_code)
                .collect();
            let bound = dirs.len();
            let mut uf = UnionFind::new(dirs.len());
            for i in 0..dirs.len() {
                for j in i + 1..dirs.len() {
                    if self.graph.origin(dirs[i]) != self.graph.origin(dirs[j]) {
                        continue;
                    }
                    let (mut a, mut b) = (dirs[i], dirs[j]);
                    for _ in 0..bound {
                        if a == b {
                            break;
                        }
                        a = self.derivative(a);
                        b = self.derivative(b);
                    }
                    if a == b {
                        uf.union(i, j);
                    }
                }
            }
            let mut members: std::collections::BTreeMap<usize, Vec<Letter>> = Default::default();
            for (i, &d) in dirs.iter().enumerate() {
                members.entry(uf.find(i)).or_default().push(d);
            }
            let mut gates: Vec<Vec<Vec<Letter>>> = vec![Vec::new(); self.graph.vertex_count()];
            let mut gate_of = vec![usize::MAX; dirs.len()];
            for (id, (_, mut ds)) in members.into_iter().enumerate() {
                ds.sort();
                for &d in &ds {
                    gate_of[d.code()] = id;
                }
                gates[self.graph.origin(ds[0])].push(ds);
            }
            GateStructure { gate_of, gates }
        })
    }

    pub fn turn(&self, d1: Letter, d2: Letter) -> Result<Turn, GraphError> {
        if self.graph.origin(d1) != self.graph.origin(d2) {
            return Err(GraphError::NotATurn);
        }
        let (a, b) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        Ok(Turn { a, b })
    }

    /// A turn is legal iff its directions lie in distinct gates; degenerate
    /// turns are illegal.
    pub fn is_legal(&self, turn: &Turn) -> bool {
        !turn.is_degenerate() && !self.gates().same_gate(turn.a, turn.b)
    }

    /// Whether every turn crossed by the path is legal.
    pub fn is_legal_path(&self, path: &Word) -> bool {
        path.letters().windows(2).all(|w| {
            let t = self
                .turn(w[0].inverse(), w[1])
                .expect("consecutive edges of a path share a vertex");
            self.is_legal(&t)
        })
    }

    /// Closed Nielsen circuits up to the given length and period: cyclic edge
    /// words `ρ` with `[f^k(ρ)] = ρ`.  An empty result means none within
    /// bounds, not nonexistence.
    pub fn nielsen_search(
        &self,
        max_len: usize,
        max_period: u32,
        cap: u64,
    ) -> Result<Vec<NielsenCertificate>, GraphError> {
        let mut out = Vec::new();
        for candidate in crate::words::enumerate_classes(self.graph.edge_rank(), max_len) {
            if !self.graph.is_circuit(candidate.letters()) {
                continue;
            }
            let mut current = candidate.clone();
            for k in 1..=max_period {
                current = self.map_circuit(&current, 1, cap)?;
                if current == candidate {
                    out.push(NielsenCertificate {
                        circuit: candidate.clone(),
                        period: k,
                    });
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Path version of the Nielsen test, rel endpoints: least `k ≤ max_period`
    /// with `[f^k(ρ)] = ρ`.
    pub fn nielsen_period_of_path(
        &self,
        path: &Word,
        max_period: u32,
        cap: u64,
    ) -> Result<Option<u32>, GraphError> {
        let mut current = path.clone();
        for k in 1..=max_period {
            current = self.substitute(&current, cap)?;
            if current == *path {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// Certified Cooper-style bounded cancellation bound `Σ_e |f(e)|`.
    pub fn bcc_upper(&self) -> u64 {
        self.edge_images.iter().map(|w| w.len() as u64).sum()
    }

    /// Largest observed junction cancellation over tight concatenations
    /// `γ₁γ₂` with both factors of length at most `len`:
    /// `(|[f(γ₁)]| + |[f(γ₂)]| − |[f(γ₁γ₂)]|)/2`, never more than `bcc_upper`.
    pub fn bcc_empirical(&self, len: usize, budget: u64) -> Result<u64, GraphError> {
        let paths = self.tight_paths_up_to(len);
        let images: Vec<Word> = paths
            .iter()
            .map(|p| self.substitute(p, u64::MAX).expect("uncapped"))
            .collect();
        let mut best = 0u64;
        let mut work = 0u64;
        for (i, p1) in paths.iter().enumerate() {
            let last = *p1.letters().last().expect("nonempty");
            for (j, p2) in paths.iter().enumerate() {
                let first = p2.letters()[0];
                if first == last.inverse() || self.graph.terminus(last) != self.graph.origin(first)
                {
                    continue;
                }
                work += 1;
                if work > budget {
                    return Err(GraphError::BudgetExceeded { budget });
                }
                let joined = images[i].concat(&images[j]);
                let cancelled = (images[i].len() + images[j].len() - joined.len()) as u64 / 2;
                best = best.max(cancelled);
            }
        }
        Ok(best)
    }

    /// All nonempty tight paths with at most `len` edges.
    fn tight_paths_up_to(&self, len: usize) -> Vec<Word> {
        fn rec(map: &GraphSelfMap, len: usize, stack: &mut Vec<Letter>, out: &mut Vec<Word>) {
            if !stack.is_empty() {
                out.push(Word::reduce(map.graph.edge_rank(), stack.iter().copied()));
            }
            if stack.len() == len {
                return;
            }
            for code in 0..2 * map.graph.edge_count() {
                let l = Letter::from_code(code);
                if let Some(&last) = stack.last() {
                    if l == last.inverse() || map.graph.terminus(last) != map.graph.origin(l) {
                        continue;
                    }
                }
                stack.push(l);
                rec(map, len, stack, out);
                stack.pop();
            }
        }
        let mut out = Vec::new();
        rec(self, len, &mut Vec::new(), &mut out);
        out
    }

    fn legal_good_length(&self, path: &Word, seg_threshold: usize) -> (u64, u64) {
        let mut good = 0u64;
        let mut seg = 1u64;
        for w in path.letters().windows(2) {
            let t = self
                .turn(w[0].inverse(), w[1])
                .expect("consecutive edges of a path share a vertex");
            if self.is_legal(&t) {
                seg += 1;
            } else {
                if seg >= seg_threshold as u64 {
                    good += seg;
                }
                seg = 1;
            }
        }
        if seg >= seg_threshold as u64 {
            good += seg;
        }
        (good, path.len() as u64)
    }

    /// Legal-segment goodness: split at illegal turns into maximal legal
    /// segments and return the length fraction carried by segments of length
    /// at least `seg_threshold`.
    pub fn legal_goodness(
        &self,
        path: &Word,
        seg_threshold: usize,
    ) -> Result<Ratio<u64>, GraphError> {
        assert!(seg_threshold >= 1, "segment threshold is at least 1");
        if path.is_empty() {
            return Err(GraphError::EmptyPath);
        }
        if !self.graph.is_path(path.letters()) {
            return Err(GraphError::NonComposable { position: 0 });
        }
        let (good, total) = self.legal_good_length(path, seg_threshold);
        Ok(Ratio::new(good, total))
    }

    /// Goodness of the part of `path` away from a fixed marked edge: with
    /// `γ = α₀·e^{k₁}·α₁·…·e^{k_m}·α_m`, the length-weighted average
    /// `Σ|αᵢ|·g(αᵢ) / Σ|αᵢ|` of the legal-segment goodness of the blocks.
    pub fn relative_goodness(
        &self,
        path: &Word,
        marked_edge: Letter,
        seg_threshold: usize,
    ) -> Result<Ratio<u64>, GraphError> {
        if path.is_empty() {
            return Err(GraphError::EmptyPath);
        }
        if !self.graph.is_path(path.letters()) {
            return Err(GraphError::NonComposable { position: 0 });
        }
        let marked = Word::reduce(self.graph.edge_rank(), [marked_edge]);
        if self.image_of(marked_edge) != marked {
            return Err(GraphError::MarkedEdgeNotFixed);
        }
        let mut good = 0u64;
        let mut total = 0u64;
        let mut block: Vec<Letter> = Vec::new();
        let flush = |block: &mut Vec<Letter>, good: &mut u64, total: &mut u64| {
            if block.is_empty() {
                return;
            }
            let alpha = Word::reduce(self.graph.edge_rank(), block.drain(..));
            let (g, t) = self.legal_good_length(&alpha, seg_threshold);
            *good += g;
            *total += t;
        };
        for &l in path.letters() {
            if l.index() == marked_edge.index() {
                flush(&mut block, &mut good, &mut total);
            } else {
                block.push(l);
            }
        }
        flush(&mut block, &mut good, &mut total);
        if total == 0 {
            return Err(GraphError::OnlyMarkedEdge);
        }
        Ok(Ratio::new(good, total))
    }
}

fn push_reduced(buf: &mut Vec<Letter>, l: Letter) {
    if buf.last() == Some(&l.inverse()) {
        buf.pop();
    } else {
        buf.push(l);
    }
}

/// A verified closed Nielsen circuit: `[f^period(circuit)] = circuit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NielsenCertificate {
    pub circuit: CyclicWord,
    pub period: u32,
}
