//! Multinomial staged trees: construction, parametrisation, closed-form MLE,
//! tree Horn pairs, balancedness, model invariants and the polytope P_T.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{binomial, compositions, int, multinomial, pow_rat, IntMatrix, MPoly, Rat};
use crate::horn::{minimize, positive_part, sign_pow, HornError, HornPair};
use crate::polytope::{
    hull_in_span, ldm_at, matrix_m_at, normal_fan, primitive_collections, AffineLattice,
    LatticePolytope, PolytopeError,
};

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("stage {stage} is used twice on the path through node {node}")]
    StageReuseAcrossLevels { stage: usize, node: NodeId },
    #[error("children of node {0} do not match the floret's terms")]
    NonBijectiveLabelling(NodeId),
    #[error("stage {0} has no symbols")]
    EmptyStage(usize),
    #[error("symbol `{0}` appears in more than one stage")]
    DuplicateSymbol(String),
    #[error("node {0} has a floret of degree zero")]
    ZeroDegree(NodeId),
    #[error("unknown stage {0}")]
    UnknownStage(usize),
    #[error("node {0} is not reachable from the root or is malformed")]
    BadNode(i64),
    #[error("expected exactly one root node")]
    Root,
    #[error("node {0} already has a floret")]
    AlreadyExpanded(NodeId),
    #[error("invalid parameter point: {0}")]
    InvalidTheta(String),
    #[error("{got} counts for {expected} atoms")]
    CountLength { got: usize, expected: usize },
    #[error("no data reaches stage {0}")]
    EmptyStageData(usize),
    #[error("node {node} has a floret of degree {degree} on {size} symbols; only degree ≤ 4 is supported for more than two symbols")]
    UnsupportedSize { node: NodeId, degree: u32, size: usize },
    #[error("node {0} is a leaf")]
    Leaf(NodeId),
    #[error("node {0} does not carry a binary floret")]
    NotBinary(NodeId),
    #[error("property (*) does not hold for this tree")]
    StarRequired,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Horn(#[from] HornError),
    #[error("malformed tree description: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub id: usize,
    pub symbols: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Child {
    pub composition: Vec<u32>,
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub level: usize,
    /// (stage index, degree) for non-leaves.
    pub floret: Option<(usize, u32)>,
    pub children: Vec<Child>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.floret.is_none()
    }
}

/// One root-to-leaf path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub leaf: NodeId,
    pub coef: BigInt,
    pub exps: Vec<u32>,
    /// Number of edges on the path.
    pub length: usize,
}

/// Incremental construction; children are created when a floret is attached.
#[derive(Clone, Debug)]
pub struct TreeBuilder {
    stages: Vec<Stage>,
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new(stages: Vec<Vec<String>>) -> Self {
        let stages = stages.into_iter().enumerate().map(|(id, symbols)| Stage { id, symbols }).collect();
        let root = Node { parent: None, level: 0, floret: None, children: Vec::new() };
        Self { stages, nodes: vec![root] }
    }

    /// Stages given as symbol-name lists of string slices.
    pub fn with_names(stages: &[&[&str]]) -> Self {
        Self::new(stages.iter().map(|s| s.iter().map(|x| x.to_string()).collect()).collect())
    }

    pub fn root(&self) -> NodeId {
        0
    }

    /// Attach f_{stage,degree} to `v`; children appear in lex-descending composition order.
    pub fn floret(&mut self, v: NodeId, stage: usize, degree: u32) -> Result<Vec<NodeId>, TreeError> {
        let size = self.stages.get(stage).ok_or(TreeError::UnknownStage(stage))?.symbols.len();
        self.floret_ordered(v, stage, degree, compositions(size, degree))
    }

    /// Attach a floret with an explicit child order, which must list every composition once.
    pub fn floret_ordered(
        &mut self,
        v: NodeId,
        stage: usize,
        degree: u32,
        order: Vec<Vec<u32>>,
    ) -> Result<Vec<NodeId>, TreeError> {
        let size = self.stages.get(stage).ok_or(TreeError::UnknownStage(stage))?.symbols.len();
        if size == 0 {
            return Err(TreeError::EmptyStage(stage));
        }
        if degree == 0 {
            return Err(TreeError::ZeroDegree(v));
        }
        if self.nodes[v].floret.is_some() {
            return Err(TreeError::AlreadyExpanded(v));
        }
        let mut expect: Vec<Vec<u32>> = compositions(size, degree);
        let mut got = order.clone();
        expect.sort();
        got.sort();
        if expect != got {
            return Err(TreeError::NonBijectiveLabelling(v));
        }
        let level = self.nodes[v].level + 1;
        let mut ids = Vec::with_capacity(order.len());
        for composition in order {
            let id = self.nodes.len();
            self.nodes.push(Node { parent: Some(v), level, floret: None, children: Vec::new() });
            self.nodes[v].children.push(Child { composition, node: id });
            ids.push(id);
        }
        self.nodes[v].floret = Some((stage, degree));
        Ok(ids)
    }

    pub fn build(self) -> Result<StagedTree, TreeError> {
        StagedTree::from_parts(self.stages, self.nodes)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagedTree {
    stages: Vec<Stage>,
    symbols: Arc<[String]>,
    offsets: Vec<usize>,
    nodes: Vec<Node>,
    atoms: Vec<Atom>,
    ranges: Vec<Range<usize>>,
}

impl StagedTree {
    fn from_parts(stages: Vec<Stage>, nodes: Vec<Node>) -> Result<Self, TreeError> {
        let mut seen = BTreeSet::new();
        let mut offsets = Vec::with_capacity(stages.len());
        let mut symbols = Vec::new();
        for (k, s) in stages.iter().enumerate() {
            if s.symbols.is_empty() {
                return Err(TreeError::EmptyStage(k));
            }
            offsets.push(symbols.len());
            for name in &s.symbols {
                if !seen.insert(name.clone()) {
                    return Err(TreeError::DuplicateSymbol(name.clone()));
                }
                symbols.push(name.clone());
            }
        }
        let mut tree = Self {
            stages,
            symbols: symbols.into(),
            offsets,
            nodes,
            atoms: Vec::new(),
            ranges: Vec::new(),
        };
        tree.check_paths()?;
        tree.index_atoms();
        Ok(tree)
    }

    fn check_paths(&self) -> Result<(), TreeError> {
        let mut stack = vec![(0usize, Vec::<usize>::new())];
        while let Some((v, used)) = stack.pop() {
            let node = &self.nodes[v];
            if let Some((stage, _)) = node.floret {
                if used.contains(&stage) {
                    return Err(TreeError::StageReuseAcrossLevels { stage, node: v });
                }
                let mut next = used.clone();
                next.push(stage);
                for c in &node.children {
                    stack.push((c.node, next.clone()));
                }
            }
        }
        Ok(())
    }

    fn index_atoms(&mut self) {
        let n = self.symbols.len();
        let mut atoms = Vec::new();
        let mut ranges = vec![0..0; self.nodes.len()];
        fn walk(
            t: &StagedTree,
            v: NodeId,
            coef: BigInt,
            exps: Vec<u32>,
            len: usize,
            atoms: &mut Vec<Atom>,
            ranges: &mut [Range<usize>],
        ) {
            let start = atoms.len();
            let node = &t.nodes[v];
            match node.floret {
                None => atoms.push(Atom { leaf: v, coef, exps, length: len }),
                Some((stage, _)) => {
                    let off = t.offsets[stage];
                    for c in &node.children {
                        let mut e = exps.clone();
                        for (k, &x) in c.composition.iter().enumerate() {
                            e[off + k] += x;
                        }
                        let cf = &coef * multinomial(&c.composition);
                        walk(t, c.node, cf, e, len + 1, atoms, ranges);
                    }
                }
            }
            ranges[v] = start..atoms.len();
        }
        walk(self, 0, BigInt::one(), vec![0; n], 0, &mut atoms, &mut ranges);
        self.atoms = atoms;
        self.ranges = ranges;
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn symbols(&self) -> &Arc<[String]> {
        &self.symbols
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Global symbol indices of a stage.
    pub fn stage_symbols(&self, stage: usize) -> Range<usize> {
        self.offsets[stage]..self.offsets[stage] + self.stages[stage].symbols.len()
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == name)
    }

    /// Atoms on paths through `v`; always a contiguous range in atom order.
    pub fn paths_through(&self, v: NodeId) -> Range<usize> {
        self.ranges[v].clone()
    }

    pub fn is_binary(&self) -> bool {
        self.stages.iter().all(|s| s.symbols.len() == 2)
    }

    /// Non-leaf nodes of a stage, in id order.
    pub fn stage_nodes(&self, stage: usize) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&v| matches!(self.nodes[v].floret, Some((s, _)) if s == stage)).collect()
    }

    pub fn child(&self, v: NodeId, composition: &[u32]) -> Option<NodeId> {
        self.nodes[v].children.iter().find(|c| c.composition == composition).map(|c| c.node)
    }

    fn edge_monomial(&self, v: NodeId, c: &Child) -> MPoly {
        let (stage, _) = self.nodes[v].floret.expect("non-leaf");
        let mut e = vec![0u32; self.symbols.len()];
        for (k, &x) in c.composition.iter().enumerate() {
            e[self.offsets[stage] + k] = x;
        }
        MPoly::monomial(self.symbols.clone(), Rat::from_integer(multinomial(&c.composition)), e)
    }

    pub fn check_theta(&self, theta: &[Rat]) -> Result<(), TreeError> {
        if theta.len() != self.symbols.len() {
            return Err(TreeError::InvalidTheta(format!(
                "{} values for {} symbols",
                theta.len(),
                self.symbols.len()
            )));
        }
        for (k, _) in self.stages.iter().enumerate() {
            let r = self.stage_symbols(k);
            if theta[r.clone()].iter().any(|x| *x <= Rat::zero() || *x > Rat::one()) {
                return Err(TreeError::InvalidTheta(format!("stage {k} has a value outside (0,1]")));
            }
            let s: Rat = theta[r].iter().sum();
            if !s.is_one() {
                return Err(TreeError::InvalidTheta(format!("stage {k} sums to {s}")));
            }
        }
        Ok(())
    }

    /// Random point of Θ_T with common denominator 97 inside each stage.
    pub fn random_theta<R: Rng>(&self, rng: &mut R) -> Vec<Rat> {
        const DEN: i64 = 97;
        let mut theta = Vec::with_capacity(self.symbols.len());
        for s in &self.stages {
            let k = s.symbols.len();
            if k == 1 {
                theta.push(Rat::one());
                continue;
            }
            loop {
                let nums: Vec<i64> = (0..k - 1).map(|_| rng.gen_range(1..DEN)).collect();
                let last = DEN - nums.iter().sum::<i64>();
                if last > 0 {
                    theta.extend(nums.iter().chain([&last]).map(|&x| Rat::new(x.into(), DEN.into())));
                    break;
                }
            }
        }
        theta
    }
}

// ---------------------------------------------------------------- JSON

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: i64,
    pub stage: usize,
    pub degree: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<Vec<u32>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeJson {
    pub stages: Vec<Stage>,
    pub nodes: Vec<NodeJson>,
}

impl StagedTree {
    pub fn to_json(&self) -> TreeJson {
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| Stage { id: k, symbols: s.symbols.clone() })
            .collect();
        // internal nodes numbered in breadth-first order, which is how `from_json` rebuilds them
        let mut bfs = Vec::new();
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            if self.nodes[v].is_leaf() {
                continue;
            }
            bfs.push(v);
            queue.extend(self.nodes[v].children.iter().map(|c| c.node));
        }
        let rank: BTreeMap<NodeId, i64> = bfs.iter().enumerate().map(|(r, &v)| (v, r as i64)).collect();
        let mut nodes = Vec::new();
        for &v in &bfs {
            let node = &self.nodes[v];
            let (stage, degree) = node.floret.unwrap();
            let (parent, via) = match node.parent {
                None => (None, None),
                Some(p) => {
                    let c = self.nodes[p].children.iter().find(|c| c.node == v).unwrap();
                    (Some(rank[&p]), Some(c.composition.clone()))
                }
            };
            let order: Vec<Vec<u32>> = node.children.iter().map(|c| c.composition.clone()).collect();
            let default = compositions(self.stages[stage].symbols.len(), degree);
            nodes.push(NodeJson {
                id: rank[&v],
                stage,
                degree,
                parent,
                via,
                order: (order != default).then_some(order),
            });
        }
        TreeJson { stages, nodes }
    }

    pub fn from_json(j: &TreeJson) -> Result<Self, TreeError> {
        let stage_index: BTreeMap<usize, usize> =
            j.stages.iter().enumerate().map(|(k, s)| (s.id, k)).collect();
        if stage_index.len() != j.stages.len() {
            return Err(TreeError::Json("duplicate stage id".into()));
        }
        let mut b = TreeBuilder::new(j.stages.iter().map(|s| s.symbols.clone()).collect());
        let roots: Vec<&NodeJson> = j.nodes.iter().filter(|n| n.parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(TreeError::Root);
        }
        let mut by_parent: BTreeMap<(i64, Vec<u32>), &NodeJson> = BTreeMap::new();
        for n in j.nodes.iter().filter(|n| n.parent.is_some()) {
            let key = (n.parent.unwrap(), n.via.clone().ok_or(TreeError::BadNode(n.id))?);
            if by_parent.insert(key, n).is_some() {
                return Err(TreeError::BadNode(n.id));
            }
        }
        let mut placed = 0usize;
        let mut queue = std::collections::VecDeque::from([(roots[0], b.root())]);
        while let Some((n, v)) = queue.pop_front() {
            placed += 1;
            let stage = *stage_index.get(&n.stage).ok_or(TreeError::UnknownStage(n.stage))?;
            let kids = match &n.order {
                Some(o) => b.floret_ordered(v, stage, n.degree, o.clone())?,
                None => b.floret(v, stage, n.degree)?,
            };
            for kid in kids {
                let comp = b.nodes[v].children.iter().find(|c| c.node == kid).unwrap().composition.clone();
                if let Some(m) = by_parent.get(&(n.id, comp)) {
                    queue.push_back((m, kid));
                }
            }
        }
        if placed != j.nodes.len() {
            return Err(TreeError::Json("some nodes are unreachable from the root".into()));
        }
        b.build()
    }

    pub fn from_json_str(s: &str) -> Result<Self, TreeError> {
        let j: TreeJson = serde_json::from_str(s).map_err(|e| TreeError::Json(e.to_string()))?;
        Self::from_json(&j)
    }
}

// ---------------------------------------------------------------- model

/// p_j = c_j Π θ_i^{a_ij}.
pub fn parametrize(tree: &StagedTree, theta: &[Rat]) -> Result<Vec<Rat>, TreeError> {
    tree.check_theta(theta)?;
    Ok(tree.atoms.iter().map(|a| monomial_value(a, theta)).collect())
}

fn monomial_value(a: &Atom, theta: &[Rat]) -> Rat {
    let mut v = Rat::from_integer(a.coef.clone());
    for (x, &e) in theta.iter().zip(&a.exps) {
        if e > 0 {
            v *= pow_rat(x, e as i64).expect("nonnegative exponent");
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MleEstimate {
    pub theta: Vec<Rat>,
    pub p: Vec<Rat>,
    /// Some coordinate of the estimate is zero, so it lies on the boundary of the simplex.
    pub boundary: bool,
}

/// Closed-form maximum likelihood estimate.
pub fn rational_mle(tree: &StagedTree, u: &[u64]) -> Result<MleEstimate, TreeError> {
    if u.len() != tree.num_atoms() {
        return Err(TreeError::CountLength { got: u.len(), expected: tree.num_atoms() });
    }
    let mut totals = vec![BigInt::zero(); tree.symbols.len()];
    for (a, &uj) in tree.atoms.iter().zip(u) {
        if uj == 0 {
            continue;
        }
        for (t, &e) in totals.iter_mut().zip(&a.exps) {
            *t += BigInt::from(uj) * e;
        }
    }
    let mut theta = vec![Rat::zero(); totals.len()];
    for k in 0..tree.stages.len() {
        let r = tree.stage_symbols(k);
        let den: BigInt = totals[r.clone()].iter().sum();
        if den.is_zero() {
            return Err(TreeError::EmptyStageData(k));
        }
        for i in r {
            theta[i] = Rat::new(totals[i].clone(), den.clone());
        }
    }
    let p: Vec<Rat> = tree.atoms.iter().map(|a| monomial_value(a, &theta)).collect();
    let boundary = p.iter().any(Zero::is_zero);
    Ok(MleEstimate { theta, p, boundary })
}

/// One row per symbol, then one row per stage; λ_j = (−1)^{|a_j|} c_j.
pub fn tree_horn_pair(tree: &StagedTree) -> HornPair {
    let n = tree.num_atoms();
    let mut rows: Vec<Vec<i64>> = (0..tree.symbols.len())
        .map(|i| tree.atoms.iter().map(|a| a.exps[i] as i64).collect())
        .collect();
    let mut labels: Vec<String> = tree.symbols.to_vec();
    for (k, s) in tree.stages.iter().enumerate() {
        let r = tree.stage_symbols(k);
        rows.push((0..n).map(|j| -r.clone().map(|i| rows[i][j]).sum::<i64>()).collect());
        labels.push(format!("-({})", s.symbols.join("+")));
    }
    let lambda = tree
        .atoms
        .iter()
        .map(|a| {
            let deg: i64 = a.exps.iter().map(|&e| e as i64).sum();
            Rat::from_integer(sign_pow(deg) * &a.coef)
        })
        .collect();
    let h = IntMatrix::from_rows_with_cols(rows, n).expect("rectangular");
    HornPair::with_labels(h, lambda, labels).expect("tree matrices have zero column sums")
}

/// t(v) for every node, indexed by node id.
pub fn interpolating_polys(tree: &StagedTree) -> Vec<MPoly> {
    let mut t: Vec<Option<MPoly>> = vec![None; tree.nodes.len()];
    let mut order = Vec::with_capacity(tree.nodes.len());
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(tree.nodes[v].children.iter().map(|c| c.node));
    }
    for &v in order.iter().rev() {
        let node = &tree.nodes[v];
        let poly = if node.is_leaf() {
            MPoly::one(tree.symbols.clone())
        } else {
            node.children.iter().fold(MPoly::zero(tree.symbols.clone()), |acc, c| {
                let term = &tree.edge_monomial(v, c) * t[c.node].as_ref().unwrap();
                &acc + &term
            })
        };
        t[v] = Some(poly);
    }
    t.into_iter().map(Option::unwrap).collect()
}

pub fn interpolating_poly(tree: &StagedTree, v: NodeId) -> MPoly {
    interpolating_polys(tree).swap_remove(v)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BalanceWitness {
    /// t(v(K1)) t(v(K2)) ≠ t(v(K3)) t(v(K4)) with K1 + K2 = K3 + K4.
    Vertex { v: NodeId, k1: Vec<u32>, k2: Vec<u32>, k3: Vec<u32>, k4: Vec<u32> },
    /// t(v(K)) t(w(Q')) ≠ t(v(K')) t(w(Q)) with K + Q' = K' + Q.
    Pair { v: NodeId, w: NodeId, k: Vec<u32>, q_prime: Vec<u32>, k_prime: Vec<u32>, q: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Balance {
    pub balanced: bool,
    pub witness: Option<BalanceWitness>,
}

fn add(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Unordered pairs {K1, K2} of children of `v` grouped by K1 + K2, groups in first-seen order.
fn pair_groups(children: &[Child]) -> Vec<Vec<(usize, usize)>> {
    let mut groups: Vec<(Vec<u32>, Vec<(usize, usize)>)> = Vec::new();
    let mut index: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for i in 0..children.len() {
        for j in i..children.len() {
            let s = add(&children[i].composition, &children[j].composition);
            let k = *index.entry(s.clone()).or_insert_with(|| {
                groups.push((s, Vec::new()));
                groups.len() - 1
            });
            groups[k].1.push((i, j));
        }
    }
    groups.into_iter().map(|(_, g)| g).filter(|g| g.len() > 1).collect()
}

/// Pairs (K, Q') of children of v and w grouped by K + Q'.
fn cross_groups(cv: &[Child], cw: &[Child]) -> Vec<Vec<(usize, usize)>> {
    let mut groups: Vec<(Vec<u32>, Vec<(usize, usize)>)> = Vec::new();
    let mut index: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for (i, a) in cv.iter().enumerate() {
        for (j, b) in cw.iter().enumerate() {
            let s = add(&a.composition, &b.composition);
            let k = *index.entry(s.clone()).or_insert_with(|| {
                groups.push((s, Vec::new()));
                groups.len() - 1
            });
            groups[k].1.push((i, j));
        }
    }
    groups.into_iter().map(|(_, g)| g).filter(|g| g.len() > 1).collect()
}

fn check_size(tree: &StagedTree) -> Result<(), TreeError> {
    for (v, node) in tree.nodes.iter().enumerate() {
        if let Some((stage, degree)) = node.floret {
            let size = tree.stages[stage].symbols.len();
            if size > 2 && degree > 4 {
                return Err(TreeError::UnsupportedSize { node: v, degree, size });
            }
        }
    }
    Ok(())
}

/// Decide balancedness by exact polynomial identities; returns the first violation.
pub fn is_balanced(tree: &StagedTree) -> Result<Balance, TreeError> {
    check_size(tree)?;
    let t = interpolating_polys(tree);
    for (v, node) in tree.nodes.iter().enumerate() {
        let ch = &node.children;
        for group in pair_groups(ch) {
            let (i, j) = group[0];
            let base = &t[ch[i].node] * &t[ch[j].node];
            for &(k, l) in &group[1..] {
                if &t[ch[k].node] * &t[ch[l].node] != base {
                    return Ok(Balance {
                        balanced: false,
                        witness: Some(BalanceWitness::Vertex {
                            v,
                            k1: ch[i].composition.clone(),
                            k2: ch[j].composition.clone(),
                            k3: ch[k].composition.clone(),
                            k4: ch[l].composition.clone(),
                        }),
                    });
                }
            }
        }
    }
    for stage in 0..tree.stages.len() {
        let vs = tree.stage_nodes(stage);
        for (x, &v) in vs.iter().enumerate() {
            for &w in &vs[x + 1..] {
                let (cv, cw) = (&tree.nodes[v].children, &tree.nodes[w].children);
                for group in cross_groups(cv, cw) {
                    let (i, j) = group[0];
                    let base = &t[cv[i].node] * &t[cw[j].node];
                    for &(k, l) in &group[1..] {
                        if &t[cv[k].node] * &t[cw[l].node] != base {
                            return Ok(Balance {
                                balanced: false,
                                witness: Some(BalanceWitness::Pair {
                                    v,
                                    w,
                                    k: cv[i].composition.clone(),
                                    q_prime: cw[j].composition.clone(),
                                    k_prime: cv[k].composition.clone(),
                                    q: cw[l].composition.clone(),
                                }),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Balance { balanced: true, witness: None })
}

// ---------------------------------------------------------------- invariants

/// Indeterminates p1, …, pn, one per atom.
pub fn p_symbols(n: usize) -> Arc<[String]> {
    (1..=n).map(|j| format!("p{j}")).collect()
}

/// P_[v] as a linear polynomial.
fn p_bracket(tree: &StagedTree, syms: &Arc<[String]>, v: NodeId) -> MPoly {
    tree.paths_through(v).fold(MPoly::zero(syms.clone()), |acc, j| &acc + &MPoly::var(syms.clone(), j))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelInvariants {
    pub stages: Vec<MPoly>,
    pub vertices: Vec<MPoly>,
    pub sum_to_one: MPoly,
}

impl ModelInvariants {
    pub fn all(&self) -> Vec<MPoly> {
        self.stages.iter().chain(&self.vertices).chain([&self.sum_to_one]).cloned().collect()
    }
}

fn vertex_generators(tree: &StagedTree, syms: &Arc<[String]>) -> Vec<MPoly> {
    let mut out = Vec::new();
    for (v, node) in tree.nodes.iter().enumerate() {
        let ch = &node.children;
        let _ = v;
        for group in pair_groups(ch) {
            for x in 0..group.len() {
                for y in x + 1..group.len() {
                    let (i1, i2) = group[x];
                    let (i3, i4) = group[y];
                    let c12 = multinomial(&ch[i1].composition) * multinomial(&ch[i2].composition);
                    let c34 = multinomial(&ch[i3].composition) * multinomial(&ch[i4].composition);
                    let lhs = &p_bracket(tree, syms, ch[i1].node) * &p_bracket(tree, syms, ch[i2].node);
                    let rhs = &p_bracket(tree, syms, ch[i3].node) * &p_bracket(tree, syms, ch[i4].node);
                    let g = &lhs.scale(&Rat::from_integer(c34)) - &rhs.scale(&Rat::from_integer(c12));
                    if !g.is_zero() {
                        out.push(g);
                    }
                }
            }
        }
    }
    out
}

/// Σ_{K: k_q ≥ 1} k_q P_[v(K)].
fn weighted_children(tree: &StagedTree, syms: &Arc<[String]>, v: NodeId, q: usize) -> MPoly {
    tree.nodes[v].children.iter().fold(MPoly::zero(syms.clone()), |acc, c| {
        let k = c.composition[q];
        if k == 0 {
            acc
        } else {
            &acc + &p_bracket(tree, syms, c.node).scale(&int(k as i64))
        }
    })
}

/// Generators of the ideal of model invariants.
pub fn model_invariant_generators(tree: &StagedTree) -> ModelInvariants {
    let syms = p_symbols(tree.num_atoms());
    let mut stages = Vec::new();
    for stage in 0..tree.stages.len() {
        let vs = tree.stage_nodes(stage);
        for (x, &v) in vs.iter().enumerate() {
            for &w in &vs[x + 1..] {
                let a = int(tree.nodes[v].floret.unwrap().1 as i64);
                let b = int(tree.nodes[w].floret.unwrap().1 as i64);
                for q in 0..tree.stages[stage].symbols.len() {
                    let lhs = &p_bracket(tree, &syms, w) * &weighted_children(tree, &syms, v, q);
                    let rhs = &p_bracket(tree, &syms, v) * &weighted_children(tree, &syms, w, q);
                    let g = &lhs.scale(&b) - &rhs.scale(&a);
                    if !g.is_zero() {
                        stages.push(g);
                    }
                }
            }
        }
    }
    let vertices = vertex_generators(tree, &syms);
    let total = p_bracket(tree, &syms, 0);
    let sum_to_one = &MPoly::one(syms.clone()) - &total;
    ModelInvariants { stages, vertices, sum_to_one }
}

/// Quadratic generators of J: same-stage cross relations plus the vertex family.
pub fn toric_generators_j(tree: &StagedTree) -> Vec<MPoly> {
    let syms = p_symbols(tree.num_atoms());
    let mut out = Vec::new();
    for stage in 0..tree.stages.len() {
        let vs = tree.stage_nodes(stage);
        for (x, &v) in vs.iter().enumerate() {
            for &w in &vs[x + 1..] {
                let (cv, cw) = (&tree.nodes[v].children, &tree.nodes[w].children);
                for group in cross_groups(cv, cw) {
                    for s in 0..group.len() {
                        for r in s + 1..group.len() {
                            // (K, Q') = group[s], (K', Q) = group[r]
                            let (k, qp) = group[s];
                            let (kp, q) = group[r];
                            let c_kq = multinomial(&cv[kp].composition) * multinomial(&cw[q].composition);
                            let c_kqp = multinomial(&cv[k].composition) * multinomial(&cw[qp].composition);
                            let lhs = &p_bracket(tree, &syms, cv[k].node) * &p_bracket(tree, &syms, cw[qp].node);
                            let rhs = &p_bracket(tree, &syms, cv[kp].node) * &p_bracket(tree, &syms, cw[q].node);
                            let g = &lhs.scale(&Rat::from_integer(c_kq)) - &rhs.scale(&Rat::from_integer(c_kqp));
                            if !g.is_zero() {
                                out.push(g);
                            }
                        }
                    }
                }
            }
        }
    }
    out.extend(vertex_generators(tree, &syms));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Vanishing {
    pub all_zero: bool,
    /// (polynomial index, sample index) of the first nonzero value.
    pub first_failure: Option<(usize, usize)>,
}

/// Evaluate each polynomial at `samples` random model points.
pub fn vanishing_check(polys: &[MPoly], tree: &StagedTree, samples: usize, seed: u64) -> Vanishing {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..samples {
        let theta = tree.random_theta(&mut rng);
        let p = parametrize(tree, &theta).expect("sampled theta is valid");
        for (k, poly) in polys.iter().enumerate() {
            if !poly.eval(&p).is_zero() {
                return Vanishing { all_zero: false, first_failure: Some((k, s)) };
            }
        }
    }
    Vanishing { all_zero: true, first_failure: None }
}

/// Substitute P_j ↦ c_j Π s_i^{a_ij} and test for the zero polynomial.
pub fn symbolic_vanishing(polys: &[MPoly], tree: &StagedTree) -> Vanishing {
    let images: Vec<(Rat, Vec<u32>)> =
        tree.atoms.iter().map(|a| (Rat::from_integer(a.coef.clone()), a.exps.clone())).collect();
    for (k, poly) in polys.iter().enumerate() {
        if !poly.substitute_monomials(&images, &tree.symbols).is_zero() {
            return Vanishing { all_zero: false, first_failure: Some((k, 0)) };
        }
    }
    Vanishing { all_zero: true, first_failure: None }
}

// ---------------------------------------------------------------- P_T

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreePolytope {
    pub polytope: LatticePolytope,
    pub map: AffineLattice,
    /// Projected exponent vector of each atom, in atom order.
    pub atom_points: Vec<Vec<i64>>,
    /// Whether the atoms are exactly the lattice points of the polytope.
    pub atoms_fill_polytope: bool,
}

pub fn polytope_of_tree(tree: &StagedTree) -> Result<TreePolytope, TreeError> {
    let exps: Vec<Vec<i64>> =
        tree.atoms.iter().map(|a| a.exps.iter().map(|&e| e as i64).collect()).collect();
    let (polytope, map) = hull_in_span(&exps)?;
    let atom_points: Vec<Vec<i64>> = if map.rank == map.ambient {
        exps.clone()
    } else {
        exps.iter().map(|x| map.project(x)).collect()
    };
    let mut a = atom_points.clone();
    let mut b = polytope.points.clone();
    a.sort();
    a.dedup();
    b.sort();
    let atoms_fill_polytope = a == b && a.len() == atom_points.len();
    Ok(TreePolytope { polytope, map, atom_points, atoms_fill_polytope })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexPaths {
    /// Atoms whose exponent vector is a vertex of P_T.
    pub by_hull: Vec<usize>,
    /// Atoms divisible by at most one symbol from each stage.
    pub by_divisibility: Vec<usize>,
    pub agree: bool,
}

pub fn vertex_representing_paths(tree: &StagedTree) -> Result<VertexPaths, TreeError> {
    let tp = polytope_of_tree(tree)?;
    Ok(vertex_paths_of(tree, &tp))
}

fn vertex_paths_of(tree: &StagedTree, tp: &TreePolytope) -> VertexPaths {
    let verts: BTreeSet<&Vec<i64>> = tp.polytope.vertices.iter().collect();
    let by_hull: Vec<usize> = (0..tree.num_atoms()).filter(|&j| verts.contains(&tp.atom_points[j])).collect();
    let by_divisibility: Vec<usize> = (0..tree.num_atoms())
        .filter(|&j| {
            (0..tree.stages.len())
                .all(|k| tree.stage_symbols(k).filter(|&i| tree.atoms[j].exps[i] > 0).count() <= 1)
        })
        .collect();
    let agree = by_hull == by_divisibility;
    VertexPaths { by_hull, by_divisibility, agree }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StarReport {
    pub ld_match: bool,
    pub vertex_char_match: bool,
    /// Facet index of P_T for each symbol, when the rows match.
    pub matching: Option<Vec<usize>>,
}

impl StarReport {
    pub fn holds(&self) -> bool {
        self.ld_match && self.vertex_char_match
    }
}

/// Property (⋆): symbol rows of the tree Horn matrix are the lattice distance
/// rows of P_T, and vertices are the paths divisible by ≤ 1 symbol per stage.
pub fn property_star(tree: &StagedTree) -> Result<StarReport, TreeError> {
    let tp = polytope_of_tree(tree)?;
    Ok(star_of(tree, &tp))
}

fn star_of(tree: &StagedTree, tp: &TreePolytope) -> StarReport {
    let raw = tree_horn_pair(tree);
    let (pos, _) = positive_part(raw.h()).expect("tree rows are single-signed");
    let ldm = ldm_at(&tp.polytope, &tp.atom_points);
    let mut matching = None;
    if pos.same_rows_up_to_order(&ldm) {
        let mut used = vec![false; ldm.nrows()];
        let mut m = Vec::with_capacity(tree.symbols.len());
        for i in 0..tree.symbols.len() {
            let f = (0..ldm.nrows()).find(|&f| !used[f] && ldm.row(f) == raw.h().row(i)).unwrap();
            used[f] = true;
            m.push(f);
        }
        matching = Some(m);
    }
    let vp = vertex_paths_of(tree, tp);
    StarReport { ld_match: matching.is_some(), vertex_char_match: vp.agree, matching }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Simpleness {
    pub via_tree: bool,
    pub direct: bool,
}

pub fn simpleness_via_tree(tree: &StagedTree) -> Result<Simpleness, TreeError> {
    let tp = polytope_of_tree(tree)?;
    if !star_of(tree, &tp).holds() {
        return Err(TreeError::StarRequired);
    }
    Ok(simpleness_of(tree, &tp))
}

fn simpleness_of(tree: &StagedTree, tp: &TreePolytope) -> Simpleness {
    let m = tree.stages.len();
    let same_length = tree.atoms.iter().all(|a| a.length == m);
    let dim_ok = tree.symbols.len() as i64 - m as i64 == tp.polytope.dim as i64;
    Simpleness { via_tree: same_length && dim_ok, direct: tp.polytope.is_simple() }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CollectionsReport {
    pub equal: bool,
    /// Facet sets of the stages under the (⋆) matching.
    pub stage_facets: Vec<Vec<usize>>,
    pub collections: Vec<Vec<usize>>,
    /// minimize(tree Horn pair) = minimize(M_{A,Σ}) up to row order.
    pub minimal_equals_m: bool,
}

pub fn stages_equal_primitive_collections(tree: &StagedTree) -> Result<CollectionsReport, TreeError> {
    let tp = polytope_of_tree(tree)?;
    let star = star_of(tree, &tp);
    if !star.holds() {
        return Err(TreeError::PreconditionFailed("property (*) does not hold".into()));
    }
    if !simpleness_of(tree, &tp).via_tree {
        return Err(TreeError::PreconditionFailed("P_T is not simple".into()));
    }
    let matching = star.matching.unwrap();
    let mut stage_facets: Vec<Vec<usize>> = (0..tree.stages.len())
        .map(|k| {
            let mut v: Vec<usize> = tree.stage_symbols(k).map(|i| matching[i]).collect();
            v.sort();
            v
        })
        .collect();
    stage_facets.sort();
    let mut collections = primitive_collections(&normal_fan(&tp.polytope));
    collections.sort();
    let m = matrix_m_at(&tp.polytope, &tp.atom_points);
    let minimal = minimize(&tree_horn_pair(tree))?;
    let ones = vec![Rat::one(); m.matrix.ncols()];
    let reduced = minimize(&HornPair::new(m.matrix, ones)?)?;
    let minimal_equals_m = minimal.h().same_rows_up_to_order(reduced.h());
    Ok(CollectionsReport { equal: stage_facets == collections, stage_facets, collections, minimal_equals_m })
}

// ---------------------------------------------------------------- identities

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AppendixB {
    pub transition: bool,
    pub quadruple: bool,
    pub recovery: bool,
    pub cross_stage: bool,
    /// Binary-floret identities; `None` when the floret is not binary.
    pub auxiliary: Option<bool>,
    pub eq1: Option<bool>,
    pub eq2: Option<bool>,
    pub closed_form: Option<bool>,
}

impl AppendixB {
    pub fn all_hold(&self) -> bool {
        self.transition
            && self.quadruple
            && self.recovery
            && self.cross_stage
            && [self.auxiliary, self.eq1, self.eq2, self.closed_form].iter().all(|x| x.unwrap_or(true))
    }
}

/// Exact evaluation of the model-point identities at node `v`.
pub fn appendix_b_identity_tests(
    tree: &StagedTree,
    v: NodeId,
    samples: usize,
    seed: u64,
) -> Result<AppendixB, TreeError> {
    let node = tree.nodes.get(v).ok_or(TreeError::BadNode(v as i64))?;
    let (stage, a) = node.floret.ok_or(TreeError::Leaf(v))?;
    let binary = tree.stages[stage].symbols.len() == 2;
    let mut rep = AppendixB {
        transition: true,
        quadruple: true,
        recovery: true,
        cross_stage: true,
        auxiliary: binary.then_some(true),
        eq1: binary.then_some(true),
        eq2: binary.then_some(true),
        closed_form: binary.then_some(true),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<NodeId> = tree.stage_nodes(stage).into_iter().filter(|&w| w != v).collect();
    let syms = tree.stage_symbols(stage);
    let ai = int(a as i64);
    for _ in 0..samples {
        let theta = tree.random_theta(&mut rng);
        let p = parametrize(tree, &theta)?;
        let pb = |x: NodeId| -> Rat { tree.paths_through(x).map(|j| &p[j]).sum() };
        let pv = pb(v);
        let ch = &node.children;
        for c in ch {
            let mut expect = Rat::from_integer(multinomial(&c.composition));
            for (q, i) in syms.clone().enumerate() {
                expect *= pow_rat(&theta[i], c.composition[q] as i64).unwrap();
            }
            rep.transition &= pb(c.node) / &pv == expect;
        }
        for group in pair_groups(ch) {
            for x in 0..group.len() {
                for y in x + 1..group.len() {
                    let (i1, i2) = group[x];
                    let (i3, i4) = group[y];
                    let c12 = Rat::from_integer(multinomial(&ch[i1].composition) * multinomial(&ch[i2].composition));
                    let c34 = Rat::from_integer(multinomial(&ch[i3].composition) * multinomial(&ch[i4].composition));
                    rep.quadruple &= c34 * pb(ch[i1].node) * pb(ch[i2].node)
                        == c12 * pb(ch[i3].node) * pb(ch[i4].node);
                }
            }
        }
        let weighted = |x: NodeId, q: usize| -> Rat {
            tree.nodes[x]
                .children
                .iter()
                .map(|c| int(c.composition[q] as i64) * pb(c.node))
                .sum()
        };
        for (q, i) in syms.clone().enumerate() {
            rep.recovery &= weighted(v, q) / (&ai * &pv) == theta[i];
            for &w in &others {
                let b = int(tree.nodes[w].floret.unwrap().1 as i64);
                rep.cross_stage &= b * pb(w) * weighted(v, q) == &ai * &pv * weighted(w, q);
            }
        }
        if binary {
            let pk = |k: u32| pb(tree.child(v, &[k, a - k]).unwrap());
            let l1: Rat = (1..=a).map(|k| int(k as i64) * pk(k)).sum();
            let l2: Rat = (1..=a).map(|k| int(k as i64) * pk(a - k)).sum();
            let pw = |x: &Rat, e: u32| pow_rat(x, e as i64).unwrap();
            let bin = |k: u32| Rat::from_integer(binomial(a as u64, k as u64));
            for k0 in 0..=a {
                if k0 < a {
                    rep.auxiliary = Some(
                        rep.auxiliary.unwrap()
                            && int((a - k0) as i64) * pk(k0) * &l1 == int((k0 + 1) as i64) * pk(k0 + 1) * &l2,
                    );
                }
                for k in 1..=a - k0 {
                    let lhs = bin(k0 + k) * pk(k0) * pw(&l1, k0 + k) * pw(&l2, a - k0 - k);
                    let rhs = bin(k0) * pk(k0 + k) * pw(&l1, k0) * pw(&l2, a - k0);
                    rep.eq1 = Some(rep.eq1.unwrap() && lhs == rhs);
                }
                for k in 1..=k0 {
                    let lhs = bin(k0 - k) * pk(k0) * pw(&l1, k0 - k) * pw(&l2, a - k0 + k);
                    let rhs = bin(k0) * pk(k0 - k) * pw(&l1, k0) * pw(&l2, a - k0);
                    rep.eq2 = Some(rep.eq2.unwrap() && lhs == rhs);
                }
                let apv = &ai * &pv;
                let lhs = bin(k0) * pw(&(&l1 / &apv), k0) * pw(&(&l2 / &apv), a - k0);
                rep.closed_form = Some(rep.closed_form.unwrap() && lhs == pk(k0) / &pv && apv == &l1 + &l2);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::exactmath::rat;
    use crate::horn::{horn_eval, is_minimal, validate_horn_pair};
    use proptest::prelude::*;

    pub(crate) fn independence() -> StagedTree {
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"]]);
        for v in b.floret(0, 0, 1).unwrap() {
            b.floret(v, 1, 1).unwrap();
        }
        b.build().unwrap()
    }

    fn simplex(b: u32) -> StagedTree {
        let mut t = TreeBuilder::with_names(&[&["s0", "s1", "s2"]]);
        t.floret(0, 0, b).unwrap();
        t.build().unwrap()
    }

    fn trapezoid(a: u32, b: u32, d: u32) -> StagedTree {
        let mut t = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"]]);
        let kids = t.floret(0, 0, b).unwrap();
        for (j, v) in (0..=b).rev().zip(kids) {
            t.floret(v, 1, a + d * (b - j)).unwrap();
        }
        t.build().unwrap()
    }

    /// Three-level binary tree whose two second-level florets feed subtrees of different degree.
    pub(crate) fn unbalanced() -> StagedTree {
        let mut t = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"], &["s4", "s5"]]);
        let kids = t.floret(0, 0, 1).unwrap();
        let left = t.floret(kids[0], 1, 1).unwrap();
        let right = t.floret(kids[1], 1, 1).unwrap();
        t.floret(left[0], 2, 1).unwrap();
        t.floret(right[0], 2, 2).unwrap();
        t.build().unwrap()
    }

    #[test]
    fn atoms_and_coefficients() {
        let t = trapezoid(1, 2, 1);
        let c: Vec<i64> = t.atoms().iter().map(|a| a.coef.clone().try_into().unwrap()).collect();
        assert_eq!(c, vec![1, 1, 2, 4, 2, 1, 3, 3, 1]);
        let s = simplex(2);
        let c: Vec<i64> = s.atoms().iter().map(|a| a.coef.clone().try_into().unwrap()).collect();
        assert_eq!(c, vec![1, 2, 2, 1, 2, 1]);
        let mut one = TreeBuilder::with_names(&[&["s0", "s1"]]);
        one.floret(0, 0, 1).unwrap();
        let one = one.build().unwrap();
        assert_eq!(one.atoms()[0].exps, vec![1, 0]);
        assert_eq!(one.atoms()[1].exps, vec![0, 1]);
    }

    #[test]
    fn build_errors() {
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"]]);
        let kids = b.floret(0, 0, 1).unwrap();
        b.floret(kids[0], 0, 1).unwrap();
        assert!(matches!(b.build(), Err(TreeError::StageReuseAcrossLevels { .. })));
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"]]);
        assert_eq!(
            b.floret_ordered(0, 0, 1, vec![vec![1, 0], vec![1, 0]]),
            Err(TreeError::NonBijectiveLabelling(0))
        );
        let b = TreeBuilder::new(vec![vec![]]);
        assert_eq!(b.build(), Err(TreeError::EmptyStage(0)));
        let b = TreeBuilder::with_names(&[&["x"], &["x"]]);
        assert_eq!(b.build(), Err(TreeError::DuplicateSymbol("x".into())));
    }

    #[test]
    fn parametrization() {
        let t = independence();
        assert_eq!(parametrize(&t, &vec![rat(1, 2); 4]).unwrap(), vec![rat(1, 4); 4]);
        let s = simplex(1);
        assert_eq!(
            parametrize(&s, &[rat(1, 2), rat(1, 3), rat(1, 6)]).unwrap(),
            vec![rat(1, 2), rat(1, 3), rat(1, 6)]
        );
        assert!(parametrize(&t, &[rat(1, 2), rat(1, 3), rat(1, 2), rat(1, 2)]).is_err());
        let t = trapezoid(1, 1, 1);
        let p = parametrize(&t, &[rat(1, 2), rat(1, 2), rat(1, 3), rat(2, 3)]).unwrap();
        // p_ij = C(1,j) C(1+(1-j), i) θ0^j θ1^{1-j} θ3^i θ2^{..}
        assert_eq!(p[0], rat(1, 2) * rat(1, 3));
        assert_eq!(p.iter().sum::<Rat>(), int(1));
    }

    #[test]
    fn mle_and_horn_agree() {
        let t = independence();
        let m = rational_mle(&t, &[3, 1, 1, 1]).unwrap();
        assert_eq!(m.p, vec![rat(4, 9), rat(2, 9), rat(2, 9), rat(1, 9)]);
        assert_eq!(m.theta, vec![rat(2, 3), rat(1, 3), rat(2, 3), rat(1, 3)]);
        let pair = tree_horn_pair(&t);
        assert_eq!(pair.h().nrows(), 6);
        assert!(!is_minimal(pair.h()).is_minimal);
        let u: Vec<Rat> = [3, 1, 1, 1].iter().map(|&x| int(x)).collect();
        assert_eq!(horn_eval(&pair, &u).unwrap(), m.p);
        let mut one = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"]]);
        one.floret(0, 0, 1).unwrap();
        assert_eq!(
            rational_mle(&one.build().unwrap(), &[1, 1]),
            Err(TreeError::EmptyStageData(1))
        );
        let z = rational_mle(&t, &[1, 0, 0, 0]).unwrap();
        assert!(z.boundary);
    }

    #[test]
    fn saturated_floret_pair() {
        let s = simplex(1);
        let pair = tree_horn_pair(&s);
        assert_eq!(pair.lambda(), &[int(-1), int(-1), int(-1)]);
        assert!(validate_horn_pair(&pair, 20, 1).passed());
    }

    #[test]
    fn trapezoid_columns() {
        let (a, b, d) = (2u32, 2u32, 1u32);
        let t = trapezoid(a, b, d);
        let pair = tree_horn_pair(&t);
        let mut k = 0;
        for j in (0..=b).rev() {
            for i in 0..=a + d * (b - j) {
                let col = pair.h().column(k);
                let big = (a + d * (b - j)) as i64;
                let (i, j) = (i as i64, j as i64);
                assert_eq!(col, vec![j, b as i64 - j, big - i, i, -(b as i64), -big]);
                k += 1;
            }
        }
    }

    #[test]
    fn interpolating() {
        let t = independence();
        let polys = interpolating_polys(&t);
        let sy = t.symbols().clone();
        let v = |i| MPoly::var(sy.clone(), i);
        assert_eq!(polys[0], &(&v(0) + &v(1)) * &(&v(2) + &v(3)));
        assert_eq!(polys[3], MPoly::one(sy.clone()));
        let tr = trapezoid(1, 2, 1);
        let polys = interpolating_polys(&tr);
        let child = tr.node(0).children[0].node; // j = 2
        assert_eq!(polys[child], (&v(2) + &v(3)).pow(1));
        let child = tr.node(0).children[2].node; // j = 0
        assert_eq!(polys[child], (&v(2) + &v(3)).pow(3));
    }

    #[test]
    fn balance() {
        assert!(is_balanced(&trapezoid(1, 2, 1)).unwrap().balanced);
        assert!(is_balanced(&simplex(3)).unwrap().balanced);
        let u = is_balanced(&unbalanced()).unwrap();
        assert!(!u.balanced);
        assert!(matches!(u.witness, Some(BalanceWitness::Pair { .. })));
        assert!(matches!(is_balanced(&simplex(5)), Err(TreeError::UnsupportedSize { .. })));
    }

    #[test]
    fn invariants_of_independence() {
        let t = independence();
        let inv = model_invariant_generators(&t);
        assert!(inv.vertices.is_empty());
        assert_eq!(inv.stages.len(), 2);
        let sy = p_symbols(4);
        let p = |i| MPoly::var(sy.clone(), i);
        let target = &(&p(0) * &p(3)) - &(&p(1) * &p(2));
        let g = &inv.stages[0];
        let scale = g.coefficient(&[1, 0, 0, 1]);
        assert_eq!(*g, target.scale(&scale));
        assert!(vanishing_check(&inv.all(), &t, 20, 3).all_zero);
        let single = simplex(2);
        let inv = model_invariant_generators(&single);
        assert!(inv.stages.is_empty());
        assert_eq!(inv.vertices.len(), 6);
    }

    #[test]
    fn j_generators() {
        let t = trapezoid(1, 2, 1);
        assert!(symbolic_vanishing(&toric_generators_j(&t), &t).all_zero);
        let u = unbalanced();
        assert!(!symbolic_vanishing(&toric_generators_j(&u), &u).all_zero);
        // the model invariants still vanish on the model itself
        assert!(vanishing_check(&model_invariant_generators(&u).all(), &u, 10, 0).all_zero);
    }

    #[test]
    fn tree_polytopes() {
        let tp = polytope_of_tree(&independence()).unwrap();
        assert_eq!(tp.polytope.dim, 2);
        assert_eq!(tp.polytope.vertices.len(), 4);
        assert!(tp.atoms_fill_polytope);
        let tp = polytope_of_tree(&trapezoid(1, 2, 1)).unwrap();
        assert_eq!(tp.polytope.points.len(), 9);
        assert_eq!(tp.polytope.vertices.len(), 4);
        let mut f = TreeBuilder::with_names(&[&["s0", "s1"]]);
        f.floret(0, 0, 3).unwrap();
        let f = f.build().unwrap();
        let vp = vertex_representing_paths(&f).unwrap();
        assert_eq!(vp.by_hull, vec![0, 3]);
        assert!(vp.agree);
    }

    #[test]
    fn star_for_simple_trees() {
        for t in [trapezoid(1, 2, 1), simplex(2), trapezoid(2, 1, 1)] {
            let s = property_star(&t).unwrap();
            assert!(s.holds());
            let simple = simpleness_via_tree(&t).unwrap();
            assert!(simple.via_tree && simple.direct);
            let c = stages_equal_primitive_collections(&t).unwrap();
            assert!(c.equal && c.minimal_equals_m);
        }
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"], &["s2", "s3"]]);
        let kids = b.floret(0, 0, 1).unwrap();
        b.floret(kids[0], 1, 1).unwrap();
        let partial = b.build().unwrap();
        assert!(!property_star(&partial).unwrap().ld_match);
        assert_eq!(simpleness_via_tree(&partial), Err(TreeError::StarRequired));
    }

    #[test]
    fn identities() {
        let t = trapezoid(1, 2, 1);
        for v in [0, t.node(0).children[2].node] {
            let r = appendix_b_identity_tests(&t, v, 5, 11).unwrap();
            assert!(r.all_hold(), "{r:?}");
        }
        let s = simplex(3);
        let r = appendix_b_identity_tests(&s, 0, 5, 2).unwrap();
        assert!(r.all_hold() && r.eq1.is_none());
    }

    #[test]
    fn json_round_trip() {
        for t in [trapezoid(1, 2, 1), unbalanced(), simplex(2)] {
            let s = serde_json::to_string(&t.to_json()).unwrap();
            let back = StagedTree::from_json_str(&s).unwrap();
            let key = |t: &StagedTree| -> Vec<(BigInt, Vec<u32>)> {
                t.atoms().iter().map(|a| (a.coef.clone(), a.exps.clone())).collect()
            };
            assert_eq!(key(&back), key(&t));
            assert_eq!(back.to_json(), t.to_json());
        }
        let mut b = TreeBuilder::with_names(&[&["s0", "s1"]]);
        b.floret_ordered(0, 0, 2, vec![vec![0, 2], vec![1, 1], vec![2, 0]]).unwrap();
        let t = b.build().unwrap();
        let back = StagedTree::from_json(&t.to_json()).unwrap();
        assert_eq!(back.atoms()[0].exps, vec![0, 2]);
    }

    proptest! {
        #[test]
        fn parametrization_sums_to_one(seed in 0u64..500, a in 1u32..4, b in 1u32..4, d in 0u32..3) {
            let t = trapezoid(a, b, d);
            let theta = t.random_theta(&mut ChaCha8Rng::seed_from_u64(seed));
            let p = parametrize(&t, &theta).unwrap();
            prop_assert_eq!(p.iter().sum::<Rat>(), int(1));
            let root = interpolating_poly(&t, 0);
            prop_assert_eq!(root.eval(&theta), int(1));
        }

        #[test]
        fn mle_is_horn(u in prop::collection::vec(1u64..30, 9)) {
            let t = trapezoid(1, 2, 1);
            let m = rational_mle(&t, &u).unwrap();
            let ur: Vec<Rat> = u.iter().map(|&x| Rat::from_integer(x.into())).collect();
            prop_assert_eq!(horn_eval(&tree_horn_pair(&t), &ur).unwrap(), m.p);
        }
    }
}
