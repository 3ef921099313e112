//! Finite filtered event trees.
//!
//! A tree stores nodes in breadth-first order: parents always precede their
//! children, so a reverse sweep over node ids is a valid backward induction
//! order. Trees are non-recombining; every node owns its own history.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default cap on the number of enumerated stopping times.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<S> {
    /// Time index `k` in `0..=N`.
    pub step: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Branch probability of each child, aligned with `children`.
    pub probs: Vec<S>,
    /// Risky asset prices at this node (length = tree dimension).
    pub price: Vec<S>,
}

impl<S> Node<S> {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Finite probability space with its filtration and asset prices.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree<S> {
    nodes: Vec<Node<S>>,
    time_grid: Vec<S>,
    dim: usize,
}

impl<S: Scalar> EventTree<S> {
    /// Validates and wraps a node table.
    ///
    /// Node 0 must be the unique root and every child must have a larger id
    /// than its parent. Probabilities must be strictly positive and sum to one
    /// (exactly for rational scalars, within `1e-12` otherwise).
    pub fn from_nodes(nodes: Vec<Node<S>>, time_grid: Vec<S>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        if time_grid.len() < 2 {
            return Err(Error::InvalidTree("time grid needs at least two points".into()));
        }
        if !time_grid[0].is_zero() {
            return Err(Error::InvalidTree("time grid must start at 0".into()));
        }
        for w in time_grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidTree("time grid must be strictly increasing".into()));
            }
        }
        let horizon = time_grid.len() - 1;
        let dim = nodes[0].price.len();
        if dim == 0 {
            return Err(Error::InvalidTree("nodes carry no asset prices".into()));
        }
        let prob_tol = if S::EXACT { S::zero() } else { S::from_f64(1e-12) };
        for (i, node) in nodes.iter().enumerate() {
            let id = NodeId(i);
            if node.price.len() != dim {
                return Err(Error::InvalidTree(format!("node {id} has price dimension {}", node.price.len())));
            }
            match node.parent {
                None if i != 0 => return Err(Error::InvalidTree(format!("node {id} has no parent"))),
                Some(_) if i == 0 => return Err(Error::InvalidTree("root has a parent".into())),
                Some(p) => {
                    if p.0 >= i {
                        return Err(Error::InvalidTree(format!("node {id} precedes its parent {p}")));
                    }
                    let parent = &nodes[p.0];
                    if !parent.children.contains(&id) {
                        return Err(Error::InvalidTree(format!("node {id} not listed by parent {p}")));
                    }
                    if node.step != parent.step + 1 {
                        return Err(Error::InvalidTree(format!("node {id} step is not parent step + 1")));
                    }
                }
                None => {
                    if node.step != 0 {
                        return Err(Error::InvalidTree("root must sit at step 0".into()));
                    }
                }
            }
            if node.is_leaf() {
                if node.step != horizon {
                    return Err(Error::InvalidTree(format!("leaf {id} is not at the horizon {horizon}")));
                }
                continue;
            }
            if node.children.len() < 2 {
                return Err(Error::InvalidTree(format!("node {id} has fewer than two children")));
            }
            if node.probs.len() != node.children.len() {
                return Err(Error::InvalidTree(format!("node {id} probabilities misaligned")));
            }
            let mut total = S::zero();
            for (c, p) in node.children.iter().zip(&node.probs) {
                if c.0 >= nodes.len() || nodes[c.0].parent != Some(id) {
                    return Err(Error::InvalidTree(format!("child {c} of node {id} disagrees about its parent")));
                }
                if *p <= S::zero() || *p > S::one() {
                    return Err(Error::InvalidTree(format!("branch probability {p} at node {id} outside (0,1]")));
                }
                total = total + p.clone();
            }
            if !total.approx_eq(&S::one(), &prob_tol) {
                return Err(Error::InvalidTree(format!("probabilities at node {id} sum to {total}")));
            }
        }
        Ok(EventTree { nodes, time_grid, dim })
    }

    /// Non-recombining binomial tree: children are ordered `[up, down]`.
    pub fn binomial(s0: S, up: S, down: S, n_steps: usize, maturity: S, prob_up: S) -> Result<Self> {
        if s0 <= S::zero() {
            return Err(Error::InvalidParameter("s0 must be positive".into()));
        }
        if down <= S::zero() {
            return Err(Error::InvalidParameter("down factor must be positive".into()));
        }
        if up <= down {
            return Err(Error::InvalidParameter("up factor must exceed the down factor".into()));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("at least one step is required".into()));
        }
        if maturity <= S::zero() {
            return Err(Error::InvalidParameter("maturity must be positive".into()));
        }
        if prob_up <= S::zero() || prob_up >= S::one() {
            return Err(Error::InvalidParameter("branch probability must lie in (0,1)".into()));
        }
        if n_steps > 24 {
            return Err(Error::InvalidParameter("non-recombining tree deeper than 24 steps".into()));
        }
        let prob_down = S::one() - prob_up.clone();
        let mut nodes: Vec<Node<S>> = Vec::with_capacity((1usize << (n_steps + 1)) - 1);
        nodes.push(Node { step: 0, parent: None, children: Vec::new(), probs: Vec::new(), price: vec![s0] });
        let mut level_start = 0;
        for k in 0..n_steps {
            let level_end = nodes.len();
            for p in level_start..level_end {
                let base = nodes[p].price[0].clone();
                let up_id = NodeId(nodes.len());
                nodes.push(Node {
                    step: k + 1,
                    parent: Some(NodeId(p)),
                    children: Vec::new(),
                    probs: Vec::new(),
                    price: vec![base.clone() * up.clone()],
                });
                let down_id = NodeId(nodes.len());
                nodes.push(Node {
                    step: k + 1,
                    parent: Some(NodeId(p)),
                    children: Vec::new(),
                    probs: Vec::new(),
                    price: vec![base * down.clone()],
                });
                nodes[p].children = vec![up_id, down_id];
                nodes[p].probs = vec![prob_up.clone(), prob_down.clone()];
            }
            level_start = level_end;
        }
        let dt = maturity / S::from_int(n_steps as i64);
        let mut grid = Vec::with_capacity(n_steps + 1);
        let mut t = S::zero();
        for _ in 0..=n_steps {
            grid.push(t.clone());
            t = t + dt.clone();
        }
        EventTree::from_nodes(nodes, grid)
    }
}

impl<S> EventTree<S> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of time steps `N`.
    pub fn horizon(&self) -> usize {
        self.time_grid.len() - 1
    }

    /// Number of risky assets.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, id: NodeId) -> &Node<S> {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn time_grid(&self) -> &[S] {
        &self.time_grid
    }

    pub fn time(&self, id: NodeId) -> &S {
        &self.time_grid[self.nodes[id.0].step]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn price(&self, id: NodeId) -> &[S] {
        &self.nodes[id.0].price
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].is_leaf()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(move |&n| self.is_leaf(n))
    }

    pub fn level(&self, k: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(move |&n| self.nodes[n.0].step == k)
    }

    /// Root-to-node path, inclusive at both ends.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur.0].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// `true` when `a` is a strict ancestor of `b`.
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = self.nodes[b.0].parent;
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.nodes[p.0].parent;
        }
        false
    }
}

impl<S: Scalar> EventTree<S> {
    /// Length of the step starting at `id` (`t_{k+1} - t_k`).
    pub fn dt(&self, id: NodeId) -> S {
        let k = self.nodes[id.0].step;
        self.time_grid[k + 1].clone() - self.time_grid[k].clone()
    }

    /// `E[values | G_t]` at a non-leaf node.
    pub fn conditional_expectation(&self, values: &Adapted<S>, id: NodeId) -> Result<S> {
        let node = &self.nodes[id.0];
        if node.is_leaf() {
            return Err(Error::LeafNode(id));
        }
        Ok(node.children.iter().zip(&node.probs).fold(S::zero(), |acc, (c, p)| acc + p.clone() * values[*c].clone()))
    }

    /// Probability of reaching `id` from the root.
    pub fn reach_probability(&self, id: NodeId) -> S {
        let path = self.path_to(id);
        let mut prob = S::one();
        for w in path.windows(2) {
            let parent = &self.nodes[w[0].0];
            let pos = parent.children.iter().position(|&c| c == w[1]).expect("path edge");
            prob = prob * parent.probs[pos].clone();
        }
        prob
    }
}

/// Real-valued process indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct Adapted<S> {
    values: Vec<S>,
}

impl<S: Clone> Adapted<S> {
    pub fn new(values: Vec<S>) -> Self {
        Adapted { values }
    }

    pub fn from_values(values: impl IntoIterator<Item = S>) -> Self {
        Adapted { values: values.into_iter().collect() }
    }

    pub fn constant<T>(tree: &EventTree<T>, c: S) -> Self {
        Adapted { values: vec![c; tree.len()] }
    }

    pub fn from_fn<T>(tree: &EventTree<T>, mut f: impl FnMut(NodeId) -> S) -> Self {
        Adapted { values: tree.ids().map(&mut f).collect() }
    }

    pub fn get(&self, id: NodeId) -> &S {
        &self.values[id.0]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&S) -> U) -> Adapted<U> {
        Adapted { values: self.values.iter().map(f).collect() }
    }
}

impl<S: Scalar> Adapted<S> {
    pub fn zip_with(&self, other: &Adapted<S>, mut f: impl FnMut(&S, &S) -> S) -> Adapted<S> {
        Adapted { values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn neg(&self) -> Adapted<S> {
        self.map(|v| -v.clone())
    }
}

impl<S> Index<NodeId> for Adapted<S> {
    type Output = S;
    fn index(&self, id: NodeId) -> &S {
        &self.values[id.0]
    }
}

/// Vector-valued process on steps: the entry at a time-`k` node is the value
/// held over `(t_k, t_{k+1}]` on every branch leaving that node. Leaves hold
/// an empty vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictable<S> {
    values: Vec<Vec<S>>,
}

impl<S: Clone> Predictable<S> {
    pub fn new(values: Vec<Vec<S>>) -> Self {
        Predictable { values }
    }

    /// Scalar strategy for one-asset trees; leaves receive no value.
    pub fn from_fn<T>(tree: &EventTree<T>, mut f: impl FnMut(NodeId) -> Vec<S>) -> Self {
        Predictable { values: tree.ids().map(|n| if tree.is_leaf(n) { Vec::new() } else { f(n) }).collect() }
    }

    pub fn get(&self, id: NodeId) -> &[S] {
        &self.values[id.0]
    }

    pub fn values(&self) -> &[Vec<S>] {
        &self.values
    }
}

impl<S: Scalar> Predictable<S> {
    pub fn zeros<T>(tree: &EventTree<T>) -> Self {
        Self::from_fn(tree, |_| vec![S::zero(); tree.dim()])
    }
}

/// Exercise rule: the set of nodes at which the contract is stopped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoppingTime {
    stop: Vec<NodeId>,
}

impl StoppingTime {
    /// Builds a stop set; ids are sorted and deduplicated. Use
    /// [`validate_stopping_time`] to check the antichain and covering rules.
    pub fn new(mut stop: Vec<NodeId>) -> Self {
        stop.sort_unstable();
        stop.dedup();
        StoppingTime { stop }
    }

    pub fn at_root() -> Self {
        StoppingTime { stop: vec![NodeId::ROOT] }
    }

    /// Deterministic time `t_k`.
    pub fn at_step<S>(tree: &EventTree<S>, k: usize) -> Self {
        StoppingTime::new(tree.level(k).collect())
    }

    pub fn at_horizon<S>(tree: &EventTree<S>) -> Self {
        StoppingTime::at_step(tree, tree.horizon())
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.stop
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.stop.binary_search(&id).is_ok()
    }

    /// Classifies every node as before, at, or after this stopping time.
    pub fn regions<S>(&self, tree: &EventTree<S>) -> Vec<Region> {
        let mut out = vec![Region::Before; tree.len()];
        for n in tree.ids() {
            let inherited = tree.node(n).parent.map(|p| out[p.0]);
            out[n.0] = match inherited {
                Some(Region::At) | Some(Region::After) => Region::After,
                _ if self.contains(n) => Region::At,
                _ => Region::Before,
            };
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Before,
    At,
    After,
}

/// `true` iff every root-to-leaf path meets the stop set exactly once.
pub fn validate_stopping_time<S>(tree: &EventTree<S>, st: &StoppingTime) -> bool {
    if st.stop.iter().any(|n| n.0 >= tree.len()) {
        return false;
    }
    tree.leaves().all(|leaf| {
        let mut hits = 0;
        let mut cur = Some(leaf);
        while let Some(n) = cur {
            if st.contains(n) {
                hits += 1;
            }
            cur = tree.node(n).parent;
        }
        hits == 1
    })
}

/// Number of stopping times valued in `{t_k : k >= from}` rooted at each node:
/// `f(leaf) = 1`, `f(v) = [k_v >= from] + prod_c f(c)`. Saturates at `u128::MAX`.
pub fn count_stopping_times<S>(tree: &EventTree<S>, from: usize) -> u128 {
    let mut f = vec![0u128; tree.len()];
    for n in tree.ids().rev() {
        let node = tree.node(n);
        f[n.0] = if node.is_leaf() {
            1
        } else {
            let prod = node.children.iter().fold(1u128, |acc, c| acc.saturating_mul(f[c.0]));
            prod.saturating_add(u128::from(node.step >= from))
        };
    }
    f[0]
}

#[derive(Debug, Clone)]
enum Choice {
    Stop,
    /// Index into each child's choice list, aligned with the child order.
    Continue(Vec<u32>),
}

/// Compact encoding of every stopping time of a tree.
///
/// Each node keeps the list of its local rules (stop here, or continue with
/// one rule per child). The rules at the root are in bijection with the
/// stopping times of the whole tree, so values that compose through one-step
/// maps can be computed for every stopping time without materializing stop
/// sets.
#[derive(Debug, Clone)]
pub struct StoppingFamily {
    choices: Vec<Vec<Choice>>,
    children: Vec<Vec<NodeId>>,
}

impl StoppingFamily {
    pub fn build<S>(tree: &EventTree<S>, from: usize, budget: u128) -> Result<Self> {
        let count = count_stopping_times(tree, from);
        if count > budget {
            return Err(Error::BudgetExceeded { count, budget });
        }
        let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); tree.len()];
        for n in tree.ids().rev() {
            let node = tree.node(n);
            let mut list = Vec::new();
            if node.is_leaf() || node.step >= from {
                list.push(Choice::Stop);
            }
            if !node.is_leaf() {
                let sizes: Vec<usize> = node.children.iter().map(|c| choices[c.0].len()).collect();
                let mut idx = vec![0u32; sizes.len()];
                'outer: loop {
                    list.push(Choice::Continue(idx.clone()));
                    for pos in (0..idx.len()).rev() {
                        idx[pos] += 1;
                        if (idx[pos] as usize) < sizes[pos] {
                            continue 'outer;
                        }
                        idx[pos] = 0;
                    }
                    break;
                }
            }
            choices[n.0] = list;
        }
        let children = tree.ids().map(|n| tree.children(n).to_vec()).collect();
        Ok(StoppingFamily { choices, children })
    }

    pub fn len(&self) -> usize {
        self.choices[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices[0].is_empty()
    }

    /// Stop set of the `i`-th stopping time.
    pub fn materialize(&self, i: usize) -> StoppingTime {
        let mut stop = Vec::new();
        let mut stack = vec![(NodeId::ROOT, i)];
        while let Some((n, c)) = stack.pop() {
            match &self.choices[n.0][c] {
                Choice::Stop => stop.push(n),
                Choice::Continue(idx) => {
                    for (child, &j) in self.children[n.0].iter().zip(idx) {
                        stack.push((*child, j as usize));
                    }
                }
            }
        }
        StoppingTime::new(stop)
    }

    pub fn iter(&self) -> impl Iterator<Item = StoppingTime> + '_ {
        (0..self.len()).map(move |i| self.materialize(i))
    }

    /// Computes a composable value for every stopping time at once.
    ///
    /// `stop(n)` is the value of stopping at `n`; `cont(n, vals)` maps the
    /// children's values (aligned with the child order) to the value at `n`.
    /// Entry `i` of the result belongs to [`Self::materialize`]`(i)`.
    pub fn evaluate_all<T: Clone, E>(
        &self,
        mut stop: impl FnMut(NodeId) -> core::result::Result<T, E>,
        mut cont: impl FnMut(NodeId, &[&T]) -> core::result::Result<T, E>,
    ) -> core::result::Result<Vec<T>, E> {
        let mut values: Vec<Vec<T>> = vec![Vec::new(); self.choices.len()];
        for n in (0..self.choices.len()).rev() {
            let id = NodeId(n);
            let mut out = Vec::with_capacity(self.choices[n].len());
            for choice in &self.choices[n] {
                let v = match choice {
                    Choice::Stop => stop(id)?,
                    Choice::Continue(idx) => {
                        let args: Vec<&T> =
                            self.children[n].iter().zip(idx).map(|(c, &j)| &values[c.0][j as usize]).collect();
                        cont(id, &args)?
                    }
                };
                out.push(v);
            }
            values[n] = out;
            // children lists are no longer needed once their parent is done
            for c in &self.children[n] {
                values[c.0] = Vec::new();
            }
        }
        Ok(core::mem::take(&mut values[0]))
    }
}

/// Every stopping time valued in `{t_k : k >= from}`, each exactly once.
pub fn enumerate_stopping_times<S>(tree: &EventTree<S>, from: usize, budget: u128) -> Result<Vec<StoppingTime>> {
    let family = StoppingFamily::build(tree, from, budget)?;
    Ok(family.iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn tree(n: usize) -> EventTree<f64> {
        EventTree::binomial(100.0, 1.2, 0.9, n, 1.0, 0.5).unwrap()
    }

    #[test]
    fn binomial_prices() {
        let t = tree(2);
        let mut level2: Vec<f64> = t.level(2).map(|n| t.price(n)[0]).collect();
        level2.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let expect = [144.0, 108.0, 108.0, 81.0];
        for (a, b) in level2.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let t1 = EventTree::binomial(100.0, 1.2, 0.9, 1, 0.5, 0.5).unwrap();
        assert_eq!(t1.len(), 3);
        let leaves: Vec<f64> = t1.leaves().map(|n| t1.price(n)[0]).collect();
        assert!((leaves[0] - 120.0).abs() < 1e-12 && (leaves[1] - 90.0).abs() < 1e-12);
        assert_eq!(t1.time_grid(), &[0.0, 0.5]);
    }

    #[test]
    fn binomial_rejects_bad_parameters() {
        assert!(matches!(EventTree::binomial(100.0, 0.9, 1.2, 1, 1.0, 0.5), Err(Error::InvalidParameter(_))));
        assert!(EventTree::binomial(-1.0, 1.2, 0.9, 1, 1.0, 0.5).is_err());
        assert!(EventTree::binomial(100.0, 1.2, 0.9, 0, 1.0, 0.5).is_err());
        assert!(EventTree::binomial(100.0, 1.2, 0.9, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn exact_binomial_prices() {
        let t: EventTree<Rational> = EventTree::binomial(
            Rational::from_int(100),
            Rational::ratio(6, 5),
            Rational::ratio(9, 10),
            2,
            Rational::one(),
            Rational::ratio(1, 2),
        )
        .unwrap();
        assert_eq!(t.price(NodeId(3))[0], Rational::from_int(144));
        assert_eq!(t.price(NodeId(6))[0], Rational::from_int(81));
    }

    #[test]
    fn conditional_expectation_examples() {
        let t = EventTree::binomial(100.0, 1.2, 0.9, 1, 1.0, 0.5).unwrap();
        let v = Adapted::new(vec![0.0, 0.0, 19.0]);
        assert_eq!(t.conditional_expectation(&v, NodeId::ROOT).unwrap(), 9.5);
        let c = Adapted::constant(&t, 4.25);
        assert_eq!(t.conditional_expectation(&c, NodeId::ROOT).unwrap(), 4.25);
        assert_eq!(t.conditional_expectation(&v, NodeId(1)), Err(Error::LeafNode(NodeId(1))));

        let third = Rational::ratio(1, 3);
        let nodes = vec![
            Node {
                step: 0,
                parent: None,
                children: vec![NodeId(1), NodeId(2), NodeId(3)],
                probs: vec![third.clone(), third.clone(), third],
                price: vec![Rational::from_int(10)],
            },
            Node {
                step: 1,
                parent: Some(NodeId(0)),
                children: vec![],
                probs: vec![],
                price: vec![Rational::from_int(12)],
            },
            Node {
                step: 1,
                parent: Some(NodeId(0)),
                children: vec![],
                probs: vec![],
                price: vec![Rational::from_int(6)],
            },
            Node {
                step: 1,
                parent: Some(NodeId(0)),
                children: vec![],
                probs: vec![],
                price: vec![Rational::from_int(3)],
            },
        ];
        let t3 = EventTree::from_nodes(nodes, vec![Rational::zero(), Rational::one()]).unwrap();
        let vals = Adapted::from_fn(&t3, |n| t3.price(n)[0].clone());
        assert_eq!(t3.conditional_expectation(&vals, NodeId::ROOT).unwrap(), Rational::from_int(7));
    }

    #[test]
    fn stopping_time_counts() {
        assert_eq!(enumerate_stopping_times(&tree(1), 0, 100).unwrap().len(), 2);
        assert_eq!(enumerate_stopping_times(&tree(2), 0, 100).unwrap().len(), 5);
        assert_eq!(enumerate_stopping_times(&tree(3), 0, 100).unwrap().len(), 26);
        assert_eq!(count_stopping_times(&tree(3), 0), 26);
        assert_eq!(count_stopping_times(&tree(5), 0), 458_330);
        // deterministic start at t_1 on a depth-2 tree: each level-1 node stops or continues
        assert_eq!(count_stopping_times(&tree(2), 1), 4);
        assert_eq!(count_stopping_times(&tree(2), 2), 1);
    }

    #[test]
    fn enumeration_refuses_loudly() {
        let err = enumerate_stopping_times(&tree(4), 0, 100).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { count: 677, budget: 100 });
    }

    #[test]
    fn enumerated_times_are_distinct_and_valid() {
        let t = tree(3);
        let all = enumerate_stopping_times(&t, 0, 1000).unwrap();
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
        assert!(all.iter().all(|st| validate_stopping_time(&t, st)));
        let late = enumerate_stopping_times(&t, 2, 1000).unwrap();
        assert!(late.iter().all(|st| st.nodes().iter().all(|n| t.node(*n).step >= 2)));
    }

    #[test]
    fn validation_examples() {
        let t = tree(1);
        assert!(validate_stopping_time(&t, &StoppingTime::at_root()));
        assert!(!validate_stopping_time(&t, &StoppingTime::new(vec![NodeId(0), NodeId(1)])));
        assert!(!validate_stopping_time(&t, &StoppingTime::new(vec![NodeId(1)])));
        assert!(validate_stopping_time(&t, &StoppingTime::at_horizon(&t)));
    }

    #[test]
    fn regions_split_the_tree() {
        let t = tree(2);
        let st = StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)]);
        let r = st.regions(&t);
        assert_eq!(r[0], Region::Before);
        assert_eq!(r[1], Region::At);
        assert_eq!(r[3], Region::After);
        assert_eq!(r[2], Region::Before);
        assert_eq!(r[5], Region::At);
    }

    #[test]
    fn rejects_malformed_trees() {
        let nodes = vec![
            Node {
                step: 0,
                parent: None,
                children: vec![NodeId(1), NodeId(2)],
                probs: vec![0.5, 0.6],
                price: vec![1.0],
            },
            Node { step: 1, parent: Some(NodeId(0)), children: vec![], probs: vec![], price: vec![1.0] },
            Node { step: 1, parent: Some(NodeId(0)), children: vec![], probs: vec![], price: vec![1.0] },
        ];
        assert!(matches!(EventTree::from_nodes(nodes, vec![0.0, 1.0]), Err(Error::InvalidTree(_))));
    }
}
