//! Nonlinear evaluations: BSDE solves up to a stopping time.
//!
//! At a node `n` with children `c`, the one-step problem is
//! `Y(c) - dA(n) = w + z.(S(c) - S(n))` for all `c`, then `y - g(t, y, z) dt = w`.
//! The hedge is recovered exactly from the children (no regression), which
//! requires `d + 1` children with affinely independent prices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::generators::{check_stability, AffinePiece, CashFlows, Generator};
use crate::lattice::{validate_stopping_time, Adapted, EventTree, NodeId, Region, StoppingTime};
use crate::linalg;
use crate::scalar::Scalar;

pub const PICARD_TOLERANCE: f64 = 1e-12;
pub const PICARD_MAX_ITERATIONS: usize = 200;

struct NodeCache<S> {
    t: S,
    dt: S,
    /// Rows of the inverse of `[1, S(c) - S(n)]`: row 0 gives `w`, rows 1.. give `z`.
    inv: Vec<Vec<S>>,
    pieces: Option<Vec<AffinePiece<S>>>,
}

/// Precomputed one-step machinery for a tree, generator and cash-flow process.
pub struct Stepper<'a, S: Scalar> {
    tree: &'a EventTree<S>,
    gen: &'a dyn Generator<S>,
    flows: &'a CashFlows<S>,
    cache: Vec<Option<NodeCache<S>>>,
}

impl<'a, S: Scalar> Stepper<'a, S> {
    pub fn new(tree: &'a EventTree<S>, gen: &'a dyn Generator<S>, flows: &'a CashFlows<S>) -> Result<Self> {
        check_stability(tree, gen)?;
        if flows.increments().len() != tree.len() {
            return Err(Error::InvalidParameter("cash flows are not defined on every node".into()));
        }
        let mut cache = Vec::with_capacity(tree.len());
        for n in tree.ids() {
            if tree.is_leaf(n) {
                cache.push(None);
                continue;
            }
            let children = tree.children(n);
            let d = tree.dim();
            if children.len() != d + 1 {
                return Err(Error::Representation {
                    node: n,
                    reason: format!(
                        "{} children for {} risky asset(s); exactly {} are required",
                        children.len(),
                        d,
                        d + 1
                    ),
                });
            }
            let s_n = tree.price(n);
            let m: Vec<Vec<S>> = children
                .iter()
                .map(|&c| {
                    let mut row = vec![S::one()];
                    row.extend(tree.price(c).iter().zip(s_n).map(|(a, b)| a.clone() - b.clone()));
                    row
                })
                .collect();
            let inv = linalg::inverse(&m).ok_or_else(|| Error::Representation {
                node: n,
                reason: "child price moves are affinely dependent".into(),
            })?;
            let t = tree.time(n).clone();
            cache.push(Some(NodeCache { pieces: gen.pieces(&t, s_n), t, dt: tree.dt(n), inv }));
        }
        Ok(Stepper { tree, gen, flows, cache })
    }

    pub fn tree(&self) -> &'a EventTree<S> {
        self.tree
    }

    pub fn generator(&self) -> &'a dyn Generator<S> {
        self.gen
    }

    pub fn flows(&self) -> &'a CashFlows<S> {
        self.flows
    }

    fn node(&self, n: NodeId) -> Result<&NodeCache<S>> {
        self.cache[n.0].as_ref().ok_or(Error::LeafNode(n))
    }

    /// `(w, z)` matching the flow-adjusted child values.
    pub fn represent(&self, n: NodeId, child_values: &[&S]) -> Result<(S, Vec<S>)> {
        let c = self.node(n)?;
        let da = self.flows.increment(n);
        let adj: Vec<S> = child_values.iter().map(|v| (*v).clone() - da.clone()).collect();
        let mut out =
            c.inv.iter().map(|row| row.iter().zip(&adj).fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone()));
        let w = out.next().expect("inverse has a first row");
        Ok((w, out.collect()))
    }

    /// Solves `y - g(t, y, z) dt = w` at `n`.
    pub fn implicit(&self, n: NodeId, w: &S, z: &[S]) -> Result<S> {
        let c = self.node(n)?;
        if let Some(pieces) = &c.pieces {
            return implicit_piecewise(pieces, &c.dt, w, z, n);
        }
        if S::EXACT {
            return Err(Error::NoClosedForm(format!(
                "generator {} has no affine pieces; use float mode",
                self.gen.label()
            )));
        }
        let price = self.tree.price(n);
        let mut y = w.clone();
        for _ in 0..PICARD_MAX_ITERATIONS {
            let next = w.clone() + self.gen.eval(&c.t, &y, z, price) * c.dt.clone();
            let scale = S::max_of(&S::one(), &next.abs());
            let done = (next.clone() - y.clone()).abs() <= scale * S::from_f64(PICARD_TOLERANCE);
            y = next;
            if done {
                return Ok(y);
            }
        }
        Err(Error::PicardDiverged { node: n, iterations: PICARD_MAX_ITERATIONS })
    }

    /// One backward step: value and hedge at `n` from the child values.
    pub fn step(&self, n: NodeId, child_values: &[&S]) -> Result<(S, Vec<S>)> {
        let (w, z) = self.represent(n, child_values)?;
        let y = self.implicit(n, &w, &z)?;
        Ok((y, z))
    }

    /// Sensitivities of the step value to each child value, one row per
    /// affine piece. `None` when the generator is not piecewise affine.
    pub fn slopes(&self, n: NodeId) -> Result<Option<Vec<Vec<S>>>> {
        let c = self.node(n)?;
        let Some(pieces) = &c.pieces else { return Ok(None) };
        let k = c.inv.len();
        Ok(Some(
            pieces
                .iter()
                .map(|p| {
                    let denom = S::one() - p.b.clone() * c.dt.clone();
                    (0..k)
                        .map(|j| {
                            let mut num = c.inv[0][j].clone();
                            for (i, ci) in p.c.iter().enumerate() {
                                num = num + c.dt.clone() * ci.clone() * c.inv[1 + i][j].clone();
                            }
                            num / denom.clone()
                        })
                        .collect()
                })
                .collect(),
        ))
    }
}

fn implicit_piecewise<S: Scalar>(pieces: &[AffinePiece<S>], dt: &S, w: &S, z: &[S], n: NodeId) -> Result<S> {
    let mut best: Option<(S, S)> = None;
    for p in pieces {
        let denom = S::one() - p.b.clone() * dt.clone();
        let cz = p.c.iter().zip(z).fold(S::zero(), |acc, (c, zi)| acc + c.clone() * zi.clone());
        let y = (w.clone() + (p.a.clone() + cz) * dt.clone()) / denom;
        let slack = match p.min_slack(&y, z) {
            None => return Ok(y),
            Some(s) => s,
        };
        if slack >= S::zero() {
            return Ok(y);
        }
        if best.as_ref().is_none_or(|(_, s)| slack > *s) {
            best = Some((y, slack));
        }
    }
    match best {
        // float round-off can push a boundary solution a hair outside every piece
        Some((y, slack)) if !S::EXACT && slack.to_f64() > -1e-9 * (1.0 + y.to_f64().abs()) => Ok(y),
        _ => Err(Error::NoClosedForm(format!("no affine piece contains the implicit solution at node {n}"))),
    }
}

/// Solution of a BSDE on `[0, tau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeSolution<S> {
    /// Value at nodes up to and including the stop set; `None` after it.
    pub y: Vec<Option<S>>,
    /// Hedge on steps strictly before the stop set.
    pub z: Vec<Option<Vec<S>>>,
    pub terminal: StoppingTime,
}

impl<S: Scalar> BsdeSolution<S> {
    pub fn y0(&self) -> &S {
        self.y[0].as_ref().expect("root always carries a value")
    }

    pub fn value(&self, n: NodeId) -> Option<&S> {
        self.y[n.0].as_ref()
    }

    pub fn hedge(&self, n: NodeId) -> Option<&[S]> {
        self.z[n.0].as_deref()
    }
}

/// Solves the BSDE with terminal condition `zeta` on the stop set of `terminal`.
/// Only the entries of `zeta` at stop nodes are read.
pub fn solve_bsde<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    terminal: &StoppingTime,
    zeta: &Adapted<S>,
) -> Result<BsdeSolution<S>> {
    let stepper = Stepper::new(tree, gen, flows)?;
    solve_with(&stepper, terminal, zeta)
}

pub fn solve_with<S: Scalar>(
    stepper: &Stepper<'_, S>,
    terminal: &StoppingTime,
    zeta: &Adapted<S>,
) -> Result<BsdeSolution<S>> {
    let tree = stepper.tree();
    if !validate_stopping_time(tree, terminal) {
        return Err(Error::InvalidStoppingTime("stop set must meet every path exactly once".into()));
    }
    if zeta.len() != tree.len() {
        return Err(Error::InvalidParameter("terminal values are not indexed by the tree".into()));
    }
    let regions = terminal.regions(tree);
    let mut y: Vec<Option<S>> = vec![None; tree.len()];
    let mut z: Vec<Option<Vec<S>>> = vec![None; tree.len()];
    for n in tree.ids().rev() {
        match regions[n.0] {
            Region::After => {}
            Region::At => y[n.0] = Some(zeta[n].clone()),
            Region::Before => {
                let vals: Vec<&S> = tree
                    .children(n)
                    .iter()
                    .map(|c| y[c.0].as_ref().expect("children of a pre-stop node are valued"))
                    .collect();
                let (yn, zn) = stepper.step(n, &vals)?;
                y[n.0] = Some(yn);
                z[n.0] = Some(zn);
            }
        }
    }
    Ok(BsdeSolution { y, z, terminal: terminal.clone() })
}

/// Initial value of the evaluation of `zeta` at `tau`.
pub fn evaluate<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    tau: &StoppingTime,
    zeta: &Adapted<S>,
) -> Result<S> {
    Ok(solve_bsde(tree, gen, flows, tau, zeta)?.y0().clone())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Comparison {
    /// Evaluations are ordered at every node.
    Ordered,
    /// Ordered, and strictly so at the root while the terminals differ somewhere.
    StrictlyOrdered,
    /// Ordering fails at this node (the deepest such node).
    Violated(NodeId),
}

fn comparison_tolerance<S: Scalar>() -> S {
    if S::EXACT {
        S::zero()
    } else {
        S::from_f64(1e-10)
    }
}

/// Compares the evaluations of `zeta1 >= zeta2` at every node before `tau`.
pub fn check_comparison<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    tau: &StoppingTime,
    zeta1: &Adapted<S>,
    zeta2: &Adapted<S>,
) -> Result<Comparison> {
    let stepper = Stepper::new(tree, gen, flows)?;
    compare_with(&stepper, tau, zeta1, zeta2)
}

pub fn compare_with<S: Scalar>(
    stepper: &Stepper<'_, S>,
    tau: &StoppingTime,
    zeta1: &Adapted<S>,
    zeta2: &Adapted<S>,
) -> Result<Comparison> {
    if let Some(n) = tau.nodes().iter().find(|&&n| zeta1[n] < zeta2[n]) {
        return Err(Error::InvalidParameter(format!("terminal values are not ordered at node {n}")));
    }
    let differ = tau.nodes().iter().any(|&n| zeta1[n] != zeta2[n]);
    let a = solve_with(stepper, tau, zeta1)?;
    let b = solve_with(stepper, tau, zeta2)?;
    let tol = comparison_tolerance::<S>();
    for n in stepper.tree().ids().rev() {
        if let (Some(ya), Some(yb)) = (a.value(n), b.value(n)) {
            if !ya.approx_ge(yb, &tol) {
                return Ok(Comparison::Violated(n));
            }
        }
    }
    if differ && a.y0().definitely_gt(b.y0(), &tol) {
        Ok(Comparison::StrictlyOrdered)
    } else {
        Ok(Comparison::Ordered)
    }
}

/// `true` iff the one-step backward map is strictly increasing in every child
/// value at every node. Exact slopes for piecewise-affine generators, secant
/// probes otherwise. Trees the solver cannot represent report `false`.
pub fn check_one_step_monotonicity<S: Scalar>(tree: &EventTree<S>, gen: &dyn Generator<S>) -> bool {
    let flows = CashFlows::zero(tree);
    let Ok(stepper) = Stepper::new(tree, gen, &flows) else { return false };
    tree.ids().filter(|&n| !tree.is_leaf(n)).all(|n| match stepper.slopes(n) {
        Ok(Some(rows)) => rows.iter().all(|row| row.iter().all(|s| *s > S::zero())),
        Ok(None) => secant_probe(&stepper, n),
        Err(_) => false,
    })
}

fn secant_probe<S: Scalar>(stepper: &Stepper<'_, S>, n: NodeId) -> bool {
    let k = stepper.tree().children(n).len();
    let scale = stepper.tree().price(n).iter().fold(S::one(), |m, s| S::max_of(&m, &s.abs()));
    let levels = [-1, 0, 1].map(|i| S::from_int(i) * scale.clone());
    let bumps = [S::from_f64(1e-3), S::one(), scale.clone()];
    for base in &levels {
        for shift in &levels {
            let vals: Vec<S> =
                (0..k).map(|j| base.clone() + if j % 2 == 0 { shift.clone() } else { S::zero() }).collect();
            let refs: Vec<&S> = vals.iter().collect();
            let Ok((y0, _)) = stepper.step(n, &refs) else { return false };
            for j in 0..k {
                for h in &bumps {
                    let mut bumped = vals.clone();
                    bumped[j] = bumped[j].clone() + h.clone();
                    let refs: Vec<&S> = bumped.iter().collect();
                    match stepper.step(n, &refs) {
                        Ok((y1, _)) if y1 > y0 => {}
                        _ => return false,
                    }
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{discount_generator, funding_generator, FnGenerator, RateSchedule, ZeroGenerator};
    use crate::lattice::enumerate_stopping_times;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn scenario_a() -> EventTree<Rational> {
        EventTree::binomial(q(100, 1), q(6, 5), q(9, 10), 2, q(1, 1), q(1, 2)).unwrap()
    }

    fn put(t: &EventTree<Rational>) -> Adapted<Rational> {
        Adapted::from_fn(t, |n| (q(100, 1) - t.price(n)[0].clone()).pos())
    }

    #[test]
    fn constant_terminal_is_preserved() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let c = Adapted::constant(&t, q(7, 2));
        let y = evaluate(&t, &ZeroGenerator, &flows, &StoppingTime::at_horizon(&t), &c).unwrap();
        assert_eq!(y, q(7, 2));
    }

    #[test]
    fn discounting() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let g = discount_generator(q(1, 10)).unwrap();
        let c = Adapted::constant(&t, q(5, 1));
        let y = evaluate(&t, &g, &flows, &StoppingTime::at_horizon(&t), &c).unwrap();
        let f = q(1, 1) + q(1, 10) * q(1, 2);
        assert_eq!(y, q(5, 1) / (f.clone() * f));
    }

    #[test]
    fn one_step_call() {
        let t = EventTree::binomial(q(100, 1), q(6, 5), q(9, 10), 1, q(1, 1), q(1, 2)).unwrap();
        let flows = CashFlows::zero(&t);
        let call = Adapted::from_fn(&t, |n| (t.price(n)[0].clone() - q(100, 1)).pos());
        let sol = solve_bsde(&t, &ZeroGenerator, &flows, &StoppingTime::at_horizon(&t), &call).unwrap();
        assert_eq!(sol.hedge(NodeId::ROOT).unwrap(), &[q(2, 3)]);
        assert_eq!(sol.y0(), &q(20, 3));
    }

    #[test]
    fn degenerate_horizon() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let v = Adapted::constant(&t, q(-4, 1));
        assert_eq!(evaluate(&t, &ZeroGenerator, &flows, &StoppingTime::at_root(), &v).unwrap(), q(-4, 1));
    }

    #[test]
    fn scenario_a_mixed_time() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let tau = StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)]);
        assert_eq!(evaluate(&t, &ZeroGenerator, &flows, &tau, &put(&t)).unwrap(), q(76, 9));
    }

    #[test]
    fn scenario_a_all_values() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let x = put(&t);
        let mut vals: Vec<Rational> = enumerate_stopping_times(&t, 0, 100)
            .unwrap()
            .iter()
            .map(|tau| evaluate(&t, &ZeroGenerator, &flows, tau, &x).unwrap())
            .collect();
        vals.sort();
        assert_eq!(vals, vec![q(0, 1), q(20, 3), q(20, 3), q(76, 9), q(76, 9)]);
    }

    #[test]
    fn rejects_invalid_time() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let x = put(&t);
        let bad = StoppingTime::new(vec![NodeId(1)]);
        assert!(matches!(evaluate(&t, &ZeroGenerator, &flows, &bad, &x), Err(Error::InvalidStoppingTime(_))));
    }

    #[test]
    fn comparison_outcomes() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let tau = StoppingTime::at_horizon(&t);
        let x = put(&t);
        assert_eq!(check_comparison(&t, &ZeroGenerator, &flows, &tau, &x, &x).unwrap(), Comparison::Ordered);
        let mut bumped = x.values().to_vec();
        bumped[4] = bumped[4].clone() + q(1, 1);
        let bumped = Adapted::new(bumped);
        assert_eq!(
            check_comparison(&t, &ZeroGenerator, &flows, &tau, &bumped, &x).unwrap(),
            Comparison::StrictlyOrdered
        );
        assert!(check_comparison(&t, &ZeroGenerator, &flows, &tau, &x, &bumped).is_err());
    }

    #[test]
    fn monotonicity_checks() {
        let t: EventTree<f64> = EventTree::binomial(100.0, 1.2, 0.9, 2, 1.0, 0.5).unwrap();
        assert!(check_one_step_monotonicity(&t, &ZeroGenerator));
        let bad: EventTree<f64> = EventTree::binomial(100.0, 1.3, 1.1, 2, 1.0, 0.5).unwrap();
        assert!(!check_one_step_monotonicity(&bad, &ZeroGenerator));
        let f = funding_generator(RateSchedule::new(0.01, 0.06).unwrap());
        assert!(check_one_step_monotonicity(&t, &f));
        let smooth = FnGenerator::new("soft", 0.05, 0.0, |_t: &f64, y: &f64, _z: &[f64], _s: &[f64]| -0.05 * y.tanh());
        assert!(check_one_step_monotonicity(&t, &smooth));
    }

    #[test]
    fn picard_matches_closed_form() {
        let t: EventTree<f64> = EventTree::binomial(100.0, 1.2, 0.9, 3, 1.0, 0.5).unwrap();
        let flows = CashFlows::zero(&t);
        let f = funding_generator(RateSchedule::new(0.01, 0.05).unwrap());
        let same = FnGenerator::new("funding-fn", 0.05, 0.0, |_t: &f64, y: &f64, z: &[f64], s: &[f64]| {
            let psi = y - z[0] * s[0];
            -0.01 * psi.max(0.0) + 0.05 * (-psi).max(0.0)
        });
        let x = Adapted::from_fn(&t, |n| (100.0 - t.price(n)[0]).max(0.0));
        let tau = StoppingTime::at_horizon(&t);
        let a = evaluate(&t, &f, &flows, &tau, &x).unwrap();
        let b = evaluate(&t, &same, &flows, &tau, &x).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn exact_mode_needs_pieces() {
        let t = scenario_a();
        let flows = CashFlows::zero(&t);
        let g =
            FnGenerator::new("opaque", 0.0, 0.0, |_t: &Rational, _y: &Rational, _z: &[Rational], _s: &[Rational]| {
                Rational::zero()
            });
        let x = put(&t);
        let err = evaluate(&t, &g, &flows, &StoppingTime::at_horizon(&t), &x).unwrap_err();
        assert!(matches!(err, Error::NoClosedForm(_)));
    }

    #[test]
    fn trinomial_single_asset_is_refused() {
        let nodes = vec![
            crate::lattice::Node {
                step: 0,
                parent: None,
                children: vec![NodeId(1), NodeId(2), NodeId(3)],
                probs: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                price: vec![10.0],
            },
            crate::lattice::Node {
                step: 1,
                parent: Some(NodeId(0)),
                children: vec![],
                probs: vec![],
                price: vec![12.0],
            },
            crate::lattice::Node {
                step: 1,
                parent: Some(NodeId(0)),
                children: vec![],
                probs: vec![],
                price: vec![10.0],
            },
            crate::lattice::Node {
                step: 1,
                parent: Some(NodeId(0)),
                children: vec![],
                probs: vec![],
                price: vec![8.0],
            },
        ];
        let t = EventTree::from_nodes(nodes, vec![0.0, 1.0]).unwrap();
        let flows = CashFlows::zero(&t);
        assert!(matches!(Stepper::new(&t, &ZeroGenerator, &flows), Err(Error::Representation { .. })));
    }
}
