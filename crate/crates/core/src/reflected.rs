//! Reflected BSDEs with a lower (issuer) or upper (holder) obstacle.
//!
//! Each backward step first solves the unreflected one-step problem from the
//! children, then projects onto the obstacle: `Y = max(y~, X)` on the lower
//! side, `y = min(y~, x)` on the upper side. The projection size is the
//! reflection increment at the node; it acts on the step that leaves the node,
//! so the cumulative reflection at `m` sums the increments of its strict
//! ancestors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evaluation::Stepper;
use crate::generators::{CashFlows, Generator};
use crate::lattice::{Adapted, EventTree, NodeId, Predictable, StoppingTime};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `Y >= obstacle`.
    Lower,
    /// `y <= obstacle`.
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbsdeSolution<S> {
    pub side: Side,
    pub y: Adapted<S>,
    pub z: Predictable<S>,
    /// Reflection increment at each node (zero at leaves).
    pub dk: Adapted<S>,
    /// Unreflected one-step value at each non-leaf node; the obstacle at leaves.
    pub candidate: Adapted<S>,
    pub obstacle: Adapted<S>,
}

impl<S: Scalar> RbsdeSolution<S> {
    pub fn y0(&self) -> &S {
        &self.y[NodeId::ROOT]
    }

    /// Cumulative reflection: sum of increments over strict ancestors.
    pub fn cumulative_k(&self, tree: &EventTree<S>) -> Adapted<S> {
        let mut k = vec![S::zero(); tree.len()];
        for n in tree.ids() {
            for &c in tree.children(n) {
                k[c.0] = k[n.0].clone() + self.dk[n].clone();
            }
        }
        Adapted::new(k)
    }

    /// Solution touches the obstacle at `n`.
    pub fn contact(&self, n: NodeId, tol: &S) -> bool {
        self.y[n].approx_eq(&self.obstacle[n], tol)
    }

    pub fn reflection_is_zero(&self, tol: &S) -> bool {
        self.dk.values().iter().all(|v| v.approx_eq(&S::zero(), tol))
    }
}

/// Default contact tolerance: zero in exact mode, `1e-9` otherwise.
pub fn contact_tolerance<S: Scalar>() -> S {
    if S::EXACT {
        S::zero()
    } else {
        S::from_f64(1e-9)
    }
}

pub fn solve_reflected_lower<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    obstacle: &Adapted<S>,
) -> Result<RbsdeSolution<S>> {
    solve_reflected(tree, gen, flows, obstacle, Side::Lower)
}

/// Holder side; `flows` are the holder's flows, i.e. `-A`.
pub fn solve_reflected_upper<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    obstacle: &Adapted<S>,
) -> Result<RbsdeSolution<S>> {
    solve_reflected(tree, gen, flows, obstacle, Side::Upper)
}

pub fn solve_reflected<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    obstacle: &Adapted<S>,
    side: Side,
) -> Result<RbsdeSolution<S>> {
    if obstacle.len() != tree.len() {
        return Err(Error::InvalidParameter("obstacle is not defined on every node".into()));
    }
    let stepper = Stepper::new(tree, gen, flows)?;
    let n_nodes = tree.len();
    let mut y: Vec<S> = obstacle.values().to_vec();
    let mut z: Vec<Vec<S>> = vec![Vec::new(); n_nodes];
    let mut dk = vec![S::zero(); n_nodes];
    let mut cand = obstacle.values().to_vec();
    for n in tree.ids().rev().filter(|&n| !tree.is_leaf(n)) {
        let vals: Vec<&S> = tree.children(n).iter().map(|c| &y[c.0]).collect();
        let (yt, zn) = stepper.step(n, &vals)?;
        let x = &obstacle[n];
        let (yn, k) = match side {
            Side::Lower if *x > yt => (x.clone(), x.clone() - yt.clone()),
            Side::Upper if *x < yt => (x.clone(), yt.clone() - x.clone()),
            _ => (yt.clone(), S::zero()),
        };
        y[n.0] = yn;
        dk[n.0] = k;
        z[n.0] = zn;
        cand[n.0] = yt;
    }
    Ok(RbsdeSolution {
        side,
        y: Adapted::new(y),
        z: Predictable::new(z),
        dk: Adapted::new(dk),
        candidate: Adapted::new(cand),
        obstacle: obstacle.clone(),
    })
}

/// First node on each path where the solution meets the obstacle.
pub fn first_contact_time<S: Scalar>(tree: &EventTree<S>, sol: &RbsdeSolution<S>, tol: &S) -> StoppingTime {
    first_on_each_path(tree, |n| tree.is_leaf(n) || sol.contact(n, tol))
}

fn first_on_each_path<S>(tree: &EventTree<S>, mut hit: impl FnMut(NodeId) -> bool) -> StoppingTime {
    let mut stop = Vec::new();
    let mut stack = vec![NodeId::ROOT];
    while let Some(n) = stack.pop() {
        if hit(n) {
            stop.push(n);
        } else {
            stack.extend(tree.children(n).iter().copied());
        }
    }
    StoppingTime::new(stop)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatestExercise {
    /// First node on each path with positive cumulative reflection, else the leaf.
    pub time: StoppingTime,
    /// Some returned node already carries positive cumulative reflection, so
    /// it is not itself a contact time with vanishing reflection.
    pub caveat: bool,
    /// First node on each path whose own increment is positive, else the
    /// leaf: the last node where cumulative reflection is still zero.
    pub latest_rational: StoppingTime,
}

pub fn latest_exercise_time<S: Scalar>(tree: &EventTree<S>, sol: &RbsdeSolution<S>, tol: &S) -> LatestExercise {
    let k = sol.cumulative_k(tree);
    let positive = |v: &S| v.definitely_gt(&S::zero(), tol);
    let time = first_on_each_path(tree, |n| tree.is_leaf(n) || positive(&k[n]));
    let caveat = time.nodes().iter().any(|&n| positive(&k[n]));
    let latest_rational = first_on_each_path(tree, |n| tree.is_leaf(n) || positive(&sol.dk[n]));
    LatestExercise { time, caveat, latest_rational }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::ZeroGenerator;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn scenario_a() -> (EventTree<Rational>, Adapted<Rational>) {
        let t = EventTree::binomial(q(100, 1), q(6, 5), q(9, 10), 2, q(1, 1), q(1, 2)).unwrap();
        let x = Adapted::from_fn(&t, |n| (q(100, 1) - t.price(n)[0].clone()).pos());
        (t, x)
    }

    #[test]
    fn constant_obstacle() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let c = Adapted::constant(&t, q(3, 1));
        let sol = solve_reflected_lower(&t, &ZeroGenerator, &flows, &c).unwrap();
        assert!(sol.y.values().iter().all(|v| *v == q(3, 1)));
        assert!(sol.reflection_is_zero(&Rational::zero()));
        let sol = solve_reflected_upper(&t, &ZeroGenerator, &flows, &c).unwrap();
        assert!(sol.y.values().iter().all(|v| *v == q(3, 1)));
        assert_eq!(first_contact_time(&t, &sol, &Rational::zero()), StoppingTime::at_root());
    }

    #[test]
    fn scenario_a_lower() {
        let (t, x) = scenario_a();
        let flows = CashFlows::zero(&t);
        let sol = solve_reflected_lower(&t, &ZeroGenerator, &flows, &x).unwrap();
        assert_eq!(sol.y[NodeId(2)], q(38, 3));
        assert_eq!(sol.y0(), &q(76, 9));
        assert_eq!(sol.z.get(NodeId::ROOT), &[q(-19, 45)]);
        assert!(sol.reflection_is_zero(&Rational::zero()));
        let tau = first_contact_time(&t, &sol, &Rational::zero());
        assert_eq!(tau, StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)]));
    }

    #[test]
    fn dominating_obstacle_reflects_everywhere() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let x = Adapted::from_fn(&t, |n| q(10, 1) - Rational::from_int(t.node(n).step as i64));
        let sol = solve_reflected_lower(&t, &ZeroGenerator, &flows, &x).unwrap();
        assert_eq!(sol.y, x);
        for n in t.ids().filter(|&n| !t.is_leaf(n)) {
            assert_eq!(sol.dk[n], q(1, 1));
        }
        let late = latest_exercise_time(&t, &sol, &Rational::zero());
        assert!(late.caveat);
        assert_eq!(late.time, StoppingTime::at_step(&t, 1));
        assert_eq!(late.latest_rational, StoppingTime::at_root());
    }

    #[test]
    fn holder_duality() {
        let (t, x) = scenario_a();
        let flows = CashFlows::zero(&t);
        let lower = solve_reflected_lower(&t, &ZeroGenerator, &flows, &x).unwrap();
        let upper = solve_reflected_upper(&t, &ZeroGenerator, &flows, &x.neg()).unwrap();
        assert_eq!(upper.y, lower.y.neg());
        assert_eq!(upper.dk, lower.dk);
        assert_eq!(upper.y0(), &q(-76, 9));
        let late = latest_exercise_time(&t, &upper, &Rational::zero());
        assert_eq!(late.time, StoppingTime::at_horizon(&t));
        assert!(!late.caveat);
    }

    #[test]
    fn leaves_only_contact() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        // S itself is a martingale under the implied weights; subtract a margin before the horizon.
        let x = Adapted::from_fn(&t, |n| {
            let s = t.price(n)[0].clone();
            if t.is_leaf(n) {
                s
            } else {
                s - q(1, 1)
            }
        });
        let sol = solve_reflected_lower(&t, &ZeroGenerator, &flows, &x).unwrap();
        assert_eq!(first_contact_time(&t, &sol, &Rational::zero()), StoppingTime::at_horizon(&t));
    }
}
