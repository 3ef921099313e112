//! Drivers, wealth dynamics, cash flows and benchmark wealth.
//!
//! Wealth follows `V(c) = V(n) - g(t, V(n), xi(n)) dt + xi(n).(S(c) - S(n)) + dA(n)`
//! on every edge `n -> c`. Cash-flow increments are predictable: `dA(n)` is
//! known at `n` and paid on every branch leaving it.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{Adapted, EventTree, NodeId, Predictable};
use crate::scalar::Scalar;

/// Half-space `cy * y + cz . z >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace<S> {
    pub cy: S,
    pub cz: Vec<S>,
    pub rhs: S,
}

impl<S: Scalar> HalfSpace<S> {
    pub fn slack(&self, y: &S, z: &[S]) -> S {
        let mut lhs = self.cy.clone() * y.clone();
        for (c, zi) in self.cz.iter().zip(z) {
            lhs = lhs + c.clone() * zi.clone();
        }
        lhs - self.rhs.clone()
    }
}

/// `g = a + b y + c . z` on the polyhedron cut out by `region`.
///
/// A generator that reports pieces promises that they cover `(y, z)` space
/// and agree on overlaps, so that `g` is continuous and piecewise affine.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece<S> {
    pub a: S,
    pub b: S,
    pub c: Vec<S>,
    pub region: Vec<HalfSpace<S>>,
}

impl<S: Scalar> AffinePiece<S> {
    pub fn eval(&self, y: &S, z: &[S]) -> S {
        let mut v = self.a.clone() + self.b.clone() * y.clone();
        for (c, zi) in self.c.iter().zip(z) {
            v = v + c.clone() * zi.clone();
        }
        v
    }

    /// Smallest half-space slack at `(y, z)`; non-negative inside the region.
    pub fn min_slack(&self, y: &S, z: &[S]) -> Option<S> {
        self.region.iter().map(|h| h.slack(y, z)).fold(None, |acc, s| match acc {
            None => Some(s),
            Some(m) => Some(S::min_of(&m, &s)),
        })
    }
}

/// Nonlinear driver `g(t, y, z, S)`.
pub trait Generator<S: Scalar> {
    fn eval(&self, t: &S, y: &S, z: &[S], price: &[S]) -> S;

    /// Global Lipschitz bound in `y`.
    fn lipschitz_y(&self) -> f64;

    /// Lipschitz bound in `z` at the given asset prices.
    fn lipschitz_z(&self, price: &[S]) -> f64;

    fn label(&self) -> String;

    /// Affine pieces of `g(t, ., ., price)` when it is piecewise affine.
    fn pieces(&self, _t: &S, _price: &[S]) -> Option<Vec<AffinePiece<S>>> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroGenerator;

impl<S: Scalar> Generator<S> for ZeroGenerator {
    fn eval(&self, _t: &S, _y: &S, _z: &[S], _price: &[S]) -> S {
        S::zero()
    }
    fn lipschitz_y(&self) -> f64 {
        0.0
    }
    fn lipschitz_z(&self, _price: &[S]) -> f64 {
        0.0
    }
    fn label(&self) -> String {
        "zero".into()
    }
    fn pieces(&self, _t: &S, price: &[S]) -> Option<Vec<AffinePiece<S>>> {
        Some(vec![AffinePiece { a: S::zero(), b: S::zero(), c: vec![S::zero(); price.len()], region: Vec::new() }])
    }
}

/// `g = -r y`.
#[derive(Debug, Clone)]
pub struct DiscountGenerator<S> {
    pub r: S,
}

pub fn zero_generator() -> ZeroGenerator {
    ZeroGenerator
}

pub fn discount_generator<S: Scalar>(r: S) -> Result<DiscountGenerator<S>> {
    if r < S::zero() {
        return Err(Error::InvalidParameter(format!("discount rate {r} is negative")));
    }
    Ok(DiscountGenerator { r })
}

impl<S: Scalar> Generator<S> for DiscountGenerator<S> {
    fn eval(&self, _t: &S, y: &S, _z: &[S], _price: &[S]) -> S {
        -(self.r.clone() * y.clone())
    }
    fn lipschitz_y(&self) -> f64 {
        self.r.to_f64().abs()
    }
    fn lipschitz_z(&self, _price: &[S]) -> f64 {
        0.0
    }
    fn label(&self) -> String {
        format!("discount(r={})", self.r)
    }
    fn pieces(&self, _t: &S, price: &[S]) -> Option<Vec<AffinePiece<S>>> {
        Some(vec![AffinePiece {
            a: S::zero(),
            b: -self.r.clone(),
            c: vec![S::zero(); price.len()],
            region: Vec::new(),
        }])
    }
}

/// Lending and borrowing rates per year.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule<S> {
    pub r_lend: S,
    pub r_borrow: S,
}

impl<S: Scalar> RateSchedule<S> {
    pub fn new(r_lend: S, r_borrow: S) -> Result<Self> {
        if r_borrow < r_lend {
            return Err(Error::InvalidParameter(format!(
                "borrowing rate {r_borrow} is below the lending rate {r_lend}"
            )));
        }
        Ok(RateSchedule { r_lend, r_borrow })
    }

    pub fn single(r: S) -> Self {
        RateSchedule { r_lend: r.clone(), r_borrow: r }
    }

    pub fn zero() -> Self {
        Self::single(S::zero())
    }

    /// Accrual factors `1 + r dt` must stay positive on every step.
    pub fn check_accrual(&self, tree: &EventTree<S>) -> Result<()> {
        for n in tree.ids().filter(|&n| !tree.is_leaf(n)) {
            let dt = tree.dt(n);
            for r in [&self.r_lend, &self.r_borrow] {
                if S::one() + r.clone() * dt.clone() <= S::zero() {
                    return Err(Error::InvalidParameter(format!("rate {r} makes the accrual factor non-positive")));
                }
            }
        }
        Ok(())
    }
}

/// Differential lending/borrowing driver with cash position `psi = y - z.S`:
/// `g = -r_lend psi^+ + r_borrow psi^-`.
#[derive(Debug, Clone)]
pub struct FundingGenerator<S> {
    pub rates: RateSchedule<S>,
}

pub fn funding_generator<S: Scalar>(rates: RateSchedule<S>) -> FundingGenerator<S> {
    FundingGenerator { rates }
}

/// Single-rate market: funding with equal lending and borrowing rates.
pub fn linear_generator<S: Scalar>(r: S) -> FundingGenerator<S> {
    FundingGenerator { rates: RateSchedule::single(r) }
}

fn cash_position<S: Scalar>(y: &S, z: &[S], price: &[S]) -> S {
    z.iter().zip(price).fold(y.clone(), |acc, (zi, si)| acc - zi.clone() * si.clone())
}

impl<S: Scalar> Generator<S> for FundingGenerator<S> {
    fn eval(&self, _t: &S, y: &S, z: &[S], price: &[S]) -> S {
        let psi = cash_position(y, z, price);
        -(self.rates.r_lend.clone() * psi.pos()) + self.rates.r_borrow.clone() * psi.neg_part()
    }
    fn lipschitz_y(&self) -> f64 {
        self.rates.r_lend.to_f64().abs().max(self.rates.r_borrow.to_f64().abs())
    }
    fn lipschitz_z(&self, price: &[S]) -> f64 {
        let norm: f64 = price.iter().map(|s| s.to_f64().abs()).sum();
        self.lipschitz_y() * norm
    }
    fn label(&self) -> String {
        if self.rates.r_lend == self.rates.r_borrow {
            format!("linear(r={})", self.rates.r_lend)
        } else {
            format!("funding(r_lend={}, r_borrow={})", self.rates.r_lend, self.rates.r_borrow)
        }
    }
    fn pieces(&self, _t: &S, price: &[S]) -> Option<Vec<AffinePiece<S>>> {
        let piece = |r: &S, sign: S| {
            let b = -r.clone();
            AffinePiece {
                a: S::zero(),
                b: b.clone(),
                c: price.iter().map(|s| -(b.clone() * s.clone())).collect(),
                region: vec![HalfSpace {
                    cy: sign.clone(),
                    cz: price.iter().map(|s| -(sign.clone() * s.clone())).collect(),
                    rhs: S::zero(),
                }],
            }
        };
        if self.rates.r_lend == self.rates.r_borrow {
            let mut p = piece(&self.rates.r_lend, S::one());
            p.region.clear();
            return Some(vec![p]);
        }
        Some(vec![piece(&self.rates.r_lend, S::one()), piece(&self.rates.r_borrow, -S::one())])
    }
}

type DriverFn<S> = dyn Fn(&S, &S, &[S], &[S]) -> S + Send + Sync;

/// User-supplied driver with declared Lipschitz bounds. Exact mode cannot
/// solve its implicit step since it exposes no affine pieces.
pub struct FnGenerator<S> {
    f: Box<DriverFn<S>>,
    lipschitz_y: f64,
    lipschitz_z: f64,
    label: String,
}

impl<S> FnGenerator<S> {
    pub fn new(
        label: impl Into<String>,
        lipschitz_y: f64,
        lipschitz_z: f64,
        f: impl Fn(&S, &S, &[S], &[S]) -> S + Send + Sync + 'static,
    ) -> Self {
        FnGenerator { f: Box::new(f), lipschitz_y, lipschitz_z, label: label.into() }
    }
}

impl<S: Scalar> Generator<S> for FnGenerator<S> {
    fn eval(&self, t: &S, y: &S, z: &[S], price: &[S]) -> S {
        (self.f)(t, y, z, price)
    }
    fn lipschitz_y(&self) -> f64 {
        self.lipschitz_y
    }
    fn lipschitz_z(&self, _price: &[S]) -> f64 {
        self.lipschitz_z
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Hard error unless `lipschitz_y * dt < 1` on every step.
pub fn check_stability<S: Scalar>(tree: &EventTree<S>, gen: &dyn Generator<S>) -> Result<()> {
    let ly = gen.lipschitz_y();
    for n in tree.ids().filter(|&n| !tree.is_leaf(n)) {
        let product = ly * tree.dt(n).to_f64();
        if product.is_nan() || product >= 1.0 {
            return Err(Error::Unstable { node: n, product });
        }
    }
    Ok(())
}

/// Predictable cash-flow increments; `A_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CashFlows<S> {
    increments: Adapted<S>,
}

impl<S: Scalar> CashFlows<S> {
    pub fn zero<T>(tree: &EventTree<T>) -> Self {
        CashFlows { increments: Adapted::constant(tree, S::zero()) }
    }

    /// `increments[n]` is paid over the step leaving `n`; leaf entries are ignored.
    pub fn new(increments: Adapted<S>) -> Self {
        CashFlows { increments }
    }

    pub fn increment(&self, n: NodeId) -> &S {
        &self.increments[n]
    }

    pub fn increments(&self) -> &Adapted<S> {
        &self.increments
    }

    pub fn neg(&self) -> Self {
        CashFlows { increments: self.increments.neg() }
    }

    pub fn is_zero(&self) -> bool {
        self.increments.values().iter().all(|v| v.is_zero())
    }

    /// Cumulative process by path summation.
    pub fn cumulative(&self, tree: &EventTree<S>) -> Adapted<S> {
        let mut out = vec![S::zero(); tree.len()];
        for n in tree.ids() {
            for &c in tree.children(n) {
                out[c.0] = out[n.0].clone() + self.increments[n].clone();
            }
        }
        Adapted::new(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endowments<S> {
    pub x1: S,
    pub x2: S,
}

/// One explicit wealth step from `n` to `child`.
pub fn wealth_step<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    n: NodeId,
    v: &S,
    xi: &[S],
    child: NodeId,
) -> S {
    let s_n = tree.price(n);
    let drift = gen.eval(tree.time(n), v, xi, s_n) * tree.dt(n);
    let mut gain = S::zero();
    for ((x, sc), sn) in xi.iter().zip(tree.price(child)).zip(s_n) {
        gain = gain + x.clone() * (sc.clone() - sn.clone());
    }
    v.clone() - drift + gain + flows.increment(n).clone()
}

pub fn forward_wealth<S: Scalar>(
    tree: &EventTree<S>,
    y0: S,
    strategy: &Predictable<S>,
    flows: &CashFlows<S>,
    gen: &dyn Generator<S>,
) -> Adapted<S> {
    let mut v: Vec<Option<S>> = vec![None; tree.len()];
    v[0] = Some(y0);
    for n in tree.ids() {
        let vn = v[n.0].clone().expect("parents precede children");
        for &c in tree.children(n) {
            v[c.0] = Some(wealth_step(tree, gen, flows, n, &vn, strategy.get(n), c));
        }
    }
    Adapted::new(v.into_iter().map(|x| x.expect("every node reached")).collect())
}

/// Wealth of an endowment left in the cash account: the sign of `x` picks the
/// lending or the borrowing rate once, at time 0.
pub fn benchmark_wealth<S: Scalar>(tree: &EventTree<S>, x: S, rates: &RateSchedule<S>) -> Adapted<S> {
    let r = if x >= S::zero() { rates.r_lend.clone() } else { rates.r_borrow.clone() };
    let mut out = vec![S::zero(); tree.len()];
    out[0] = x;
    for n in tree.ids().filter(|&n| !tree.is_leaf(n)) {
        let factor = S::one() + r.clone() * tree.dt(n);
        for &c in tree.children(n) {
            out[c.0] = out[n.0].clone() * factor.clone();
        }
    }
    Adapted::new(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCheck {
    pub holds: bool,
    pub first_violation: Option<NodeId>,
}

/// Strict forward comparison: wealth from `y_high` exceeds wealth from `y_low`
/// at every node.
pub fn verify_forward_monotonicity<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    strategy: &Predictable<S>,
    flows: &CashFlows<S>,
    y_low: S,
    y_high: S,
) -> Result<MonotonicityCheck> {
    if y_high <= y_low {
        return Err(Error::InvalidParameter("y_high must exceed y_low".into()));
    }
    let lo = forward_wealth(tree, y_low, strategy, flows, gen);
    let hi = forward_wealth(tree, y_high, strategy, flows, gen);
    let first_violation = tree.ids().find(|&n| hi[n] <= lo[n]);
    Ok(MonotonicityCheck { holds: first_violation.is_none(), first_violation })
}
