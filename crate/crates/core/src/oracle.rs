//! Brute-force verifiers.
//!
//! Optimal stopping values are recomputed by enumerating every stopping time
//! and evaluating each with the plain BSDE recursion. Superhedging costs come
//! from a per-node minimal-capital recursion that never looks at the reflected
//! solver: bisection in float mode, exact two-variable linear programs over
//! the generator's affine pieces in rational mode.
//!
//! On a finite tree with positive branch probabilities, an event of positive
//! probability is a set containing at least one node; every predicate below
//! uses that reading.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evaluation::Stepper;
use crate::generators::{check_stability, forward_wealth, AffinePiece, CashFlows, Generator, HalfSpace};
use crate::lattice::{Adapted, EventTree, NodeId, Predictable, StoppingFamily, StoppingTime};
use crate::pricing::{holder_acceptable_price, issuer_acceptable_price, Benchmark, ContractSpec};
use crate::reflected::{contact_tolerance, first_contact_time};
use crate::scalar::Scalar;

pub const BISECTION_TOLERANCE: f64 = 1e-10;

/// Value and optimizers of an optimal stopping problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingExtremum<S> {
    pub value: S,
    pub optimizers: Vec<StoppingTime>,
    /// Number of stopping times examined.
    pub examined: usize,
}

fn optimizer_tolerance<S: Scalar>(value: &S) -> S {
    if S::EXACT {
        S::zero()
    } else {
        S::from_f64(1e-9 * (1.0 + value.to_f64().abs()))
    }
}

fn extremum<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    obstacle: &Adapted<S>,
    budget: u128,
    maximize: bool,
) -> Result<StoppingExtremum<S>> {
    let stepper = Stepper::new(tree, gen, flows)?;
    let family = StoppingFamily::build(tree, 0, budget)?;
    let values = family.evaluate_all(|n| Ok(obstacle[n].clone()), |n, vals| Ok(stepper.step(n, vals)?.0))?;
    let better = |a: &S, b: &S| if maximize { a > b } else { a < b };
    let mut best = values[0].clone();
    for v in &values[1..] {
        if better(v, &best) {
            best = v.clone();
        }
    }
    let tol = optimizer_tolerance(&best);
    let optimizers = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.approx_eq(&best, &tol))
        .map(|(i, _)| family.materialize(i))
        .collect();
    Ok(StoppingExtremum { value: best, optimizers, examined: values.len() })
}

/// `sup_tau E_{0,tau}(X_tau)` over every stopping time.
pub fn sup_over_stopping_times<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    obstacle: &Adapted<S>,
    budget: u128,
) -> Result<StoppingExtremum<S>> {
    extremum(tree, gen, flows, obstacle, budget, true)
}

/// `inf_tau E_{0,tau}(x_tau)` over every stopping time.
pub fn inf_over_stopping_times<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    obstacle: &Adapted<S>,
    budget: u128,
) -> Result<StoppingExtremum<S>> {
    extremum(tree, gen, flows, obstacle, budget, false)
}

/// Minimal initial capital for one explicit wealth step to reach given levels
/// at both children of a binomial node.
pub struct MinCost<'a, S: Scalar> {
    tree: &'a EventTree<S>,
    gen: &'a dyn Generator<S>,
    flows: &'a CashFlows<S>,
}

impl<'a, S: Scalar> MinCost<'a, S> {
    pub fn new(tree: &'a EventTree<S>, gen: &'a dyn Generator<S>, flows: &'a CashFlows<S>) -> Result<Self> {
        if tree.dim() != 1 {
            return Err(Error::InvalidParameter("superhedging oracle needs a single risky asset".into()));
        }
        if let Some(n) = tree.ids().find(|&n| !tree.is_leaf(n) && tree.children(n).len() != 2) {
            return Err(Error::Representation {
                node: n,
                reason: "superhedging oracle needs binomial branching".into(),
            });
        }
        check_stability(tree, gen)?;
        Ok(MinCost { tree, gen, flows })
    }

    /// Child surplus `h_c(v, z)` of the explicit step.
    fn surplus(&self, n: NodeId, v: &S, z: &S, child: NodeId, required: &S) -> S {
        let s_n = &self.tree.price(n)[0];
        let drift = self.gen.eval(self.tree.time(n), v, core::slice::from_ref(z), self.tree.price(n)) * self.tree.dt(n);
        v.clone() - drift
            + z.clone() * (self.tree.price(child)[0].clone() - s_n.clone())
            + self.flows.increment(n).clone()
            - required.clone()
    }

    /// Vertex enumeration when the generator is piecewise affine, bisection
    /// on feasibility otherwise (float mode only).
    pub fn step(&self, n: NodeId, required: &[&S]) -> Result<S> {
        if S::EXACT || self.gen.pieces(self.tree.time(n), self.tree.price(n)).is_some() {
            self.step_lp(n, required)
        } else {
            self.step_bisect(n, required)
        }
    }

    fn candidates(&self, n: NodeId, v: &S, required: &[&S], pieces: Option<&[AffinePiece<S>]>) -> Vec<S> {
        let ch = self.tree.children(n);
        let (su, sd) = (&self.tree.price(ch[0])[0], &self.tree.price(ch[1])[0]);
        let cross = (required[0].clone() - required[1].clone()) / (su.clone() - sd.clone());
        let far = S::from_f64(1e6) * (S::one() + cross.abs());
        let mut out = vec![cross.clone(), cross.clone() + far.clone(), cross - far];
        if let Some(pieces) = pieces {
            for h in pieces.iter().flat_map(|p| p.region.iter()) {
                if !h.cz[0].is_zero() {
                    out.push((h.rhs.clone() - h.cy.clone() * v.clone()) / h.cz[0].clone());
                }
            }
        }
        out
    }

    fn feasible(&self, n: NodeId, v: &S, required: &[&S], pieces: Option<&[AffinePiece<S>]>) -> bool {
        let ch = self.tree.children(n);
        self.candidates(n, v, required, pieces).iter().any(|z| {
            self.surplus(n, v, z, ch[0], required[0]) >= S::zero()
                && self.surplus(n, v, z, ch[1], required[1]) >= S::zero()
        })
    }

    fn step_bisect(&self, n: NodeId, required: &[&S]) -> Result<S> {
        let pieces = self.gen.pieces(self.tree.time(n), self.tree.price(n));
        let feasible = |v: &S| self.feasible(n, v, required, pieces.as_deref());
        let lo_r = S::min_of(required[0], required[1]);
        let hi_r = S::max_of(required[0], required[1]);
        let span = hi_r.clone() - lo_r.clone() + S::one() + self.flows.increment(n).abs();
        let ten = S::from_int(10);
        let mut lo = lo_r - ten.clone() * span.clone();
        let mut hi = hi_r + ten * span.clone();
        let mut width = span;
        let mut tries = 0;
        while !feasible(&hi) {
            width = width * S::from_int(2);
            hi = hi + width.clone();
            tries += 1;
            if tries > 60 {
                return Err(Error::BracketFailure { node: n });
            }
        }
        tries = 0;
        while feasible(&lo) {
            width = width * S::from_int(2);
            lo = lo - width.clone();
            tries += 1;
            if tries > 60 {
                return Err(Error::Unbounded { node: n });
            }
        }
        let eps = S::from_f64(BISECTION_TOLERANCE);
        while hi.clone() - lo.clone() > eps {
            let mid = (lo.clone() + hi.clone()) / S::from_int(2);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(&mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo + hi) / S::from_int(2))
    }

    fn step_lp(&self, n: NodeId, required: &[&S]) -> Result<S> {
        let pieces = self.gen.pieces(self.tree.time(n), self.tree.price(n)).ok_or_else(|| {
            Error::NoClosedForm(format!("generator {} has no affine pieces for the exact oracle", self.gen.label()))
        })?;
        let dt = self.tree.dt(n);
        let s_n = self.tree.price(n)[0].clone();
        let da = self.flows.increment(n).clone();
        let scale = required.iter().fold(S::one() + da.abs(), |m, r| m + r.abs());
        let floor = -(S::from_int(1_000_000_000) * S::from_int(1_000) * scale.clone());
        let mut best: Option<S> = None;
        for p in &pieces {
            let mut cons: Vec<HalfSpace<S>> = p.region.clone();
            for (c, r) in self.tree.children(n).iter().zip(required) {
                let ds = self.tree.price(*c)[0].clone() - s_n.clone();
                cons.push(lp_child_constraint(p, &dt, ds, &da, r));
            }
            cons.push(HalfSpace { cy: S::one(), cz: vec![S::zero()], rhs: floor.clone() });
            if let Some(v) = lp_min_v(&cons, &scale) {
                if best.as_ref().is_none_or(|b| v < *b) {
                    best = Some(v);
                }
            }
        }
        match best {
            None => Err(Error::BracketFailure { node: n }),
            Some(v) if v == floor => Err(Error::Unbounded { node: n }),
            Some(v) => Ok(v),
        }
    }
}

/// `v - (a + b v + c z) dt + z ds + dA >= r` as a half-space in `(v, z)`.
fn lp_child_constraint<S: Scalar>(p: &AffinePiece<S>, dt: &S, ds: S, da: &S, r: &S) -> HalfSpace<S> {
    HalfSpace {
        cy: S::one() - p.b.clone() * dt.clone(),
        cz: vec![ds - p.c[0].clone() * dt.clone()],
        rhs: r.clone() - da.clone() + p.a.clone() * dt.clone(),
    }
}

/// Minimum of `v` over a pointed polyhedron in `(v, z)`, by vertex enumeration.
/// Float vertices may miss their own constraints by rounding, so slack is
/// tested against a tolerance relative to `scale`.
fn lp_min_v<S: Scalar>(cons: &[HalfSpace<S>], scale: &S) -> Option<S> {
    let slack_tol = if S::EXACT { S::zero() } else { -(S::from_f64(1e-12) * scale.clone()) };
    let mut best: Option<S> = None;
    for i in 0..cons.len() {
        for j in i + 1..cons.len() {
            let (a, b) = (&cons[i], &cons[j]);
            let det = a.cy.clone() * b.cz[0].clone() - a.cz[0].clone() * b.cy.clone();
            if det.is_zero() {
                continue;
            }
            let v = (a.rhs.clone() * b.cz[0].clone() - a.cz[0].clone() * b.rhs.clone()) / det.clone();
            let z = (a.cy.clone() * b.rhs.clone() - a.rhs.clone() * b.cy.clone()) / det;
            let zs = [z];
            if cons.iter().all(|h| h.slack(&v, &zs) >= slack_tol) && best.as_ref().is_none_or(|m| v < *m) {
                best = Some(v);
            }
        }
    }
    best
}

/// Per-node minimal superhedging requirement: `R(leaf) = floor(leaf)`,
/// `R(n) = max(floor(n), cost(n, R(children)))`.
pub fn superhedge_requirements<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    floor: &Adapted<S>,
) -> Result<Adapted<S>> {
    let mc = MinCost::new(tree, gen, flows)?;
    let mut req = floor.values().to_vec();
    for n in tree.ids().rev().filter(|&n| !tree.is_leaf(n)) {
        let vals: Vec<&S> = tree.children(n).iter().map(|c| &req[c.0]).collect();
        let cost = mc.step(n, &vals)?;
        req[n.0] = S::max_of(&floor[n], &cost);
    }
    Ok(Adapted::new(req))
}

/// Smallest initial wealth keeping the wealth above `floor` at every node.
pub fn min_superhedge_cost<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    floor: &Adapted<S>,
) -> Result<S> {
    Ok(superhedge_requirements(tree, gen, flows, floor)?[NodeId::ROOT].clone())
}

/// `min_tau` of the smallest initial wealth reaching `target` on the stop set of `tau`.
pub fn holder_min_cost_over_tau<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows_neg_a: &CashFlows<S>,
    target: &Adapted<S>,
    budget: u128,
) -> Result<StoppingExtremum<S>> {
    let mc = MinCost::new(tree, gen, flows_neg_a)?;
    let family = StoppingFamily::build(tree, 0, budget)?;
    let values = family.evaluate_all(|n| Ok(target[n].clone()), |n, vals| mc.step(n, vals))?;
    let mut best = values[0].clone();
    for v in &values[1..] {
        if *v < best {
            best = v.clone();
        }
    }
    let tol = optimizer_tolerance(&best);
    let optimizers = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.approx_eq(&best, &tol))
        .map(|(i, _)| family.materialize(i))
        .collect();
    Ok(StoppingExtremum { value: best, optimizers, examined: values.len() })
}

/// The trading conditions on hedged wealth. Unprimed kinds are the issuer's,
/// primed (`*H`) kinds the holder's.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionKind<S> {
    Ao,
    Sh,
    Bg(S),
    Be,
    Na,
    AoH,
    ShH,
    BlH(S),
    BeH,
    NaH,
}

impl<S> ConditionKind<S> {
    pub fn is_holder(&self) -> bool {
        matches!(
            self,
            ConditionKind::AoH | ConditionKind::ShH | ConditionKind::BlH(_) | ConditionKind::BeH | ConditionKind::NaH
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConditionKind::Ao => "AO",
            ConditionKind::Sh => "SH",
            ConditionKind::Bg(_) => "BG",
            ConditionKind::Be => "BE",
            ConditionKind::Na => "NA",
            ConditionKind::AoH => "AO'",
            ConditionKind::ShH => "SH'",
            ConditionKind::BlH(_) => "BL'",
            ConditionKind::BeH => "BE'",
            ConditionKind::NaH => "NA'",
        }
    }
}

/// Issuer gap `V + X^h - V0(x1)` or holder gap `V - X^h - V0(x2)`, per node.
pub fn condition_gap<S: Scalar>(
    kind: ConditionKind<S>,
    wealth: &Adapted<S>,
    payoff: &Adapted<S>,
    benchmark: &Adapted<S>,
) -> Adapted<S> {
    let holder = kind.is_holder();
    Adapted::from_values(wealth.values().iter().zip(payoff.values()).zip(benchmark.values()).map(|((v, h), b)| {
        if holder {
            v.clone() - h.clone() - b.clone()
        } else {
            v.clone() + h.clone() - b.clone()
        }
    }))
}

/// Evaluates a condition on `(p, strategy, tau)`, or on the pair
/// `(p, strategy)` when `tau` is `None` (only the superhedging and arbitrage
/// kinds have pair versions).
#[allow(clippy::too_many_arguments)]
pub fn check_condition<S: Scalar>(
    kind: &ConditionKind<S>,
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    endowment: &S,
    benchmark: &Benchmark<S>,
    p: &S,
    strategy: &Predictable<S>,
    tau: Option<&StoppingTime>,
) -> Result<bool> {
    let holder = kind.is_holder();
    let (capital, flows) = if holder {
        (endowment.clone() - p.clone(), contract.flows.neg())
    } else {
        (endowment.clone() + p.clone(), contract.flows.clone())
    };
    let wealth = forward_wealth(tree, capital, strategy, &flows, gen);
    let gap = condition_gap(kind.clone(), &wealth, &contract.payoff, &benchmark.wealth(tree, endowment));
    evaluate_condition(kind, tree, &gap, tau)
}

pub fn evaluate_condition<S: Scalar>(
    kind: &ConditionKind<S>,
    tree: &EventTree<S>,
    gap: &Adapted<S>,
    tau: Option<&StoppingTime>,
) -> Result<bool> {
    let tol = contact_tolerance::<S>();
    let zero = S::zero();
    let nonneg = |n: NodeId| gap[n].approx_ge(&zero, &tol);
    let positive = |n: NodeId| gap[n].definitely_gt(&zero, &tol);
    let equal = |n: NodeId| gap[n].approx_eq(&zero, &tol);
    let short = |n: NodeId| gap[n] < -tol.clone();
    let Some(tau) = tau else {
        return match kind {
            ConditionKind::Sh | ConditionKind::ShH => Ok(tree.ids().all(nonneg)),
            ConditionKind::Ao | ConditionKind::AoH => {
                if !tree.ids().all(nonneg) {
                    return Ok(false);
                }
                // some stopping time sees equality on all of its stop set iff the root is covered
                let mut covered = vec![false; tree.len()];
                for n in tree.ids().rev() {
                    let kids = tree.children(n);
                    covered[n.0] = equal(n) || (!kids.is_empty() && kids.iter().all(|c| covered[c.0]));
                }
                Ok(!covered[0])
            }
            other => Err(Error::InvalidParameter(format!("{} has no pair version", other.name()))),
        };
    };
    if !crate::lattice::validate_stopping_time(tree, tau) {
        return Err(Error::InvalidStoppingTime("stop set must meet every path exactly once".into()));
    }
    let at = tau.nodes();
    Ok(match kind {
        ConditionKind::Ao | ConditionKind::AoH => at.iter().all(|&n| nonneg(n)) && at.iter().any(|&n| positive(n)),
        ConditionKind::Sh | ConditionKind::ShH => at.iter().all(|&n| nonneg(n)),
        ConditionKind::Bg(eps) => at.iter().all(|&n| gap[n].clone() <= eps.clone() + tol.clone()),
        ConditionKind::BlH(eps) => at.iter().all(|&n| gap[n].approx_ge(&-eps.clone(), &tol)),
        ConditionKind::Be | ConditionKind::BeH => at.iter().all(|&n| equal(n)),
        ConditionKind::Na | ConditionKind::NaH => at.iter().all(|&n| equal(n)) || at.iter().any(|&n| short(n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceSide {
    Issuer,
    Holder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome<S> {
    pub price: S,
    /// Fair according to the superhedging oracle.
    pub fair: bool,
    /// The solver's hedge funded at this price is an arbitrage.
    pub arbitrage_witness: bool,
    /// The solver's hedge satisfies no-arbitrage at the earliest contact time.
    pub no_arbitrage_witness: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalReport<S> {
    pub side: PriceSide,
    /// Acceptable price from the reflected solver.
    pub boundary: S,
    /// Boundary implied by the superhedging oracle.
    pub oracle_boundary: S,
    pub probes: Vec<ProbeOutcome<S>>,
}

/// `count` prices centred on `boundary`, spaced by a tenth of `max(1, |boundary|)`.
pub fn probe_grid<S: Scalar>(boundary: &S, count: usize) -> Vec<S> {
    let step = S::max_of(&S::one(), &boundary.abs()) / S::from_int(10);
    let half = (count / 2) as i64;
    (0..count as i64).map(|i| boundary.clone() + step.clone() * S::from_int(i - half)).collect()
}

/// Checks that fairness flips exactly at the acceptable price: fair on
/// `(-inf, p^i]` for the issuer and on `[p^h, inf)` for the holder, with
/// explicit arbitrage constructions on the other side.
#[allow(clippy::too_many_arguments)]
pub fn verify_interval_structure<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    endowment: &S,
    benchmark: &Benchmark<S>,
    side: PriceSide,
    probes: &[S],
    budget: u128,
) -> Result<IntervalReport<S>> {
    let tol = contact_tolerance::<S>();
    let bench = benchmark.wealth(tree, endowment);
    let (solved, oracle_boundary, arb_kind, na_kind) = match side {
        PriceSide::Issuer => {
            let s = issuer_acceptable_price(tree, gen, contract, endowment, benchmark)?;
            let floor = crate::pricing::issuer_relative_reward(contract, &bench);
            let cost = min_superhedge_cost(tree, gen, &contract.flows, &floor)?;
            (s, cost - endowment.clone(), ConditionKind::Ao, ConditionKind::Na)
        }
        PriceSide::Holder => {
            let s = holder_acceptable_price(tree, gen, contract, endowment, benchmark)?;
            let target = crate::pricing::holder_relative_reward(contract, &bench);
            let cost = holder_min_cost_over_tau(tree, gen, &contract.flows.neg(), &target, budget)?.value;
            (s, endowment.clone() - cost, ConditionKind::AoH, ConditionKind::NaH)
        }
    };
    let tau = first_contact_time(tree, &solved.solution, &tol);
    let strategy = &solved.solution.z;
    let mut outcomes = Vec::with_capacity(probes.len());
    for p in probes {
        let fair = match side {
            PriceSide::Issuer => oracle_boundary.approx_ge(p, &tol),
            PriceSide::Holder => p.approx_ge(&oracle_boundary, &tol),
        };
        // the issuer's arbitrage must work against every exercise time; the holder picks one
        let arb_tau = match side {
            PriceSide::Issuer => None,
            PriceSide::Holder => Some(&tau),
        };
        let arbitrage_witness =
            check_condition(&arb_kind, tree, gen, contract, endowment, benchmark, p, strategy, arb_tau)?;
        let no_arbitrage_witness =
            check_condition(&na_kind, tree, gen, contract, endowment, benchmark, p, strategy, Some(&tau))?;
        let expect_fair = match side {
            PriceSide::Issuer => solved.price.approx_ge(p, &tol),
            PriceSide::Holder => p.approx_ge(&solved.price, &tol),
        };
        if fair != expect_fair || fair == arbitrage_witness || (fair && !no_arbitrage_witness) {
            return Err(Error::TheoremViolation(format!(
                "{side:?} fairness flips away from the acceptable price {}: probe {p} fair={fair} arbitrage={arbitrage_witness} no_arbitrage={no_arbitrage_witness}",
                solved.price
            )));
        }
        outcomes.push(ProbeOutcome { price: p.clone(), fair, arbitrage_witness, no_arbitrage_witness });
    }
    Ok(IntervalReport { side, boundary: solved.price, oracle_boundary, probes: outcomes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuperhedgeLogicReport {
    pub strategies: usize,
    pub superhedging: usize,
    /// A superhedging pair with a no-arbitrage time that is not break-even.
    pub violations_na_implies_be: usize,
    /// A non-superhedging pair with no stopping time satisfying no-arbitrage.
    pub violations_missing_na: usize,
}

impl SuperhedgeLogicReport {
    pub fn passed(&self) -> bool {
        self.violations_na_implies_be == 0 && self.violations_missing_na == 0
    }
}

/// For each issuer strategy: if it superhedges, every no-arbitrage time is a
/// break-even time; if it does not, some stopping time satisfies no-arbitrage.
#[allow(clippy::too_many_arguments)]
pub fn check_superhedge_logic<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    x1: &S,
    benchmark: &Benchmark<S>,
    p: &S,
    strategies: &[Predictable<S>],
    budget: u128,
) -> Result<SuperhedgeLogicReport> {
    let family = StoppingFamily::build(tree, 0, budget)?;
    let taus: Vec<StoppingTime> = family.iter().collect();
    let bench = benchmark.wealth(tree, x1);
    let mut report = SuperhedgeLogicReport { strategies: strategies.len(), ..Default::default() };
    for phi in strategies {
        let wealth = forward_wealth(tree, x1.clone() + p.clone(), phi, &contract.flows, gen);
        let gap = condition_gap(ConditionKind::Sh, &wealth, &contract.payoff, &bench);
        let sh = evaluate_condition(&ConditionKind::Sh, tree, &gap, None)?;
        if sh {
            report.superhedging += 1;
            for tau in &taus {
                let na = evaluate_condition(&ConditionKind::Na, tree, &gap, Some(tau))?;
                if na && !evaluate_condition(&ConditionKind::Be, tree, &gap, Some(tau))? {
                    report.violations_na_implies_be += 1;
                    break;
                }
            }
        } else {
            let mut found = false;
            for tau in &taus {
                if evaluate_condition(&ConditionKind::Na, tree, &gap, Some(tau))? {
                    found = true;
                    break;
                }
            }
            if !found {
                report.violations_missing_na += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{discount_generator, funding_generator, RateSchedule, ZeroGenerator};
    use crate::lattice::DEFAULT_ENUMERATION_BUDGET;
    use crate::reflected::solve_reflected_lower;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn scenario_a() -> (EventTree<Rational>, ContractSpec<Rational>) {
        let t = EventTree::binomial(q(100, 1), q(6, 5), q(9, 10), 2, q(1, 1), q(1, 2)).unwrap();
        let payoff = Adapted::from_fn(&t, |n| -(q(100, 1) - t.price(n)[0].clone()).pos());
        let c = ContractSpec::new(&t, payoff, CashFlows::zero(&t)).unwrap();
        (t, c)
    }

    fn put(t: &EventTree<Rational>) -> Adapted<Rational> {
        Adapted::from_fn(t, |n| (q(100, 1) - t.price(n)[0].clone()).pos())
    }

    #[test]
    fn sup_scenario_a() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let r = sup_over_stopping_times(&t, &ZeroGenerator, &flows, &put(&t), 100).unwrap();
        assert_eq!(r.value, q(76, 9));
        assert_eq!(r.examined, 5);
        assert_eq!(r.optimizers.len(), 2);
        assert!(r.optimizers.contains(&StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)])));
        assert!(r.optimizers.contains(&StoppingTime::at_horizon(&t)));
    }

    #[test]
    fn sup_constant_and_submartingale() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let r = sup_over_stopping_times(&t, &ZeroGenerator, &flows, &Adapted::constant(&t, q(4, 1)), 100).unwrap();
        assert_eq!((r.value, r.optimizers.len()), (q(4, 1), 5));
        let s = Adapted::from_fn(&t, |n| {
            let k = Rational::from_int(t.node(n).step as i64);
            t.price(n)[0].clone() + k
        });
        let r = sup_over_stopping_times(&t, &ZeroGenerator, &flows, &s, 100).unwrap();
        assert_eq!(r.optimizers, vec![StoppingTime::at_horizon(&t)]);
    }

    #[test]
    fn inf_duality() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let x = put(&t);
        let inf = inf_over_stopping_times(&t, &ZeroGenerator, &flows, &x.neg(), 100).unwrap();
        assert_eq!(inf.value, q(-76, 9));
    }

    #[test]
    fn min_superhedge_exact_and_bisect() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        assert_eq!(min_superhedge_cost(&t, &ZeroGenerator, &flows, &put(&t)).unwrap(), q(76, 9));
        assert_eq!(
            min_superhedge_cost(&t, &ZeroGenerator, &flows, &Adapted::constant(&t, Rational::zero())).unwrap(),
            q(0, 1)
        );
        let g = discount_generator(q(1, 10)).unwrap();
        assert_eq!(min_superhedge_cost(&t, &g, &flows, &Adapted::constant(&t, q(3, 1))).unwrap(), q(3, 1));

        let tf: EventTree<f64> = EventTree::binomial(100.0, 1.2, 0.9, 2, 1.0, 0.5).unwrap();
        let pf = Adapted::from_fn(&tf, |n| (100.0 - tf.price(n)[0]).max(0.0));
        let v = min_superhedge_cost(&tf, &ZeroGenerator, &CashFlows::zero(&tf), &pf).unwrap();
        assert!((v - 76.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn min_superhedge_matches_solver_with_funding() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let g = funding_generator(RateSchedule::new(q(1, 100), q(5, 100)).unwrap());
        let x = put(&t);
        let sol = solve_reflected_lower(&t, &g, &flows, &x).unwrap();
        assert_eq!(&min_superhedge_cost(&t, &g, &flows, &x).unwrap(), sol.y0());
        assert_eq!(&sup_over_stopping_times(&t, &g, &flows, &x, 100).unwrap().value, sol.y0());
    }

    #[test]
    fn holder_cost_scenario_a() {
        let (t, _) = scenario_a();
        let flows = CashFlows::zero(&t);
        let r = holder_min_cost_over_tau(&t, &ZeroGenerator, &flows, &put(&t).neg(), 100).unwrap();
        assert_eq!(r.value, q(-76, 9));
        let c = holder_min_cost_over_tau(&t, &ZeroGenerator, &flows, &Adapted::constant(&t, q(2, 1)), 100).unwrap();
        assert_eq!(c.value, q(2, 1));
        assert!(c.optimizers.contains(&StoppingTime::at_root()));
    }

    #[test]
    fn conditions_scenario_a() {
        let (t, c) = scenario_a();
        let b = Benchmark::zero_rate();
        let z0 = Rational::zero();
        let s = issuer_acceptable_price(&t, &ZeroGenerator, &c, &z0, &b).unwrap();
        let tau = StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)]);
        let chk = |kind: ConditionKind<Rational>, p: &Rational, tau: Option<&StoppingTime>| {
            check_condition(&kind, &t, &ZeroGenerator, &c, &z0, &b, p, &s.solution.z, tau).unwrap()
        };
        assert!(chk(ConditionKind::Be, &s.price, Some(&tau)));
        assert!(chk(ConditionKind::Na, &s.price, Some(&tau)));
        assert!(!chk(ConditionKind::Ao, &s.price, Some(&tau)));
        assert!(chk(ConditionKind::Sh, &s.price, None));
        let up = s.price.clone() + q(1, 1);
        assert!(chk(ConditionKind::Ao, &up, None));
        for tau in crate::lattice::enumerate_stopping_times(&t, 0, 100).unwrap() {
            assert!(chk(ConditionKind::Ao, &up, Some(&tau)));
        }
        let down = s.price.clone() - q(1, 1);
        assert!(!chk(ConditionKind::Sh, &down, None));
        assert!(chk(ConditionKind::Bg(q(1, 1)), &up, Some(&tau)));
        assert!(!chk(ConditionKind::Bg(q(1, 2)), &up, Some(&tau)));
    }

    #[test]
    fn interval_scenario_a() {
        let (t, c) = scenario_a();
        let b = Benchmark::zero_rate();
        let z0 = Rational::zero();
        let probes = [q(76, 9) - q(1, 1), q(76, 9), q(76, 9) + q(1, 1)];
        let r = verify_interval_structure(&t, &ZeroGenerator, &c, &z0, &b, PriceSide::Issuer, &probes, 100).unwrap();
        let fair: Vec<bool> = r.probes.iter().map(|p| p.fair).collect();
        assert_eq!(fair, vec![true, true, false]);
        let r = verify_interval_structure(&t, &ZeroGenerator, &c, &z0, &b, PriceSide::Holder, &probes, 100).unwrap();
        let fair: Vec<bool> = r.probes.iter().map(|p| p.fair).collect();
        assert_eq!(fair, vec![false, true, true]);
    }

    #[test]
    fn interval_zero_contract() {
        let (t, _) = scenario_a();
        let c = ContractSpec::zero(&t);
        let probes = [q(-1, 1), q(0, 1), q(1, 1)];
        let r = verify_interval_structure(
            &t,
            &ZeroGenerator,
            &c,
            &Rational::zero(),
            &Benchmark::zero_rate(),
            PriceSide::Issuer,
            &probes,
            DEFAULT_ENUMERATION_BUDGET,
        )
        .unwrap();
        let fair: Vec<bool> = r.probes.iter().map(|p| p.fair).collect();
        assert_eq!(fair, vec![true, true, false]);
    }

    #[test]
    fn probe_grid_is_centred() {
        let g = probe_grid(&8.0_f64, 11);
        assert_eq!(g.len(), 11);
        assert!((g[5] - 8.0).abs() < 1e-15);
        assert!((g[6] - 8.8).abs() < 1e-12);
    }
}
