//! Contract-level pricing: relative rewards, acceptable prices, hedges,
//! break-even times and rational exercise times.
//!
//! The issuer's acceptable price is `Y_0 - x1` for the lower-obstacle solution
//! on `X = V0(x1) - X^h` with flows `A`; the holder's is `x2 - y_0` for the
//! upper-obstacle solution on `x = V0(x2) + X^h` with flows `-A`. The cash-flow
//! increment into an exercise node is paid before the payoff is settled.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evaluation::{check_one_step_monotonicity, solve_with, Stepper};
use crate::generators::{benchmark_wealth, forward_wealth, CashFlows, Endowments, Generator, RateSchedule};
use crate::lattice::{validate_stopping_time, Adapted, EventTree, Predictable, StoppingFamily, StoppingTime};
use crate::oracle::{condition_gap, ConditionKind};
use crate::reflected::{
    contact_tolerance, first_contact_time, latest_exercise_time, solve_reflected_lower, solve_reflected_upper,
    LatestExercise, RbsdeSolution,
};
use crate::scalar::Scalar;

/// American contract: issuer-side payoff `X^h` and cumulative cash flows `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractSpec<S> {
    pub payoff: Adapted<S>,
    pub flows: CashFlows<S>,
}

impl<S: Scalar> ContractSpec<S> {
    pub fn new(tree: &EventTree<S>, payoff: Adapted<S>, flows: CashFlows<S>) -> Result<Self> {
        if payoff.len() != tree.len() || flows.increments().len() != tree.len() {
            return Err(Error::InvalidParameter("contract processes must be defined on every node".into()));
        }
        Ok(ContractSpec { payoff, flows })
    }

    pub fn zero(tree: &EventTree<S>) -> Self {
        ContractSpec { payoff: Adapted::constant(tree, S::zero()), flows: CashFlows::zero(tree) }
    }
}

/// Reference wealth of an endowment kept in cash.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark<S> {
    /// `x B^l` or `x B^b` depending on the sign of the endowment.
    Rates(RateSchedule<S>),
    /// A user-supplied benchmark wealth process, used as given for any endowment.
    Process(Adapted<S>),
}

impl<S: Scalar> Benchmark<S> {
    pub fn zero_rate() -> Self {
        Benchmark::Rates(RateSchedule::zero())
    }

    pub fn wealth(&self, tree: &EventTree<S>, x: &S) -> Adapted<S> {
        match self {
            Benchmark::Rates(r) => benchmark_wealth(tree, x.clone(), r),
            Benchmark::Process(p) => p.clone(),
        }
    }
}

/// `X = V0(x1) - X^h`.
pub fn issuer_relative_reward<S: Scalar>(contract: &ContractSpec<S>, benchmark: &Adapted<S>) -> Adapted<S> {
    benchmark.zip_with(&contract.payoff, |b, h| b.clone() - h.clone())
}

/// `x = V0(x2) + X^h`.
pub fn holder_relative_reward<S: Scalar>(contract: &ContractSpec<S>, benchmark: &Adapted<S>) -> Adapted<S> {
    benchmark.zip_with(&contract.payoff, |b, h| b.clone() + h.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidePrice<S> {
    pub price: S,
    pub solution: RbsdeSolution<S>,
    /// One-step strict monotonicity held, so the comparison premises of the
    /// pricing theorems are met.
    pub comparison_verified: bool,
}

pub fn issuer_acceptable_price<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    x1: &S,
    benchmark: &Benchmark<S>,
) -> Result<SidePrice<S>> {
    let obstacle = issuer_relative_reward(contract, &benchmark.wealth(tree, x1));
    let solution = solve_reflected_lower(tree, gen, &contract.flows, &obstacle)?;
    Ok(SidePrice {
        price: solution.y0().clone() - x1.clone(),
        comparison_verified: check_one_step_monotonicity(tree, gen),
        solution,
    })
}

pub fn holder_acceptable_price<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    x2: &S,
    benchmark: &Benchmark<S>,
) -> Result<SidePrice<S>> {
    let obstacle = holder_relative_reward(contract, &benchmark.wealth(tree, x2));
    let solution = solve_reflected_upper(tree, gen, &contract.flows.neg(), &obstacle)?;
    Ok(SidePrice {
        price: x2.clone() - solution.y0().clone(),
        comparison_verified: check_one_step_monotonicity(tree, gen),
        solution,
    })
}

/// Outcomes of the five equivalent break-even characterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BreakEvenFlags {
    /// Hedged wealth plus payoff equals the benchmark at `tau`.
    pub break_even: bool,
    /// No-arbitrage condition at `tau`.
    pub no_arbitrage: bool,
    /// Hedged wealth equals the relative reward at `tau`.
    pub wealth_hits_obstacle: bool,
    /// `Y = X` at `tau` and no reflection strictly before `tau`.
    pub contact_without_reflection: bool,
    /// `tau` attains the optimal stopping value.
    pub optimal: bool,
}

impl BreakEvenFlags {
    pub fn as_array(&self) -> [bool; 5] {
        [self.break_even, self.no_arbitrage, self.wealth_hits_obstacle, self.contact_without_reflection, self.optimal]
    }

    pub fn all_agree(&self) -> bool {
        let a = self.as_array();
        a.iter().all(|&b| b == a[0])
    }
}

/// Precomputed issuer solution and hedged wealth for classifying many
/// candidate stopping times.
pub struct BreakEvenClassifier<'a, S: Scalar> {
    tree: &'a EventTree<S>,
    stepper: Stepper<'a, S>,
    issuer: SidePrice<S>,
    obstacle: Adapted<S>,
    gap: Adapted<S>,
    wealth: Adapted<S>,
    k: Adapted<S>,
    tol: S,
}

impl<'a, S: Scalar> BreakEvenClassifier<'a, S> {
    pub fn new(
        tree: &'a EventTree<S>,
        gen: &'a dyn Generator<S>,
        contract: &'a ContractSpec<S>,
        x1: &S,
        benchmark: &Benchmark<S>,
    ) -> Result<Self> {
        let issuer = issuer_acceptable_price(tree, gen, contract, x1, benchmark)?;
        let bench = benchmark.wealth(tree, x1);
        let obstacle = issuer_relative_reward(contract, &bench);
        let capital = x1.clone() + issuer.price.clone();
        let wealth = forward_wealth(tree, capital, &issuer.solution.z, &contract.flows, gen);
        let gap = condition_gap(ConditionKind::Be, &wealth, &contract.payoff, &bench);
        let k = issuer.solution.cumulative_k(tree);
        let stepper = Stepper::new(tree, gen, &contract.flows)?;
        Ok(BreakEvenClassifier { tree, stepper, issuer, obstacle, gap, wealth, k, tol: contact_tolerance() })
    }

    pub fn issuer(&self) -> &SidePrice<S> {
        &self.issuer
    }

    pub fn wealth(&self) -> &Adapted<S> {
        &self.wealth
    }

    /// Evaluates the five conditions. A disagreement is an error when the
    /// comparison premises hold, and is reported as-is otherwise.
    pub fn classify(&self, tau: &StoppingTime) -> Result<BreakEvenFlags> {
        if !validate_stopping_time(self.tree, tau) {
            return Err(Error::InvalidStoppingTime("stop set must meet every path exactly once".into()));
        }
        let value = solve_with(&self.stepper, tau, &self.obstacle)?;
        self.flags(tau, value.y0())
    }

    /// Classifies every member of `family`, in family order. The stopping
    /// values come from one compositional pass instead of one solve per time.
    pub fn classify_all(&self, family: &StoppingFamily) -> Result<Vec<BreakEvenFlags>> {
        let values =
            family.evaluate_all(|n| Ok(self.obstacle[n].clone()), |n, vals| Ok(self.stepper.step(n, vals)?.0))?;
        values.iter().enumerate().map(|(i, v)| self.flags(&family.materialize(i), v)).collect()
    }

    fn flags(&self, tau: &StoppingTime, value: &S) -> Result<BreakEvenFlags> {
        let zero = S::zero();
        let at = tau.nodes();
        let eq = |a: &S, b: &S| a.approx_eq(b, &self.tol);
        let break_even = at.iter().all(|&n| eq(&self.gap[n], &zero));
        let no_arbitrage = break_even || at.iter().any(|&n| self.gap[n] < -self.tol.clone());
        let wealth_hits_obstacle = at.iter().all(|&n| eq(&self.wealth[n], &self.obstacle[n]));
        let contact_without_reflection =
            at.iter().all(|&n| eq(&self.issuer.solution.y[n], &self.obstacle[n]) && eq(&self.k[n], &zero));
        let optimal = eq(value, self.issuer.solution.y0());
        let flags =
            BreakEvenFlags { break_even, no_arbitrage, wealth_hits_obstacle, contact_without_reflection, optimal };
        if self.issuer.comparison_verified && !flags.all_agree() {
            return Err(Error::TheoremViolation(alloc::format!(
                "break-even characterizations disagree at stop set {:?}: {:?}",
                tau.nodes(),
                flags.as_array()
            )));
        }
        Ok(flags)
    }
}

pub fn classify_break_even<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    x1: &S,
    benchmark: &Benchmark<S>,
    tau: &StoppingTime,
) -> Result<BreakEvenFlags> {
    BreakEvenClassifier::new(tree, gen, contract, x1, benchmark)?.classify(tau)
}

/// `tau` is a rational exercise time for the holder: `y = x` on the stop set
/// and no reflection strictly before it.
pub fn is_rational_exercise_time<S: Scalar>(
    tree: &EventTree<S>,
    sol: &RbsdeSolution<S>,
    k: &Adapted<S>,
    tau: &StoppingTime,
    tol: &S,
) -> bool {
    validate_stopping_time(tree, tau)
        && tau.nodes().iter().all(|&n| sol.contact(n, tol) && k[n].approx_eq(&S::zero(), tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalExercise<S> {
    pub holder: SidePrice<S>,
    pub earliest: StoppingTime,
    pub latest: LatestExercise,
    /// Every rational exercise time, when enumeration fits the budget.
    pub members: Option<Vec<StoppingTime>>,
    /// Number of stopping times when enumeration was refused.
    pub refused_count: Option<u128>,
}

pub fn rational_exercise_times<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    x2: &S,
    benchmark: &Benchmark<S>,
    budget: u128,
) -> Result<RationalExercise<S>> {
    let holder = holder_acceptable_price(tree, gen, contract, x2, benchmark)?;
    let tol = contact_tolerance::<S>();
    let sol = &holder.solution;
    let earliest = first_contact_time(tree, sol, &tol);
    let latest = latest_exercise_time(tree, sol, &tol);
    let k = sol.cumulative_k(tree);
    let (members, refused_count) = match StoppingFamily::build(tree, 0, budget) {
        Ok(family) => {
            let set = family.iter().filter(|tau| is_rational_exercise_time(tree, sol, &k, tau, &tol)).collect();
            (Some(set), None)
        }
        Err(Error::BudgetExceeded { count, .. }) => (None, Some(count)),
        Err(e) => return Err(e),
    };
    Ok(RationalExercise { holder, earliest, latest, members, refused_count })
}

/// Both acceptable prices with hedges and exercise-time diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport<S> {
    pub p_issuer: S,
    pub p_holder: S,
    pub tau_issuer_earliest: StoppingTime,
    pub tau_holder_earliest: StoppingTime,
    pub tau_holder_latest: StoppingTime,
    pub holder_latest_caveat: bool,
    pub tau_holder_latest_rational: StoppingTime,
    pub issuer_hedge: Predictable<S>,
    pub holder_hedge: Predictable<S>,
    pub issuer_total_reflection: S,
    pub holder_total_reflection: S,
    pub comparison_verified: bool,
    pub issuer: RbsdeSolution<S>,
    pub holder: RbsdeSolution<S>,
}

impl<S: Scalar> PriceReport<S> {
    /// `p_issuer - p_holder`; zero in a linear market.
    pub fn wedge(&self) -> S {
        self.p_issuer.clone() - self.p_holder.clone()
    }

    /// `[min(p^h, p^i), max(p^h, p^i)]`.
    pub fn fair_interval(&self) -> (S, S) {
        (S::min_of(&self.p_holder, &self.p_issuer), S::max_of(&self.p_holder, &self.p_issuer))
    }
}

pub fn price_contract<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    contract: &ContractSpec<S>,
    endowments: &Endowments<S>,
    benchmark: &Benchmark<S>,
) -> Result<PriceReport<S>> {
    let issuer = issuer_acceptable_price(tree, gen, contract, &endowments.x1, benchmark)?;
    let holder = holder_acceptable_price(tree, gen, contract, &endowments.x2, benchmark)?;
    let tol = contact_tolerance::<S>();
    let latest = latest_exercise_time(tree, &holder.solution, &tol);
    let total = |sol: &RbsdeSolution<S>| sol.dk.values().iter().fold(S::zero(), |a, b| a + b.clone());
    Ok(PriceReport {
        tau_issuer_earliest: first_contact_time(tree, &issuer.solution, &tol),
        tau_holder_earliest: first_contact_time(tree, &holder.solution, &tol),
        tau_holder_latest: latest.time,
        holder_latest_caveat: latest.caveat,
        tau_holder_latest_rational: latest.latest_rational,
        issuer_hedge: issuer.solution.z.clone(),
        holder_hedge: holder.solution.z.clone(),
        issuer_total_reflection: total(&issuer.solution),
        holder_total_reflection: total(&holder.solution),
        comparison_verified: issuer.comparison_verified,
        p_issuer: issuer.price,
        p_holder: holder.price,
        issuer: issuer.solution,
        holder: holder.solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{funding_generator, ZeroGenerator};
    use crate::lattice::NodeId;
    use crate::scalar::Rational;
    use alloc::vec;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn scenario_a() -> (EventTree<Rational>, ContractSpec<Rational>) {
        let t = EventTree::binomial(q(100, 1), q(6, 5), q(9, 10), 2, q(1, 1), q(1, 2)).unwrap();
        let payoff = Adapted::from_fn(&t, |n| -(q(100, 1) - t.price(n)[0].clone()).pos());
        let c = ContractSpec::new(&t, payoff, CashFlows::zero(&t)).unwrap();
        (t, c)
    }

    #[test]
    fn relative_rewards() {
        let (t, c) = scenario_a();
        let zero = Adapted::constant(&t, Rational::zero());
        let x = issuer_relative_reward(&c, &zero);
        assert_eq!(x[NodeId(6)], q(19, 1));
        let h = holder_relative_reward(&c, &zero);
        let leaves: Vec<Rational> = t.leaves().map(|n| h[n].clone()).collect();
        assert_eq!(leaves, vec![q(0, 1), q(0, 1), q(0, 1), q(-19, 1)]);
        let five = ContractSpec::new(&t, Adapted::constant(&t, q(5, 1)), CashFlows::zero(&t)).unwrap();
        let bench = Adapted::constant(&t, q(100, 1));
        assert!(issuer_relative_reward(&five, &bench).values().iter().all(|v| *v == q(95, 1)));
    }

    #[test]
    fn scenario_a_prices() {
        let (t, c) = scenario_a();
        let b = Benchmark::zero_rate();
        let i = issuer_acceptable_price(&t, &ZeroGenerator, &c, &Rational::zero(), &b).unwrap();
        let h = holder_acceptable_price(&t, &ZeroGenerator, &c, &Rational::zero(), &b).unwrap();
        assert_eq!(i.price, q(76, 9));
        assert_eq!(h.price, q(76, 9));
        assert!(i.comparison_verified);
        let shifted = issuer_acceptable_price(&t, &ZeroGenerator, &c, &q(3, 1), &b).unwrap();
        assert_eq!(shifted.price, q(76, 9));
        assert_eq!(shifted.solution.y0(), &(q(76, 9) + q(3, 1)));
    }

    #[test]
    fn zero_contract_is_free() {
        let (t, _) = scenario_a();
        let c = ContractSpec::zero(&t);
        let b = Benchmark::zero_rate();
        assert_eq!(issuer_acceptable_price(&t, &ZeroGenerator, &c, &Rational::zero(), &b).unwrap().price, q(0, 1));
        assert_eq!(holder_acceptable_price(&t, &ZeroGenerator, &c, &Rational::zero(), &b).unwrap().price, q(0, 1));
    }

    #[test]
    fn scenario_b_wedge() {
        let (t, c) = scenario_a();
        let g = funding_generator(RateSchedule::new(q(1, 100), q(5, 100)).unwrap());
        let b = Benchmark::zero_rate();
        let i = issuer_acceptable_price(&t, &g, &c, &Rational::zero(), &b).unwrap();
        let h = holder_acceptable_price(&t, &g, &c, &Rational::zero(), &b).unwrap();
        assert!(h.price <= i.price);
        assert!(h.price < i.price);
    }

    #[test]
    fn break_even_classification() {
        let (t, c) = scenario_a();
        let b = Benchmark::zero_rate();
        let z = Rational::zero();
        let cl = BreakEvenClassifier::new(&t, &ZeroGenerator, &c, &z, &b).unwrap();
        let tau_i = StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)]);
        assert_eq!(cl.classify(&tau_i).unwrap().as_array(), [true; 5]);
        assert_eq!(cl.classify(&StoppingTime::at_step(&t, 1)).unwrap().as_array(), [false; 5]);
        assert_eq!(cl.classify(&StoppingTime::at_horizon(&t)).unwrap().as_array(), [true; 5]);
    }

    #[test]
    fn scenario_a_rational_times() {
        let (t, c) = scenario_a();
        let r =
            rational_exercise_times(&t, &ZeroGenerator, &c, &Rational::zero(), &Benchmark::zero_rate(), 1000).unwrap();
        assert_eq!(r.earliest, StoppingTime::new(vec![NodeId(1), NodeId(5), NodeId(6)]));
        assert_eq!(r.latest.time, StoppingTime::at_horizon(&t));
        assert!(!r.latest.caveat);
        let members = r.members.unwrap();
        assert_eq!(members.len(), 2);
        assert!(members.contains(&r.earliest) && members.contains(&r.latest.time));
    }

    #[test]
    fn constant_reward_makes_every_time_rational() {
        let (t, _) = scenario_a();
        let c = ContractSpec::new(&t, Adapted::constant(&t, q(2, 1)), CashFlows::zero(&t)).unwrap();
        let r =
            rational_exercise_times(&t, &ZeroGenerator, &c, &Rational::zero(), &Benchmark::zero_rate(), 1000).unwrap();
        assert_eq!(r.members.unwrap().len(), 5);
    }

    #[test]
    fn budget_refusal_keeps_endpoints() {
        let (t, c) = scenario_a();
        let r = rational_exercise_times(&t, &ZeroGenerator, &c, &Rational::zero(), &Benchmark::zero_rate(), 3).unwrap();
        assert!(r.members.is_none());
        assert_eq!(r.refused_count, Some(5));
        assert_eq!(r.latest.time, StoppingTime::at_horizon(&t));
    }
}
