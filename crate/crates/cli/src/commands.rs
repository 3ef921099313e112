//! `price`, `verify` and `exercise`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbsde_core::evaluation::{check_one_step_monotonicity, compare_with, evaluate, Comparison, Stepper};
use rbsde_core::generators::{forward_wealth, verify_forward_monotonicity, CashFlows, Generator};
use rbsde_core::lattice::{count_stopping_times, StoppingFamily};
use rbsde_core::oracle::{
    check_superhedge_logic, holder_min_cost_over_tau, inf_over_stopping_times, min_superhedge_cost, probe_grid,
    sup_over_stopping_times, verify_interval_structure, PriceSide,
};
use rbsde_core::pricing::{
    holder_relative_reward, is_rational_exercise_time, issuer_relative_reward, price_contract, rational_exercise_times,
    BreakEvenClassifier, BreakEvenFlags,
};
use rbsde_core::reflected::{
    contact_tolerance, first_contact_time, latest_exercise_time, solve_reflected, RbsdeSolution, Side,
};
use rbsde_core::{Adapted, Error, EventTree, NodeId, Predictable, Rational, Scalar, StoppingTime};

use crate::error::{exit, CliResult};
use crate::registry::GeneratorRegistry;
use crate::report::{
    exact, stop_set, to_json, write_csv, Check, ExerciseDoc, ExerciseRow, Flags, HolderSide, IssuerSide, PriceDoc,
    Skipped, VerifyDoc, SETTLEMENT_NOTE,
};
use crate::scenario::{LoadedScenario, Mode, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SideArg {
    Issuer,
    Holder,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Full,
    Fast,
}

/// Depth above which the fast suite skips enumeration and probes.
pub const FAST_SUITE_MAX_DEPTH: usize = 4;
/// Depth above which sampled superhedging-logic checks are skipped.
pub const LOGIC_CHECK_MAX_DEPTH: usize = 3;
pub const PROBE_COUNT: usize = 11;

/// Rendered command output and its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    pub exit: i32,
}

/// Source of reflected solutions for `verify`. Swappable so a deliberately
/// broken solver can serve as a negative control.
pub trait ReflectedSolver<S: Scalar> {
    fn solve(
        &self,
        tree: &EventTree<S>,
        gen: &dyn Generator<S>,
        flows: &CashFlows<S>,
        obstacle: &Adapted<S>,
        side: Side,
    ) -> rbsde_core::Result<RbsdeSolution<S>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CoreSolver;

impl<S: Scalar> ReflectedSolver<S> for CoreSolver {
    fn solve(
        &self,
        tree: &EventTree<S>,
        gen: &dyn Generator<S>,
        flows: &CashFlows<S>,
        obstacle: &Adapted<S>,
        side: Side,
    ) -> rbsde_core::Result<RbsdeSolution<S>> {
        solve_reflected(tree, gen, flows, obstacle, side)
    }
}

// ---------------------------------------------------------------- price

pub fn price(loaded: &LoadedScenario, side: SideArg, format: Format) -> CliResult<Output> {
    match loaded.scenario.mode {
        Mode::Rational => price_in::<Rational>(loaded, side, format),
        Mode::Float => price_in::<f64>(loaded, side, format),
    }
}

fn price_in<S: Scalar + 'static>(loaded: &LoadedScenario, side: SideArg, format: Format) -> CliResult<Output> {
    let m = loaded.model::<S>(&GeneratorRegistry::builtin())?;
    let r = price_contract(&m.tree, m.generator.as_ref(), &m.contract, &m.endowments, &m.benchmark)?;
    let show_issuer = side != SideArg::Holder;
    let show_holder = side != SideArg::Issuer;
    let tol = contact_tolerance::<S>();
    if format == Format::Csv {
        let mut sides = Vec::new();
        if show_issuer {
            sides.push(("issuer", &r.issuer));
        }
        if show_holder {
            sides.push(("holder", &r.holder));
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &m.tree, &sides, &tol)?;
        return Ok(Output { text: String::from_utf8(buf).expect("csv is utf-8"), exit: exit::OK });
    }
    let f = |v: &S| v.to_f64();
    let mut exact_vals = std::collections::BTreeMap::new();
    if S::EXACT {
        if show_issuer {
            exact_vals.insert("p_issuer".to_string(), exact(&r.p_issuer));
        }
        if show_holder {
            exact_vals.insert("p_holder".to_string(), exact(&r.p_holder));
        }
        if show_issuer && show_holder {
            exact_vals.insert("wedge".to_string(), exact(&r.wedge()));
        }
    }
    let both = show_issuer && show_holder;
    let (lo, hi) = r.fair_interval();
    let doc = PriceDoc {
        scenario: m.name.clone(),
        mode: loaded.scenario.mode.as_str(),
        side: match side {
            SideArg::Issuer => "issuer",
            SideArg::Holder => "holder",
            SideArg::Both => "both",
        },
        generator: m.generator.label(),
        horizon: m.tree.horizon(),
        nodes: m.tree.len(),
        p_issuer: show_issuer.then(|| f(&r.p_issuer)),
        p_holder: show_holder.then(|| f(&r.p_holder)),
        wedge: both.then(|| f(&r.wedge())),
        fair_interval: both.then(|| [f(&lo), f(&hi)]),
        exact: exact_vals,
        comparison_verified: r.comparison_verified,
        issuer: show_issuer.then(|| IssuerSide {
            price: f(&r.p_issuer),
            y0: f(r.issuer.y0()),
            z0: r.issuer_hedge.get(NodeId::ROOT).iter().map(f).collect(),
            total_reflection: f(&r.issuer_total_reflection),
            earliest_exercise: stop_set(&r.tau_issuer_earliest),
        }),
        holder: show_holder.then(|| HolderSide {
            price: f(&r.p_holder),
            y0: f(r.holder.y0()),
            z0: r.holder_hedge.get(NodeId::ROOT).iter().map(f).collect(),
            total_reflection: f(&r.holder_total_reflection),
            earliest_exercise: stop_set(&r.tau_holder_earliest),
            latest_exercise: stop_set(&r.tau_holder_latest),
            latest_caveat: r.holder_latest_caveat,
            latest_rational: stop_set(&r.tau_holder_latest_rational),
        }),
        settlement: SETTLEMENT_NOTE,
    };
    Ok(Output { text: to_json(&doc), exit: exit::OK })
}

// ---------------------------------------------------------------- verify

pub fn verify(loaded: &LoadedScenario, suite: Suite) -> CliResult<Output> {
    match loaded.scenario.mode {
        Mode::Rational => verify_with::<Rational>(loaded, suite, &CoreSolver),
        Mode::Float => verify_with::<f64>(loaded, suite, &CoreSolver),
    }
}

pub fn verify_with<S: Scalar + 'static>(
    loaded: &LoadedScenario,
    suite: Suite,
    solver: &dyn ReflectedSolver<S>,
) -> CliResult<Output> {
    let m = loaded.model::<S>(&GeneratorRegistry::builtin())?;
    let doc = verify_model(&m, loaded.scenario.mode, suite, solver)?;
    let exit = if doc.passed { exit::OK } else { exit::CHECKS_FAILED };
    Ok(Output { text: to_json(&doc), exit })
}

struct Checks<S: Scalar> {
    tol: S,
    /// One-step monotonicity holds, so the pricing identities are owed.
    premises: bool,
    checks: Vec<Check>,
    skipped: Vec<Skipped>,
}

impl<S: Scalar> Checks<S> {
    fn close(&mut self, name: &str, expected: &S, got: &S) {
        let pass = got.approx_eq(expected, &self.tol);
        self.push(name, exact(expected), exact(got), pass);
    }

    fn count(&mut self, name: &str, violations: usize) {
        self.push(name, "0 violations".into(), format!("{violations} violations"), violations == 0);
    }

    /// Like `close`, but a mismatch without the comparison premises is
    /// recorded as a skip carrying the oracle's value.
    fn owed_close(&mut self, name: &str, expected: &S, got: &S) {
        if self.premises || got.approx_eq(expected, &self.tol) {
            self.close(name, expected, got);
        } else {
            self.skip(name, format!("{UNVERIFIED}; solver {expected}, oracle {got}"));
        }
    }

    fn flag(&mut self, name: &str, expected: &str, got: String, pass: bool) {
        self.push(name, expected.into(), got, pass);
    }

    fn push(&mut self, name: &str, expected: String, got: String, pass: bool) {
        self.checks.push(Check { name: name.into(), expected, got, tolerance: self.tol.to_f64(), pass });
    }

    fn skip(&mut self, name: &str, reason: impl Into<String>) {
        self.skipped.push(Skipped { name: name.into(), reason: reason.into() });
    }

    /// Records `err` as a skip when it is an enumeration refusal or an
    /// unsupported tree shape, as a failed check otherwise.
    fn handle(&mut self, name: &str, err: Error) {
        match err {
            Error::BudgetExceeded { count, budget } => self.skip(name, refusal_text(count, budget)),
            e @ (Error::InvalidParameter(_) | Error::Representation { .. } | Error::NoClosedForm(_)) => {
                self.skip(name, e.to_string())
            }
            e if !self.premises => self.skip(name, format!("{UNVERIFIED}; oracle: {e}")),
            e => self.flag(name, "ok", e.to_string(), false),
        }
    }
}

const UNVERIFIED: &str = "one-step monotonicity fails, so the pricing identities are not owed";

pub fn refusal_text(count: u128, budget: u128) -> String {
    if count == u128::MAX {
        format!("enumeration refused: more than 2^128 stopping times exceed the budget {budget}")
    } else {
        format!("enumeration refused: {count} stopping times exceed the budget {budget}")
    }
}

fn cumulative_k<S: Scalar>(tree: &EventTree<S>, dk: &Adapted<S>) -> Vec<S> {
    let mut k = vec![S::zero(); tree.len()];
    for n in tree.ids() {
        if let Some(p) = tree.node(n).parent {
            k[n.0] = k[p.0].clone() + dk[p].clone();
        }
    }
    k
}

/// Node-level violations of the reflected equation's defining conditions.
fn structure_violations<S: Scalar>(tree: &EventTree<S>, sol: &RbsdeSolution<S>, upper: bool, tol: &S) -> usize {
    let zero = S::zero();
    let mut bad = 0;
    for n in tree.ids() {
        let (y, x, dk) = (&sol.y[n], &sol.obstacle[n], &sol.dk[n]);
        let dominated = if upper { x.approx_ge(y, tol) } else { y.approx_ge(x, tol) };
        let terminal = !tree.is_leaf(n) || y.approx_eq(x, tol);
        let increment = dk.approx_ge(&zero, tol);
        let skorokhod = dk.approx_eq(&zero, tol) || y.approx_eq(x, tol);
        bad += [dominated, terminal, increment, skorokhod].iter().filter(|ok| !**ok).count();
    }
    bad
}

/// Forward wealth from the solution's initial value and hedge: on the
/// dominated side everywhere and equal to the obstacle on the first contact set.
fn replication_violations<S: Scalar>(
    tree: &EventTree<S>,
    gen: &dyn Generator<S>,
    flows: &CashFlows<S>,
    sol: &RbsdeSolution<S>,
    upper: bool,
    tol: &S,
) -> usize {
    let v = forward_wealth(tree, sol.y0().clone(), &sol.z, flows, gen);
    let tau = first_contact_time(tree, sol, tol);
    let mut bad = 0;
    for n in tree.ids() {
        let x = &sol.obstacle[n];
        let ok = if upper { x.approx_ge(&v[n], tol) } else { v[n].approx_ge(x, tol) };
        bad += usize::from(!ok);
    }
    bad + tau.nodes().iter().filter(|&&n| !v[n].approx_eq(&sol.obstacle[n], tol)).count()
}

fn sample_strategy<S: Scalar>(tree: &EventTree<S>, rng: &mut ChaCha8Rng) -> Predictable<S> {
    Predictable::from_fn(tree, |_| (0..tree.dim()).map(|_| S::ratio(rng.random_range(-300..=300), 100)).collect())
}

pub fn verify_model<S: Scalar + 'static>(
    m: &Model<S>,
    mode: Mode,
    suite: Suite,
    solver: &dyn ReflectedSolver<S>,
) -> CliResult<VerifyDoc> {
    let tree = &m.tree;
    let gen = m.generator.as_ref();
    let flows = &m.contract.flows;
    let monotone = check_one_step_monotonicity(tree, gen);
    let mut c = Checks { tol: m.tolerance.clone(), premises: monotone, checks: Vec::new(), skipped: Vec::new() };
    let tol = m.tolerance.clone();
    let (x1, x2) = (&m.endowments.x1, &m.endowments.x2);
    let obstacle_i = issuer_relative_reward(&m.contract, &m.benchmark.wealth(tree, x1));
    let obstacle_h = holder_relative_reward(&m.contract, &m.benchmark.wealth(tree, x2));
    let holder_flows = flows.neg();
    let sol_i = solver.solve(tree, gen, flows, &obstacle_i, Side::Lower)?;
    let sol_h = solver.solve(tree, gen, &holder_flows, &obstacle_h, Side::Upper)?;
    let p_i = sol_i.y0().clone() - x1.clone();
    let p_h = x2.clone() - sol_h.y0().clone();
    let deep = tree.horizon() > FAST_SUITE_MAX_DEPTH && suite == Suite::Fast;

    c.count("issuer.rbsde_structure", structure_violations(tree, &sol_i, false, &tol));
    c.count("holder.rbsde_structure", structure_violations(tree, &sol_h, true, &tol));
    c.count("issuer.replication", replication_violations(tree, gen, flows, &sol_i, false, &tol));
    c.count("holder.replication", replication_violations(tree, gen, &holder_flows, &sol_h, true, &tol));
    if m.linear {
        c.close("prices.linear_coincidence", &p_i, &p_h);
    }
    let wedge = p_i.clone() - p_h.clone();
    c.flag("prices.issuer_not_below_holder", ">= 0", exact(&wedge), wedge.approx_ge(&S::zero(), &tol));

    let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
    let mut forward_bad = 0;
    for _ in 0..m.samples {
        let xi = sample_strategy(tree, &mut rng);
        let lo = S::ratio(rng.random_range(-1000..=1000), 10);
        let hi = lo.clone() + S::ratio(rng.random_range(1..=1000), 100);
        forward_bad += usize::from(!verify_forward_monotonicity(tree, gen, &xi, flows, lo, hi)?.holds);
    }
    c.count("forward_monotonicity.sampled", forward_bad);

    if monotone {
        let stepper = Stepper::new(tree, gen, flows)?;
        let horizon = StoppingTime::at_horizon(tree);
        let mut violations = 0;
        for _ in 0..m.samples {
            let low = Adapted::from_fn(tree, |_| S::ratio(rng.random_range(-5000..=5000), 100));
            let high = Adapted::from_fn(tree, |n| low[n].clone() + S::ratio(rng.random_range(0..=500), 100));
            if let Comparison::Violated(_) = compare_with(&stepper, &horizon, &high, &low)? {
                violations += 1;
            }
        }
        c.count("comparison.sampled_pairs", violations);
    } else {
        c.skip(
            "comparison.sampled_pairs",
            "one-step monotonicity fails: comparison refused, prices flagged comparison_unverified",
        );
    }

    match min_superhedge_cost(tree, gen, flows, &obstacle_i) {
        Ok(cost) => c.owed_close("issuer.min_superhedge_cost", &p_i, &(cost - x1.clone())),
        Err(e) => c.handle("issuer.min_superhedge_cost", e),
    }

    if deep {
        for name in [
            "issuer.sup_over_stopping_times",
            "holder.inf_over_stopping_times",
            "holder.min_cost_over_tau",
            "break_even.five_way",
            "rational_exercise.set",
            "superhedge_logic.sampled",
            "interval.issuer",
            "interval.holder",
        ] {
            c.skip(name, format!("fast suite skips enumeration above depth {FAST_SUITE_MAX_DEPTH}"));
        }
    } else {
        enumeration_checks(m, &mut c, &sol_i, &sol_h, &p_i, &p_h, monotone, &mut rng)?;
    }

    let passed = c.checks.iter().all(|k| k.pass);
    Ok(VerifyDoc {
        scenario: m.name.clone(),
        mode: mode.as_str(),
        suite: match suite {
            Suite::Full => "full",
            Suite::Fast => "fast",
        },
        seed: m.seed,
        samples: m.samples,
        budget: m.budget.to_string(),
        comparison_verified: monotone,
        checks: c.checks,
        skipped: c.skipped,
        passed,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumeration_checks<S: Scalar + 'static>(
    m: &Model<S>,
    c: &mut Checks<S>,
    sol_i: &RbsdeSolution<S>,
    sol_h: &RbsdeSolution<S>,
    p_i: &S,
    p_h: &S,
    monotone: bool,
    rng: &mut ChaCha8Rng,
) -> CliResult<()> {
    let tree = &m.tree;
    let gen = m.generator.as_ref();
    let flows = &m.contract.flows;
    let holder_flows = flows.neg();
    let tol = m.tolerance.clone();
    let (x1, x2) = (&m.endowments.x1, &m.endowments.x2);

    match sup_over_stopping_times(tree, gen, flows, &sol_i.obstacle, m.budget) {
        Ok(sup) => {
            c.close("issuer.sup_over_stopping_times", sol_i.y0(), &sup.value);
            let tau = first_contact_time(tree, sol_i, &tol);
            let found = sup.optimizers.contains(&tau);
            c.flag("issuer.first_contact_optimal", "true", found.to_string(), found);
        }
        Err(e) => c.handle("issuer.sup_over_stopping_times", e),
    }
    match inf_over_stopping_times(tree, gen, &holder_flows, &sol_h.obstacle, m.budget) {
        Ok(inf) => {
            c.close("holder.inf_over_stopping_times", sol_h.y0(), &inf.value);
            let tau = first_contact_time(tree, sol_h, &tol);
            let found = inf.optimizers.contains(&tau);
            c.flag("holder.first_contact_optimal", "true", found.to_string(), found);
        }
        Err(e) => c.handle("holder.inf_over_stopping_times", e),
    }
    match holder_min_cost_over_tau(tree, gen, &holder_flows, &sol_h.obstacle, m.budget) {
        Ok(best) => c.owed_close("holder.min_cost_over_tau", p_h, &(x2.clone() - best.value)),
        Err(e) => c.handle("holder.min_cost_over_tau", e),
    }

    let family = match StoppingFamily::build(tree, 0, m.budget) {
        Ok(f) => Some(f),
        Err(e) => {
            for name in ["break_even.five_way", "rational_exercise.set", "superhedge_logic.sampled"] {
                c.handle(name, e.clone());
            }
            None
        }
    };
    if let Some(family) = &family {
        if monotone {
            let classified = BreakEvenClassifier::new(tree, gen, &m.contract, x1, &m.benchmark)
                .and_then(|cl| cl.classify_all(family));
            match classified {
                Ok(flags) => c.count("break_even.five_way", flags.iter().filter(|f| !f.all_agree()).count()),
                Err(e) => c.flag("break_even.five_way", "all five characterizations agree", e.to_string(), false),
            }
        } else {
            c.skip("break_even.five_way", "one-step monotonicity fails: the characterizations need not agree");
        }

        match rational_exercise_times(tree, gen, &m.contract, x2, &m.benchmark, m.budget) {
            Ok(re) => {
                let sol = &re.holder.solution;
                let k = cumulative_k(tree, &sol.dk);
                let zero = S::zero();
                let expected: BTreeSet<StoppingTime> = family
                    .iter()
                    .filter(|tau| {
                        tau.nodes()
                            .iter()
                            .all(|&n| sol.y[n].approx_eq(&sol.obstacle[n], &tol) && k[n.0].approx_eq(&zero, &tol))
                    })
                    .collect();
                let got: BTreeSet<StoppingTime> = re.members.clone().unwrap_or_default().into_iter().collect();
                c.flag(
                    "rational_exercise.set",
                    &format!("{} members", expected.len()),
                    format!("{} members", got.len()),
                    expected == got,
                );
                let earliest_ok = got.contains(&re.earliest) && re.earliest == first_contact_time(tree, sol, &tol);
                c.flag("rational_exercise.earliest_is_first_contact", "true", earliest_ok.to_string(), earliest_ok);
                let mut not_optimal = 0;
                for tau in &got {
                    let v = evaluate(tree, gen, &holder_flows, tau, &sol.obstacle)?;
                    not_optimal += usize::from(!v.approx_eq(sol.y0(), &tol));
                }
                c.count("rational_exercise.members_optimal", not_optimal);
                if k.iter().all(|v| v.approx_eq(&zero, &tol)) {
                    let horizon = StoppingTime::at_horizon(tree);
                    let ok = re.latest.time == horizon && got.contains(&horizon);
                    c.flag("rational_exercise.latest_is_horizon", "true", ok.to_string(), ok);
                }
            }
            Err(e) => c.handle("rational_exercise.set", e),
        }

        if tree.horizon() <= LOGIC_CHECK_MAX_DEPTH {
            let strategies: Vec<Predictable<S>> = (0..m.samples).map(|_| sample_strategy(tree, rng)).collect();
            let mut violations = 0;
            for shift in [-1, 0, 1] {
                let p = p_i.clone() + S::from_int(shift);
                let r = check_superhedge_logic(tree, gen, &m.contract, x1, &m.benchmark, &p, &strategies, m.budget)?;
                violations += r.violations_na_implies_be + r.violations_missing_na;
            }
            c.count("superhedge_logic.sampled", violations);
        } else {
            c.skip("superhedge_logic.sampled", format!("sampled only on trees of depth <= {LOGIC_CHECK_MAX_DEPTH}"));
        }
    }

    for (name, side, endowment, boundary) in
        [("interval.issuer", PriceSide::Issuer, x1, p_i), ("interval.holder", PriceSide::Holder, x2, p_h)]
    {
        let probes = probe_grid(boundary, PROBE_COUNT);
        match verify_interval_structure(tree, gen, &m.contract, endowment, &m.benchmark, side, &probes, m.budget) {
            Ok(r) => {
                let fair = r.probes.iter().filter(|p| p.fair).count();
                let pass = r.boundary.approx_eq(boundary, &tol) && r.oracle_boundary.approx_eq(boundary, &tol);
                let got = format!("flip at {} ({fair}/{} probes fair)", exact(&r.oracle_boundary), r.probes.len());
                if pass || c.premises {
                    c.flag(name, &format!("flip at {}", exact(boundary)), got, pass);
                } else {
                    c.skip(name, format!("{UNVERIFIED}; {got}"));
                }
            }
            Err(e) => c.handle(name, e),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- exercise

pub fn exercise(loaded: &LoadedScenario) -> CliResult<Output> {
    match loaded.scenario.mode {
        Mode::Rational => exercise_in::<Rational>(loaded),
        Mode::Float => exercise_in::<f64>(loaded),
    }
}

fn to_flags(f: &BreakEvenFlags) -> Flags {
    Flags {
        break_even: f.break_even,
        no_arbitrage: f.no_arbitrage,
        wealth_hits_obstacle: f.wealth_hits_obstacle,
        contact_without_reflection: f.contact_without_reflection,
        optimal: f.optimal,
    }
}

fn exercise_in<S: Scalar + 'static>(loaded: &LoadedScenario) -> CliResult<Output> {
    let m = loaded.model::<S>(&GeneratorRegistry::builtin())?;
    let doc = exercise_model(&m, loaded.scenario.mode)?;
    Ok(Output { text: to_json(&doc), exit: exit::OK })
}

pub fn exercise_model<S: Scalar + 'static>(m: &Model<S>, mode: Mode) -> CliResult<ExerciseDoc> {
    let tree = &m.tree;
    let gen = m.generator.as_ref();
    let tol = contact_tolerance::<S>();
    let classifier = BreakEvenClassifier::new(tree, gen, &m.contract, &m.endowments.x1, &m.benchmark)?;
    let re = rational_exercise_times(tree, gen, &m.contract, &m.endowments.x2, &m.benchmark, m.budget)?;
    let holder = &re.holder.solution;
    let issuer_earliest = first_contact_time(tree, &classifier.issuer().solution, &tol);
    let latest = latest_exercise_time(tree, holder, &tol);
    let row = |tau: StoppingTime, rational: bool, flags: &BreakEvenFlags| ExerciseRow {
        rational,
        flags: to_flags(flags),
        flags_agree: flags.all_agree(),
        issuer_earliest: tau == issuer_earliest,
        holder_earliest: tau == re.earliest,
        holder_latest: tau == latest.time,
        tau: stop_set(&tau),
    };
    let mut rows = Vec::new();
    let (enumerated, stopping_times, refusal) = match &re.members {
        Some(members) => {
            let family = StoppingFamily::build(tree, 0, m.budget)?;
            let members: BTreeSet<&StoppingTime> = members.iter().collect();
            let flags = classifier.classify_all(&family)?;
            for (i, f) in flags.iter().enumerate() {
                let tau = family.materialize(i);
                let rational = members.contains(&tau);
                if rational || f.break_even || tau == issuer_earliest || tau == latest.time {
                    rows.push(row(tau, rational, f));
                }
            }
            (true, Some(family.len().to_string()), None)
        }
        None => {
            let k = holder.cumulative_k(tree);
            let mut seen = BTreeSet::new();
            for tau in [issuer_earliest.clone(), re.earliest.clone(), latest.time.clone()] {
                if seen.insert(tau.clone()) {
                    let rational = is_rational_exercise_time(tree, holder, &k, &tau, &tol);
                    let f = classifier.classify(&tau)?;
                    rows.push(row(tau, rational, &f));
                }
            }
            let count = re.refused_count.unwrap_or_else(|| count_stopping_times(tree, 0));
            let reason = format!(
                "{}; only the earliest and latest times are listed. The latest time is the first node with positive \
                 cumulative reflection on each path, else maturity",
                refusal_text(count, m.budget)
            );
            (false, None, Some(reason))
        }
    };
    Ok(ExerciseDoc {
        scenario: m.name.clone(),
        mode: mode.as_str(),
        p_issuer: classifier.issuer().price.to_f64(),
        p_holder: re.holder.price.to_f64(),
        comparison_verified: classifier.issuer().comparison_verified,
        enumerated,
        stopping_times,
        refusal,
        issuer_earliest: stop_set(&issuer_earliest),
        holder_earliest: stop_set(&re.earliest),
        holder_latest: stop_set(&latest.time),
        holder_latest_caveat: latest.caveat,
        holder_latest_rational: stop_set(&latest.latest_rational),
        rows,
    })
}
