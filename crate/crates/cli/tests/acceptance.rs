//! Acceptance criteria over the built-in fixture suite. Each criterion prints
//! one `criterion N: PASS|FAIL` line and the run exits non-zero if any fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rbsde_cli::commands::{self, verify_model, CoreSolver, Format, SideArg, Suite, FAST_SUITE_MAX_DEPTH};
use rbsde_cli::registry::GeneratorRegistry;
use rbsde_cli::report::{to_json, VerifyDoc};
use rbsde_cli::suite;
use rbsde_cli::{LoadedScenario, Mode, Scenario};
use rbsde_core::evaluation::check_one_step_monotonicity;
use rbsde_core::pricing::{price_contract, rational_exercise_times};
use rbsde_core::{NodeId, Rational, Scalar, StoppingTime};

const SUITE_BUDGET: Duration = Duration::from_secs(60);

#[derive(Default)]
struct Criterion {
    checked: usize,
    failures: Vec<String>,
}

impl Criterion {
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

struct Ledger {
    criteria: BTreeMap<u8, Criterion>,
}

impl Ledger {
    fn new() -> Self {
        Ledger { criteria: (1..=10).map(|i| (i, Criterion::default())).collect() }
    }

    fn get(&mut self, id: u8) -> &mut Criterion {
        self.criteria.get_mut(&id).expect("criterion id")
    }

    /// Every named check must be present in the report and pass.
    fn require(&mut self, id: u8, doc: &VerifyDoc, names: &[&str]) {
        for name in names {
            let c = self.get(id);
            match doc.checks.iter().find(|k| k.name == *name) {
                Some(k) => {
                    c.expect(k.pass, || format!("{}: {name} expected {} got {}", doc.scenario, k.expected, k.got))
                }
                None => {
                    let why = doc
                        .skipped
                        .iter()
                        .find(|s| s.name == *name)
                        .map_or("absent".to_string(), |s| format!("skipped: {}", s.reason));
                    c.expect(false, || format!("{}: {name} {why}", doc.scenario));
                }
            }
        }
    }

    /// Exact comparison in rational mode, the float tolerance otherwise.
    fn require_tolerance(&mut self, id: u8, doc: &VerifyDoc, names: &[&str]) {
        let expected = if doc.mode == "rational" { 0.0 } else { 1e-9 };
        for name in names {
            if let Some(k) = doc.checks.iter().find(|k| k.name == *name) {
                let tol = k.tolerance;
                self.get(id).expect(tol == expected, || format!("{}: {name} ran at tolerance {tol}", doc.scenario));
            }
        }
    }
}

fn verify_doc(s: &Scenario, suite: Suite) -> VerifyDoc {
    let loaded = LoadedScenario::from_scenario(s.clone());
    match s.mode {
        Mode::Rational => {
            let m = loaded.model::<Rational>(&GeneratorRegistry::builtin()).expect("model");
            verify_model(&m, s.mode, suite, &CoreSolver).expect("verify")
        }
        Mode::Float => {
            let m = loaded.model::<f64>(&GeneratorRegistry::builtin()).expect("model");
            verify_model(&m, s.mode, suite, &CoreSolver).expect("verify")
        }
    }
}

fn depth(s: &Scenario) -> usize {
    LoadedScenario::from_scenario(s.clone()).tree::<f64>().expect("tree").horizon()
}

fn nodes(tau: &StoppingTime) -> Vec<usize> {
    tau.nodes().iter().map(|n| n.0).collect()
}

fn scenario_a_ground_truth(c: &mut Criterion) {
    let m =
        LoadedScenario::from_scenario(suite::scenario_a()).model::<Rational>(&GeneratorRegistry::builtin()).unwrap();
    let r = price_contract(&m.tree, m.generator.as_ref(), &m.contract, &m.endowments, &m.benchmark).unwrap();
    let expected = Rational::ratio(76, 9);
    c.expect(r.p_issuer == expected, || format!("p_issuer {}", r.p_issuer));
    c.expect(r.p_holder == expected, || format!("p_holder {}", r.p_holder));
    let z0 = r.issuer_hedge.get(NodeId::ROOT)[0].clone();
    c.expect(z0 == Rational::ratio(-19, 45), || format!("issuer Z0 {z0}"));
    let z0 = r.holder_hedge.get(NodeId::ROOT)[0].clone();
    // The holder equation is the mirror image, so its hedge flips sign.
    c.expect(z0 == Rational::ratio(19, 45), || format!("holder Z0 {z0}"));
    let zero = Rational::zero();
    c.expect(r.issuer.dk.values().iter().all(|d| *d == zero), || "issuer reflection not identically zero".into());
    c.expect(r.holder.dk.values().iter().all(|d| *d == zero), || "holder reflection not identically zero".into());
    let re =
        rational_exercise_times(&m.tree, m.generator.as_ref(), &m.contract, &m.endowments.x2, &m.benchmark, m.budget)
            .unwrap();
    let members = re.members.unwrap_or_default();
    c.expect(members.len() == 2, || format!("{} rational exercise times", members.len()));
    c.expect(nodes(&re.earliest) == [1, 5, 6], || format!("earliest {:?}", nodes(&re.earliest)));
    let horizon = StoppingTime::at_horizon(&m.tree);
    c.expect(re.latest.time == horizon, || format!("latest {:?}", nodes(&re.latest.time)));
    c.expect(members.contains(&re.earliest) && members.contains(&horizon), || {
        "earliest or horizon not rational".into()
    });
}

fn non_monotone_refused(c: &mut Criterion) {
    let s = suite::non_monotone();
    let loaded = LoadedScenario::from_scenario(s.clone());
    let m = loaded.model::<Rational>(&GeneratorRegistry::builtin()).unwrap();
    c.expect(!check_one_step_monotonicity(&m.tree, m.generator.as_ref()), || {
        "non-monotone tree passed the check".into()
    });
    let doc = verify_doc(&s, Suite::Full);
    c.expect(!doc.comparison_verified, || "verify report claims comparison".into());
    let refused = doc.skipped.iter().any(|k| k.name == "comparison.sampled_pairs");
    c.expect(refused, || "comparison.sampled_pairs was not refused".into());
    let price = commands::price(&loaded, SideArg::Both, Format::Json).unwrap();
    c.expect(price.text.contains("\"comparison_verified\": false"), || "price report not flagged".into());
}

fn main() {
    let started = Instant::now();
    let mut ledger = Ledger::new();
    let fixtures = suite::fixtures();
    let mut first_runs = Vec::new();

    for s in &fixtures {
        let d = depth(s);
        let doc = verify_doc(s, Suite::Full);
        let linear = doc.checks.iter().any(|k| k.name == "prices.linear_coincidence");
        ledger.get(8).expect(doc.comparison_verified, || format!("{}: fixture is not one-step monotone", s.name));

        ledger.require(
            1,
            &doc,
            &["issuer.sup_over_stopping_times", "issuer.min_superhedge_cost", "issuer.first_contact_optimal"],
        );
        ledger.require_tolerance(1, &doc, &["issuer.sup_over_stopping_times", "issuer.min_superhedge_cost"]);
        ledger.require(
            2,
            &doc,
            &["holder.inf_over_stopping_times", "holder.min_cost_over_tau", "holder.first_contact_optimal"],
        );
        ledger.require_tolerance(2, &doc, &["holder.inf_over_stopping_times", "holder.min_cost_over_tau"]);
        ledger.require(4, &doc, &["prices.issuer_not_below_holder"]);
        if linear {
            ledger.require(4, &doc, &["prices.linear_coincidence"]);
        }
        let price = commands::price(&LoadedScenario::from_scenario(s.clone()), SideArg::Both, Format::Json).unwrap();
        let report: serde_json::Value = serde_json::from_str(&price.text).unwrap();
        let (p_i, p_h) = (report["p_issuer"].as_f64().unwrap(), report["p_holder"].as_f64().unwrap());
        let c = ledger.get(4);
        c.expect(report["wedge"].is_number(), || format!("{}: price report lacks the wedge", s.name));
        if linear && s.mode == Mode::Rational {
            let (a, b) = (&report["exact"]["p_issuer"], &report["exact"]["p_holder"]);
            c.expect(a.is_string() && a == b, || format!("{}: exact prices {a} and {b} differ", s.name));
        } else if linear {
            c.expect((p_i - p_h).abs() <= 1e-10, || format!("{}: |p_i - p_h| = {:e}", s.name, (p_i - p_h).abs()));
        } else {
            c.expect(p_i >= p_h - 1e-12, || format!("{}: p_i {p_i} below p_h {p_h}", s.name));
        }
        if d <= FAST_SUITE_MAX_DEPTH {
            ledger.require(5, &doc, &["break_even.five_way"]);
            ledger.require(9, &doc, &["interval.issuer", "interval.holder"]);
        }
        ledger.require(
            6,
            &doc,
            &[
                "rational_exercise.set",
                "rational_exercise.earliest_is_first_contact",
                "rational_exercise.members_optimal",
            ],
        );
        // Emitted only when the holder reflection vanishes identically.
        if doc.checks.iter().any(|k| k.name == "rational_exercise.latest_is_horizon") {
            ledger.require(6, &doc, &["rational_exercise.latest_is_horizon"]);
        }
        ledger.require(8, &doc, &["comparison.sampled_pairs", "forward_monotonicity.sampled"]);
        ledger.get(8).expect(doc.samples >= 1000, || format!("{}: only {} samples", s.name, doc.samples));

        // Replication is checked exactly on every fixture, float fixtures included.
        if s.mode == Mode::Rational {
            ledger.require(7, &doc, &["issuer.replication", "holder.replication"]);
        } else {
            let mut exact = s.clone();
            exact.mode = Mode::Rational;
            let doc = verify_doc(&exact, Suite::Fast);
            ledger.require(7, &doc, &["issuer.replication", "holder.replication"]);
        }
        first_runs.push(to_json(&doc));
    }
    let elapsed = started.elapsed();
    ledger.get(1).expect(elapsed < SUITE_BUDGET, || format!("suite took {elapsed:?}"));

    scenario_a_ground_truth(ledger.get(3));
    non_monotone_refused(ledger.get(8));

    for (s, first) in fixtures.iter().zip(&first_runs).filter(|(s, _)| depth(s) <= 3) {
        let second = commands::verify(&LoadedScenario::from_scenario(s.clone()), Suite::Full).unwrap().text;
        ledger.get(10).expect(*first == second, || format!("{}: verify output differs between runs", s.name));
    }
    for s in [suite::scenario_a(), suite::scenario_b()] {
        let bin = env!("CARGO_BIN_EXE_rbsde");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
        let run =
            || std::process::Command::new(bin).args(["verify", "--suite", "full"]).arg(&path).output().unwrap().stdout;
        let (a, b) = (run(), run());
        ledger.get(10).expect(!a.is_empty() && a == b, || format!("{}: binary output differs between runs", s.name));
    }

    let titles = [
        "issuer price equals sup over stopping times and the minimal superhedging cost",
        "holder price equals inf over stopping times and the minimal cost over stopping times",
        "scenario A ground truth",
        "linear coincidence and nonnegative wedge",
        "five break-even characterizations agree",
        "rational exercise set, earliest and latest times",
        "replication of both prices",
        "comparison on sampled pairs, non-monotone tree refused",
        "fair-price interval flips at the price",
        "verify output is byte-identical across runs",
    ];
    let mut all = true;
    println!("acceptance over {} fixtures in {:.2?}", fixtures.len(), elapsed);
    for (id, c) in &ledger.criteria {
        let pass = c.failures.is_empty() && c.checked > 0;
        all &= pass;
        let title = titles[usize::from(*id) - 1];
        println!("criterion {id}: {} {title} ({} assertions)", if pass { "PASS" } else { "FAIL" }, c.checked);
        for f in &c.failures {
            println!("    {f}");
        }
    }
    if !all {
        eprintln!("some acceptance criteria failed");
        std::process::exit(1);
    }
}
