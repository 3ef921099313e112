//! The built-in scenario suite used by the acceptance tests.

use std::collections::BTreeMap;

use crate::num::Num;
use crate::scenario::{
    BenchmarkSpec, BinomialSpec, ContractDoc, EndowmentDoc, GeneratorSpec, Mode, ProcessSpec, Scenario, Tolerances,
    TreeSpec,
};

/// Deepest tree solved in rational mode; deeper fixtures run in float mode.
pub const RATIONAL_MAX_DEPTH: usize = 4;

pub fn binomial(s0: i64, up: &str, down: &str, steps: usize) -> TreeSpec {
    TreeSpec::Binomial(BinomialSpec {
        s0: Num::from(s0),
        up: Num::from(up),
        down: Num::from(down),
        steps,
        maturity: Num::from(1),
        prob_up: Num::from("1/2"),
    })
}

pub fn generator(name: &str, params: &[(&str, &str)]) -> GeneratorSpec {
    GeneratorSpec {
        name: name.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), Num::from(*v))).collect::<BTreeMap<_, _>>(),
    }
}

pub fn expr(src: &str) -> ProcessSpec {
    ProcessSpec::Expr(src.to_string())
}

pub fn scenario(name: &str, tree: TreeSpec, gen: GeneratorSpec, payoff: &str, flows: Option<&str>) -> Scenario {
    Scenario {
        name: name.to_string(),
        description: None,
        mode: Mode::Rational,
        tree,
        generator: gen,
        contract: ContractDoc { payoff: expr(payoff), flows: flows.map(expr) },
        benchmark: BenchmarkSpec::default(),
        endowments: EndowmentDoc::default(),
        tolerances: Tolerances::default(),
        budget: None,
        seed: 7,
        samples: 1000,
    }
}

/// Two-step put: `S0 = 100`, `u = 1.2`, `d = 0.9`, `g = 0`, strike 100.
pub fn scenario_a() -> Scenario {
    scenario("scenario-a", binomial(100, "1.2", "0.9", 2), generator("zero", &[]), "-max(100 - S, 0)", None)
}

/// Scenario A under differential rates 1% / 5%.
pub fn scenario_b() -> Scenario {
    let mut s = scenario_a();
    s.name = "scenario-b".into();
    s.generator = generator("funding", &[("r_lend", "0.01"), ("r_borrow", "0.05")]);
    s
}

/// Both children above the root price: strict comparison fails.
pub fn non_monotone() -> Scenario {
    let mut s = scenario_a();
    s.name = "non-monotone".into();
    s.tree = binomial(100, "1.3", "1.1", 2);
    s
}

/// Obstacle `10 - k` for the issuer: the solution sits on it and reflects every step.
pub fn decreasing_obstacle() -> Scenario {
    scenario("decreasing-obstacle", binomial(100, "1.2", "0.9", 3), generator("zero", &[]), "k - 10", None)
}

pub fn constant_obstacle() -> Scenario {
    scenario("constant-obstacle", binomial(100, "1.2", "0.9", 3), generator("zero", &[]), "-5", None)
}

pub fn zero_contract() -> Scenario {
    scenario("zero-contract", binomial(100, "1.2", "0.9", 2), generator("zero", &[]), "0", None)
}

/// At least twenty fixtures of depth at most five mixing generators, payoffs and cash flows.
pub fn fixtures() -> Vec<Scenario> {
    let gens = [
        ("zero", generator("zero", &[])),
        ("linear", generator("linear", &[("rate", "0.03")])),
        ("funding", generator("funding", &[("r_lend", "0.01"), ("r_borrow", "0.06")])),
    ];
    let payoffs = [("put", "-max(100 - S, 0)"), ("call", "-max(S - 100, 0)"), ("digital", "-10 * (S >= 100)")];
    let flows = [("noflow", None), ("coupon", Some("-0.5 * (k > 0)"))];
    let trees = [("1.2", "0.9"), ("1.1", "0.95"), ("1.25", "0.85")];
    let mut out = Vec::new();
    let mut i = 0;
    for (gname, g) in &gens {
        for (pname, payoff) in &payoffs {
            for (fname, flow) in &flows {
                let depth = 2 + i % 4;
                let (up, down) = trees[i % trees.len()];
                let name = format!("{gname}-{pname}-{fname}-d{depth}");
                let mut s = scenario(&name, binomial(100, up, down, depth), g.clone(), payoff, *flow);
                if depth > RATIONAL_MAX_DEPTH {
                    s.mode = Mode::Float;
                }
                out.push(s);
                i += 1;
            }
        }
    }
    let mut extra = vec![
        scenario_a(),
        scenario_b(),
        decreasing_obstacle(),
        constant_obstacle(),
        scenario(
            "lookback-funding-d3",
            binomial(100, "1.15", "0.9", 3),
            generator("funding", &[("r_lend", "0.02"), ("r_borrow", "0.08")]),
            "-(path_max - S)",
            Some("0.25 * (k == 1)"),
        ),
        scenario(
            "american-put-discount-d4",
            binomial(100, "1.1", "0.9", 4),
            generator("discount", &[("rate", "0.1")]),
            "-max(110 - S, 0)",
            None,
        ),
        scenario(
            "put-zero-d5",
            binomial(100, "1.2", "0.9", 5),
            generator("zero", &[]),
            "-max(100 - S, 0)",
            Some("-0.2 * (k > 0)"),
        ),
    ];
    extra.last_mut().expect("non-empty").mode = Mode::Float;
    let mut d4 =
        scenario("funding-put-d4", binomial(100, "1.2", "0.9", 4), gens[2].1.clone(), "-max(105 - S, 0)", None);
    d4.endowments = EndowmentDoc { x1: Num::from(3), x2: Num::from("-2") };
    d4.benchmark = BenchmarkSpec::Rates { r_lend: Num::from("0.01"), r_borrow: Num::from("0.06") };
    extra.push(d4);
    out.extend(extra);
    out
}
