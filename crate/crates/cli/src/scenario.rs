//! Scenario files: everything needed to build one fully determined model.
//!
//! ```json
//! {
//!   "name": "scenario-a",
//!   "mode": "rational",
//!   "tree": { "binomial": { "s0": 100, "up": 1.2, "down": 0.9, "steps": 2 } },
//!   "generator": { "name": "zero" },
//!   "contract": { "payoff": { "expr": "-max(100 - S, 0)" } },
//!   "endowments": { "x1": 0, "x2": 0 }
//! }
//! ```
//!
//! `payoff` is the amount the issuer receives at exercise (negative when the
//! issuer pays) and `flows` the cash flow increment paid to the issuer at each
//! node before any exercise settlement. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rbsde_core::generators::{CashFlows, Endowments, Generator, RateSchedule};
use rbsde_core::lattice::DEFAULT_ENUMERATION_BUDGET;
use rbsde_core::pricing::{Benchmark, ContractSpec};
use rbsde_core::{Adapted, EventTree, Scalar};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::expr::Expr;
use crate::num::Num;
use crate::registry::GeneratorRegistry;
use crate::tree_io::TreeDoc;

/// Environment variable holding the default stopping-time enumeration budget.
pub const BUDGET_ENV: &str = "RBSDE_ENUM_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Rational,
    Float,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rational => "rational",
            Mode::Float => "float",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub tree: TreeSpec,
    #[serde(default)]
    pub generator: GeneratorSpec,
    pub contract: ContractDoc,
    #[serde(default)]
    pub benchmark: BenchmarkSpec,
    #[serde(default)]
    pub endowments: EndowmentDoc,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Stopping-time enumeration budget; falls back to `RBSDE_ENUM_BUDGET`, then 10^6.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Seed for sampled checks.
    #[serde(default)]
    pub seed: u64,
    /// Number of sampled strategies or terminal pairs per sampled check.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TreeSpec {
    Binomial(BinomialSpec),
    /// Path to a tree document, relative to the scenario file.
    File(PathBuf),
    Explicit(TreeDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialSpec {
    pub s0: Num,
    pub up: Num,
    pub down: Num,
    pub steps: usize,
    #[serde(default = "one")]
    pub maturity: Num,
    #[serde(default = "half")]
    pub prob_up: Num,
}

fn one() -> Num {
    Num::from("1")
}

fn half() -> Num {
    Num::from("1/2")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Num>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec { name: "zero".into(), params: BTreeMap::new() }
    }
}

/// A process given as an expression or as one value per node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProcessSpec {
    Expr(String),
    Table(Vec<Num>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDoc {
    pub payoff: ProcessSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<ProcessSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum BenchmarkSpec {
    Rates { r_lend: Num, r_borrow: Num },
    Process(ProcessSpec),
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec::Rates { r_lend: Num::from(0), r_borrow: Num::from(0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndowmentDoc {
    #[serde(default = "zero")]
    pub x1: Num,
    #[serde(default = "zero")]
    pub x2: Num,
}

fn zero() -> Num {
    Num::from(0)
}

impl Default for EndowmentDoc {
    fn default() -> Self {
        EndowmentDoc { x1: zero(), x2: zero() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance of float-mode checks. Rational mode always uses zero.
    #[serde(default = "float_tol")]
    pub float: f64,
}

fn float_tol() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { float: float_tol() }
    }
}

/// A scenario together with the directory used to resolve relative paths.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

fn strip_location(msg: &str) -> &str {
    msg.find(" at line ").map_or(msg, |i| &msg[..i])
}

/// Parses a scenario document; `origin` names it in diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> CliResult<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = path.trim_end_matches(".?");
        let inner = e.into_inner();
        let msg = strip_location(&inner.to_string()).to_string();
        let message = if path == "." || path == "?" { msg } else { format!("{msg} (at {path})") };
        CliError::Syntax { path: origin.to_string(), line: inner.line(), column: inner.column(), message }
    })
}

pub fn load_scenario(path: &Path) -> CliResult<LoadedScenario> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let scenario = parse_scenario(&text, &path.display().to_string())?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedScenario { scenario, base_dir })
}

/// Budget from the scenario, else the environment, else the library default.
pub fn effective_budget(scenario: &Scenario) -> CliResult<u128> {
    if let Some(b) = scenario.budget {
        return Ok(b as u128);
    }
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse::<u128>().map_err(|_| CliError::invalid(BUDGET_ENV, format!("not a count: {v:?}"))),
        Err(_) => Ok(DEFAULT_ENUMERATION_BUDGET),
    }
}

/// A scenario resolved in one numeric mode.
pub struct Model<S: Scalar> {
    pub name: String,
    pub tree: EventTree<S>,
    pub generator: Box<dyn Generator<S>>,
    pub linear: bool,
    pub contract: ContractSpec<S>,
    pub endowments: Endowments<S>,
    pub benchmark: Benchmark<S>,
    pub budget: u128,
    pub tolerance: S,
    pub seed: u64,
    pub samples: usize,
}

fn num<S: Scalar>(n: &Num, ctx: &str) -> CliResult<S> {
    n.to_scalar().map_err(|e| CliError::invalid(ctx, e))
}

fn process<S: Scalar>(spec: &ProcessSpec, tree: &EventTree<S>, ctx: &str) -> CliResult<Adapted<S>> {
    match spec {
        ProcessSpec::Expr(src) => {
            let e = Expr::parse(src).map_err(|e| CliError::invalid(ctx, e))?;
            e.evaluate(tree).map_err(|e| CliError::invalid(ctx, e))
        }
        ProcessSpec::Table(values) => {
            if values.len() != tree.len() {
                return Err(CliError::invalid(
                    ctx,
                    format!("table has {} values for {} nodes", values.len(), tree.len()),
                ));
            }
            Ok(Adapted::new(values.iter().map(|v| num(v, ctx)).collect::<CliResult<_>>()?))
        }
    }
}

impl LoadedScenario {
    pub fn from_scenario(scenario: Scenario) -> Self {
        LoadedScenario { scenario, base_dir: PathBuf::new() }
    }

    pub fn tree<S: Scalar>(&self) -> CliResult<EventTree<S>> {
        match &self.scenario.tree {
            TreeSpec::Binomial(b) => EventTree::binomial(
                num(&b.s0, "tree.binomial.s0")?,
                num(&b.up, "tree.binomial.up")?,
                num(&b.down, "tree.binomial.down")?,
                b.steps,
                num(&b.maturity, "tree.binomial.maturity")?,
                num(&b.prob_up, "tree.binomial.prob_up")?,
            )
            .map_err(|e| CliError::invalid("tree.binomial", e)),
            TreeSpec::File(rel) => {
                let path = self.base_dir.join(rel);
                let text = fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                let doc: TreeDoc = serde_path_to_error::deserialize(de).map_err(|e| {
                    let inner = e.inner();
                    CliError::Syntax {
                        path: path.display().to_string(),
                        line: inner.line(),
                        column: inner.column(),
                        message: strip_location(&inner.to_string()).to_string(),
                    }
                })?;
                doc.to_tree().map_err(|e| CliError::invalid(path.display().to_string(), e))
            }
            TreeSpec::Explicit(doc) => doc.to_tree().map_err(|e| CliError::invalid("tree.explicit", e)),
        }
    }

    pub fn model<S: Scalar + 'static>(&self, registry: &GeneratorRegistry<S>) -> CliResult<Model<S>> {
        let sc = &self.scenario;
        let tree = self.tree::<S>()?;
        let built = registry
            .build(&sc.generator.name, sc.generator.params.clone())
            .map_err(|e| CliError::invalid("generator", e))?;
        let payoff = process(&sc.contract.payoff, &tree, "contract.payoff")?;
        let flows = match &sc.contract.flows {
            Some(spec) => CashFlows::new(process(spec, &tree, "contract.flows")?),
            None => CashFlows::zero(&tree),
        };
        let contract = ContractSpec::new(&tree, payoff, flows).map_err(|e| CliError::invalid("contract", e))?;
        let benchmark = match &sc.benchmark {
            BenchmarkSpec::Rates { r_lend, r_borrow } => {
                let rates = RateSchedule::new(num(r_lend, "benchmark.rates")?, num(r_borrow, "benchmark.rates")?)
                    .map_err(|e| CliError::invalid("benchmark.rates", e))?;
                rates.check_accrual(&tree).map_err(|e| CliError::invalid("benchmark.rates", e))?;
                Benchmark::Rates(rates)
            }
            BenchmarkSpec::Process(spec) => Benchmark::Process(process(spec, &tree, "benchmark.process")?),
        };
        let endowments =
            Endowments { x1: num(&sc.endowments.x1, "endowments.x1")?, x2: num(&sc.endowments.x2, "endowments.x2")? };
        let tolerance = if S::EXACT { S::zero() } else { S::from_f64(sc.tolerances.float) };
        Ok(Model {
            name: sc.name.clone(),
            tree,
            generator: built.generator,
            linear: built.linear,
            contract,
            endowments,
            benchmark,
            budget: effective_budget(sc)?,
            tolerance,
            seed: sc.seed,
            samples: sc.samples,
        })
    }
}
