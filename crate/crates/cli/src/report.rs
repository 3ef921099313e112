//! Serialized report documents. Field order is fixed, so output is byte-stable.

use std::collections::BTreeMap;
use std::io::Write;

use rbsde_core::reflected::RbsdeSolution;
use rbsde_core::{EventTree, Scalar, StoppingTime};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn stop_set(tau: &StoppingTime) -> Vec<usize> {
    tau.nodes().iter().map(|n| n.0).collect()
}

/// Exact text of a value: `76/9` in rational mode, the shortest round-trip
/// decimal in float mode.
pub fn exact<S: Scalar>(v: &S) -> String {
    v.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssuerSide {
    pub price: f64,
    pub y0: f64,
    pub z0: Vec<f64>,
    pub total_reflection: f64,
    /// First contact on each path: the earliest break-even time.
    pub earliest_exercise: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderSide {
    pub price: f64,
    pub y0: f64,
    pub z0: Vec<f64>,
    pub total_reflection: f64,
    pub earliest_exercise: Vec<usize>,
    /// First node with positive cumulative reflection on each path, else the leaf.
    pub latest_exercise: Vec<usize>,
    /// Some node of `latest_exercise` already carries reflection.
    pub latest_caveat: bool,
    /// Last nodes before any reflection increment.
    pub latest_rational: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceDoc {
    pub scenario: String,
    pub mode: &'static str,
    pub side: &'static str,
    pub generator: String,
    pub horizon: usize,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_issuer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_holder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wedge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fair_interval: Option<[f64; 2]>,
    /// Exact values keyed by field name (rational mode only).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub exact: BTreeMap<String, String>,
    /// One-step monotonicity holds; when false the prices stand but the
    /// comparison-based guarantees are not available.
    pub comparison_verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issuer: Option<IssuerSide>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderSide>,
    pub settlement: &'static str,
}

pub const SETTLEMENT_NOTE: &str =
    "the cash flow increment into the exercise node is paid before the payoff is transferred";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub got: String,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyDoc {
    pub scenario: String,
    pub mode: &'static str,
    pub suite: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub budget: String,
    pub comparison_verified: bool,
    pub checks: Vec<Check>,
    pub skipped: Vec<Skipped>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flags {
    pub break_even: bool,
    pub no_arbitrage: bool,
    pub wealth_hits_obstacle: bool,
    pub contact_without_reflection: bool,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExerciseRow {
    pub tau: Vec<usize>,
    /// Holder rational exercise time: contact with zero cumulative reflection.
    pub rational: bool,
    /// Issuer break-even classification.
    pub flags: Flags,
    pub flags_agree: bool,
    pub issuer_earliest: bool,
    pub holder_earliest: bool,
    pub holder_latest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExerciseDoc {
    pub scenario: String,
    pub mode: &'static str,
    pub p_issuer: f64,
    pub p_holder: f64,
    pub comparison_verified: bool,
    /// Every stopping time was examined.
    pub enumerated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopping_times: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refusal: Option<String>,
    pub issuer_earliest: Vec<usize>,
    pub holder_earliest: Vec<usize>,
    pub holder_latest: Vec<usize>,
    pub holder_latest_caveat: bool,
    pub holder_latest_rational: Vec<usize>,
    pub rows: Vec<ExerciseRow>,
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report documents serialize");
    s.push('\n');
    s
}

/// Per-node dump: `side,node_id,k,S,Y,Z,dK,obstacle,contact`.
/// Multi-asset prices and hedges are joined with `;`. `Z` is empty at leaves.
pub fn write_csv<S: Scalar, W: Write>(
    out: W,
    tree: &EventTree<S>,
    sides: &[(&str, &RbsdeSolution<S>)],
    tol: &S,
) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Output { path: "csv".into(), message: e.to_string() };
    w.write_record(["side", "node_id", "k", "S", "Y", "Z", "dK", "obstacle", "contact"]).map_err(err)?;
    let join = |v: &[S]| v.iter().map(exact).collect::<Vec<_>>().join(";");
    for (side, sol) in sides {
        for n in tree.ids() {
            let z = if tree.is_leaf(n) { String::new() } else { join(sol.z.get(n)) };
            w.write_record([
                side.to_string(),
                n.0.to_string(),
                tree.node(n).step.to_string(),
                join(tree.price(n)),
                exact(&sol.y[n]),
                z,
                exact(&sol.dk[n]),
                exact(&sol.obstacle[n]),
                sol.contact(n, tol).to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::Output { path: "csv".into(), message: e.to_string() })
}
