use alloc::string::String;
use core::fmt;

use crate::lattice::NodeId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation received an out-of-range parameter.
    InvalidParameter(String),
    /// The event tree violates a structural invariant.
    InvalidTree(String),
    /// Conditional expectation requested at a leaf.
    LeafNode(NodeId),
    /// Stopping-time enumeration would exceed the configured budget.
    BudgetExceeded { count: u128, budget: u128 },
    /// A stop set is not an antichain covering every path exactly once.
    InvalidStoppingTime(String),
    /// `lipschitz_y * dt >= 1` somewhere on the tree.
    Unstable { node: NodeId, product: f64 },
    /// The implicit scalar step did not converge.
    PicardDiverged { node: NodeId, iterations: usize },
    /// The per-step hedge cannot be recovered from the children.
    Representation { node: NodeId, reason: String },
    /// Exact arithmetic needs a generator with closed-form pieces.
    NoClosedForm(String),
    /// Terminal values are missing or misplaced.
    Terminal(String),
    /// Bisection could not bracket the minimal cost.
    BracketFailure { node: NodeId },
    /// The minimal superhedging problem is unbounded below.
    Unbounded { node: NodeId },
    /// A verified equivalence failed: indicates a solver bug.
    TheoremViolation(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::InvalidTree(m) => write!(f, "invalid event tree: {m}"),
            Error::LeafNode(n) => write!(f, "node {n} is a leaf"),
            Error::BudgetExceeded { count, budget } => {
                write!(f, "stopping-time enumeration refused: {count} stopping times exceed the budget of {budget}")
            }
            Error::InvalidStoppingTime(m) => write!(f, "invalid stopping time: {m}"),
            Error::Unstable { node, product } => {
                write!(f, "stability constraint violated at node {node}: lipschitz_y * dt = {product} >= 1")
            }
            Error::PicardDiverged { node, iterations } => {
                write!(f, "implicit step did not converge at node {node} after {iterations} iterations")
            }
            Error::Representation { node, reason } => {
                write!(f, "hedge representation failed at node {node}: {reason}")
            }
            Error::NoClosedForm(m) => write!(f, "no closed-form step available: {m}"),
            Error::Terminal(m) => write!(f, "terminal condition: {m}"),
            Error::BracketFailure { node } => {
                write!(f, "could not bracket the minimal cost at node {node}")
            }
            Error::Unbounded { node } => {
                write!(f, "minimal cost is unbounded below at node {node}")
            }
            Error::TheoremViolation(m) => write!(f, "theorem violation: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
