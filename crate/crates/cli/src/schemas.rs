//! JSON schemas shipped with the binary.

pub const SCENARIO: &str = include_str!("../schemas/scenario.schema.json");
pub const TREE: &str = include_str!("../schemas/tree.schema.json");
pub const PRICE_REPORT: &str = include_str!("../schemas/price-report.schema.json");
pub const VERIFY_REPORT: &str = include_str!("../schemas/verify-report.schema.json");
pub const EXERCISE_REPORT: &str = include_str!("../schemas/exercise-report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Scenario,
    Tree,
    Price,
    Verify,
    Exercise,
}

impl Which {
    pub fn text(self) -> &'static str {
        match self {
            Which::Scenario => SCENARIO,
            Which::Tree => TREE,
            Which::Price => PRICE_REPORT,
            Which::Verify => VERIFY_REPORT,
            Which::Exercise => EXERCISE_REPORT,
        }
    }
}
