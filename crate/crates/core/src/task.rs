use serde::{Deserialize, Serialize};

use crate::minilang::{SourceProgram, TestCase};

/// Difficulty tier of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Intro,
    Inter,
    Comp,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Intro, Tier::Inter, Tier::Comp];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Intro => "intro",
            Tier::Inter => "inter",
            Tier::Comp => "comp",
        }
    }
}

/// A synthesis problem: a description, a reference solution and unit tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub tier: Tier,
    pub description: String,
    pub reference_solution: SourceProgram,
    pub tests: Vec<TestCase>,
}
