//! Affordance solutions `(object, action, effect)` and the three levels of
//! improvised tool solutions, each in a substitution and a construction variant.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Existing,
    Constructed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffordanceSolution {
    pub object: String,
    pub action: String,
    pub effect: String,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
}

fn default_provenance() -> Provenance {
    Provenance::Existing
}

impl AffordanceSolution {
    pub fn new(object: &str, action: &str, effect: &str, provenance: Provenance) -> Self {
        Self {
            object: object.into(),
            action: action.into(),
            effect: effect.into(),
            provenance,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.object.is_empty() || self.action.is_empty() || self.effect.is_empty() {
            return Err(Error::InvalidInput(format!(
                "affordance solution has an empty label: ({}, {}, {})",
                self.object, self.action, self.effect
            )));
        }
        Ok(())
    }
}

/// A persistent relation to establish, such as `isAttached(board1, board2)`,
/// and the effects that establish it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGoal {
    pub predicate: String,
    #[serde(default)]
    pub arguments: Vec<String>,
    pub satisfied_by: BTreeSet<String>,
}

impl TaskGoal {
    fn validate(&self) -> Result<()> {
        if self.predicate.is_empty() || self.satisfied_by.is_empty() {
            return Err(Error::InvalidInput(
                "goal needs a predicate and at least one satisfying effect".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for TaskGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.arguments.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "O_eq")]
    Object,
    #[serde(rename = "OA_eq")]
    ObjectAction,
    #[serde(rename = "OAE_eq")]
    ObjectActionEffect,
}

impl Level {
    pub fn number(&self) -> u8 {
        match self {
            Level::Object => 1,
            Level::ObjectAction => 2,
            Level::ObjectActionEffect => 3,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Level::Object => "O_eq",
            Level::ObjectAction => "OA_eq",
            Level::ObjectActionEffect => "OAE_eq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// An existing object stands in for the reference tool.
    S,
    /// A new tool is built.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub level: Level,
    pub variant: Variant,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Level {} {}_{:?}",
            self.level.number(),
            self.level.symbol(),
            self.variant
        )
    }
}

/// Exact, case-sensitive membership of `effect` in the goal's effects.
pub fn is_goal_satisfied(goal: &TaskGoal, effect: &str) -> bool {
    goal.satisfied_by.contains(effect)
}

/// Level from how many of action and effect differ from the reference
/// (0, 1 or 2); variant from the candidate's provenance.
pub fn classify_equivalence(
    reference: &AffordanceSolution,
    candidate: &AffordanceSolution,
    goal: &TaskGoal,
) -> Result<Classification> {
    reference.validate()?;
    candidate.validate()?;
    goal.validate()?;
    if !is_goal_satisfied(goal, &candidate.effect) {
        return Err(Error::NotASolution {
            effect: candidate.effect.clone(),
            goal: goal.to_string(),
        });
    }
    let same_action = candidate.action == reference.action;
    let same_effect = candidate.effect == reference.effect;
    if same_action && same_effect && candidate.object == reference.object {
        return Err(Error::IdentitySolution);
    }
    let level = match (same_action, same_effect) {
        (true, true) => Level::Object,
        (false, true) => Level::ObjectAction,
        // A kept action with a new effect is not a table cell; count differing slots.
        (true, false) => Level::ObjectAction,
        (false, false) => Level::ObjectActionEffect,
    };
    let variant = match candidate.provenance {
        Provenance::Existing => Variant::S,
        Provenance::Constructed => Variant::C,
    };
    Ok(Classification { level, variant })
}

/// One worked example with its expected cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCell {
    pub description: String,
    pub candidate: AffordanceSolution,
    pub level: Level,
    pub variant: Variant,
}

/// The board-attaching task: goal, reference solution and the worked cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyTable {
    pub goal: TaskGoal,
    pub reference: AffordanceSolution,
    pub cells: Vec<TableCell>,
}

/// A batch of candidates judged against one goal and reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub goal: TaskGoal,
    pub reference: AffordanceSolution,
    pub candidates: Vec<AffordanceSolution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassifyOutcome {
    pub candidate: AffordanceSolution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ClassifyRequest {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        crate::pipeline::read_json(path.as_ref())
    }

    /// Classifies every candidate; per-candidate failures are reported, not raised.
    pub fn run(&self) -> Vec<ClassifyOutcome> {
        self.candidates
            .iter()
            .map(|c| match classify_equivalence(&self.reference, c, &self.goal) {
                Ok(k) => ClassifyOutcome {
                    candidate: c.clone(),
                    classification: Some(k),
                    error: None,
                },
                Err(e) => ClassifyOutcome {
                    candidate: c.clone(),
                    classification: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    }
}

impl From<&TaxonomyTable> for ClassifyRequest {
    fn from(t: &TaxonomyTable) -> Self {
        Self {
            goal: t.goal.clone(),
            reference: t.reference.clone(),
            candidates: t.cells.iter().map(|c| c.candidate.clone()).collect(),
        }
    }
}

pub fn levels_table() -> TaxonomyTable {
    use Provenance::{Constructed, Existing};
    let goal = TaskGoal {
        predicate: "isAttached".into(),
        arguments: vec!["board1".into(), "board2".into()],
        satisfied_by: ["tighten_screw", "bound_together"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let reference = AffordanceSolution::new("screwdriver", "turn", "tighten_screw", Existing);
    let cell = |d: &str, o: &str, a: &str, e: &str, p, level, variant| TableCell {
        description: d.into(),
        candidate: AffordanceSolution::new(o, a, e, p),
        level,
        variant,
    };
    let cells = vec![
        cell(
            "knife turns the screw",
            "knife",
            "turn",
            "tighten_screw",
            Existing,
            Level::Object,
            Variant::S,
        ),
        cell(
            "clothespin and coin built into a screwdriver",
            "clothespin+coin",
            "turn",
            "tighten_screw",
            Constructed,
            Level::Object,
            Variant::C,
        ),
        cell(
            "hammer hits the screw in",
            "hammer",
            "hit",
            "tighten_screw",
            Existing,
            Level::ObjectAction,
            Variant::S,
        ),
        cell(
            "stick and rock built into a hammer",
            "stick+rock",
            "hit",
            "tighten_screw",
            Constructed,
            Level::ObjectAction,
            Variant::C,
        ),
        cell(
            "rope ties the boards",
            "rope",
            "tie",
            "bound_together",
            Existing,
            Level::ObjectActionEffect,
            Variant::S,
        ),
        cell(
            "rope knitted from yarn ties the boards",
            "yarn_rope",
            "tie",
            "bound_together",
            Constructed,
            Level::ObjectActionEffect,
            Variant::C,
        ),
        cell(
            "Level 1 row: new object, action and effect kept",
            "O_C",
            "turn",
            "tighten_screw",
            Constructed,
            Level::Object,
            Variant::C,
        ),
        cell(
            "Level 2 row: new object and action, effect kept",
            "O_S",
            "A_S",
            "tighten_screw",
            Existing,
            Level::ObjectAction,
            Variant::S,
        ),
        cell(
            "Level 3 row: new object, action and effect",
            "O_C",
            "A_C",
            "bound_together",
            Constructed,
            Level::ObjectActionEffect,
            Variant::C,
        ),
    ];
    TaxonomyTable { goal, reference, cells }
}
