//! Build-and-validate replay against a ground-truth world model.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attachment::{best_alignment, AttachmentLibrary, AttachmentPoint, Knowledge, Polarity};
use crate::error::{Error, Result};
use crate::geom::{Point, RigidTransform};
use crate::scoring::CandidateBuild;

pub const DEFAULT_ATTACH_RADIUS: f64 = 0.02;

fn default_attach_radius() -> f64 {
    DEFAULT_ATTACH_RADIUS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Hit,
    Scoop,
    Flip,
}

/// Geometric stand-in for "the tool did its job": the action part must be
/// wide enough and the grasp part long enough. Widths and lengths are taken
/// from canonical fitted scales (middle and largest semi-axis, doubled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub action_component: usize,
    pub grasp_component: usize,
    pub min_action_width: f64,
    pub min_grasp_length: f64,
}

/// Builds containing every listed part break when the tool is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakageRule {
    pub parts: Vec<String>,
    #[serde(default)]
    pub reason: String,
}

impl BreakageRule {
    pub fn matches(&self, build: &CandidateBuild) -> bool {
        self.parts.iter().all(|p| build.parts.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldModel {
    pub true_attachments: AttachmentLibrary,
    #[serde(default)]
    pub breakage_rules: Vec<BreakageRule>,
    pub task: TaskSpec,
    #[serde(default = "default_attach_radius")]
    pub attach_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AttachFailed,
    BrokeInValidation,
    TaskFailed,
    Success,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::AttachFailed => "attach_failed",
            Outcome::BrokeInValidation => "broke_in_validation",
            Outcome::TaskFailed => "task_failed",
            Outcome::Success => "success",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Known,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    /// 1-based position of the build in the ranking.
    pub rank: usize,
    pub parts: Vec<String>,
    pub alignment: usize,
    pub location: [f64; 3],
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttemptLog {
    pub regime: Regime,
    pub attempts: Vec<Attempt>,
    pub total_attempts: usize,
    pub solution: Option<CandidateBuild>,
    pub solution_rank: Option<usize>,
}

impl AttemptLog {
    fn new(regime: Regime) -> Self {
        Self {
            regime,
            attempts: Vec::new(),
            total_attempts: 0,
            solution: None,
            solution_rank: None,
        }
    }

    fn push(&mut self, a: Attempt) {
        self.attempts.push(a);
        self.total_attempts = self.attempts.len();
    }

    /// The outcome sequence, used for golden comparisons.
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.attempts.iter().map(|a| a.outcome).collect()
    }

    pub fn summary(&self) -> String {
        match self.solution_rank {
            Some(k) => format!("solution at rank {k} after {} attempts", self.total_attempts),
            None => format!("no solution after {} attempts", self.total_attempts),
        }
    }
}

impl WorldModel {
    fn check(&self, builds: &[CandidateBuild]) -> Result<()> {
        if builds.is_empty() {
            return Err(Error::EmptyRanking);
        }
        if !(self.attach_radius > 0.0 && self.attach_radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "attach_radius must be positive, got {}",
                self.attach_radius
            )));
        }
        let m = builds[0].parts.len();
        if self.task.action_component >= m || self.task.grasp_component >= m {
            return Err(Error::InvalidInput(format!(
                "task components ({}, {}) out of range for {m}-part builds",
                self.task.action_component, self.task.grasp_component
            )));
        }
        Ok(())
    }

    /// True attachment points of `part` within the radius of `at`, after
    /// moving the part by `t`; the nearest one wins.
    fn true_point_near(&self, part: &str, t: &RigidTransform, at: &Point) -> Option<AttachmentPoint> {
        let Knowledge::Points(pts) = self.true_attachments.lookup(part) else {
            return None;
        };
        pts.iter()
            .map(|a| ((t.apply(&a.point()) - at).norm(), a))
            .filter(|(d, _)| *d <= self.attach_radius)
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .map(|(_, a)| *a)
    }
}

/// Magnets with the same pole facing each other repel.
fn polarity_clash(points: &[AttachmentPoint]) -> bool {
    let poles: Vec<Polarity> = points.iter().filter_map(|p| p.polarity).collect();
    poles.iter().enumerate().any(|(i, a)| poles[i + 1..].contains(a))
}

/// Breakage rules first, then the task predicate.
pub fn validate_tool(build: &CandidateBuild, world: &WorldModel) -> Outcome {
    validate_detail(build, world).0
}

fn validate_detail(build: &CandidateBuild, world: &WorldModel) -> (Outcome, String) {
    if let Some(rule) = world.breakage_rules.iter().find(|r| r.matches(build)) {
        return (Outcome::BrokeInValidation, rule.reason.clone());
    }
    let task = &world.task;
    let (Some(action), Some(grasp)) = (
        build.shapes.get(task.action_component),
        build.shapes.get(task.grasp_component),
    ) else {
        return (Outcome::TaskFailed, "build lacks fitted shapes".into());
    };
    let mut s = action.scale;
    s.sort_by(f64::total_cmp);
    let width = 2.0 * s[1];
    let length = 2.0 * grasp.scale.iter().copied().fold(0.0, f64::max);
    if width >= task.min_action_width && length >= task.min_grasp_length {
        (Outcome::Success, String::new())
    } else {
        (
            Outcome::TaskFailed,
            format!("action width {width:.3} m, grasp length {length:.3} m"),
        )
    }
}

/// Known attachments: one attempt per finite build, joining the library
/// points chosen under the build's best alignment.
pub fn simulate_known(builds: &[CandidateBuild], world: &WorldModel) -> Result<AttemptLog> {
    world.check(builds)?;
    let mut log = AttemptLog::new(Regime::Known);
    for (i, b) in builds.iter().enumerate() {
        if !b.e_const.is_finite() {
            continue;
        }
        let rank = i + 1;
        let Some(ai) = best_alignment(&b.attachments) else {
            log.push(Attempt {
                rank,
                parts: b.parts.clone(),
                alignment: 0,
                location: [f64::NAN; 3],
                outcome: Outcome::AttachFailed,
                detail: "no attachment points chosen".into(),
            });
            continue;
        };
        let chosen: Vec<_> = b.attachments.iter().filter(|c| c.alignment == ai).collect();
        let mut loc = Point::zeros();
        for c in &chosen {
            loc += Point::from(c.location);
        }
        loc /= chosen.len() as f64;

        let mut matched = Vec::new();
        let mut detail = String::new();
        for (j, c) in chosen.iter().enumerate() {
            match world.true_point_near(&c.part_id, &b.alignments[ai].transforms[j], &Point::from(c.location)) {
                Some(p) => matched.push(p),
                None => {
                    detail = format!("no attachment on {} at the chosen point", c.part_id);
                    break;
                }
            }
        }
        let (outcome, detail) = if matched.len() < chosen.len() {
            (Outcome::AttachFailed, detail)
        } else if polarity_clash(&matched) {
            (Outcome::AttachFailed, "magnet polarity".to_string())
        } else {
            validate_detail(b, world)
        };
        log.push(Attempt {
            rank,
            parts: b.parts.clone(),
            alignment: ai,
            location: loc.into(),
            outcome,
            detail,
        });
        if outcome == Outcome::Success {
            log.solution = Some(b.clone());
            log.solution_rank = Some(rank);
            break;
        }
    }
    Ok(log)
}

/// Unknown attachments: every candidate site of a build is tried in order;
/// a site works when each part has a true attachment within the radius and
/// the poles do not clash. A joined tool that fails validation moves the
/// search to the next build.
pub fn simulate_unknown(builds: &[CandidateBuild], world: &WorldModel) -> Result<AttemptLog> {
    world.check(builds)?;
    let mut log = AttemptLog::new(Regime::Unknown);
    'builds: for (i, b) in builds.iter().enumerate() {
        if !b.e_const.is_finite() {
            continue;
        }
        let rank = i + 1;
        for site in &b.sites {
            let at = Point::from(site.location);
            let al = &b.alignments[site.alignment];
            let found: Vec<Option<AttachmentPoint>> = b
                .parts
                .iter()
                .zip(&al.transforms)
                .map(|(p, t)| world.true_point_near(p, t, &at))
                .collect();
            let (outcome, detail) = if let Some(j) = found.iter().position(Option::is_none) {
                (Outcome::AttachFailed, format!("no attachment on {} here", b.parts[j]))
            } else {
                let pts: Vec<_> = found.into_iter().flatten().collect();
                if polarity_clash(&pts) {
                    (Outcome::AttachFailed, "magnet polarity".to_string())
                } else {
                    validate_detail(b, world)
                }
            };
            log.push(Attempt {
                rank,
                parts: b.parts.clone(),
                alignment: site.alignment,
                location: site.location,
                outcome,
                detail,
            });
            match outcome {
                Outcome::Success => {
                    log.solution = Some(b.clone());
                    log.solution_rank = Some(rank);
                    break 'builds;
                }
                Outcome::AttachFailed => {}
                _ => continue 'builds,
            }
        }
    }
    Ok(log)
}
