//! Scenario files, run configuration and the load, fit, rank, simulate chain.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attachment::{AttAggregate, AttachmentLibrary};
use crate::error::{Error, Result};
use crate::geom::{load_ply, PointCloud};
use crate::scoring::{rank_builds, CandidateBuild, CandidatePart, ReferenceTool, ScoreWeights};
use crate::segmentation::{load_reference_components, segment_scene, SegmentationConfig};
use crate::sim::{simulate_known, simulate_unknown, AttemptLog, WorldModel};
use crate::superquadric::FitConfig;

/// Run configuration. Every field is optional in JSON; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides the scenario's weights when set.
    pub weights: Option<ScoreWeights>,
    pub fit: FitConfig,
    pub segmentation: SegmentationConfig,
    pub att_aggregate: AttAggregate,
    /// Overrides the world model's attach radius when set.
    pub attach_radius: Option<f64>,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = read_json(path.as_ref())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        self.fit.validate()?;
        self.segmentation.validate()?;
        if let Some(r) = self.attach_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("attach_radius must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub name: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFiles {
    pub components: Vec<ComponentFile>,
    #[serde(default = "one")]
    pub real_world_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartFile {
    pub id: String,
    pub file: String,
}

/// An unsegmented scene; `ids` name the clusters in segmentation order
/// (clusters beyond the list get `part<i>`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub file: String,
    #[serde(default)]
    pub ids: Vec<String>,
}

/// A scenario on disk. File names are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub reference: ReferenceFiles,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneFile>,
    #[serde(default)]
    pub library: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<ScoreWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldModel>,
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let sc: Self = read_json(path)?;
        if sc.parts.is_empty() == sc.scene.is_none() {
            return Err(Error::InvalidInput(format!(
                "{}: a scenario needs exactly one of `parts` or `scene`",
                path.display()
            )));
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((sc, dir))
    }
}

/// A scenario with every cloud loaded and fitted.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub name: String,
    pub reference: ReferenceTool,
    pub parts: Vec<CandidatePart>,
    pub library: Option<AttachmentLibrary>,
    pub weights: Option<ScoreWeights>,
    pub world: Option<WorldModel>,
    pub fit_seconds: f64,
}

/// Loads, segments if needed, and fits every reference component and part.
pub fn prepare_scenario(path: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<PreparedScenario> {
    cfg.validate()?;
    let (sc, dir) = ScenarioFile::load(path)?;
    let start = Instant::now();

    let ref_paths: Vec<PathBuf> = sc.reference.components.iter().map(|c| dir.join(&c.file)).collect();
    let ref_clouds = load_reference_components(&ref_paths, sc.reference.real_world_scale)?;
    let named_ref: Vec<(String, PointCloud)> = sc
        .reference
        .components
        .iter()
        .map(|c| c.name.clone())
        .zip(ref_clouds)
        .collect();

    let named_parts: Vec<(String, PointCloud)> = match &sc.scene {
        Some(scene) => {
            let cloud = load_ply(dir.join(&scene.file))?;
            let seg = segment_scene(&cloud, &cfg.segmentation, cfg.seed)?;
            seg.parts
                .into_iter()
                .enumerate()
                .map(|(i, p)| (scene.ids.get(i).cloned().unwrap_or_else(|| format!("part{i}")), p))
                .collect()
        }
        None => sc
            .parts
            .iter()
            .map(|p| Ok((p.id.clone(), load_ply(dir.join(&p.file))?)))
            .collect::<Result<_>>()?,
    };

    let (reference, parts) = rayon::join(
        || ReferenceTool::fit(named_ref, &cfg.fit),
        || CandidatePart::fit_all(named_parts, &cfg.fit),
    );
    let (reference, parts) = (reference?, parts?);
    let fit_seconds = start.elapsed().as_secs_f64();

    let library = match &sc.library {
        Some(f) => {
            let lib = AttachmentLibrary::load(dir.join(f))?;
            lib.validate_against(&parts)?;
            Some(lib)
        }
        None => None,
    };
    Ok(PreparedScenario {
        name: sc.name,
        reference,
        parts,
        library,
        weights: sc.weights,
        world: sc.world,
        fit_seconds,
    })
}

/// Ranked builds plus the settings that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct Ranking {
    pub scenario: String,
    pub weights: ScoreWeights,
    pub att_aggregate: AttAggregate,
    pub attachments_known: bool,
    pub seed: u64,
    pub reference: Vec<ComponentSummary>,
    pub parts: Vec<ComponentSummary>,
    pub builds: Vec<CandidateBuild>,
    #[serde(skip)]
    pub score_seconds: f64,
}

/// Name and fitted parameters of one cloud, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentSummary {
    pub id: String,
    pub points: usize,
    pub sq: crate::superquadric::SuperquadricParams,
}

/// Weights in force: explicit override, then config, then scenario, then default.
pub fn resolve_weights(
    prepared: &PreparedScenario,
    cfg: &PipelineConfig,
    explicit: Option<ScoreWeights>,
) -> ScoreWeights {
    explicit.or(cfg.weights).or(prepared.weights).unwrap_or_default()
}

/// Ranks all builds. With `use_library` false the attachment term is zero
/// and the candidate sites drive exploration.
pub fn rank_prepared(
    prepared: &PreparedScenario,
    cfg: &PipelineConfig,
    weights: Option<ScoreWeights>,
    use_library: bool,
) -> Result<Ranking> {
    let w = resolve_weights(prepared, cfg, weights);
    let library = if use_library { prepared.library.as_ref() } else { None };
    let start = Instant::now();
    let builds = rank_builds(&prepared.reference, &prepared.parts, &w, library, cfg.att_aggregate)?;
    let score_seconds = start.elapsed().as_secs_f64();
    Ok(Ranking {
        scenario: prepared.name.clone(),
        weights: w,
        att_aggregate: cfg.att_aggregate,
        attachments_known: library.is_some(),
        seed: cfg.seed,
        reference: prepared
            .reference
            .components()
            .iter()
            .map(|c| ComponentSummary {
                id: c.name.clone(),
                points: c.cloud.len(),
                sq: c.sq,
            })
            .collect(),
        parts: prepared
            .parts
            .iter()
            .map(|p| ComponentSummary {
                id: p.id.clone(),
                points: p.cloud.len(),
                sq: p.sq,
            })
            .collect(),
        builds,
        score_seconds,
    })
}

/// Ranks and then replays construction. Known attachments need a library.
pub fn simulate_prepared(
    prepared: &PreparedScenario,
    cfg: &PipelineConfig,
    weights: Option<ScoreWeights>,
    unknown_attachments: bool,
) -> Result<(Ranking, AttemptLog)> {
    let mut world = prepared
        .world
        .clone()
        .ok_or_else(|| Error::InvalidInput(format!("scenario `{}` has no world model", prepared.name)))?;
    if let Some(r) = cfg.attach_radius {
        world.attach_radius = r;
    }
    if !unknown_attachments && prepared.library.is_none() {
        return Err(Error::InvalidInput(format!(
            "scenario `{}` has no attachment library; use the unknown-attachment regime",
            prepared.name
        )));
    }
    let ranking = rank_prepared(prepared, cfg, weights, !unknown_attachments)?;
    let log = if unknown_attachments {
        simulate_unknown(&ranking.builds, &world)?
    } else {
        simulate_known(&ranking.builds, &world)?
    };
    Ok((ranking, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
        let c: PipelineConfig =
            serde_json::from_str(r#"{"weights": [1, 1, 5, 5], "att_aggregate": "mean", "fit": {"restarts": 2}}"#)
                .unwrap();
        assert_eq!(c.att_aggregate, AttAggregate::Mean);
        assert_eq!(c.fit.restarts, 2);
        assert_eq!(c.fit.max_iterations, FitConfig::default().max_iterations);
        c.validate().unwrap();
        let bad: PipelineConfig = serde_json::from_str(r#"{"fit": {"restarts": 7}}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scenario_needs_parts_or_scene() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        fs::write(&p, r#"{"name": "x", "reference": {"components": []}}"#).unwrap();
        assert!(ScenarioFile::load(&p).is_err());
        fs::write(
            &p,
            r#"{"name": "x", "reference": {"components": []}, "parts": [{"id": "A", "file": "a.ply"}]}"#,
        )
        .unwrap();
        let (sc, d) = ScenarioFile::load(&p).unwrap();
        assert_eq!(sc.parts[0].id, "A");
        assert_eq!(d, dir.path());
    }

    #[test]
    fn missing_scenario_names_the_path() {
        let err = prepare_scenario("/no/such/scenario.json", &PipelineConfig::default()).unwrap_err();
        assert!(err.to_string().contains("/no/such/scenario.json"));
    }
}
