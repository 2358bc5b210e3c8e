//! Synthetic scenario generation from superquadric descriptions, and the
//! bundled hammer, spoon and spatula presets.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attachment::{AttachmentKind, AttachmentLibrary, AttachmentPoint, Polarity};
use crate::error::{Error, Result};
use crate::geom::{ply_string, Point, PointCloud};
use crate::pipeline::{read_json, ComponentFile, PartFile, ReferenceFiles, ScenarioFile, SceneFile};
use crate::scoring::ScoreWeights;
use crate::segmentation::{segment_scene, SegmentationConfig};
use crate::sim::{BreakageRule, TaskSpec, WorldModel, DEFAULT_ATTACH_RADIUS};
use crate::superquadric::{sample_surface, sample_surface_radial, SuperquadricParams};

pub const PRESET_NAMES: [&str; 3] = ["hammer", "spoon", "spatula"];

fn default_points() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

fn default_scale() -> f64 {
    1.0
}

fn default_attach_radius() -> f64 {
    DEFAULT_ATTACH_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenComponent {
    pub name: String,
    pub sq: SuperquadricParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenReference {
    #[serde(default = "default_scale")]
    pub real_world_scale: f64,
    pub components: Vec<GenComponent>,
}

/// An attachment given in the part's untapered model frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenAttachment {
    pub model_location: [f64; 3],
    #[serde(default = "default_kind")]
    pub kind: AttachmentKind,
    #[serde(default)]
    pub polarity: Option<Polarity>,
}

fn default_kind() -> AttachmentKind {
    AttachmentKind::Magnet
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenPart {
    pub id: String,
    pub sq: SuperquadricParams,
    #[serde(default)]
    pub attachments: Vec<GenAttachment>,
    /// Whether the part appears in the written library.
    #[serde(default = "default_true")]
    pub listed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenWorld {
    #[serde(default)]
    pub breakage_rules: Vec<BreakageRule>,
    pub task: TaskSpec,
    #[serde(default = "default_attach_radius")]
    pub attach_radius: f64,
}

/// A square table top sampled on a regular grid at height `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenTable {
    pub z: f64,
    pub half_extent: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_points")]
    pub points_per_cloud: usize,
    #[serde(default)]
    pub noise: f64,
    pub reference: GenReference,
    pub parts: Vec<GenPart>,
    #[serde(default = "default_true")]
    pub write_library: bool,
    #[serde(default)]
    pub weights: Option<ScoreWeights>,
    #[serde(default)]
    pub world: Option<GenWorld>,
    #[serde(default)]
    pub table: Option<GenTable>,
}

impl GenSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: Self = read_json(path.as_ref())?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("invalid scenario name `{}`", self.name));
        }
        if self.reference.components.len() < 2 {
            return bad("a reference tool needs at least 2 components".into());
        }
        if self.parts.len() < self.reference.components.len() {
            return bad(format!(
                "{} parts cannot fill {} components",
                self.parts.len(),
                self.reference.components.len()
            ));
        }
        if self.points_per_cloud < 13 {
            return bad(format!("points_per_cloud must be >= 13, got {}", self.points_per_cloud));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        for c in &self.reference.components {
            c.sq.validate()?;
        }
        for (i, p) in self.parts.iter().enumerate() {
            p.sq.validate()?;
            if p.id.is_empty() || self.parts[..i].iter().any(|q| q.id == p.id) {
                return bad(format!("part ids must be unique and non-empty (`{}`)", p.id));
            }
        }
        if let Some(t) = &self.table {
            if !(t.spacing > 0.0 && t.half_extent > 0.0) {
                return bad("table spacing and half_extent must be positive".into());
            }
        }
        Ok(())
    }
}

/// The bundled preset with the given name.
pub fn preset(name: &str) -> Result<GenSpec> {
    let text = match name {
        "hammer" => include_str!("../presets/hammer.json"),
        "spoon" => include_str!("../presets/spoon.json"),
        "spatula" => include_str!("../presets/spatula.json"),
        _ => {
            return Err(Error::InvalidInput(format!(
                "unknown preset `{name}` (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let spec: GenSpec = serde_json::from_str(text).map_err(|source| Error::Json {
        path: PathBuf::from(format!("<preset {name}>")),
        source,
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Paths of everything [`generate`] wrote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedScenario {
    pub scenario: PathBuf,
    pub scene_scenario: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub files: Vec<PathBuf>,
}

fn attachment_world(sq: &SuperquadricParams, a: &GenAttachment) -> AttachmentPoint {
    let w = sq.model_to_world(&sq.taper_point(&Point::from(a.model_location)));
    AttachmentPoint {
        location: w.into(),
        kind: a.kind,
        polarity: a.polarity,
    }
}

fn write(path: &Path, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    files.push(path.to_path_buf());
    Ok(())
}

fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes clouds, library and scenario files for `spec` into `out_dir`.
/// Output depends only on the generator spec, seed included.
pub fn generate(spec: &GenSpec, out_dir: impl AsRef<Path>) -> Result<GeneratedScenario> {
    spec.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut next_seed = || rng.random::<u64>();

    let mut ref_files = Vec::new();
    for c in &spec.reference.components {
        let cloud =
            sample_surface(&c.sq, spec.points_per_cloud, spec.noise, next_seed())?.with_frame_id(c.name.clone());
        let file = format!("ref_{}.ply", c.name);
        write(&out.join(&file), &ply_string(&cloud)?, &mut files)?;
        ref_files.push(ComponentFile {
            name: c.name.clone(),
            file,
        });
    }

    let mut part_files = Vec::new();
    let mut part_clouds = Vec::new();
    let mut library = AttachmentLibrary::new();
    let mut truth = AttachmentLibrary::new();
    for p in &spec.parts {
        let cloud = sample_surface(&p.sq, spec.points_per_cloud, spec.noise, next_seed())?.with_frame_id(p.id.clone());
        let file = format!("part_{}.ply", p.id);
        write(&out.join(&file), &ply_string(&cloud)?, &mut files)?;
        part_files.push(PartFile { id: p.id.clone(), file });
        let pts: Vec<AttachmentPoint> = p.attachments.iter().map(|a| attachment_world(&p.sq, a)).collect();
        if p.listed {
            library.insert(p.id.clone(), pts.clone());
        }
        truth.insert(p.id.clone(), pts);
        part_clouds.push(cloud);
    }

    let library_file = if spec.write_library {
        let path = out.join("library.json");
        write(&path, &json_text(&library), &mut files)?;
        Some("library.json".to_string())
    } else {
        None
    };

    let world = spec.world.as_ref().map(|w| WorldModel {
        true_attachments: truth,
        breakage_rules: w.breakage_rules.clone(),
        task: w.task.clone(),
        attach_radius: w.attach_radius,
    });
    let reference = ReferenceFiles {
        components: ref_files,
        real_world_scale: spec.reference.real_world_scale,
    };
    let scenario = ScenarioFile {
        name: spec.name.clone(),
        reference: reference.clone(),
        parts: part_files,
        scene: None,
        library: library_file.clone(),
        weights: spec.weights,
        world: world.clone(),
    };
    let scenario_path = out.join("scenario.json");
    write(&scenario_path, &json_text(&scenario), &mut files)?;

    let scene_scenario = match &spec.table {
        Some(t) => {
            // A depth camera sees flat faces that the angular sampler leaves
            // sparse, so scene parts get a second, radial sample.
            let mut captured = Vec::with_capacity(part_clouds.len());
            for (p, cloud) in spec.parts.iter().zip(&part_clouds) {
                let extra = sample_surface_radial(&p.sq, spec.points_per_cloud, spec.noise, next_seed())?;
                captured.push(cloud.merged(&extra));
            }
            let scene = scene_cloud(t, &captured)?;
            write(&out.join("scene.ply"), &ply_string(&scene)?, &mut files)?;
            let ids = cluster_ids(&scene, &part_clouds, spec)?;
            let sc = ScenarioFile {
                name: format!("{}-scene", spec.name),
                reference,
                parts: Vec::new(),
                scene: Some(SceneFile {
                    file: "scene.ply".into(),
                    ids,
                }),
                library: library_file.clone(),
                weights: spec.weights,
                world,
            };
            let path = out.join("scenario_scene.json");
            write(&path, &json_text(&sc), &mut files)?;
            Some(path)
        }
        None => None,
    };

    Ok(GeneratedScenario {
        scenario: scenario_path,
        scene_scenario,
        library: library_file.map(|f| out.join(f)),
        files,
    })
}

fn scene_cloud(t: &GenTable, parts: &[PointCloud]) -> Result<PointCloud> {
    let n = (2.0 * t.half_extent / t.spacing).floor() as usize;
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            pts.push(Point::new(
                -t.half_extent + i as f64 * t.spacing,
                -t.half_extent + j as f64 * t.spacing,
                t.z,
            ));
        }
    }
    let mut scene = PointCloud::new(pts, "scene")?;
    for p in parts {
        scene = scene.merged(p);
    }
    Ok(scene)
}

/// Names each segmented cluster after the generated part nearest to its centroid.
fn cluster_ids(scene: &PointCloud, parts: &[PointCloud], spec: &GenSpec) -> Result<Vec<String>> {
    let seg = segment_scene(scene, &SegmentationConfig::default(), spec.seed)?;
    let centroids = parts.iter().map(PointCloud::centroid).collect::<Result<Vec<_>>>()?;
    seg.parts
        .iter()
        .map(|c| {
            let cc = c.centroid()?;
            let (best, _) = centroids
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - cc).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one part");
            Ok(spec.parts[best].id.clone())
        })
        .collect()
}
