//! Attachment reasoning: PCA alignment of a build onto the reference tool,
//! candidate joint locations, and proximity scoring of library attachment points.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{closest_pairs_with, Point, RigidTransform};
use crate::scoring::{CandidatePart, ReferenceTool};

/// Closest cross-cloud pairs used per joint.
pub const INTERSECTION_PAIRS: usize = 20;
/// Sites closer than this to an earlier site are dropped.
pub const SITE_DEDUP: f64 = 0.005;
/// Upper bound on the number of alignments enumerated per build.
pub const MAX_ALIGNMENTS: usize = 256;
/// Attachment points must lie this close to their part's cloud.
pub const ATTACHMENT_SURFACE_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachmentKind {
    Magnet,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    North,
    South,
}

/// One attachment point, expressed in the frame of its part's point cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachmentPoint {
    pub location: [f64; 3],
    #[serde(default = "default_kind")]
    pub kind: AttachmentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
}

fn default_kind() -> AttachmentKind {
    AttachmentKind::Magnet
}

impl AttachmentPoint {
    pub fn magnet(location: [f64; 3], polarity: Option<Polarity>) -> Self {
        Self {
            location,
            kind: AttachmentKind::Magnet,
            polarity,
        }
    }

    pub fn point(&self) -> Point {
        Point::from(self.location)
    }
}

/// What the library says about one part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Knowledge<'a> {
    /// The part is not listed.
    Unknown,
    /// Listed with an empty list.
    KnownNone,
    Points(&'a [AttachmentPoint]),
}

/// Attachment points per part id. A listed id with an empty list is known to
/// have no attachment points; an id that is not listed is unknown.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttachmentLibrary {
    pub entries: BTreeMap<String, Vec<AttachmentPoint>>,
}

impl AttachmentLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, part_id: impl Into<String>, points: Vec<AttachmentPoint>) {
        self.entries.insert(part_id.into(), points);
    }

    pub fn lookup(&self, part_id: &str) -> Knowledge<'_> {
        match self.entries.get(part_id) {
            None => Knowledge::Unknown,
            Some(v) if v.is_empty() => Knowledge::KnownNone,
            Some(v) => Knowledge::Points(v),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lib: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        lib.check_finite()?;
        Ok(lib)
    }

    fn check_finite(&self) -> Result<()> {
        for (id, pts) in &self.entries {
            if pts.iter().any(|a| !a.location.iter().all(|c| c.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "attachment of `{id}` has a non-finite location"
                )));
            }
        }
        Ok(())
    }

    /// Checks that every listed id names one of `parts` and that every point
    /// lies within [`ATTACHMENT_SURFACE_TOL`] of that part's cloud.
    pub fn validate_against(&self, parts: &[CandidatePart]) -> Result<()> {
        self.check_finite()?;
        for (id, pts) in &self.entries {
            let part = parts
                .iter()
                .find(|p| &p.id == id)
                .ok_or_else(|| Error::InvalidInput(format!("attachment library names unknown part `{id}`")))?;
            for a in pts {
                let d2 = part
                    .tree()
                    .nearest_k(&a.point(), 1)
                    .first()
                    .map_or(f64::INFINITY, |x| x.0);
                if d2.sqrt() > ATTACHMENT_SURFACE_TOL {
                    return Err(Error::InvalidInput(format!(
                        "attachment {:?} of `{id}` is {:.4} m from the part cloud",
                        a.location,
                        d2.sqrt()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One rigid placement of every part of a build into the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Flip index (0..4) per part: identity, then half turns about PCA axes 1, 2, 3.
    pub flips: Vec<u8>,
    pub transforms: Vec<RigidTransform>,
    pub alignment_error: f64,
}

/// A candidate attachment location in the reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    /// Index into the build's alignment list of the alignment that produced it.
    pub alignment: usize,
    pub location: [f64; 3],
}

/// A library attachment point picked for one part under one alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenAttachment {
    pub alignment: usize,
    pub part_id: String,
    /// Position in the part's own cloud frame, as listed in the library.
    pub local: [f64; 3],
    /// Position after the alignment transform.
    pub location: [f64; 3],
    pub kind: AttachmentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
    /// Distance to the nearest candidate site.
    pub distance: f64,
}

/// How per-alignment attachment distances are folded into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttAggregate {
    /// Sum over every alignment.
    #[default]
    Sum,
    Mean,
    /// Best alignment only.
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentFit {
    pub e_att: f64,
    pub chosen: Vec<ChosenAttachment>,
    pub sites: Vec<Site>,
    pub alignments: Vec<Alignment>,
}

fn flip_matrix(i: u8) -> Matrix3<f64> {
    let d = match i {
        0 => Vector3::new(1.0, 1.0, 1.0),
        1 => Vector3::new(1.0, -1.0, -1.0),
        2 => Vector3::new(-1.0, 1.0, -1.0),
        _ => Vector3::new(-1.0, -1.0, 1.0),
    };
    Matrix3::from_diagonal(&d)
}

fn check_arity(parts: &[&CandidatePart], reference: &ReferenceTool) -> Result<()> {
    if parts.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "build has {} parts but the reference tool has {} components",
            parts.len(),
            reference.len()
        )));
    }
    for p in parts {
        if p.cloud.is_empty() {
            return Err(Error::MissingCloud(p.id.clone()));
        }
    }
    Ok(())
}

/// Every PCA-frame alignment of `parts` onto the matching reference
/// components, ordered by alignment error and then by flip tuple.
pub fn align_parts(parts: &[&CandidatePart], reference: &ReferenceTool) -> Result<Vec<Alignment>> {
    check_arity(parts, reference)?;
    let m = parts.len();
    let mut base = Vec::with_capacity(m);
    let mut error = 0.0;
    for (part, comp) in parts.iter().zip(reference.components()) {
        let pf = part.frame();
        let rf = comp.frame();
        error += (0..3)
            .map(|i| (pf.eigenvalues[i].max(0.0).sqrt() - rf.eigenvalues[i].max(0.0).sqrt()).abs())
            .sum::<f64>()
            / 3.0;
        base.push((rf.basis(), pf.basis().transpose(), rf.center, pf.center));
    }
    let alignment_error = error / m as f64;

    let total = 4usize.checked_pow(m as u32).unwrap_or(usize::MAX).min(MAX_ALIGNMENTS);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut flips = vec![0u8; m];
        let mut c = code;
        for j in (0..m).rev() {
            flips[j] = (c % 4) as u8;
            c /= 4;
        }
        let transforms = base
            .iter()
            .zip(&flips)
            .map(|((q, pt, cr, cp), &f)| {
                let r = q * flip_matrix(f) * pt;
                RigidTransform::from_parts_unchecked(r, cr - r * cp)
            })
            .collect();
        out.push(Alignment {
            flips,
            transforms,
            alignment_error,
        });
    }
    // Enumeration order already follows the flip tuples.
    out.sort_by(|a, b| a.alignment_error.total_cmp(&b.alignment_error));
    Ok(out)
}

/// Joint locations of adjacent parts under each alignment: the centroid of
/// the closest cross-cloud pairs, deduplicated across alignments.
pub fn compute_intersections(alignments: &[Alignment], parts: &[&CandidatePart]) -> Result<Vec<Site>> {
    if alignments.is_empty() {
        return Err(Error::InvalidInput("no alignments".into()));
    }
    for p in parts {
        if p.cloud.is_empty() {
            return Err(Error::MissingCloud(p.id.clone()));
        }
    }
    let mut sites: Vec<Site> = Vec::new();
    for (ai, al) in alignments.iter().enumerate() {
        for j in 0..parts.len().saturating_sub(1) {
            let tj = &al.transforms[j];
            let tk = &al.transforms[j + 1];
            // Query part j against part j+1's tree, working in j+1's cloud frame.
            let to_k = tk.inverse().compose(tj);
            let pairs = closest_pairs_with(
                parts[j + 1].tree(),
                parts[j].cloud.points(),
                |p| to_k.apply(p),
                INTERSECTION_PAIRS,
            );
            let mut sum = Point::zeros();
            for pr in &pairs {
                sum += pr.a + pr.b;
            }
            let local = sum / (2 * pairs.len()) as f64;
            let loc = tk.apply(&local);
            if sites
                .iter()
                .all(|s| (Point::from(s.location) - loc).norm() >= SITE_DEDUP)
            {
                sites.push(Site {
                    alignment: ai,
                    location: loc.into(),
                });
            }
        }
    }
    Ok(sites)
}

/// Attachment error of one build.
///
/// Without a library the error is zero and the sites are returned for
/// exploration. With a library, every alignment picks for each part the
/// attachment point nearest to any site, and those distances are folded by
/// `aggregate`. A part listed with no attachment points makes the error
/// infinite; a part missing from the library leaves the build unscored.
pub fn attachment_fit(
    parts: &[&CandidatePart],
    library: Option<&AttachmentLibrary>,
    reference: &ReferenceTool,
    aggregate: AttAggregate,
) -> Result<AttachmentFit> {
    let alignments = align_parts(parts, reference)?;
    let sites = compute_intersections(&alignments, parts)?;
    let mut fit = AttachmentFit {
        e_att: 0.0,
        chosen: Vec::new(),
        sites,
        alignments,
    };
    let Some(lib) = library else {
        return Ok(fit);
    };
    let knowledge: Vec<Knowledge> = parts.iter().map(|p| lib.lookup(&p.id)).collect();
    if knowledge.iter().any(|k| matches!(k, Knowledge::KnownNone)) {
        fit.e_att = f64::INFINITY;
        return Ok(fit);
    }
    let mut lists = Vec::with_capacity(parts.len());
    for k in knowledge {
        match k {
            Knowledge::Points(pts) => lists.push(pts),
            _ => return Ok(fit),
        }
    }

    let site_pts: Vec<Point> = fit.sites.iter().map(|s| Point::from(s.location)).collect();
    let mut per_alignment = Vec::with_capacity(fit.alignments.len());
    for (ai, al) in fit.alignments.iter().enumerate() {
        let mut total = 0.0;
        for (j, pts) in lists.iter().enumerate() {
            let mut best: Option<(f64, Point, &AttachmentPoint)> = None;
            for a in pts.iter() {
                let w = al.transforms[j].apply(&a.point());
                let d = site_pts.iter().map(|s| (s - w).norm()).fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, w, a));
                }
            }
            let (d, w, a) = best.expect("attachment list is non-empty");
            total += d;
            fit.chosen.push(ChosenAttachment {
                alignment: ai,
                part_id: parts[j].id.clone(),
                local: a.location,
                location: w.into(),
                kind: a.kind,
                polarity: a.polarity,
                distance: d,
            });
        }
        per_alignment.push(total);
    }
    fit.e_att = match aggregate {
        AttAggregate::Sum => per_alignment.iter().sum(),
        AttAggregate::Mean => per_alignment.iter().sum::<f64>() / per_alignment.len() as f64,
        AttAggregate::Min => per_alignment.iter().copied().fold(f64::INFINITY, f64::min),
    };
    Ok(fit)
}

/// Index of the alignment whose chosen attachments sit closest to the sites,
/// ties going to the lower index.
pub fn best_alignment(chosen: &[ChosenAttachment]) -> Option<usize> {
    let mut totals: BTreeMap<usize, f64> = BTreeMap::new();
    for c in chosen {
        *totals.entry(c.alignment).or_insert(0.0) += c.distance;
    }
    totals
        .into_iter()
        .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
            Some((_, bd)) if bd <= d => acc,
            _ => Some((i, d)),
        })
        .map(|x| x.0)
}
