//! Build ranking: every ordered tuple of candidate parts is scored against the
//! reference tool by shape, scale, proportion and attachment error.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::attachment::{attachment_fit, Alignment, AttAggregate, AttachmentLibrary, ChosenAttachment, Site};
use crate::error::{Error, Result};
use crate::geom::{pca_frame, KdTree, PcaFrame, PointCloud};
use crate::superquadric::{canonicalize, fit_superquadric, FitConfig, SuperquadricParams};

/// One fitted component of the reference tool.
#[derive(Debug, Clone)]
pub struct ReferenceComponent {
    pub name: String,
    pub cloud: PointCloud,
    pub sq: SuperquadricParams,
    frame: PcaFrame,
}

impl ReferenceComponent {
    pub fn new(name: impl Into<String>, cloud: PointCloud, sq: SuperquadricParams) -> Result<Self> {
        sq.validate()?;
        let frame = pca_frame(&cloud)?;
        Ok(Self {
            name: name.into(),
            cloud,
            sq,
            frame,
        })
    }

    pub fn fit(name: impl Into<String>, cloud: PointCloud, config: &FitConfig) -> Result<Self> {
        let sq = fit_superquadric(&cloud, config)?.params;
        Self::new(name, cloud, sq)
    }

    pub fn frame(&self) -> &PcaFrame {
        &self.frame
    }
}

/// Ordered components `(r1..rm)` of the tool to imitate, at real-world scale.
#[derive(Debug, Clone)]
pub struct ReferenceTool {
    components: Vec<ReferenceComponent>,
}

impl ReferenceTool {
    pub fn new(components: Vec<ReferenceComponent>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a reference tool needs at least 2 components, got {}",
                components.len()
            )));
        }
        Ok(Self { components })
    }

    /// Fits every cloud (in parallel) and assembles the tool.
    pub fn fit(named: Vec<(String, PointCloud)>, config: &FitConfig) -> Result<Self> {
        let comps = named
            .into_par_iter()
            .map(|(name, cloud)| ReferenceComponent::fit(name, cloud, config))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn components(&self) -> &[ReferenceComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// One part found in the scene.
#[derive(Debug, Clone)]
pub struct CandidatePart {
    pub id: String,
    pub cloud: PointCloud,
    pub sq: SuperquadricParams,
    frame: PcaFrame,
    tree: Arc<KdTree>,
}

impl CandidatePart {
    pub fn new(id: impl Into<String>, cloud: PointCloud, sq: SuperquadricParams) -> Result<Self> {
        sq.validate()?;
        let frame = pca_frame(&cloud)?;
        let tree = Arc::new(KdTree::new(cloud.points()));
        Ok(Self {
            id: id.into(),
            cloud,
            sq,
            frame,
            tree,
        })
    }

    pub fn fit(id: impl Into<String>, cloud: PointCloud, config: &FitConfig) -> Result<Self> {
        let sq = fit_superquadric(&cloud, config)?.params;
        Self::new(id, cloud, sq)
    }

    /// Fits every cloud in parallel, keeping the input order.
    pub fn fit_all(named: Vec<(String, PointCloud)>, config: &FitConfig) -> Result<Vec<Self>> {
        named
            .into_par_iter()
            .map(|(id, cloud)| Self::fit(id, cloud, config))
            .collect()
    }

    pub fn frame(&self) -> &PcaFrame {
        &self.frame
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }
}

/// Importance weights, bound positionally as `[scale, shape, ratio, attachment]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ScoreWeights {
    pub scale: f64,
    pub shape: f64,
    pub ratio: f64,
    pub attachment: f64,
}

impl ScoreWeights {
    pub fn new(scale: f64, shape: f64, ratio: f64, attachment: f64) -> Result<Self> {
        let w = Self {
            scale,
            shape,
            ratio,
            attachment,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(format!(
                "weights must be finite and non-negative, got {a:?}"
            )));
        }
        if a.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidInput("weights must not all be zero".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.scale, self.shape, self.ratio, self.attachment]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let a = self.as_array().map(|x| x * factor);
        Self::try_from(a)
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            scale: 1.0,
            shape: 1.0,
            ratio: 5.0,
            attachment: 5.0,
        }
    }
}

impl TryFrom<[f64; 4]> for ScoreWeights {
    type Error = Error;

    fn try_from(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<ScoreWeights> for [f64; 4] {
    fn from(w: ScoreWeights) -> Self {
        w.as_array()
    }
}

impl FromStr for ScoreWeights {
    type Err = Error;

    /// Parses `"l1,l2,l3,l4"`.
    fn from_str(s: &str) -> Result<Self> {
        let vals = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidInput(format!("bad weights `{s}`: {e}")))?;
        let arr: [f64; 4] = vals
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("expected 4 comma-separated weights, got `{s}`")))?;
        Self::try_from(arr)
    }
}

impl fmt::Display for ScoreWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.scale, self.shape, self.ratio, self.attachment)
    }
}

/// One scored ordered tuple of parts; position `j` pairs with component `j`.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateBuild {
    pub parts: Vec<String>,
    pub indices: Vec<usize>,
    pub e_shape: f64,
    pub e_scale: f64,
    pub e_ratio: f64,
    #[serde(serialize_with = "serialize_maybe_inf")]
    pub e_att: f64,
    #[serde(serialize_with = "serialize_maybe_inf")]
    pub e_const: f64,
    pub attachments: Vec<ChosenAttachment>,
    pub sites: Vec<Site>,
    #[serde(skip)]
    pub alignments: Vec<Alignment>,
    /// Canonical fitted parameters of the parts, in tuple order.
    #[serde(skip)]
    pub shapes: Vec<SuperquadricParams>,
}

impl CandidateBuild {
    /// Recomputes `e_const` from the stored terms.
    pub fn recompute(&mut self, weights: &ScoreWeights) {
        self.e_const = aggregate_error(self.e_scale, self.e_shape, self.e_ratio, self.e_att, weights);
    }

    pub fn label(&self) -> String {
        self.parts.join("+")
    }
}

/// Writes infinite values as the string `"inf"` since JSON has no infinity.
pub fn serialize_maybe_inf<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() && *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

/// All ordered `m`-tuples of distinct indices below `n`, lexicographic.
pub fn permutations(n: usize, m: usize) -> Result<Vec<Vec<usize>>> {
    if n < m {
        return Err(Error::InsufficientParts {
            available: n,
            required: m,
        });
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    let mut used = vec![false; n];
    fn rec(n: usize, m: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, m, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, m, &mut cur, &mut used, &mut out);
    Ok(out)
}

/// Ordered `m`-tuples of parts, lexicographic in part index.
pub fn permute_candidates(parts: &[CandidatePart], m: usize) -> Result<Vec<Vec<&CandidatePart>>> {
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "builds need at least 2 parts, got m = {m}"
        )));
    }
    Ok(permutations(parts.len(), m)?
        .into_iter()
        .map(|t| t.into_iter().map(|i| &parts[i]).collect())
        .collect())
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// L1 distance between the canonical shape exponents.
pub fn shape_error(r: &SuperquadricParams, c: &SuperquadricParams) -> f64 {
    l1(&canonicalize(r).shape, &canonicalize(c).shape)
}

/// L1 distance between the canonical scale vectors, in meters.
pub fn scale_error(r: &SuperquadricParams, c: &SuperquadricParams) -> f64 {
    l1(&canonicalize(r).scale, &canonicalize(c).scale)
}

/// Elementwise ratio of the canonical scales of `a` over those of `b`.
pub fn rel(a: &SuperquadricParams, b: &SuperquadricParams) -> [f64; 3] {
    let (a, b) = (canonicalize(a).scale, canonicalize(b).scale);
    [a[0] / b[0], a[1] / b[1], a[2] / b[2]]
}

/// L1 distance between `rel(r_j, r_k)` and `rel(c_j, c_k)`.
pub fn ratio_error(
    rj: &SuperquadricParams,
    rk: &SuperquadricParams,
    cj: &SuperquadricParams,
    ck: &SuperquadricParams,
) -> f64 {
    l1(&rel(rj, rk), &rel(cj, ck))
}

/// Weighted sum of the four terms; an infinite term makes the sum infinite
/// whatever its weight.
pub fn aggregate_error(e_scale: f64, e_shape: f64, e_ratio: f64, e_att: f64, w: &ScoreWeights) -> f64 {
    let terms = [e_scale, e_shape, e_ratio, e_att];
    if terms.iter().any(|t| t.is_infinite()) {
        return f64::INFINITY;
    }
    w.scale * e_scale + w.shape * e_shape + w.ratio * e_ratio + w.attachment * e_att
}

/// Orders builds by `e_const` (infinite last), then by tuple indices.
pub fn compare_builds(a: &CandidateBuild, b: &CandidateBuild) -> Ordering {
    a.e_const.total_cmp(&b.e_const).then_with(|| a.indices.cmp(&b.indices))
}

pub fn sort_builds(builds: &mut [CandidateBuild]) {
    builds.sort_by(compare_builds);
}

/// Scores one ordered tuple of parts.
pub fn score_build(
    reference: &ReferenceTool,
    parts: &[&CandidatePart],
    indices: Vec<usize>,
    weights: &ScoreWeights,
    library: Option<&AttachmentLibrary>,
    aggregate: AttAggregate,
) -> Result<CandidateBuild> {
    let comps = reference.components();
    let m = comps.len();
    if parts.len() != m {
        return Err(Error::InvalidInput(format!(
            "build has {} parts for {m} components",
            parts.len()
        )));
    }
    let mut e_shape = 0.0;
    let mut e_scale = 0.0;
    for (r, c) in comps.iter().zip(parts) {
        e_shape += shape_error(&r.sq, &c.sq);
        e_scale += scale_error(&r.sq, &c.sq);
    }
    let mut e_ratio = 0.0;
    for j in 0..m {
        for k in 0..m {
            if j != k {
                e_ratio += ratio_error(&comps[j].sq, &comps[k].sq, &parts[j].sq, &parts[k].sq);
            }
        }
    }
    let fit = attachment_fit(parts, library, reference, aggregate)?;
    let e_const = aggregate_error(e_scale, e_shape, e_ratio, fit.e_att, weights);
    Ok(CandidateBuild {
        parts: parts.iter().map(|p| p.id.clone()).collect(),
        indices,
        e_shape,
        e_scale,
        e_ratio,
        e_att: fit.e_att,
        e_const,
        attachments: fit.chosen,
        sites: fit.sites,
        alignments: fit.alignments,
        shapes: parts.iter().map(|p| canonicalize(&p.sq)).collect(),
    })
}

/// Scores every ordered tuple of `candidates` and returns them sorted, best
/// first. Tuples are scored in parallel; the final order is deterministic.
pub fn rank_builds(
    reference: &ReferenceTool,
    candidates: &[CandidatePart],
    weights: &ScoreWeights,
    library: Option<&AttachmentLibrary>,
    aggregate: AttAggregate,
) -> Result<Vec<CandidateBuild>> {
    weights.validate()?;
    for (i, a) in candidates.iter().enumerate() {
        if candidates[..i].iter().any(|b| b.id == a.id) {
            return Err(Error::InvalidInput(format!("duplicate part id `{}`", a.id)));
        }
    }
    let tuples = permutations(candidates.len(), reference.len())?;
    let mut builds = tuples
        .into_par_iter()
        .map(|idx| {
            let parts: Vec<&CandidatePart> = idx.iter().map(|&i| &candidates[i]).collect();
            score_build(reference, &parts, idx, weights, library, aggregate)
        })
        .collect::<Result<Vec<_>>>()?;
    sort_builds(&mut builds);
    Ok(builds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attachment::AttachmentPoint;
    use crate::superquadric::sample_surface;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn sq(scale: [f64; 3], shape: [f64; 2]) -> SuperquadricParams {
        SuperquadricParams::new(scale, shape, [0.0; 3])
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations(4, 2).unwrap().len(), 12);
        assert_eq!(permutations(2, 2).unwrap(), vec![vec![0, 1], vec![1, 0]]);
        let p = permutations(5, 3).unwrap();
        assert_eq!(p.len(), 60);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        // Brute force over all index triples.
        let mut brute = Vec::new();
        for a in 0..5 {
            for b in 0..5 {
                for c in 0..5 {
                    if a != b && b != c && a != c {
                        brute.push(vec![a, b, c]);
                    }
                }
            }
        }
        assert_eq!(p, brute);
        assert!(matches!(
            permutations(1, 2),
            Err(Error::InsufficientParts {
                available: 1,
                required: 2
            })
        ));
    }

    #[test]
    fn shape_error_examples() {
        let r = sq([0.1, 0.05, 0.2], [1.0, 1.0]);
        assert_eq!(shape_error(&r, &r), 0.0);
        let c = sq([0.1, 0.05, 0.2], [0.3, 0.5]);
        assert!((shape_error(&r, &c) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn scale_error_examples() {
        let r = sq([0.15, 0.02, 0.02], [1.0, 1.0]);
        let c = sq([0.10, 0.02, 0.02], [1.0, 1.0]);
        assert_eq!(scale_error(&r, &r), 0.0);
        assert!((scale_error(&r, &c) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn scale_error_ignores_axis_relabeling() {
        let r = sq([0.15, 0.03, 0.02], [0.5, 1.0]).with_euler([0.2, 0.1, -0.3]);
        let c = sq([0.12, 0.04, 0.05], [0.5, 1.0]).with_euler([0.3, -0.2, 0.4]);
        let mut twin = c;
        twin.scale = [c.scale[1], c.scale[0], c.scale[2]];
        let quarter = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        twin.set_rotation(&(c.rotation() * quarter));
        assert!((scale_error(&r, &c) - scale_error(&r, &twin)).abs() < 1e-12);
    }

    #[test]
    fn ratio_error_examples() {
        let rj = sq([0.3, 0.02, 0.02], [1.0, 1.0]);
        let rk = sq([0.1, 0.02, 0.02], [1.0, 1.0]);
        let s = 0.7;
        let cj = sq(rj.scale.map(|x| x * s), [1.0, 1.0]);
        let ck = sq(rk.scale.map(|x| x * s), [1.0, 1.0]);
        assert!(ratio_error(&rj, &rk, &cj, &ck).abs() < 1e-12);

        let cj = sq([0.1, 0.02, 0.02], [1.0, 1.0]);
        assert!((ratio_error(&rj, &rk, &cj, &rk) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        let w = ScoreWeights::default();
        assert_eq!(aggregate_error(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(aggregate_error(1.0, 2.0, 3.0, 4.0, &w), 38.0);
        assert_eq!(aggregate_error(1.0, 2.0, 3.0, f64::INFINITY, &w), f64::INFINITY);
        let no_att = ScoreWeights::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(aggregate_error(0.0, 0.0, 0.0, f64::INFINITY, &no_att), f64::INFINITY);
    }

    #[test]
    fn weights_parse_and_validate() {
        let w: ScoreWeights = "1, 1,5,5".parse().unwrap();
        assert_eq!(w, ScoreWeights::default());
        assert!("1,1,5".parse::<ScoreWeights>().is_err());
        assert!("0,0,0,0".parse::<ScoreWeights>().is_err());
        assert!("1,-1,0,0".parse::<ScoreWeights>().is_err());
        let j: ScoreWeights = serde_json::from_str("[0,1,0,0]").unwrap();
        assert_eq!(j.shape, 1.0);
        assert_eq!(serde_json::to_string(&w).unwrap(), "[1.0,1.0,5.0,5.0]");
    }

    fn cloud_of(s: &SuperquadricParams, seed: u64) -> PointCloud {
        sample_surface(s, 300, 0.0, seed).unwrap()
    }

    fn tool() -> ReferenceTool {
        let h = sq([0.015, 0.012, 0.12], [0.4, 0.8]);
        let mut k = sq([0.05, 0.015, 0.02], [0.3, 0.3]);
        k.center = [0.0, 0.0, 0.13];
        ReferenceTool::new(vec![
            ReferenceComponent::new("handle", cloud_of(&h, 1), h).unwrap(),
            ReferenceComponent::new("head", cloud_of(&k, 2), k).unwrap(),
        ])
        .unwrap()
    }

    fn part(id: &str, s: SuperquadricParams, seed: u64) -> CandidatePart {
        CandidatePart::new(id, cloud_of(&s, seed), s).unwrap()
    }

    #[test]
    fn single_term_dominance() {
        let r = tool();
        let w = ScoreWeights::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let rs = r.components();
        let x0 = part(
            "x0",
            SuperquadricParams {
                center: [0.5, 0.0, 0.0],
                ..rs[0].sq
            },
            3,
        );
        let x1 = part(
            "x1",
            SuperquadricParams {
                center: [0.5, 0.3, 0.0],
                ..rs[1].sq
            },
            4,
        );
        let y0 = part("y0", sq([0.015, 0.012, 0.12], [1.5, 1.5]), 5);
        let y1 = part(
            "y1",
            SuperquadricParams {
                center: [0.0, 0.4, 0.0],
                ..sq([0.05, 0.015, 0.02], [1.4, 1.9])
            },
            6,
        );
        let builds = rank_builds(&r, &[y0, x1, y1, x0], &w, None, AttAggregate::Sum).unwrap();
        assert_eq!(builds.len(), 12);
        assert_eq!(builds[0].parts, vec!["x0", "x1"]);
        assert!(builds[0].e_const.abs() < 1e-12);
        assert!(builds.windows(2).all(|b| b[0].e_const <= b[1].e_const));
    }

    #[test]
    fn known_empty_part_sorts_last() {
        let r = tool();
        let parts: Vec<_> = (0..4)
            .map(|i| {
                let mut s = sq([0.02 + 0.01 * i as f64, 0.015, 0.05 + 0.02 * i as f64], [0.5, 1.0]);
                s.center = [0.3 * i as f64, 0.0, 0.0];
                part(&format!("p{i}"), s, 10 + i as u64)
            })
            .collect();
        let mut lib = AttachmentLibrary::new();
        for p in &parts {
            let a = p.cloud.points()[0];
            lib.insert(p.id.clone(), vec![AttachmentPoint::magnet(a.into(), None)]);
        }
        lib.insert("p2", vec![]);
        lib.validate_against(&parts).unwrap();
        let builds = rank_builds(&r, &parts, &ScoreWeights::default(), Some(&lib), AttAggregate::Sum).unwrap();
        let first_inf = builds.iter().position(|b| b.e_const.is_infinite()).unwrap();
        assert_eq!(first_inf, 6);
        for b in &builds[first_inf..] {
            assert!(b.parts.contains(&"p2".to_string()));
            assert_eq!(b.e_att, f64::INFINITY);
        }
        for b in &builds[..first_inf] {
            assert!(!b.parts.contains(&"p2".to_string()));
        }
        let json = serde_json::to_value(&builds[11]).unwrap();
        assert_eq!(json["e_const"], "inf");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = tool();
        let s = sq([0.02, 0.02, 0.05], [1.0, 1.0]);
        let parts = vec![part("a", s, 1), part("a", s, 2)];
        assert!(rank_builds(&r, &parts, &ScoreWeights::default(), None, AttAggregate::Sum).is_err());
    }

    proptest! {
        #[test]
        fn ratio_double_loop_is_sum_over_ordered_pairs(
            a in prop::array::uniform3(0.01f64..0.2),
            b in prop::array::uniform3(0.01f64..0.2),
            c in prop::array::uniform3(0.01f64..0.2),
            d in prop::array::uniform3(0.01f64..0.2),
        ) {
            let (rj, rk, cj, ck) = (sq(a, [1.0, 1.0]), sq(b, [1.0, 1.0]), sq(c, [1.0, 1.0]), sq(d, [1.0, 1.0]));
            let forward = ratio_error(&rj, &rk, &cj, &ck);
            let backward = ratio_error(&rk, &rj, &ck, &cj);
            // Reversed order compares reciprocal ratios.
            let (ca, cb, cc, cd) = (canonicalize(&rj).scale, canonicalize(&rk).scale, canonicalize(&cj).scale, canonicalize(&ck).scale);
            let want: f64 = (0..3).map(|i| (cb[i] / ca[i] - cd[i] / cc[i]).abs()).sum();
            prop_assert!((backward - want).abs() < 1e-9);
            prop_assert!(forward >= 0.0);
        }

        #[test]
        fn shape_error_matches_l1(e in prop::array::uniform4(0.1f64..2.0)) {
            let r = sq([0.1, 0.05, 0.2], [e[0], e[1]]);
            let c = sq([0.1, 0.05, 0.2], [e[2], e[3]]);
            let want = (e[0] - e[2]).abs() + (e[1] - e[3]).abs();
            prop_assert!((shape_error(&r, &c) - want).abs() < 1e-12);
        }
    }
}
