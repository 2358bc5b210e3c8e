//! ASCII PLY reading and writing. Only vertex positions are kept.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
enum Property {
    Scalar(String),
    /// List properties carry a count token followed by that many values.
    List(String),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n) | Property::List(n) => n,
        }
    }
}

const SCALAR_TYPES: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16", "int32",
    "uint32", "float32", "float64",
];

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&text);
    let frame = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_ply(&text, path, &frame)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_ply(text: &str, path: &Path, frame_id: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        Some((n, _)) => return Err(parse_err(path, n, "missing `ply` magic")),
        None => return Err(parse_err(path, 1, "empty file")),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (n, raw) in lines.by_ref() {
        let mut tok = raw.split_whitespace();
        match tok.next() {
            None => continue,
            Some("format") => {
                match tok.next() {
                    Some("ascii") => {}
                    Some(f) if f.starts_with("binary") => {
                        return Err(parse_err(
                            path,
                            n,
                            format!("{f} PLY is not supported; convert to ASCII"),
                        ))
                    }
                    other => return Err(parse_err(path, n, format!("unknown format {other:?}"))),
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(path, n, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(path, n, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, n, "property before any element"))?;
                let ty = tok.next().ok_or_else(|| parse_err(path, n, "property without type"))?;
                let prop = if ty == "list" {
                    let (_, _, name) = (tok.next(), tok.next(), tok.next());
                    Property::List(
                        name.ok_or_else(|| parse_err(path, n, "list property without name"))?
                            .to_string(),
                    )
                } else if SCALAR_TYPES.contains(&ty) {
                    Property::Scalar(
                        tok.next()
                            .ok_or_else(|| parse_err(path, n, "property without name"))?
                            .to_string(),
                    )
                } else {
                    return Err(parse_err(path, n, format!("unknown property type `{ty}`")));
                };
                el.properties.push(prop);
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(parse_err(path, n, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !header_done {
        return Err(parse_err(path, text.lines().count(), "missing end_header"));
    }
    if !saw_format {
        return Err(parse_err(path, 2, "missing format line"));
    }

    let vertex_idx = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(path, 1, "no vertex element"))?;
    let vprops = &elements[vertex_idx].properties;
    let find = |axis: &str| {
        vprops
            .iter()
            .position(|p| matches!(p, Property::Scalar(n) if n == axis))
            .ok_or_else(|| parse_err(path, 1, format!("vertex element lacks `{axis}` property")))
    };
    let (ix, iy, iz) = (find("x")?, find("y")?, find("z")?);

    let mut points = Vec::with_capacity(elements[vertex_idx].count);
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    for (ei, el) in elements.iter().enumerate() {
        for _ in 0..el.count {
            let (n, line) = body.next().ok_or_else(|| {
                parse_err(
                    path,
                    text.lines().count(),
                    format!("unexpected end of data in element `{}`", el.name),
                )
            })?;
            if ei != vertex_idx {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut values = [0.0f64; 3];
            let mut cursor = 0usize;
            for (pi, prop) in el.properties.iter().enumerate() {
                match prop {
                    Property::Scalar(_) => {
                        let t = toks
                            .get(cursor)
                            .ok_or_else(|| parse_err(path, n, format!("missing value for `{}`", prop.name())))?;
                        for (slot, want) in [(0, ix), (1, iy), (2, iz)] {
                            if pi == want {
                                values[slot] = t
                                    .parse::<f64>()
                                    .map_err(|_| parse_err(path, n, format!("bad number `{t}`")))?;
                            }
                        }
                        cursor += 1;
                    }
                    Property::List(_) => {
                        let len: usize = toks
                            .get(cursor)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| parse_err(path, n, "bad list length"))?;
                        cursor += 1 + len;
                    }
                }
            }
            let p = Point::new(values[0], values[1], values[2]);
            if !p.iter().all(|c| c.is_finite()) {
                return Err(parse_err(path, n, "non-finite coordinate"));
            }
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    PointCloud::new(points, frame_id)
}

pub fn ply_string(cloud: &PointCloud) -> Result<String> {
    cloud.ensure_non_empty()?;
    let mut s = String::with_capacity(64 + cloud.len() * 60);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment frame {}", cloud.frame_id());
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in cloud.points() {
        // `{:?}` prints the shortest representation that round-trips exactly.
        let _ = writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    Ok(s)
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let s = ply_string(cloud)?;
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<PointCloud> {
        parse_ply(s, Path::new("test.ply"), "t")
    }

    #[test]
    fn reads_three_vertices_and_skips_faces() {
        let s = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                 property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n\
                 end_header\n0 0 0 255\n1 0 0 255\n0 1 0 255\n3 0 1 2\n";
        let c = parse(s).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.points()[1], Point::new(1.0, 0.0, 0.0));
        assert_eq!(c.points()[2], Point::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn vertex_after_other_element() {
        let s = "ply\nformat ascii 1.0\nelement meta 1\nproperty int id\nelement vertex 1\n\
                 property double z\nproperty double y\nproperty double x\nend_header\n7\n3 2 1\n";
        let c = parse(s).unwrap();
        assert_eq!(c.points()[0], Point::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn malformed_header_names_line() {
        let s = "ply\nformat ascii 1.0\nelement vertex 1\nproperty quux x\nend_header\n0\n";
        match parse(s).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn binary_is_rejected() {
        let s = "ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n";
        match parse(s).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("binary"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_vertices_is_empty_cloud() {
        let s = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(parse(s), Err(Error::EmptyCloud)));
    }

    #[test]
    fn truncated_body_is_parse_error() {
        let s = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
        assert!(matches!(parse(s), Err(Error::Parse { .. })));
    }

    #[test]
    fn header_announces_vertex_count() {
        let c = PointCloud::from_xyz(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], "t").unwrap();
        assert!(ply_string(&c).unwrap().contains("element vertex 3\n"));
    }

    #[test]
    fn empty_cloud_is_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.ply");
        assert!(matches!(save_ply(&PointCloud::empty("t"), &p), Err(Error::EmptyCloud)));
        assert!(!p.exists());
    }

    #[test]
    fn io_error_names_path() {
        let c = PointCloud::from_xyz(&[[0.0; 3]], "t").unwrap();
        let err = save_ply(&c, "/nonexistent-dir/x.ply").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.ply"));
    }
}
