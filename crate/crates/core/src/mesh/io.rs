//! Mesh file formats.
//!
//! JSON: `nodes` (`[x, y, z]` arrays), `faces` (zero-based node loops),
//! `elements` (signed one-based face references), `node_sets`, `face_sets`.
//!
//! INP subset, one record per line, `**` starts a comment, a trailing comma
//! continues a record on the next line, keywords are case-insensitive:
//!
//! ```text
//! *NODE
//! id, x, y, z
//! *FACE
//! id, count, node_id_1, ..., node_id_count
//! *ELEMENT, TYPE=<any>
//! id, count, ±face_id_1, ..., ±face_id_count
//! *NSET, NSET=<name>
//! node_id, node_id, ...
//! *FSET, FSET=<name>
//! face_id, face_id, ...
//! ```
//!
//! Ids are arbitrary positive labels; a negative face id reverses the stored
//! loop for that element.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_mesh, FaceRef, Mesh, Point3, PolygonFace, Polyhedron};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Json,
    Inp,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(MeshFormat::Json),
            "inp" => Some(MeshFormat::Inp),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    nodes: Vec<[f64; 3]>,
    faces: Vec<Vec<usize>>,
    elements: Vec<Vec<i64>>,
    #[serde(default)]
    node_sets: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    face_sets: BTreeMap<String, Vec<usize>>,
}

/// Reads and validates a mesh.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mesh = match format {
        MeshFormat::Json => parse_json(&text)?,
        MeshFormat::Inp => parse_inp(&text)?,
    };
    let report = validate_mesh(&mesh);
    if !report.is_empty() {
        return Err(Error::Validation(report.to_string()));
    }
    Ok(mesh)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        MeshFormat::Json => to_json(mesh),
        MeshFormat::Inp => to_inp(mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses the JSON format without validating geometry.
pub fn parse_json(text: &str) -> Result<Mesh> {
    let file: MeshFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let mut elements = Vec::with_capacity(file.elements.len());
    for (e, refs) in file.elements.iter().enumerate() {
        let faces = refs
            .iter()
            .map(|&v| {
                FaceRef::from_signed(v)
                    .filter(|fr| fr.face < file.faces.len())
                    .ok_or_else(|| Error::Parse(format!("element {e}: invalid face reference {v}")))
            })
            .collect::<Result<Vec<_>>>()?;
        elements.push(Polyhedron::new(faces));
    }
    for (f, face) in file.faces.iter().enumerate() {
        if let Some(n) = face.iter().find(|&&n| n >= file.nodes.len()) {
            return Err(Error::Parse(format!(
                "face {f}: node index {n} out of range"
            )));
        }
    }
    Ok(Mesh {
        nodes: file
            .nodes
            .iter()
            .map(|p| Point3::new(p[0], p[1], p[2]))
            .collect(),
        faces: file.faces.into_iter().map(PolygonFace::new).collect(),
        elements,
        node_sets: file.node_sets,
        face_sets: file.face_sets,
    })
}

pub fn to_json(mesh: &Mesh) -> String {
    let file = MeshFile {
        nodes: mesh.nodes.iter().map(|p| [p.x, p.y, p.z]).collect(),
        faces: mesh.faces.iter().map(|f| f.nodes.clone()).collect(),
        elements: mesh
            .elements
            .iter()
            .map(|e| e.faces.iter().map(FaceRef::signed).collect())
            .collect(),
        node_sets: mesh.node_sets.clone(),
        face_sets: mesh.face_sets.clone(),
    };
    serde_json::to_string(&file).expect("mesh serialization cannot fail")
}

enum Block {
    None,
    Node,
    Face,
    Element,
    NodeSet(String),
    FaceSet(String),
}

/// Parses the INP subset without validating geometry.
pub fn parse_inp(text: &str) -> Result<Mesh> {
    let mut records: Vec<(usize, String)> = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("**") {
            continue;
        }
        let (start, mut acc) = pending.take().unwrap_or((i + 1, String::new()));
        acc.push_str(line);
        if line.ends_with(',') && !line.starts_with('*') {
            pending = Some((start, acc));
        } else {
            records.push((start, acc));
        }
    }
    if let Some(p) = pending {
        records.push(p);
    }

    let err = |line: usize, msg: &str| Error::Parse(format!("line {line}: {msg}"));
    let mut block = Block::None;
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut face_ids: HashMap<i64, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut raw_faces: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut raw_elements: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut raw_nsets: BTreeMap<String, Vec<(usize, i64)>> = BTreeMap::new();
    let mut raw_fsets: BTreeMap<String, Vec<(usize, i64)>> = BTreeMap::new();

    for (line, rec) in records {
        if let Some(kw) = rec.strip_prefix('*') {
            let mut parts = kw.split(',').map(str::trim);
            let name = parts.next().unwrap_or("").to_ascii_uppercase();
            let param = |key: &str| {
                kw.split(',').skip(1).find_map(|p| {
                    let (k, v) = p.split_once('=')?;
                    k.trim()
                        .eq_ignore_ascii_case(key)
                        .then(|| v.trim().to_string())
                })
            };
            block = match name.as_str() {
                "NODE" => Block::Node,
                "FACE" => Block::Face,
                "ELEMENT" => Block::Element,
                "NSET" => {
                    Block::NodeSet(param("NSET").ok_or_else(|| err(line, "*NSET needs NSET=name"))?)
                }
                "FSET" => {
                    Block::FaceSet(param("FSET").ok_or_else(|| err(line, "*FSET needs FSET=name"))?)
                }
                other => return Err(err(line, &format!("unsupported keyword *{other}"))),
            };
            continue;
        }
        let fields: Vec<&str> = rec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        match &block {
            Block::None => return Err(err(line, "data line before any keyword")),
            Block::Node => {
                if fields.len() != 4 {
                    return Err(err(line, "node record needs id, x, y, z"));
                }
                let id: i64 = fields[0].parse().map_err(|_| err(line, "bad node id"))?;
                let mut c = [0.0; 3];
                for a in 0..3 {
                    c[a] = fields[a + 1]
                        .parse()
                        .map_err(|_| err(line, "bad coordinate"))?;
                }
                if node_ids.insert(id, nodes.len()).is_some() {
                    return Err(err(line, &format!("duplicate node id {id}")));
                }
                nodes.push(Point3::new(c[0], c[1], c[2]));
            }
            Block::Face | Block::Element => {
                let ints = fields
                    .iter()
                    .map(|s| s.parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err(line, "non-integer field"))?;
                if ints.len() < 2 || ints[1] < 0 || ints.len() != 2 + ints[1] as usize {
                    return Err(err(line, "record needs id, count and count entries"));
                }
                if matches!(block, Block::Face) {
                    if face_ids.insert(ints[0], raw_faces.len()).is_some() {
                        return Err(err(line, &format!("duplicate face id {}", ints[0])));
                    }
                    raw_faces.push((line, ints[2..].to_vec()));
                } else {
                    raw_elements.push((line, ints[2..].to_vec()));
                }
            }
            Block::NodeSet(name) | Block::FaceSet(name) => {
                let target = if matches!(block, Block::NodeSet(_)) {
                    &mut raw_nsets
                } else {
                    &mut raw_fsets
                };
                let entry = target.entry(name.clone()).or_default();
                for f in fields {
                    entry.push((line, f.parse().map_err(|_| err(line, "bad set member"))?));
                }
            }
        }
    }

    let faces = raw_faces
        .into_iter()
        .map(|(line, ids)| {
            ids.iter()
                .map(|id| {
                    node_ids
                        .get(id)
                        .copied()
                        .ok_or_else(|| err(line, &format!("unknown node {id}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(PolygonFace::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let elements = raw_elements
        .into_iter()
        .map(|(line, ids)| {
            ids.iter()
                .map(|&id| {
                    let f = face_ids
                        .get(&id.abs())
                        .ok_or_else(|| err(line, &format!("unknown face {}", id.abs())))?;
                    Ok(FaceRef::new(*f, id < 0))
                })
                .collect::<Result<Vec<_>>>()
                .map(Polyhedron::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let resolve = |sets: BTreeMap<String, Vec<(usize, i64)>>, ids: &HashMap<i64, usize>| {
        sets.into_iter()
            .map(|(name, members)| {
                let v = members
                    .into_iter()
                    .map(|(line, id)| {
                        ids.get(&id)
                            .copied()
                            .ok_or_else(|| err(line, &format!("unknown id {id} in set {name}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((name, v))
            })
            .collect::<Result<BTreeMap<_, _>>>()
    };
    Ok(Mesh {
        nodes,
        faces,
        elements,
        node_sets: resolve(raw_nsets, &node_ids)?,
        face_sets: resolve(raw_fsets, &face_ids)?,
    })
}

pub fn to_inp(mesh: &Mesh) -> String {
    let mut s = String::from("*NODE\n");
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{}, {:?}, {:?}, {:?}", i + 1, p.x, p.y, p.z);
    }
    s.push_str("*FACE\n");
    for (i, f) in mesh.faces.iter().enumerate() {
        let ids: Vec<String> = f.nodes.iter().map(|n| (n + 1).to_string()).collect();
        let _ = writeln!(s, "{}, {}, {}", i + 1, ids.len(), ids.join(", "));
    }
    s.push_str("*ELEMENT, TYPE=UPOLY\n");
    for (i, e) in mesh.elements.iter().enumerate() {
        let ids: Vec<String> = e.faces.iter().map(|fr| fr.signed().to_string()).collect();
        let _ = writeln!(s, "{}, {}, {}", i + 1, ids.len(), ids.join(", "));
    }
    for (name, set) in &mesh.node_sets {
        let _ = writeln!(s, "*NSET, NSET={name}");
        for chunk in set.chunks(16) {
            let ids: Vec<String> = chunk.iter().map(|n| (n + 1).to_string()).collect();
            let _ = writeln!(s, "{}", ids.join(", "));
        }
    }
    for (name, set) in &mesh.face_sets {
        let _ = writeln!(s, "*FSET, FSET={name}");
        for chunk in set.chunks(16) {
            let ids: Vec<String> = chunk.iter().map(|n| (n + 1).to_string()).collect();
            let _ = writeln!(s, "{}", ids.join(", "));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_grid, Aabb};

    const CUBE: &str = r#"{
        "nodes": [[0,0,0],[1,0,0],[1,1,0],[0,1,0],[0,0,1],[1,0,1],[1,1,1],[0,1,1]],
        "faces": [[0,3,2,1],[4,5,6,7],[0,1,5,4],[1,2,6,5],[2,3,7,6],[3,0,4,7]],
        "elements": [[1,2,3,4,5,6]],
        "node_sets": {"bottom": [0,1,2,3]}
    }"#;

    #[test]
    fn json_cube() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.json");
        std::fs::write(&p, CUBE).unwrap();
        let m = load_mesh(&p, MeshFormat::Json).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.faces.len(), 6);
        assert_eq!(m.node_sets["bottom"], vec![0, 1, 2, 3]);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let mut m = box_grid(
            Aabb::new([0.1, -0.3, 1.0 / 3.0], [1.7, 2.0, 3.1]),
            [3, 2, 2],
        );
        m.face_sets.insert("top".into(), vec![1, 2]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_mesh(&m, &p, MeshFormat::Json).unwrap();
        let back = load_mesh(&p, MeshFormat::Json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn inp_round_trip() {
        let m = box_grid(Aabb::new([0.0; 3], [1.0, 2.0, 0.5]), [2, 1, 1]);
        let back = parse_inp(&to_inp(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn inp_continuation_and_comments() {
        let text = "** cube\n*NODE\n1,0,0,0\n2,1,0,0\n3,1,1,0\n4,0,1,0\n5,0,0,1\n6,1,0,1\n7,1,1,1\n8,0,1,1\n\
            *FACE\n1, 4, 1, 4, 3, 2\n2, 4, 5, 6, 7, 8\n3, 4, 1, 2, 6, 5\n4, 4, 2, 3, 7, 6\n5, 4, 3, 4, 8, 7\n6, 4, 4, 1, 5, 8\n\
            *ELEMENT, TYPE=U1\n1, 6, 1, 2, 3,\n4, 5, 6\n*NSET, NSET=top\n5, 6, 7, 8\n";
        let m = parse_inp(text).unwrap();
        assert_eq!(m.elements[0].faces.len(), 6);
        assert_eq!(m.node_sets["top"], vec![4, 5, 6, 7]);
        assert!(validate_mesh(&m).is_empty());
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            parse_json("{\"nodes\": [1,2"),
            Err(Error::Parse(_))
        ));
        let bad = CUBE.replace("[[1,2,3,4,5,6]]", "[[1,2,3,4,5,9]]");
        assert!(matches!(parse_json(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn inward_face_fails_to_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.json");
        std::fs::write(&p, CUBE.replace("[[1,2,3,4,5,6]]", "[[1,2,-3,4,5,6]]")).unwrap();
        match load_mesh(&p, MeshFormat::Json) {
            Err(Error::Validation(msg)) => {
                assert!(msg.contains("non-outward normal, element 0, face 2"))
            }
            other => panic!("{other:?}"),
        }
    }
}
