//! Mesh files: native `trapmesh v1` text format and STL import.
//!
//! ```text
//! trapmesh v1
//! e <electrode_id> <rf|dc|ground>
//! v <x> <y> <z>
//! f <i> <j> <k> <electrode_id> [scalar]
//! ```
//! Indices are 0-based, lengths in metres, `#` starts a comment line.
//! Numbers are written in shortest round-trip form, so export followed by
//! import is bit-exact.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use crate::error::{Result, TrapError};
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::mesh::{weld_vertices, Electrode, ElectrodeRole, TriangleMesh};
use super::PatchSet;

pub const TRAPMESH_HEADER: &str = "trapmesh v1";

/// Mesh plus its electrode table and optional per-face scalar column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledMesh<T> {
    pub mesh: TriangleMesh<T>,
    pub electrodes: Vec<Electrode>,
    pub scalars: Option<Vec<f64>>,
}

fn io_err(path: &str, e: std::io::Error) -> TrapError {
    TrapError::Io {
        path: path.to_string(),
        source: e,
    }
}

pub fn write_trapmesh<T: Real, W: Write>(
    w: &mut W,
    mesh: &TriangleMesh<T>,
    electrodes: &[Electrode],
    scalars: Option<&[f64]>,
) -> std::io::Result<()> {
    writeln!(w, "{TRAPMESH_HEADER}")?;
    for e in electrodes {
        writeln!(w, "e {} {}", e.id, e.role.as_str())?;
    }
    for v in &mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for (f, face) in mesh.faces.iter().enumerate() {
        let id = &electrodes[mesh.face_electrode[f]].id;
        match scalars {
            Some(s) => writeln!(w, "f {} {} {} {} {:?}", face[0], face[1], face[2], id, s[f])?,
            None => writeln!(w, "f {} {} {} {}", face[0], face[1], face[2], id)?,
        }
    }
    Ok(())
}

/// Welded mesh of a patch set, for heatmap export (face order = patch order).
pub fn patch_mesh<T: Real>(patches: &PatchSet<T>) -> TriangleMesh<T> {
    let mut mesh = TriangleMesh::default();
    for (t, &e) in patches.triangles.iter().zip(&patches.electrode) {
        mesh.push_triangle(*t, e);
    }
    weld_vertices(&mut mesh);
    mesh
}

fn parse<V: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<V> {
    let tok = tok.ok_or_else(|| TrapError::Parse {
        location: format!("line {line}"),
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| TrapError::Parse {
        location: format!("line {line}"),
        message: format!("invalid {what} `{tok}`"),
    })
}

fn parse_real<T: Real>(tok: Option<&str>, line: usize) -> Result<T> {
    let s: &str = tok.ok_or_else(|| TrapError::Parse {
        location: format!("line {line}"),
        message: "missing coordinate".into(),
    })?;
    T::from_str_radix(s, 10).map_err(|_| TrapError::Parse {
        location: format!("line {line}"),
        message: format!("invalid coordinate `{s}`"),
    })
}

pub fn read_trapmesh<T: Real, R: BufRead>(r: R) -> Result<LabelledMesh<T>> {
    let mut mesh = TriangleMesh::default();
    let mut electrodes: Vec<Electrode> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut scalars: Vec<f64> = Vec::new();
    let mut has_scalar: Option<bool> = None;
    let mut seen_header = false;
    for (n, line) in r.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| io_err(&format!("line {lineno}"), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !seen_header {
            if trimmed != TRAPMESH_HEADER {
                return Err(TrapError::Parse {
                    location: format!("line {lineno}"),
                    message: format!("expected `{TRAPMESH_HEADER}` header"),
                });
            }
            seen_header = true;
            continue;
        }
        let mut tok = trimmed.split_whitespace();
        match tok.next() {
            Some("e") => {
                let id: String = parse(tok.next(), lineno, "electrode id")?;
                let role_s: String = parse(tok.next(), lineno, "electrode role")?;
                let role = ElectrodeRole::parse(&role_s).ok_or_else(|| TrapError::Parse {
                    location: format!("line {lineno}"),
                    message: format!("unknown role `{role_s}`"),
                })?;
                if index.contains_key(&id) {
                    return Err(TrapError::Parse {
                        location: format!("line {lineno}"),
                        message: format!("duplicate electrode `{id}`"),
                    });
                }
                index.insert(id.clone(), electrodes.len());
                electrodes.push(Electrode::new(id, role));
            }
            Some("v") => {
                let x = parse_real::<T>(tok.next(), lineno)?;
                let y = parse_real::<T>(tok.next(), lineno)?;
                let z = parse_real::<T>(tok.next(), lineno)?;
                mesh.vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let i: usize = parse(tok.next(), lineno, "vertex index")?;
                let j: usize = parse(tok.next(), lineno, "vertex index")?;
                let k: usize = parse(tok.next(), lineno, "vertex index")?;
                let id: String = parse(tok.next(), lineno, "electrode id")?;
                let e = match index.get(&id) {
                    Some(&e) => e,
                    None => {
                        // Faces may reference electrodes without an `e` line.
                        index.insert(id.clone(), electrodes.len());
                        electrodes.push(Electrode::new(id, ElectrodeRole::Dc));
                        electrodes.len() - 1
                    }
                };
                let s = tok.next();
                let present = s.is_some();
                if *has_scalar.get_or_insert(present) != present {
                    return Err(TrapError::Parse {
                        location: format!("line {lineno}"),
                        message: "scalar column present on some faces only".into(),
                    });
                }
                if present {
                    scalars.push(parse(s, lineno, "scalar")?);
                }
                if tok.next().is_some() {
                    return Err(TrapError::Parse {
                        location: format!("line {lineno}"),
                        message: "trailing tokens".into(),
                    });
                }
                mesh.faces.push([i, j, k]);
                mesh.face_electrode.push(e);
            }
            Some(other) => {
                return Err(TrapError::Parse {
                    location: format!("line {lineno}"),
                    message: format!("unknown record `{other}`"),
                })
            }
            None => unreachable!(),
        }
    }
    if !seen_header {
        return Err(TrapError::Parse {
            location: "line 1".into(),
            message: "empty file".into(),
        });
    }
    if mesh.faces.is_empty() {
        return Err(TrapError::Parse {
            location: "end of file".into(),
            message: "no faces".into(),
        });
    }
    mesh.validate(electrodes.len()).map_err(|e| TrapError::Parse {
        location: "mesh".into(),
        message: e.to_string(),
    })?;
    Ok(LabelledMesh {
        mesh,
        electrodes,
        scalars: has_scalar.unwrap_or(false).then_some(scalars),
    })
}

/// Maps STL solid names to electrodes. Unlisted solids become DC electrodes
/// named after the solid.
pub type ElectrodeLabels = BTreeMap<String, Electrode>;

/// Result of an STL import together with non-fatal findings.
#[derive(Debug, Clone)]
pub struct StlImport<T> {
    pub mesh: LabelledMesh<T>,
    pub warnings: Vec<String>,
}

/// Reads ASCII or binary STL. Binary files carry a single solid, named by
/// `default_solid`.
pub fn read_stl<T: Real>(bytes: &[u8], labels: &ElectrodeLabels, default_solid: &str) -> Result<StlImport<T>> {
    if bytes.is_empty() {
        return Err(TrapError::Parse {
            location: "offset 0".into(),
            message: "empty file".into(),
        });
    }
    let solids = if looks_ascii(bytes) {
        parse_ascii_stl(std::str::from_utf8(bytes).map_err(|e| TrapError::Parse {
            location: format!("offset {}", e.valid_up_to()),
            message: "invalid UTF-8 in ASCII STL".into(),
        })?)?
    } else {
        vec![(default_solid.to_string(), parse_binary_stl(bytes)?)]
    };
    let mut electrodes: Vec<Electrode> = Vec::new();
    let mut mesh = TriangleMesh::default();
    let mut warnings = Vec::new();
    for (name, tris) in solids {
        let electrode = labels.get(&name).cloned().unwrap_or_else(|| {
            warnings.push(format!("solid `{name}` has no label; imported as DC electrode"));
            Electrode::new(name.clone(), ElectrodeRole::Dc)
        });
        let e = match electrodes.iter().position(|x| x.id == electrode.id) {
            Some(e) => e,
            None => {
                electrodes.push(electrode);
                electrodes.len() - 1
            }
        };
        for t in tris {
            mesh.push_triangle(t.map(|p| Vec3::from_f64(p)), e);
        }
    }
    weld_vertices(&mut mesh);
    let bad = mesh.non_manifold_edge_count();
    if bad > 0 {
        let msg = format!("{bad} non-manifold edges");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    mesh.validate(electrodes.len()).map_err(|e| TrapError::Parse {
        location: "mesh".into(),
        message: e.to_string(),
    })?;
    Ok(StlImport {
        mesh: LabelledMesh {
            mesh,
            electrodes,
            scalars: None,
        },
        warnings,
    })
}

fn looks_ascii(bytes: &[u8]) -> bool {
    let head = &bytes[..bytes.len().min(512)];
    let starts = std::str::from_utf8(&head[..head.len().min(5)]).map(|s| s == "solid").unwrap_or(false);
    if !starts {
        return false;
    }
    // Some binary exporters also start with "solid"; trust the size formula.
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if 84 + 50 * n == bytes.len() {
            return false;
        }
    }
    true
}

type RawTri = [[f64; 3]; 3];

fn parse_ascii_stl(text: &str) -> Result<Vec<(String, Vec<RawTri>)>> {
    let mut solids = Vec::new();
    let mut current: Option<(String, Vec<RawTri>)> = None;
    let mut verts: Vec<[f64; 3]> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let mut tok = line.split_whitespace();
        let perr = |m: &str| TrapError::Parse {
            location: format!("line {lineno}"),
            message: m.to_string(),
        };
        match tok.next() {
            Some("solid") => {
                if current.is_some() {
                    return Err(perr("nested solid"));
                }
                let name = tok.collect::<Vec<_>>().join(" ");
                current = Some((name, Vec::new()));
            }
            Some("endsolid") => {
                let s = current.take().ok_or_else(|| perr("endsolid without solid"))?;
                solids.push(s);
            }
            Some("vertex") => {
                let mut p = [0.0; 3];
                for c in p.iter_mut() {
                    *c = parse(tok.next(), lineno, "vertex coordinate")?;
                }
                verts.push(p);
            }
            Some("endfacet") => {
                if verts.len() != 3 {
                    return Err(perr("facet without exactly three vertices"));
                }
                let s = current.as_mut().ok_or_else(|| perr("facet outside solid"))?;
                s.1.push([verts[0], verts[1], verts[2]]);
                verts.clear();
            }
            Some("facet") | Some("outer") | Some("endloop") | None => {}
            Some(other) => return Err(perr(&format!("unexpected keyword `{other}`"))),
        }
    }
    if current.is_some() {
        return Err(TrapError::Parse {
            location: "end of file".into(),
            message: "missing endsolid".into(),
        });
    }
    if solids.iter().all(|s| s.1.is_empty()) {
        return Err(TrapError::Parse {
            location: "end of file".into(),
            message: "no facets".into(),
        });
    }
    Ok(solids)
}

fn parse_binary_stl(bytes: &[u8]) -> Result<Vec<RawTri>> {
    if bytes.len() < 84 {
        return Err(TrapError::Parse {
            location: format!("offset {}", bytes.len()),
            message: "truncated binary STL header".into(),
        });
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let need = 84 + 50 * n;
    if bytes.len() < need {
        return Err(TrapError::Parse {
            location: format!("offset {}", bytes.len()),
            message: format!("binary STL declares {n} facets but is truncated"),
        });
    }
    let mut rd = &bytes[84..need];
    let mut f = [0u8; 4];
    let mut next = |rd: &mut &[u8]| -> f64 {
        rd.read_exact(&mut f).expect("length checked");
        f32::from_le_bytes(f) as f64
    };
    let mut tris = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..3 {
            next(&mut rd);
        }
        let mut t = [[0.0; 3]; 3];
        for p in t.iter_mut() {
            for c in p.iter_mut() {
                *c = next(&mut rd);
            }
        }
        rd = &rd[2..];
        tris.push(t);
    }
    Ok(tris)
}

/// Writes a binary STL of one electrode set (used by tests and exporters).
pub fn write_binary_stl<T: Real, W: Write>(w: &mut W, mesh: &TriangleMesh<T>) -> std::io::Result<()> {
    w.write_all(&[0u8; 80])?;
    w.write_all(&(mesh.face_count() as u32).to_le_bytes())?;
    for f in 0..mesh.face_count() {
        let t = mesh.triangle(f);
        let n = super::mesh::triangle_normal(&t);
        for c in n.to_f64() {
            w.write_all(&(c as f32).to_le_bytes())?;
        }
        for p in t {
            for c in p.to_f64() {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
        w.write_all(&[0, 0])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trapmesh_is_parse_error() {
        let r = read_trapmesh::<f64, _>(std::io::Cursor::new(""));
        assert!(matches!(r, Err(TrapError::Parse { .. })));
    }

    #[test]
    fn trapmesh_reports_line() {
        let text = "trapmesh v1\nv 0 0 0\nv 1 0 0\nv 0 1 x\n";
        match read_trapmesh::<f64, _>(std::io::Cursor::new(text)) {
            Err(TrapError::Parse { location, .. }) => assert_eq!(location, "line 4"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ascii_stl_with_labels() {
        let stl = "solid rf_part\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid rf_part\n";
        let mut labels = ElectrodeLabels::new();
        labels.insert("rf_part".into(), Electrode::new("rf", ElectrodeRole::Rf));
        let imp = read_stl::<f64>(stl.as_bytes(), &labels, "x").unwrap();
        assert_eq!(imp.mesh.electrodes, vec![Electrode::new("rf", ElectrodeRole::Rf)]);
        assert_eq!(imp.mesh.mesh.face_count(), 1);
    }

    #[test]
    fn empty_stl_is_parse_error() {
        assert!(read_stl::<f64>(b"", &ElectrodeLabels::new(), "x").is_err());
    }
}
