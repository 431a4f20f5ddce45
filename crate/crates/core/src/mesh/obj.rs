use std::collections::HashMap;
use std::fmt::Write as _;

use glam::DVec3;

use super::{compute_vertex_normals, is_degenerate, MeshError, TriangleMesh};
use crate::diag::Diagnostic;

struct FaceVertex {
    v: usize,
    vn: Option<usize>,
}

struct Face {
    line: usize,
    corners: Vec<FaceVertex>,
}

fn malformed(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_floats<'a>(
    line: usize,
    keyword: &str,
    args: impl Iterator<Item = &'a str>,
    min: usize,
) -> Result<Vec<f64>, MeshError> {
    let vals = args
        .map(|a| {
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("'{keyword}': bad number '{a}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() < min {
        return Err(malformed(
            line,
            format!("'{keyword}' needs {min} numbers, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

/// Resolves a 1-based (or negative, relative) OBJ index against `count`
/// elements defined so far. Range is checked later so forward references
/// still produce a line-numbered error.
fn resolve_index(line: usize, token: &str, count: usize) -> Result<i64, MeshError> {
    let i: i64 = token
        .parse()
        .map_err(|_| malformed(line, format!("bad index '{token}'")))?;
    match i {
        0 => Err(malformed(line, "index 0 is not valid in OBJ")),
        i if i > 0 => Ok(i - 1),
        i => Ok(count as i64 + i),
    }
}

/// Parses a Wavefront OBJ document into one triangle mesh.
///
/// Texture coordinates, groups and materials are read past and ignored.
/// Polygons are fan-triangulated from their first corner. File normals are
/// used only when every face corner references one; otherwise normals are
/// computed from the geometry.
pub fn parse_obj(text: &str, name: &str) -> Result<(TriangleMesh, Vec<Diagnostic>), MeshError> {
    let mut positions: Vec<DVec3> = Vec::new();
    let mut file_normals: Vec<(usize, DVec3)> = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut warnings = Vec::new();
    let mut uv_count = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let keyword = parts.next().unwrap_or("");
        match keyword {
            "v" => {
                let v = parse_floats(line, "v", parts, 3)?;
                positions.push(DVec3::new(v[0], v[1], v[2]));
            }
            "vn" => {
                let v = parse_floats(line, "vn", parts, 3)?;
                file_normals.push((line, DVec3::new(v[0], v[1], v[2])));
            }
            "vt" => {
                parse_floats(line, "vt", parts, 1)?;
                uv_count += 1;
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in parts {
                    let mut fields = tok.split('/');
                    let v = fields
                        .next()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| malformed(line, format!("face corner '{tok}' has no vertex index")))?;
                    let vi = resolve_index(line, v, positions.len())?;
                    if let Some(vt) = fields.next().filter(|s| !s.is_empty()) {
                        resolve_index(line, vt, uv_count)?;
                    }
                    let vn = match fields.next().filter(|s| !s.is_empty()) {
                        Some(n) => Some(resolve_index(line, n, file_normals.len())?),
                        None => None,
                    };
                    if fields.next().is_some() {
                        return Err(malformed(line, format!("face corner '{tok}' has too many fields")));
                    }
                    if vi < 0 {
                        return Err(MeshError::IndexOutOfRange {
                            line,
                            index: vi + 1,
                            count: positions.len(),
                        });
                    }
                    if let Some(n) = vn {
                        if n < 0 {
                            return Err(malformed(line, "normal index out of range"));
                        }
                    }
                    corners.push(FaceVertex {
                        v: vi as usize,
                        vn: vn.map(|n| n as usize),
                    });
                }
                if corners.len() < 3 {
                    return Err(malformed(
                        line,
                        format!("face needs 3 corners, found {}", corners.len()),
                    ));
                }
                faces.push(Face { line, corners });
            }
            "o" | "g" | "s" | "mtllib" | "usemtl" | "l" | "p" | "vp" => {}
            other => warnings.push(
                Diagnostic::warning("obj_unknown_keyword", format!("ignored OBJ keyword '{other}'"))
                    .at(Some(line), None),
            ),
        }
    }

    for face in &faces {
        for c in &face.corners {
            if c.v >= positions.len() {
                return Err(MeshError::IndexOutOfRange {
                    line: face.line,
                    index: c.v as i64 + 1,
                    count: positions.len(),
                });
            }
            if let Some(n) = c.vn {
                if n >= file_normals.len() {
                    return Err(malformed(
                        face.line,
                        format!("normal index {} out of range (have {})", n + 1, file_normals.len()),
                    ));
                }
            }
        }
    }
    if positions.is_empty() {
        return Err(MeshError::Empty);
    }
    if faces.is_empty() {
        return Err(MeshError::NoFaces);
    }

    let use_file_normals = faces.iter().all(|f| f.corners.iter().all(|c| c.vn.is_some()));
    if !use_file_normals && faces.iter().any(|f| f.corners.iter().any(|c| c.vn.is_some())) {
        warnings.push(Diagnostic::warning(
            "obj_partial_normals",
            format!("mesh '{name}': some face corners lack normals; recomputing all normals"),
        ));
    }

    let mut vertices = positions;
    let mut normals: Vec<Option<DVec3>> = vec![None; vertices.len()];
    // (position index, normal index) -> vertex slot, for seams where one
    // position carries several normals
    let mut splits: HashMap<(usize, usize), usize> = HashMap::new();
    let mut slot_normal: Vec<Option<usize>> = vec![None; vertices.len()];
    let mut polygons: Vec<(usize, Vec<u32>)> = Vec::with_capacity(faces.len());
    for face in &faces {
        let mut idx = Vec::with_capacity(face.corners.len());
        for c in &face.corners {
            let slot = match (use_file_normals, c.vn) {
                (true, Some(n)) => {
                    let (nline, nv) = file_normals[n];
                    // already-unit normals are kept bit-for-bit
                    let unit = if (nv.length_squared() - 1.0).abs() <= 1e-12 {
                        nv
                    } else {
                        nv.normalize_or_zero()
                    };
                    if unit == DVec3::ZERO {
                        return Err(malformed(nline, "zero-length normal"));
                    }
                    match slot_normal[c.v] {
                        None => {
                            slot_normal[c.v] = Some(n);
                            normals[c.v] = Some(unit);
                            c.v
                        }
                        Some(existing) if existing == n => c.v,
                        Some(_) => *splits.entry((c.v, n)).or_insert_with(|| {
                            vertices.push(vertices[c.v]);
                            normals.push(Some(unit));
                            slot_normal.push(Some(n));
                            vertices.len() - 1
                        }),
                    }
                }
                _ => c.v,
            };
            idx.push(slot as u32);
        }
        polygons.push((face.line, idx));
    }

    let mut triangles = Vec::new();
    let mut dropped = 0usize;
    let mut first_dropped = None;
    for (line, poly) in &polygons {
        for k in 1..poly.len() - 1 {
            let t = [poly[0], poly[k], poly[k + 1]];
            if is_degenerate(t.map(|i| vertices[i as usize])) {
                dropped += 1;
                first_dropped.get_or_insert(*line);
                continue;
            }
            triangles.push(t);
        }
    }
    if dropped > 0 {
        warnings.push(
            Diagnostic::warning(
                "degenerate_face",
                format!("mesh '{name}': dropped {dropped} zero-area triangle(s)"),
            )
            .at(first_dropped, None),
        );
    }
    if triangles.is_empty() {
        return Err(MeshError::NoFaces);
    }

    let mesh = TriangleMesh {
        name: name.to_string(),
        vertices,
        normals: Vec::new(),
        triangles,
    };
    if use_file_normals {
        let normals = normals.into_iter().map(|n| n.unwrap_or(DVec3::Z)).collect();
        Ok((TriangleMesh { normals, ..mesh }, warnings))
    } else {
        let (mesh, more) = compute_vertex_normals(&mesh);
        warnings.extend(more);
        Ok((mesh, warnings))
    }
}

/// Writes `v`, `vn` and `f v//vn` lines. Coordinates use the shortest
/// decimal form that parses back to the same `f64`.
pub fn serialize_obj(m: &TriangleMesh) -> String {
    let mut s = String::with_capacity(m.vertices.len() * 64 + m.triangles.len() * 24);
    let _ = writeln!(s, "o {}", m.name);
    for v in &m.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for n in &m.normals {
        let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
    }
    for t in &m.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_fans_into_two_triangles() {
        let (m, _) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n", "q").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(m.normals.iter().all(|&n| n == DVec3::Z));
    }

    #[test]
    fn right_triangle_gets_z_normals() {
        let (m, w) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", "t").unwrap();
        assert!(w.is_empty());
        assert_eq!(m.normals, vec![DVec3::Z; 3]);
    }

    #[test]
    fn out_of_range_cites_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n# comment\nf 1 2 5\n";
        assert_eq!(
            parse_obj(text, "x").unwrap_err(),
            MeshError::IndexOutOfRange {
                line: 6,
                index: 5,
                count: 4
            }
        );
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -4 -2 -1\n", "x"),
            Err(MeshError::IndexOutOfRange { line: 4, .. })
        ));
    }

    #[test]
    fn face_forms_and_relative_indices() {
        let text = "\
mtllib x.mtl
o thing
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
vn 0 0 2
usemtl red
s off
f -3/1/1 -2/2/1 -1/3/1
";
        let (m, w) = parse_obj(text, "t").unwrap();
        assert!(w.is_empty(), "{w:?}");
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        assert_eq!(m.normals, vec![DVec3::Z; 3]);
        let (m2, _) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1\n", "t").unwrap();
        assert_eq!(m2.normals, vec![DVec3::Z; 3]);
    }

    #[test]
    fn seams_split_vertices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nvn 1 0 0\n\
                    f 1//1 2//1 3//1\nf 1//2 3//2 4//2\n";
        let (m, _) = parse_obj(text, "s").unwrap();
        assert_eq!(m.vertices.len(), 6);
        assert_eq!(m.normals[0], DVec3::Z);
        assert_eq!(m.normals[4], DVec3::X);
        assert_eq!(m.vertices[4], DVec3::ZERO);
        m.check_invariants().unwrap();
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse_obj("v 0 0\n", "m"),
            Err(MeshError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 x\n", "m"),
            Err(MeshError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nf 1 2\n", "m"),
            Err(MeshError::Malformed { line: 3, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 0 1 2\n", "m"),
            Err(MeshError::Malformed { line: 4, .. })
        ));
        assert_eq!(parse_obj("v 0 0 0\n", "m").unwrap_err(), MeshError::NoFaces);
        assert_eq!(parse_obj("", "m").unwrap_err(), MeshError::Empty);
    }

    #[test]
    fn degenerate_faces_dropped() {
        let text = "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n";
        let (m, w) = parse_obj(text, "d").unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(w[0].code, "degenerate_face");
        assert_eq!(w[0].row, Some(5));
        assert_eq!(
            parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n", "d").unwrap_err(),
            MeshError::NoFaces
        );
    }

    #[test]
    fn serialize_then_parse() {
        let text = "v 0.1 0.2 0.30000000000000004\nv 1e-7 0 0\nv 0 1 0\nf 1 2 3\n";
        let (m, _) = parse_obj(text, "r").unwrap();
        let (back, _) = parse_obj(&serialize_obj(&m), "r").unwrap();
        assert_eq!(back, m);
    }
}
