//! Per-region triangle meshes: OBJ I/O, vertex normals, bounds and the
//! synthetic fixture generator used in place of real template meshes.

mod fixture;
mod obj;

pub use fixture::{generate_fixture_mesh, icosphere, write_fixture_assets};
pub use obj::{parse_obj, serialize_obj};

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diag::Diagnostic;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range (have {count})")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("mesh has no faces")]
    NoFaces,
    #[error("mesh has no vertices")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub name: String,
    pub vertices: Vec<DVec3>,
    pub normals: Vec<DVec3>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> DVec3 {
        self.max - self.min
    }

    /// Radius of the sphere through the box corners, centred on the box.
    pub fn bounding_radius(&self) -> f64 {
        self.extent().length() * 0.5
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn translated(&self, by: DVec3) -> Aabb {
        Aabb {
            min: self.min + by,
            max: self.max + by,
        }
    }
}

pub fn union_bounds(boxes: &[Aabb]) -> Option<Aabb> {
    let (first, rest) = boxes.split_first()?;
    Some(rest.iter().fold(*first, |acc, b| acc.union(b)))
}

impl TriangleMesh {
    pub fn bounds(&self) -> Result<Aabb, MeshError> {
        let (first, rest) = self.vertices.split_first().ok_or(MeshError::Empty)?;
        let mut b = Aabb {
            min: *first,
            max: *first,
        };
        for v in rest {
            b.min = b.min.min(*v);
            b.max = b.max.max(*v);
        }
        Ok(b)
    }

    pub fn triangle_area(&self, t: [u32; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        (b - a).cross(c - a).length() * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles.iter().map(|&t| self.triangle_area(t)).sum()
    }

    /// Reports the first violated structural invariant, if any.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.vertices.len();
        if self.normals.len() != n {
            return Err(format!("{} normals for {n} vertices", self.normals.len()));
        }
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&k| k as usize >= n) {
                return Err(format!("triangle {i} index out of range"));
            }
            if is_degenerate(t.map(|k| self.vertices[k as usize])) {
                return Err(format!("triangle {i} is degenerate"));
            }
        }
        for (i, nrm) in self.normals.iter().enumerate() {
            if (nrm.length() - 1.0).abs() > 1e-6 {
                return Err(format!("normal {i} has length {}", nrm.length()));
            }
        }
        Ok(())
    }
}

/// Zero area relative to the triangle's own scale.
pub(crate) fn is_degenerate(p: [DVec3; 3]) -> bool {
    let e0 = p[1] - p[0];
    let e1 = p[2] - p[0];
    let e2 = p[2] - p[1];
    let scale = e0.length_squared().max(e1.length_squared()).max(e2.length_squared());
    let area2 = e0.cross(e1).length();
    area2.is_nan() || area2 <= scale * 1e-12
}

fn corner_angle(at: DVec3, a: DVec3, b: DVec3) -> f64 {
    let u = (a - at).normalize_or_zero();
    let v = (b - at).normalize_or_zero();
    // atan2 form stays accurate near 0 and pi
    u.cross(v).length().atan2(u.dot(v))
}

/// Vertex normals as the normalized sum of incident face normals, each face
/// weighted by its interior angle at the vertex. Vertices with no usable
/// incident face get `(0, 0, 1)` and a warning.
pub fn compute_vertex_normals(m: &TriangleMesh) -> (TriangleMesh, Vec<Diagnostic>) {
    let mut acc = vec![DVec3::ZERO; m.vertices.len()];
    for t in &m.triangles {
        let p = t.map(|i| m.vertices[i as usize]);
        let n = (p[1] - p[0]).cross(p[2] - p[0]).normalize_or_zero();
        if n == DVec3::ZERO {
            continue;
        }
        for k in 0..3 {
            let w = corner_angle(p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            acc[t[k] as usize] += n * w;
        }
    }
    let mut isolated = 0usize;
    let normals = acc
        .into_iter()
        .map(|s| {
            let n = s.normalize_or_zero();
            if n == DVec3::ZERO {
                isolated += 1;
                DVec3::Z
            } else {
                n
            }
        })
        .collect();
    let mut warnings = Vec::new();
    if isolated > 0 {
        warnings.push(Diagnostic::warning(
            "zero_normal",
            format!(
                "mesh '{}': {isolated} vertices without incident faces got normal (0,0,1)",
                m.name
            ),
        ));
    }
    (TriangleMesh { normals, ..m.clone() }, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriangleMesh {
        TriangleMesh {
            name: "t".into(),
            vertices: vec![DVec3::ZERO, DVec3::X, DVec3::Y],
            normals: vec![],
            triangles: vec![[0, 1, 2]],
        }
    }

    #[test]
    fn planar_triangle_normals() {
        let (m, w) = compute_vertex_normals(&tri());
        assert!(w.is_empty());
        assert!(m.normals.iter().all(|&n| n == DVec3::Z));
        let (again, _) = compute_vertex_normals(&m);
        assert_eq!(again, m);
    }

    #[test]
    fn isolated_vertex_warns() {
        let mut t = tri();
        t.vertices.push(DVec3::splat(5.0));
        let (m, w) = compute_vertex_normals(&t);
        assert_eq!(m.normals[3], DVec3::Z);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].code, "zero_normal");
    }

    #[test]
    fn bounds_and_union() {
        let (m, _) = compute_vertex_normals(&tri());
        let b = m.bounds().unwrap();
        assert_eq!(b.min, DVec3::ZERO);
        assert_eq!(b.max, DVec3::new(1.0, 1.0, 0.0));
        let a = Aabb {
            min: DVec3::ZERO,
            max: DVec3::ONE,
        };
        let c = Aabb {
            min: DVec3::splat(2.0),
            max: DVec3::splat(3.0),
        };
        let u = union_bounds(&[a, c]).unwrap();
        assert_eq!(
            u,
            Aabb {
                min: DVec3::ZERO,
                max: DVec3::splat(3.0)
            }
        );
        assert!(union_bounds(&[]).is_none());
        let empty = TriangleMesh {
            vertices: vec![],
            ..tri()
        };
        assert_eq!(empty.bounds(), Err(MeshError::Empty));
    }

    #[test]
    fn degenerate_detection() {
        assert!(is_degenerate([DVec3::ZERO, DVec3::X, DVec3::X * 2.0]));
        assert!(is_degenerate([DVec3::ZERO, DVec3::ZERO, DVec3::ZERO]));
        assert!(!is_degenerate([DVec3::ZERO, DVec3::X * 1e-4, DVec3::Y * 1e-4]));
    }
}
