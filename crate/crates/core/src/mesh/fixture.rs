//! Synthetic stand-ins for real template meshes.
//!
//! Every region becomes an anisotropic ellipsoid built from a twice-subdivided
//! icosphere (162 vertices, 320 faces). Its placement and radii come from a
//! SHA-256 of the canonical name and seed, so the same inputs always give the
//! same mesh. Scene frame: +x toward the right hemisphere, +y posterior, +z
//! superior. Right-hemisphere meshes are exact x-mirrors of the left ones.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use glam::DVec3;
use sha2::{Digest, Sha256};

use super::{compute_vertex_normals, serialize_obj, TriangleMesh};
use crate::atlas::{Atlas, Klass, RegionDef, Side, Surface};

/// Unit icosphere with `subdivisions` rounds of 4-way splitting, outward
/// counter-clockwise winding.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<DVec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| DVec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<DVec3>| -> u32 {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a as usize] + vertices[b as usize]).normalize();
                vertices.push(m);
                vertices.len() as u32 - 1
            })
        };
        for [a, b, c] in triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let normals = vertices.clone();
    TriangleMesh {
        name: "icosphere".into(),
        vertices,
        normals,
        triangles,
    }
}

/// Eight uniforms in [0, 1) derived from the region name and seed.
fn region_uniforms(name: &str, seed: u64) -> [f64; 8] {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    h.update([0u8]);
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0.0; 8];
    for (i, chunk) in digest.chunks_exact(4).enumerate() {
        let word = u32::from_le_bytes(chunk.try_into().unwrap());
        out[i] = f64::from(word) / 4_294_967_296.0;
    }
    out
}

const HEMISPHERE_CENTER: DVec3 = DVec3::new(-36.0, 0.0, 0.0);
const HEMISPHERE_RADII: DVec3 = DVec3::new(30.0, 70.0, 55.0);

/// Centre and radii of the left-hemisphere (or midline) ellipsoid.
fn placement(region: &RegionDef, surface: Surface, seed: u64) -> (DVec3, DVec3) {
    let u = region_uniforms(&region.canonical_name, seed);
    match (region.klass, region.has_side(Side::Midline)) {
        (Klass::Cortical, _) => {
            // a point on the lateral half of the hemisphere ellipsoid, kept
            // away from the pure-lateral pole so front/back views see it
            let theta = std::f64::consts::TAU * u[0];
            let lateral = 0.15 + 0.55 * u[1];
            let ring = (1.0 - lateral * lateral).sqrt();
            let dir = DVec3::new(-lateral, ring * theta.cos(), ring * theta.sin());
            let radii = DVec3::new(7.0 + 5.0 * u[2], 11.0 + 7.0 * u[3], 9.0 + 7.0 * u[4]);
            let (shell, grow) = match surface {
                Surface::Pial => (0.88, 1.0),
                Surface::Inflated => (0.95, 1.2),
            };
            (HEMISPHERE_CENTER + HEMISPHERE_RADII * dir * shell, radii * grow)
        }
        (Klass::Subcortical, false) => {
            let center = DVec3::new(-(7.0 + 18.0 * u[0]), -22.0 + 44.0 * u[1], -30.0 + 36.0 * u[2]);
            let radii = DVec3::new(3.0 + 3.0 * u[3], 4.0 + 6.0 * u[4], 3.0 + 4.0 * u[5]);
            (center, radii)
        }
        (Klass::Subcortical, true) => {
            let center = DVec3::new(0.0, -5.0 + 15.0 * u[1], -40.0 + 12.0 * u[2]);
            let radii = DVec3::new(5.0 + 2.0 * u[3], 6.0 + 3.0 * u[4], 10.0 + 6.0 * u[5]);
            (center, radii)
        }
    }
}

/// Deterministic fixture mesh for one mesh instance of `region`.
pub fn generate_fixture_mesh(region: &RegionDef, side: Side, surface: Surface, seed: u64) -> TriangleMesh {
    let (center, radii) = placement(region, surface, seed);
    let sphere = icosphere(2);
    let mut vertices: Vec<DVec3> = sphere.vertices.iter().map(|&p| center + p * radii).collect();
    let mut triangles = sphere.triangles;
    if side == Side::Right {
        for v in &mut vertices {
            v.x = -v.x;
        }
        // mirroring flips orientation; restore outward winding
        for t in &mut triangles {
            t.swap(1, 2);
        }
    }
    let prefix = side.file_prefix().map(|p| format!("{p}.")).unwrap_or_default();
    let mesh = TriangleMesh {
        name: format!("{prefix}{}", region.mesh_key),
        vertices,
        normals: Vec::new(),
        triangles,
    };
    compute_vertex_normals(&mesh).0
}

/// Writes pial and inflated fixture OBJ files for every region of `atlas`
/// under `root/<atlas>/`. Returns the number of files written.
pub fn write_fixture_assets(atlas: &Atlas, root: &Path, seed: u64) -> io::Result<usize> {
    let dir = root.join(&atlas.name);
    std::fs::create_dir_all(&dir)?;
    let mut written = 0;
    for region in &atlas.regions {
        let surfaces: &[Surface] = match region.klass {
            Klass::Cortical => &[Surface::Pial, Surface::Inflated],
            Klass::Subcortical => &[Surface::Pial],
        };
        for &side in region.sides() {
            for &surface in surfaces {
                let mesh = generate_fixture_mesh(region, side, surface, seed);
                std::fs::write(dir.join(region.mesh_file_name(side, surface)), serialize_obj(&mesh))?;
                written += 1;
            }
        }
    }
    Ok(written)
}
