//! Reference implementations used as test oracles. They share no code with
//! the library's rasterizer: visibility comes from casting one ray per pixel
//! centre and intersecting every triangle (Moller-Trumbore).

#![allow(dead_code)]

use brainpaint_core::gradient::Rgb;
use brainpaint_core::renderer::{Camera, DirectionalLight, Drawable, Material};
use glam::DVec3;

pub struct Hit {
    pub item: usize,
    pub triangle: usize,
    pub t: f64,
    pub normal: DVec3,
}

/// Ray through the centre of pixel `(x, y)`.
pub fn pixel_ray(cam: &Camera, w: u32, h: u32, x: u32, y: u32) -> DVec3 {
    let forward = (cam.target - cam.eye).normalize();
    let right = forward.cross(cam.up).normalize();
    let up = right.cross(forward);
    let f = f64::from(h) / 2.0 / (cam.vfov_deg.to_radians() / 2.0).tan();
    let sx = (f64::from(x) + 0.5 - f64::from(w) / 2.0) / f;
    let sy = (f64::from(h) / 2.0 - (f64::from(y) + 0.5)) / f;
    forward + right * sx + up * sy
}

/// Ray parameter and barycentrics `(u, v)` of the hit, if any.
pub fn intersect(orig: DVec3, dir: DVec3, p: [DVec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let pv = dir.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tv = orig - p[0];
    let u = tv.dot(pv) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = tv.cross(e1);
    let v = dir.dot(qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qv) * inv;
    (t > 0.0).then_some((t, u, v))
}

/// All opaque, camera-facing hits along the pixel ray, nearest first.
/// `t` is measured along a ray whose forward component is 1, so it equals
/// view-space depth.
pub fn opaque_hits(scene: &[Drawable<'_>], cam: &Camera, w: u32, h: u32, x: u32, y: u32) -> Vec<Hit> {
    let dir = pixel_ray(cam, w, h, x, y);
    let mut hits = Vec::new();
    for (item, d) in scene.iter().enumerate() {
        if d.material.opacity < 1.0 {
            continue;
        }
        for (ti, tri) in d.mesh.triangles.iter().enumerate() {
            let idx = tri.map(|i| i as usize);
            let p = idx.map(|i| d.mesh.vertices[i]);
            let g = (p[1] - p[0]).cross(p[2] - p[0]);
            if g.dot(cam.eye - p[0]) <= 0.0 {
                continue;
            }
            if let Some((t, u, v)) = intersect(cam.eye, dir, p) {
                if t < cam.near || t > cam.far {
                    continue;
                }
                let n =
                    d.mesh.normals[idx[0]] * (1.0 - u - v) + d.mesh.normals[idx[1]] * u + d.mesh.normals[idx[2]] * v;
                hits.push(Hit {
                    item,
                    triangle: ti,
                    t,
                    normal: n.normalize(),
                });
            }
        }
    }
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    hits
}

/// Lambert + ambient, clamped, then rounded half up.
pub fn shade_u8(m: &Material, n: DVec3, lights: &[DirectionalLight]) -> [u8; 3] {
    let mut k = m.ambient;
    for l in lights {
        let c = -n.dot(l.direction);
        if c > 0.0 {
            k += m.diffuse * l.intensity * c;
        }
    }
    m.base_color.0.map(|c| {
        let v = (f64::from(c) * k).min(255.0).max(0.0);
        (v + 0.5).floor() as u8
    })
}

/// Per-pixel oracle image plus the hit list for each pixel.
pub fn oracle_render(
    scene: &[Drawable<'_>],
    cam: &Camera,
    lights: &[DirectionalLight],
    bg: Rgb,
    w: u32,
    h: u32,
) -> (Vec<[u8; 3]>, Vec<Vec<Hit>>) {
    let mut img = Vec::with_capacity((w * h) as usize);
    let mut all = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let hits = opaque_hits(scene, cam, w, h, x, y);
            img.push(match hits.first() {
                Some(hit) => shade_u8(&scene[hit.item].material, hit.normal, lights),
                None => bg.0,
            });
            all.push(hits);
        }
    }
    (img, all)
}

/// Textbook dynamic-programming Levenshtein distance over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// An interior pixel chosen to check one drawable's colour.
pub struct Sample {
    pub x: u32,
    pub y: u32,
    pub normal: DVec3,
}

/// For every drawable, the covered pixel whose normal faces the headlight
/// most directly, among pixels whose four neighbours show the same
/// drawable and that have no transparent layer over them.
pub fn headlight_samples(
    aux: &brainpaint_core::renderer::AuxBuffers,
    cam: &Camera,
    w: u32,
    h: u32,
    items: usize,
) -> Vec<Option<Sample>> {
    let forward = (cam.target - cam.eye).normalize();
    let mut best: Vec<Option<(f64, Sample)>> = (0..items).map(|_| None).collect();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = (y * w + x) as usize;
            let item = aux.item[i];
            if item as usize >= items || aux.layers[i] != 0 {
                continue;
            }
            let same = [i - 1, i + 1, i - w as usize, i + w as usize]
                .iter()
                .all(|&j| aux.item[j] == item);
            if !same {
                continue;
            }
            let facing = aux.normal[i].dot(-forward);
            let slot = &mut best[item as usize];
            if slot.as_ref().is_none_or(|(f, _)| facing > *f) {
                *slot = Some((
                    facing,
                    Sample {
                        x,
                        y,
                        normal: aux.normal[i],
                    },
                ));
            }
        }
    }
    best.into_iter().map(|b| b.map(|(_, s)| s)).collect()
}

/// Checks a rendered pixel against `base` lit with the fixed shading model:
/// forward, `clamp(base * factor)` within `tol`; inverse, `pixel / factor`
/// recovers `base` within `tol` on every unsaturated channel.
pub fn check_shaded(
    pixel: [u8; 4],
    base: Rgb,
    m: &Material,
    n: DVec3,
    lights: &[DirectionalLight],
    tol: f64,
) -> Result<(), String> {
    let mut factor = m.ambient;
    for l in lights {
        factor += m.diffuse * l.intensity * (-n.dot(l.direction)).max(0.0);
    }
    for c in 0..3 {
        let expect = (f64::from(base.0[c]) * factor).min(255.0);
        let got = f64::from(pixel[c]);
        if (got - expect).abs() > tol {
            return Err(format!(
                "channel {c}: pixel {got}, expected {expect:.2} (factor {factor:.4})"
            ));
        }
        if pixel[c] < 255 {
            let recovered = got / factor;
            if (recovered - f64::from(base.0[c])).abs() > tol {
                return Err(format!(
                    "channel {c}: recovered {recovered:.2} from {got}, base {} (factor {factor:.4})",
                    base.0[c]
                ));
            }
        }
    }
    Ok(())
}
