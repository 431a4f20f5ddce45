use glam::{DVec2, DVec3};

use super::{
    quantize, shade, AuxBuffers, Camera, DirectionalLight, Drawable, ImageBuffer, RenderOptions, RenderOutput,
};
use crate::gradient::Rgb;
use crate::par;

/// A clipped, projected triangle with positive screen-space area.
struct ScreenTri {
    p: [DVec2; 3],
    inv_z: [f64; 3],
    /// Vertex normals pre-multiplied by `inv_z` for perspective-correct
    /// interpolation.
    n: [DVec3; 3],
    area: f64,
    /// Top-left flag of the edge opposite each vertex.
    top_left: [bool; 3],
    item: u32,
    /// Back-facing transparent triangles are lit from their inner side.
    flip_normal: bool,
    x0: u32,
    x1: u32,
    y0: u32,
    y1: u32,
}

struct ClipVertex {
    view: DVec3,
    normal: DVec3,
}

struct Prepared {
    opaque: Vec<ScreenTri>,
    /// Already in back-to-front order.
    transparent: Vec<ScreenTri>,
}

#[inline]
fn edge(a: DVec2, b: DVec2, p: DVec2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

#[inline]
fn is_top_left(a: DVec2, b: DVec2) -> bool {
    let d = b - a;
    (d.y == 0.0 && d.x > 0.0) || d.y < 0.0
}

/// Sutherland-Hodgman against the near plane `z >= near`.
fn clip_near(poly: [ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    if poly.iter().all(|v| v.view.z >= near) {
        return poly.into();
    }
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = &poly[i];
        let b = &poly[(i + 1) % 3];
        let (ain, bin) = (a.view.z >= near, b.view.z >= near);
        if ain {
            out.push(ClipVertex {
                view: a.view,
                normal: a.normal,
            });
        }
        if ain != bin {
            let t = (near - a.view.z) / (b.view.z - a.view.z);
            let mut view = a.view.lerp(b.view, t);
            view.z = near;
            out.push(ClipVertex {
                view,
                normal: a.normal.lerp(b.normal, t),
            });
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn push_screen_tri(
    out: &mut Vec<ScreenTri>,
    verts: [&ClipVertex; 3],
    item: u32,
    flip_normal: bool,
    half: DVec2,
    focal: f64,
    width: u32,
    height: u32,
) {
    let proj = |v: &ClipVertex| {
        DVec2::new(
            half.x + focal * v.view.x / v.view.z,
            half.y - focal * v.view.y / v.view.z,
        )
    };
    let mut p = verts.map(proj);
    let mut inv_z = verts.map(|v| 1.0 / v.view.z);
    let mut n = [0, 1, 2].map(|i| verts[i].normal * inv_z[i]);
    let mut area = edge(p[0], p[1], p[2]);
    if !(area.is_finite() && area != 0.0) {
        return;
    }
    if area < 0.0 {
        p.swap(1, 2);
        inv_z.swap(1, 2);
        n.swap(1, 2);
        area = -area;
    }
    let min = p[0].min(p[1]).min(p[2]);
    let max = p[0].max(p[1]).max(p[2]);
    // pixel x covers centre x + 0.5
    let x0 = (min.x - 0.5).ceil().max(0.0);
    let y0 = (min.y - 0.5).ceil().max(0.0);
    let x1 = (max.x - 0.5).floor().min(f64::from(width) - 1.0);
    let y1 = (max.y - 0.5).floor().min(f64::from(height) - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    out.push(ScreenTri {
        p,
        inv_z,
        n,
        area,
        top_left: [
            is_top_left(p[1], p[2]),
            is_top_left(p[2], p[0]),
            is_top_left(p[0], p[1]),
        ],
        item,
        flip_normal,
        x0: x0 as u32,
        x1: x1 as u32,
        y0: y0 as u32,
        y1: y1 as u32,
    });
}

fn prepare(scene: &[Drawable<'_>], camera: &Camera, width: u32, height: u32) -> Prepared {
    let (right, up, forward) = camera.basis();
    let to_view = |p: DVec3| {
        let d = p - camera.eye;
        DVec3::new(d.dot(right), d.dot(up), d.dot(forward))
    };
    let half = DVec2::new(f64::from(width) * 0.5, f64::from(height) * 0.5);
    let focal = camera.focal_px(height);

    let mut opaque = Vec::new();
    let mut transparent: Vec<(f64, ScreenTri)> = Vec::new();
    for (item, d) in scene.iter().enumerate() {
        let mesh = d.mesh;
        let is_opaque = d.material.is_opaque();
        if d.material.opacity <= 0.0 {
            continue;
        }
        let view: Vec<DVec3> = mesh.vertices.iter().map(|&p| to_view(p)).collect();
        for tri in &mesh.triangles {
            let idx = tri.map(|i| i as usize);
            let world = idx.map(|i| mesh.vertices[i]);
            let facing = (world[1] - world[0])
                .cross(world[2] - world[0])
                .dot(camera.eye - world[0]);
            let front = facing > 0.0;
            if is_opaque && !front {
                continue;
            }
            let zs = idx.map(|i| view[i].z);
            if zs.iter().all(|&z| z > camera.far) || zs.iter().all(|&z| z < camera.near) {
                continue;
            }
            let clipped = clip_near(
                idx.map(|i| ClipVertex {
                    view: view[i],
                    normal: mesh.normals[i],
                }),
                camera.near,
            );
            if clipped.len() < 3 {
                continue;
            }
            let centroid_depth = (zs[0] + zs[1] + zs[2]) / 3.0;
            for k in 1..clipped.len() - 1 {
                let verts = [&clipped[0], &clipped[k], &clipped[k + 1]];
                if is_opaque {
                    push_screen_tri(&mut opaque, verts, item as u32, false, half, focal, width, height);
                } else {
                    let mut one = Vec::with_capacity(1);
                    push_screen_tri(&mut one, verts, item as u32, !front, half, focal, width, height);
                    transparent.extend(one.into_iter().map(|t| (centroid_depth, t)));
                }
            }
        }
    }
    // farthest first; the stable sort keeps submission order on ties
    transparent.sort_by(|a, b| b.0.total_cmp(&a.0));
    Prepared {
        opaque,
        transparent: transparent.into_iter().map(|(_, t)| t).collect(),
    }
}

struct Band<'a> {
    y0: u32,
    rows: u32,
    color: &'a mut [[f64; 3]],
    depth: &'a mut [f64],
    item: Option<&'a mut [u32]>,
    normal: Option<&'a mut [DVec3]>,
    layers: Option<&'a mut [u16]>,
    opaque_color: Option<&'a mut [[f64; 3]]>,
}

/// Calls `hit(local_index, depth, normal)` for every pixel of `band` whose
/// centre `tri` covers under the top-left rule.
#[inline]
fn scan(tri: &ScreenTri, band_y0: u32, band_rows: u32, width: u32, far: f64, mut hit: impl FnMut(usize, f64, DVec3)) {
    let y_start = tri.y0.max(band_y0);
    let y_end = tri.y1.min(band_y0 + band_rows - 1);
    if y_start > y_end {
        return;
    }
    let [p0, p1, p2] = tri.p;
    for y in y_start..=y_end {
        let py = f64::from(y) + 0.5;
        let row = (y - band_y0) as usize * width as usize;
        for x in tri.x0..=tri.x1 {
            let pc = DVec2::new(f64::from(x) + 0.5, py);
            let w = [edge(p1, p2, pc), edge(p2, p0, pc), edge(p0, p1, pc)];
            let inside = (0..3).all(|i| w[i] > 0.0 || (w[i] == 0.0 && tri.top_left[i]));
            if !inside {
                continue;
            }
            let iz = w[0] * tri.inv_z[0] + w[1] * tri.inv_z[1] + w[2] * tri.inv_z[2];
            let z = tri.area / iz;
            if z.is_nan() || z > far {
                continue;
            }
            let mut n = (tri.n[0] * w[0] + tri.n[1] * w[1] + tri.n[2] * w[2]).normalize_or_zero();
            if tri.flip_normal {
                n = -n;
            }
            hit(row + x as usize, z, n);
        }
    }
}

pub(super) struct Frame {
    width: u32,
    height: u32,
    color: Vec<[f64; 3]>,
    aux: Option<AuxBuffers>,
}

impl Frame {
    pub(super) fn into_image(self) -> ImageBuffer {
        let mut pixels = Vec::with_capacity(self.color.len() * 4);
        for c in &self.color {
            pixels.extend([quantize(c[0]), quantize(c[1]), quantize(c[2]), 255]);
        }
        ImageBuffer {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub(super) fn into_output(mut self) -> RenderOutput {
        let aux = self.aux.take().expect("frame rendered with aux buffers");
        RenderOutput {
            image: self.into_image(),
            aux,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn render_frame(
    scene: &[Drawable<'_>],
    camera: &Camera,
    lights: &[DirectionalLight],
    background: Rgb,
    width: u32,
    height: u32,
    opts: &RenderOptions,
    capture_aux: bool,
) -> Frame {
    let prep = prepare(scene, camera, width, height);
    let n = width as usize * height as usize;
    let bg = background.0.map(f64::from);
    let mut color = vec![bg; n];
    let mut depth = vec![f64::INFINITY; n];
    let mut aux = capture_aux.then(|| AuxBuffers {
        item: vec![AuxBuffers::NONE; n],
        normal: vec![DVec3::ZERO; n],
        depth: Vec::new(),
        layers: vec![0; n],
        opaque_color: vec![bg; n],
    });

    let band_rows = opts.band_rows.min(height);
    let band_len = band_rows as usize * width as usize;
    {
        let mut color_chunks = color.chunks_mut(band_len);
        let mut depth_chunks = depth.chunks_mut(band_len);
        let (mut item_chunks, mut normal_chunks, mut layer_chunks, mut oc_chunks) = match aux.as_mut() {
            Some(a) => (
                Some(a.item.chunks_mut(band_len)),
                Some(a.normal.chunks_mut(band_len)),
                Some(a.layers.chunks_mut(band_len)),
                Some(a.opaque_color.chunks_mut(band_len)),
            ),
            None => (None, None, None, None),
        };
        let mut bands = Vec::new();
        let mut y0 = 0;
        while y0 < height {
            let rows = band_rows.min(height - y0);
            bands.push(Band {
                y0,
                rows,
                color: color_chunks.next().unwrap(),
                depth: depth_chunks.next().unwrap(),
                item: item_chunks.as_mut().map(|c| c.next().unwrap()),
                normal: normal_chunks.as_mut().map(|c| c.next().unwrap()),
                layers: layer_chunks.as_mut().map(|c| c.next().unwrap()),
                opaque_color: oc_chunks.as_mut().map(|c| c.next().unwrap()),
            });
            y0 += rows;
        }

        par::for_each_mut(opts.parallelism, &mut bands, |_, band| {
            let far = camera.far;
            for tri in &prep.opaque {
                let material = &scene[tri.item as usize].material;
                scan(tri, band.y0, band.rows, width, far, |i, z, nrm| {
                    if z < band.depth[i] {
                        band.depth[i] = z;
                        band.color[i] = shade(material, nrm, lights);
                        if let Some(item) = band.item.as_deref_mut() {
                            item[i] = tri.item;
                        }
                        if let Some(normal) = band.normal.as_deref_mut() {
                            normal[i] = nrm;
                        }
                    }
                });
            }
            if let Some(oc) = band.opaque_color.as_deref_mut() {
                oc.copy_from_slice(band.color);
            }
            for tri in &prep.transparent {
                let material = &scene[tri.item as usize].material;
                let alpha = material.opacity;
                scan(tri, band.y0, band.rows, width, far, |i, z, nrm| {
                    if z < band.depth[i] {
                        let src = shade(material, nrm, lights);
                        let dst = &mut band.color[i];
                        for c in 0..3 {
                            dst[c] = src[c] * alpha + dst[c] * (1.0 - alpha);
                        }
                        if let Some(layers) = band.layers.as_deref_mut() {
                            layers[i] = layers[i].saturating_add(1);
                        }
                    }
                });
            }
        });
    }
    if let Some(a) = aux.as_mut() {
        a.depth = depth;
    }
    Frame {
        width,
        height,
        color,
        aux,
    }
}
