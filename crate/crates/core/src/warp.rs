//! Piecewise-affine rendering of a deformed mesh and mesh overlays.
//!
//! Each destination pixel centre inside a deformed triangle is mapped back to
//! the source image by the affine map carrying the deformed triangle onto its
//! original, and sampled bilinearly.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mesh::{for_each_covered_pixel, signed_area, Point, TriMesh};
use crate::raster::RasterImage;

/// `[[a, b, c], [d, e, f]]` sending `(x, y)` to `(a x + b y + c, d x + e y + f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap(pub [[f64; 3]; 2]);

impl AffineMap {
    /// The unique affine map taking `from[k]` to `to[k]`; `None` when `from`
    /// is degenerate.
    pub fn between(from: [Point; 3], to: [Point; 3]) -> Option<Self> {
        let [p0, p1, p2] = from;
        let (ux, uy) = (p1[0] - p0[0], p1[1] - p0[1]);
        let (vx, vy) = (p2[0] - p0[0], p2[1] - p0[1]);
        let det = ux * vy - uy * vx;
        if det == 0.0 {
            return None;
        }
        // inverse of [[ux, vx], [uy, vy]]
        let inv = [[vy / det, -vx / det], [-uy / det, ux / det]];
        let mut m = [[0.0; 3]; 2];
        for k in 0..2 {
            let (du, dv) = (to[1][k] - to[0][k], to[2][k] - to[0][k]);
            let a = du * inv[0][0] + dv * inv[1][0];
            let b = du * inv[0][1] + dv * inv[1][1];
            m[k] = [a, b, to[0][k] - a * p0[0] - b * p0[1]];
        }
        Some(Self(m))
    }

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        let [r0, r1] = self.0;
        [
            r0[0] * p[0] + r0[1] * p[1] + r0[2],
            r1[0] * p[0] + r1[1] * p[1] + r1[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }
}

pub fn warp_render(
    src: &RasterImage,
    mesh: &TriMesh,
    c_prime: &[Point],
    target_w: usize,
    target_h: usize,
) -> Result<RasterImage> {
    if c_prime.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch {
            module: "warp",
            expected: (mesh.vertex_count(), 1),
            got: (c_prime.len(), 1),
        });
    }
    if target_w < 2 || target_h < 2 {
        return Err(Error::param("warp", "target dimensions must be at least 2"));
    }
    let channels = src.channels();
    let mut data = vec![0.0; target_w * target_h * channels];
    let mut covered = vec![false; target_w * target_h];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let dst = tri.map(|v| c_prime[v]);
        if !(signed_area(dst[0], dst[1], dst[2]) > 0.0) {
            return Err(Error::FlippedTriangle(t));
        }
        let map = AffineMap::between(dst, mesh.corners(t)).ok_or(Error::FlippedTriangle(t))?;
        for_each_covered_pixel(dst, target_w, target_h, |x, y, _| {
            let s = map.apply([x as f64 + 0.5, y as f64 + 0.5]);
            let at = (y * target_w + x) * channels;
            src.sample_bilinear(s[0] - 0.5, s[1] - 0.5, &mut data[at..at + channels]);
            covered[y * target_w + x] = true;
        });
    }
    fill_uncovered(&mut data, &mut covered, target_w, target_h, channels);
    Ok(RasterImage::from_parts(target_w, target_h, channels, data))
}

/// Copies each uncovered pixel from the closest covered one (breadth-first
/// over 4-neighbours, so ties resolve in a fixed order).
fn fill_uncovered(data: &mut [f64], covered: &mut [bool], w: usize, h: usize, channels: usize) {
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&p| covered[p]).collect();
    if queue.len() == w * h || queue.is_empty() {
        return;
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        let mut visit = |q: usize| {
            if !covered[q] {
                covered[q] = true;
                data.copy_within(p * channels..(p + 1) * channels, q * channels);
                queue.push_back(q);
            }
        };
        if x > 0 {
            visit(p - 1);
        }
        if x + 1 < w {
            visit(p + 1);
        }
        if y > 0 {
            visit(p - w);
        }
        if y + 1 < h {
            visit(p + w);
        }
    }
}

/// Highlight colour: white on grayscale images, red on colour images.
pub(crate) fn highlight(channels: usize) -> Vec<f64> {
    if channels == 1 {
        vec![1.0]
    } else {
        let mut c = vec![0.0; channels];
        c[0] = 1.0;
        c
    }
}

/// Copy of `img` with every triangle edge drawn as a 1-px line.
pub fn mesh_overlay(img: &RasterImage, vertices: &[Point], triangles: &[[usize; 3]]) -> RasterImage {
    let mut out = img.clone();
    let color = highlight(img.channels());
    let (w, h) = (img.width() as isize, img.height() as isize);
    let to_pixel = |p: Point| {
        (
            ((p[0] - 0.5).round() as isize).clamp(0, w - 1),
            ((p[1] - 0.5).round() as isize).clamp(0, h - 1),
        )
    };
    for tri in triangles {
        for k in 0..3 {
            let a = to_pixel(vertices[tri[k]]);
            let b = to_pixel(vertices[tri[(k + 1) % 3]]);
            for (x, y) in line_pixels(a, b) {
                out.pixel_mut(x as usize, y as usize).copy_from_slice(&color);
            }
        }
    }
    out
}

/// Bresenham line between two pixel positions, endpoints included.
pub fn line_pixels(a: (isize, isize), b: (isize, isize)) -> Vec<(isize, isize)> {
    let (dx, dy) = ((b.0 - a.0).abs(), -(b.1 - a.1).abs());
    let (sx, sy) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
    let (mut x, mut y, mut err) = (a.0, a.1, dx + dy);
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
