//! Triangle mesh over the image rectangle.
//!
//! The mesh starts from a regular lattice whose points are perturbed by a
//! seeded uniform jitter (border points slide only along their border,
//! corners stay put). Every lattice cell is split into two triangles and the
//! result is made Delaunay by Lawson edge flips. Because the jitter stays
//! below half a cell, each cell remains a convex quad, so the starting
//! triangulation is valid and the flip algorithm terminates in the Delaunay
//! triangulation of the point set.
//!
//! Coordinates are continuous pixel coordinates: the image covers
//! `[0, width] x [0, height]` and pixel `(i, j)` has its centre at
//! `(i + 0.5, j + 0.5)`.

mod classify;

pub use classify::{
    classify_triangles, covered_pixels, ClassifyParams, ThresholdRule, TriangleClasses,
};
pub(crate) use classify::for_each_covered_pixel;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    Left,
    Right,
    Top,
    Bottom,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl BoundaryTag {
    /// The vertex's x coordinate is pinned to a vertical border.
    pub fn fixes_x(self) -> bool {
        use BoundaryTag::*;
        matches!(
            self,
            Left | Right | TopLeft | TopRight | BottomLeft | BottomRight
        )
    }

    /// The vertex's y coordinate is pinned to a horizontal border.
    pub fn fixes_y(self) -> bool {
        use BoundaryTag::*;
        matches!(
            self,
            Top | Bottom | TopLeft | TopRight | BottomLeft | BottomRight
        )
    }

    pub fn is_corner(self) -> bool {
        self.fixes_x() && self.fixes_y()
    }

    /// Coordinate the tag pins on a `width x height` rectangle, per axis.
    pub fn pinned(self, width: f64, height: f64) -> (Option<f64>, Option<f64>) {
        use BoundaryTag::*;
        let x = match self {
            Left | TopLeft | BottomLeft => Some(0.0),
            Right | TopRight | BottomRight => Some(width),
            _ => None,
        };
        let y = match self {
            Top | TopLeft | TopRight => Some(0.0),
            Bottom | BottomLeft | BottomRight => Some(height),
            _ => None,
        };
        (x, y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub width: f64,
    pub height: f64,
    pub vertices: Vec<Point>,
    /// Vertex triples with positive signed area.
    pub triangles: Vec<[usize; 3]>,
    /// Unique undirected edges as sorted index pairs.
    pub edges: Vec<[usize; 2]>,
    pub tags: Vec<BoundaryTag>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshParams {
    pub spacing: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl MeshParams {
    /// `max(12, round(min(w, h) / 25))` px spacing with 15% jitter.
    pub fn for_image(width: usize, height: usize, seed: u64) -> Self {
        Self {
            spacing: default_spacing(width, height),
            jitter: 0.15,
            seed,
        }
    }
}

pub fn default_spacing(width: usize, height: usize) -> f64 {
    (width.min(height) as f64 / 25.0).round().max(12.0)
}

const MAX_RETRIES: usize = 3;
const MIN_AREA: f64 = 1e-9;

/// Signed area, positive for the orientation used by every mesh triangle.
#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Positive when `d` lies strictly inside the circumcircle of the positively
/// oriented triangle `a, b, c`.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let row = |p: Point| {
        let (x, y) = (p[0] - d[0], p[1] - d[1]);
        (x, y, x * x + y * y)
    };
    let (ax, ay, a2) = row(a);
    let (bx, by, b2) = row(b);
    let (cx, cy, c2) = row(c);
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

pub fn build_tri_mesh(
    width: usize,
    height: usize,
    spacing: f64,
    jitter: f64,
    seed: u64,
) -> Result<TriMesh> {
    if !(spacing >= 4.0) {
        return Err(Error::param("mesh", "spacing must be at least 4 px"));
    }
    if !(0.0..=0.3).contains(&jitter) {
        return Err(Error::param("mesh", "jitter must lie in [0, 0.3]"));
    }
    if (width as f64) < 2.0 * spacing || (height as f64) < 2.0 * spacing {
        return Err(Error::param(
            "mesh",
            format!("{width}x{height} is smaller than two cells of {spacing} px"),
        ));
    }
    let mut jitter = jitter;
    for _ in 0..=MAX_RETRIES {
        let mesh = build_once(width as f64, height as f64, spacing, jitter, seed);
        if mesh.min_area() > MIN_AREA {
            return Ok(mesh);
        }
        log::warn!("mesh: degenerate triangle with jitter {jitter}, retrying with half");
        jitter *= 0.5;
    }
    Err(Error::DegenerateMesh {
        retries: MAX_RETRIES,
    })
}

fn build_once(width: f64, height: f64, spacing: f64, jitter: f64, seed: u64) -> TriMesh {
    let nx = ((width / spacing).round() as usize).max(2);
    let ny = ((height / spacing).round() as usize).max(2);
    let (sx, sy) = (width / nx as f64, height / ny as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut tags = Vec::with_capacity(vertices.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            let tag = match (i == 0, i == nx, j == 0, j == ny) {
                (true, _, true, _) => BoundaryTag::TopLeft,
                (_, true, true, _) => BoundaryTag::TopRight,
                (true, _, _, true) => BoundaryTag::BottomLeft,
                (_, true, _, true) => BoundaryTag::BottomRight,
                (true, ..) => BoundaryTag::Left,
                (_, true, ..) => BoundaryTag::Right,
                (_, _, true, _) => BoundaryTag::Top,
                (_, _, _, true) => BoundaryTag::Bottom,
                _ => BoundaryTag::Interior,
            };
            // always draw both offsets so the stream does not depend on tags
            let jx = if jitter > 0.0 {
                rng.gen_range(-jitter * sx..=jitter * sx)
            } else {
                0.0
            };
            let jy = if jitter > 0.0 {
                rng.gen_range(-jitter * sy..=jitter * sy)
            } else {
                0.0
            };
            let (px, py) = tag.pinned(width, height);
            let x = px.unwrap_or(i as f64 * sx + jx);
            let y = py.unwrap_or(j as f64 * sy + jy);
            vertices.push([x, y]);
            tags.push(tag);
        }
    }

    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let scale = sx.max(sy);
    lawson_flips(&vertices, &mut triangles, 1e-10 * scale.powi(4));

    let edges = unique_edges(&triangles);
    TriMesh {
        width,
        height,
        vertices,
        triangles,
        edges,
        tags,
    }
}

/// Rotates `tri` so that the vertex opposite the edge `{u, v}` comes last,
/// keeping the cyclic order.
fn rotate_to_opposite(tri: [usize; 3], u: usize, v: usize) -> [usize; 3] {
    let k = tri.iter().position(|&p| p != u && p != v).expect("edge belongs to triangle");
    [tri[(k + 1) % 3], tri[(k + 2) % 3], tri[k]]
}

fn lawson_flips(vertices: &[Point], triangles: &mut [[usize; 3]], tol: f64) {
    loop {
        let mut by_edge: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut touched = vec![false; triangles.len()];
        let mut flipped = false;
        for (&(u, v), owners) in &by_edge {
            if owners.len() != 2 {
                continue;
            }
            let (t1, t2) = (owners[0], owners[1]);
            if touched[t1] || touched[t2] {
                continue;
            }
            let [a, b, c] = rotate_to_opposite(triangles[t1], u, v);
            let [_, _, d] = rotate_to_opposite(triangles[t2], u, v);
            let p = |i: usize| vertices[i];
            if incircle(p(a), p(b), p(c), p(d)) > tol {
                triangles[t1] = [a, d, c];
                triangles[t2] = [d, b, c];
                touched[t1] = true;
                touched[t2] = true;
                flipped = true;
            }
        }
        if !flipped {
            break;
        }
    }
}

fn unique_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut edges: Vec<[usize; 2]> = triangles
        .iter()
        .flat_map(|t| {
            (0..3).map(move |k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                [a.min(b), a.max(b)]
            })
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

impl TriMesh {
    /// Mesh from explicit parts; every triangle must have positive area.
    pub fn new(
        width: f64,
        height: f64,
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<BoundaryTag>,
    ) -> Result<Self> {
        if tags.len() != vertices.len() {
            return Err(Error::param("mesh", "one boundary tag per vertex is required"));
        }
        for tri in &triangles {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::param("mesh", "triangle references a missing vertex"));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            if !(signed_area(a, b, c) > 0.0) {
                return Err(Error::param("mesh", "triangles must have positive signed area"));
            }
        }
        let edges = unique_edges(&triangles);
        Ok(Self { width, height, vertices, triangles, edges, tags })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn min_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.area(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Triangles sharing an edge with each triangle, in ascending order.
    pub fn triangle_neighbors(&self) -> Vec<Vec<usize>> {
        let mut by_edge: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut nbrs = vec![Vec::new(); self.triangles.len()];
        for owners in by_edge.values() {
            if let [t1, t2] = owners[..] {
                nbrs[t1].push(t2);
                nbrs[t2].push(t1);
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
        }
        nbrs
    }

    /// Largest value of the incircle predicate over all triangle / foreign
    /// vertex pairs; non-positive (up to rounding) for a Delaunay mesh.
    pub fn max_incircle_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i]);
            for (v, &p) in self.vertices.iter().enumerate() {
                if tri.contains(&v) {
                    continue;
                }
                worst = worst.max(incircle(a, b, c, p));
            }
        }
        worst
    }
}

/// Text dump: `v x y` lines (6 decimals) followed by 1-based `f i j k` lines.
pub fn mesh_to_obj(vertices: &[Point], triangles: &[[usize; 3]]) -> String {
    let mut out = String::with_capacity(vertices.len() * 24 + triangles.len() * 16);
    for v in vertices {
        let _ = writeln!(out, "v {:.6} {:.6}", v[0], v[1]);
    }
    for t in triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}
