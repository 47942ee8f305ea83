use super::{Point, TriMesh};
use crate::error::{Error, Result};
use crate::raster::ScalarField;
use crate::regions::RegionLabeling;

/// Barycentric slack of the inclusive pixel-centre test.
pub const INSIDE_EPS: f64 = 1e-9;

/// How the importance threshold is applied to a triangle's pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdRule {
    /// Every covered pixel must clear the threshold.
    #[default]
    AllPixels,
    /// At least one covered pixel must clear it.
    AnyPixel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyParams {
    pub mu: f64,
    pub rule: ThresholdRule,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            mu: 0.9,
            rule: ThresholdRule::AllPixels,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleClasses {
    /// Majority region of the covered pixels (ties go to the lowest id).
    pub region_of: Vec<u32>,
    /// Importance threshold met for the triangle's own region.
    pub qualified: Vec<bool>,
    /// Covered pixels carry at least two region labels.
    pub straddling: Vec<bool>,
    /// `qualified || straddling`.
    pub feature: Vec<bool>,
    /// Regions whose feature set contains the triangle: its own region when
    /// qualified, plus every label it covers when straddling. Sorted.
    pub feature_regions: Vec<Vec<u32>>,
    /// Mean importance of the covered pixels.
    pub tri_weight: Vec<f64>,
    /// Mean importance of each region.
    pub region_weight: Vec<f64>,
    /// Triangles assigned to each region.
    pub region_triangles: Vec<Vec<usize>>,
    /// Unique edges of each region's triangles.
    pub per_region_edges: Vec<Vec<[usize; 2]>>,
    /// Number of pixel centres inside each triangle.
    pub pixel_counts: Vec<usize>,
}

/// Pixels whose centres fall inside the triangle (edges inclusive), clipped
/// to a `width x height` grid.
pub fn covered_pixels(tri: [Point; 3], width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for_each_covered_pixel(tri, width, height, |x, y, _| out.push((x, y)));
    out
}

/// Calls `f(x, y, barycentric)` for every pixel centre inside `tri`.
pub(crate) fn for_each_covered_pixel(
    tri: [Point; 3],
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize, [f64; 3]),
) {
    let [a, b, c] = tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if det == 0.0 {
        return;
    }
    let min_x = a[0].min(b[0]).min(c[0]);
    let max_x = a[0].max(b[0]).max(c[0]);
    let min_y = a[1].min(b[1]).min(c[1]);
    let max_y = a[1].max(b[1]).max(c[1]);
    let x0 = ((min_x - 0.5).floor().max(0.0)) as usize;
    let y0 = ((min_y - 0.5).floor().max(0.0)) as usize;
    let x1 = ((max_x - 0.5).ceil().max(0.0) as usize).min(width.saturating_sub(1));
    let y1 = ((max_y - 0.5).ceil().max(0.0) as usize).min(height.saturating_sub(1));
    for y in y0..=y1 {
        let py = y as f64 + 0.5;
        for x in x0..=x1 {
            let px = x as f64 + 0.5;
            let l1 = ((b[0] - px) * (c[1] - py) - (b[1] - py) * (c[0] - px)) / det;
            let l2 = ((c[0] - px) * (a[1] - py) - (c[1] - py) * (a[0] - px)) / det;
            let l3 = 1.0 - l1 - l2;
            if l1 >= -INSIDE_EPS && l2 >= -INSIDE_EPS && l3 >= -INSIDE_EPS {
                f(x, y, [l1, l2, l3]);
            }
        }
    }
}

pub fn classify_triangles(
    mesh: &TriMesh,
    seg: &RegionLabeling,
    importance: &ScalarField,
    params: &ClassifyParams,
) -> Result<TriangleClasses> {
    let (w, h) = importance.dims();
    if (seg.width, seg.height) != (w, h) {
        return Err(Error::DimensionMismatch {
            module: "mesh",
            expected: (w, h),
            got: (seg.width, seg.height),
        });
    }
    if (mesh.width, mesh.height) != (w as f64, h as f64) {
        return Err(Error::param("mesh", "mesh does not span the image rectangle"));
    }
    if !seg.is_weighted() {
        return Err(Error::param("mesh", "region weights have not been computed"));
    }
    let n = mesh.triangle_count();
    let mut region_of = vec![0u32; n];
    let mut qualified = vec![false; n];
    let mut straddling = vec![false; n];
    let mut feature_regions = vec![Vec::new(); n];
    let mut tri_weight = vec![0.0; n];
    let mut pixel_counts = vec![0usize; n];

    for t in 0..n {
        let pixels = covered_pixels(mesh.corners(t), w, h);
        pixel_counts[t] = pixels.len();
        if pixels.is_empty() {
            continue;
        }
        let mut labels: Vec<u32> = pixels.iter().map(|&(x, y)| seg.label(x, y)).collect();
        labels.sort_unstable();
        // majority with ties to the lowest id: runs are scanned in ascending order
        let (mut best, mut best_count, mut run_start) = (labels[0], 0, 0);
        let mut distinct = Vec::new();
        for i in 1..=labels.len() {
            if i == labels.len() || labels[i] != labels[run_start] {
                distinct.push(labels[run_start]);
                if i - run_start > best_count {
                    best = labels[run_start];
                    best_count = i - run_start;
                }
                run_start = i;
            }
        }
        region_of[t] = best;
        let values: Vec<f64> = pixels.iter().map(|&(x, y)| importance.get(x, y)).collect();
        tri_weight[t] = values.iter().sum::<f64>() / values.len() as f64;
        let threshold = params.mu * seg.weights[best as usize];
        qualified[t] = match params.rule {
            ThresholdRule::AllPixels => values.iter().all(|&v| v >= threshold),
            ThresholdRule::AnyPixel => values.iter().any(|&v| v >= threshold),
        };
        straddling[t] = distinct.len() >= 2;
        let mut regions = if straddling[t] { distinct } else { Vec::new() };
        if qualified[t] && !regions.contains(&best) {
            regions.push(best);
            regions.sort_unstable();
        }
        feature_regions[t] = regions;
    }

    // Triangles too thin to contain a pixel centre borrow region and weight
    // from the closest covered triangle; they never join a feature set.
    let covered: Vec<usize> = (0..n).filter(|&t| pixel_counts[t] > 0).collect();
    for t in 0..n {
        if pixel_counts[t] > 0 {
            continue;
        }
        let c = mesh.centroid(t);
        let nearest = covered.iter().copied().min_by(|&p, &q| {
            let d = |s: usize| {
                let o = mesh.centroid(s);
                (o[0] - c[0]).powi(2) + (o[1] - c[1]).powi(2)
            };
            d(p).total_cmp(&d(q)).then(p.cmp(&q))
        });
        if let Some(s) = nearest {
            region_of[t] = region_of[s];
            tri_weight[t] = tri_weight[s];
        }
    }

    let feature: Vec<bool> = (0..n).map(|t| qualified[t] || straddling[t]).collect();
    let mut region_triangles = vec![Vec::new(); seg.region_count];
    for t in 0..n {
        region_triangles[region_of[t] as usize].push(t);
    }
    let per_region_edges = region_triangles
        .iter()
        .map(|tris| {
            let mut edges: Vec<[usize; 2]> = tris
                .iter()
                .flat_map(|&t| {
                    let tri = mesh.triangles[t];
                    (0..3).map(move |k| {
                        let (a, b) = (tri[k], tri[(k + 1) % 3]);
                        [a.min(b), a.max(b)]
                    })
                })
                .collect();
            edges.sort_unstable();
            edges.dedup();
            edges
        })
        .collect();

    Ok(TriangleClasses {
        region_of,
        qualified,
        straddling,
        feature,
        feature_regions,
        tri_weight,
        region_weight: seg.weights.clone(),
        region_triangles,
        per_region_edges,
        pixel_counts,
    })
}

impl TriangleClasses {
    /// Every triangle is a feature in its own region and weighted `weight`.
    /// Handy for tests and for running the solver without an importance map.
    pub fn uniform(mesh: &TriMesh, weight: f64) -> Self {
        let n = mesh.triangle_count();
        Self {
            region_of: vec![0; n],
            qualified: vec![true; n],
            straddling: vec![false; n],
            feature: vec![true; n],
            feature_regions: vec![vec![0]; n],
            tri_weight: vec![weight; n],
            region_weight: vec![weight],
            region_triangles: vec![(0..n).collect()],
            per_region_edges: vec![mesh.edges.clone()],
            pixel_counts: vec![0; n],
        }
    }
}
