//! Graph-based colour segmentation and the region-weighted importance map.
//!
//! Segmentation follows Felzenszwalb and Huttenlocher: an 8-connected pixel
//! graph weighted by colour distance is processed in ascending edge order and
//! two components merge when the connecting edge is no heavier than
//! `min(Int(C1) + k/|C1|, Int(C2) + k/|C2|)`, `Int` being the heaviest edge of
//! a component's spanning tree. Edge weights are measured on the 0..255 scale
//! so that `k` keeps its customary magnitude (`k = 1000` is typical).

use crate::error::{Error, Result};
use crate::importance::gbvs::gaussian_blur;
use crate::raster::{RasterImage, ScalarField};

/// Colour distances are taken on 8-bit intensity units.
pub const INTENSITY_SCALE: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentationParams {
    pub k: f64,
    pub sigma: f64,
    pub min_size: usize,
}

impl SegmentationParams {
    /// Typical parameters with `min_size` set to 0.1% of the pixel count
    /// (but at least 20 pixels).
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            k: 1000.0,
            sigma: 0.5,
            min_size: default_min_size(width, height),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !(self.sigma >= 0.0) || self.min_size < 1 {
            return Err(Error::param(
                "regions",
                "need k > 0, sigma >= 0 and min_size >= 1",
            ));
        }
        Ok(())
    }
}

pub fn default_min_size(width: usize, height: usize) -> usize {
    ((width * height) as f64 * 0.001).round().max(20.0) as usize
}

/// Per-pixel region ids in `[0, region_count)` and, once weighted, the mean
/// importance of each region.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub region_count: usize,
    /// Empty until [`region_weight_map`] fills it.
    pub weights: Vec<f64>,
}

impl RegionLabeling {
    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.len() == self.region_count
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.region_count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Relabels ids in raster-scan order of first appearance.
    pub(crate) fn compact(width: usize, height: usize, roots: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(roots.len());
        for &r in roots {
            let next = map.len() as u32;
            labels.push(*map.entry(r).or_insert(next));
        }
        Self {
            width,
            height,
            labels,
            region_count: map.len(),
            weights: Vec::new(),
        }
    }
}

/// Disjoint-set forest with the per-component data the merge predicate needs.
#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    size: Vec<usize>,
    internal: Vec<f64>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    pub fn size(&self, root: usize) -> usize {
        self.size[root]
    }

    pub fn internal(&self, root: usize) -> f64 {
        self.internal[root]
    }

    /// Joins two roots; the merged component's internal difference becomes
    /// `weight`, the heaviest edge seen so far in ascending processing.
    pub fn join(&mut self, a: usize, b: usize, weight: f64) -> usize {
        let (big, small) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        if self.rank[a] == self.rank[b] {
            self.rank[big] += 1;
        }
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.internal[big] = weight;
        big
    }
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    a: usize,
    b: usize,
    w: f64,
}

pub fn segment_graph(img: &RasterImage, params: &SegmentationParams) -> Result<RegionLabeling> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let channels: Vec<ScalarField> = (0..img.channels())
        .map(|c| {
            let f = ScalarField::from_fn(w, h, |x, y| img.pixel(x, y)[c] * INTENSITY_SCALE);
            gaussian_blur(&f, params.sigma)
        })
        .collect();
    let dist = |p: usize, q: usize| {
        channels
            .iter()
            .map(|ch| (ch.data()[p] - ch.data()[q]).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut edges = Vec::with_capacity(w * h * 4);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                edges.push(Edge { a: p, b: p + 1, w: dist(p, p + 1) });
            }
            if y + 1 < h {
                edges.push(Edge { a: p, b: p + w, w: dist(p, p + w) });
            }
            if x + 1 < w && y + 1 < h {
                edges.push(Edge { a: p, b: p + w + 1, w: dist(p, p + w + 1) });
            }
            if x + 1 < w && y > 0 {
                edges.push(Edge { a: p, b: p - w + 1, w: dist(p, p - w + 1) });
            }
        }
    }
    edges.sort_by(|e, f| {
        e.w.total_cmp(&f.w)
            .then(e.a.cmp(&f.a))
            .then(e.b.cmp(&f.b))
    });

    let mut sets = DisjointSets::new(w * h);
    for e in &edges {
        let (ra, rb) = (sets.find(e.a), sets.find(e.b));
        if ra == rb {
            continue;
        }
        let ta = sets.internal(ra) + params.k / sets.size(ra) as f64;
        let tb = sets.internal(rb) + params.k / sets.size(rb) as f64;
        if e.w <= ta.min(tb) {
            sets.join(ra, rb, e.w);
        }
    }
    for e in &edges {
        let (ra, rb) = (sets.find(e.a), sets.find(e.b));
        if ra != rb && (sets.size(ra) < params.min_size || sets.size(rb) < params.min_size) {
            let internal = sets.internal(ra).max(sets.internal(rb));
            sets.join(ra, rb, internal);
        }
    }
    let roots: Vec<usize> = (0..w * h).map(|p| sets.find(p)).collect();
    Ok(RegionLabeling::compact(w, h, &roots))
}

/// Mean importance per region and the map holding that mean at every pixel.
pub fn region_weight_map(
    seg: &RegionLabeling,
    importance: &ScalarField,
) -> Result<(RegionLabeling, ScalarField)> {
    if (seg.width, seg.height) != importance.dims() {
        return Err(Error::DimensionMismatch {
            module: "regions",
            expected: (seg.width, seg.height),
            got: importance.dims(),
        });
    }
    let mut sums = vec![0.0; seg.region_count];
    let mut counts = vec![0usize; seg.region_count];
    for (&l, &m) in seg.labels.iter().zip(importance.data()) {
        sums[l as usize] += m;
        counts[l as usize] += 1;
    }
    let weights: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let map = ScalarField::from_fn(seg.width, seg.height, |x, y| weights[seg.label(x, y) as usize]);
    let mut weighted = seg.clone();
    weighted.weights = weights;
    Ok((weighted, map))
}
