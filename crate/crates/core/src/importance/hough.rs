//! Straight feature lines via the (rho, theta) Hough transform.

use crate::error::Result;
use crate::raster::{gradient_energy, GradientNorm, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoughParams {
    /// Percentile of the L2 gradient used as the edge threshold.
    pub edge_percentile: f64,
    pub max_peaks: usize,
    /// Peaks must reach this fraction of the strongest accumulator cell.
    pub peak_ratio: f64,
    /// Largest gap (pixels) bridged when tracing a peak into segments.
    pub fill_gap: f64,
    /// Segments shorter than this fraction of the image diagonal are dropped.
    pub min_length_frac: f64,
    /// Half-width, in degrees, of the suppression window around a peak.
    pub suppress_theta: usize,
    /// Half-width, in rho bins, of the suppression window around a peak.
    pub suppress_rho: usize,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            edge_percentile: 90.0,
            max_peaks: 20,
            peak_ratio: 0.3,
            fill_gap: 5.0,
            min_length_frac: 0.1,
            suppress_theta: 5,
            suppress_rho: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub length: f64,
    /// Normal angle of the supporting Hough line, degrees in `[-90, 90)`.
    pub theta_deg: f64,
    pub rho: f64,
}

impl LineSegment {
    fn new(start: (f64, f64), end: (f64, f64), theta_deg: f64, rho: f64) -> Self {
        let length = ((end.0 - start.0).powi(2) + (end.1 - start.1).powi(2)).sqrt();
        Self {
            start,
            end,
            length,
            theta_deg,
            rho,
        }
    }

    /// Direction of the segment itself in degrees, folded into `[0, 180)`.
    pub fn direction_deg(&self) -> f64 {
        let a = (self.end.1 - self.start.1)
            .atan2(self.end.0 - self.start.0)
            .to_degrees();
        a.rem_euclid(180.0)
    }
}

pub fn hough_line_map(lum: &ScalarField) -> Result<(ScalarField, Vec<LineSegment>)> {
    hough_line_map_with(lum, &HoughParams::default())
}

/// Binary map of the kept line segments plus the segments themselves.
pub fn hough_line_map_with(
    lum: &ScalarField,
    params: &HoughParams,
) -> Result<(ScalarField, Vec<LineSegment>)> {
    let (w, h) = lum.dims();
    let mut map = ScalarField::zeros(w, h);
    let edges = edge_pixels(lum, params.edge_percentile);
    if edges.is_empty() {
        return Ok((map, Vec::new()));
    }

    let diag = ((w * w + h * h) as f64).sqrt();
    let rho_max = diag.ceil() as isize;
    let n_rho = (2 * rho_max + 1) as usize;
    let thetas: Vec<(f64, f64, f64)> = (-90..90)
        .map(|d: i32| {
            let r = (d as f64).to_radians();
            (d as f64, r.cos(), r.sin())
        })
        .collect();
    let rho_bin = |x: usize, y: usize, (_, c, s): (f64, f64, f64)| {
        ((x as f64 * c + y as f64 * s).round() as isize + rho_max) as usize
    };

    let mut acc = vec![0u32; thetas.len() * n_rho];
    for &(x, y) in &edges {
        for (t, &th) in thetas.iter().enumerate() {
            acc[t * n_rho + rho_bin(x, y, th)] += 1;
        }
    }

    let peaks = find_peaks(&mut acc, thetas.len(), n_rho, params);
    let min_len = params.min_length_frac * diag;
    let mut lines = Vec::new();
    for (t, r) in peaks {
        let th = thetas[t];
        let (_, c, s) = th;
        let mut pts: Vec<(f64, (usize, usize))> = edges
            .iter()
            .filter(|&&(x, y)| rho_bin(x, y, th) == r)
            .map(|&(x, y)| (-(x as f64) * s + y as f64 * c, (x, y)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let rho = r as f64 - rho_max as f64;
        let mut run_start = 0;
        for i in 1..=pts.len() {
            let split = i == pts.len() || {
                let (a, b) = (pts[i - 1].1, pts[i].1);
                let gap = ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2))
                    .sqrt();
                gap > params.fill_gap
            };
            if split {
                let (a, b) = (pts[run_start].1, pts[i - 1].1);
                let seg = LineSegment::new(
                    (a.0 as f64, a.1 as f64),
                    (b.0 as f64, b.1 as f64),
                    th.0,
                    rho,
                );
                if seg.length >= min_len {
                    lines.push(seg);
                }
                run_start = i;
            }
        }
    }
    for seg in &lines {
        rasterize_segment(&mut map, seg);
    }
    Ok((map, lines))
}

/// Pixels whose L2 gradient reaches the given percentile (and is nonzero).
fn edge_pixels(lum: &ScalarField, percentile: f64) -> Vec<(usize, usize)> {
    let grad = gradient_energy(lum, GradientNorm::L2);
    let mut sorted = grad.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((percentile / 100.0) * (sorted.len() - 1) as f64).floor() as usize;
    let threshold = sorted[idx.min(sorted.len() - 1)];
    let (w, h) = grad.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = grad.get(x, y);
            if v > 0.0 && v >= threshold {
                out.push((x, y));
            }
        }
    }
    out
}

/// Greedy peak picking with neighbourhood suppression. Theta wraps around
/// with a rho sign flip, matching the periodicity of the parametrization.
fn find_peaks(
    acc: &mut [u32],
    n_theta: usize,
    n_rho: usize,
    params: &HoughParams,
) -> Vec<(usize, usize)> {
    let global = *acc.iter().max().unwrap_or(&0);
    let threshold = params.peak_ratio * global as f64;
    let mut peaks = Vec::new();
    while peaks.len() < params.max_peaks {
        let (best, &count) = acc
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("accumulator is nonempty");
        if count == 0 || (count as f64) < threshold {
            break;
        }
        let (t, r) = (best / n_rho, best % n_rho);
        peaks.push((t, r));
        let (st, sr) = (params.suppress_theta as isize, params.suppress_rho as isize);
        for dt in -st..=st {
            let mut tt = t as isize + dt;
            let mut rr_centre = r as isize;
            if tt < 0 || tt >= n_theta as isize {
                tt = tt.rem_euclid(n_theta as isize);
                rr_centre = n_rho as isize - 1 - r as isize;
            }
            for dr in -sr..=sr {
                let rr = rr_centre + dr;
                if (0..n_rho as isize).contains(&rr) {
                    acc[tt as usize * n_rho + rr as usize] = 0;
                }
            }
        }
    }
    peaks
}

fn rasterize_segment(map: &mut ScalarField, seg: &LineSegment) {
    let (dx, dy) = (seg.end.0 - seg.start.0, seg.end.1 - seg.start.1);
    let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as usize;
    let (w, h) = map.dims();
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (seg.start.0 + t * dx).round();
        let y = (seg.start.1 + t * dy).round();
        if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
            map.set(x as usize, y as usize, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_lines() {
        let (h, lines) = hough_line_map(&ScalarField::filled(40, 30, 0.5)).unwrap();
        assert!(lines.is_empty());
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_line_is_found() {
        let lum = ScalarField::from_fn(120, 120, |x, y| if x == y { 1.0 } else { 0.0 });
        let (h, lines) = hough_line_map(&lum).unwrap();
        assert!(!lines.is_empty());
        let best = lines.iter().max_by(|a, b| a.length.total_cmp(&b.length)).unwrap();
        assert!((best.direction_deg() - 45.0).abs() <= 2.0, "{best:?}");
        for seg in &lines {
            assert!(seg.length >= 0.1 * (2.0f64 * 120.0 * 120.0).sqrt());
            for p in [seg.start, seg.end] {
                assert_eq!(h.get(p.0 as usize, p.1 as usize), 1.0);
            }
        }
    }

    #[test]
    fn vertical_line_direction() {
        let lum = ScalarField::from_fn(80, 100, |x, _| if x == 30 { 1.0 } else { 0.0 });
        let (_, lines) = hough_line_map(&lum).unwrap();
        assert_eq!(lines.len(), 1);
        assert!((lines[0].direction_deg() - 90.0).abs() <= 2.0);
    }
}
