//! Graph-based visual saliency.
//!
//! Feature maps (intensity and four oriented second-derivative responses, at
//! two pyramid levels) are resampled onto a coarse grid. Each map defines a
//! fully connected Markov chain whose transition weight from node `a` to `b`
//! is `(|f(a) - f(b)| + eps) * exp(-d(a, b)^2 / (2 sigma^2))`. Nodes that
//! differ from their surroundings accumulate probability mass in the
//! equilibrium distribution.
//!
//! The equilibrium of the feature-free chain (distance kernel only) is not
//! uniform: nodes near the border have fewer neighbours and lose mass. Each
//! channel's equilibrium is therefore divided by that baseline before the
//! channels are averaged, so a featureless image yields a flat map.

use crate::error::{Error, Result};
use crate::raster::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbvsParams {
    /// Larger side of the coarse grid the chains live on.
    pub coarse_max: usize,
    /// Inputs whose short side is below this are upsampled first.
    pub min_side: usize,
    /// Larger side of the finest pyramid level.
    pub pyramid_max: usize,
    /// Regularizer added to every feature dissimilarity.
    pub eps_d: f64,
    /// Gaussian falloff as a fraction of `coarse_max`.
    pub sigma_frac: f64,
    /// L1 change below which power iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GbvsParams {
    fn default() -> Self {
        Self {
            coarse_max: 32,
            min_side: 32,
            pyramid_max: 128,
            eps_d: 1e-4,
            sigma_frac: 1.0 / 6.0,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

/// Saliency map in `[0, 1]` (maximum scaled to 1) with the input's dimensions.
pub fn gbvs_saliency(lum: &ScalarField) -> Result<ScalarField> {
    gbvs_saliency_with(lum, &GbvsParams::default())
}

pub fn gbvs_saliency_with(lum: &ScalarField, params: &GbvsParams) -> Result<ScalarField> {
    let (w, h) = lum.dims();
    let short = w.min(h);
    if short < params.min_side {
        let scale = params.min_side as f64 / short as f64;
        let up_w = ((w as f64 * scale).round() as usize).max(params.min_side);
        let up_h = ((h as f64 * scale).round() as usize).max(params.min_side);
        let up = lum.resample(up_w, up_h);
        let sal = saliency_core(&up, params)?;
        return Ok(scale_to_max(&sal.resample(w, h)));
    }
    saliency_core(lum, params)
}

fn saliency_core(lum: &ScalarField, params: &GbvsParams) -> Result<ScalarField> {
    let (w, h) = lum.dims();
    let (cw, ch) = fit_within(w, h, params.coarse_max);
    let grid = ChainGrid::new(cw, ch, params.coarse_max as f64 * params.sigma_frac);

    let base = ScalarField::filled(cw, ch, 0.0);
    let baseline = grid.equilibrium(&base, params)?;

    let (pw, ph) = fit_within(w, h, params.pyramid_max);
    let level0 = lum.resample(pw, ph);
    let level1 = level0.resample((pw / 2).max(2), (ph / 2).max(2));

    let mut activation = vec![0.0; cw * ch];
    let mut channels = 0usize;
    for level in [&level0, &level1] {
        for feature in feature_maps(level) {
            let coarse = feature.resample(cw, ch);
            let pi = grid.equilibrium(&coarse, params)?;
            for (a, (p, b)) in activation.iter_mut().zip(pi.iter().zip(&baseline)) {
                *a += p / b;
            }
            channels += 1;
        }
    }
    for a in &mut activation {
        *a /= channels as f64;
    }
    let coarse = ScalarField::new(cw, ch, activation)?;
    Ok(scale_to_max(&coarse.resample(w, h)))
}

/// Dimensions with the larger side equal to `max_side` (never enlarged).
fn fit_within(w: usize, h: usize, max_side: usize) -> (usize, usize) {
    let long = w.max(h);
    if long <= max_side {
        return (w, h);
    }
    let s = max_side as f64 / long as f64;
    (
        ((w as f64 * s).round() as usize).clamp(2, max_side),
        ((h as f64 * s).round() as usize).clamp(2, max_side),
    )
}

fn scale_to_max(f: &ScalarField) -> ScalarField {
    let m = f.max();
    if m > 0.0 {
        f.map(|v| (v / m).clamp(0.0, 1.0))
    } else {
        ScalarField::zeros(f.width(), f.height())
    }
}

/// Intensity plus |second directional derivative| at 0, 45, 90 and 135 degrees.
fn feature_maps(level: &ScalarField) -> [ScalarField; 5] {
    let smooth = gaussian_blur(level, 1.0);
    let (w, h) = smooth.dims();
    let at = |x: isize, y: isize| {
        smooth.get(
            x.clamp(0, w as isize - 1) as usize,
            y.clamp(0, h as isize - 1) as usize,
        )
    };
    let mut maps = [
        level.clone(),
        ScalarField::zeros(w, h),
        ScalarField::zeros(w, h),
        ScalarField::zeros(w, h),
        ScalarField::zeros(w, h),
    ];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = at(x, y);
            let dxx = at(x + 1, y) - 2.0 * c + at(x - 1, y);
            let dyy = at(x, y + 1) - 2.0 * c + at(x, y - 1);
            let dxy = 0.25
                * (at(x + 1, y + 1) - at(x - 1, y + 1) - at(x + 1, y - 1) + at(x - 1, y - 1));
            let diag = 0.5 * (dxx + dyy);
            let (ux, uy) = (x as usize, y as usize);
            maps[1].set(ux, uy, dxx.abs());
            maps[2].set(ux, uy, (diag + dxy).abs());
            maps[3].set(ux, uy, dyy.abs());
            maps[4].set(ux, uy, (diag - dxy).abs());
        }
    }
    maps
}

/// Separable Gaussian blur with clamped borders.
pub(crate) fn gaussian_blur(f: &ScalarField, sigma: f64) -> ScalarField {
    if sigma <= 0.0 {
        return f.clone();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    let (w, h) = f.dims();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let horiz = ScalarField::from_fn(w, h, |x, y| {
        (-radius..=radius)
            .map(|i| kernel[(i + radius) as usize] * f.get(clamp(x as isize + i, w), y))
            .sum()
    });
    ScalarField::from_fn(w, h, |x, y| {
        (-radius..=radius)
            .map(|i| kernel[(i + radius) as usize] * horiz.get(x, clamp(y as isize + i, h)))
            .sum()
    })
}

/// Pairwise distance kernel of the coarse grid, shared by all channels.
struct ChainGrid {
    n: usize,
    kernel: Vec<f64>,
}

impl ChainGrid {
    fn new(w: usize, h: usize, sigma: f64) -> Self {
        let n = w * h;
        let mut kernel = vec![0.0; n * n];
        let inv = 1.0 / (2.0 * sigma * sigma);
        for a in 0..n {
            let (ax, ay) = ((a % w) as f64, (a / w) as f64);
            for b in 0..n {
                let (bx, by) = ((b % w) as f64, (b / w) as f64);
                let d2 = (ax - bx).powi(2) + (ay - by).powi(2);
                kernel[a * n + b] = (-d2 * inv).exp();
            }
        }
        Self { n, kernel }
    }

    /// Equilibrium distribution of the chain built on `feature`, by power
    /// iteration from the uniform distribution.
    fn equilibrium(&self, feature: &ScalarField, params: &GbvsParams) -> Result<Vec<f64>> {
        let n = self.n;
        let f = feature.data();
        let mut transition = vec![0.0; n * n];
        for a in 0..n {
            let row = &mut transition[a * n..(a + 1) * n];
            let mut total = 0.0;
            for b in 0..n {
                let wgt = ((f[a] - f[b]).abs() + params.eps_d) * self.kernel[a * n + b];
                row[b] = wgt;
                total += wgt;
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        for _ in 0..params.max_iter {
            next.iter_mut().for_each(|v| *v = 0.0);
            for a in 0..n {
                let pa = pi[a];
                let row = &transition[a * n..(a + 1) * n];
                for (nb, &t) in next.iter_mut().zip(row) {
                    *nb += pa * t;
                }
            }
            let change: f64 = pi.iter().zip(&next).map(|(p, q)| (p - q).abs()).sum();
            std::mem::swap(&mut pi, &mut next);
            if change < params.tol {
                let total: f64 = pi.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::SaliencyNotConverged {
                        iterations: params.max_iter,
                    });
                }
                return Ok(pi);
            }
        }
        Err(Error::SaliencyNotConverged {
            iterations: params.max_iter,
        })
    }
}
