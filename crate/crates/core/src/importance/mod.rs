//! The per-pixel importance map `M`.
//!
//! `M = N(N(G) * N(E') + N(W) + gamma * N(H))`, with `N` the min-max
//! normalization, `G` a graph-based saliency map, `E'` the texture-suppressed
//! L1 gradient, `W = E' + beta * Y` (with `Y` the raw L2 gradient) and `H` a
//! rasterized map of long Hough lines. Everything is computed on luminance.

pub(crate) mod gbvs;
mod hough;

pub use gbvs::{gbvs_saliency, gbvs_saliency_with, GbvsParams};
pub use hough::{hough_line_map, hough_line_map_with, HoughParams, LineSegment};

use crate::error::{Error, Result};
use crate::raster::{gradient_energy, normalize_unit, GradientNorm, ScalarField};

/// Value written into the L1 gradient where the L2 gradient marks fine texture.
pub const TEXTURE_FLOOR: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImportanceParams {
    /// Texture threshold multiplier on `mean(Y)`.
    pub alpha: f64,
    /// Weight of the raw L2 gradient in `W`.
    pub beta: f64,
    /// Weight of the Hough line map.
    pub gamma: f64,
}

impl Default for ImportanceParams {
    fn default() -> Self {
        Self {
            alpha: 1.2,
            beta: 1.5,
            gamma: 2.0,
        }
    }
}

impl ImportanceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::param("importance", "alpha must be > 0"));
        }
        if !(self.beta >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::param("importance", "beta and gamma must be >= 0"));
        }
        Ok(())
    }
}

/// All intermediate maps of the importance computation, kept for debugging.
#[derive(Clone, Debug)]
pub struct ImportanceMaps {
    pub saliency: ScalarField,
    pub gradient_l1: ScalarField,
    pub gradient_l2: ScalarField,
    pub gradient_suppressed: ScalarField,
    pub texture_weighted: ScalarField,
    pub lines_map: ScalarField,
    pub lines: Vec<LineSegment>,
    pub importance: ScalarField,
}

/// Replaces the L1 gradient by [`TEXTURE_FLOOR`] wherever the L2 gradient is
/// below `alpha * mean(Y)`, and returns it together with `W = E' + beta * Y`.
pub fn texture_suppress(
    e: &ScalarField,
    y: &ScalarField,
    alpha: f64,
    beta: f64,
) -> Result<(ScalarField, ScalarField)> {
    e.check_same_dims(y, "importance")?;
    let threshold = alpha * y.mean();
    let mut e_mod = e.clone();
    for (ev, &yv) in e_mod.data_mut().iter_mut().zip(y.data()) {
        if yv < threshold {
            *ev = TEXTURE_FLOOR;
        }
    }
    let mut w = e_mod.clone();
    for (wv, &yv) in w.data_mut().iter_mut().zip(y.data()) {
        *wv += beta * yv;
    }
    Ok((e_mod, w))
}

pub fn combine_importance(
    saliency: &ScalarField,
    e_mod: &ScalarField,
    w: &ScalarField,
    h: &ScalarField,
    gamma: f64,
) -> Result<ScalarField> {
    for other in [e_mod, w, h] {
        saliency.check_same_dims(other, "importance")?;
    }
    let (ng, ne, nw, nh) = (
        normalize_unit(saliency),
        normalize_unit(e_mod),
        normalize_unit(w),
        normalize_unit(h),
    );
    let mut sum = ng;
    for (i, v) in sum.data_mut().iter_mut().enumerate() {
        *v = *v * ne.data()[i] + nw.data()[i] + gamma * nh.data()[i];
    }
    Ok(normalize_unit(&sum))
}

/// Runs the whole importance computation on a luminance field.
pub fn compute_importance(lum: &ScalarField, params: &ImportanceParams) -> Result<ImportanceMaps> {
    params.validate()?;
    let saliency = gbvs_saliency(lum)?;
    let gradient_l1 = gradient_energy(lum, GradientNorm::L1);
    let gradient_l2 = gradient_energy(lum, GradientNorm::L2);
    let (gradient_suppressed, texture_weighted) =
        texture_suppress(&gradient_l1, &gradient_l2, params.alpha, params.beta)?;
    let (lines_map, lines) = hough_line_map(lum)?;
    let importance = combine_importance(
        &saliency,
        &gradient_suppressed,
        &texture_weighted,
        &lines_map,
        params.gamma,
    )?;
    Ok(ImportanceMaps {
        saliency,
        gradient_l1,
        gradient_l2,
        gradient_suppressed,
        texture_weighted,
        lines_map,
        lines,
        importance,
    })
}
