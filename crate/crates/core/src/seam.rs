//! Seam carving with backward or forward energy.
//!
//! All dynamic programming runs on vertical seams; horizontal seams are
//! handled by transposing the image. Ties always resolve to the leftmost
//! candidate.

use crate::error::{Error, Result};
use crate::raster::{gradient_energy, to_luminance, GradientNorm, RasterImage, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Top-to-bottom seam, one column per row; removal narrows the image.
    Vertical,
    /// Left-to-right seam, one row per column; removal shortens the image.
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeamMode {
    Backward,
    Forward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeamPath {
    pub axis: Axis,
    pub coords: Vec<usize>,
    pub cost: f64,
}

impl SeamPath {
    pub fn is_connected(&self) -> bool {
        self.coords.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1)
    }
}

/// Cumulative minimal seam energies in the vertical frame (row `i` of the
/// field is the `i`-th step along the seam).
#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeMap {
    pub map: ScalarField,
    pub axis: Axis,
    /// Offset (-1, 0, 1) of the predecessor chosen for each cell, when known.
    choice: Option<Vec<i8>>,
}

impl CumulativeMap {
    /// A bare table of cumulative values; backtracking follows the minimum
    /// of the cells above.
    pub fn from_field(map: ScalarField, axis: Axis) -> Self {
        Self { map, axis, choice: None }
    }
}

/// Leftmost minimum of `(j - 1, j, j + 1)` costs in a row of width `w`.
#[inline]
fn pick(w: usize, j: usize, cost: impl Fn(usize) -> f64) -> (f64, i8) {
    let mut best = (f64::INFINITY, 0i8);
    let mut first = true;
    for (dj, k) in [(-1i8, j.wrapping_sub(1)), (0, j), (1, j + 1)] {
        if k >= w {
            continue;
        }
        let c = cost(k);
        if first || c < best.0 {
            best = (c, dj);
            first = false;
        }
    }
    best
}

pub fn cumulative_backward(e: &ScalarField) -> CumulativeMap {
    let (w, h) = e.dims();
    let mut m = e.clone();
    let mut choice = vec![0i8; w * h];
    for i in 1..h {
        for j in 0..w {
            let (best, dj) = pick(w, j, |k| m.get(k, i - 1));
            m.set(j, i, e.get(j, i) + best);
            choice[i * w + j] = dj;
        }
    }
    CumulativeMap { map: m, axis: Axis::Vertical, choice: Some(choice) }
}

/// Forward-energy table: each step pays `P` plus the intensity jumps created
/// between the pixels that become adjacent once the seam pixel is removed.
/// Differences that would reach outside the image count as zero.
pub fn cumulative_forward(lum: &ScalarField, p: &ScalarField) -> Result<CumulativeMap> {
    lum.check_same_dims(p, "seam")?;
    let (w, h) = lum.dims();
    let diff = |ax: usize, ay: usize, bx: Option<usize>, by: usize| match bx {
        Some(bx) if bx < w => (lum.get(ax, ay) - lum.get(bx, by)).abs(),
        _ => 0.0,
    };
    let mut m = ScalarField::zeros(w, h);
    let mut choice = vec![0i8; w * h];
    for j in 0..w {
        m.set(j, 0, p.get(j, 0));
    }
    for i in 1..h {
        for j in 0..w {
            let (left, right) = (j.checked_sub(1), j + 1);
            let c_up = match left {
                Some(l) if right < w => (lum.get(right, i) - lum.get(l, i)).abs(),
                _ => 0.0,
            };
            let c_left = c_up + left.map_or(0.0, |l| diff(j, i - 1, Some(l), i));
            let c_right = c_up + diff(j, i - 1, Some(right), i);
            let (best, dj) = pick(w, j, |k| {
                m.get(k, i - 1)
                    + if k < j {
                        c_left
                    } else if k == j {
                        c_up
                    } else {
                        c_right
                    }
            });
            m.set(j, i, p.get(j, i) + best);
            choice[i * w + j] = dj;
        }
    }
    Ok(CumulativeMap { map: m, axis: Axis::Vertical, choice: Some(choice) })
}

/// Minimum-cost seam: leftmost minimum of the last row, then upward along
/// the recorded predecessors (or the cheapest connected cell above).
pub fn backtrack_min_seam(cm: &CumulativeMap) -> SeamPath {
    let (w, h) = cm.map.dims();
    let last = h - 1;
    let mut j = (0..w).fold(0, |b, k| if cm.map.get(k, last) < cm.map.get(b, last) { k } else { b });
    let cost = cm.map.get(j, last);
    let mut coords = vec![0; h];
    coords[last] = j;
    for i in (1..h).rev() {
        let dj = match &cm.choice {
            Some(choice) => choice[i * w + j],
            None => pick(w, j, |k| cm.map.get(k, i - 1)).1,
        };
        j = (j as isize + dj as isize) as usize;
        coords[i - 1] = j;
    }
    SeamPath { axis: cm.axis, coords, cost }
}

/// Pixel planes carved together: the image, an optional energy override and
/// the source position of every pixel.
#[derive(Clone, Debug)]
struct Carving {
    w: usize,
    h: usize,
    channels: usize,
    img: Vec<f64>,
    extra: Option<Vec<f64>>,
    origin: Vec<(u32, u32)>,
}

impl Carving {
    fn new(img: &RasterImage, extra: Option<&ScalarField>) -> Self {
        let (w, h) = (img.width(), img.height());
        Self {
            w,
            h,
            channels: img.channels(),
            img: img.data().to_vec(),
            extra: extra.map(|e| e.data().to_vec()),
            origin: (0..h).flat_map(|y| (0..w).map(move |x| (x as u32, y as u32))).collect(),
        }
    }

    fn transpose(&mut self) {
        let (w, h, c) = (self.w, self.h, self.channels);
        let mut img = vec![0.0; self.img.len()];
        let mut origin = vec![(0, 0); self.origin.len()];
        for y in 0..h {
            for x in 0..w {
                let (src, dst) = (y * w + x, x * h + y);
                img[dst * c..(dst + 1) * c].copy_from_slice(&self.img[src * c..(src + 1) * c]);
                origin[dst] = self.origin[src];
            }
        }
        if let Some(extra) = &mut self.extra {
            let mut t = vec![0.0; extra.len()];
            for y in 0..h {
                for x in 0..w {
                    t[x * h + y] = extra[y * w + x];
                }
            }
            *extra = t;
        }
        self.img = img;
        self.origin = origin;
        (self.w, self.h) = (h, w);
    }

    fn image(&self) -> RasterImage {
        RasterImage::from_parts(self.w, self.h, self.channels, self.img.clone())
    }

    fn extra_field(&self) -> Option<ScalarField> {
        self.extra.as_ref().map(|e| ScalarField::new(self.w, self.h, e.clone()).expect("dimensions track"))
    }

    fn remove(&mut self, coords: &[usize]) -> Vec<(u32, u32)> {
        let (w, c) = (self.w, self.channels);
        let mut removed = Vec::with_capacity(self.h);
        let keep = |y: usize, x: usize| x != coords[y];
        let mut img = Vec::with_capacity((w - 1) * self.h * c);
        let mut origin = Vec::with_capacity((w - 1) * self.h);
        for y in 0..self.h {
            for x in 0..w {
                let p = y * w + x;
                if keep(y, x) {
                    img.extend_from_slice(&self.img[p * c..(p + 1) * c]);
                    origin.push(self.origin[p]);
                } else {
                    removed.push(self.origin[p]);
                }
            }
        }
        if let Some(extra) = &mut self.extra {
            *extra = (0..self.h)
                .flat_map(|y| (0..w).filter(move |&x| keep(y, x)).map(move |x| (y, x)))
                .map(|(y, x)| extra[y * w + x])
                .collect();
        }
        self.img = img;
        self.origin = origin;
        self.w -= 1;
        removed
    }

    /// Duplicates every marked pixel, the copy being the average of the
    /// pixel and its right neighbour (itself at the last column).
    fn insert(&mut self, marked: &[Vec<bool>]) -> Vec<(u32, u32)> {
        let (w, c) = (self.w, self.channels);
        let added = marked.iter().map(|row| row.iter().filter(|&&m| m).count()).max().unwrap_or(0);
        let mut img = Vec::with_capacity((w + added) * self.h * c);
        let mut origin = Vec::with_capacity((w + added) * self.h);
        let mut extra = self.extra.as_ref().map(|_| Vec::with_capacity((w + added) * self.h));
        let mut touched = Vec::new();
        for y in 0..self.h {
            for x in 0..w {
                let p = y * w + x;
                img.extend_from_slice(&self.img[p * c..(p + 1) * c]);
                origin.push(self.origin[p]);
                if let (Some(out), Some(src)) = (&mut extra, &self.extra) {
                    out.push(src[p]);
                }
                if marked[y][x] {
                    let q = y * w + (x + 1).min(w - 1);
                    for k in 0..c {
                        img.push(0.5 * (self.img[p * c + k] + self.img[q * c + k]));
                    }
                    origin.push(self.origin[p]);
                    touched.push(self.origin[p]);
                    if let (Some(out), Some(src)) = (&mut extra, &self.extra) {
                        out.push(0.5 * (src[p] + src[q]));
                    }
                }
            }
        }
        self.img = img;
        self.origin = origin;
        self.extra = extra;
        self.w += added;
        touched
    }

    fn cumulative(&self, mode: SeamMode, mask: Option<&[bool]>) -> Result<CumulativeMap> {
        let lum = to_luminance(&self.image());
        let masked = |mut f: ScalarField| {
            if let Some(mask) = mask {
                for (v, &m) in f.data_mut().iter_mut().zip(mask) {
                    if m {
                        *v = f64::INFINITY;
                    }
                }
            }
            f
        };
        match mode {
            SeamMode::Backward => {
                let e = self.extra_field().unwrap_or_else(|| gradient_energy(&lum, GradientNorm::L1));
                Ok(cumulative_backward(&masked(e)))
            }
            SeamMode::Forward => {
                let p = self.extra_field().unwrap_or_else(|| ScalarField::zeros(self.w, self.h));
                cumulative_forward(&lum, &masked(p))
            }
        }
    }

    /// `n` disjoint seams on the current image; each found seam's pixels are
    /// given infinite energy before the next search.
    fn find_seams(&self, n: usize, mode: SeamMode) -> Result<Vec<SeamPath>> {
        if n > self.w {
            return Err(Error::Seam(format!("cannot find {n} disjoint seams in width {}", self.w)));
        }
        let mut mask = vec![false; self.w * self.h];
        let mut seams = Vec::with_capacity(n);
        for _ in 0..n {
            let seam = backtrack_min_seam(&self.cumulative(mode, Some(&mask))?);
            if seam.coords.iter().enumerate().any(|(y, &x)| mask[y * self.w + x]) {
                return Err(Error::Seam(format!("only {} disjoint seams exist", seams.len())));
            }
            for (y, &x) in seam.coords.iter().enumerate() {
                mask[y * self.w + x] = true;
            }
            seams.push(seam);
        }
        Ok(seams)
    }

    fn insert_seams(&mut self, n: usize, mode: SeamMode) -> Result<Vec<(u32, u32)>> {
        let seams = self.find_seams(n, mode)?;
        let mut marked = vec![vec![false; self.w]; self.h];
        for seam in &seams {
            for (y, &x) in seam.coords.iter().enumerate() {
                marked[y][x] = true;
            }
        }
        Ok(self.insert(&marked))
    }

    /// Removes or inserts vertical seams until the width equals `target`.
    fn carve_to(&mut self, target: usize, mode: SeamMode, touched: &mut Vec<(u32, u32)>) -> Result<()> {
        while self.w > target {
            let seam = backtrack_min_seam(&self.cumulative(mode, None)?);
            touched.extend(self.remove(&seam.coords));
        }
        while self.w < target {
            // batches of at most half the width keep disjoint seams available
            let n = (target - self.w).min((self.w / 2).max(1));
            touched.extend(self.insert_seams(n, mode)?);
        }
        Ok(())
    }
}

fn check_seam(w: usize, h: usize, seam: &SeamPath) -> Result<()> {
    if seam.coords.len() != h || seam.coords.iter().any(|&x| x >= w) || !seam.is_connected() {
        return Err(Error::Seam(format!("seam does not fit a {w}x{h} frame")));
    }
    Ok(())
}

pub fn remove_seam(img: &RasterImage, seam: &SeamPath) -> Result<RasterImage> {
    let mut c = Carving::new(img, None);
    if seam.axis == Axis::Horizontal {
        c.transpose();
    }
    check_seam(c.w, c.h, seam)?;
    if c.w <= 2 {
        return Err(Error::Seam("cannot carve below 2 pixels".into()));
    }
    c.remove(&seam.coords);
    if seam.axis == Axis::Horizontal {
        c.transpose();
    }
    Ok(c.image())
}

/// `n` pairwise disjoint seams of the original image, cheapest first.
pub fn find_seams(
    img: &RasterImage,
    n: usize,
    axis: Axis,
    mode: SeamMode,
    p: Option<&ScalarField>,
) -> Result<Vec<SeamPath>> {
    let mut c = Carving::new(img, p);
    if axis == Axis::Horizontal {
        c.transpose();
    }
    let mut seams = c.find_seams(n, mode)?;
    for s in &mut seams {
        s.axis = axis;
    }
    Ok(seams)
}

pub fn insert_seams(
    img: &RasterImage,
    n: usize,
    axis: Axis,
    mode: SeamMode,
    p: Option<&ScalarField>,
) -> Result<RasterImage> {
    if n == 0 {
        return Err(Error::Seam("at least one seam must be inserted".into()));
    }
    check_override(img, p)?;
    let mut c = Carving::new(img, p);
    if axis == Axis::Horizontal {
        c.transpose();
    }
    c.insert_seams(n, mode)?;
    if axis == Axis::Horizontal {
        c.transpose();
    }
    Ok(c.image())
}

fn check_override(img: &RasterImage, p: Option<&ScalarField>) -> Result<()> {
    match p {
        Some(p) if p.dims() != (img.width(), img.height()) => Err(Error::DimensionMismatch {
            module: "seam",
            expected: (img.width(), img.height()),
            got: p.dims(),
        }),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug)]
pub struct SeamOutcome {
    pub image: RasterImage,
    /// Source pixels removed or duplicated, in processing order.
    pub touched: Vec<(usize, usize)>,
}

pub fn seam_retarget(
    img: &RasterImage,
    target_w: usize,
    target_h: usize,
    mode: SeamMode,
    energy_override: Option<&ScalarField>,
) -> Result<SeamOutcome> {
    if target_w < 2 || target_h < 2 {
        return Err(Error::Seam("targets must be at least 2 pixels".into()));
    }
    check_override(img, energy_override)?;
    let mut c = Carving::new(img, energy_override);
    let mut touched = Vec::new();
    c.carve_to(target_w, mode, &mut touched)?;
    c.transpose();
    c.carve_to(target_h, mode, &mut touched)?;
    c.transpose();
    Ok(SeamOutcome {
        image: c.image(),
        touched: touched.into_iter().map(|(x, y)| (x as usize, y as usize)).collect(),
    })
}

/// Copy of `src` with the given pixels painted in the highlight colour.
pub fn seam_overlay(src: &RasterImage, pixels: &[(usize, usize)]) -> RasterImage {
    let mut out = src.clone();
    let color = crate::warp::highlight(src.channels());
    for &(x, y) in pixels {
        out.pixel_mut(x, y).copy_from_slice(&color);
    }
    out
}
