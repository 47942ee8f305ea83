//! Pixel containers and the low-level image operations every other stage
//! builds on.
//!
//! Images are stored as `f64` samples in `[0, 1]`, row-major and
//! channel-interleaved. Quantization to 8 bits happens only when encoding.

use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// A 1- or 3-channel image with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

/// A single-channel real-valued grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientNorm {
    L1,
    L2,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::TooSmall { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "{channels} channels, expected 1 or 3"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidRaster(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from a per-pixel closure. Values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Internal constructor for data produced by operations that already
    /// maintain the invariants.
    pub(crate) fn from_parts(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub(crate) fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Swaps the axes. Used to run column algorithms on rows.
    pub fn transpose(&self) -> RasterImage {
        let c = self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.extend_from_slice(self.pixel(x, y));
            }
        }
        debug_assert_eq!(data.len(), self.width * self.height * c);
        Self::from_parts(self.height, self.width, c, data)
    }

    pub fn mirror_x(&self) -> RasterImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(self.pixel(x, y));
            }
        }
        Self::from_parts(self.width, self.height, self.channels, data)
    }

    /// Expands a gray image to RGB; RGB images are returned unchanged.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_parts(self.width, self.height, 3, data)
    }

    /// Bilinear sample at continuous index coordinates, clamped to the grid.
    /// `(0, 0)` is the centre of the top-left pixel.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) {
        let (x0, x1, fx) = lerp_taps(x, self.width);
        let (y0, y1, fy) = lerp_taps(y, self.height);
        let c = self.channels;
        let p00 = (y0 * self.width + x0) * c;
        let p10 = (y0 * self.width + x1) * c;
        let p01 = (y1 * self.width + x0) * c;
        let p11 = (y1 * self.width + x1) * c;
        for k in 0..c {
            let top = self.data[p00 + k] * (1.0 - fx) + self.data[p10 + k] * fx;
            let bottom = self.data[p01 + k] * (1.0 - fx) + self.data[p11 + k] * fx;
            out[k] = top * (1.0 - fy) + bottom * fy;
        }
    }
}

/// Clamped interpolation taps: returns the two neighbouring indices and the
/// fractional weight of the second one.
fn lerp_taps(coord: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let c = coord.clamp(0.0, max);
    let i0 = c.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, c - i0 as f64)
}

impl ScalarField {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster("empty scalar field".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster("non-finite value in scalar field".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Position of the first maximum in raster order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn transpose(&self) -> ScalarField {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn mirror_x(&self) -> ScalarField {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    /// Bilinear sample at continuous index coordinates, clamped to the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let (x0, x1, fx) = lerp_taps(x, self.width);
        let (y0, y1, fy) = lerp_taps(y, self.height);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Resamples with the same pixel-centre convention as [`resample_bilinear`].
    pub fn resample(&self, width: usize, height: usize) -> ScalarField {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Self::from_fn(width, height, |x, y| {
            self.sample_bilinear((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
        })
    }

    /// Gray image for debug output; values are clamped to `[0, 1]`.
    pub fn to_image(&self) -> RasterImage {
        RasterImage::from_parts(
            self.width,
            self.height,
            1,
            self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
    }

    pub(crate) fn check_same_dims(&self, other: &ScalarField, module: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                module,
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(())
    }
}

/// Reads a PNG or binary PPM/PGM file.
///
/// Integer samples are divided by `2^depth - 1`; alpha is dropped.
pub fn decode_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => return Err(decode_err(format!("unsupported format {other:?}"))),
    }
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    from_dynamic(img).map_err(|e| match e {
        Error::InvalidRaster(m) => decode_err(m),
        e => e,
    })
}

fn from_dynamic(img: DynamicImage) -> Result<RasterImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 2 || h < 2 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
        });
    }
    const S8: f64 = 255.0;
    const S16: f64 = 65535.0;
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| v as f64 / S8).collect()),
        DynamicImage::ImageLumaA8(b) => (
            1,
            b.into_raw().chunks_exact(2).map(|p| p[0] as f64 / S8).collect(),
        ),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f64 / S8).collect()),
        DynamicImage::ImageRgba8(b) => (
            3,
            b.into_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .map(|v| v as f64 / S8)
                .collect(),
        ),
        DynamicImage::ImageLuma16(b) => {
            (1, b.into_raw().iter().map(|&v| v as f64 / S16).collect())
        }
        DynamicImage::ImageLumaA16(b) => (
            1,
            b.into_raw().chunks_exact(2).map(|p| p[0] as f64 / S16).collect(),
        ),
        DynamicImage::ImageRgb16(b) => {
            (3, b.into_raw().iter().map(|&v| v as f64 / S16).collect())
        }
        DynamicImage::ImageRgba16(b) => (
            3,
            b.into_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .map(|v| v as f64 / S16)
                .collect(),
        ),
        other => {
            return Err(Error::InvalidRaster(format!(
                "unsupported pixel layout {:?}",
                other.color()
            )))
        }
    };
    RasterImage::new(w, h, channels, data)
}

/// Quantizes a sample to 8 bits, rounding half up.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes an 8-bit PNG (gray or RGB depending on the channel count).
pub fn encode_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize_u8(v)).collect();
    let color = if img.channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width as u32,
        img.height as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Luminance with BT.601 weights; gray images are copied.
pub fn to_luminance(img: &RasterImage) -> ScalarField {
    let data = match img.channels {
        1 => img.data.clone(),
        _ => img
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect(),
    };
    ScalarField {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Forward-difference gradient magnitude. The difference across the last
/// column (row) is zero.
pub fn gradient_energy(f: &ScalarField, norm: GradientNorm) -> ScalarField {
    let (w, h) = f.dims();
    ScalarField::from_fn(w, h, |x, y| {
        let v = f.get(x, y);
        let gx = if x + 1 < w { f.get(x + 1, y) - v } else { 0.0 };
        let gy = if y + 1 < h { f.get(x, y + 1) - v } else { 0.0 };
        match norm {
            GradientNorm::L1 => gx.abs() + gy.abs(),
            GradientNorm::L2 => (gx * gx + gy * gy).sqrt(),
        }
    })
}

/// Min-max normalization to `[0, 1]`. A constant field maps to zeros.
pub fn normalize_unit(f: &ScalarField) -> ScalarField {
    let (lo, hi) = (f.min(), f.max());
    if hi == lo {
        return ScalarField::zeros(f.width, f.height);
    }
    let span = hi - lo;
    f.map(|v| (v - lo) / span)
}

/// Bilinear resize with pixel centres mapped as `src = (dst + 0.5) * scale - 0.5`.
pub fn resample_bilinear(img: &RasterImage, width: usize, height: usize) -> Result<RasterImage> {
    if width < 2 || height < 2 {
        return Err(Error::TooSmall { width, height });
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let c = img.channels;
    let mut data = vec![0.0; width * height * c];
    for y in 0..height {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..width {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            let i = (y * width + x) * c;
            img.sample_bilinear(src_x, src_y, &mut data[i..i + c]);
        }
    }
    Ok(RasterImage::from_parts(width, height, c, data))
}
