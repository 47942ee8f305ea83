//! End-to-end runs: decode, retarget with the chosen method, encode, and
//! optionally write every intermediate map to a debug directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::importance::{compute_importance, ImportanceMaps, ImportanceParams};
use crate::mesh::{
    build_tri_mesh, classify_triangles, default_spacing, mesh_to_obj, ClassifyParams, TriMesh, TriangleClasses,
};
use crate::raster::{
    decode_image, encode_image, normalize_unit, resample_bilinear, to_luminance, RasterImage,
    ScalarField,
};
use crate::regions::{default_min_size, region_weight_map, segment_graph, RegionLabeling, SegmentationParams};
use crate::seam::{seam_overlay, seam_retarget, SeamMode};
use crate::solver::{solve_retarget_mesh, SolveStatus, SolverParams};
use crate::warp::{mesh_overlay, warp_render};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Mesh,
    SeamBackward,
    SeamForward,
    Scale,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mesh" => Ok(Method::Mesh),
            "seam-backward" => Ok(Method::SeamBackward),
            "seam-forward" => Ok(Method::SeamForward),
            "scale" => Ok(Method::Scale),
            _ => Err(Error::param("cli", format!("unknown method '{s}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mesh => "mesh",
            Method::SeamBackward => "seam-backward",
            Method::SeamForward => "seam-forward",
            Method::Scale => "scale",
        })
    }
}

/// Target extent along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetSize {
    Pixels(usize),
    Percent(f64),
}

impl TargetSize {
    /// Pixel count for a source extent; percentages round half up.
    pub fn resolve(self, source: usize) -> usize {
        match self {
            TargetSize::Pixels(n) => n,
            TargetSize::Percent(p) => (source as f64 * p / 100.0 + 0.5).floor() as usize,
        }
    }
}

impl Default for TargetSize {
    fn default() -> Self {
        TargetSize::Percent(100.0)
    }
}

impl FromStr for TargetSize {
    type Err = Error;

    /// `"320"` or `"60%"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("cli", format!("invalid size '{s}', expected N or N%"));
        let s = s.trim();
        if let Some(p) = s.strip_suffix('%') {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(bad());
            }
            Ok(TargetSize::Percent(p))
        } else {
            Ok(TargetSize::Pixels(s.parse().map_err(|_| bad())?))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub width: TargetSize,
    pub height: TargetSize,
    pub method: Method,
    pub importance: ImportanceParams,
    pub seg_k: f64,
    pub seg_sigma: f64,
    /// Defaults to 0.1% of the pixel count (at least 20).
    pub seg_min_size: Option<usize>,
    pub classify: ClassifyParams,
    pub solver: SolverParams,
    /// Defaults to `max(12, round(min(w, h) / 25))`.
    pub mesh_spacing: Option<f64>,
    pub mesh_jitter: f64,
    pub seed: u64,
    pub debug_dir: Option<PathBuf>,
    /// Grayscale energy (backward) or additive cost (forward) for seam modes.
    pub energy_map: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            width: TargetSize::default(),
            height: TargetSize::default(),
            method: Method::Mesh,
            importance: ImportanceParams::default(),
            seg_k: 1000.0,
            seg_sigma: 0.5,
            seg_min_size: None,
            classify: ClassifyParams::default(),
            solver: SolverParams::default(),
            mesh_spacing: None,
            mesh_jitter: 0.15,
            seed: 0,
            debug_dir: None,
            energy_map: None,
        }
    }

    pub fn segmentation(&self, width: usize, height: usize) -> SegmentationParams {
        SegmentationParams {
            k: self.seg_k,
            sigma: self.seg_sigma,
            min_size: self.seg_min_size.unwrap_or_else(|| default_min_size(width, height)),
        }
    }
}

/// A named debug product.
#[derive(Clone, Debug)]
pub enum Artifact {
    Image(RasterImage),
    Text(String),
}

#[derive(Clone, Debug)]
pub struct Retargeted {
    pub image: RasterImage,
    /// `None` for methods without an iterative solve.
    pub status: Option<SolveStatus>,
    /// Outer solver iterations, 0 for methods without an iterative solve.
    pub iterations: usize,
    /// File suffix (appended to the output stem) and content.
    pub artifacts: Vec<(String, Artifact)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub width: usize,
    pub height: usize,
    pub status: Option<SolveStatus>,
    pub written: Vec<PathBuf>,
}

impl RunOutput {
    pub fn converged(&self) -> bool {
        self.status.is_none_or(SolveStatus::is_converged)
    }
}

fn map_image(f: &ScalarField) -> Artifact {
    Artifact::Image(normalize_unit(f).to_image())
}

/// Distinct, deterministic colour per region label.
fn segmentation_image(seg: &RegionLabeling) -> RasterImage {
    RasterImage::from_fn(seg.width, seg.height, 3, |x, y, c| {
        let mut h = (seg.label(x, y) as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h ^= h >> 29;
        ((h >> (8 * c)) & 0xFF) as f64 / 255.0
    })
    .expect("finite colours")
}

/// Retargets an in-memory image. `energy` is only used by the seam methods.
/// Everything the mesh method computes before the solve.
#[derive(Clone, Debug)]
pub struct MeshSetup {
    pub maps: ImportanceMaps,
    pub seg: RegionLabeling,
    pub m_r: ScalarField,
    pub mesh: TriMesh,
    pub classes: TriangleClasses,
}

pub fn mesh_setup(img: &RasterImage, config: &RunConfig) -> Result<MeshSetup> {
    let (w, h) = (img.width(), img.height());
    let lum = to_luminance(img);
    let maps = compute_importance(&lum, &config.importance)?;
    let seg = segment_graph(img, &config.segmentation(w, h))?;
    let (seg, m_r) = region_weight_map(&seg, &maps.importance)?;
    let spacing = config.mesh_spacing.unwrap_or_else(|| default_spacing(w, h));
    let mesh = build_tri_mesh(w, h, spacing, config.mesh_jitter, config.seed)?;
    let classes = classify_triangles(&mesh, &seg, &maps.importance, &config.classify)?;
    log::info!(
        "mesh: {} vertices, {} triangles, {} regions, {} feature triangles",
        mesh.vertex_count(),
        mesh.triangle_count(),
        seg.region_count,
        classes.feature.iter().filter(|&&f| f).count()
    );
    Ok(MeshSetup { maps, seg, m_r, mesh, classes })
}

pub fn retarget(
    img: &RasterImage,
    config: &RunConfig,
    energy: Option<&ScalarField>,
    collect_debug: bool,
) -> Result<Retargeted> {
    let (w, h) = (img.width(), img.height());
    let (tw, th) = (config.width.resolve(w), config.height.resolve(h));
    if tw < 2 || th < 2 {
        return Err(Error::param("cli", format!("target {tw}x{th} is below 2x2")));
    }
    let mut artifacts = Vec::new();
    match config.method {
        Method::Scale => Ok(Retargeted { image: resample_bilinear(img, tw, th)?, status: None, iterations: 0, artifacts }),
        Method::SeamBackward | Method::SeamForward => {
            let mode = if config.method == Method::SeamBackward { SeamMode::Backward } else { SeamMode::Forward };
            let out = seam_retarget(img, tw, th, mode, energy)?;
            if collect_debug {
                artifacts.push(("seams.png".into(), Artifact::Image(seam_overlay(img, &out.touched))));
            }
            Ok(Retargeted { image: out.image, status: None, iterations: 0, artifacts })
        }
        Method::Mesh => {
            let MeshSetup { maps, seg, m_r, mesh, classes } = mesh_setup(img, config)?;
            let state = solve_retarget_mesh(&mesh, &classes, tw, th, &config.solver)?;
            let image = warp_render(img, &mesh, &state.c_prime, tw, th)?;
            if collect_debug {
                artifacts.extend([
                    ("g.png".to_string(), map_image(&maps.saliency)),
                    ("e.png".to_string(), map_image(&maps.gradient_l1)),
                    ("w.png".to_string(), map_image(&maps.texture_weighted)),
                    ("h.png".to_string(), map_image(&maps.lines_map)),
                    ("m.png".to_string(), map_image(&maps.importance)),
                    ("seg.png".to_string(), Artifact::Image(segmentation_image(&seg))),
                    ("mr.png".to_string(), Artifact::Image(m_r.to_image())),
                    (
                        "mesh-initial.png".to_string(),
                        Artifact::Image(mesh_overlay(img, &mesh.vertices, &mesh.triangles)),
                    ),
                    (
                        "mesh-final.png".to_string(),
                        Artifact::Image(mesh_overlay(&image, &state.c_prime, &mesh.triangles)),
                    ),
                    ("mesh-initial.obj".to_string(), Artifact::Text(mesh_to_obj(&mesh.vertices, &mesh.triangles))),
                    ("mesh-final.obj".to_string(), Artifact::Text(mesh_to_obj(&state.c_prime, &mesh.triangles))),
                    ("trace.txt".to_string(), Artifact::Text(state.trace_text())),
                ]);
            }
            Ok(Retargeted { image, status: Some(state.status), iterations: state.iterations, artifacts })
        }
    }
}

fn write_artifact(path: &Path, artifact: &Artifact) -> Result<()> {
    match artifact {
        Artifact::Image(img) => encode_image(img, path),
        Artifact::Text(text) => fs::write(path, text).map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }),
    }
}

/// Reads the input, retargets it and writes the output plus any debug files.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let img = decode_image(&config.input)?;
    let energy = match &config.energy_map {
        Some(path) if matches!(config.method, Method::SeamBackward | Method::SeamForward) => {
            Some(to_luminance(&decode_image(path)?))
        }
        Some(_) => {
            log::warn!("cli: --energy-map only applies to seam methods, ignoring it");
            None
        }
        None => None,
    };
    let result = retarget(&img, config, energy.as_ref(), config.debug_dir.is_some())?;
    encode_image(&result.image, &config.output)?;
    let mut written = vec![config.output.clone()];
    if let Some(dir) = &config.debug_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Encode { path: dir.clone(), message: e.to_string() })?;
        let stem = config
            .output
            .file_stem()
            .map_or_else(|| "output".to_string(), |s| s.to_string_lossy().into_owned());
        for (suffix, artifact) in &result.artifacts {
            let path = dir.join(format!("{stem}.{suffix}"));
            write_artifact(&path, artifact)?;
            written.push(path);
        }
    }
    Ok(RunOutput {
        width: result.image.width(),
        height: result.image.height(),
        status: result.status,
        written,
    })
}
