use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use retarget_core::pipeline::{run, Method, RunConfig, TargetSize};
use retarget_core::{ClassifyParams, ImportanceParams, SolverParams};

/// Content-aware image resizing.
#[derive(Debug, Parser)]
#[command(name = "retarget", version)]
struct Args {
    /// Input image (PNG, PPM or PGM).
    #[arg(long)]
    input: PathBuf,
    /// Output PNG path.
    #[arg(long)]
    output: PathBuf,
    /// Target width in pixels or as a percentage, e.g. 320 or 60%.
    #[arg(long, default_value = "100%")]
    width: TargetSize,
    /// Target height in pixels or as a percentage.
    #[arg(long, default_value = "100%")]
    height: TargetSize,
    /// mesh, seam-backward, seam-forward or scale.
    #[arg(long, default_value = "mesh")]
    method: Method,

    #[arg(long, default_value_t = 1.2)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1000.0)]
    seg_k: f64,
    #[arg(long, default_value_t = 0.5)]
    seg_sigma: f64,
    /// Smallest region in pixels [default: 0.1% of the image, at least 20].
    #[arg(long)]
    seg_min_size: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    mu: f64,
    #[arg(long, default_value_t = 0.4)]
    tau: f64,
    #[arg(long, default_value_t = 0.02)]
    eps_t: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_p: f64,
    /// Mesh cell size in pixels [default: max(12, min(w, h) / 25)].
    #[arg(long)]
    mesh_spacing: Option<f64>,
    #[arg(long, default_value_t = 0.15)]
    mesh_jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    vertex_tol: f64,
    #[arg(long, default_value_t = 0.1)]
    factor_tol: f64,

    /// Directory for intermediate maps, mesh dumps and the solver trace.
    #[arg(long)]
    debug_dir: Option<PathBuf>,
    /// Grayscale energy map for the seam methods.
    #[arg(long)]
    energy_map: Option<PathBuf>,
}

impl Args {
    fn into_config(self) -> RunConfig {
        RunConfig {
            input: self.input,
            output: self.output,
            width: self.width,
            height: self.height,
            method: self.method,
            importance: ImportanceParams { alpha: self.alpha, beta: self.beta, gamma: self.gamma },
            seg_k: self.seg_k,
            seg_sigma: self.seg_sigma,
            seg_min_size: self.seg_min_size,
            classify: ClassifyParams { mu: self.mu, ..Default::default() },
            solver: SolverParams {
                tau: self.tau,
                eps_t: self.eps_t,
                eps_p: self.eps_p,
                vertex_tol: self.vertex_tol,
                factor_tol: self.factor_tol,
                ..Default::default()
            },
            mesh_spacing: self.mesh_spacing,
            mesh_jitter: self.mesh_jitter,
            seed: self.seed,
            debug_dir: self.debug_dir,
            energy_map: self.energy_map,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors map to the input-error code, not clap's default of 2
    let config = match Args::try_parse() {
        Ok(args) => args.into_config(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&config) {
        Ok(out) if out.converged() => {
            log::info!("wrote {}x{} to {}", out.width, out.height, config.output.display());
            ExitCode::SUCCESS
        }
        Ok(out) => {
            eprintln!("solver: did not converge ({:?}); output written from the best iterate", out.status);
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
