//! Constrained mesh deformation.
//!
//! The deformed vertex positions `c'` minimize `E_o = E1 + E2 + E3`:
//!
//! - `E1` pulls every triangle edge toward its original vector scaled by the
//!   triangle's smoothed scale factor, weighted by the triangle's importance;
//! - `E2` keeps each deformed edge parallel to the original one at its
//!   current length;
//! - `E3` keeps each edge's perpendicular height ratio consistent and, with
//!   weight `tau`, close to the original edge, weighted per region.
//!
//! The solve alternates between a local step (scale factors, smoothing and
//! the nonlinear ratios evaluated at the current iterate) and a global step
//! (one sparse linear least-squares solve per axis with those quantities
//! frozen). Each global step is damped by halving, per vertex, the move of
//! every vertex involved in a violated orientation constraint or a flipped
//! triangle until none remain.

mod energy;
mod linear;

pub use energy::{
    constraint_check, evaluate_energy, flipped_triangles, optimal_scale_factors, perp_foot,
    smooth_scale_factors, Coord, Energies, FrozenEnergy, PerpFoot, Violation,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh, TriangleClasses};
use linear::AxisSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub tau: f64,
    pub eps_t: f64,
    pub eps_p: f64,
    /// Outer loop stops once no vertex moves by this many pixels.
    pub vertex_tol: f64,
    /// Smoothing stops once no factor changes by this much.
    pub factor_tol: f64,
    pub max_outer: usize,
    pub max_smooth: usize,
    /// Original coordinate differences below this many pixels leave that
    /// axis unconstrained.
    pub exempt_tol: f64,
    pub max_halvings: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tau: 0.4,
            eps_t: 0.02,
            eps_p: 0.05,
            vertex_tol: 0.5,
            factor_tol: 0.1,
            max_outer: 100,
            max_smooth: 500,
            exempt_tol: 0.5,
            max_halvings: 20,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tau, self.eps_t, self.eps_p, self.vertex_tol, self.factor_tol];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || self.max_outer == 0
            || self.max_smooth == 0
            || !(self.exempt_tol >= 0.0)
        {
            return Err(Error::param("solver", "tolerances, weights and caps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// `max_outer` iterations ran without meeting `vertex_tol`.
    MaxIterations,
    /// No damped step satisfied the constraints.
    DampingFailed,
    /// The scaled starting mesh already violates a constraint.
    InfeasibleStart,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub energies: Energies,
    pub max_displacement: f64,
    pub halvings: usize,
    pub smooth_sweeps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformState {
    pub c_prime: Vec<Point>,
    pub theta: Vec<f64>,
    pub theta_u: Vec<f64>,
    pub energies: Energies,
    pub trace: Vec<TraceRow>,
    pub status: SolveStatus,
    /// Outer iterations performed.
    pub iterations: usize,
}

impl DeformState {
    /// One line per iteration: index, E1, E2, E3, E_o, max displacement.
    pub fn trace_text(&self) -> String {
        let mut s = String::from("# iter E1 E2 E3 Eo max_disp halvings sweeps\n");
        for r in &self.trace {
            let e = r.energies;
            let _ = writeln!(
                s,
                "{} {:.9e} {:.9e} {:.9e} {:.9e} {:.6} {} {}",
                r.iteration, e.e1, e.e2, e.e3, e.total, r.max_displacement, r.halvings, r.smooth_sweeps
            );
        }
        let _ = writeln!(s, "# status {:?}", self.status);
        s
    }
}

/// Axis-wise scaling of the original mesh onto the target rectangle, with
/// border coordinates placed exactly.
pub fn initial_guess(mesh: &TriMesh, target_w: f64, target_h: f64) -> Vec<Point> {
    let (sx, sy) = (target_w / mesh.width, target_h / mesh.height);
    mesh.vertices
        .iter()
        .zip(&mesh.tags)
        .map(|(p, tag)| {
            let (px, py) = tag.pinned(target_w, target_h);
            [px.unwrap_or(p[0] * sx), py.unwrap_or(p[1] * sy)]
        })
        .collect()
}

/// Local step (scale factors, smoothing, frozen ratios) followed by the
/// global linear solve, without damping.
struct Stepper<'a> {
    mesh: &'a TriMesh,
    classes: &'a TriangleClasses,
    params: &'a SolverParams,
    neighbors: Vec<Vec<usize>>,
    systems: [AxisSystem; 2],
}

impl<'a> Stepper<'a> {
    fn new(
        mesh: &'a TriMesh,
        classes: &'a TriangleClasses,
        tw: f64,
        th: f64,
        params: &'a SolverParams,
        current: &[Point],
        theta_u: &[f64],
    ) -> Result<Self> {
        let pinned = |axis: usize| -> Vec<Option<f64>> {
            mesh.tags
                .iter()
                .map(|tag| {
                    let p = tag.pinned(tw, th);
                    if axis == 0 { p.0 } else { p.1 }
                })
                .collect()
        };
        // the system matrix depends only on the weights, not on the iterate
        let template = FrozenEnergy::new(mesh, current, theta_u, classes, params.tau);
        let systems = [
            AxisSystem::new(0, &pinned(0), &template)?,
            AxisSystem::new(1, &pinned(1), &template)?,
        ];
        Ok(Self { mesh, classes, params, neighbors: mesh.triangle_neighbors(), systems })
    }

    fn propose(&self, current: &[Point]) -> (Vec<f64>, Vec<f64>, usize, Vec<Point>) {
        let p = self.params;
        let theta = optimal_scale_factors(self.mesh, current);
        let (theta_u, sweeps) =
            smooth_scale_factors(&theta, self.classes, &self.neighbors, p.factor_tol, p.max_smooth);
        let frozen = FrozenEnergy::new(self.mesh, current, &theta_u, self.classes, p.tau);
        let mut proposal = current.to_vec();
        for system in &self.systems {
            system.solve(&frozen, &mut proposal);
        }
        (theta, theta_u, sweeps, proposal)
    }
}

/// Moves each vertex toward `proposal` by its own factor, starting at 1 and
/// halved for every vertex touching a violated constraint or a flipped
/// triangle. After `max_halvings` rounds, vertices still involved are held at
/// `current`, which ends feasible since `current` is. Returns the candidate
/// and the number of rounds.
fn damp_step(
    mesh: &TriMesh,
    current: &[Point],
    proposal: &[Point],
    params: &SolverParams,
) -> Option<(Vec<Point>, usize)> {
    let mut factor = vec![1.0f64; current.len()];
    for round in 0..=params.max_halvings + current.len() {
        let candidate: Vec<Point> = current
            .iter()
            .zip(proposal)
            .zip(&factor)
            .map(|((a, b), &s)| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
            .collect();
        let violations = constraint_check(mesh, &candidate, params.eps_t, params.eps_p, params.exempt_tol);
        let flipped = flipped_triangles(mesh, &candidate);
        if violations.is_empty() && flipped.is_empty() {
            return Some((candidate, round));
        }
        let mut hit = vec![false; current.len()];
        for v in &violations {
            match *v {
                Violation::Edge { i, j, .. } => {
                    hit[i] = true;
                    hit[j] = true;
                }
                Violation::Foot { triangle, .. } => {
                    for k in mesh.triangles[triangle] {
                        hit[k] = true;
                    }
                }
            }
        }
        for t in flipped {
            for k in mesh.triangles[t] {
                hit[k] = true;
            }
        }
        let scale = if round < params.max_halvings { 0.5 } else { 0.0 };
        let mut moved = false;
        for (f, h) in factor.iter_mut().zip(hit) {
            if h && *f > 0.0 {
                *f *= scale;
                moved = true;
            }
        }
        if !moved {
            return None;
        }
    }
    None
}

/// The undamped global-step target from `current`.
pub fn undamped_step(
    mesh: &TriMesh,
    classes: &TriangleClasses,
    current: &[Point],
    target_w: usize,
    target_h: usize,
    params: &SolverParams,
) -> Result<Vec<Point>> {
    let theta_u = vec![1.0; mesh.triangle_count()];
    let stepper = Stepper::new(mesh, classes, target_w as f64, target_h as f64, params, current, &theta_u)?;
    Ok(stepper.propose(current).3)
}

pub fn solve_retarget_mesh(
    mesh: &TriMesh,
    classes: &TriangleClasses,
    target_w: usize,
    target_h: usize,
    params: &SolverParams,
) -> Result<DeformState> {
    solve_retarget_mesh_observed(mesh, classes, target_w, target_h, params, |_, _| {})
}

/// As [`solve_retarget_mesh`], calling `on_accept(iteration, c')` for the
/// starting mesh (iteration 0) and every accepted iterate.
pub fn solve_retarget_mesh_observed(
    mesh: &TriMesh,
    classes: &TriangleClasses,
    target_w: usize,
    target_h: usize,
    params: &SolverParams,
    mut on_accept: impl FnMut(usize, &[Point]),
) -> Result<DeformState> {
    params.validate()?;
    if target_w < 2 || target_h < 2 {
        return Err(Error::param("solver", "target dimensions must be at least 2"));
    }
    if classes.region_of.len() != mesh.triangle_count() {
        return Err(Error::DimensionMismatch {
            module: "solver",
            expected: (mesh.triangle_count(), 1),
            got: (classes.region_of.len(), 1),
        });
    }
    let (tw, th) = (target_w as f64, target_h as f64);
    let neighbors = mesh.triangle_neighbors();
    let feasible = |c: &[Point]| {
        constraint_check(mesh, c, params.eps_t, params.eps_p, params.exempt_tol).is_empty()
            && flipped_triangles(mesh, c).is_empty()
    };

    let mut current = initial_guess(mesh, tw, th);
    on_accept(0, &current);
    let mut theta = optimal_scale_factors(mesh, &current);
    let (mut theta_u, _) =
        smooth_scale_factors(&theta, classes, &neighbors, params.factor_tol, params.max_smooth);
    let mut energies = evaluate_energy(mesh, &current, &theta_u, classes, params.tau)?;
    let mut state = DeformState {
        c_prime: current.clone(),
        theta: theta.clone(),
        theta_u: theta_u.clone(),
        energies,
        trace: Vec::new(),
        status: SolveStatus::InfeasibleStart,
        iterations: 0,
    };
    if !feasible(&current) {
        log::warn!("solver: scaled starting mesh violates the orientation constraints");
        return Ok(state);
    }

    let stepper = Stepper::new(mesh, classes, tw, th, params, &current, &theta_u)?;
    let mut best = (energies.total, current.clone(), theta.clone(), theta_u.clone(), energies);
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut trace = Vec::new();
    for iteration in 1..=params.max_outer {
        iterations = iteration;
        let (t, tu, sweeps, proposal) = stepper.propose(&current);
        (theta, theta_u) = (t, tu);

        let accepted = damp_step(mesh, &current, &proposal, params);
        let Some((next, halvings)) = accepted else {
            log::warn!("solver: no feasible step at iteration {iteration}");
            status = SolveStatus::DampingFailed;
            break;
        };
        on_accept(iteration, &next);
        let max_displacement = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        current = next;
        energies = evaluate_energy(mesh, &current, &theta_u, classes, params.tau)?;
        trace.push(TraceRow { iteration, energies, max_displacement, halvings, smooth_sweeps: sweeps });
        log::debug!(
            "solver: iter {iteration} Eo {:.6e} disp {max_displacement:.4} halvings {halvings}",
            energies.total
        );
        if energies.total <= best.0 {
            best = (energies.total, current.clone(), theta.clone(), theta_u.clone(), energies);
        }
        if max_displacement < params.vertex_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    if status.is_converged() {
        state.c_prime = current;
        state.theta = theta;
        state.theta_u = theta_u;
        state.energies = energies;
    } else {
        log::warn!("solver: stopped without converging ({status:?}), returning best iterate");
        (_, state.c_prime, state.theta, state.theta_u, state.energies) = best;
    }
    state.trace = trace;
    state.status = status;
    state.iterations = iterations;
    Ok(state)
}
