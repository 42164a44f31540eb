//! Backward Euler solver for `∂u/∂t − div a(x/ε, t/ε^μ, Du) = f` and for the
//! homogenized `u' − div b(Du) = f` on `(0, 1)^N × (0, T)` with `u = 0` on the
//! boundary. Each step solves the monotone system with coefficients frozen at
//! `t_{k+1}`; lumped mass and lumped load.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cell::{time_modulus_gate, Regime, SolverOptions};
use crate::error::{Error, Result};
use crate::fields::{DiscreteField, SpaceTimeGrid};
use crate::flux::{check_structure, Flux, FluxModel, Fourier};
use crate::math;
use crate::mesh::Mesh;
use crate::nonlinear::{self, NonlinearOptions, System};
use crate::vector::{Matrix, Vector};

/// Data of the initial-boundary value problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim: usize,
    pub t_end: f64,
    pub source: Fourier,
    pub initial: Fourier,
}

/// Boundary samples per face used to check that `u₀` vanishes there.
const BOUNDARY_SAMPLES: usize = 64;

impl ProblemSpec {
    pub fn new(dim: usize, t_end: f64, source: Fourier, initial: Fourier) -> Result<Self> {
        let s = ProblemSpec { dim, t_end, source, initial };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.t_end)));
        }
        if !self.source.is_finite() || !self.initial.is_finite() {
            return Err(Error::invalid("source and initial data must be finite"));
        }
        let (lo, hi) = self.initial.bounds();
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        for face in 0..2 * self.dim {
            let axis = face / 2;
            let side = (face % 2) as f64;
            for k in 0..=BOUNDARY_SAMPLES {
                let s = k as f64 / BOUNDARY_SAMPLES as f64;
                let mut x = [s, s];
                x[axis] = side;
                let v = self.initial.eval(&x[..self.dim], 0.0);
                if v.abs() > tol {
                    return Err(Error::invalid(format!(
                        "initial data must vanish on the boundary, u0({:?}) = {v:e}",
                        &x[..self.dim]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `a(x/ε, t/ε^μ, ξ)`.
#[derive(Clone, Debug)]
pub struct ScaledFlux<'a> {
    model: &'a FluxModel,
    inv_eps: f64,
    inv_period: f64,
}

impl<'a> ScaledFlux<'a> {
    pub fn new(model: &'a FluxModel, epsilon: f64, mu: f64) -> Self {
        ScaledFlux { model, inv_eps: 1.0 / epsilon, inv_period: 1.0 / math::powf(epsilon, mu) }
    }
}

impl Flux for ScaledFlux<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn exponent(&self) -> f64 {
        self.model.exponent()
    }

    fn flux(&self, x: &Vector, t: f64, xi: &Vector) -> Result<Vector> {
        self.model.flux(&x.scale(self.inv_eps), t * self.inv_period, xi)
    }

    fn jacobian(&self, x: &Vector, t: f64, xi: &Vector) -> Result<Matrix> {
        self.model.jacobian(&x.scale(self.inv_eps), t * self.inv_period, xi)
    }

    fn is_time_independent(&self) -> bool {
        self.model.is_time_independent()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    /// `Δt ∫ (a(Du), Du)` over the step.
    pub dissipation: f64,
    /// `½‖u_{k+1}‖² − ½‖u_k‖²`.
    pub l2_half_delta: f64,
    /// `Δt ⟨f, u_{k+1}⟩`.
    pub source_pairing: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicOptions {
    pub nonlinear: NonlinearOptions,
    /// Samples for the structure check run before fine solves (0 skips it).
    pub structure_samples: usize,
    pub seed: u64,
}

impl ParabolicOptions {
    pub fn for_exponent(p: f64) -> Self {
        let cell = SolverOptions::for_exponent(p);
        ParabolicOptions { nonlinear: cell.nonlinear(), structure_samples: 256, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub grid: SpaceTimeGrid,
    pub exponent: f64,
    /// Nodal values at `t_0, …, t_{n_t}`.
    pub trajectory: Vec<Vec<f64>>,
    /// End-of-step gradients per interval.
    pub gradient: DiscreteField,
    pub energy_ledger: Vec<EnergyRow>,
    pub step_residuals: Vec<f64>,
    pub nonlinear_iterations: usize,
}

impl SolveResult {
    pub fn mesh(&self) -> Mesh {
        self.grid.mesh()
    }

    pub fn final_state(&self) -> &[f64] {
        self.trajectory.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        let mesh = self.mesh();
        self.trajectory.iter().map(|u| mesh.l2_norm(u)).collect()
    }

    /// `max_{k, i} |u_k(x_i) − exact(x_i, t_k)|`.
    pub fn max_node_error(&self, exact: impl Fn(&Vector, f64) -> f64) -> f64 {
        let mesh = self.mesh();
        let mut err = 0.0f64;
        for (k, u) in self.trajectory.iter().enumerate() {
            let t = self.grid.time(k);
            for (i, ui) in u.iter().enumerate() {
                err = err.max((ui - exact(&mesh.node_position(i), t)).abs());
            }
        }
        err
    }

    /// Resamples the trajectory on a coarser nested grid: nodal injection in
    /// space, linear interpolation in time; gradients are recomputed there.
    pub fn restrict(&self, target: &SpaceTimeGrid) -> Result<SolveResult> {
        target.validate()?;
        let src = &self.grid;
        if target.dim != src.dim || target.t_end != src.t_end {
            return Err(Error::invalid("restriction needs the same domain and horizon"));
        }
        if !src.n_x.is_multiple_of(target.n_x) {
            return Err(Error::invalid(format!("n_x = {} does not refine n_x = {}", src.n_x, target.n_x)));
        }
        let ratio = src.n_x / target.n_x;
        let fine = src.mesh();
        let coarse = target.mesh();
        let inject = |u: &[f64]| -> Vec<f64> {
            (0..coarse.n_nodes())
                .map(|c| {
                    let [i, j] = coarse.node_index(c);
                    let per_axis = fine.nodes_per_axis();
                    u[i * ratio + j * ratio * per_axis]
                })
                .collect()
        };
        let mut trajectory = Vec::with_capacity(target.n_t + 1);
        for k in 0..=target.n_t {
            let s = k as f64 * src.n_t as f64 / target.n_t as f64;
            let lo = (math::floor(s) as usize).min(src.n_t);
            let w = s - lo as f64;
            let a = inject(&self.trajectory[lo]);
            if w == 0.0 || lo == src.n_t {
                trajectory.push(a);
            } else {
                let b = inject(&self.trajectory[lo + 1]);
                trajectory.push(a.iter().zip(&b).map(|(x, y)| (1.0 - w) * x + w * y).collect());
            }
        }
        let gradient = gradient_field(target, &coarse, &trajectory)?;
        Ok(SolveResult {
            grid: *target,
            exponent: self.exponent,
            trajectory,
            gradient,
            energy_ledger: Vec::new(),
            step_residuals: Vec::new(),
            nonlinear_iterations: 0,
        })
    }
}

fn gradient_field(grid: &SpaceTimeGrid, mesh: &Mesh, trajectory: &[Vec<f64>]) -> Result<DiscreteField> {
    let mut values = Vec::with_capacity(grid.n_t * grid.n_qp() * grid.dim);
    for u in &trajectory[1..] {
        for g in mesh.gradients(u) {
            values.extend_from_slice(g.as_slice());
        }
    }
    DiscreteField::new(*grid, values)
}

fn march<F: Flux + ?Sized>(spec: &ProblemSpec, flux: &F, grid: &SpaceTimeGrid, opts: &ParabolicOptions) -> Result<SolveResult> {
    spec.validate()?;
    grid.validate()?;
    if spec.dim != grid.dim || flux.dim() != grid.dim {
        return Err(Error::invalid("dimension mismatch between problem, flux and grid"));
    }
    if spec.t_end != grid.t_end {
        return Err(Error::invalid("problem horizon differs from the grid horizon"));
    }
    let mesh = grid.mesh();
    let positions: Vec<Vector> = (0..mesh.n_qp()).map(|g| mesh.qp_position_global(g)).collect();
    let nodes: Vec<Vector> = (0..mesh.n_nodes()).map(|i| mesh.node_position(i)).collect();
    let boundary = mesh.boundary_nodes();
    let dt = grid.dt();
    let w = mesh.qp_weight();
    let lumped = mesh.lumped_mass();

    let mut u: Vec<f64> = nodes.iter().map(|x| spec.initial.eval(x.as_slice(), 0.0)).collect();
    for &b in &boundary {
        u[b] = 0.0;
    }
    let mut trajectory = Vec::with_capacity(grid.n_t + 1);
    trajectory.push(u.clone());
    let mut ledger = Vec::with_capacity(grid.n_t);
    let mut residuals = Vec::with_capacity(grid.n_t);
    let mut iterations = 0;
    let mut values = Vec::with_capacity(grid.n_t * grid.n_qp() * grid.dim);
    let time_independent_source = spec.source.is_time_independent();
    let mut f_nodes: Vec<f64> = Vec::new();

    for k in 1..=grid.n_t {
        let t = grid.time(k);
        if f_nodes.is_empty() || !time_independent_source {
            f_nodes = nodes.iter().map(|x| spec.source.eval(x.as_slice(), t)).collect();
            for &b in &boundary {
                f_nodes[b] = 0.0;
            }
        }
        let load: Vec<f64> = f_nodes.iter().map(|f| f * lumped).collect();
        let sys = System {
            mesh: &mesh,
            positions: &positions,
            flux,
            time: t,
            offset: Vector::zeros(grid.dim),
            mass_coeff: 1.0 / dt,
            reference: &u,
            load: &load,
        };
        let mut next = u.clone();
        let stats =
            nonlinear::solve(&sys, &mut next, &opts.nonlinear).map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        let grads = mesh.gradients(&next);
        let fluxes = sys.fluxes(&grads).map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        let dissipation = dt * w * fluxes.iter().zip(&grads).map(|(a, g)| a.dot(g)).sum::<f64>();
        let l2_half_delta = 0.5 * (mesh.mass_dot(&next, &next) - mesh.mass_dot(&u, &u));
        let source_pairing = dt * mesh.mass_dot(&f_nodes, &next);
        ledger.push(EnergyRow { step: k, t, dissipation, l2_half_delta, source_pairing, residual: stats.residual });
        residuals.push(stats.residual);
        iterations += stats.iterations;
        for g in &grads {
            values.extend_from_slice(g.as_slice());
        }
        u = next;
        trajectory.push(u.clone());
    }
    Ok(SolveResult {
        grid: *grid,
        exponent: flux.exponent(),
        trajectory,
        gradient: DiscreteField::new(*grid, values)?,
        energy_ledger: ledger,
        step_residuals: residuals,
        nonlinear_iterations: iterations,
    })
}

/// Fine-scale solve with the oscillating flux `a(x/ε, t/ε^μ, ·)`.
pub fn solve_fine(spec: &ProblemSpec, model: &FluxModel, grid: &SpaceTimeGrid, opts: &ParabolicOptions) -> Result<SolveResult> {
    grid.validate()?;
    if opts.structure_samples > 0 {
        let report = check_structure(model, opts.structure_samples, opts.seed);
        if !report.passed {
            return Err(Error::config(format!(
                "model fails the structure conditions (monotonicity margin {:e}, continuity margin {:e})",
                report.monotonicity_margin, report.continuity_margin
            )));
        }
    }
    if Regime::from_mu(grid.mu)? == Regime::EllipticParametric {
        let mut cell = SolverOptions::for_exponent(model.constants().p);
        cell.seed = opts.seed;
        time_modulus_gate(model, &cell)?;
    }
    let flux = ScaledFlux::new(model, grid.epsilon, grid.mu);
    march(spec, &flux, grid, opts)
}

/// Homogenized solve with an effective flux such as a `FluxTable`.
pub fn solve_homogenized<F: Flux + ?Sized>(
    spec: &ProblemSpec,
    b: &F,
    grid: &SpaceTimeGrid,
    opts: &ParabolicOptions,
) -> Result<SolveResult> {
    march(spec, b, grid, opts)
}

/// `|Σ (a(Du), Du) Δt + ½‖u(T)‖² − ½‖u(0)‖² − Σ ⟨f, u⟩ Δt|`.
pub fn energy_balance(result: &SolveResult) -> f64 {
    if result.trajectory.is_empty() {
        return 0.0;
    }
    let mesh = result.mesh();
    let first = &result.trajectory[0];
    let last = result.final_state();
    let dissipation: f64 = result.energy_ledger.iter().map(|r| r.dissipation).sum();
    let source: f64 = result.energy_ledger.iter().map(|r| r.source_pairing).sum();
    (dissipation + 0.5 * mesh.mass_dot(last, last) - 0.5 * mesh.mass_dot(first, first) - source).abs()
}
