//! The three regime-dependent periodic cell problems and the effective flux
//!
//! ```text
//! b(ξ) = ∫_{T₀} ∫_Y a(y, τ, ξ + Dv(y, τ)) dy dτ
//! ```
//!
//! * `0 < μ < 2`: `v(·, τ)` solves the elliptic problem with `τ` frozen, at every
//!   midpoint `τ_k = (k + ½)/n_time` of the period;
//! * `μ = 2`: `v` is the time-periodic solution of `v' − div a(y, τ, ξ + Dv) = 0`,
//!   found by marching whole periods with the implicit midpoint rule until
//!   `‖v(·, 0) − v(·, 1)‖_{L²}` drops below `period_tol`;
//! * `μ > 2`: `v(y)` solves the elliptic problem for the time-averaged flux `ã`.
//!
//! All regimes store `Dv` as `n_slices` time slices at the period midpoints
//! (a single slice for `μ > 2`), so `b` is always the slice average of the
//! cell integral of `a(·, τ_s, ξ + Dv_s)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{check_time_modulus, Flux, FluxModel};
use crate::linalg::CgOptions;
use crate::math;
use crate::mesh::Mesh;
use crate::nonlinear::{self, NonlinearOptions, System};
use crate::vector::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGrid {
    pub dim: usize,
    /// Nodes per spatial axis of the periodic cell.
    pub n_space: usize,
    /// Time steps per unit period.
    pub n_time: usize,
}

impl CellGrid {
    pub fn new(dim: usize, n_space: usize, n_time: usize) -> Result<Self> {
        let g = CellGrid { dim, n_space, n_time };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::invalid(format!("cell dimension must be 1 or 2, got {}", self.dim)));
        }
        if self.n_space < 4 || !self.n_space.is_power_of_two() {
            return Err(Error::invalid(format!("n_space must be a power of two >= 4, got {}", self.n_space)));
        }
        if self.n_time < 2 {
            return Err(Error::invalid(format!("n_time must be >= 2, got {}", self.n_time)));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Mesh {
        Mesh::periodic(self.dim, self.n_space)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Absolute tolerance on the residual dual norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Periodicity gap tolerance for `μ = 2`.
    pub period_tol: f64,
    pub max_periods: usize,
    /// Anderson depth for the period map (0 disables acceleration).
    pub anderson_depth: usize,
    pub identity_tol: f64,
    pub linear_tol: f64,
    /// Samples used by the time-modulus gate of the `0 < μ < 2` regime.
    pub modulus_samples: usize,
    pub seed: u64,
}

impl SolverOptions {
    /// Defaults: residual `1e-10` for `p = 2`, `1e-8` otherwise.
    pub fn for_exponent(p: f64) -> Self {
        SolverOptions {
            tol: if p == 2.0 { 1e-10 } else { 1e-8 },
            max_iter: 200,
            period_tol: 1e-8,
            max_periods: 400,
            anderson_depth: 5,
            identity_tol: 1e-6,
            linear_tol: 1e-13,
            modulus_samples: 512,
            seed: 0,
        }
    }

    pub(crate) fn nonlinear(&self) -> NonlinearOptions {
        NonlinearOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            max_backtracks: 40,
            linear: CgOptions { rel_tol: self.linear_tol, max_iter: 50_000 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `0 < μ < 2`
    EllipticParametric,
    /// `μ = 2`
    ParabolicPeriodic,
    /// `μ > 2`
    TimeAveraged,
}

impl Regime {
    pub fn from_mu(mu: f64) -> Result<Regime> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        Ok(if mu < 2.0 {
            Regime::EllipticParametric
        } else if mu == 2.0 {
            Regime::ParabolicPeriodic
        } else {
            Regime::TimeAveraged
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::EllipticParametric => "elliptic-parametric",
            Regime::ParabolicPeriodic => "parabolic-periodic",
            Regime::TimeAveraged => "time-averaged",
        }
    }
}

/// Periodic corrector `v` for one frozen gradient `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSolution {
    pub xi: Vector,
    pub regime: Regime,
    pub grid: CellGrid,
    /// `τ` of each slice (period midpoints; `[0]` for a single slice).
    pub slice_times: Vec<f64>,
    /// Nodal values of `v` per slice, mean zero.
    pub v: Vec<Vec<f64>>,
    /// `Dv` at the quadrature points per slice.
    pub grad_v: Vec<Vec<Vector>>,
    pub b: Vector,
    pub residual_norm: f64,
    pub periodicity_gap: Option<f64>,
    pub gap_history: Vec<f64>,
    /// Accepted nonlinear iterations over all solves.
    pub iterations: usize,
    /// Residual dual norms of the first nonlinear solve.
    pub residual_history: Vec<f64>,
}

impl CellSolution {
    pub fn n_slices(&self) -> usize {
        self.v.len()
    }

    /// Slice whose period interval contains `τ` (wrapped into `[0, 1)`).
    pub fn slice_index(&self, tau: f64) -> usize {
        let s = self.n_slices();
        ((math::wrap_unit(tau) * s as f64) as usize).min(s - 1)
    }

    /// `Dv(y, τ)`: exact element gradient in `y`, nearest slice in `τ`.
    pub fn grad_at(&self, mesh: &Mesh, y: &Vector, tau: f64) -> Vector {
        mesh.gradient_at_point(&self.v[self.slice_index(tau)], y)
    }

    /// Largest slice mean of `v`.
    pub fn mean_v(&self) -> f64 {
        self.v.iter().map(|s| (s.iter().sum::<f64>() / s.len() as f64).abs()).fold(0.0, f64::max)
    }

    /// Space-time cell average of `p = ξ + Dv`.
    pub fn mean_p(&self) -> Vector {
        let mut acc = Vector::zeros(self.xi.dim());
        let mut count = 0usize;
        for slice in &self.grad_v {
            for g in slice {
                acc = acc + *g;
                count += 1;
            }
        }
        self.xi + acc.scale(1.0 / count as f64)
    }
}

/// Cell-level flux averaged over the midpoints of the unit period.
#[derive(Clone, Debug)]
pub struct TimeAveragedFlux<F> {
    inner: F,
    n_time: usize,
}

impl<F: Flux> TimeAveragedFlux<F> {
    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: Flux> Flux for TimeAveragedFlux<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn exponent(&self) -> f64 {
        self.inner.exponent()
    }

    fn flux(&self, y: &Vector, _t: f64, xi: &Vector) -> Result<Vector> {
        if self.inner.is_time_independent() {
            return self.inner.flux(y, 0.0, xi);
        }
        let n = self.n_time;
        let mut acc = Vector::zeros(xi.dim());
        for k in 0..n {
            acc = acc + self.inner.flux(y, (k as f64 + 0.5) / n as f64, xi)?;
        }
        Ok(acc.scale(1.0 / n as f64))
    }

    fn jacobian(&self, y: &Vector, _t: f64, xi: &Vector) -> Result<Matrix> {
        if self.inner.is_time_independent() {
            return self.inner.jacobian(y, 0.0, xi);
        }
        let n = self.n_time;
        let dim = xi.dim();
        let mut acc = Matrix::zeros(dim);
        for k in 0..n {
            let j = self.inner.jacobian(y, (k as f64 + 0.5) / n as f64, xi)?;
            for r in 0..dim {
                for c in 0..dim {
                    acc.set(r, c, acc.get(r, c) + j.get(r, c));
                }
            }
        }
        Ok(acc.scale(1.0 / n as f64))
    }

    fn is_time_independent(&self) -> bool {
        true
    }
}

/// `ã(y, ξ) = (1/n_time) Σ_k a(y, τ_k, ξ)` over the period midpoints.
pub fn time_average_flux<F: Flux>(model: F, grid: &CellGrid) -> TimeAveragedFlux<F> {
    TimeAveragedFlux { inner: model, n_time: grid.n_time }
}

struct Slice {
    v: Vec<f64>,
    grads: Vec<Vector>,
    flux_mean: Vector,
    residual: f64,
    iterations: usize,
    history: Vec<f64>,
}

struct CellContext<'a, F: ?Sized> {
    flux: &'a F,
    mesh: Mesh,
    positions: Vec<Vector>,
    xi: Vector,
    nl: NonlinearOptions,
}

impl<'a, F: Flux + ?Sized> CellContext<'a, F> {
    fn new(flux: &'a F, xi: &Vector, grid: &CellGrid, opts: &SolverOptions) -> Result<Self> {
        grid.validate()?;
        if flux.dim() != grid.dim || xi.dim() != grid.dim {
            return Err(Error::invalid("dimension mismatch between model, xi and cell grid"));
        }
        if !xi.is_finite() {
            return Err(Error::invalid("non-finite xi"));
        }
        let mesh = grid.mesh();
        let positions = (0..mesh.n_qp()).map(|g| mesh.qp_position_global(g)).collect();
        Ok(CellContext { flux, mesh, positions, xi: *xi, nl: opts.nonlinear() })
    }

    /// Cell average of `a(·, τ, ξ + Dv)`.
    fn flux_mean(&self, tau: f64, grads: &[Vector]) -> Result<Vector> {
        let w = self.mesh.qp_weight();
        let mut acc = Vector::zeros(self.xi.dim());
        for (g, x) in grads.iter().zip(&self.positions) {
            acc = acc + self.flux.flux(x, tau, &(self.xi + *g))?;
        }
        Ok(acc.scale(w))
    }

    fn step(&self, tau: f64, mass_coeff: f64, reference: &[f64], guess: Vec<f64>) -> Result<Slice> {
        let sys = System {
            mesh: &self.mesh,
            positions: &self.positions,
            flux: self.flux,
            time: tau,
            offset: self.xi,
            mass_coeff,
            reference,
            load: &[],
        };
        let mut v = guess;
        let stats = nonlinear::solve(&sys, &mut v, &self.nl)?;
        let mean = self.mesh.mean(&v);
        v.iter_mut().for_each(|x| *x -= mean);
        let grads = self.mesh.gradients(&v);
        let flux_mean = self.flux_mean(tau, &grads)?;
        Ok(Slice { v, grads, flux_mean, residual: stats.residual, iterations: stats.iterations, history: stats.history })
    }

    fn elliptic(&self, tau: f64, guess: Option<Vec<f64>>) -> Result<Slice> {
        let guess = guess.unwrap_or_else(|| vec![0.0; self.mesh.n_nodes()]);
        self.step(tau, 0.0, &[], guess)
    }
}

fn single_slice(regime: Regime, grid: &CellGrid, xi: Vector, s: Slice) -> CellSolution {
    CellSolution {
        xi,
        regime,
        grid: *grid,
        slice_times: vec![0.0],
        b: s.flux_mean,
        residual_norm: s.residual,
        periodicity_gap: None,
        gap_history: Vec::new(),
        iterations: s.iterations,
        residual_history: s.history,
        v: vec![s.v],
        grad_v: vec![s.grads],
    }
}

/// Solves `−div a(y, τ, ξ + Dv) = 0` for periodic, mean-zero `v` at frozen `τ`.
pub fn solve_cell_elliptic<F: Flux + ?Sized>(
    model: &F,
    tau: f64,
    xi: &Vector,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<CellSolution> {
    let ctx = CellContext::new(model, xi, grid, opts)?;
    let s = ctx.elliptic(tau, None)?;
    let mut sol = single_slice(Regime::EllipticParametric, grid, *xi, s);
    sol.slice_times = vec![tau];
    Ok(sol)
}

/// Elliptic solves at every period midpoint; the `0 < μ < 2` corrector family.
pub fn solve_cell_parametric<F: Flux + ?Sized>(
    model: &F,
    xi: &Vector,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<CellSolution> {
    let ctx = CellContext::new(model, xi, grid, opts)?;
    let n = grid.n_time;
    let mut slices: Vec<Slice> = Vec::with_capacity(n);
    let stationary = model.is_time_independent();
    for k in 0..n {
        let tau = (k as f64 + 0.5) / n as f64;
        if stationary && k > 0 {
            let s = &slices[0];
            let copy = Slice {
                v: s.v.clone(),
                grads: s.grads.clone(),
                flux_mean: s.flux_mean,
                residual: s.residual,
                iterations: 0,
                history: Vec::new(),
            };
            slices.push(copy);
            continue;
        }
        let guess = slices.last().map(|s| s.v.clone());
        slices.push(ctx.elliptic(tau, guess)?);
    }
    Ok(assemble_slices(Regime::EllipticParametric, grid, *xi, slices, None, Vec::new()))
}

fn assemble_slices(
    regime: Regime,
    grid: &CellGrid,
    xi: Vector,
    slices: Vec<Slice>,
    gap: Option<f64>,
    gap_history: Vec<f64>,
) -> CellSolution {
    let n = slices.len();
    let mut b = Vector::zeros(xi.dim());
    let mut residual = 0.0f64;
    let mut iterations = 0;
    let residual_history = slices.first().map(|s| s.history.clone()).unwrap_or_default();
    let mut v = Vec::with_capacity(n);
    let mut grad_v = Vec::with_capacity(n);
    for s in slices {
        b = b + s.flux_mean;
        residual = residual.max(s.residual);
        iterations += s.iterations;
        v.push(s.v);
        grad_v.push(s.grads);
    }
    CellSolution {
        xi,
        regime,
        grid: *grid,
        slice_times: (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect(),
        v,
        grad_v,
        b: b.scale(1.0 / n as f64),
        residual_norm: residual,
        periodicity_gap: gap,
        gap_history,
        iterations,
        residual_history,
    }
}

/// Anderson mixing for the period map with history of iterates and residuals.
struct Anderson {
    depth: usize,
    xs: Vec<Vec<f64>>,
    fs: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson { depth, xs: Vec::new(), fs: Vec::new() }
    }

    fn clear(&mut self) {
        self.xs.clear();
        self.fs.clear();
    }

    /// Records `(x, f = Φ(x) − x)` and proposes the next iterate.
    fn next(&mut self, x: &[f64], f: &[f64]) -> Option<Vec<f64>> {
        self.xs.push(x.to_vec());
        self.fs.push(f.to_vec());
        if self.xs.len() > self.depth + 1 {
            self.xs.remove(0);
            self.fs.remove(0);
        }
        let m = self.xs.len() - 1;
        if m == 0 || self.depth == 0 {
            return None;
        }
        let n = x.len();
        let df: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| self.fs[j + 1][i] - self.fs[j][i]).collect()).collect();
        let dx: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| self.xs[j + 1][i] - self.xs[j][i]).collect()).collect();
        // normal equations of min ‖f − ΔF γ‖ with a relative ridge
        let mut gram = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for a in 0..m {
            for c in 0..m {
                gram[a][c] = crate::linalg::dot(&df[a], &df[c]);
            }
            rhs[a] = crate::linalg::dot(&df[a], f);
        }
        let scale = (0..m).map(|a| gram[a][a]).fold(0.0, f64::max);
        if scale == 0.0 {
            return None;
        }
        for a in 0..m {
            gram[a][a] += 1e-10 * scale;
        }
        let gamma = solve_dense(gram, rhs)?;
        let mut out: Vec<f64> = (0..n).map(|i| x[i] + f[i]).collect();
        for j in 0..m {
            for i in 0..n {
                out[i] -= gamma[j] * (dx[j][i] + df[j][i]);
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k] == 0.0 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Marches one period from `v0` with the implicit midpoint rule.
fn sweep<F: Flux + ?Sized>(ctx: &CellContext<'_, F>, v0: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Slice>)> {
    let dt = 1.0 / n as f64;
    let mut v = v0.to_vec();
    let mut slices = Vec::with_capacity(n);
    for k in 0..n {
        let tau = (k as f64 + 0.5) * dt;
        let mid = ctx.step(tau, 2.0 / dt, &v, v.clone())?;
        let mut next: Vec<f64> = mid.v.iter().zip(&v).map(|(w, old)| 2.0 * w - old).collect();
        let mean = ctx.mesh.mean(&next);
        next.iter_mut().for_each(|x| *x -= mean);
        v = next;
        slices.push(mid);
    }
    Ok((v, slices))
}

/// Time-periodic solution of `v' − div a(y, τ, ξ + Dv) = 0`.
pub fn solve_cell_parabolic_periodic<F: Flux + ?Sized>(
    model: &F,
    xi: &Vector,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<CellSolution> {
    let ctx = CellContext::new(model, xi, grid, opts)?;
    let n = grid.n_time;
    let start = ctx.elliptic(0.0, None)?;
    let mut x = start.v;
    let mut history: Vec<f64> = Vec::new();
    let mut anderson = Anderson::new(opts.anderson_depth);
    // last accepted sweep: (start, end, slices, gap)
    let (mut end, mut slices) = sweep(&ctx, &x, n)?;
    let mut sweeps = 1;
    loop {
        let f: Vec<f64> = end.iter().zip(&x).map(|(e, s)| e - s).collect();
        let gap = ctx.mesh.l2_norm(&f);
        history.push(gap);
        if gap < opts.period_tol {
            return Ok(assemble_slices(Regime::ParabolicPeriodic, grid, *xi, slices, Some(gap), history));
        }
        if sweeps >= opts.max_periods {
            return Err(Error::PeriodicGap { sweeps, gap, history });
        }
        let picard = end.clone();
        let mut next = None;
        if let Some(candidate) = anderson.next(&x, &f) {
            let (e, s) = sweep(&ctx, &candidate, n)?;
            sweeps += 1;
            let g: Vec<f64> = e.iter().zip(&candidate).map(|(a, b)| a - b).collect();
            if ctx.mesh.l2_norm(&g) < gap {
                next = Some((candidate, e, s));
            } else {
                anderson.clear();
            }
        }
        let (nx, ne, ns) = match next {
            Some(t) => t,
            None => {
                let (e, s) = sweep(&ctx, &picard, n)?;
                sweeps += 1;
                (picard, e, s)
            }
        };
        x = nx;
        end = ne;
        slices = ns;
    }
}

/// Elliptic cell problem for `ã`; the `μ > 2` corrector.
pub fn solve_cell_time_averaged<F: Flux>(model: &F, xi: &Vector, grid: &CellGrid, opts: &SolverOptions) -> Result<CellSolution> {
    let averaged = time_average_flux(model, grid);
    let ctx = CellContext::new(&averaged, xi, grid, opts)?;
    let s = ctx.elliptic(0.0, None)?;
    Ok(single_slice(Regime::TimeAveraged, grid, *xi, s))
}

/// Refuses the `0 < μ < 2` regime unless the time-modulus condition samples clean.
pub fn time_modulus_gate(model: &FluxModel, opts: &SolverOptions) -> Result<()> {
    let report = check_time_modulus(model, opts.modulus_samples, opts.seed)?;
    if !report.passed {
        return Err(Error::config(format!(
            "time modulus condition violated (worst margin {:e}); the 0 < mu < 2 regime needs it",
            report.worst_margin
        )));
    }
    Ok(())
}

/// Effective flux `b(ξ)` for the regime selected by `μ`, with the cell solution.
pub fn effective_flux(model: &FluxModel, mu: f64, xi: &Vector, grid: &CellGrid, opts: &SolverOptions) -> Result<CellSolution> {
    match Regime::from_mu(mu)? {
        Regime::EllipticParametric => {
            time_modulus_gate(model, opts)?;
            solve_cell_parametric(model, xi, grid, opts)
        }
        Regime::ParabolicPeriodic => solve_cell_parabolic_periodic(model, xi, grid, opts),
        Regime::TimeAveraged => solve_cell_time_averaged(model, xi, grid, opts),
    }
}

/// `|∬ (a(y, τ, p), p) − (b(ξ), ξ)|` with `p = ξ + Dv`.
pub fn energy_identity_check(solution: &CellSolution, model: &FluxModel) -> f64 {
    match solution.regime {
        Regime::TimeAveraged => energy_identity_with(solution, &time_average_flux(model, &solution.grid)),
        _ => energy_identity_with(solution, model),
    }
}

fn energy_identity_with<F: Flux + ?Sized>(solution: &CellSolution, flux: &F) -> f64 {
    let mesh = solution.grid.mesh();
    let w = mesh.qp_weight();
    let n = solution.n_slices() as f64;
    let mut total = 0.0;
    for (tau, grads) in solution.slice_times.iter().zip(&solution.grad_v) {
        let mut s = 0.0;
        for (q, g) in grads.iter().enumerate() {
            let p = solution.xi + *g;
            match flux.flux(&mesh.qp_position_global(q), *tau, &p) {
                Ok(a) => s += a.dot(&p),
                Err(_) => return f64::NAN,
            }
        }
        total += w * s / n;
    }
    (total - solution.b.dot(&solution.xi)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn sqrt3() -> f64 {
        math::sqrt(3.0)
    }

    /// `(∫ (2 + sin 2πy)^{−1/(p−1)} dy)^{−(p−1)}` by a fine midpoint sum.
    fn one_d_plaplace_b(p: f64) -> f64 {
        let n = 1 << 16;
        let s: f64 = (0..n)
            .map(|i| {
                let y = (i as f64 + 0.5) / n as f64;
                math::powf(2.0 + math::sin(2.0 * core::f64::consts::PI * y), -1.0 / (p - 1.0))
            })
            .sum::<f64>()
            / n as f64;
        math::powf(s, -(p - 1.0))
    }

    #[test]
    fn grid_validation() {
        assert!(CellGrid::new(1, 64, 8).is_ok());
        assert!(CellGrid::new(1, 48, 8).is_err());
        assert!(CellGrid::new(1, 2, 8).is_err());
        assert!(CellGrid::new(3, 16, 8).is_err());
        assert!(CellGrid::new(2, 16, 1).is_err());
    }

    #[test]
    fn regime_boundaries() {
        assert_eq!(Regime::from_mu(1.999).unwrap(), Regime::EllipticParametric);
        assert_eq!(Regime::from_mu(2.0).unwrap(), Regime::ParabolicPeriodic);
        assert_eq!(Regime::from_mu(2.001).unwrap(), Regime::TimeAveraged);
        assert!(Regime::from_mu(0.0).is_err());
        assert!(Regime::from_mu(f64::NAN).is_err());
    }

    #[test]
    fn elliptic_harmonic_mean() {
        let grid = CellGrid::new(1, 256, 2).unwrap();
        let s = solve_cell_elliptic(&presets::harmonic_1d(), 0.0, &Vector::scalar(1.0), &grid, &SolverOptions::for_exponent(2.0))
            .unwrap();
        assert!((s.b[0] - sqrt3()).abs() < 1e-4, "{:?}", s.b);
        assert!(s.mean_v() < 1e-12);
    }

    #[test]
    fn separable_model_gives_harmonic_mean_in_every_regime() {
        // the 1D flux is constant in y, so v is stationary and c₂ averages to 1
        let grid = CellGrid::new(1, 128, 8).unwrap();
        let opts = SolverOptions::for_exponent(2.0);
        for mu in [1.0, 2.0, 3.0] {
            let s = effective_flux(&presets::separable_1d(), mu, &Vector::scalar(0.5), &grid, &opts).unwrap();
            assert!((s.b[0] - 0.5 * sqrt3()).abs() < 1e-4, "mu = {mu}: {:?}", s.b);
        }
    }

    #[test]
    fn time_averaged_plaplace_matches_one_d_formula() {
        let grid = CellGrid::new(1, 256, 8).unwrap();
        let s = solve_cell_time_averaged(&presets::plaplace_1d(), &Vector::scalar(1.0), &grid, &SolverOptions::for_exponent(4.0))
            .unwrap();
        let exact = one_d_plaplace_b(4.0);
        assert!((s.b[0] - exact).abs() < 1e-4 * exact, "{} vs {exact}", s.b[0]);
    }

    #[test]
    fn periodic_solve_closes_the_period() {
        let grid = CellGrid::new(1, 32, 8).unwrap();
        let opts = SolverOptions::for_exponent(4.0);
        let s = solve_cell_parabolic_periodic(&presets::plaplace_1d(), &Vector::scalar(1.0), &grid, &opts).unwrap();
        assert!(s.periodicity_gap.unwrap() < opts.period_tol);
        assert_eq!(s.n_slices(), 8);
        assert!(s.mean_v() < 1e-12);
        assert!((s.mean_p() - s.xi).norm() < 1e-6);
        assert!(energy_identity_check(&s, &presets::plaplace_1d()) < 1e-6);
    }

    #[test]
    fn effective_flux_is_odd() {
        let grid = CellGrid::new(2, 8, 4).unwrap();
        let opts = SolverOptions::for_exponent(3.0);
        let xi = Vector::from_slice(&[0.7, -0.2]);
        for mu in [1.0, 2.0, 3.0] {
            let a = effective_flux(&presets::plaplace_2d(), mu, &xi, &grid, &opts).unwrap();
            let b = effective_flux(&presets::plaplace_2d(), mu, &(-xi), &grid, &opts).unwrap();
            assert!((a.b + b.b).norm() < 1e-8, "mu = {mu}");
        }
    }

    #[test]
    fn zero_gradient_gives_zero_flux() {
        let grid = CellGrid::new(1, 16, 4).unwrap();
        let s =
            effective_flux(&presets::plaplace_1d(), 2.0, &Vector::scalar(0.0), &grid, &SolverOptions::for_exponent(4.0)).unwrap();
        assert!(s.b.norm() < 1e-12);
    }

    #[test]
    fn slow_time_needs_a_modulus() {
        let grid = CellGrid::new(1, 16, 4).unwrap();
        let err =
            effective_flux(&presets::checkerboard_1d(), 1.0, &Vector::scalar(1.0), &grid, &SolverOptions::for_exponent(2.0))
                .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn slices_sit_at_period_midpoints() {
        let grid = CellGrid::new(1, 16, 4).unwrap();
        let s = solve_cell_parametric(&presets::plaplace_1d(), &Vector::scalar(1.0), &grid, &SolverOptions::for_exponent(4.0))
            .unwrap();
        assert_eq!(s.slice_times, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(s.slice_index(0.3), 1);
        assert_eq!(s.slice_index(1.1), 0);
        assert_eq!(s.slice_index(-0.1), 3);
    }

    #[test]
    fn time_independent_parametric_solves_once() {
        let grid = CellGrid::new(1, 32, 8).unwrap();
        let s = solve_cell_parametric(&presets::harmonic_1d(), &Vector::scalar(1.0), &grid, &SolverOptions::for_exponent(2.0))
            .unwrap();
        assert!(s.v.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn time_average_removes_time_dependence() {
        let grid = CellGrid::new(1, 16, 16).unwrap();
        let avg = time_average_flux(presets::separable_1d(), &grid);
        let y = Vector::scalar(0.3);
        let xi = Vector::scalar(1.0);
        let a = avg.flux(&y, 0.0, &xi).unwrap();
        let b = avg.flux(&y, 0.6, &xi).unwrap();
        assert_eq!(a, b);
        let c = 2.0 + math::sin(2.0 * core::f64::consts::PI * 0.3);
        assert!((a[0] - c).abs() < 1e-12);
    }
}
