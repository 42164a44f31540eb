//! Space-time fields on the fine grid, the ε-cell averaging operator `M_ε`,
//! the corrector family `p_ε` and the remainder `r_ε = Du_ε − p_ε(·, ·, M_ε Du)`.
//!
//! Samples sit at the spatial quadrature points of every time interval
//! `(t_k, t_{k+1})`, laid out as `[k][qp][component]`. The sample time of
//! interval `k` is its midpoint; for implicit trajectories the stored value is
//! the end-of-step gradient.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cell::{effective_flux, CellGrid, CellSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::flux::{FluxModel, StructureConstants};
use crate::math;
use crate::mesh::Mesh;
use crate::parabolic::SolveResult;
use crate::vector::{Vector, MAX_DIM};

/// Fine grid on `(0, 1)^N × (0, T)` together with its ε-cell partition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeGrid {
    pub dim: usize,
    /// Elements per spatial axis.
    pub n_x: usize,
    pub n_t: usize,
    pub t_end: f64,
    pub epsilon: f64,
    pub mu: f64,
}

impl SpaceTimeGrid {
    pub fn new(dim: usize, n_x: usize, n_t: usize, t_end: f64, epsilon: f64, mu: f64) -> Result<Self> {
        let g = SpaceTimeGrid { dim, n_x, n_t, t_end, epsilon, mu };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if self.n_x < 2 || self.n_t < 1 {
            return Err(Error::invalid("grid needs n_x >= 2 and n_t >= 1"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.t_end)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        let k = math::as_integer(1.0 / self.epsilon, 1e-9)
            .ok_or_else(|| Error::invalid(format!("1/epsilon must be an integer, got {}", 1.0 / self.epsilon)))?;
        if !self.n_x.is_multiple_of(k) {
            return Err(Error::invalid(format!("n_x = {} is not a multiple of 1/epsilon = {k}", self.n_x)));
        }
        Ok(())
    }

    /// Same discretization with another ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        SpaceTimeGrid::new(self.dim, self.n_x, self.n_t, self.t_end, epsilon, self.mu)
    }

    /// True when both grids carry the same samples.
    pub fn same_samples(&self, other: &SpaceTimeGrid) -> bool {
        self.dim == other.dim && self.n_x == other.n_x && self.n_t == other.n_t && self.t_end == other.t_end
    }

    pub fn mesh(&self) -> Mesh {
        Mesh::dirichlet(self.dim, self.n_x)
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_t as f64
    }

    /// `t_k = k T / n_t`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.t_end / self.n_t as f64
    }

    /// Midpoint of interval `k`.
    pub fn sample_time(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.t_end / self.n_t as f64
    }

    /// ε-cells per spatial axis.
    pub fn cells_per_axis(&self) -> usize {
        math::round(1.0 / self.epsilon) as usize
    }

    pub fn elements_per_cell(&self) -> usize {
        self.n_x / self.cells_per_axis()
    }

    pub fn n_spatial_cells(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    /// Time steps per temporal cell: `ε^μ n_t / T` rounded, at least one.
    pub fn steps_per_cell(&self) -> usize {
        let s = math::powf(self.epsilon, self.mu) * self.n_t as f64 / self.t_end;
        (math::round(s) as usize).max(1)
    }

    /// Temporal cells lying inside `(0, T)`; the remaining steps form the boundary sliver.
    pub fn n_time_cells(&self) -> usize {
        self.n_t / self.steps_per_cell()
    }

    pub fn time_cell(&self, k: usize) -> Option<usize> {
        let j = k / self.steps_per_cell();
        (j < self.n_time_cells()).then_some(j)
    }

    pub fn spatial_cell_of_element(&self, e: usize) -> usize {
        let m = self.elements_per_cell();
        let kc = self.cells_per_axis();
        let i = e % self.n_x;
        let j = e / self.n_x;
        i / m + (j / m) * kc
    }

    pub fn qp_per_element(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            4
        }
    }

    pub fn n_qp(&self) -> usize {
        self.n_x.pow(self.dim as u32) * self.qp_per_element()
    }

    pub fn spatial_cell_of_qp(&self, g: usize) -> usize {
        self.spatial_cell_of_element(g / self.qp_per_element())
    }
}

/// Vector samples at every space-time quadrature point of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        let expected = grid.n_t * grid.n_qp() * grid.dim;
        if values.len() != expected {
            return Err(Error::invalid(format!("field has {} values, grid needs {expected}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(DiscreteField { grid, values })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        let n = grid.n_t * grid.n_qp() * grid.dim;
        DiscreteField { grid, values: vec![0.0; n] }
    }

    /// Samples `f(x_q, t_k)` at quadrature points and interval midpoints.
    pub fn from_fn(grid: SpaceTimeGrid, mut f: impl FnMut(&Vector, f64) -> Vector) -> Result<Self> {
        let mesh = grid.mesh();
        let positions: Vec<Vector> = (0..grid.n_qp()).map(|g| mesh.qp_position_global(g)).collect();
        let mut values = Vec::with_capacity(grid.n_t * grid.n_qp() * grid.dim);
        for k in 0..grid.n_t {
            let t = grid.sample_time(k);
            for x in &positions {
                let v = f(x, t);
                if v.dim() != grid.dim {
                    return Err(Error::invalid("sample dimension differs from the grid dimension"));
                }
                values.extend_from_slice(v.as_slice());
            }
        }
        DiscreteField::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn get(&self, k: usize, g: usize) -> Vector {
        let d = self.grid.dim;
        let start = (k * self.grid.n_qp() + g) * d;
        Vector::from_slice(&self.values[start..start + d])
    }

    fn set(&mut self, k: usize, g: usize, v: &Vector) {
        let d = self.grid.dim;
        let start = (k * self.grid.n_qp() + g) * d;
        self.values[start..start + d].copy_from_slice(v.as_slice());
    }

    /// `Σ_k Δt Σ_q w |v|^p`.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let w = self.grid.mesh().qp_weight() * self.grid.dt();
        let d = self.grid.dim;
        let mut s = 0.0;
        for c in self.values.chunks_exact(d) {
            let n2: f64 = c.iter().map(|x| x * x).sum();
            s += if p == 2.0 { n2 } else { math::powf(n2, 0.5 * p) };
        }
        w * s
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        math::powf(self.lp_norm_pow(p), 1.0 / p)
    }

    pub fn sub(&self, other: &DiscreteField) -> Result<DiscreteField> {
        if !self.grid.same_samples(&other.grid) {
            return Err(Error::invalid("fields live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(DiscreteField { grid: self.grid, values })
    }

    /// Largest Euclidean norm over all samples.
    pub fn max_norm(&self) -> f64 {
        self.values.chunks_exact(self.grid.dim).map(|c| math::sqrt(c.iter().map(|x| x * x).sum::<f64>())).fold(0.0, f64::max)
    }
}

/// `M_ε φ`: ε-cell means on interior cells, zero on the temporal boundary sliver.
pub fn mesh_average(phi: &DiscreteField, grid: &SpaceTimeGrid) -> Result<DiscreteField> {
    grid.validate()?;
    if !phi.grid.same_samples(grid) {
        return Err(Error::invalid("field does not live on the averaging grid"));
    }
    let d = grid.dim;
    let nq = grid.n_qp();
    let ncell = grid.n_spatial_cells();
    let cell_of: Vec<usize> = (0..nq).map(|g| grid.spatial_cell_of_qp(g)).collect();
    let n_tc = grid.n_time_cells();
    // shifted sums: mean = s₀ + Σ (v − s₀) / n keeps constant cells bit-exact
    let mut shift: Vec<Option<Vector>> = vec![None; ncell * n_tc];
    let mut acc = vec![Vector::zeros(d); ncell * n_tc];
    let mut count = vec![0usize; ncell * n_tc];
    for k in 0..grid.n_t {
        let Some(j) = grid.time_cell(k) else { continue };
        for g in 0..nq {
            let c = j * ncell + cell_of[g];
            let v = phi.get(k, g);
            let s = *shift[c].get_or_insert(v);
            acc[c] = acc[c] + (v - s);
            count[c] += 1;
        }
    }
    let means: Vec<Vector> = (0..ncell * n_tc)
        .map(|c| match shift[c] {
            Some(s) => s + acc[c].scale(1.0 / count[c] as f64),
            None => Vector::zeros(d),
        })
        .collect();
    let mut out = DiscreteField::zeros(*grid);
    for k in 0..grid.n_t {
        let Some(j) = grid.time_cell(k) else { continue };
        for g in 0..nq {
            out.set(k, g, &means[j * ncell + cell_of[g]]);
        }
    }
    Ok(out)
}

/// `‖M_ε φ − φ‖_p` along a nested sequence of decreasing ε.
pub fn identity_approximation_check(phi: &DiscreteField, epsilons: &[f64], p: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(epsilons.len());
    let mut previous: Option<usize> = None;
    for &eps in epsilons {
        let grid = phi.grid.with_epsilon(eps)?;
        let k = grid.cells_per_axis();
        if let Some(prev) = previous {
            if k <= prev || k % prev != 0 {
                return Err(Error::invalid(format!("epsilon partitions are not nested: 1/{prev} then 1/{k}")));
            }
            if grid.steps_per_cell() > phi.grid.with_epsilon(1.0 / prev as f64)?.steps_per_cell() {
                return Err(Error::invalid("temporal partitions are not nested"));
            }
        }
        previous = Some(k);
        let avg = mesh_average(phi, &grid)?;
        out.push(avg.sub(phi)?.lp_norm(p));
    }
    Ok(out)
}

/// Integer lattice coordinates of a quantized `ξ`, zero-padded.
pub type CellKey = [i64; MAX_DIM];

/// Cell solutions keyed by quantized `ξ`.
#[derive(Clone, Debug)]
pub struct CellSolutionCache {
    model: FluxModel,
    mu: f64,
    grid: CellGrid,
    opts: SolverOptions,
    delta_xi: f64,
    budget: usize,
    solving: bool,
    entries: BTreeMap<CellKey, CellSolution>,
}

impl CellSolutionCache {
    pub fn new(model: FluxModel, mu: f64, grid: CellGrid, opts: SolverOptions, delta_xi: f64) -> Result<Self> {
        grid.validate()?;
        crate::cell::Regime::from_mu(mu)?;
        if !(delta_xi > 0.0 && delta_xi.is_finite()) {
            return Err(Error::invalid(format!("quantization step must be positive, got {delta_xi}")));
        }
        if model.coefficients().dim != grid.dim {
            return Err(Error::invalid("cell grid dimension differs from the model dimension"));
        }
        Ok(CellSolutionCache { model, mu, grid, opts, delta_xi, budget: usize::MAX, solving: true, entries: BTreeMap::new() })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_solving(mut self, solving: bool) -> Self {
        self.solving = solving;
        self
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn delta_xi(&self) -> f64 {
        self.delta_xi
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn solving(&self) -> bool {
        self.solving
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn key(&self, xi: &Vector) -> CellKey {
        let mut k = [0i64; MAX_DIM];
        for d in 0..xi.dim() {
            k[d] = math::round(xi[d] / self.delta_xi) as i64;
        }
        k
    }

    /// Representative `ξ` of a key.
    pub fn key_value(&self, key: &CellKey) -> Vector {
        let c: Vec<f64> = (0..self.grid.dim).map(|d| key[d] as f64 * self.delta_xi).collect();
        Vector::from_slice(&c)
    }

    pub fn get(&self, key: &CellKey) -> Option<&CellSolution> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CellKey, &CellSolution)> {
        self.entries.iter()
    }

    /// Solves the cell problem of `key` without touching the cache.
    pub fn solve_key(&self, key: &CellKey) -> Result<CellSolution> {
        effective_flux(&self.model, self.mu, &self.key_value(key), &self.grid, &self.opts)
    }

    pub fn insert(&mut self, key: CellKey, solution: CellSolution) {
        self.entries.entry(key).or_insert(solution);
    }

    /// Keys of `wanted` not cached yet; fails when they would exceed the budget.
    pub fn missing(&self, wanted: &BTreeSet<CellKey>) -> Result<Vec<CellKey>> {
        let missing: Vec<CellKey> = wanted.iter().filter(|k| !self.entries.contains_key(*k)).copied().collect();
        let needed = self.entries.len() + missing.len();
        if needed > self.budget {
            return Err(Error::Resource { needed, budget: self.budget });
        }
        if !missing.is_empty() && !self.solving {
            return Err(Error::Unavailable(self.key_value(&missing[0]).to_vec()));
        }
        Ok(missing)
    }

    pub fn get_or_solve(&mut self, xi: &Vector) -> Result<&CellSolution> {
        let key = self.key(xi);
        let wanted: BTreeSet<CellKey> = [key].into_iter().collect();
        for k in self.missing(&wanted)? {
            let s = self.solve_key(&k)?;
            self.insert(k, s);
        }
        Ok(&self.entries[&key])
    }
}

fn corrector_value(cell_mesh: &Mesh, sol: &CellSolution, xi: &Vector, x: &Vector, t: f64, grid: &SpaceTimeGrid) -> Vector {
    let y = x.scale(1.0 / grid.epsilon);
    let tau = t / math::powf(grid.epsilon, grid.mu);
    *xi + sol.grad_at(cell_mesh, &y, tau)
}

/// `p_ε(x, t, ξ) = ξ + Dv(x/ε, t/ε^μ)` with `v` the cell solution of the quantized `ξ`.
pub fn corrector_eval(cache: &mut CellSolutionCache, x: &Vector, t: f64, xi: &Vector, grid: &SpaceTimeGrid) -> Result<Vector> {
    if x.dim() != grid.dim || xi.dim() != grid.dim {
        return Err(Error::invalid("dimension mismatch in corrector evaluation"));
    }
    let cell_mesh = cache.grid.mesh();
    let sol = cache.get_or_solve(xi)?;
    Ok(corrector_value(&cell_mesh, sol, xi, x, t, grid))
}

/// Distinct quantized keys appearing in an averaged field.
pub fn corrector_keys(averaged: &DiscreteField, cache: &CellSolutionCache) -> BTreeSet<CellKey> {
    averaged.values.chunks_exact(averaged.grid.dim).map(|c| cache.key(&Vector::from_slice(c))).collect()
}

/// `p_ε(·, ·, M_ε φ)` from a cache already holding every needed key.
pub fn fill_corrector(averaged: &DiscreteField, cache: &CellSolutionCache) -> Result<DiscreteField> {
    let grid = averaged.grid;
    let mesh = grid.mesh();
    let cell_mesh = cache.grid.mesh();
    let positions: Vec<Vector> = (0..grid.n_qp()).map(|g| mesh.qp_position_global(g)).collect();
    let mut out = DiscreteField::zeros(grid);
    for k in 0..grid.n_t {
        let t = grid.sample_time(k);
        for (g, x) in positions.iter().enumerate() {
            let xi = averaged.get(k, g);
            let sol = cache.get(&cache.key(&xi)).ok_or_else(|| Error::Unavailable(xi.to_vec()))?;
            out.set(k, g, &corrector_value(&cell_mesh, sol, &xi, x, t, &grid));
        }
    }
    Ok(out)
}

/// Averages `Du`, solves the missing cell problems and assembles `p_ε(·, ·, M_ε Du)`.
pub fn corrector_from_average(averaged: &DiscreteField, cache: &mut CellSolutionCache) -> Result<DiscreteField> {
    let keys = corrector_keys(averaged, cache);
    for key in cache.missing(&keys)? {
        let s = cache.solve_key(&key)?;
        cache.insert(key, s);
    }
    fill_corrector(averaged, cache)
}

/// `p_ε(·, ·, M_ε Du)` for a homogenized trajectory living on `grid`.
pub fn assemble_corrector_field(
    u_hom: &SolveResult,
    cache: &mut CellSolutionCache,
    grid: &SpaceTimeGrid,
) -> Result<DiscreteField> {
    let averaged = mesh_average(&u_hom.gradient, grid)?;
    corrector_from_average(&averaged, cache)
}

/// `r_ε = Du_ε − p_ε(·, ·, M_ε Du)` and its `L^p(0, T; L^p)` norm.
pub fn remainder(u_fine: &SolveResult, corrector: &DiscreteField) -> Result<(DiscreteField, f64)> {
    let r = u_fine.gradient.sub(corrector)?;
    let norm = r.lp_norm(u_fine.exponent);
    Ok((r, norm))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub eta: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorDiagnostics {
    /// `max_ξ ⨍ |p(·, ·, ξ)|^p / (1 + |ξ|^p)` over cached cells.
    pub lp_bound_ratio: f64,
    /// Smallest constant of the `ξ`-continuity bound over cached pairs.
    #[serde(rename = "xi_continuity_C")]
    pub xi_continuity_c: f64,
    /// `‖p_ε(·, ·, M_ε Du)‖^p` over the space-time domain.
    pub uniform_bound: f64,
    /// `max_ξ ⨍ |p|^{p+η} / (1 + |ξ|^{p+η})` per probe exponent.
    pub higher_integrability_probe: Vec<ProbeEntry>,
}

pub const PROBE_EXPONENTS: [f64; 2] = [0.1, 0.5];

fn cell_mean_pow(sol: &CellSolution, p: f64) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for slice in &sol.grad_v {
        for g in slice {
            s += math::abs_pow((sol.xi + *g).norm(), p);
            n += 1;
        }
    }
    s / n as f64
}

fn cell_distance_pow(a: &CellSolution, b: &CellSolution, p: f64) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for (sa, sb) in a.grad_v.iter().zip(&b.grad_v) {
        for (ga, gb) in sa.iter().zip(sb) {
            s += math::abs_pow(((a.xi + *ga) - (b.xi + *gb)).norm(), p);
            n += 1;
        }
    }
    s / n as f64
}

/// Cap on the cached pairs visited by the continuity estimate.
const MAX_PAIRS: usize = 20_000;

pub fn corrector_diagnostics(
    cache: &CellSolutionCache,
    field: &DiscreteField,
    constants: &StructureConstants,
) -> CorrectorDiagnostics {
    let p = constants.p;
    let alpha = constants.alpha;
    let sols: Vec<&CellSolution> = cache.entries.values().collect();
    let mut lp_ratio = 0.0f64;
    let mut probes: Vec<ProbeEntry> = PROBE_EXPONENTS.iter().map(|&eta| ProbeEntry { eta, ratio: 0.0 }).collect();
    for s in &sols {
        let xn = s.xi.norm();
        lp_ratio = lp_ratio.max(cell_mean_pow(s, p) / (1.0 + math::abs_pow(xn, p)));
        for probe in probes.iter_mut() {
            let q = p + probe.eta;
            probe.ratio = probe.ratio.max(cell_mean_pow(s, q) / (1.0 + math::abs_pow(xn, q)));
        }
    }
    let mut cont = 0.0f64;
    let mut visited = 0;
    'outer: for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            if visited >= MAX_PAIRS {
                break 'outer;
            }
            visited += 1;
            let (a, b) = (sols[i], sols[j]);
            let d = (a.xi - b.xi).norm();
            if d == 0.0 {
                continue;
            }
            let growth = 1.0 + math::abs_pow(a.xi.norm(), p) + math::abs_pow(b.xi.norm(), p);
            let scale = math::powf(growth, (p - 1.0 - alpha) / (p - alpha)) * math::powf(d, p / (p - alpha));
            cont = cont.max(cell_distance_pow(a, b, p) / scale);
        }
    }
    CorrectorDiagnostics {
        lp_bound_ratio: lp_ratio,
        xi_continuity_c: cont,
        uniform_bound: field.lp_norm_pow(p),
        higher_integrability_probe: probes,
    }
}
