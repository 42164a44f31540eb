//! Tabulated effective flux `b` on a uniform ξ-lattice
//!
//! Values are stored at lattice nodes and interpolated multilinearly; queries
//! outside the box are refused rather than extrapolated.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{effective_flux, CellGrid, Regime, SolverOptions};
use crate::error::{Error, Result};
use crate::flux::{Flux, FluxModel, StructureConstants};
use crate::math;
use crate::vector::{Matrix, Vector, MAX_DIM};

/// Relative distance to a node below which a coordinate snaps onto it.
const SNAP: f64 = 1e-10;

/// Axis-aligned box `[min, min + (n − 1) δ]` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub min: Vec<f64>,
    pub spacing: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl Lattice {
    /// Covers `[lo, hi]` per axis with spacing `δ`; the upper end rounds outward.
    pub fn covering(lo: &[f64], hi: &[f64], spacing: f64) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::invalid("lattice bounds must have matching dimension 1 or 2"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("lattice spacing must be positive, got {spacing}")));
        }
        let mut nodes = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(hi) {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::invalid(format!("degenerate lattice axis [{a}, {b}]")));
            }
            let cells = math::ceil((b - a) / spacing * (1.0 - 1e-12)).max(1.0) as usize;
            nodes.push(cells + 1);
        }
        Ok(Lattice { min: lo.to_vec(), spacing: alloc::vec![spacing; lo.len()], nodes })
    }

    /// Symmetric box `[−r, r]^dim`.
    pub fn symmetric(dim: usize, radius: f64, spacing: f64) -> Result<Self> {
        let lo = alloc::vec![-radius; dim];
        let hi = alloc::vec![radius; dim];
        Lattice::covering(&lo, &hi, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.min.len();
        if d == 0 || d > MAX_DIM || self.spacing.len() != d || self.nodes.len() != d {
            return Err(Error::invalid("inconsistent lattice metadata"));
        }
        if self.nodes.iter().any(|&n| n < 2) {
            return Err(Error::invalid("lattice needs at least 2 nodes per axis"));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) || self.min.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("lattice spacing must be positive and finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.coordinate(d, self.nodes[d] - 1)).collect()
    }

    fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.spacing[axis]
    }

    /// Multi-index of node `k`; axis 0 varies fastest.
    pub fn multi_index(&self, mut k: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for d in 0..self.dim() {
            idx[d] = k % self.nodes[d];
            k /= self.nodes[d];
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for d in (0..self.dim()).rev() {
            k = k * self.nodes[d] + idx[d];
        }
        k
    }

    pub fn node(&self, k: usize) -> Vector {
        let idx = self.multi_index(k);
        let c: Vec<f64> = (0..self.dim()).map(|d| self.coordinate(d, idx[d])).collect();
        Vector::from_slice(&c)
    }

    pub fn contains(&self, xi: &Vector) -> bool {
        self.locate(xi).is_ok()
    }

    /// Lower cell index and local coordinate in `[0, 1]` per axis.
    fn locate(&self, xi: &Vector) -> Result<[(usize, f64); MAX_DIM]> {
        if xi.dim() != self.dim() || !xi.is_finite() {
            return Err(Error::OutOfRange { xi: xi.to_vec() });
        }
        let mut out = [(0usize, 0.0f64); MAX_DIM];
        for d in 0..self.dim() {
            let s = (xi[d] - self.min[d]) / self.spacing[d];
            let last = (self.nodes[d] - 1) as f64;
            let r = math::round(s);
            let s = if (s - r).abs() <= SNAP * r.abs().max(1.0) { r } else { s };
            if s < 0.0 || s > last {
                return Err(Error::OutOfRange { xi: xi.to_vec() });
            }
            let i = (math::floor(s) as usize).min(self.nodes[d] - 2);
            out[d] = (i, s - i as f64);
        }
        Ok(out)
    }
}

/// Inputs a table was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableProvenance {
    pub regime: Regime,
    pub grid: CellGrid,
    pub tol: f64,
    pub period_tol: f64,
}

/// Immutable tabulation of `b` for one model and regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxTable {
    pub mu: f64,
    pub p: f64,
    pub lattice: Lattice,
    pub values: Vec<Vector>,
    pub provenance: TableProvenance,
}

impl FluxTable {
    pub fn from_values(mu: f64, p: f64, lattice: Lattice, provenance: TableProvenance, values: Vec<Vector>) -> Result<Self> {
        lattice.validate()?;
        if values.len() != lattice.len() {
            return Err(Error::invalid(format!("{} values for {} lattice nodes", values.len(), lattice.len())));
        }
        if values.iter().any(|v| v.dim() != lattice.dim() || !v.is_finite()) {
            return Err(Error::invalid("table values must be finite with the lattice dimension"));
        }
        Ok(FluxTable { mu, p, lattice, values, provenance })
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn eval(&self, xi: &Vector) -> Result<Vector> {
        Ok(self.eval_with_jacobian(xi, false)?.0)
    }

    fn corner(&self, cell: &[(usize, f64); MAX_DIM], bits: usize) -> Vector {
        let mut idx = [0usize; MAX_DIM];
        for d in 0..self.dim() {
            idx[d] = cell[d].0 + ((bits >> d) & 1);
        }
        self.values[self.lattice.linear_index(&idx)]
    }

    fn eval_with_jacobian(&self, xi: &Vector, want_jacobian: bool) -> Result<(Vector, Matrix)> {
        let cell = self.lattice.locate(xi)?;
        let dim = self.dim();
        let mut value = Vector::zeros(dim);
        let mut jac = Matrix::zeros(dim);
        for bits in 0..(1usize << dim) {
            let v = self.corner(&cell, bits);
            let mut w = 1.0;
            for d in 0..dim {
                let s = cell[d].1;
                w *= if (bits >> d) & 1 == 1 { s } else { 1.0 - s };
            }
            // skip exact zero weights so node queries return the stored value bit for bit
            if w != 0.0 {
                value = value + v.scale(w);
            }
            if want_jacobian {
                for d in 0..dim {
                    let mut dw = if (bits >> d) & 1 == 1 { 1.0 } else { -1.0 } / self.lattice.spacing[d];
                    for e in 0..dim {
                        if e != d {
                            let s = cell[e].1;
                            dw *= if (bits >> e) & 1 == 1 { s } else { 1.0 - s };
                        }
                    }
                    for r in 0..dim {
                        jac.set(r, d, jac.get(r, d) + dw * v[r]);
                    }
                }
            }
        }
        Ok((value, jac))
    }
}

impl Flux for FluxTable {
    fn dim(&self) -> usize {
        self.lattice.dim()
    }

    fn exponent(&self) -> f64 {
        self.p
    }

    fn flux(&self, _x: &Vector, _t: f64, xi: &Vector) -> Result<Vector> {
        self.eval(xi)
    }

    fn jacobian(&self, _x: &Vector, _t: f64, xi: &Vector) -> Result<Matrix> {
        Ok(self.eval_with_jacobian(xi, true)?.1)
    }

    fn is_time_independent(&self) -> bool {
        true
    }
}

/// Multilinear interpolation of the table; out-of-box queries are range errors.
pub fn eval_b(table: &FluxTable, xi: &Vector) -> Result<Vector> {
    table.eval(xi)
}

/// One cell solve per lattice node, in node order.
pub fn tabulate_b(model: &FluxModel, mu: f64, lattice: Lattice, grid: &CellGrid, opts: &SolverOptions) -> Result<FluxTable> {
    lattice.validate()?;
    if lattice.dim() != model.coefficients().dim {
        return Err(Error::invalid("lattice dimension differs from the model dimension"));
    }
    let values = (0..lattice.len()).map(|k| tabulate_node(model, mu, &lattice, k, grid, opts)).collect::<Result<Vec<_>>>()?;
    FluxTable::from_values(mu, model.constants().p, lattice, provenance(mu, grid, opts)?, values)
}

pub fn provenance(mu: f64, grid: &CellGrid, opts: &SolverOptions) -> Result<TableProvenance> {
    Ok(TableProvenance { regime: Regime::from_mu(mu)?, grid: *grid, tol: opts.tol, period_tol: opts.period_tol })
}

/// `b` at lattice node `k`, with the node attached to any failure.
pub fn tabulate_node(
    model: &FluxModel,
    mu: f64,
    lattice: &Lattice,
    k: usize,
    grid: &CellGrid,
    opts: &SolverOptions,
) -> Result<Vector> {
    let xi = lattice.node(k);
    effective_flux(model, mu, &xi, grid, opts).map(|s| s.b).map_err(|e| Error::Node { node: xi.to_vec(), source: Box::new(e) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub pairs: usize,
    pub theta: f64,
    /// `min (b(ξ₁) − b(ξ₂), ξ₁ − ξ₂) / (c₂ |ξ₁ − ξ₂|^p)` over the pairs.
    pub monotonicity_ratio: f64,
    /// Smallest admissible constant of the Hölder growth bound.
    pub holder_constant: f64,
    pub passed: bool,
}

pub const MONOTONICITY_SLACK: f64 = 0.9;

/// Samples node pairs and checks the monotonicity and Hölder bounds of `b`.
pub fn verify_b_estimates(table: &FluxTable, constants: &StructureConstants, n_pairs: usize, seed: u64) -> EstimateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = table.values.len();
    let p = constants.p;
    let gamma = constants.gamma();
    let mut ratio = f64::INFINITY;
    let mut holder = 0.0f64;
    let mut pairs = 0;
    for _ in 0..n_pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let (x1, x2) = (table.lattice.node(i), table.lattice.node(j));
        let (b1, b2) = (table.values[i], table.values[j]);
        let d = x1 - x2;
        let dn = d.norm();
        if dn == 0.0 {
            continue;
        }
        pairs += 1;
        ratio = ratio.min((b1 - b2).dot(&d) / (constants.c2 * math::abs_pow(dn, p)));
        let scale = math::powf(1.0 + x1.norm() + x2.norm(), p - 1.0 - gamma) * math::powf(dn, gamma);
        holder = holder.max((b1 - b2).norm() / scale);
    }
    if pairs == 0 {
        ratio = f64::NAN;
    }
    EstimateReport {
        pairs,
        theta: MONOTONICITY_SLACK,
        monotonicity_ratio: ratio,
        holder_constant: holder,
        passed: pairs > 0 && ratio >= MONOTONICITY_SLACK,
    }
}
