//! Damped Newton-type iteration for the discrete monotone systems
//!
//! ```text
//! G(u) = m M (u − u_ref) + Σ_q w (a(x_q, t, ξ + Du_q), ∇φ_i) − F = 0
//! ```
//!
//! where `M` is the lumped mass and `m ≥ 0`. The search direction solves the
//! tangent system; the step length is backtracked until the residual dual
//! norm `‖G‖_* = (Gᵀ P⁻¹ G)^{1/2}`, `P = m M + L`, strictly decreases. If the
//! tangent direction fails (singular tangent, no descent) the step falls back
//! to the Laplacian-preconditioned direction `−P⁻¹ G`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::linalg::{self, CgOptions, CsrMatrix};
use crate::math;
use crate::mesh::{Boundary, Mesh};
use crate::vector::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub linear: CgOptions,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions { tol: 1e-10, max_iter: 200, max_backtracks: 40, linear: CgOptions::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    /// Dual norm after every accepted iterate, starting with the initial guess.
    pub history: Vec<f64>,
}

pub(crate) struct System<'a, F: Flux + ?Sized> {
    pub mesh: &'a Mesh,
    pub positions: &'a [Vector],
    pub flux: &'a F,
    pub time: f64,
    /// Constant gradient added to `Du` (the frozen `ξ` of a cell problem).
    pub offset: Vector,
    pub mass_coeff: f64,
    pub reference: &'a [f64],
    /// Nodal load vector; empty means zero.
    pub load: &'a [f64],
}

impl<'a, F: Flux + ?Sized> System<'a, F> {
    /// Pure periodic elliptic systems are singular on constants.
    fn singular(&self) -> bool {
        self.mass_coeff == 0.0 && self.mesh.boundary() == Boundary::Periodic
    }

    fn constrained(&self) -> Vec<usize> {
        if self.singular() {
            vec![0]
        } else {
            self.mesh.boundary_nodes()
        }
    }

    pub fn fluxes(&self, grads: &[Vector]) -> Result<Vec<Vector>> {
        grads.iter().zip(self.positions).map(|(g, x)| self.flux.flux(x, self.time, &(self.offset + *g))).collect()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let grads = self.mesh.gradients(u);
        let mut g = self.mesh.assemble_divergence(&self.fluxes(&grads)?);
        if self.mass_coeff != 0.0 {
            let m = self.mass_coeff * self.mesh.lumped_mass();
            for i in 0..g.len() {
                g[i] += m * (u[i] - self.reference[i]);
            }
        }
        if !self.load.is_empty() {
            for (gi, fi) in g.iter_mut().zip(self.load) {
                *gi -= fi;
            }
        }
        for k in self.mesh.boundary_nodes() {
            g[k] = 0.0;
        }
        Ok(g)
    }

    fn with_mass(&self, k: &CsrMatrix) -> CsrMatrix {
        let d = vec![self.mass_coeff * self.mesh.lumped_mass(); self.mesh.n_nodes()];
        let mut m = k.scaled_plus_diagonal(1.0, &d);
        m.pin_all(&self.constrained());
        m
    }

    fn tangent(&self, u: &[f64]) -> Result<CsrMatrix> {
        let grads = self.mesh.gradients(u);
        let jac: Vec<Matrix> = grads
            .iter()
            .zip(self.positions)
            .map(|(g, x)| self.flux.jacobian(x, self.time, &(self.offset + *g)))
            .collect::<Result<_>>()?;
        Ok(self.with_mass(&self.mesh.assemble_stiffness(&jac)))
    }
}

fn constrained_solve(a: &CsrMatrix, rhs: &[f64], fixed: &[usize], project: bool, cg: CgOptions) -> Result<Vec<f64>> {
    let mut b = rhs.to_vec();
    for &k in fixed {
        b[k] = 0.0;
    }
    let mut z = linalg::solve_spd(a, &b, cg)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Linear("non-finite solution".into()));
    }
    if project {
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        z.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(z)
}

struct DualNorm {
    precond: CsrMatrix,
    fixed: Vec<usize>,
    project: bool,
    cg: CgOptions,
}

impl DualNorm {
    fn norm(&self, g: &[f64]) -> Result<f64> {
        let z = constrained_solve(&self.precond, g, &self.fixed, self.project, self.cg)?;
        Ok(math::sqrt(linalg::dot(g, &z).max(0.0)))
    }
}

fn project_mean(u: &mut [f64]) {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|v| *v -= mean);
}

pub(crate) fn solve<F: Flux + ?Sized>(sys: &System<'_, F>, u: &mut Vec<f64>, opts: &NonlinearOptions) -> Result<SolveStats> {
    let fixed = sys.constrained();
    let project = sys.singular();
    let dual = DualNorm { precond: sys.with_mass(&sys.mesh.laplacian()), fixed: fixed.clone(), project, cg: opts.linear };
    if project {
        project_mean(u);
    }
    let mut g = sys.residual(u)?;
    let mut norm = dual.norm(&g)?;
    let mut history = vec![norm];
    let mut iterations = 0;
    // a trial leaving the domain of a tabulated flux is reported as such if nothing else works
    let mut range_error = None;
    while norm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(range_error.unwrap_or(Error::Convergence { iterations, residual: norm, history }));
        }
        iterations += 1;
        let mut accepted = None;
        let newton = sys.tangent(u).and_then(|j| constrained_solve(&j, &g, &fixed, project, opts.linear));
        let candidates = [newton.ok(), constrained_solve(&dual.precond, &g, &fixed, project, opts.linear).ok()];
        'dirs: for dir in candidates.into_iter().flatten() {
            let mut rho = 1.0;
            for _ in 0..=opts.max_backtracks {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(ui, di)| ui - rho * di).collect();
                match sys.residual(&trial) {
                    Ok(gt) => {
                        let nt = dual.norm(&gt)?;
                        if nt < norm {
                            accepted = Some((trial, gt, nt));
                            break 'dirs;
                        }
                    }
                    Err(e @ Error::OutOfRange { .. }) => range_error = Some(e),
                    Err(_) => {}
                }
                rho *= 0.5;
            }
        }
        let Some((trial, gt, nt)) = accepted else {
            return Err(range_error.unwrap_or(Error::Convergence { iterations, residual: norm, history }));
        };
        *u = trial;
        g = gt;
        norm = nt;
        history.push(norm);
    }
    if project {
        project_mean(u);
    }
    Ok(SolveStats { iterations, residual: norm, history })
}
