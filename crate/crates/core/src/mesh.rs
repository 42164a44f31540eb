//! Uniform tensor meshes of the unit cube with lowest-order conforming
//! elements: piecewise linear in 1D (one midpoint quadrature point per
//! element), bilinear in 2D (2×2 Gauss points per element).

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::CsrMatrix;
use crate::math;
use crate::vector::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Nodes on opposite faces identified.
    Periodic,
    /// Homogeneous Dirichlet data on the boundary nodes.
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    n: usize,
    h: f64,
    boundary: Boundary,
}

const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;

impl Mesh {
    pub fn new(dim: usize, n: usize, boundary: Boundary) -> Self {
        assert!((1..=2).contains(&dim) && n >= 2);
        Mesh { dim, n, h: 1.0 / n as f64, boundary }
    }

    pub fn periodic(dim: usize, n: usize) -> Self {
        Mesh::new(dim, n, Boundary::Periodic)
    }

    pub fn dirichlet(dim: usize, n: usize) -> Self {
        Mesh::new(dim, n, Boundary::Dirichlet)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Elements per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn nodes_per_axis(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::Dirichlet => self.n + 1,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn n_elements(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn qp_per_element(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            4
        }
    }

    pub fn n_qp(&self) -> usize {
        self.n_elements() * self.qp_per_element()
    }

    pub fn qp_weight(&self) -> f64 {
        let vol = if self.dim == 1 { self.h } else { self.h * self.h };
        vol / self.qp_per_element() as f64
    }

    /// Lumped mass of a node (the element volume `h^N`).
    pub fn lumped_mass(&self) -> f64 {
        if self.dim == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    /// Axis indices of element `e`.
    pub fn element_index(&self, e: usize) -> [usize; 2] {
        if self.dim == 1 {
            [e, 0]
        } else {
            [e % self.n, e / self.n]
        }
    }

    pub fn node_index(&self, node: usize) -> [usize; 2] {
        let m = self.nodes_per_axis();
        if self.dim == 1 {
            [node, 0]
        } else {
            [node % m, node / m]
        }
    }

    fn node_at(&self, i: usize, j: usize) -> usize {
        let m = self.nodes_per_axis();
        let (i, j) = match self.boundary {
            Boundary::Periodic => (i % m, j % m),
            Boundary::Dirichlet => (i, j),
        };
        i + j * m
    }

    /// Local nodes of element `e` in the order `00, 10, 01, 11` (first two in 1D).
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let [i, j] = self.element_index(e);
        if self.dim == 1 {
            [self.node_at(i, 0), self.node_at(i + 1, 0), 0, 0]
        } else {
            [self.node_at(i, j), self.node_at(i + 1, j), self.node_at(i, j + 1), self.node_at(i + 1, j + 1)]
        }
    }

    pub fn nodes_per_element(&self) -> usize {
        1 << self.dim
    }

    fn qp_local(&self, q: usize) -> (f64, f64) {
        if self.dim == 1 {
            (0.5, 0.0)
        } else {
            let g = |a: usize| if a == 0 { GAUSS_LO } else { GAUSS_HI };
            (g(q % 2), g(q / 2))
        }
    }

    /// Basis gradients at local coordinates `(s, t)`: `grads[a][axis]`.
    fn basis_gradients(&self, s: f64, t: f64) -> [[f64; 2]; 4] {
        let ih = 1.0 / self.h;
        if self.dim == 1 {
            [[-ih, 0.0], [ih, 0.0], [0.0; 2], [0.0; 2]]
        } else {
            [[-(1.0 - t) * ih, -(1.0 - s) * ih], [(1.0 - t) * ih, -s * ih], [-t * ih, (1.0 - s) * ih], [t * ih, s * ih]]
        }
    }

    pub fn qp_basis_gradients(&self, q: usize) -> [[f64; 2]; 4] {
        let (s, t) = self.qp_local(q);
        self.basis_gradients(s, t)
    }

    /// Physical position of quadrature point `q` of element `e`.
    pub fn qp_position(&self, e: usize, q: usize) -> Vector {
        let [i, j] = self.element_index(e);
        let (s, t) = self.qp_local(q);
        if self.dim == 1 {
            Vector::scalar((i as f64 + s) * self.h)
        } else {
            Vector::from_slice(&[(i as f64 + s) * self.h, (j as f64 + t) * self.h])
        }
    }

    /// Position of quadrature point with global index `g = e·nq + q`.
    pub fn qp_position_global(&self, g: usize) -> Vector {
        let nq = self.qp_per_element();
        self.qp_position(g / nq, g % nq)
    }

    pub fn node_position(&self, node: usize) -> Vector {
        let [i, j] = self.node_index(node);
        if self.dim == 1 {
            Vector::scalar(i as f64 * self.h)
        } else {
            Vector::from_slice(&[i as f64 * self.h, j as f64 * self.h])
        }
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let [i, j] = self.node_index(node);
        let last = self.n;
        i == 0 || i == last || (self.dim == 2 && (j == 0 || j == last))
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| self.is_boundary_node(k)).collect()
    }

    fn grad_from(&self, u: &[f64], nodes: &[usize; 4], g: &[[f64; 2]; 4]) -> Vector {
        let mut d = Vector::zeros(self.dim);
        for a in 0..self.nodes_per_element() {
            let ua = u[nodes[a]];
            for k in 0..self.dim {
                d[k] += g[a][k] * ua;
            }
        }
        d
    }

    /// Gradient of the nodal field `u` at every quadrature point (element-major).
    pub fn gradients(&self, u: &[f64]) -> Vec<Vector> {
        let nq = self.qp_per_element();
        let bases: Vec<_> = (0..nq).map(|q| self.qp_basis_gradients(q)).collect();
        let mut out = Vec::with_capacity(self.n_qp());
        for e in 0..self.n_elements() {
            let nodes = self.element_nodes(e);
            for g in &bases {
                out.push(self.grad_from(u, &nodes, g));
            }
        }
        out
    }

    /// Finite element gradient at an arbitrary point of a periodic mesh;
    /// points on element faces belong to the element above (half-open cells).
    pub fn gradient_at_point(&self, u: &[f64], y: &Vector) -> Vector {
        let mut idx = [0usize; 2];
        let mut loc = [0.0; 2];
        for k in 0..self.dim {
            let w = math::wrap_unit(y[k]) * self.n as f64;
            let i = (w as usize).min(self.n - 1);
            idx[k] = i;
            loc[k] = w - i as f64;
        }
        let e = idx[0] + idx[1] * self.n;
        let g = self.basis_gradients(loc[0], loc[1]);
        self.grad_from(u, &self.element_nodes(e), &g)
    }

    /// `R_i = Σ_q w (F_q, ∇φ_i(x_q))` for per-quadrature-point vectors `F`.
    pub fn assemble_divergence(&self, fluxes: &[Vector]) -> Vec<f64> {
        let nq = self.qp_per_element();
        let w = self.qp_weight();
        let bases: Vec<_> = (0..nq).map(|q| self.qp_basis_gradients(q)).collect();
        let mut r = vec![0.0; self.n_nodes()];
        for e in 0..self.n_elements() {
            let nodes = self.element_nodes(e);
            for (q, g) in bases.iter().enumerate() {
                let f = &fluxes[e * nq + q];
                for a in 0..self.nodes_per_element() {
                    let mut s = 0.0;
                    for k in 0..self.dim {
                        s += f[k] * g[a][k];
                    }
                    r[nodes[a]] += w * s;
                }
            }
        }
        r
    }

    /// `K_ij = Σ_q w (J_q ∇φ_j, ∇φ_i)`.
    pub fn assemble_stiffness(&self, jac: &[Matrix]) -> CsrMatrix {
        let nq = self.qp_per_element();
        let w = self.qp_weight();
        let ne = self.nodes_per_element();
        let bases: Vec<_> = (0..nq).map(|q| self.qp_basis_gradients(q)).collect();
        let mut t = Vec::with_capacity(self.n_elements() * ne * ne);
        for e in 0..self.n_elements() {
            let nodes = self.element_nodes(e);
            let mut local = [[0.0; 4]; 4];
            for (q, g) in bases.iter().enumerate() {
                let j = &jac[e * nq + q];
                for b in 0..ne {
                    let mut jg = [0.0; 2];
                    for r in 0..self.dim {
                        for c in 0..self.dim {
                            jg[r] += j.get(r, c) * g[b][c];
                        }
                    }
                    for a in 0..ne {
                        let mut s = 0.0;
                        for k in 0..self.dim {
                            s += jg[k] * g[a][k];
                        }
                        local[a][b] += w * s;
                    }
                }
            }
            for a in 0..ne {
                for b in 0..ne {
                    t.push((nodes[a], nodes[b], local[a][b]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_nodes(), t)
    }

    pub fn laplacian(&self) -> CsrMatrix {
        let id = vec![Matrix::identity(self.dim); self.n_qp()];
        self.assemble_stiffness(&id)
    }

    /// Lumped-mass `L²` inner product of nodal fields.
    pub fn mass_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.lumped_mass() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        math::sqrt(self.mass_dot(a, a))
    }

    /// Nodal average over the periodic cell.
    pub fn mean(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() / u.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let m = Mesh::dirichlet(2, 4);
        let u: Vec<f64> = (0..m.n_nodes())
            .map(|k| {
                let x = m.node_position(k);
                2.0 * x[0] - 3.0 * x[1]
            })
            .collect();
        for g in m.gradients(&u) {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_divergence_sums_to_zero() {
        let m = Mesh::periodic(2, 5);
        let f: Vec<Vector> = (0..m.n_qp())
            .map(|g| {
                let x = m.qp_position_global(g);
                Vector::from_slice(&[math::sin(7.0 * x[0]) + 1.0, x[1] * x[1]])
            })
            .collect();
        let r = m.assemble_divergence(&f);
        assert!(r.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        for dim in [1, 2] {
            let m = Mesh::periodic(dim, 6);
            let l = m.laplacian();
            let mut y = vec![0.0; m.n_nodes()];
            l.mul_vec(&vec![1.0; m.n_nodes()], &mut y);
            assert!(y.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn point_gradient_matches_quadrature_values() {
        let m = Mesh::periodic(2, 4);
        let u: Vec<f64> = (0..m.n_nodes()).map(|k| math::sin(k as f64)).collect();
        let g = m.gradients(&u);
        for e in 0..m.n_elements() {
            for q in 0..4 {
                let x = m.qp_position(e, q);
                let p = m.gradient_at_point(&u, &x);
                let d = p - g[e * 4 + q];
                assert!(d.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_nodes_counted() {
        assert_eq!(Mesh::dirichlet(1, 8).boundary_nodes(), vec![0, 8]);
        assert_eq!(Mesh::dirichlet(2, 3).boundary_nodes().len(), 12);
    }
}
