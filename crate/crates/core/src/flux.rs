//! Admissible monotone flux maps `a(y, τ, ξ)` and sampled verification of
//! their structure conditions.
//!
//! Every built-in family has the form `a(y, τ, ξ) = c(y, τ) |ξ|^{p-2} ξ` with
//! a positive coefficient `c` that is `Y × T₀`-periodic. The families differ
//! only in how `c` is described:
//!
//! * `linear_separable`: `c = c₁(y) c₂(τ)` with two Fourier descriptors, `p = 2`;
//! * `p_laplacian`: `c(y, τ)` a single space-time Fourier descriptor;
//! * `checkerboard`: `c` piecewise constant on a `k × … × k` sub-lattice of `Y × T₀`,
//!   cells half-open `[lower, upper)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, TAU};
use crate::vector::{Matrix, Vector, MAX_DIM};

/// A flux field evaluated at a point, a time and a gradient.
///
/// Cell-level fluxes take `x` in the unit cell and `t` in the unit period;
/// macro-level fluxes (the rescaled `a(x/ε, t/ε^μ, ξ)` or a tabulated `b`)
/// take physical coordinates.
pub trait Flux {
    fn dim(&self) -> usize;

    /// Growth exponent `p` of the flux.
    fn exponent(&self) -> f64;

    fn flux(&self, x: &Vector, t: f64, xi: &Vector) -> Result<Vector>;

    /// Derivative `∂a/∂ξ`.
    fn jacobian(&self, x: &Vector, t: f64, xi: &Vector) -> Result<Matrix>;

    fn is_time_independent(&self) -> bool {
        false
    }
}

impl<F: Flux + ?Sized> Flux for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn exponent(&self) -> f64 {
        (**self).exponent()
    }
    fn flux(&self, x: &Vector, t: f64, xi: &Vector) -> Result<Vector> {
        (**self).flux(x, t, xi)
    }
    fn jacobian(&self, x: &Vector, t: f64, xi: &Vector) -> Result<Matrix> {
        (**self).jacobian(x, t, xi)
    }
    fn is_time_independent(&self) -> bool {
        (**self).is_time_independent()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConstants {
    pub p: f64,
    pub alpha: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl StructureConstants {
    pub fn validate(&self) -> Result<()> {
        let c = self;
        if !(c.p >= 2.0 && c.p.is_finite()) {
            return Err(Error::invalid(format!("p must satisfy 2 <= p < inf, got {}", c.p)));
        }
        if !(c.alpha > 0.0 && c.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {}", c.alpha)));
        }
        for (name, v) in [("c0", c.c0), ("c1", c.c1), ("c2", c.c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `γ = α / (p − α)`.
    pub fn gamma(&self) -> f64 {
        self.alpha / (self.p - self.alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    /// Spatial frequencies, one per axis; missing trailing entries are zero.
    #[serde(default)]
    pub k: Vec<f64>,
    /// Temporal frequency.
    #[serde(default)]
    pub m: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// `constant + Σ amplitude · sin(2π (k·x + m t) + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fourier {
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
}

impl Fourier {
    pub fn constant(c: f64) -> Self {
        Fourier { constant: c, terms: Vec::new() }
    }

    pub fn with_term(mut self, k: &[f64], m: f64, amplitude: f64, phase: f64) -> Self {
        self.terms.push(FourierTerm { k: k.to_vec(), m, amplitude, phase });
        self
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let mut s = self.constant;
        for term in &self.terms {
            let mut arg = term.m * t;
            for (k, xi) in term.k.iter().zip(x) {
                arg += k * xi;
            }
            s += term.amplitude * math::sin(TAU * arg + term.phase);
        }
        s
    }

    /// Conservative range `[constant − Σ|a|, constant + Σ|a|]`.
    pub fn bounds(&self) -> (f64, f64) {
        let spread: f64 = self.terms.iter().map(|t| t.amplitude.abs()).sum();
        (self.constant - spread, self.constant + spread)
    }

    /// Lipschitz constant in `t`.
    pub fn time_lipschitz(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs() * TAU * t.m.abs()).sum()
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.m == 0.0 || t.amplitude == 0.0)
    }

    pub fn is_space_independent(&self) -> bool {
        self.terms.iter().all(|t| t.k.iter().all(|&k| k == 0.0) || t.amplitude == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self
                .terms
                .iter()
                .all(|t| t.m.is_finite() && t.amplitude.is_finite() && t.phase.is_finite() && t.k.iter().all(|k| k.is_finite()))
    }

    fn validate_periodic(&self, dim: usize, what: &str) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::invalid(format!("{what}: non-finite Fourier descriptor")));
        }
        for t in &self.terms {
            if t.k.len() > dim {
                return Err(Error::invalid(format!("{what}: frequency vector longer than dimension {dim}")));
            }
            let integral = |v: f64| v == math::floor(v);
            if !integral(t.m) || !t.k.iter().all(|&k| integral(k)) {
                return Err(Error::invalid(format!("{what}: periodic coefficients need integer frequencies")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LinearSeparable,
    PLaplacian,
    Checkerboard,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::LinearSeparable => "linear_separable",
            Family::PLaplacian => "p_laplacian",
            Family::Checkerboard => "checkerboard",
        }
    }
}

/// Family-specific coefficient descriptor. Which keys are required depends on
/// the family: `spatial` + `temporal` (linear_separable), `coefficient`
/// (p_laplacian), `cells` + `values` (checkerboard).
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<Fourier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<Fourier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<Fourier>,
    /// Sub-lattice size `k` per axis (space and time).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// `k^(N+1)` values, index `t·k^N + Σ_i y_i k^i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeModulus {
    /// `ω(h) = constant · |h|`.
    Lipschitz { constant: f64 },
}

impl TimeModulus {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            TimeModulus::Lipschitz { constant } => constant * h.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluxModelDescriptor {
    family: Family,
    p: f64,
    alpha: f64,
    c0: f64,
    c1: f64,
    c2: f64,
    coefficients: Coefficients,
    #[serde(default)]
    time_modulus: Option<TimeModulus>,
}

#[derive(Clone, Debug, PartialEq)]
enum Field {
    Separable { spatial: Fourier, temporal: Fourier },
    Fourier(Fourier),
    Checker { cells: usize, values: Vec<f64> },
}

/// A validated member of the admissible flux class with its declared
/// structure constants. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FluxModelDescriptor", into = "FluxModelDescriptor")]
pub struct FluxModel {
    family: Family,
    dim: usize,
    constants: StructureConstants,
    coefficients: Coefficients,
    time_modulus: Option<TimeModulus>,
    field: Field,
}

impl TryFrom<FluxModelDescriptor> for FluxModel {
    type Error = Error;
    fn try_from(d: FluxModelDescriptor) -> Result<Self> {
        let constants = StructureConstants { p: d.p, alpha: d.alpha, c0: d.c0, c1: d.c1, c2: d.c2 };
        FluxModel::new(d.family, constants, d.coefficients, d.time_modulus)
    }
}

impl From<FluxModel> for FluxModelDescriptor {
    fn from(m: FluxModel) -> Self {
        let c = m.constants;
        FluxModelDescriptor {
            family: m.family,
            p: c.p,
            alpha: c.alpha,
            c0: c.c0,
            c1: c.c1,
            c2: c.c2,
            coefficients: m.coefficients,
            time_modulus: m.time_modulus,
        }
    }
}

impl FluxModel {
    pub fn new(
        family: Family,
        constants: StructureConstants,
        coefficients: Coefficients,
        time_modulus: Option<TimeModulus>,
    ) -> Result<Self> {
        constants.validate()?;
        let dim = coefficients.dim;
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        let name = family.name();
        let field = match family {
            Family::LinearSeparable => {
                if constants.p != 2.0 {
                    return Err(Error::invalid("linear_separable requires p = 2"));
                }
                let (Some(spatial), Some(temporal)) = (&coefficients.spatial, &coefficients.temporal) else {
                    return Err(Error::invalid("linear_separable needs 'spatial' and 'temporal' coefficients"));
                };
                spatial.validate_periodic(dim, "spatial")?;
                temporal.validate_periodic(dim, "temporal")?;
                if !spatial.is_time_independent() {
                    return Err(Error::invalid("spatial factor must not depend on time"));
                }
                if !temporal.is_space_independent() {
                    return Err(Error::invalid("temporal factor must not depend on space"));
                }
                let (s_lo, _) = spatial.bounds();
                let (t_lo, _) = temporal.bounds();
                if s_lo <= 0.0 || t_lo <= 0.0 {
                    return Err(Error::invalid("separable factors must be bounded below by a positive constant"));
                }
                Field::Separable { spatial: spatial.clone(), temporal: temporal.clone() }
            }
            Family::PLaplacian => {
                let Some(c) = &coefficients.coefficient else {
                    return Err(Error::invalid("p_laplacian needs a 'coefficient'"));
                };
                c.validate_periodic(dim, "coefficient")?;
                if c.bounds().0 <= 0.0 {
                    return Err(Error::invalid("coefficient must be bounded below by a positive constant"));
                }
                Field::Fourier(c.clone())
            }
            Family::Checkerboard => {
                let (Some(cells), Some(values)) = (coefficients.cells, &coefficients.values) else {
                    return Err(Error::invalid("checkerboard needs 'cells' and 'values'"));
                };
                if cells == 0 {
                    return Err(Error::invalid("checkerboard needs cells >= 1"));
                }
                let expected = cells.pow(dim as u32 + 1);
                if values.len() != expected {
                    return Err(Error::invalid(format!(
                        "checkerboard with {cells} cells in dimension {dim} needs {expected} values, got {}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid("checkerboard values must be positive and finite"));
                }
                Field::Checker { cells, values: values.clone() }
            }
        };
        if let Some(TimeModulus::Lipschitz { constant }) = time_modulus {
            if !(constant >= 0.0 && constant.is_finite()) {
                return Err(Error::invalid(format!("{name}: modulus constant must be non-negative")));
            }
        }
        Ok(FluxModel { family, dim, constants, coefficients, time_modulus, field })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn time_modulus(&self) -> Option<&TimeModulus> {
        self.time_modulus.as_ref()
    }

    pub fn with_time_modulus(mut self, m: Option<TimeModulus>) -> Self {
        self.time_modulus = m;
        self
    }

    pub fn with_constants(mut self, c: StructureConstants) -> Result<Self> {
        c.validate()?;
        if self.family == Family::LinearSeparable && c.p != 2.0 {
            return Err(Error::invalid("linear_separable requires p = 2"));
        }
        self.constants = c;
        Ok(self)
    }

    /// Coefficient `c(y, τ)`; arguments are wrapped into the unit cell.
    pub fn coefficient(&self, y: &Vector, tau: f64) -> f64 {
        let mut w = [0.0; MAX_DIM];
        for i in 0..self.dim {
            w[i] = math::wrap_unit(y[i]);
        }
        let w = &w[..self.dim];
        let tau = math::wrap_unit(tau);
        match &self.field {
            Field::Separable { spatial, temporal } => spatial.eval(w, 0.0) * temporal.eval(&[], tau),
            Field::Fourier(c) => c.eval(w, tau),
            Field::Checker { cells, values } => {
                let k = *cells;
                let cell = |s: f64| ((s * k as f64) as usize).min(k - 1);
                let mut idx = 0;
                let mut stride = 1;
                for &wi in w {
                    idx += cell(wi) * stride;
                    stride *= k;
                }
                idx += cell(tau) * stride;
                values[idx]
            }
        }
    }

    /// Analytic range of the coefficient (conservative for Fourier descriptors).
    pub fn coefficient_bounds(&self) -> (f64, f64) {
        match &self.field {
            Field::Separable { spatial, temporal } => {
                let (a, b) = spatial.bounds();
                let (c, d) = temporal.bounds();
                (a * c, b * d)
            }
            Field::Fourier(c) => c.bounds(),
            Field::Checker { values, .. } => {
                values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            }
        }
    }

    /// Structure constants implied by the coefficient range:
    /// `c₂ = c_min 2^{2−p}`, `c₁ = c_max (p − 1)` with `α = 1`.
    pub fn admissible_constants(&self) -> StructureConstants {
        let (lo, hi) = self.coefficient_bounds();
        let p = self.constants.p;
        StructureConstants { p, alpha: 1.0, c0: self.constants.c0, c1: hi * (p - 1.0), c2: lo * math::powf(2.0, 2.0 - p) }
    }

    /// Lipschitz bound in time of the flux, usable as a modulus `ω(h) = K|h|`.
    pub fn time_lipschitz_bound(&self) -> Option<f64> {
        match &self.field {
            Field::Separable { spatial, temporal } => Some(spatial.bounds().1 * temporal.time_lipschitz()),
            Field::Fourier(c) => Some(c.time_lipschitz()),
            Field::Checker { .. } => {
                if self.is_time_independent() {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        self.constants.p == 2.0
    }

    fn time_independent(&self) -> bool {
        match &self.field {
            Field::Separable { temporal, .. } => temporal.is_time_independent(),
            Field::Fourier(c) => c.is_time_independent(),
            Field::Checker { cells, values } => {
                let slab = values.len() / cells;
                (1..*cells).all(|t| values[t * slab..(t + 1) * slab] == values[..slab])
            }
        }
    }

    fn check_args(&self, y: &Vector, tau: f64, xi: &Vector) -> Result<()> {
        if y.dim() != self.dim || xi.dim() != self.dim {
            return Err(Error::invalid(format!("expected vectors of dimension {}", self.dim)));
        }
        if !(y.is_finite() && tau.is_finite() && xi.is_finite()) {
            return Err(Error::invalid("non-finite flux argument"));
        }
        Ok(())
    }
}

/// `|ξ|^{p−2} ξ` scaled by `c`.
#[inline]
pub(crate) fn power_flux(c: f64, p: f64, xi: &Vector) -> Vector {
    if p == 2.0 {
        xi.scale(c)
    } else {
        let n = xi.norm();
        if n == 0.0 {
            Vector::zeros(xi.dim())
        } else {
            xi.scale(c * math::powf(n, p - 2.0))
        }
    }
}

#[inline]
pub(crate) fn power_jacobian(c: f64, p: f64, xi: &Vector) -> Matrix {
    let dim = xi.dim();
    if p == 2.0 {
        return Matrix::identity(dim).scale(c);
    }
    let n2 = xi.norm2();
    if n2 == 0.0 {
        return Matrix::zeros(dim);
    }
    let n = math::sqrt(n2);
    let w = c * math::powf(n, p - 2.0);
    Matrix::identity(dim).scale(w).add_outer(xi, w * (p - 2.0) / n2)
}

impl Flux for FluxModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn exponent(&self) -> f64 {
        self.constants.p
    }

    fn flux(&self, y: &Vector, tau: f64, xi: &Vector) -> Result<Vector> {
        eval_flux(self, y, tau, xi)
    }

    fn jacobian(&self, y: &Vector, tau: f64, xi: &Vector) -> Result<Matrix> {
        self.check_args(y, tau, xi)?;
        Ok(power_jacobian(self.coefficient(y, tau), self.constants.p, xi))
    }

    fn is_time_independent(&self) -> bool {
        self.time_independent()
    }
}

/// Evaluates `a(y, τ, ξ)`, wrapping `y` and `τ` periodically.
pub fn eval_flux(model: &FluxModel, y: &Vector, tau: f64, xi: &Vector) -> Result<Vector> {
    model.check_args(y, tau, xi)?;
    Ok(power_flux(model.coefficient(y, tau), model.constants.p, xi))
}

/// Worst-case margins of the sampled structure conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub samples: usize,
    /// `min c₀ − |a(y, τ, 0)|`.
    pub zero_flux_margin: f64,
    /// `min (a(ξ₁) − a(ξ₂), ξ₁ − ξ₂) − c₂ |ξ₁ − ξ₂|^p`.
    pub monotonicity_margin: f64,
    /// `min c₁ (1 + |ξ₁| + |ξ₂|)^{p−1−α} |ξ₁ − ξ₂|^α − |a(ξ₁) − a(ξ₂)|`.
    pub continuity_margin: f64,
    /// Pair attaining the monotonicity minimum.
    pub worst_monotonicity_pair: Option<(Vector, Vector)>,
    pub tolerance: f64,
    pub passed: bool,
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    let mut y = Vector::zeros(dim);
    for i in 0..dim {
        y[i] = rng.gen::<f64>();
    }
    y
}

/// Random gradient with log-uniform magnitude in `[1e-3, 1e2]`.
fn random_gradient(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    let r = math::powf(10.0, rng.gen_range(-3.0..2.0));
    let mut d = Vector::zeros(dim);
    loop {
        for i in 0..dim {
            d[i] = rng.gen_range(-1.0..1.0);
        }
        let n = d.norm();
        if n > 1e-3 && n <= 1.0 {
            return d.scale(r / n);
        }
    }
}

/// Samples conditions (ii), (iv) and (v) with a pass threshold of `0`.
pub fn check_structure(model: &FluxModel, n_samples: usize, seed: u64) -> StructureReport {
    check_structure_with_tolerance(model, n_samples, seed, 0.0)
}

pub fn check_structure_with_tolerance(model: &FluxModel, n_samples: usize, seed: u64, tolerance: f64) -> StructureReport {
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = model.constants;
    let dim = model.dim;
    let zero = Vector::zeros(dim);
    let mut zero_margin = f64::INFINITY;
    let mut mono = f64::INFINITY;
    let mut cont = f64::INFINITY;
    let mut worst = None;
    for s in 0..n_samples {
        let y = random_point(&mut rng, dim);
        let tau = rng.gen::<f64>();
        let xi1 = random_gradient(&mut rng, dim);
        // a third of the pairs are near-coincident
        let xi2 = if s % 3 == 2 {
            let eps = math::powf(10.0, rng.gen_range(-6.0..-1.0)) * xi1.norm();
            let dir = random_gradient(&mut rng, dim);
            xi1 + dir.scale(eps / dir.norm())
        } else if s % 3 == 1 {
            zero
        } else {
            random_gradient(&mut rng, dim)
        };
        let a1 = power_flux(model.coefficient(&y, tau), c.p, &xi1);
        let a2 = power_flux(model.coefficient(&y, tau), c.p, &xi2);
        let a0 = power_flux(model.coefficient(&y, tau), c.p, &zero);
        zero_margin = zero_margin.min(c.c0 - a0.norm());
        if xi1 == xi2 {
            continue;
        }
        let d = xi1 - xi2;
        let dn = d.norm();
        let m = (a1 - a2).dot(&d) - c.c2 * math::abs_pow(dn, c.p);
        if m < mono {
            mono = m;
            worst = Some((xi1, xi2));
        }
        let bound = c.c1 * math::powf(1.0 + xi1.norm() + xi2.norm(), c.p - 1.0 - c.alpha) * math::powf(dn, c.alpha);
        cont = cont.min(bound - (a1 - a2).norm());
    }
    let passed = zero_margin >= -tolerance && mono >= -tolerance && cont >= -tolerance;
    StructureReport {
        samples: n_samples,
        zero_flux_margin: zero_margin,
        monotonicity_margin: mono,
        continuity_margin: cont,
        worst_monotonicity_pair: worst,
        tolerance,
        passed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub samples: usize,
    /// `min ω(t − s) − |a(y,t,ξ) − a(y,s,ξ)| / (1 + |ξ|^{p−1})`.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Samples `|a(y,t,ξ) − a(y,s,ξ)| ≤ ω(t − s)(1 + |ξ|^{p−1})` over the unit period.
pub fn check_time_modulus(model: &FluxModel, n_samples: usize, seed: u64) -> Result<ModulusReport> {
    let Some(omega) = model.time_modulus else {
        return Err(Error::config(String::from("model has no time_modulus descriptor")));
    };
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = model.constants.p;
    let mut worst = f64::INFINITY;
    for _ in 0..n_samples {
        let y = random_point(&mut rng, model.dim);
        let t = rng.gen::<f64>();
        let s = rng.gen::<f64>();
        let xi = random_gradient(&mut rng, model.dim);
        let at = power_flux(model.coefficient(&y, t), p, &xi);
        let as_ = power_flux(model.coefficient(&y, s), p, &xi);
        let lhs = (at - as_).norm() / (1.0 + math::powf(xi.norm(), p - 1.0));
        worst = worst.min(omega.eval(t - s) - lhs);
    }
    Ok(ModulusReport { samples: n_samples, worst_margin: worst, passed: worst >= -1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn harmonic(c2: f64) -> FluxModel {
        FluxModel::new(
            Family::LinearSeparable,
            StructureConstants { p: 2.0, alpha: 1.0, c0: 1.0, c1: 3.0, c2 },
            Coefficients {
                dim: 1,
                spatial: Some(Fourier::constant(2.0).with_term(&[1.0], 0.0, 1.0, 0.0)),
                temporal: Some(Fourier::constant(1.0)),
                ..Default::default()
            },
            Some(TimeModulus::Lipschitz { constant: 0.0 }),
        )
        .unwrap()
    }

    fn p_laplace(p: f64, c2: f64) -> FluxModel {
        FluxModel::new(
            Family::PLaplacian,
            StructureConstants { p, alpha: 1.0, c0: 1.0, c1: p - 1.0, c2 },
            Coefficients { dim: 2, coefficient: Some(Fourier::constant(1.0)), ..Default::default() },
            None,
        )
        .unwrap()
    }

    fn time_oscillating(omega: f64) -> FluxModel {
        FluxModel::new(
            Family::LinearSeparable,
            StructureConstants { p: 2.0, alpha: 1.0, c0: 1.0, c1: 3.0, c2: 1.0 },
            Coefficients {
                dim: 1,
                spatial: Some(Fourier::constant(1.0)),
                temporal: Some(Fourier::constant(2.0).with_term(&[], 1.0, 1.0, 0.0)),
                ..Default::default()
            },
            Some(TimeModulus::Lipschitz { constant: omega }),
        )
        .unwrap()
    }

    #[test]
    fn p_laplacian_p2_is_identity() {
        let m = FluxModel::new(
            Family::PLaplacian,
            StructureConstants { p: 2.0, alpha: 1.0, c0: 1.0, c1: 1.0, c2: 1.0 },
            Coefficients { dim: 2, coefficient: Some(Fourier::constant(1.0)), ..Default::default() },
            None,
        )
        .unwrap();
        let a = eval_flux(&m, &Vector::from_slice(&[0.3, 0.7]), 0.2, &Vector::from_slice(&[1.0, 0.0])).unwrap();
        assert_eq!(a, Vector::from_slice(&[1.0, 0.0]));
    }

    #[test]
    fn linear_1d_value() {
        let m = harmonic(1.0);
        let a = eval_flux(&m, &Vector::scalar(0.25), 0.0, &Vector::scalar(1.0)).unwrap();
        assert!((a[0] - 3.0).abs() < 1e-15, "sin(π/2) = 1, got {}", a[0]);
        let a = eval_flux(&m, &Vector::scalar(0.125), 0.0, &Vector::scalar(1.0)).unwrap();
        assert!((a[0] - (2.0 + core::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = harmonic(1.0);
        let e = eval_flux(&m, &Vector::scalar(f64::NAN), 0.0, &Vector::scalar(1.0));
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
        let e = eval_flux(&m, &Vector::scalar(0.1), 0.0, &Vector::scalar(f64::INFINITY));
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_gradient_bounded_by_c0() {
        let m = p_laplace(4.0, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let y = random_point(&mut rng, 2);
            let a = eval_flux(&m, &y, rng.gen(), &Vector::zeros(2)).unwrap();
            assert!(a.norm() <= m.constants().c0);
        }
    }

    #[test]
    fn harmonic_model_passes_structure() {
        let r = check_structure(&harmonic(1.0), 10_000, 7);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn overclaimed_monotonicity_fails() {
        let r = check_structure(&p_laplace(4.0, 10.0), 1000, 11);
        assert!(!r.passed);
        assert!(r.monotonicity_margin < 0.0);
    }

    #[test]
    fn coincident_gradients_never_violate() {
        // c2 far too large: any distinct pair violates, so a passing
        // zero-width sample set would show coincident pairs are skipped
        let m = harmonic(1.0);
        let c = m.constants;
        let xi = Vector::scalar(0.7);
        let a = eval_flux(&m, &Vector::scalar(0.3), 0.1, &xi).unwrap();
        let margin = (a - a).dot(&(xi - xi)) - c.c2 * math::abs_pow((xi - xi).norm(), c.p);
        assert_eq!(margin, 0.0);
    }

    #[test]
    fn time_modulus_checks() {
        let stationary = harmonic(1.0).with_time_modulus(Some(TimeModulus::Lipschitz { constant: 0.0 }));
        let r = check_time_modulus(&stationary, 2000, 1).unwrap();
        assert!(r.passed && r.worst_margin >= 0.0);

        let r = check_time_modulus(&time_oscillating(TAU), 20_000, 2).unwrap();
        assert!(r.passed, "{r:?}");

        let r = check_time_modulus(&time_oscillating(0.1), 20_000, 2).unwrap();
        assert!(!r.passed);

        let missing = harmonic(1.0).with_time_modulus(None);
        assert!(matches!(check_time_modulus(&missing, 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn checkerboard_half_open_cells() {
        let m = FluxModel::new(
            Family::Checkerboard,
            StructureConstants { p: 2.0, alpha: 1.0, c0: 1.0, c1: 4.0, c2: 1.0 },
            Coefficients { dim: 1, cells: Some(2), values: Some(alloc::vec![1.0, 2.0, 3.0, 4.0]), ..Default::default() },
            None,
        )
        .unwrap();
        assert_eq!(m.coefficient(&Vector::scalar(0.0), 0.0), 1.0);
        assert_eq!(m.coefficient(&Vector::scalar(0.5), 0.0), 2.0);
        assert_eq!(m.coefficient(&Vector::scalar(0.49), 0.5), 3.0);
        assert_eq!(m.coefficient(&Vector::scalar(1.5), 1.75), 4.0);
        assert!(!m.is_time_independent());
    }

    #[test]
    fn gamma_is_recomputed() {
        let c = StructureConstants { p: 4.0, alpha: 0.5, c0: 1.0, c1: 1.0, c2: 1.0 };
        assert_eq!(c.gamma(), 0.5 / 3.5);
    }

    #[test]
    fn invalid_constants_rejected() {
        let bad = StructureConstants { p: 1.5, alpha: 1.0, c0: 1.0, c1: 1.0, c2: 1.0 };
        assert!(bad.validate().is_err());
        let bad = StructureConstants { p: 2.0, alpha: 0.0, c0: 1.0, c1: 1.0, c2: 1.0 };
        assert!(bad.validate().is_err());
    }
}
