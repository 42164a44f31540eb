//! Built-in flux models. Declared constants sit slightly inside the exact
//! bounds of each family so sampled structure checks do not trip on round-off.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cell::CellGrid;
use crate::error::Result;
use crate::flux::{Coefficients, Family, FluxModel, Fourier, StructureConstants, TimeModulus};
use crate::math;

const LOWER: f64 = 0.999;
const UPPER: f64 = 1.001;

fn constants(p: f64, lo: f64, hi: f64) -> StructureConstants {
    StructureConstants { p, alpha: 1.0, c0: 1.0, c1: UPPER * hi * (p - 1.0), c2: LOWER * lo * math::powf(2.0, 2.0 - p) }
}

fn lipschitz(k: f64) -> Option<TimeModulus> {
    Some(TimeModulus::Lipschitz { constant: UPPER * k })
}

/// `a = c |ξ|^{p−2} ξ` with constant `c`.
pub fn constant(dim: usize, p: f64, c: f64) -> Result<FluxModel> {
    FluxModel::new(
        Family::PLaplacian,
        constants(p, c, c),
        Coefficients { dim, coefficient: Some(Fourier::constant(c)), ..Default::default() },
        lipschitz(0.0),
    )
}

/// `a = (2 + sin 2πy) ξ`; effective coefficient `√3`.
pub fn harmonic_1d() -> FluxModel {
    FluxModel::new(
        Family::LinearSeparable,
        constants(2.0, 1.0, 3.0),
        Coefficients {
            dim: 1,
            spatial: Some(Fourier::constant(2.0).with_term(&[1.0], 0.0, 1.0, 0.0)),
            temporal: Some(Fourier::constant(1.0)),
            ..Default::default()
        },
        lipschitz(0.0),
    )
    .expect("preset")
}

/// `a = (2 + sin 2πy)(1 + ½ sin 2πτ) ξ`.
pub fn separable_1d() -> FluxModel {
    FluxModel::new(
        Family::LinearSeparable,
        constants(2.0, 0.5, 4.5),
        Coefficients {
            dim: 1,
            spatial: Some(Fourier::constant(2.0).with_term(&[1.0], 0.0, 1.0, 0.0)),
            temporal: Some(Fourier::constant(1.0).with_term(&[], 1.0, 0.5, 0.0)),
            ..Default::default()
        },
        lipschitz(3.0 * core::f64::consts::PI),
    )
    .expect("preset")
}

/// `a = (2 + sin 2πy + ½ sin 2π(y + τ)) |ξ|² ξ`.
pub fn plaplace_1d() -> FluxModel {
    FluxModel::new(
        Family::PLaplacian,
        constants(4.0, 0.5, 3.5),
        Coefficients {
            dim: 1,
            coefficient: Some(Fourier::constant(2.0).with_term(&[1.0], 0.0, 1.0, 0.0).with_term(&[1.0], 1.0, 0.5, 0.0)),
            ..Default::default()
        },
        lipschitz(core::f64::consts::PI),
    )
    .expect("preset")
}

/// `a = (3/2 + ½ sin 2πy₁ + ¼ sin 2π(y₂ + τ)) |ξ| ξ`.
pub fn plaplace_2d() -> FluxModel {
    FluxModel::new(
        Family::PLaplacian,
        constants(3.0, 0.75, 2.25),
        Coefficients {
            dim: 2,
            coefficient: Some(Fourier::constant(1.5).with_term(&[1.0, 0.0], 0.0, 0.5, 0.0).with_term(
                &[0.0, 1.0],
                1.0,
                0.25,
                0.0,
            )),
            ..Default::default()
        },
        lipschitz(0.5 * core::f64::consts::PI),
    )
    .expect("preset")
}

/// Two-phase laminate switching in time, `p = 2`.
pub fn checkerboard_1d() -> FluxModel {
    FluxModel::new(
        Family::Checkerboard,
        constants(2.0, 1.0, 4.0),
        Coefficients { dim: 1, cells: Some(2), values: Some(vec![1.0, 4.0, 2.0, 3.0]), ..Default::default() },
        None,
    )
    .expect("preset")
}

/// 2×2 checkerboard alternating in time, `p = 3`.
pub fn checkerboard_2d() -> FluxModel {
    FluxModel::new(
        Family::Checkerboard,
        constants(3.0, 1.0, 3.0),
        Coefficients { dim: 2, cells: Some(2), values: Some(vec![1.0, 3.0, 3.0, 1.0, 3.0, 1.0, 1.0, 3.0]), ..Default::default() },
        None,
    )
    .expect("preset")
}

/// Name, model and default cell grid of every built-in model.
pub fn builtin() -> Vec<(String, FluxModel, CellGrid)> {
    let g1 = CellGrid { dim: 1, n_space: 64, n_time: 8 };
    let g2 = CellGrid { dim: 2, n_space: 16, n_time: 4 };
    vec![
        ("harmonic_1d".into(), harmonic_1d(), g1),
        ("separable_1d".into(), separable_1d(), g1),
        ("plaplace_1d".into(), plaplace_1d(), g1),
        ("checkerboard_1d".into(), checkerboard_1d(), g1),
        ("plaplace_2d".into(), plaplace_2d(), g2),
        ("checkerboard_2d".into(), checkerboard_2d(), g2),
        ("constant_2d_p4".into(), constant(2, 4.0, 1.5).expect("preset"), g2),
    ]
}

pub fn by_name(name: &str) -> Option<FluxModel> {
    builtin().into_iter().find(|(n, _, _)| n == name).map(|(_, m, _)| m)
}
