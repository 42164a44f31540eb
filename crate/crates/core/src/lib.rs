//! Numerical homogenization of monotone parabolic operators with
//! `ε`-periodic spatial and `ε^μ`-periodic temporal oscillations.
//!
//! The crate is `no_std` (with `alloc`). It carries the algorithmic part of
//! the workbench: admissible flux models, the three regime-dependent cell
//! problems and the effective flux `b`, tabulation of `b`, the averaging
//! operator `M_ε` with the corrector family `p_ε`, and an implicit solver for
//! the fine-scale and homogenized Dirichlet problems. File formats, the CLI
//! and parallel drivers live in the `homog` companion crate.
#![allow(clippy::needless_range_loop)]
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod cell;
pub mod effective;
pub mod error;
pub mod fields;
pub mod flux;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod parabolic;
pub mod presets;
pub mod vector;

mod math;

pub use cell::{
    effective_flux, energy_identity_check, solve_cell_elliptic, solve_cell_parabolic_periodic, solve_cell_parametric,
    solve_cell_time_averaged, time_average_flux, time_modulus_gate, CellGrid, CellSolution, Regime, SolverOptions,
    TimeAveragedFlux,
};
pub use effective::{eval_b, tabulate_b, verify_b_estimates, EstimateReport, FluxTable, Lattice, TableProvenance};
pub use error::{Error, Result};
pub use fields::{
    assemble_corrector_field, corrector_diagnostics, corrector_eval, identity_approximation_check, mesh_average, remainder,
    CellKey, CellSolutionCache, CorrectorDiagnostics, DiscreteField, SpaceTimeGrid,
};
pub use flux::{
    check_structure, check_time_modulus, eval_flux, Coefficients, Family, Flux, FluxModel, Fourier, FourierTerm, ModulusReport,
    StructureConstants, StructureReport, TimeModulus,
};
pub use parabolic::{energy_balance, solve_fine, solve_homogenized, EnergyRow, ParabolicOptions, ProblemSpec, SolveResult};
pub use vector::{Matrix, Vector};
