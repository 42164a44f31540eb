use std::f64::consts::PI;

use homog_core::presets;
use homog_core::{
    assemble_corrector_field, effective_flux, energy_balance, mesh_average, remainder, solve_fine, solve_homogenized, tabulate_b,
    CellGrid, CellSolutionCache, Fourier, Lattice, ParabolicOptions, ProblemSpec, SolverOptions, SpaceTimeGrid, Vector,
};

fn unit_source(t_end: f64) -> ProblemSpec {
    ProblemSpec::new(1, t_end, Fourier::constant(1.0), Fourier::constant(0.0)).unwrap()
}

/// `(∫ c(y)^{−1/(p−1)} dy)^{−(p−1)}` for `c = 2 + sin 2πy`.
fn one_d_mean(p: f64) -> f64 {
    let n = 1 << 16;
    let s: f64 =
        (0..n).map(|i| (2.0 + (2.0 * PI * (i as f64 + 0.5) / n as f64).sin()).powf(-1.0 / (p - 1.0))).sum::<f64>() / n as f64;
    s.powf(-(p - 1.0))
}

#[test]
fn harmonic_mean_in_all_regimes() {
    let grid = CellGrid::new(1, 1024, 2).unwrap();
    let opts = SolverOptions::for_exponent(2.0);
    for mu in [0.5, 1.0, 2.0, 3.0] {
        let s = effective_flux(&presets::harmonic_1d(), mu, &Vector::scalar(1.0), &grid, &opts).unwrap();
        assert!((s.b[0] - 3f64.sqrt()).abs() < 1e-4, "mu = {mu}: {}", s.b[0]);
    }
}

#[test]
fn p_laplacian_cell_matches_one_d_formula() {
    let opts = SolverOptions::for_exponent(4.0);
    let exact = one_d_mean(4.0);
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let grid = CellGrid::new(1, n, 4).unwrap();
            let s = effective_flux(&presets::plaplace_1d(), 3.0, &Vector::scalar(1.0), &grid, &opts).unwrap();
            (s.b[0] - exact).abs()
        })
        .collect();
    // midpoint quadrature of a smooth periodic integrand converges spectrally
    assert!(errors.iter().all(|&e| e < 1e-8), "{errors:?}");
}

#[test]
fn heat_equation_against_the_exact_mode() {
    let model = presets::constant(1, 2.0, 1.0).unwrap();
    let spec = ProblemSpec::new(1, 0.1, Fourier::constant(0.0), Fourier::constant(0.0).with_term(&[0.5], 0.0, 1.0, 0.0)).unwrap();
    let opts = ParabolicOptions::for_exponent(2.0);
    let exact = |x: &Vector, t: f64| (-PI * PI * t).exp() * (PI * x[0]).sin();
    let mut errors = Vec::new();
    for (n_x, n_t) in [(16, 64), (32, 256)] {
        let grid = SpaceTimeGrid::new(1, n_x, n_t, 0.1, 1.0, 2.0).unwrap();
        let r = solve_fine(&spec, &model, &grid, &opts).unwrap();
        errors.push(r.max_node_error(exact));
    }
    // second order in space, first order in time with Δt ∝ h²
    assert!(errors[1] < 0.3 * errors[0], "{errors:?}");
    assert!(errors[1] < 2e-3);
}

#[test]
fn homogenized_steady_state() {
    // b(ξ) = √3 ξ, so −(√3 u')' = 1 settles at x(1 − x)/(2√3)
    let grid = CellGrid::new(1, 256, 2).unwrap();
    let lattice = Lattice::symmetric(1, 1.0, 0.25).unwrap();
    let table = tabulate_b(&presets::harmonic_1d(), 3.0, lattice, &grid, &SolverOptions::for_exponent(2.0)).unwrap();
    let st = SpaceTimeGrid::new(1, 32, 400, 2.0, 1.0, 3.0).unwrap();
    let r = solve_homogenized(&unit_source(2.0), &table, &st, &ParabolicOptions::for_exponent(2.0)).unwrap();
    let mesh = r.mesh();
    let last = r.final_state();
    let worst = (0..last.len())
        .map(|i| {
            let x = mesh.node_position(i)[0];
            (last[i] - x * (1.0 - x) / (2.0 * 3f64.sqrt())).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn fine_solution_approaches_the_homogenized_one() {
    let cell = CellGrid::new(1, 64, 4).unwrap();
    let lattice = Lattice::symmetric(1, 1.0, 0.125).unwrap();
    let model = presets::harmonic_1d();
    let table = tabulate_b(&model, 3.0, lattice, &cell, &SolverOptions::for_exponent(2.0)).unwrap();
    let opts = ParabolicOptions::for_exponent(2.0);
    let mut gaps = Vec::new();
    for eps in [0.25, 0.125, 0.0625] {
        let n_x = (16.0 / eps) as usize;
        let st = SpaceTimeGrid::new(1, n_x, 200, 0.5, eps, 3.0).unwrap();
        let fine = solve_fine(&unit_source(0.5), &model, &st, &opts).unwrap();
        let hom = solve_homogenized(&unit_source(0.5), &table, &st, &opts).unwrap();
        let gap = fine.final_state().iter().zip(hom.final_state()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn energy_ledger_sums_to_the_balance() {
    let model = presets::plaplace_1d();
    let st = SpaceTimeGrid::new(1, 64, 64, 0.2, 0.25, 3.0).unwrap();
    let r = solve_fine(&unit_source(0.2), &model, &st, &ParabolicOptions::for_exponent(4.0)).unwrap();
    assert_eq!(r.energy_ledger.len(), 64);
    let (mut d, mut l, mut s) = (0.0, 0.0, 0.0);
    for row in &r.energy_ledger {
        d += row.dissipation;
        l += row.l2_half_delta;
        s += row.source_pairing;
    }
    let balance = energy_balance(&r);
    assert!(((d + l - s).abs() - balance).abs() < 1e-12 * (1.0 + d));
}

#[test]
fn constant_model_corrector_is_the_averaged_gradient() {
    let model = presets::constant(1, 3.0, 1.5).unwrap();
    let cell = CellGrid::new(1, 16, 2).unwrap();
    let opts = SolverOptions::for_exponent(3.0);
    let table = tabulate_b(&model, 3.0, Lattice::symmetric(1, 2.0, 0.25).unwrap(), &cell, &opts).unwrap();
    let st = SpaceTimeGrid::new(1, 64, 32, 0.1, 0.125, 3.0).unwrap();
    let popts = ParabolicOptions::for_exponent(3.0);
    let fine = solve_fine(&unit_source(0.1), &model, &st, &popts).unwrap();
    let hom = solve_homogenized(&unit_source(0.1), &table, &st, &popts).unwrap();
    let mut cache = CellSolutionCache::new(model, 3.0, cell, opts, 1e-3).unwrap();
    let corrector = assemble_corrector_field(&hom, &mut cache, &st).unwrap();
    let averaged = mesh_average(&hom.gradient, &st).unwrap();
    let (_, r) = remainder(&fine, &corrector).unwrap();
    let plain = fine.gradient.sub(&averaged).unwrap().lp_norm(3.0);
    assert!((r - plain).abs() < 1e-3 * plain + 1e-9, "{r} vs {plain}");
}
