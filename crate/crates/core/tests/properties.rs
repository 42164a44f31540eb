use homog_core::effective::provenance;
use homog_core::presets;
use homog_core::{
    effective_flux, eval_flux, mesh_average, CellGrid, DiscreteField, Flux, FluxTable, Lattice, SolverOptions, SpaceTimeGrid,
    Vector,
};
use proptest::prelude::*;

fn field(dim: usize, n_x: usize, n_t: usize, values: &[f64]) -> DiscreteField {
    let grid = SpaceTimeGrid::new(dim, n_x, n_t, 1.0, 1.0, 2.0).unwrap();
    let n = n_t * grid.n_qp() * dim;
    let v: Vec<f64> = values.iter().cycle().take(n).copied().collect();
    DiscreteField::new(grid, v).unwrap()
}

fn power_table(dim: usize, p: f64, radius: f64, spacing: f64) -> FluxTable {
    let lattice = Lattice::symmetric(dim, radius, spacing).unwrap();
    let values = (0..lattice.len())
        .map(|k| {
            let xi = lattice.node(k);
            let r = xi.norm();
            if r == 0.0 {
                xi
            } else {
                xi.scale(r.powf(p - 2.0))
            }
        })
        .collect();
    let grid = CellGrid::new(dim, 8, 2).unwrap();
    FluxTable::from_values(3.0, p, lattice, provenance(3.0, &grid, &SolverOptions::for_exponent(p)).unwrap(), values).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn xi_strategy() -> impl Strategy<Value = (f64, f64)> {
    (-2.0f64..2.0, -2.0f64..2.0)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn averaging_never_increases_lp_norm(
        dim in 1usize..=2,
        p in 1.05f64..6.0,
        level in 0u32..5,
        n_t in 2usize..20,
        values in prop::collection::vec(-5.0f64..5.0, 8..64),
    ) {
        let n_x = if dim == 1 { 64 } else { 16 };
        let phi = field(dim, n_x, n_t, &values);
        let eps = 0.5f64.powi(level as i32 + 1).max(1.0 / n_x as f64);
        let grid = phi.grid().with_epsilon(eps).unwrap();
        let avg = mesh_average(&phi, &grid).unwrap();
        prop_assert!(avg.lp_norm_pow(p) <= phi.lp_norm_pow(p));
    }

    #[test]
    fn averaging_is_idempotent(
        dim in 1usize..=2,
        level in 0u32..4,
        n_t in 2usize..20,
        values in prop::collection::vec(-5.0f64..5.0, 8..64),
    ) {
        let phi = field(dim, 32, n_t, &values);
        let grid = phi.grid().with_epsilon(0.5f64.powi(level as i32 + 1)).unwrap();
        let once = mesh_average(&phi, &grid).unwrap();
        let twice = mesh_average(&once, &grid).unwrap();
        prop_assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn preset_fluxes_are_strongly_monotone(
        which in 0usize..7,
        a in xi_strategy(),
        b in xi_strategy(),
        y in (0.0f64..1.0, 0.0f64..1.0),
        t in 0.0f64..1.0,
    ) {
        let (_, model, grid) = presets::builtin().swap_remove(which);
        let c = *model.constants();
        let pick = |v: (f64, f64)| if grid.dim == 1 { Vector::scalar(v.0) } else { Vector::from_slice(&[v.0, v.1]) };
        let (x1, x2, yy) = (pick(a), pick(b), pick(y));
        let d = x1 - x2;
        let a1 = eval_flux(&model, &yy, t, &x1).unwrap();
        let a2 = eval_flux(&model, &yy, t, &x2).unwrap();
        prop_assert!((a1 - a2).dot(&d) >= c.c2 * d.norm().powf(c.p) * (1.0 - 1e-12) - 1e-14);
    }

    #[test]
    fn table_returns_nodes_exactly(dim in 1usize..=2, k in 0usize..1000, p in 1.5f64..5.0) {
        let table = power_table(dim, p, 1.0, 0.25);
        let k = k % table.values.len();
        prop_assert_eq!(table.eval(&table.lattice.node(k)).unwrap(), table.values[k]);
    }

    #[test]
    fn table_reproduces_affine_fluxes(a in xi_strategy(), s in 0.1f64..3.0) {
        // multilinear interpolation is exact on b(ξ) = s ξ
        let table = power_table(2, 2.0, 2.0, 0.5);
        let table = FluxTable::from_values(table.mu, table.p, table.lattice.clone(), table.provenance,
            table.values.iter().map(|v| v.scale(s)).collect()).unwrap();
        let xi = Vector::from_slice(&[a.0, a.1]);
        let b = table.eval(&xi).unwrap();
        prop_assert!((b - xi.scale(s)).norm() < 1e-12);
    }

    #[test]
    fn table_rejects_points_outside_the_box(v in 2.01f64..10.0, sign in prop::bool::ANY) {
        let table = power_table(1, 3.0, 2.0, 0.5);
        let xi = Vector::scalar(if sign { v } else { -v });
        prop_assert!(table.eval(&xi).is_err());
    }

    #[test]
    fn table_of_monotone_values_is_monotone(a in xi_strategy(), b in xi_strategy()) {
        let table = power_table(1, 3.0, 2.0, 0.125);
        let (x1, x2) = (Vector::scalar(a.0), Vector::scalar(b.0));
        let d = (table.eval(&x1).unwrap() - table.eval(&x2).unwrap()).dot(&(x1 - x2));
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn lattice_indices_round_trip(dim in 1usize..=2, k in 0usize..10_000) {
        let lattice = Lattice::symmetric(dim, 1.5, 0.25).unwrap();
        let k = k % lattice.len();
        let idx = lattice.multi_index(k);
        prop_assert_eq!(lattice.linear_index(&idx[..dim]), k);
        prop_assert!(lattice.contains(&lattice.node(k)));
    }

    #[test]
    fn fourier_stays_within_its_bounds(x in 0.0f64..1.0, t in -3.0f64..3.0) {
        let c = homog_core::Fourier::constant(1.5)
            .with_term(&[1.0], 0.0, 0.5, 0.1)
            .with_term(&[2.0], 1.0, 0.25, 0.0);
        let (lo, hi) = c.bounds();
        let v = c.eval(&[x], t);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn effective_flux_is_odd_and_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0, mu in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let model = presets::plaplace_1d();
        let grid = CellGrid::new(1, 16, 4).unwrap();
        let opts = SolverOptions::for_exponent(4.0);
        let ba = effective_flux(&model, mu, &Vector::scalar(a), &grid, &opts).unwrap().b;
        let bneg = effective_flux(&model, mu, &Vector::scalar(-a), &grid, &opts).unwrap().b;
        let bb = effective_flux(&model, mu, &Vector::scalar(b), &grid, &opts).unwrap().b;
        prop_assert!((ba + bneg).norm() <= 1e-8 * (1.0 + ba.norm()));
        let c2 = model.constants().c2;
        prop_assert!((ba - bb)[0] * (a - b) >= 0.9 * c2 * (a - b).abs().powf(4.0) - 1e-9);
    }

    #[test]
    fn cell_mean_identities(x in -2.0f64..2.0, y in -2.0f64..2.0, mu in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let model = presets::plaplace_2d();
        let grid = CellGrid::new(2, 8, 4).unwrap();
        let xi = Vector::from_slice(&[x, y]);
        let s = effective_flux(&model, mu, &xi, &grid, &SolverOptions::for_exponent(3.0)).unwrap();
        prop_assert!(s.mean_v() <= 1e-12);
        prop_assert!((s.mean_p() - xi).norm() <= 1e-6);
        prop_assert!(homog_core::energy_identity_check(&s, &model) <= 1e-6);
        prop_assert!(s.b.dim() == 2 && model.dim() == 2);
    }
}
