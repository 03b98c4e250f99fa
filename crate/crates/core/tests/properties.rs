//! Property tests for the structural invariants: exact summation by parts,
//! homogeneity, weak duality along iterates, potential convexity, and
//! persistence round trips.

use proptest::prelude::*;

use lsgrad_core::grid::{
    boundary_mean, build_disk_grid, build_square_grid, conormal, divergence, gradient, trace, tv,
    BoundaryData, BulkField, DualField, Grid,
};
use lsgrad_core::resolvent::{gamma_conjugate, gamma_potential, truncator};
use lsgrad_core::tvmin::{solve_relaxed_dirichlet, SolverOptions};

fn arb_grid() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (2usize..10).prop_map(|n| build_square_grid(n, 1.0).unwrap()),
        (8usize..16).prop_map(|n| build_disk_grid(n, 1.0).unwrap()),
    ]
}

fn fields_for(grid: &Grid) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let nc = grid.n_cells();
    let nf = grid.n_faces();
    (
        prop::collection::vec(-10.0..10.0f64, nc),
        prop::collection::vec(-10.0..10.0f64, nf),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts_holds_to_machine_precision(
        (grid, (u, z)) in arb_grid().prop_flat_map(|g| {
            let f = fields_for(&g);
            (Just(g), f)
        })
    ) {
        let u = BulkField { values: u };
        let z = DualField { values: z };
        let gu = gradient(&grid, &u).unwrap();
        let dz = divergence(&grid, &z).unwrap();
        let tu = trace(&grid, &u).unwrap();
        let nz = conormal(&grid, &z).unwrap();
        let lhs = grid.dot_bulk(&u, &dz) + grid.dot_dual(&gu, &z);
        let rhs = grid.dot_boundary(&tu, &nz);
        let scale = 1.0 + lhs.abs() + rhs.abs() + grid.n_cells() as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn tv_is_absolutely_one_homogeneous(
        (grid, (u, _)) in arb_grid().prop_flat_map(|g| {
            let f = fields_for(&g);
            (Just(g), f)
        }),
        lam in -8.0..8.0f64
    ) {
        let u = BulkField { values: u };
        let t = tv(&grid, &u).unwrap();
        let scaled = BulkField { values: u.values.iter().map(|v| v * lam).collect() };
        let ts = tv(&grid, &scaled).unwrap();
        prop_assert!((ts - lam.abs() * t).abs() <= 1e-12 * (1.0 + t) * (1.0 + lam.abs()));
    }

    #[test]
    fn constant_fields_are_in_every_kernel(grid in arb_grid(), c in -5.0..5.0f64) {
        let u = BulkField::constant(&grid, c);
        prop_assert_eq!(tv(&grid, &u).unwrap(), 0.0);
        let tu = trace(&grid, &u).unwrap();
        prop_assert!((boundary_mean(&grid, &tu).unwrap() - c).abs() <= 1e-12 * (1.0 + c.abs()));
        let z = DualField::from_vector(&grid, [c, -2.0 * c]);
        let d = divergence(&grid, &z).unwrap();
        for v in &d.values {
            prop_assert!(v.abs() <= 1e-11 * (1.0 + c.abs()) / grid.spacing);
        }
    }

    #[test]
    fn gamma_fenchel_young_and_convexity(
        g in -3.0..3.0f64,
        alpha in 0.05..4.0f64,
        t in -6.0..6.0f64,
        q in -1.0..1.0f64,
    ) {
        // Fenchel-Young inequality with equality at t* = (g+q)/alpha
        prop_assert!(q * t <= gamma_potential(g, alpha, t) + gamma_conjugate(g, alpha, q) + 1e-10);
        let ts = (g + q) / alpha;
        let eq = q * ts - gamma_potential(g, alpha, ts) - gamma_conjugate(g, alpha, q);
        prop_assert!(eq.abs() <= 1e-10);
        // convexity by second differences
        let dt = 1e-4;
        let second = gamma_potential(g, alpha, t + dt) + gamma_potential(g, alpha, t - dt)
            - 2.0 * gamma_potential(g, alpha, t);
        prop_assert!(second >= -1e-12);
        // stated derivative
        let slope = (gamma_potential(g, alpha, t + dt) - gamma_potential(g, alpha, t - dt)) / (2.0 * dt);
        prop_assert!((slope + truncator(g - alpha * t)).abs() <= 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // weak duality holds for every iterate, converged or not
    #[test]
    fn weak_duality_at_arbitrary_iteration_counts(
        seed in 0u64..1000,
        iters in 1usize..40,
    ) {
        let grid = build_square_grid(6, 1.0).unwrap();
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = BoundaryData {
            values: (0..grid.n_boundary()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let opts = SolverOptions {
            max_iters: iters * 50,
            tolerance: 0.0,
            ..Default::default()
        };
        let sol = solve_relaxed_dirichlet(&grid, &h, &opts).unwrap();
        prop_assert!(sol.dual_energy <= sol.primal_energy + 1e-9 * grid.perimeter);
        prop_assert!(sol.gap >= -1e-9 * grid.perimeter);
        prop_assert!(sol.z.sup_norm(&grid) <= 1.0 + 1e-12);
    }

    #[test]
    fn field_round_trips(values in prop::collection::vec(-1e6..1e6f64, 0..200)) {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("f.csv");
        lsgrad_core::io::save_field_csv(&csv, &values).unwrap();
        prop_assert_eq!(&lsgrad_core::io::load_field_csv(&csv).unwrap(), &values);
        let bin = dir.path().join("f.bin");
        lsgrad_core::io::save_field_bin(&bin, &values).unwrap();
        let loaded = lsgrad_core::io::load_field_bin(&bin).unwrap();
        prop_assert_eq!(
            values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            loaded.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
