//! The acceptance battery: ten structural criteria, each pinned to fixed
//! grids, data, seeds, and tolerances. `run_criterion` returns a pass/fail
//! record; the `acceptance` test target asserts each one and the `verify`
//! CLI subcommand prints them.

use std::fmt;
use std::time::Instant;

use lsgrad_core::dtn;
use lsgrad_core::evolution::{self, NemytskiiSpec, SourceTerm};
use lsgrad_core::grid::{build_disk_grid, build_square_grid, BoundaryData};
use lsgrad_core::oracle;
use lsgrad_core::plap::{self, PlapOptions};
use lsgrad_core::resolvent;
use lsgrad_core::tvmin::{energy_phi_h, solve_relaxed_dirichlet, SolverOptions};

use crate::recipes::{
    example33_data, example33_energy_quadrature, example33_family, random_boundary, sign_x_data,
};

pub const CRITERIA: usize = 10;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:2} ({}): {} - {} [{:.1}s]",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details,
            self.seconds
        )
    }
}

struct Checks {
    passed: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks {
            passed: true,
            details: Vec::new(),
        }
    }

    fn le(&mut self, label: &str, value: f64, bound: f64) {
        let ok = value <= bound;
        self.passed &= ok;
        self.details.push(format!(
            "{label} {value:.3e} {} {bound:.3e}",
            if ok { "<=" } else { ">" }
        ));
    }

    fn is_true(&mut self, label: &str, ok: bool) {
        self.passed &= ok;
        self.details
            .push(format!("{label}: {}", if ok { "ok" } else { "FAILED" }));
    }

    fn finish(self, id: usize, name: &'static str, t0: Instant) -> CriterionResult {
        CriterionResult {
            id,
            name,
            passed: self.passed,
            details: self.details.join("; "),
            seconds: t0.elapsed().as_secs_f64(),
        }
    }
}

fn opts(tolerance: f64, div_tolerance: f64, max_iters: usize, seed: u64) -> SolverOptions {
    SolverOptions {
        tolerance,
        div_tolerance,
        max_iters,
        seed,
        ..Default::default()
    }
}

/// 1. Constants: phi(c 1) small, J_lambda fixes constants, the semigroup
/// keeps constants for 100 steps.
pub fn criterion_01() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let c = 2.5;
    for grid in [build_square_grid(16, 1.0).unwrap(), build_disk_grid(16, 1.0).unwrap()] {
        let h = BoundaryData::constant(&grid, c);
        let rec = dtn::evaluate(&grid, &h, &SolverOptions::default()).unwrap();
        ck.le("phi(c)", rec.phi.abs(), 1e-8 * c.abs() * grid.perimeter);
        for lambda in [0.1, 0.5, 1.0] {
            let (jc, _) =
                resolvent::resolvent_apply(&grid, &h, lambda, &SolverOptions::default()).unwrap();
            let dev = jc
                .values
                .iter()
                .map(|v| (v - c).abs())
                .fold(0.0, f64::max);
            ck.le(&format!("|J_{lambda}(c) - c|"), dev, 1e-6);
        }
    }
    let grid = build_square_grid(16, 1.0).unwrap();
    let h = BoundaryData::constant(&grid, c);
    let traj = evolution::evolve(
        &grid,
        &h,
        5.0,
        0.05,
        &SourceTerm::Zero,
        &NemytskiiSpec::Zero,
        &SolverOptions::default(),
    )
    .unwrap();
    let dev = traj
        .states
        .iter()
        .flat_map(|s| s.values.iter())
        .map(|v| (v - c).abs())
        .fold(0.0, f64::max);
    ck.is_true("100 steps", traj.diagnostics.len() == 100);
    ck.le("semigroup constancy", dev, 1e-6);
    ck.finish(1, "constants", t0)
}

/// 2. Oracle equivalence on 8x8 grids in the anisotropic mode.
pub fn criterion_02() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_square_grid(8, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    for trial in 0..20u64 {
        let h = random_boundary(&grid, 0xC200 + trial, 1.0);
        let (exact, _) = oracle::coarea_mincut_min_phi(&grid, &h).unwrap();
        let sol =
            oracle::anisotropic_solver_energy(&grid, &h, &opts(1e-8, 1e-8, 600_000, 0)).unwrap();
        all_converged &= sol.converged;
        worst = worst.max((sol.primal_energy - exact).abs() / exact.max(1e-12));
    }
    ck.is_true("20/20 solves converged", all_converged);
    ck.le("max |tvmin - oracle|/oracle", worst, 1e-5);
    ck.finish(2, "oracle equivalence", t0)
}

/// 3. Disk non-uniqueness: the family's energies coincide and match the
/// re-derived closed form; the solver is below their minimum.
pub fn criterion_03() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let golden_closed_form = 20.0 * 2.0_f64.sqrt() / 3.0;
    let lambdas = [-1.0, -0.5, 0.0, 0.5, 1.0];
    // trust gate: the quadrature script must reproduce the closed form
    let mut quad_dev: f64 = 0.0;
    for &lam in &lambdas {
        quad_dev = quad_dev.max((example33_energy_quadrature(lam) - golden_closed_form).abs());
    }
    ck.le("quadrature vs closed form", quad_dev, 1e-9);

    let grid = build_disk_grid(128, 1.0).unwrap();
    let h = example33_data(&grid);
    let energies: Vec<f64> = lambdas
        .iter()
        .map(|&lam| energy_phi_h(&grid, &h, &example33_family(&grid, lam)).unwrap())
        .collect();
    let vmin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ck.le("relative spread", (vmax - vmin) / vmin, 0.005);
    let worst_dev = energies
        .iter()
        .map(|e| (e - golden_closed_form).abs() / golden_closed_form)
        .fold(0.0, f64::max);
    ck.le("family vs golden", worst_dev, 0.03);

    let sol = solve_relaxed_dirichlet(&grid, &h, &opts(2e-3, 1e-6, 300_000, 0)).unwrap();
    ck.is_true("solver converged", sol.converged);
    ck.le("solver energy vs min family", sol.primal_energy, vmin * 1.01);
    ck.le(
        "solver vs golden",
        (sol.primal_energy - golden_closed_form).abs() / golden_closed_form,
        0.03,
    );
    ck.finish(3, "disk non-uniqueness", t0)
}

/// 4. Sign data on the disk against the extrapolated oracle and the chord.
pub fn criterion_04() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_disk_grid(128, 1.0).unwrap();
    let sol =
        solve_relaxed_dirichlet(&grid, &sign_x_data(&grid), &opts(2e-3, 1e-6, 600_000, 0))
            .unwrap();
    ck.is_true("solver converged", sol.converged);
    let g64 = build_disk_grid(64, 1.0).unwrap();
    let g32 = build_disk_grid(32, 1.0).unwrap();
    let (v64, _) = oracle::coarea_mincut_min_phi(&g64, &sign_x_data(&g64)).unwrap();
    let (v32, _) = oracle::coarea_mincut_min_phi(&g32, &sign_x_data(&g32)).unwrap();
    // first-order Richardson step from (n=32, n=64) to n=128
    let extrapolated = v64 + (v64 - v32) / 2.0;
    ck.le(
        "phi vs oracle extrapolation",
        (sol.primal_energy - extrapolated).abs() / extrapolated,
        0.02,
    );
    ck.le(
        "phi vs analytic chord value 4",
        (sol.primal_energy - 4.0).abs() / 4.0,
        0.03,
    );
    ck.finish(4, "sign data", t0)
}

/// 5. Homogeneity of phi and cross-certification of the scaled fields.
pub fn criterion_05() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_square_grid(8, 1.0).unwrap();
    let o = opts(1e-9, 1e-9, 600_000, 0);
    let mut worst_dev: f64 = 0.0;
    let mut worst_cert_excess: f64 = f64::NEG_INFINITY;
    for trial in 0..10u64 {
        let h = random_boundary(&grid, 0x0500 + trial, 1.0);
        let report = dtn::homogeneity_report(&grid, &h, &[0.5, 2.0, 10.0], &o).unwrap();
        for e in &report.entries {
            worst_dev = worst_dev.max(e.deviation / (report.phi_base * e.lambda).max(1e-12));
            // combined tolerance from the two duality gaps
            let base = dtn::evaluate(&grid, &h, &o).unwrap();
            let combined =
                10.0 * (base.solution.gap + base.solution.gap / e.lambda.min(1.0)) + 1e-6;
            let defect = e.cross_certificate.as_ref().unwrap().max_defect();
            worst_cert_excess = worst_cert_excess.max(defect - combined);
        }
    }
    ck.le("max relative |phi(lh) - l phi(h)|", worst_dev, 1e-4);
    ck.le(
        "cross-certificate defect minus combined tolerance",
        worst_cert_excess,
        0.0,
    );
    ck.finish(5, "homogeneity", t0)
}

/// 6. Complete contraction, order preservation, and the trajectory
/// quasi-contraction with a Lipschitz lower-order term.
pub fn criterion_06() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_square_grid(8, 1.0).unwrap();
    let o = opts(1e-9, 1e-9, 600_000, 0);
    let mut worst_contraction: f64 = f64::NEG_INFINITY;
    let mut worst_order: f64 = f64::NEG_INFINITY;
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0600);
    for trial in 0..20u64 {
        let lambda = rng.gen_range(0.1..1.0);
        let g1 = random_boundary(&grid, 0x0610 + 3 * trial, 1.0);
        let g2 = random_boundary(&grid, 0x0611 + 3 * trial, 1.0);
        let (h1, _) = resolvent::resolvent_apply(&grid, &g1, lambda, &o).unwrap();
        let (h2, _) = resolvent::resolvent_apply(&grid, &g2, lambda, &o).unwrap();
        let dh = BoundaryData {
            values: h1.values.iter().zip(&h2.values).map(|(a, b)| a - b).collect(),
        };
        let dg = BoundaryData {
            values: g1.values.iter().zip(&g2.values).map(|(a, b)| a - b).collect(),
        };
        for q in [1.0, 2.0, f64::INFINITY] {
            worst_contraction =
                worst_contraction.max(dh.norm_q(&grid, q) - dg.norm_q(&grid, q));
        }
        // ordered pair
        let bump = random_boundary(&grid, 0x0612 + 3 * trial, 0.5);
        let g_up = BoundaryData {
            values: g1
                .values
                .iter()
                .zip(&bump.values)
                .map(|(a, b)| a + b.abs())
                .collect(),
        };
        let (h_up, _) = resolvent::resolvent_apply(&grid, &g_up, lambda, &o).unwrap();
        for (a, b) in h1.values.iter().zip(&h_up.values) {
            worst_order = worst_order.max(a - b);
        }
    }
    ck.le("resolvent contraction margin (q in 1,2,inf)", worst_contraction, 1e-6);
    ck.le("order preservation margin", worst_order, 1e-6);

    // trajectory quasi-contraction, f = linear(0.5), tau = 0.1, 20 steps
    let omega = 0.5;
    let f = NemytskiiSpec::linear(omega).unwrap();
    let mut worst_traj: f64 = f64::NEG_INFINITY;
    for trial in 0..3u64 {
        let ha = random_boundary(&grid, 0x0620 + 4 * trial, 1.0);
        let hb = random_boundary(&grid, 0x0621 + 4 * trial, 1.0);
        let sa = SourceTerm::Constant(random_boundary(&grid, 0x0622 + 4 * trial, 0.5));
        let sb = SourceTerm::Constant(random_boundary(&grid, 0x0623 + 4 * trial, 0.5));
        let ta = evolution::evolve(&grid, &ha, 2.0, 0.1, &sa, &f, &o).unwrap();
        let tb = evolution::evolve(&grid, &hb, 2.0, 0.1, &sb, &f, &o).unwrap();
        for q in [1.0, 2.0, f64::INFINITY] {
            for plus in [false, true] {
                worst_traj = worst_traj.max(evolution::quasi_contraction_margin(
                    &grid, &ta, &tb, &sa, &sb, omega, q, plus,
                ));
            }
        }
    }
    ck.le("trajectory quasi-contraction margin", worst_traj, 1e-5);
    ck.finish(6, "complete contraction & order", t0)
}

/// 7. Semigroup laws for the pure flow from sign data.
pub fn criterion_07() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_disk_grid(64, 1.0).unwrap();
    let h0 = sign_x_data(&grid);
    let o = opts(1e-7, 1e-8, 400_000, 0);
    let traj = evolution::evolve(
        &grid,
        &h0,
        5.0,
        0.05,
        &SourceTerm::Zero,
        &NemytskiiSpec::Zero,
        &o,
    )
    .unwrap();
    ck.is_true("all steps converged", traj.all_converged);
    let report =
        evolution::diagnostics_report(&traj, &h0, &grid, &NemytskiiSpec::Zero, &SourceTerm::Zero)
            .unwrap();
    ck.le("relative mass drift", report.mass_drift_rel, 1e-4);
    ck.le(
        "phi increase",
        report.phi_increase_max,
        1e-6 * (1.0 + traj.phi0_primal),
    );
    ck.le("phi(h(t)) t / (2 ||h0||_2^2)", report.phi_time_bound_ratio, 1.05);
    ck.le("|step_g| t / (2 ||h0||_inf)", report.sup_flux_ratio, 1.05);
    ck.le("long-time ||h(T) - mean||_1 ratio", report.long_time_l1_ratio, 0.05);
    ck.finish(7, "semigroup laws", t0)
}

/// 8. Discrete energy inequality along a pure and a forced trajectory.
pub fn criterion_08() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_disk_grid(32, 1.0).unwrap();
    let o = opts(1e-8, 1e-9, 600_000, 0);

    let h0 = sign_x_data(&grid);
    let traj = evolution::evolve(
        &grid,
        &h0,
        2.0,
        0.05,
        &SourceTerm::Zero,
        &NemytskiiSpec::Zero,
        &o,
    )
    .unwrap();
    let pure =
        evolution::diagnostics_report(&traj, &h0, &grid, &NemytskiiSpec::Zero, &SourceTerm::Zero)
            .unwrap();
    let scale = 1.0 + traj.phi0_primal;
    ck.le("pure-flow energy margin", pure.energy_inequality_margin, 1e-5 * scale);

    let h1 = random_boundary(&grid, 0x0801, 1.0);
    let f = NemytskiiSpec::linear(0.5).unwrap();
    let source = SourceTerm::Constant(random_boundary(&grid, 0x0802, 0.5));
    let traj2 = evolution::evolve(&grid, &h1, 2.0, 0.05, &source, &f, &o).unwrap();
    let forced = evolution::diagnostics_report(&traj2, &h1, &grid, &f, &source).unwrap();
    let scale2 = 1.0 + traj2.phi0_primal + h1.l2_sq(&grid);
    ck.le(
        "forced-flow energy margin",
        forced.energy_inequality_margin,
        1e-5 * scale2,
    );
    ck.is_true("both trajectories converged", traj.all_converged && traj2.all_converged);
    ck.finish(8, "energy inequality", t0)
}

/// 9. p-continuation toward the TV Robin solution.
pub fn criterion_09() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_square_grid(16, 1.0).unwrap();
    let g = random_boundary(&grid, 0x0900, 1.0);
    let report = plap::continuation(
        &grid,
        &g,
        1.0,
        &[1.8, 1.4, 1.2, 1.1, 1.05],
        &PlapOptions::default(),
        &opts(1e-8, 1e-8, 600_000, 0),
    )
    .unwrap();
    ck.is_true("TV reference converged", report.tv_converged);
    ck.is_true(
        "all p-solves converged",
        report.entries.iter().all(|e| e.converged),
    );
    let d: Vec<f64> = report.entries.iter().map(|e| e.distance_l1).collect();
    let mut monotone = true;
    for w in d.windows(2) {
        monotone &= w[1] <= w[0] * 1.10;
    }
    ck.is_true("distances nonincreasing (10% slack)", monotone);
    ck.le("final distance vs first", d[d.len() - 1], 0.5 * d[0]);
    ck.finish(9, "p-continuation", t0)
}

/// 10. Stability probe: the energy is 1-Lipschitz along h_n -> h.
pub fn criterion_10() -> CriterionResult {
    let t0 = Instant::now();
    let mut ck = Checks::new();
    let grid = build_disk_grid(32, 1.0).unwrap();
    let tol = 1e-7;
    let o = opts(tol, 1e-8, 600_000, 0);
    let h = random_boundary(&grid, 0x1000, 1.0);
    let rho = random_boundary(&grid, 0x1001, 1.0);
    let perturbed: Vec<BoundaryData> = [1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|n| BoundaryData {
            values: h
                .values
                .iter()
                .zip(&rho.values)
                .map(|(a, b)| a + b / n)
                .collect(),
        })
        .collect();
    let report = dtn::stability_probe(&grid, &h, &perturbed, &o).unwrap();
    let tol_abs = tol * (1.0 + h.linf()) * grid.perimeter;
    let mut worst: f64 = f64::NEG_INFINITY;
    for e in &report.entries {
        worst = worst.max(e.phi_deviation - e.distance_l1 - 2.0 * tol_abs);
    }
    ck.le("|phi(h_n) - phi(h)| - ||h_n - h||_1 - 2 tol", worst, 0.0);
    let deviations: Vec<f64> = report.entries.iter().map(|e| e.phi_deviation).collect();
    ck.is_true(
        "deviations vanish with the perturbation",
        deviations[4] <= deviations[0].max(1e-9),
    );
    ck.finish(10, "stability probe", t0)
}

pub fn run_criterion(id: usize) -> Option<CriterionResult> {
    Some(match id {
        1 => criterion_01(),
        2 => criterion_02(),
        3 => criterion_03(),
        4 => criterion_04(),
        5 => criterion_05(),
        6 => criterion_06(),
        7 => criterion_07(),
        8 => criterion_08(),
        9 => criterion_09(),
        10 => criterion_10(),
        _ => return None,
    })
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=CRITERIA).map(|id| run_criterion(id).unwrap()).collect()
}
