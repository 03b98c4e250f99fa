//! Registered experiment recipes. Every recipe is a pure function of its
//! config: all randomness is seeded, aggregation is ordered, and a rerun
//! reproduces the output directory bit for bit (see `hash_dir`).

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use lsgrad_core::dtn;
use lsgrad_core::error::{Error, Result};
use lsgrad_core::evolution::{self, NemytskiiSpec, SourceTerm};
use lsgrad_core::grid::{boundary_integral, BoundaryData, BulkField, Grid};
use lsgrad_core::io::save_json;
use lsgrad_core::oracle;
use lsgrad_core::plap::{self, PlapOptions};
use lsgrad_core::tvmin::{energy_phi_h, solve_relaxed_dirichlet};

use crate::config::ExperimentConfig;
use crate::plotdata::{emit_plot_data, PlotData, PlotSeries};
use crate::svg::render_line_plot;

pub const RECIPES: [&str; 7] = [
    "disk_nonuniqueness",
    "sign_data",
    "semigroup_decay",
    "comparison_pairs",
    "plap_convergence",
    "stability_sequence",
    "extinction_probe",
];

/// Boundary data of the non-uniqueness example: cos(2 theta) + 1 where
/// positive, cos(2 theta) - 1 where negative, sampled at face midpoints.
pub fn example33_data(grid: &Grid) -> BoundaryData {
    BoundaryData::from_fn(grid, |x, y| {
        let c2 = (2.0 * y.atan2(x)).cos();
        if c2 > 0.0 {
            c2 + 1.0
        } else {
            c2 - 1.0
        }
    })
}

/// The one-parameter family of bulk extensions that all attain the
/// boundary data above: 2x^2 on the side caps, -2y^2 on the top and bottom
/// caps, the constant lambda on the center square.
pub fn example33_family(grid: &Grid, lambda: f64) -> BulkField {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    BulkField::from_fn(grid, |x, y| {
        if x.abs() > s && y.abs() < s {
            2.0 * x * x
        } else if x.abs() < s && y.abs() < s {
            lambda
        } else {
            -2.0 * y * y
        }
    })
}

/// Closed-form energy of the family, recomputed by quadrature: the
/// absolutely continuous part integrates 4|x| (resp. 4|y|) over the four
/// caps by Simpson's rule, the jump part is 2 sqrt(2) (|1-l| + |1+l|).
/// Constant in lambda on [-1, 1]; equals 20 sqrt(2) / 3.
pub fn example33_energy_quadrature(lambda: f64) -> f64 {
    // one cap: int_{sqrt(2)/2}^{1} 4x * 2 sqrt(1-x^2) dx; substituting
    // x = sin(theta) keeps the integrand smooth for Simpson's rule
    let a = std::f64::consts::FRAC_PI_4;
    let b = std::f64::consts::FRAC_PI_2;
    let f = |t: f64| 8.0 * t.sin() * t.cos() * t.cos();
    let n = 20_000;
    let hstep = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * hstep);
    }
    let cap = s * hstep / 3.0;
    let jump = 2.0 * 2.0_f64.sqrt() * ((1.0 - lambda).abs() + (1.0 + lambda).abs());
    4.0 * cap + jump
}

/// sign(x) data at face midpoints (0 on the measure-zero tie set).
pub fn sign_x_data(grid: &Grid) -> BoundaryData {
    BoundaryData::from_fn(grid, |x, _| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

pub fn random_boundary(grid: &Grid, seed: u64, amp: f64) -> BoundaryData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BoundaryData {
        values: (0..grid.n_boundary())
            .map(|_| rng.gen_range(-amp..amp))
            .collect(),
    }
}

/// Run a registered recipe into `out_dir`; writes a config snapshot, result
/// JSON/CSV files, plot data, and a directory hash.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    crate::config::save_config(&out_dir.join("config.toml"), config)?;
    match config.recipe.as_str() {
        "disk_nonuniqueness" => disk_nonuniqueness(config, out_dir)?,
        "sign_data" => sign_data(config, out_dir)?,
        "semigroup_decay" => semigroup_decay(config, out_dir)?,
        "comparison_pairs" => comparison_pairs(config, out_dir)?,
        "plap_convergence" => plap_convergence(config, out_dir)?,
        "stability_sequence" => stability_sequence(config, out_dir)?,
        "extinction_probe" => extinction_probe(config, out_dir)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown recipe '{other}'; registered: {}",
                RECIPES.join(", ")
            )))
        }
    }
    let hash = crate::hash_dir(out_dir)?;
    std::fs::write(out_dir.join("hash.txt"), hash)?;
    Ok(())
}

fn emit(dir: &Path, stem: &str, plot: &PlotData, svg: bool) -> Result<()> {
    emit_plot_data(dir, stem, plot)?;
    if svg {
        std::fs::write(dir.join(format!("{stem}.svg")), render_line_plot(plot))?;
    }
    Ok(())
}

fn disk_grid_from(config: &ExperimentConfig, default_n: usize) -> Result<Grid> {
    let mut gc = config.grid.clone();
    if gc.shape != "disk" && gc.shape != "square" {
        gc.shape = "disk".to_string();
    }
    if config.params.contains_key("n") {
        gc.n = config.param_usize("n", default_n)?;
    }
    gc.build()
}

fn disk_nonuniqueness(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let grid = disk_grid_from(config, 128)?;
    let h = example33_data(&grid);
    let lambdas = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let energies: Vec<f64> = lambdas
        .par_iter()
        .map(|&lam| energy_phi_h(&grid, &h, &example33_family(&grid, lam)))
        .collect::<Result<Vec<_>>>()?;
    let vmin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let opts = config.solver.options(config.seed);
    let sol = solve_relaxed_dirichlet(&grid, &h, &opts)?;
    let golden = example33_energy_quadrature(0.0);

    let mut table = String::from("lambda,phi\n");
    for (lam, e) in lambdas.iter().zip(&energies) {
        table.push_str(&format!("{lam},{e:.16e}\n"));
    }
    std::fs::write(dir.join("family_energies.csv"), table)?;
    save_json(
        &dir.join("results.json"),
        &json!({
            "lambdas": lambdas,
            "energies": energies,
            "relative_spread": (vmax - vmin) / vmin,
            "solver_energy": sol.primal_energy,
            "solver_gap": sol.gap,
            "solver_converged": sol.converged,
            "quadrature_golden": golden,
        }),
    )?;
    emit(
        dir,
        "family_energy",
        &PlotData {
            title: "Relaxed energy of the bulk family".into(),
            xlabel: "lambda".into(),
            ylabel: "Phi_h(u^lambda)".into(),
            logy: false,
            series: vec![PlotSeries::new("Phi", lambdas.to_vec(), energies)],
        },
        config.svg,
    )
}

fn sign_data(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let grid = disk_grid_from(config, 128)?;
    let h = sign_x_data(&grid);
    let opts = config.solver.options(config.seed);
    let record = dtn::evaluate(&grid, &h, &opts)?;

    // oracle extrapolation from the two coarser desk-scale grids
    let n = match grid.shape {
        lsgrad_core::grid::Shape::Disk { n, .. } => n,
        lsgrad_core::grid::Shape::Square { n, .. } => n,
    };
    let radius = config.grid.size;
    let (coarse, fine) = (n / 4, n / 2);
    let g_fine = lsgrad_core::grid::build_disk_grid(fine, radius)?;
    let g_coarse = lsgrad_core::grid::build_disk_grid(coarse, radius)?;
    let (v_fine, _) = oracle::coarea_mincut_min_phi(&g_fine, &sign_x_data(&g_fine))?;
    let (v_coarse, _) = oracle::coarea_mincut_min_phi(&g_coarse, &sign_x_data(&g_coarse))?;
    let extrapolated = v_fine + (v_fine - v_coarse) / 2.0;

    save_json(
        &dir.join("results.json"),
        &json!({
            "phi": record.phi,
            "primal_energy": record.solution.primal_energy,
            "analytic_chord_value": 4.0,
            "oracle_coarse": {"n": coarse, "value": v_coarse},
            "oracle_fine": {"n": fine, "value": v_fine},
            "oracle_extrapolated": extrapolated,
            "deviation_vs_extrapolated": (record.phi - extrapolated).abs() / extrapolated,
            "deviation_vs_analytic": (record.phi - 4.0).abs() / 4.0,
            "converged": record.solution.converged,
        }),
    )?;
    // cross-section of the bulk solution along y ~ 0
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for (c, cell) in grid.cells.iter().enumerate() {
        if cell.center[1].abs() < grid.spacing {
            xs.push(cell.center[0]);
            us.push(record.solution.u.values[c]);
        }
    }
    emit(
        dir,
        "midline_profile",
        &PlotData {
            title: "Bulk solution along the horizontal midline".into(),
            xlabel: "x".into(),
            ylabel: "u".into(),
            logy: false,
            series: vec![PlotSeries::new("u", xs, us)],
        },
        config.svg,
    )
}

fn semigroup_decay(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let grid = disk_grid_from(config, 64)?;
    let h0 = sign_x_data(&grid);
    let tau = config.param_f64("tau", 0.05)?;
    let t_end = config.param_f64("t_end", 5.0)?;
    let opts = config.solver.options(config.seed);
    let traj = evolution::evolve(
        &grid,
        &h0,
        t_end,
        tau,
        &SourceTerm::Zero,
        &NemytskiiSpec::Zero,
        &opts,
    )?;
    let report =
        evolution::diagnostics_report(&traj, &h0, &grid, &NemytskiiSpec::Zero, &SourceTerm::Zero)?;

    let times: Vec<f64> = traj.times[1..].to_vec();
    let phi: Vec<f64> = traj.diagnostics.iter().map(|d| d.phi).collect();
    let mass: Vec<f64> = traj.diagnostics.iter().map(|d| d.mass).collect();
    let mean0 = boundary_integral(&grid, &h0)? / grid.perimeter;
    let l1dev: Vec<f64> = traj.states[1..]
        .iter()
        .map(|s| {
            BoundaryData {
                values: s.values.iter().map(|v| v - mean0).collect(),
            }
            .l1(&grid)
        })
        .collect();

    for (stem, ylabel, data) in [
        ("phi_decay", "phi(h(t))", &phi),
        ("mass", "mass(t)", &mass),
        ("l1_deviation", "||h(t) - mean||_1", &l1dev),
    ] {
        emit(
            dir,
            stem,
            &PlotData {
                title: format!("{ylabel} along the trajectory"),
                xlabel: "t".into(),
                ylabel: ylabel.into(),
                logy: false,
                series: vec![PlotSeries::new(stem, times.clone(), data.clone())],
            },
            config.svg,
        )?;
    }
    save_json(
        &dir.join("results.json"),
        &json!({
            "tau": tau,
            "t_end": t_end,
            "diagnostics": report,
            "all_converged": traj.all_converged,
        }),
    )?;
    Ok(())
}

fn comparison_pairs(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let grid = disk_grid_from(config, 32)?;
    let tau = config.param_f64("tau", 0.1)?;
    let t_end = config.param_f64("t_end", 2.0)?;
    let omega = config.param_f64("omega", 0.5)?;
    let f = if omega > 0.0 {
        NemytskiiSpec::linear(omega)?
    } else {
        NemytskiiSpec::Zero
    };
    let lower = random_boundary(&grid, config.seed.wrapping_add(1), 1.0);
    let gap = random_boundary(&grid, config.seed.wrapping_add(2), 0.5);
    let upper = BoundaryData {
        values: lower
            .values
            .iter()
            .zip(&gap.values)
            .map(|(a, b)| a + b.abs())
            .collect(),
    };
    let opts = config.solver.options(config.seed);
    let run = |h0: &BoundaryData| {
        evolution::evolve(&grid, h0, t_end, tau, &SourceTerm::Zero, &f, &opts)
    };
    let ta = run(&lower)?;
    let tb = run(&upper)?;
    let mut order_margin = Vec::new();
    for k in 0..ta.states.len() {
        let m = ta.states[k]
            .values
            .iter()
            .zip(&tb.states[k].values)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        order_margin.push(m);
    }
    let contraction: Vec<(String, f64)> = [1.0, 2.0, f64::INFINITY]
        .iter()
        .map(|&q| {
            (
                format!("q{q}"),
                evolution::quasi_contraction_margin(
                    &grid,
                    &ta,
                    &tb,
                    &SourceTerm::Zero,
                    &SourceTerm::Zero,
                    omega,
                    q,
                    false,
                ),
            )
        })
        .collect();
    emit(
        dir,
        "order_margin",
        &PlotData {
            title: "max (h_lower - h_upper) along time".into(),
            xlabel: "t".into(),
            ylabel: "margin".into(),
            logy: false,
            series: vec![PlotSeries::new("margin", ta.times.clone(), order_margin.clone())],
        },
        config.svg,
    )?;
    save_json(
        &dir.join("results.json"),
        &json!({
            "omega": omega,
            "max_order_margin": order_margin.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            "quasi_contraction_margins": contraction,
            "all_converged": ta.all_converged && tb.all_converged,
        }),
    )?;
    Ok(())
}

fn plap_convergence(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut gc = config.grid.clone();
    if gc.shape == "disk" && !config.params.contains_key("n") {
        gc.shape = "square".to_string();
        gc.n = 16;
    }
    let grid = gc.build()?;
    let g = random_boundary(&grid, config.seed.wrapping_add(7), 1.0);
    let alpha = config.param_f64("alpha", 1.0)?;
    let schedule = [1.8, 1.4, 1.2, 1.1, 1.05];
    let report = plap::continuation(
        &grid,
        &g,
        alpha,
        &schedule,
        &PlapOptions::default(),
        &config.solver.options(config.seed),
    )?;
    let ps: Vec<f64> = report.entries.iter().map(|e| e.p).collect();
    let dist: Vec<f64> = report.entries.iter().map(|e| e.distance_l1).collect();
    let flux: Vec<f64> = report.entries.iter().map(|e| e.flux_gap_l1).collect();
    emit(
        dir,
        "continuation_distance",
        &PlotData {
            title: "Distance to the TV Robin solution as p -> 1".into(),
            xlabel: "p".into(),
            ylabel: "||u_p - u_TV||_1 / area".into(),
            logy: true,
            series: vec![
                PlotSeries::new("bulk distance", ps.clone(), dist),
                PlotSeries::new("flux gap", ps, flux),
            ],
        },
        config.svg,
    )?;
    save_json(&dir.join("results.json"), &report)?;
    Ok(())
}

fn stability_sequence(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let grid = disk_grid_from(config, 32)?;
    let h = random_boundary(&grid, config.seed.wrapping_add(11), 1.0);
    let rho = random_boundary(&grid, config.seed.wrapping_add(12), 1.0);
    let ns = [1.0, 2.0, 4.0, 8.0, 16.0];
    let perturbed: Vec<BoundaryData> = ns
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
    let opts = config.solver.options(config.seed);
    let report = dtn::stability_probe(&grid, &h, &perturbed, &opts)?;
    let dev: Vec<f64> = report.entries.iter().map(|e| e.phi_deviation).collect();
    let bound: Vec<f64> = report.entries.iter().map(|e| e.distance_l1).collect();
    emit(
        dir,
        "stability",
        &PlotData {
            title: "Energy deviation under shrinking perturbations".into(),
            xlabel: "n".into(),
            ylabel: "|phi(h_n) - phi(h)|".into(),
            logy: true,
            series: vec![
                PlotSeries::new("deviation", ns.to_vec(), dev),
                PlotSeries::new("l1 bound", ns.to_vec(), bound),
            ],
        },
        config.svg,
    )?;
    save_json(&dir.join("results.json"), &report)?;
    Ok(())
}

#[derive(Serialize)]
struct ExtinctionResult {
    threshold: f64,
    extinction_time: Option<f64>,
    final_linf_deviation: f64,
    t_max: f64,
}

fn extinction_probe(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let grid = disk_grid_from(config, 32)?;
    let h0 = sign_x_data(&grid);
    let tau = config.param_f64("tau", 0.05)?;
    let t_max = config.param_f64("t_max", 10.0)?;
    let threshold = config.param_f64("threshold", 1e-4)?;
    let opts = config.solver.options(config.seed);
    let traj = evolution::evolve(
        &grid,
        &h0,
        t_max,
        tau,
        &SourceTerm::Zero,
        &NemytskiiSpec::Zero,
        &opts,
    )?;
    let mean0 = boundary_integral(&grid, &h0)? / grid.perimeter;
    let mut extinction_time = None;
    let mut devs = Vec::new();
    for (k, state) in traj.states.iter().enumerate() {
        let dev = state
            .values
            .iter()
            .map(|v| (v - mean0).abs())
            .fold(0.0, f64::max);
        devs.push(dev);
        if extinction_time.is_none() && dev <= threshold {
            extinction_time = Some(traj.times[k]);
        }
    }
    emit(
        dir,
        "extinction",
        &PlotData {
            title: "Sup-norm deviation from the conserved mean".into(),
            xlabel: "t".into(),
            ylabel: "||h(t) - mean||_inf".into(),
            logy: true,
            series: vec![PlotSeries::new("deviation", traj.times.clone(), devs.clone())],
        },
        config.svg,
    )?;
    save_json(
        &dir.join("results.json"),
        &ExtinctionResult {
            threshold,
            extinction_time,
            final_linf_deviation: *devs.last().unwrap(),
            t_max,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_reproduces_the_closed_form() {
        let golden = 20.0 * 2.0_f64.sqrt() / 3.0;
        for lam in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let q = example33_energy_quadrature(lam);
            assert!((q - golden).abs() < 1e-10, "lambda {lam}: {q} vs {golden}");
        }
    }

    #[test]
    fn unknown_recipe_is_an_invalid_argument() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::for_recipe("nope");
        let err = run_experiment(&cfg, dir.path()).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn stability_sequence_runs_small() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::for_recipe("stability_sequence");
        cfg.grid.shape = "disk".into();
        cfg.grid.n = 16;
        cfg.solver.tolerance = 1e-6;
        run_experiment(&cfg, dir.path()).unwrap();
        assert!(dir.path().join("results.json").exists());
        assert!(dir.path().join("hash.txt").exists());
        assert!(dir.path().join("stability.meta.json").exists());
    }

    #[test]
    fn extinction_probe_reports_time_or_not_reached() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::for_recipe("extinction_probe");
        cfg.grid.n = 16;
        cfg.params.insert("t_max".into(), toml::Value::Float(3.0));
        cfg.params.insert("tau".into(), toml::Value::Float(0.1));
        run_experiment(&cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
        assert!(text.contains("extinction_time"));
    }

    #[test]
    fn reruns_hash_identically() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::for_recipe("stability_sequence");
        cfg.grid.shape = "square".into();
        cfg.grid.n = 6;
        cfg.seed = 9;
        run_experiment(&cfg, dir_a.path()).unwrap();
        run_experiment(&cfg, dir_b.path()).unwrap();
        let ha = std::fs::read_to_string(dir_a.path().join("hash.txt")).unwrap();
        let hb = std::fs::read_to_string(dir_b.path().join("hash.txt")).unwrap();
        assert_eq!(ha, hb);
    }
}
