//! lsgrad-dtn: command-line front door for the least-gradient DtN lab.
//!
//! Exit codes: 0 success, 1 usage/configuration errors, 2 solver
//! non-convergence (or failed verification).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lsgrad_core::dtn;
use lsgrad_core::error::{Error, Result};
use lsgrad_core::evolution::{self, NemytskiiSpec, SourceTerm};
use lsgrad_core::grid::{build_disk_grid, build_square_grid, BoundaryData, Grid};
use lsgrad_core::io;
use lsgrad_core::oracle;
use lsgrad_core::plap::{self, PlapOptions};
use lsgrad_core::resolvent;
use lsgrad_core::tvmin::{solve_relaxed_dirichlet, SolverOptions};

use lsgrad_lab::config::{load_config, ExperimentConfig};
use lsgrad_lab::plotdata::{emit_plot_data, PlotData, PlotSeries};
use lsgrad_lab::recipes::run_experiment;
use lsgrad_lab::verify;

#[derive(Parser)]
#[command(name = "lsgrad-dtn", version, about = "Discrete laboratory for the 1-Laplacian Dirichlet-to-Neumann operator")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for solver initialization and experiment randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative duality-gap tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grid and save it as grid.json.
    Grid {
        /// square or disk.
        #[arg(long)]
        shape: String,
        /// Cells per side.
        #[arg(long)]
        n: usize,
        /// Side length (square) or radius (disk).
        #[arg(long, default_value_t = 1.0)]
        size: f64,
    },
    /// Solve the relaxed Dirichlet problem for boundary data h.
    Solve {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        h: PathBuf,
    },
    /// Dirichlet-to-Neumann operations.
    Dtn {
        #[command(subcommand)]
        cmd: DtnCmd,
    },
    /// Apply the resolvent (I + lambda Lambda)^-1 to g.
    Resolvent {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Implicit-Euler evolution of the boundary semigroup.
    Evolve {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        h0: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, name = "t-end")]
        t_end: f64,
        /// zero | linear:OMEGA | table:FILE
        #[arg(long, default_value = "zero")]
        f: String,
        /// Constant-in-time source data (CSV).
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Regularized p-Laplace Robin solves and the continuation p -> 1.
    Plap(PlapArgs),
    /// Exact coarea/min-cut value of the relaxed problem (desk scale).
    Oracle {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        h: PathBuf,
    },
    /// Run a registered experiment recipe.
    Experiment {
        /// TOML config file.
        #[arg(long, conflicts_with = "recipe")]
        config: Option<PathBuf>,
        /// Recipe name with default configuration.
        #[arg(long)]
        recipe: Option<String>,
        /// Override the grid resolution.
        #[arg(long)]
        n: Option<usize>,
        /// Also render SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Run the acceptance criteria and print one line per criterion.
    Verify {
        /// Run a single criterion.
        #[arg(long)]
        criterion: Option<usize>,
    },
}

#[derive(Subcommand)]
enum DtnCmd {
    /// Evaluate the operator: g = [z, nu] and phi(h).
    Eval {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        h: PathBuf,
    },
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = false)]
struct PlapArgs {
    #[command(subcommand)]
    cmd: Option<PlapCmd>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    g: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
}

#[derive(Subcommand)]
enum PlapCmd {
    /// Warm-started continuation along a decreasing p schedule.
    Continue {
        /// Comma-separated decreasing p values, e.g. 1.8,1.4,1.2,1.1,1.05.
        #[arg(long)]
        schedule: String,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's rendering but pin the spec's usage exit code
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_boundary(grid: &Grid, path: &Path) -> Result<BoundaryData> {
    let values = io::load_field_csv(path)?;
    let b = BoundaryData { values };
    grid.check_boundary(&b)?;
    Ok(b)
}

fn solver_options(cli_tol: f64, seed: u64) -> SolverOptions {
    SolverOptions {
        tolerance: cli_tol,
        seed,
        ..Default::default()
    }
}

fn parse_nemytskii(spec: &str) -> Result<NemytskiiSpec> {
    if spec == "zero" {
        return Ok(NemytskiiSpec::Zero);
    }
    if let Some(omega) = spec.strip_prefix("linear:") {
        let omega: f64 = omega
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad omega in --f: {e}")))?;
        return NemytskiiSpec::linear(omega);
    }
    if let Some(file) = spec.strip_prefix("table:") {
        let text = std::fs::read_to_string(file)?;
        let mut points = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "x,y" {
                continue;
            }
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidArgument(format!("bad table line '{line}'")))?;
            points.push((
                x.trim().parse().map_err(|e| Error::InvalidArgument(format!("{e}")))?,
                y.trim().parse().map_err(|e| Error::InvalidArgument(format!("{e}")))?,
            ));
        }
        return NemytskiiSpec::table(points);
    }
    Err(Error::InvalidArgument(format!(
        "--f must be zero, linear:OMEGA, or table:FILE; got '{spec}'"
    )))
}

fn run(cli: Cli) -> Result<u8> {
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Grid { shape, n, size } => {
            let grid = match shape.as_str() {
                "square" => build_square_grid(n, size)?,
                "disk" => build_disk_grid(n, size)?,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown shape '{other}' (square or disk)"
                    )))
                }
            };
            let path = cli.out.join("grid.json");
            io::save_grid(&path, &grid)?;
            println!(
                "{}: {} cells, {} faces, {} boundary segments, perimeter {:.6}",
                path.display(),
                grid.n_cells(),
                grid.n_faces(),
                grid.n_boundary(),
                grid.perimeter
            );
            Ok(0)
        }
        Command::Solve { grid, h } => {
            let grid = io::load_grid(&grid)?;
            let h = load_boundary(&grid, &h)?;
            let sol = solve_relaxed_dirichlet(&grid, &h, &solver_options(cli.tol, cli.seed))?;
            io::save_field_csv(&cli.out.join("u.csv"), &sol.u.values)?;
            io::save_field_csv(&cli.out.join("z.csv"), &sol.z.values)?;
            io::save_field_csv(&cli.out.join("g.csv"), &sol.s.values)?;
            io::save_json(
                &cli.out.join("report.json"),
                &json!({
                    "primal_energy": sol.primal_energy,
                    "dual_energy": sol.dual_energy,
                    "gap": sol.gap,
                    "iterations": sol.iterations,
                    "div_residual": sol.div_residual,
                    "div_l1": sol.div_l1,
                    "converged": sol.converged,
                }),
            )?;
            println!(
                "energy {:.9e}, gap {:.3e}, {} iterations{}",
                sol.primal_energy,
                sol.gap,
                sol.iterations,
                if sol.converged { "" } else { " (NOT CONVERGED)" }
            );
            Ok(if sol.converged { 0 } else { 2 })
        }
        Command::Dtn { cmd } => match cmd {
            DtnCmd::Eval { grid, h } => {
                let grid = io::load_grid(&grid)?;
                let h = load_boundary(&grid, &h)?;
                let record = dtn::evaluate(&grid, &h, &solver_options(cli.tol, cli.seed))?;
                io::save_field_csv(&cli.out.join("g.csv"), &record.g.values)?;
                io::save_field_csv(&cli.out.join("u.csv"), &record.solution.u.values)?;
                io::save_field_csv(&cli.out.join("z.csv"), &record.solution.z.values)?;
                io::save_json(
                    &cli.out.join("report.json"),
                    &json!({
                        "phi": record.phi,
                        "phi_via_min": record.solution.primal_energy,
                        "pairing_vs_min": (record.phi - record.solution.primal_energy).abs(),
                        "g_sup_norm": record.g.linf(),
                        "total_flux": record.total_flux,
                        "gap": record.solution.gap,
                        "div_residual": record.solution.div_residual,
                        "div_l1": record.solution.div_l1,
                        "certificate": record.certificate,
                        "converged": record.solution.converged,
                    }),
                )?;
                println!(
                    "phi = {:.9e}, ||g||_inf = {:.6}, total flux = {:.3e}",
                    record.phi,
                    record.g.linf(),
                    record.total_flux
                );
                Ok(if record.solution.converged { 0 } else { 2 })
            }
        },
        Command::Resolvent { grid, g, lambda } => {
            let grid = io::load_grid(&grid)?;
            let g = load_boundary(&grid, &g)?;
            let (h, robin) =
                resolvent::resolvent_apply(&grid, &g, lambda, &solver_options(cli.tol, cli.seed))?;
            io::save_field_csv(&cli.out.join("h.csv"), &h.values)?;
            io::save_field_csv(&cli.out.join("flux.csv"), &robin.conormal_g.values)?;
            io::save_field_csv(&cli.out.join("u.csv"), &robin.u.values)?;
            let max_move = h
                .values
                .iter()
                .zip(&g.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            io::save_json(
                &cli.out.join("report.json"),
                &json!({
                    "lambda": lambda,
                    "gap": robin.gap,
                    "bc_defect": robin.bc_defect,
                    "div_residual": robin.div_residual,
                    "max_move": max_move,
                    "converged": robin.converged,
                }),
            )?;
            println!(
                "||h - g||_inf = {:.6e} (<= lambda = {lambda}), bc defect {:.3e}",
                max_move, robin.bc_defect
            );
            Ok(if robin.converged { 0 } else { 2 })
        }
        Command::Evolve {
            grid,
            h0,
            tau,
            t_end,
            f,
            source,
        } => {
            let grid = io::load_grid(&grid)?;
            let h0 = load_boundary(&grid, &h0)?;
            let f = parse_nemytskii(&f)?;
            let source = match source {
                None => SourceTerm::Zero,
                Some(path) => SourceTerm::Constant(load_boundary(&grid, &path)?),
            };
            let traj = evolution::evolve(
                &grid,
                &h0,
                t_end,
                tau,
                &source,
                &f,
                &solver_options(cli.tol, cli.seed),
            )?;
            let states_dir = cli.out.join("states");
            std::fs::create_dir_all(&states_dir)?;
            for (k, state) in traj.states.iter().enumerate() {
                io::save_field_csv(&states_dir.join(format!("h_{k:05}.csv")), &state.values)?;
            }
            let times = &traj.times[1..];
            let series: Vec<(&str, Vec<f64>)> = vec![
                ("mass", traj.diagnostics.iter().map(|d| d.mass).collect()),
                ("phi", traj.diagnostics.iter().map(|d| d.phi).collect()),
                ("dhdt_l1", traj.diagnostics.iter().map(|d| d.dhdt_norms[0]).collect()),
                ("dhdt_l2", traj.diagnostics.iter().map(|d| d.dhdt_norms[1]).collect()),
                ("dhdt_linf", traj.diagnostics.iter().map(|d| d.dhdt_norms[2]).collect()),
                ("gap", traj.diagnostics.iter().map(|d| d.gap).collect()),
                ("div_l1", traj.diagnostics.iter().map(|d| d.div_l1).collect()),
            ];
            for (name, values) in &series {
                let mut out = String::from("t,value\n");
                for (t, v) in times.iter().zip(values) {
                    out.push_str(&format!("{t:.16e},{v:.16e}\n"));
                }
                std::fs::write(cli.out.join(format!("{name}.csv")), out)?;
            }
            let report = evolution::diagnostics_report(&traj, &h0, &grid, &f, &source)?;
            io::save_json(&cli.out.join("report.json"), &report)?;
            emit_plot_data(
                &cli.out,
                "phi_decay",
                &PlotData {
                    title: "Certified energy along the trajectory".into(),
                    xlabel: "t".into(),
                    ylabel: "phi".into(),
                    logy: false,
                    series: vec![PlotSeries::new(
                        "phi",
                        times.to_vec(),
                        traj.diagnostics.iter().map(|d| d.phi).collect(),
                    )],
                },
            )?;
            println!(
                "{} steps to t = {}, mass drift {:.3e}, final phi {:.6e}{}",
                traj.diagnostics.len(),
                traj.times.last().unwrap(),
                report.mass_drift_abs,
                traj.diagnostics.last().map(|d| d.phi).unwrap_or(traj.phi0_certified),
                if traj.all_converged { "" } else { " (NOT CONVERGED)" }
            );
            Ok(if traj.all_converged { 0 } else { 2 })
        }
        Command::Plap(args) => match args.cmd {
            Some(PlapCmd::Continue {
                schedule,
                grid,
                g,
                alpha,
            }) => {
                let grid = io::load_grid(&grid)?;
                let g = load_boundary(&grid, &g)?;
                let schedule: Vec<f64> = schedule
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|e| {
                            Error::InvalidArgument(format!("bad schedule entry '{s}': {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let report = plap::continuation(
                    &grid,
                    &g,
                    alpha,
                    &schedule,
                    &PlapOptions::default(),
                    &solver_options(cli.tol, cli.seed),
                )?;
                io::save_json(&cli.out.join("report.json"), &report)?;
                emit_plot_data(
                    &cli.out,
                    "continuation",
                    &PlotData {
                        title: "p-continuation toward the TV solution".into(),
                        xlabel: "p".into(),
                        ylabel: "||u_p - u_TV||_1 / area".into(),
                        logy: true,
                        series: vec![PlotSeries::new(
                            "distance",
                            report.entries.iter().map(|e| e.p).collect(),
                            report.entries.iter().map(|e| e.distance_l1).collect(),
                        )],
                    },
                )?;
                for e in &report.entries {
                    println!(
                        "p = {:<5} distance {:.6e} flux gap {:.6e}{}",
                        e.p,
                        e.distance_l1,
                        e.flux_gap_l1,
                        if e.converged { "" } else { " (NOT CONVERGED)" }
                    );
                }
                Ok(if report.entries.iter().all(|e| e.converged) { 0 } else { 2 })
            }
            None => {
                let p = args.p.ok_or_else(|| {
                    Error::InvalidArgument("either --p or the continue subcommand is required".into())
                })?;
                let grid_path = args
                    .grid
                    .ok_or_else(|| Error::InvalidArgument("--grid is required".into()))?;
                let g_path = args
                    .g
                    .ok_or_else(|| Error::InvalidArgument("--g is required".into()))?;
                let grid = io::load_grid(&grid_path)?;
                let g = load_boundary(&grid, &g_path)?;
                let opts = PlapOptions {
                    p,
                    epsilon: args.epsilon,
                    ..Default::default()
                };
                let sol = plap::solve_robin_p(&grid, &g, args.alpha, &opts)?;
                io::save_field_csv(&cli.out.join("u.csv"), &sol.u.values)?;
                io::save_json(
                    &cli.out.join("report.json"),
                    &json!({
                        "p": p,
                        "alpha": args.alpha,
                        "epsilon": args.epsilon,
                        "energy": sol.energy,
                        "residual": sol.residual,
                        "residual_history": sol.residual_history,
                        "newton_iterations": sol.iterations,
                        "converged": sol.converged,
                    }),
                )?;
                println!(
                    "p = {p}: energy {:.9e}, residual {:.3e} in {} Newton steps{}",
                    sol.energy,
                    sol.residual,
                    sol.iterations,
                    if sol.converged { "" } else { " (NOT CONVERGED)" }
                );
                Ok(if sol.converged { 0 } else { 2 })
            }
        },
        Command::Oracle { grid, h } => {
            let grid = io::load_grid(&grid)?;
            let h = load_boundary(&grid, &h)?;
            let (value, u_star) = oracle::coarea_mincut_min_phi(&grid, &h)?;
            io::save_field_csv(&cli.out.join("u_star.csv"), &u_star.values)?;
            io::save_json(&cli.out.join("report.json"), &json!({ "value": value }))?;
            println!("exact anisotropic minimum: {value:.12e}");
            Ok(0)
        }
        Command::Experiment {
            config,
            recipe,
            n,
            svg,
        } => {
            let mut cfg: ExperimentConfig = match (config, recipe) {
                (Some(path), None) => load_config(&path)?,
                (None, Some(name)) => ExperimentConfig::for_recipe(&name),
                _ => {
                    return Err(Error::InvalidArgument(
                        "pass exactly one of --config or --recipe".into(),
                    ))
                }
            };
            if let Some(n) = n {
                cfg.grid.n = n;
                cfg.params.insert("n".into(), toml::Value::Integer(n as i64));
            }
            cfg.svg |= svg;
            if cfg.seed == 0 {
                cfg.seed = cli.seed;
            }
            run_experiment(&cfg, &cli.out)?;
            println!(
                "experiment '{}' written to {} (hash {})",
                cfg.recipe,
                cli.out.display(),
                std::fs::read_to_string(cli.out.join("hash.txt"))?
            );
            Ok(0)
        }
        Command::Verify { criterion } => {
            let results = match criterion {
                Some(id) => vec![verify::run_criterion(id).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "criterion {id} does not exist (1..={})",
                        verify::CRITERIA
                    ))
                })?],
                None => verify::run_all(),
            };
            let mut all = true;
            for r in &results {
                println!("{r}");
                all &= r.passed;
            }
            Ok(if all { 0 } else { 2 })
        }
    }
}
