//! Implicit-Euler evolution of the boundary semigroup.
//!
//! Each step applies the resolvent with lambda = tau to the explicit data
//! h_n + tau (source_n - F(h_n)); the step's co-normal flux is the discrete
//! selection step_g = (h_n - h_{n+1})/tau - source_n + F(h_n) of the
//! boundary operator at h_{n+1}, which certifies the energy value
//! phi(h_{n+1}) = <step_g, h_{n+1}> along the trajectory. The diagnostics
//! battery records mass, certified energy, pointwise flux bounds, and the
//! discrete energy inequality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{boundary_integral, BoundaryData, Grid};
use crate::resolvent::{resolvent_apply_warm, state_of};
use crate::tvmin::SolverOptions;

/// Pointwise superposition operator h -> f(h) with Lipschitz f, f(0) = 0.
#[derive(Debug, Clone, Serialize)]
pub enum NemytskiiSpec {
    Zero,
    /// f(h) = omega * h.
    Linear { omega: f64 },
    /// Piecewise-linear f through (x, f(x)) breakpoints (x-independent),
    /// extended with the end slopes.
    Table { points: Vec<(f64, f64)> },
}

impl NemytskiiSpec {
    pub fn linear(omega: f64) -> Result<Self> {
        if omega < 0.0 {
            return Err(Error::InvalidArgument("omega must be nonnegative".to_string()));
        }
        Ok(NemytskiiSpec::Linear { omega })
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("table needs at least two points".to_string()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidArgument(
                    "table abscissae must be strictly increasing".to_string(),
                ));
            }
        }
        let spec = NemytskiiSpec::Table { points };
        if spec.value(0.0).abs() > 1e-14 {
            return Err(Error::InvalidArgument("table must satisfy f(0) = 0".to_string()));
        }
        Ok(spec)
    }

    /// Verified Lipschitz bound (max piece slope).
    pub fn lipschitz(&self) -> f64 {
        match self {
            NemytskiiSpec::Zero => 0.0,
            NemytskiiSpec::Linear { omega } => *omega,
            NemytskiiSpec::Table { points } => points
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn value(&self, h: f64) -> f64 {
        match self {
            NemytskiiSpec::Zero => 0.0,
            NemytskiiSpec::Linear { omega } => omega * h,
            NemytskiiSpec::Table { points } => {
                let n = points.len();
                if h <= points[0].0 {
                    let s = (points[1].1 - points[0].1) / (points[1].0 - points[0].0);
                    points[0].1 + s * (h - points[0].0)
                } else if h >= points[n - 1].0 {
                    let s = (points[n - 1].1 - points[n - 2].1)
                        / (points[n - 1].0 - points[n - 2].0);
                    points[n - 1].1 + s * (h - points[n - 1].0)
                } else {
                    let k = points.partition_point(|p| p.0 <= h) - 1;
                    let (x0, y0) = points[k];
                    let (x1, y1) = points[k + 1];
                    y0 + (y1 - y0) * (h - x0) / (x1 - x0)
                }
            }
        }
    }

    /// Primitive integral_0^t f(r) dr, exact for each kind.
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            NemytskiiSpec::Zero => 0.0,
            NemytskiiSpec::Linear { omega } => 0.5 * omega * t * t,
            NemytskiiSpec::Table { .. } => {
                // piecewise linear: trapezoid between breakpoints is exact
                let (a, b, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
                let mut xs = vec![a];
                if let NemytskiiSpec::Table { points } = self {
                    for &(x, _) in points {
                        if x > a && x < b {
                            xs.push(x);
                        }
                    }
                }
                xs.push(b);
                let mut s = 0.0;
                for w in xs.windows(2) {
                    s += 0.5 * (self.value(w[0]) + self.value(w[1])) * (w[1] - w[0]);
                }
                sign * s
            }
        }
    }

    pub fn apply(&self, h: &BoundaryData) -> BoundaryData {
        BoundaryData {
            values: h.values.iter().map(|v| self.value(*v)).collect(),
        }
    }
}

/// Time-indexed source term.
#[derive(Debug, Clone)]
pub enum SourceTerm {
    Zero,
    Constant(BoundaryData),
    /// One value per step; the last entry is held beyond the list.
    Steps(Vec<BoundaryData>),
}

impl SourceTerm {
    pub fn at_step<'a>(&'a self, n: usize, grid: &Grid) -> BoundaryData {
        match self {
            SourceTerm::Zero => BoundaryData::zeros(grid),
            SourceTerm::Constant(b) => b.clone(),
            SourceTerm::Steps(list) => list[n.min(list.len() - 1)].clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceTerm::Zero => true,
            SourceTerm::Constant(b) => b.values.iter().all(|v| *v == 0.0),
            SourceTerm::Steps(list) => list.iter().all(|b| b.values.iter().all(|v| *v == 0.0)),
        }
    }
}

/// Per-step diagnostics of the implicit relation.
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub mass: f64,
    /// Certified energy value <step_g, h> minus the rigorous divergence
    /// correction; a guaranteed lower bound that meets phi at convergence.
    pub phi: f64,
    /// (h_n - h_{n+1})/tau - source_n + F(h_n): the discrete selection.
    pub step_g: BoundaryData,
    /// ||dh/dt|| in q = 1, 2, inf.
    pub dhdt_norms: [f64; 3],
    pub gap: f64,
    pub div_l1: f64,
    pub bc_defect: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// States per time; states[0] = h0.
    pub states: Vec<BoundaryData>,
    /// One entry per step (between times[n] and times[n+1]).
    pub diagnostics: Vec<StepDiagnostics>,
    pub tau: f64,
    /// phi(h0): certified pairing value and primal minimum.
    pub phi0_certified: f64,
    pub phi0_primal: f64,
    pub all_converged: bool,
}

fn check_step_args(tau: f64, f: &NemytskiiSpec) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let omega = f.lipschitz();
    if !matches!(f, NemytskiiSpec::Zero) && tau * omega >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "tau*omega = {} >= 1 leaves the quasi-contraction regime",
            tau * omega
        )));
    }
    Ok(())
}

/// One implicit-Euler step: h_{n+1} = J_tau(h_n + tau (source_n - F(h_n))).
pub fn implicit_euler_step(
    grid: &Grid,
    h_n: &BoundaryData,
    tau: f64,
    source_n: &BoundaryData,
    f: &NemytskiiSpec,
    opts: &SolverOptions,
) -> Result<BoundaryData> {
    check_step_args(tau, f)?;
    grid.check_boundary(h_n)?;
    grid.check_boundary(source_n)?;
    let fh = f.apply(h_n);
    let data = BoundaryData {
        values: h_n
            .values
            .iter()
            .zip(&source_n.values)
            .zip(&fh.values)
            .map(|((h, s), fv)| h + tau * (s - fv))
            .collect(),
    };
    let (h_next, _) = crate::resolvent::resolvent_apply(grid, &data, tau, opts)?;
    Ok(h_next)
}

/// Run the evolution to t_end with uniform step tau, recording diagnostics.
pub fn evolve(
    grid: &Grid,
    h0: &BoundaryData,
    t_end: f64,
    tau: f64,
    source: &SourceTerm,
    f: &NemytskiiSpec,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    check_step_args(tau, f)?;
    grid.check_boundary(h0)?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument("t_end must be positive".to_string()));
    }
    let n_steps = (t_end / tau).ceil() as usize;

    let initial = crate::dtn::evaluate(grid, h0, opts)?;
    let phi0_certified = initial.phi - h0.linf() * initial.solution.div_l1;
    let phi0_primal = initial.solution.primal_energy;

    let mut times = vec![0.0];
    let mut states = vec![h0.clone()];
    let mut diagnostics = Vec::with_capacity(n_steps);
    let mut all_converged = initial.solution.converged;
    let mut warm = None;

    let mut h = h0.clone();
    for n in 0..n_steps {
        let source_n = source.at_step(n, grid);
        let fh = f.apply(&h);
        let data = BoundaryData {
            values: h
                .values
                .iter()
                .zip(&source_n.values)
                .zip(&fh.values)
                .map(|((hv, sv), fv)| hv + tau * (sv - fv))
                .collect(),
        };
        let (h_next, robin) = resolvent_apply_warm(grid, &data, tau, opts, warm.take())?;
        warm = Some(state_of(&robin));
        all_converged &= robin.converged;

        let step_g = BoundaryData {
            values: h
                .values
                .iter()
                .zip(&h_next.values)
                .zip(&source_n.values)
                .zip(&fh.values)
                .map(|(((hn, hn1), sv), fv)| (hn - hn1) / tau - sv + fv)
                .collect(),
        };
        let dhdt = BoundaryData {
            values: h
                .values
                .iter()
                .zip(&h_next.values)
                .map(|(a, b)| (b - a) / tau)
                .collect(),
        };
        let phi_cert =
            grid.dot_boundary(&step_g, &h_next) - h_next.linf() * robin.div_l1;
        diagnostics.push(StepDiagnostics {
            mass: boundary_integral(grid, &h_next)?,
            phi: phi_cert,
            dhdt_norms: [
                dhdt.norm_q(grid, 1.0),
                dhdt.norm_q(grid, 2.0),
                dhdt.norm_q(grid, f64::INFINITY),
            ],
            step_g,
            gap: robin.gap,
            div_l1: robin.div_l1,
            bc_defect: robin.bc_defect,
            converged: robin.converged,
        });
        times.push(tau * (n + 1) as f64);
        states.push(h_next.clone());
        h = h_next;
    }

    Ok(Trajectory {
        times,
        states,
        diagnostics,
        tau,
        phi0_certified,
        phi0_primal,
        all_converged,
    })
}

/// Diagnostic battery over a trajectory. Mass/decay checks apply only to
/// the F = 0 flow; `checks_apply` records which were evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    /// Checks that need F = 0 and zero source were evaluated.
    pub conservative_checks_apply: bool,
    /// max_n [phi(h_{n+1}) - phi(h_n)] (should be <= slack).
    pub phi_increase_max: f64,
    /// max_n |mass(t_n) - mass(0)|.
    pub mass_drift_abs: f64,
    /// mass drift relative to ||h0||_1.
    pub mass_drift_rel: f64,
    /// max_n phi(h(t_n)) * t_n / (2 ||h0||_2^2): <= 1 + slack expected.
    pub phi_time_bound_ratio: f64,
    /// max over steps and segments with h0 != 0 of |step_g| t / (2 |h0_b|).
    pub pointwise_flux_ratio: f64,
    /// max over steps of |step_g| t / (2 ||h0||_inf).
    pub sup_flux_ratio: f64,
    /// max |step_g| over segments where h0 = 0 (monitored only).
    pub zero_data_flux_max: f64,
    /// max_n of [ 1/2 sum tau ||dh/dt||_2^2 + E(h_n) - E(h0)
    ///            - 1/2 sum tau ||source||_2^2 ]  (<= slack expected).
    pub energy_inequality_margin: f64,
    /// ||h(t) - mean||_1 / phi(h(t)) per recorded step (entropy monitor);
    /// NaN where phi is numerically zero.
    pub entropy_ratio_series: Vec<f64>,
    /// ||h(T) - mean(h0)||_1 / ||h0 - mean(h0)||_1.
    pub long_time_l1_ratio: f64,
}

pub fn diagnostics_report(
    trajectory: &Trajectory,
    h0: &BoundaryData,
    grid: &Grid,
    f: &NemytskiiSpec,
    source: &SourceTerm,
) -> Result<DiagnosticsReport> {
    grid.check_boundary(h0)?;
    let conservative = matches!(f, NemytskiiSpec::Zero) && source.is_zero();

    let mass0 = boundary_integral(grid, h0)?;
    let h0_l1 = h0.l1(grid).max(1e-30);
    let h0_l2sq = h0.l2_sq(grid);
    let h0_linf = h0.linf();

    let mut phi_increase_max: f64 = f64::NEG_INFINITY;
    let mut mass_drift_abs: f64 = 0.0;
    let mut phi_time_bound_ratio: f64 = 0.0;
    let mut pointwise_flux_ratio: f64 = 0.0;
    let mut sup_flux_ratio: f64 = 0.0;
    let mut zero_data_flux_max: f64 = 0.0;
    let mut entropy_ratio_series = Vec::new();

    let mut prev_phi = trajectory.phi0_certified;
    let tau = trajectory.tau;
    let mut dissipation = 0.0;
    let mut source_work = 0.0;
    let mut energy_inequality_margin: f64 = f64::NEG_INFINITY;

    let e0 = trajectory.phi0_primal + energy_lower_order(grid, h0, f);

    for (n, diag) in trajectory.diagnostics.iter().enumerate() {
        let t = trajectory.times[n + 1];
        let state = &trajectory.states[n + 1];

        phi_increase_max = phi_increase_max.max(diag.phi - prev_phi);
        prev_phi = diag.phi;

        if conservative {
            mass_drift_abs = mass_drift_abs.max((diag.mass - mass0).abs());
            if h0_l2sq > 0.0 {
                phi_time_bound_ratio =
                    phi_time_bound_ratio.max(diag.phi * t / (2.0 * h0_l2sq));
            }
            for (b, g) in diag.step_g.values.iter().enumerate() {
                let h0b = h0.values[b].abs();
                if h0b > 0.0 {
                    pointwise_flux_ratio = pointwise_flux_ratio.max(g.abs() * t / (2.0 * h0b));
                } else {
                    zero_data_flux_max = zero_data_flux_max.max(g.abs());
                }
                if h0_linf > 0.0 {
                    sup_flux_ratio = sup_flux_ratio.max(g.abs() * t / (2.0 * h0_linf));
                }
            }
        }

        dissipation += 0.5 * tau * diag.dhdt_norms[1] * diag.dhdt_norms[1];
        let src = match source {
            SourceTerm::Zero => 0.0,
            _ => {
                let s = source_at(source, n, grid);
                s.l2_sq(grid)
            }
        };
        source_work += 0.5 * tau * src;
        let e_n = diag.phi + energy_lower_order(grid, state, f);
        energy_inequality_margin =
            energy_inequality_margin.max(dissipation + e_n - e0 - source_work);

        // entropy monitor
        let mean = diag.mass / grid.perimeter;
        let dev = BoundaryData {
            values: state.values.iter().map(|v| v - mean).collect(),
        };
        let num = dev.l1(grid);
        let floor = 1e-10 * (1.0 + h0_linf) * grid.perimeter;
        entropy_ratio_series.push(if diag.phi > floor { num / diag.phi } else { f64::NAN });
    }

    let mean0 = mass0 / grid.perimeter;
    let final_state = trajectory.states.last().unwrap();
    let dev_final = BoundaryData {
        values: final_state.values.iter().map(|v| v - mean0).collect(),
    };
    let dev0 = BoundaryData {
        values: h0.values.iter().map(|v| v - mean0).collect(),
    };
    let long_time_l1_ratio = dev_final.l1(grid) / dev0.l1(grid).max(1e-30);

    Ok(DiagnosticsReport {
        conservative_checks_apply: conservative,
        phi_increase_max,
        mass_drift_abs,
        mass_drift_rel: mass_drift_abs / h0_l1,
        phi_time_bound_ratio,
        pointwise_flux_ratio,
        sup_flux_ratio,
        zero_data_flux_max,
        energy_inequality_margin,
        entropy_ratio_series,
        long_time_l1_ratio,
    })
}

fn source_at(source: &SourceTerm, n: usize, grid: &Grid) -> BoundaryData {
    source.at_step(n, grid)
}

/// Sigma_b s_b integral_0^{h_b} f(r) dr.
fn energy_lower_order(grid: &Grid, h: &BoundaryData, f: &NemytskiiSpec) -> f64 {
    match f {
        NemytskiiSpec::Zero => 0.0,
        _ => h
            .values
            .iter()
            .zip(&grid.boundary)
            .map(|(v, seg)| seg.weight * f.primitive(*v))
            .sum(),
    }
}

/// Worst violation of the quasi-contraction bound between two trajectories:
/// max over recorded times of
/// ||[ha - hb]^nu||_q - e^{w t} ||[ha0 - hb0]^nu||_q
///                    - sum_s tau e^{w (t - t_s)} ||[ga - gb]^nu||_q,
/// where nu is the identity or the positive part.
pub fn quasi_contraction_margin(
    grid: &Grid,
    a: &Trajectory,
    b: &Trajectory,
    source_a: &SourceTerm,
    source_b: &SourceTerm,
    omega: f64,
    q: f64,
    positive_part: bool,
) -> f64 {
    let part = |v: f64| if positive_part { v.max(0.0) } else { v };
    let diff0 = BoundaryData {
        values: a.states[0]
            .values
            .iter()
            .zip(&b.states[0].values)
            .map(|(x, y)| part(x - y))
            .collect(),
    };
    let base = diff0.norm_q(grid, q);
    let tau = a.tau;
    let mut worst = f64::NEG_INFINITY;
    let n = a.states.len().min(b.states.len());
    for k in 1..n {
        let t = a.times[k];
        let diff = BoundaryData {
            values: a.states[k]
                .values
                .iter()
                .zip(&b.states[k].values)
                .map(|(x, y)| part(x - y))
                .collect(),
        };
        let mut bound = (omega * t).exp() * base;
        for s in 0..k {
            let sa = source_a.at_step(s, grid);
            let sb = source_b.at_step(s, grid);
            let ds = BoundaryData {
                values: sa
                    .values
                    .iter()
                    .zip(&sb.values)
                    .map(|(x, y)| part(x - y))
                    .collect(),
            };
            bound += tau * (omega * (t - a.times[s + 1])).exp() * ds.norm_q(grid, q);
        }
        worst = worst.max(diff.norm_q(grid, q) - bound);
    }
    worst
}
