//! Shared primal-dual saddle-point engine.
//!
//! Solves min_u  tv(u) + B(T u)  for a per-segment convex boundary term B
//! via the relaxed primal-dual scheme (primal prox is the identity)
//!
//! ```text
//!   u~   = u + tau * D [z; d]                     (full divergence)
//!   z~   = project( z + sigma * G (2u~ - u) )     (per staggered group)
//!   d~_b = boundary prox at (2u~ - u)             (per segment)
//!   (u, z, d) += rho * ((u~, z~, d~) - (u, z, d))
//! ```
//!
//! with rho in (0, 2) and tau sigma ||K||^2 < 1. The steps are split
//! asymmetrically (sigma/tau = STEP_RATIO); on TV problems this removes the
//! slow primal plateau mode. The dual iterate doubles as the extended
//! vector field: interior faces hold z, boundary faces hold the boundary
//! dual d, and at optimality the full divergence vanishes in every cell,
//! which packages "div z = 0" and the Euler-Lagrange boundary flux equation
//! into one residual.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::grid::{tv_of_gradient, BoundaryData, BulkField, DualField, Grid, TvNorm};
use crate::resolvent::{gamma_conjugate, gamma_potential, truncator};
use crate::tvmin::SolverOptions;

#[derive(Debug, Clone, Copy)]
pub(crate) enum BoundaryTerm<'a> {
    /// Sigma s_b |h_b - u_b| : the relaxed Dirichlet boundary penalty.
    AbsoluteGap { h: &'a BoundaryData },
    /// Sigma s_b Gamma_{g_b, alpha}(u_b) : the truncated Robin potential.
    Robin { g: &'a BoundaryData, alpha: f64 },
}

impl BoundaryTerm<'_> {
    fn data(&self) -> &BoundaryData {
        match self {
            BoundaryTerm::AbsoluteGap { h } => h,
            BoundaryTerm::Robin { g, .. } => g,
        }
    }

    /// Sup-norm bound on some minimizer; used for the rigorous dual
    /// correction term (minimizers survive truncation to the data range).
    fn bulk_bound(&self) -> f64 {
        match self {
            BoundaryTerm::AbsoluteGap { h } => h.linf(),
            BoundaryTerm::Robin { g, alpha } => g.linf() / alpha,
        }
    }

    fn dual_prox(&self, b: usize, d: f64, sigma: f64, ubar: f64) -> f64 {
        match self {
            BoundaryTerm::AbsoluteGap { h } => {
                (d + sigma * (h.values[b] - ubar)).clamp(-1.0, 1.0)
            }
            BoundaryTerm::Robin { g, alpha } => {
                let x = d - sigma * ubar;
                ((alpha * x + sigma * g.values[b]) / (alpha + sigma)).clamp(-1.0, 1.0)
            }
        }
    }

    fn primal_value(&self, b: usize, ub: f64) -> f64 {
        match self {
            BoundaryTerm::AbsoluteGap { h } => (h.values[b] - ub).abs(),
            BoundaryTerm::Robin { g, alpha } => gamma_potential(g.values[b], *alpha, ub),
        }
    }

    /// Per-segment dual objective contribution at dual value d in [-1, 1].
    fn dual_value(&self, b: usize, d: f64) -> f64 {
        match self {
            BoundaryTerm::AbsoluteGap { h } => d * h.values[b],
            BoundaryTerm::Robin { g, alpha } => -gamma_conjugate(g.values[b], *alpha, -d),
        }
    }

    /// Defect of the Euler-Lagrange boundary flux relation at (u, d).
    fn flux_defect(&self, b: usize, d: f64, ub: f64) -> f64 {
        match self {
            // sign condition: d*(h-u) = |h-u|
            BoundaryTerm::AbsoluteGap { h } => {
                let r = h.values[b] - ub;
                (r.abs() - d * r).max(0.0)
            }
            BoundaryTerm::Robin { g, alpha } => (d - truncator(g.values[b] - alpha * ub)).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SaddleState {
    pub u: Vec<f64>,
    /// Face-indexed dual; boundary slots hold the boundary dual.
    pub z: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct SaddleResult {
    pub u: BulkField,
    pub z: DualField,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub div_residual: f64,
    pub div_l1: f64,
    pub flux_defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of the coupling operator u -> (G u, -T u) in the
/// weighted metrics, by power iteration.
pub(crate) fn operator_norm(grid: &Grid) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..grid.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda: f64 = 0.0;
    let mut z = vec![0.0; grid.n_faces()];
    for _ in 0..60 {
        let nrm = norm_bulk(grid, &v);
        if nrm == 0.0 {
            return 1.0;
        }
        for x in v.iter_mut() {
            *x /= nrm;
        }
        // z bar = (G v ; -T v)
        for (i, f) in grid.faces.iter().enumerate() {
            z[i] = match (f.neg, f.pos) {
                (Some(a), Some(b)) => v[b as usize] - v[a as usize],
                _ => 0.0,
            };
        }
        for seg in &grid.boundary {
            z[seg.face as usize] = -v[seg.cell as usize];
        }
        // v <- -D z bar  (= K^T K v)
        let mut w = vec![0.0; grid.n_cells()];
        for (c, incident) in grid.cell_faces.iter().enumerate() {
            let mut s = 0.0;
            for &(fid, slen) in incident {
                s += slen * z[fid as usize];
            }
            w[c] = -s / grid.cells[c].area;
        }
        lambda = norm_bulk(grid, &w);
        v = w;
    }
    lambda.sqrt() * 1.01
}

fn norm_bulk(grid: &Grid, v: &[f64]) -> f64 {
    v.iter()
        .zip(&grid.cells)
        .map(|(x, c)| x * x * c.area)
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn initial_state(
    grid: &Grid,
    term: &BoundaryTerm<'_>,
    opts: &SolverOptions,
) -> SaddleState {
    let data = term.data();
    let target: Vec<f64> = match term {
        BoundaryTerm::AbsoluteGap { .. } => data.values.clone(),
        BoundaryTerm::Robin { alpha, .. } => data.values.iter().map(|v| v / alpha).collect(),
    };
    let mean = if target.is_empty() {
        0.0
    } else {
        let (mut num, mut den) = (0.0, 0.0);
        for (v, seg) in target.iter().zip(&grid.boundary) {
            num += v * seg.weight;
            den += seg.weight;
        }
        num / den
    };
    let spread = target.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - target.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp = 0.5 * spread.max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let u = (0..grid.n_cells())
        .map(|_| mean + amp * (rng.gen::<f64>() - 0.5))
        .collect();
    SaddleState {
        u,
        z: vec![0.0; grid.n_faces()],
    }
}

/// Default asymmetric split sigma/tau of the step product.
const STEP_RATIO: f64 = 100.0;
/// Relaxation parameter, in (0, 2).
const RELAXATION: f64 = 1.8;

pub(crate) fn solve(
    grid: &Grid,
    term: BoundaryTerm<'_>,
    norm: TvNorm,
    opts: &SolverOptions,
    warm: Option<SaddleState>,
) -> SaddleResult {
    let knorm = operator_norm(grid);
    let tau = opts.step_primal.unwrap_or(0.95 / (knorm * STEP_RATIO.sqrt()));
    let sigma = opts.step_dual.unwrap_or(0.95 * STEP_RATIO.sqrt() / knorm);

    let state = warm.unwrap_or_else(|| initial_state(grid, &term, opts));
    let mut u = state.u;
    let mut z = state.z;
    let mut u_next = u.clone();
    let mut z_next = z.clone();

    let n_cells = grid.n_cells();
    let data_scale = term.data().linf().max(1e-30) * grid.perimeter;
    let gap_floor = data_scale.max(1e-15);

    let mut iterations = 0;
    let mut converged = false;
    let mut report = Diagnostics::default();

    let check_every = 50;
    while iterations < opts.max_iters {
        for _ in 0..check_every {
            // primal step along the full divergence
            for (c, incident) in grid.cell_faces.iter().enumerate() {
                let mut s = 0.0;
                for &(fid, slen) in incident {
                    s += slen * z[fid as usize];
                }
                u_next[c] = u[c] + tau * s / grid.cells[c].area;
            }
            // dual ascent from the extrapolated primal, then projection
            z_next.copy_from_slice(&z);
            for (i, f) in grid.faces.iter().enumerate() {
                if let (Some(a), Some(b)) = (f.neg, f.pos) {
                    let (a, b) = (a as usize, b as usize);
                    let gbar = (2.0 * u_next[b] - u[b]) - (2.0 * u_next[a] - u[a]);
                    z_next[i] += sigma * gbar;
                }
            }
            match norm {
                TvNorm::Isotropic => {
                    for c in 0..n_cells {
                        let (ex, no) = (grid.east_face[c], grid.north_face[c]);
                        let zx = ex.map_or(0.0, |f| z_next[f as usize]);
                        let zy = no.map_or(0.0, |f| z_next[f as usize]);
                        let r = zx.hypot(zy);
                        if r > 1.0 {
                            if let Some(f) = ex {
                                z_next[f as usize] = zx / r;
                            }
                            if let Some(f) = no {
                                z_next[f as usize] = zy / r;
                            }
                        }
                    }
                }
                TvNorm::Anisotropic => {
                    for (i, f) in grid.faces.iter().enumerate() {
                        if f.is_interior() {
                            z_next[i] = z_next[i].clamp(-1.0, 1.0);
                        }
                    }
                }
            }
            for (b, seg) in grid.boundary.iter().enumerate() {
                let c = seg.cell as usize;
                let ubar = 2.0 * u_next[c] - u[c];
                let slot = &mut z_next[seg.face as usize];
                *slot = term.dual_prox(b, *slot, sigma, ubar);
            }
            // relaxation
            for (uv, un) in u.iter_mut().zip(&u_next) {
                *uv += RELAXATION * (un - *uv);
            }
            for (zv, zn) in z.iter_mut().zip(&z_next) {
                *zv += RELAXATION * (zn - *zv);
            }
            iterations += 1;
        }

        // evaluate at the post-prox iterate: it is feasible by construction,
        // while the relaxed state may overshoot the constraint set
        report = diagnostics(grid, &term, norm, &u_next, &z_next);
        debug_assert!(
            report.dual <= report.primal + 1e-9 * gap_floor,
            "weak duality violated: dual {} > primal {}",
            report.dual,
            report.primal
        );
        let scale = report.primal.abs().max(report.dual.abs()).max(gap_floor);
        let ok_gap = report.gap <= opts.tolerance * scale;
        let ok_div = report.div_l1 <= opts.div_tolerance * scale.max(1.0);
        let ok_flux = report.flux_defect <= opts.tolerance * (1.0 + term.data().linf());
        if ok_gap && ok_div && ok_flux {
            converged = true;
            break;
        }
    }

    SaddleResult {
        u: BulkField { values: u_next },
        z: DualField { values: z_next },
        primal: report.primal,
        dual: report.dual,
        gap: report.gap,
        div_residual: report.div_residual,
        div_l1: report.div_l1,
        flux_defect: report.flux_defect,
        iterations,
        converged,
    }
}

#[derive(Debug, Default, Clone)]
struct Diagnostics {
    primal: f64,
    dual: f64,
    gap: f64,
    div_residual: f64,
    div_l1: f64,
    flux_defect: f64,
}

fn diagnostics(
    grid: &Grid,
    term: &BoundaryTerm<'_>,
    norm: TvNorm,
    u: &[f64],
    z: &[f64],
) -> Diagnostics {
    let uf = BulkField { values: u.to_vec() };
    let g = crate::grid::gradient(grid, &uf).expect("shape");
    let mut primal = tv_of_gradient(grid, &g, norm);
    for (b, seg) in grid.boundary.iter().enumerate() {
        primal += seg.weight * term.primal_value(b, u[seg.cell as usize]);
    }
    let mut dual = 0.0;
    let mut flux_defect: f64 = 0.0;
    for (b, seg) in grid.boundary.iter().enumerate() {
        let d = z[seg.face as usize];
        dual += seg.weight * term.dual_value(b, d);
        flux_defect = flux_defect.max(term.flux_defect(b, d, u[seg.cell as usize]));
    }
    let mut div_residual: f64 = 0.0;
    let mut div_l1 = 0.0;
    for (c, incident) in grid.cell_faces.iter().enumerate() {
        let mut s = 0.0;
        for &(fid, slen) in incident {
            s += slen * z[fid as usize];
        }
        let d = s / grid.cells[c].area;
        div_residual = div_residual.max(d.abs());
        div_l1 += grid.cells[c].area * d.abs();
    }
    dual -= term.bulk_bound() * div_l1;
    Diagnostics {
        primal,
        dual,
        gap: primal - dual,
        div_residual,
        div_l1,
        flux_defect,
    }
}
