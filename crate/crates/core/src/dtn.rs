//! Dirichlet-to-Neumann evaluation and its structural properties.
//!
//! `evaluate` returns one certified selection g = [z, nu] of the multivalued
//! boundary operator together with phi(h) = <g, h>; every multi-valuedness
//! statement is phrased as a certificate check. phi is 1-homogeneous, even,
//! and 1-Lipschitz in the weighted l1 norm since ||g||_inf <= 1, which is
//! what the homogeneity and stability reports measure.

use serde::Serialize;

use crate::error::Result;
use crate::grid::{boundary_integral, BoundaryData, Grid};
use crate::tvmin::{
    certify, certify_pair, solve_relaxed_dirichlet, CertificateReport, SolverOptions, TvSolution,
};

/// A certified evaluation of the boundary operator at h.
#[derive(Debug, Clone)]
pub struct DtNRecord {
    pub h: BoundaryData,
    /// Selected co-normal derivative, ||g||_inf <= 1.
    pub g: BoundaryData,
    /// phi(h) = <g, h> over the boundary.
    pub phi: f64,
    pub solution: TvSolution,
    pub certificate: CertificateReport,
    /// Total boundary flux <g, 1>; bounded by the divergence residual.
    pub total_flux: f64,
}

/// Evaluate the boundary operator: solve the relaxed Dirichlet problem and
/// read off the co-normal selection.
pub fn evaluate(grid: &Grid, h: &BoundaryData, opts: &SolverOptions) -> Result<DtNRecord> {
    let solution = solve_relaxed_dirichlet(grid, h, opts)?;
    let certificate = certify(grid, h, &solution)?;
    let g = solution.s.clone();
    let phi = grid.dot_boundary(&g, h);
    let total_flux = boundary_integral(grid, &g)?;
    Ok(DtNRecord {
        h: h.clone(),
        g,
        phi,
        solution,
        certificate,
        total_flux,
    })
}

/// phi(h) as the minimum of the relaxed functional. Agreement with
/// `evaluate(..).phi` (the pairing route) is the discrete form of the
/// vector-field independence of the boundary energy.
pub fn phi_via_min(grid: &Grid, h: &BoundaryData, opts: &SolverOptions) -> Result<f64> {
    Ok(solve_relaxed_dirichlet(grid, h, opts)?.primal_energy)
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogeneityEntry {
    pub lambda: f64,
    pub phi: f64,
    pub phi_scaled_base: f64,
    /// |phi(lambda h) - lambda phi(h)|.
    pub deviation: f64,
    /// sup norm of the scaled solve's selection; at lambda = 0 this is the
    /// whole claim (phi(0) = 0 with g = 0 admissible).
    pub g_linf: f64,
    /// Defects of z(lambda h) checked against u(h): the same field serves
    /// both data sets. Skipped at lambda = 0, where the zero field pairs
    /// with the zero solution only.
    pub cross_certificate: Option<CertificateReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogeneityReport {
    pub phi_base: f64,
    pub entries: Vec<HomogeneityEntry>,
}

/// Test order-one homogeneity of phi and order-zero homogeneity of the
/// operator: for each lambda, compare phi(lambda h) with lambda phi(h) and
/// cross-certify the scaled solve's vector field against the base solution.
pub fn homogeneity_report(
    grid: &Grid,
    h: &BoundaryData,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<HomogeneityReport> {
    let base = evaluate(grid, h, opts)?;
    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let scaled = BoundaryData {
            values: h.values.iter().map(|v| lambda * v).collect(),
        };
        let record = evaluate(grid, &scaled, opts)?;
        let cross = if lambda > 0.0 {
            Some(certify_pair(grid, h, &base.solution.u, &record.solution.z)?)
        } else {
            None
        };
        entries.push(HomogeneityEntry {
            lambda,
            phi: record.phi,
            phi_scaled_base: lambda * base.phi,
            deviation: (record.phi - lambda * base.phi).abs(),
            g_linf: record.g.linf(),
            cross_certificate: cross,
        });
    }
    Ok(HomogeneityReport {
        phi_base: base.phi,
        entries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityEntry {
    /// ||h_n - h||_1 (weighted).
    pub distance_l1: f64,
    pub phi: f64,
    /// |phi(h_n) - phi(h)|; bounded by distance_l1 since ||g||_inf <= 1.
    pub phi_deviation: f64,
    /// |<g_n - g, xi>| for each fixed test function.
    pub weak_pairing_deviation: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub phi_base: f64,
    pub entries: Vec<StabilityEntry>,
}

/// Probe the stability of phi and of the co-normal selections along a
/// sequence of perturbed data. Test functions xi: 1, x, y, x^2 - y^2 on the
/// boundary.
pub fn stability_probe(
    grid: &Grid,
    h: &BoundaryData,
    perturbations: &[BoundaryData],
    opts: &SolverOptions,
) -> Result<StabilityReport> {
    let tests: Vec<BoundaryData> = vec![
        BoundaryData::constant(grid, 1.0),
        BoundaryData::from_fn(grid, |x, _| x),
        BoundaryData::from_fn(grid, |_, y| y),
        BoundaryData::from_fn(grid, |x, y| x * x - y * y),
    ];
    let base = evaluate(grid, h, opts)?;
    let mut entries = Vec::new();
    for hn in perturbations {
        let record = evaluate(grid, hn, opts)?;
        let diff = BoundaryData {
            values: hn.values.iter().zip(&h.values).map(|(a, b)| a - b).collect(),
        };
        let gdiff = BoundaryData {
            values: record
                .g
                .values
                .iter()
                .zip(&base.g.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        entries.push(StabilityEntry {
            distance_l1: diff.l1(grid),
            phi: record.phi,
            phi_deviation: (record.phi - base.phi).abs(),
            weak_pairing_deviation: tests
                .iter()
                .map(|xi| grid.dot_boundary(&gdiff, xi).abs())
                .collect(),
        });
    }
    Ok(StabilityReport {
        phi_base: base.phi,
        entries,
    })
}

/// Smoothed nondecreasing truncations p_k(r) = blend(k r) with a cubic
/// Hermite blend of clamp around the kink; p_k(0) = 0.
pub fn smooth_truncation(k: f64, r: f64) -> f64 {
    let s = k * r;
    let a = 0.75;
    let b = 1.25;
    let t = s.abs();
    let v = if t <= a {
        t
    } else if t >= b {
        1.0
    } else {
        // cubic Hermite on [a, b]: value a -> 1, slope 1 -> 0
        let x = (t - a) / (b - a);
        let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
        let h10 = x * (1.0 - x) * (1.0 - x);
        let h01 = x * x * (3.0 - 2.0 * x);
        a * h00 + (b - a) * h10 + h01
    };
    v.copysign(s)
}

/// Accretivity pairing <g - g', p_k(h - h')> for the fixed truncation
/// family k in {1, 10, 100}; completely accretive operators keep every
/// entry nonnegative.
pub fn accretivity_pairings(grid: &Grid, a: &DtNRecord, b: &DtNRecord) -> Vec<f64> {
    [1.0, 10.0, 100.0]
        .iter()
        .map(|&k| {
            let mut s = 0.0;
            for (i, seg) in grid.boundary.iter().enumerate() {
                let dg = a.g.values[i] - b.g.values[i];
                let dh = a.h.values[i] - b.h.values[i];
                s += seg.weight * dg * smooth_truncation(k, dh);
            }
            s
        })
        .collect()
}

/// Entropy-transport monitor ||h - mean||_1 / phi(h); None when phi is
/// numerically zero (constant data).
pub fn entropy_transport_ratio(grid: &Grid, record: &DtNRecord) -> Option<f64> {
    let mean = boundary_integral(grid, &record.h).ok()? / grid.perimeter;
    let dev = BoundaryData {
        values: record.h.values.iter().map(|v| v - mean).collect(),
    };
    let num = dev.l1(grid);
    let floor = 1e-12 * (1.0 + record.h.linf()) * grid.perimeter;
    (record.phi > floor).then(|| num / record.phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_disk_grid, build_square_grid};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_h(grid: &Grid, seed: u64) -> BoundaryData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BoundaryData {
            values: (0..grid.n_boundary())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        }
    }

    #[test]
    fn constant_data_gives_zero_selection() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = BoundaryData::constant(&grid, 3.0);
        let rec = evaluate(&grid, &h, &SolverOptions::default()).unwrap();
        assert!(rec.phi.abs() <= 1e-8 * 3.0 * grid.perimeter);
        assert!(rec.g.linf() < 1e-7);
    }

    #[test]
    fn record_invariants_hold() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = random_h(&grid, 1);
        let rec = evaluate(&grid, &h, &SolverOptions::with_tolerance(1e-8)).unwrap();
        assert!(rec.solution.converged);
        assert!(rec.g.linf() <= 1.0 + 1e-12);
        // zero total flux up to the divergence residual
        assert!(rec.total_flux.abs() <= rec.solution.div_l1 + 1e-12);
        // 0 <= phi <= ||h||_1 and phi agrees with the minimum
        assert!(rec.phi >= -1e-10);
        assert!(rec.phi <= h.l1(&grid) + 1e-9);
        let diff = (rec.phi - rec.solution.primal_energy).abs();
        assert!(diff <= rec.solution.gap + rec.solution.div_l1 * h.linf() + 1e-12);
    }

    #[test]
    fn phi_is_even() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = random_h(&grid, 2);
        let opts = SolverOptions::with_tolerance(1e-8);
        let neg = BoundaryData {
            values: h.values.iter().map(|v| -v).collect(),
        };
        let a = phi_via_min(&grid, &h, &opts).unwrap();
        let b = phi_via_min(&grid, &neg, &opts).unwrap();
        assert!((a - b).abs() <= 1e-6 * a.max(1.0));
    }

    #[test]
    fn homogeneity_tenfold() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let h = random_h(&grid, 3);
        let opts = SolverOptions::with_tolerance(1e-8);
        let report = homogeneity_report(&grid, &h, &[0.0, 1.0, 10.0], &opts).unwrap();
        for e in &report.entries {
            assert!(
                e.deviation <= 1e-4 * report.phi_base.max(1e-9) * e.lambda.max(1.0),
                "lambda {}: deviation {}",
                e.lambda,
                e.deviation
            );
            match &e.cross_certificate {
                Some(cert) => assert!(
                    cert.max_defect() <= 1e-4 * grid.perimeter,
                    "lambda {}: {:?}",
                    e.lambda,
                    cert
                ),
                None => {
                    // zero case: phi(0) = 0 and g = 0 admissible
                    assert_eq!(e.lambda, 0.0);
                    assert!(e.phi.abs() <= 1e-10);
                    assert!(e.g_linf <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn stability_is_lipschitz() {
        let grid = build_disk_grid(16, 1.0).unwrap();
        let h = random_h(&grid, 4);
        let rho = random_h(&grid, 5);
        let opts = SolverOptions::with_tolerance(1e-8);
        let perturbed: Vec<BoundaryData> = [1.0, 2.0, 4.0]
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
        let report = stability_probe(&grid, &h, &perturbed, &opts).unwrap();
        for e in &report.entries {
            assert!(e.phi_deviation <= e.distance_l1 + 2e-6 * grid.perimeter);
        }
        // identical data: zero deviations
        let same = stability_probe(&grid, &h, &[h.clone()], &opts).unwrap();
        assert!(same.entries[0].phi_deviation <= 1e-6 * grid.perimeter);
    }

    #[test]
    fn smooth_truncations_are_monotone_and_zero_at_zero() {
        for k in [1.0, 10.0, 100.0] {
            assert_eq!(smooth_truncation(k, 0.0), 0.0);
            let mut last = -1.0;
            let mut r = -2.0;
            while r <= 2.0 {
                let v = smooth_truncation(k, r);
                assert!(v >= last - 1e-12);
                assert!(v.abs() <= 1.0 + 1e-12);
                last = v;
                r += 0.01;
            }
        }
    }

    #[test]
    fn accretivity_pairing_nonnegative() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let opts = SolverOptions::with_tolerance(1e-9);
        let mut worst: f64 = 0.0;
        for seed in 0..4 {
            let a = evaluate(&grid, &random_h(&grid, 10 + seed), &opts).unwrap();
            let b = evaluate(&grid, &random_h(&grid, 20 + seed), &opts).unwrap();
            for p in accretivity_pairings(&grid, &a, &b) {
                worst = worst.min(p);
            }
        }
        assert!(worst >= -1e-6 * grid.perimeter, "worst pairing {worst}");
    }

    #[test]
    fn entropy_ratio_skips_constants() {
        let grid = build_square_grid(8, 1.0).unwrap();
        let opts = SolverOptions::default();
        let c = evaluate(&grid, &BoundaryData::constant(&grid, 2.0), &opts).unwrap();
        assert!(entropy_transport_ratio(&grid, &c).is_none());
        let r = evaluate(&grid, &random_h(&grid, 6), &opts).unwrap();
        assert!(entropy_transport_ratio(&grid, &r).unwrap() > 0.0);
    }
}
