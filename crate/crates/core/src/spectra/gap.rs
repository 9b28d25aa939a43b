use serde::Serialize;

use super::bands::BandStructure;
use crate::dirac::ProblemParameters;
use crate::graph::PeriodicGraph;

/// Smallest accepted discretization tolerance.
pub const TOL_H_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapReport {
    pub min_abs_lambda: f64,
    pub a: f64,
    pub sup_v: f64,
    pub tol_h: f64,
    pub lower_bound_pass: bool,
    pub upper_bound_pass: bool,
}

/// Compare the sampled spectrum with the bounds `a <= min |lambda| <= a + sup V`.
///
/// `coarse` is the same sweep on a grid with twice the cell width; the
/// change in `min |lambda|` between the two serves as the discretization
/// tolerance.
pub fn verify_gap(
    bands: &BandStructure,
    coarse: Option<&BandStructure>,
    g: &PeriodicGraph,
    p: &ProblemParameters,
) -> GapReport {
    let min_abs_lambda = bands.min_abs();
    let tol_h = coarse
        .map(|c| (c.min_abs() - min_abs_lambda).abs())
        .unwrap_or(0.0)
        .max(TOL_H_FLOOR);
    let sup_v = sup_potential(g, p);
    GapReport {
        min_abs_lambda,
        a: p.a,
        sup_v,
        tol_h,
        lower_bound_pass: min_abs_lambda >= p.a - tol_h,
        upper_bound_pass: min_abs_lambda <= p.a + sup_v + tol_h,
    }
}

/// Supremum of the potential over the cell, sampled at 1001 points per edge.
pub fn sup_potential(g: &PeriodicGraph, p: &ProblemParameters) -> f64 {
    const SAMPLES: usize = 1000;
    g.cell()
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(e, edge)| {
            (0..=SAMPLES).map(move |i| {
                p.potential
                    .value(e, edge.length * i as f64 / SAMPLES as f64, edge.length)
            })
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::Potential;
    use crate::graph::{build_example, ExampleKind};
    use crate::spectra::{band_sweep, theta_grid};

    #[test]
    fn cosine_potential_stays_between_the_bounds() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::new(1.0, 0.0, Potential::Cosine { amplitude: 0.3 }).unwrap();
        let thetas = theta_grid(1, 16);
        let coarse = band_sweep(&g, &[32], &p, &thetas, 4).unwrap();
        let fine = band_sweep(&g, &[64], &p, &thetas, 4).unwrap();
        let r = verify_gap(&fine, Some(&coarse), &g, &p);
        assert!((r.sup_v - 0.6).abs() < 1e-12);
        assert!(r.lower_bound_pass && r.upper_bound_pass, "{r:?}");
        assert!(r.min_abs_lambda > 1.0 && r.min_abs_lambda < 1.6);
    }

    #[test]
    fn constant_potential_is_tight() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::new(1.0, 0.0, Potential::Constant(0.5)).unwrap();
        let b = band_sweep(&g, &[16], &p, &theta_grid(1, 8), 2).unwrap();
        let r = verify_gap(&b, None, &g, &p);
        assert!((r.min_abs_lambda - 1.5).abs() < 1e-12);
        assert!(r.lower_bound_pass && r.upper_bound_pass);
    }
}
