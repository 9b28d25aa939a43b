use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::decompose::{eigenvalues, EigenRequest};
use crate::dirac::{assemble, ProblemParameters};
use crate::error::{Error, Result};
use crate::fields::GraphGrid;
use crate::graph::{PeriodicClosure, PeriodicGraph};

/// Bloch eigenvalues sampled over quasi-momenta.
#[derive(Clone, Debug, Serialize)]
pub struct BandStructure {
    /// Cells per cell edge of the grid used.
    pub cells_per_edge: Vec<usize>,
    pub thetas: Vec<Vec<f64>>,
    /// For every theta, the requested eigenvalues closest to zero, ascending.
    pub bands: Vec<Vec<f64>>,
    /// Largest negative and smallest positive sampled eigenvalue.
    pub gap: Option<(f64, f64)>,
}

impl BandStructure {
    pub fn min_abs(&self) -> f64 {
        self.bands
            .iter()
            .flatten()
            .map(|x| x.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// The `j`-th positive eigenvalue (from 0) at every theta.
    pub fn positive_band(&self, j: usize) -> Vec<f64> {
        self.bands
            .iter()
            .map(|b| b.iter().copied().filter(|&x| x > 0.0).nth(j).unwrap_or(f64::NAN))
            .collect()
    }

    /// CSV with columns `theta_1[,theta_2],band_index,lambda`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.thetas.first().map_or(1, Vec::len);
        let mut header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).collect();
        header.push("band_index".into());
        header.push("lambda".into());
        out.write_record(&header)?;
        for (t, b) in self.thetas.iter().zip(&self.bands) {
            for (i, l) in b.iter().enumerate() {
                let mut rec: Vec<String> = t.iter().map(|x| format!("{x:.17e}")).collect();
                rec.push(i.to_string());
                rec.push(format!("{l:.17e}"));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Uniform samples `2 pi j / k` in every lattice direction.
pub fn theta_grid(dim: usize, k: usize) -> Vec<Vec<f64>> {
    let t = |j: usize| std::f64::consts::TAU * j as f64 / k as f64;
    match dim {
        1 => (0..k).map(|j| vec![t(j)]).collect(),
        _ => (0..k * k).map(|j| vec![t(j % k), t(j / k)]).collect(),
    }
}

/// Eigenvalues of the Bloch-twisted single-cell operator for every theta.
pub fn band_sweep(
    g: &PeriodicGraph,
    cells_per_edge: &[usize],
    p: &ProblemParameters,
    thetas: &[Vec<f64>],
    m: usize,
) -> Result<BandStructure> {
    let tau = std::f64::consts::TAU;
    for t in thetas {
        if t.len() != g.dim() || t.iter().any(|x| !(0.0..tau).contains(x)) {
            return Err(Error::Input(format!("theta {t:?} is not in [0, 2pi)^{}", g.dim())));
        }
    }
    let cell = PeriodicClosure::bloch_cell(g);
    let grid = Arc::new(GraphGrid::periodic(&cell, cells_per_edge)?);
    let m = m.min(grid.len());
    let bands = thetas
        .par_iter()
        .map(|t| {
            let op = assemble(&cell, grid.clone(), p, Some(t))?;
            let req = if m == op.dim() {
                EigenRequest::All
            } else {
                EigenRequest::Count(m)
            };
            eigenvalues(&op, req)
        })
        .collect::<Result<Vec<_>>>()?;
    let all = bands.iter().flatten().copied();
    let neg = all.clone().filter(|&x| x < 0.0).fold(f64::NEG_INFINITY, f64::max);
    let pos = all.filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let gap = (neg.is_finite() && pos.is_finite()).then_some((neg, pos));
    Ok(BandStructure {
        cells_per_edge: cells_per_edge.to_vec(),
        thetas: thetas.to_vec(),
        bands,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_example, ExampleKind};

    #[test]
    fn free_chain_bands_follow_the_symbol() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        let n = 16;
        let thetas = theta_grid(1, 8);
        let b = band_sweep(&g, &[n], &p, &thetas, 4).unwrap();
        let h = 1.0 / n as f64;
        for (t, band) in thetas.iter().zip(&b.bands) {
            // Closest branch k = theta - 2 pi l with |k| <= pi.
            let k = if t[0] > std::f64::consts::PI { t[0] - std::f64::consts::TAU } else { t[0] };
            let lam = (1.0 + (2.0 / h * (k * h / 2.0).sin()).powi(2)).sqrt();
            let lowest = band.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
            assert!((lowest - lam).abs() < 1e-12, "{t:?}: {lowest} vs {lam}");
        }
        assert!((b.min_abs() - 1.0).abs() < 1e-12);
        let (lo, hi) = b.gap.unwrap();
        assert!(lo < 0.0 && hi > 0.0);
    }

    #[test]
    fn theta_out_of_range_rejected() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        assert!(band_sweep(&g, &[4], &p, &[vec![7.0]], 2).is_err());
    }

    #[test]
    fn csv_has_one_row_per_eigenvalue() {
        let g = build_example(ExampleKind::SquareLattice).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        let b = band_sweep(&g, &[4, 4], &p, &theta_grid(2, 2), 3).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta_1,theta_2,band_index,lambda"));
        assert_eq!(text.lines().count(), 1 + 4 * 3);
    }
}
