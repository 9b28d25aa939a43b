use std::sync::Arc;

use serde::Serialize;

use crate::dirac::{assemble, ProblemParameters};
use crate::error::{Error, Result};
use crate::fields::{GraphGrid, SpinorField};
use crate::graph::{PeriodicClosure, PeriodicGraph};
use crate::C64;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffSample {
    pub n: usize,
    /// Cells in the closure carrying the profile.
    pub cells: usize,
    /// `|v_N'|_2^2` of the normalized profile.
    pub derivative_sq: f64,
    /// `|A v_N|_2`.
    pub a_norm: f64,
    pub l2_norm: f64,
}

/// Normalized plateau profiles `v_N = (eta_N, 0) / |eta_N|_2` on a chain of
/// `2N + 2` cells: `eta_N = 1` on cells within distance `N - 1` of cell 0,
/// zero from distance `N` on, linear along the edges in between.
pub fn cutoff_test_functions(
    g: &PeriodicGraph,
    ns: &[usize],
    cells_per_edge: &[usize],
    p: &ProblemParameters,
) -> Result<Vec<CutoffSample>> {
    if g.dim() != 1 {
        return Err(Error::Input("cutoff profiles are built on one-dimensional lattices".into()));
    }
    ns.iter()
        .map(|&n| {
            if n < 1 {
                return Err(Error::Input("N must be positive".into()));
            }
            let m = 2 * n + 2;
            let c = PeriodicClosure::new(g, &[m])?;
            let grid = Arc::new(GraphGrid::periodic(&c, cells_per_edge)?);
            let eta = |v: usize| {
                let cell = c.cell_of_vertex(v);
                let dist = cell.min(m - cell);
                if dist < n {
                    1.0
                } else {
                    0.0
                }
            };
            let graph = c.graph().clone();
            let f = SpinorField::from_fn(
                grid.clone(),
                |e, s| {
                    let edge = graph.edge(e);
                    let t = s / edge.length;
                    C64::new(eta(edge.tail) * (1.0 - t) + eta(edge.head) * t, 0.0)
                },
                |_, _| C64::new(0.0, 0.0),
            );
            let v = f.scaled(C64::new(1.0 / f.norm_l2(), 0.0));
            let op = assemble(&c, grid, p, None)?;
            Ok(CutoffSample {
                n,
                cells: m,
                derivative_sq: v.derivative_sq(),
                a_norm: op.apply(&v)?.norm_l2(),
                l2_norm: v.norm_l2(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_example, ExampleKind};

    #[test]
    fn derivative_energy_halves_and_a_norm_tends_to_a() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        let s = cutoff_test_functions(&g, &[8, 16, 32], &[8], &p).unwrap();
        for w in s.windows(2) {
            let r = w[0].derivative_sq / w[1].derivative_sq;
            assert!((r - 2.0).abs() < 0.4, "{r}");
        }
        for x in &s {
            assert!((x.l2_norm - 1.0).abs() < 1e-14);
            let expect = (1.0 + x.derivative_sq).sqrt();
            assert!((x.a_norm - expect).abs() < 1e-12);
        }
    }
}
