use std::io::Write;

use serde::Serialize;

use super::operator::DiracOperator;
use crate::error::Result;

/// Sidecar describing how the exported matrix is laid out.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorLayout {
    pub dimension: usize,
    pub num_nodes: usize,
    pub num_mids: usize,
    pub dof_ordering: &'static str,
    pub cells_per_edge: Vec<usize>,
    pub weights: Vec<f64>,
    pub theta: Option<Vec<f64>>,
    pub a: f64,
    pub omega: f64,
    pub sup_v: f64,
}

impl DiracOperator {
    /// Write `M` in Matrix Market coordinate format (complex general, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        let k = self.weighted_matrix();
        let wts = self.weights();
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", k.dim(), k.dim(), k.nnz())?;
        for (i, j, v) in k.triplets() {
            let m = v / wts[i];
            writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, m.re, m.im)?;
        }
        Ok(())
    }

    pub fn layout(&self) -> OperatorLayout {
        let g = self.grid();
        OperatorLayout {
            dimension: self.dim(),
            num_nodes: g.num_nodes(),
            num_mids: g.num_mids(),
            dof_ordering: "u1 at vertex nodes, then interior nodes edge by edge; u2 at midpoints edge by edge",
            cells_per_edge: g.cell_counts().to_vec(),
            weights: self.weights().to_vec(),
            theta: self.theta().map(<[f64]>::to_vec),
            a: self.params().a,
            omega: self.params().omega,
            sup_v: self.sup_v(),
        }
    }
}
