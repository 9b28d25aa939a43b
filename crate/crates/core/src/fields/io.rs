use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::SpinorField;
use super::grid::GraphGrid;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    edge_id: usize,
    kind: String,
    local_index: usize,
    arclength: f64,
    re_u1: Option<f64>,
    im_u1: Option<f64>,
    re_u2: Option<f64>,
    im_u2: Option<f64>,
}

impl SpinorField {
    /// One row per node (vertex nodes repeated on every incident edge) and per
    /// midpoint, edge by edge.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let grid = self.grid();
        let mut out = csv::Writer::from_writer(w);
        for e in 0..grid.graph().num_edges() {
            let h = grid.step(e);
            let n = grid.cells_on(e);
            for j in 0..=n {
                let z = self.values()[grid.node(e, j)];
                out.serialize(Row {
                    edge_id: e,
                    kind: "node".into(),
                    local_index: j,
                    arclength: j as f64 * h,
                    re_u1: Some(z.re),
                    im_u1: Some(z.im),
                    re_u2: None,
                    im_u2: None,
                })?;
            }
            for j in 0..n {
                let z = self.values()[grid.mid(e, j)];
                out.serialize(Row {
                    edge_id: e,
                    kind: "mid".into(),
                    local_index: j,
                    arclength: (j as f64 + 0.5) * h,
                    re_u1: None,
                    im_u1: None,
                    re_u2: Some(z.re),
                    im_u2: Some(z.im),
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(grid: Arc<GraphGrid>, r: R) -> Result<Self> {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        let mut seen = vec![false; grid.len()];
        let ne = grid.graph().num_edges();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row?;
            if row.edge_id >= ne {
                return Err(Error::Input(format!("edge {} out of range", row.edge_id)));
            }
            let n = grid.cells_on(row.edge_id);
            let (idx, re, im) = match row.kind.as_str() {
                "node" if row.local_index <= n => {
                    (grid.node(row.edge_id, row.local_index), row.re_u1, row.im_u1)
                }
                "mid" if row.local_index < n => {
                    (grid.mid(row.edge_id, row.local_index), row.re_u2, row.im_u2)
                }
                _ => {
                    return Err(Error::Input(format!(
                        "bad row: kind {} index {} on edge {}",
                        row.kind, row.local_index, row.edge_id
                    )))
                }
            };
            let (Some(re), Some(im)) = (re, im) else {
                return Err(Error::Input(format!("missing value on edge {}", row.edge_id)));
            };
            values[idx] = C64::new(re, im);
            seen[idx] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Input("field file does not cover the grid".into()));
        }
        SpinorField::from_values(grid, values)
    }
}
