use serde::Serialize;

use crate::fields::SpinorField;
use crate::graph::Endpoint;
use crate::C64;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VertexDefect {
    pub vertex: usize,
    pub degree: usize,
    /// Always zero: the first component has one unknown per vertex.
    pub continuity: f64,
    /// `|sum s(xi) u2_e(xi)|` with extrapolated traces.
    pub kirchhoff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexReport {
    pub vertices: Vec<VertexDefect>,
    pub max_kirchhoff: f64,
    pub tol: f64,
    pub pass: bool,
    pub trace_rule: &'static str,
}

/// Trace of `u2` at an edge end by one-sided extrapolation from the two
/// nearest midpoints, `(3 u_adj - u_next) / 2`; edges with a single cell use
/// the midpoint value.
pub(crate) fn u2_trace(f: &SpinorField, e: usize, end: Endpoint) -> C64 {
    let grid = f.grid();
    let n = grid.cells_on(e);
    let (adj, next) = match end {
        Endpoint::Tail => (0, 1),
        Endpoint::Head => (n - 1, n.wrapping_sub(2)),
    };
    let ua = f.values()[grid.mid(e, adj)];
    if n == 1 {
        return ua;
    }
    let un = f.values()[grid.mid(e, next)];
    (ua * 3.0 - un) * 0.5
}

pub fn check_vertex_conditions(f: &SpinorField, tol: f64) -> VertexReport {
    let g = f.grid().graph();
    let vertices: Vec<VertexDefect> = (0..g.num_vertices())
        .map(|v| {
            let sum: C64 = g
                .incidence(v)
                .iter()
                .map(|&(e, end)| u2_trace(f, e, end) * end.sign())
                .sum();
            VertexDefect {
                vertex: v,
                degree: g.degree(v),
                continuity: 0.0,
                kirchhoff: sum.norm(),
            }
        })
        .collect();
    let max_kirchhoff = vertices.iter().map(|d| d.kirchhoff).fold(0.0, f64::max);
    VertexReport {
        vertices,
        max_kirchhoff,
        tol,
        pass: max_kirchhoff <= tol,
        trace_rule: "one-sided second-order extrapolation (3 u_adj - u_next) / 2",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GraphGrid;
    use crate::graph::{Edge, MetricGraph};
    use std::sync::Arc;

    #[test]
    fn star_with_outgoing_edges() {
        let g = MetricGraph::new(
            (0..4).map(|i| i.to_string()).collect(),
            (1..4).map(|h| Edge { tail: 0, head: h, length: 1.0 }).collect(),
        )
        .unwrap();
        let grid = Arc::new(GraphGrid::uniform(&g, 5).unwrap());
        let f = SpinorField::from_fn(grid, |_, _| C64::new(0.0, 0.0), |_, _| C64::new(1.0, 0.0));
        let r = check_vertex_conditions(&f, 1e-12);
        assert!((r.vertices[0].kirchhoff - 3.0).abs() < 1e-15);
        assert!(!r.pass);
    }

    #[test]
    fn degree_two_reduces_to_continuity() {
        let g = MetricGraph::new(
            (0..3).map(|i| i.to_string()).collect(),
            vec![Edge { tail: 0, head: 1, length: 1.0 }, Edge { tail: 1, head: 2, length: 1.0 }],
        )
        .unwrap();
        let grid = Arc::new(GraphGrid::uniform(&g, 8).unwrap());
        // Linear u2 across the middle vertex: traces match exactly.
        let f = SpinorField::from_fn(grid.clone(), |_, _| C64::new(0.0, 0.0), |e, s| C64::new(e as f64 + s, 0.0));
        assert!(check_vertex_conditions(&f, 1e-12).vertices[1].kirchhoff < 1e-14);
        // A jump of 1 in u2 shows up as a defect of 1.
        let f = SpinorField::from_fn(grid, |_, _| C64::new(0.0, 0.0), |e, _| C64::new(e as f64, 0.0));
        assert!((check_vertex_conditions(&f, 1e-12).vertices[1].kirchhoff - 1.0).abs() < 1e-14);
    }
}
