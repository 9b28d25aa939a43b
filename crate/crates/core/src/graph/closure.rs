use super::metric::{Edge, MetricGraph};
use super::periodic::PeriodicGraph;
use super::Shift;
use crate::error::{Error, Result};
use crate::fields::SpinorField;

/// Finite torus made of `N_1 x ... x N_d` glued copies of a fundamental cell.
///
/// Vertex `q` of copy `c` has index `c * num_orbits + q`, edge `e` of copy `c`
/// has index `c * cell_edges + e`, and copies are numbered with the first
/// lattice direction fastest.
#[derive(Clone, Debug)]
pub struct PeriodicClosure {
    graph: MetricGraph,
    dim: usize,
    cells: [usize; 2],
    orbits: usize,
    cell_edges: usize,
    twist: Vec<Shift>,
}

impl PeriodicClosure {
    /// Closure with `n[i]` copies along generator `i`; every `n[i]` must be at least 3.
    pub fn new(g: &PeriodicGraph, n: &[usize]) -> Result<Self> {
        if n.len() != g.dim() {
            return Err(Error::Closure(format!(
                "expected {} cell counts, got {}",
                g.dim(),
                n.len()
            )));
        }
        if let Some(&bad) = n.iter().find(|&&k| k < 3) {
            return Err(Error::Closure(format!("cell count {bad} is below the minimum of 3")));
        }
        Self::build(g, n)
    }

    /// Single copy of the cell with every gluing closed onto itself: the
    /// quotient graph carrying the shifts needed for Bloch twisting.
    pub fn bloch_cell(g: &PeriodicGraph) -> Self {
        Self::build(g, &vec![1; g.dim()]).expect("quotient of a valid periodic graph")
    }

    /// A finite graph seen as a closure with no lattice directions.
    pub fn finite(graph: MetricGraph) -> Self {
        let cell_edges = graph.num_edges();
        PeriodicClosure {
            dim: 0,
            cells: [1, 1],
            orbits: graph.num_vertices(),
            cell_edges,
            twist: vec![[0; 2]; cell_edges],
            graph,
        }
    }

    fn build(g: &PeriodicGraph, n: &[usize]) -> Result<Self> {
        let dim = g.dim();
        let mut cells = [1usize; 2];
        cells[..dim].copy_from_slice(n);
        let ncell = cells[0] * cells[1];
        let orbits = g.num_orbits();
        let cell = g.cell();
        let reps = g.representatives();

        let mut labels = Vec::with_capacity(ncell * orbits);
        for c in 0..ncell {
            let cc = coords(cells, c);
            for &v in reps {
                let tag = if dim == 2 {
                    format!("{},{}", cc[0], cc[1])
                } else {
                    cc[0].to_string()
                };
                labels.push(format!("{}@{}", cell.labels()[v], tag));
            }
        }

        let mut edges = Vec::with_capacity(ncell * cell.num_edges());
        let mut twist = Vec::with_capacity(ncell * cell.num_edges());
        for c in 0..ncell {
            let cc = coords(cells, c);
            for e in cell.edges() {
                let (qt, st) = g.orbit_of(e.tail);
                let (qh, sh) = g.orbit_of(e.head);
                let (ct, wt) = wrap(cells, [cc[0] + st[0], cc[1] + st[1]]);
                let (ch, wh) = wrap(cells, [cc[0] + sh[0], cc[1] + sh[1]]);
                edges.push(Edge {
                    tail: ct * orbits + qt,
                    head: ch * orbits + qh,
                    length: e.length,
                });
                twist.push([wh[0] - wt[0], wh[1] - wt[1]]);
            }
        }
        let graph = MetricGraph::new(labels, edges)?;
        Ok(PeriodicClosure {
            graph,
            dim,
            cells,
            orbits,
            cell_edges: cell.num_edges(),
            twist,
        })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    /// Number of lattice directions (0 for a plain finite graph).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn num_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn num_orbits(&self) -> usize {
        self.orbits
    }

    /// Edge of the fundamental cell that closure edge `e` is a copy of.
    pub fn cell_edge(&self, e: usize) -> usize {
        e % self.cell_edges
    }

    pub fn cell_of_vertex(&self, v: usize) -> usize {
        v / self.orbits
    }

    pub fn cell_of_edge(&self, e: usize) -> usize {
        e / self.cell_edges
    }

    /// Lattice coordinates of a copy index.
    pub fn cell_coords(&self, c: usize) -> Shift {
        coords(self.cells, c)
    }

    /// Net number of times edge `e` winds around each torus direction when
    /// followed from tail to head.
    pub fn twist(&self, e: usize) -> Shift {
        self.twist[e]
    }

    fn shift_cell(&self, c: usize, k: Shift) -> usize {
        let cc = coords(self.cells, c);
        wrap(self.cells, [cc[0] + k[0], cc[1] + k[1]]).0
    }

    /// Image of vertex `v` under the lattice translation by `k`.
    pub fn translate_vertex(&self, v: usize, k: Shift) -> usize {
        self.shift_cell(v / self.orbits, k) * self.orbits + v % self.orbits
    }

    /// Image of edge `e` under the lattice translation by `k`.
    pub fn translate_edge(&self, e: usize, k: Shift) -> usize {
        self.shift_cell(e / self.cell_edges, k) * self.cell_edges + e % self.cell_edges
    }

    /// All distinct translations of the closure, as lattice shifts.
    pub fn translations(&self) -> Vec<Shift> {
        (0..self.num_cells())
            .map(|c| {
                let cc = coords(self.cells, c);
                [cc[0], cc[1]]
            })
            .collect()
    }
}

fn coords(cells: [usize; 2], c: usize) -> Shift {
    [(c % cells[0]) as i64, (c / cells[0]) as i64]
}

// Reduce a lattice position onto the torus; returns the copy index and the
// number of wraps in each direction.
fn wrap(cells: [usize; 2], s: Shift) -> (usize, Shift) {
    let n = [cells[0] as i64, cells[1] as i64];
    let w = [s[0].div_euclid(n[0]), s[1].div_euclid(n[1])];
    let r = [s[0].rem_euclid(n[0]), s[1].rem_euclid(n[1])];
    ((r[0] + n[0] * r[1]) as usize, w)
}

/// Translated field `(k*f)(x) = f(T^{-k} x)`: the value sitting on copy `c`
/// moves to copy `c + k`.
///
/// The grid of `f` must be built on `c.graph()` with equal resolution on all
/// copies of a cell edge; this holds for every grid made by
/// [`crate::fields::GraphGrid::periodic`].
pub fn orbit_translate(c: &PeriodicClosure, k: Shift, f: &SpinorField) -> SpinorField {
    let grid = f.grid();
    let mut out = vec![crate::C64::new(0.0, 0.0); f.values().len()];
    for v in 0..c.graph().num_vertices() {
        out[grid.vertex_node(c.translate_vertex(v, k))] = f.values()[grid.vertex_node(v)];
    }
    for e in 0..c.graph().num_edges() {
        let te = c.translate_edge(e, k);
        let n = grid.cells_on(e);
        assert_eq!(n, grid.cells_on(te), "grid is not translation invariant");
        for j in 1..n {
            out[grid.node(te, j)] = f.values()[grid.node(e, j)];
        }
        for j in 0..n {
            out[grid.mid(te, j)] = f.values()[grid.mid(e, j)];
        }
    }
    SpinorField::from_values(f.grid_arc().clone(), out).expect("same layout")
}
