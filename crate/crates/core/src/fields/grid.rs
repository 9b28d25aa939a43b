use crate::error::{Error, Result};
use crate::graph::{Endpoint, MetricGraph, PeriodicClosure};

/// Staggered grid. Node indices: vertices first (node `v` is vertex `v`),
/// then the interior nodes edge by edge. Midpoint indices follow all nodes.
#[derive(Clone, Debug)]
pub struct GraphGrid {
    graph: MetricGraph,
    n: Vec<usize>,
    h: Vec<f64>,
    interior_offset: Vec<usize>,
    mid_offset: Vec<usize>,
    num_nodes: usize,
    weights: Vec<f64>,
}

impl GraphGrid {
    /// Grid with `n[e]` cells on edge `e`.
    pub fn new(graph: &MetricGraph, n: &[usize]) -> Result<Self> {
        if n.len() != graph.num_edges() {
            return Err(Error::Input(format!(
                "{} cell counts for {} edges",
                n.len(),
                graph.num_edges()
            )));
        }
        if n.contains(&0) {
            return Err(Error::Input("every edge needs at least one cell".into()));
        }
        let nv = graph.num_vertices();
        let h: Vec<f64> = graph
            .edges()
            .iter()
            .zip(n)
            .map(|(e, &k)| e.length / k as f64)
            .collect();
        let mut interior_offset = Vec::with_capacity(n.len());
        let mut next = nv;
        for &k in n {
            interior_offset.push(next);
            next += k - 1;
        }
        let num_nodes = next;
        let mut mid_offset = Vec::with_capacity(n.len());
        for &k in n {
            mid_offset.push(next);
            next += k;
        }
        let mut weights = vec![0.0; next];
        for v in 0..nv {
            weights[v] = graph.incidence(v).iter().map(|&(e, _)| 0.5 * h[e]).sum();
        }
        for (e, &k) in n.iter().enumerate() {
            for j in 0..k - 1 {
                weights[interior_offset[e] + j] = h[e];
            }
            for j in 0..k {
                weights[mid_offset[e] + j] = h[e];
            }
        }
        Ok(GraphGrid {
            graph: graph.clone(),
            n: n.to_vec(),
            h,
            interior_offset,
            mid_offset,
            num_nodes,
            weights,
        })
    }

    /// Same number of cells on every edge.
    pub fn uniform(graph: &MetricGraph, n: usize) -> Result<Self> {
        Self::new(graph, &vec![n; graph.num_edges()])
    }

    /// Grid on a closure with `n_cell[e]` cells on every copy of cell edge `e`.
    pub fn periodic(closure: &PeriodicClosure, n_cell: &[usize]) -> Result<Self> {
        let g = closure.graph();
        let per_cell = g.num_edges() / closure.num_cells();
        if n_cell.len() != per_cell {
            return Err(Error::Input(format!(
                "{} cell counts for {} cell edges",
                n_cell.len(),
                per_cell
            )));
        }
        let n: Vec<usize> = (0..g.num_edges()).map(|e| n_cell[closure.cell_edge(e)]).collect();
        Self::new(g, &n)
    }

    /// The grid with every cell halved.
    pub fn refined(&self) -> Self {
        let n: Vec<usize> = self.n.iter().map(|k| 2 * k).collect();
        Self::new(&self.graph, &n).expect("refinement of a valid grid")
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_mids(&self) -> usize {
        self.weights.len() - self.num_nodes
    }

    /// Number of complex unknowns.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn cells_on(&self, e: usize) -> usize {
        self.n[e]
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.n
    }

    pub fn step(&self, e: usize) -> f64 {
        self.h[e]
    }

    pub fn vertex_node(&self, v: usize) -> usize {
        v
    }

    /// Node `j` (0 ..= n_e) along edge `e`; the ends are the vertex nodes.
    pub fn node(&self, e: usize, j: usize) -> usize {
        let n = self.n[e];
        debug_assert!(j <= n);
        let edge = self.graph.edge(e);
        if j == 0 {
            edge.tail
        } else if j == n {
            edge.head
        } else {
            self.interior_offset[e] + j - 1
        }
    }

    /// Midpoint `j + 1/2` (j in 0 .. n_e) along edge `e`.
    pub fn mid(&self, e: usize, j: usize) -> usize {
        debug_assert!(j < self.n[e]);
        self.mid_offset[e] + j
    }

    /// Midpoint adjacent to the given end of edge `e`.
    pub fn end_mid(&self, e: usize, end: Endpoint) -> usize {
        match end {
            Endpoint::Tail => self.mid(e, 0),
            Endpoint::Head => self.mid(e, self.n[e] - 1),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the quadrature weights carried by one component.
    pub fn component_mass(&self) -> (f64, f64) {
        let w = &self.weights;
        (
            w[..self.num_nodes].iter().sum(),
            w[self.num_nodes..].iter().sum(),
        )
    }

    /// Edge and arclength of every midpoint, in index order.
    pub fn mid_sites(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n.len()).flat_map(move |e| {
            let h = self.h[e];
            (0..self.n[e]).map(move |j| (e, (j as f64 + 0.5) * h))
        })
    }

    /// Edge and arclength of every interior node, in index order.
    pub fn interior_sites(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n.len()).flat_map(move |e| {
            let h = self.h[e];
            (1..self.n[e]).map(move |j| (e, j as f64 * h))
        })
    }

    /// True when both grids describe the same layout.
    pub fn same_layout(&self, other: &GraphGrid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.graph == other.graph)
    }
}
