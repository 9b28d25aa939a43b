use std::sync::Arc;

use super::params::ProblemParameters;
use crate::error::{Error, Result};
use crate::fields::{GraphGrid, SpinorField};
use crate::graph::{Endpoint, PeriodicClosure};
use crate::sparse::Csr;
use crate::C64;

/// Assembled operator. Stores `K = W M`, which is exactly Hermitian, and the
/// diagonal weights `W`; the operator itself acts as `M = W^{-1} K`.
#[derive(Clone, Debug)]
pub struct DiracOperator {
    grid: Arc<GraphGrid>,
    k: Csr<C64>,
    theta: Option<Vec<f64>>,
    params: ProblemParameters,
    sup_v: f64,
    real_phases: bool,
    cell_edge: Vec<usize>,
    potential_samples: Vec<f64>,
}

/// `exp(i t)` with exact values at multiples of `pi / 2`.
pub fn bloch_phase(t: f64) -> C64 {
    let q = t / std::f64::consts::FRAC_PI_2;
    if (q - q.round()).abs() < 1e-12 {
        match (q.round() as i64).rem_euclid(4) {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    } else {
        C64::new(t.cos(), t.sin())
    }
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Assemble the operator on `closure` with the given grid. With `theta`, the
/// coupling along each edge that winds `w` times around the torus picks up
/// the phase `exp(i theta . w)`.
pub fn assemble(
    closure: &PeriodicClosure,
    grid: Arc<GraphGrid>,
    params: &ProblemParameters,
    theta: Option<&[f64]>,
) -> Result<DiracOperator> {
    let graph = closure.graph();
    if grid.graph() != graph {
        return Err(Error::Input("grid was not built on this closure".into()));
    }
    if let Some(t) = theta {
        if closure.dim() == 0 || t.len() != closure.dim() {
            return Err(Error::Input(format!(
                "Bloch phase of length {} for a closure of dimension {}",
                t.len(),
                closure.dim()
            )));
        }
    }
    let cell_edges = graph.num_edges() / closure.num_cells();
    params.potential.check_edges(cell_edges)?;
    let cell_edge: Vec<usize> = (0..graph.num_edges()).map(|e| closure.cell_edge(e)).collect();

    let nn = grid.num_nodes();
    let dim = grid.len();
    let w = grid.weights();
    let a = params.a;

    // Potential samples on every unknown; vertex values average the
    // incident edge ends with the half-cell weights.
    let mut vs = vec![0.0; dim];
    for v in 0..graph.num_vertices() {
        let mut acc = 0.0;
        for &(e, end) in graph.incidence(v) {
            let len = graph.edge(e).length;
            let s = match end {
                Endpoint::Tail => 0.0,
                Endpoint::Head => len,
            };
            acc += 0.5 * grid.step(e) * params.potential.value(cell_edge[e], s, len);
        }
        vs[v] = acc / w[v];
    }
    for (i, (e, s)) in grid.interior_sites().enumerate() {
        vs[graph.num_vertices() + i] = params.potential.value(cell_edge[e], s, graph.edge(e).length);
    }
    for (i, (e, s)) in grid.mid_sites().enumerate() {
        vs[nn + i] = params.potential.value(cell_edge[e], s, graph.edge(e).length);
    }
    if let Some(bad) = vs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Hypothesis {
            name: "V1".into(),
            detail: format!("potential sample {bad} is not a finite nonnegative number"),
        });
    }
    let sup_v = vs.iter().copied().fold(0.0, f64::max);

    let phases: Vec<C64> = (0..graph.num_edges())
        .map(|e| match theta {
            None => C64::new(1.0, 0.0),
            Some(t) => {
                let tw = closure.twist(e);
                bloch_phase(t.iter().zip(tw).map(|(t, w)| t * w as f64).sum())
            }
        })
        .collect();
    let real_phases = phases.iter().all(|z| z.im == 0.0);

    let mut trip = Vec::with_capacity(5 * dim);
    for e in 0..graph.num_edges() {
        let n = grid.cells_on(e);
        let h = grid.step(e);
        let z = phases[e];
        for j in 0..n {
            let m = grid.mid(e, j);
            let left = grid.node(e, j);
            let right = grid.node(e, j + 1);
            let zr = if j + 1 == n { z } else { C64::new(1.0, 0.0) };
            // h * [ -i (z u_right - u_left) / h - (a + V) u_mid ]
            trip.push((m, left, I));
            trip.push((m, right, C64::new(zr.im, -zr.re)));
            trip.push((m, m, C64::new(-h * (a + vs[m]), 0.0)));
            // Adjoint couplings in the node rows.
            trip.push((left, m, C64::new(0.0, -1.0)));
            trip.push((right, m, C64::new(zr.im, zr.re)));
        }
    }
    for (k, &vk) in vs.iter().enumerate().take(nn) {
        trip.push((k, k, C64::new(w[k] * (a + vk), 0.0)));
    }
    let k = Csr::from_triplets(dim, trip);

    Ok(DiracOperator {
        grid,
        k,
        theta: theta.map(<[f64]>::to_vec),
        params: params.clone(),
        sup_v,
        real_phases,
        cell_edge,
        potential_samples: vs,
    })
}

impl DiracOperator {
    pub fn grid(&self) -> &GraphGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<GraphGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn weights(&self) -> &[f64] {
        self.grid.weights()
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    pub fn params(&self) -> &ProblemParameters {
        &self.params
    }

    /// Largest sampled value of the potential.
    pub fn sup_v(&self) -> f64 {
        self.sup_v
    }

    /// Potential at every unknown, in field layout.
    pub fn potential_samples(&self) -> &[f64] {
        &self.potential_samples
    }

    /// Cell edge of every graph edge.
    pub fn cell_edges(&self) -> &[usize] {
        &self.cell_edge
    }

    /// True when every Bloch phase is real, so that the substitution
    /// `u2 = i w2` turns the operator into a real symmetric one.
    pub fn has_real_phases(&self) -> bool {
        self.real_phases
    }

    /// Nonzero entries `(column, value)` of row `i` of `M`.
    pub fn stencil(&self, i: usize) -> Vec<(usize, C64)> {
        let wi = self.weights()[i];
        self.k.row(i).map(|(j, v)| (j, v / wi)).collect()
    }

    pub(crate) fn weighted_matrix(&self) -> &Csr<C64> {
        &self.k
    }

    /// `W^{1/2} M W^{-1/2}`, Hermitian in the Euclidean sense.
    pub(crate) fn symmetrized(&self) -> Csr<C64> {
        let s: Vec<f64> = self.weights().iter().map(|w| w.sqrt()).collect();
        self.k.map(|i, j, v| v / (s[i] * s[j]))
    }

    /// Largest entrywise defect `|S - S^H|` of the symmetrized matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        let s = self.symmetrized();
        s.triplets()
            .map(|(i, j, v)| (v - s.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Row-sum bound on the operator norm of the symmetrized matrix.
    pub fn norm_bound(&self) -> f64 {
        let s = self.symmetrized();
        (0..s.dim())
            .map(|i| s.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply_values(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.k.matvec(x);
        for (yi, wi) in y.iter_mut().zip(self.weights()) {
            *yi /= *wi;
        }
        y
    }

    pub fn apply(&self, f: &SpinorField) -> Result<SpinorField> {
        if !f.grid().same_layout(&self.grid) {
            return Err(Error::Input("field and operator live on different grids".into()));
        }
        SpinorField::from_values(self.grid.clone(), self.apply_values(f.values()))
    }

    /// `<A f, f>` in the weighted inner product (real since `K` is Hermitian).
    pub fn quadratic_form(&self, x: &[C64]) -> f64 {
        let kx = self.k.matvec(x);
        x.iter().zip(&kx).map(|(a, b)| (a.conj() * b).re).sum()
    }
}
