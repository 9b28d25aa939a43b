use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dirac::DiracOperator;
use crate::error::{Error, Result};
use crate::fields::{GraphGrid, SpinorField};
use crate::sparse::Csr;
use crate::C64;

/// Partial requests switch from the dense solver to shift-invert subspace
/// iteration above this dimension.
pub const DENSE_LIMIT: usize = 1024;

/// Relative residual accepted for eigenpairs.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenRequest {
    All,
    /// The given number of eigenvalues closest to zero.
    Count(usize),
}

/// Eigenpairs of a [`DiracOperator`], sorted by eigenvalue. Eigenvectors are
/// orthonormal in the weighted inner product.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    grid: Arc<GraphGrid>,
    values: Vec<f64>,
    vectors: Mat<C64>,
    complete: bool,
    zero_tol: f64,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn grid(&self) -> &Arc<GraphGrid> {
        &self.grid
    }

    pub fn vector_values(&self, i: usize) -> &[C64] {
        self.vectors.col_as_slice(i)
    }

    pub(crate) fn vectors(&self) -> &Mat<C64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> SpinorField {
        SpinorField::from_values(self.grid.clone(), self.vector_values(i).to_vec())
            .expect("eigenvector matches the grid")
    }

    /// Threshold below which an eigenvalue counts as zero.
    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn positive(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.values[i] > self.zero_tol).collect()
    }

    pub fn negative(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.values[i] < -self.zero_tol).collect()
    }

    pub fn zero(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.values[i].abs() <= self.zero_tol).collect()
    }

    /// Smallest positive eigenvalue and its index.
    pub fn lowest_positive(&self) -> Option<usize> {
        self.positive().into_iter().next()
    }

    /// Coefficients `<phi_i, x>` in the weighted inner product.
    pub fn coefficients(&self, x: &[C64]) -> Vec<C64> {
        let w = self.grid.weights();
        (0..self.len())
            .map(|i| {
                self.vector_values(i)
                    .iter()
                    .zip(x)
                    .zip(w)
                    .map(|((p, x), w)| p.conj() * x * *w)
                    .sum()
            })
            .collect()
    }

    /// `sum_i c_i phi_i`.
    pub fn synthesize(&self, coef: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        for (i, c) in coef.iter().enumerate() {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.vector_values(i)) {
                *o += p * c;
            }
        }
        out
    }

    /// Largest `|A phi_i - lambda_i phi_i| / ||A||` over the stored pairs.
    pub fn max_residual(&self, op: &DiracOperator) -> f64 {
        let norm = op.norm_bound();
        (0..self.len())
            .map(|i| {
                let phi = self.vector_values(i);
                let aphi = op.apply_values(phi);
                let r: Vec<C64> = aphi.iter().zip(phi).map(|(a, p)| a - p * self.values[i]).collect();
                crate::fields::weighted_norm(self.grid.weights(), &r) / norm
            })
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|<phi_i, phi_j> - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.len() {
            let c = self.coefficients(self.vector_values(j));
            for (i, ci) in c.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ci - target).norm());
            }
        }
        worst
    }
}

pub fn decompose(op: &DiracOperator, request: EigenRequest) -> Result<SpectralDecomposition> {
    let dim = op.dim();
    let count = match request {
        EigenRequest::All => dim,
        EigenRequest::Count(m) => {
            if m == 0 || m > dim {
                return Err(Error::Input(format!("cannot request {m} eigenpairs of a {dim}-dimensional operator")));
            }
            m
        }
    };
    let zero_tol = 1e-9 * op.norm_bound();
    let (values, vectors) = if count == dim || dim <= DENSE_LIMIT {
        let (vals, vecs) = dense_eigen(op)?;
        select_nearest_zero(vals, vecs, count)
    } else {
        shift_invert(op, count)?
    };
    Ok(SpectralDecomposition {
        grid: op.grid_arc().clone(),
        values,
        vectors,
        complete: count == dim,
        zero_tol,
    })
}

/// Eigenvalues only, sorted ascending.
pub fn eigenvalues(op: &DiracOperator, request: EigenRequest) -> Result<Vec<f64>> {
    let dim = op.dim();
    match request {
        EigenRequest::All => dense_values(op),
        EigenRequest::Count(m) if dim <= DENSE_LIMIT => {
            let mut v = dense_values(op)?;
            v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            v.truncate(m.min(dim));
            v.sort_by(f64::total_cmp);
            Ok(v)
        }
        EigenRequest::Count(_) => Ok(decompose(op, request)?.values),
    }
}

fn inv_sqrt_weights(op: &DiracOperator) -> Vec<f64> {
    op.weights().iter().map(|w| 1.0 / w.sqrt()).collect()
}

fn dense_symmetrized_complex(s: &Csr<C64>) -> Mat<C64> {
    let n = s.dim();
    let mut m = Mat::<C64>::zeros(n, n);
    for (i, j, v) in s.triplets() {
        m[(i, j)] = v;
    }
    m
}

// Real form of the symmetrized matrix after u2 -> i u2 (valid for real phases).
fn dense_symmetrized_real(s: &Csr<C64>, nodes: usize) -> Mat<f64> {
    let n = s.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    for (i, j, v) in s.triplets() {
        let di = if i < nodes { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        let dj = if j < nodes { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        let r = di.conj() * v * dj;
        debug_assert!(r.im == 0.0);
        m[(i, j)] = r.re;
    }
    m
}

fn dense_values(op: &DiracOperator) -> Result<Vec<f64>> {
    let s = op.symmetrized();
    let vals = if op.has_real_phases() {
        dense_symmetrized_real(&s, op.grid().num_nodes()).self_adjoint_eigenvalues(Side::Lower)
    } else {
        dense_symmetrized_complex(&s).self_adjoint_eigenvalues(Side::Lower)
    };
    let mut vals = vals.map_err(|e| Error::Linear(format!("{e:?}")))?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn dense_eigen(op: &DiracOperator) -> Result<(Vec<f64>, Mat<C64>)> {
    let s = op.symmetrized();
    let n = s.dim();
    let nodes = op.grid().num_nodes();
    let isw = inv_sqrt_weights(op);
    let fail = |e: faer::linalg::evd::EvdError| Error::Linear(format!("{e:?}"));
    if op.has_real_phases() {
        let evd = dense_symmetrized_real(&s, nodes)
            .self_adjoint_eigen(Side::Lower)
            .map_err(fail)?;
        let vals: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
        let u = evd.U();
        let vecs = Mat::<C64>::from_fn(n, n, |i, j| {
            let x = u[(i, j)] * isw[i];
            if i < nodes {
                C64::new(x, 0.0)
            } else {
                C64::new(0.0, x)
            }
        });
        Ok((vals, vecs))
    } else {
        let evd = dense_symmetrized_complex(&s)
            .self_adjoint_eigen(Side::Lower)
            .map_err(fail)?;
        let vals: Vec<f64> = (0..n).map(|i| evd.S()[i].re).collect();
        let u = evd.U();
        let vecs = Mat::<C64>::from_fn(n, n, |i, j| u[(i, j)] * isw[i]);
        Ok((vals, vecs))
    }
}

fn select_nearest_zero(vals: Vec<f64>, vecs: Mat<C64>, count: usize) -> (Vec<f64>, Mat<C64>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    if count < vals.len() {
        order.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()));
        order.truncate(count);
    }
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let v: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let m = Mat::<C64>::from_fn(vecs.nrows(), order.len(), |i, j| vecs[(i, order[j])]);
    (v, m)
}

// Block shift-invert iteration about zero with Rayleigh-Ritz extraction.
fn shift_invert(op: &DiracOperator, count: usize) -> Result<(Vec<f64>, Mat<C64>)> {
    const MAX_ITER: usize = 500;
    let s = op.symmetrized();
    let n = s.dim();
    let block = (2 * count).max(count + 10).min(n);
    let sf = s.to_faer();
    let lu = sf
        .sp_lu()
        .map_err(|e| Error::Linear(format!("sparse LU failed: {e:?}")))?;
    let norm = op.norm_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let x = Mat::<C64>::from_fn(n, block, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let apply_s = |q: &Mat<C64>| -> Mat<C64> {
        let mut out = Mat::<C64>::zeros(n, q.ncols());
        for (i, j, v) in s.triplets() {
            for c in 0..q.ncols() {
                out[(i, c)] += v * q[(j, c)];
            }
        }
        out
    };
    // Ritz values of the inverse: spurious mixtures of large eigenvalues of
    // both signs land near zero there instead of near the wanted ones.
    let mut q = x.qr().compute_thin_Q();
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let z = lu.solve(&q);
        let h = q.adjoint() * &z;
        let h = Mat::<C64>::from_fn(block, block, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linear(format!("{e:?}")))?;
        let mu: Vec<f64> = (0..block).map(|i| evd.S()[i].re).collect();
        let x = &q * evd.U();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| mu[b].abs().total_cmp(&mu[a].abs()));
        let chosen = &order[..count];
        let sx = apply_s(&x);
        worst = chosen
            .iter()
            .map(|&j| {
                let lam = 1.0 / mu[j];
                let mut r = 0.0;
                for i in 0..n {
                    r += (sx[(i, j)] - x[(i, j)] * lam).norm_sqr();
                }
                r.sqrt() / norm
            })
            .fold(0.0, f64::max);
        if worst <= RESIDUAL_TOL {
            let mut chosen = chosen.to_vec();
            chosen.sort_by(|&a, &b| (1.0 / mu[a]).total_cmp(&(1.0 / mu[b])));
            let isw = inv_sqrt_weights(op);
            // Recompute the eigenvalue as a Rayleigh quotient of S for full accuracy.
            let vals = chosen
                .iter()
                .map(|&j| {
                    let mut num = C64::new(0.0, 0.0);
                    for i in 0..n {
                        num += x[(i, j)].conj() * sx[(i, j)];
                    }
                    num.re
                })
                .collect();
            let vecs = Mat::<C64>::from_fn(n, count, |i, j| x[(i, chosen[j])] * isw[i]);
            return Ok((vals, vecs));
        }
        q = (&z * evd.U()).qr().compute_thin_Q();
    }
    Err(Error::NoConvergence { residual: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{assemble, Potential, ProblemParameters};
    use crate::graph::{build_example, ExampleKind, PeriodicClosure};

    fn ring_op(cells: usize, n: usize, p: &ProblemParameters, theta: Option<&[f64]>) -> DiracOperator {
        let g = build_example(ExampleKind::Chain).unwrap();
        let c = PeriodicClosure::new(&g, &[cells]).unwrap();
        let grid = Arc::new(GraphGrid::periodic(&c, &[n]).unwrap());
        assemble(&c, grid, p, theta).unwrap()
    }

    #[test]
    fn free_ring_dispersion() {
        let p = ProblemParameters::free(1.0).unwrap();
        let op = ring_op(8, 32, &p, None);
        let dec = decompose(&op, EigenRequest::All).unwrap();
        assert!(dec.is_complete());
        assert!(dec.max_residual(&op) < RESIDUAL_TOL);
        assert!(dec.orthonormality_defect() < 1e-10);
        assert!(dec.zero().is_empty());
        let h = 1.0 / 32.0;
        let disc = |k: f64| (1.0 + (2.0 / h * (k * h / 2.0).sin()).powi(2)).sqrt();
        let lam1 = disc(std::f64::consts::PI / 4.0);
        let pos: Vec<f64> = dec.positive().iter().map(|&i| dec.eigenvalues()[i]).collect();
        assert!((pos[0] - 1.0).abs() < 1e-12);
        assert!((pos[1] - lam1).abs() < 1e-11 && (pos[2] - lam1).abs() < 1e-11);
        // Against the continuum value sqrt(1 + (pi/4)^2) at O(h^2).
        assert!((pos[1] - 1.271_553).abs() < 1e-3);
    }

    #[test]
    fn constant_potential_shifts_the_mass() {
        let p = ProblemParameters::new(1.0, 0.0, Potential::Constant(0.5)).unwrap();
        let op = ring_op(8, 16, &p, None);
        let v = eigenvalues(&op, EigenRequest::Count(4)).unwrap();
        let min = v.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        assert!((min - 1.5).abs() < 1e-12);
    }

    #[test]
    fn shift_invert_matches_dense() {
        let p = ProblemParameters::new(1.0, 0.0, Potential::Cosine { amplitude: 0.2 }).unwrap();
        for theta in [None, Some(&[0.7][..])] {
            let op = ring_op(12, 48, &p, theta);
            assert!(op.dim() > DENSE_LIMIT);
            let dense = dense_values(&op).unwrap();
            let dec = decompose(&op, EigenRequest::Count(6)).unwrap();
            assert!(dec.max_residual(&op) < 1e-9);
            let mut near: Vec<f64> = dense.clone();
            near.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            near.truncate(6);
            near.sort_by(f64::total_cmp);
            for (a, b) in near.iter().zip(dec.eigenvalues()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn complex_and_real_paths_agree() {
        let p = ProblemParameters::free(1.0).unwrap();
        let op = ring_op(4, 8, &p, Some(&[std::f64::consts::PI]));
        assert!(op.has_real_phases());
        let real = dense_values(&op).unwrap();
        let s = op.symmetrized();
        let mut cplx = dense_symmetrized_complex(&s).self_adjoint_eigenvalues(Side::Lower).unwrap();
        cplx.sort_by(f64::total_cmp);
        for (a, b) in real.iter().zip(&cplx) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
