use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::grid::GraphGrid;
use crate::error::{Error, Result};
use crate::C64;

/// A C^2-valued function on a [`GraphGrid`]: `u1` on nodes, `u2` on midpoints.
#[derive(Clone, Debug)]
pub struct SpinorField {
    grid: Arc<GraphGrid>,
    values: Vec<C64>,
}

impl SpinorField {
    pub fn zeros(grid: Arc<GraphGrid>) -> Self {
        let n = grid.len();
        SpinorField {
            grid,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Wrap a value vector laid out as `[u1 on nodes.., u2 on midpoints..]`.
    pub fn from_values(grid: Arc<GraphGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(SpinorField { grid, values })
    }

    /// Sample `u1(edge, s)` on nodes and `u2(edge, s)` on midpoints. Vertex
    /// nodes take `u1` from the first incident edge end.
    pub fn from_fn(
        grid: Arc<GraphGrid>,
        u1: impl Fn(usize, f64) -> C64,
        u2: impl Fn(usize, f64) -> C64,
    ) -> Self {
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        let g = grid.graph();
        for (v, value) in values.iter_mut().enumerate().take(g.num_vertices()) {
            let (e, end) = g.incidence(v)[0];
            let s = match end {
                crate::graph::Endpoint::Tail => 0.0,
                crate::graph::Endpoint::Head => g.edge(e).length,
            };
            *value = u1(e, s);
        }
        let nn = grid.num_nodes();
        for (i, (e, s)) in grid.interior_sites().enumerate() {
            values[g.num_vertices() + i] = u1(e, s);
        }
        for (i, (e, s)) in grid.mid_sites().enumerate() {
            values[nn + i] = u2(e, s);
        }
        SpinorField { grid, values }
    }

    /// Independent standard complex Gaussian values on every unknown.
    pub fn random<R: Rng + ?Sized>(grid: Arc<GraphGrid>, rng: &mut R) -> Self {
        let values = (0..grid.len())
            .map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        SpinorField { grid, values }
    }

    /// Smooth random field: random vertex values of `u1` joined linearly,
    /// plus a few sine modes per edge in both components.
    pub fn random_smooth<R: Rng + ?Sized>(grid: Arc<GraphGrid>, rng: &mut R) -> Self {
        const MODES: usize = 4;
        let g = grid.graph();
        let cn = |rng: &mut R| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let vert: Vec<C64> = (0..g.num_vertices()).map(|_| cn(rng)).collect();
        let coef: Vec<[C64; 2 * MODES + 1]> = (0..g.num_edges())
            .map(|_| {
                let mut c = [C64::new(0.0, 0.0); 2 * MODES + 1];
                for (m, slot) in c.iter_mut().enumerate() {
                    let k = (m % MODES + 1) as f64;
                    *slot = cn(rng) / (k * k);
                }
                c
            })
            .collect();
        let edges: Vec<_> = g.edges().to_vec();
        let u1 = |e: usize, s: f64| {
            let ed = &edges[e];
            let t = s / ed.length;
            let mut z = vert[ed.tail] * (1.0 - t) + vert[ed.head] * t;
            for m in 0..MODES {
                z += coef[e][m] * (std::f64::consts::PI * (m + 1) as f64 * t).sin();
            }
            z
        };
        let u2 = |e: usize, s: f64| {
            let t = s / edges[e].length;
            let mut z = coef[e][2 * MODES];
            for m in 0..MODES {
                z += coef[e][MODES + m] * (std::f64::consts::PI * (m + 1) as f64 * t).cos();
            }
            z
        };
        Self::from_fn(grid, u1, u2)
    }

    pub fn grid(&self) -> &GraphGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<GraphGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn u1(&self) -> &[C64] {
        &self.values[..self.grid.num_nodes()]
    }

    pub fn u2(&self) -> &[C64] {
        &self.values[self.grid.num_nodes()..]
    }

    fn check_same(&self, other: &SpinorField) -> Result<()> {
        if self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(Error::Input("fields live on different grids".into()))
        }
    }

    /// Weighted inner product, antilinear in `self`.
    pub fn inner(&self, other: &SpinorField) -> Result<C64> {
        self.check_same(other)?;
        Ok(weighted_inner(self.grid.weights(), &self.values, &other.values))
    }

    pub fn norm_l2(&self) -> f64 {
        weighted_inner(self.grid.weights(), &self.values, &self.values)
            .re
            .sqrt()
    }

    /// `|u|_p` with `|u|_p^p = |u1|_p^p + |u2|_p^p`; `p = f64::INFINITY` gives
    /// the largest sample.
    pub fn norm_lp(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 2.0 {
            return Err(Error::Input(format!("L^p norm needs p >= 2, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let scale = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(0.0);
        }
        let sum: f64 = self
            .grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, z)| w * (z.norm() / scale).powf(p))
            .sum();
        Ok(scale * sum.powf(1.0 / p))
    }

    /// Squared L^2 norm of the edgewise derivative, by staggered differences.
    pub fn derivative_sq(&self) -> f64 {
        let grid = &*self.grid;
        let mut acc = 0.0;
        for e in 0..grid.graph().num_edges() {
            let h = grid.step(e);
            let n = grid.cells_on(e);
            for j in 0..n {
                let d = self.values[grid.node(e, j + 1)] - self.values[grid.node(e, j)];
                acc += d.norm_sqr() / h;
            }
            for j in 1..n {
                let d = self.values[grid.mid(e, j)] - self.values[grid.mid(e, j - 1)];
                acc += d.norm_sqr() / h;
            }
        }
        acc
    }

    pub fn norm_h1(&self) -> f64 {
        (self.derivative_sq() + self.norm_l2().powi(2)).sqrt()
    }

    pub fn scaled(&self, c: C64) -> SpinorField {
        SpinorField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: C64, other: &SpinorField) -> Result<SpinorField> {
        self.check_same(other)?;
        Ok(SpinorField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &SpinorField) -> Result<SpinorField> {
        self.add_scaled(C64::new(-1.0, 0.0), other)
    }
}

pub(crate) fn weighted_inner(w: &[f64], a: &[C64], b: &[C64]) -> C64 {
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| x.conj() * y * *w)
        .sum()
}

pub(crate) fn weighted_norm(w: &[f64], a: &[C64]) -> f64 {
    w.iter().zip(a).map(|(w, x)| w * x.norm_sqr()).sum::<f64>().sqrt()
}

/// Terms of the Gagliardo-Nirenberg inequality `|u|_p <= C ||u||_{H^1}^a |u|_q^{1-a}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GnReport {
    pub alpha: f64,
    pub lhs: f64,
    pub rhs_without_constant: f64,
    pub ratio: f64,
}

pub fn check_gagliardo_nirenberg(f: &SpinorField, p: f64, q: f64) -> Result<GnReport> {
    if !(q >= 2.0 && p >= q) {
        return Err(Error::Input(format!("need 2 <= q <= p, got q={q}, p={p}")));
    }
    if f.values().iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::Input("zero field".into()));
    }
    let alpha = if p.is_infinite() {
        2.0 / (2.0 + q)
    } else {
        2.0 / (2.0 + q) * (1.0 - q / p)
    };
    let lhs = f.norm_lp(p)?;
    let rhs = f.norm_h1().powf(alpha) * f.norm_lp(q)?.powf(1.0 - alpha);
    Ok(GnReport {
        alpha,
        lhs,
        rhs_without_constant: rhs,
        ratio: lhs / rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_example, ExampleKind, PeriodicClosure};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ring(n_cells: usize, n: usize) -> Arc<GraphGrid> {
        let g = build_example(ExampleKind::Chain).unwrap();
        let c = PeriodicClosure::new(&g, &[n_cells]).unwrap();
        Arc::new(GraphGrid::periodic(&c, &[n]).unwrap())
    }

    fn position(grid: &GraphGrid, e: usize, s: f64) -> f64 {
        // Edges of the chain ring are laid out consecutively from 0.
        let _ = grid;
        e as f64 + s
    }

    #[test]
    fn constant_field_norms() {
        let grid = ring(8, 16);
        let f = SpinorField::from_fn(grid.clone(), |_, _| C64::new(1.0, 0.0), |_, _| C64::new(0.0, 0.0));
        assert!((f.norm_lp(2.0).unwrap() - 8f64.sqrt()).abs() < 1e-13);
        assert_eq!(f.norm_lp(f64::INFINITY).unwrap(), 1.0);
        assert!((f.norm_h1() - f.norm_l2()).abs() < 1e-13);
        assert_eq!(SpinorField::zeros(grid).norm_lp(3.0).unwrap(), 0.0);
        assert!(f.norm_lp(1.5).is_err());
    }

    #[test]
    fn h1_norm_of_a_sine() {
        // Closed form sqrt(4 + 4 (pi/4)^2) for sin(2 pi x / 8) on a ring of length 8.
        let exact = (4.0 + 4.0 * (PI / 4.0).powi(2)).sqrt();
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let grid = ring(8, n);
            let g2 = grid.clone();
            let f = SpinorField::from_fn(
                grid,
                move |e, s| C64::new((2.0 * PI * position(&g2, e, s) / 8.0).sin(), 0.0),
                |_, _| C64::new(0.0, 0.0),
            );
            errs.push((f.norm_h1() - exact).abs());
        }
        assert!(errs[2] < 1e-4);
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn gn_exponent_collapse_and_constant_field() {
        let grid = ring(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = SpinorField::random_smooth(grid.clone(), &mut rng);
        let r = check_gagliardo_nirenberg(&f, 3.0, 3.0).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert!((r.ratio - 1.0).abs() < 1e-14);

        // u1 = 1 on a ring of length L: |u|_4 = L^{1/4}, ||u||_{H^1} = |u|_2 = L^{1/2}.
        let one = SpinorField::from_fn(grid.clone(), |_, _| C64::new(1.0, 0.0), |_, _| C64::new(0.0, 0.0));
        let r = check_gagliardo_nirenberg(&one, 4.0, 2.0).unwrap();
        assert!((r.alpha - 0.25).abs() < 1e-15);
        assert!((r.ratio - 8f64.powf(-0.25)).abs() < 1e-13);
        assert!(check_gagliardo_nirenberg(&SpinorField::zeros(grid), 4.0, 2.0).is_err());
    }

    #[test]
    fn gn_linf_ratio_bounded_on_corpus() {
        let mut sup = [0.0f64; 2];
        for (i, n) in [16, 32].into_iter().enumerate() {
            let grid = ring(8, n);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..100 {
                let f = SpinorField::random_smooth(grid.clone(), &mut rng);
                let r = check_gagliardo_nirenberg(&f, f64::INFINITY, 2.0).unwrap();
                assert!((r.alpha - 0.5).abs() < 1e-15);
                sup[i] = sup[i].max(r.ratio);
            }
        }
        // Stable under refinement.
        assert!(sup[0] < 3.0 && (sup[0] - sup[1]).abs() < 0.1 * sup[0], "{sup:?}");
    }

    #[test]
    fn linf_embedding_constant_grid_independent() {
        let mut worst: [f64; 2] = [0.0; 2];
        for (i, n) in [8, 64].into_iter().enumerate() {
            let grid = ring(8, n);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..50 {
                let f = SpinorField::random_smooth(grid.clone(), &mut rng);
                worst[i] = worst[i].max(f.norm_lp(f64::INFINITY).unwrap() / f.norm_h1());
            }
        }
        assert!(worst[1] < 1.2 * worst[0] + 1e-12, "{worst:?}");
    }

    #[test]
    fn norms_converge_at_second_order() {
        use crate::graph::{Edge, MetricGraph};
        let path = MetricGraph::new(
            vec!["a".into(), "b".into()],
            vec![Edge { tail: 0, head: 1, length: 1.0 }],
        )
        .unwrap();
        // |u|_4^4 of u1 = x^2 on [0, 1] is 1/9.
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let grid = Arc::new(GraphGrid::uniform(&path, n).unwrap());
            let f = SpinorField::from_fn(grid, |_, s| C64::new(s * s, 0.0), |_, _| C64::new(0.0, 0.0));
            errs.push((f.norm_lp(4.0).unwrap().powi(4) - 1.0 / 9.0).abs());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }
}
