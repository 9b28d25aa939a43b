//! The action functional `Phi(u) = 1/2 (||u+||^2 - ||u-||^2) + omega/2 |u|_2^2 - Psi(u)`,
//! its gradient `G(u) = A u + omega u - F_u(., u)`, and a damped Newton
//! solver for bound states `G(u) = 0`.
//!
//! `Psi` uses the midpoint rule on every grid cell with the node values of
//! `u1` averaged to the midpoint, so the discrete gradient is exact and
//! `Phi(u) - 1/2 <G(u), u> = int Fhat(x, u)` holds to rounding.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use crate::dirac::{assemble, check_vertex_conditions, DiracOperator, ProblemParameters, VertexReport};
use crate::error::{Error, Result};
use crate::fields::{weighted_norm, GraphGrid, SpinorField};
use crate::graph::{orbit_translate, PeriodicClosure, PointSource};
use crate::nonlinearity::{Nonlinearity, NonlinearitySpec};
use crate::sparse::Csr;
use crate::spectra::{decompose, split_norms, EigenRequest, SpectralDecomposition, SplitNorms};
use crate::C64;

// One quadrature cell: the two nodes bounding it and its midpoint.
#[derive(Clone, Copy, Debug)]
struct QuadCell {
    coefficient_edge: usize,
    h: f64,
    left: usize,
    right: usize,
    mid: usize,
}

/// Operator, nonlinearity and quadrature on one closure. The full spectral
/// decomposition is computed on first use.
pub struct ActionContext {
    closure: PeriodicClosure,
    op: DiracOperator,
    nl: Nonlinearity,
    cells: Vec<QuadCell>,
    dec: OnceLock<SpectralDecomposition>,
}

impl ActionContext {
    pub fn new(
        closure: PeriodicClosure,
        cells_per_edge: &[usize],
        params: &ProblemParameters,
        nl: Nonlinearity,
    ) -> Result<Self> {
        let grid = Arc::new(GraphGrid::periodic(&closure, cells_per_edge)?);
        let op = assemble(&closure, grid, params, None)?;
        Self::from_operator(closure, op, nl)
    }

    pub fn from_operator(closure: PeriodicClosure, op: DiracOperator, nl: Nonlinearity) -> Result<Self> {
        let grid = op.grid();
        if grid.graph().num_edges() != closure.graph().num_edges()
            || grid.graph().num_vertices() != closure.graph().num_vertices()
        {
            return Err(Error::Input("operator grid does not belong to the closure".into()));
        }
        if op.theta().is_some() {
            return Err(Error::Input("the action needs the untwisted closure operator".into()));
        }
        let mut cells = Vec::with_capacity(grid.num_mids());
        for e in 0..grid.graph().num_edges() {
            for j in 0..grid.cells_on(e) {
                cells.push(QuadCell {
                    coefficient_edge: closure.cell_edge(e),
                    h: grid.step(e),
                    left: grid.node(e, j),
                    right: grid.node(e, j + 1),
                    mid: grid.mid(e, j),
                });
            }
        }
        Ok(ActionContext { closure, op, nl, cells, dec: OnceLock::new() })
    }

    pub fn closure(&self) -> &PeriodicClosure {
        &self.closure
    }

    pub fn operator(&self) -> &DiracOperator {
        &self.op
    }

    pub fn params(&self) -> &ProblemParameters {
        self.op.params()
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn grid(&self) -> &Arc<GraphGrid> {
        self.op.grid_arc()
    }

    pub fn weights(&self) -> &[f64] {
        self.op.weights()
    }

    pub fn decomposition(&self) -> Result<&SpectralDecomposition> {
        if let Some(d) = self.dec.get() {
            return Ok(d);
        }
        let d = decompose(&self.op, EigenRequest::All)?;
        Ok(self.dec.get_or_init(|| d))
    }

    fn check(&self, f: &SpinorField) -> Result<()> {
        if f.grid().same_layout(self.grid()) {
            Ok(())
        } else {
            Err(Error::Input("field does not live on the context grid".into()))
        }
    }

    fn project(&self, x: &[C64], c: &QuadCell) -> [C64; 2] {
        [(x[c.left] + x[c.right]) * 0.5, x[c.mid]]
    }

    /// `Psi(u) = int F(x, u)` on the raw value vector.
    pub fn psi_values(&self, x: &[C64]) -> f64 {
        self.cells
            .iter()
            .map(|c| c.h * self.nl.f(c.coefficient_edge, self.project(x, c)))
            .sum()
    }

    pub fn fhat_integral_values(&self, x: &[C64]) -> f64 {
        self.cells
            .iter()
            .map(|c| c.h * self.nl.fhat(c.coefficient_edge, self.project(x, c)))
            .sum()
    }

    /// `W G(u)`: the gradient before division by the quadrature weights.
    fn weighted_residual(&self, x: &[C64]) -> Vec<C64> {
        let omega = self.params().omega;
        let mut r = self.op.weighted_matrix().matvec(x);
        for ((ri, xi), w) in r.iter_mut().zip(x).zip(self.weights()) {
            *ri += xi * (omega * w);
        }
        for c in &self.cells {
            let fu = self.nl.f_u(c.coefficient_edge, self.project(x, c));
            let half = fu[0] * (0.5 * c.h);
            r[c.left] -= half;
            r[c.right] -= half;
            r[c.mid] -= fu[1] * c.h;
        }
        r
    }

    pub fn gradient_values(&self, x: &[C64]) -> Vec<C64> {
        let mut r = self.weighted_residual(x);
        for (ri, w) in r.iter_mut().zip(self.weights()) {
            *ri /= *w;
        }
        r
    }

    /// Weighted norm of the gradient.
    pub fn residual_norm(&self, x: &[C64]) -> f64 {
        weighted_norm(self.weights(), &self.gradient_values(x))
    }

    /// Symmetric real form of `W (A + omega - F_uu)` on `(Re, Im)` pairs.
    fn real_jacobian(&self, x: &[C64]) -> Csr<f64> {
        let omega = self.params().omega;
        let k = self.op.weighted_matrix();
        let n = k.dim();
        let mut trip = Vec::with_capacity(4 * k.nnz() + 2 * n + 36 * self.cells.len());
        for (i, j, v) in k.triplets() {
            trip.push((2 * i, 2 * j, v.re));
            trip.push((2 * i, 2 * j + 1, -v.im));
            trip.push((2 * i + 1, 2 * j, v.im));
            trip.push((2 * i + 1, 2 * j + 1, v.re));
        }
        for (i, w) in self.weights().iter().enumerate() {
            trip.push((2 * i, 2 * i, omega * w));
            trip.push((2 * i + 1, 2 * i + 1, omega * w));
        }
        for c in &self.cells {
            let hess = self.nl.f_uu(c.coefficient_edge, self.project(x, c));
            let dofs: [Vec<(usize, f64)>; 4] = [
                vec![(2 * c.left, 0.5), (2 * c.right, 0.5)],
                vec![(2 * c.left + 1, 0.5), (2 * c.right + 1, 0.5)],
                vec![(2 * c.mid, 1.0)],
                vec![(2 * c.mid + 1, 1.0)],
            ];
            for a in 0..4 {
                for b in 0..4 {
                    let hab = c.h * hess[a][b];
                    if hab == 0.0 {
                        continue;
                    }
                    for &(i, ci) in &dofs[a] {
                        for &(j, cj) in &dofs[b] {
                            trip.push((i, j, -hab * ci * cj));
                        }
                    }
                }
            }
        }
        Csr::from_triplets(2 * n, trip)
    }
}

/// `Phi(f)` from the spectral split, checked against the quadratic-form
/// expression `1/2 <A f, f> + omega/2 |f|_2^2 - Psi(f)`.
pub fn action(ctx: &ActionContext, f: &SpinorField) -> Result<f64> {
    ctx.check(f)?;
    let dec = ctx.decomposition()?;
    let s = split_norms(dec, f)?;
    let omega = ctx.params().omega;
    let mass = f.norm_l2().powi(2);
    let psi = ctx.psi_values(f.values());
    let first = 0.5 * (s.plus_sq - s.minus_sq) + 0.5 * omega * mass - psi;
    let second = 0.5 * ctx.op.quadratic_form(f.values()) + 0.5 * omega * mass - psi;
    let scale = 0.5 * s.energy_sq() + 0.5 * omega.abs() * mass + psi.abs();
    if (first - second).abs() > 1e-10 * scale {
        return Err(Error::Identity(format!(
            "split form {first} and quadratic form {second} of the action disagree"
        )));
    }
    Ok(first)
}

/// `Phi(f)` through `<A f, f>` only; needs no decomposition.
pub fn action_quadratic(ctx: &ActionContext, f: &SpinorField) -> Result<f64> {
    ctx.check(f)?;
    let mass = f.norm_l2().powi(2);
    Ok(0.5 * ctx.op.quadratic_form(f.values()) + 0.5 * ctx.params().omega * mass - ctx.psi_values(f.values()))
}

pub fn fhat_integral(ctx: &ActionContext, f: &SpinorField) -> Result<f64> {
    ctx.check(f)?;
    Ok(ctx.fhat_integral_values(f.values()))
}

/// Gradient of `Phi` in the weighted inner product.
pub fn gradient(ctx: &ActionContext, f: &SpinorField) -> Result<SpinorField> {
    ctx.check(f)?;
    SpinorField::from_values(ctx.grid().clone(), ctx.gradient_values(f.values()))
}

/// Starting point of the Newton iteration.
#[derive(Clone, Debug)]
pub enum Initialization {
    /// Lowest positive eigenvector of the closure times
    /// `sech(sqrt(a^2 - omega^2) d(x, center))`, with amplitude chosen by a
    /// line search on `|G| / |u|` over `scale * [0.1, 10]`.
    BandEdgeMode { scale: f64, center: PointSource },
    /// `u1 = amplitude * sech(d(x, center) / width)`, `u2 = 0`.
    Bump { center: PointSource, width: f64, amplitude: f64 },
    Given(SpinorField),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub lambda0: f64,
    /// States closer than this to a deflated orbit are rejected.
    pub distinct_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 200, lambda0: 1e-3, distinct_threshold: 0.1 }
    }
}

#[derive(Clone, Debug)]
pub struct BoundState {
    pub field: SpinorField,
    pub omega: f64,
    pub a: f64,
    pub residual: f64,
    pub action: f64,
    pub fhat_integral: f64,
    pub iterations: usize,
    pub closure_cells: Vec<usize>,
    pub cells_per_edge: Vec<usize>,
    /// Seed center that produced the state.
    pub center: String,
}

/// Scalars stored next to a state's field CSV.
#[derive(Serialize)]
pub struct StateSummary<'a> {
    omega: f64,
    a: f64,
    residual: f64,
    action: f64,
    fhat_integral: f64,
    #[serde(rename = "N")]
    n: &'a [usize],
    cells_per_edge: &'a [usize],
    p_or_b: &'a NonlinearitySpec,
    seed: u64,
    iterations: usize,
    center: &'a str,
}

impl BoundState {
    pub fn summary<'a>(&'a self, spec: &'a NonlinearitySpec, seed: u64) -> StateSummary<'a> {
        StateSummary {
            omega: self.omega,
            a: self.a,
            residual: self.residual,
            action: self.action,
            fhat_integral: self.fhat_integral,
            n: &self.closure_cells,
            cells_per_edge: &self.cells_per_edge,
            p_or_b: spec,
            seed,
            iterations: self.iterations,
            center: &self.center,
        }
    }

    /// Writes `<stem>.csv` with the field and `<stem>.json` with the scalars.
    pub fn write(&self, dir: &Path, stem: &str, spec: &NonlinearitySpec, seed: u64) -> Result<()> {
        self.field.write_csv(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
        let json = File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(BufWriter::new(json), &self.summary(spec, seed))?;
        Ok(())
    }
}

fn describe(c: &PointSource) -> String {
    match c {
        PointSource::Vertex(v) => format!("vertex {v}"),
        PointSource::Edge { edge, s } => format!("edge {edge} at {s}"),
    }
}

// Distance from `center` to every grid site, by component layout.
fn site_distances(ctx: &ActionContext, center: PointSource) -> Vec<f64> {
    let g = ctx.closure.graph();
    let dv = g.distances_from(center);
    let at = |e: usize, s: f64| {
        let edge = g.edge(e);
        let mut d = (dv[edge.tail] + s).min(dv[edge.head] + edge.length - s);
        if let PointSource::Edge { edge: e0, s: s0 } = center {
            if e0 == e {
                d = d.min((s - s0).abs());
            }
        }
        d
    };
    let grid = ctx.grid().clone();
    let f = SpinorField::from_fn(grid, |e, s| C64::new(at(e, s), 0.0), |e, s| C64::new(at(e, s), 0.0));
    f.values().iter().map(|z| z.re).collect()
}

// Starting vectors for one initialization, best first.
fn seed_field(ctx: &ActionContext, init: &Initialization) -> Result<(Vec<Vec<C64>>, String)> {
    let p = ctx.params();
    match init {
        Initialization::Given(f) => {
            ctx.check(f)?;
            Ok((vec![f.values().to_vec()], "given".into()))
        }
        Initialization::Bump { center, width, amplitude } => {
            if !(*width > 0.0) {
                return Err(Error::Input("bump width must be positive".into()));
            }
            let d = site_distances(ctx, *center);
            let nodes = ctx.grid().num_nodes();
            let x = d
                .iter()
                .enumerate()
                .map(|(i, d)| if i < nodes { C64::new(amplitude / (d / width).cosh(), 0.0) } else { C64::new(0.0, 0.0) })
                .collect();
            Ok((vec![x], describe(center)))
        }
        Initialization::BandEdgeMode { scale, center } => {
            if !(*scale > 0.0) {
                return Err(Error::Input("band-edge scale must be positive".into()));
            }
            let m = 4.min(ctx.op.dim());
            let dec = decompose(&ctx.op, EigenRequest::Count(m))?;
            let i = dec
                .lowest_positive()
                .ok_or_else(|| Error::Input("closure operator has no positive eigenvalue".into()))?;
            let phi = dec.vector_values(i);
            let kappa = (p.a * p.a - p.omega * p.omega).sqrt();
            let d = site_distances(ctx, *center);
            let mut v: Vec<C64> = phi.iter().zip(&d).map(|(z, d)| z / (kappa * d).cosh()).collect();
            let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for z in &mut v {
                *z /= peak;
            }
            let mut ranked: Vec<(f64, f64)> = (0..=20)
                .map(|k| {
                    let amp = scale * 10f64.powf((k as f64 - 10.0) / 10.0);
                    let x: Vec<C64> = v.iter().map(|z| z * amp).collect();
                    (ctx.residual_norm(&x) / weighted_norm(ctx.weights(), &x), amp)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
            let xs = ranked
                .iter()
                .take(AMPLITUDE_TRIES)
                .map(|(_, amp)| v.iter().map(|z| z * amp).collect())
                .collect();
            Ok((xs, describe(center)))
        }
    }
}

const ZERO_NORM: f64 = 1e-6;
// Newton restarts from the next-best line-search amplitude on failure.
const AMPLITUDE_TRIES: usize = 4;

fn newton(ctx: &ActionContext, mut x: Vec<C64>, center: String, opts: &SolverOptions) -> Result<BoundState> {
    let w = ctx.weights();
    let n = x.len();
    let norm = weighted_norm(w, &x);
    if norm < ZERO_NORM {
        return Err(Error::ConvergedToZero);
    }
    let w2: Vec<f64> = w.iter().flat_map(|&v| [v, v]).collect();
    let winv2: Vec<f64> = w2.iter().map(|v| 1.0 / v).collect();
    // Gauge row: Im <u_ref, delta> / |u_ref|.
    let c: Vec<f64> = x
        .iter()
        .zip(w)
        .flat_map(|(r, &wi)| [-wi * r.im / norm, wi * r.re / norm])
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let to_real = |z: &[C64]| z.iter().flat_map(|v| [v.re, v.im]).collect::<Vec<f64>>();

    let mut res = ctx.residual_norm(&x);
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    while res > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterations { iterations, residual: res });
        }
        iterations += 1;
        let kj = ctx.real_jacobian(&x);
        let g = to_real(&ctx.gradient_values(&x));
        let mut rhs = kj.matvec(&g);
        let gauge = dot(&c, &to_real(&x));
        for (r, ci) in rhs.iter_mut().zip(&c) {
            *r = -*r - ci * gauge;
        }
        let base = kj.symmetric_sandwich(&winv2);
        loop {
            let mut trip: Vec<(usize, usize, f64)> = base.triplets().collect();
            trip.extend(w2.iter().enumerate().map(|(i, &wi)| (i, i, lambda * wi)));
            let normal = Csr::from_triplets(2 * n, trip).to_faer();
            let llt = normal
                .sp_cholesky(Side::Lower)
                .map_err(|e| Error::Linear(format!("Cholesky factorization failed: {e:?}")))?;
            let b = Mat::<f64>::from_fn(2 * n, 2, |i, j| if j == 0 { rhs[i] } else { c[i] });
            let sol = llt.solve(&b);
            let xb: Vec<f64> = (0..2 * n).map(|i| sol[(i, 0)]).collect();
            let xc: Vec<f64> = (0..2 * n).map(|i| sol[(i, 1)]).collect();
            let t = dot(&c, &xb) / (1.0 + dot(&c, &xc));
            let trial: Vec<C64> = x
                .iter()
                .enumerate()
                .map(|(i, z)| z + C64::new(xb[2 * i] - t * xc[2 * i], xb[2 * i + 1] - t * xc[2 * i + 1]))
                .collect();
            let r_trial = ctx.residual_norm(&trial);
            if r_trial < res {
                x = trial;
                res = r_trial;
                lambda = (lambda / 3.0).max(1e-15);
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                return Err(Error::MaxIterations { iterations, residual: res });
            }
        }
        if weighted_norm(w, &x) < ZERO_NORM {
            return Err(Error::ConvergedToZero);
        }
    }
    if weighted_norm(w, &x) < ZERO_NORM {
        return Err(Error::ConvergedToZero);
    }
    let field = SpinorField::from_values(ctx.grid().clone(), x)?;
    let p = ctx.params();
    Ok(BoundState {
        action: action_quadratic(ctx, &field)?,
        fhat_integral: fhat_integral(ctx, &field)?,
        field,
        omega: p.omega,
        a: p.a,
        residual: res,
        iterations,
        closure_cells: ctx.closure.cells().to_vec(),
        cells_per_edge: (0..ctx.grid().graph().num_edges() / ctx.closure.num_cells())
            .map(|e| ctx.grid().cells_on(e))
            .collect(),
        center,
    })
}

/// Deterministic list of alternative centers: cell-0 vertices, then cell-0
/// edge midpoints.
fn reseed_centers(ctx: &ActionContext) -> Vec<PointSource> {
    let g = ctx.closure.graph();
    let per_cell = g.num_edges() / ctx.closure.num_cells();
    let mut out: Vec<PointSource> = (0..ctx.closure.num_orbits()).map(PointSource::Vertex).collect();
    out.extend((0..per_cell).map(|e| PointSource::Edge { edge: e, s: 0.5 * g.edge(e).length }));
    out
}

/// Newton iteration on `G(u) = 0` with Levenberg-Marquardt damping and a
/// bordered phase constraint. Converged states within
/// `opts.distinct_threshold` of a deflated orbit are rejected and the
/// solve restarts from the next center in a fixed list.
pub fn solve_bound_state(
    ctx: &ActionContext,
    init: &Initialization,
    opts: &SolverOptions,
    deflation: &[BoundState],
) -> Result<BoundState> {
    let p = ctx.params();
    if !(p.omega.abs() < p.a) {
        return Err(Error::Hypothesis { name: "omega".into(), detail: format!("|omega| must be below a = {}", p.a) });
    }
    let mut seeds = vec![init.clone()];
    if !deflation.is_empty() {
        let scale = match init {
            Initialization::BandEdgeMode { scale, .. } => *scale,
            _ => 1.0,
        };
        let first = match init {
            Initialization::BandEdgeMode { center, .. } | Initialization::Bump { center, .. } => Some(*center),
            Initialization::Given(_) => None,
        };
        seeds.extend(
            reseed_centers(ctx)
                .into_iter()
                .filter(|c| Some(*c) != first)
                .map(|center| Initialization::BandEdgeMode { scale, center }),
        );
    }
    let mut attempts = 0;
    for seed in &seeds {
        attempts += 1;
        let (xs, center) = seed_field(ctx, seed)?;
        let mut outcome = Err(Error::ConvergedToZero);
        for x in xs {
            outcome = newton(ctx, x, center.clone(), opts);
            if !matches!(&outcome, Err(e) if e.is_solver_failure()) {
                break;
            }
        }
        match outcome {
            Ok(state) => {
                let mut fresh = true;
                for d in deflation {
                    if orbit_distance(&ctx.closure, &d.field, &state.field)? < opts.distinct_threshold {
                        fresh = false;
                        break;
                    }
                }
                if fresh {
                    return Ok(state);
                }
            }
            Err(e) if !deflation.is_empty() && e.is_solver_failure() => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DeflatedOrbit { attempts })
}

/// `min_{k, theta} |u2 - e^{i theta} k*u1| / max(|u1|, |u2|)` over the
/// translations of the closure.
pub fn orbit_distance(c: &PeriodicClosure, u1: &SpinorField, u2: &SpinorField) -> Result<f64> {
    if !u1.grid().same_layout(u2.grid()) {
        return Err(Error::Input("fields live on different grids".into()));
    }
    let scale = u1.norm_l2().max(u2.norm_l2());
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for k in c.translations() {
        let v = orbit_translate(c, k, u1);
        best = best.min(phase_aligned_distance(&v, u2)?);
    }
    Ok(best / scale)
}

/// `min_theta |v - e^{i theta} u|`.
pub fn phase_aligned_distance(u: &SpinorField, v: &SpinorField) -> Result<f64> {
    let z = u.inner(v)?;
    let rot = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
    let w = u.grid().weights();
    Ok(u
        .values()
        .iter()
        .zip(v.values())
        .zip(w)
        .map(|((a, b), w)| w * (b - a * rot).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Restriction of a field on the uniformly refined grid: nodes by
/// injection, midpoints by averaging the two fine midpoints.
pub fn restrict_to_coarse(fine: &SpinorField, coarse: &Arc<GraphGrid>) -> Result<SpinorField> {
    let fg = fine.grid();
    let g = coarse.graph();
    if fg.graph().num_edges() != g.num_edges() || (0..g.num_edges()).any(|e| fg.cells_on(e) != 2 * coarse.cells_on(e)) {
        return Err(Error::Input("fine grid is not the refinement of the coarse grid".into()));
    }
    let f = fine.values();
    let mut out = vec![C64::new(0.0, 0.0); coarse.len()];
    for v in 0..g.num_vertices() {
        out[coarse.vertex_node(v)] = f[fg.vertex_node(v)];
    }
    for e in 0..g.num_edges() {
        for j in 1..coarse.cells_on(e) {
            out[coarse.node(e, j)] = f[fg.node(e, 2 * j)];
        }
        for j in 0..coarse.cells_on(e) {
            out[coarse.mid(e, j)] = (f[fg.mid(e, 2 * j)] + f[fg.mid(e, 2 * j + 1)]) * 0.5;
        }
    }
    SpinorField::from_values(coarse.clone(), out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CellDecay {
    pub cell: usize,
    pub max_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub residual: f64,
    /// Largest `|G(u)|` at interior nodes and midpoints of each edge.
    pub edge_residual: Vec<f64>,
    pub vertex: VertexReport,
    pub decay: Vec<CellDecay>,
    pub action: f64,
    pub fhat_integral: f64,
    /// `Phi(u) - int Fhat`, equal to `<G(u), u> / 2`.
    pub identity_gap: f64,
    pub split: SplitNorms,
    /// `||u||^2 / (a |u|_2^2)`, at least one.
    pub energy_ratio: f64,
}

pub fn residual_report(ctx: &ActionContext, b: &BoundState) -> Result<ResidualReport> {
    let f = &b.field;
    ctx.check(f)?;
    let grid = ctx.grid();
    let g = grid.graph();
    let gv = ctx.gradient_values(f.values());
    let edge_residual = (0..g.num_edges())
        .map(|e| {
            let n = grid.cells_on(e);
            let nodes = (1..n).map(|j| gv[grid.node(e, j)].norm());
            let mids = (0..n).map(|j| gv[grid.mid(e, j)].norm());
            nodes.chain(mids).fold(0.0, f64::max)
        })
        .collect();
    let h_max = (0..g.num_edges()).map(|e| grid.step(e)).fold(0.0, f64::max);
    let peak = f.norm_lp(f64::INFINITY)?;
    let vertex = check_vertex_conditions(f, h_max * peak);
    let mut decay: Vec<CellDecay> =
        (0..ctx.closure.num_cells()).map(|cell| CellDecay { cell, max_abs: 0.0 }).collect();
    for v in 0..g.num_vertices() {
        let c = ctx.closure.cell_of_vertex(v);
        decay[c].max_abs = decay[c].max_abs.max(f.values()[grid.vertex_node(v)].norm());
    }
    for e in 0..g.num_edges() {
        let c = ctx.closure.cell_of_edge(e);
        let n = grid.cells_on(e);
        for j in 1..n {
            decay[c].max_abs = decay[c].max_abs.max(f.values()[grid.node(e, j)].norm());
        }
        for j in 0..n {
            decay[c].max_abs = decay[c].max_abs.max(f.values()[grid.mid(e, j)].norm());
        }
    }
    let action = action(ctx, f)?;
    let fhat = fhat_integral(ctx, f)?;
    let split = split_norms(ctx.decomposition()?, f)?;
    let energy_ratio = split.energy_sq() / (ctx.params().a * f.norm_l2().powi(2));
    Ok(ResidualReport {
        residual: ctx.residual_norm(f.values()),
        edge_residual,
        vertex,
        decay,
        action,
        fhat_integral: fhat,
        identity_gap: action - fhat,
        split,
        energy_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkingReport {
    pub samples: usize,
    pub seed: u64,
    /// `(rho, min Phi)` over unit directions in `Y+` scaled to `||u|| = rho`.
    pub min_phi_by_rho: Vec<(f64, f64)>,
    pub rho: f64,
    pub eta: f64,
    /// Log-log slope of `min Phi` against `rho` over the three smallest radii.
    pub small_rho_slope: f64,
    /// Largest `Phi(u) + (a - |omega|)/(2a) ||u||^2` on the `Y-` spheres.
    pub y_minus_excess: f64,
    pub y_minus_max_phi: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    pub boundary_max_phi: f64,
    pub eta_positive: bool,
    pub y_minus_pass: bool,
    pub boundary_pass: bool,
    pub slope_pass: bool,
}

impl LinkingReport {
    pub fn pass(&self) -> bool {
        self.eta_positive && self.y_minus_pass && self.boundary_pass && self.slope_pass
    }
}

// Random directions in the span of `idx`, normalized to `||u|| = 1`.
// Returns the fields as columns together with their `|u|_2^2`.
fn sphere_samples(
    dec: &SpectralDecomposition,
    idx: &[usize],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> (Mat<C64>, Vec<f64>) {
    let vals = dec.eigenvalues();
    let mut coef = Mat::<C64>::zeros(idx.len(), count);
    let mut mass = vec![0.0; count];
    for j in 0..count {
        let mut energy = 0.0;
        for (r, _) in idx.iter().enumerate() {
            let z = C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
            coef[(r, j)] = z;
        }
        for (r, &i) in idx.iter().enumerate() {
            energy += vals[i].abs() * coef[(r, j)].norm_sqr();
        }
        let s = 1.0 / energy.sqrt();
        for r in 0..idx.len() {
            coef[(r, j)] *= s;
            mass[j] += coef[(r, j)].norm_sqr();
        }
    }
    let v = dec.vectors();
    let basis = Mat::<C64>::from_fn(v.nrows(), idx.len(), |i, r| v[(i, idx[r])]);
    (&basis * &coef, mass)
}

/// Sampled linking geometry: the infimum of `Phi` on spheres in `Y+`, the
/// sign of `Phi` on spheres in `Y-`, and on the boundary of
/// `Q = {u- + s e1 : ||u|| <= R1, s >= 0}` with `R1` found by doubling.
pub fn linking_diagnostics(ctx: &ActionContext, rho_grid: &[f64], samples: usize, seed: u64) -> Result<LinkingReport> {
    if rho_grid.len() < 3 || rho_grid.iter().any(|r| !(*r > 0.0)) || samples == 0 {
        return Err(Error::Input("linking needs at least three positive radii and one sample".into()));
    }
    let dec = ctx.decomposition()?;
    let p = ctx.params();
    let omega = p.omega;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = dec.positive();
    let neg = dec.negative();
    let e1 = dec.lowest_positive().ok_or_else(|| Error::Input("no positive eigenvalue".into()))?;
    let n = ctx.op.dim();
    let scaled = |col: &[C64], s: f64| -> Vec<C64> { col.iter().map(|z| z * s).collect() };

    let mut rhos = rho_grid.to_vec();
    rhos.sort_by(f64::total_cmp);
    let (plus, plus_mass) = sphere_samples(dec, &pos, samples, &mut rng);
    let min_phi_by_rho: Vec<(f64, f64)> = rhos
        .iter()
        .map(|&rho| {
            let m = (0..samples)
                .map(|j| {
                    let u = scaled(plus.col_as_slice(j), rho);
                    0.5 * rho * rho + 0.5 * omega * rho * rho * plus_mass[j] - ctx.psi_values(&u)
                })
                .fold(f64::INFINITY, f64::min);
            (rho, m)
        })
        .collect();
    let (rho, eta) = min_phi_by_rho
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (r, m)| if m > best.1 { (r, m) } else { best });
    let small_rho_slope = {
        let pts = &min_phi_by_rho[..3];
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.max(f64::MIN_POSITIVE).ln()).collect();
        let mx = xs.iter().sum::<f64>() / 3.0;
        let my = ys.iter().sum::<f64>() / 3.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };

    let (minus, minus_mass) = sphere_samples(dec, &neg, samples, &mut rng);
    let coercive = (p.a - omega.abs()) / (2.0 * p.a);
    let mut y_minus_excess = f64::NEG_INFINITY;
    let mut y_minus_max_phi = f64::NEG_INFINITY;
    for &rho in &rhos {
        for j in 0..samples {
            let u = scaled(minus.col_as_slice(j), rho);
            let phi = -0.5 * rho * rho + 0.5 * omega * rho * rho * minus_mass[j] - ctx.psi_values(&u);
            y_minus_max_phi = y_minus_max_phi.max(phi);
            y_minus_excess = y_minus_excess.max(phi + coercive * rho * rho);
        }
    }

    // Boundary of Q at radius R: cos t u- + sin t e1 with t in [0, pi/2].
    let lam1 = dec.eigenvalues()[e1];
    let e1_unit: Vec<C64> = scaled(dec.vector_values(e1), 1.0 / lam1.sqrt());
    let angle = Uniform::new_inclusive(0.0, std::f64::consts::FRAC_PI_2).expect("valid range");
    let mut angles: Vec<f64> = (0..samples).map(|_| angle.sample(&mut rng)).collect();
    angles[0] = std::f64::consts::FRAC_PI_2;
    let boundary: Vec<(Vec<C64>, f64, f64)> = angles
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (s, c) = t.sin_cos();
            let col = minus.col_as_slice(j);
            let u: Vec<C64> = (0..n).map(|i| col[i] * c + e1_unit[i] * s).collect();
            (u, c * c * minus_mass[j] + s * s / lam1, s * s - c * c)
        })
        .collect();
    let max_phi_at = |r: f64| {
        boundary
            .iter()
            .map(|(u, mass, sign)| {
                0.5 * r * r * sign + 0.5 * omega * r * r * mass - ctx.psi_values(&scaled(u, r))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut r1 = 1.0;
    let mut boundary_max_phi = max_phi_at(r1);
    for _ in 0..60 {
        if boundary_max_phi <= 0.0 {
            break;
        }
        r1 *= 2.0;
        boundary_max_phi = max_phi_at(r1);
    }
    let tol = 1e-12 * rhos.last().unwrap().powi(2);
    Ok(LinkingReport {
        samples,
        seed,
        min_phi_by_rho,
        rho,
        eta,
        small_rho_slope,
        y_minus_excess,
        y_minus_max_phi,
        r1,
        boundary_max_phi,
        eta_positive: eta > 0.0,
        y_minus_pass: y_minus_excess <= tol && y_minus_max_phi <= 0.0,
        boundary_pass: boundary_max_phi <= 0.0,
        slope_pass: (small_rho_slope - 2.0).abs() <= 0.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::Potential;
    use crate::graph::{build_example, ExampleKind};
    use crate::nonlinearity::{make_asym_linear, make_power, Coefficient};

    fn ring(cells: usize, n: usize, p: &ProblemParameters, nl: Nonlinearity) -> ActionContext {
        let g = build_example(ExampleKind::Chain).unwrap();
        let c = PeriodicClosure::new(&g, &[cells]).unwrap();
        ActionContext::new(c, &[n], p, nl).unwrap()
    }

    fn random_field(ctx: &ActionContext, seed: u64) -> SpinorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpinorField::random_smooth(ctx.grid().clone(), &mut rng)
    }

    #[test]
    fn zero_field_has_zero_action_and_gradient() {
        let p = ProblemParameters::free(1.0).unwrap();
        let ctx = ring(6, 8, &p, make_power(2.5).unwrap());
        let z = SpinorField::zeros(ctx.grid().clone());
        assert_eq!(action(&ctx, &z).unwrap(), 0.0);
        assert!(gradient(&ctx, &z).unwrap().values().iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn gradient_matches_directional_differences() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::new(1.0, 0.3, Potential::Cosine { amplitude: 0.2 }).unwrap();
        for nl in [make_power(2.5).unwrap(), make_asym_linear(&Coefficient::Constant(3.0), &g, &p).unwrap()] {
            let ctx = ring(6, 8, &p, nl);
            let f = random_field(&ctx, 1);
            let gr = gradient(&ctx, &f).unwrap();
            for k in 0..5 {
                let phi = random_field(&ctx, 100 + k);
                let eps = 1e-5;
                let plus = action_quadratic(&ctx, &f.add_scaled(C64::new(eps, 0.0), &phi).unwrap()).unwrap();
                let minus = action_quadratic(&ctx, &f.add_scaled(C64::new(-eps, 0.0), &phi).unwrap()).unwrap();
                let fd = (plus - minus) / (2.0 * eps);
                let exact = gr.inner(&phi).unwrap().re;
                let rel = (fd - exact).abs() / (gr.norm_l2() * phi.norm_l2());
                assert!(rel < 1e-6, "{rel}");
            }
        }
    }

    #[test]
    fn action_forms_agree_and_are_gauge_invariant() {
        let p = ProblemParameters::new(1.0, -0.2, Potential::Constant(0.1)).unwrap();
        let ctx = ring(6, 8, &p, make_power(2.5).unwrap());
        let f = random_field(&ctx, 7);
        let phi = action(&ctx, &f).unwrap();
        let rot = f.scaled(C64::from_polar(1.0, 1.3));
        assert!((action(&ctx, &rot).unwrap() - phi).abs() < 1e-12 * phi.abs().max(1.0));
        let shifted = orbit_translate(ctx.closure(), [2, 0], &f);
        assert!((action(&ctx, &shifted).unwrap() - phi).abs() < 1e-12 * phi.abs().max(1.0));
        let g1 = gradient(&ctx, &shifted).unwrap();
        let g2 = orbit_translate(ctx.closure(), [2, 0], &gradient(&ctx, &f).unwrap());
        assert!(g1.sub(&g2).unwrap().norm_l2() < 1e-12 * g1.norm_l2());
    }

    #[test]
    fn critical_point_identity_holds_for_any_field() {
        let p = ProblemParameters::free(1.0).unwrap();
        let ctx = ring(6, 8, &p, make_power(2.5).unwrap());
        let f = random_field(&ctx, 3);
        let gap = action(&ctx, &f).unwrap() - fhat_integral(&ctx, &f).unwrap();
        let half = 0.5 * gradient(&ctx, &f).unwrap().inner(&f).unwrap().re;
        assert!((gap - half).abs() < 1e-12 * gap.abs().max(1.0));
    }

    #[test]
    fn small_multiple_of_positive_eigenvector_has_positive_action() {
        let p = ProblemParameters::free(1.0).unwrap();
        let ctx = ring(6, 8, &p, make_power(2.5).unwrap());
        let dec = ctx.decomposition().unwrap();
        let i = dec.lowest_positive().unwrap();
        let lam = dec.eigenvalues()[i];
        for t in [1e-3, 1e-2] {
            let f = dec.vector(i).scaled(C64::new(t, 0.0));
            let phi = action(&ctx, &f).unwrap();
            assert!(phi > 0.0);
            assert!((phi / (0.5 * t * t * lam) - 1.0).abs() < 10.0 * t.sqrt());
        }
    }

    #[test]
    fn orbit_distance_of_orbit_members_vanishes() {
        let p = ProblemParameters::free(1.0).unwrap();
        let ctx = ring(6, 8, &p, make_power(2.5).unwrap());
        let u = random_field(&ctx, 5);
        let v = orbit_translate(ctx.closure(), [3, 0], &u).scaled(C64::from_polar(1.0, 0.7));
        assert!(orbit_distance(ctx.closure(), &u, &v).unwrap() < 1e-14);
        let m = u.scaled(C64::new(-1.0, 0.0));
        assert!(orbit_distance(ctx.closure(), &u, &m).unwrap() < 1e-14);
        let w = random_field(&ctx, 6);
        assert!(orbit_distance(ctx.closure(), &u, &w).unwrap() > 0.1);
    }

    #[test]
    fn zero_initialization_is_rejected() {
        let p = ProblemParameters::free(1.0).unwrap();
        let ctx = ring(6, 8, &p, make_power(2.5).unwrap());
        let z = SpinorField::zeros(ctx.grid().clone());
        let r = solve_bound_state(&ctx, &Initialization::Given(z), &SolverOptions::default(), &[]);
        assert!(matches!(r, Err(Error::ConvergedToZero)));
    }

    #[test]
    fn power_state_on_a_ring() {
        let p = ProblemParameters::free(1.0).unwrap();
        let ctx = ring(16, 8, &p, make_power(2.5).unwrap());
        let init = Initialization::BandEdgeMode { scale: 0.5, center: PointSource::Vertex(0) };
        let s = solve_bound_state(&ctx, &init, &SolverOptions::default(), &[]).unwrap();
        assert!(s.residual < 1e-10);
        assert!(s.action > 0.0);
        assert!((s.action - s.fhat_integral).abs() < 1e-8);
        let rep = residual_report(&ctx, &s).unwrap();
        assert!(rep.energy_ratio >= 1.0);
        let peak = rep.decay.iter().map(|d| d.max_abs).fold(0.0, f64::max);
        assert!(rep.decay[8].max_abs < 1e-2 * peak);
    }

    #[test]
    fn restriction_is_exact_on_linear_fields() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let c = PeriodicClosure::new(&g, &[4]).unwrap();
        let coarse = Arc::new(GraphGrid::periodic(&c, &[4]).unwrap());
        let fine = Arc::new(coarse.refined());
        let lin = |_: usize, s: f64| C64::new(s, 0.0);
        let ff = SpinorField::from_fn(fine, lin, lin);
        let fc = SpinorField::from_fn(coarse.clone(), lin, lin);
        let r = restrict_to_coarse(&ff, &coarse).unwrap();
        assert!(r.sub(&fc).unwrap().norm_l2() < 1e-14);
    }
}
