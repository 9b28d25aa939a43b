use faer::Mat;
use serde::Serialize;

use crate::dirac::{bloch_phase, ProblemParameters};
use crate::error::{Error, Result};
use crate::graph::{PeriodicClosure, PeriodicGraph};
use crate::C64;

/// Search window and mesh of the secular root finder.
#[derive(Clone, Copy, Debug)]
pub struct SecularOptions {
    pub lambda_max: f64,
    /// Bracketing mesh width; `None` means `1e-3 * a`.
    pub step: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SecularRoots {
    /// All roots in `[-lambda_max, lambda_max]`, ascending, with tangential
    /// roots listed twice.
    pub roots: Vec<f64>,
    /// Roots found as touching minima rather than sign changes; accurate to
    /// roughly the square root of machine precision.
    pub tangential: Vec<f64>,
    /// Mesh intervals where `|det|` dips without a detectable root.
    pub suspect: Vec<(f64, f64)>,
    /// `max |Im det| / max |det|` over the mesh (zero up to rounding).
    pub imag_ratio: f64,
}

/// Transfer matrix of `(u1, -i u2)` across an edge of length `l` with
/// constant mass `m` at spectral parameter `lambda`.
pub fn edge_transfer(lambda: f64, m: f64, l: f64) -> [[f64; 2]; 2] {
    let k2 = m * m - lambda * lambda;
    let x = k2 * l * l;
    let (c, s) = if x.abs() < 1e-8 {
        (1.0 + x / 2.0 + x * x / 24.0, l * (1.0 + x / 6.0 + x * x / 120.0))
    } else if x > 0.0 {
        let k = k2.sqrt();
        ((k * l).cosh(), (k * l).sinh() / k)
    } else {
        let q = (-k2).sqrt();
        ((q * l).cos(), (q * l).sin() / q)
    };
    [[c, -s * (lambda + m)], [s * (lambda - m), c]]
}

/// Determinant of the vertex-condition system for exact edge solutions.
/// Unknowns are `u1` at every quotient vertex and `-i u2` at the start of
/// every edge.
pub fn secular_determinant(cell: &PeriodicClosure, masses: &[f64], theta: &[f64], lambda: f64) -> C64 {
    let g = cell.graph();
    let nv = g.num_vertices();
    let ne = g.num_edges();
    let mut c = Mat::<C64>::zeros(nv + ne, nv + ne);
    for (e, edge) in g.edges().iter().enumerate() {
        let t = edge_transfer(lambda, masses[cell.cell_edge(e)], edge.length);
        let tw = cell.twist(e);
        let z = bloch_phase(theta.iter().zip(tw).map(|(t, w)| t * w as f64).sum());
        let row = e;
        c[(row, edge.tail)] += C64::new(t[0][0], 0.0);
        c[(row, nv + e)] += C64::new(t[0][1], 0.0);
        c[(row, edge.head)] -= z;
        // Kirchhoff rows: + beta at the tail, - conj(z) beta(l) at the head.
        let kt = ne + edge.tail;
        let kh = ne + edge.head;
        c[(kt, nv + e)] += C64::new(1.0, 0.0);
        c[(kh, edge.tail)] -= z.conj() * t[1][0];
        c[(kh, nv + e)] -= z.conj() * t[1][1];
    }
    let d = c.determinant();
    // LU elimination of an exactly singular matrix divides zero by zero.
    if d.is_nan() {
        C64::new(0.0, 0.0)
    } else {
        d
    }
}

/// Band values at quasi-momentum `theta` from the exact transfer matrices.
/// Requires a potential that is constant on every cell edge.
pub fn secular_bands(
    g: &PeriodicGraph,
    p: &ProblemParameters,
    theta: &[f64],
    opts: SecularOptions,
) -> Result<SecularRoots> {
    if theta.len() != g.dim() {
        return Err(Error::Input("theta has the wrong dimension".into()));
    }
    let ne = g.cell().num_edges();
    p.potential.check_edges(ne)?;
    let v = p
        .potential
        .piecewise_constant(ne)
        .ok_or_else(|| Error::Input("the transfer-matrix oracle needs a piecewise constant potential".into()))?;
    let masses: Vec<f64> = v.iter().map(|v| p.a + v).collect();
    let cell = PeriodicClosure::bloch_cell(g);
    let step = opts.step.unwrap_or(1e-3 * p.a);
    let count = (2.0 * opts.lambda_max / step).ceil() as usize;
    let det = |l: f64| secular_determinant(&cell, &masses, theta, l);

    let xs: Vec<f64> = (0..=count)
        .map(|i| -opts.lambda_max + 2.0 * opts.lambda_max * i as f64 / count as f64)
        .collect();
    let dets: Vec<C64> = xs.iter().map(|&x| det(x)).collect();
    let fs: Vec<f64> = dets.iter().map(|d| d.re).collect();
    let max_abs = dets.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let max_im = dets.iter().map(|d| d.im.abs()).fold(0.0, f64::max);
    let f = |l: f64| det(l).re;

    let mut roots = Vec::new();
    let mut tangential = Vec::new();
    let mut suspect = Vec::new();
    for i in 0..count {
        if fs[i] == 0.0 {
            roots.push(xs[i]);
        } else if fs[i] * fs[i + 1] < 0.0 {
            roots.push(bisect(&f, xs[i], xs[i + 1], fs[i]));
        }
    }
    if fs[count] == 0.0 {
        roots.push(xs[count]);
    }
    for i in 1..count {
        let (a, b, c) = (fs[i - 1], fs[i], fs[i + 1]);
        if a * b > 0.0 && b * c > 0.0 && b.abs() < a.abs() && b.abs() < c.abs() {
            let (x, fx) = golden_min(&|l: f64| f(l).abs(), xs[i - 1], xs[i + 1]);
            let scale = a.abs().max(c.abs());
            if fx <= 1e-8 * scale {
                tangential.push(x);
                roots.extend([x, x]);
            } else if fx <= 1e-2 * scale {
                suspect.push((xs[i - 1], xs[i + 1]));
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(SecularRoots {
        roots,
        tangential,
        suspect,
        imag_ratio: if max_abs > 0.0 { max_im / max_abs } else { 0.0 },
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > 1e-12 * a.abs().max(b.abs()).max(1.0) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 * a.abs().max(b.abs()).max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::Potential;
    use crate::graph::{build_example, ExampleKind};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn transfer_matrix_has_unit_determinant() {
        for (l, m) in [(0.3, 1.0), (2.0, 1.0), (1.0, 1.0), (1.0 + 1e-9, 1.0)] {
            let t = edge_transfer(l, m, 1.3);
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            assert!((det - 1.0).abs() < 1e-12, "{l} {m}: {det}");
        }
    }

    #[test]
    fn chain_reduces_to_cosine_relation() {
        // det = 2 cos(l q) - 2 cos(theta), so the roots are
        // +-sqrt(a^2 + (theta + 2 pi n)^2 / l^2).
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        let theta = 1.1;
        let r = secular_bands(&g, &p, &[theta], SecularOptions { lambda_max: 12.0, step: None }).unwrap();
        let mut expect = Vec::new();
        for n in -3i32..=2 {
            let k = theta + TAU * n as f64;
            let l = (1.0 + k * k).sqrt();
            if l < 12.0 {
                expect.push(l);
                expect.push(-l);
            }
        }
        expect.sort_by(f64::total_cmp);
        assert_eq!(r.roots.len(), expect.len());
        for (a, b) in r.roots.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(r.imag_ratio < 1e-12);
        assert!(r.roots.iter().all(|x| x.abs() >= 1.0));
    }

    #[test]
    fn chain_double_roots_at_zero_theta() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        let r = secular_bands(&g, &p, &[0.0], SecularOptions { lambda_max: 7.0, step: None }).unwrap();
        // The band edges +-1 change sign; interior band touchings do not.
        assert!(r.roots.iter().any(|x| (x - 1.0).abs() < 1e-10));
        assert!(r.roots.iter().any(|x| (x + 1.0).abs() < 1e-10));
        let w = (1.0 + TAU * TAU).sqrt();
        assert!(r.tangential.iter().any(|x| (x - w).abs() < 1e-6), "{r:?}");
        assert!(r.tangential.iter().any(|x| (x + w).abs() < 1e-6), "{r:?}");
        assert_eq!(r.roots.iter().filter(|x| (*x - w).abs() < 1e-6).count(), 2);
    }

    #[test]
    fn constant_potential_opens_a_wider_gap() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let p = ProblemParameters::new(1.0, 0.0, Potential::Constant(0.5)).unwrap();
        let r = secular_bands(&g, &p, &[PI / 2.0], SecularOptions { lambda_max: 3.0, step: None }).unwrap();
        let lowest = r.roots.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        assert!((lowest - (2.25 + PI * PI / 4.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn no_roots_inside_the_gap() {
        let g = build_example(ExampleKind::DecoratedChain { stub_length: 1.0 }).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        for theta in [0.0, 1.0, PI] {
            let r = secular_bands(&g, &p, &[theta], SecularOptions { lambda_max: 0.999, step: None }).unwrap();
            assert!(r.roots.is_empty() && r.suspect.is_empty());
        }
    }

    #[test]
    fn decorated_chain_golden_root_is_mesh_independent() {
        let g = build_example(ExampleKind::DecoratedChain { stub_length: 1.0 }).unwrap();
        let p = ProblemParameters::free(1.0).unwrap();
        let positive = |step: f64| {
            let r = secular_bands(&g, &p, &[0.0], SecularOptions { lambda_max: 4.0, step: Some(step) }).unwrap();
            r.roots.into_iter().filter(|&x| x > 0.0).collect::<Vec<_>>()
        };
        let a = positive(1e-3);
        let b = positive(3.7e-4);
        assert_eq!(a.len(), b.len());
        // Constant u1 with u2 = 0 is an eigenfunction with eigenvalue a at theta = 0.
        assert!((a[0] - 1.0).abs() < 1e-10);
        assert!((a[1] - 2.156506286441348).abs() < 1e-10);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }
}
