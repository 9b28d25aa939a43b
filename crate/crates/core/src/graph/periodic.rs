use serde::{Deserialize, Serialize};

use super::metric::{Edge, MetricGraph};
use super::Shift;
use crate::error::{Error, Result};

/// Identification `out = T^{e_i}(in)` between two boundary vertices of the cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gluing {
    pub out: usize,
    #[serde(rename = "in")]
    pub inc: usize,
}

/// Serialized form of a periodic graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
    /// One list of gluings per lattice generator.
    pub gluings: Vec<Vec<Gluing>>,
}

/// Fundamental cell plus the gluing data of a `Z^d` action, `d` in {1, 2}.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGraph {
    cell: MetricGraph,
    gluings: Vec<Vec<Gluing>>,
    // For every cell vertex: the quotient vertex and the lattice shift of the
    // copy it belongs to.
    orbit: Vec<(usize, Shift)>,
    reps: Vec<usize>,
}

impl PeriodicGraph {
    pub fn new(cell: MetricGraph, gluings: Vec<Vec<Gluing>>) -> Result<Self> {
        let d = gluings.len();
        if !(1..=2).contains(&d) {
            return Err(Error::Graph(format!("lattice dimension must be 1 or 2, got {d}")));
        }
        let nv = cell.num_vertices();
        let mut out_of: Vec<Option<(usize, usize)>> = vec![None; nv];
        for (i, list) in gluings.iter().enumerate() {
            let mut ins = vec![false; nv];
            let mut outs = vec![false; nv];
            for g in list {
                if g.out >= nv || g.inc >= nv {
                    return Err(Error::Graph(format!("gluing {i} references a missing vertex")));
                }
                if outs[g.out] || ins[g.inc] {
                    return Err(Error::Graph(format!("gluing {i} is not a bijection")));
                }
                outs[g.out] = true;
                ins[g.inc] = true;
                if out_of[g.out].is_some() {
                    return Err(Error::Graph(format!(
                        "vertex {} is glued by more than one generator",
                        g.out
                    )));
                }
                out_of[g.out] = Some((i, g.inc));
            }
            if (0..nv).any(|v| ins[v] && outs[v]) {
                return Err(Error::Graph(format!(
                    "gluing {i} maps between overlapping vertex sets"
                )));
            }
        }

        let reps: Vec<usize> = (0..nv).filter(|&v| out_of[v].is_none()).collect();
        let mut rep_index = vec![usize::MAX; nv];
        for (q, &v) in reps.iter().enumerate() {
            rep_index[v] = q;
        }
        let mut orbit = Vec::with_capacity(nv);
        for v in 0..nv {
            let mut shift: Shift = [0; 2];
            let mut w = v;
            let mut steps = 0;
            while let Some((i, inc)) = out_of[w] {
                shift[i] += 1;
                w = inc;
                steps += 1;
                if steps > nv {
                    return Err(Error::Graph("gluings form a cycle (action not free)".into()));
                }
            }
            orbit.push((rep_index[w], shift));
        }
        for a in 0..nv {
            for b in a + 1..nv {
                if orbit[a] == orbit[b] {
                    return Err(Error::Graph(format!(
                        "cell vertices {a} and {b} are identified with each other"
                    )));
                }
            }
        }

        let g = PeriodicGraph {
            cell,
            gluings,
            orbit,
            reps,
        };
        if !g.patch_connected() {
            return Err(Error::Graph(
                "the periodic graph is not connected on a 3^d patch".into(),
            ));
        }
        Ok(g)
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self> {
        let cell = MetricGraph::new(doc.vertices, doc.edges)?;
        Self::new(cell, doc.gluings)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.cell.labels().to_vec(),
            edges: self.cell.edges().to_vec(),
            gluings: self.gluings.clone(),
        }
    }

    pub fn cell(&self) -> &MetricGraph {
        &self.cell
    }

    pub fn dim(&self) -> usize {
        self.gluings.len()
    }

    pub fn gluings(&self) -> &[Vec<Gluing>] {
        &self.gluings
    }

    /// Number of vertex orbits, i.e. vertices of the quotient graph.
    pub fn num_orbits(&self) -> usize {
        self.reps.len()
    }

    /// Cell vertices chosen as orbit representatives.
    pub fn representatives(&self) -> &[usize] {
        &self.reps
    }

    /// Quotient vertex and lattice shift of a cell vertex.
    pub fn orbit_of(&self, v: usize) -> (usize, Shift) {
        self.orbit[v]
    }

    /// Number of loops in the quotient graph.
    pub fn quotient_loops(&self) -> usize {
        self.cell
            .edges()
            .iter()
            .filter(|e| self.orbit[e.tail].0 == self.orbit[e.head].0)
            .count()
    }

    fn patch_connected(&self) -> bool {
        let d = self.dim();
        let r = self.reps.len();
        let side = 3i64;
        let ncell = 3usize.pow(d as u32);
        let coord = |c: usize| -> Shift {
            let mut s = [0; 2];
            s[0] = (c % 3) as i64;
            if d == 2 {
                s[1] = (c / 3) as i64;
            }
            s
        };
        let index = |s: Shift| -> Option<usize> {
            if (0..d).any(|i| s[i] < 0 || s[i] >= side) {
                None
            } else {
                Some(s[0] as usize + if d == 2 { 3 * s[1] as usize } else { 0 })
            }
        };
        let mut parent: Vec<usize> = (0..r * ncell).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for c in 0..ncell {
            let base = coord(c);
            for e in self.cell.edges() {
                let (qt, st) = self.orbit[e.tail];
                let (qh, sh) = self.orbit[e.head];
                let ct = index([base[0] + st[0], base[1] + st[1]]);
                let ch = index([base[0] + sh[0], base[1] + sh[1]]);
                if let (Some(ct), Some(ch)) = (ct, ch) {
                    let a = find(&mut parent, ct * r + qt);
                    let b = find(&mut parent, ch * r + qh);
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, 0);
        (0..r * ncell).all(|x| find(&mut parent, x) == root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(n: usize, edges: &[(usize, usize)]) -> MetricGraph {
        MetricGraph::new(
            (0..n).map(|i| format!("v{i}")).collect(),
            edges
                .iter()
                .map(|&(t, h)| Edge { tail: t, head: h, length: 1.0 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_bijective_gluing() {
        let c = cell(3, &[(0, 1), (0, 2)]);
        let gl = vec![vec![Gluing { out: 1, inc: 0 }, Gluing { out: 2, inc: 0 }]];
        assert!(PeriodicGraph::new(c, gl).is_err());
    }

    #[test]
    fn rejects_overlapping_gluing() {
        let c = cell(2, &[(0, 1)]);
        let gl = vec![vec![Gluing { out: 1, inc: 0 }, Gluing { out: 0, inc: 1 }]];
        assert!(PeriodicGraph::new(c, gl).is_err());
    }

    #[test]
    fn rejects_disconnected_lattice() {
        // Two vertices glued onto themselves in a way that leaves copies apart.
        let c = cell(2, &[(0, 1)]);
        let gl = vec![vec![]];
        assert!(PeriodicGraph::new(c, gl).is_err());
    }

    #[test]
    fn document_round_trip() {
        let c = cell(2, &[(0, 1)]);
        let g = PeriodicGraph::new(c, vec![vec![Gluing { out: 1, inc: 0 }]]).unwrap();
        let json = serde_json::to_string(&g.to_document()).unwrap();
        let back: GraphDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(PeriodicGraph::from_document(back).unwrap(), g);
    }
}
