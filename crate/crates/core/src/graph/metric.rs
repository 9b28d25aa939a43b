use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oriented edge `tail -> head`; the arclength coordinate is 0 at the tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Tail,
    Head,
}

impl Endpoint {
    /// Orientation sign: +1 at the start of an edge and -1 at its end.
    pub fn sign(self) -> f64 {
        match self {
            Endpoint::Tail => 1.0,
            Endpoint::Head => -1.0,
        }
    }
}

/// A connected finite metric graph. Loops and parallel edges are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricGraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<(usize, Endpoint)>>,
}

impl MetricGraph {
    pub fn new(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let nv = labels.len();
        if nv == 0 {
            return Err(Error::Graph("graph has no vertices".into()));
        }
        let mut incidence = vec![Vec::new(); nv];
        for (i, e) in edges.iter().enumerate() {
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::Graph(format!(
                    "edge {i} has nonpositive length {}",
                    e.length
                )));
            }
            if e.tail >= nv || e.head >= nv {
                return Err(Error::Graph(format!("edge {i} references a missing vertex")));
            }
            incidence[e.tail].push((i, Endpoint::Tail));
            incidence[e.head].push((i, Endpoint::Head));
        }
        if let Some(v) = incidence.iter().position(Vec::is_empty) {
            return Err(Error::Graph(format!("vertex {} ({}) is isolated", v, labels[v])));
        }
        let g = MetricGraph {
            labels,
            edges,
            incidence,
        };
        if !g.is_connected() {
            return Err(Error::Graph("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Edge ends meeting at `v`; a loop contributes two entries.
    pub fn incidence(&self, v: usize) -> &[(usize, Endpoint)] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Round-trip check of the incidence map against the edge list.
    pub fn incidence_consistent(&self) -> bool {
        let forward = self.incidence.iter().enumerate().all(|(v, inc)| {
            inc.iter().all(|&(e, end)| {
                let edge = &self.edges[e];
                match end {
                    Endpoint::Tail => edge.tail == v,
                    Endpoint::Head => edge.head == v,
                }
            })
        });
        let total: usize = self.incidence.iter().map(Vec::len).sum();
        forward && total == 2 * self.edges.len()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_vertices()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(e, _) in &self.incidence[v] {
                let edge = &self.edges[e];
                for w in [edge.tail, edge.head] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Shortest-path distances from a vertex or from a point on an edge.
    pub fn distances_from(&self, source: PointSource) -> Vec<f64> {
        let nv = self.num_vertices();
        let mut dist = vec![f64::INFINITY; nv];
        match source {
            PointSource::Vertex(v) => dist[v] = 0.0,
            PointSource::Edge { edge, s } => {
                let e = &self.edges[edge];
                dist[e.tail] = dist[e.tail].min(s);
                dist[e.head] = dist[e.head].min(e.length - s);
            }
        }
        // Dijkstra with a linear scan; graphs here have at most a few thousand vertices.
        let mut done = vec![false; nv];
        for _ in 0..nv {
            let mut best = None;
            for v in 0..nv {
                if !done[v] && dist[v].is_finite() && best.is_none_or(|b: usize| dist[v] < dist[b]) {
                    best = Some(v);
                }
            }
            let Some(v) = best else { break };
            done[v] = true;
            for &(e, end) in &self.incidence[v] {
                let edge = &self.edges[e];
                let w = match end {
                    Endpoint::Tail => edge.head,
                    Endpoint::Head => edge.tail,
                };
                let d = dist[v] + edge.length;
                if d < dist[w] {
                    dist[w] = d;
                }
            }
        }
        dist
    }
}

/// Source point for [`MetricGraph::distances_from`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointSource {
    Vertex(usize),
    Edge { edge: usize, s: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn rejects_bad_lengths_and_disconnected() {
        let e = |t, h, l| Edge { tail: t, head: h, length: l };
        assert!(MetricGraph::new(labels(2), vec![e(0, 1, 0.0)]).is_err());
        assert!(MetricGraph::new(labels(2), vec![e(0, 1, -1.0)]).is_err());
        assert!(MetricGraph::new(labels(3), vec![e(0, 1, 1.0)]).is_err());
        assert!(MetricGraph::new(labels(4), vec![e(0, 1, 1.0), e(2, 3, 1.0)]).is_err());
    }

    #[test]
    fn loop_counts_twice() {
        let g = MetricGraph::new(labels(1), vec![Edge { tail: 0, head: 0, length: 2.0 }]).unwrap();
        assert_eq!(g.degree(0), 2);
        assert!(g.incidence_consistent());
    }

    #[test]
    fn distances_on_a_path() {
        let e = |t, h, l| Edge { tail: t, head: h, length: l };
        let g = MetricGraph::new(labels(3), vec![e(0, 1, 1.0), e(1, 2, 2.0)]).unwrap();
        let d = g.distances_from(PointSource::Edge { edge: 1, s: 0.5 });
        assert_eq!(d, vec![1.5, 0.5, 1.5]);
    }
}
