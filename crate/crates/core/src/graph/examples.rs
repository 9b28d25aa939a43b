use serde::{Deserialize, Serialize};

use super::metric::{Edge, MetricGraph};
use super::periodic::{Gluing, PeriodicGraph};
use crate::error::{Error, Result};

/// The built-in periodic graphs. All edges have unit length except the stub.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExampleKind {
    Chain,
    DecoratedChain { stub_length: f64 },
    Ladder,
    Strip,
    SquareLattice,
}

pub fn build_example(kind: ExampleKind) -> Result<PeriodicGraph> {
    let e = |tail, head, length| Edge { tail, head, length };
    let gl = |out, inc| Gluing { out, inc };
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let (labels, edges, gluings) = match kind {
        ExampleKind::Chain => (names(&["v0", "v1"]), vec![e(0, 1, 1.0)], vec![vec![gl(1, 0)]]),
        ExampleKind::DecoratedChain { stub_length } => {
            if !(stub_length.is_finite() && stub_length > 0.0) {
                return Err(Error::Graph(format!("stub length {stub_length} must be positive")));
            }
            (
                names(&["v0", "v1", "tip"]),
                vec![e(0, 1, 1.0), e(0, 2, stub_length)],
                vec![vec![gl(1, 0)]],
            )
        }
        ExampleKind::Ladder => (
            names(&["top0", "bot0", "top1", "bot1"]),
            vec![e(0, 2, 1.0), e(1, 3, 1.0), e(0, 1, 1.0)],
            vec![vec![gl(2, 0), gl(3, 1)]],
        ),
        ExampleKind::Strip => (
            names(&["top0", "mid0", "bot0", "top1", "mid1", "bot1"]),
            vec![
                e(0, 3, 1.0),
                e(1, 4, 1.0),
                e(2, 5, 1.0),
                e(0, 1, 1.0),
                e(1, 2, 1.0),
            ],
            vec![vec![gl(3, 0), gl(4, 1), gl(5, 2)]],
        ),
        ExampleKind::SquareLattice => (
            names(&["v00", "v10", "v01"]),
            vec![e(0, 1, 1.0), e(0, 2, 1.0)],
            vec![vec![gl(1, 0)], vec![gl(2, 0)]],
        ),
    };
    PeriodicGraph::new(MetricGraph::new(labels, edges)?, gluings)
}

impl ExampleKind {
    pub fn all(stub_length: f64) -> [ExampleKind; 5] {
        [
            ExampleKind::Chain,
            ExampleKind::DecoratedChain { stub_length },
            ExampleKind::Ladder,
            ExampleKind::Strip,
            ExampleKind::SquareLattice,
        ]
    }
}
