//! The discrete Dirac operator `-i sigma_1 d/dx + (a + V) sigma_3` with
//! Kirchhoff-type vertex conditions.
//!
//! Continuity of the first component is built into the grid (one unknown per
//! vertex). The signed sum of second-component traces enters through the
//! vertex rows, which integrate the first equation over the half cells around
//! the vertex.

mod export;
mod operator;
mod params;
mod vertex;

pub use export::OperatorLayout;
pub use operator::{assemble, bloch_phase, DiracOperator};
pub use params::{reduce_scaling, PhysicalScaling, Potential, ProblemParameters, ScalingReduction};
pub use vertex::{check_vertex_conditions, VertexDefect, VertexReport};
