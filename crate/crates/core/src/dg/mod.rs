//! Reference basis, quadrature, dof layout and edge traces of the broken
//! polynomial space.

pub mod basis;
pub mod quadrature;
pub mod space;
pub mod trace;

pub use basis::{local_dimension, Basis};
pub use quadrature::{line_rule, triangle_rule, LineRule, QuadratureRule, TriangleRule};
pub use space::{DgSpace, SpaceOptions, Tabulation};
pub use trace::{average, jump, EdgeTrace};
