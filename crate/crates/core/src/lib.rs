//! Sheaves of pseudometric spaces on finite topological spaces.
//!
//! The crate measures how far an assignment of local data is from a global
//! section (the consistency radius and its local, star and L2 variants),
//! extends partial assignments by min-max optimization, builds the
//! consistency filtration of maximal ε-consistent covers, and summarizes it
//! through persistent Čech cohomology.

pub mod cech;
pub mod extend;
pub mod filtration;
pub mod finspace;
pub mod fixtures;
pub mod metric;
pub mod morphism;
pub mod pointcloud;
pub mod random;
pub mod sheaf;

pub use finspace::{FiniteSpace, OpenId, Orientation, PartialCover, PointSet, TopologyError};
pub use metric::{Norm, PseudometricSpace, StalkMap, Value};
pub use sheaf::{Assignment, MetricSheaf, SheafError};
