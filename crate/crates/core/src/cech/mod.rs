//! Čech cohomology of partial covers, persistence along coarsening
//! filtrations, barcodes and bottleneck distance.

mod bottleneck;
mod cohomology;
pub mod field;
mod nerve;
mod persistence;

use thiserror::Error;

pub use bottleneck::{bottleneck, finite_bottleneck};
pub use cohomology::{coboundary, least_refinement, pullback_matrix, refinement_map, validate_refinement, Cohomology};
pub use field::{EchelonBasis, Field, Mat, F2, Q};
pub use nerve::Nerve;
pub use persistence::{
    filtration_barcode, persistence_modules, Bar, FieldKind, IndexInterval, PersistenceDiagram, PersistenceModule,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CechError {
    #[error("the fine cover does not refine the coarse cover")]
    NotARefinement,
    #[error("refinement function is invalid at fine member {member}")]
    InvalidTau { member: usize },
    #[error("covers live on different spaces")]
    SpaceMismatch,
    #[error("persistence module maps do not chain at index {index}")]
    NonComposable { index: usize },
    #[error("diagrams have different numbers of infinite bars in degree {degree}")]
    InfiniteMismatch { degree: usize },
}

/// Cohomology ranks of a cover in degrees `0..=degree_cap`.
pub fn cech_ranks(cover: &crate::finspace::PartialCover, field: FieldKind, degree_cap: usize) -> Vec<usize> {
    match field {
        FieldKind::F2 => Cohomology::<F2>::new(cover, degree_cap).ranks().to_vec(),
        FieldKind::Q => Cohomology::<Q>::new(cover, degree_cap).ranks().to_vec(),
    }
}
