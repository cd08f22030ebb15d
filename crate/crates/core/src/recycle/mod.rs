//! Recycle spaces: construction, projection, update, and diagnostics.

mod angles;
pub mod eigen;
mod space;
mod update;

pub use angles::principal_angle_cosines;
pub use eigen::{smallest_eigenpairs, smallest_left_eigenpairs, EigenOptions, Eigenpairs};
pub use space::{
    biorthonormalize, biorthonormalize_with_images, refresh_images, RecycleError, RecycleSpace,
    RANK_TOL,
};
pub use update::{update_recycle_space, CapturedCycle};

pub(crate) use update::CycleBuilder;
