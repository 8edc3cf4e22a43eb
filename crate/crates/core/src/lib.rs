pub mod algebra2d;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod output;
pub mod penalty;
pub mod report;
pub mod shear_grid;
pub mod shear_strong;
pub mod shear_weak;
pub mod twist_explicit;
pub mod twist_penalized;

pub use error::{Error, Result};
