pub mod circle_oracle;
pub mod empirical_measure;
pub mod error;
pub mod grid;
pub mod julia_sampler;
pub mod orbit;
pub mod rational_map;
pub mod recurrence;
pub mod roots;
pub mod stats;
pub mod thermo;

pub use error::{Error, Result};
pub use num_complex::Complex64;
