pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod minimal;
pub mod modulation;
pub mod ode;
pub mod ground_state;
pub mod params;
pub mod selfsim;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{GridSettings, RadialField, RadialGrid, RadialInterpolant};
pub use params::Params;
