pub mod conditions;
pub mod distributions;
pub mod environment;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod numeric;
pub mod provenance;
pub mod rng;
pub mod simulate;

pub use distributions::{Family, OffspringDistribution, Phi};
pub use environment::{quench, EnvironmentSpec, QuenchedEnvironment};
pub use error::{Error, Result};
