//! Bath correlation functions: continuum spectral densities, exact discrete baths,
//! superoperator two-point components and Wick pairings.

pub mod discrete;
pub mod spectral;
pub mod super_corr;
pub mod wick;

pub use discrete::{exact_multipoint_moment, BathMode, DiscreteBath, ModeKind};
pub use spectral::{
    correlation_from_spectral_density, BathCorrelation, DiscreteSpectrum, SpectralDensity,
};
pub use super_corr::{super_correlation, CorrelationTable, SuperCorrelation};
pub use wick::{enumerate_pairings, wick_multipoint, PairPartition};
