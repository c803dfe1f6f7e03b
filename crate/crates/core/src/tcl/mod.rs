//! Moments, cut-diagram compositions, generators and propagation.

pub mod compositions;
pub mod generator;
pub mod grid;
pub mod moments;
pub mod propagate;
pub mod series;

pub use compositions::{enumerate_compositions, Composition, MAX_COMPOSITION_ORDER};
pub use generator::{generator_via_compositions, generator_via_recursion, tcl2_generator};
pub use grid::TimeGrid;
pub use moments::{
    compute_moment, compute_moment_derivative, compute_moment_derivative_with_top, compute_moments,
    BathMoments, MAX_MOMENT_ORDER,
};
pub use propagate::{
    dynamical_map_from_generator, propagate, step_halving_error, DynamicalMap, Trajectory,
};
pub use series::{GeneratorSeries, MomentSeries};
