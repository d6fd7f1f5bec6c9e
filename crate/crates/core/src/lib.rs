//! Native core of the emsim eddy-current workflow.
//!
//! * [`geometry`]: conductor layouts and the circular computational domain
//! * [`layoutlang`]: sandboxed mini-language that emits conductor centers
//! * [`mesher`]: constrained Delaunay meshing with quality refinement
//! * [`solver`]: time-harmonic A-v finite element formulation on P1 triangles
//! * [`postdsl`]: PostProcessing/PostOperation language subset
//! * [`export`]: legacy VTK and JSON writers
//!
//! Element loops run on rayon when the `parallel` feature is enabled (the
//! default) and sequentially otherwise; results are identical either way.

pub mod exec;
pub mod export;
pub mod geometry;
pub mod layoutlang;
pub mod mesher;
pub mod postdsl;
pub mod solver;

pub use num_complex::Complex64;
