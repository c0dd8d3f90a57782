//! Exit times of Brownian motion from planar and spatial domains: geometry,
//! closed-form kernels, a killed-heat-equation engine, Monte Carlo samplers,
//! capacity solvers and the verification harness that ties them together.

pub mod geometry;
pub mod kernels;
pub mod pde;
pub mod sampler;
pub mod capacity;
pub mod harness;
