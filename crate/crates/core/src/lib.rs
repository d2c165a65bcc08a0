//! Numerical laboratory for classic experiments in nonlinear dynamics.
//!
//! Each module houses one family of experiments:
//!
//! * [`numerics`]: fixed-step integrators and hyperplane section crossings.
//! * [`flows`]: the Lorenz system and the Hénon–Heiles Hamiltonian.
//! * [`lattice`]: the Fermi–Pasta–Ulam–Tsingou chain and the Korteweg–de Vries equation.
//! * [`maps`]: the logistic map (bifurcations, Feigenbaum ratios) and the Hénon map.
//! * [`reaction_diffusion`]: a two-morphogen activator/inhibitor system on a periodic grid.
//! * [`complex`]: escape-time Julia/Mandelbrot grids and Newton basins for z³ − 1.
//! * [`arithmetic`]: point counts on y² = x³ − dx modulo primes and the rank slope fit.
//!
//! The [`schema`] module is the parameter registry shared by the batch runner
//! and the session server. Data-parallel loops go through [`par`], which falls
//! back to sequential iteration when the `parallel` feature is disabled.

pub mod arithmetic;
pub mod complex;
pub mod flows;
pub mod lattice;
pub mod maps;
pub mod numerics;
pub mod par;
pub mod reaction_diffusion;
pub mod schema;

pub use numerics::{StateVector, Trajectory};
pub use par::Execution;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
