//! Seeded Monte Carlo simulation of pinned billiard balls on triangular
//! lattices.
//!
//! Balls sit fixed on a lattice and carry pseudo-velocities. At each step a
//! contact pair is drawn uniformly at random; if the pair is approaching
//! along its line of centres, the parallel velocity components are exchanged.
//! Energy and momentum are conserved by every exchange.

pub mod dynamics;
pub mod engine;
pub mod lattice;
pub mod presets;
pub mod stats;
pub mod tables;
pub mod vec2;

pub use dynamics::{
    collide, is_approaching, kinetic_energy, total_momentum, unit_direction, VelocityPair,
};
pub use engine::{
    run, run_batch, Anchor, InitialCondition, RunResult, SimConfig, SimState, StoppingRule,
};
pub use lattice::{Configuration, LatticeKind, LatticeSpec};
pub use vec2::Vec2;
