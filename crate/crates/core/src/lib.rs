//! Discrete-time scattering port-Hamiltonian systems.
//!
//! The crate models linear relations (subspaces of `K^p x K^q`) with their
//! structural classes (contractive, monotone, norm preserving, Dirac,
//! Lagrangian), the subspace Cayley transform connecting monotone and
//! contractive structures, descriptor and standard state-space systems with
//! scattering-passivity verification, a coordinate-free geometric system
//! form driven by a norm-preserving routing relation, and structure
//! preserving interconnection of two passive systems.
//!
//! Start from [`subspace::Subspace`] and [`systems::StandardSystem`]; the
//! `examples/` directory walks through every major capability.

pub mod cli;
pub mod geometric;
pub mod interconnect;
pub mod linalg;
pub mod subspace;
pub mod systems;
