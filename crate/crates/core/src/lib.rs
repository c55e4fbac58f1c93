//! Simulation of a two-qubit phase gate with neutral atoms in an atom-chip
//! double well: wire fields, Zeeman potentials, the trap landscape,
//! two-atom eigenstates, gate dynamics along barrier schedules and the
//! Raman state transfer.

pub mod cli;
pub mod constants;
pub mod error;
pub mod gatedynamics;
pub mod magnetostatics;
pub mod ode;
pub mod quadrature;
pub mod raman;
pub mod roots;
pub mod scenario;
pub mod spline;
pub mod trapscape;
pub mod twoatom;
pub mod zeeman;

pub use error::{Error, Result};
