//! Weak KAM numerics for contact Hamiltonian systems on the circle.
//!
//! The crate is organised bottom-up: [`model`] defines H and its Legendre
//! dual, [`geometry`] the periodic grid, [`flow`] the characteristic ODE,
//! [`variational`] the discrete Lax-Oleinik semigroups, and [`asymptotic`]
//! the orbit constructions built on top of them.

pub mod asymptotic;
pub mod flow;
pub mod geometry;
pub mod model;
pub mod variational;
