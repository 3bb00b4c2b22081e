//! Numerical laboratory for semilinear wave equations with null-condition
//! nonlinearities in spherical symmetry.
//!
//! The field φ solves □φ + N(Φ,φ) + L(∂φ) = F(∂φ) with □ = −∂_t² + Δ,
//! evolved as ψ = rφ on a double-null lattice u = (t−r)/2, v = (t+r)/2.
//! Diagnostics live on the hybrid foliation Σ_τ = {t=τ, r≤R} ∪ {u=u_τ, v≥v_τ}.

pub mod analysis;
pub mod background;
pub mod coeffs;
pub mod config;
pub mod energetics;
pub mod grid;
pub mod runner;
pub mod solver;
