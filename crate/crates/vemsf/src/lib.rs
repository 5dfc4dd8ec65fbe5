//! Stabilization-free serendipity virtual element method for 2D linear
//! elastostatics on arbitrary polygonal meshes.
//!
//! The crate is organized bottom-up:
//! - [`mesh`]: polygonal meshes, element geometry, generators, file I/O
//! - [`quadrature`]: scaled-boundary cubature on polygons, Gauss/Lobatto rules
//! - [`polyspace`]: scaled monomial bases, Voigt machinery, material matrices
//! - [`projectors`]: per-element serendipity and L² projection matrices
//! - [`element`]: strain-order selection, element stiffness and load
//! - [`eigenanalysis`]: element spectrum studies (spurious zero-energy modes)
//! - [`system`]: global DOF map, assembly, boundary conditions, solve, norms
//! - [`study`]: benchmark catalog, patch/convergence/eigen drivers, CSV output

pub use nalgebra;

pub mod eigenanalysis;
pub mod element;
pub mod mesh;
pub mod polyspace;
pub mod projectors;
pub mod quadrature;
pub mod study;
pub mod system;
