//! Stationary (p,q)-configurations of generalized Frenkel-Kontorova chains.
//!
//! The crate models multiharmonic standard-type twist maps through their
//! generating functions, equips the space of (p,q)-configurations with its
//! order lattice, and uses the monotone gradient flow of the periodic action
//! to find, classify and locate stationary states — minimizers,
//! minimaximizers, ordered non-extremal states and unordered states — along
//! with the induced twist-map orbits, their residues, symmetric-orbit
//! searches and symmetry-breaking parameter sweeps.

pub mod action;
pub mod configspace;
pub mod flow;
pub mod model;
pub mod stationary;
pub mod twistmap;

pub use configspace::{Configuration, OrderRelation};
pub use model::{GeneratingModel, Harmonic, PotentialSpec, Preset};
pub use stationary::{ExtremalClass, RegionLabel, StationaryRecord};
