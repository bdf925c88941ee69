//! A simulation-and-verification laboratory for two-dimensional Ising
//! percolation near the critical external field.
//!
//! The crate samples spin configurations (exact Gibbs sweeps, Wolff cluster
//! moves with a ghost field, and the Bernoulli limit), detects connectivity
//! events on them (crossings, circuits, arm events, pivotal sites, lowest
//! crossings), and estimates the quantities those events control: crossing
//! and arm probabilities, correlation lengths, cluster observables and the
//! exponents relating them.
//!
//! Correctness rests on three legs:
//!
//! * an exact-enumeration oracle for small regions, against which every
//!   sampler and detector is checked;
//! * exhaustive combinatorial invariants (crossing duality, pivotality
//!   symmetry, lowest-crossing minimality) verified over complete
//!   configuration spaces of small boxes;
//! * statistical acceptance checks at simulation scale with explicit
//!   tolerances.
//!
//! Modules in dependency order: [`lattice`] (geometry), [`gibbs`] (sampling),
//! [`clusters`] (colors and traversal), [`events`] (detectors).

pub mod clusters;
pub mod estimators;
pub mod events;
pub mod gibbs;
pub mod lattice;
mod numeric;
pub mod oracle;
