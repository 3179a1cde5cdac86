//! Red-10 engine and identity-aware multi-agent learning.
//!
//! The crate is organized bottom-up: [`engine`] implements the rules,
//! [`features`] encodes observations, [`neural`] provides the two fixed
//! network topologies, [`policy`] and [`identify`] hold the learned models,
//! [`agents`] composes them into players, [`training`] runs the
//! actor/learner pipeline and [`evaluation`] runs tournaments.

pub mod engine;
pub mod features;
pub mod neural;
pub mod policy;
pub mod identify;
pub mod agents;
pub mod training;
pub mod evaluation;
