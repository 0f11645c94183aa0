//! Event-based signal temporal logic (STL) toolkit for multi-robot systems.
//!
//! The pipeline: parse an event-based STL spec over declared predicates and
//! environment events, abstract it to LTL over atomic propositions, translate
//! that to a Buchi automaton, and execute it with a symbolic planner that
//! activates time-varying control barrier functions (CBFs) solved as per-step
//! min-norm quadratic programs. Feedback surfaces a-priori spec conflicts and
//! runtime infeasibility instead of failing silently.

pub mod abstraction;
pub mod buchi;
pub mod cbf;
pub mod controller;
pub mod feedback;
pub mod formula;
pub mod planner;
pub mod sim;
