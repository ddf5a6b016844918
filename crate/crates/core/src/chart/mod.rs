//! Tensor fields on coordinate domains and their calculus.

pub mod domain;
pub mod field;
pub mod ops;
pub mod sphere;

pub use domain::{CoordinateDomain, DomainKind, DEFAULT_SAMPLES, DEFAULT_SEED};
pub use field::{Evaluator, Field, SectionPair, Valence};
pub use ops::{
    contract, courant_bracket, exterior_derivative, interior, lie_bracket, lie_derivative,
    lie_derivative_bivector, pairing, schouten_square, sharp, Sign,
};
