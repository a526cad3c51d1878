//! Data flow refinement type inference for a small ML-like language.
//!
//! The crate provides a concrete data flow semantics used as a testing oracle,
//! a family of relational base domains, refinement types over abstract call
//! stacks, a widened abstract interpreter that infers them, and an independent
//! checker for the declarative typing rules.

pub mod absint;
pub mod base;
pub mod concrete;
pub mod corpus;
pub mod config;
pub mod gamma;
pub mod lang;
pub mod linear;
pub mod types;
pub mod typing;
