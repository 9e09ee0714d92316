//! Shared fixtures and reference implementations for the integration and
//! acceptance tests.

pub mod corpus;
pub mod fixtures;
pub mod reference;
