//! Grammar-constrained, subtoken-level generation of JavaScript logic
//! expressions from natural-language descriptions.

pub mod augment;
pub mod grammar;
pub mod jsfront;
pub mod metrics;
pub mod neural;
pub mod prep;
pub mod transit;
