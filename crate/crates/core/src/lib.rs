//! Rule-based explanations for black-box tabular classifiers, searched with a
//! counterfactual engine as a consistency oracle.

pub mod cf;
pub mod classifier;
pub mod consistency;
pub mod duality;
pub mod explain;
pub mod schema;
pub mod harness;
