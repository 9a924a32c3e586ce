//! Scenario pipeline: vocabulary-grounded functional scenarios are lowered
//! to parameter-range logical scenarios, concretized into fully grounded
//! concrete scenarios, and exported as test cases with input time series.

pub mod canon;
pub mod concretize;
pub mod error;
pub mod expr;
pub mod functional;
pub mod logical;
pub mod lowering;
pub mod testcase;
pub mod vocabulary;

#[cfg(feature = "test-support")]
pub mod testing;
