//! Compiler and analysis toolkit for the μCUTLASS kernel-configuration DSL.

#[macro_use]
mod keyword;

pub mod dsl;
pub mod ir;
pub mod samples;
pub mod validate;
pub mod emit;
pub mod compile;
pub mod sol;
pub mod triage;
pub mod schedule;
pub mod metrics;
pub mod integrity;
