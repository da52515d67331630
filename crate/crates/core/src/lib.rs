pub mod data;
pub mod experiment;
pub mod fairlearn;
pub mod genmodel;
pub mod metrics;
pub mod nn;
pub mod repr;
pub mod scm;
