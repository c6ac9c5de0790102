pub mod baselines;
pub mod corpus;
mod digest;
pub mod llm;
pub mod metrics;
pub mod parser;
pub mod runner;
pub mod service;
pub mod synth;
pub mod text;
