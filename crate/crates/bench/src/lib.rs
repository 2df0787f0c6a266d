//! Benchmark harness: RT agent, attack/load generators, and the experiment
//! orchestrator. `cyclebench-core` holds the model, simulator and analysis.

pub mod agent;
pub mod attack;
pub mod orchestrator;
pub mod sys;
