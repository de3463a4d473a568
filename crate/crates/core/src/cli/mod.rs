//! Configuration-driven experiment runner: a strict JSON config schema with
//! resolved defaults, experiment dispatch, and deterministic report/CSV
//! artifacts.

pub mod config;
pub mod runner;
