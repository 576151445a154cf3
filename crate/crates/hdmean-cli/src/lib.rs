pub mod config;
pub mod engine;
pub mod qq;
pub mod tables;
