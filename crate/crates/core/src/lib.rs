//! Out-of-order execution of sequential orchestration programs.

pub mod bezoar;
pub mod control;
pub mod error;
pub mod frontend;
mod irtext;
pub mod library;
pub mod mutation_opt;
pub mod opal;
pub mod pipeline;
pub mod runtime;
pub mod trace;
