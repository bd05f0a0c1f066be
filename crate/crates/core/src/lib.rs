pub mod nn;
pub mod envs;
pub mod replay;
pub mod ero;
pub mod ddpg;
pub mod registry;
pub mod harness;
pub mod diagnostics;
pub mod cli;
