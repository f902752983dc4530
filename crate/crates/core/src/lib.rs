//! Exact invariant measures on countable relational structures.
pub mod canonical;
pub mod cli;
pub mod io;
pub mod lang;
pub mod measure;
pub mod qftypes;
pub mod rational;
pub mod recipe;
pub mod stats;
pub mod verify;
pub mod zoo;
