//! Natural-language drone operations: a typed command language, a
//! retrieval translator from utterances to programs, a kinematic
//! simulator, a framed JSON wire protocol, an operator console, and an
//! evaluation harness.

pub mod config;
pub mod corpus;
pub mod dsl;
pub mod eval;
pub mod nl;
pub mod repl;
pub mod sim;
pub mod wire;
