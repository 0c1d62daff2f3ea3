//! The AeroCmd command language: AST, parser, canonical renderer, and
//! safety validation. See `docs/grammar.md` for the concrete syntax.

mod ast;
mod parse;
mod render;
mod validate;

pub use ast::{
    angular_distance, ast_equiv, ast_equiv_with_tolerance, wrap_degrees, Command, EmptyProgram, ImageType,
    Program, UnknownImageType, AST_TOLERANCE,
};
pub use parse::{parse_program, ParseError};
pub use render::{format_number, render_command, render_program};
pub use validate::{
    validate, validate_with_model, Geofence, InvalidEnvelope, Rule, SafetyEnvelope, ValidatedProgram, Violation,
};
