//! Bezoar: the sequential intermediate form.

pub mod anf;
pub mod desugar;
pub mod ir;
pub mod scope;
pub mod text;

pub use ir::Program;

use crate::error::CompileError;
use crate::frontend::SurfaceModule;

/// Desugars, elaborates scopes and A-normalizes a parsed module.
pub fn lower(m: &SurfaceModule, entry: Option<&str>) -> Result<Program, CompileError> {
    let d = desugar::desugar(m);
    let (elab, scopes) = scope::elaborate_scopes(&d)?;
    anf::a_normalize(&elab, &scopes, entry)
}
