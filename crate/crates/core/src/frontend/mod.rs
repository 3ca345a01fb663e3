//! Specification language: lexing, parsing, macro expansion and elaboration.

pub mod ast;
pub mod elab;
pub mod error;
pub mod eval;
pub mod lexer;
pub mod macros;
pub mod model;
pub mod parser;
pub mod print;
pub mod rw;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

pub use ast::{Span, SpecAst};
pub use elab::elaborate;
pub use error::{Diag, DiagKind, SpecError};
pub use macros::expand_macros;
pub use model::SpecModel;
pub use parser::parse_spec;

const IMPORT_DEPTH: usize = 16;

/// Parses, expands and elaborates specification text without imports.
pub fn load_str(text: &str) -> Result<SpecModel, SpecError> {
    let ast = parse_spec(text)?;
    let expanded = expand_macros(&ast)?;
    elaborate(&expanded)
}

/// Parses a file, splicing in its imports (relative to the importing file).
pub fn parse_file(path: &Path) -> Result<SpecAst, SpecError> {
    let mut active = HashSet::new();
    parse_rec(path, 0, &mut active)
}

fn parse_rec(path: &Path, depth: usize, active: &mut HashSet<PathBuf>) -> Result<SpecAst, SpecError> {
    let shown = path.display().to_string();
    let import_err = |msg: String| SpecError::from(Diag::new(DiagKind::Import, Span::default(), msg));
    if depth > IMPORT_DEPTH {
        return Err(import_err(format!("imports nested deeper than {IMPORT_DEPTH} at `{shown}`")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| import_err(format!("cannot read `{shown}`: {e}")))?;
    let key = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    if !active.insert(key.clone()) {
        return Err(import_err(format!("import cycle through `{shown}`")));
    }
    let ast = parse_spec(&text).map_err(|e| e.with_file(&shown))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut defs = Vec::new();
    for d in ast.defs {
        match &d.kind {
            ast::DefKind::Import(rel) => {
                let sub = parse_rec(&dir.join(rel), depth + 1, active).map_err(|e| {
                    if e.diags.iter().all(|x| x.file.is_some()) {
                        e
                    } else {
                        e.with_file(&shown)
                    }
                })?;
                defs.extend(sub.defs);
            }
            _ => defs.push(d),
        }
    }
    active.remove(&key);
    Ok(SpecAst { defs })
}

/// Loads a specification file with its imports and elaborates it.
pub fn load_file(path: &Path) -> Result<SpecModel, SpecError> {
    let shown = path.display().to_string();
    let ast = parse_file(path)?;
    let expanded = expand_macros(&ast).map_err(|e| e.with_file(&shown))?;
    elaborate(&expanded).map_err(|e| e.with_file(&shown))
}

/// The RV32I description shipped with the crate.
pub const RV32I: &str = include_str!("../../specs/rv32i.pdl");

pub fn rv32i() -> SpecModel {
    load_str(RV32I).expect("bundled specification elaborates")
}
