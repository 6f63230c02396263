//! Command-line tools and the HTTP coaching service.
//!
//! Grammar arguments accept a file path or one of the bundled names `toy` and
//! `toy-underconstrained`.

pub mod commands;
pub mod config;
pub mod service;

use std::path::Path;

use anyhow::{Context, Result};
use coach_core::fixtures::{TOY_GRAMMAR, TOY_UNDERCONSTRAINED};
use coach_core::grammar::{load_grammar, Grammar, GrammarError, Mode};
use coach_core::supertag::SupertagModel;

pub use commands::run;

/// Grammar source text for a path or a bundled grammar name.
pub fn grammar_source(arg: &str) -> Result<String> {
  match arg {
    "toy" => Ok(TOY_GRAMMAR.to_string()),
    "toy-underconstrained" => Ok(TOY_UNDERCONSTRAINED.to_string()),
    path => std::fs::read_to_string(path).with_context(|| format!("cannot read grammar {path}")),
  }
}

/// Loads a grammar argument in one mode, keeping the structured load error.
pub fn try_load_grammar(arg: &str, mode: Mode) -> Result<std::result::Result<Grammar, GrammarError>> {
  Ok(load_grammar(&grammar_source(arg)?, mode))
}

pub fn load_grammar_arg(arg: &str, mode: Mode) -> Result<Grammar> {
  try_load_grammar(arg, mode)?.with_context(|| format!("cannot load grammar {arg}"))
}

pub fn load_model(path: &Path) -> Result<SupertagModel> {
  let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model {}", path.display()))?;
  SupertagModel::deserialize(&text).with_context(|| format!("cannot load model {}", path.display()))
}
