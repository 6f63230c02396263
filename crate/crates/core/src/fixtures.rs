//! Bundled toy grammars, test suites and mini-treebank.

use std::sync::OnceLock;

use crate::grammar::{load_grammar, Grammar, Mode};
use crate::tfs::TypeHierarchy;

pub const TOY_GRAMMAR: &str = include_str!("../data/toy.tdl");
/// The toy grammar without gender/number agreement between a noun and its
/// adjective.
pub const TOY_UNDERCONSTRAINED: &str = include_str!("../data/toy-underconstrained.tdl");
pub const GRAMMATICAL_SUITE: &str = include_str!("../data/grammatical.suite");
pub const LEARNER_SUITE: &str = include_str!("../data/learner.suite");
pub const AMBIGUITY_SUITE: &str = include_str!("../data/ambiguity.suite");
pub const TREEBANK: &str = include_str!("../data/treebank.txt");

fn cached(cells: &'static [OnceLock<Grammar>; 2], source: &str, mode: Mode) -> &'static Grammar {
  let cell = match mode {
    Mode::Strict => &cells[0],
    Mode::Learner => &cells[1],
  };
  cell.get_or_init(|| load_grammar(source, mode).expect("bundled grammar loads"))
}

/// The bundled toy grammar, loaded once per mode.
pub fn toy(mode: Mode) -> &'static Grammar {
  static CELLS: [OnceLock<Grammar>; 2] = [OnceLock::new(), OnceLock::new()];
  cached(&CELLS, TOY_GRAMMAR, mode)
}

/// The underconstrained variant, loaded once per mode.
pub fn toy_underconstrained(mode: Mode) -> &'static Grammar {
  static CELLS: [OnceLock<Grammar>; 2] = [OnceLock::new(), OnceLock::new()];
  cached(&CELLS, TOY_UNDERCONSTRAINED, mode)
}

/// The toy grammar's type hierarchy.
pub fn toy_grammar_hierarchy() -> &'static TypeHierarchy {
  &toy(Mode::Learner).hierarchy
}
