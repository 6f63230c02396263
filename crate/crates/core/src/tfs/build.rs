use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::fs::{Feat, FeatureStructure, FsPath, FIRST, REST};
use super::hierarchy::{TypeHierarchy, TypeId};
use super::unify::{Scratch, UnifyFailure};
use crate::tdl::{self, Conj, SyntaxError, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
  #[error(transparent)]
  Syntax(#[from] SyntaxError),
  #[error("unknown type `{0}`")]
  UnknownType(String),
  #[error("inconsistent description: {0}")]
  Unify(#[from] UnifyFailure),
  #[error("hierarchy lacks `{0}`, required for this description")]
  MissingBuiltin(&'static str),
  #[error("type constraint expansion does not terminate below {0}")]
  Unbounded(FsPath),
}

/// Upper bound on scratch nodes during constraint expansion.
const EXPANSION_LIMIT: usize = 200_000;

/// Turns parsed descriptions into feature structures. Tags are scoped to one builder.
pub(crate) struct Builder<'h> {
  h: &'h TypeHierarchy,
  s: Scratch<'h>,
  tags: HashMap<String, usize>,
}

impl<'h> Builder<'h> {
  pub(crate) fn new(h: &'h TypeHierarchy) -> Self {
    Builder {
      h,
      s: Scratch::new(h),
      tags: HashMap::new(),
    }
  }

  pub(crate) fn scratch(&mut self) -> &mut Scratch<'h> {
    &mut self.s
  }

  pub(crate) fn fresh(&mut self) -> usize {
    self.s.new_node(self.h.top())
  }

  pub(crate) fn conj(&mut self, node: usize, conj: &Conj, path: &FsPath) -> Result<(), BuildError> {
    for term in &conj.0 {
      self.term(node, term, path)?;
    }
    Ok(())
  }

  pub(crate) fn term(&mut self, node: usize, term: &Term, path: &FsPath) -> Result<(), BuildError> {
    match term {
      Term::Type(name) => {
        let ty = self
          .h
          .lookup(name)
          .ok_or_else(|| BuildError::UnknownType(name.clone()))?;
        let tmp = self.s.new_node(ty);
        self.s.unify(node, tmp, path)?;
      }
      Term::Str(text) => {
        let string = self.h.lookup("string").ok_or(BuildError::MissingBuiltin("string"))?;
        let tmp = self.s.new_node(string);
        self.s.set_text(tmp, text);
        self.s.unify(node, tmp, path)?;
      }
      Term::Tag(tag) => match self.tags.get(tag) {
        Some(&other) => self.s.unify(other, node, path)?,
        None => {
          self.tags.insert(tag.clone(), node);
        }
      },
      Term::Avm(pairs) => {
        for (p, value) in pairs {
          let child = self.s.follow_or_create(node, p);
          self.conj(child, value, &path.join(p))?;
        }
      }
      Term::List(items, open) => {
        let cons = self.h.lookup("cons").ok_or(BuildError::MissingBuiltin("cons"))?;
        let tail_ty = if *open {
          self.h.lookup("list").ok_or(BuildError::MissingBuiltin("list"))?
        } else {
          self.h.lookup("null").ok_or(BuildError::MissingBuiltin("null"))?
        };
        let mut cur = node;
        let mut cur_path = path.clone();
        for item in items {
          let cell = self.s.new_node(cons);
          self.s.unify(cur, cell, &cur_path)?;
          let first = self.s.follow_or_create(cur, &FsPath(vec![Feat::new(FIRST)]));
          self.conj(first, item, &cur_path.child(&Feat::new(FIRST)))?;
          cur = self.s.follow_or_create(cur, &FsPath(vec![Feat::new(REST)]));
          cur_path = cur_path.child(&Feat::new(REST));
        }
        let end = self.s.new_node(tail_ty);
        self.s.unify(cur, end, &cur_path)?;
      }
    }
    Ok(())
  }

  /// Unifies every reachable node with the constraint of its type until
  /// nothing changes. `constraints` is indexed by type.
  pub(crate) fn expand(&mut self, root: usize, constraints: &[FeatureStructure]) -> Result<(), BuildError> {
    let mut done: HashSet<(usize, TypeId)> = HashSet::new();
    loop {
      let mut changed = false;
      let mut seen = HashSet::new();
      let mut order = Vec::new();
      let mut stack = vec![(root, FsPath::root())];
      while let Some((n, p)) = stack.pop() {
        let n = self.s.find(n);
        if !seen.insert(n) {
          continue;
        }
        for (f, c) in self.s.children(n).into_iter().rev() {
          stack.push((c, p.child(&f)));
        }
        order.push((n, p));
      }
      for (n, p) in order {
        let n = self.s.find(n);
        let ty = self.s.type_of(n);
        if !done.insert((n, ty)) {
          continue;
        }
        let c = &constraints[ty.index()];
        if c.node_count() > 1 {
          let r = self.s.import(c);
          self.s.unify(n, r, &p)?;
          changed = true;
        }
        if self.s.node_count() > EXPANSION_LIMIT {
          return Err(BuildError::Unbounded(p));
        }
      }
      if !changed {
        return Ok(());
      }
    }
  }

  pub(crate) fn finish(mut self, root: usize) -> Result<FeatureStructure, BuildError> {
    Ok(self.s.export(root)?)
  }
}

/// Builds a structure from a description in the grammar language, e.g.
/// `[ PNG #0 & [ PERNUM 3pl, GEN fem ], RELS < [ PNG #0 ] > ]`.
pub fn parse_fs(src: &str, h: &TypeHierarchy) -> Result<FeatureStructure, BuildError> {
  let conj = tdl::parse_description(src)?;
  let mut b = Builder::new(h);
  let root = b.fresh();
  b.conj(root, &conj, &FsPath::root())?;
  b.finish(root)
}
