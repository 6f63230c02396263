//! Typed feature structures: the type hierarchy, rooted DAGs over it, and the
//! unification/subsumption algebra.

mod build;
mod fs;
mod hierarchy;
mod unify;

pub use build::{parse_fs, BuildError};
pub(crate) use build::Builder;
pub use fs::{Feat, FeatureStructure, FsPath, ListError, NodeId, FIRST, REST};
pub use hierarchy::{HierarchyBuilder, HierarchyError, TypeHierarchy, TypeId};
pub(crate) use unify::Scratch;
pub use unify::{subsumes, unify, unify_at, UnifyFailure};

/// Appends list `ys` to list `xs`, both given as list structures. Element
/// nodes keep their internal sharing.
pub fn list_append(
  xs: &FeatureStructure,
  ys: &FeatureStructure,
  h: &TypeHierarchy,
) -> Result<FeatureStructure, ListError> {
  let mut out = xs.clone();
  let tail = out.graft(ys);
  let head = out.append_lists(xs.root(), tail, h)?;
  out.root = head;
  out.compact();
  Ok(out)
}
