use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index of a type inside its [`TypeHierarchy`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(u32);

impl TypeId {
  pub fn index(self) -> usize {
    self.0 as usize
  }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
  #[error("type `{0}` is defined more than once")]
  Duplicate(String),
  #[error("type `{child}` names unknown supertype `{parent}`")]
  UnknownParent { child: String, parent: String },
  #[error("supertype cycle through `{0}`")]
  Cycle(String),
  #[error("types `{a}` and `{b}` have no unique greatest lower bound (candidates: {})", candidates.join(", "))]
  AmbiguousGlb {
    a: String,
    b: String,
    candidates: Vec<String>,
  },
  #[error("unknown type `{0}`")]
  UnknownType(String),
}

/// Fixed-width bit set over type indices.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
  fn new(n: usize) -> Self {
    Bits(vec![0; n.div_ceil(64)])
  }

  fn set(&mut self, i: usize) {
    self.0[i / 64] |= 1 << (i % 64);
  }

  fn get(&self, i: usize) -> bool {
    self.0[i / 64] & (1 << (i % 64)) != 0
  }

  fn and(&self, other: &Bits) -> Bits {
    Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
  }

  fn ones(&self) -> impl Iterator<Item = usize> + '_ {
    self.0.iter().enumerate().flat_map(|(w, &bits)| {
      (0..64).filter(move |b| bits & (1u64 << b) != 0).map(move |b| w * 64 + b)
    })
  }
}

/// Collects type declarations in any order; [`HierarchyBuilder::build`] validates them.
#[derive(Debug, Clone)]
pub struct HierarchyBuilder {
  top: String,
  decls: Vec<(String, Vec<String>)>,
}

impl HierarchyBuilder {
  pub fn new(top: &str) -> Self {
    Self {
      top: top.to_string(),
      decls: Vec::new(),
    }
  }

  pub fn add<S: AsRef<str>>(&mut self, name: &str, parents: &[S]) -> &mut Self {
    self.decls.push((
      name.to_string(),
      parents.iter().map(|p| p.as_ref().to_string()).collect(),
    ));
    self
  }

  pub fn build(&self) -> Result<TypeHierarchy, HierarchyError> {
    let mut names = vec![self.top.clone()];
    let mut index = HashMap::new();
    index.insert(self.top.clone(), TypeId(0));
    for (name, _) in &self.decls {
      if index.contains_key(name) {
        return Err(HierarchyError::Duplicate(name.clone()));
      }
      index.insert(name.clone(), TypeId(names.len() as u32));
      names.push(name.clone());
    }

    let mut parents = vec![Vec::new(); names.len()];
    for (name, ps) in &self.decls {
      let child = index[name];
      let ps = if ps.is_empty() {
        vec![self.top.clone()]
      } else {
        ps.clone()
      };
      for p in ps {
        let pid = *index.get(&p).ok_or_else(|| HierarchyError::UnknownParent {
          child: name.clone(),
          parent: p.clone(),
        })?;
        if !parents[child.index()].contains(&pid) {
          parents[child.index()].push(pid);
        }
      }
    }

    TypeHierarchy::from_parts(names, index, parents)
  }
}

/// A finite bounded-complete partial order of types rooted at a single top type.
#[derive(Clone)]
pub struct TypeHierarchy {
  names: Vec<String>,
  index: HashMap<String, TypeId>,
  parents: Vec<Vec<TypeId>>,
  /// ancestors[t] includes t itself
  ancestors: Vec<Bits>,
  /// row-major table, `None` when the pair has no common subtype
  glb: Vec<Option<TypeId>>,
}

impl fmt::Debug for TypeHierarchy {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.debug_struct("TypeHierarchy")
      .field("types", &self.names.len())
      .field("top", &self.names[0])
      .finish()
  }
}

impl TypeHierarchy {
  fn from_parts(
    names: Vec<String>,
    index: HashMap<String, TypeId>,
    parents: Vec<Vec<TypeId>>,
  ) -> Result<Self, HierarchyError> {
    let n = names.len();

    // topological order, parents before children
    let mut state = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    fn visit(
      t: usize,
      parents: &[Vec<TypeId>],
      state: &mut [u8],
      order: &mut Vec<usize>,
      names: &[String],
    ) -> Result<(), HierarchyError> {
      match state[t] {
        2 => return Ok(()),
        1 => return Err(HierarchyError::Cycle(names[t].clone())),
        _ => {}
      }
      state[t] = 1;
      for p in &parents[t] {
        visit(p.index(), parents, state, order, names)?;
      }
      state[t] = 2;
      order.push(t);
      Ok(())
    }
    for t in 0..n {
      visit(t, &parents, &mut state, &mut order, &names)?;
    }

    let mut ancestors = vec![Bits::new(n); n];
    for &t in &order {
      let mut bits = Bits::new(n);
      bits.set(t);
      for p in &parents[t] {
        for (w, word) in ancestors[p.index()].0.iter().enumerate() {
          bits.0[w] |= word;
        }
      }
      ancestors[t] = bits;
    }

    let mut descendants = vec![Bits::new(n); n];
    for (t, anc) in ancestors.iter().enumerate() {
      for a in anc.ones() {
        descendants[a].set(t);
      }
    }

    let mut glb = vec![None; n * n];
    for a in 0..n {
      for b in a..n {
        let common = descendants[a].and(&descendants[b]);
        let maxima: Vec<usize> = common
          .ones()
          .filter(|&c| ancestors[c].and(&common).ones().all(|d| d == c))
          .collect();
        let value = match maxima.as_slice() {
          [] => None,
          [m] => Some(TypeId(*m as u32)),
          _ => {
            return Err(HierarchyError::AmbiguousGlb {
              a: names[a].clone(),
              b: names[b].clone(),
              candidates: maxima.iter().map(|&m| names[m].clone()).collect(),
            })
          }
        };
        glb[a * n + b] = value;
        glb[b * n + a] = value;
      }
    }

    Ok(Self {
      names,
      index,
      parents,
      ancestors,
      glb,
    })
  }

  pub fn top(&self) -> TypeId {
    TypeId(0)
  }

  pub fn len(&self) -> usize {
    self.names.len()
  }

  pub fn is_empty(&self) -> bool {
    false
  }

  pub fn lookup(&self, name: &str) -> Option<TypeId> {
    self.index.get(name).copied()
  }

  pub fn require(&self, name: &str) -> Result<TypeId, HierarchyError> {
    self
      .lookup(name)
      .ok_or_else(|| HierarchyError::UnknownType(name.to_string()))
  }

  pub fn name(&self, t: TypeId) -> &str {
    &self.names[t.index()]
  }

  pub fn parents(&self, t: TypeId) -> &[TypeId] {
    &self.parents[t.index()]
  }

  pub fn types(&self) -> impl Iterator<Item = TypeId> + '_ {
    (0..self.names.len() as u32).map(TypeId)
  }

  /// True when `general` is `specific` or one of its ancestors.
  pub fn subsumes(&self, general: TypeId, specific: TypeId) -> bool {
    self.ancestors[specific.index()].get(general.index())
  }

  pub fn glb(&self, a: TypeId, b: TypeId) -> Option<TypeId> {
    self.glb[a.index() * self.names.len() + b.index()]
  }

  /// [`glb`](Self::glb) over type names; unknown names are an error.
  pub fn glb_by_name(&self, a: &str, b: &str) -> Result<Option<&str>, HierarchyError> {
    let a = self.require(a)?;
    let b = self.require(b)?;
    Ok(self.glb(a, b).map(|t| self.name(t)))
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  fn toy() -> TypeHierarchy {
    let mut b = HierarchyBuilder::new("*top*");
    b.add("gender", &["*top*"])
      .add("masc", &["gender"])
      .add("fem", &["gender"])
      .add("pernum", &["*top*"])
      .add("sg", &["pernum"])
      .add("pl", &["pernum"])
      .add("3per", &["pernum"])
      .add("3sg", &["3per", "sg"])
      .add("3pl", &["3per", "pl"]);
    b.build().unwrap()
  }

  #[test]
  fn glb_basics() {
    let h = toy();
    assert_eq!(h.glb_by_name("fem", "fem").unwrap(), Some("fem"));
    assert_eq!(h.glb_by_name("fem", "masc").unwrap(), None);
    assert_eq!(h.glb_by_name("gender", "fem").unwrap(), Some("fem"));
    assert_eq!(h.glb_by_name("*top*", "masc").unwrap(), Some("masc"));
    assert_eq!(h.glb_by_name("pl", "3per").unwrap(), Some("3pl"));
    assert_eq!(h.glb_by_name("sg", "pl").unwrap(), None);
  }

  #[test]
  fn unknown_type_is_an_error() {
    let h = toy();
    assert_eq!(
      h.glb_by_name("fem", "neuter"),
      Err(HierarchyError::UnknownType("neuter".into()))
    );
  }

  #[test]
  fn ambiguous_glb_names_both_candidates() {
    let mut b = HierarchyBuilder::new("*top*");
    b.add("a", &["*top*"])
      .add("b", &["*top*"])
      .add("c", &["a", "b"])
      .add("d", &["a", "b"]);
    match b.build() {
      Err(HierarchyError::AmbiguousGlb { candidates, .. }) => {
        assert_eq!(candidates, vec!["c".to_string(), "d".to_string()]);
      }
      other => panic!("expected ambiguity, got {other:?}"),
    }
  }

  #[test]
  fn cycles_and_unknown_parents_rejected() {
    let mut b = HierarchyBuilder::new("*top*");
    b.add("a", &["b"]).add("b", &["a"]);
    assert!(matches!(b.build(), Err(HierarchyError::Cycle(_))));

    let mut b = HierarchyBuilder::new("*top*");
    b.add("a", &["nope"]);
    assert!(matches!(b.build(), Err(HierarchyError::UnknownParent { .. })));

    let mut b = HierarchyBuilder::new("*top*");
    b.add("a", &["*top*"]).add("a", &["*top*"]);
    assert!(matches!(b.build(), Err(HierarchyError::Duplicate(_))));
  }

  #[test]
  fn subsumption_follows_multiple_parents() {
    let h = toy();
    let t = |n| h.lookup(n).unwrap();
    assert!(h.subsumes(t("pl"), t("3pl")));
    assert!(h.subsumes(t("3per"), t("3pl")));
    assert!(h.subsumes(t("*top*"), t("3pl")));
    assert!(!h.subsumes(t("3pl"), t("pl")));
  }
}
