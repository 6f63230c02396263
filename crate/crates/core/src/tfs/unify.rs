use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::fs::{Feat, FeatureStructure, FsPath, Node, NodeId};
use super::hierarchy::{TypeHierarchy, TypeId};

/// Why a unification failed. Paths are relative to the point of unification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnifyFailure {
  Clash {
    path: FsPath,
    left: String,
    right: String,
  },
  Cycle {
    path: FsPath,
  },
}

impl UnifyFailure {
  pub fn path(&self) -> &FsPath {
    match self {
      UnifyFailure::Clash { path, .. } | UnifyFailure::Cycle { path } => path,
    }
  }
}

impl fmt::Display for UnifyFailure {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match self {
      UnifyFailure::Clash { path, left, right } => {
        write!(f, "clash at {path}: {left} vs {right}")
      }
      UnifyFailure::Cycle { path } => write!(f, "cyclic structure at {path}"),
    }
  }
}

impl std::error::Error for UnifyFailure {}

/// Mutable union-find workspace. Inputs are copied in, so callers' structures
/// are never touched; [`Scratch::export`] materializes the result.
pub(crate) struct Scratch<'h> {
  h: &'h TypeHierarchy,
  string: Option<TypeId>,
  ty: Vec<TypeId>,
  text: Vec<Option<Arc<str>>>,
  arcs: Vec<Vec<(Feat, usize)>>,
  fwd: Vec<usize>,
}

impl<'h> Scratch<'h> {
  pub(crate) fn new(h: &'h TypeHierarchy) -> Self {
    Scratch {
      h,
      string: h.lookup("string"),
      ty: Vec::new(),
      text: Vec::new(),
      arcs: Vec::new(),
      fwd: Vec::new(),
    }
  }

  pub(crate) fn new_node(&mut self, ty: TypeId) -> usize {
    let id = self.ty.len();
    self.ty.push(ty);
    self.text.push(None);
    self.arcs.push(Vec::new());
    self.fwd.push(id);
    id
  }

  pub(crate) fn import(&mut self, fs: &FeatureStructure) -> usize {
    let offset = self.ty.len();
    for (i, node) in fs.nodes.iter().enumerate() {
      self.ty.push(node.ty);
      self.text.push(node.text.clone());
      self
        .arcs
        .push(node.arcs.iter().map(|(f, c)| (f.clone(), c.index() + offset)).collect());
      self.fwd.push(offset + i);
    }
    fs.root.index() + offset
  }

  pub(crate) fn find(&mut self, mut n: usize) -> usize {
    while self.fwd[n] != n {
      let next = self.fwd[n];
      self.fwd[n] = self.fwd[next];
      n = next;
    }
    n
  }

  fn arc(&mut self, n: usize, feat: &str) -> Option<usize> {
    let n = self.find(n);
    self.arcs[n]
      .iter()
      .find(|(f, _)| f.as_str() == feat)
      .map(|(_, c)| *c)
  }

  pub(crate) fn follow(&mut self, mut n: usize, path: &FsPath) -> Option<usize> {
    for f in &path.0 {
      n = self.arc(n, f.as_str())?;
    }
    Some(self.find(n))
  }

  pub(crate) fn follow_or_create(&mut self, mut n: usize, path: &FsPath) -> usize {
    for f in &path.0 {
      n = match self.arc(n, f.as_str()) {
        Some(c) => c,
        None => {
          let top = self.h.top();
          let c = self.new_node(top);
          let rep = self.find(n);
          self.insert_arc(rep, f.clone(), c);
          c
        }
      };
    }
    self.find(n)
  }

  fn insert_arc(&mut self, rep: usize, f: Feat, c: usize) {
    let arcs = &mut self.arcs[rep];
    match arcs.binary_search_by(|(g, _)| g.cmp(&f)) {
      Ok(i) => arcs[i].1 = c,
      Err(i) => arcs.insert(i, (f, c)),
    }
  }

  fn value_name(&self, n: usize) -> String {
    match &self.text[n] {
      Some(t) => format!("{t:?}"),
      None => self.h.name(self.ty[n]).to_string(),
    }
  }

  pub(crate) fn set_text(&mut self, n: usize, text: &str) {
    let n = self.find(n);
    self.text[n] = Some(Arc::from(text));
  }

  /// Arcs of the representative of `n`.
  pub(crate) fn children(&mut self, n: usize) -> Vec<(Feat, usize)> {
    let n = self.find(n);
    self.arcs[n].clone()
  }

  pub(crate) fn node_count(&self) -> usize {
    self.ty.len()
  }

  pub(crate) fn type_of(&mut self, n: usize) -> TypeId {
    let n = self.find(n);
    self.ty[n]
  }

  /// Unifies nodes `a` and `b`; `base` prefixes reported failure paths.
  pub(crate) fn unify(&mut self, a: usize, b: usize, base: &FsPath) -> Result<(), UnifyFailure> {
    let mut stack: Vec<(usize, usize, FsPath)> = vec![(a, b, base.clone())];
    while let Some((a, b, path)) = stack.pop() {
      let ra = self.find(a);
      let rb = self.find(b);
      if ra == rb {
        continue;
      }
      let clash = |s: &Self| UnifyFailure::Clash {
        path: path.clone(),
        left: s.value_name(ra),
        right: s.value_name(rb),
      };
      let Some(ty) = self.h.glb(self.ty[ra], self.ty[rb]) else {
        return Err(clash(self));
      };
      let text = match (&self.text[ra], &self.text[rb]) {
        (Some(x), Some(y)) if x != y => return Err(clash(self)),
        (Some(x), _) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
      };
      if text.is_some() {
        match self.string {
          Some(s) if self.h.subsumes(s, ty) => {}
          _ => return Err(clash(self)),
        }
      }
      self.ty[ra] = ty;
      self.text[ra] = text;
      self.fwd[rb] = ra;
      let moved = std::mem::take(&mut self.arcs[rb]);
      let mut pending = Vec::new();
      for (f, c) in moved {
        match self.arcs[ra].binary_search_by(|(g, _)| g.cmp(&f)) {
          Ok(i) => pending.push((self.arcs[ra][i].1, c, path.child(&f))),
          Err(i) => self.arcs[ra].insert(i, (f, c)),
        }
      }
      // reversed so the lexicographically first feature is examined first
      stack.extend(pending.into_iter().rev());
    }
    Ok(())
  }

  /// Materializes the structure reachable from `root`, rejecting cycles.
  pub(crate) fn export(&mut self, root: usize) -> Result<FeatureStructure, UnifyFailure> {
    let mut map: HashMap<usize, NodeId> = HashMap::new();
    let mut on_path: Vec<bool> = vec![false; self.ty.len()];
    let mut nodes: Vec<Node> = Vec::new();
    let root = self.find(root);
    let mut path = Vec::new();
    let r = self.export_node(root, &mut map, &mut on_path, &mut nodes, &mut path)?;
    Ok(FeatureStructure { nodes, root: r })
  }

  fn export_node(
    &mut self,
    n: usize,
    map: &mut HashMap<usize, NodeId>,
    on_path: &mut Vec<bool>,
    nodes: &mut Vec<Node>,
    path: &mut Vec<Feat>,
  ) -> Result<NodeId, UnifyFailure> {
    if on_path[n] {
      return Err(UnifyFailure::Cycle {
        path: FsPath(path.clone()),
      });
    }
    if let Some(&id) = map.get(&n) {
      return Ok(id);
    }
    let id = NodeId(nodes.len() as u32);
    map.insert(n, id);
    nodes.push(Node {
      ty: self.ty[n],
      text: self.text[n].clone(),
      arcs: Vec::new(),
    });
    on_path[n] = true;
    let children: Vec<(Feat, usize)> = self.arcs[n].clone();
    let mut out = Vec::with_capacity(children.len());
    for (f, c) in children {
      let c = self.find(c);
      path.push(f.clone());
      let cid = self.export_node(c, map, on_path, nodes, path)?;
      path.pop();
      out.push((f, cid));
    }
    on_path[n] = false;
    nodes[id.index()].arcs = out;
    Ok(id)
  }
}

/// Most general structure subsumed by both `a` and `b`.
pub fn unify(
  a: &FeatureStructure,
  b: &FeatureStructure,
  h: &TypeHierarchy,
) -> Result<FeatureStructure, UnifyFailure> {
  let mut s = Scratch::new(h);
  let ra = s.import(a);
  let rb = s.import(b);
  s.unify(ra, rb, &FsPath::root())?;
  s.export(ra)
}

/// Unifies `guest` into `host` at `path` (created if absent); the result is
/// rooted at host's root. Failure paths are relative to `path`.
pub fn unify_at(
  host: &FeatureStructure,
  path: &FsPath,
  guest: &FeatureStructure,
  h: &TypeHierarchy,
) -> Result<FeatureStructure, UnifyFailure> {
  let mut s = Scratch::new(h);
  let rh = s.import(host);
  let target = s.follow_or_create(rh, path);
  let rg = s.import(guest);
  s.unify(target, rg, &FsPath::root())?;
  s.export(rh)
}

/// True iff every path, type, string value and reentrancy of `general` is
/// preserved (possibly more specific) in `specific`.
pub fn subsumes(general: &FeatureStructure, specific: &FeatureStructure, h: &TypeHierarchy) -> bool {
  let mut map: HashMap<NodeId, NodeId> = HashMap::new();
  let mut stack = vec![(general.root(), specific.root())];
  while let Some((g, s)) = stack.pop() {
    if let Some(&prev) = map.get(&g) {
      if prev != s {
        return false;
      }
      continue;
    }
    map.insert(g, s);
    if !h.subsumes(general.node_type(g), specific.node_type(s)) {
      return false;
    }
    if let Some(t) = general.text(g) {
      if specific.text(s) != Some(t) {
        return false;
      }
    }
    for (f, gc) in general.arcs(g) {
      match specific.get(s, f.as_str()) {
        Some(sc) => stack.push((*gc, sc)),
        None => return false,
      }
    }
  }
  true
}
