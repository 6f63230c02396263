use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::hierarchy::{TypeHierarchy, TypeId};

/// Feature (attribute) name, e.g. `PNG` or `FIRST`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Feat(Arc<str>);

impl Feat {
  pub fn new(name: &str) -> Self {
    Feat(Arc::from(name))
  }

  pub fn as_str(&self) -> &str {
    &self.0
  }
}

impl From<&str> for Feat {
  fn from(s: &str) -> Self {
    Feat::new(s)
  }
}

impl fmt::Debug for Feat {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(&self.0)
  }
}

impl fmt::Display for Feat {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(&self.0)
  }
}

/// A sequence of features; displayed as `A.B.C`, or `<>` for the empty path.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FsPath(pub Vec<Feat>);

impl FsPath {
  pub fn root() -> Self {
    FsPath(Vec::new())
  }

  pub fn parse(dotted: &str) -> Self {
    if dotted.is_empty() || dotted == "<>" {
      return FsPath::root();
    }
    FsPath(dotted.split('.').map(Feat::new).collect())
  }

  pub fn child(&self, f: &Feat) -> Self {
    let mut v = self.0.clone();
    v.push(f.clone());
    FsPath(v)
  }

  pub fn join(&self, other: &FsPath) -> Self {
    let mut v = self.0.clone();
    v.extend(other.0.iter().cloned());
    FsPath(v)
  }

  pub fn ends_with(&self, suffix: &str) -> bool {
    let suffix = FsPath::parse(suffix);
    self.0.ends_with(&suffix.0)
  }

  pub fn is_empty(&self) -> bool {
    self.0.is_empty()
  }
}

impl fmt::Display for FsPath {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if self.0.is_empty() {
      return f.write_str("<>");
    }
    for (i, feat) in self.0.iter().enumerate() {
      if i > 0 {
        f.write_str(".")?;
      }
      f.write_str(feat.as_str())?;
    }
    Ok(())
  }
}

impl fmt::Debug for FsPath {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    fmt::Display::fmt(self, f)
  }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
  pub fn index(self) -> usize {
    self.0 as usize
  }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Node {
  pub(crate) ty: TypeId,
  pub(crate) text: Option<Arc<str>>,
  /// sorted by feature, unique
  pub(crate) arcs: Vec<(Feat, NodeId)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ListError {
  #[error("list at {0} is not terminated by null")]
  NotNullTerminated(String),
  #[error("hierarchy lacks list types (cons/null)")]
  MissingListTypes,
}

/// Rooted, typed, feature-labeled DAG. Node identifiers are arbitrary; compare
/// structures with [`FeatureStructure::canonical`] or [`FeatureStructure::isomorphic`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureStructure {
  pub(crate) nodes: Vec<Node>,
  pub(crate) root: NodeId,
}

pub const FIRST: &str = "FIRST";
pub const REST: &str = "REST";

impl FeatureStructure {
  /// A single node of the given type.
  pub fn atom(ty: TypeId) -> Self {
    FeatureStructure {
      nodes: vec![Node {
        ty,
        text: None,
        arcs: Vec::new(),
      }],
      root: NodeId(0),
    }
  }

  pub fn top(h: &TypeHierarchy) -> Self {
    Self::atom(h.top())
  }

  pub fn root(&self) -> NodeId {
    self.root
  }

  pub fn node_count(&self) -> usize {
    self.nodes.len()
  }

  pub fn node_type(&self, n: NodeId) -> TypeId {
    self.nodes[n.index()].ty
  }

  pub fn text(&self, n: NodeId) -> Option<&str> {
    self.nodes[n.index()].text.as_deref()
  }

  pub fn arcs(&self, n: NodeId) -> &[(Feat, NodeId)] {
    &self.nodes[n.index()].arcs
  }

  pub fn get(&self, n: NodeId, feat: &str) -> Option<NodeId> {
    let arcs = &self.nodes[n.index()].arcs;
    arcs
      .binary_search_by(|(f, _)| f.as_str().cmp(feat))
      .ok()
      .map(|i| arcs[i].1)
  }

  pub fn follow_from(&self, mut n: NodeId, path: &FsPath) -> Option<NodeId> {
    for f in &path.0 {
      n = self.get(n, f.as_str())?;
    }
    Some(n)
  }

  pub fn follow(&self, path: &str) -> Option<NodeId> {
    self.follow_from(self.root, &FsPath::parse(path))
  }

  /// Type name at `path`, or the quoted string for string values.
  pub fn value_at(&self, path: &str, h: &TypeHierarchy) -> Option<String> {
    self.follow(path).map(|n| self.value_name(n, h))
  }

  pub(crate) fn value_name(&self, n: NodeId, h: &TypeHierarchy) -> String {
    match self.text(n) {
      Some(t) => format!("{t:?}"),
      None => h.name(self.node_type(n)).to_string(),
    }
  }

  pub fn add_node(&mut self, ty: TypeId, text: Option<&str>) -> NodeId {
    self.nodes.push(Node {
      ty,
      text: text.map(Arc::from),
      arcs: Vec::new(),
    });
    NodeId(self.nodes.len() as u32 - 1)
  }

  /// Adds or replaces the arc `feat` of node `n`.
  pub fn set_arc(&mut self, n: NodeId, feat: &Feat, target: NodeId) {
    let arcs = &mut self.nodes[n.index()].arcs;
    match arcs.binary_search_by(|(f, _)| f.cmp(feat)) {
      Ok(i) => arcs[i].1 = target,
      Err(i) => arcs.insert(i, (feat.clone(), target)),
    }
  }

  pub fn remove_arc(&mut self, n: NodeId, feat: &str) -> Option<NodeId> {
    let arcs = &mut self.nodes[n.index()].arcs;
    match arcs.binary_search_by(|(f, _)| f.as_str().cmp(feat)) {
      Ok(i) => Some(arcs.remove(i).1),
      Err(_) => None,
    }
  }

  /// Copy of the structure reachable from `n`, renumbered in depth-first order.
  pub fn substructure(&self, n: NodeId) -> FeatureStructure {
    let mut map: HashMap<NodeId, NodeId> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    fn copy(
      src: &FeatureStructure,
      n: NodeId,
      map: &mut HashMap<NodeId, NodeId>,
      nodes: &mut Vec<Node>,
    ) -> NodeId {
      if let Some(&m) = map.get(&n) {
        return m;
      }
      let id = NodeId(nodes.len() as u32);
      map.insert(n, id);
      let node = &src.nodes[n.index()];
      nodes.push(Node {
        ty: node.ty,
        text: node.text.clone(),
        arcs: Vec::new(),
      });
      let arcs: Vec<(Feat, NodeId)> = node
        .arcs
        .iter()
        .map(|(f, c)| (f.clone(), copy(src, *c, map, nodes)))
        .collect();
      nodes[id.index()].arcs = arcs;
      id
    }
    let root = copy(self, n, &mut map, &mut nodes);
    FeatureStructure { nodes, root }
  }

  /// Drops nodes no longer reachable from the root.
  pub fn compact(&mut self) {
    *self = self.substructure(self.root);
  }

  /// The root with arc `feat` removed, compacted.
  pub fn without(&self, feat: &str) -> FeatureStructure {
    let mut out = self.clone();
    out.remove_arc(out.root, feat);
    out.compact();
    out
  }

  /// Elements of the FIRST/REST list starting at `n`.
  pub fn list_items(&self, n: NodeId, h: &TypeHierarchy) -> Result<Vec<NodeId>, ListError> {
    let null = h.lookup("null").ok_or(ListError::MissingListTypes)?;
    let mut items = Vec::new();
    let mut cur = n;
    let mut path = FsPath::root();
    loop {
      if self.node_type(cur) == null {
        return Ok(items);
      }
      match (self.get(cur, FIRST), self.get(cur, REST)) {
        (Some(first), Some(rest)) => {
          items.push(first);
          cur = rest;
          path = path.child(&Feat::new(REST));
        }
        _ => return Err(ListError::NotNullTerminated(path.to_string())),
      }
      if items.len() > self.nodes.len() {
        return Err(ListError::NotNullTerminated(path.to_string()));
      }
    }
  }

  /// Builds, inside this structure, a list with the elements of `xs` followed by
  /// the list `ys`. Element nodes and the `ys` tail are shared, not copied.
  pub fn append_lists(
    &mut self,
    xs: NodeId,
    ys: NodeId,
    h: &TypeHierarchy,
  ) -> Result<NodeId, ListError> {
    let cons = h.lookup("cons").ok_or(ListError::MissingListTypes)?;
    let items = self.list_items(xs, h)?;
    let first = Feat::new(FIRST);
    let rest = Feat::new(REST);
    let mut tail = ys;
    for item in items.into_iter().rev() {
      let cell = self.add_node(cons, None);
      self.set_arc(cell, &first, item);
      self.set_arc(cell, &rest, tail);
      tail = cell;
    }
    Ok(tail)
  }

  /// Builds a structure from an ordered list of elements (`<a, b, ...>`).
  pub fn list_of(items: &[FeatureStructure], h: &TypeHierarchy) -> Result<Self, ListError> {
    let cons = h.lookup("cons").ok_or(ListError::MissingListTypes)?;
    let null = h.lookup("null").ok_or(ListError::MissingListTypes)?;
    let mut fs = FeatureStructure::atom(null);
    let mut tail = fs.root;
    for item in items.iter().rev() {
      let elem = fs.graft(item);
      let cell = fs.add_node(cons, None);
      fs.set_arc(cell, &Feat::new(FIRST), elem);
      fs.set_arc(cell, &Feat::new(REST), tail);
      tail = cell;
    }
    fs.root = tail;
    fs.compact();
    Ok(fs)
  }

  /// Copies `other` into this arena (disconnected) and returns its root.
  pub fn graft(&mut self, other: &FeatureStructure) -> NodeId {
    let offset = self.nodes.len() as u32;
    for node in &other.nodes {
      self.nodes.push(Node {
        ty: node.ty,
        text: node.text.clone(),
        arcs: node
          .arcs
          .iter()
          .map(|(f, c)| (f.clone(), NodeId(c.0 + offset)))
          .collect(),
      });
    }
    NodeId(other.root.0 + offset)
  }

  fn reachable_indegree(&self) -> BTreeMap<NodeId, usize> {
    let mut indeg = BTreeMap::new();
    let mut seen = vec![false; self.nodes.len()];
    let mut stack = vec![self.root];
    indeg.insert(self.root, 0);
    seen[self.root.index()] = true;
    while let Some(n) = stack.pop() {
      for (_, c) in &self.nodes[n.index()].arcs {
        *indeg.entry(*c).or_insert(0) += 1;
        if !seen[c.index()] {
          seen[c.index()] = true;
          stack.push(*c);
        }
      }
    }
    indeg
  }

  /// Canonical text form: one line per path in lexicographic path order.
  /// A shared node is tagged `#n` (first-visit numbering) on its first path and
  /// printed as the bare tag on later paths.
  pub fn canonical(&self, h: &TypeHierarchy) -> String {
    let indeg = self.reachable_indegree();
    let mut tags: HashMap<NodeId, usize> = HashMap::new();
    let mut out = String::new();
    let mut path: Vec<&str> = Vec::new();
    self.canonical_walk(self.root, h, &indeg, &mut tags, &mut path, &mut out);
    out
  }

  fn canonical_walk<'a>(
    &'a self,
    n: NodeId,
    h: &TypeHierarchy,
    indeg: &BTreeMap<NodeId, usize>,
    tags: &mut HashMap<NodeId, usize>,
    path: &mut Vec<&'a str>,
    out: &mut String,
  ) {
    let label = if path.is_empty() {
      "<>".to_string()
    } else {
      path.join(".")
    };
    if let Some(tag) = tags.get(&n) {
      out.push_str(&format!("{label} = #{tag}\n"));
      return;
    }
    let value = self.value_name(n, h);
    if indeg.get(&n).copied().unwrap_or(0) > 1 {
      let tag = tags.len();
      tags.insert(n, tag);
      out.push_str(&format!("{label} = #{tag} {value}\n"));
    } else {
      out.push_str(&format!("{label} = {value}\n"));
    }
    for (f, c) in &self.nodes[n.index()].arcs {
      path.push(f.as_str());
      self.canonical_walk(*c, h, indeg, tags, path, out);
      path.pop();
    }
  }

  pub fn isomorphic(&self, other: &FeatureStructure, h: &TypeHierarchy) -> bool {
    self.canonical(h) == other.canonical(h)
  }

  /// Every path from the root together with the node it reaches.
  pub fn paths(&self) -> Vec<(FsPath, NodeId)> {
    let mut out = Vec::new();
    let mut stack = vec![(FsPath::root(), self.root)];
    while let Some((p, n)) = stack.pop() {
      for (f, c) in self.nodes[n.index()].arcs.iter().rev() {
        stack.push((p.child(f), *c));
      }
      out.push((p, n));
    }
    out.sort();
    out
  }

  /// Checks the structural invariants: rooted, connected, acyclic, one arc per
  /// feature, and list cells carrying only FIRST/REST.
  pub fn check_invariants(&self, h: &TypeHierarchy) -> Result<(), String> {
    let mut state = vec![0u8; self.nodes.len()];
    fn dfs(fs: &FeatureStructure, n: NodeId, state: &mut [u8]) -> Result<(), String> {
      match state[n.index()] {
        1 => return Err(format!("cycle through node {}", n.0)),
        2 => return Ok(()),
        _ => {}
      }
      state[n.index()] = 1;
      let arcs = &fs.nodes[n.index()].arcs;
      for w in arcs.windows(2) {
        if w[0].0 >= w[1].0 {
          return Err(format!("duplicate or unsorted feature {}", w[1].0));
        }
      }
      for (_, c) in arcs {
        dfs(fs, *c, state)?;
      }
      state[n.index()] = 2;
      Ok(())
    }
    dfs(self, self.root, &mut state)?;
    if state.contains(&0) {
      return Err("unreachable nodes present".into());
    }
    if let Some(list) = h.lookup("list") {
      for node in &self.nodes {
        if h.subsumes(list, node.ty)
          && node
            .arcs
            .iter()
            .any(|(f, _)| f.as_str() != FIRST && f.as_str() != REST)
        {
          return Err(format!("list node of type {} has foreign features", h.name(node.ty)));
        }
      }
    }
    Ok(())
  }
}
