//! MRS-lite: the bag of predications on a sign's RELS list, with variables
//! named after shared nodes, and its conversion to a dependency graph.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::tfs::{FeatureStructure, NodeId, TypeHierarchy};

/// Argument roles a predication may carry besides its intrinsic ARG0.
pub const ROLES: [&str; 4] = ["ARG1", "ARG2", "ARG3", "ARG4"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Png {
  pub pernum: String,
  pub gen: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Predication {
  pub predicate: String,
  pub intrinsic_var: String,
  pub args: BTreeMap<String, String>,
  pub png: Option<Png>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MrsLite {
  pub rels: Vec<Predication>,
  /// the clause's event variable
  pub index: String,
  /// argument variables that are no predication's intrinsic variable
  pub unbound: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
  #[error("malformed RELS list at {0}")]
  MalformedRels(String),
  #[error("predication at {0} lacks a PRED string")]
  MissingPredicate(String),
  #[error("predication at {0} lacks an intrinsic ARG0")]
  MissingIntrinsic(String),
}

struct Vars<'a> {
  fs: &'a FeatureStructure,
  h: &'a TypeHierarchy,
  names: HashMap<NodeId, String>,
}

impl Vars<'_> {
  fn name(&mut self, n: NodeId) -> String {
    if let Some(v) = self.names.get(&n) {
      return v.clone();
    }
    let ty = self.fs.node_type(n);
    let is = |t: &str| self.h.lookup(t).is_some_and(|t| self.h.subsumes(t, ty));
    let prefix = if is("ref-ind") {
      'x'
    } else if is("event") {
      'e'
    } else {
      'i'
    };
    let v = format!("{prefix}{}", self.names.len() + 1);
    self.names.insert(n, v.clone());
    v
  }
}

/// Reads the predications from the RELS list of `fs`. Variables are numbered
/// in first-visit order; two roles share a variable iff they share a node.
pub fn extract_mrs(fs: &FeatureStructure, h: &TypeHierarchy) -> Result<MrsLite, SemanticsError> {
  let rels_node = fs
    .follow("RELS")
    .ok_or_else(|| SemanticsError::MalformedRels("RELS".into()))?;
  let items = fs
    .list_items(rels_node, h)
    .map_err(|e| SemanticsError::MalformedRels(format!("RELS ({e})")))?;
  let mut vars = Vars {
    fs,
    h,
    names: HashMap::new(),
  };
  let mut rels = Vec::with_capacity(items.len());
  for (i, item) in items.into_iter().enumerate() {
    let at = format!("RELS item {i}");
    let predicate = fs
      .get(item, "PRED")
      .and_then(|n| fs.text(n))
      .ok_or_else(|| SemanticsError::MissingPredicate(at.clone()))?
      .to_string();
    let arg0 = fs
      .get(item, "ARG0")
      .ok_or_else(|| SemanticsError::MissingIntrinsic(at.clone()))?;
    let intrinsic_var = vars.name(arg0);
    let mut args = BTreeMap::new();
    for role in ROLES {
      if let Some(n) = fs.get(item, role) {
        args.insert(role.to_string(), vars.name(n));
      }
    }
    let png = fs.get(item, "PNG").map(|p| Png {
      pernum: fs.get(p, "PERNUM").map(|n| h.name(fs.node_type(n)).to_string()).unwrap_or_default(),
      gen: fs.get(p, "GEN").map(|n| h.name(fs.node_type(n)).to_string()).unwrap_or_default(),
    });
    rels.push(Predication {
      predicate,
      intrinsic_var,
      args,
      png,
    });
  }
  let index = match fs.follow("INDEX") {
    Some(n) => vars.name(n),
    None => String::new(),
  };
  let intrinsic: HashSet<&str> = rels.iter().map(|r| r.intrinsic_var.as_str()).collect();
  let mut unbound: Vec<String> = rels
    .iter()
    .flat_map(|r| r.args.values())
    .filter(|v| !intrinsic.contains(v.as_str()))
    .cloned()
    .collect();
  unbound.sort();
  unbound.dedup();
  Ok(MrsLite { rels, index, unbound })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DependencyArc {
  pub head: usize,
  pub role: String,
  pub dependent: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
  /// predicate labels, in RELS order
  pub nodes: Vec<String>,
  pub arcs: Vec<DependencyArc>,
  /// node introducing the clause's index, if any
  pub index: Option<usize>,
}

/// One node per predication and one arc per role whose variable is another
/// predication's intrinsic variable.
pub fn to_dependencies(m: &MrsLite) -> DependencyGraph {
  let owner: HashMap<&str, usize> = m
    .rels
    .iter()
    .enumerate()
    .rev()
    .map(|(i, r)| (r.intrinsic_var.as_str(), i))
    .collect();
  let mut arcs = Vec::new();
  for (i, r) in m.rels.iter().enumerate() {
    for (role, var) in &r.args {
      if let Some(&j) = owner.get(var.as_str()) {
        arcs.push(DependencyArc {
          head: i,
          role: role.clone(),
          dependent: j,
        });
      }
    }
  }
  DependencyGraph {
    nodes: m.rels.iter().map(|r| r.predicate.clone()).collect(),
    arcs,
    index: owner.get(m.index.as_str()).copied(),
  }
}

impl DependencyGraph {
  /// Arcs as `(head, role, dependent)` predicate triples.
  pub fn labeled_arcs(&self) -> Vec<(String, String, String)> {
    self
      .arcs
      .iter()
      .map(|a| (self.nodes[a.head].clone(), a.role.clone(), self.nodes[a.dependent].clone()))
      .collect()
  }
}

impl fmt::Display for DependencyGraph {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match self.index {
      Some(i) => writeln!(f, "# index: {}", self.nodes[i])?,
      None => writeln!(f, "# index:")?,
    }
    for (h, role, d) in self.labeled_arcs() {
      writeln!(f, "{h} -{role}-> {d}")?;
    }
    Ok(())
  }
}
