use std::collections::HashMap;
use std::fmt::Write;

use super::{Grammar, Severity};
use crate::tfs::{FeatureStructure, NodeId, TypeHierarchy};

fn quote(s: &str) -> String {
  let mut out = String::with_capacity(s.len() + 2);
  out.push('"');
  for c in s.chars() {
    match c {
      '"' | '\\' => {
        out.push('\\');
        out.push(c);
      }
      '\n' => out.push_str("\\n"),
      c => out.push(c),
    }
  }
  out.push('"');
  out
}

/// Writes a structure in the description language, tagging shared nodes.
/// With `root_type` false the root's type is left implicit.
pub fn write_fs(fs: &FeatureStructure, h: &TypeHierarchy, root_type: bool) -> String {
  let mut indeg: HashMap<NodeId, usize> = HashMap::new();
  let nodes: std::collections::BTreeSet<NodeId> = fs.paths().into_iter().map(|(_, n)| n).collect();
  for n in nodes {
    for (_, c) in fs.arcs(n) {
      *indeg.entry(*c).or_insert(0) += 1;
    }
  }
  let mut tags: HashMap<NodeId, usize> = HashMap::new();
  let mut out = String::new();
  write_node(fs, h, fs.root(), root_type, &indeg, &mut tags, &mut out);
  out
}

fn write_node(
  fs: &FeatureStructure,
  h: &TypeHierarchy,
  n: NodeId,
  with_type: bool,
  indeg: &HashMap<NodeId, usize>,
  tags: &mut HashMap<NodeId, usize>,
  out: &mut String,
) {
  if let Some(t) = tags.get(&n) {
    write!(out, "#t{t}").unwrap();
    return;
  }
  let mut parts: Vec<String> = Vec::new();
  if indeg.get(&n).copied().unwrap_or(0) > 1 {
    let t = tags.len();
    tags.insert(n, t);
    parts.push(format!("#t{t}"));
  }
  if let Some(text) = fs.text(n) {
    parts.push(quote(text));
  } else if with_type && (fs.node_type(n) != h.top() || fs.arcs(n).is_empty()) {
    parts.push(h.name(fs.node_type(n)).to_string());
  }
  if !fs.arcs(n).is_empty() {
    let mut avm = String::from("[ ");
    for (i, (f, c)) in fs.arcs(n).iter().enumerate() {
      if i > 0 {
        avm.push_str(", ");
      }
      write!(avm, "{f} ").unwrap();
      write_node(fs, h, *c, true, indeg, tags, &mut avm);
    }
    avm.push_str(" ]");
    parts.push(avm);
  }
  if parts.is_empty() {
    parts.push("[ ]".into());
  }
  out.push_str(&parts.join(" & "));
}

pub(super) fn grammar_source(g: &Grammar) -> String {
  let h = &g.hierarchy;
  let mut out = String::new();
  writeln!(out, ":grammar {}", g.name).unwrap();
  writeln!(out, "\n:types").unwrap();
  for name in g.declared_types() {
    let t = h.lookup(name).expect("declared type");
    let parents: Vec<&str> = h.parents(t).iter().map(|&p| h.name(p)).collect();
    write!(out, "{name} := {}", parents.join(" & ")).unwrap();
    if let Some(local) = &g.local_constraints[t.index()] {
      write!(out, " & {}", write_fs(local, h, false)).unwrap();
    }
    out.push_str(".\n");
  }
  writeln!(out, "\n:lexicon").unwrap();
  for e in &g.entries {
    write!(out, "{} := {} %tag {}", e.id, write_fs(&e.fs, h, true), e.tag).unwrap();
    if e.paradigm_key != e.predicate {
      write!(out, " %paradigm {}", quote(&e.paradigm_key)).unwrap();
    }
    out.push_str(".\n");
  }
  writeln!(out, "\n:lexrules").unwrap();
  for r in &g.lexical_rules {
    write!(out, "{} := {}", r.id, write_fs(&r.fs, h, true)).unwrap();
    if let Some(t) = &r.trigger_tag {
      write!(out, " %trigger {t}").unwrap();
    }
    if r.learner {
      out.push_str(" %learner");
    }
    if let Some(k) = &r.feedback_key {
      write!(out, " %feedback {k}").unwrap();
    }
    out.push_str(".\n");
  }
  writeln!(out, "\n:rules").unwrap();
  for r in &g.phrasal_rules {
    write!(out, "{} := {} %head {}", r.id, write_fs(&r.fs, h, true), r.head_index).unwrap();
    if r.learner {
      out.push_str(" %learner");
    }
    out.push_str(".\n");
  }
  writeln!(out, "\n:root\nroot := {}.", write_fs(&g.root, h, true)).unwrap();
  writeln!(out, "\n:feedback").unwrap();
  for t in g.feedback_templates.values() {
    let severity = match t.severity {
      Severity::Advisory => "advisory",
      Severity::Error => "error",
    };
    writeln!(out, "{} := {} {} {}.", t.name, t.category, severity, quote(&t.message)).unwrap();
  }
  out
}
