//! Bottom-up all-paths chart parser with a static rule-compatibility filter
//! and an optional supertag filter on lexical edges.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::grammar::{Grammar, PhrasalRule};
use crate::morph::{self, LexicalEdge, MAX_CHAIN};
use crate::semantics::{extract_mrs, MrsLite, SemanticsError};
use crate::tfs::{unify, Feat, FeatureStructure, FsPath, Scratch, TypeHierarchy, UnifyFailure};

/// Ranks candidate signatures per token; the plug point for supertaggers.
pub trait SignatureRanker: Send + Sync {
  /// `licensed[i]` lists the signatures token `i` can carry. Returns, per
  /// token, signatures best first.
  fn rank(&self, tokens: &[String], licensed: &[Vec<String>]) -> Vec<Vec<String>>;
}

#[derive(Clone)]
pub struct SupertagFilter {
  pub ranker: Arc<dyn SignatureRanker>,
  pub k: usize,
}

impl fmt::Debug for SupertagFilter {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.debug_struct("SupertagFilter").field("k", &self.k).finish()
  }
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
  pub rule_filter: bool,
  pub reading_cap: usize,
  pub max_len: usize,
  /// bound on consecutive unary rule applications
  pub max_chain: usize,
  pub supertag: Option<SupertagFilter>,
}

impl Default for ParseOptions {
  fn default() -> Self {
    ParseOptions {
      rule_filter: true,
      reading_cap: 64,
      max_len: 30,
      max_chain: MAX_CHAIN,
      supertag: None,
    }
  }
}

impl ParseOptions {
  /// No rule filter and no supertagger: the complete analysis set.
  pub fn unfiltered() -> Self {
    ParseOptions {
      rule_filter: false,
      ..Default::default()
    }
  }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
  Lexical {
    entry: String,
    lex_type: String,
    rules: Vec<String>,
    surface: String,
  },
  Rule(String),
}

#[derive(Clone, Debug)]
pub struct Edge {
  pub start: usize,
  pub end: usize,
  pub fs: FeatureStructure,
  pub origin: Origin,
  pub children: Vec<Arc<Edge>>,
  pub learner_uses: BTreeSet<String>,
  pub unary_depth: usize,
}

impl Edge {
  pub fn from_lexical(lex: &LexicalEdge, position: usize) -> Edge {
    Edge {
      start: position,
      end: position + 1,
      fs: lex.fs.clone(),
      origin: Origin::Lexical {
        entry: lex.entry.clone(),
        lex_type: lex.lex_type.clone(),
        rules: lex.rules.clone(),
        surface: lex.surface.clone(),
      },
      children: Vec::new(),
      learner_uses: lex.learner_rules.iter().cloned().collect(),
      unary_depth: 0,
    }
  }

  /// Rule-filter key: the lexical type or the rule that built the edge.
  pub fn key(&self) -> &str {
    match &self.origin {
      Origin::Lexical { lex_type, .. } => lex_type,
      Origin::Rule(r) => r,
    }
  }

  pub fn signature(&self) -> Option<String> {
    match &self.origin {
      Origin::Lexical { lex_type, rules, .. } => Some(morph::signature(lex_type, rules)),
      Origin::Rule(_) => None,
    }
  }

  pub fn is_lexical(&self) -> bool {
    matches!(self.origin, Origin::Lexical { .. })
  }

  pub fn derivation(&self) -> Derivation {
    match &self.origin {
      Origin::Lexical {
        entry,
        rules,
        surface,
        ..
      } => {
        let mut d = Derivation {
          label: entry.clone(),
          start: self.start,
          end: self.end,
          surface: Some(surface.clone()),
          children: Vec::new(),
        };
        for r in rules {
          d = Derivation {
            label: r.clone(),
            start: self.start,
            end: self.end,
            surface: None,
            children: vec![d],
          };
        }
        d
      }
      Origin::Rule(r) => Derivation {
        label: r.clone(),
        start: self.start,
        end: self.end,
        surface: None,
        children: self.children.iter().map(|c| c.derivation()).collect(),
      },
    }
  }

  /// Lexical edges at the leaves, left to right.
  pub fn leaves(&self) -> Vec<&Edge> {
    if self.is_lexical() {
      return vec![self];
    }
    self.children.iter().flat_map(|c| c.leaves()).collect()
  }
}

/// Derivation tree: rule or entry label plus token span. Entry leaves carry
/// the surface form; lexical rules wrap their entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Derivation {
  pub label: String,
  pub start: usize,
  pub end: usize,
  pub surface: Option<String>,
  pub children: Vec<Derivation>,
}

impl Derivation {
  /// `(label start end children...)`, leaves `(entry start end "surface")`.
  pub fn canonical(&self) -> String {
    let mut s = String::new();
    self.write_canonical(&mut s);
    s
  }

  fn write_canonical(&self, s: &mut String) {
    s.push('(');
    s.push_str(&self.label);
    s.push_str(&format!(" {} {}", self.start, self.end));
    if let Some(surface) = &self.surface {
      s.push_str(&format!(" {surface:?}"));
    }
    for c in &self.children {
      s.push(' ');
      c.write_canonical(s);
    }
    s.push(')');
  }

  pub fn node_count(&self) -> usize {
    1 + self.children.iter().map(Derivation::node_count).sum::<usize>()
  }

  /// Indented tree, one node per line: `label [start,end)`.
  pub fn pretty(&self) -> String {
    let mut s = String::new();
    self.write_pretty(0, &mut s);
    s
  }

  fn write_pretty(&self, depth: usize, s: &mut String) {
    s.push_str(&"  ".repeat(depth));
    s.push_str(&format!("{} [{},{})", self.label, self.start, self.end));
    if let Some(surface) = &self.surface {
      s.push_str(&format!(" {surface:?}"));
    }
    s.push('\n');
    for c in &self.children {
      c.write_pretty(depth + 1, s);
    }
  }

  /// Parses the canonical form.
  pub fn parse(text: &str) -> Result<Derivation, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let d = Self::parse_at(&chars, &mut i)?;
    while i < chars.len() && chars[i].is_whitespace() {
      i += 1;
    }
    if i != chars.len() {
      return Err(format!("trailing input at character {i}"));
    }
    Ok(d)
  }

  fn parse_at(c: &[char], i: &mut usize) -> Result<Derivation, String> {
    let skip_ws = |i: &mut usize| {
      while *i < c.len() && c[*i].is_whitespace() {
        *i += 1;
      }
    };
    let word = |i: &mut usize| {
      let s = *i;
      while *i < c.len() && !c[*i].is_whitespace() && c[*i] != '(' && c[*i] != ')' {
        *i += 1;
      }
      c[s..*i].iter().collect::<String>()
    };
    skip_ws(i);
    if c.get(*i) != Some(&'(') {
      return Err(format!("expected `(` at character {i}"));
    }
    *i += 1;
    skip_ws(i);
    let label = word(i);
    skip_ws(i);
    let start = word(i).parse().map_err(|_| format!("bad start before character {i}"))?;
    skip_ws(i);
    let end = word(i).parse().map_err(|_| format!("bad end before character {i}"))?;
    skip_ws(i);
    let mut surface = None;
    if c.get(*i) == Some(&'"') {
      let mut s = String::new();
      *i += 1;
      while *i < c.len() && c[*i] != '"' {
        if c[*i] == '\\' && *i + 1 < c.len() {
          *i += 1;
        }
        s.push(c[*i]);
        *i += 1;
      }
      if *i >= c.len() {
        return Err("unterminated surface string".into());
      }
      *i += 1;
      surface = Some(s);
    }
    let mut children = Vec::new();
    loop {
      skip_ws(i);
      match c.get(*i) {
        Some(')') => {
          *i += 1;
          break;
        }
        Some('(') => children.push(Self::parse_at(c, i)?),
        _ => return Err(format!("expected `(` or `)` at character {i}")),
      }
    }
    if label.is_empty() {
      return Err("empty label".into());
    }
    Ok(Derivation {
      label,
      start,
      end,
      surface,
      children,
    })
  }
}

impl fmt::Display for Derivation {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(&self.canonical())
  }
}

impl Serialize for Derivation {
  fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&self.canonical())
  }
}

#[derive(Clone, Debug)]
pub struct Reading {
  pub edge: Arc<Edge>,
  pub derivation: Derivation,
  pub semantics: MrsLite,
  pub learner_uses: BTreeSet<String>,
}

impl Reading {
  /// Ranking key: fewer learner rules, then smaller trees, then derivation text.
  pub fn rank_key(&self) -> (usize, usize, String) {
    (self.learner_uses.len(), self.derivation.node_count(), self.derivation.canonical())
  }
}

fn as_millis<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
  s.serialize_f64(d.as_secs_f64() * 1000.0)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
  pub edges_built: usize,
  pub unification_attempts: usize,
  pub unification_failures: usize,
  pub filter_prunes_rule: usize,
  pub filter_prunes_supertag: usize,
  /// positions of tokens without lexical edges
  pub gap_positions: Vec<usize>,
  #[serde(rename = "wall_time_ms", serialize_with = "as_millis")]
  pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct ParseResult {
  pub sentence: String,
  pub tokens: Vec<String>,
  pub readings: Vec<Reading>,
  /// readings found before applying the cap
  pub total_readings: usize,
  pub stats: ParseStats,
}

impl ParseResult {
  /// Everything except wall time, in a stable text form.
  pub fn canonical(&self, h: &TypeHierarchy) -> String {
    let mut s = format!("{}\n", self.tokens.join(" "));
    for r in &self.readings {
      s.push_str(&r.derivation.canonical());
      s.push('\n');
      s.push_str(&r.edge.fs.canonical(h));
      s.push('\n');
    }
    let st = &self.stats;
    s.push_str(&format!(
      "edges={} attempts={} failures={} prunes_rule={} prunes_supertag={} gaps={:?} total={}\n",
      st.edges_built,
      st.unification_attempts,
      st.unification_failures,
      st.filter_prunes_rule,
      st.filter_prunes_supertag,
      st.gap_positions,
      self.total_readings
    ));
    s
  }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
  #[error("empty input")]
  Empty,
  #[error("input has {len} tokens; the limit is {max}")]
  TooLong { len: usize, max: usize },
  #[error("internal error: {0}")]
  Semantics(#[from] SemanticsError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
  #[error("rule takes {expected} daughters, got {got}")]
  Arity { expected: usize, got: usize },
  #[error("daughters are not adjacent")]
  NotAdjacent,
  #[error("daughter {daughter}: {failure}")]
  Unify { daughter: usize, failure: UnifyFailure },
}

fn daughter_path(i: usize) -> FsPath {
  let mut p = vec![Feat::new("ARGS")];
  p.extend(std::iter::repeat_n(Feat::new("REST"), i));
  p.push(Feat::new("FIRST"));
  FsPath(p)
}

/// Unifies each daughter into the rule's daughter description. The mother is
/// the rule without ARGS; its RELS is the daughters' RELS concatenated and its
/// LEARNER is + iff the rule or any daughter is a learner construction.
/// Failure paths are relative to the failing daughter.
pub fn apply_rule(rule: &PhrasalRule, daughters: &[&Edge], g: &Grammar) -> Result<Edge, ApplyError> {
  if daughters.len() != rule.arity {
    return Err(ApplyError::Arity {
      expected: rule.arity,
      got: daughters.len(),
    });
  }
  if daughters.windows(2).any(|w| w[0].end != w[1].start) {
    return Err(ApplyError::NotAdjacent);
  }
  let h = &g.hierarchy;
  let mut s = Scratch::new(h);
  let root = s.import(&rule.fs);
  for (i, d) in daughters.iter().enumerate() {
    let target = s
      .follow(root, &daughter_path(i))
      .expect("loader guarantees one ARGS item per daughter");
    let dn = s.import(&d.fs);
    s.unify(target, dn, &FsPath::root())
      .map_err(|failure| ApplyError::Unify { daughter: i, failure })?;
  }
  let mut fs = s.export(root).map_err(|failure| ApplyError::Unify {
    daughter: daughters.len() - 1,
    failure,
  })?;

  let rels: Vec<_> = (0..daughters.len())
    .map(|i| {
      let d = fs.follow_from(fs.root(), &daughter_path(i)).unwrap();
      fs.get(d, "RELS")
    })
    .collect();
  let mut tail = rels.last().copied().flatten();
  for xs in rels.iter().rev().skip(1) {
    if let (Some(xs), Some(ys)) = (xs, tail) {
      tail = fs.append_lists(*xs, ys, h).ok();
    }
  }
  let learner_uses: BTreeSet<String> = daughters
    .iter()
    .flat_map(|d| d.learner_uses.iter().cloned())
    .chain(rule.learner.then(|| rule.id.clone()))
    .collect();
  let flag = if learner_uses.is_empty() { "-" } else { "+" };
  if let Some(t) = h.lookup(flag) {
    let n = fs.add_node(t, None);
    fs.set_arc(fs.root(), &Feat::new("LEARNER"), n);
  }
  if let Some(rels) = tail {
    fs.set_arc(fs.root(), &Feat::new("RELS"), rels);
  }
  fs.remove_arc(fs.root(), "ARGS");
  fs.compact();

  Ok(Edge {
    start: daughters[0].start,
    end: daughters[daughters.len() - 1].end,
    fs,
    origin: Origin::Rule(rule.id.clone()),
    children: daughters.iter().map(|d| Arc::new((*d).clone())).collect(),
    learner_uses,
    unary_depth: if rule.arity == 1 {
      daughters[0].unary_depth + 1
    } else {
      0
    },
  })
}

/// Static compatibility table over (rule, daughter position, candidate), where
/// a candidate is a lexical type or a rule (standing for its mothers). An
/// entry is false only when the candidate's constraint cannot unify with the
/// daughter description, so pruning never loses a reading.
#[derive(Clone, Debug, Default)]
pub struct RuleFilter {
  table: HashMap<(String, usize, String), bool>,
  permissive: bool,
}

impl RuleFilter {
  /// The table that allows everything.
  pub fn permissive() -> Self {
    RuleFilter {
      table: HashMap::new(),
      permissive: true,
    }
  }

  pub fn allows(&self, rule: &str, daughter: usize, candidate: &str) -> bool {
    self.permissive
      || self
        .table
        .get(&(rule.to_string(), daughter, candidate.to_string()))
        .copied()
        .unwrap_or(true)
  }

  /// Entries that are false.
  pub fn pruned_pairs(&self) -> usize {
    self.table.values().filter(|v| !**v).count()
  }

  pub fn len(&self) -> usize {
    self.table.len()
  }

  pub fn is_empty(&self) -> bool {
    self.table.is_empty()
  }
}

pub fn build_rule_filter(g: &Grammar) -> RuleFilter {
  let h = &g.hierarchy;
  let mut candidates: Vec<(String, FeatureStructure)> = Vec::new();
  let lex_types: BTreeSet<&str> = g.entries.iter().map(|e| e.lex_type.as_str()).collect();
  for t in lex_types {
    candidates.push((t.to_string(), g.constraint(t).expect("entry type exists").clone()));
  }
  for r in &g.phrasal_rules {
    // RELS and LEARNER are recomputed for every mother, so leave them open
    candidates.push((r.id.clone(), r.mother.without("RELS").without("LEARNER")));
  }
  let mut table = HashMap::new();
  for r in &g.phrasal_rules {
    for (i, d) in r.daughters.iter().enumerate() {
      for (name, c) in &candidates {
        table.insert((r.id.clone(), i, name.clone()), unify(d, c, h).is_ok());
      }
    }
  }
  RuleFilter {
    table,
    permissive: false,
  }
}

/// The grammar's rule filter, built on first use.
pub fn rule_filter(g: &Grammar) -> &RuleFilter {
  g.filter.get_or_init(|| build_rule_filter(g))
}

/// Keeps each token's edges whose signature ranks within the top `k`; if that
/// would leave a token without edges, its rank-1 licensed edges are kept.
/// Returns the kept edges and the number removed.
pub fn filter_edges<E, F>(
  edges: &[Vec<E>],
  signature: F,
  ranking: &[Vec<String>],
  k: usize,
) -> (Vec<Vec<E>>, usize)
where
  E: Clone,
  F: Fn(&E) -> String,
{
  let mut removed = 0;
  let kept = edges
    .iter()
    .enumerate()
    .map(|(i, es)| {
      let ranked: Vec<&String> = ranking
        .get(i)
        .map(|r| r.iter().filter(|s| es.iter().any(|e| signature(e) == **s)).collect())
        .unwrap_or_default();
      let top: BTreeSet<&String> = ranked.iter().take(k.max(1)).copied().collect();
      let mut keep: Vec<E> = es.iter().filter(|e| top.contains(&signature(e))).cloned().collect();
      if keep.is_empty() && !es.is_empty() {
        let best = ranked.first().map(|s| (*s).clone()).unwrap_or_else(|| signature(&es[0]));
        keep = es.iter().filter(|e| signature(e) == best).cloned().collect();
      }
      removed += es.len() - keep.len();
      keep
    })
    .collect();
  (kept, removed)
}

/// Lexical edges for each token (all analyses), in a stable order.
pub fn token_edges(tokens: &[String], g: &Grammar) -> Vec<Vec<LexicalEdge>> {
  tokens
    .iter()
    .map(|t| {
      morph::analyze_token(t, g)
        .iter()
        .flat_map(|a| morph::lexical_edges(a, g))
        .collect()
    })
    .collect()
}

/// Signatures licensed for each token, sorted and unique.
pub fn licensed_signatures(edges: &[Vec<LexicalEdge>]) -> Vec<Vec<String>> {
  edges
    .iter()
    .map(|es| {
      let s: BTreeSet<String> = es.iter().map(LexicalEdge::signature).collect();
      s.into_iter().collect()
    })
    .collect()
}

/// Parses a token sequence. Readings are the spanning edges that satisfy the
/// root condition, ranked by [`Reading::rank_key`] and capped.
pub fn parse(tokens: &[String], g: &Grammar, opts: &ParseOptions) -> Result<ParseResult, ParseError> {
  let started = Instant::now();
  if tokens.is_empty() {
    return Err(ParseError::Empty);
  }
  if tokens.len() > opts.max_len {
    return Err(ParseError::TooLong {
      len: tokens.len(),
      max: opts.max_len,
    });
  }
  let n = tokens.len();
  let mut stats = ParseStats::default();
  let mut lex = token_edges(tokens, g);
  stats.gap_positions = (0..n).filter(|&i| lex[i].is_empty()).collect();
  if !stats.gap_positions.is_empty() {
    stats.wall_time = started.elapsed();
    return Ok(ParseResult {
      sentence: tokens.join(" "),
      tokens: tokens.to_vec(),
      readings: Vec::new(),
      total_readings: 0,
      stats,
    });
  }
  if let Some(st) = &opts.supertag {
    let ranking = st.ranker.rank(tokens, &licensed_signatures(&lex));
    let (kept, removed) = filter_edges(&lex, LexicalEdge::signature, &ranking, st.k);
    lex = kept;
    stats.filter_prunes_supertag = removed;
  }

  let filter = if opts.rule_filter {
    rule_filter(g)
  } else {
    static PERMISSIVE: std::sync::OnceLock<RuleFilter> = std::sync::OnceLock::new();
    PERMISSIVE.get_or_init(RuleFilter::permissive)
  };
  let unary: Vec<&PhrasalRule> = g.phrasal_rules.iter().filter(|r| r.arity == 1).collect();
  let binary: Vec<&PhrasalRule> = g.phrasal_rules.iter().filter(|r| r.arity == 2).collect();

  let mut chart: Vec<Vec<Vec<Arc<Edge>>>> = vec![vec![Vec::new(); n + 1]; n + 1];
  for (i, es) in lex.iter().enumerate() {
    for e in es {
      chart[i][i + 1].push(Arc::new(Edge::from_lexical(e, i)));
      stats.edges_built += 1;
    }
    close_unary(&mut chart[i][i + 1], &unary, filter, opts, g, &mut stats);
  }
  for width in 2..=n {
    for start in 0..=n - width {
      let end = start + width;
      let mut cell = Vec::new();
      // `mid` indexes two different rows of the chart
      #[allow(clippy::needless_range_loop)]
      for mid in start + 1..end {
        for left in &chart[start][mid] {
          for right in &chart[mid][end] {
            for rule in &binary {
              if !(filter.allows(&rule.id, 0, left.key()) && filter.allows(&rule.id, 1, right.key())) {
                stats.filter_prunes_rule += 1;
                continue;
              }
              stats.unification_attempts += 1;
              match apply_rule(rule, &[left, right], g) {
                Ok(e) => {
                  stats.edges_built += 1;
                  cell.push(Arc::new(e));
                }
                Err(_) => stats.unification_failures += 1,
              }
            }
          }
        }
      }
      close_unary(&mut cell, &unary, filter, opts, g, &mut stats);
      chart[start][end] = cell;
    }
  }

  let mut readings = Vec::new();
  for e in &chart[0][n] {
    if unify(&e.fs, &g.root, &g.hierarchy).is_ok() {
      readings.push(Reading {
        derivation: e.derivation(),
        semantics: extract_mrs(&e.fs, &g.hierarchy)?,
        learner_uses: e.learner_uses.clone(),
        edge: e.clone(),
      });
    }
  }
  readings.sort_by_cached_key(Reading::rank_key);
  let total_readings = readings.len();
  readings.truncate(opts.reading_cap);
  stats.wall_time = started.elapsed();
  Ok(ParseResult {
    sentence: tokens.join(" "),
    tokens: tokens.to_vec(),
    readings,
    total_readings,
    stats,
  })
}

fn close_unary(
  cell: &mut Vec<Arc<Edge>>,
  unary: &[&PhrasalRule],
  filter: &RuleFilter,
  opts: &ParseOptions,
  g: &Grammar,
  stats: &mut ParseStats,
) {
  let mut i = 0;
  while i < cell.len() {
    let e = cell[i].clone();
    i += 1;
    if e.unary_depth >= opts.max_chain {
      continue;
    }
    for rule in unary {
      if !filter.allows(&rule.id, 0, e.key()) {
        stats.filter_prunes_rule += 1;
        continue;
      }
      stats.unification_attempts += 1;
      match apply_rule(rule, &[&e], g) {
        Ok(m) => {
          stats.edges_built += 1;
          cell.push(Arc::new(m));
        }
        Err(_) => stats.unification_failures += 1,
      }
    }
  }
}

/// Tokenizes and parses a sentence.
pub fn parse_sentence(sentence: &str, g: &Grammar, opts: &ParseOptions) -> Result<ParseResult, ParseError> {
  let tokens: Vec<String> = morph::tokenize(sentence, g).into_iter().map(|t| t.text).collect();
  let mut r = parse(&tokens, g, opts)?;
  r.sentence = sentence.to_string();
  Ok(r)
}
