//! Grammars: type hierarchy with constraints, lexicon, lexical and phrasal
//! rules, root condition and feedback templates, loaded from the TDL-like
//! description language in [`crate::tdl`].

mod write;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tdl::{self, Definition, Item, Pos, Term};
use crate::tfs::{
  unify, BuildError, Builder, FeatureStructure, FsPath, HierarchyBuilder, HierarchyError,
  TypeHierarchy, TypeId,
};

pub use write::write_fs;

/// Which rules a loaded grammar keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
  /// Learner rules are excluded: only well-formed input is covered.
  Strict,
  /// Learner relaxations and mal-rules are included.
  Learner,
}

impl fmt::Display for Mode {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(match self {
      Mode::Strict => "strict",
      Mode::Learner => "learner",
    })
  }
}

impl std::str::FromStr for Mode {
  type Err = String;

  fn from_str(s: &str) -> Result<Self, Self::Err> {
    match s {
      "strict" => Ok(Mode::Strict),
      "learner" => Ok(Mode::Learner),
      other => Err(format!("unknown mode `{other}` (expected strict or learner)")),
    }
  }
}

/// Load failure with a location (`line:col` or a type name) for reporting.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
  #[error("syntax error at {0}")]
  Syntax(#[from] tdl::SyntaxError),
  #[error("{error}")]
  Hierarchy { error: HierarchyError, pos: Option<Pos> },
  #[error("constraint of `{name}` is inconsistent: {error}")]
  Constraint { name: String, pos: Pos, error: BuildError },
  #[error("{name}: {detail}")]
  Definition { name: String, pos: Pos, detail: String },
}

impl GrammarError {
  /// Short machine-readable category.
  pub fn kind(&self) -> &'static str {
    match self {
      GrammarError::Syntax(_) => "syntax",
      GrammarError::Hierarchy { .. } => "hierarchy",
      GrammarError::Constraint { .. } => "constraint",
      GrammarError::Definition { .. } => "definition",
    }
  }

  pub fn location(&self) -> String {
    match self {
      GrammarError::Syntax(e) => e.pos.to_string(),
      GrammarError::Hierarchy { pos, .. } => pos.map(|p| p.to_string()).unwrap_or_default(),
      GrammarError::Constraint { pos, .. } | GrammarError::Definition { pos, .. } => {
        pos.to_string()
      }
    }
  }

  pub fn detail(&self) -> String {
    match self {
      GrammarError::Syntax(e) => e.msg.clone(),
      other => other.to_string(),
    }
  }

  /// Failing feature path, for constraint clashes.
  pub fn failing_path(&self) -> Option<&FsPath> {
    match self {
      GrammarError::Constraint {
        error: BuildError::Unify(u),
        ..
      } => Some(u.path()),
      _ => None,
    }
  }
}

#[derive(Clone, Debug)]
pub struct LexicalEntry {
  pub id: String,
  pub lemma: String,
  pub surface: String,
  pub lex_type: String,
  pub predicate: String,
  /// links the inflected variants of one lexeme
  pub paradigm_key: String,
  pub tag: String,
  pub fs: FeatureStructure,
}

#[derive(Clone, Debug)]
pub struct LexicalRule {
  pub id: String,
  /// tag that licenses the rule; untriggered rules may follow a triggered one
  pub trigger_tag: Option<String>,
  pub input: FeatureStructure,
  pub output: FeatureStructure,
  pub learner: bool,
  pub feedback_key: Option<String>,
  /// the rule as written, `DTR` holding the input schema
  pub fs: FeatureStructure,
}

#[derive(Clone, Debug)]
pub struct PhrasalRule {
  pub id: String,
  pub arity: usize,
  /// the whole rule, daughters under `ARGS`
  pub fs: FeatureStructure,
  pub mother: FeatureStructure,
  pub daughters: Vec<FeatureStructure>,
  pub head_index: usize,
  pub learner: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
  Advisory,
  Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeedbackTemplate {
  pub name: String,
  pub category: String,
  pub message: String,
  pub severity: Severity,
}

impl FeedbackTemplate {
  pub const PLACEHOLDERS: [&'static str; 3] = ["surface", "expected", "head"];

  /// Substitutes `{surface}`, `{expected}` and `{head}`.
  pub fn render(&self, surface: &str, expected: &str, head: &str) -> String {
    self
      .message
      .replace("{surface}", surface)
      .replace("{expected}", expected)
      .replace("{head}", head)
  }
}

fn placeholders(message: &str) -> Vec<String> {
  static RE: OnceLock<Regex> = OnceLock::new();
  let re = RE.get_or_init(|| Regex::new(r"\{([^{}]*)\}").unwrap());
  re.captures_iter(message).map(|c| c[1].to_string()).collect()
}

/// The morphological tag inventory: nouns, qualifying adjectives, articles
/// and possessives, and third-person present indicative verbs.
pub fn tag_pattern() -> &'static Regex {
  static RE: OnceLock<Regex> = OnceLock::new();
  RE.get_or_init(|| {
    Regex::new(r"^(NC[MFC][SP]000|AQ0[MFC][SP]0|D[AP][0-9][MFC][SP][0SP]|V[SM]IP[123][SP]0)$")
      .unwrap()
  })
}

/// A loaded, validated grammar. Immutable; share it freely across threads.
#[derive(Clone)]
pub struct Grammar {
  pub name: String,
  pub mode: Mode,
  pub version_label: String,
  pub hierarchy: TypeHierarchy,
  /// local constraint per type as written (indexed by type)
  pub local_constraints: Vec<Option<FeatureStructure>>,
  /// effective constraint per type after inheritance and expansion
  pub constraints: Vec<FeatureStructure>,
  pub entries: Vec<LexicalEntry>,
  pub lexical_rules: Vec<LexicalRule>,
  pub phrasal_rules: Vec<PhrasalRule>,
  pub root: FeatureStructure,
  pub feedback_templates: BTreeMap<String, FeedbackTemplate>,
  by_surface: HashMap<String, Vec<usize>>,
  source_order: Vec<(String, Pos)>,
  pub(crate) filter: OnceLock<crate::chart::RuleFilter>,
}

impl fmt::Debug for Grammar {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.debug_struct("Grammar")
      .field("version_label", &self.version_label)
      .field("types", &self.hierarchy.len())
      .field("entries", &self.entries.len())
      .field("lexical_rules", &self.lexical_rules.len())
      .field("phrasal_rules", &self.phrasal_rules.len())
      .finish()
  }
}

#[derive(Default)]
struct Sections<'a> {
  name: Option<String>,
  types: Vec<&'a Definition>,
  lexicon: Vec<&'a Definition>,
  lexrules: Vec<&'a Definition>,
  rules: Vec<&'a Definition>,
  root: Vec<&'a Definition>,
  feedback: Vec<&'a tdl::FeedbackDecl>,
}

fn def_error(def: &Definition, detail: impl Into<String>) -> GrammarError {
  GrammarError::Definition {
    name: def.name.clone(),
    pos: def.pos,
    detail: detail.into(),
  }
}

fn content_hash(source: &str) -> String {
  let digest = Sha256::digest(source.as_bytes());
  digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Loads a grammar from source text. In strict mode learner rules are dropped.
pub fn load_grammar(source: &str, mode: Mode) -> Result<Grammar, GrammarError> {
  let items = tdl::parse_source(source)?;
  let mut sec = Sections::default();
  let mut current = String::new();
  for item in &items {
    match item {
      Item::Section(label, pos) => {
        if let Some(name) = label.strip_prefix("grammar ") {
          sec.name = Some(name.to_string());
          current = "grammar".into();
        } else {
          current = label.clone();
          if !["grammar", "types", "lexicon", "lexrules", "rules", "root", "feedback"]
            .contains(&label.as_str())
          {
            return Err(GrammarError::Syntax(tdl::SyntaxError {
              pos: *pos,
              msg: format!("unknown section `:{label}`"),
            }));
          }
        }
      }
      Item::Feedback(fb) => sec.feedback.push(fb),
      Item::Def(def) => match current.as_str() {
        "types" => sec.types.push(def),
        "lexicon" => sec.lexicon.push(def),
        "lexrules" => sec.lexrules.push(def),
        "rules" => sec.rules.push(def),
        "root" => sec.root.push(def),
        _ => return Err(def_error(def, "definition outside of a section")),
      },
    }
  }

  // hierarchy
  let mut hb = HierarchyBuilder::new("*top*");
  let mut type_pos: HashMap<String, Pos> = HashMap::new();
  for def in &sec.types {
    let parents: Vec<&str> = def
      .body
      .0
      .iter()
      .filter_map(|t| match t {
        Term::Type(n) => Some(n.as_str()),
        _ => None,
      })
      .collect();
    hb.add(&def.name, &parents);
    type_pos.entry(def.name.clone()).or_insert(def.pos);
  }
  let hierarchy = hb.build().map_err(|error| {
    let pos = match &error {
      HierarchyError::Duplicate(n) | HierarchyError::Cycle(n) | HierarchyError::UnknownType(n) => {
        type_pos.get(n).copied()
      }
      HierarchyError::UnknownParent { child, .. } => type_pos.get(child).copied(),
      HierarchyError::AmbiguousGlb { a, .. } => type_pos.get(a).copied(),
    };
    GrammarError::Hierarchy { error, pos }
  })?;

  // local constraints
  let mut local_constraints: Vec<Option<FeatureStructure>> = vec![None; hierarchy.len()];
  for def in &sec.types {
    let ty = hierarchy.lookup(&def.name).expect("declared above");
    let terms: Vec<&Term> = def.body.0.iter().filter(|t| !matches!(t, Term::Type(_))).collect();
    if terms.is_empty() {
      continue;
    }
    let mut b = Builder::new(&hierarchy);
    let root = b.fresh();
    let built = (|| {
      b.term(root, &Term::Type(def.name.clone()), &FsPath::root())?;
      for t in terms {
        b.term(root, t, &FsPath::root())?;
      }
      b.finish(root)
    })();
    let fs = built.map_err(|error| GrammarError::Constraint {
      name: def.name.clone(),
      pos: def.pos,
      error,
    })?;
    local_constraints[ty.index()] = Some(fs);
  }

  let constraints = expand(&hierarchy, &local_constraints, &type_pos)?;
  let feedback_templates = load_feedback(&sec.feedback)?;

  let root = FeatureStructure::top(&hierarchy);
  let mut g = Grammar {
    name: sec.name.clone().unwrap_or_else(|| "grammar".into()),
    mode,
    version_label: format!(
      "{}/{}@{}",
      sec.name.as_deref().unwrap_or("grammar"),
      mode,
      content_hash(source)
    ),
    hierarchy,
    local_constraints,
    constraints,
    entries: Vec::new(),
    lexical_rules: Vec::new(),
    phrasal_rules: Vec::new(),
    root,
    feedback_templates,
    by_surface: HashMap::new(),
    source_order: sec.types.iter().map(|d| (d.name.clone(), d.pos)).collect(),
    filter: OnceLock::new(),
  };

  let mut seen_ids = HashSet::new();
  for def in &sec.lexicon {
    if !seen_ids.insert(def.name.clone()) {
      return Err(def_error(def, "duplicate lexical entry"));
    }
    let entry = g.load_entry(def)?;
    g.by_surface.entry(entry.surface.clone()).or_default().push(g.entries.len());
    g.entries.push(entry);
  }
  for def in &sec.lexrules {
    let rule = g.load_lexical_rule(def)?;
    if mode == Mode::Learner || !rule.learner {
      g.lexical_rules.push(rule);
    }
  }
  for def in &sec.rules {
    let rule = g.load_phrasal_rule(def)?;
    if mode == Mode::Learner || !rule.learner {
      g.phrasal_rules.push(rule);
    }
  }
  match sec.root.as_slice() {
    [def] => g.root = g.build(def, &def.body.0.iter().collect::<Vec<_>>())?,
    [] => {
      return Err(GrammarError::Definition {
        name: "root".into(),
        pos: Pos::default(),
        detail: "grammar has no :root condition".into(),
      })
    }
    [_, second, ..] => return Err(def_error(second, "more than one root condition")),
  }
  Ok(g)
}

fn expand(
  h: &TypeHierarchy,
  local: &[Option<FeatureStructure>],
  pos: &HashMap<String, Pos>,
) -> Result<Vec<FeatureStructure>, GrammarError> {
  let fail = |t: TypeId, error: BuildError| GrammarError::Constraint {
    name: h.name(t).to_string(),
    pos: pos.get(h.name(t)).copied().unwrap_or_default(),
    error,
  };
  // inheritance: local constraint unified with every parent's inherited one
  let mut inherited: Vec<Option<FeatureStructure>> = vec![None; h.len()];
  fn inherit(
    t: TypeId,
    h: &TypeHierarchy,
    local: &[Option<FeatureStructure>],
    inherited: &mut Vec<Option<FeatureStructure>>,
  ) -> Result<FeatureStructure, BuildError> {
    if let Some(fs) = &inherited[t.index()] {
      return Ok(fs.clone());
    }
    let mut fs = local[t.index()].clone().unwrap_or_else(|| FeatureStructure::atom(t));
    for &p in h.parents(t) {
      let pfs = inherit(p, h, local, inherited)?;
      // the parent's root type is more general than t, so the result stays typed t
      fs = unify(&fs, &pfs, h)?;
    }
    inherited[t.index()] = Some(fs.clone());
    Ok(fs)
  }
  for t in h.types() {
    inherit(t, h, local, &mut inherited).map_err(|e| fail(t, e))?;
  }
  let inherited: Vec<FeatureStructure> = inherited.into_iter().map(|f| f.unwrap()).collect();
  // expansion: every node also satisfies the constraint of its own type
  h.types()
    .map(|t| {
      let mut b = Builder::new(h);
      let root = b.scratch().import(&inherited[t.index()]);
      b.expand(root, &inherited)
        .and_then(|_| b.finish(root))
        .map_err(|e| fail(t, e))
    })
    .collect()
}

fn load_feedback(decls: &[&tdl::FeedbackDecl]) -> Result<BTreeMap<String, FeedbackTemplate>, GrammarError> {
  let mut out = BTreeMap::new();
  for fb in decls {
    let err = |detail: String| GrammarError::Definition {
      name: fb.name.clone(),
      pos: fb.pos,
      detail,
    };
    let severity = match fb.severity.as_str() {
      "advisory" => Severity::Advisory,
      "error" => Severity::Error,
      other => return Err(err(format!("unknown severity `{other}`"))),
    };
    for p in placeholders(&fb.message) {
      if !FeedbackTemplate::PLACEHOLDERS.contains(&p.as_str()) {
        return Err(err(format!("unknown placeholder `{{{p}}}` in message")));
      }
    }
    let template = FeedbackTemplate {
      name: fb.name.clone(),
      category: fb.category.clone(),
      message: fb.message.clone(),
      severity,
    };
    if out.insert(fb.name.clone(), template).is_some() {
      return Err(err("duplicate feedback template".into()));
    }
  }
  Ok(out)
}

fn lemma_of(predicate: &str) -> Option<String> {
  let parts: Vec<&str> = predicate.trim_start_matches('_').split('_').collect();
  (parts.len() >= 2 && !parts[0].is_empty()).then(|| parts[..parts.len() - 1].join("_"))
}

impl Grammar {
  /// Builds a definition body as a feature structure and expands it against the
  /// type constraints.
  fn build(&self, def: &Definition, terms: &[&Term]) -> Result<FeatureStructure, GrammarError> {
    let mut b = Builder::new(&self.hierarchy);
    let root = b.fresh();
    let built = (|| {
      for t in terms {
        b.term(root, t, &FsPath::root())?;
      }
      b.expand(root, &self.constraints)?;
      b.finish(root)
    })();
    built.map_err(|error| GrammarError::Constraint {
      name: def.name.clone(),
      pos: def.pos,
      error,
    })
  }

  fn annotation_arg(def: &Definition, key: &str) -> Result<Option<String>, GrammarError> {
    match def.annotation(key) {
      None => Ok(None),
      Some(a) if a.args.len() == 1 => Ok(Some(a.args[0].clone())),
      Some(_) => Err(def_error(def, format!("%{key} takes exactly one argument"))),
    }
  }

  fn load_entry(&self, def: &Definition) -> Result<LexicalEntry, GrammarError> {
    let lex_type = match def.body.0.first() {
      Some(Term::Type(t)) => t.clone(),
      _ => return Err(def_error(def, "lexical entry must start with its lexical type")),
    };
    if self.hierarchy.lookup(&lex_type).is_none() {
      return Err(def_error(def, format!("unknown lexical type `{lex_type}`")));
    }
    let fs = self.build(def, &def.body.0.iter().collect::<Vec<_>>())?;
    let text = |feat: &str| {
      fs.follow(feat)
        .and_then(|n| fs.text(n))
        .map(str::to_string)
        .ok_or_else(|| def_error(def, format!("entry needs a string {feat}")))
    };
    let surface = text("STEM")?;
    let predicate = text("PRED")?;
    if surface.is_empty() {
      return Err(def_error(def, "empty STEM"));
    }
    let lemma =
      lemma_of(&predicate).ok_or_else(|| def_error(def, format!("malformed predicate `{predicate}`")))?;
    let tag = Self::annotation_arg(def, "tag")?.ok_or_else(|| def_error(def, "entry needs %tag"))?;
    if !tag_pattern().is_match(&tag) {
      return Err(def_error(def, format!("tag `{tag}` is not in the tagset")));
    }
    let paradigm_key = Self::annotation_arg(def, "paradigm")?.unwrap_or_else(|| predicate.clone());
    Ok(LexicalEntry {
      id: def.name.clone(),
      lemma,
      surface,
      lex_type,
      predicate,
      paradigm_key,
      tag,
      fs,
    })
  }

  fn load_lexical_rule(&self, def: &Definition) -> Result<LexicalRule, GrammarError> {
    let fs = self.build(def, &def.body.0.iter().collect::<Vec<_>>())?;
    let dtr = fs
      .follow("DTR")
      .ok_or_else(|| def_error(def, "lexical rule needs a DTR (input) description"))?;
    let input = fs.substructure(dtr);
    let output = fs.without("DTR");
    let learner = def.annotation("learner").is_some();
    let trigger_tag = Self::annotation_arg(def, "trigger")?;
    if let Some(tag) = &trigger_tag {
      if !tag_pattern().is_match(tag) {
        return Err(def_error(def, format!("trigger `{tag}` is not in the tagset")));
      }
    }
    if learner && output.value_at("LEARNER", &self.hierarchy).as_deref() != Some("+") {
      return Err(def_error(def, "learner rule must set LEARNER +"));
    }
    let feedback_key = Self::annotation_arg(def, "feedback")?;
    if let Some(key) = &feedback_key {
      if !self.feedback_templates.contains_key(key) {
        return Err(def_error(def, format!("no feedback template `{key}`")));
      }
    }
    Ok(LexicalRule {
      id: def.name.clone(),
      trigger_tag,
      input,
      output,
      learner,
      feedback_key,
      fs,
    })
  }

  fn load_phrasal_rule(&self, def: &Definition) -> Result<PhrasalRule, GrammarError> {
    let fs = self.build(def, &def.body.0.iter().collect::<Vec<_>>())?;
    let args = fs
      .follow("ARGS")
      .ok_or_else(|| def_error(def, "phrasal rule needs ARGS"))?;
    let items = fs
      .list_items(args, &self.hierarchy)
      .map_err(|e| def_error(def, format!("ARGS: {e}")))?;
    let arity = items.len();
    if !(1..=2).contains(&arity) {
      return Err(def_error(def, format!("rules take 1 or 2 daughters, not {arity}")));
    }
    let head_index = match Self::annotation_arg(def, "head")? {
      None => 0,
      Some(h) => h
        .parse::<usize>()
        .ok()
        .filter(|&i| i < arity)
        .ok_or_else(|| def_error(def, format!("bad head index `{h}`")))?,
    };
    Ok(PhrasalRule {
      id: def.name.clone(),
      arity,
      daughters: items.iter().map(|&n| fs.substructure(n)).collect(),
      mother: fs.without("ARGS"),
      fs,
      head_index,
      learner: def.annotation("learner").is_some(),
    })
  }

  /// Entries whose surface form is `surface`.
  pub fn entries_for(&self, surface: &str) -> impl Iterator<Item = &LexicalEntry> {
    self
      .by_surface
      .get(surface)
      .into_iter()
      .flatten()
      .map(|&i| &self.entries[i])
  }

  pub fn entry(&self, id: &str) -> Option<&LexicalEntry> {
    self.entries.iter().find(|e| e.id == id)
  }

  pub fn lexical_rule(&self, id: &str) -> Option<&LexicalRule> {
    self.lexical_rules.iter().find(|r| r.id == id)
  }

  pub fn phrasal_rule(&self, id: &str) -> Option<&PhrasalRule> {
    self.phrasal_rules.iter().find(|r| r.id == id)
  }

  pub fn constraint(&self, ty: &str) -> Option<&FeatureStructure> {
    self.hierarchy.lookup(ty).map(|t| &self.constraints[t.index()])
  }

  pub fn learner_rule_count(&self) -> usize {
    self.lexical_rules.iter().filter(|r| r.learner).count()
      + self.phrasal_rules.iter().filter(|r| r.learner).count()
  }

  /// Recomputes effective constraints from the local ones. Idempotent.
  pub fn expand_constraints(&self) -> Result<Grammar, GrammarError> {
    let pos: HashMap<String, Pos> = self.source_order.iter().cloned().collect();
    let constraints = expand(&self.hierarchy, &self.local_constraints, &pos)?;
    let mut g = self.clone();
    g.constraints = constraints;
    g.filter = OnceLock::new();
    Ok(g)
  }

  /// Serializes the grammar back to the description language. Reloading the
  /// output yields canonically identical structures.
  pub fn to_source(&self) -> String {
    write::grammar_source(self)
  }

  /// Names of all types in declaration order (excluding the top type).
  pub fn declared_types(&self) -> impl Iterator<Item = &str> {
    self.source_order.iter().map(|(n, _)| n.as_str())
  }
}
