//! The coaching layer: strict-then-learner parsing, reading selection,
//! learner-rule detection, feedback rendering and correction synthesis.

use serde::Serialize;
use thiserror::Error;

use crate::chart::{self, Edge, Origin, ParseError, ParseOptions, ParseResult, ParseStats, Reading};
use crate::grammar::Grammar;
use crate::morph::{self, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
  Grammatical,
  Learner,
  NoParse,
}

impl std::fmt::Display for VerdictKind {
  fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    f.write_str(match self {
      VerdictKind::Grammatical => "grammatical",
      VerdictKind::Learner => "learner",
      VerdictKind::NoParse => "no_parse",
    })
  }
}

/// One learner rule in a derivation and the token span it applied to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LearnerUse {
  pub rule: String,
  pub start: usize,
  pub end: usize,
  /// whether the rule is a lexical relaxation (as opposed to a phrasal rule)
  pub lexical: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeedbackItem {
  pub category: String,
  pub rule: String,
  /// token indices
  pub token_span: (usize, usize),
  /// character offsets into the sentence
  pub start: usize,
  pub end: usize,
  pub surface: String,
  /// the paradigm form that would agree; absent when the paradigm lacks it
  pub expected: Option<String>,
  pub message: String,
}

#[derive(Clone, Debug)]
pub struct Verdict {
  pub kind: VerdictKind,
  pub sentence: String,
  pub tokens: Vec<Token>,
  pub reading: Option<Reading>,
  pub feedback: Vec<FeedbackItem>,
  pub corrected: Option<String>,
  /// why a correction or expected form is missing, if it is
  pub diagnostics: Vec<String>,
  pub strict_stats: ParseStats,
  pub learner_stats: Option<ParseStats>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoachError {
  #[error("input error: {0}")]
  Input(String),
  #[error("internal error: {0}")]
  Internal(String),
}

impl From<ParseError> for CoachError {
  fn from(e: ParseError) -> Self {
    match e {
      ParseError::Empty | ParseError::TooLong { .. } => CoachError::Input(e.to_string()),
      ParseError::Semantics(_) => CoachError::Internal(e.to_string()),
    }
  }
}

/// The reading with fewest learner rules, then fewest derivation nodes, then
/// the smallest canonical derivation.
pub fn select_reading(result: &ParseResult) -> Option<&Reading> {
  result.readings.iter().min_by_key(|r| r.rank_key())
}

fn collect_uses(e: &Edge, g: &Grammar, out: &mut Vec<LearnerUse>) {
  match &e.origin {
    Origin::Lexical { rules, .. } => {
      for r in rules {
        if g.lexical_rule(r).is_some_and(|lr| lr.learner) {
          out.push(LearnerUse {
            rule: r.clone(),
            start: e.start,
            end: e.end,
            lexical: true,
          });
        }
      }
    }
    Origin::Rule(r) => {
      if g.phrasal_rule(r).is_some_and(|pr| pr.learner) {
        out.push(LearnerUse {
          rule: r.clone(),
          start: e.start,
          end: e.end,
          lexical: false,
        });
      }
      for c in &e.children {
        collect_uses(c, g, out);
      }
    }
  }
}

/// The learner rules in the reading's derivation with their spans. Fails if
/// the root LEARNER value or the recorded rule set disagrees with the tree.
pub fn detect_learner(reading: &Reading, g: &Grammar) -> Result<Vec<LearnerUse>, CoachError> {
  let mut uses = Vec::new();
  collect_uses(&reading.edge, g, &mut uses);
  uses.sort();
  let flag = reading.edge.fs.value_at("LEARNER", &g.hierarchy);
  let expected_flag = if uses.is_empty() { "-" } else { "+" };
  if flag.as_deref() != Some(expected_flag) {
    return Err(CoachError::Internal(format!(
      "LEARNER is {} but the derivation has {} learner rule(s)",
      flag.unwrap_or_else(|| "unset".into()),
      uses.len()
    )));
  }
  let names: std::collections::BTreeSet<String> = uses.iter().map(|u| u.rule.clone()).collect();
  if names != reading.learner_uses {
    return Err(CoachError::Internal(format!(
      "recorded learner rules {:?} differ from the derivation's {:?}",
      reading.learner_uses, names
    )));
  }
  Ok(uses)
}

/// The replacement surface form for a relaxed lexical edge: the paradigm
/// member with the gender the relaxation assigned.
fn replacement(leaf: &Edge, g: &Grammar) -> Result<String, String> {
  let Origin::Lexical { entry, surface, .. } = &leaf.origin else {
    return Err("not a lexical edge".into());
  };
  let gender = leaf
    .fs
    .value_at("PNG.GEN", &g.hierarchy)
    .ok_or_else(|| format!("\"{surface}\" has no gender value"))?;
  let letter = morph::gender_letter(&gender).ok_or_else(|| format!("\"{surface}\" has unspecific gender {gender}"))?;
  let entry = g
    .entry(entry)
    .ok_or_else(|| format!("unknown entry {entry}"))?;
  morph::paradigm_form(g, entry, letter)
    .map(|e| e.surface.clone())
    .ok_or_else(|| format!("the paradigm of \"{surface}\" has no {gender} form"))
}

/// Keeps the capitalization of the first letter of `original`.
fn match_case(original: &str, form: &str) -> String {
  if original.chars().next().is_some_and(char::is_uppercase) {
    let mut c = form.chars();
    match c.next() {
      Some(f) => f.to_uppercase().chain(c).collect(),
      None => String::new(),
    }
  } else {
    form.to_string()
  }
}

fn substitute(sentence: &str, tokens: &[Token], repl: &[(usize, String)]) -> String {
  let chars: Vec<char> = sentence.chars().collect();
  let mut out = String::new();
  let mut pos = 0;
  let mut repl: Vec<&(usize, String)> = repl.iter().collect();
  repl.sort();
  for (i, form) in repl {
    let t = &tokens[*i];
    out.extend(&chars[pos..t.start]);
    out.push_str(&match_case(&t.surface, form));
    pos = t.end;
  }
  out.extend(&chars[pos..]);
  out
}

/// Substitutes each relaxed token with its agreeing paradigm form and keeps
/// the result only if the strict grammar covers it. Diagnostics explain an
/// absent correction.
pub fn suggest_correction(
  sentence: &str,
  reading: &Reading,
  learner: &Grammar,
  strict: &Grammar,
  opts: &ParseOptions,
) -> Result<(Option<String>, Vec<String>), CoachError> {
  let uses = detect_learner(reading, learner)?;
  if uses.is_empty() {
    return Err(CoachError::Input("reading uses no learner rules".into()));
  }
  let tokens = morph::tokenize(sentence, learner);
  let leaves = reading.edge.leaves();
  let mut diagnostics = Vec::new();
  let mut repl = Vec::new();
  for u in uses {
    if !u.lexical {
      diagnostics.push(format!("no correction strategy for construction {}", u.rule));
      continue;
    }
    match replacement(leaves[u.start], learner) {
      Ok(form) => repl.push((u.start, form)),
      Err(d) => diagnostics.push(d),
    }
  }
  if !diagnostics.is_empty() {
    return Ok((None, diagnostics));
  }
  let corrected = substitute(sentence, &tokens, &repl);
  let check = chart::parse_sentence(&corrected, strict, opts)?;
  if check.readings.is_empty() {
    diagnostics.push(format!("\"{corrected}\" is not covered by the strict grammar"));
    return Ok((None, diagnostics));
  }
  Ok((Some(corrected), diagnostics))
}

/// Index of the leaf the token at `i` agrees with: the leaf whose predication
/// is linked to token `i`'s predication by a role, in either direction.
/// Leaves and predications correspond one-to-one and in order.
fn agreement_partner(reading: &Reading, i: usize) -> Option<usize> {
  let rels = &reading.semantics.rels;
  let own = rels.get(i)?;
  let owner_of = |var: &str| rels.iter().position(|r| r.intrinsic_var == var);
  if let Some(j) = own.args.values().find_map(|v| owner_of(v).filter(|&j| j != i)) {
    return Some(j);
  }
  rels
    .iter()
    .enumerate()
    .find(|(j, r)| *j != i && r.args.values().any(|v| *v == own.intrinsic_var))
    .map(|(j, _)| j)
}

fn feedback_for(
  u: &LearnerUse,
  reading: &Reading,
  tokens: &[Token],
  g: &Grammar,
  diagnostics: &mut Vec<String>,
) -> FeedbackItem {
  let leaves = reading.edge.leaves();
  let span_chars = (tokens[u.start].start, tokens[u.end - 1].end);
  let surface: String = tokens[u.start..u.end]
    .iter()
    .map(|t| t.surface.as_str())
    .collect::<Vec<_>>()
    .join(" ");
  let template = g
    .lexical_rule(&u.rule)
    .and_then(|r| r.feedback_key.as_ref())
    .and_then(|k| g.feedback_templates.get(k));
  let expected = if u.lexical {
    match replacement(leaves[u.start], g) {
      Ok(f) => Some(match_case(&tokens[u.start].surface, &f)),
      Err(d) => {
        diagnostics.push(d);
        None
      }
    }
  } else {
    None
  };
  let head = agreement_partner(reading, u.start)
    .and_then(|j| tokens.get(j))
    .map(|t| t.surface.clone())
    .unwrap_or_default();
  let (category, message) = match template {
    Some(t) => (
      t.category.clone(),
      t.render(&surface, expected.as_deref().unwrap_or("a form that agrees"), &head),
    ),
    None => (
      "learner-construction".to_string(),
      format!("\"{surface}\" is analysed by the learner construction {}", u.rule),
    ),
  };
  FeedbackItem {
    category,
    rule: u.rule.clone(),
    token_span: (u.start, u.end),
    start: span_chars.0,
    end: span_chars.1,
    surface,
    expected,
    message,
  }
}

/// Parses with the strict grammar; if that fails, with the learner grammar,
/// producing feedback and a correction for the selected reading.
pub fn coach_sentence(
  sentence: &str,
  learner: &Grammar,
  strict: &Grammar,
  opts: &ParseOptions,
) -> Result<Verdict, CoachError> {
  let tokens = morph::tokenize(sentence, strict);
  if tokens.is_empty() {
    return Err(CoachError::Input("the sentence has no words".into()));
  }
  let strict_result = chart::parse_sentence(sentence, strict, opts)?;
  let mut verdict = Verdict {
    kind: VerdictKind::NoParse,
    sentence: sentence.to_string(),
    tokens,
    reading: None,
    feedback: Vec::new(),
    corrected: None,
    diagnostics: Vec::new(),
    strict_stats: strict_result.stats.clone(),
    learner_stats: None,
  };
  if let Some(r) = select_reading(&strict_result) {
    verdict.kind = VerdictKind::Grammatical;
    verdict.reading = Some(r.clone());
    return Ok(verdict);
  }
  let learner_result = chart::parse_sentence(sentence, learner, opts)?;
  verdict.learner_stats = Some(learner_result.stats.clone());
  let Some(reading) = select_reading(&learner_result) else {
    return Ok(verdict);
  };
  let uses = detect_learner(reading, learner)?;
  if uses.is_empty() {
    // covered by the learner grammar without learner rules: only possible if
    // the two grammars differ in more than their learner rules
    return Err(CoachError::Internal(
      "learner grammar covers a sentence the strict grammar rejects without learner rules".into(),
    ));
  }
  let mut diagnostics = Vec::new();
  verdict.feedback = uses
    .iter()
    .map(|u| feedback_for(u, reading, &verdict.tokens, learner, &mut diagnostics))
    .collect();
  verdict.feedback.sort_by_key(|f| f.token_span);
  let (corrected, more) = suggest_correction(sentence, reading, learner, strict, opts)?;
  diagnostics.extend(more);
  diagnostics.dedup();
  verdict.kind = VerdictKind::Learner;
  verdict.reading = Some(reading.clone());
  verdict.corrected = corrected;
  verdict.diagnostics = diagnostics;
  Ok(verdict)
}
