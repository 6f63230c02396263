//! Table-driven morphology: tokenization, (lemma, tag) analysis from the
//! lexicon, and tag-triggered lexical rules that turn entries into lexical
//! structures — including the learner gender relaxations.

use serde::Serialize;

use crate::grammar::{Grammar, LexicalEntry, LexicalRule};
use crate::tfs::{unify, FeatureStructure, TypeHierarchy, UnifyFailure};

/// Longest lexical rule chain applied to one entry.
pub const MAX_CHAIN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisSource {
  Lexicon,
  Guesser,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MorphAnalysis {
  pub token: String,
  pub lemma: String,
  pub tag: String,
  pub source: AnalysisSource,
}

/// A token with its character offsets into the original sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Token {
  /// normalized form used for lookup
  pub text: String,
  /// form as written
  pub surface: String,
  pub start: usize,
  pub end: usize,
}

/// Splits on whitespace, strips surrounding punctuation, and lowercases tokens
/// the lexicon knows in lowercase; unknown tokens pass through unchanged.
pub fn tokenize(sentence: &str, g: &Grammar) -> Vec<Token> {
  let chars: Vec<char> = sentence.chars().collect();
  let mut out = Vec::new();
  let mut i = 0;
  while i < chars.len() {
    if chars[i].is_whitespace() {
      i += 1;
      continue;
    }
    let mut j = i;
    while j < chars.len() && !chars[j].is_whitespace() {
      j += 1;
    }
    let (mut s, mut e) = (i, j);
    while s < e && !chars[s].is_alphanumeric() {
      s += 1;
    }
    while e > s && !chars[e - 1].is_alphanumeric() {
      e -= 1;
    }
    if s < e {
      let surface: String = chars[s..e].iter().collect();
      let lower = surface.to_lowercase();
      let text = if g.entries_for(&lower).next().is_some() {
        lower
      } else {
        surface.clone()
      };
      out.push(Token {
        text,
        surface,
        start: s,
        end: e,
      });
    }
    i = j;
  }
  out
}

/// All analyses of `token` licensed by the lexicon, sorted and deduplicated.
pub fn analyze_token(token: &str, g: &Grammar) -> Vec<MorphAnalysis> {
  let mut out: Vec<MorphAnalysis> = g
    .entries_for(token)
    .map(|e| MorphAnalysis {
      token: token.to_string(),
      lemma: e.lemma.clone(),
      tag: e.tag.clone(),
      source: AnalysisSource::Lexicon,
    })
    .collect();
  out.sort_by(|a, b| (&a.lemma, &a.tag).cmp(&(&b.lemma, &b.tag)));
  out.dedup();
  out
}

/// A lexical structure: an entry after a chain of lexical rules.
#[derive(Clone, Debug)]
pub struct LexicalEdge {
  pub entry: String,
  pub lex_type: String,
  pub surface: String,
  /// lexical rules in order of application
  pub rules: Vec<String>,
  pub learner_rules: Vec<String>,
  pub fs: FeatureStructure,
}

impl LexicalEdge {
  /// Lexical type plus rule chain, e.g. `adj-lex+adj-mp-infl`.
  pub fn signature(&self) -> String {
    signature(&self.lex_type, &self.rules)
  }
}

pub fn signature(lex_type: &str, rules: &[String]) -> String {
  let mut s = lex_type.to_string();
  for r in rules {
    s.push('+');
    s.push_str(r);
  }
  s
}

/// Monotonic rule application: the input must satisfy the rule's input
/// description and the result additionally satisfies its output description.
pub fn apply_lexical_rule(
  fs: &FeatureStructure,
  rule: &LexicalRule,
  h: &TypeHierarchy,
) -> Result<FeatureStructure, UnifyFailure> {
  let checked = unify(fs, &rule.input, h)?;
  unify(&checked, &rule.output, h)
}

/// Lexical structures for one analysis. When some rule is triggered by the
/// tag, every chain starts with such a rule; untriggered rules may follow, up
/// to [`MAX_CHAIN`] rules in total.
pub fn lexical_edges(analysis: &MorphAnalysis, g: &Grammar) -> Vec<LexicalEdge> {
  let h = &g.hierarchy;
  let triggered: Vec<&LexicalRule> = g
    .lexical_rules
    .iter()
    .filter(|r| r.trigger_tag.as_deref() == Some(analysis.tag.as_str()))
    .collect();
  let untriggered: Vec<&LexicalRule> =
    g.lexical_rules.iter().filter(|r| r.trigger_tag.is_none()).collect();

  let mut out = Vec::new();
  for entry in g
    .entries_for(&analysis.token)
    .filter(|e| e.lemma == analysis.lemma && e.tag == analysis.tag)
  {
    let base = LexicalEdge {
      entry: entry.id.clone(),
      lex_type: entry.lex_type.clone(),
      surface: entry.surface.clone(),
      rules: Vec::new(),
      learner_rules: Vec::new(),
      fs: entry.fs.clone(),
    };
    let mut frontier = Vec::new();
    if triggered.is_empty() {
      frontier.push(base);
    } else {
      for r in &triggered {
        if let Some(e) = extend(&base, r, h) {
          frontier.push(e);
        }
      }
    }
    while let Some(edge) = frontier.pop() {
      if edge.rules.len() < MAX_CHAIN {
        for r in &untriggered {
          if let Some(e) = extend(&edge, r, h) {
            frontier.push(e);
          }
        }
      }
      out.push(edge);
    }
  }
  out.sort_by_key(|e| (e.entry.clone(), e.rules.clone()));
  out
}

fn extend(edge: &LexicalEdge, rule: &LexicalRule, h: &TypeHierarchy) -> Option<LexicalEdge> {
  let fs = apply_lexical_rule(&edge.fs, rule, h).ok()?;
  let mut next = edge.clone();
  next.fs = fs;
  next.rules.push(rule.id.clone());
  if rule.learner {
    next.learner_rules.push(rule.id.clone());
  }
  Some(next)
}

/// Grammatical features encoded in a tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TagInfo {
  /// N, A, D or V
  pub category: char,
  /// M, F or C (common), when the category inflects for gender
  pub gender: Option<char>,
  /// S or P
  pub number: Option<char>,
}

pub fn tag_info(tag: &str) -> Option<TagInfo> {
  let c: Vec<char> = tag.chars().collect();
  let (category, g, n) = match c.first()? {
    'N' => ('N', 2, 3),
    'A' => ('A', 3, 4),
    'D' => ('D', 3, 4),
    'V' => ('V', usize::MAX, 5),
    _ => return None,
  };
  Some(TagInfo {
    category,
    gender: c.get(g).copied(),
    number: c.get(n).copied(),
  })
}

/// Gender letter for a gender type name.
pub fn gender_letter(gender_type: &str) -> Option<char> {
  match gender_type {
    "masc" => Some('M'),
    "fem" => Some('F'),
    _ => None,
  }
}

/// The member of `entry`'s paradigm with the same category and number and the
/// given gender letter.
pub fn paradigm_form<'g>(g: &'g Grammar, entry: &LexicalEntry, gender: char) -> Option<&'g LexicalEntry> {
  let info = tag_info(&entry.tag)?;
  g.entries.iter().find(|e| {
    e.paradigm_key == entry.paradigm_key
      && tag_info(&e.tag).is_some_and(|t| {
        t.category == info.category && t.number == info.number && t.gender == Some(gender)
      })
  })
}
