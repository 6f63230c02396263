//! Count-based supertagger over lexical signatures (lexical type plus rule
//! chain), trained on treebank derivations, used to prune lexical edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chart::{licensed_signatures, token_edges, Derivation, SignatureRanker};
use crate::grammar::Grammar;
use crate::morph;

pub const MODEL_HEADER: &str = "coach-supertag-model v1";
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Context symbol before the first token.
pub const START: &str = "<s>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SupertagError {
  #[error("line {line}: {detail}")]
  Format { line: usize, detail: String },
  #[error("item {item}: derivation references unknown rule or entry {label}")]
  UnknownLabel { item: String, label: String },
  #[error("item {item}: {detail}")]
  Invalid { item: String, detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreebankItem {
  pub id: String,
  pub sentence: String,
  pub derivation: Derivation,
}

/// Reads `id TAB sentence TAB derivation` lines; blank lines and `#`
/// comments are skipped.
pub fn parse_treebank(text: &str) -> Result<Vec<TreebankItem>, SupertagError> {
  let mut out = Vec::new();
  for (i, line) in text.lines().enumerate() {
    let line_no = i + 1;
    if line.trim().is_empty() || line.starts_with('#') {
      continue;
    }
    let fields: Vec<&str> = line.splitn(3, '\t').collect();
    if fields.len() != 3 {
      return Err(SupertagError::Format {
        line: line_no,
        detail: "expected id, sentence and derivation separated by tabs".into(),
      });
    }
    let derivation = Derivation::parse(fields[2]).map_err(|detail| SupertagError::Format { line: line_no, detail })?;
    out.push(TreebankItem {
      id: fields[0].to_string(),
      sentence: fields[1].to_string(),
      derivation,
    });
  }
  Ok(out)
}

pub fn write_treebank(items: &[TreebankItem]) -> String {
  items
    .iter()
    .map(|t| format!("{}\t{}\t{}\n", t.id, t.sentence, t.derivation.canonical()))
    .collect()
}

/// `(surface, signature)` for each leaf of a derivation, left to right.
/// Every label must name a phrasal rule, a lexical rule or an entry.
pub fn leaf_signatures(item: &str, d: &Derivation, g: &Grammar) -> Result<Vec<(String, String)>, SupertagError> {
  let unknown = |label: &str| SupertagError::UnknownLabel {
    item: item.to_string(),
    label: label.to_string(),
  };
  if d.surface.is_some() {
    let entry = g.entry(&d.label).ok_or_else(|| unknown(&d.label))?;
    return Ok(vec![(entry.surface.clone(), entry.lex_type.clone())]);
  }
  if g.lexical_rule(&d.label).is_some() {
    let [inner] = d.children.as_slice() else {
      return Err(SupertagError::Invalid {
        item: item.into(),
        detail: format!("lexical rule {} must have one daughter", d.label),
      });
    };
    let mut leaves = leaf_signatures(item, inner, g)?;
    if leaves.len() != 1 {
      return Err(SupertagError::Invalid {
        item: item.into(),
        detail: format!("lexical rule {} spans a phrase", d.label),
      });
    }
    let (surface, sig) = leaves.pop().unwrap();
    return Ok(vec![(surface, format!("{sig}+{}", d.label))]);
  }
  if g.phrasal_rule(&d.label).is_some() {
    let mut out = Vec::new();
    for c in &d.children {
      out.extend(leaf_signatures(item, c, g)?);
    }
    return Ok(out);
  }
  Err(unknown(&d.label))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupertagModel {
  pub alpha: f64,
  /// surface → signature → count
  pub unigram: BTreeMap<String, BTreeMap<String, u64>>,
  /// previous signature → signature → count
  pub bigram: BTreeMap<String, BTreeMap<String, u64>>,
  pub vocabulary: BTreeSet<String>,
}

impl Default for SupertagModel {
  fn default() -> Self {
    SupertagModel {
      alpha: DEFAULT_ALPHA,
      unigram: BTreeMap::new(),
      bigram: BTreeMap::new(),
      vocabulary: BTreeSet::new(),
    }
  }
}

/// Counts the gold leaf signatures of each derivation. Leaf surfaces must
/// match the item's tokens.
pub fn train(treebank: &[TreebankItem], g: &Grammar) -> Result<SupertagModel, SupertagError> {
  let mut m = SupertagModel::default();
  for item in treebank {
    let leaves = leaf_signatures(&item.id, &item.derivation, g)?;
    let tokens: Vec<String> = morph::tokenize(&item.sentence, g).into_iter().map(|t| t.text).collect();
    let surfaces: Vec<&String> = leaves.iter().map(|(s, _)| s).collect();
    if tokens.iter().collect::<Vec<_>>() != surfaces {
      return Err(SupertagError::Invalid {
        item: item.id.clone(),
        detail: format!("derivation leaves {surfaces:?} do not match tokens {tokens:?}"),
      });
    }
    let mut prev = START.to_string();
    for (surface, sig) in leaves {
      *m.unigram.entry(surface.clone()).or_default().entry(sig.clone()).or_default() += 1;
      *m.bigram.entry(prev).or_default().entry(sig.clone()).or_default() += 1;
      m.vocabulary.insert(surface);
      prev = sig;
    }
  }
  Ok(m)
}

impl SupertagModel {
  fn smoothed(&self, counts: Option<&BTreeMap<String, u64>>, sig: &str, candidates: &[String]) -> f64 {
    let get = |s: &str| counts.and_then(|c| c.get(s)).copied().unwrap_or(0) as f64;
    let total: f64 = candidates.iter().map(|s| get(s)).sum();
    (get(sig) + self.alpha) / (total + self.alpha * candidates.len() as f64)
  }

  /// Smoothed P(signature | token) over the token's licensed signatures.
  pub fn unigram_prob(&self, token: &str, sig: &str, licensed: &[String]) -> f64 {
    self.smoothed(self.unigram.get(token), sig, licensed)
  }

  /// Smoothed P(signature | previous signature) over the licensed signatures.
  pub fn context_prob(&self, prev: &str, sig: &str, licensed: &[String]) -> f64 {
    self.smoothed(self.bigram.get(prev), sig, licensed)
  }

  /// Greedy left to right: each token's signatures are scored by unigram ×
  /// context given the previous token's best signature. Out-of-vocabulary
  /// tokens get the uniform ranking. Ties break by signature.
  pub fn rank_licensed(&self, tokens: &[String], licensed: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut prev = START.to_string();
    let mut out = Vec::with_capacity(tokens.len());
    for (t, lic) in tokens.iter().zip(licensed) {
      let mut lic = lic.clone();
      lic.sort();
      lic.dedup();
      if self.vocabulary.contains(t) {
        let mut scored: Vec<(f64, String)> = lic
          .iter()
          .map(|s| (self.unigram_prob(t, s, &lic) * self.context_prob(&prev, s, &lic), s.clone()))
          .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        lic = scored.into_iter().map(|(_, s)| s).collect();
      }
      if let Some(best) = lic.first() {
        prev = best.clone();
      }
      out.push(lic);
    }
    out
  }

  /// Ranked signatures for each token, over the signatures `g` licenses.
  pub fn predict(&self, tokens: &[String], g: &Grammar) -> Vec<Vec<String>> {
    self.rank_licensed(tokens, &licensed_signatures(&token_edges(tokens, g)))
  }

  /// Header line, then sorted tab-separated `U` (unigram) and `B` (context)
  /// count records.
  pub fn serialize(&self) -> String {
    let mut s = format!("{MODEL_HEADER} alpha={}\n", self.alpha);
    for (t, sigs) in &self.unigram {
      for (sig, c) in sigs {
        writeln!(s, "U\t{t}\t{sig}\t{c}").unwrap();
      }
    }
    for (p, sigs) in &self.bigram {
      for (sig, c) in sigs {
        writeln!(s, "B\t{p}\t{sig}\t{c}").unwrap();
      }
    }
    s
  }

  pub fn deserialize(text: &str) -> Result<SupertagModel, SupertagError> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, detail: &str| SupertagError::Format {
      line,
      detail: detail.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty model file"))?;
    let alpha = header
      .strip_prefix(MODEL_HEADER)
      .and_then(|rest| rest.trim().strip_prefix("alpha="))
      .and_then(|a| a.parse::<f64>().ok())
      .filter(|a| *a > 0.0)
      .ok_or_else(|| bad(1, &format!("expected header `{MODEL_HEADER} alpha=<positive number>`")))?;
    let mut m = SupertagModel {
      alpha,
      ..Default::default()
    };
    for (i, line) in lines {
      if line.is_empty() {
        continue;
      }
      let f: Vec<&str> = line.split('\t').collect();
      let [kind, key, sig, count] = f.as_slice() else {
        return Err(bad(i + 1, "expected 4 tab-separated fields"));
      };
      let count: u64 = count.parse().map_err(|_| bad(i + 1, "count is not a non-negative integer"))?;
      let table = match *kind {
        "U" => {
          m.vocabulary.insert(key.to_string());
          &mut m.unigram
        }
        "B" => &mut m.bigram,
        _ => return Err(bad(i + 1, "record kind must be U or B")),
      };
      table.entry(key.to_string()).or_default().insert(sig.to_string(), count);
    }
    Ok(m)
  }

  /// SHA-256 of the serialization, hex.
  pub fn hash(&self) -> String {
    Sha256::digest(self.serialize().as_bytes())
      .iter()
      .map(|b| format!("{b:02x}"))
      .collect()
  }
}

impl SignatureRanker for SupertagModel {
  fn rank(&self, tokens: &[String], licensed: &[Vec<String>]) -> Vec<Vec<String>> {
    self.rank_licensed(tokens, licensed)
  }
}

/// Puts a known gold signature first for each token; the rest keep their
/// sorted order.
#[derive(Clone, Debug)]
pub struct OracleRanker {
  pub gold: Vec<String>,
}

impl OracleRanker {
  pub fn from_derivation(d: &Derivation, g: &Grammar) -> Result<Self, SupertagError> {
    Ok(OracleRanker {
      gold: leaf_signatures("oracle", d, g)?.into_iter().map(|(_, s)| s).collect(),
    })
  }
}

impl SignatureRanker for OracleRanker {
  fn rank(&self, _tokens: &[String], licensed: &[Vec<String>]) -> Vec<Vec<String>> {
    licensed
      .iter()
      .enumerate()
      .map(|(i, lic)| {
        let mut lic = lic.clone();
        lic.sort();
        if let Some(pos) = self.gold.get(i).and_then(|g| lic.iter().position(|s| s == g)) {
          let g = lic.remove(pos);
          lic.insert(0, g);
        }
        lic
      })
      .collect()
  }
}
