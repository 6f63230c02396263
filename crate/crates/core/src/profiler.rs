//! Test-suite profiling: per-item coverage, ambiguity and cost records with
//! aggregates, stored as JSON and compared across grammar versions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{self, ParseOptions};
use crate::grammar::Grammar;

pub const PROFILE_SCHEMA: &str = "coach-profile/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
  Grammatical,
  Ungrammatical,
  Learner,
}

impl FromStr for Expected {
  type Err = String;
  fn from_str(s: &str) -> Result<Self, String> {
    match s {
      "grammatical" => Ok(Expected::Grammatical),
      "ungrammatical" => Ok(Expected::Ungrammatical),
      "learner" => Ok(Expected::Learner),
      _ => Err(format!("unknown expectation `{s}`")),
    }
  }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
  pub id: String,
  pub sentence: String,
  pub expected: Expected,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
  #[error("suite line {line}: {detail}")]
  Suite { line: usize, detail: String },
  #[error("the suite is empty")]
  EmptySuite,
  #[error("profiles cover different items: only in the first {only_a:?}, only in the second {only_b:?}")]
  SuiteMismatch { only_a: Vec<String>, only_b: Vec<String> },
  #[error("unsupported profile schema {0}")]
  Schema(String),
}

/// Reads `id TAB expected TAB sentence` lines. A `*` before the sentence
/// marks it ungrammatical; the expectation column may then say
/// `ungrammatical` or `learner`, or be `-`.
pub fn parse_suite(text: &str) -> Result<Vec<TestItem>, ProfileError> {
  let mut items = Vec::new();
  let mut seen = BTreeSet::new();
  for (i, line) in text.lines().enumerate() {
    let line_no = i + 1;
    let err = |detail: String| ProfileError::Suite { line: line_no, detail };
    if line.trim().is_empty() || line.starts_with('#') {
      continue;
    }
    let f: Vec<&str> = line.splitn(3, '\t').collect();
    let [id, expected, sentence] = f.as_slice() else {
      return Err(err("expected id, expectation and sentence separated by tabs".into()));
    };
    let (starred, sentence) = match sentence.strip_prefix('*') {
      Some(s) => (true, s.trim()),
      None => (false, sentence.trim()),
    };
    if sentence.is_empty() {
      return Err(err("empty sentence".into()));
    }
    let expected = match (*expected, starred) {
      ("-", true) => Expected::Ungrammatical,
      ("-", false) => Expected::Grammatical,
      (e, _) => e.parse().map_err(err)?,
    };
    if starred && expected == Expected::Grammatical {
      return Err(err("a starred sentence cannot be expected grammatical".into()));
    }
    if !seen.insert(id.to_string()) {
      return Err(err(format!("duplicate id {id}")));
    }
    items.push(TestItem {
      id: id.to_string(),
      sentence: sentence.to_string(),
      expected,
    });
  }
  Ok(items)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemVerdict {
  /// covered without learner rules
  Grammatical,
  /// covered only with learner rules
  Learner,
  NoParse,
  Error,
}

impl ItemVerdict {
  pub fn as_str(self) -> &'static str {
    match self {
      ItemVerdict::Grammatical => "grammatical",
      ItemVerdict::Learner => "learner",
      ItemVerdict::NoParse => "no_parse",
      ItemVerdict::Error => "error",
    }
  }

  /// Whether this verdict is what the suite annotation asks for.
  pub fn meets(self, expected: Expected) -> bool {
    match expected {
      Expected::Grammatical => self == ItemVerdict::Grammatical,
      Expected::Learner => self == ItemVerdict::Learner,
      Expected::Ungrammatical => matches!(self, ItemVerdict::Learner | ItemVerdict::NoParse),
    }
  }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
  pub id: String,
  pub sentence: String,
  pub expected: Expected,
  pub verdict: ItemVerdict,
  /// readings found, before any cap
  pub readings: usize,
  pub edges_built: usize,
  pub unification_attempts: usize,
  pub unification_failures: usize,
  pub wall_time_ms: f64,
  #[serde(default, skip_serializing_if = "Option::is_none")]
  pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
  pub items: usize,
  pub covered: usize,
  /// covered items over all items, in percent
  pub coverage: f64,
  /// items not expected grammatical that received a grammatical verdict,
  /// over items not expected grammatical, in percent
  pub overgeneration: f64,
  /// mean readings over covered items
  pub mean_readings: f64,
  pub edges_built: usize,
  pub unification_attempts: usize,
}

impl Aggregates {
  pub fn from_records(records: &[ItemRecord]) -> Aggregates {
    let covered: Vec<&ItemRecord> = records.iter().filter(|r| r.readings > 0).collect();
    let not_grammatical: Vec<&ItemRecord> =
      records.iter().filter(|r| r.expected != Expected::Grammatical).collect();
    let overgenerated = not_grammatical
      .iter()
      .filter(|r| r.verdict == ItemVerdict::Grammatical)
      .count();
    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    Aggregates {
      items: records.len(),
      covered: covered.len(),
      coverage: pct(covered.len(), records.len()),
      overgeneration: pct(overgenerated, not_grammatical.len()),
      mean_readings: if covered.is_empty() {
        0.0
      } else {
        covered.iter().map(|r| r.readings).sum::<usize>() as f64 / covered.len() as f64
      },
      edges_built: records.iter().map(|r| r.edges_built).sum(),
      unification_attempts: records.iter().map(|r| r.unification_attempts).sum(),
    }
  }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings {
  pub rule_filter: bool,
  pub reading_cap: usize,
  pub supertag_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
  pub schema: String,
  pub version_label: String,
  pub settings: ProfileSettings,
  pub records: Vec<ItemRecord>,
  pub aggregates: Aggregates,
}

fn profile_item(item: &TestItem, g: &Grammar, opts: &ParseOptions) -> ItemRecord {
  let mut rec = ItemRecord {
    id: item.id.clone(),
    sentence: item.sentence.clone(),
    expected: item.expected,
    verdict: ItemVerdict::Error,
    readings: 0,
    edges_built: 0,
    unification_attempts: 0,
    unification_failures: 0,
    wall_time_ms: 0.0,
    error: None,
  };
  match chart::parse_sentence(&item.sentence, g, opts) {
    Ok(r) => {
      rec.verdict = match r.readings.iter().map(|x| x.learner_uses.len()).min() {
        None => ItemVerdict::NoParse,
        Some(0) => ItemVerdict::Grammatical,
        Some(_) => ItemVerdict::Learner,
      };
      rec.readings = r.total_readings;
      rec.edges_built = r.stats.edges_built;
      rec.unification_attempts = r.stats.unification_attempts;
      rec.unification_failures = r.stats.unification_failures;
      rec.wall_time_ms = r.stats.wall_time.as_secs_f64() * 1000.0;
    }
    Err(e) => rec.error = Some(e.to_string()),
  }
  rec
}

/// Parses every item (concurrently) and assembles records ordered by id.
pub fn run_profile(suite: &[TestItem], g: &Grammar, opts: &ParseOptions) -> Result<Profile, ProfileError> {
  if suite.is_empty() {
    return Err(ProfileError::EmptySuite);
  }
  let mut records: Vec<ItemRecord> = suite.par_iter().map(|item| profile_item(item, g, opts)).collect();
  records.sort_by(|a, b| a.id.cmp(&b.id));
  let aggregates = Aggregates::from_records(&records);
  Ok(Profile {
    schema: PROFILE_SCHEMA.to_string(),
    version_label: g.version_label.clone(),
    settings: ProfileSettings {
      rule_filter: opts.rule_filter,
      reading_cap: opts.reading_cap,
      supertag_k: opts.supertag.as_ref().map(|s| s.k),
    },
    records,
    aggregates,
  })
}

impl Profile {
  pub fn to_json(&self) -> String {
    let mut s = serde_json::to_string_pretty(self).expect("profiles serialize");
    s.push('\n');
    s
  }

  pub fn from_json(text: &str) -> Result<Profile, String> {
    let p: Profile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if p.schema != PROFILE_SCHEMA {
      return Err(ProfileError::Schema(p.schema).to_string());
    }
    Ok(p)
  }

  pub fn record(&self, id: &str) -> Option<&ItemRecord> {
    self.records.iter().find(|r| r.id == id)
  }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemDelta {
  pub id: String,
  pub verdict_a: ItemVerdict,
  pub verdict_b: ItemVerdict,
  pub readings: i64,
  pub edges_built: i64,
  pub unification_attempts: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
  pub label_a: String,
  pub label_b: String,
  pub items: Vec<ItemDelta>,
  pub aggregates_a: Aggregates,
  pub aggregates_b: Aggregates,
  /// ids whose verdict differs
  pub changed: Vec<String>,
  /// ids whose verdict met the expectation in the first profile but not in
  /// the second
  pub regressions: Vec<String>,
}

/// Per-item and aggregate differences, second minus first.
pub fn compare_profiles(a: &Profile, b: &Profile) -> Result<Comparison, ProfileError> {
  let ids_a: BTreeSet<&str> = a.records.iter().map(|r| r.id.as_str()).collect();
  let ids_b: BTreeSet<&str> = b.records.iter().map(|r| r.id.as_str()).collect();
  if ids_a != ids_b {
    return Err(ProfileError::SuiteMismatch {
      only_a: ids_a.difference(&ids_b).map(|s| s.to_string()).collect(),
      only_b: ids_b.difference(&ids_a).map(|s| s.to_string()).collect(),
    });
  }
  let by_id: BTreeMap<&str, &ItemRecord> = b.records.iter().map(|r| (r.id.as_str(), r)).collect();
  let mut items = Vec::new();
  let mut changed = Vec::new();
  let mut regressions = Vec::new();
  for ra in &a.records {
    let rb = by_id[ra.id.as_str()];
    let d = |x: usize, y: usize| y as i64 - x as i64;
    if ra.verdict != rb.verdict {
      changed.push(ra.id.clone());
    }
    if ra.verdict.meets(ra.expected) && !rb.verdict.meets(rb.expected) {
      regressions.push(ra.id.clone());
    }
    items.push(ItemDelta {
      id: ra.id.clone(),
      verdict_a: ra.verdict,
      verdict_b: rb.verdict,
      readings: d(ra.readings, rb.readings),
      edges_built: d(ra.edges_built, rb.edges_built),
      unification_attempts: d(ra.unification_attempts, rb.unification_attempts),
    });
  }
  Ok(Comparison {
    label_a: a.version_label.clone(),
    label_b: b.version_label.clone(),
    items,
    aggregates_a: a.aggregates.clone(),
    aggregates_b: b.aggregates.clone(),
    changed,
    regressions,
  })
}

impl Comparison {
  /// Fixed-width delta table: one row per item, then the aggregates.
  pub fn render_table(&self) -> String {
    let mut s = String::new();
    writeln!(s, "a: {}\nb: {}", self.label_a, self.label_b).unwrap();
    writeln!(
      s,
      "{:<12} {:<12} {:<12} {:>9} {:>9} {:>9}",
      "item", "verdict a", "verdict b", "Δreadings", "Δedges", "Δattempts"
    )
    .unwrap();
    for d in &self.items {
      let mark = if self.regressions.contains(&d.id) { " REGRESSION" } else { "" };
      writeln!(
        s,
        "{:<12} {:<12} {:<12} {:>9} {:>9} {:>9}{mark}",
        d.id,
        d.verdict_a.as_str(),
        d.verdict_b.as_str(),
        d.readings,
        d.edges_built,
        d.unification_attempts
      )
      .unwrap();
    }
    let (a, b) = (&self.aggregates_a, &self.aggregates_b);
    writeln!(s, "{:<22} {:>10} {:>10} {:>10}", "aggregate", "a", "b", "b - a").unwrap();
    for (name, x, y) in [
      ("coverage %", a.coverage, b.coverage),
      ("overgeneration %", a.overgeneration, b.overgeneration),
      ("mean readings", a.mean_readings, b.mean_readings),
      ("edges built", a.edges_built as f64, b.edges_built as f64),
      ("unification attempts", a.unification_attempts as f64, b.unification_attempts as f64),
    ] {
      writeln!(s, "{name:<22} {x:>10.2} {y:>10.2} {:>10.2}", y - x).unwrap();
    }
    writeln!(
      s,
      "changed verdicts: {}; regressions: {}",
      self.changed.len(),
      self.regressions.len()
    )
    .unwrap();
    s
  }
}

/// Removes every `wall_time_ms` member from profile JSON, for comparisons
/// that must ignore timing.
pub fn strip_wall_time(json: &str) -> String {
  json
    .lines()
    .filter(|l| !l.trim_start().starts_with("\"wall_time_ms\""))
    .collect::<Vec<_>>()
    .join("\n")
}
