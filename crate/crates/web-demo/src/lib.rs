//! Browser bindings for the grammar coach, running the bundled toy grammar
//! entirely client-side. Every export returns a JSON string.
//!
//! ```javascript
//! import init, { coach, analyze, parse } from "./pkg/coach_web_demo.js";
//! await init();
//! const verdict = JSON.parse(coach("mis abuelos son personas famosos"));
//! ```

use coach_core::chart::{parse_sentence, ParseOptions};
use coach_core::coach::coach_sentence;
use coach_core::fixtures::toy;
use coach_core::grammar::Mode;
use coach_core::morph::analyze_token;
use coach_core::semantics::to_dependencies;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Longest sentence the demo accepts, in characters.
pub const MAX_SENTENCE_CHARS: usize = 500;

fn check_length(sentence: &str) -> Result<(), String> {
  let n = sentence.chars().count();
  if n > MAX_SENTENCE_CHARS {
    return Err(format!("sentence has {n} characters; the limit is {MAX_SENTENCE_CHARS}"));
  }
  Ok(())
}

/// Verdict, feedback with character offsets, correction and dependencies,
/// using the same field names as the HTTP service.
pub fn coach_json(sentence: &str) -> Result<Value, String> {
  check_length(sentence)?;
  let v = coach_sentence(sentence, toy(Mode::Learner), toy(Mode::Strict), &ParseOptions::default())
    .map_err(|e| e.to_string())?;
  let feedback: Vec<Value> = v
    .feedback
    .iter()
    .map(|f| {
      json!({
        "category": f.category,
        "start": f.start,
        "end": f.end,
        "surface": f.surface,
        "expected": f.expected,
        "message": f.message,
      })
    })
    .collect();
  let dependencies = v.reading.as_ref().map(|r| to_dependencies(&r.semantics).to_string());
  Ok(json!({
    "sentence": v.sentence,
    "verdict": v.kind.to_string(),
    "feedback": feedback,
    "corrected": v.corrected,
    "dependencies": dependencies,
    "derivation": v.reading.as_ref().map(|r| r.derivation.pretty()),
    "grammar_version": toy(Mode::Learner).version_label,
  }))
}

/// Morphological analyses of one word form.
pub fn analyze_json(token: &str) -> Value {
  let analyses: Vec<Value> = analyze_token(token.trim(), toy(Mode::Learner))
    .iter()
    .map(|a| json!({ "lemma": a.lemma, "tag": a.tag }))
    .collect();
  json!({ "token": token.trim(), "analyses": analyses })
}

/// All readings under one grammar mode, as derivation trees with the learner
/// rules each one uses.
pub fn parse_json(sentence: &str, learner: bool) -> Result<Value, String> {
  check_length(sentence)?;
  let g = toy(if learner { Mode::Learner } else { Mode::Strict });
  let r = parse_sentence(sentence, g, &ParseOptions::default()).map_err(|e| e.to_string())?;
  let readings: Vec<Value> = r
    .readings
    .iter()
    .map(|x| json!({ "derivation": x.derivation.pretty(), "learner_rules": x.learner_uses }))
    .collect();
  Ok(json!({
    "tokens": r.tokens,
    "readings": readings,
    "edges_built": r.stats.edges_built,
    "unification_attempts": r.stats.unification_attempts,
  }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
  r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn coach(sentence: &str) -> Result<String, JsValue> {
  to_js(coach_json(sentence))
}

#[wasm_bindgen]
pub fn analyze(token: &str) -> String {
  analyze_json(token).to_string()
}

#[wasm_bindgen]
pub fn parse(sentence: &str, learner: bool) -> Result<String, JsValue> {
  to_js(parse_json(sentence, learner))
}
