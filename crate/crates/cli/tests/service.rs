use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use coach_cli::service::{router, Artifacts, CoachResponse, GrammarInfo, Health};
use coach_core::fixtures::{toy, TREEBANK};
use coach_core::grammar::Mode;
use coach_core::supertag::{parse_treebank, train};
use serde_json::{json, Value};
use tower::ServiceExt;

fn artifacts() -> Arc<Artifacts> {
  static A: OnceLock<Arc<Artifacts>> = OnceLock::new();
  A.get_or_init(|| {
    let model = train(&parse_treebank(TREEBANK).unwrap(), toy(Mode::Learner)).unwrap();
    Arc::new(Artifacts::new(toy(Mode::Strict).clone(), toy(Mode::Learner).clone(), Some(model)))
  })
  .clone()
}

fn app() -> Router {
  router(artifacts(), Some("http://localhost:5173")).unwrap()
}

async fn send(req: Request<Body>) -> (StatusCode, Value) {
  let resp = app().oneshot(req).await.unwrap();
  let status = resp.status();
  let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
  (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post(body: Value) -> (StatusCode, Value) {
  send(
    Request::post("/v1/coach")
      .header(header::CONTENT_TYPE, "application/json")
      .body(Body::from(body.to_string()))
      .unwrap(),
  )
  .await
}

async fn get(path: &str) -> (StatusCode, Value) {
  send(Request::get(path).body(Body::empty()).unwrap()).await
}

#[tokio::test]
async fn example_sentence_response_uses_the_wire_schema() {
  let (status, v) = post(json!({ "sentence": "mis abuelos son personas famosos" })).await;
  assert_eq!(status, StatusCode::OK);
  let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
  assert_eq!(
    keys,
    [
      "corrected",
      "dependencies",
      "derivation",
      "feedback",
      "grammar_version",
      "sentence",
      "stats",
      "verdict"
    ]
  );
  assert_eq!(v["verdict"], "learner");
  assert_eq!(
    v["feedback"],
    json!([{
      "category": "gender-agreement",
      "start": 25,
      "end": 32,
      "surface": "famosos",
      "expected": "famosas",
      "message": "\"famosos\" must agree in gender with \"personas\"; use \"famosas\"."
    }])
  );
  assert_eq!(v["corrected"], "mis abuelos son personas famosas");
  assert_eq!(v["dependencies"], Value::Null);
  assert_eq!(v["derivation"], Value::Null);
  assert_eq!(v["stats"]["passes"], 2);
  assert_eq!(v["grammar_version"], toy(Mode::Learner).version_label.as_str());
  let parsed: CoachResponse = serde_json::from_value(v).unwrap();
  assert_eq!(parsed.feedback.len(), 1);
}

#[tokio::test]
async fn grammatical_sentence_and_optional_structures() {
  let (status, v) = post(json!({
    "sentence": "mis abuelos son personas famosas",
    "options": { "include_dependencies": true, "include_derivation": true }
  }))
  .await;
  assert_eq!(status, StatusCode::OK);
  assert_eq!(v["verdict"], "grammatical");
  assert_eq!(v["feedback"], json!([]));
  assert_eq!(v["corrected"], Value::Null);
  assert_eq!(v["stats"]["passes"], 1);
  let arcs = v["dependencies"].as_array().unwrap();
  assert_eq!(arcs.len(), 4);
  assert!(arcs.contains(&json!({ "head": "_famoso_a", "role": "ARG1", "dependent": "_persona_n" })));
  assert!(v["derivation"].as_str().unwrap().starts_with("subj-head [0,5)\n"));
}

#[tokio::test]
async fn offsets_refer_to_the_submitted_text() {
  let sentence = "¡Mis abuelos son personas Famosos!";
  let (_, v) = post(json!({ "sentence": sentence })).await;
  let f = &v["feedback"][0];
  let (start, end) = (f["start"].as_u64().unwrap() as usize, f["end"].as_u64().unwrap() as usize);
  let slice: String = sentence.chars().skip(start).take(end - start).collect();
  assert_eq!(slice, "Famosos");
  assert_eq!(v["corrected"], "¡Mis abuelos son personas Famosas!");
}

#[tokio::test]
async fn input_errors_are_client_errors() {
  let (status, v) = post(json!({ "sentence": "" })).await;
  assert_eq!(status, StatusCode::BAD_REQUEST);
  assert_eq!(v["error"], "input");
  let long = "la niña duerme ".repeat(40);
  assert!(long.chars().count() > 500);
  let (status, v) = post(json!({ "sentence": long })).await;
  assert_eq!(status, StatusCode::BAD_REQUEST);
  assert!(v["reason"].as_str().unwrap().contains("500"));
  let (status, _) = post(json!({ "sentence": "la niña duerme", "options": { "supertag_k": 0 } })).await;
  assert_eq!(status, StatusCode::BAD_REQUEST);
  let (status, _) = post(json!({ "text": "la niña duerme" })).await;
  assert!(status.is_client_error());
}

#[tokio::test]
async fn supertag_option_needs_a_model() {
  // the strict pass has one signature per token here, so only the learner
  // pass has anything to prune
  let (status, v) = post(json!({ "sentence": "mis abuelos son personas famosos", "options": { "supertag_k": 1 } })).await;
  assert_eq!(status, StatusCode::OK);
  assert_eq!(v["verdict"], "learner");
  assert_eq!(v["stats"]["passes"], 2);
  assert!(v["stats"]["filter_prunes_supertag"].as_u64().unwrap() > 0);

  let bare = Arc::new(Artifacts::new(toy(Mode::Strict).clone(), toy(Mode::Learner).clone(), None));
  let req = Request::post("/v1/coach")
    .header(header::CONTENT_TYPE, "application/json")
    .body(Body::from(json!({ "sentence": "la niña duerme", "options": { "supertag_k": 1 } }).to_string()))
    .unwrap();
  let resp = router(bare, None).unwrap().oneshot(req).await.unwrap();
  assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn health_and_grammar_info() {
  let (status, v) = get("/v1/health").await;
  assert_eq!(status, StatusCode::OK);
  let h: Health = serde_json::from_value(v).unwrap();
  assert_eq!(h.grammar_version, toy(Mode::Learner).version_label);
  assert_eq!(h.strict_version, toy(Mode::Strict).version_label);
  assert_eq!(h.model_hash, Some(artifacts().model.as_ref().unwrap().hash()));

  let (status, v) = get("/v1/grammar-info").await;
  assert_eq!(status, StatusCode::OK);
  let info: GrammarInfo = serde_json::from_value(v).unwrap();
  let g = toy(Mode::Learner);
  assert_eq!(info.lexical_entries, g.entries.len());
  assert_eq!(info.lexical_rules, g.lexical_rules.len());
  assert_eq!(info.phrasal_rules, g.phrasal_rules.len());
  assert_eq!(info.learner_rules, g.learner_rule_count());
  assert!(info.learner_rules > 0);
}

#[tokio::test]
async fn cors_allows_the_configured_origin() {
  let req = Request::get("/v1/health")
    .header(header::ORIGIN, "http://localhost:5173")
    .body(Body::empty())
    .unwrap();
  let resp = app().oneshot(req).await.unwrap();
  assert_eq!(
    resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).unwrap(),
    "http://localhost:5173"
  );
}

fn without_timing(mut v: Value) -> Value {
  v["stats"].as_object_mut().unwrap().remove("wall_time_ms");
  v
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn identical_requests_give_identical_responses_concurrently() {
  let sentences = [
    "mis abuelos son personas famosos",
    "las abuelos son personas famosos",
    "la niña duerme",
    "los personas famosos llegan",
  ];
  let mut expected = Vec::new();
  for s in sentences {
    let (_, v) = post(json!({ "sentence": s, "options": { "include_dependencies": true } })).await;
    expected.push(without_timing(v));
  }
  let tasks: Vec<_> = (0..32)
    .map(|i| {
      let s = sentences[i % sentences.len()];
      tokio::spawn(async move { (i, post(json!({ "sentence": s, "options": { "include_dependencies": true } })).await) })
    })
    .collect();
  for t in tasks {
    let (i, (status, v)) = t.await.unwrap();
    assert_eq!(status, StatusCode::OK);
    assert_eq!(without_timing(v), expected[i % sentences.len()]);
  }
}
