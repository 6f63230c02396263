//! HTTP service: `POST /v1/coach`, `GET /v1/health`, `GET /v1/grammar-info`.
//!
//! Grammars and the supertag model are loaded once and shared read-only; each
//! request parses in its own context on the blocking pool.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coach_core::chart::{ParseOptions, ParseStats, SupertagFilter};
use coach_core::coach::{coach_sentence, CoachError, Verdict};
use coach_core::grammar::{Grammar, Mode};
use coach_core::semantics::to_dependencies;
use coach_core::supertag::SupertagModel;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::Config;

/// Longest accepted sentence, in characters.
pub const MAX_SENTENCE_CHARS: usize = 500;

/// Everything a request needs, immutable after startup.
pub struct Artifacts {
  pub strict: Grammar,
  pub learner: Grammar,
  pub model: Option<Arc<SupertagModel>>,
  pub model_hash: Option<String>,
  pub default_k: Option<usize>,
  pub reading_cap: usize,
}

impl Artifacts {
  pub fn new(strict: Grammar, learner: Grammar, model: Option<SupertagModel>) -> Artifacts {
    let model_hash = model.as_ref().map(SupertagModel::hash);
    Artifacts {
      strict,
      learner,
      model: model.map(Arc::new),
      model_hash,
      default_k: None,
      reading_cap: ParseOptions::default().reading_cap,
    }
  }

  pub fn from_config(c: &Config) -> Result<Artifacts> {
    let strict = crate::load_grammar_arg(&c.grammar, Mode::Strict)?;
    let learner = crate::load_grammar_arg(&c.grammar, Mode::Learner)?;
    let model = c.supertag_model.as_deref().map(crate::load_model).transpose()?;
    let mut a = Artifacts::new(strict, learner, model);
    a.default_k = c.supertag_k;
    a.reading_cap = c.reading_cap;
    Ok(a)
  }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoachOptions {
  pub supertag_k: Option<usize>,
  pub include_dependencies: bool,
  pub include_derivation: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoachRequest {
  pub sentence: String,
  #[serde(default)]
  pub options: CoachOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireFeedback {
  pub category: String,
  /// character offsets into the submitted sentence
  pub start: usize,
  pub end: usize,
  pub surface: String,
  pub expected: Option<String>,
  pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireArc {
  pub head: String,
  pub role: String,
  pub dependent: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
  /// parser passes run: 1 when the strict grammar sufficed, otherwise 2
  pub passes: usize,
  pub edges_built: usize,
  pub unification_attempts: usize,
  pub filter_prunes_rule: usize,
  pub filter_prunes_supertag: usize,
  pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoachResponse {
  pub sentence: String,
  pub verdict: String,
  pub feedback: Vec<WireFeedback>,
  pub corrected: Option<String>,
  pub dependencies: Option<Vec<WireArc>>,
  pub derivation: Option<String>,
  pub stats: StatsSummary,
  pub grammar_version: String,
}

#[derive(Debug)]
pub enum ServiceError {
  Input(String),
  /// carries the opaque identifier handed to the client
  Internal(String),
}

impl IntoResponse for ServiceError {
  fn into_response(self) -> Response {
    match self {
      ServiceError::Input(reason) => {
        (StatusCode::BAD_REQUEST, Json(serde_json::json!({ "error": "input", "reason": reason }))).into_response()
      }
      ServiceError::Internal(id) => (
        StatusCode::INTERNAL_SERVER_ERROR,
        Json(serde_json::json!({ "error": "internal", "id": id })),
      )
        .into_response(),
    }
  }
}

fn incident(detail: &str) -> ServiceError {
  static COUNTER: AtomicU64 = AtomicU64::new(0);
  let millis = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
  let id = format!("{millis:x}-{:x}", COUNTER.fetch_add(1, Ordering::Relaxed));
  tracing::error!(incident = %id, "{detail}");
  ServiceError::Internal(id)
}

fn summarize(stats: &[&ParseStats]) -> StatsSummary {
  let mut s = StatsSummary {
    passes: stats.len(),
    ..Default::default()
  };
  for st in stats {
    s.edges_built += st.edges_built;
    s.unification_attempts += st.unification_attempts;
    s.filter_prunes_rule += st.filter_prunes_rule;
    s.filter_prunes_supertag += st.filter_prunes_supertag;
    s.wall_time_ms += st.wall_time.as_secs_f64() * 1000.0;
  }
  s
}

fn render(v: &Verdict, req: &CoachRequest, a: &Artifacts) -> CoachResponse {
  let feedback = v
    .feedback
    .iter()
    .map(|f| WireFeedback {
      category: f.category.clone(),
      start: f.start,
      end: f.end,
      surface: f.surface.clone(),
      expected: f.expected.clone(),
      message: f.message.clone(),
    })
    .collect();
  let dependencies = req.options.include_dependencies.then(|| {
    v.reading
      .as_ref()
      .map(|r| {
        let d = to_dependencies(&r.semantics);
        d.arcs
          .iter()
          .map(|arc| WireArc {
            head: d.nodes[arc.head].clone(),
            role: arc.role.clone(),
            dependent: d.nodes[arc.dependent].clone(),
          })
          .collect()
      })
      .unwrap_or_default()
  });
  let derivation = if req.options.include_derivation {
    v.reading.as_ref().map(|r| r.derivation.pretty())
  } else {
    None
  };
  let mut stats = vec![&v.strict_stats];
  stats.extend(v.learner_stats.as_ref());
  CoachResponse {
    sentence: v.sentence.clone(),
    verdict: v.kind.to_string(),
    feedback,
    corrected: v.corrected.clone(),
    dependencies,
    derivation,
    stats: summarize(&stats),
    grammar_version: a.learner.version_label.clone(),
  }
}

/// Coaches one request synchronously.
pub fn handle_coach(a: &Artifacts, req: &CoachRequest) -> Result<CoachResponse, ServiceError> {
  let chars = req.sentence.chars().count();
  if chars > MAX_SENTENCE_CHARS {
    return Err(ServiceError::Input(format!(
      "sentence has {chars} characters; the limit is {MAX_SENTENCE_CHARS}"
    )));
  }
  let supertag = match (req.options.supertag_k.or(a.default_k), &a.model) {
    (None, _) => None,
    (Some(0), _) => return Err(ServiceError::Input("supertag_k must be positive".into())),
    (Some(_), None) => return Err(ServiceError::Input("no supertag model is loaded".into())),
    (Some(k), Some(m)) => Some(SupertagFilter { ranker: m.clone(), k }),
  };
  let opts = ParseOptions {
    reading_cap: a.reading_cap,
    supertag,
    ..Default::default()
  };
  match coach_sentence(&req.sentence, &a.learner, &a.strict, &opts) {
    Ok(v) => Ok(render(&v, req, a)),
    Err(CoachError::Input(reason)) => Err(ServiceError::Input(reason)),
    Err(CoachError::Internal(detail)) => Err(incident(&detail)),
  }
}

async fn coach(State(a): State<Arc<Artifacts>>, Json(req): Json<CoachRequest>) -> Result<Json<CoachResponse>, ServiceError> {
  match tokio::task::spawn_blocking(move || handle_coach(&a, &req)).await {
    Ok(r) => r.map(Json),
    Err(e) => Err(incident(&format!("coach task failed: {e}"))),
  }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
  pub status: String,
  pub grammar_version: String,
  pub strict_version: String,
  pub model_hash: Option<String>,
}

async fn health(State(a): State<Arc<Artifacts>>) -> Json<Health> {
  Json(Health {
    status: "ok".into(),
    grammar_version: a.learner.version_label.clone(),
    strict_version: a.strict.version_label.clone(),
    model_hash: a.model_hash.clone(),
  })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarInfo {
  pub grammar_version: String,
  pub types: usize,
  pub lexical_entries: usize,
  pub lexical_rules: usize,
  pub phrasal_rules: usize,
  pub learner_rules: usize,
  pub feedback_templates: usize,
}

async fn grammar_info(State(a): State<Arc<Artifacts>>) -> Json<GrammarInfo> {
  let g = &a.learner;
  Json(GrammarInfo {
    grammar_version: g.version_label.clone(),
    types: g.hierarchy.len(),
    lexical_entries: g.entries.len(),
    lexical_rules: g.lexical_rules.len(),
    phrasal_rules: g.phrasal_rules.len(),
    learner_rules: g.learner_rule_count(),
    feedback_templates: g.feedback_templates.len(),
  })
}

pub fn router(a: Arc<Artifacts>, cors_origin: Option<&str>) -> Result<Router> {
  let mut app = Router::new()
    .route("/v1/coach", post(coach))
    .route("/v1/health", get(health))
    .route("/v1/grammar-info", get(grammar_info))
    .with_state(a);
  if let Some(origin) = cors_origin {
    let allow = if origin == "*" {
      AllowOrigin::any()
    } else {
      AllowOrigin::exact(HeaderValue::from_str(origin).context("invalid CORS origin")?)
    };
    app = app.layer(
      CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]),
    );
  }
  Ok(app)
}

pub async fn serve(c: Config) -> Result<()> {
  let a = Arc::new(Artifacts::from_config(&c)?);
  tracing::info!(grammar = %a.learner.version_label, model = ?a.model_hash, "artifacts loaded");
  let app = router(a, c.cors_origin.as_deref())?;
  let listener = tokio::net::TcpListener::bind(&c.listen)
    .await
    .with_context(|| format!("cannot listen on {}", c.listen))?;
  tracing::info!("listening on {}", listener.local_addr()?);
  axum::serve(listener, app).await?;
  Ok(())
}
