//! Service configuration: one TOML file plus environment overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

pub const CONFIG_ENV: &str = "COACH_CONFIG";
pub const LISTEN_ENV: &str = "COACH_LISTEN";

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
  /// grammar file, or a bundled grammar name; loaded in strict and learner mode
  pub grammar: String,
  pub supertag_model: Option<PathBuf>,
  /// default top-k for the supertag filter when a model is loaded
  pub supertag_k: Option<usize>,
  pub listen: String,
  pub reading_cap: usize,
  /// origin allowed by CORS; `*` allows any
  pub cors_origin: Option<String>,
}

impl Default for Config {
  fn default() -> Self {
    Config {
      grammar: "toy".into(),
      supertag_model: None,
      supertag_k: None,
      listen: "127.0.0.1:8080".into(),
      reading_cap: 64,
      cors_origin: None,
    }
  }
}

impl Config {
  pub fn from_toml(text: &str) -> Result<Config> {
    let c: Config = toml::from_str(text)?;
    c.validate()?;
    Ok(c)
  }

  /// Reads the file given on the command line, else the one named by
  /// `COACH_CONFIG`, else uses defaults; `COACH_LISTEN` overrides the listen
  /// address. Relative model paths resolve against the config file.
  pub fn resolve(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Config> {
    let path = path.map(Path::to_path_buf).or_else(|| env(CONFIG_ENV).map(PathBuf::from));
    let mut config = match &path {
      Some(p) => {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
        let mut c = Config::from_toml(&text).with_context(|| format!("invalid config {}", p.display()))?;
        let base = p.parent().unwrap_or(Path::new(""));
        if let Some(m) = &c.supertag_model {
          c.supertag_model = Some(base.join(m));
        }
        if c.grammar != "toy" && c.grammar != "toy-underconstrained" {
          c.grammar = base.join(&c.grammar).to_string_lossy().into_owned();
        }
        c
      }
      None => Config::default(),
    };
    if let Some(listen) = env(LISTEN_ENV) {
      config.listen = listen;
    }
    Ok(config)
  }

  fn validate(&self) -> Result<()> {
    if self.reading_cap == 0 {
      bail!("reading_cap must be positive");
    }
    if self.supertag_k == Some(0) {
      bail!("supertag_k must be positive");
    }
    if self.supertag_k.is_some() && self.supertag_model.is_none() {
      bail!("supertag_k needs a supertag_model");
    }
    Ok(())
  }
}
