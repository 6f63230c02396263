//! The `coach` subcommands. Exit codes: 0 success, 1 domain failure, 2 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use coach_core::chart::{parse_sentence, ParseOptions, SupertagFilter};
use coach_core::coach::coach_sentence;
use coach_core::grammar::Mode;
use coach_core::morph::analyze_token;
use coach_core::profiler::{compare_profiles, parse_suite, run_profile, Profile};
use coach_core::semantics::to_dependencies;
use coach_core::supertag::{parse_treebank, train};
use serde_json::json;

use crate::config::Config;
use crate::{load_grammar_arg, load_model, try_load_grammar};

#[derive(Debug, Parser)]
#[command(name = "coach", version, about = "Spanish grammar coaching with a unification grammar")]
pub struct Cli {
  #[command(subcommand)]
  pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
  /// Load a grammar in both modes and report errors as JSON lines
  Validate {
    /// grammar file, or `toy`
    grammar: String,
  },
  /// Print the morphological analyses of a token
  Analyze {
    token: String,
    #[arg(long, default_value = "toy")]
    grammar: String,
  },
  /// Parse a sentence and print its readings
  Parse(ParseArgs),
  /// Coach a sentence: verdict, feedback and correction
  Check {
    #[arg(long, default_value = "toy")]
    grammar: String,
    #[command(flatten)]
    supertag: SupertagArgs,
    sentence: String,
  },
  /// Run a test suite and write a profile
  Profile {
    #[arg(long)]
    grammar: String,
    #[arg(long, default_value = "learner")]
    mode: Mode,
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_rule_filter: bool,
    #[command(flatten)]
    supertag: SupertagArgs,
  },
  /// Compare two profiles; exits 1 if any verdict regressed
  Compare { a: PathBuf, b: PathBuf },
  /// Train a supertag model from a treebank
  TrainSupertagger {
    #[arg(long)]
    treebank: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "toy")]
    grammar: String,
  },
  /// Run the HTTP service
  Serve {
    /// TOML config; defaults to $COACH_CONFIG
    #[arg(long)]
    config: Option<PathBuf>,
  },
}

#[derive(Debug, Args)]
pub struct SupertagArgs {
  /// supertag model file
  #[arg(long)]
  pub supertag_model: Option<PathBuf>,
  /// keep the top-k signatures per token (default 1 with a model)
  #[arg(long = "supertag", requires = "supertag_model", value_parser = clap::value_parser!(u64).range(1..))]
  pub k: Option<u64>,
}

impl SupertagArgs {
  fn filter(&self) -> Result<Option<SupertagFilter>> {
    let Some(path) = &self.supertag_model else {
      return Ok(None);
    };
    Ok(Some(SupertagFilter {
      ranker: Arc::new(load_model(path)?),
      k: self.k.unwrap_or(1) as usize,
    }))
  }
}

#[derive(Debug, Args)]
pub struct ParseArgs {
  #[arg(long, default_value = "toy")]
  pub grammar: String,
  #[arg(long, default_value = "learner")]
  pub mode: Mode,
  #[arg(long)]
  pub no_rule_filter: bool,
  #[command(flatten)]
  pub supertag: SupertagArgs,
  /// print each reading's feature structure
  #[arg(long)]
  pub dump_fs: bool,
  /// print each reading's derivation as an indented tree
  #[arg(long)]
  pub dump_deriv: bool,
  /// print each reading's semantic dependencies
  #[arg(long)]
  pub dump_deps: bool,
  /// print parser statistics as a JSON object
  #[arg(long)]
  pub stats: bool,
  pub sentence: String,
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
  I: IntoIterator<Item = T>,
  T: Into<OsString> + Clone,
{
  let cli = match Cli::try_parse_from(args) {
    Ok(c) => c,
    Err(e) => {
      let code = if e.use_stderr() { 2 } else { 0 };
      let text = e.render().to_string();
      let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
      return code;
    }
  };
  match execute(cli.command, out, err) {
    Ok(code) => code,
    Err(e) => {
      let _ = writeln!(err, "error: {e:#}");
      1
    }
  }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
  match cmd {
    Command::Validate { grammar } => validate(&grammar, out),
    Command::Analyze { token, grammar } => {
      let g = load_grammar_arg(&grammar, Mode::Strict)?;
      let analyses = analyze_token(&token, &g);
      if analyses.is_empty() {
        writeln!(err, "no analysis for {token}")?;
        return Ok(1);
      }
      for a in analyses {
        writeln!(out, "{token}\t{}\t{}", a.lemma, a.tag)?;
      }
      Ok(0)
    }
    Command::Parse(args) => parse(&args, out),
    Command::Check {
      grammar,
      supertag,
      sentence,
    } => check(&grammar, &supertag, &sentence, out),
    Command::Profile {
      grammar,
      mode,
      suite,
      out: path,
      no_rule_filter,
      supertag,
    } => {
      let g = load_grammar_arg(&grammar, mode)?;
      let text = std::fs::read_to_string(&suite).with_context(|| format!("cannot read suite {}", suite.display()))?;
      let items = parse_suite(&text)?;
      let opts = ParseOptions {
        rule_filter: !no_rule_filter,
        supertag: supertag.filter()?,
        ..Default::default()
      };
      let p = run_profile(&items, &g, &opts)?;
      std::fs::write(&path, p.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
      let a = &p.aggregates;
      writeln!(
        out,
        "{}: {} items, coverage {:.2}%, overgeneration {:.2}%, mean readings {:.2}, edges {}, attempts {} -> {}",
        p.version_label,
        a.items,
        a.coverage,
        a.overgeneration,
        a.mean_readings,
        a.edges_built,
        a.unification_attempts,
        path.display()
      )?;
      Ok(0)
    }
    Command::Compare { a, b } => {
      let read = |p: &PathBuf| -> Result<Profile> {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read profile {}", p.display()))?;
        Profile::from_json(&text).map_err(anyhow::Error::msg).with_context(|| format!("invalid profile {}", p.display()))
      };
      let c = compare_profiles(&read(&a)?, &read(&b)?)?;
      write!(out, "{}", c.render_table())?;
      Ok(if c.regressions.is_empty() { 0 } else { 1 })
    }
    Command::TrainSupertagger { treebank, out: path, grammar } => {
      let g = load_grammar_arg(&grammar, Mode::Learner)?;
      let text =
        std::fs::read_to_string(&treebank).with_context(|| format!("cannot read treebank {}", treebank.display()))?;
      let items = parse_treebank(&text)?;
      let m = train(&items, &g)?;
      std::fs::write(&path, m.serialize()).with_context(|| format!("cannot write {}", path.display()))?;
      writeln!(
        out,
        "trained on {} items, {} word forms; model {} -> {}",
        items.len(),
        m.vocabulary.len(),
        m.hash(),
        path.display()
      )?;
      Ok(0)
    }
    Command::Serve { config } => {
      let c = Config::resolve(config.as_deref(), |k| std::env::var(k).ok())?;
      let rt = tokio::runtime::Runtime::new()?;
      rt.block_on(crate::service::serve(c))?;
      Ok(0)
    }
  }
}

fn validate(grammar: &str, out: &mut dyn Write) -> Result<i32> {
  let mut failed = false;
  for mode in [Mode::Strict, Mode::Learner] {
    match try_load_grammar(grammar, mode)? {
      Ok(g) => writeln!(
        out,
        "{}",
        json!({
          "ok": true,
          "grammar": g.version_label,
          "types": g.hierarchy.len(),
          "lexical_entries": g.entries.len(),
          "lexical_rules": g.lexical_rules.len(),
          "phrasal_rules": g.phrasal_rules.len(),
        })
      )?,
      Err(e) => {
        writeln!(
          out,
          "{}",
          json!({ "kind": e.kind(), "location": e.location(), "detail": e.detail(), "mode": mode.to_string() })
        )?;
        failed = true;
        // the same source fails the same way in the other mode
        break;
      }
    }
  }
  Ok(if failed { 1 } else { 0 })
}

fn parse(args: &ParseArgs, out: &mut dyn Write) -> Result<i32> {
  let g = load_grammar_arg(&args.grammar, args.mode)?;
  let opts = ParseOptions {
    rule_filter: !args.no_rule_filter,
    supertag: args.supertag.filter()?,
    ..Default::default()
  };
  let r = parse_sentence(&args.sentence, &g, &opts)?;
  writeln!(out, "{} reading(s) of {} token(s)", r.total_readings, r.tokens.len())?;
  if !r.stats.gap_positions.is_empty() {
    let words: Vec<&str> = r.stats.gap_positions.iter().map(|&i| r.tokens[i].as_str()).collect();
    writeln!(out, "unknown word(s): {}", words.join(", "))?;
  }
  for (i, reading) in r.readings.iter().enumerate() {
    let learner: Vec<&str> = reading.learner_uses.iter().map(String::as_str).collect();
    let tag = if learner.is_empty() {
      String::new()
    } else {
      format!(" learner: {}", learner.join(" "))
    };
    writeln!(out, "reading {}{tag}", i + 1)?;
    if args.dump_deriv {
      write!(out, "{}", reading.derivation.pretty())?;
    } else {
      writeln!(out, "{}", reading.derivation)?;
    }
    if args.dump_fs {
      write!(out, "{}", reading.edge.fs.canonical(&g.hierarchy))?;
    }
    if args.dump_deps {
      write!(out, "{}", to_dependencies(&reading.semantics))?;
    }
  }
  if args.stats {
    let mut stats = serde_json::to_value(&r.stats)?;
    stats["readings"] = json!(r.total_readings);
    writeln!(out, "{stats}")?;
  }
  Ok(0)
}

fn check(grammar: &str, supertag: &SupertagArgs, sentence: &str, out: &mut dyn Write) -> Result<i32> {
  let strict = load_grammar_arg(grammar, Mode::Strict)?;
  let learner = load_grammar_arg(grammar, Mode::Learner)?;
  let opts = ParseOptions {
    supertag: supertag.filter()?,
    ..Default::default()
  };
  let v = match coach_sentence(sentence, &learner, &strict, &opts) {
    Ok(v) => v,
    Err(e) => bail!(e),
  };
  writeln!(out, "verdict: {}", v.kind)?;
  for f in &v.feedback {
    let expected = f.expected.as_deref().unwrap_or("?");
    writeln!(
      out,
      "[{}] {}-{} \"{}\" → \"{expected}\": {}",
      f.category, f.start, f.end, f.surface, f.message
    )?;
  }
  if let Some(c) = &v.corrected {
    writeln!(out, "corrected: {c}")?;
  }
  for d in &v.diagnostics {
    writeln!(out, "note: {d}")?;
  }
  Ok(0)
}
