use std::collections::BTreeSet;

use coach_core::chart::{
  apply_rule, build_rule_filter, parse, parse_sentence, ApplyError, Derivation, Edge, ParseError, ParseOptions,
  RuleFilter,
};
use coach_core::fixtures::{toy, toy_underconstrained, AMBIGUITY_SUITE, GRAMMATICAL_SUITE, LEARNER_SUITE};
use coach_core::grammar::{Grammar, Mode, PhrasalRule};
use coach_core::morph::{analyze_token, lexical_edges, tokenize, MAX_CHAIN};
use coach_core::profiler::parse_suite;
use coach_core::tfs::{unify, unify_at, Feat, FsPath};

fn desk_suite() -> Vec<String> {
  [GRAMMATICAL_SUITE, LEARNER_SUITE, AMBIGUITY_SUITE]
    .iter()
    .flat_map(|s| parse_suite(s).unwrap())
    .map(|i| i.sentence)
    .collect()
}

fn tokens(s: &str, g: &Grammar) -> Vec<String> {
  tokenize(s, g).into_iter().map(|t| t.text).collect()
}

fn lexical(s: &str, i: usize, g: &Grammar, pick: &str) -> Edge {
  let a = analyze_token(s, g);
  let les: Vec<_> = a.iter().flat_map(|a| lexical_edges(a, g)).collect();
  let le = les
    .iter()
    .find(|e| e.rules.last().map(String::as_str) == Some(pick))
    .unwrap_or_else(|| panic!("no {pick} edge for {s}"));
  Edge::from_lexical(le, i)
}

/// Oracle rule application through the public unification API: unify each
/// daughter into the rule at its ARGS position, then build the mother.
fn oracle_apply(rule: &PhrasalRule, ds: &[&OracleTree], g: &Grammar) -> Option<coach_core::tfs::FeatureStructure> {
  let h = &g.hierarchy;
  let mut fs = rule.fs.clone();
  for (i, d) in ds.iter().enumerate() {
    let mut path = vec![Feat::new("ARGS")];
    path.extend((0..i).map(|_| Feat::new("REST")));
    path.push(Feat::new("FIRST"));
    fs = unify_at(&fs, &FsPath(path), &d.fs, h).ok()?;
  }
  let d_rels: Vec<_> = (0..ds.len())
    .map(|i| {
      let p = format!("ARGS{}.FIRST.RELS", ".REST".repeat(i));
      fs.follow(&p).unwrap()
    })
    .collect();
  let mut rels = *d_rels.last().unwrap();
  for &xs in d_rels.iter().rev().skip(1) {
    rels = fs.append_lists(xs, rels, h).ok()?;
  }
  let learner = rule.learner || ds.iter().any(|d| !d.learner.is_empty());
  let flag = fs.add_node(h.lookup(if learner { "+" } else { "-" }).unwrap(), None);
  let root = fs.root();
  fs.set_arc(root, &Feat::new("LEARNER"), flag);
  fs.set_arc(root, &Feat::new("RELS"), rels);
  fs.remove_arc(root, "ARGS");
  fs.compact();
  Some(fs)
}

#[derive(Clone)]
struct OracleTree {
  deriv: Derivation,
  fs: coach_core::tfs::FeatureStructure,
  learner: BTreeSet<String>,
  unary: usize,
}

/// Every derivation tree over [i, j), built by trying every split, every rule
/// and every unary chain up to the bound, keeping the trees whose
/// unifications succeed.
fn enumerate(toks: &[String], i: usize, j: usize, g: &Grammar) -> Vec<OracleTree> {
  let mut base = Vec::new();
  if j == i + 1 {
    for a in analyze_token(&toks[i], g) {
      for le in lexical_edges(&a, g) {
        let e = Edge::from_lexical(&le, i);
        base.push(OracleTree {
          deriv: e.derivation(),
          fs: le.fs.clone(),
          learner: le.learner_rules.iter().cloned().collect(),
          unary: 0,
        });
      }
    }
  } else {
    for k in i + 1..j {
      let left = enumerate(toks, i, k, g);
      let right = enumerate(toks, k, j, g);
      for l in &left {
        for r in &right {
          for rule in g.phrasal_rules.iter().filter(|r| r.arity == 2) {
            if let Some(fs) = oracle_apply(rule, &[l, r], g) {
              let mut learner: BTreeSet<String> = l.learner.union(&r.learner).cloned().collect();
              if rule.learner {
                learner.insert(rule.id.clone());
              }
              base.push(OracleTree {
                deriv: Derivation {
                  label: rule.id.clone(),
                  start: i,
                  end: j,
                  surface: None,
                  children: vec![l.deriv.clone(), r.deriv.clone()],
                },
                fs,
                learner,
                unary: 0,
              });
            }
          }
        }
      }
    }
  }
  let mut all = base.clone();
  let mut frontier = base;
  while let Some(t) = frontier.pop() {
    if t.unary >= MAX_CHAIN {
      continue;
    }
    for rule in g.phrasal_rules.iter().filter(|r| r.arity == 1) {
      if let Some(fs) = oracle_apply(rule, &[&t], g) {
        let mut learner = t.learner.clone();
        if rule.learner {
          learner.insert(rule.id.clone());
        }
        let u = OracleTree {
          deriv: Derivation {
            label: rule.id.clone(),
            start: i,
            end: j,
            surface: None,
            children: vec![t.deriv.clone()],
          },
          fs,
          learner,
          unary: t.unary + 1,
        };
        all.push(u.clone());
        frontier.push(u);
      }
    }
  }
  all
}

fn oracle_readings(sentence: &str, g: &Grammar) -> BTreeSet<(String, String)> {
  let toks = tokens(sentence, g);
  enumerate(&toks, 0, toks.len(), g)
    .into_iter()
    .filter(|t| unify(&t.fs, &g.root, &g.hierarchy).is_ok())
    .map(|t| (t.deriv.canonical(), t.fs.canonical(&g.hierarchy)))
    .collect()
}

fn chart_readings(sentence: &str, g: &Grammar, opts: &ParseOptions) -> BTreeSet<(String, String)> {
  let r = parse_sentence(sentence, g, opts).unwrap();
  assert_eq!(r.readings.len(), r.total_readings, "cap must not bite on the desk suite");
  r.readings
    .iter()
    .map(|x| (x.derivation.canonical(), x.edge.fs.canonical(&g.hierarchy)))
    .collect()
}

#[test]
fn chart_matches_exhaustive_enumeration() {
  let grammars = [toy(Mode::Strict), toy(Mode::Learner), toy_underconstrained(Mode::Strict)];
  let mut checked = 0;
  for s in desk_suite() {
    for g in grammars {
      if tokens(&s, g).len() > 7 {
        continue;
      }
      let oracle = oracle_readings(&s, g);
      assert_eq!(chart_readings(&s, g, &ParseOptions::unfiltered()), oracle, "{s} ({})", g.version_label);
      assert_eq!(chart_readings(&s, g, &ParseOptions::default()), oracle, "{s} ({})", g.version_label);
      checked += 1;
    }
  }
  assert!(checked >= 3 * 40);
}

#[test]
fn rule_filter_preserves_readings_and_saves_attempts() {
  for g in [toy(Mode::Strict), toy(Mode::Learner)] {
    let (mut with, mut without) = (0, 0);
    for s in desk_suite() {
      let a = parse_sentence(&s, g, &ParseOptions::default()).unwrap();
      let b = parse_sentence(&s, g, &ParseOptions::unfiltered()).unwrap();
      let da: BTreeSet<String> = a.readings.iter().map(|r| r.derivation.canonical()).collect();
      let db: BTreeSet<String> = b.readings.iter().map(|r| r.derivation.canonical()).collect();
      assert_eq!(da, db, "{s}");
      assert!(a.stats.unification_attempts <= b.stats.unification_attempts, "{s}");
      assert_eq!(a.stats.edges_built, b.stats.edges_built, "{s}");
      with += a.stats.unification_attempts;
      without += b.stats.unification_attempts;
    }
    assert!(with * 10 <= without * 9, "{with} vs {without}");
  }
}

#[test]
fn rule_filter_table_examples() {
  let g = toy(Mode::Strict);
  let f = build_rule_filter(g);
  assert!(!f.allows("head-adj", 1, "det-lex"));
  assert!(f.allows("head-adj", 1, "adj-lex"));
  assert!(f.allows("head-adj", 0, "noun-lex"));
  assert!(f.pruned_pairs() > 0);
  let open = RuleFilter::permissive();
  for r in &g.phrasal_rules {
    for i in 0..r.arity {
      assert!(open.allows(&r.id, i, "det-lex"));
    }
  }
}

#[test]
fn rule_filter_entries_are_sound_for_every_lexical_edge() {
  // a false entry must mean that no edge with that key unifies into the slot
  let g = toy(Mode::Learner);
  let f = build_rule_filter(g);
  for e in &g.entries {
    for a in analyze_token(&e.surface, g) {
      for le in lexical_edges(&a, g) {
        for r in &g.phrasal_rules {
          for (i, d) in r.daughters.iter().enumerate() {
            if unify(d, &le.fs, &g.hierarchy).is_ok() {
              assert!(f.allows(&r.id, i, &le.lex_type), "{} {i} {}", r.id, le.lex_type);
            }
          }
        }
      }
    }
  }
}

#[test]
fn example_sentence_is_covered_only_by_the_learner_grammar() {
  let strict = toy(Mode::Strict);
  let learner = toy(Mode::Learner);
  let good = parse_sentence("mis abuelos son personas famosas", strict, &ParseOptions::default()).unwrap();
  assert!(!good.readings.is_empty());
  assert!(good.readings.iter().all(|r| r.learner_uses.is_empty()));
  let bad = parse_sentence("mis abuelos son personas famosos", strict, &ParseOptions::default()).unwrap();
  assert!(bad.readings.is_empty());
  let relaxed = parse_sentence("mis abuelos son personas famosos", learner, &ParseOptions::default()).unwrap();
  assert!(relaxed.readings.iter().any(|r| r.learner_uses.contains("adj-mp-relax")));
  assert!(relaxed.readings.iter().all(|r| !r.learner_uses.is_empty()));
}

#[test]
fn head_adj_shares_one_png_node() {
  let g = toy(Mode::Strict);
  let rule = g.phrasal_rule("head-adj").unwrap();
  let n = lexical("personas", 0, g, "noun-fp-infl");
  let a = lexical("famosas", 1, g, "adj-fp-infl");
  let e = apply_rule(rule, &[&n, &a], g).unwrap();
  let png = e.fs.follow("PNG").unwrap();
  assert_eq!(e.fs.follow("RELS.FIRST.PNG"), Some(png));
  assert_eq!(e.fs.follow("RELS.REST.FIRST.PNG"), Some(png));
  assert_eq!(e.fs.value_at("PNG.GEN", &g.hierarchy).as_deref(), Some("fem"));
  assert_eq!(e.fs.value_at("PNG.PERNUM", &g.hierarchy).as_deref(), Some("3pl"));
  assert_eq!((e.start, e.end), (0, 2));
  assert!(e.learner_uses.is_empty());
}

#[test]
fn head_adj_with_masculine_adjective_fails_at_png_gen() {
  let g = toy(Mode::Strict);
  let rule = g.phrasal_rule("head-adj").unwrap();
  let n = lexical("personas", 0, g, "noun-fp-infl");
  let a = lexical("famosos", 1, g, "adj-mp-infl");
  match apply_rule(rule, &[&n, &a], g) {
    Err(ApplyError::Unify { daughter: 1, failure }) => {
      assert!(failure.path().ends_with("PNG.GEN"), "{failure}");
    }
    other => panic!("expected a clash, got {other:?}"),
  }
}

#[test]
fn apply_rule_checks_adjacency_and_arity() {
  let g = toy(Mode::Strict);
  let rule = g.phrasal_rule("head-adj").unwrap();
  let n = lexical("personas", 0, g, "noun-fp-infl");
  let a = lexical("famosas", 2, g, "adj-fp-infl");
  assert_eq!(apply_rule(rule, &[&n, &a], g).unwrap_err(), ApplyError::NotAdjacent);
  assert!(matches!(apply_rule(rule, &[&n], g), Err(ApplyError::Arity { expected: 2, got: 1 })));
}

#[test]
fn learner_uses_accumulate_from_daughters() {
  let g = toy(Mode::Learner);
  let rule = g.phrasal_rule("head-adj").unwrap();
  let n = lexical("personas", 0, g, "noun-fp-infl");
  let a = lexical("famosos", 1, g, "adj-mp-relax");
  let e = apply_rule(rule, &[&n, &a], g).unwrap();
  assert_eq!(e.learner_uses.iter().collect::<Vec<_>>(), ["adj-mp-relax"]);
  assert_eq!(e.fs.value_at("LEARNER", &g.hierarchy).as_deref(), Some("+"));
}

#[test]
fn strict_grammar_never_yields_learner_readings() {
  let g = toy(Mode::Strict);
  for s in desk_suite() {
    let r = parse_sentence(&s, g, &ParseOptions::default()).unwrap();
    for x in &r.readings {
      assert!(x.learner_uses.is_empty());
      assert_eq!(x.edge.fs.value_at("LEARNER", &g.hierarchy).as_deref(), Some("-"));
    }
  }
}

fn check_tiling(e: &Edge, n: usize) {
  assert!(e.start < e.end && e.end <= n);
  if e.children.is_empty() {
    assert_eq!(e.end, e.start + 1);
    return;
  }
  assert_eq!(e.children.first().unwrap().start, e.start);
  assert_eq!(e.children.last().unwrap().end, e.end);
  for w in e.children.windows(2) {
    assert_eq!(w[0].end, w[1].start);
  }
  for c in &e.children {
    check_tiling(c, n);
  }
}

#[test]
fn readings_are_well_formed() {
  let g = toy(Mode::Learner);
  for s in desk_suite() {
    let r = parse_sentence(&s, g, &ParseOptions::default()).unwrap();
    assert!(r.stats.unification_failures <= r.stats.unification_attempts);
    for x in &r.readings {
      check_tiling(&x.edge, r.tokens.len());
      assert!(unify(&x.edge.fs, &g.root, &g.hierarchy).is_ok());
      assert_eq!(x.edge.leaves().len(), r.tokens.len());
      x.edge.fs.check_invariants(&g.hierarchy).unwrap();
      assert_eq!(Derivation::parse(&x.derivation.canonical()).unwrap(), x.derivation);
    }
    let keys: Vec<_> = r.readings.iter().map(|x| x.rank_key()).collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
  }
}

#[test]
fn parsing_is_deterministic() {
  let g = toy(Mode::Learner);
  for s in desk_suite() {
    let a = parse_sentence(&s, g, &ParseOptions::default()).unwrap();
    let b = parse_sentence(&s, g, &ParseOptions::default()).unwrap();
    assert_eq!(a.canonical(&g.hierarchy), b.canonical(&g.hierarchy));
  }
}

#[test]
fn reading_cap_truncates_but_reports_the_total() {
  let g = toy(Mode::Learner);
  let opts = ParseOptions {
    reading_cap: 1,
    ..Default::default()
  };
  let full = parse_sentence("mis abuelos ven personas famosos", g, &ParseOptions::default()).unwrap();
  let capped = parse_sentence("mis abuelos ven personas famosos", g, &opts).unwrap();
  assert!(full.readings.len() > 1);
  assert_eq!(capped.readings.len(), 1);
  assert_eq!(capped.total_readings, full.readings.len());
  assert_eq!(capped.readings[0].derivation, full.readings[0].derivation);
}

#[test]
fn unknown_words_leave_gaps() {
  let g = toy(Mode::Strict);
  let r = parse_sentence("los xyzzy duermen", g, &ParseOptions::default()).unwrap();
  assert!(r.readings.is_empty());
  assert_eq!(r.stats.gap_positions, vec![1]);
}

#[test]
fn empty_and_overlong_inputs_are_rejected() {
  let g = toy(Mode::Strict);
  assert_eq!(parse(&[], g, &ParseOptions::default()).unwrap_err(), ParseError::Empty);
  let long: Vec<String> = std::iter::repeat_n("gato".to_string(), 31).collect();
  assert!(matches!(
    parse(&long, g, &ParseOptions::default()),
    Err(ParseError::TooLong { len: 31, max: 30 })
  ));
}

#[test]
fn derivation_text_forms() {
  let d = Derivation::parse(r#"(head-adj 3 5 (noun-fp-infl 3 4 (personas 3 4 "personas")) (adj-fp-infl 4 5 (famosas 4 5 "famosas")))"#)
    .unwrap();
  assert_eq!(d.node_count(), 5);
  assert_eq!(
    d.pretty(),
    "head-adj [3,5)\n  noun-fp-infl [3,4)\n    personas [3,4) \"personas\"\n  adj-fp-infl [4,5)\n    famosas [4,5) \"famosas\"\n"
  );
  assert!(Derivation::parse("(a 0 1").is_err());
  assert!(Derivation::parse("(a x 1)").is_err());
}
