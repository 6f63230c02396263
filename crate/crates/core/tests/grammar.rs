use coach_core::fixtures::{toy, TOY_GRAMMAR, TOY_UNDERCONSTRAINED};
use coach_core::grammar::{load_grammar, GrammarError, Mode};
use coach_core::tfs::{unify, FeatureStructure, FsPath, HierarchyError};

/// Smallest grammar the loader accepts, with room for extra type lines.
fn mini(types: &str) -> String {
  format!(
    ":grammar mini\n:types\n\
     bool := *top*.\n+ := bool.\n- := bool.\nstring := *top*.\n\
     list := *top*.\ncons := list & [ FIRST *top*, REST list ].\nnull := list.\n\
     sign := *top* & [ LEARNER bool, RELS list ].\n{types}\n\
     :root\nroot := sign.\n"
  )
}

#[test]
fn strict_toy_grammar_has_no_learner_rules() {
  let g = toy(Mode::Strict);
  assert_eq!(g.learner_rule_count(), 0);
  assert!(g.lexical_rules.iter().all(|r| !r.learner));
  assert!(g.phrasal_rules.iter().all(|r| !r.learner));
}

#[test]
fn learner_toy_grammar_has_eight_gender_relaxations() {
  let g = toy(Mode::Learner);
  let learner: Vec<&str> = g
    .lexical_rules
    .iter()
    .filter(|r| r.learner)
    .map(|r| r.id.as_str())
    .collect();
  assert_eq!(learner.len(), 8);
  for cat in ["noun", "adj"] {
    for gn in ["ms", "fs", "mp", "fp"] {
      assert!(learner.contains(&format!("{cat}-{gn}-relax").as_str()), "{cat}-{gn}-relax");
    }
  }
}

#[test]
fn learner_rules_set_learner_plus_and_name_feedback() {
  let g = toy(Mode::Learner);
  for r in g.lexical_rules.iter().filter(|r| r.learner) {
    assert_eq!(r.output.value_at("LEARNER", &g.hierarchy).as_deref(), Some("+"), "{}", r.id);
    let key = r.feedback_key.as_deref().expect("learner rule has feedback");
    assert!(g.feedback_templates.contains_key(key));
  }
}

#[test]
fn strict_rules_are_the_learner_rules_minus_the_flagged_ones() {
  let strict = toy(Mode::Strict);
  let learner = toy(Mode::Learner);
  let ids = |g: &coach_core::grammar::Grammar| -> Vec<String> {
    g.lexical_rules
      .iter()
      .map(|r| r.id.clone())
      .chain(g.phrasal_rules.iter().map(|r| r.id.clone()))
      .collect()
  };
  let unflagged: Vec<String> = learner
    .lexical_rules
    .iter()
    .filter(|r| !r.learner)
    .map(|r| r.id.clone())
    .chain(learner.phrasal_rules.iter().filter(|r| !r.learner).map(|r| r.id.clone()))
    .collect();
  assert_eq!(ids(strict), unflagged);
  assert!(ids(strict).iter().all(|id| ids(learner).contains(id)));
}

#[test]
fn version_label_records_mode_and_content_hash() {
  let s = &toy(Mode::Strict).version_label;
  let l = &toy(Mode::Learner).version_label;
  assert!(s.starts_with("toy-es/strict@"), "{s}");
  assert!(l.starts_with("toy-es/learner@"), "{l}");
  assert_eq!(s.split('@').nth(1), l.split('@').nth(1));
  let u = load_grammar(TOY_UNDERCONSTRAINED, Mode::Strict).unwrap();
  assert_ne!(s.split('@').nth(1), u.version_label.split('@').nth(1));
}

#[test]
fn lexicon_links_paradigms_and_validates_tags() {
  let g = toy(Mode::Strict);
  let famosos: Vec<_> = g.entries_for("famosos").collect();
  assert_eq!(famosos.len(), 1);
  let paradigm: Vec<&str> = g
    .entries
    .iter()
    .filter(|e| e.paradigm_key == famosos[0].paradigm_key)
    .map(|e| e.surface.as_str())
    .collect();
  assert_eq!(paradigm.len(), 4);
  for form in ["famoso", "famosa", "famosos", "famosas"] {
    assert!(paradigm.contains(&form));
  }
  let personas = g.entries_for("personas").next().unwrap();
  assert_eq!((personas.lemma.as_str(), personas.predicate.as_str()), ("persona", "_persona_n"));
  for e in &g.entries {
    assert!(coach_core::grammar::tag_pattern().is_match(&e.tag), "{}", e.tag);
  }
}

#[test]
fn ambiguous_glb_names_both_subtypes() {
  let src = mini("a := *top*.\nb := *top*.\nc := a & b.\nd := a & b.");
  match load_grammar(&src, Mode::Strict) {
    Err(GrammarError::Hierarchy {
      error: HierarchyError::AmbiguousGlb { candidates, .. },
      ..
    }) => {
      assert!(candidates.contains(&"c".to_string()) && candidates.contains(&"d".to_string()));
    }
    other => panic!("expected an ambiguous GLB, got {other:?}"),
  }
}

#[test]
fn conflicting_inherited_gender_fails_at_png_gen() {
  let src = mini(
    "gender := *top*.\nmasc := gender.\nfem := gender.\npng := *top* & [ GEN gender ].\n\
     parent := sign & [ PNG.GEN fem ].\nchild := parent & [ PNG.GEN masc ].",
  );
  let err = load_grammar(&src, Mode::Strict).unwrap_err();
  assert_eq!(err.kind(), "constraint");
  assert_eq!(err.failing_path(), Some(&FsPath::parse("PNG.GEN")));
  assert!(err.to_string().contains("child"), "{err}");
}

#[test]
fn syntax_errors_report_line_and_column() {
  let src = mini("broken := *top* & [ F ");
  let err = load_grammar(&src, Mode::Strict).unwrap_err();
  assert_eq!(err.kind(), "syntax");
  assert!(err.location().contains(':'), "{}", err.location());
}

#[test]
fn expansion_adds_parent_constraints() {
  let src = mini(
    "gender := *top*.\nmasc := gender.\nfem := gender.\npng := *top* & [ GEN gender ].\n\
     adj := sign & [ MOD < [ ] >, PNG png ].\nadj-fem-pl := adj & [ PNG.GEN fem ].\nplain := adj.",
  );
  let g = load_grammar(&src, Mode::Strict).unwrap();
  let h = &g.hierarchy;
  let fem_pl = g.constraint("adj-fem-pl").unwrap();
  // manual expansion: parent constraint unified with the local one, plus the
  // constraints of the types introduced along the way
  let manual = coach_core::tfs::parse_fs(
    "adj-fem-pl & [ LEARNER bool, RELS list, MOD cons & [ FIRST *top*, REST null ], PNG png & [ GEN fem ] ]",
    h,
  )
  .unwrap();
  let paths = |fs: &FeatureStructure| -> Vec<(String, String)> {
    fs.paths()
      .into_iter()
      .map(|(p, n)| (p.to_string(), h.name(fs.node_type(n)).to_string()))
      .collect()
  };
  assert_eq!(paths(fem_pl), paths(&manual));
  let plain = g.constraint("plain").unwrap();
  let adj = g.constraint("adj").unwrap();
  assert_eq!(
    plain.canonical(h).replace("plain", "adj"),
    adj.canonical(h),
    "a type without a local constraint inherits its parent's"
  );
}

#[test]
fn expansion_is_idempotent() {
  let g = toy(Mode::Learner);
  let once = g.expand_constraints().unwrap();
  let twice = once.expand_constraints().unwrap();
  for t in g.hierarchy.types() {
    assert_eq!(
      g.constraints[t.index()].canonical(&g.hierarchy),
      twice.constraints[t.index()].canonical(&g.hierarchy)
    );
  }
}

#[test]
fn every_effective_constraint_is_satisfiable_and_below_its_parents() {
  let g = toy(Mode::Learner);
  let h = &g.hierarchy;
  for t in h.types() {
    let c = &g.constraints[t.index()];
    c.check_invariants(h).unwrap();
    for &p in h.parents(t) {
      let pc = &g.constraints[p.index()];
      let joined = unify(c, pc, h).expect("a type's constraint unifies with its parent's");
      assert!(joined.isomorphic(c, h), "{} is not more specific than {}", h.name(t), h.name(p));
    }
  }
}

#[test]
fn grammar_round_trips_through_its_source_form() {
  for mode in [Mode::Strict, Mode::Learner] {
    let g = toy(mode);
    let reloaded = load_grammar(&g.to_source(), mode).unwrap();
    let h = &g.hierarchy;
    assert_eq!(g.hierarchy.len(), reloaded.hierarchy.len());
    for t in h.types() {
      assert_eq!(
        g.constraints[t.index()].canonical(h),
        reloaded.constraints[t.index()].canonical(&reloaded.hierarchy)
      );
    }
    for (a, b) in g.entries.iter().zip(&reloaded.entries) {
      assert_eq!((&a.id, &a.tag, &a.paradigm_key), (&b.id, &b.tag, &b.paradigm_key));
      assert_eq!(a.fs.canonical(h), b.fs.canonical(h));
    }
    for (a, b) in g.lexical_rules.iter().zip(&reloaded.lexical_rules) {
      assert_eq!(a.fs.canonical(h), b.fs.canonical(h));
      assert_eq!((a.learner, &a.feedback_key, &a.trigger_tag), (b.learner, &b.feedback_key, &b.trigger_tag));
    }
    for (a, b) in g.phrasal_rules.iter().zip(&reloaded.phrasal_rules) {
      assert_eq!(a.fs.canonical(h), b.fs.canonical(h));
      assert_eq!(a.head_index, b.head_index);
    }
    assert_eq!(g.root.canonical(h), reloaded.root.canonical(h));
    assert_eq!(g.feedback_templates, reloaded.feedback_templates);
    assert_eq!(g.to_source(), reloaded.to_source());
  }
}

#[test]
fn underconstrained_variant_differs_only_in_noun_adjective_agreement() {
  let a: Vec<&str> = TOY_GRAMMAR.lines().collect();
  let b: Vec<&str> = TOY_UNDERCONSTRAINED.lines().collect();
  assert_eq!(a.len(), b.len());
  let diffs: Vec<(&str, &str)> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, y)| (*x, *y)).collect();
  assert_eq!(diffs.len(), 2, "{diffs:?}");
  assert!(diffs[0].0.starts_with(":grammar"));
  assert_eq!(diffs[1].0.replace("PNG #png, ", ""), diffs[1].1);
}

#[test]
fn unknown_feedback_key_is_rejected() {
  let src = TOY_GRAMMAR.replace("%feedback adj-gender", "%feedback no-such-template");
  let err = load_grammar(&src, Mode::Learner).unwrap_err();
  assert_eq!(err.kind(), "definition");
  assert!(err.to_string().contains("no-such-template"), "{err}");
}

#[test]
fn unknown_template_placeholder_is_rejected() {
  let src = TOY_GRAMMAR.replace("use \\\"{expected}\\\".\".\nadj-gender", "use \\\"{wanted}\\\".\".\nadj-gender");
  assert_ne!(src, TOY_GRAMMAR);
  let err = load_grammar(&src, Mode::Learner).unwrap_err();
  assert!(err.to_string().contains("wanted"), "{err}");
}
