use std::sync::Arc;

use coach_core::chart::{parse_sentence, ParseOptions, SupertagFilter};
use coach_core::fixtures::{toy, toy_underconstrained, AMBIGUITY_SUITE, GRAMMATICAL_SUITE, LEARNER_SUITE, TREEBANK};
use coach_core::grammar::Mode;
use coach_core::profiler::{
  compare_profiles, parse_suite, run_profile, strip_wall_time, Aggregates, Expected, ItemVerdict, Profile,
  ProfileError, TestItem,
};
use coach_core::supertag::{parse_treebank, train};

fn suite(text: &str) -> Vec<TestItem> {
  parse_suite(text).unwrap()
}

#[test]
fn suite_lines_and_annotations() {
  let items = parse_suite("# comment\n\na\t-\tla niña duerme\nb\t-\t*la niño duerme\nc\tlearner\t*el libro es famosa\n")
    .unwrap();
  let got: Vec<(&str, Expected, &str)> = items.iter().map(|i| (i.id.as_str(), i.expected, i.sentence.as_str())).collect();
  assert_eq!(
    got,
    [
      ("a", Expected::Grammatical, "la niña duerme"),
      ("b", Expected::Ungrammatical, "la niño duerme"),
      ("c", Expected::Learner, "el libro es famosa"),
    ]
  );
  assert_eq!(
    parse_suite("x\tgrammatical\t*la niño duerme\n").unwrap_err(),
    ProfileError::Suite {
      line: 1,
      detail: "a starred sentence cannot be expected grammatical".into()
    }
  );
  assert!(matches!(parse_suite("x\t-\ta\nx\t-\tb\n"), Err(ProfileError::Suite { line: 2, .. })));
  assert!(matches!(parse_suite("x\tmaybe\ta\n"), Err(ProfileError::Suite { line: 1, .. })));
  assert!(matches!(parse_suite("no tabs here\n"), Err(ProfileError::Suite { line: 1, .. })));
  assert_eq!(suite(GRAMMATICAL_SUITE).len(), 20);
  assert_eq!(suite(LEARNER_SUITE).len(), 12);
  assert_eq!(suite(AMBIGUITY_SUITE).len(), 12);
  assert_eq!(run_profile(&[], toy(Mode::Strict), &ParseOptions::default()).unwrap_err(), ProfileError::EmptySuite);
}

#[test]
fn coverage_partitions_the_desk_suites() {
  let opts = ParseOptions::default();
  let strict = toy(Mode::Strict);
  let learner = toy(Mode::Learner);
  let p = run_profile(&suite(GRAMMATICAL_SUITE), strict, &opts).unwrap();
  assert_eq!(p.aggregates.coverage, 100.0);
  assert!(p.records.iter().all(|r| r.verdict == ItemVerdict::Grammatical));
  let p = run_profile(&suite(LEARNER_SUITE), strict, &opts).unwrap();
  assert_eq!(p.aggregates.coverage, 0.0);
  assert!(p.records.iter().all(|r| r.verdict == ItemVerdict::NoParse));
  let p = run_profile(&suite(LEARNER_SUITE), learner, &opts).unwrap();
  assert_eq!(p.aggregates.coverage, 100.0);
  assert!(p.records.iter().all(|r| r.verdict == ItemVerdict::Learner));
  assert!(p.records.iter().all(|r| r.verdict.meets(r.expected)));
}

/// Independent recomputation of the aggregates from the records.
fn recompute(p: &Profile) -> (usize, f64, f64, f64) {
  let n = p.records.len();
  let covered = p.records.iter().filter(|r| r.readings > 0).count();
  let bad: Vec<_> = p.records.iter().filter(|r| r.expected != Expected::Grammatical).collect();
  let over = bad.iter().filter(|r| r.verdict == ItemVerdict::Grammatical).count();
  let over = if bad.is_empty() { 0.0 } else { 100.0 * over as f64 / bad.len() as f64 };
  let mean = if covered == 0 {
    0.0
  } else {
    p.records.iter().map(|r| r.readings).sum::<usize>() as f64 / covered as f64
  };
  (covered, 100.0 * covered as f64 / n as f64, over, mean)
}

#[test]
fn aggregates_follow_from_the_records() {
  for (g, text) in [
    (toy(Mode::Strict), AMBIGUITY_SUITE),
    (toy(Mode::Learner), AMBIGUITY_SUITE),
    (toy_underconstrained(Mode::Strict), AMBIGUITY_SUITE),
    (toy(Mode::Learner), LEARNER_SUITE),
  ] {
    let p = run_profile(&suite(text), g, &ParseOptions::default()).unwrap();
    let (covered, coverage, over, mean) = recompute(&p);
    let a = &p.aggregates;
    assert_eq!(a.covered, covered);
    assert!((a.coverage - coverage).abs() < 1e-9);
    assert!((a.overgeneration - over).abs() < 1e-9);
    assert!((a.mean_readings - mean).abs() < 1e-9);
    assert_eq!(a.edges_built, p.records.iter().map(|r| r.edges_built).sum::<usize>());
    assert_eq!(*a, Aggregates::from_records(&p.records));
  }
}

#[test]
fn readings_are_uncapped_totals() {
  let g = toy(Mode::Learner);
  let capped = ParseOptions {
    reading_cap: 1,
    ..Default::default()
  };
  let p = run_profile(&suite(AMBIGUITY_SUITE), g, &capped).unwrap();
  for r in &p.records {
    let full = parse_sentence(&r.sentence, g, &ParseOptions::default()).unwrap();
    assert_eq!(r.readings, full.readings.len(), "{}", r.id);
  }
  assert!(p.records.iter().any(|r| r.readings > 1));
}

#[test]
fn comparing_a_profile_with_itself_changes_nothing() {
  let p = run_profile(&suite(AMBIGUITY_SUITE), toy(Mode::Strict), &ParseOptions::default()).unwrap();
  let c = compare_profiles(&p, &p).unwrap();
  assert!(c.changed.is_empty() && c.regressions.is_empty());
  assert!(c.items.iter().all(|d| d.readings == 0 && d.edges_built == 0 && d.unification_attempts == 0));
  assert!(c.render_table().contains("changed verdicts: 0; regressions: 0"));
}

#[test]
fn agreement_constraint_reduces_ambiguity_and_overgeneration() {
  let items = suite(AMBIGUITY_SUITE);
  let opts = ParseOptions::default();
  let loose = run_profile(&items, toy_underconstrained(Mode::Strict), &opts).unwrap();
  let tight = run_profile(&items, toy(Mode::Strict), &opts).unwrap();
  assert!(tight.aggregates.mean_readings < loose.aggregates.mean_readings);
  assert!(tight.aggregates.overgeneration < loose.aggregates.overgeneration);
  assert_eq!(tight.aggregates.overgeneration, 0.0);
  let c = compare_profiles(&loose, &tight).unwrap();
  assert!(c.regressions.is_empty(), "{:?}", c.regressions);
  assert!(c.changed.contains(&"a07".to_string()));
  assert!(c.items.iter().all(|d| d.readings <= 0));
  // going back the other way shows up as regressions
  let back = compare_profiles(&tight, &loose).unwrap();
  assert!(back.regressions.contains(&"a07".to_string()));
  assert!(back.render_table().contains("REGRESSION"));
}

#[test]
fn rule_filter_changes_cost_but_not_results() {
  let items: Vec<TestItem> = [GRAMMATICAL_SUITE, LEARNER_SUITE, AMBIGUITY_SUITE]
    .iter()
    .flat_map(|s| suite(s))
    .collect();
  for g in [toy(Mode::Strict), toy(Mode::Learner)] {
    let off = run_profile(&items, g, &ParseOptions::unfiltered()).unwrap();
    let on = run_profile(&items, g, &ParseOptions::default()).unwrap();
    let c = compare_profiles(&off, &on).unwrap();
    assert!(c.changed.is_empty());
    assert!(c.items.iter().all(|d| d.readings == 0 && d.unification_attempts <= 0));
    assert!(on.aggregates.unification_attempts < off.aggregates.unification_attempts);
  }
}

#[test]
fn mismatched_suites_cannot_be_compared() {
  let g = toy(Mode::Strict);
  let a = run_profile(&suite(AMBIGUITY_SUITE), g, &ParseOptions::default()).unwrap();
  let b = run_profile(&suite(LEARNER_SUITE), g, &ParseOptions::default()).unwrap();
  let ProfileError::SuiteMismatch { only_a, only_b } = compare_profiles(&a, &b).unwrap_err() else {
    panic!("expected a suite mismatch")
  };
  assert_eq!(only_a.len(), 12);
  assert_eq!(only_b.len(), 12);
}

#[test]
fn profiles_are_deterministic_and_round_trip() {
  let g = toy(Mode::Learner);
  let items = suite(AMBIGUITY_SUITE);
  let model = Arc::new(train(&parse_treebank(TREEBANK).unwrap(), g).unwrap());
  let opts = ParseOptions {
    supertag: Some(SupertagFilter { ranker: model, k: 2 }),
    ..Default::default()
  };
  let a = run_profile(&items, g, &opts).unwrap();
  let b = run_profile(&items, g, &opts).unwrap();
  assert_eq!(strip_wall_time(&a.to_json()), strip_wall_time(&b.to_json()));
  assert!(!strip_wall_time(&a.to_json()).contains("wall_time_ms"));
  assert_eq!(a.settings.supertag_k, Some(2));
  let back = Profile::from_json(&a.to_json()).unwrap();
  assert_eq!(back, a);
  let ids: Vec<&str> = a.records.iter().map(|r| r.id.as_str()).collect();
  let mut sorted = ids.clone();
  sorted.sort();
  assert_eq!(ids, sorted);
  let wrong = a.to_json().replace("coach-profile/1", "coach-profile/0");
  assert!(Profile::from_json(&wrong).is_err());
}
