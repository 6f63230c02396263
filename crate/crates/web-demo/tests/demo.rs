use coach_web_demo::{analyze_json, coach_json, parse_json};
use serde_json::json;

#[test]
fn coach_reports_the_agreement_error_with_offsets() {
  let v = coach_json("mis abuelos son personas famosos").unwrap();
  assert_eq!(v["verdict"], "learner");
  assert_eq!(v["feedback"].as_array().unwrap().len(), 1);
  assert_eq!(v["feedback"][0]["start"], 25);
  assert_eq!(v["feedback"][0]["end"], 32);
  assert_eq!(v["feedback"][0]["expected"], "famosas");
  assert_eq!(v["corrected"], "mis abuelos son personas famosas");
  let again = coach_json(v["corrected"].as_str().unwrap()).unwrap();
  assert_eq!(again["verdict"], "grammatical");
  assert!(again["dependencies"].as_str().unwrap().contains("_famoso_a -ARG1-> _persona_n"));
}

#[test]
fn coach_rejects_empty_and_oversized_input() {
  assert!(coach_json("").is_err());
  assert!(coach_json(&"a ".repeat(300)).unwrap_err().contains("limit"));
}

#[test]
fn analyze_lists_lemma_and_tag() {
  assert_eq!(
    analyze_json(" famosos "),
    json!({ "token": "famosos", "analyses": [{ "lemma": "famoso", "tag": "AQ0MP0" }] })
  );
  assert_eq!(analyze_json("xyzzy")["analyses"], json!([]));
}

#[test]
fn parse_distinguishes_the_grammar_modes() {
  let strict = parse_json("mis abuelos son personas famosos", false).unwrap();
  assert_eq!(strict["readings"], json!([]));
  let learner = parse_json("mis abuelos son personas famosos", true).unwrap();
  let readings = learner["readings"].as_array().unwrap();
  assert!(!readings.is_empty());
  assert!(readings.iter().all(|r| !r["learner_rules"].as_array().unwrap().is_empty()));
}
