//! Regenerates `data/treebank.txt`: each sentence is parsed with the learner
//! grammar and its preferred reading is frozen as the gold derivation.
//!
//! cargo run -p coach-core --example build_treebank > crates/core/data/treebank.txt

use coach_core::chart::{parse_sentence, ParseOptions};
use coach_core::coach::select_reading;
use coach_core::fixtures::toy;
use coach_core::grammar::Mode;
use coach_core::supertag::{write_treebank, TreebankItem};

const SENTENCES: &[&str] = &[
  "mis abuelos son personas famosas",
  "la niña duerme",
  "los gatos duermen",
  "el abuelo llega cansado",
  "las abuelas ven libros",
  "mi casa es blanca",
  "los libros son famosos",
  "la gata ve el libro",
  "mis niños llegan cansados",
  "el gato blanco duerme",
  "las niñas famosas llegan",
  "mi abuela ve gatos blancos",
  "los niños son famosos",
  "la persona famosa llega",
  "el niño ve la casa",
  "mis gatas son blancas",
  "las casas blancas son famosas",
  "el libro es blanco",
  "los abuelos duermen",
  "la abuela es famosa",
  "mi gato duerme",
  "las personas llegan cansadas",
  "el niño es famoso",
  "los gatos ven niñas",
  "mis abuelas son personas famosas",
  "la niña cansada duerme",
  "los abuelos famosos llegan",
  "mi niño ve libros blancos",
  "las gatas duermen",
  "el abuelo es famoso",
  "la casa es famosa",
  "mis libros son blancos",
  "los niños cansados duermen",
  "la gata es blanca",
  "el gato ve la casa blanca",
  "las abuelas llegan",
  // learner productions
  "mis abuelos son personas famosos",
  "la niño duerme",
  "el libro es famosa",
  "los gatos blancas duermen",
];

fn main() {
  let g = toy(Mode::Learner);
  let mut items = Vec::new();
  for (i, s) in SENTENCES.iter().enumerate() {
    let result = parse_sentence(s, g, &ParseOptions::default()).expect("sentence parses");
    let reading = select_reading(&result).unwrap_or_else(|| panic!("no reading for {s:?}"));
    items.push(TreebankItem {
      id: format!("t{:02}", i + 1),
      sentence: s.to_string(),
      derivation: reading.derivation.clone(),
    });
  }
  print!("{}", write_treebank(&items));
}
