//! Reader for the line-oriented, TDL-like grammar description language.
//!
//! ```text
//! ; comment
//! :types
//! adj-lex := word & [ HEAD adj, MOD < [ HEAD noun, INDEX #i ] >, RELS < [ ARG1 #i ] > ].
//! :lexicon
//! famosos := adj-lex & STEM "famosos" & PRED "_famoso_a" %tag AQ0MP0.
//! :feedback
//! adj-gender := gender-agreement error "\"{surface}\" should be \"{expected}\"".
//! ```

use std::fmt;

use thiserror::Error;

use crate::tfs::{Feat, FsPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
  pub line: usize,
  pub col: usize,
}

impl fmt::Display for Pos {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{}:{}", self.line, self.col)
  }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct SyntaxError {
  pub pos: Pos,
  pub msg: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
  Type(String),
  Str(String),
  Tag(String),
  Avm(Vec<(FsPath, Conj)>),
  /// elements, and whether the tail is left open (`...`)
  List(Vec<Conj>, bool),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Conj(pub Vec<Term>);

#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
  pub key: String,
  pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Definition {
  pub name: String,
  pub body: Conj,
  pub annotations: Vec<Annotation>,
  pub pos: Pos,
}

impl Definition {
  pub fn annotation(&self, key: &str) -> Option<&Annotation> {
    self.annotations.iter().find(|a| a.key == key)
  }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackDecl {
  pub name: String,
  pub category: String,
  pub severity: String,
  pub message: String,
  pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
  Section(String, Pos),
  Def(Definition),
  Feedback(FeedbackDecl),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
  Ident(String),
  Str(String),
  Tag(String),
  Directive(String),
  Section(String),
  Assign,
  Amp,
  LBrack,
  RBrack,
  LAngle,
  RAngle,
  Comma,
  Ellipsis,
  Period,
}

fn is_ident_char(c: char) -> bool {
  c.is_alphanumeric() || matches!(c, '_' | '-' | '+' | '*' | '\'')
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
  let chars: Vec<char> = src.chars().collect();
  let mut out = Vec::new();
  let (mut i, mut line, mut col) = (0, 1, 1);
  let err = |line, col, msg: String| SyntaxError {
    pos: Pos { line, col },
    msg,
  };
  while i < chars.len() {
    let c = chars[i];
    let pos = Pos { line, col };
    let advance = |n: usize, i: &mut usize, col: &mut usize| {
      *i += n;
      *col += n;
    };
    match c {
      '\n' => {
        i += 1;
        line += 1;
        col = 1;
      }
      c if c.is_whitespace() => advance(1, &mut i, &mut col),
      ';' => {
        while i < chars.len() && chars[i] != '\n' {
          i += 1;
        }
      }
      ':' if chars.get(i + 1) == Some(&'=') => {
        out.push((Tok::Assign, pos));
        advance(2, &mut i, &mut col);
      }
      ':' | '%' | '#' => {
        let start = i + 1;
        let mut j = start;
        while j < chars.len() && is_ident_char(chars[j]) {
          j += 1;
        }
        if j == start {
          return Err(err(line, col, format!("expected a name after `{c}`")));
        }
        let word: String = chars[start..j].iter().collect();
        out.push((
          match c {
            ':' => Tok::Section(word),
            '%' => Tok::Directive(word),
            _ => Tok::Tag(word),
          },
          pos,
        ));
        advance(j - i, &mut i, &mut col);
      }
      '"' => {
        let mut j = i + 1;
        let mut s = String::new();
        loop {
          match chars.get(j) {
            None | Some('\n') => return Err(err(line, col, "unterminated string".into())),
            Some('\\') => {
              match chars.get(j + 1) {
                Some('n') => s.push('\n'),
                Some(&e) => s.push(e),
                None => return Err(err(line, col, "unterminated string".into())),
              }
              j += 2;
            }
            Some('"') => break,
            Some(&ch) => {
              s.push(ch);
              j += 1;
            }
          }
        }
        out.push((Tok::Str(s), pos));
        advance(j + 1 - i, &mut i, &mut col);
      }
      '&' => {
        out.push((Tok::Amp, pos));
        advance(1, &mut i, &mut col);
      }
      '[' => {
        out.push((Tok::LBrack, pos));
        advance(1, &mut i, &mut col);
      }
      ']' => {
        out.push((Tok::RBrack, pos));
        advance(1, &mut i, &mut col);
      }
      '<' => {
        out.push((Tok::LAngle, pos));
        advance(1, &mut i, &mut col);
      }
      '>' => {
        out.push((Tok::RAngle, pos));
        advance(1, &mut i, &mut col);
      }
      ',' => {
        out.push((Tok::Comma, pos));
        advance(1, &mut i, &mut col);
      }
      '.' if chars.get(i + 1) == Some(&'.') && chars.get(i + 2) == Some(&'.') => {
        out.push((Tok::Ellipsis, pos));
        advance(3, &mut i, &mut col);
      }
      '.' => {
        out.push((Tok::Period, pos));
        advance(1, &mut i, &mut col);
      }
      c if is_ident_char(c) => {
        let mut j = i;
        // a '.' directly followed by a name continues a feature path
        while j < chars.len()
          && (is_ident_char(chars[j])
            || (chars[j] == '.' && chars.get(j + 1).is_some_and(|&n| is_ident_char(n))))
        {
          j += 1;
        }
        out.push((Tok::Ident(chars[i..j].iter().collect()), pos));
        advance(j - i, &mut i, &mut col);
      }
      other => return Err(err(line, col, format!("unexpected character `{other}`"))),
    }
  }
  Ok(out)
}

fn is_feature(name: &str) -> bool {
  name.starts_with(|c: char| c.is_ascii_uppercase())
}

struct Parser {
  toks: Vec<(Tok, Pos)>,
  i: usize,
  eof: Pos,
}

impl Parser {
  fn peek(&self) -> Option<&Tok> {
    self.toks.get(self.i).map(|(t, _)| t)
  }

  fn pos(&self) -> Pos {
    self.toks.get(self.i).map(|(_, p)| *p).unwrap_or(self.eof)
  }

  fn next(&mut self) -> Option<Tok> {
    let t = self.toks.get(self.i).map(|(t, _)| t.clone());
    self.i += 1;
    t
  }

  fn fail<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError {
      pos: self.pos(),
      msg: msg.into(),
    })
  }

  fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
    if self.peek() == Some(&tok) {
      self.i += 1;
      Ok(())
    } else {
      self.fail(format!("expected {what}"))
    }
  }

  fn conj(&mut self) -> Result<Conj, SyntaxError> {
    let mut terms = vec![self.term(true)?];
    while self.peek() == Some(&Tok::Amp) {
      self.i += 1;
      terms.push(self.term(true)?);
    }
    Ok(Conj(terms))
  }

  fn term(&mut self, allow_bare_feature: bool) -> Result<Term, SyntaxError> {
    match self.next() {
      Some(Tok::Ident(name)) if allow_bare_feature && is_feature(&name) => {
        let path = FsPath(name.split('.').map(Feat::new).collect());
        let value = self.term(false)?;
        Ok(Term::Avm(vec![(path, Conj(vec![value]))]))
      }
      Some(Tok::Ident(name)) if is_feature(&name) => {
        self.i -= 1;
        self.fail(format!("feature `{name}` where a value was expected"))
      }
      Some(Tok::Ident(name)) => Ok(Term::Type(name)),
      Some(Tok::Str(s)) => Ok(Term::Str(s)),
      Some(Tok::Tag(t)) => Ok(Term::Tag(t)),
      Some(Tok::LBrack) => {
        let mut pairs = Vec::new();
        if self.peek() == Some(&Tok::RBrack) {
          self.i += 1;
          return Ok(Term::Avm(pairs));
        }
        loop {
          let path = match self.next() {
            Some(Tok::Ident(name)) if is_feature(&name) => {
              FsPath(name.split('.').map(Feat::new).collect())
            }
            _ => {
              self.i -= 1;
              return self.fail("expected a feature name");
            }
          };
          let value = self.conj()?;
          pairs.push((path, value));
          match self.next() {
            Some(Tok::Comma) => continue,
            Some(Tok::RBrack) => break,
            _ => {
              self.i -= 1;
              return self.fail("expected `,` or `]`");
            }
          }
        }
        Ok(Term::Avm(pairs))
      }
      Some(Tok::LAngle) => {
        let mut items = Vec::new();
        let mut open = false;
        if self.peek() == Some(&Tok::RAngle) {
          self.i += 1;
          return Ok(Term::List(items, false));
        }
        loop {
          if self.peek() == Some(&Tok::Ellipsis) {
            self.i += 1;
            open = true;
            self.expect(Tok::RAngle, "`>` after `...`")?;
            break;
          }
          items.push(self.conj()?);
          match self.next() {
            Some(Tok::Comma) => continue,
            Some(Tok::RAngle) => break,
            _ => {
              self.i -= 1;
              return self.fail("expected `,` or `>`");
            }
          }
        }
        Ok(Term::List(items, open))
      }
      _ => {
        self.i = self.i.saturating_sub(1);
        self.fail("expected a type, string, tag, `[` or `<`")
      }
    }
  }

  fn annotations(&mut self) -> Vec<Annotation> {
    let mut out = Vec::new();
    while let Some(Tok::Directive(key)) = self.peek().cloned() {
      self.i += 1;
      let mut args = Vec::new();
      while let Some(Tok::Ident(a) | Tok::Str(a)) = self.peek().cloned() {
        self.i += 1;
        args.push(a);
      }
      out.push(Annotation { key, args });
    }
    out
  }
}

/// Parses a whole grammar source into items; `:feedback` sections switch to
/// the template statement form.
pub fn parse_source(src: &str) -> Result<Vec<Item>, SyntaxError> {
  let toks = lex(src)?;
  let eof = Pos {
    line: src.lines().count() + 1,
    col: 1,
  };
  let mut p = Parser { toks, i: 0, eof };
  let mut items = Vec::new();
  let mut section = String::new();
  while let Some(tok) = p.peek().cloned() {
    let pos = p.pos();
    match tok {
      Tok::Section(name) => {
        p.i += 1;
        // `:grammar name` carries an argument
        let mut label = name.clone();
        if name == "grammar" {
          if let Some(Tok::Ident(arg)) = p.peek().cloned() {
            p.i += 1;
            label = format!("grammar {arg}");
          }
        }
        section = name;
        items.push(Item::Section(label, pos));
      }
      Tok::Ident(name) => {
        p.i += 1;
        p.expect(Tok::Assign, "`:=`")?;
        if section == "feedback" {
          let category = match p.next() {
            Some(Tok::Ident(c)) => c,
            _ => return p.fail("expected a feedback category"),
          };
          let severity = match p.next() {
            Some(Tok::Ident(s)) => s,
            _ => return p.fail("expected a severity"),
          };
          let message = match p.next() {
            Some(Tok::Str(m)) => m,
            _ => return p.fail("expected a quoted message"),
          };
          p.expect(Tok::Period, "`.`")?;
          items.push(Item::Feedback(FeedbackDecl {
            name,
            category,
            severity,
            message,
            pos,
          }));
        } else {
          let body = p.conj()?;
          let annotations = p.annotations();
          p.expect(Tok::Period, "`.` at end of definition")?;
          items.push(Item::Def(Definition {
            name,
            body,
            annotations,
            pos,
          }));
        }
      }
      _ => return p.fail("expected a definition or section header"),
    }
  }
  Ok(items)
}

/// Parses a standalone description such as `[ PNG #0 & [ GEN fem ] ]`.
pub fn parse_description(src: &str) -> Result<Conj, SyntaxError> {
  let toks = lex(src)?;
  let mut p = Parser {
    toks,
    i: 0,
    eof: Pos { line: 1, col: src.len() + 1 },
  };
  let conj = p.conj()?;
  if p.peek() == Some(&Tok::Period) {
    p.i += 1;
  }
  if p.peek().is_some() {
    return p.fail("trailing input");
  }
  Ok(conj)
}
