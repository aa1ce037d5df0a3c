//! Position-annotated S-expression reader used by the PDDL front end.

use std::fmt;

use super::PddlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    /// Atom text, already folded to lowercase.
    Atom(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Atom(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Atom(..) => None,
        }
    }

    /// Head atom of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexpr::as_atom)
    }
}

fn is_atom_char(c: char) -> bool {
    !(c.is_whitespace() || c == '(' || c == ')' || c == ';')
}

/// Reads every top-level expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexpr>, PddlError> {
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 0;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        col += 1;
        let pos = Pos { line, col };
        match c {
            '\n' => {
                line += 1;
                col = 0;
            }
            ';' => {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => stack.push((Vec::new(), pos)),
            ')' => {
                let (items, start) = stack.pop().ok_or_else(|| PddlError::Lex {
                    line,
                    col,
                    message: "unbalanced ')'".into(),
                })?;
                let node = Sexpr::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => out.push(node),
                }
            }
            c if c.is_whitespace() => {}
            c => {
                let mut atom = String::new();
                atom.push(c);
                while let Some(&n) = chars.peek() {
                    if !is_atom_char(n) {
                        break;
                    }
                    atom.push(n);
                    chars.next();
                    col += 1;
                }
                if let Some(bad) = atom
                    .chars()
                    .find(|ch| !(ch.is_ascii_graphic()) || matches!(ch, '"' | '\''))
                {
                    return Err(PddlError::Lex {
                        line: pos.line,
                        col: pos.col,
                        message: format!("unexpected character {bad:?}"),
                    });
                }
                let node = Sexpr::Atom(atom.to_ascii_lowercase(), pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => out.push(node),
                }
            }
        }
    }
    if let Some((_, start)) = stack.last() {
        return Err(PddlError::Lex {
            line: start.line,
            col: start.col,
            message: "unclosed '('".into(),
        });
    }
    Ok(out)
}
