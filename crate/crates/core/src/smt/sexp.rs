//! Minimal S-expressions: enough to build SMT-LIB scripts and read solver
//! responses back.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(s: impl Into<String>) -> Self {
        Sexp::Atom(s.into())
    }

    pub fn list(items: impl IntoIterator<Item = Sexp>) -> Self {
        Sexp::List(items.into_iter().collect())
    }

    /// `(head args...)`
    pub fn app(head: &str, args: impl IntoIterator<Item = Sexp>) -> Self {
        let mut v = vec![Sexp::atom(head)];
        v.extend(args);
        Sexp::List(v)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Sexp::Atom(_))
    }

    /// Replaces free occurrences of the symbol `from` by `to`, respecting
    /// `let`, `forall` and `exists` binders.
    pub fn substitute(&self, from: &str, to: &Sexp) -> Sexp {
        match self {
            Sexp::Atom(a) if a == from => to.clone(),
            Sexp::Atom(_) => self.clone(),
            Sexp::List(items) => {
                let head = items.first().and_then(Sexp::as_atom);
                match head {
                    Some("let") if items.len() == 3 => {
                        let Some(binds) = items[1].as_list() else {
                            return self.clone();
                        };
                        let shadowed = binds.iter().any(|b| {
                            b.as_list().and_then(|b| b.first()).and_then(Sexp::as_atom)
                                == Some(from)
                        });
                        let binds = binds
                            .iter()
                            .map(|b| match b.as_list() {
                                Some([name, term]) => {
                                    Sexp::list([name.clone(), term.substitute(from, to)])
                                }
                                _ => b.clone(),
                            })
                            .collect::<Vec<_>>();
                        let body = if shadowed {
                            items[2].clone()
                        } else {
                            items[2].substitute(from, to)
                        };
                        Sexp::list([items[0].clone(), Sexp::List(binds), body])
                    }
                    Some("forall" | "exists") if items.len() == 3 => {
                        let shadowed = items[1].as_list().is_some_and(|vs| {
                            vs.iter().any(|v| {
                                v.as_list().and_then(|v| v.first()).and_then(Sexp::as_atom)
                                    == Some(from)
                            })
                        });
                        if shadowed {
                            self.clone()
                        } else {
                            Sexp::list([
                                items[0].clone(),
                                items[1].clone(),
                                items[2].substitute(from, to),
                            ])
                        }
                    }
                    _ => Sexp::List(items.iter().map(|i| i.substitute(from, to)).collect()),
                }
            }
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexpError {
    #[error("unbalanced `)` at byte {0}")]
    UnexpectedClose(usize),
    #[error("unterminated list")]
    Unterminated,
    #[error("unterminated quoted symbol or string")]
    UnterminatedQuote,
}

/// Parses every top-level S-expression in `input`. Comments (`;` to end of
/// line) are skipped; quoted symbols and string literals are kept verbatim
/// including their delimiters.
pub fn parse_all(input: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = input.as_bytes();
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                stack.push(Vec::new());
                i += 1;
            }
            b')' => {
                if stack.len() < 2 {
                    return Err(SexpError::UnexpectedClose(i));
                }
                let done = stack.pop().expect("checked depth");
                stack
                    .last_mut()
                    .expect("checked depth")
                    .push(Sexp::List(done));
                i += 1;
            }
            b if b.is_ascii_whitespace() => i += 1,
            b'|' | b'"' => {
                let start = i;
                i += 1;
                loop {
                    if i >= bytes.len() {
                        return Err(SexpError::UnterminatedQuote);
                    }
                    if bytes[i] == c {
                        // `""` escapes a quote inside SMT-LIB strings
                        if c == b'"' && bytes.get(i + 1) == Some(&b'"') {
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    i += 1;
                }
                stack
                    .last_mut()
                    .expect("root")
                    .push(Sexp::atom(&input[start..i]));
            }
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b'(' | b')' | b';' | b'|' | b'"')
                {
                    i += 1;
                }
                stack
                    .last_mut()
                    .expect("root")
                    .push(Sexp::atom(&input[start..i]));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SexpError::Unterminated);
    }
    Ok(stack.pop().expect("root"))
}

/// Parses exactly one S-expression.
pub fn parse_one(input: &str) -> Result<Sexp, SexpError> {
    let mut all = parse_all(input)?;
    match all.len() {
        1 => Ok(all.pop().expect("len 1")),
        0 => Err(SexpError::Unterminated),
        _ => Ok(Sexp::List(all)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_print_round_trip() {
        let src = "(define-fun Q ((x!0 Route)) Bool (and ((_ is Some) x!0) (= (lp x!0) 300)))";
        let s = parse_one(src).unwrap();
        assert_eq!(s.to_string(), src);
    }

    #[test]
    fn comments_and_quotes() {
        let all = parse_all("; hi\nsat\n(|a b| \"x\"\"y\")").unwrap();
        assert_eq!(all[0], Sexp::atom("sat"));
        assert_eq!(
            all[1],
            Sexp::list([Sexp::atom("|a b|"), Sexp::atom("\"x\"\"y\"")])
        );
    }

    #[test]
    fn unbalanced() {
        assert_eq!(parse_all("(a"), Err(SexpError::Unterminated));
        assert_eq!(parse_all("a)"), Err(SexpError::UnexpectedClose(1)));
    }

    #[test]
    fn substitution_respects_binders() {
        let s = parse_one("(and (p x) (let ((x (f x))) (q x)) (forall ((x R)) (r x)))").unwrap();
        let out = s.substitute("x", &Sexp::atom("s_v"));
        assert_eq!(
            out.to_string(),
            "(and (p s_v) (let ((x (f s_v))) (q x)) (forall ((x R)) (r x)))"
        );
    }
}
