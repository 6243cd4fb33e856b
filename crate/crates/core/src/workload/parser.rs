//! Recursive-descent parser for the workload dialect:
//!
//! ```text
//! (: id=q2 freq=1 :)
//! for $x in //FactDoc/Fact,
//!     $y in //dimension[@dim-id="Customer"]/Level/instance,
//!     $z in //dimension[@dim-id="Part"]/Level/instance
//! where $y/attribute[@id="c_nation_key"]/@value="13"
//!   and $z/attribute[@id="p_type"]/@value="PBC"
//!   and $x/dimension[@dim-id="Customer"]/@value-id=$y/@id
//!   and $x/dimension[@dim-id="Part"]/@value-id=$z/@id
//! return $x
//! ```

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::Value;
use crate::predicate::{Comparator, Predicate};

use super::{Query, Workload};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Sym(&'static str),
    Comment(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '#')
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        let next = chars.get(i + 1).copied();
        if c == '(' && next == Some(':') {
            let mut depth = 0usize;
            let start = i + 2;
            loop {
                if i >= chars.len() {
                    return Err(syntax(tl, tc, "unterminated comment"));
                }
                if chars[i] == '(' && chars.get(i + 1) == Some(&':') {
                    depth += 1;
                    advance(&mut i, &mut line, &mut col, 2);
                } else if chars[i] == ':' && chars.get(i + 1) == Some(&')') {
                    depth -= 1;
                    advance(&mut i, &mut line, &mut col, 2);
                    if depth == 0 {
                        break;
                    }
                } else {
                    advance(&mut i, &mut line, &mut col, 1);
                }
            }
            let body: String = chars[start..i - 2].iter().collect();
            out.push(Token {
                tok: Tok::Comment(body),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            advance(&mut i, &mut line, &mut col, 1);
            loop {
                match chars.get(i) {
                    None => return Err(syntax(tl, tc, "unterminated string literal")),
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        advance(&mut i, &mut line, &mut col, 2);
                    }
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, 1);
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, 1);
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c == '$' {
            advance(&mut i, &mut line, &mut col, 1);
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if start == i {
                return Err(syntax(tl, tc, "expected a variable name after '$'"));
            }
            out.push(Token {
                tok: Tok::Var(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        let two: Option<&'static str> = match (c, next) {
            ('/', Some('/')) => Some("//"),
            ('!', Some('=')) => Some("!="),
            ('<', Some('=')) => Some("<="),
            ('>', Some('=')) => Some(">="),
            _ => None,
        };
        if let Some(sym) = two {
            advance(&mut i, &mut line, &mut col, 2);
            out.push(Token {
                tok: Tok::Sym(sym),
                line: tl,
                column: tc,
            });
            continue;
        }
        let one: Option<&'static str> = match c {
            '/' => Some("/"),
            '[' => Some("["),
            ']' => Some("]"),
            '@' => Some("@"),
            ',' => Some(","),
            '=' => Some("="),
            '<' => Some("<"),
            '>' => Some(">"),
            _ => None,
        };
        if let Some(sym) = one {
            advance(&mut i, &mut line, &mut col, 1);
            out.push(Token {
                tok: Tok::Sym(sym),
                line: tl,
                column: tc,
            });
            continue;
        }
        if is_ident_char(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        return Err(syntax(tl, tc, format!("unexpected character {c:?}")));
    }
    Ok(out)
}

/// What a `for` variable ranges over.
#[derive(Debug, Clone, PartialEq)]
enum Binding {
    Facts,
    Dimension(String),
}

struct Parser {
    tokens: Vec<Token>,
    /// Comments preceding each token; the extra last slot holds trailing ones.
    comments: Vec<Vec<Token>>,
    pos: usize,
    end: (usize, usize),
}

#[derive(Default)]
struct Annotation {
    id: Option<String>,
    freq: Option<u32>,
}

/// A selection condition before predicate interning.
struct RawPredicate {
    dimension: String,
    attribute: String,
    comparator: Comparator,
    literal: String,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.column))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (line, column) = self.here();
        syntax(line, column, message)
    }

    fn describe(&self) -> String {
        match self.peek().map(|t| &t.tok) {
            None => "end of input".into(),
            Some(Tok::Ident(s)) => format!("{s:?}"),
            Some(Tok::Var(v)) => format!("${v}"),
            Some(Tok::Str(s)) => format!("string \"{s}\""),
            Some(Tok::Sym(s)) => format!("'{s}'"),
            Some(Tok::Comment(_)) => unreachable!("comments are stripped"),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{kw}', found {}", self.describe())))
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == sym)
    }

    fn sym(&mut self, sym: &str) -> Result<()> {
        if self.at_sym(sym) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{sym}', found {}", self.describe())))
        }
    }

    fn var(&mut self) -> Result<String> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Var(v)) => {
                let v = v.clone();
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error(format!("expected a variable, found {}", self.describe()))),
        }
    }

    fn string(&mut self) -> Result<String> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected a quoted string, found {}", self.describe()))),
        }
    }

    /// `[@name="value"]`
    fn filter(&mut self, name: &str) -> Result<String> {
        self.sym("[")?;
        self.sym("@")?;
        self.keyword(name)?;
        self.sym("=")?;
        let v = self.string()?;
        self.sym("]")?;
        Ok(v)
    }

    fn annotation(&self) -> Result<Annotation> {
        let mut ann = Annotation::default();
        for c in &self.comments[self.pos] {
            let Tok::Comment(body) = &c.tok else { continue };
            for word in body.split_whitespace() {
                if let Some(id) = word.strip_prefix("id=") {
                    ann.id = Some(id.to_string());
                } else if let Some(f) = word.strip_prefix("freq=") {
                    let freq: u32 = f.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                        syntax(c.line, c.column, format!("invalid frequency {f:?}"))
                    })?;
                    ann.freq = Some(freq);
                }
            }
        }
        Ok(ann)
    }

    fn binding(&mut self) -> Result<(String, Binding, (usize, usize))> {
        let at = self.here();
        let var = self.var()?;
        self.keyword("in")?;
        self.sym("//")?;
        if self.at_keyword("FactDoc") {
            self.pos += 1;
            self.sym("/")?;
            self.keyword("Fact")?;
            return Ok((var, Binding::Facts, at));
        }
        self.keyword("dimension").map_err(|_| {
            self.error(format!(
                "expected //FactDoc/Fact or //dimension[...]/Level/instance, found {}",
                self.describe()
            ))
        })?;
        let dim = self.filter("dim-id")?;
        self.sym("/")?;
        self.keyword("Level")?;
        self.sym("/")?;
        self.keyword("instance")?;
        Ok((var, Binding::Dimension(dim), at))
    }

    fn comparator(&mut self) -> Result<Comparator> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Sym(s)) => match Comparator::from_symbol(s) {
                Some(c) => {
                    self.pos += 1;
                    Ok(c)
                }
                None => Err(self.error(format!("expected a comparison, found '{s}'"))),
            },
            _ => Err(self.error(format!("expected a comparison, found {}", self.describe()))),
        }
    }

    fn query(&mut self, index: usize) -> Result<(Query, Vec<RawPredicate>)> {
        let ann = self.annotation()?;
        let start = self.here();
        self.keyword("for")?;
        let mut vars: HashMap<String, Binding> = HashMap::new();
        let mut fact_var: Option<String> = None;
        loop {
            let (var, binding, at) = self.binding()?;
            if vars.contains_key(&var) {
                return Err(syntax(at.0, at.1, format!("variable ${var} is bound twice")));
            }
            if binding == Binding::Facts {
                if fact_var.is_some() {
                    return Err(syntax(at.0, at.1, "only one fact variable is allowed"));
                }
                fact_var = Some(var.clone());
            }
            vars.insert(var, binding);
            if self.at_sym(",") {
                self.pos += 1;
            } else {
                break;
            }
        }
        let fact_var =
            fact_var.ok_or_else(|| syntax(start.0, start.1, "query binds no //FactDoc/Fact variable"))?;

        let mut raw = Vec::new();
        let mut joined: Vec<(String, String)> = Vec::new();
        if self.at_keyword("where") {
            self.pos += 1;
            loop {
                let at = self.here();
                let var = self.var()?;
                self.sym("/")?;
                if self.at_keyword("attribute") {
                    self.pos += 1;
                    let attribute = self.filter("id")?;
                    self.sym("/")?;
                    self.sym("@")?;
                    self.keyword("value")?;
                    let comparator = self.comparator()?;
                    let literal = self.string()?;
                    let dimension = match vars.get(&var) {
                        Some(Binding::Dimension(d)) => d.clone(),
                        Some(Binding::Facts) => {
                            return Err(syntax(
                                at.0,
                                at.1,
                                format!("selection on fact variable ${var}; predicates on measures are not supported"),
                            ))
                        }
                        None => return Err(syntax(at.0, at.1, format!("unbound variable ${var}"))),
                    };
                    raw.push(RawPredicate {
                        dimension,
                        attribute,
                        comparator,
                        literal,
                    });
                } else if self.at_keyword("dimension") {
                    self.pos += 1;
                    let dim = self.filter("dim-id")?;
                    self.sym("/")?;
                    self.sym("@")?;
                    self.keyword("value-id")?;
                    self.sym("=")?;
                    let rhs_at = self.here();
                    let rhs = self.var()?;
                    self.sym("/")?;
                    self.sym("@")?;
                    self.keyword("id")?;
                    if var != fact_var {
                        return Err(syntax(
                            at.0,
                            at.1,
                            format!("join must start from the fact variable ${fact_var}"),
                        ));
                    }
                    match vars.get(&rhs) {
                        Some(Binding::Dimension(d)) if *d == dim => {}
                        Some(Binding::Dimension(d)) => {
                            return Err(syntax(
                                rhs_at.0,
                                rhs_at.1,
                                format!("${rhs} ranges over {d} but is joined as {dim}"),
                            ))
                        }
                        _ => {
                            return Err(syntax(
                                rhs_at.0,
                                rhs_at.1,
                                format!("${rhs} is not a dimension variable"),
                            ))
                        }
                    }
                    if joined.iter().any(|(_, v)| *v == rhs) {
                        return Err(syntax(at.0, at.1, format!("${rhs} is joined twice")));
                    }
                    joined.push((dim, rhs));
                } else {
                    return Err(self.error(format!(
                        "expected attribute[...] or dimension[...], found {}",
                        self.describe()
                    )));
                }
                if self.at_keyword("and") {
                    self.pos += 1;
                } else if self.at_keyword("or") {
                    return Err(self.error("disjunctive where-clauses are not supported; split the query"));
                } else {
                    break;
                }
            }
        }
        self.keyword("return")?;
        let ret_at = self.here();
        let ret = self.var()?;
        if ret != fact_var {
            return Err(syntax(ret_at.0, ret_at.1, format!("query must return ${fact_var}")));
        }

        let joined_dims: Vec<String> = joined.iter().map(|(d, _)| d.clone()).collect();
        for (var, binding) in &vars {
            if let Binding::Dimension(d) = binding {
                if !joined.iter().any(|(_, v)| v == var) {
                    return Err(syntax(
                        start.0,
                        start.1,
                        format!("${var} ({d}) is never joined to ${fact_var}"),
                    ));
                }
            }
        }
        let query = Query {
            id: ann.id.unwrap_or_else(|| format!("q{}", index + 1)),
            frequency: ann.freq.unwrap_or(1),
            predicate_ids: Vec::new(),
            joined_dimensions: joined_dims,
            fact_set_id: None,
        };
        Ok((query, raw))
    }
}

/// Parses workload text. Predicates are deduplicated and numbered `p1, p2, …`
/// in order of first appearance; literals stay untyped strings until
/// [`super::bind_workload`].
pub fn parse_workload(text: &str) -> Result<Workload> {
    let mut tokens = Vec::new();
    let mut comments = vec![Vec::new()];
    for t in lex(text)? {
        if matches!(t.tok, Tok::Comment(_)) {
            comments.last_mut().expect("non-empty").push(t);
        } else {
            tokens.push(t);
            comments.push(Vec::new());
        }
    }
    let end = text
        .lines()
        .enumerate()
        .last()
        .map_or((1, 1), |(n, l)| (n + 1, l.chars().count() + 1));
    let mut parser = Parser {
        tokens,
        comments,
        pos: 0,
        end,
    };
    let mut queries: Vec<Query> = Vec::new();
    let mut predicates: Vec<Predicate> = Vec::new();
    while parser.peek().is_some() {
        let at = parser.here();
        let (mut query, raw) = parser.query(queries.len())?;
        if queries.iter().any(|q| q.id == query.id) {
            return Err(syntax(at.0, at.1, format!("duplicate query id {:?}", query.id)));
        }
        for r in raw {
            let candidate = Predicate {
                id: String::new(),
                dimension: r.dimension,
                attribute: r.attribute,
                comparator: r.comparator,
                literal: Value::Str(r.literal),
            };
            let id = match predicates.iter().find(|p| p.same_condition(&candidate)) {
                Some(p) => p.id.clone(),
                None => {
                    let id = format!("p{}", predicates.len() + 1);
                    predicates.push(Predicate {
                        id: id.clone(),
                        ..candidate
                    });
                    id
                }
            };
            if !query.predicate_ids.contains(&id) {
                query.predicate_ids.push(id);
            }
        }
        queries.push(query);
    }
    Ok(Workload {
        queries,
        predicates,
    })
}
