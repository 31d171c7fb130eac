//! S-expression reader for the constraint DSL.
//!
//! ```text
//! file    := decl* formula*
//! decl    := (var NAME string|int high|low [LEN]) | (domain "SYMBOLS" LEN exact|up_to) | (delta INT)
//! formula := (obs COST expr)
//! expr    := (and expr*) | (or expr*) | (not expr) | (eqConst VAR "lit") | (OP term term)
//! term    := (charAt VAR INT) | (length VAR) | (concat term term) | VAR | "lit" | INT
//! ```
//!
//! `;` starts a comment running to the end of the line.

use super::ast::{CmpOp, Constraint, Level, Signature, Sort, Term, Var};
use super::domain::{Domain, LengthMode};
use crate::error::{ParseError, ParseErrorKind};

type PResult<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

impl Pos {
    fn err(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            kind,
        }
    }

    fn syntax(self, msg: impl Into<String>) -> ParseError {
        self.err(ParseErrorKind::Syntax(msg.into()))
    }
}

#[derive(Debug)]
enum Sexp {
    Symbol(String, Pos),
    Str(String, Pos),
    Int(i64, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Symbol(_, p) | Sexp::Str(_, p) | Sexp::Int(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn describe(&self) -> String {
        match self {
            Sexp::Symbol(s, _) => format!("symbol `{s}`"),
            Sexp::Str(s, _) => format!("string \"{s}\""),
            Sexp::Int(n, _) => format!("integer {n}"),
            Sexp::List(..) => "list".to_string(),
        }
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_trivia();
        self.chars.peek().is_none()
    }

    fn read(&mut self) -> PResult<Sexp> {
        self.skip_trivia();
        let start = self.pos();
        match self.chars.peek().copied() {
            None => Err(start.syntax("unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => return Err(start.syntax("unclosed `(`")),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(')') => Err(start.syntax("unexpected `)`")),
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(start.syntax("unterminated string literal")),
                        Some('"') => return Ok(Sexp::Str(s, start)),
                        Some('\\') => match self.bump() {
                            Some(c @ ('"' | '\\')) => s.push(c),
                            Some(c) => return Err(self.pos().syntax(format!("unknown escape `\\{c}`"))),
                            None => return Err(start.syntax("unterminated string literal")),
                        },
                        Some(c) => s.push(c),
                    }
                }
            }
            Some(_) => {
                let mut tok = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == ';' {
                        break;
                    }
                    tok.push(c);
                    self.bump();
                }
                let numeric = tok.strip_prefix('-').unwrap_or(&tok);
                if !numeric.is_empty() && numeric.chars().all(|c| c.is_ascii_digit()) {
                    tok.parse::<i64>()
                        .map(|n| Sexp::Int(n, start))
                        .map_err(|_| start.syntax(format!("integer `{tok}` out of range")))
                } else {
                    Ok(Sexp::Symbol(tok, start))
                }
            }
        }
    }
}

/// A parsed DSL file: declarations plus cost-annotated path constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFile {
    pub domain: Domain,
    pub signature: Signature,
    pub delta: Option<u64>,
    pub paths: Vec<(u64, Constraint)>,
}

struct Ctx<'a> {
    sig: &'a Signature,
    domain: &'a Domain,
}

impl Ctx<'_> {
    fn var(&self, name: &str, pos: Pos) -> PResult<&Var> {
        self.sig
            .get(name)
            .ok_or_else(|| pos.err(ParseErrorKind::Undeclared(name.to_string())))
    }

    fn string_var(&self, e: &Sexp) -> PResult<String> {
        match e {
            Sexp::Symbol(name, pos) => {
                let v = self.var(name, *pos)?;
                if v.sort != Sort::String {
                    return Err(pos.err(ParseErrorKind::Sort(format!("`{name}` is not a string variable"))));
                }
                Ok(name.clone())
            }
            other => Err(other.pos().syntax(format!("expected a variable, found {}", other.describe()))),
        }
    }

    fn literal(&self, s: &str, pos: Pos) -> PResult<String> {
        if let Some(c) = s.chars().find(|&c| self.domain.symbol_index(c).is_none()) {
            return Err(pos.err(ParseErrorKind::Domain(format!(
                "symbol `{c}` of literal \"{s}\" is not in the alphabet"
            ))));
        }
        Ok(s.to_string())
    }

    fn term(&self, e: &Sexp) -> PResult<(Term, Sort)> {
        match e {
            Sexp::Int(n, _) => Ok((Term::Int(*n), Sort::Int)),
            Sexp::Str(s, pos) => Ok((Term::Str(self.literal(s, *pos)?), Sort::String)),
            Sexp::Symbol(name, pos) => {
                let v = self.var(name, *pos)?;
                Ok((Term::Var(name.clone()), v.sort))
            }
            Sexp::List(items, pos) => {
                let head = match items.first() {
                    Some(Sexp::Symbol(h, _)) => h.as_str(),
                    _ => return Err(pos.syntax("expected a term operator")),
                };
                let args = &items[1..];
                let arity = |n: usize| {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(pos.syntax(format!("`{head}` takes {n} arguments, found {}", args.len())))
                    }
                };
                match head {
                    "charAt" => {
                        arity(2)?;
                        let v = self.string_var(&args[0])?;
                        match &args[1] {
                            Sexp::Int(i, p) => {
                                let i = usize::try_from(*i)
                                    .map_err(|_| p.syntax("charAt index must be nonnegative"))?;
                                Ok((Term::CharAt(v, i), Sort::String))
                            }
                            other => Err(other.pos().syntax("charAt index must be an integer literal")),
                        }
                    }
                    "length" => {
                        arity(1)?;
                        Ok((Term::Length(self.string_var(&args[0])?), Sort::Int))
                    }
                    "concat" => {
                        arity(2)?;
                        let (a, sa) = self.term(&args[0])?;
                        let (b, sb) = self.term(&args[1])?;
                        if sa != Sort::String || sb != Sort::String {
                            return Err(pos.err(ParseErrorKind::Sort("concat expects string terms".into())));
                        }
                        Ok((Term::concat(a, b), Sort::String))
                    }
                    other => Err(pos.syntax(format!("unknown term operator `{other}`"))),
                }
            }
        }
    }

    fn expr(&self, e: &Sexp) -> PResult<Constraint> {
        let (items, pos) = match e {
            Sexp::List(items, pos) => (items, *pos),
            other => {
                return Err(other
                    .pos()
                    .syntax(format!("expected a formula, found {}", other.describe())))
            }
        };
        let head = match items.first() {
            Some(Sexp::Symbol(h, _)) => h.as_str(),
            _ => return Err(pos.syntax("expected a connective or comparison")),
        };
        let args = &items[1..];
        match head {
            "and" | "or" => {
                let cs = args.iter().map(|a| self.expr(a)).collect::<PResult<Vec<_>>>()?;
                Ok(if head == "and" {
                    Constraint::And(cs)
                } else {
                    Constraint::Or(cs)
                })
            }
            "not" => match args {
                [a] => Ok(Constraint::Not(Box::new(self.expr(a)?))),
                _ => Err(pos.syntax("`not` takes exactly one argument")),
            },
            "eqConst" => match args {
                [v, Sexp::Str(s, p)] => Ok(Constraint::EqConst(self.string_var(v)?, self.literal(s, *p)?)),
                _ => Err(pos.syntax("`eqConst` takes a variable and a string literal")),
            },
            op => {
                let op = CmpOp::from_symbol(op).ok_or_else(|| pos.syntax(format!("unknown operator `{op}`")))?;
                let [a, b] = args else {
                    return Err(pos.syntax(format!("`{}` takes exactly two terms", op.symbol())));
                };
                let (ta, sa) = self.term(a)?;
                let (tb, sb) = self.term(b)?;
                if sa != sb {
                    return Err(pos.err(ParseErrorKind::Sort(format!(
                        "cannot compare {sa:?} with {sb:?}"
                    ))));
                }
                Ok(Constraint::Cmp(op, ta, tb))
            }
        }
    }
}

/// Parses a single formula against declared variables and a domain.
pub fn parse_constraint(text: &str, sig: &Signature, domain: &Domain) -> PResult<Constraint> {
    let mut reader = Reader::new(text);
    let e = reader.read()?;
    if !reader.at_end() {
        return Err(reader.pos().syntax("trailing input after formula"));
    }
    Ctx { sig, domain }.expr(&e)
}

fn symbol<'a>(e: &'a Sexp, what: &str) -> PResult<&'a str> {
    match e {
        Sexp::Symbol(s, _) => Ok(s),
        other => Err(other.pos().syntax(format!("expected {what}, found {}", other.describe()))),
    }
}

fn nonneg(e: &Sexp, what: &str) -> PResult<u64> {
    match e {
        Sexp::Int(n, p) => u64::try_from(*n).map_err(|_| p.syntax(format!("{what} must be nonnegative"))),
        other => Err(other.pos().syntax(format!("expected {what}, found {}", other.describe()))),
    }
}

/// Parses a whole file. `fallback` supplies the domain when the file has no
/// `(domain ...)` declaration.
pub fn parse_file(text: &str, fallback: Option<&Domain>) -> PResult<ConstraintFile> {
    let mut reader = Reader::new(text);
    let mut forms = Vec::new();
    while !reader.at_end() {
        forms.push(reader.read()?);
    }

    let mut domain = fallback.cloned();
    let mut sig = Signature::default();
    let mut lengths: Vec<(String, usize, Pos)> = Vec::new();
    let mut delta = None;
    let mut pending = Vec::new();

    for form in &forms {
        let Sexp::List(items, pos) = form else {
            return Err(form.pos().syntax("expected a top-level form"));
        };
        let pos = *pos;
        let head = items.first().map(|h| symbol(h, "a declaration keyword")).transpose()?;
        let args = items.get(1..).unwrap_or_default();
        match head {
            Some("var") => {
                if !pending.is_empty() {
                    return Err(pos.syntax("declarations must precede `obs` formulas"));
                }
                if !(3..=4).contains(&args.len()) {
                    return Err(pos.syntax("expected (var NAME SORT LEVEL [LENGTH])"));
                }
                let name = symbol(&args[0], "a variable name")?;
                let sort = match symbol(&args[1], "a sort")? {
                    "string" => Sort::String,
                    "int" => Sort::Int,
                    s => return Err(args[1].pos().syntax(format!("unknown sort `{s}`"))),
                };
                let level = match symbol(&args[2], "a level")? {
                    "high" => Level::High,
                    "low" => Level::Low,
                    s => return Err(args[2].pos().syntax(format!("unknown level `{s}`"))),
                };
                if let Some(len) = args.get(3) {
                    let n = nonneg(len, "a length")? as usize;
                    lengths.push((name.to_string(), n, len.pos()));
                }
                if !sig.declare(Var {
                    name: name.to_string(),
                    sort,
                    level,
                }) {
                    return Err(pos.syntax(format!("variable `{name}` declared twice")));
                }
            }
            Some("domain") => {
                if !pending.is_empty() {
                    return Err(pos.syntax("declarations must precede `obs` formulas"));
                }
                let [Sexp::Str(alpha, _), len, mode] = args else {
                    return Err(pos.syntax("expected (domain \"SYMBOLS\" LENGTH exact|up_to)"));
                };
                let len = nonneg(len, "a length")? as usize;
                let mode = match symbol(mode, "a length mode")? {
                    "exact" => LengthMode::Exact,
                    "up_to" => LengthMode::UpTo,
                    s => return Err(mode.pos().syntax(format!("unknown length mode `{s}`"))),
                };
                domain = Some(
                    Domain::new(alpha, len, mode)
                        .map_err(|e| pos.err(ParseErrorKind::Domain(e.to_string())))?,
                );
            }
            Some("delta") => {
                let [d] = args else {
                    return Err(pos.syntax("expected (delta N)"));
                };
                delta = Some(nonneg(d, "a threshold")?);
            }
            Some("obs") => {
                let [cost, e] = args else {
                    return Err(pos.syntax("expected (obs COST formula)"));
                };
                pending.push((nonneg(cost, "a cost")?, e));
            }
            Some(other) => return Err(pos.syntax(format!("unknown top-level form `{other}`"))),
            None => return Err(pos.syntax("empty top-level form")),
        }
    }

    let Some(mut domain) = domain else {
        return Err(Pos { line: 1, col: 1 }.err(ParseErrorKind::Domain(
            "no domain declared and none supplied".into(),
        )));
    };
    for (name, len, pos) in lengths {
        domain = domain
            .with_track_length(&name, len)
            .map_err(|e| pos.err(ParseErrorKind::Domain(e.to_string())))?;
    }
    let ctx = Ctx {
        sig: &sig,
        domain: &domain,
    };
    let paths = pending
        .into_iter()
        .map(|(cost, e)| Ok((cost, ctx.expr(e)?)))
        .collect::<PResult<Vec<_>>>()?;
    Ok(ConstraintFile {
        domain,
        signature: sig,
        delta,
        paths,
    })
}

impl ConstraintFile {
    /// Renders the file back into DSL text.
    pub fn to_dsl(&self) -> String {
        use std::fmt::Write;
        let d = &self.domain;
        let mut out = String::new();
        let alpha = d.alphabet_string().replace('\\', "\\\\").replace('"', "\\\"");
        let _ = writeln!(out, "(domain \"{alpha}\" {} {})", d.length_bound(), d.length_mode());
        if let Some(delta) = self.delta {
            let _ = writeln!(out, "(delta {delta})");
        }
        for v in self.signature.vars() {
            let sort = match v.sort {
                Sort::String => "string",
                Sort::Int => "int",
            };
            let level = match v.level {
                Level::High => "high",
                Level::Low => "low",
            };
            let _ = write!(out, "(var {} {sort} {level}", v.name);
            if let Some(len) = d.overrides().get(&v.name) {
                let _ = write!(out, " {len}");
            }
            out.push_str(")\n");
        }
        for (cost, c) in &self.paths {
            let _ = writeln!(out, "(obs {cost} {c})");
        }
        out
    }
}
