//! Parser for the statement language.
//!
//! ```text
//! stmt   := UPDATE r SET a = e {, a = e} [WHERE c] | DELETE FROM r [WHERE c]
//!         | INSERT INTO r VALUES (v, ...) | INSERT INTO r query | NOOP r
//! query  := term {(UNION | EXCEPT) term}
//! term   := SELECT (* | e [AS a] {, ...}) FROM source [WHERE c]
//!         | VALUES (v, ...) | ( query )
//! source := r | ( query ) | source JOIN source ON a = b {AND a = b}
//! ```
//!
//! Printing lives in the `Display` impls of the AST types; printing then
//! parsing yields the same AST.

use crate::error::{Error, Result};
use crate::expr::{Cond, Expr};
use crate::query::{ProjItem, Query};
use crate::statement::{SetClause, Statement};
use crate::value::{ArithOp, CmpOp, Decimal, Value};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: &[&str] = &["<>", "!=", "<=", ">=", "(", ")", ",", "=", "<", ">", "+", "-", "*", "/", ";"];

fn lex(text: &str, first_line: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, first_line, 1);
    let err = |line, column, message: String| Error::Syntax {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - s;
            push(&mut out, Tok::Word(chars[s..i].iter().collect()));
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            col += i - s;
            push(&mut out, Tok::Number(chars[s..i].iter().collect()));
        } else if c == '\'' || c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err(start_line, start_col, "unterminated literal".into())),
                    Some(&q) if q == c => {
                        if chars.get(i + 1) == Some(&c) {
                            s.push(c);
                            i += 2;
                            col += 2;
                        } else {
                            i += 1;
                            col += 1;
                            break;
                        }
                    }
                    Some(&ch) => {
                        if ch == '\n' {
                            line += 1;
                            col = 1;
                        } else {
                            col += 1;
                        }
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            push(&mut out, if c == '\'' { Tok::Str(s) } else { Tok::Quoted(s) });
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    i += s.len();
                    col += s.len();
                    push(&mut out, Tok::Sym(s));
                }
                None => return Err(err(line, col, format!("unexpected character `{c}`"))),
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str, first_line: usize) -> Result<Parser> {
        Ok(Parser {
            toks: lex(text, first_line)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Word(w) if !crate::expr::is_keyword(&w) => {
                self.bump();
                Ok(w)
            }
            Tok::Quoted(q) => {
                self.bump();
                Ok(q)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn finish(&mut self) -> Result<()> {
        self.eat_sym(";");
        if *self.peek() != Tok::Eof {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(())
    }

    // statements

    fn statement(&mut self) -> Result<Statement> {
        if self.eat_kw("update") {
            let relation = self.ident()?;
            self.expect_kw("set")?;
            let mut set = Vec::new();
            loop {
                let attr = self.ident()?;
                self.expect_sym("=")?;
                set.push(SetClause {
                    attr,
                    expr: self.expr()?,
                });
                if !self.eat_sym(",") {
                    break;
                }
            }
            let cond = if self.eat_kw("where") { self.cond()? } else { Cond::True };
            Ok(Statement::Update { relation, set, cond })
        } else if self.eat_kw("delete") {
            self.expect_kw("from")?;
            let relation = self.ident()?;
            let cond = if self.eat_kw("where") { self.cond()? } else { Cond::True };
            Ok(Statement::Delete { relation, cond })
        } else if self.eat_kw("insert") {
            self.expect_kw("into")?;
            let relation = self.ident()?;
            if self.eat_kw("values") {
                let values = self.tuple()?;
                Ok(Statement::InsertTuple { relation, values })
            } else {
                let query = self.query()?;
                Ok(Statement::InsertQuery { relation, query })
            }
        } else if self.eat_kw("noop") {
            Ok(Statement::Noop {
                relation: self.ident()?,
            })
        } else {
            Err(self.error("expected UPDATE, DELETE, INSERT or NOOP"))
        }
    }

    fn tuple(&mut self) -> Result<Vec<Value>> {
        self.expect_sym("(")?;
        let mut vs = Vec::new();
        if !self.is_sym(")") {
            loop {
                vs.push(self.literal()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(vs)
    }

    fn literal(&mut self) -> Result<Value> {
        let save = self.pos;
        let neg = self.eat_sym("-");
        match self.bump() {
            Tok::Number(n) => number(&n, neg).map_err(|e| self.error(e.to_string())),
            Tok::Str(s) if !neg => Ok(Value::text(&s)),
            Tok::Word(w) if !neg && w.eq_ignore_ascii_case("null") => Ok(Value::Null),
            Tok::Word(w) if !neg && w.eq_ignore_ascii_case("true") => Ok(Value::Boolean(true)),
            Tok::Word(w) if !neg && w.eq_ignore_ascii_case("false") => Ok(Value::Boolean(false)),
            _ => {
                self.pos = save;
                Err(self.error("expected literal"))
            }
        }
    }

    // queries

    fn query(&mut self) -> Result<Query> {
        let mut q = self.term()?;
        loop {
            if self.eat_kw("union") {
                q = Query::union(q, self.term()?);
            } else if self.eat_kw("except") {
                q = Query::difference(q, self.term()?);
            } else {
                return Ok(q);
            }
        }
    }

    fn term(&mut self) -> Result<Query> {
        if self.eat_kw("values") {
            return Ok(Query::Singleton { values: self.tuple()? });
        }
        if self.eat_sym("(") {
            let q = self.query()?;
            self.expect_sym(")")?;
            return Ok(q);
        }
        self.expect_kw("select")?;
        let items = if self.eat_sym("*") {
            None
        } else {
            let mut items = Vec::new();
            loop {
                let expr = self.expr()?;
                let name = if self.eat_kw("as") {
                    self.ident()?
                } else {
                    match expr.as_attr() {
                        Some(a) => a.to_string(),
                        None => return Err(self.error("computed column needs AS name")),
                    }
                };
                items.push(ProjItem { name, expr });
                if !self.eat_sym(",") {
                    break;
                }
            }
            Some(items)
        };
        self.expect_kw("from")?;
        let mut q = self.source()?;
        if self.eat_kw("where") {
            q = Query::select(self.cond()?, q);
        }
        Ok(match items {
            Some(items) => Query::project(items, q),
            None => q,
        })
    }

    fn source(&mut self) -> Result<Query> {
        let mut q = self.source_primary()?;
        while self.eat_kw("join") {
            let r = self.source_primary()?;
            self.expect_kw("on")?;
            let mut on = Vec::new();
            loop {
                let a = self.ident()?;
                self.expect_sym("=")?;
                let b = self.ident()?;
                on.push((a, b));
                if !self.eat_kw("and") {
                    break;
                }
            }
            q = Query::join(q, r, on);
        }
        Ok(q)
    }

    fn source_primary(&mut self) -> Result<Query> {
        if self.eat_sym("(") {
            let q = self.query()?;
            self.expect_sym(")")?;
            Ok(q)
        } else {
            Ok(Query::base(self.ident()?))
        }
    }

    // conditions

    fn cond(&mut self) -> Result<Cond> {
        let mut args = vec![self.and_cond()?];
        while self.eat_kw("or") {
            args.push(self.and_cond()?);
        }
        Ok(if args.len() == 1 { args.pop().unwrap() } else { Cond::Or { args } })
    }

    fn and_cond(&mut self) -> Result<Cond> {
        let mut args = vec![self.not_cond()?];
        while self.eat_kw("and") {
            args.push(self.not_cond()?);
        }
        Ok(if args.len() == 1 { args.pop().unwrap() } else { Cond::And { args } })
    }

    fn not_cond(&mut self) -> Result<Cond> {
        if self.eat_kw("not") {
            return Ok(Cond::not(self.not_cond()?));
        }
        self.atom_cond()
    }

    fn at_cmp_or_arith(&self) -> bool {
        matches!(self.peek(), Tok::Sym(s) if ["=", "<>", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/"].contains(s))
            || self.is_kw("is")
    }

    fn atom_cond(&mut self) -> Result<Cond> {
        if self.is_kw("true") || self.is_kw("false") {
            let is_true = self.is_kw("true");
            let save = self.pos;
            self.bump();
            if !self.at_cmp_or_arith() {
                return Ok(if is_true { Cond::True } else { Cond::False });
            }
            self.pos = save;
        }
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.eat_sym(")") && !self.at_cmp_or_arith() {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        let left = self.expr()?;
        if self.eat_kw("is") {
            let neg = self.eat_kw("not");
            self.expect_kw("null")?;
            let c = Cond::is_null(left);
            return Ok(if neg { Cond::not(c) } else { c });
        }
        let op = match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("<>") | Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Err(self.error("expected comparison operator")),
        };
        self.bump();
        let right = self.expr()?;
        Ok(Cond::Cmp { op, left, right })
    }

    // expressions

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.mul_expr()?;
        loop {
            let op = if self.eat_sym("+") {
                ArithOp::Add
            } else if self.eat_sym("-") {
                ArithOp::Sub
            } else {
                return Ok(e);
            };
            e = Expr::arith(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                ArithOp::Mul
            } else if self.eat_sym("/") {
                ArithOp::Div
            } else {
                return Ok(e);
            };
            e = Expr::arith(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.is_sym("-") {
            if let Tok::Number(n) = self.peek_at(1).clone() {
                self.bump();
                self.bump();
                return number(&n, true).map(Expr::lit).map_err(|e| self.error(e.to_string()));
            }
            self.bump();
            return Ok(Expr::arith(ArithOp::Sub, Expr::int(0), self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_kw("case") {
            return self.case_tail();
        }
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                number(&n, false).map(Expr::lit).map_err(|e| self.error(e.to_string()))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::lit(Value::text(&s)))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("null") => {
                self.bump();
                Ok(Expr::lit(Value::Null))
            }
            Tok::Word(w) if w.eq_ignore_ascii_case("true") || w.eq_ignore_ascii_case("false") => {
                self.bump();
                Ok(Expr::lit(Value::Boolean(w.eq_ignore_ascii_case("true"))))
            }
            _ => Ok(Expr::attr(self.ident()?)),
        }
    }

    fn case_tail(&mut self) -> Result<Expr> {
        self.expect_kw("when")?;
        let c = self.cond()?;
        self.expect_kw("then")?;
        let t = self.expr()?;
        let e = if self.is_kw("when") {
            self.case_tail()?
        } else if self.eat_kw("else") {
            let e = self.expr()?;
            self.expect_kw("end")?;
            e
        } else {
            self.expect_kw("end")?;
            Expr::lit(Value::Null)
        };
        Ok(Expr::case(c, t, e))
    }
}

fn number(text: &str, neg: bool) -> Result<Value> {
    let s = if neg { format!("-{text}") } else { text.to_string() };
    if text.contains('.') {
        Ok(Value::Decimal(Decimal::parse(&s)?))
    } else {
        s.parse::<i64>()
            .map(Value::Integer)
            .map_err(|_| Error::Overflow(format!("integer literal {s}")))
    }
}

pub fn parse_statement(text: &str) -> Result<Statement> {
    let mut p = Parser::new(text, 1)?;
    let s = p.statement()?;
    p.finish()?;
    Ok(s)
}

pub fn parse_query(text: &str) -> Result<Query> {
    let mut p = Parser::new(text, 1)?;
    let q = p.query()?;
    p.finish()?;
    Ok(q)
}

pub fn parse_cond(text: &str) -> Result<Cond> {
    let mut p = Parser::new(text, 1)?;
    let c = p.cond()?;
    p.finish()?;
    Ok(c)
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text, 1)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a history: a JSON array of statement ASTs, or one statement per
/// line with `--` comments and blank lines ignored.
pub fn parse_history(text: &str) -> Result<Vec<Statement>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let code = strip_comment(line);
        if code.trim().is_empty() {
            continue;
        }
        let mut p = Parser::new(code, i + 1)?;
        let s = p.statement()?;
        p.finish()?;
        out.push(s);
    }
    Ok(out)
}

/// Drops a trailing `--` comment that is not inside a literal.
fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    let b: Vec<char> = line.chars().collect();
    let mut byte = 0;
    for (i, &c) in b.iter().enumerate() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == '-' && b.get(i + 1) == Some(&'-') => return &line[..byte],
            None => {}
        }
        byte += c.len_utf8();
    }
    line
}

/// Prints a history in the line-oriented text form.
pub fn print_history(h: &[Statement]) -> String {
    h.iter().map(|s| format!("{s}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example_statements_parse() {
        let u1 = parse_statement("UPDATE Order SET ShippingFee=0 WHERE Price>=50").unwrap();
        assert_eq!(
            u1,
            Statement::update(
                "Order",
                vec![("ShippingFee", Expr::int(0))],
                Expr::attr("Price").cmp(CmpOp::Ge, Expr::int(50))
            )
        );
        let u2 = parse_statement(
            "UPDATE Order SET ShippingFee = ShippingFee + 5 WHERE Country = 'UK' AND Price <= 100",
        )
        .unwrap();
        assert_eq!(parse_statement(&u2.to_string()).unwrap(), u2);
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_history("UPDATE R SET A = 1\nDELETE R WHERE A = 1") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parenthesized_conditions_backtrack() {
        let c = parse_cond("(A + 1) * 2 > 3 AND (B = 1 OR C = 2)").unwrap();
        assert_eq!(parse_cond(&c.to_string()).unwrap(), c);
        let Cond::And { args } = c else { panic!() };
        assert!(matches!(args[1], Cond::Or { .. }));
    }

    #[test]
    fn queries_round_trip() {
        for q in [
            "SELECT * FROM R",
            "SELECT A, B + 1 AS C FROM R WHERE A > 2",
            "SELECT B, B AS B2 FROM R JOIN S ON A = C WHERE A = 5",
            "SELECT * FROM R UNION (SELECT * FROM S EXCEPT VALUES (1, 'x'))",
        ] {
            let parsed = parse_query(q).unwrap();
            assert_eq!(parse_query(&parsed.to_string()).unwrap(), parsed, "{q}");
        }
    }

    #[test]
    fn comments_and_quotes() {
        let h = parse_history("-- header\nINSERT INTO R VALUES (1, 'a--b', -2.50) -- trailing\n\nNOOP R\n").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].to_string(), "INSERT INTO R VALUES (1, 'a--b', -2.50)");
        assert_eq!(parse_statement("DELETE FROM \"my rel\" WHERE false").unwrap().relation(), "my rel");
    }
}
