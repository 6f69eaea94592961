//! Hand-written lexer and recursive-descent parser for `.dmtl` programs and
//! `.dtf` datasets.

use super::{is_keyword, Fact, GroundAtom, MetricAtom, Program, RelationalAtom, Rule, Symbol, Term};
use crate::error::{Error, Result};
use crate::intervals::{parse_rational, Bound};
use crate::Interval;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Inf(bool),
    Quoted(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    At,
    Implies,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, message: message.into() }
}

fn lex(text: &str, first_line: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, first_line, 1usize);
    let is_ident = |c: char| c.is_ascii_alphanumeric() || c == '_';
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Token { tok, line: tl, column: tc });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '[' => push(Tok::LBrack, 1, &mut i, &mut col),
            ']' => push(Tok::RBrack, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            ':' if chars.get(i + 1) == Some(&'-') => push(Tok::Implies, 2, &mut i, &mut col),
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => return Err(syntax(tl, tc, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(j + 1) {
                                Some(&e) if e != '\n' => s.push(e),
                                _ => return Err(syntax(tl, tc, "bad escape")),
                            }
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                let len = j + 1 - i;
                push(Tok::Quoted(s), len, &mut i, &mut col);
            }
            '+' | '-' | '0'..='9' => {
                let mut j = i;
                let mut s = String::new();
                if c == '+' || c == '-' {
                    let rest: String = chars[i + 1..].iter().take(4).collect();
                    if rest.starts_with("inf") && !rest[3..].chars().next().is_some_and(is_ident) {
                        push(Tok::Inf(c == '-'), 4, &mut i, &mut col);
                        continue;
                    }
                    if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                        return Err(syntax(tl, tc, format!("unexpected `{c}`")));
                    }
                    s.push(c);
                    j += 1;
                }
                let digits = |j: &mut usize, s: &mut String| {
                    while *j < chars.len() && chars[*j].is_ascii_digit() {
                        s.push(chars[*j]);
                        *j += 1;
                    }
                };
                digits(&mut j, &mut s);
                if matches!(chars.get(j), Some('.') | Some('/')) && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit())
                {
                    s.push(chars[j]);
                    j += 1;
                    digits(&mut j, &mut s);
                }
                if chars.get(j).is_some_and(|&d| is_ident(d)) {
                    return Err(syntax(tl, tc, "malformed number"));
                }
                let len = j - i;
                push(Tok::Number(s), len, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && is_ident(chars[j]) {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let len = j - i;
                push(Tok::Ident(s), len, &mut i, &mut col);
            }
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str, first_line: usize) -> Result<Self> {
        Ok(Parser { toks: lex(text, first_line)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.column)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(syntax(l, c, message))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    fn interval(&mut self) -> Result<Interval> {
        let left_open = match self.bump() {
            Tok::LBrack => false,
            Tok::LParen => true,
            other => return self.error(format!("expected interval, found {}", describe(&other))),
        };
        let left = self.bound()?;
        self.expect(Tok::Comma, "`,` in interval")?;
        let right = self.bound()?;
        let right_open = match self.bump() {
            Tok::RBrack => false,
            Tok::RParen => true,
            other => return self.error(format!("expected `]` or `)`, found {}", describe(&other))),
        };
        if left == Bound::PosInf || right == Bound::NegInf {
            return self.error("infinity on the wrong side of an interval");
        }
        if (!left.is_finite() && !left_open) || (!right.is_finite() && !right_open) {
            return self.error("infinite interval ends must use an open bracket");
        }
        Ok(Interval::new(left, right, left_open, right_open))
    }

    fn bound(&mut self) -> Result<Bound<crate::Rational>> {
        match self.bump() {
            Tok::Number(s) => match parse_rational(&s) {
                Ok(v) => Ok(Bound::Finite(v)),
                Err(_) => self.error(format!("malformed number `{s}`")),
            },
            Tok::Inf(true) => Ok(Bound::NegInf),
            Tok::Inf(false) => Ok(Bound::PosInf),
            Tok::Ident(s) if s == "inf" => Ok(Bound::PosInf),
            other => self.error(format!("expected a number, found {}", describe(&other))),
        }
    }

    fn formula(&mut self) -> Result<MetricAtom> {
        let mut left = self.unary()?;
        loop {
            let kw = match self.peek() {
                Tok::Ident(s) if s == "SINCE" || s == "UNTIL" => s.clone(),
                _ => return Ok(left),
            };
            self.bump();
            let r = self.interval()?;
            let right = self.unary()?;
            left = if kw == "SINCE" {
                MetricAtom::Since(r, Box::new(left), Box::new(right))
            } else {
                MetricAtom::Until(r, Box::new(left), Box::new(right))
            };
        }
    }

    fn unary(&mut self) -> Result<MetricAtom> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            Tok::LParen => {
                self.bump();
                let m = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(m);
            }
            other => return self.error(format!("expected a metric atom, found {}", describe(other))),
        };
        let build: fn(Interval, Box<MetricAtom>) -> MetricAtom = match kw.as_str() {
            "DIAMONDMINUS" => MetricAtom::DiamondMinus,
            "DIAMONDPLUS" => MetricAtom::DiamondPlus,
            "BOXMINUS" => MetricAtom::BoxMinus,
            "BOXPLUS" => MetricAtom::BoxPlus,
            "TOP" => {
                self.bump();
                return Ok(MetricAtom::Top);
            }
            "BOTTOM" => {
                self.bump();
                return Ok(MetricAtom::Bottom);
            }
            "SINCE" | "UNTIL" => return self.error(format!("`{kw}` needs a left operand")),
            _ => return Ok(MetricAtom::Rel(self.atom()?)),
        };
        self.bump();
        let r = self.interval()?;
        let m = self.unary()?;
        Ok(build(r, Box::new(m)))
    }

    fn atom(&mut self) -> Result<RelationalAtom> {
        let name = match self.bump() {
            Tok::Ident(s) if !is_keyword(&s) => s,
            other => return self.error(format!("expected a predicate, found {}", describe(&other))),
        };
        if !name.starts_with(|c: char| c.is_ascii_alphabetic()) {
            return self.error(format!("predicate `{name}` must start with a letter"));
        }
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() != Tok::RParen {
                loop {
                    args.push(self.term()?);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "`)` after arguments")?;
        }
        Ok(RelationalAtom { predicate: Symbol::new(&name), args })
    }

    fn term(&mut self) -> Result<Term> {
        match self.bump() {
            Tok::Ident(s) if s.starts_with(|c: char| c.is_ascii_uppercase()) => Ok(Term::variable(&s)),
            Tok::Ident(s) if s.starts_with(|c: char| c.is_ascii_lowercase()) => Ok(Term::constant(&s)),
            Tok::Number(s) if s.bytes().all(|b| b.is_ascii_digit()) => Ok(Term::constant(&s)),
            Tok::Quoted(s) => Ok(Term::constant(&s)),
            other => self.error(format!("expected a term, found {}", describe(&other))),
        }
    }

    fn rule(&mut self) -> Result<Rule> {
        let (line, column) = self.here();
        let head = self.formula()?;
        self.expect(Tok::Implies, "`:-`")?;
        let mut body = vec![self.formula()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            body.push(self.formula()?);
        }
        self.expect(Tok::Dot, "`.` ending the rule")?;
        Rule::new(head, body).map_err(|e| match e {
            Error::Syntax { message, .. } => syntax(line, column, message),
            other => other,
        })
    }

    fn fact(&mut self) -> Result<Fact> {
        let (line, column) = self.here();
        let atom = self.atom()?;
        self.expect(Tok::At, "`@`")?;
        let interval = self.interval()?;
        if interval.is_empty() {
            return Err(syntax(line, column, "fact with an empty interval"));
        }
        if !atom.is_ground() {
            return Err(Error::NonGround(format!("{atom}@{interval}")));
        }
        let args = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Constant(c) => c.clone(),
                Term::Variable(_) => unreachable!("checked ground"),
            })
            .collect();
        Ok(Fact::new(GroundAtom { predicate: atom.predicate, args }, interval))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(s) => format!("`{s}`"),
        Tok::Inf(n) => if *n { "`-inf`" } else { "`+inf`" }.to_string(),
        Tok::Quoted(s) => format!("\"{s}\""),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBrack => "`[`".into(),
        Tok::RBrack => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::At => "`@`".into(),
        Tok::Implies => "`:-`".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_program(text: &str) -> Result<Program> {
    let mut p = Parser::new(text, 1)?;
    let mut rules = Vec::new();
    while !p.at_eof() {
        rules.push(p.rule()?);
    }
    Ok(Program::new(rules))
}

/// Parses a dataset: one fact per line, `#` comments and blank lines ignored.
pub fn parse_dataset(text: &str) -> Result<Vec<Fact>> {
    let mut facts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut p = Parser::new(line, n + 1)?;
        if p.at_eof() {
            continue;
        }
        facts.push(p.fact()?);
        if !p.at_eof() {
            return p.error("trailing input after fact");
        }
    }
    Ok(facts)
}

/// Parses a single fact such as `P(a)@[1,2]`.
pub fn parse_fact(text: &str) -> Result<Fact> {
    let mut p = Parser::new(text, 1)?;
    let f = p.fact()?;
    if !p.at_eof() {
        return p.error("trailing input after fact");
    }
    Ok(f)
}

/// Parses a single metric atom (no rule syntax).
pub fn parse_metric_atom(text: &str) -> Result<MetricAtom> {
    let mut p = Parser::new(text, 1)?;
    let m = p.formula()?;
    if !p.at_eof() {
        return p.error("trailing input after formula");
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn immune_rule() {
        let p = parse_program("Immune(X) :- BOXMINUS[0,7] NoSympt(X) .").unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert_eq!(r.head(), &MetricAtom::Rel(RelationalAtom::new("Immune", vec![Term::variable("X")])));
        assert!(matches!(&r.body()[0], MetricAtom::BoxMinus(i, m)
            if i.to_string() == "[0,7]" && matches!(**m, MetricAtom::Rel(_))));
    }

    #[test]
    fn box_head_accepted() {
        let p = parse_program("BOXMINUS[0,1] ExcHeat(X) :- BOXMINUS[0,1] Temp24(X), DIAMONDMINUS[0,1] Temp41(X) .")
            .unwrap();
        assert!(matches!(p.rules[0].head(), MetricAtom::BoxMinus(..)));
        assert_eq!(p.rules[0].body().len(), 2);
    }

    #[test]
    fn unsafe_rule_rejected() {
        let e = parse_program("P(X) :- DIAMONDPLUS[0,1] Q(Y) .").unwrap_err();
        assert!(matches!(e, Error::UnsafeRule { .. }));
    }

    #[test]
    fn negative_operator_bound_rejected() {
        assert!(matches!(parse_program("P :- DIAMONDMINUS[-1,1] Q .").unwrap_err(), Error::BadOperatorInterval(_)));
    }

    #[test]
    fn forbidden_head_rejected() {
        assert!(matches!(parse_program("DIAMONDPLUS[0,1] P :- Q .").unwrap_err(), Error::ForbiddenHead(_)));
    }

    #[test]
    fn dataset_lines() {
        let d = parse_dataset("# comment\nNoSympt(james)@[0,14]\n\nBday(turing)@[0,0]  # trailing\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].to_string(), "NoSympt(james)@[0,14]");
        assert!(d[1].interval.is_punctual());
        assert!(matches!(parse_dataset("P(X)@[0,1]").unwrap_err(), Error::NonGround(_)));
        assert!(parse_dataset("P(a)@(1,1]").is_err());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_program("P(X) :- Q(X)\nR(X) :- .").unwrap_err() {
            Error::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dataset("P(a)@[0,1]\nQ(b)@[0,").unwrap_err() {
            Error::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_operators_and_precedence() {
        let m = parse_metric_atom("BOXMINUS[0,1] A SINCE[1,2] B UNTIL[0,+inf) C").unwrap();
        match m {
            MetricAtom::Until(r, l, _) => {
                assert_eq!(r.to_string(), "[0,+inf)");
                assert!(matches!(*l, MetricAtom::Since(_, ref a, _) if matches!(**a, MetricAtom::BoxMinus(..))));
            }
            other => panic!("unexpected {other}"),
        }
        let n = parse_metric_atom("DIAMONDPLUS(0,0.5] (A SINCE[0,1] B)").unwrap();
        assert_eq!(n.to_string(), "DIAMONDPLUS(0,1/2] (A SINCE[0,1] B)");
    }

    #[test]
    fn decimals_and_terminators() {
        let p = parse_program("P(a) :- DIAMONDMINUS[0.5,1.5] Q(1).R :- TOP.").unwrap();
        assert_eq!(p.rules.len(), 2);
        assert_eq!(p.rules[0].to_string(), "P(a) :- DIAMONDMINUS[1/2,3/2] Q(1) .");
    }
}
