//! Abstract syntax of programs, datasets and query facts, together with
//! the concrete text format, validation and eager grounding.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Interval;

pub use parser::{parse_dataset, parse_fact, parse_metric_atom, parse_program};

/// An interned-by-sharing name of a predicate, constant or variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Variable-to-constant bindings.
pub type Substitution = BTreeMap<Symbol, Symbol>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Constant(Symbol),
    Variable(Symbol),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct RelationalAtom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

/// A relational atom without variables; the key type of the fact store.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: Symbol,
    pub args: Arc<[Symbol]>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum MetricAtom {
    Top,
    Bottom,
    Rel(RelationalAtom),
    DiamondMinus(Interval, Box<MetricAtom>),
    DiamondPlus(Interval, Box<MetricAtom>),
    BoxMinus(Interval, Box<MetricAtom>),
    BoxPlus(Interval, Box<MetricAtom>),
    Since(Interval, Box<MetricAtom>, Box<MetricAtom>),
    Until(Interval, Box<MetricAtom>, Box<MetricAtom>),
}

/// `head :- body` with the head restricted to boxes over an atom or ⊥.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Rule {
    head: MetricAtom,
    body: Vec<MetricAtom>,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub atom: GroundAtom,
    pub interval: Interval,
}

// ---------------------------------------------------------------------------
// Terms and atoms
// ---------------------------------------------------------------------------

impl Term {
    pub fn constant(name: &str) -> Self {
        Term::Constant(Symbol::new(name))
    }

    pub fn variable(name: &str) -> Self {
        Term::Variable(Symbol::new(name))
    }

    pub fn resolve(&self, sigma: &Substitution) -> Option<Symbol> {
        match self {
            Term::Constant(c) => Some(c.clone()),
            Term::Variable(v) => sigma.get(v).cloned(),
        }
    }
}

impl RelationalAtom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        RelationalAtom { predicate: Symbol::new(predicate), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Constant(_)))
    }

    pub fn ground(&self, sigma: &Substitution) -> Option<GroundAtom> {
        let args = self.args.iter().map(|t| t.resolve(sigma)).collect::<Option<Vec<_>>>()?;
        Some(GroundAtom { predicate: self.predicate.clone(), args: args.into() })
    }

    pub fn apply(&self, sigma: &Substitution) -> RelationalAtom {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Variable(v) => sigma.get(v).map_or_else(|| t.clone(), |c| Term::Constant(c.clone())),
                Term::Constant(_) => t.clone(),
            })
            .collect();
        RelationalAtom { predicate: self.predicate.clone(), args }
    }

    pub fn variables(&self) -> impl Iterator<Item = &Symbol> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(v) => Some(v),
            Term::Constant(_) => None,
        })
    }
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        GroundAtom { predicate: Symbol::new(predicate), args: args.iter().map(|a| Symbol::new(a)).collect() }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn to_relational(&self) -> RelationalAtom {
        RelationalAtom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|c| Term::Constant(c.clone())).collect(),
        }
    }
}

impl Fact {
    pub fn new(atom: GroundAtom, interval: Interval) -> Self {
        debug_assert!(!interval.is_empty());
        Fact { atom, interval }
    }
}

// ---------------------------------------------------------------------------
// Metric atoms
// ---------------------------------------------------------------------------

impl MetricAtom {
    pub fn rel(atom: RelationalAtom) -> Self {
        MetricAtom::Rel(atom)
    }

    /// The operator interval, if this is a temporal operator.
    pub fn interval(&self) -> Option<&Interval> {
        match self {
            MetricAtom::DiamondMinus(r, _)
            | MetricAtom::DiamondPlus(r, _)
            | MetricAtom::BoxMinus(r, _)
            | MetricAtom::BoxPlus(r, _)
            | MetricAtom::Since(r, _, _)
            | MetricAtom::Until(r, _, _) => Some(r),
            _ => None,
        }
    }

    /// Direct sub-formulas, left operand first.
    pub fn children(&self) -> Vec<&MetricAtom> {
        match self {
            MetricAtom::Top | MetricAtom::Bottom | MetricAtom::Rel(_) => Vec::new(),
            MetricAtom::DiamondMinus(_, m)
            | MetricAtom::DiamondPlus(_, m)
            | MetricAtom::BoxMinus(_, m)
            | MetricAtom::BoxPlus(_, m) => vec![m],
            MetricAtom::Since(_, a, b) | MetricAtom::Until(_, a, b) => vec![a, b],
        }
    }

    /// Every sub-formula including `self`, children before parents.
    pub fn subformulas(&self) -> Vec<&MetricAtom> {
        let mut out = Vec::new();
        fn walk<'a>(m: &'a MetricAtom, out: &mut Vec<&'a MetricAtom>) {
            for c in m.children() {
                walk(c, out);
            }
            out.push(m);
        }
        walk(self, &mut out);
        out
    }

    pub fn relational_atoms(&self) -> Vec<&RelationalAtom> {
        self.subformulas()
            .into_iter()
            .filter_map(|m| match m {
                MetricAtom::Rel(a) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        self.relational_atoms().into_iter().flat_map(|a| a.variables().cloned()).collect()
    }

    pub fn is_ground(&self) -> bool {
        self.relational_atoms().iter().all(|a| a.is_ground())
    }

    pub fn mentions_bottom(&self) -> bool {
        self.subformulas().iter().any(|m| matches!(m, MetricAtom::Bottom))
    }

    pub fn apply(&self, sigma: &Substitution) -> MetricAtom {
        let un = |m: &MetricAtom| Box::new(m.apply(sigma));
        match self {
            MetricAtom::Top => MetricAtom::Top,
            MetricAtom::Bottom => MetricAtom::Bottom,
            MetricAtom::Rel(a) => MetricAtom::Rel(a.apply(sigma)),
            MetricAtom::DiamondMinus(r, m) => MetricAtom::DiamondMinus(r.clone(), un(m)),
            MetricAtom::DiamondPlus(r, m) => MetricAtom::DiamondPlus(r.clone(), un(m)),
            MetricAtom::BoxMinus(r, m) => MetricAtom::BoxMinus(r.clone(), un(m)),
            MetricAtom::BoxPlus(r, m) => MetricAtom::BoxPlus(r.clone(), un(m)),
            MetricAtom::Since(r, a, b) => MetricAtom::Since(r.clone(), un(a), un(b)),
            MetricAtom::Until(r, a, b) => MetricAtom::Until(r.clone(), un(a), un(b)),
        }
    }

    /// Whether the formula may stand in a rule head: ⊥ or an atom under
    /// any number of boxes.
    pub fn is_head_form(&self) -> bool {
        match self {
            MetricAtom::Bottom | MetricAtom::Rel(_) => true,
            MetricAtom::BoxMinus(_, m) | MetricAtom::BoxPlus(_, m) => m.is_head_form(),
            _ => false,
        }
    }

    /// The relational atom at the core of a head formula.
    pub fn head_atom(&self) -> Option<&RelationalAtom> {
        match self {
            MetricAtom::Rel(a) => Some(a),
            MetricAtom::BoxMinus(_, m) | MetricAtom::BoxPlus(_, m) => m.head_atom(),
            _ => None,
        }
    }

    fn check_intervals(&self) -> Result<()> {
        for m in self.subformulas() {
            if let Some(r) = m.interval() {
                if !operator_interval_ok(r) {
                    return Err(Error::BadOperatorInterval(r.to_string()));
                }
            }
        }
        Ok(())
    }
}

/// Operator intervals must be non-empty subsets of `[0, +inf)`.
pub fn operator_interval_ok(r: &Interval) -> bool {
    if r.is_empty() {
        return false;
    }
    match r.left().finite() {
        Some(v) => *v >= crate::Rational::from_integer(0.into()),
        None => false,
    }
}

// ---------------------------------------------------------------------------
// Rules and programs
// ---------------------------------------------------------------------------

impl Rule {
    /// Builds a rule, enforcing the head restriction, safety and operator
    /// interval constraints.
    pub fn new(head: MetricAtom, body: Vec<MetricAtom>) -> Result<Rule> {
        let rule = Rule { head, body };
        if rule.body.is_empty() {
            return Err(Error::Syntax { line: 0, column: 0, message: format!("rule `{rule}` has an empty body") });
        }
        if !rule.head.is_head_form() {
            return Err(Error::ForbiddenHead(rule.head.to_string()));
        }
        rule.head.check_intervals()?;
        for b in &rule.body {
            b.check_intervals()?;
        }
        let body_vars: BTreeSet<Symbol> = rule.body.iter().flat_map(|b| b.variables()).collect();
        if let Some(v) = rule.head.variables().into_iter().find(|v| !body_vars.contains(v)) {
            return Err(Error::UnsafeRule { rule: rule.to_string(), variable: v.to_string() });
        }
        Ok(rule)
    }

    pub fn head(&self) -> &MetricAtom {
        &self.head
    }

    pub fn body(&self) -> &[MetricAtom] {
        &self.body
    }

    pub fn head_predicate(&self) -> Option<&Symbol> {
        self.head.head_atom().map(|a| &a.predicate)
    }

    pub fn has_bottom_head(&self) -> bool {
        self.head.head_atom().is_none()
    }

    pub fn body_predicates(&self) -> BTreeSet<Symbol> {
        self.body.iter().flat_map(|b| b.relational_atoms()).map(|a| a.predicate.clone()).collect()
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        let mut vs: BTreeSet<Symbol> = self.body.iter().flat_map(|b| b.variables()).collect();
        vs.extend(self.head.variables());
        vs
    }

    pub fn is_ground(&self) -> bool {
        self.variables().is_empty()
    }

    pub fn apply(&self, sigma: &Substitution) -> Rule {
        Rule { head: self.head.apply(sigma), body: self.body.iter().map(|b| b.apply(sigma)).collect() }
    }

    pub fn constants(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for m in std::iter::once(&self.head).chain(self.body.iter()) {
            for a in m.relational_atoms() {
                for t in &a.args {
                    if let Term::Constant(c) = t {
                        out.insert(c.clone());
                    }
                }
            }
        }
        out
    }
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        Program { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn body_predicates(&self) -> BTreeSet<Symbol> {
        self.rules.iter().flat_map(|r| r.body_predicates()).collect()
    }

    pub fn head_predicates(&self) -> BTreeSet<Symbol> {
        self.rules.iter().filter_map(|r| r.head_predicate().cloned()).collect()
    }

    pub fn has_bottom_head(&self) -> bool {
        self.rules.iter().any(|r| r.has_bottom_head())
    }

    pub fn constants(&self) -> BTreeSet<Symbol> {
        self.rules.iter().flat_map(|r| r.constants()).collect()
    }

    /// Every finite endpoint of every operator interval.
    pub fn operator_endpoints(&self) -> Vec<crate::Rational> {
        let mut out = Vec::new();
        for r in &self.rules {
            for m in std::iter::once(r.head()).chain(r.body().iter()) {
                for s in m.subformulas() {
                    if let Some(i) = s.interval() {
                        out.extend(i.left().finite().cloned());
                        out.extend(i.right().finite().cloned());
                    }
                }
            }
        }
        out
    }
}

/// Checks that every predicate is used with a single arity across the
/// program and the facts.
pub fn check_arities(program: &Program, facts: &[Fact]) -> Result<()> {
    let mut seen: BTreeMap<Symbol, usize> = BTreeMap::new();
    let mut note = |p: &Symbol, n: usize| -> Result<()> {
        match seen.get(p) {
            Some(&m) if m != n => Err(Error::ArityConflict { predicate: p.to_string(), first: m, second: n }),
            _ => {
                seen.insert(p.clone(), n);
                Ok(())
            }
        }
    };
    for r in &program.rules {
        for m in std::iter::once(r.head()).chain(r.body().iter()) {
            for a in m.relational_atoms() {
                note(&a.predicate, a.arity())?;
            }
        }
    }
    for f in facts {
        note(&f.atom.predicate, f.atom.arity())?;
    }
    Ok(())
}

/// All constants mentioned by a dataset.
pub fn dataset_constants(facts: &[Fact]) -> BTreeSet<Symbol> {
    facts.iter().flat_map(|f| f.atom.args.iter().cloned()).collect()
}

/// Eager grounding: every assignment of the given constants to the
/// variables of every rule.
pub fn ground(program: &Program, constants: &BTreeSet<Symbol>) -> Vec<Rule> {
    let consts: Vec<&Symbol> = constants.iter().collect();
    let mut out = Vec::new();
    for rule in &program.rules {
        let vars: Vec<Symbol> = rule.variables().into_iter().collect();
        if vars.is_empty() {
            out.push(rule.clone());
            continue;
        }
        if consts.is_empty() {
            continue;
        }
        let mut idx = vec![0usize; vars.len()];
        loop {
            let sigma: Substitution = vars.iter().cloned().zip(idx.iter().map(|&i| consts[i].clone())).collect();
            out.push(rule.apply(&sigma));
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < consts.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

const KEYWORDS: [&str; 8] = ["DIAMONDMINUS", "DIAMONDPLUS", "BOXMINUS", "BOXPLUS", "SINCE", "UNTIL", "TOP", "BOTTOM"];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_plain_constant(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some(c) if c.is_ascii_digit() => chars.all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

fn write_constant(f: &mut fmt::Formatter<'_>, c: &Symbol) -> fmt::Result {
    if is_plain_constant(c.as_str()) {
        f.write_str(c.as_str())
    } else {
        f.write_str("\"")?;
        for ch in c.as_str().chars() {
            if ch == '"' || ch == '\\' {
                f.write_str("\\")?;
            }
            write!(f, "{ch}")?;
        }
        f.write_str("\"")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => write_constant(f, c),
            Term::Variable(v) => f.write_str(v.as_str()),
        }
    }
}

impl fmt::Display for RelationalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.predicate.as_str())?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.predicate.as_str())?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write_constant(f, c)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl MetricAtom {
    fn is_binary(&self) -> bool {
        matches!(self, MetricAtom::Since(..) | MetricAtom::Until(..))
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_binary() {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for MetricAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unary = |f: &mut fmt::Formatter<'_>, kw: &str, r: &Interval, m: &MetricAtom| {
            write!(f, "{kw}{r} ")?;
            m.write_operand(f)
        };
        let binary = |f: &mut fmt::Formatter<'_>, kw: &str, r: &Interval, a: &MetricAtom, b: &MetricAtom| {
            a.write_operand(f)?;
            write!(f, " {kw}{r} ")?;
            b.write_operand(f)
        };
        match self {
            MetricAtom::Top => f.write_str("TOP"),
            MetricAtom::Bottom => f.write_str("BOTTOM"),
            MetricAtom::Rel(a) => write!(f, "{a}"),
            MetricAtom::DiamondMinus(r, m) => unary(f, "DIAMONDMINUS", r, m),
            MetricAtom::DiamondPlus(r, m) => unary(f, "DIAMONDPLUS", r, m),
            MetricAtom::BoxMinus(r, m) => unary(f, "BOXMINUS", r, m),
            MetricAtom::BoxPlus(r, m) => unary(f, "BOXPLUS", r, m),
            MetricAtom::Since(r, a, b) => binary(f, "SINCE", r, a, b),
            MetricAtom::Until(r, a, b) => binary(f, "UNTIL", r, a, b),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{b}")?;
        }
        f.write_str(" .")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.atom, self.interval)
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Renders a dataset, one fact per line.
pub fn format_dataset(facts: &[Fact]) -> String {
    let mut s = String::new();
    for fact in facts {
        s.push_str(&fact.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(s: &str) -> Rule {
        parse_program(s).unwrap().rules.remove(0)
    }

    #[test]
    fn grounding_counts() {
        let consts: BTreeSet<Symbol> = ["a", "b"].iter().map(|s| Symbol::new(s)).collect();
        let p = Program::new(vec![rule("P(X) :- Q(X) .")]);
        assert_eq!(ground(&p, &consts).len(), 2);
        let g = Program::new(vec![rule("P(a) :- Q(b) .")]);
        assert_eq!(ground(&g, &consts), g.rules);
        let three: BTreeSet<Symbol> = ["a", "b", "c"].iter().map(|s| Symbol::new(s)).collect();
        let p2 = Program::new(vec![rule("P(X) :- R(X,Y) .")]);
        assert_eq!(ground(&p2, &three).len(), 9);
    }

    #[test]
    fn rule_validation() {
        let q = |s: &str| parse_metric_atom(s).unwrap();
        assert!(Rule::new(q("DIAMONDMINUS[0,1] P"), vec![q("Q")]).is_err());
        assert!(Rule::new(q("BOXPLUS[0,1] BOXMINUS[1,1] P(X)"), vec![q("Q(X)")]).is_ok());
        assert!(Rule::new(q("TOP"), vec![q("Q")]).is_err());
        assert!(matches!(Rule::new(q("P(X)"), vec![q("Q(Y)")]), Err(Error::UnsafeRule { .. })));
    }

    #[test]
    fn arity_conflicts_detected() {
        let p = parse_program("P(X) :- Q(X) .").unwrap();
        let facts = parse_dataset("Q(a,b)@[0,1]").unwrap();
        assert!(matches!(check_arities(&p, &facts), Err(Error::ArityConflict { .. })));
    }

    #[test]
    fn quoted_constants_print_and_parse() {
        let f = Fact::new(GroundAtom::new("P", &["Hello world", "a\"b"]), "[0,1]".parse().unwrap());
        let text = f.to_string();
        assert_eq!(parse_fact(&text).unwrap(), f);
    }
}
