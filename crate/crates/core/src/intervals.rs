//! Rational time points, bounds and intervals.
//!
//! Everything here is generic over an exact ordered scalar; the reasoner
//! itself instantiates it with [`crate::Rational`].

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Num, Signed, Zero};

use crate::error::{Error, Result};
use crate::Rational;

/// Exact, totally ordered scalar usable as a time value.
///
/// Floating point types are deliberately excluded: they are not `Ord` and
/// the ruler grid of the automata procedure relies on exact divisibility.
pub trait Scalar: Clone + Ord + Hash + fmt::Debug + fmt::Display + Num + Signed + Send + Sync + 'static {}

impl<T> Scalar for T where T: Clone + Ord + Hash + fmt::Debug + fmt::Display + Num + Signed + Send + Sync + 'static {}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// An interval endpoint: a finite value or one of the two infinities.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound<T> {
    NegInf,
    Finite(T),
    PosInf,
}

impl<T: Scalar> Bound<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Bound::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Sum with the convention that an infinite left operand wins, then an
    /// infinite right operand.
    pub fn add(&self, other: &Bound<T>) -> Bound<T> {
        match (self, other) {
            (Bound::NegInf, _) => Bound::NegInf,
            (Bound::PosInf, _) => Bound::PosInf,
            (Bound::Finite(_), Bound::NegInf) => Bound::NegInf,
            (Bound::Finite(_), Bound::PosInf) => Bound::PosInf,
            (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a.clone() + b.clone()),
        }
    }

    pub fn neg(&self) -> Bound<T> {
        match self {
            Bound::NegInf => Bound::PosInf,
            Bound::PosInf => Bound::NegInf,
            Bound::Finite(v) => Bound::Finite(-v.clone()),
        }
    }

    pub fn sub(&self, other: &Bound<T>) -> Bound<T> {
        self.add(&other.neg())
    }
}

impl<T: fmt::Display> fmt::Display for Bound<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => f.write_str("-inf"),
            Bound::PosInf => f.write_str("+inf"),
            Bound::Finite(v) => write!(f, "{v}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Intervals
// ---------------------------------------------------------------------------

/// A (possibly empty) convex set of time points.
///
/// Values are always in normal form: infinite ends are open, a degenerate
/// interval is closed on both sides, and every empty set is the single
/// value returned by [`Interval::empty`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Interval<T> {
    left: Bound<T>,
    right: Bound<T>,
    left_open: bool,
    right_open: bool,
}

/// The five endpoint operations on intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntervalOp {
    Closure,
    Minus,
    CircleMinus,
    Plus,
    CirclePlus,
}

impl IntervalOp {
    pub const ALL: [IntervalOp; 5] =
        [IntervalOp::Closure, IntervalOp::Minus, IntervalOp::CircleMinus, IntervalOp::Plus, IntervalOp::CirclePlus];
}

/// Builds the canonical interval for the given endpoints.
pub fn normalize<T: Scalar>(left: Bound<T>, right: Bound<T>, left_open: bool, right_open: bool) -> Interval<T> {
    let left_open = left_open || !left.is_finite();
    let right_open = right_open || !right.is_finite();
    let empty = match left.cmp(&right) {
        Ordering::Greater => true,
        Ordering::Equal => left_open || right_open,
        Ordering::Less => false,
    };
    // (+inf, ...) and (..., -inf) denote nothing either.
    if empty || left == Bound::PosInf || right == Bound::NegInf {
        return Interval::empty();
    }
    Interval { left, right, left_open, right_open }
}

impl<T: Scalar> Interval<T> {
    pub fn empty() -> Self {
        Interval { left: Bound::PosInf, right: Bound::NegInf, left_open: true, right_open: true }
    }

    pub fn new(left: Bound<T>, right: Bound<T>, left_open: bool, right_open: bool) -> Self {
        normalize(left, right, left_open, right_open)
    }

    pub fn closed(a: T, b: T) -> Self {
        normalize(Bound::Finite(a), Bound::Finite(b), false, false)
    }

    pub fn point(t: T) -> Self {
        Self::closed(t.clone(), t)
    }

    pub fn all() -> Self {
        Interval { left: Bound::NegInf, right: Bound::PosInf, left_open: true, right_open: true }
    }

    pub fn is_empty(&self) -> bool {
        self.left == Bound::PosInf
    }

    pub fn left(&self) -> &Bound<T> {
        &self.left
    }

    pub fn right(&self) -> &Bound<T> {
        &self.right
    }

    pub fn left_open(&self) -> bool {
        self.left_open
    }

    pub fn right_open(&self) -> bool {
        self.right_open
    }

    pub fn is_punctual(&self) -> bool {
        !self.is_empty() && self.left == self.right
    }

    pub fn is_bounded(&self) -> bool {
        !self.is_empty() && self.left.is_finite() && self.right.is_finite()
    }

    pub fn contains(&self, t: &T) -> bool {
        if self.is_empty() {
            return false;
        }
        let b = Bound::Finite(t.clone());
        let after_left = match self.left.cmp(&b) {
            Ordering::Less => true,
            Ordering::Equal => !self.left_open,
            Ordering::Greater => false,
        };
        let before_right = match b.cmp(&self.right) {
            Ordering::Less => true,
            Ordering::Equal => !self.right_open,
            Ordering::Greater => false,
        };
        after_left && before_right
    }

    pub fn intersect(&self, other: &Self) -> Self {
        intersect(self, other)
    }

    pub fn meets(&self, other: &Self) -> bool {
        !intersect(self, other).is_empty()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        subset(self, other)
    }

    /// Compares left ends: smaller value first, closed before open.
    pub fn cmp_left(&self, other: &Self) -> Ordering {
        self.left.cmp(&other.left).then(self.left_open.cmp(&other.left_open))
    }

    /// Compares right ends by extent: smaller value first, open before closed.
    pub fn cmp_right(&self, other: &Self) -> Ordering {
        self.right.cmp(&other.right).then(other.right_open.cmp(&self.right_open))
    }

    /// True when every point of `self` lies strictly before every point of
    /// `other` and the two cannot be merged into one interval.
    pub fn precedes_apart(&self, other: &Self) -> bool {
        match self.right.cmp(&other.left) {
            Ordering::Less => true,
            Ordering::Equal => self.right_open && other.left_open,
            Ordering::Greater => false,
        }
    }
}

impl<T: Scalar> PartialOrd for Interval<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Interval<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_empty(), other.is_empty()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        self.left
            .cmp(&other.left)
            .then(self.left_open.cmp(&other.left_open))
            .then(self.right.cmp(&other.right))
            .then(self.right_open.cmp(&other.right_open))
    }
}

pub fn intersect<T: Scalar>(a: &Interval<T>, b: &Interval<T>) -> Interval<T> {
    if a.is_empty() || b.is_empty() {
        return Interval::empty();
    }
    let (left, left_open) = match a.cmp_left(b) {
        Ordering::Less => (b.left.clone(), b.left_open),
        _ => (a.left.clone(), a.left_open),
    };
    let (right, right_open) = match a.cmp_right(b) {
        Ordering::Greater => (b.right.clone(), b.right_open),
        _ => (a.right.clone(), a.right_open),
    };
    normalize(left, right, left_open, right_open)
}

/// The union of two intervals when it is itself an interval.
pub fn union_if_coalescable<T: Scalar>(a: &Interval<T>, b: &Interval<T>) -> Option<Interval<T>> {
    if a.is_empty() {
        return Some(b.clone());
    }
    if b.is_empty() {
        return Some(a.clone());
    }
    let (first, second) = if a.cmp_left(b) == Ordering::Greater { (b, a) } else { (a, b) };
    if first.precedes_apart(second) {
        return None;
    }
    let (right, right_open) = match first.cmp_right(second) {
        Ordering::Less => (second.right.clone(), second.right_open),
        _ => (first.right.clone(), first.right_open),
    };
    Some(normalize(first.left.clone(), right, first.left_open, right_open))
}

pub fn subset<T: Scalar>(a: &Interval<T>, b: &Interval<T>) -> bool {
    if a.is_empty() {
        return true;
    }
    if b.is_empty() {
        return false;
    }
    b.cmp_left(a) != Ordering::Greater && a.cmp_right(b) != Ordering::Greater
}

/// Applies one of the five endpoint operations.
pub fn interval_op<T: Scalar>(kind: IntervalOp, r1: &Interval<T>, r2: &Interval<T>) -> Result<Interval<T>> {
    if r1.is_empty() || (kind != IntervalOp::Closure && r2.is_empty()) {
        return Err(Error::EmptyOperand);
    }
    let result = match kind {
        IntervalOp::Closure => normalize(r1.left.clone(), r1.right.clone(), false, false),
        IntervalOp::Minus => normalize(
            r1.left.sub(&r2.right),
            r1.right.sub(&r2.left),
            r1.left_open || r2.right_open,
            r1.right_open || r2.left_open,
        ),
        IntervalOp::CircleMinus => normalize(
            r1.left.sub(&r2.left),
            r1.right.sub(&r2.right),
            r1.left_open && !r2.left_open,
            r1.right_open && !r2.right_open,
        ),
        IntervalOp::Plus => normalize(
            r1.left.add(&r2.left),
            r1.right.add(&r2.right),
            r1.left_open || r2.left_open,
            r1.right_open || r2.right_open,
        ),
        IntervalOp::CirclePlus => normalize(
            r1.left.add(&r2.right),
            r1.right.add(&r2.left),
            r1.left_open && !r2.right_open,
            r1.right_open && !r2.left_open,
        ),
    };
    Ok(result)
}

/// Sorts and merges a list of intervals into canonical form: sorted,
/// pairwise disjoint and non-coalescable, no empties.
pub fn coalesce<T: Scalar>(mut list: Vec<Interval<T>>) -> Vec<Interval<T>> {
    list.retain(|i| !i.is_empty());
    list.sort();
    let mut out: Vec<Interval<T>> = Vec::with_capacity(list.len());
    for i in list {
        if let Some(last) = out.last_mut() {
            if let Some(u) = union_if_coalescable(last, &i) {
                *last = u;
                continue;
            }
        }
        out.push(i);
    }
    out
}

/// Largest `d` such that every value is an integer multiple of `d`.
pub fn gcd_rationals<I>(values: &[Ratio<I>]) -> Result<Ratio<I>>
where
    I: Integer + Clone + Signed,
{
    let mut num = I::zero();
    let mut den = I::one();
    for v in values.iter().filter(|v| !v.is_zero()) {
        num = num.gcd(&v.numer().abs());
        den = den.lcm(&v.denom().abs());
    }
    if num.is_zero() {
        return Err(Error::AllZero);
    }
    Ok(Ratio::new(num, den))
}

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

impl<T: fmt::Display + Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        write!(
            f,
            "{}{},{}{}",
            if self.left_open { '(' } else { '[' },
            self.left,
            self.right,
            if self.right_open { ')' } else { ']' }
        )
    }
}

impl<T: fmt::Display + Scalar> fmt::Debug for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses `3`, `-3/2` or `1.25` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::BadNumber(text.to_string());
    let s = text.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let digits = |d: &str| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit());
    let value = if let Some((n, d)) = body.split_once('/') {
        if !digits(n) || !digits(d) {
            return Err(bad());
        }
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Rational::new(n.parse().map_err(|_| bad())?, d)
    } else if let Some((i, frac)) = body.split_once('.') {
        if !digits(i) || !digits(frac) {
            return Err(bad());
        }
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let n: BigInt = format!("{i}{frac}").parse().map_err(|_| bad())?;
        Rational::new(n, scale)
    } else {
        if !digits(body) {
            return Err(bad());
        }
        Rational::from_integer(body.parse().map_err(|_| bad())?)
    };
    Ok(if neg { -value } else { value })
}

fn parse_bound(text: &str) -> Result<Bound<Rational>> {
    match text.trim() {
        "-inf" => Ok(Bound::NegInf),
        "+inf" | "inf" => Ok(Bound::PosInf),
        other => parse_rational(other).map(Bound::Finite),
    }
}

impl FromStr for Interval<Rational> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::BadInterval(format!("`{s}`: {why}"));
        let t = s.trim();
        let left_open = match t.chars().next() {
            Some('[') => false,
            Some('(') => true,
            _ => return Err(bad("expected `[` or `(`")),
        };
        let right_open = match t.chars().last() {
            Some(']') => false,
            Some(')') => true,
            _ => return Err(bad("expected `]` or `)`")),
        };
        let inner = &t[1..t.len() - 1];
        let (l, r) = inner.split_once(',').ok_or_else(|| bad("expected `,`"))?;
        let left = parse_bound(l)?;
        let right = parse_bound(r)?;
        if left == Bound::PosInf || right == Bound::NegInf {
            return Err(bad("infinity on the wrong side"));
        }
        if (!left.is_finite() && !left_open) || (!right.is_finite() && !right_open) {
            return Err(bad("infinite ends must be open"));
        }
        Ok(Interval::new(left, right, left_open, right_open))
    }
}
