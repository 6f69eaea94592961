//! The coalesced fact store.
//!
//! Each ground atom maps to a sorted list of pairwise disjoint,
//! non-coalescable intervals. Two secondary indexes (by predicate and by
//! predicate/argument/constant) serve the index nested loop joins of rule
//! evaluation. Clones are cheap copy-on-write snapshots.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};

use crate::intervals::{subset, union_if_coalescable};
use crate::syntax::{Fact, GroundAtom, Program, RelationalAtom, Substitution, Symbol, Term};
use crate::Interval;

#[derive(Clone, Default)]
pub struct FactStore {
    inner: Arc<StoreData>,
}

#[derive(Clone, Default)]
struct StoreData {
    atoms: IndexMap<GroundAtom, Vec<Interval>>,
    by_predicate: HashMap<Symbol, Vec<GroundAtom>>,
    arg_index: HashMap<(Symbol, usize, Symbol), Vec<GroundAtom>>,
    constants: IndexSet<Symbol>,
    bottom: Vec<Interval>,
}

/// Inserts `new` into a canonical interval list; true iff coverage grew.
fn insert_interval(list: &mut Vec<Interval>, new: &Interval) -> bool {
    let i = list.partition_point(|x| x.precedes_apart(new));
    if i < list.len() && subset(new, &list[i]) {
        return false;
    }
    let mut merged = new.clone();
    let mut j = i;
    while j < list.len() {
        match union_if_coalescable(&list[j], &merged) {
            Some(u) => {
                merged = u;
                j += 1;
            }
            None => break,
        }
    }
    list.splice(i..j, std::iter::once(merged));
    true
}

fn list_covers(list: &[Interval], probe: &Interval) -> bool {
    if probe.is_empty() {
        return true;
    }
    let idx = list.partition_point(|x| x.cmp_left(probe) != std::cmp::Ordering::Greater);
    idx > 0 && subset(probe, &list[idx - 1])
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts<I: IntoIterator<Item = Fact>>(facts: I) -> Self {
        let mut s = FactStore::new();
        for f in facts {
            s.insert(&f);
        }
        s
    }

    fn data_mut(&mut self) -> &mut StoreData {
        Arc::make_mut(&mut self.inner)
    }

    /// Adds a fact, coalescing with neighbouring intervals; returns whether
    /// the covered point set grew.
    pub fn insert(&mut self, fact: &Fact) -> bool {
        if fact.interval.is_empty() {
            return false;
        }
        if let Some(list) = self.inner.atoms.get(&fact.atom) {
            if list_covers(list, &fact.interval) {
                return false;
            }
        }
        let data = self.data_mut();
        if !data.atoms.contains_key(&fact.atom) {
            let atom = fact.atom.clone();
            data.by_predicate.entry(atom.predicate.clone()).or_default().push(atom.clone());
            for (pos, c) in atom.args.iter().enumerate() {
                data.arg_index.entry((atom.predicate.clone(), pos, c.clone())).or_default().push(atom.clone());
                data.constants.insert(c.clone());
            }
            data.atoms.insert(atom, Vec::new());
        }
        let list = data.atoms.get_mut(&fact.atom).expect("present");
        insert_interval(list, &fact.interval)
    }

    /// Records a derivation of ⊥ over the interval.
    pub fn insert_bottom(&mut self, interval: &Interval) -> bool {
        if interval.is_empty() || list_covers(&self.inner.bottom, interval) {
            return false;
        }
        insert_interval(&mut self.data_mut().bottom, interval)
    }

    pub fn is_inconsistent(&self) -> bool {
        !self.inner.bottom.is_empty()
    }

    pub fn bottom_intervals(&self) -> &[Interval] {
        &self.inner.bottom
    }

    /// The canonical interval list of an atom (empty if absent).
    pub fn intervals(&self, atom: &GroundAtom) -> &[Interval] {
        self.inner.atoms.get(atom).map_or(&[], |v| v.as_slice())
    }

    pub fn entails_fact(&self, fact: &Fact) -> bool {
        list_covers(self.intervals(&fact.atom), &fact.interval)
    }

    pub fn atom_count(&self) -> usize {
        self.inner.atoms.len()
    }

    /// Number of stored maximal intervals over all atoms.
    pub fn interval_count(&self) -> usize {
        self.inner.atoms.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.atoms.is_empty() && self.inner.bottom.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&GroundAtom, &[Interval])> {
        self.inner.atoms.iter().map(|(a, l)| (a, l.as_slice()))
    }

    pub fn atoms_of(&self, predicate: &Symbol) -> &[GroundAtom] {
        self.inner.by_predicate.get(predicate).map_or(&[], |v| v.as_slice())
    }

    /// Constants occurring in stored atoms.
    pub fn constants(&self) -> impl Iterator<Item = &Symbol> {
        self.inner.constants.iter()
    }

    /// All facts in canonical order.
    pub fn facts(&self) -> Vec<Fact> {
        let mut atoms: Vec<&GroundAtom> = self.inner.atoms.keys().collect();
        atoms.sort();
        atoms.into_iter().flat_map(|a| self.intervals(a).iter().map(move |i| Fact::new(a.clone(), i.clone()))).collect()
    }

    /// Every extension of `partial` that grounds `pattern` to a stored atom,
    /// paired with that atom's intervals.
    pub fn matches(&self, pattern: &RelationalAtom, partial: &Substitution) -> Vec<(Substitution, &[Interval])> {
        let bound: Vec<Option<Symbol>> = pattern.args.iter().map(|t| t.resolve(partial)).collect();
        if bound.iter().all(Option::is_some) {
            let atom = GroundAtom {
                predicate: pattern.predicate.clone(),
                args: bound.into_iter().map(Option::unwrap).collect(),
            };
            return match self.inner.atoms.get(&atom) {
                Some(list) => vec![(partial.clone(), list.as_slice())],
                None => Vec::new(),
            };
        }
        let mut candidates: &[GroundAtom] = self.atoms_of(&pattern.predicate);
        for (pos, c) in bound.iter().enumerate() {
            if let Some(c) = c {
                let list = self
                    .inner
                    .arg_index
                    .get(&(pattern.predicate.clone(), pos, c.clone()))
                    .map_or(&[][..], |v| v.as_slice());
                if list.len() < candidates.len() {
                    candidates = list;
                }
            }
        }
        let mut out = Vec::new();
        'atoms: for atom in candidates {
            if atom.args.len() != pattern.args.len() {
                continue;
            }
            let mut sigma = partial.clone();
            for (term, c) in pattern.args.iter().zip(atom.args.iter()) {
                match term {
                    Term::Constant(k) => {
                        if k != c {
                            continue 'atoms;
                        }
                    }
                    Term::Variable(v) => match sigma.get(v) {
                        Some(b) if b != c => continue 'atoms,
                        Some(_) => {}
                        None => {
                            sigma.insert(v.clone(), c.clone());
                        }
                    },
                }
            }
            out.push((sigma, self.intervals(atom)));
        }
        out
    }

    /// Renders the store as a canonical dataset.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for f in self.facts() {
            let _ = writeln!(s, "{f}");
        }
        for i in self.bottom_intervals() {
            let _ = writeln!(s, "# BOTTOM@{i}");
        }
        s
    }

    /// Full scan of the structural invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let d = &self.inner;
        for (atom, list) in &d.atoms {
            if list.is_empty() {
                return Err(format!("{atom} has an empty list"));
            }
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(format!("{atom}: {} not sorted before {}", w[0], w[1]));
                }
                if !w[0].precedes_apart(&w[1]) {
                    return Err(format!("{atom}: {} and {} are coalescable", w[0], w[1]));
                }
            }
            if list.iter().any(Interval::is_empty) {
                return Err(format!("{atom} stores an empty interval"));
            }
            if !d.by_predicate.get(&atom.predicate).is_some_and(|v| v.contains(atom)) {
                return Err(format!("{atom} missing from the predicate index"));
            }
            for (pos, c) in atom.args.iter().enumerate() {
                let key = (atom.predicate.clone(), pos, c.clone());
                if !d.arg_index.get(&key).is_some_and(|v| v.contains(atom)) {
                    return Err(format!("{atom} missing from the argument index at {pos}"));
                }
            }
        }
        let indexed: usize = d.by_predicate.values().map(Vec::len).sum();
        if indexed != d.atoms.len() {
            return Err("predicate index size differs from atom count".into());
        }
        for ((p, pos, c), atoms) in &d.arg_index {
            for a in atoms {
                if &a.predicate != p || a.args.get(*pos) != Some(c) || !d.atoms.contains_key(a) {
                    return Err(format!("stale argument index entry for {a}"));
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for FactStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.dump())
    }
}

/// True iff both stores hold the same atoms with the same intervals and the
/// same ⊥ intervals.
pub fn store_equal(a: &FactStore, b: &FactStore) -> bool {
    if Arc::ptr_eq(&a.inner, &b.inner) {
        return true;
    }
    let (x, y) = (&a.inner, &b.inner);
    x.bottom == y.bottom
        && x.atoms.len() == y.atoms.len()
        && x.atoms.iter().all(|(atom, list)| y.atoms.get(atom) == Some(list))
}

/// The facts whose predicate occurs in some rule body of the program.
pub fn restrict_to_body_predicates(store: &FactStore, program: &Program) -> FactStore {
    let preds = program.body_predicates();
    let mut out = FactStore::new();
    for (atom, list) in store.atoms() {
        if preds.contains(&atom.predicate) {
            for i in list {
                out.insert(&Fact::new(atom.clone(), i.clone()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_dataset, parse_fact, parse_program};

    fn store(text: &str) -> FactStore {
        FactStore::from_facts(parse_dataset(text).unwrap())
    }

    fn list(s: &FactStore, atom: &str) -> Vec<String> {
        let a = parse_fact(&format!("{atom}@[0,0]")).unwrap().atom;
        s.intervals(&a).iter().map(ToString::to_string).collect()
    }

    #[test]
    fn insert_examples() {
        let mut s = store("P(a)@[3,5]");
        assert!(s.insert(&parse_fact("P(a)@[0,2]").unwrap()));
        assert_eq!(list(&s, "P(a)"), ["[0,2]", "[3,5]"]);
        assert!(s.insert(&parse_fact("P(a)@[2,3]").unwrap()));
        assert_eq!(list(&s, "P(a)"), ["[0,5]"]);
        assert!(!s.insert(&parse_fact("P(a)@[1,2]").unwrap()));
        s.check_invariants().unwrap();
    }

    #[test]
    fn entails_examples() {
        assert!(store("P(a)@[0,5]").entails_fact(&parse_fact("P(a)@[1,3]").unwrap()));
        assert!(!store("P(a)@[0,1]\nP(a)@[2,5]").entails_fact(&parse_fact("P(a)@[1,2]").unwrap()));
        assert!(!FactStore::new().entails_fact(&parse_fact("P(a)@[1,2]").unwrap()));
    }

    #[test]
    fn match_examples() {
        let s = store("edge(a,b)@[0,1]\nedge(a,c)@[2,3]");
        let pat = |t: &str| match crate::syntax::parse_metric_atom(t).unwrap() {
            crate::MetricAtom::Rel(a) => a,
            _ => unreachable!(),
        };
        let res = s.matches(&pat("edge(a,Y)"), &Substitution::new());
        let ys: Vec<String> = res.iter().map(|(s, _)| s[&Symbol::new("Y")].to_string()).collect();
        assert_eq!(ys, ["b", "c"]);
        let one = s.matches(&pat("edge(a,b)"), &Substitution::new());
        assert_eq!(one.len(), 1);
        assert!(one[0].0.is_empty());
        assert!(s.matches(&pat("other(X)"), &Substitution::new()).is_empty());
        let same = store("r(a,a)@[0,1]\nr(a,b)@[0,1]");
        assert_eq!(same.matches(&pat("r(X,X)"), &Substitution::new()).len(), 1);
    }

    #[test]
    fn equality_and_restriction() {
        let a = store("P(a)@[0,1]\nP(a)@[1,2]\nQ(b)@[5,5]");
        let b = store("Q(b)@[5,5]\nP(a)@[0,2]");
        assert!(store_equal(&a, &b));
        assert!(!store_equal(&a, &store("P(a)@[0,2]")));
        assert!(store_equal(&FactStore::new(), &FactStore::new()));
        let p = parse_program("R(X) :- Q(X) .").unwrap();
        let r = restrict_to_body_predicates(&store("P(a)@[0,1]\nQ(a)@[0,1]"), &p);
        assert_eq!(r.dump(), "Q(a)@[0,1]\n");
        assert!(restrict_to_body_predicates(&a, &Program::default()).is_empty());
    }

    #[test]
    fn snapshots_are_isolated() {
        let mut a = store("P(a)@[0,1]");
        let snap = a.clone();
        a.insert(&parse_fact("P(a)@[5,6]").unwrap());
        assert_eq!(snap.interval_count(), 1);
        assert_eq!(a.interval_count(), 2);
    }
}
