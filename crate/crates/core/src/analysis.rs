//! Predicate dependency graph, strongly connected components, recursive
//! predicates and relevant sub-programs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::syntax::{Program, Symbol};

/// Dependency graph of a program with its condensation.
///
/// There is an edge `Q -> R` whenever a rule has `Q` in its body and `R` in
/// its head. ⊤ and ⊥ are not vertices.
#[derive(Clone, Debug)]
pub struct DependencyInfo {
    pub predicates: Vec<Symbol>,
    pub edges: BTreeSet<(usize, usize)>,
    /// Strongly connected components listed in topological order of the
    /// condensation: every edge goes from an earlier or the same component
    /// to a later one.
    pub sccs: Vec<Vec<usize>>,
    pub component: Vec<usize>,
    pub recursive: BTreeSet<Symbol>,
}

impl DependencyInfo {
    pub fn index_of(&self, p: &Symbol) -> Option<usize> {
        self.predicates.binary_search(p).ok()
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.predicates.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        adj
    }

    pub fn has_cycle(&self) -> bool {
        self.edges.iter().any(|(a, b)| a == b) || self.sccs.iter().any(|c| c.len() > 1)
    }

    /// Graphviz rendering; recursive predicates are drawn bold.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph dependencies {\n");
        for p in &self.predicates {
            let style = if self.recursive.contains(p) { " [style=bold]" } else { "" };
            let _ = writeln!(s, "  \"{p}\"{style};");
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", self.predicates[a], self.predicates[b]);
        }
        s.push_str("}\n");
        s
    }
}

/// Iterative Tarjan; components come out in reverse topological order.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = work.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

pub fn dependency_info(program: &Program) -> DependencyInfo {
    let mut preds: BTreeSet<Symbol> = program.body_predicates();
    preds.extend(program.head_predicates());
    let predicates: Vec<Symbol> = preds.into_iter().collect();
    let idx: BTreeMap<&Symbol, usize> = predicates.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut edges = BTreeSet::new();
    for r in &program.rules {
        if let Some(h) = r.head_predicate() {
            for b in r.body_predicates() {
                edges.insert((idx[&b], idx[h]));
            }
        }
    }
    let mut adj = vec![Vec::new(); predicates.len()];
    for &(a, b) in &edges {
        adj[a].push(b);
    }
    let mut sccs = tarjan(&adj);
    sccs.reverse();
    let mut component = vec![0; predicates.len()];
    for (c, members) in sccs.iter().enumerate() {
        for &v in members {
            component[v] = c;
        }
    }
    let mut queue: VecDeque<usize> =
        (0..predicates.len()).filter(|&v| sccs[component[v]].len() > 1 || edges.contains(&(v, v))).collect();
    let mut seen = vec![false; predicates.len()];
    for &v in &queue {
        seen[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    let recursive = (0..predicates.len()).filter(|&v| seen[v]).map(|v| predicates[v].clone()).collect();
    DependencyInfo { predicates, edges, sccs, component, recursive }
}

/// The rules that may contribute to deriving facts about `p` or ⊥: those
/// with `p` or ⊥ in the head, and those whose head predicate reaches a body
/// predicate of such a rule.
pub fn relevant_rules(program: &Program, p: &Symbol) -> Program {
    let info = dependency_info(program);
    let adj = info.successors();
    let mut reverse = vec![Vec::new(); info.predicates.len()];
    for (a, succ) in adj.iter().enumerate() {
        for &b in succ {
            reverse[b].push(a);
        }
    }
    let mut seen = vec![false; info.predicates.len()];
    let mut queue = VecDeque::new();
    for r in &program.rules {
        if r.has_bottom_head() || r.head_predicate() == Some(p) {
            for b in r.body_predicates() {
                let v = info.index_of(&b).expect("vertex");
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &reverse[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    let rules = program
        .rules
        .iter()
        .filter(|r| match r.head_predicate() {
            None => true,
            Some(h) => h == p || seen[info.index_of(h).expect("vertex")],
        })
        .cloned()
        .collect();
    Program::new(rules)
}

pub fn is_recursive(program: &Program) -> bool {
    dependency_info(program).has_cycle()
}

/// Rules whose head predicate is not recursive (⊥-headed rules included).
pub fn nonrecursive_head_rules(program: &Program) -> Program {
    let info = dependency_info(program);
    Program::new(
        program
            .rules
            .iter()
            .filter(|r| r.head_predicate().map_or(true, |h| !info.recursive.contains(h)))
            .cloned()
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    pub(crate) const PROFESSOR: &str = "
        AssistantProfessor(X) :- BOXMINUS[0,3] Lecturer(X) .
        AssociateProfessor(X) :- BOXMINUS[0,4] AssistantProfessor(X) .
        FullProfessor(X) :- BOXMINUS[0,5] AssociateProfessor(X) .
        Chair(X) :- headOf(X,Y), Department(Y) .
        FullProfessor(X) :- DIAMONDMINUS[0,2] Chair(X) .
        Chair(X) :- DIAMONDMINUS[0,2] FullProfessor(X) .
    ";

    fn set(xs: &[&str]) -> BTreeSet<Symbol> {
        xs.iter().map(|s| Symbol::new(s)).collect()
    }

    #[test]
    fn recursive_sets() {
        let p = parse_program(PROFESSOR).unwrap();
        assert_eq!(dependency_info(&p).recursive, set(&["Chair", "FullProfessor"]));
        let immune = parse_program("Immune(X) :- BOXMINUS[0,7] NoSympt(X) .").unwrap();
        assert!(dependency_info(&immune).recursive.is_empty());
        let bday = parse_program("BOXPLUS[1,1] Bday(X) :- Bday(X) .").unwrap();
        assert_eq!(dependency_info(&bday).recursive, set(&["Bday"]));
        assert!(is_recursive(&bday));
        assert!(!is_recursive(&immune));
        assert!(!is_recursive(&Program::default()));
    }

    #[test]
    fn topological_components() {
        let p = parse_program(PROFESSOR).unwrap();
        let info = dependency_info(&p);
        for &(a, b) in &info.edges {
            assert!(info.component[a] <= info.component[b]);
        }
        let cycle = info.sccs.iter().find(|c| c.len() > 1).unwrap();
        let names: BTreeSet<Symbol> = cycle.iter().map(|&v| info.predicates[v].clone()).collect();
        assert_eq!(names, set(&["Chair", "FullProfessor"]));
    }

    #[test]
    fn relevant_rule_sets() {
        let p = parse_program(PROFESSOR).unwrap();
        let a = relevant_rules(&p, &Symbol::new("AssistantProfessor"));
        assert_eq!(a.rules, vec![p.rules[0].clone()]);
        assert_eq!(relevant_rules(&p, &Symbol::new("FullProfessor")).len(), 6);
        assert!(relevant_rules(&p, &Symbol::new("Unknown")).is_empty());
    }

    #[test]
    fn nonrecursive_heads() {
        let p = parse_program(PROFESSOR).unwrap();
        let n = nonrecursive_head_rules(&p);
        assert_eq!(n.rules, vec![p.rules[0].clone(), p.rules[1].clone()]);
        let acyclic = parse_program("A :- B . C :- A .").unwrap();
        assert_eq!(nonrecursive_head_rules(&acyclic).len(), 2);
        let looped = parse_program("A :- DIAMONDMINUS[1,1] A .").unwrap();
        assert!(nonrecursive_head_rules(&looped).is_empty());
    }

    #[test]
    fn dot_mentions_cycle() {
        let dot = dependency_info(&parse_program(PROFESSOR).unwrap()).to_dot();
        assert!(dot.contains("\"Chair\" -> \"FullProfessor\""));
        assert!(dot.contains("\"FullProfessor\" -> \"Chair\""));
    }
}
