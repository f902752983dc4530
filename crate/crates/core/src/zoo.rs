//! Standard ages and canonical presentations: graphs, triangle-free graphs,
//! successor paths, and the pure set.

use std::sync::Arc;

use itertools::Itertools;

use crate::canonical::CanonicalPresentation;
use crate::lang::{Age, Fact, Language, Mode, WindowStructure};

pub fn graph_language() -> Arc<Language> {
    Arc::new(Language::from_pairs([("E", 2)]).expect("static language"))
}

/// Labeled undirected graphs on `n` vertices satisfying `keep`.
pub fn graphs_on(n: usize, keep: impl Fn(&[(usize, usize)]) -> bool) -> Vec<WindowStructure> {
    let l = graph_language();
    let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
    let mut out = Vec::new();
    for bits in 0u64..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> =
            pairs.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &p)| p).collect();
        if !keep(&edges) {
            continue;
        }
        let facts = edges.iter().flat_map(|&(a, b)| [Fact::new(0, &[a, b]), Fact::new(0, &[b, a])]);
        out.push(WindowStructure::general(l.clone(), n, facts).expect("valid graph"));
    }
    out
}

fn graph_age(bound: usize, keep: impl Fn(&[(usize, usize)]) -> bool) -> Age {
    let members = (1..=bound).flat_map(|n| graphs_on(n, &keep));
    Age::from_members(graph_language(), bound, members)
}

pub fn graphs_age(bound: usize) -> Age {
    graph_age(bound, |_| true)
}

pub fn has_triangle(edges: &[(usize, usize)]) -> bool {
    let adj = |a: usize, b: usize| edges.contains(&(a.min(b), a.max(b)));
    let n = edges.iter().map(|&(_, b)| b + 1).max().unwrap_or(0);
    (0..n).tuple_combinations().any(|(a, b, c)| adj(a, b) && adj(b, c) && adj(a, c))
}

pub fn triangle_free_age(bound: usize) -> Age {
    graph_age(bound, |e| !has_triangle(e))
}

/// Finite disjoint unions of directed paths under the successor relation `S`.
pub fn successor_paths_age(bound: usize) -> Age {
    let l = Arc::new(Language::from_pairs([("S", 2)]).expect("static language"));
    Age::from_predicate(l, bound, Mode::General, |s| {
        let n = s.size();
        let out_deg = |x: usize| s.facts().iter().filter(|f| f.tuple[0] as usize == x).count();
        let in_deg = |x: usize| s.facts().iter().filter(|f| f.tuple[1] as usize == x).count();
        if (0..n).any(|x| out_deg(x) > 1 || in_deg(x) > 1) {
            return false;
        }
        // with degrees at most one, a cycle exists iff some walk returns
        (0..n).all(|start| {
            let mut x = start;
            for _ in 0..n {
                match s.facts().iter().find(|f| f.tuple[0] as usize == x) {
                    Some(f) => x = f.tuple[1] as usize,
                    None => return true,
                }
                if x == start {
                    return false;
                }
            }
            true
        })
    })
}

/// Names relations of a graph age: `V`, `E`, `E*`, and `G<m>[ij,...]`
/// listing the edges for larger arities.
pub fn graph_relation_name(t: &WindowStructure) -> String {
    let m = t.size();
    let edges: Vec<String> =
        t.facts().iter().filter(|f| f.tuple[0] < f.tuple[1]).map(|f| format!("{}{}", f.tuple[0], f.tuple[1])).collect();
    match m {
        1 => "V".to_string(),
        2 if edges.is_empty() => "E*".to_string(),
        2 => "E".to_string(),
        _ => format!("G{}[{}]", m, edges.join(",")),
    }
}

/// Canonical presentation of the Rado graph up to arity `k`.
pub fn rado(k: usize) -> CanonicalPresentation {
    CanonicalPresentation::from_age_named(&graphs_age(k), k, graph_relation_name).expect("graph age is hereditary")
}

/// Canonical presentation of the generic triangle-free graph up to arity `k`.
pub fn triangle_free(k: usize) -> CanonicalPresentation {
    CanonicalPresentation::from_age_named(&triangle_free_age(k), k, graph_relation_name)
        .expect("triangle-free age is hereditary")
}

/// The canonical structure of the full symmetric group: one relation `S<m>` per arity.
pub fn pure_set(k: usize) -> CanonicalPresentation {
    let l = Arc::new(Language::empty());
    let members: Vec<_> = (1..=k).map(|n| WindowStructure::empty(l.clone(), n)).collect();
    let age = Age::from_members(l, k, members);
    CanonicalPresentation::from_age_named(&age, k, |t| format!("S{}", t.size())).expect("pure set age")
}

/// The Rado graph with a second, independent unary split: every vertex is
/// `V0` or `V1`.
pub fn two_colored_rado(k: usize) -> CanonicalPresentation {
    let l = Arc::new(Language::from_pairs([("E", 2), ("C", 1)]).expect("static language"));
    let mut members = Vec::new();
    for n in 1..=k {
        for g in graphs_on(n, |_| true) {
            for colors in 0u32..(1 << n) {
                let mut facts: Vec<Fact> = g.facts().iter().cloned().collect();
                facts.extend((0..n).filter(|i| colors >> i & 1 == 1).map(|i| Fact::new(1, &[i])));
                members.push(WindowStructure::general(l.clone(), n, facts).expect("valid"));
            }
        }
    }
    let age = Age::from_members(l, k, members);
    CanonicalPresentation::from_age_named(&age, k, |t| {
        let m = t.size();
        if m == 1 {
            return if t.facts().is_empty() { "V0".into() } else { "V1".into() };
        }
        let body = t.to_string();
        format!("C{m}{}", body.trim_start_matches(&format!("[{m}]")))
    })
    .expect("colored graph age is hereditary")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_counts() {
        let counts: Vec<usize> = (1..=5).map(|n| graphs_age(5).members_of_size(n).count()).collect();
        assert_eq!(counts, vec![1, 2, 4, 11, 34]);
        let tf: Vec<usize> = (1..=5).map(|n| triangle_free_age(5).members_of_size(n).count()).collect();
        assert_eq!(tf, vec![1, 2, 3, 7, 14]);
    }

    #[test]
    fn successor_paths_have_no_cycles() {
        let age = successor_paths_age(3);
        // sizes: 1 point; 2 points: empty or one arrow; 3 points: empty, one arrow, path
        assert_eq!(age.members().len(), 1 + 2 + 3);
    }

    #[test]
    fn pure_set_has_one_relation_per_arity() {
        let p = pure_set(3);
        assert_eq!(p.language().len(), 3);
        assert!(p.is_free().free);
    }
}
