//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use autmeasure::canonical::{free_completion, has_trivial_dcl, is_sub_can, CanonicalPresentation};
use autmeasure::lang::{Age, Fact, Language, Literal, Mode, QfFormula, RelId, WindowStructure};
use autmeasure::measure::{
    decompose, describe_merge, diagrams, from_pi_system, merge, restrict_measure, ConcentratedBaseMeasure,
    MeasureError, PiEntry, Row, WindowMeasure,
};
use autmeasure::qftypes::{enumerate_nonredundant_types, merge as merge_parts, split, IntervalCode, DEFAULT_SLOT_CAP};
use autmeasure::rational::{rat, Rational};
use autmeasure::recipe::{
    compose_with_region, erdos_renyi, erdos_renyi_weighted, extend_to_free, random_aut_recipe, random_sym_recipe,
    region_maps, unary_threshold, AutRecipe, StepFunction, SymRecipe, DEFAULT_CELL_CAP,
};
use autmeasure::zoo;

const CAP: usize = DEFAULT_CELL_CAP;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_autmeasure"))
}

fn one() -> Rational {
    rat(1, 1)
}

fn zero() -> Rational {
    rat(0, 1)
}

fn edges(s: &WindowStructure, e: RelId) -> BTreeSet<(usize, usize)> {
    (0..s.size()).tuple_combinations().filter(|&(i, j)| s.holds(e, &[i as u8, j as u8])).collect()
}

/// Smallest relabeling of an edge set under all vertex permutations.
fn graph_class(n: usize, es: &BTreeSet<(usize, usize)>) -> Vec<(usize, usize)> {
    (0..n)
        .permutations(n)
        .map(|p| es.iter().map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b]))).sorted().collect::<Vec<_>>())
        .min()
        .unwrap()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn red() -> Arc<Language> {
    Arc::new(Language::from_pairs([("Red", 1)]).unwrap())
}

fn red_b() -> Arc<Language> {
    Arc::new(Language::from_pairs([("Red", 1), ("B", 2)]).unwrap())
}

/// Splits a diagram over `inner ⊔ extra` into its two parts.
fn split_joint(
    d: &WindowStructure,
    inner: &Arc<Language>,
    extra: &Arc<Language>,
) -> (WindowStructure, WindowStructure) {
    let k = inner.len();
    let a = d.project(inner.clone(), |r| (r < k).then_some(r));
    let b = d.project(extra.clone(), |r| (r >= k).then(|| r - k));
    (a, b)
}

/// Projectivity and permutation invariance, checked directly on the tables.
fn invariant_by_hand(mu: &WindowMeasure) -> bool {
    for m in 1..=mu.horizon() {
        for (d, row) in mu.table(m) {
            for pi in (0..m).permutations(m) {
                // pi[i] is the image of point i
                let moved = d.permuted(&pi);
                let other = mu.row(&moved).expect("permuted diagram is a base diagram");
                let expect: Row = row.iter().map(|(e, p)| (e.permuted(&pi), p.clone())).collect();
                if *other != expect {
                    return false;
                }
            }
            if m > 1 {
                let keep: Vec<usize> = (0..m - 1).collect();
                let sub = d.substructure(&keep).unwrap();
                let lower = mu.row(&sub).expect("sub-diagram present");
                let mut marg: BTreeMap<WindowStructure, Rational> = BTreeMap::new();
                for (e, p) in row {
                    *marg.entry(e.substructure(&keep).unwrap()).or_insert_with(zero) += p;
                }
                marg.retain(|_, p| *p != zero());
                if marg != *lower {
                    return false;
                }
            }
        }
    }
    true
}

fn c1_freeness() -> String {
    let dir = tempfile::tempdir().unwrap();
    let rado = dir.path().join("rado.json");
    let trado = dir.path().join("trado.json");
    std::fs::write(&rado, r#"{"preset":"rado","max_arity":4}"#).unwrap();
    std::fs::write(&trado, r#"{"preset":"triangle_free","max_arity":3}"#).unwrap();
    let a = bin().args(["canon", "free-check"]).arg(&rado).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.trim(), "free up to arity 4");
    let b = bin().args(["canon", "free-check"]).arg(&trado).output().unwrap();
    assert_eq!(b.status.code(), Some(3));
    let text = String::from_utf8(b.stdout).unwrap();
    let witness = text.trim().rsplit("witness ").next().unwrap();
    assert_eq!(witness, "⟨E,E,E⟩");
    format!("Rado: {}; triangle-free: witness {witness}", "free up to arity 4")
}

fn c2_free_completion() -> String {
    let tf = zoo::triangle_free(3);
    let free = free_completion(&tf, 3).unwrap();
    let e = free.id("E").unwrap();
    // every pattern of E/E* on the three faces is a compatible collection
    let colls = tf.enumerate_compatible(3);
    assert_eq!(colls.len(), 1 << binomial(3, 2));
    let missing = colls.iter().filter(|c| tf.extensions_of(c).unwrap().is_empty()).count();
    assert_eq!(missing, 1);
    let classes = |p: &CanonicalPresentation| -> BTreeSet<Vec<(usize, usize)>> {
        p.relations_of_arity(3).iter().map(|&r| graph_class(3, &edges(p.witness(r), e))).collect()
    };
    let top = free.relations_of_arity(3);
    let labeled: BTreeSet<_> = top.iter().map(|&r| edges(free.witness(r), e)).collect();
    assert_eq!(top.len(), 1 << binomial(3, 2));
    assert_eq!(labeled.len(), top.len());
    let realized = classes(&tf);
    let all = classes(&free);
    assert_eq!(all.len(), 4);
    assert_eq!(realized.len(), 3);
    assert!(realized.is_subset(&all));
    let fresh: Vec<_> = all.difference(&realized).collect();
    assert_eq!(fresh, vec![&vec![(0, 1), (0, 2), (1, 2)]]);
    let rado = zoo::rado(3);
    assert!(is_sub_can(&free, &rado).holds);
    assert!(is_sub_can(&rado, &free).holds);
    assert_eq!(free_completion(&free, 3).unwrap(), free);
    format!("{} labeled arity-3 relations in 4 classes (3 realized + 1 fresh); Rado both ways; fixpoint", top.len())
}

fn pool() -> Vec<(String, CanonicalPresentation)> {
    let mut out = Vec::new();
    let rado = zoo::rado(3);
    out.push(("rado".into(), rado.clone()));
    let reversed: Vec<RelId> = (0..rado.language().len()).rev().collect();
    out.push(("rado reordered".into(), rado.reordered(&reversed).unwrap()));
    out.push(("rado renamed".into(), rado.renamed(|r, _| format!("R{r}")).unwrap()));
    out.push(("two-colored rado".into(), zoo::two_colored_rado(3)));
    out.push(("pure set".into(), zoo::pure_set(3)));
    out.push(("free triangle-free".into(), free_completion(&zoo::triangle_free(3), 3).unwrap()));
    // graph ages cut down by which 3-vertex graphs appear, then completed
    for allowed in [vec![0usize, 1], vec![0, 2], vec![1, 3], vec![0, 1, 2]] {
        let l = zoo::graph_language();
        let age =
            Age::from_members(l, 3, (1..=3).flat_map(|n| zoo::graphs_on(n, |es| n < 3 || allowed.contains(&es.len()))));
        let p = CanonicalPresentation::from_age(&age, 3).unwrap();
        out.push((format!("completed 3-graphs with edge counts {allowed:?}"), free_completion(&p, 3).unwrap()));
    }
    // graphs with a symmetric ternary relation, free or only on triangles
    for on_triangles in [false, true] {
        let l = Arc::new(Language::from_pairs([("E", 2), ("T", 3)]).unwrap());
        let age = Age::from_predicate(l, 3, Mode::General, |s| {
            let sym = s.facts().iter().all(|f| {
                let t: Vec<usize> = f.tuple.iter().map(|&x| x as usize).collect();
                t.iter()
                    .copied()
                    .permutations(t.len())
                    .all(|p| s.holds(f.rel, &p.iter().map(|&x| x as u8).collect_vec()))
            });
            let ok_t = !on_triangles
                || s.facts()
                    .iter()
                    .filter(|f| f.rel == 1)
                    .all(|f| f.tuple.iter().tuple_combinations().all(|(&a, &b)| s.holds(0, &[a, b])));
            sym && ok_t
        });
        let p = CanonicalPresentation::from_age(&age, 3).unwrap();
        out.push((
            format!("graphs with ternary T, on triangles only: {on_triangles}"),
            free_completion(&p, 3).unwrap(),
        ));
    }
    // two-colored triangle-free graphs, completed
    let l = Arc::new(Language::from_pairs([("E", 2), ("C", 1)]).unwrap());
    let members = (1..=3).flat_map(|n| {
        let l = l.clone();
        zoo::graphs_on(n, |es| !zoo::has_triangle(es)).into_iter().flat_map(move |g| {
            let l = l.clone();
            (0u32..1 << n).map(move |colors| {
                let mut facts: Vec<Fact> = g.facts().iter().cloned().collect();
                facts.extend((0..n).filter(|i| colors >> i & 1 == 1).map(|i| Fact::new(1, &[i])));
                WindowStructure::general(l.clone(), n, facts).unwrap()
            })
        })
    });
    let age = Age::from_members(l.clone(), 3, members.collect::<Vec<_>>());
    let p = CanonicalPresentation::from_age(&age, 3).unwrap();
    out.push(("completed two-colored triangle-free".into(), free_completion(&p, 3).unwrap()));
    let paths = CanonicalPresentation::from_age(&zoo::successor_paths_age(3), 3).unwrap();
    out.push(("completed successor paths".into(), free_completion(&paths, 3).unwrap()));
    out
}

fn c3_minimality() -> String {
    let m = zoo::triangle_free(3);
    let free_m = free_completion(&m, 3).unwrap();
    let pool = pool();
    assert!(pool.len() <= 20);
    let mut above = 0;
    for (name, n) in &pool {
        assert!(n.is_free().free, "{name} is not free");
        if is_sub_can(&m, n).holds {
            above += 1;
            assert!(is_sub_can(&free_m, n).holds, "free completion not below {name}");
        }
    }
    assert!(above >= 8, "only {above} pool members contain the triangle-free structure");
    format!("{} free presentations, {above} above M, all above the free completion", pool.len())
}

/// Whether a structure in the successor language is a disjoint union of paths.
fn is_path_union(n: usize, facts: &BTreeSet<(usize, usize)>) -> bool {
    let succ: BTreeMap<usize, usize> = facts.iter().copied().collect();
    if succ.len() != facts.len() || facts.iter().map(|f| f.1).collect::<BTreeSet<_>>().len() != facts.len() {
        return false;
    }
    (0..n).all(|s| {
        let mut x = s;
        for _ in 0..=n {
            match succ.get(&x) {
                Some(&y) if y == s => return false,
                Some(&y) => x = y,
                None => return true,
            }
        }
        false
    })
}

fn c4_dcl() -> String {
    assert!(has_trivial_dcl(&zoo::graphs_age(5)).trivial);
    assert!(has_trivial_dcl(&zoo::triangle_free_age(5)).trivial);
    let paths = zoo::successor_paths_age(3);
    let r = has_trivial_dcl(&paths);
    assert!(!r.trivial);
    let w = r.witness.expect("a forced merge");
    assert!(paths.contains(&w.left) && paths.contains(&w.right));
    let facts = |s: &WindowStructure| -> BTreeSet<(usize, usize)> {
        s.facts().iter().map(|f| (f.tuple[0] as usize, f.tuple[1] as usize)).collect()
    };
    let base = facts(&w.base);
    for (emb, side) in [(&w.left_embedding, &w.left), (&w.right_embedding, &w.right)] {
        let image: BTreeSet<_> = facts(side).into_iter().filter(|(a, b)| emb.contains(a) && emb.contains(b)).collect();
        let mapped: BTreeSet<_> = base.iter().map(|&(a, b)| (emb[a], emb[b])).collect();
        assert_eq!(image, mapped, "witness embedding is not an embedding");
    }
    // every strong amalgam: left on 0..nl, the rest of right after it
    let nl = w.left.size();
    let mut place = vec![usize::MAX; w.right.size()];
    for (i, &r) in w.right_embedding.iter().enumerate() {
        place[r] = w.left_embedding[i];
    }
    let mut next = nl;
    for p in place.iter_mut().filter(|p| **p == usize::MAX) {
        *p = next;
        next += 1;
    }
    let n = next;
    let forced: BTreeSet<_> =
        facts(&w.left).into_iter().chain(facts(&w.right).into_iter().map(|(a, b)| (place[a], place[b]))).collect();
    let left_only: Vec<usize> = (0..nl).filter(|x| !w.left_embedding.contains(x)).collect();
    let right_only: Vec<usize> = (nl..n).collect();
    let free: Vec<(usize, usize)> =
        left_only.iter().cartesian_product(&right_only).flat_map(|(&a, &b)| [(a, b), (b, a)]).collect();
    let amalgam = (0u32..1 << free.len()).find(|bits| {
        let mut all = forced.clone();
        all.extend(free.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, &f)| f));
        is_path_union(n, &all)
    });
    assert!(amalgam.is_none(), "the reported failure has a strong amalgam");
    format!(
        "graphs and triangle-free trivial; successor paths: {} over {} cannot be amalgamated strongly",
        w.left, w.base
    )
}

fn c5_erdos_renyi() -> String {
    let rado = zoo::rado(3);
    let cm = erdos_renyi(&rado, true).unwrap();
    let e = rado.id("E").unwrap();
    let t = Instant::now();
    let mu = cm.pushforward(3, CAP).unwrap();
    let exact_time = t.elapsed();
    assert!(exact_time < Duration::from_secs(1), "exact table took {exact_time:?}");
    let row = mu.table(3).values().next().unwrap();
    let graphs = 1usize << binomial(3, 2);
    let target = rat(1, graphs as i64);
    assert_eq!(row.len(), graphs);
    let seen: BTreeSet<_> = row.keys().map(|d| edges(d, e)).collect();
    assert_eq!(seen.len(), graphs);
    assert!(row.values().all(|p| *p == target));

    let n = 100_000;
    let samples = cm.sample_many(3, 2024, n).unwrap();
    let mut counts: BTreeMap<BTreeSet<(usize, usize)>, u64> = BTreeMap::new();
    for s in &samples {
        *counts.entry(edges(s, e)).or_default() += 1;
    }
    assert!(counts.keys().all(|k| seen.contains(k)));
    let expected = n as f64 / graphs as f64;
    let stat: f64 =
        seen.iter().map(|k| (counts.get(k).copied().unwrap_or(0) as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((graphs - 1) as f64).unwrap().inverse_cdf(1.0 - 1e-3);
    assert!(stat < critical, "chi-square {stat} above {critical}");
    format!("8 graphs at exactly 1/8 ({exact_time:.0?}); chi-square {stat:.2} < {critical:.2} over {n} samples")
}

fn c6_region_maps() -> String {
    let rado = Arc::new(zoo::rado(3));
    let maps = region_maps(&rado, 3).unwrap();
    let e = rado.id("E").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let full = (zero(), one());
    assert_eq!(maps.maps().len(), rado.language().len());
    for m in maps.maps() {
        let w = rado.witness(m.rel);
        // arity-2 coordinates split [0,1) between E and E*; everything else is whole
        let expected: Vec<(Rational, Rational)> = (0..1usize << m.arity)
            .map(|mask| {
                let pts: Vec<usize> = (0..m.arity).filter(|i| mask >> i & 1 == 1).collect();
                if pts.len() == 2 {
                    if w.holds(e, &[pts[0] as u8, pts[1] as u8]) {
                        (zero(), rat(1, 2))
                    } else {
                        (rat(1, 2), one())
                    }
                } else {
                    full.clone()
                }
            })
            .collect();
        assert_eq!(m.intervals, expected, "region of {}", rado.name(m.rel));
        for _ in 0..100 {
            let bx: Vec<(Rational, Rational)> = m
                .intervals
                .iter()
                .map(|(lo, hi)| {
                    let a = rat(rng.gen_range(0..=30), 30);
                    let b = rat(rng.gen_range(0..=30), 30);
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    (lo + (hi - lo) * a, lo + (hi - lo) * b)
                })
                .collect();
            let vol: Rational = bx.iter().map(|(a, b)| b - a).product();
            let s_vol: Rational = m.intervals.iter().map(|(a, b)| b - a).product();
            let lo: Vec<Rational> = bx.iter().map(|b| b.0.clone()).collect();
            let hi: Vec<Rational> = bx.iter().map(|b| b.1.clone()).collect();
            let (plo, phi) = (m.alpha_inv(&lo), m.alpha_inv(&hi));
            for (i, (a, b)) in m.intervals.iter().enumerate() {
                assert_eq!(plo[i], (&lo[i] - a) / (b - a));
                assert_eq!(m.alpha(&plo)[i], lo[i]);
            }
            let pre: Rational = phi.iter().zip(&plo).map(|(h, l)| h - l).product();
            assert_eq!(vol / s_vol, pre);
        }
        for j in 1..m.arity {
            for sub in (0..m.arity).combinations(j) {
                let q = rado.restrict(m.rel, &sub);
                assert_eq!(m.restricted(&sub), maps.get(q).unwrap().intervals);
            }
        }
    }
    format!("{} types, 100 boxes each, nesting exact", maps.maps().len())
}

fn merge_instance() -> (WindowMeasure, ConcentratedBaseMeasure, WindowMeasure) {
    let m = Arc::new(zoo::rado(3));
    let n = Arc::new(zoo::pure_set(3));
    let mu = WindowMeasure::iid_unary(m.clone(), red(), 0, &rat(1, 3), 3).unwrap();
    let nu = ConcentratedBaseMeasure::uniform(m, n, 3, None).unwrap();
    let eta = merge(&mu, &nu).unwrap();
    (mu, nu, eta)
}

fn c7_merge() -> String {
    let (mu, nu, eta) = merge_instance();
    let inner = nu.inner().language().clone();
    // (a) marginals
    for m in 1..=3 {
        for (q, row) in eta.table(m) {
            let mut lm: BTreeMap<WindowStructure, Rational> = BTreeMap::new();
            let mut joint: BTreeMap<(WindowStructure, WindowStructure), Rational> = BTreeMap::new();
            for (d, p) in row {
                let (a, b) = split_joint(d, &inner, mu.extra());
                *lm.entry(a.clone()).or_insert_with(zero) += p;
                *joint.entry((a, b)).or_insert_with(zero) += p;
            }
            let nu_row: BTreeMap<_, _> = nu
                .measure()
                .row(q)
                .unwrap()
                .iter()
                .map(|(p, v)| (p.relabel(inner.clone(), |r| r), v.clone()))
                .collect();
            assert_eq!(lm, nu_row);
            for ((a, b), p) in &joint {
                let conditional = p / &lm[a];
                assert_eq!(mu.row(a).unwrap().get(b).cloned().unwrap_or_else(zero), conditional);
            }
        }
    }
    // (b) the sum formula against the merged table
    let joint_lang = eta.extra().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut events = 0;
    for m in 1..=3 {
        let atoms: Vec<Literal> = (0..joint_lang.len())
            .filter(|&r| joint_lang.arity(r) <= m)
            .flat_map(|r| {
                let name = joint_lang.name(r).to_string();
                (0..m).permutations(joint_lang.arity(r)).map(move |t| Literal::pos(&name, &t))
            })
            .flat_map(|l| [l.clone(), l.negated()])
            .collect();
        let mut formulas: Vec<QfFormula> = atoms.iter().map(|l| QfFormula::Conj(vec![l.clone()])).collect();
        formulas.extend(atoms.iter().tuple_combinations().map(|(a, b)| QfFormula::Conj(vec![a.clone(), b.clone()])));
        for _ in 0..200 {
            let disj = (0..3)
                .map(|_| (0..rng.gen_range(1..=3)).map(|_| atoms[rng.gen_range(0..atoms.len())].clone()).collect())
                .collect();
            formulas.push(QfFormula::Disj(disj));
        }
        for (q, row) in eta.table(m) {
            for f in &formulas {
                let direct: Rational = row.iter().filter(|(d, _)| d.eval(f).unwrap()).map(|(_, p)| p.clone()).sum();
                assert_eq!(describe_merge(&mu, &nu, q, f).unwrap(), direct, "event {f}");
                events += 1;
            }
        }
    }
    let s2 = nu.outer().witness(nu.outer().id("S2").unwrap()).clone();
    let example =
        QfFormula::Conj(vec![Literal::pos("E", &[0, 1]), Literal::pos("Red", &[0]), Literal::neg("Red", &[1])]);
    let spot = describe_merge(&mu, &nu, &s2, &example).unwrap();
    assert_eq!(spot, rat(1, 2) * rat(1, 3) * rat(2, 3));
    assert_eq!(spot, rat(1, 9));
    // (c) round trips on random instances
    let m = nu.inner().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..10 {
        let weights: Vec<u64> = (0..m.language().len()).map(|_| rng.gen_range(1..=4)).collect();
        let cm = erdos_renyi_weighted(&m, &weights, true).unwrap();
        let nu_i = ConcentratedBaseMeasure::new(m.clone(), cm.pushforward(3, CAP).unwrap(), None).unwrap();
        let mu_i = random_aut_recipe(&m, &red_b(), &mut rng).pushforward(3, CAP).unwrap();
        let d = decompose(&merge(&mu_i, &nu_i).unwrap(), &m, None).unwrap();
        assert_eq!(d.mu, mu_i, "instance {i}: expansion measure");
        assert_eq!(d.nu.measure(), nu_i.measure(), "instance {i}: base measure");
        let joint = cm.product(&random_sym_recipe(&red_b(), &mut rng), CAP).unwrap();
        let eta_i = joint.pushforward(3, CAP).unwrap();
        assert!(eta_i.check_invariance().invariant);
        let d = decompose(&eta_i, &m, None).unwrap();
        assert!(d.zero_mass.is_empty());
        assert_eq!(merge(&d.mu, &d.nu).unwrap(), eta_i, "instance {i}: merge of decomposition");
    }
    format!("marginals exact; {events} events agree; spot value 1/9; 10 random round trips")
}

fn triangle_free_recipes(seed: u64) -> (Arc<CanonicalPresentation>, Vec<AutRecipe>) {
    let tf = Arc::new(zoo::triangle_free(3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = (0..10).map(|_| random_aut_recipe(&tf, &red_b(), &mut rng)).collect();
    (tf, fs)
}

fn c8_recipe_invariance() -> String {
    let (tf, fs) = triangle_free_recipes(8);
    for (i, f) in fs.iter().enumerate() {
        let mu = f.pushforward(3, CAP).unwrap();
        assert!(mu.check_invariance().invariant, "recipe {i}");
        assert!(invariant_by_hand(&mu), "recipe {i} by hand");
    }
    // Red on the first point of an edge only
    let l = red();
    let e = tf.id("E").unwrap();
    let planted = WindowMeasure::from_fn(tf.clone(), l.clone(), 2, |d| {
        let m = d.size();
        let mut row = Row::new();
        if m == 2 && d.holds(e, &[0, 1]) {
            row.insert(WindowStructure::general(l.clone(), 2, [Fact::new(0, &[0])]).unwrap(), rat(1, 2));
            row.insert(WindowStructure::empty(l.clone(), 2), rat(1, 2));
        } else {
            for bits in 0u32..1 << m {
                let facts = (0..m).filter(|i| bits >> i & 1 == 1).map(|i| Fact::new(0, &[i]));
                row.insert(
                    WindowStructure::general(l.clone(), m, facts).unwrap(),
                    Rational::new(1.into(), (1i64 << m).into()),
                );
            }
        }
        row
    })
    .unwrap();
    assert!(!invariant_by_hand(&planted));
    let report = planted.check_invariance();
    assert!(!report.invariant);
    let w = report.witness.expect("a witness");
    assert!(w.base.contains("E(0,1)"), "witness over {}", w.base);
    format!("10 random recipes invariant; planted asymmetry caught: {w}")
}

fn c9_representability() -> String {
    let (tf, fs) = triangle_free_recipes(9);
    let free = Arc::new(free_completion(&tf, 3).unwrap());
    let fresh: Vec<RelId> = (0..free.language().len()).filter(|&r| tf.id(free.name(r)).is_none()).collect();
    assert!(!fresh.is_empty());
    for (i, f) in fs.iter().enumerate() {
        let g = extend_to_free(f, &free).unwrap();
        for &r in &fresh {
            assert!(g.function(r).is_constant() && g.function(r).cell_values().all(|t| t.is_trivial()));
        }
        let back = restrict_measure(&g.pushforward(3, CAP).unwrap(), &tf).unwrap();
        assert_eq!(back, f.pushforward(3, CAP).unwrap(), "recipe {i}");
    }
    let rado = Arc::new(zoo::rado(3));
    let maps = region_maps(&rado, 3).unwrap();
    let l = red();
    let third = rat(1, 3);
    let coloring = SymRecipe::new(l.clone(), vec![unary_threshold(&l, 0, &third)]).unwrap();
    let e = maps.cm().product(&coloring, CAP).unwrap();
    let f = compose_with_region(&e, &maps, CAP).unwrap();
    let direct = AutRecipe::new(
        rado.clone(),
        l.clone(),
        (0..rado.language().len())
            .map(|p| {
                if rado.arity(p) == 1 {
                    unary_threshold(&l, 0, &third)
                } else {
                    StepFunction::trivial(l.clone(), rado.arity(p))
                }
            })
            .collect(),
    )
    .unwrap();
    assert_eq!(f.pushforward(3, CAP).unwrap(), direct.pushforward(3, CAP).unwrap());
    // conditional identity at window 2
    let pf = f.pushforward(2, CAP).unwrap();
    let pe = e.pushforward(2, CAP).unwrap();
    let (_, e_row) = pe.table(2).iter().next().unwrap();
    for p in rado.labeled_diagrams(2) {
        let mass: Rational =
            e_row.iter().filter(|(d, _)| split_joint(d, rado.language(), &l).0 == p).map(|(_, v)| v.clone()).sum();
        assert!(mass > zero());
        for eta in diagrams(&l, 2) {
            let joint: Rational = e_row
                .iter()
                .filter(|(d, _)| split_joint(d, rado.language(), &l) == (p.clone(), eta.clone()))
                .map(|(_, v)| v.clone())
                .sum();
            let got = pf.row(&p).unwrap().get(&eta).cloned().unwrap_or_else(zero);
            assert_eq!(got, joint / &mass);
        }
    }
    format!("10 extensions restrict back exactly ({} fresh types trivial); composition matches coloring", fresh.len())
}

fn c10_types() -> String {
    let l = zoo::graph_language();
    let mut counts = Vec::new();
    for n in 1..=3usize {
        let all = enumerate_nonredundant_types(&l, n, DEFAULT_SLOT_CAP).unwrap();
        // one free slot per injective pair
        let slots = n * n.saturating_sub(1);
        assert_eq!(all.len(), 1 << slots);
        for q in &all {
            assert_eq!(merge_parts(&split(q)).unwrap(), *q);
        }
        counts.push(all.len());
    }
    let finite = IntervalCode::Finite(vec!['a', 'b', 'c']);
    assert_eq!(finite.eval(&zero()), 'a');
    assert_eq!(finite.eval(&rat(1, 3)), 'b');
    assert_eq!(finite.eval(&rat(2, 3)), 'c');
    assert_eq!(finite.eval(&rat(99, 100)), 'c');
    assert_eq!(finite.eval(&one()), 'a');
    let infinite: IntervalCode<usize> = IntervalCode::Infinite(Arc::new(|i| i));
    for i in 0..8u32 {
        let lo = one() - Rational::new(1.into(), (1i64 << i).into());
        let hi = one() - Rational::new(1.into(), (1i64 << (i + 1)).into());
        assert_eq!(infinite.preimage(i as usize), (lo.clone(), hi.clone()));
        assert_eq!(infinite.eval(&lo), i as usize);
        assert_eq!(infinite.eval(&((&lo + &hi) / rat(2, 1))), i as usize);
        assert_eq!(infinite.eval(&hi), i as usize + 1);
    }
    assert_eq!(infinite.eval(&one()), 0);
    format!("non-redundant types {counts:?}, split/merge inverse; gamma(1) = x_0")
}

fn c11_pi_system() -> String {
    let base = Arc::new(zoo::rado(2));
    let l = red();
    let mut entries = Vec::new();
    for m in 1..=2 {
        for d in base.labeled_diagrams(m) {
            for bits in 0u32..1 << m {
                let formula = (0..m)
                    .map(|i| Literal { rel: "Red".into(), args: vec![i], positive: bits >> i & 1 == 1 })
                    .collect();
                let k = bits.count_ones() as i32;
                let value = (0..m as i32).fold(one(), |acc, j| acc * if j < k { rat(1, 3) } else { rat(2, 3) });
                entries.push(PiEntry { base: d.clone(), formula, value });
            }
        }
    }
    let built = from_pi_system(base.clone(), l.clone(), 2, &entries).unwrap();
    for d in base.labeled_diagrams(2) {
        let red0 = built.prob(&d, &QfFormula::Conj(vec![Literal::pos("Red", &[0])])).unwrap();
        assert_eq!(red0, rat(1, 3));
    }
    let is_red = |e: &PiEntry, i: usize| e.formula[i].positive;
    let mut negative = entries.clone();
    let at = negative.iter().position(|e| e.base.size() == 2 && is_red(e, 0) && is_red(e, 1)).unwrap();
    negative[at].value = rat(-1, 9);
    let neg_err = from_pi_system(base.clone(), l.clone(), 2, &negative).unwrap_err();
    assert!(matches!(neg_err, MeasureError::NegativeMass { .. }), "{neg_err}");

    let mut additive = entries.clone();
    let edge = base.witness(base.id("E").unwrap()).clone();
    additive.push(PiEntry { base: edge.clone(), formula: vec![Literal::pos("Red", &[0])], value: rat(1, 2) });
    let add_err = from_pi_system(base.clone(), l.clone(), 2, &additive).unwrap_err();
    assert!(matches!(add_err, MeasureError::AdditivityViolation { .. }), "{add_err}");

    let mut lopsided = entries.clone();
    for e in lopsided.iter_mut().filter(|e| e.base == edge && is_red(e, 0) != is_red(e, 1)) {
        e.value = if is_red(e, 0) { rat(1, 3) } else { rat(1, 9) };
    }
    let inv_err = from_pi_system(base, l, 2, &lopsided).unwrap_err();
    assert!(matches!(inv_err, MeasureError::NotInvariant(_)), "{inv_err}");
    format!("i.i.d. coloring accepted; rejected: {neg_err}; {add_err}; {inv_err}")
}

fn c12_determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let pres = dir.path().join("rado.json");
    let er = dir.path().join("er.json");
    std::fs::write(&pres, r#"{"preset":"rado","max_arity":3}"#).unwrap();
    let status = bin().args(["recipe", "erdos-renyi"]).arg(&pres).arg("--out").arg(&er).status().unwrap();
    assert!(status.success());
    let run = |threads: &str| {
        let out = bin()
            .args(["recipe", "sample", "--window", "5", "--count", "2000", "--seed", "12", "--threads", threads])
            .arg(&er)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let a = run("1");
    let b = run("1");
    let c = run("8");
    assert!(!a.is_empty());
    assert_eq!(a, b, "two runs differ");
    assert_eq!(a, c, "thread counts differ");
    format!("{} bytes identical across runs and across 1 and 8 threads", a.len())
}

fn main() {
    let criteria: [(&str, u64, fn() -> String); 12] = [
        ("freeness examples", 5, c1_freeness),
        ("free completion", 5, c2_free_completion),
        ("minimality of the free completion", 30, c3_minimality),
        ("trivial dcl", 10, c4_dcl),
        ("Erdős–Rényi structure", 61, c5_erdos_renyi),
        ("region maps", 5, c6_region_maps),
        ("merge calculus", 30, c7_merge),
        ("recipe invariance", 30, c8_recipe_invariance),
        ("representability round trip", 30, c9_representability),
        ("type machinery", 1, c10_types),
        ("pi-system extension", 1, c11_pi_system),
        ("determinism", 10, c12_determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.iter().any(|o| o == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(run);
        let took = start.elapsed();
        let line = match outcome {
            Ok(_) if took > Duration::from_secs(limit) => {
                failed += 1;
                format!("FAIL ({took:.2?} over the {limit} s limit)")
            }
            Ok(detail) => format!("PASS ({took:.2?}) {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL ({took:.2?}) {msg}")
            }
        };
        println!("criterion {n:>2} {name}: {line}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
