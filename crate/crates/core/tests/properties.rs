use std::collections::BTreeMap;
use std::sync::Arc;

use itertools::Itertools;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use autmeasure::io::{measure_from_json, measure_to_json, recipe_from_json, recipe_to_json, Recipe};
use autmeasure::lang::{Fact, Language, WindowStructure};
use autmeasure::measure::{decompose, merge, ConcentratedBaseMeasure, WindowMeasure};
use autmeasure::rational::{format_rational, parse_rational, rat, Rational};
use autmeasure::recipe::{
    erdos_renyi_weighted, random_aut_recipe, random_sym_recipe, region_maps, top_threshold, unary_threshold, AutRecipe,
    StepFunction, SymRecipe, UniformArray, DEFAULT_CELL_CAP,
};
use autmeasure::zoo;

fn red_b() -> Arc<Language> {
    Arc::new(Language::from_pairs([("Red", 1), ("B", 2)]).unwrap())
}

fn mask(points: &[usize]) -> u64 {
    points.iter().fold(0, |m, &p| m | 1 << p)
}

#[test]
fn threshold_graph_replays_the_array() {
    let l = zoo::graph_language();
    let half = rat(1, 2);
    let f =
        SymRecipe::new(l.clone(), vec![StepFunction::trivial(l.clone(), 1), top_threshold(&l, 2, 0, &half)]).unwrap();
    for seed in [0, 1, 42, 9001] {
        let array = UniformArray::new(seed);
        let g = f.sample(3, &array).unwrap();
        let expected: Vec<Fact> = (0..3)
            .tuple_combinations()
            .filter(|&(a, b)| array.value(mask(&[a, b])) < half)
            .flat_map(|(a, b)| [Fact::new(0, &[a, b]), Fact::new(0, &[b, a])])
            .collect();
        assert_eq!(g, WindowStructure::general(l.clone(), 3, expected).unwrap());
    }
}

#[test]
fn coloring_reads_only_vertex_coordinates() {
    let tf = Arc::new(zoo::triangle_free(3));
    let l = Arc::new(Language::from_pairs([("Red", 1)]).unwrap());
    let third = rat(1, 3);
    let functions = (0..tf.language().len())
        .map(|p| {
            if tf.arity(p) == 1 {
                unary_threshold(&l, 0, &third)
            } else {
                StepFunction::trivial(l.clone(), tf.arity(p))
            }
        })
        .collect();
    let f = AutRecipe::new(tf.clone(), l.clone(), functions).unwrap();
    let path = tf.labeled_diagrams(3).into_iter().find(|d| d.facts().len() > 5).unwrap();
    for seed in 0..20 {
        let array = UniformArray::new(seed);
        let s = f.sample(&path, &array).unwrap();
        let reds: Vec<Fact> = (0..3).filter(|&i| array.value(mask(&[i])) < third).map(|i| Fact::new(0, &[i])).collect();
        assert_eq!(s, WindowStructure::general(l.clone(), 3, reds).unwrap());
    }
}

#[test]
fn threshold_edge_probability_is_one_half() {
    let l = zoo::graph_language();
    let f = SymRecipe::new(l.clone(), vec![StepFunction::trivial(l.clone(), 1), top_threshold(&l, 2, 0, &rat(1, 2))])
        .unwrap();
    let mu = f.pushforward(2, DEFAULT_CELL_CAP).unwrap();
    let row = mu.table(2).values().next().unwrap();
    assert_eq!(row.len(), 2);
    assert!(row.values().all(|p| *p == rat(1, 2)));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn sym_pushforwards_are_exchangeable(seed in any::<u64>()) {
        let f = random_sym_recipe(&red_b(), &mut ChaCha8Rng::seed_from_u64(seed));
        let mu = f.pushforward(3, DEFAULT_CELL_CAP).unwrap();
        prop_assert!(mu.check_invariance().invariant);
        let row = mu.table(3).values().next().unwrap();
        for pi in (0..3).permutations(3) {
            let moved: BTreeMap<WindowStructure, Rational> = row.iter().map(|(d, p)| (d.permuted(&pi), p.clone())).collect();
            prop_assert_eq!(&moved, row);
        }
        prop_assert_eq!(row.values().sum::<Rational>(), rat(1, 1));
    }

    #[test]
    fn aut_pushforwards_are_invariant(seed in any::<u64>()) {
        let rado = Arc::new(zoo::rado(3));
        let f = random_aut_recipe(&rado, &red_b(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(f.pushforward(3, DEFAULT_CELL_CAP).unwrap().check_invariance().invariant);
    }

    #[test]
    fn samples_are_reproducible(seed in any::<u64>(), window in 1usize..6) {
        let f = random_sym_recipe(&red_b(), &mut ChaCha8Rng::seed_from_u64(seed));
        let a = f.sample_many(window, seed, 20).unwrap();
        prop_assert_eq!(&a, &f.sample_many(window, seed, 20).unwrap());
        prop_assert!(a.iter().all(|s| s.size() == window));
    }

    #[test]
    fn array_values_are_dyadic_and_in_range(seed in any::<u64>(), subset in any::<u64>(), bits in 1u32..=64) {
        let v = UniformArray::with_precision(seed, bits).value(subset);
        prop_assert!(v >= rat(0, 1) && v < rat(1, 1));
        let denom = v.denom().clone();
        prop_assert!(denom.clone() & (denom - 1u32) == 0u32.into());
    }

    #[test]
    fn region_boxes_scale_volume(rel_pick in 0usize..11, cuts in prop::collection::vec((0i64..=12, 0i64..=12), 8)) {
        let rado = Arc::new(zoo::rado(3));
        let maps = region_maps(&rado, 3).unwrap();
        let m = &maps.maps()[rel_pick % maps.maps().len()];
        let bx: Vec<(Rational, Rational)> = m.intervals.iter().zip(&cuts).map(|((lo, hi), &(a, b))| {
            let (a, b) = (rat(a.min(b), 12), rat(a.max(b), 12));
            (lo + (hi - lo) * a, lo + (hi - lo) * b)
        }).collect();
        let vol: Rational = bx.iter().map(|(a, b)| b - a).product();
        let lo: Vec<Rational> = bx.iter().map(|b| b.0.clone()).collect();
        let hi: Vec<Rational> = bx.iter().map(|b| b.1.clone()).collect();
        let pre: Rational = m.alpha_inv(&hi).iter().zip(m.alpha_inv(&lo)).map(|(h, l)| h - l).product();
        prop_assert_eq!(vol / m.volume(), pre);
    }

    #[test]
    fn merge_then_decompose_is_identity(seed in any::<u64>(), weights in prop::collection::vec(1u64..5, 11)) {
        let m = Arc::new(zoo::rado(3));
        let cm = erdos_renyi_weighted(&m, &weights, true).unwrap();
        let nu = ConcentratedBaseMeasure::new(m.clone(), cm.pushforward(3, DEFAULT_CELL_CAP).unwrap(), None).unwrap();
        let mu = random_aut_recipe(&m, &red_b(), &mut ChaCha8Rng::seed_from_u64(seed)).pushforward(3, DEFAULT_CELL_CAP).unwrap();
        let d = decompose(&merge(&mu, &nu).unwrap(), &m, None).unwrap();
        prop_assert_eq!(d.mu, mu);
        prop_assert_eq!(d.nu.measure(), nu.measure());
    }

    #[test]
    fn json_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tf = Arc::new(zoo::triangle_free(3));
        let f = random_aut_recipe(&tf, &red_b(), &mut rng);
        let mu: WindowMeasure = f.pushforward(3, DEFAULT_CELL_CAP).unwrap();
        let j = serde_json::to_string(&measure_to_json(&mu)).unwrap();
        prop_assert_eq!(measure_from_json(&serde_json::from_str(&j).unwrap()).unwrap(), mu);
        let r = Recipe::Sym(random_sym_recipe(&red_b(), &mut rng));
        let j = serde_json::to_string(&recipe_to_json(&r)).unwrap();
        let back = recipe_from_json(&serde_json::from_str(&j).unwrap()).unwrap();
        prop_assert_eq!(serde_json::to_value(recipe_to_json(&back)).unwrap(), serde_json::to_value(recipe_to_json(&r)).unwrap());
    }

    #[test]
    fn rationals_print_and_parse(n in -1000i64..1000, d in 1i64..1000) {
        let r = rat(n, d);
        prop_assert_eq!(parse_rational(&format_rational(&r)), Some(r));
    }
}
