//! The property suite behind `autmeasure verify`.

use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canonical::{free_completion, has_trivial_dcl, is_sub_can};
use crate::cli::Config;
use crate::lang::{Language, Literal, QfFormula};
use crate::measure::{
    decompose, describe_merge, diagrams, from_pi_system, merge, restrict_measure, ConcentratedBaseMeasure, PiEntry,
    WindowMeasure,
};
use crate::qftypes::{enumerate_nonredundant_types, merge as merge_parts, split, DEFAULT_SLOT_CAP};
use crate::rational::{format_rational, rat, Rational};
use crate::recipe::{
    compose_with_region, erdos_renyi, extend_to_free, random_aut_recipe, region_maps, unary_threshold, AutRecipe,
    StepFunction, SymRecipe,
};
use crate::stats::chi_square;
use crate::zoo;

pub struct Check {
    pub name: &'static str,
    pub run: fn(&Config) -> Result<String, String>,
}

pub fn suite() -> Vec<Check> {
    vec![
        Check { name: "freeness", run: freeness },
        Check { name: "free-completion", run: completion },
        Check { name: "trivial-dcl", run: dcl },
        Check { name: "erdos-renyi-exact", run: er_exact },
        Check { name: "erdos-renyi-sampler", run: er_sampler },
        Check { name: "region-maps", run: regions },
        Check { name: "merge-calculus", run: merge_calculus },
        Check { name: "recipe-invariance", run: recipe_invariance },
        Check { name: "representability", run: representability },
        Check { name: "type-machinery", run: types },
        Check { name: "pi-system", run: pi_system },
        Check { name: "determinism", run: determinism },
    ]
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn freeness(_: &Config) -> Result<String, String> {
    let rado = zoo::rado(4);
    let r = rado.is_free();
    ensure(r.free, || format!("Rado not free: {:?}", r.witness))?;
    let tf = zoo::triangle_free(3);
    let w = tf.is_free().witness.ok_or("triangle-free reported free")?;
    let shown = w.display(tf.language());
    ensure(shown == "⟨E,E,E⟩", || format!("triangle-free witness {shown}"))?;
    Ok(format!("Rado free up to arity 4; triangle-free witness {shown}"))
}

fn completion(_: &Config) -> Result<String, String> {
    let tf = zoo::triangle_free(3);
    let free = free_completion(&tf, 3).map_err(|e| e.to_string())?;
    let top = free.relations_of_arity(3);
    let classes: BTreeSet<Vec<usize>> =
        top.iter().map(|&r| free.permutation_images(r).iter().copied().sorted().dedup().collect()).collect();
    ensure(top.len() == 8 && classes.len() == 4, || format!("{} symbols in {} classes", top.len(), classes.len()))?;
    let rado = zoo::rado(3);
    ensure(is_sub_can(&free, &rado).holds && is_sub_can(&rado, &free).holds, || "not a relabeling of Rado".into())?;
    let again = free_completion(&free, 3).map_err(|e| e.to_string())?;
    ensure(again == free, || "not a fixpoint".into())?;
    Ok("8 arity-3 symbols in 4 classes, Rado up to relabeling, fixpoint".into())
}

fn dcl(_: &Config) -> Result<String, String> {
    ensure(has_trivial_dcl(&zoo::graphs_age(5)).trivial, || "graphs".into())?;
    ensure(has_trivial_dcl(&zoo::triangle_free_age(5)).trivial, || "triangle-free graphs".into())?;
    let r = has_trivial_dcl(&zoo::successor_paths_age(3));
    let w = r.witness.ok_or("successor paths reported trivial")?;
    Ok(format!("graphs and triangle-free trivial; successor paths forced merge over {}", w.base))
}

fn er_exact(config: &Config) -> Result<String, String> {
    let cm = erdos_renyi(&zoo::rado(3), true).map_err(|e| e.to_string())?;
    let mu = cm.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?;
    let row = mu.table(3).values().next().ok_or("empty table")?;
    ensure(row.len() == 8 && row.values().all(|p| *p == rat(1, 8)), || format!("{} rows", row.len()))?;
    ensure(mu.check_invariance().invariant, || "pushforward not invariant".into())?;
    Ok("8 labeled graphs at 1/8 each".into())
}

fn er_sampler(config: &Config) -> Result<String, String> {
    let cm = erdos_renyi(&zoo::rado(3), true).map_err(|e| e.to_string())?;
    let mu = cm.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?;
    let row = mu.table(3).values().next().ok_or("empty table")?;
    let samples = cm.sample_many(3, config.seed, config.sample_count).map_err(|e| e.to_string())?;
    let r = chi_square(&samples, row);
    let line = format!("statistic {:.3}, p = {:.4} over {} samples", r.statistic, r.p_value, r.samples);
    ensure(r.passes(config.alpha_f64()), || line.clone())?;
    Ok(line)
}

fn random_box(rng: &mut impl Rng, lo: &Rational, hi: &Rational) -> (Rational, Rational) {
    let a = rat(rng.gen_range(0..=16), 16);
    let b = rat(rng.gen_range(0..=16), 16);
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let w = hi - lo;
    (lo + &w * a, lo + &w * b)
}

fn regions(config: &Config) -> Result<String, String> {
    let rado = Arc::new(zoo::rado(3));
    let maps = region_maps(&rado, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for m in maps.maps() {
        for _ in 0..100 {
            let bx: Vec<(Rational, Rational)> =
                m.intervals.iter().map(|(lo, hi)| random_box(&mut rng, lo, hi)).collect();
            let vol: Rational = bx.iter().map(|(a, b)| b - a).product();
            let lo: Vec<Rational> = bx.iter().map(|b| b.0.clone()).collect();
            let hi: Vec<Rational> = bx.iter().map(|b| b.1.clone()).collect();
            let pre: Rational = m.alpha_inv(&hi).iter().zip(m.alpha_inv(&lo)).map(|(h, l)| h - l).product();
            ensure(vol / m.volume() == pre, || format!("volume identity fails for {}", rado.name(m.rel)))?;
        }
        for j in 1..m.arity {
            for sub in (0..m.arity).combinations(j) {
                let q = rado.restrict(m.rel, &sub);
                let lower = maps.get(q).ok_or("missing lower region")?;
                ensure(m.restricted(&sub) == lower.intervals, || {
                    format!("{} does not nest over {}", rado.name(m.rel), rado.name(q))
                })?;
            }
        }
    }
    Ok(format!("{} region maps, 100 boxes each", maps.maps().len()))
}

fn red() -> Arc<Language> {
    Arc::new(Language::from_pairs([("Red", 1)]).expect("static language"))
}

fn merge_calculus(config: &Config) -> Result<String, String> {
    let m = Arc::new(zoo::rado(3));
    let n = Arc::new(zoo::pure_set(3));
    let mu = WindowMeasure::iid_unary(m.clone(), red(), 0, &rat(1, 3), 3).map_err(|e| e.to_string())?;
    let cm = erdos_renyi(&m, true).map_err(|e| e.to_string())?;
    let er = cm.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?;
    let nu = ConcentratedBaseMeasure::new(m.clone(), er, None).map_err(|e| e.to_string())?;
    let eta = merge(&mu, &nu).map_err(|e| e.to_string())?;
    let k = m.language().len();
    let inner = eta.marginal(&(0..k).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    ensure(inner.tables() == nu.measure().tables(), || "inner marginal differs from nu".into())?;
    let q = n.witness(n.id("S2").ok_or("no S2")?);
    let event = QfFormula::Conj(vec![Literal::pos("E", &[0, 1]), Literal::pos("Red", &[0]), Literal::neg("Red", &[1])]);
    let direct = eta.prob(q, &event).map_err(|e| e.to_string())?;
    let described = describe_merge(&mu, &nu, q, &event).map_err(|e| e.to_string())?;
    ensure(direct == rat(1, 9) && described == direct, || {
        format!("{} vs {}", format_rational(&direct), format_rational(&described))
    })?;
    let d = decompose(&eta, &m, None).map_err(|e| e.to_string())?;
    ensure(d.mu == mu && d.nu.measure() == nu.measure(), || "decompose(merge) differs".into())?;
    ensure(merge(&d.mu, &d.nu).map_err(|e| e.to_string())? == eta, || "merge(decompose) differs".into())?;
    Ok("marginals, 1/9 example, round trips".into())
}

fn triangle_free_recipes(
    config: &Config,
    count: usize,
) -> (Arc<crate::canonical::CanonicalPresentation>, Vec<AutRecipe>) {
    let tf = Arc::new(zoo::triangle_free(3));
    let l = Arc::new(Language::from_pairs([("Red", 1), ("B", 2)]).expect("static language"));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let recipes = (0..count).map(|_| random_aut_recipe(&tf, &l, &mut rng)).collect();
    (tf, recipes)
}

fn recipe_invariance(config: &Config) -> Result<String, String> {
    let (_, recipes) = triangle_free_recipes(config, 10);
    for (i, f) in recipes.iter().enumerate() {
        let mu = f.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?;
        let r = mu.check_invariance();
        ensure(r.invariant, || format!("recipe {i}: {}", r.witness.map(|w| w.to_string()).unwrap_or_default()))?;
    }
    Ok("10 random recipes over the triangle-free base".into())
}

fn representability(config: &Config) -> Result<String, String> {
    let (tf, recipes) = triangle_free_recipes(config, 10);
    let free = Arc::new(free_completion(&tf, 3).map_err(|e| e.to_string())?);
    for (i, f) in recipes.iter().enumerate() {
        let g = extend_to_free(f, &free).map_err(|e| e.to_string())?;
        let back = restrict_measure(&g.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?, &tf)
            .map_err(|e| e.to_string())?;
        ensure(back == f.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?, || format!("recipe {i}"))?;
    }
    let rado = Arc::new(zoo::rado(3));
    let maps = region_maps(&rado, 3).map_err(|e| e.to_string())?;
    let l = red();
    let coloring = SymRecipe::new(l.clone(), vec![unary_threshold(&l, 0, &rat(1, 3))]).map_err(|e| e.to_string())?;
    let e = maps.cm().product(&coloring, config.cell_cap).map_err(|e| e.to_string())?;
    let f = compose_with_region(&e, &maps, config.cell_cap).map_err(|e| e.to_string())?;
    let direct = AutRecipe::new(
        rado.clone(),
        l.clone(),
        (0..rado.language().len())
            .map(|p| {
                if rado.arity(p) == 1 {
                    unary_threshold(&l, 0, &rat(1, 3))
                } else {
                    StepFunction::trivial(l.clone(), rado.arity(p))
                }
            })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        f.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?
            == direct.pushforward(3, config.cell_cap).map_err(|e| e.to_string())?,
        || "composed recipe differs from the coloring recipe".into(),
    )?;
    Ok("extension restricts back for 10 recipes; composition reproduces the coloring".into())
}

fn types(_: &Config) -> Result<String, String> {
    let l = zoo::graph_language();
    let mut counts = Vec::new();
    for n in 1..=3 {
        let all = enumerate_nonredundant_types(&l, n, DEFAULT_SLOT_CAP).map_err(|e| e.to_string())?;
        for q in &all {
            ensure(merge_parts(&split(q)).ok().as_ref() == Some(q), || {
                format!("round trip fails on {}", q.structure())
            })?;
        }
        counts.push(all.len());
    }
    ensure(counts == [1, 4, 64], || format!("counts {counts:?}"))?;
    Ok("1, 4, 64 types on 1..3 variables, split/merge inverse".into())
}

fn pi_system(_: &Config) -> Result<String, String> {
    let base = Arc::new(zoo::rado(2));
    let l = red();
    let iid = WindowMeasure::iid_unary(base.clone(), l.clone(), 0, &rat(1, 3), 2).map_err(|e| e.to_string())?;
    let mut entries = Vec::new();
    for m in 1..=2 {
        for d in base.labeled_diagrams(m) {
            for e in diagrams(&l, m) {
                let formula = (0..m)
                    .map(|i| Literal { rel: "Red".into(), args: vec![i], positive: e.holds(0, &[i as u8]) })
                    .collect();
                let value = iid.row(&d).and_then(|r| r.get(&e)).cloned().unwrap_or_else(|| rat(0, 1));
                entries.push(PiEntry { base: d.clone(), formula, value });
            }
        }
    }
    let built = from_pi_system(base.clone(), l.clone(), 2, &entries).map_err(|e| e.to_string())?;
    ensure(built == iid, || "built measure differs from the product measure".into())?;
    let mut bad = entries.clone();
    bad[0].value = rat(-1, 3);
    ensure(from_pi_system(base.clone(), l.clone(), 2, &bad).is_err(), || "negative mass accepted".into())?;
    let mut bad = entries.clone();
    let edge = base.witness(base.id("E").ok_or("no E")?).clone();
    bad.push(PiEntry { base: edge, formula: vec![Literal::pos("Red", &[0])], value: rat(1, 2) });
    ensure(from_pi_system(base.clone(), l.clone(), 2, &bad).is_err(), || "additivity failure accepted".into())?;
    Ok("product measure accepted, planted violations rejected".into())
}

fn determinism(config: &Config) -> Result<String, String> {
    let cm = erdos_renyi(&zoo::rado(3), true).map_err(|e| e.to_string())?;
    let a = cm.sample_many(6, config.seed, 200).map_err(|e| e.to_string())?;
    let b = cm.sample_many(6, config.seed, 200).map_err(|e| e.to_string())?;
    ensure(a == b, || "two runs differ".into())?;
    Ok("200 samples identical across runs".into())
}
