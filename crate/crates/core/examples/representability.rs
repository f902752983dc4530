//! Recipes over a base structure: random recipes and their exact
//! pushforwards, extension to the free completion, region maps, and
//! composing a product recipe into an Aut recipe.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use autmeasure::canonical::free_completion;
use autmeasure::lang::Language;
use autmeasure::measure::restrict_measure;
use autmeasure::rational::format_rational;
use autmeasure::rational::rat;
use autmeasure::recipe::{
    compose_with_region, extend_to_free, random_aut_recipe, region_maps, unary_threshold, SymRecipe, DEFAULT_CELL_CAP,
};
use autmeasure::zoo;

fn main() {
    let tf = Arc::new(zoo::triangle_free(3));
    let l = Arc::new(Language::from_pairs([("Red", 1), ("B", 2)]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_aut_recipe(&tf, &l, &mut rng);
    let mu = f.pushforward(3, DEFAULT_CELL_CAP).unwrap();
    println!("random recipe: invariant = {}", mu.check_invariance().invariant);

    let free = Arc::new(free_completion(&tf, 3).unwrap());
    let g = extend_to_free(&f, &free).unwrap();
    let back = restrict_measure(&g.pushforward(3, DEFAULT_CELL_CAP).unwrap(), &tf).unwrap();
    println!("extended to the free completion and restricted back: equal = {}", back == mu);

    let rado = Arc::new(zoo::rado(3));
    let maps = region_maps(&rado, 3).unwrap();
    println!("\nregions of the Rado types:");
    for m in maps.maps() {
        let sides: Vec<String> =
            m.intervals.iter().map(|(lo, hi)| format!("[{},{})", format_rational(lo), format_rational(hi))).collect();
        println!("  {:<12} volume {:<5} {}", rado.name(m.rel), format_rational(&m.volume()), sides.join(" "));
    }

    let red = Arc::new(Language::from_pairs([("Red", 1)]).unwrap());
    let coloring = SymRecipe::new(red.clone(), vec![unary_threshold(&red, 0, &rat(1, 4))]).unwrap();
    let e = maps.cm().product(&coloring, DEFAULT_CELL_CAP).unwrap();
    let h = compose_with_region(&e, &maps, DEFAULT_CELL_CAP).unwrap();
    let mu = h.pushforward(2, DEFAULT_CELL_CAP).unwrap();
    let edge = rado.witness(rado.id("E").unwrap());
    println!("\ncomposed recipe over an edge:");
    for (d, p) in mu.row(edge).unwrap() {
        println!("  {d}: {}", format_rational(p));
    }
}
