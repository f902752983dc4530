//! Ordered and non-redundant quantifier-free types for a graph language,
//! the split/merge correspondence between them, and the gamma coding of lists.

use std::sync::Arc;

use autmeasure::qftypes::{
    enumerate_nonredundant_types, enumerate_ordered_types, merge, split, IntervalCode, DEFAULT_SLOT_CAP,
};
use autmeasure::rational::{format_rational, rat};
use autmeasure::zoo;

fn main() {
    let l = zoo::graph_language();
    for n in 1..=3 {
        let ordered = enumerate_ordered_types(&l, n, DEFAULT_SLOT_CAP).unwrap();
        let nonred = enumerate_nonredundant_types(&l, n, DEFAULT_SLOT_CAP).unwrap();
        println!("{n} variables: {} ordered, {} non-redundant", ordered.len(), nonred.len());
    }

    let types = enumerate_nonredundant_types(&l, 2, DEFAULT_SLOT_CAP).unwrap();
    let q = types.iter().find(|q| q.structure().facts().len() == 1).unwrap();
    println!("\nsplitting {}", q.structure());
    let parts = split(q);
    for (tuple, t) in &parts {
        println!("  on {tuple:?}: {:?}", t);
    }
    assert_eq!(merge(&parts).unwrap(), *q);
    println!("merged back: {}", merge(&parts).unwrap().structure());

    let colors = IntervalCode::Finite(vec!["red", "green", "blue"]);
    for y in [rat(0, 1), rat(1, 3), rat(5, 6), rat(1, 1)] {
        println!("gamma({}) = {}", format_rational(&y), colors.eval(&y));
    }
    let naturals: IntervalCode<usize> = IntervalCode::Infinite(Arc::new(|i| i));
    for i in 0..4 {
        let (lo, hi) = naturals.preimage(i);
        println!("item {i} <- [{}, {})", format_rational(&lo), format_rational(&hi));
    }
}
