//! Building a measure from pre-measure values, merging it with a base
//! measure, evaluating events by the sum formula, and splitting it back.

use std::sync::Arc;

use autmeasure::io::parse_formula;
use autmeasure::lang::{Language, Literal};
use autmeasure::measure::{decompose, describe_merge, from_pi_system, merge, ConcentratedBaseMeasure, PiEntry};
use autmeasure::rational::{format_rational, rat};
use autmeasure::zoo;

fn main() {
    let rado = Arc::new(zoo::rado(3));
    let red = Arc::new(Language::from_pairs([("Red", 1)]).unwrap());

    // every point red with probability 1/3, given on complete conjunctions
    let mut entries = Vec::new();
    for m in 1..=3 {
        for d in rado.labeled_diagrams(m) {
            for bits in 0u32..1 << m {
                let formula = (0..m)
                    .map(|i| Literal { rel: "Red".into(), args: vec![i], positive: bits >> i & 1 == 1 })
                    .collect();
                let k = bits.count_ones() as i64;
                let value = (0..m as i64).fold(rat(1, 1), |v, j| v * if j < k { rat(1, 3) } else { rat(2, 3) });
                entries.push(PiEntry { base: d.clone(), formula, value });
            }
        }
    }
    let mu = from_pi_system(rado.clone(), red, 3, &entries).unwrap();
    println!("mu is invariant: {}", mu.check_invariance().invariant);

    let nu = ConcentratedBaseMeasure::uniform(rado.clone(), Arc::new(zoo::pure_set(3)), 3, None).unwrap();
    let eta = merge(&mu, &nu).unwrap();
    let s2 = nu.outer().witness(nu.outer().id("S2").unwrap()).clone();
    for text in ["E(0,1) & Red(0) & !Red(1)", "E(0,1)", "Red(0) | Red(1)", "E*(0,1) & Red(0) & Red(1)"] {
        let f = parse_formula(text).unwrap();
        let direct = eta.prob(&s2, &f).unwrap();
        let summed = describe_merge(&mu, &nu, &s2, &f).unwrap();
        println!("P({text}) = {} (sum formula {})", format_rational(&direct), format_rational(&summed));
    }

    let d = decompose(&eta, &rado, None).unwrap();
    println!("decompose recovers mu: {}, nu: {}", d.mu == mu, d.nu.measure() == nu.measure());
}
