//! Canonical presentations, freeness, and the free completion of the
//! generic triangle-free graph.

use autmeasure::canonical::{free_completion, is_sub_can};
use autmeasure::zoo;

fn main() {
    let rado = zoo::rado(4);
    let r = rado.is_free();
    println!("Rado: free = {} up to arity {}", r.free, r.up_to_arity);

    let tf = zoo::triangle_free(3);
    let r = tf.is_free();
    println!("triangle-free: free = {}, witness {}", r.free, r.witness.unwrap().display(tf.language()));

    println!("\ncompatible collections of arity 3 and their extensions:");
    for coll in tf.enumerate_compatible(3) {
        let ext = tf.extensions_of(&coll).unwrap();
        let names: Vec<&str> = ext.iter().map(|&r| tf.name(r)).collect();
        println!("  {} -> [{}]", coll.display(tf.language()), names.join(", "));
    }

    let free = free_completion(&tf, 3).unwrap();
    let fresh: Vec<&str> = (0..free.language().len()).map(|r| free.name(r)).filter(|n| tf.id(n).is_none()).collect();
    println!("\nfree completion adds {fresh:?}; free = {}", free.is_free().free);

    let rado3 = zoo::rado(3);
    let emb = is_sub_can(&free, &rado3).embedding.unwrap();
    println!("as a relabeling of Rado:");
    for (p, q) in emb.iter().enumerate() {
        println!("  {} -> {}", free.name(p), rado3.name(*q));
    }
}
