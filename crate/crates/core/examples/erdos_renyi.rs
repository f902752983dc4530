//! The Erdős–Rényi structure of a free base: its exact window distribution
//! and a seeded Monte Carlo check against it.

use autmeasure::measure::format_row;
use autmeasure::recipe::{erdos_renyi, DEFAULT_CELL_CAP};
use autmeasure::stats::chi_square;
use autmeasure::zoo;

fn main() {
    let rado = zoo::rado(3);
    let cm = erdos_renyi(&rado, true).unwrap();
    let mu = cm.pushforward(3, DEFAULT_CELL_CAP).unwrap();
    let row = mu.table(3).values().next().unwrap();
    println!("exact distribution on 3 points:");
    for line in format_row(row) {
        println!("  {line}");
    }

    let samples = cm.sample_many(3, 7, 100_000).unwrap();
    let r = chi_square(&samples, row);
    println!("\n{} samples: chi-square {:.3} on {} dof, p = {:.4}", r.samples, r.statistic, r.dof, r.p_value);

    let two = zoo::two_colored_rado(3);
    let mu = erdos_renyi(&two, true).unwrap().pushforward(2, DEFAULT_CELL_CAP).unwrap();
    println!("\ntwo-colored Rado, 2 points:");
    for line in format_row(mu.table(2).values().next().unwrap()) {
        println!("  {line}");
    }

    match erdos_renyi(&zoo::triangle_free(3), true) {
        Ok(_) => println!("unexpected"),
        Err(e) => println!("\ntriangle-free: {e}"),
    }
}
