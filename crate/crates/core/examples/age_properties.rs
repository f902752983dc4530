//! Hereditary, joint embedding and amalgamation checks on a few ages, and
//! the definable closure test that reads off strong amalgamation.

use autmeasure::canonical::has_trivial_dcl;
use autmeasure::lang::{age_of, check_age_properties, Age, WindowStructure};
use autmeasure::zoo;

fn report(name: &str, age: &Age) {
    let r = check_age_properties(age);
    println!(
        "{name:<16} bound {} members {:>3}  HP {:<5} JEP {:<5} SAP {:<5}",
        r.size_bound,
        age.members().len(),
        r.hp,
        r.jep,
        r.sap
    );
    if let Some(w) = r.sap_witness {
        println!("  no strong amalgam of {} and {} over {}", w.left, w.right, w.base);
    }
}

fn main() {
    report("graphs", &zoo::graphs_age(4));
    report("triangle-free", &zoo::triangle_free_age(4));
    report("successor paths", &zoo::successor_paths_age(3));

    // the age of a single 5-cycle
    let cycle = zoo::graphs_on(5, |e| e.len() == 5 && e.iter().all(|&(a, b)| b == a + 1 || (a, b) == (0, 4)));
    let c5: &WindowStructure = &cycle[0];
    let age = age_of(c5.language().clone(), [c5], 4);
    report("age of C5", &age);

    for (name, age) in [("graphs", zoo::graphs_age(5)), ("triangle-free", zoo::triangle_free_age(5))] {
        println!("{name}: trivial dcl = {}", has_trivial_dcl(&age).trivial);
    }
}
