//! Runs the axiom suite on a well-behaved mechanism and on three broken ones.

use gmech::analysis::faulty::{Negated, Nonlocal, Shifted};
use gmech::analysis::axiom_suite;
use std::sync::Arc;

use gmech::bsde::{as_mechanism, MechanismHandle};
use gmech::generator::make_g_mu;
use gmech::lattice::Lattice;

fn main() -> gmech::Result<()> {
    let l = Lattice::uniform(0.0, 1.0, 16)?;
    let good = as_mechanism(&make_g_mu(0.5)?, &l);
    let cases: Vec<(&str, MechanismHandle)> = vec![
        ("g_mu", good.clone()),
        ("shifted", Arc::new(Shifted { inner: good.clone(), shift: 1.0 })),
        ("negated", Arc::new(Negated { inner: good.clone() })),
        ("nonlocal", Arc::new(Nonlocal { inner: good, weight: 1.0 })),
    ];
    for (name, m) in &cases {
        let report = axiom_suite(m.as_ref(), 100, 7)?;
        let failed: Vec<String> = report.failed().iter().map(|a| a.to_string()).collect();
        println!("{name:>9}: failing axioms [{}]", failed.join(", "));
        if let Some(w) = report.verdicts.iter().find_map(|v| v.witness.as_ref()) {
            println!("           witness at s = {}, t = {}, node {}: {:.4} vs {:.4}", w.s, w.t, w.node, w.lhs, w.rhs);
        }
    }
    Ok(())
}
