//! Synthesises a Black–Scholes option chain, audits it for domination by
//! g_mu and then plants a monotonicity defect.

use gmech::generator::BSMarketParams;
use gmech::market::{corrupt_monotonicity, monotonicity_anomalies, run_domination_test, strike_ladder, synth_chain};

fn main() -> gmech::Result<()> {
    let p = BSMarketParams::new(0.03, 0.06, 0.25)?;
    let strikes = strike_ladder(80.0, 120.0, 9);
    let mut chain = synth_chain(p, 100.0, &strikes, 0.0, 180.0, None)?;
    let report = run_domination_test(&chain, 0.5, 200, p.sigma)?;
    println!("{} inequalities tested, {} violated", report.tested(), report.violated());
    for f in &report.families {
        println!("  {:?}: {}/{}", f.family, f.violated, f.tested);
    }

    let c = corrupt_monotonicity(&mut chain, 1);
    println!("corrupted row {} ({})", c.row, if c.put { "put" } else { "call" });
    for a in monotonicity_anomalies(&chain) {
        println!("  anomaly {:?} between strikes {} and {}", a.family, a.i, a.j);
    }
    print!("{}", chain.to_csv()?);
    Ok(())
}
