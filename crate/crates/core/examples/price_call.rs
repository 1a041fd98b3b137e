//! Prices a European call under the Black–Scholes driver and compares it
//! with the closed form as the lattice is refined.

use gmech::bsde::{solve_bsde, DividendStream, LognormalMap, TerminalClaim};
use gmech::generator::{make_black_scholes_generator, BSMarketParams};
use gmech::lattice::Lattice;
use gmech::market::black_scholes;

fn main() -> gmech::Result<()> {
    let p = BSMarketParams::new(0.05, 0.08, 0.2)?;
    let g = make_black_scholes_generator(p)?;
    let map = LognormalMap {
        s0: 100.0,
        sigma: p.sigma,
        drift: p.b,
    };
    let (exact, _) = black_scholes(100.0, 100.0, p.r, p.sigma, 1.0);
    println!("closed form {exact:.6}");
    for n in [50, 200, 800, 2000] {
        let l = Lattice::uniform(0.0, 1.0, n)?;
        let v = solve_bsde(&g, &TerminalClaim::call(map, 1.0, 100.0), &DividendStream::zero(), &l)?.value_at_origin();
        println!("N = {n:>5}: {v:.6} (error {:+.2e})", v - exact);
    }
    Ok(())
}
