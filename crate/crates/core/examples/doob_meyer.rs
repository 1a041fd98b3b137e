//! Splits a price process with a planted increasing part back into the
//! martingale-type price and its dividend stream.

use gmech::analysis::doob_meyer;
use gmech::bsde::{solve_range, DividendStream};
use gmech::generator::make_g_mu;
use gmech::lattice::{AdaptedProcess, Lattice};

fn main() -> gmech::Result<()> {
    let l = Lattice::uniform(0.0, 1.0, 20)?;
    let n = l.n_steps();
    let g = make_g_mu(0.8)?;
    let x: Vec<f64> = l.brownian_at_step(n).iter().map(|b| b.sin()).collect();
    let planted = AdaptedProcess::from_fn(0, n - 1, |i, j| 0.1 * l.dt() * (1.0 + (i + j) as f64 / n as f64));
    let a = DividendStream::from_increments(&l, planted.clone())?;
    let y = solve_range(&g, &l, 0, n, &x, &a)?.y;

    let d = doob_meyer(&g, &y, &DividendStream::zero(), &l)?;
    println!("max |A - A*| = {:.2e}", d.increments.max_abs_diff(&planted));
    println!("reconstruction error = {:.2e}", d.reconstruction_error);
    let path: Vec<bool> = (0..n).map(|k| k % 3 == 0).collect();
    println!("A along a path: {:.4?}", d.cumulative_along(&path));
    Ok(())
}
