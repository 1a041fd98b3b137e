//! Pastes two mechanisms in time and compares the result with the
//! generator that switches at the same date.

use gmech::bsde::{as_mechanism, paste, solve_range, DividendStream};
use gmech::generator::{make_g_mu, Generator};
use gmech::lattice::Lattice;

fn main() -> gmech::Result<()> {
    let l = Lattice::uniform(0.0, 1.0, 40)?;
    let (early, late) = (make_g_mu(0.4)?, Generator::abs_z(0.2)?);
    let pasted = paste(&[as_mechanism(&early, &l), as_mechanism(&late, &l)], &[0, 20, 40])?;
    let switched = early.switched_at(l.time(20), &late);
    let x: Vec<f64> = l.brownian_at_step(40).iter().map(|b| b.abs() - 0.5).collect();
    let zero = DividendStream::zero();
    let a = pasted.price(0, 40, &x, &zero)?[0];
    let b = solve_range(&switched, &l, 0, 40, &x, &zero)?.value_at_origin();
    println!("pasted {a:.10}, switched generator {b:.10}");
    println!("{}", pasted.describe());
    Ok(())
}
