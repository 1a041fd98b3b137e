//! Reads the driver of a black-box mechanism off its price surface and
//! checks the domination bound node by node.

use gmech::analysis::represent;
use gmech::bsde::{as_mechanism, DividendStream};
use gmech::generator::Generator;
use gmech::lattice::Lattice;

fn main() -> gmech::Result<()> {
    let l = Lattice::uniform(0.0, 1.0, 30)?;
    let g = Generator::new("smooth", 0.6, Default::default(), |t, y, z| 0.3 * y.sin() - 0.3 * z.tanh() * t.cos())?;
    let m = as_mechanism(&g, &l);
    let x: Vec<f64> = l.brownian_at_step(30).iter().map(|b| (b - 0.2).max(0.0)).collect();
    let r = represent(m.as_ref(), &x, &DividendStream::constant_rate(&l, 0.1))?;
    println!("price at origin {:.6}", r.y.get(0, 0));
    println!("driver at origin {:.6}, z = {:.6}", r.driver.get(0, 0), r.integrand.get(0, 0));
    println!("largest |driver| - mu (|y| + |z|): {:.3e}", r.bound_margin);
    Ok(())
}
