//! Probes a mechanism with linear claims in B and with short-horizon
//! forward claims to read off the driver.

use gmech::analysis::{extrapolate_to_zero, infinitesimal_probe, z_probe, ProbeSpec};
use gmech::bsde::as_mechanism;
use gmech::generator::{make_black_scholes_generator, BSMarketParams, Generator};
use gmech::lattice::Lattice;

fn main() -> gmech::Result<()> {
    let l = Lattice::uniform(0.0, 1.0, 64)?;
    let m = as_mechanism(&Generator::abs_z(0.1)?, &l);
    for zbar in [-2.0, 0.5, 2.0] {
        println!("0.1|z| probe at zbar = {zbar:+}: {:.12}", z_probe(m.as_ref(), zbar, 0, 64)?);
    }

    let p = BSMarketParams::new(0.05, 0.08, 0.2)?;
    let g = make_black_scholes_generator(p)?;
    let m = as_mechanism(&g, &Lattice::uniform(0.0, 1.0, 1024)?);
    let (b, sigma) = (|x: f64| 0.3 * x, |_: f64| 0.5);
    let spec = ProbeSpec {
        x: 1.0,
        p: 2.0,
        y: 1.0,
        b: &b,
        sigma: &sigma,
        t_step: 0,
    };
    let q: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&k| infinitesimal_probe(m.as_ref(), spec, k))
        .collect::<gmech::Result<_>>()?;
    let limit = extrapolate_to_zero(q[0], q[1], q[2]);
    let expected = spec.p * b(spec.x) + g.eval(0.0, spec.y, spec.p * sigma(spec.x));
    println!("forward probe {q:.6?} -> {limit:.6}, p b + g(y, p sigma) = {expected:.6}");
    Ok(())
}
