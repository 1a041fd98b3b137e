//! Seeded random claims, events, dividend streams and generator families
//! for the property suites.

use std::f64::consts::PI;

use rand::Rng;

use crate::bsde::DividendStream;
use crate::generator::{Generator, GeneratorFlags};
use crate::lattice::{AdaptedProcess, Lattice};

/// Node values uniform in `[-scale, scale]`, blended with a smooth profile.
pub fn random_claim(rng: &mut impl Rng, nodes: usize, scale: f64) -> Vec<f64> {
    let freq: f64 = rng.gen_range(0.0..PI);
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let rough: f64 = rng.gen_range(0.0..1.0);
    (0..nodes)
        .map(|k| {
            let smooth = (freq * k as f64 + phase).sin();
            let noise: f64 = rng.gen_range(-1.0..1.0);
            scale * ((1.0 - rough) * smooth + rough * noise)
        })
        .collect()
}

/// Non-negative perturbation of size at most `scale`.
pub fn random_nonneg(rng: &mut impl Rng, nodes: usize, scale: f64) -> Vec<f64> {
    (0..nodes).map(|_| rng.gen_range(0.0..scale)).collect()
}

/// Random non-empty proper node subset at a step with `nodes` nodes
/// (the full set when only one node exists).
pub fn random_event(rng: &mut impl Rng, nodes: usize) -> Vec<bool> {
    if nodes == 1 {
        return vec![rng.gen_bool(0.5)];
    }
    loop {
        let e: Vec<bool> = (0..nodes).map(|_| rng.gen_bool(0.5)).collect();
        if e.iter().any(|&b| b) && e.iter().any(|&b| !b) {
            return e;
        }
    }
}

/// Dividend stream with node-wise increments in `[lo, hi] * dt`.
pub fn random_stream(rng: &mut impl Rng, lattice: &Lattice, lo: f64, hi: f64) -> DividendStream {
    let dt = lattice.dt();
    let inc = AdaptedProcess::from_fn(0, lattice.n_steps() - 1, |_, _| rng.gen_range(lo..=hi) * dt);
    DividendStream::from_increments(lattice, inc).expect("covers lattice")
}

fn coeffs<const N: usize>(rng: &mut impl Rng) -> [f64; N] {
    let mut c = [0.0; N];
    for v in c.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    c
}

/// Scale so the larger of the y- and z-Lipschitz constants equals `target`.
fn normalise(ly: f64, lz: f64, target: f64) -> (f64, f64) {
    let l = ly.max(lz);
    if l == 0.0 {
        (0.0, 0.0)
    } else {
        let k = target / l;
        (k, target)
    }
}

/// A random driver with `g(t, 0, 0) = 0` and Lipschitz constant at most `mu_max`:
/// `a1 y + a2 |y| + a3 sin y + (b1 z + b2 |z| + b3 tanh z) cos t`.
pub fn random_lipschitz_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [a1, a2, a3, b1, b2, b3] = coeffs::<6>(rng);
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(a1.abs() + a2.abs() + a3.abs(), b1.abs() + b2.abs() + b3.abs(), target);
    let (a1, a2, a3, b1, b2, b3) = (k * a1, k * a2, k * a3, k * b1, k * b2, k * b3);
    Generator::new(
        "random-lipschitz",
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            ..Default::default()
        },
        move |t, y, z| a1 * y + a2 * y.abs() + a3 * y.sin() + (b1 * z + b2 * z.abs() + b3 * z.tanh()) * t.cos(),
    )
    .expect("finite mu")
}

/// Convex, zero at the origin, not positively homogeneous:
/// `a1 y + a2 |y| + b1 z + b2 |z| + c (sqrt(1 + z^2) - 1)` with `a2, b2, c >= 0`.
pub fn random_convex_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [a1, a2, b1, b2, c] = coeffs::<5>(rng);
    let (a2, b2, c) = (a2.abs(), b2.abs(), c.abs());
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(a1.abs() + a2, b1.abs() + b2 + c, target);
    let (a1, a2, b1, b2, c) = (k * a1, k * a2, k * b1, k * b2, k * c);
    Generator::new(
        "random-convex",
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            ..Default::default()
        },
        move |_, y, z| a1 * y + a2 * y.abs() + b1 * z + b2 * z.abs() + c * ((1.0 + z * z).sqrt() - 1.0),
    )
    .expect("finite mu")
}

/// Sublinear (convex and positively homogeneous, hence subadditive):
/// `a1 y + a2 |y| + b1 z + b2 |z| + c max(y, z)` with `a2, b2, c >= 0`.
pub fn random_sublinear_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [a1, a2, b1, b2, c] = coeffs::<5>(rng);
    let (a2, b2, c) = (a2.abs(), b2.abs(), c.abs());
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(a1.abs() + a2 + c, b1.abs() + b2 + c, target);
    let (a1, a2, b1, b2, c) = (k * a1, k * a2, k * b1, k * b2, k * c);
    Generator::new(
        "random-sublinear",
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            ..Default::default()
        },
        move |_, y, z| a1 * y + a2 * y.abs() + b1 * z + b2 * z.abs() + c * y.max(z),
    )
    .expect("finite mu")
}

/// Positively homogeneous but concave in its last term:
/// `a1 y + b1 z + c min(y, z)` with `c >= 0`.
pub fn random_homogeneous_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [a1, b1, c] = coeffs::<3>(rng);
    let c = c.abs();
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(a1.abs() + c, b1.abs() + c, target);
    let (a1, b1, c) = (k * a1, k * b1, k * c);
    Generator::new(
        "random-homogeneous",
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            ..Default::default()
        },
        move |_, y, z| a1 * y + b1 * z + c * y.min(z),
    )
    .expect("finite mu")
}

/// Independent of `y`: `(b1 z + b2 |z| + b3 tanh z) (1 + sin t) / 2`.
pub fn random_y_free_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [b1, b2, b3] = coeffs::<3>(rng);
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(0.0, b1.abs() + b2.abs() + b3.abs(), target);
    let (b1, b2, b3) = (k * b1, k * b2, k * b3);
    Generator::new(
        "random-y-free",
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            y_independent: true,
            z_only: true,
        },
        move |t, _, z| (b1 * z + b2 * z.abs() + b3 * z.tanh()) * 0.5 * (1.0 + t.sin()),
    )
    .expect("finite mu")
}

/// Vanishes at `z = 0` for every `y`: `b1 z + b2 |z| + c sin(y) tanh(z)`.
pub fn random_zero_rate_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [b1, b2, c] = coeffs::<3>(rng);
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(c.abs(), b1.abs() + b2.abs() + c.abs(), target);
    let (b1, b2, c) = (k * b1, k * b2, k * c);
    Generator::new(
        "random-zero-rate",
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            ..Default::default()
        },
        move |_, y, z| b1 * z + b2 * z.abs() + c * y.sin() * z.tanh(),
    )
    .expect("finite mu")
}

/// Independent of `z` and affine in `y`: `a(t) y + c(t)`.
pub fn random_z_free_generator(rng: &mut impl Rng, mu_max: f64) -> Generator {
    let [a1, a2, c1] = coeffs::<3>(rng);
    let target = mu_max * rng.gen_range(0.2..=1.0);
    let (k, mu) = normalise(a1.abs() + a2.abs(), 0.0, target);
    let (a1, a2) = (k * a1, k * a2);
    Generator::new(
        "random-z-free",
        mu,
        GeneratorFlags {
            deterministic: true,
            ..Default::default()
        },
        move |t, y, _| (a1 + a2 * t.sin()) * y + c1 * t.cos(),
    )
    .expect("finite mu")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{classify_generator, verify_lipschitz, SampleBox};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn families_respect_declared_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let region = SampleBox::symmetric(5.0, 1.0);
        for _ in 0..20 {
            let g = random_lipschitz_generator(&mut rng, 1.5);
            assert!(g.mu() <= 1.5 + 1e-12);
            assert!(verify_lipschitz(&g, 300, region, 1).ok);
            assert!(classify_generator(&g, 50, region, 1).zero_at_zero.holds);

            let c = classify_generator(&random_convex_generator(&mut rng, 1.0), 300, region, 2);
            assert!(c.convex.holds && c.sellers.holds);
            let s = classify_generator(&random_sublinear_generator(&mut rng, 1.0), 300, region, 3);
            assert!(s.convex.holds && s.subadditive.holds && s.positively_homogeneous.holds);
            let h = classify_generator(&random_homogeneous_generator(&mut rng, 1.0), 300, region, 4);
            assert!(h.positively_homogeneous.holds);
            assert!(classify_generator(&random_y_free_generator(&mut rng, 1.0), 300, region, 5).y_independent.holds);
            assert!(classify_generator(&random_zero_rate_generator(&mut rng, 1.0), 300, region, 6).zero_rate.holds);
            assert!(classify_generator(&random_z_free_generator(&mut rng, 1.0), 300, region, 7).z_independent.holds);
        }
    }

    #[test]
    fn events_are_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..10 {
            let e = random_event(&mut rng, n);
            assert!(e.iter().any(|&b| b) && e.iter().any(|&b| !b));
        }
    }
}
