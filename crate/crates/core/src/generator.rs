//! Price generating functions `g(t, y, z)`.
//!
//! A [`Generator`] is an immutable, shareable driver with a declared
//! Lipschitz constant `mu` in the sense
//! `|g(t,y,z) - g(t,y',z')| <= mu * (|y - y'| + |z - z'|)`.
//! Structural properties are checked by seeded sampling: a `false` verdict
//! always comes with a witness, a `true` verdict only means no witness was
//! found.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type DriverFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
type StepFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// Advisory structural metadata attached to a generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorFlags {
    pub zero_at_zero: bool,
    pub y_independent: bool,
    pub deterministic: bool,
    pub z_only: bool,
}

#[derive(Clone)]
pub struct Generator {
    name: String,
    mu: f64,
    flags: GeneratorFlags,
    eval: Arc<DriverFn>,
    /// Closed-form root of `y = base + g(t, y, z) dt`, given `(dt, base, z)`.
    exact_step: Option<Arc<StepFn>>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("flags", &self.flags)
            .finish()
    }
}

impl Generator {
    pub fn new(
        name: impl Into<String>,
        mu: f64,
        flags: GeneratorFlags,
        eval: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::NegativeMu(mu));
        }
        Ok(Generator {
            name: name.into(),
            mu,
            flags,
            eval: Arc::new(eval),
            exact_step: None,
        })
    }

    #[inline]
    pub fn eval(&self, t: f64, y: f64, z: f64) -> f64 {
        (self.eval)(t, y, z)
    }

    /// Root of the implicit step when known in closed form.
    #[inline]
    pub fn exact_step(&self, dt: f64, base: f64, z: f64) -> Option<f64> {
        self.exact_step.as_ref().map(|f| f(dt, base, z))
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn flags(&self) -> GeneratorFlags {
        self.flags
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Same driver with a different declared constant. Used to build
    /// deliberately mis-declared generators in tests.
    pub fn with_declared_mu(&self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::NegativeMu(mu));
        }
        Ok(Generator {
            mu,
            ..self.clone()
        })
    }

    /// `g ≡ 0`: the linear expectation.
    pub fn zero() -> Self {
        Generator::new(
            "zero",
            0.0,
            GeneratorFlags {
                zero_at_zero: true,
                y_independent: true,
                deterministic: true,
                z_only: true,
            },
            |_, _, _| 0.0,
        )
        .expect("zero generator is valid")
    }

    /// `g(z) = c |z|`.
    pub fn abs_z(c: f64) -> Result<Self> {
        Generator::new(
            format!("abs_z:{c}"),
            c.abs(),
            GeneratorFlags {
                zero_at_zero: true,
                y_independent: true,
                deterministic: true,
                z_only: true,
            },
            move |_, _, z| c * z.abs(),
        )
    }

    /// `g-(t, y, z) = -g(t, -y, -z)`, the driver of the seller/buyer dual.
    pub fn dual(&self) -> Self {
        let inner = self.eval.clone();
        Generator {
            name: format!("dual({})", self.name),
            mu: self.mu,
            flags: self.flags,
            eval: Arc::new(move |t, y, z| -inner(t, -y, -z)),
            exact_step: None,
        }
    }

    /// Uses `self` before `t_switch` and `after` from `t_switch` on.
    pub fn switched_at(&self, t_switch: f64, after: &Generator) -> Self {
        let (a, b) = (self.eval.clone(), after.eval.clone());
        Generator {
            name: format!("{}|{}@{}", self.name, after.name, t_switch),
            mu: self.mu.max(after.mu),
            flags: GeneratorFlags {
                zero_at_zero: self.flags.zero_at_zero && after.flags.zero_at_zero,
                y_independent: self.flags.y_independent && after.flags.y_independent,
                deterministic: self.flags.deterministic && after.flags.deterministic,
                z_only: self.flags.z_only && after.flags.z_only,
            },
            eval: Arc::new(move |t, y, z| if t < t_switch { a(t, y, z) } else { b(t, y, z) }),
            exact_step: None,
        }
    }
}

/// `g_mu(y, z) = mu |y| + mu |z|`, the dominating generator.
pub fn make_g_mu(mu: f64) -> Result<Generator> {
    if !(mu >= 0.0) {
        return Err(Error::NegativeMu(mu));
    }
    Generator::new(
        format!("gmu:{mu}"),
        mu,
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            y_independent: mu == 0.0,
            z_only: mu == 0.0,
        },
        move |_, y, z| mu * y.abs() + mu * z.abs(),
    )
    .map(|g| Generator {
        exact_step: Some(Arc::new(move |dt, base, z| {
            let c = base + mu * dt * z.abs();
            if c >= 0.0 {
                c / (1.0 - mu * dt)
            } else {
                c / (1.0 + mu * dt)
            }
        })),
        ..g
    })
}

/// Short rate, stock drift and volatility of a one-factor Black–Scholes market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSMarketParams {
    pub r: f64,
    pub b: f64,
    pub sigma: f64,
}

impl BSMarketParams {
    pub fn new(r: f64, b: f64, sigma: f64) -> Result<Self> {
        let p = BSMarketParams { r, b, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.b.is_finite() && self.sigma.is_finite()) {
            return Err(Error::InvalidParams("market parameters must be finite".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Market price of risk `(b - r) / sigma`.
    pub fn theta(&self) -> f64 {
        (self.b - self.r) / self.sigma
    }

    /// Smallest `mu` for which `g_mu` dominates the Black–Scholes driver.
    pub fn dominating_mu(&self) -> f64 {
        self.r.abs().max(self.theta().abs())
    }
}

/// Replication driver `g(t, y, z) = -r y - ((b - r) / sigma) z`.
pub fn make_black_scholes_generator(p: BSMarketParams) -> Result<Generator> {
    p.validate()?;
    let (r, theta) = (p.r, p.theta());
    Generator::new(
        format!("bs:r={},b={},sigma={}", p.r, p.b, p.sigma),
        p.dominating_mu(),
        GeneratorFlags {
            zero_at_zero: true,
            deterministic: true,
            y_independent: r == 0.0,
            z_only: r == 0.0,
        },
        move |_, y, z| -r * y - theta * z,
    )
}

/// Sampling region for `(t, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl SampleBox {
    pub fn symmetric(half_width: f64, horizon: f64) -> Self {
        SampleBox {
            t: (0.0, horizon),
            y: (-half_width, half_width),
            z: (-half_width, half_width),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> (f64, f64, f64) {
        (
            uniform(rng, self.t),
            uniform(rng, self.y),
            uniform(rng, self.z),
        )
    }
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox::symmetric(10.0, 1.0)
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub ok: bool,
    pub worst_ratio: f64,
}

/// Sampled falsification of the declared Lipschitz constant.
pub fn verify_lipschitz(g: &Generator, samples: usize, region: SampleBox, seed: u64) -> LipschitzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples.max(1) {
        let (t, y, z) = region.draw(&mut rng);
        let (_, y2, z2) = region.draw(&mut rng);
        let dist = (y - y2).abs() + (z - z2).abs();
        if dist < 1e-12 {
            continue;
        }
        let ratio = (g.eval(t, y, z) - g.eval(t, y2, z2)).abs() / dist;
        worst = worst.max(ratio);
    }
    LipschitzReport {
        ok: worst <= g.mu() * (1.0 + 1e-9),
        worst_ratio: worst,
    }
}

/// Where a sampled structural property failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub point: (f64, f64),
    pub other: Option<(f64, f64)>,
    pub param: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl PropertyVerdict {
    fn new() -> Self {
        PropertyVerdict {
            holds: true,
            witness: None,
        }
    }

    fn record(&mut self, ok: bool, w: impl FnOnce() -> Witness) {
        if !ok && self.holds {
            self.holds = false;
            self.witness = Some(w());
        }
    }
}

/// Sampled verdicts for the structural properties of `g` that correspond to
/// properties of the induced pricing mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub samples: usize,
    pub zero_at_zero: PropertyVerdict,
    pub convex: PropertyVerdict,
    pub concave: PropertyVerdict,
    pub positively_homogeneous: PropertyVerdict,
    pub subadditive: PropertyVerdict,
    /// Cash invariance of the mechanism.
    pub y_independent: PropertyVerdict,
    pub z_independent: PropertyVerdict,
    /// Zero-interest-rate condition: `g(t, y, 0) = 0`.
    pub zero_rate: PropertyVerdict,
    /// `g(t, y, z) >= -g(t, -y, -z)`.
    pub sellers: PropertyVerdict,
    /// Taken from the generator flags; deterministic drivers cannot be
    /// distinguished from random ones by evaluation alone.
    pub deterministic: bool,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn le(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * (1.0 + a.abs().max(b.abs()))
}

pub fn classify_generator(g: &Generator, samples: usize, region: SampleBox, seed: u64) -> StructureReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = StructureReport {
        samples: samples.max(1),
        zero_at_zero: PropertyVerdict::new(),
        convex: PropertyVerdict::new(),
        concave: PropertyVerdict::new(),
        positively_homogeneous: PropertyVerdict::new(),
        subadditive: PropertyVerdict::new(),
        y_independent: PropertyVerdict::new(),
        z_independent: PropertyVerdict::new(),
        zero_rate: PropertyVerdict::new(),
        sellers: PropertyVerdict::new(),
        deterministic: g.flags().deterministic,
    };
    for _ in 0..r.samples {
        let (t, y, z) = region.draw(&mut rng);
        let (_, y2, z2) = region.draw(&mut rng);
        let alpha: f64 = rng.gen_range(0.0..1.0);
        let lambda: f64 = rng.gen_range(0.0..4.0);
        let w = |other: Option<(f64, f64)>, param: Option<f64>, lhs: f64, rhs: f64| Witness {
            t,
            point: (y, z),
            other,
            param,
            lhs,
            rhs,
        };

        let g00 = g.eval(t, 0.0, 0.0);
        r.zero_at_zero.record(close(g00, 0.0), || w(None, None, g00, 0.0));

        let g1 = g.eval(t, y, z);
        let g2 = g.eval(t, y2, z2);
        let mix = g.eval(t, alpha * y + (1.0 - alpha) * y2, alpha * z + (1.0 - alpha) * z2);
        let chord = alpha * g1 + (1.0 - alpha) * g2;
        r.convex
            .record(le(mix, chord), || w(Some((y2, z2)), Some(alpha), mix, chord));
        r.concave
            .record(le(chord, mix), || w(Some((y2, z2)), Some(alpha), mix, chord));

        let scaled = g.eval(t, lambda * y, lambda * z);
        r.positively_homogeneous.record(close(scaled, lambda * g1), || {
            w(None, Some(lambda), scaled, lambda * g1)
        });

        let sum = g.eval(t, y + y2, z + z2);
        r.subadditive
            .record(le(sum, g1 + g2), || w(Some((y2, z2)), None, sum, g1 + g2));

        let gy = g.eval(t, y2, z);
        r.y_independent
            .record(close(g1, gy), || w(Some((y2, z)), None, g1, gy));
        let gz = g.eval(t, y, z2);
        r.z_independent
            .record(close(g1, gz), || w(Some((y, z2)), None, g1, gz));

        let gy0 = g.eval(t, y, 0.0);
        r.zero_rate.record(close(gy0, 0.0), || w(Some((y, 0.0)), None, gy0, 0.0));

        let mirror = -g.eval(t, -y, -z);
        r.sellers.record(le(mirror, g1), || w(None, None, g1, mirror));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_mu_values() {
        let g = make_g_mu(0.5).unwrap();
        assert_eq!(g.eval(0.3, 1.0, 2.0), 1.5);
        assert_eq!(g.eval(0.3, 0.0, 0.0), 0.0);
        assert!(g.flags().zero_at_zero && g.flags().deterministic);
        let zero = make_g_mu(0.0).unwrap();
        assert_eq!(zero.eval(0.0, -4.0, 7.0), 0.0);
        assert_eq!(make_g_mu(-0.1).unwrap_err(), Error::NegativeMu(-0.1));
    }

    #[test]
    fn black_scholes_driver() {
        let g = make_black_scholes_generator(BSMarketParams::new(0.05, 0.08, 0.2).unwrap()).unwrap();
        assert!((g.eval(0.0, 1.0, 0.0) + 0.05).abs() < 1e-15);
        assert!((g.mu() - 0.15).abs() < 1e-12);

        let flat = make_black_scholes_generator(BSMarketParams { r: 0.05, b: 0.05, sigma: 0.2 }).unwrap();
        assert!((flat.eval(0.0, 2.0, 9.0) + 0.1).abs() < 1e-15);

        let nil = make_black_scholes_generator(BSMarketParams { r: 0.0, b: 0.0, sigma: 1.0 }).unwrap();
        assert_eq!(nil.eval(0.5, 3.0, -2.0), 0.0);

        let bad = BSMarketParams { r: 0.05, b: 0.05, sigma: 0.0 };
        assert!(matches!(make_black_scholes_generator(bad), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn lipschitz_examples() {
        let g = make_g_mu(0.5).unwrap();
        let rep = verify_lipschitz(&g, 2000, SampleBox::default(), 1);
        assert!(rep.ok);
        assert!(rep.worst_ratio <= 0.5 * (1.0 + 1e-12));

        let quad = Generator::new("y2", 1.0, GeneratorFlags::default(), |_, y, _| y * y).unwrap();
        assert!(!verify_lipschitz(&quad, 500, SampleBox::default(), 2).ok);

        let rep = verify_lipschitz(&Generator::zero(), 100, SampleBox::default(), 3);
        assert!(rep.ok);
        assert_eq!(rep.worst_ratio, 0.0);
    }

    #[test]
    fn classify_g_mu() {
        let rep = classify_generator(&make_g_mu(0.7).unwrap(), 2000, SampleBox::default(), 11);
        assert!(rep.zero_at_zero.holds);
        assert!(rep.convex.holds);
        assert!(rep.subadditive.holds);
        assert!(rep.positively_homogeneous.holds);
        assert!(rep.sellers.holds);
        assert!(!rep.concave.holds);
        assert!(!rep.y_independent.holds);
        assert!(rep.y_independent.witness.is_some());
    }

    #[test]
    fn classify_black_scholes() {
        let g = make_black_scholes_generator(BSMarketParams::new(0.05, 0.08, 0.2).unwrap()).unwrap();
        let rep = classify_generator(&g, 500, SampleBox::default(), 5);
        assert!(!rep.y_independent.holds);
        assert!(rep.positively_homogeneous.holds);
        assert!(rep.convex.holds && rep.concave.holds);

        let g0 = make_black_scholes_generator(BSMarketParams::new(0.0, 0.08, 0.2).unwrap()).unwrap();
        assert!(classify_generator(&g0, 500, SampleBox::default(), 5).y_independent.holds);
    }

    #[test]
    fn classify_square() {
        let g = Generator::new("z2", 1.0, GeneratorFlags::default(), |_, _, z| z * z).unwrap();
        let rep = classify_generator(&g, 500, SampleBox::default(), 9);
        assert!(rep.convex.holds);
        assert!(!rep.positively_homogeneous.holds);
        let w = rep.positively_homogeneous.witness.unwrap();
        assert!((w.lhs - w.rhs).abs() > 1e-6);
        // g(2z) = 4 g(z) at z = 2.
        assert_eq!(g.eval(0.0, 0.0, 4.0), 4.0 * g.eval(0.0, 0.0, 2.0));
    }

    #[test]
    fn classify_is_deterministic() {
        let g = Generator::new("mix", 1.0, GeneratorFlags::default(), |t, y, z| (y * t).sin() + z.abs())
            .unwrap();
        let a = classify_generator(&g, 300, SampleBox::default(), 42);
        let b = classify_generator(&g, 300, SampleBox::default(), 42);
        assert_eq!(a, b);
    }

    #[test]
    fn dual_and_switch() {
        let g = make_g_mu(0.3).unwrap();
        let d = g.dual();
        assert!((d.eval(0.0, 1.0, -2.0) + 0.9).abs() < 1e-15);
        let s = Generator::zero().switched_at(0.5, &g);
        assert_eq!(s.eval(0.25, 1.0, 1.0), 0.0);
        assert!((s.eval(0.5, 1.0, 1.0) - 0.6).abs() < 1e-15);
        assert_eq!(s.mu(), 0.3);
    }
}
