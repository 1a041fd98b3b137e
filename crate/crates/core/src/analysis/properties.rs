use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bsde::{price_per_origin, DividendStream, PricingMechanism};
use crate::error::Result;
use crate::sampling::random_claim;

pub const PROPERTY_TOL: f64 = 1e-9;

/// Price-level counterparts of structural properties of `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriceProperty {
    /// `E[a X + (1 - a) X'] <= a E[X] + (1 - a) E[X']`.
    Convexity,
    /// `E[X + X'] <= E[X] + E[X']`.
    Subadditivity,
    /// `E[l X] = l E[X]` for `l >= 0`.
    PositiveHomogeneity,
    /// `E_{s,t}[X + eta] = E_{s,t}[X] + eta` for `eta` known at `s`.
    CashInvariance,
    /// `E_{s,t}[0] = 0`.
    SelfFinancing,
    /// `E_{s,t}[eta] = eta` for `eta` known at `s`.
    ZeroRate,
    /// `E_{s,t}[X + zbar (B_t - B_s)] = E_{s,t}[X]`.
    ZIndependence,
}

impl PriceProperty {
    pub const ALL: [PriceProperty; 7] = [
        PriceProperty::Convexity,
        PriceProperty::Subadditivity,
        PriceProperty::PositiveHomogeneity,
        PriceProperty::CashInvariance,
        PriceProperty::SelfFinancing,
        PriceProperty::ZeroRate,
        PriceProperty::ZIndependence,
    ];
}

impl fmt::Display for PriceProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: PriceProperty,
    pub tested: usize,
    pub violations: usize,
    pub worst_excess: f64,
    /// `(s, t, node)` of the worst violation.
    pub witness: Option<(usize, usize, usize)>,
}

impl PropertyCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

fn tol(v: f64) -> f64 {
    PROPERTY_TOL * v.abs().max(1.0)
}

/// Checks `property` on `samples` random claims with zero dividends.
pub fn check_price_property(m: &dyn PricingMechanism, property: PriceProperty, samples: usize, seed: u64) -> Result<PropertyCheck> {
    let l = *m.lattice();
    let n = l.n_steps();
    let zero = DividendStream::zero();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = PropertyCheck {
        property,
        tested: 0,
        violations: 0,
        worst_excess: 0.0,
        witness: None,
    };
    for _ in 0..samples {
        let t = rng.gen_range(1..=n);
        let s = rng.gen_range(0..t);
        let x = random_claim(&mut rng, t + 1, 2.0);
        let x2 = random_claim(&mut rng, t + 1, 2.0);
        let price = |c: &[f64]| m.price(s, t, c, &zero);
        // (lhs, rhs, one_sided): violation when lhs > rhs (+ tol), or |lhs - rhs| > tol.
        let (lhs, rhs, one_sided): (Vec<f64>, Vec<f64>, bool) = match property {
            PriceProperty::Convexity => {
                let a: f64 = rng.gen_range(0.0..1.0);
                let mix: Vec<f64> = x.iter().zip(&x2).map(|(u, v)| a * u + (1.0 - a) * v).collect();
                let (p, q) = (price(&x)?, price(&x2)?);
                (price(&mix)?, p.iter().zip(&q).map(|(u, v)| a * u + (1.0 - a) * v).collect(), true)
            }
            PriceProperty::Subadditivity => {
                let sum: Vec<f64> = x.iter().zip(&x2).map(|(u, v)| u + v).collect();
                let (p, q) = (price(&x)?, price(&x2)?);
                (price(&sum)?, p.iter().zip(&q).map(|(u, v)| u + v).collect(), true)
            }
            PriceProperty::PositiveHomogeneity => {
                let lam: f64 = rng.gen_range(0.0..4.0);
                let scaled: Vec<f64> = x.iter().map(|u| lam * u).collect();
                (price(&scaled)?, price(&x)?.iter().map(|u| lam * u).collect(), false)
            }
            PriceProperty::CashInvariance => {
                let eta = random_claim(&mut rng, s + 1, 2.0);
                let shifted = price_per_origin(m, s, t, |j| x.iter().map(|u| u + eta[j]).collect(), &zero)?;
                (shifted, price(&x)?.iter().zip(&eta).map(|(u, e)| u + e).collect(), false)
            }
            PriceProperty::SelfFinancing => (price(&vec![0.0; t + 1])?, vec![0.0; s + 1], false),
            PriceProperty::ZeroRate => {
                let eta = random_claim(&mut rng, s + 1, 2.0);
                (price_per_origin(m, s, t, |j| vec![eta[j]; t + 1], &zero)?, eta, false)
            }
            PriceProperty::ZIndependence => {
                let zbar: f64 = rng.gen_range(-3.0..3.0);
                let with = price_per_origin(
                    m,
                    s,
                    t,
                    |j| {
                        x.iter()
                            .enumerate()
                            .map(|(k, u)| u + zbar * (l.brownian(t, k) - l.brownian(s, j)))
                            .collect()
                    },
                    &zero,
                )?;
                (with, price(&x)?, false)
            }
        };
        check.tested += 1;
        let mut failed = false;
        for (j, (a, b)) in lhs.iter().zip(&rhs).enumerate() {
            let gap = if one_sided { a - b } else { (a - b).abs() };
            let excess = gap - tol(*b);
            if excess > 0.0 {
                failed = true;
                if excess > check.worst_excess {
                    check.worst_excess = excess;
                    check.witness = Some((s, t, j));
                }
            }
        }
        check.violations += failed as usize;
    }
    Ok(check)
}
