//! Deliberately broken wrappers around a mechanism, used to exercise the
//! axiom suite.

use crate::bsde::{DividendStream, MechanismHandle, PricingMechanism};
use crate::error::Result;
use crate::lattice::Lattice;

/// Adds a constant to every price, including `E_{t,t}`.
pub struct Shifted {
    pub inner: MechanismHandle,
    pub shift: f64,
}

impl PricingMechanism for Shifted {
    fn lattice(&self) -> &Lattice {
        self.inner.lattice()
    }

    fn declared_mu(&self) -> Option<f64> {
        self.inner.declared_mu()
    }

    fn describe(&self) -> String {
        format!("{} + {}", self.inner.describe(), self.shift)
    }

    fn price(&self, s: usize, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<Vec<f64>> {
        let mut v = self.inner.price(s, t, claim, dividends)?;
        v.iter_mut().for_each(|x| *x += self.shift);
        Ok(v)
    }
}

/// Negates every price over a non-trivial horizon.
pub struct Negated {
    pub inner: MechanismHandle,
}

impl PricingMechanism for Negated {
    fn lattice(&self) -> &Lattice {
        self.inner.lattice()
    }

    fn declared_mu(&self) -> Option<f64> {
        self.inner.declared_mu()
    }

    fn describe(&self) -> String {
        format!("-{}", self.inner.describe())
    }

    fn price(&self, s: usize, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<Vec<f64>> {
        let v = self.inner.price(s, t, claim, dividends)?;
        Ok(if s < t { v.into_iter().map(|x| -x).collect() } else { v })
    }
}

/// Composes one-step prices of `inner`, each shifted by `weight dt` times
/// the average of the whole next row, so prices see nodes outside the
/// reachable cone while staying time consistent.
pub struct Nonlocal {
    pub inner: MechanismHandle,
    pub weight: f64,
}

impl PricingMechanism for Nonlocal {
    fn lattice(&self) -> &Lattice {
        self.inner.lattice()
    }

    fn declared_mu(&self) -> Option<f64> {
        self.inner.declared_mu()
    }

    fn describe(&self) -> String {
        format!("nonlocal({})", self.inner.describe())
    }

    fn price(&self, s: usize, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<Vec<f64>> {
        let mut current = self.inner.price(t, t, claim, dividends)?;
        let dt = self.lattice().dt();
        for i in (s..t).rev() {
            let mean = current.iter().sum::<f64>() / current.len() as f64;
            current = self.inner.price(i, i + 1, &current, dividends)?;
            current.iter_mut().for_each(|x| *x += self.weight * dt * mean);
        }
        Ok(current)
    }
}
