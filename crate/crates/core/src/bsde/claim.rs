use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{AdaptedProcess, Lattice};

/// Per-step dividend increments `dK(i, j)`, paid at node `(i, j)` for the
/// interval `[t_i, t_{i+1})`. `K` at the first grid time is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividendStream {
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Kind {
    Zero,
    /// Same increment at every node of a step.
    PerStep(Vec<f64>),
    /// One nonzero increment at a single node.
    Point { step: usize, node: usize, value: f64 },
    /// Node-wise increments on steps `0..n-1`.
    Dense(AdaptedProcess),
}

impl Default for DividendStream {
    fn default() -> Self {
        Self::zero()
    }
}

impl DividendStream {
    pub fn zero() -> Self {
        DividendStream { kind: Kind::Zero }
    }

    /// Deterministic increments, one per step.
    pub fn per_step(increments: Vec<f64>) -> Self {
        DividendStream {
            kind: Kind::PerStep(increments),
        }
    }

    /// Constant rate `c`: increment `c * dt` at every step.
    pub fn constant_rate(lattice: &Lattice, c: f64) -> Self {
        Self::per_step(vec![c * lattice.dt(); lattice.n_steps()])
    }

    pub fn point(step: usize, node: usize, value: f64) -> Self {
        DividendStream {
            kind: Kind::Point { step, node, value },
        }
    }

    /// Node-wise increments; `increments` must cover steps `0..n-1`.
    pub fn from_increments(lattice: &Lattice, increments: AdaptedProcess) -> Result<Self> {
        let n = lattice.n_steps();
        if increments.first_step() != 0 || increments.last_step() + 1 < n {
            return Err(Error::InvalidParams(format!(
                "dividend increments must cover steps 0..{}",
                n - 1
            )));
        }
        Ok(DividendStream {
            kind: Kind::Dense(increments),
        })
    }

    #[inline]
    pub fn increment(&self, i: usize, j: usize) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::PerStep(v) => v.get(i).copied().unwrap_or(0.0),
            Kind::Point { step, node, value } => {
                if *step == i && *node == j {
                    *value
                } else {
                    0.0
                }
            }
            Kind::Dense(p) => {
                if p.contains_step(i) {
                    p.get(i, j)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Dense node-wise increments on steps `0..n-1` of `lattice`.
    pub fn to_process(&self, lattice: &Lattice) -> AdaptedProcess {
        let last = lattice.n_steps().saturating_sub(1);
        AdaptedProcess::from_fn(0, last, |i, j| self.increment(i, j))
    }

    fn combine(&self, other: &DividendStream, lattice: &Lattice, f: impl Fn(f64, f64) -> f64) -> Self {
        if self.is_zero() && other.is_zero() {
            return Self::zero();
        }
        let last = lattice.n_steps().saturating_sub(1);
        DividendStream {
            kind: Kind::Dense(AdaptedProcess::from_fn(0, last, |i, j| {
                f(self.increment(i, j), other.increment(i, j))
            })),
        }
    }

    pub fn plus(&self, other: &DividendStream, lattice: &Lattice) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        self.combine(other, lattice, |a, b| a + b)
    }

    pub fn minus(&self, other: &DividendStream, lattice: &Lattice) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        self.combine(other, lattice, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64, lattice: &Lattice) -> Self {
        match &self.kind {
            Kind::Zero => Self::zero(),
            Kind::PerStep(v) => Self::per_step(v.iter().map(|x| c * x).collect()),
            Kind::Point { step, node, value } => Self::point(*step, *node, c * value),
            Kind::Dense(_) => self.combine(&Self::zero(), lattice, |a, _| c * a),
        }
    }

    /// True when every increment on steps `0..n-1` is non-negative.
    pub fn is_increasing(&self, lattice: &Lattice) -> bool {
        self.min_increment(lattice) >= 0.0
    }

    pub fn min_increment(&self, lattice: &Lattice) -> f64 {
        let mut lo = f64::INFINITY;
        for i in 0..lattice.n_steps() {
            for j in 0..=i {
                lo = lo.min(self.increment(i, j));
            }
        }
        lo
    }
}

/// Driftless-or-drifted lognormal underlying `S = s0 exp(sigma B + (drift - sigma^2/2) tau)`,
/// `tau` the time elapsed since the lattice start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalMap {
    pub s0: f64,
    pub sigma: f64,
    pub drift: f64,
}

impl LognormalMap {
    pub fn at(&self, b: f64, tau: f64) -> f64 {
        self.s0 * (self.sigma * b + (self.drift - 0.5 * self.sigma * self.sigma) * tau).exp()
    }
}

/// A claim paid at the end of the lattice, a function of the terminal
/// Brownian value.
#[derive(Clone)]
pub struct TerminalClaim {
    name: String,
    payoff: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for TerminalClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalClaim").field("name", &self.name).finish()
    }
}

impl TerminalClaim {
    pub fn new(name: impl Into<String>, payoff: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TerminalClaim {
            name: name.into(),
            payoff: Arc::new(payoff),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `X = B_T`.
    pub fn brownian() -> Self {
        Self::new("bm", |b| b)
    }

    /// `X = zbar * B_T`.
    pub fn linear_bm(zbar: f64) -> Self {
        Self::new(format!("linbm:{zbar}"), move |b| zbar * b)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const:{c}"), move |_| c)
    }

    /// European call on `S_T` with `S_T` given by `map` after `tau` years.
    pub fn call(map: LognormalMap, tau: f64, strike: f64) -> Self {
        Self::new(format!("call:{strike}"), move |b| (map.at(b, tau) - strike).max(0.0))
    }

    pub fn put(map: LognormalMap, tau: f64, strike: f64) -> Self {
        Self::new(format!("put:{strike}"), move |b| (strike - map.at(b, tau)).max(0.0))
    }

    /// The underlying itself (a forward-style claim).
    pub fn underlying(map: LognormalMap, tau: f64) -> Self {
        Self::new("underlying", move |b| map.at(b, tau))
    }

    #[inline]
    pub fn payoff(&self, b: f64) -> f64 {
        (self.payoff)(b)
    }

    /// Payoff at every node of `step`.
    pub fn values(&self, lattice: &Lattice, step: usize) -> Vec<f64> {
        (0..=step).map(|j| self.payoff(lattice.brownian(step, j))).collect()
    }

    /// Payoff at the lattice's terminal step.
    pub fn terminal_values(&self, lattice: &Lattice) -> Vec<f64> {
        self.values(lattice, lattice.n_steps())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_arithmetic() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let k = DividendStream::constant_rate(&l, 2.0);
        assert_eq!(k.increment(3, 1), 0.5);
        assert_eq!(k.increment(4, 0), 0.0);
        assert!(k.is_increasing(&l));
        let p = DividendStream::point(2, 1, -1.0);
        assert_eq!(p.increment(2, 1), -1.0);
        assert_eq!(p.increment(2, 0), 0.0);
        let d = k.minus(&p, &l);
        assert_eq!(d.increment(2, 1), 1.5);
        assert_eq!(d.increment(2, 2), 0.5);
        assert!(!p.is_increasing(&l));
        assert_eq!(k.scaled(-1.0, &l).increment(0, 0), -0.5);
        assert!(DividendStream::zero().plus(&DividendStream::zero(), &l).is_zero());
    }

    #[test]
    fn dense_stream_must_cover_lattice() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let short = AdaptedProcess::constant(0, 1, 1.0);
        assert!(DividendStream::from_increments(&l, short).is_err());
        let full = AdaptedProcess::constant(0, 3, 1.0);
        assert!(DividendStream::from_increments(&l, full).is_ok());
    }

    #[test]
    fn claims_on_nodes() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(TerminalClaim::brownian().terminal_values(&l), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(TerminalClaim::linear_bm(2.0).values(&l, 2), vec![-2.0, 0.0, 2.0]);
        let map = LognormalMap { s0: 100.0, sigma: 0.2, drift: 0.0 };
        let c = TerminalClaim::call(map, 1.0, 100.0);
        let p = TerminalClaim::put(map, 1.0, 100.0);
        let u = TerminalClaim::underlying(map, 1.0);
        for b in [-1.0, 0.0, 0.3, 2.0] {
            assert!((c.payoff(b) - p.payoff(b) - (u.payoff(b) - 100.0)).abs() < 1e-12);
        }
    }
}
