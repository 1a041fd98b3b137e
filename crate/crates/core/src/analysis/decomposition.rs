use serde::{Deserialize, Serialize};

use crate::bsde::{implicit_step, monotone_condition, solve_range, DividendStream, PricingMechanism};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::lattice::{expectation_of, z_of, AdaptedProcess, Lattice};

/// Slack allowed below the one-step price before a process stops counting
/// as a supermartingale.
pub const SUPERMARTINGALE_TOL: f64 = 1e-9;

/// Slack of the driver bound before `represent` reports a violation.
pub const BOUND_TOL: f64 = 1e-6;

/// The increasing part of an `E^g[.; K]`-supermartingale.
///
/// `increments(i, j)` is the amount `dA` paid at node `(i, j)` over
/// `[t_i, t_{i+1})`, so `A` itself is the running sum along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub increments: AdaptedProcess,
    /// Max node-wise gap between `Y` and the price of `Y_T` with dividends `K + A`.
    pub reconstruction_error: f64,
}

impl DecompositionResult {
    pub fn as_dividends(&self, lattice: &Lattice) -> Result<DividendStream> {
        DividendStream::from_increments(lattice, self.increments.clone())
    }

    /// `A` along the path with moves `path` (`true` = up), starting at 0.
    pub fn cumulative_along(&self, path: &[bool]) -> Vec<f64> {
        let mut out = Vec::with_capacity(path.len() + 1);
        let (mut node, mut acc) = (0, 0.0);
        out.push(0.0);
        for (i, &up) in path.iter().enumerate() {
            acc += self.increments.get(i, node);
            out.push(acc);
            node += up as usize;
        }
        out
    }

    pub fn min_increment(&self) -> f64 {
        self.increments
            .rows()
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Splits `Y` (steps `0..=n`) into an `E^g[.; K + A]`-martingale and the
/// increasing `A`.
///
/// The increment at `(i, j)` is the one-step residual
/// `Y - E_step[Y] - g(t_i, Y, z) dt - dK`, which makes the reconstruction
/// exact up to Picard tolerance.
pub fn doob_meyer(g: &Generator, y: &AdaptedProcess, k: &DividendStream, lattice: &Lattice) -> Result<DecompositionResult> {
    monotone_condition(g.mu(), lattice)?;
    let n = lattice.n_steps();
    if y.first_step() != 0 || y.last_step() != n {
        return Err(Error::InvalidParams(format!("process must span steps 0..={n}")));
    }
    let (dt, sqrt_dt) = (lattice.dt(), lattice.sqrt_dt());
    let mut rows = Vec::with_capacity(n);
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        let next = y.step(i + 1)?;
        let (m, z) = (expectation_of(next), z_of(next, sqrt_dt));
        let t = lattice.time(i);
        let mut row = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let yij = y.get(i, j);
            let dk = k.increment(i, j);
            let one_step = implicit_step(g, t, dt, m[j], z[j], dk);
            let gap = yij - one_step.y;
            if gap < -SUPERMARTINGALE_TOL && worst.map_or(true, |w| gap < w.2) {
                worst = Some((i, j, gap));
            }
            row.push(yij - m[j] - g.eval(t, yij, z[j]) * dt - dk);
        }
        rows.push(row);
    }
    if let Some((step, node, increment)) = worst {
        return Err(Error::NotSupermartingale { step, node, increment });
    }
    let increments = AdaptedProcess::from_rows(0, rows)?;
    let total = k.plus(&DividendStream::from_increments(lattice, increments.clone())?, lattice);
    let rebuilt = solve_range(g, lattice, 0, n, y.step(n)?, &total)?.y;
    Ok(DecompositionResult {
        reconstruction_error: rebuilt.max_abs_diff(y),
        increments,
    })
}

/// The realized driver and integrand of a mechanism's price process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationResult {
    /// Price process on steps `0..=n`.
    pub y: AdaptedProcess,
    /// `(Y - E_step[Y] - dK) / dt` on steps `0..n`.
    pub driver: AdaptedProcess,
    /// One-step `z` on steps `0..n`.
    pub integrand: AdaptedProcess,
    /// Largest `|driver| - mu (|Y| + |z|)` observed.
    pub bound_margin: f64,
}

/// Reads the driver off the mechanism's price surface for `(X, K)` and
/// checks `|driver| <= mu (|Y| + |z|)`.
pub fn represent(m: &dyn PricingMechanism, x: &[f64], k: &DividendStream) -> Result<RepresentationResult> {
    let mu = m
        .declared_mu()
        .ok_or_else(|| Error::InvalidParams("mechanism declares no domination constant".into()))?;
    let lattice = *m.lattice();
    let n = lattice.n_steps();
    let y = m.price_surface(n, x, k)?;
    let (dt, sqrt_dt) = (lattice.dt(), lattice.sqrt_dt());
    let mut drivers = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    let mut bound_margin = f64::NEG_INFINITY;
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        let next = y.step(i + 1)?;
        let (e, z) = (expectation_of(next), z_of(next, sqrt_dt));
        let row: Vec<f64> = (0..=i).map(|j| (y.get(i, j) - e[j] - k.increment(i, j)) / dt).collect();
        for j in 0..=i {
            let excess = row[j].abs() - mu * (y.get(i, j).abs() + z[j].abs());
            bound_margin = bound_margin.max(excess);
            if excess > BOUND_TOL && worst.map_or(true, |w| excess > w.2) {
                worst = Some((i, j, excess));
            }
        }
        drivers.push(row);
        zs.push(z);
    }
    if let Some((step, node, excess)) = worst {
        return Err(Error::BoundViolated { step, node, excess });
    }
    Ok(RepresentationResult {
        y,
        driver: AdaptedProcess::from_rows(0, drivers)?,
        integrand: AdaptedProcess::from_rows(0, zs)?,
        bound_margin,
    })
}

/// Largest `|g - g'| - mu (|Y - Y'| + |z - z'|)` over all nodes.
pub fn pairwise_bound_margin(a: &RepresentationResult, b: &RepresentationResult, mu: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in a.driver.first_step()..=a.driver.last_step() {
        for j in 0..=i {
            let lhs = (a.driver.get(i, j) - b.driver.get(i, j)).abs();
            let rhs = mu * ((a.y.get(i, j) - b.y.get(i, j)).abs() + (a.integrand.get(i, j) - b.integrand.get(i, j)).abs());
            worst = worst.max(lhs - rhs);
        }
    }
    worst
}
