//! Uniform time grid and the recombining binomial Brownian lattice.
//!
//! Step `i` of the lattice carries `i + 1` nodes. Node `j` at step `i` holds
//! the Brownian value `B(i, j) = (2j - i) * sqrt(dt)`; from node `(i, j)` the
//! walk moves to `(i + 1, j + 1)` (up, `+sqrt(dt)`) or `(i + 1, j)` (down,
//! `-sqrt(dt)`) with probability one half each.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > t0) || !t0.is_finite() || !horizon.is_finite() {
            return Err(Error::NonPositiveHorizon { t0, horizon });
        }
        if n_steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(TimeGrid {
            t0,
            horizon,
            n_steps,
            dt: (horizon - t0) / n_steps as f64,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Terminal time `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid time `t_i`. The last step returns the horizon exactly.
    pub fn time(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.horizon
        } else {
            self.t0 + i as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }
}

/// Shorthand for [`TimeGrid::new`].
pub fn build_grid(t0: f64, horizon: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(t0, horizon, n_steps)
}

/// One-dimensional recombining Brownian lattice over a [`TimeGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    grid: TimeGrid,
    sqrt_dt: f64,
}

impl Lattice {
    pub fn new(grid: TimeGrid) -> Self {
        Lattice {
            grid,
            sqrt_dt: grid.dt().sqrt(),
        }
    }

    /// Convenience constructor: grid plus lattice in one call.
    pub fn uniform(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        Ok(Self::new(TimeGrid::new(t0, horizon, n_steps)?))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(i)
    }

    /// Brownian value at node `(i, j)`.
    pub fn brownian(&self, i: usize, j: usize) -> f64 {
        (2.0 * j as f64 - i as f64) * self.sqrt_dt
    }

    pub fn brownian_at_step(&self, i: usize) -> Vec<f64> {
        (0..=i).map(|j| self.brownian(i, j)).collect()
    }

    pub fn nodes(&self, i: usize) -> usize {
        i + 1
    }

    pub(crate) fn check_step(&self, i: usize) -> Result<()> {
        if i > self.n_steps() {
            Err(Error::StepOutOfRange {
                step: i,
                last: self.n_steps(),
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_values(&self, i: usize, values: &[f64]) -> Result<()> {
        self.check_step(i)?;
        if values.len() != i + 1 {
            return Err(Error::ShapeMismatch {
                step: i,
                expected: i + 1,
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Binomial weights `C(i, j) / 2^i` of the nodes at step `i`.
    pub fn node_probabilities(&self, i: usize) -> Vec<f64> {
        let mut w = vec![1.0];
        for _ in 0..i {
            let mut next = vec![0.0; w.len() + 1];
            for (j, p) in w.iter().enumerate() {
                next[j] += 0.5 * p;
                next[j + 1] += 0.5 * p;
            }
            w = next;
        }
        w
    }
}

pub fn build_lattice(grid: TimeGrid) -> Lattice {
    Lattice::new(grid)
}

/// Node values of a process on a contiguous range of lattice steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedProcess {
    first_step: usize,
    rows: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    /// Builds a process on steps `first..=last` from per-step node rows.
    pub fn from_rows(first_step: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (k, row) in rows.iter().enumerate() {
            let step = first_step + k;
            if row.len() != step + 1 {
                return Err(Error::ShapeMismatch {
                    step,
                    expected: step + 1,
                    got: row.len(),
                });
            }
        }
        Ok(AdaptedProcess { first_step, rows })
    }

    pub fn from_fn(
        first_step: usize,
        last_step: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let rows = (first_step..=last_step)
            .map(|i| (0..=i).map(|j| f(i, j)).collect())
            .collect();
        AdaptedProcess { first_step, rows }
    }

    pub fn constant(first_step: usize, last_step: usize, c: f64) -> Self {
        Self::from_fn(first_step, last_step, |_, _| c)
    }

    /// The Brownian motion itself on steps `0..=last_step`.
    pub fn brownian(lattice: &Lattice, last_step: usize) -> Self {
        Self::from_fn(0, last_step, |i, j| lattice.brownian(i, j))
    }

    pub fn first_step(&self) -> usize {
        self.first_step
    }

    pub fn last_step(&self) -> usize {
        self.first_step + self.rows.len() - 1
    }

    pub fn contains_step(&self, i: usize) -> bool {
        i >= self.first_step && i <= self.last_step()
    }

    pub fn step(&self, i: usize) -> Result<&[f64]> {
        if !self.contains_step(i) {
            return Err(Error::StepOutOfRange {
                step: i,
                last: self.last_step(),
            });
        }
        Ok(&self.rows[i - self.first_step])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i - self.first_step][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        AdaptedProcess {
            first_step: self.first_step,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    /// Largest absolute node-wise difference over the shared steps.
    pub fn max_abs_diff(&self, other: &AdaptedProcess) -> f64 {
        let lo = self.first_step.max(other.first_step);
        let hi = self.last_step().min(other.last_step());
        let mut worst = 0.0_f64;
        for i in lo..=hi {
            for (a, b) in self.rows[i - self.first_step]
                .iter()
                .zip(&other.rows[i - other.first_step])
            {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// `E[next | node]`: average of the two children of every node one step back.
pub fn expectation_of(next: &[f64]) -> Vec<f64> {
    next.windows(2).map(|w| 0.5 * (w[1] + w[0])).collect()
}

/// `E[next * dB | node] / dt`: the martingale-increment integrand.
pub fn z_of(next: &[f64], sqrt_dt: f64) -> Vec<f64> {
    let scale = 0.5 / sqrt_dt;
    next.windows(2).map(|w| (w[1] - w[0]) * scale).collect()
}

/// One-step conditional expectation of `p` from step `i + 1` back to step `i`.
pub fn one_step_expectation(p: &AdaptedProcess, i: usize) -> Result<Vec<f64>> {
    Ok(expectation_of(p.step(i + 1)?))
}

/// One-step integrand `(p(i+1, j+1) - p(i+1, j)) / (2 sqrt(dt))`.
pub fn one_step_z(lattice: &Lattice, p: &AdaptedProcess, i: usize) -> Result<Vec<f64>> {
    Ok(z_of(p.step(i + 1)?, lattice.sqrt_dt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.time(2), 0.5);
        assert_eq!(g.time(4), 1.0);
        let t = g.times();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_errors() {
        assert_eq!(build_grid(0.0, 1.0, 0), Err(Error::ZeroSteps));
        assert!(matches!(
            build_grid(0.5, 0.5, 10),
            Err(Error::NonPositiveHorizon { .. })
        ));
        assert!(matches!(
            build_grid(1.0, 0.5, 10),
            Err(Error::NonPositiveHorizon { .. })
        ));
    }

    #[test]
    fn terminal_time_is_exact() {
        let g = build_grid(0.1, 0.7, 3).unwrap();
        assert_eq!(g.time(3), 0.7);
    }

    #[test]
    fn brownian_nodes() {
        let l = build_lattice(build_grid(0.0, 1.0, 4).unwrap());
        assert_eq!(l.brownian(2, 0), -1.0);
        assert_eq!(l.brownian(2, 1), 0.0);
        assert_eq!(l.brownian(4, 4), 2.0);
        assert_eq!(l.brownian(0, 0), 0.0);
        assert_eq!(l.brownian_at_step(3).len(), 4);
    }

    #[test]
    fn increments_have_exact_moments() {
        let l = Lattice::uniform(0.0, 1.0, 8).unwrap();
        for i in 0..8 {
            for j in 0..=i {
                let up = l.brownian(i + 1, j + 1) - l.brownian(i, j);
                let down = l.brownian(i + 1, j) - l.brownian(i, j);
                assert!((0.5 * (up + down)).abs() < 1e-15);
                assert!((0.5 * (up * up + down * down) - l.dt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn expectation_examples() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let c = AdaptedProcess::constant(0, 4, 3.5);
        assert_eq!(one_step_expectation(&c, 2).unwrap(), vec![3.5; 3]);

        let b = AdaptedProcess::brownian(&l, 4);
        for i in 0..4 {
            let e = one_step_expectation(&b, i).unwrap();
            assert_eq!(e, b.step(i).unwrap());
        }

        let p = AdaptedProcess::from_rows(0, vec![vec![0.0], vec![-0.5, 0.5]]).unwrap();
        assert_eq!(one_step_expectation(&p, 0).unwrap(), vec![0.0]);
        assert!(matches!(
            one_step_expectation(&p, 1),
            Err(Error::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn z_examples() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let zbar = 1.7;
        let p = AdaptedProcess::brownian(&l, 4).map(|b| zbar * b);
        for i in 0..4 {
            for z in one_step_z(&l, &p, i).unwrap() {
                assert!((z - zbar).abs() < 1e-14);
            }
        }
        let c = AdaptedProcess::constant(0, 4, -2.0);
        assert!(one_step_z(&l, &c, 1).unwrap().iter().all(|&z| z == 0.0));

        let q = AdaptedProcess::from_rows(0, vec![vec![0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(one_step_z(&l, &q, 0).unwrap(), vec![1.0]);
        assert!(one_step_z(&l, &q, 4).is_err());
    }

    #[test]
    fn tower_matches_binomial_expectation() {
        let n = 30;
        let l = Lattice::uniform(0.0, 1.0, n).unwrap();
        let payoff: Vec<f64> = l
            .brownian_at_step(n)
            .iter()
            .map(|b| (b - 0.3).max(0.0) + b.sin())
            .collect();
        let mut v = payoff.clone();
        for _ in 0..n {
            v = expectation_of(&v);
        }
        let direct: f64 = l
            .node_probabilities(n)
            .iter()
            .zip(&payoff)
            .map(|(w, x)| w * x)
            .sum();
        assert!((v[0] - direct).abs() <= 1e-12);
    }

    #[test]
    fn node_probabilities_sum_to_one() {
        let l = Lattice::uniform(0.0, 1.0, 10).unwrap();
        let p = l.node_probabilities(10);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[0], 1.0 / 1024.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn one_step_operators_are_linear(
                a in proptest::collection::vec(-10.0f64..10.0, 6),
                b in proptest::collection::vec(-10.0f64..10.0, 6),
                lambda in -5.0f64..5.0,
            ) {
                let sq = 0.3;
                let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + lambda * y).collect();
                let (ea, eb, es) = (expectation_of(&a), expectation_of(&b), expectation_of(&sum));
                let (za, zb, zs) = (z_of(&a, sq), z_of(&b, sq), z_of(&sum, sq));
                for k in 0..5 {
                    prop_assert!((es[k] - ea[k] - lambda * eb[k]).abs() < 1e-12);
                    prop_assert!((zs[k] - za[k] - lambda * zb[k]).abs() < 1e-11);
                }
            }
        }
    }
}
