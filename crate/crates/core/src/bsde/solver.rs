use serde::{Deserialize, Serialize};

use super::{DividendStream, TerminalClaim, PICARD_FAIL_RESIDUAL, PICARD_MAX_ITERS, PICARD_TOL};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::lattice::{AdaptedProcess, Lattice};

/// Solution of the lattice BSDE on steps `first..=last`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    /// Price process on steps `first..=last`.
    pub y: AdaptedProcess,
    /// Integrand on steps `first..last`; `None` when the range is a single step index.
    pub z: Option<AdaptedProcess>,
    /// Largest Picard iteration count over all nodes.
    pub picard_iters: usize,
    /// Largest one-step residual `|y - m - g dt - dK|` over all nodes.
    pub residual: f64,
}

impl PricingResult {
    pub fn value_at_origin(&self) -> f64 {
        self.y.rows()[0][0]
    }
}

/// Result of one implicit step at a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSolution {
    pub y: f64,
    pub iters: usize,
    pub residual: f64,
    /// False when the iteration cap was hit with a residual above the failure threshold.
    pub converged: bool,
}

/// Solves `y = m + g(t, y, z) dt + dk` by Picard iteration from `y = m`.
pub fn implicit_step(g: &Generator, t: f64, dt: f64, m: f64, z: f64, dk: f64) -> StepSolution {
    let base = m + dk;
    if let Some(y) = g.exact_step(dt, base, z) {
        let residual = (y - base - g.eval(t, y, z) * dt).abs();
        return StepSolution {
            y,
            iters: 1,
            residual,
            converged: residual <= PICARD_FAIL_RESIDUAL * y.abs().max(1.0),
        };
    }
    let mut y = m;
    let mut iters = 0;
    loop {
        iters += 1;
        let next = base + g.eval(t, y, z) * dt;
        let diff = (next - y).abs();
        y = next;
        if diff <= PICARD_TOL || diff <= 4.0 * f64::EPSILON * y.abs() {
            break;
        }
        if iters >= PICARD_MAX_ITERS {
            break;
        }
    }
    let residual = (y - base - g.eval(t, y, z) * dt).abs();
    StepSolution {
        y,
        iters,
        residual,
        converged: iters < PICARD_MAX_ITERS || residual <= PICARD_FAIL_RESIDUAL,
    }
}

fn check_contraction(g: &Generator, lattice: &Lattice) -> Result<()> {
    let c = g.mu() * lattice.dt();
    if c >= 1.0 {
        return Err(Error::ContractionViolation(c));
    }
    Ok(())
}

/// Backward induction from `terminal` at step `t` down to step `s`.
pub fn solve_range(
    g: &Generator,
    lattice: &Lattice,
    s: usize,
    t: usize,
    terminal: &[f64],
    dividends: &DividendStream,
) -> Result<PricingResult> {
    if s > t {
        return Err(Error::BadStepOrder { s, t });
    }
    lattice.check_values(t, terminal)?;
    check_contraction(g, lattice)?;
    let dt = lattice.dt();
    let sqrt_dt = lattice.sqrt_dt();

    let mut y_rows: Vec<Vec<f64>> = Vec::with_capacity(t - s + 1);
    let mut z_rows: Vec<Vec<f64>> = Vec::with_capacity(t - s);
    y_rows.push(terminal.to_vec());
    let mut picard_iters = 0;
    let mut residual = 0.0_f64;

    for i in (s..t).rev() {
        let next = y_rows.last().expect("terminal row present");
        let ti = lattice.time(i);
        let mut y_row = Vec::with_capacity(i + 1);
        let mut z_row = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let (down, up) = (next[j], next[j + 1]);
            let m = 0.5 * (up + down);
            let z = (up - down) * (0.5 / sqrt_dt);
            let dk = dividends.increment(i, j);
            let sol = implicit_step(g, ti, dt, m, z, dk);
            if !sol.converged {
                return Err(Error::PicardDivergence {
                    step: i,
                    node: j,
                    residual: sol.residual,
                });
            }
            picard_iters = picard_iters.max(sol.iters);
            residual = residual.max(sol.residual);
            y_row.push(sol.y);
            z_row.push(z);
        }
        y_rows.push(y_row);
        z_rows.push(z_row);
    }
    y_rows.reverse();
    z_rows.reverse();
    let z = if z_rows.is_empty() {
        None
    } else {
        Some(AdaptedProcess::from_rows(s, z_rows)?)
    };
    Ok(PricingResult {
        y: AdaptedProcess::from_rows(s, y_rows)?,
        z,
        picard_iters,
        residual,
    })
}

/// Solves the BSDE with terminal claim `claim` and dividends `K` over the whole lattice.
pub fn solve_bsde(
    g: &Generator,
    claim: &TerminalClaim,
    dividends: &DividendStream,
    lattice: &Lattice,
) -> Result<PricingResult> {
    let n = lattice.n_steps();
    solve_range(g, lattice, 0, n, &claim.terminal_values(lattice), dividends)
}

/// `E^g_{s,t}[X; K]`: node values at step `s` of the price of the claim
/// `X` (node values at step `t`) with dividends paid on `[s, t)`.
pub fn price(
    g: &Generator,
    s: usize,
    t: usize,
    claim: &[f64],
    dividends: &DividendStream,
    lattice: &Lattice,
) -> Result<Vec<f64>> {
    if s > t {
        return Err(Error::BadStepOrder { s, t });
    }
    lattice.check_values(t, claim)?;
    if s == t {
        return Ok(claim.to_vec());
    }
    let res = solve_range(g, lattice, s, t, claim, dividends)?;
    Ok(res.y.into_rows().swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{make_g_mu, Generator};
    use crate::lattice::expectation_of;

    #[test]
    fn closed_form_step_matches_picard() {
        let g = make_g_mu(0.7).unwrap();
        let plain = Generator::new("plain", 0.7, Default::default(), |_, y, z| 0.7 * (y.abs() + z.abs())).unwrap();
        for &(m, z, dk) in &[(1.0, 0.3, 0.0), (-2.0, -0.1, 0.05), (0.0, 0.0, 0.0), (-0.001, 2.0, 0.0), (-5.0, 0.0, -1.0)] {
            let a = implicit_step(&g, 0.0, 0.1, m, z, dk);
            let b = implicit_step(&plain, 0.0, 0.1, m, z, dk);
            assert_eq!(a.iters, 1);
            assert!((a.y - b.y).abs() <= 1e-12, "{m} {z} {dk}");
        }
    }

    #[test]
    fn zero_driver_martingale() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let res = solve_bsde(&Generator::zero(), &TerminalClaim::brownian(), &DividendStream::zero(), &l).unwrap();
        assert_eq!(res.value_at_origin(), 0.0);
        assert_eq!(res.y.step(4).unwrap(), TerminalClaim::brownian().terminal_values(&l).as_slice());
    }

    #[test]
    fn z_only_linear_claim_is_exact() {
        let l = Lattice::uniform(0.0, 1.0, 16).unwrap();
        let g = Generator::abs_z(0.1).unwrap();
        let res = solve_bsde(&g, &TerminalClaim::linear_bm(2.0), &DividendStream::zero(), &l).unwrap();
        assert!((res.value_at_origin() - 0.2).abs() < 1e-14);
        for row in res.z.as_ref().unwrap().rows() {
            assert!(row.iter().all(|z| (z - 2.0).abs() < 1e-12));
        }
        for i in 0..=16 {
            for j in 0..=i {
                let exact = 2.0 * l.brownian(i, j) + 0.2 * (1.0 - l.time(i));
                assert!((res.y.get(i, j) - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn annuity() {
        let l = Lattice::uniform(0.0, 2.0, 10).unwrap();
        let k = DividendStream::constant_rate(&l, 0.7);
        let v = price(&Generator::zero(), 0, 10, &vec![0.0; 11], &k, &l).unwrap();
        assert!((v[0] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn identity_at_equal_steps() {
        let l = Lattice::uniform(0.0, 1.0, 5).unwrap();
        let x = vec![1.0, -2.0, 3.0, 0.5];
        let v = price(&make_g_mu(0.5).unwrap(), 3, 3, &x, &DividendStream::zero(), &l).unwrap();
        assert_eq!(v, x);
    }

    #[test]
    fn errors() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let g = make_g_mu(5.0).unwrap();
        assert!(matches!(
            price(&g, 0, 4, &[0.0; 5], &DividendStream::zero(), &l),
            Err(Error::ContractionViolation(_))
        ));
        assert!(matches!(
            price(&Generator::zero(), 3, 2, &[0.0; 3], &DividendStream::zero(), &l),
            Err(Error::BadStepOrder { .. })
        ));
        assert!(matches!(
            price(&Generator::zero(), 0, 2, &[0.0; 4], &DividendStream::zero(), &l),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn residuals_stay_below_tolerance() {
        let l = Lattice::uniform(0.0, 1.0, 50).unwrap();
        let g = make_g_mu(0.8).unwrap();
        let claim = TerminalClaim::new("mix", |b: f64| b.sin() + (b - 0.2).max(0.0));
        let k = DividendStream::constant_rate(&l, -0.3);
        let res = solve_bsde(&g, &claim, &k, &l).unwrap();
        assert!(res.residual <= 1e-12);
        let z = res.z.as_ref().unwrap();
        for i in 0..50 {
            let m = expectation_of(res.y.step(i + 1).unwrap());
            for j in 0..=i {
                let y = res.y.get(i, j);
                let rhs = m[j] + g.eval(l.time(i), y, z.get(i, j)) * l.dt() + k.increment(i, j);
                assert!((y - rhs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn linear_driver_matches_tower() {
        let n = 200;
        let l = Lattice::uniform(0.0, 1.0, n).unwrap();
        let claim = TerminalClaim::new("c", |b: f64| (b * b - 0.5).abs() + b.cos());
        let res = solve_bsde(&Generator::zero(), &claim, &DividendStream::zero(), &l).unwrap();
        let direct: f64 = l
            .node_probabilities(n)
            .iter()
            .zip(claim.terminal_values(&l))
            .map(|(w, x)| w * x)
            .sum();
        assert!((res.value_at_origin() - direct).abs() <= 1e-12);
    }
}
