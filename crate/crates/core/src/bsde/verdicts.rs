use serde::{Deserialize, Serialize};

use super::mechanism::{LatticeMechanism, PricingMechanism};
use super::solver::solve_range;
use super::{DividendStream, VERDICT_TOL};
use crate::error::{Error, Result};
use crate::generator::{make_g_mu, Generator};
use crate::lattice::{AdaptedProcess, Lattice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Pass,
    Fail,
    NotApplicable,
}

/// A node together with the signed margin observed there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRef {
    pub step: usize,
    pub node: usize,
    pub margin: f64,
}

/// Fails with `SchemeNotMonotone` unless `mu (sqrt(dt) + dt) <= 1`.
pub fn monotone_condition(mu: f64, lattice: &Lattice) -> Result<()> {
    let c = mu * (lattice.sqrt_dt() + lattice.dt());
    if c > 1.0 {
        return Err(Error::SchemeNotMonotone(c));
    }
    Ok(())
}

/// Smallest value of `upper - lower` over all shared nodes.
fn worst_gap(upper: &AdaptedProcess, lower: &AdaptedProcess) -> NodeRef {
    let mut worst = NodeRef {
        step: 0,
        node: 0,
        margin: f64::INFINITY,
    };
    for i in upper.first_step()..=upper.last_step() {
        for j in 0..=i {
            let m = upper.get(i, j) - lower.get(i, j);
            if m < worst.margin {
                worst = NodeRef { step: i, node: j, margin: m };
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub status: VerdictStatus,
    /// Node with the smallest `Y - Y'`.
    pub worst: Option<NodeRef>,
    pub note: Option<String>,
}

/// Discrete comparison: `X >= X'` and `K - K'` increasing imply `Y >= Y'`
/// at every node.
pub fn compare(
    g: &Generator,
    (x, k): (&[f64], &DividendStream),
    (x2, k2): (&[f64], &DividendStream),
    lattice: &Lattice,
) -> Result<ComparisonVerdict> {
    monotone_condition(g.mu(), lattice)?;
    let n = lattice.n_steps();
    lattice.check_values(n, x)?;
    lattice.check_values(n, x2)?;
    if let Some(j) = x.iter().zip(x2).position(|(a, b)| a < b) {
        return Ok(ComparisonVerdict {
            status: VerdictStatus::NotApplicable,
            worst: None,
            note: Some(format!("terminal claims not ordered at node {j}")),
        });
    }
    if !k.minus(k2, lattice).is_increasing(lattice) {
        return Ok(ComparisonVerdict {
            status: VerdictStatus::NotApplicable,
            worst: None,
            note: Some("K - K' is not increasing".into()),
        });
    }
    let y = solve_range(g, lattice, 0, n, x, k)?.y;
    let y2 = solve_range(g, lattice, 0, n, x2, k2)?.y;
    let worst = worst_gap(&y, &y2);
    Ok(ComparisonVerdict {
        status: if worst.margin >= -VERDICT_TOL {
            VerdictStatus::Pass
        } else {
            VerdictStatus::Fail
        },
        worst: Some(worst),
        note: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationVerdict {
    pub pass: bool,
    /// Node with the smallest `E^{g_mu}[X - X'] - (m(X) - m(X'))`.
    pub worst: NodeRef,
}

/// Checks `m(X; K) - m(X'; K') <= E^{g_mu}[X - X'; K - K']` at every node
/// of every step.
pub fn check_domination(
    m: &dyn PricingMechanism,
    (x, k): (&[f64], &DividendStream),
    (x2, k2): (&[f64], &DividendStream),
    mu: f64,
) -> Result<DominationVerdict> {
    let lattice = *m.lattice();
    monotone_condition(mu, &lattice)?;
    let n = lattice.n_steps();
    let lhs_a = m.price_surface(n, x, k)?;
    let lhs_b = m.price_surface(n, x2, k2)?;
    let diff: Vec<f64> = x.iter().zip(x2).map(|(a, b)| a - b).collect();
    let dom = LatticeMechanism::new(make_g_mu(mu)?, lattice);
    let rhs = dom.price_surface(n, &diff, &k.minus(k2, &lattice))?;
    let lhs = AdaptedProcess::from_fn(0, n, |i, j| lhs_a.get(i, j) - lhs_b.get(i, j));
    let worst = worst_gap(&rhs, &lhs);
    Ok(DominationVerdict {
        pass: worst.margin >= -VERDICT_TOL,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignFlipVerdict {
    pub pass: bool,
    pub max_error: f64,
}

/// Checks `-E^g[X; K] = E^{g-}[-X; -K]` node-wise, `g-(t,y,z) = -g(t,-y,-z)`.
pub fn sign_flip_check(
    g: &Generator,
    x: &[f64],
    k: &DividendStream,
    lattice: &Lattice,
) -> Result<SignFlipVerdict> {
    let n = lattice.n_steps();
    let y = solve_range(g, lattice, 0, n, x, k)?.y;
    let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let y_dual = solve_range(&g.dual(), lattice, 0, n, &neg_x, &k.scaled(-1.0, lattice))?.y;
    let max_error = y.map(|v| -v).max_abs_diff(&y_dual);
    Ok(SignFlipVerdict {
        pass: max_error <= 1e-10,
        max_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::TerminalClaim;

    fn lattice() -> Lattice {
        Lattice::uniform(0.0, 1.0, 40).unwrap()
    }

    #[test]
    fn compare_equal_claims() {
        let l = lattice();
        let g = make_g_mu(0.5).unwrap();
        let x = TerminalClaim::new("x", |b: f64| b.max(0.0)).terminal_values(&l);
        let k = DividendStream::constant_rate(&l, 0.2);
        let v = compare(&g, (&x, &k), (&x, &k), &l).unwrap();
        assert_eq!(v.status, VerdictStatus::Pass);
        assert_eq!(v.worst.unwrap().margin, 0.0);
    }

    #[test]
    fn compare_shifted_claim() {
        let l = lattice();
        let g = make_g_mu(0.5).unwrap();
        let x = TerminalClaim::new("x", |b: f64| b.max(0.0)).terminal_values(&l);
        let x2: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
        let z = DividendStream::zero();
        let v = compare(&g, (&x, &z), (&x2, &z), &l).unwrap();
        assert_eq!(v.status, VerdictStatus::Pass);
        let v = compare(&g, (&x2, &z), (&x, &z), &l).unwrap();
        assert_eq!(v.status, VerdictStatus::NotApplicable);
        let down = DividendStream::constant_rate(&l, -1.0);
        let v = compare(&g, (&x, &down), (&x2, &z), &l).unwrap();
        assert_eq!(v.status, VerdictStatus::NotApplicable);
    }

    #[test]
    fn compare_requires_monotone_scheme() {
        let l = Lattice::uniform(0.0, 1.0, 4).unwrap();
        let g = make_g_mu(2.0).unwrap();
        let x = vec![0.0; 5];
        let z = DividendStream::zero();
        assert!(matches!(
            compare(&g, (&x, &z), (&x, &z), &l),
            Err(Error::SchemeNotMonotone(_))
        ));
    }

    #[test]
    fn domination_of_identical_claims_is_zero() {
        let l = lattice();
        let m = LatticeMechanism::new(make_g_mu(0.3).unwrap(), l);
        let x = TerminalClaim::new("x", |b: f64| b.cos()).terminal_values(&l);
        let z = DividendStream::zero();
        let v = check_domination(&m, (&x, &z), (&x, &z), 0.3).unwrap();
        assert!(v.pass);
        assert_eq!(v.worst.margin, 0.0);
    }

    #[test]
    fn domination_fails_for_steeper_mechanism() {
        let l = lattice();
        let m = LatticeMechanism::new(Generator::abs_z(1.0).unwrap(), l);
        let x = TerminalClaim::brownian().terminal_values(&l);
        let x2 = vec![0.0; 41];
        let z = DividendStream::zero();
        let v = check_domination(&m, (&x, &z), (&x2, &z), 0.1).unwrap();
        assert!(!v.pass);
        assert!(v.worst.margin < -0.5);
    }

    #[test]
    fn sign_flip_examples() {
        let l = lattice();
        let x = TerminalClaim::new("x", |b: f64| (b * 3.0).sin() + b).terminal_values(&l);
        let k = DividendStream::constant_rate(&l, 0.5);
        let gmu = make_g_mu(0.9).unwrap();
        assert!(sign_flip_check(&gmu, &x, &k, &l).unwrap().pass);
        let zero = vec![0.0; 41];
        let v = sign_flip_check(&gmu, &zero, &DividendStream::zero(), &l).unwrap();
        assert_eq!(v.max_error, 0.0);
        let lin = Generator::new("lin", 0.4, Default::default(), |_, y, z| 0.4 * y - 0.2 * z).unwrap();
        assert_eq!(lin.dual().eval(0.0, 1.3, -0.7), lin.eval(0.0, 1.3, -0.7));
        assert!(sign_flip_check(&lin, &x, &k, &l).unwrap().pass);
    }
}
