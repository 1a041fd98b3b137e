use std::fmt;
use std::sync::Arc;

use super::solver::{implicit_step, price, solve_range};
use super::DividendStream;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::lattice::{AdaptedProcess, Lattice};

/// A dynamic pricing mechanism `E_{s,t}[X; K]` on a fixed lattice.
///
/// Claims are node values at step `t`; the result is node values at step
/// `s`. Implementations must be pure and reentrant.
pub trait PricingMechanism: Send + Sync {
    fn lattice(&self) -> &Lattice;

    /// Declared domination constant, if the mechanism advertises one.
    fn declared_mu(&self) -> Option<f64>;

    fn price(&self, s: usize, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<Vec<f64>>;

    fn describe(&self) -> String {
        "mechanism".to_string()
    }

    /// Price process on steps `0..=t` for the claim paid at `t`.
    fn price_surface(&self, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<AdaptedProcess> {
        let rows = (0..=t)
            .map(|s| self.price(s, t, claim, dividends))
            .collect::<Result<Vec<_>>>()?;
        AdaptedProcess::from_rows(0, rows)
    }

    /// Price at node `(step, node)` of the one-step claim paying `down` /
    /// `up` at the two children, plus `dividend` paid at the node.
    fn one_step_quote(&self, step: usize, node: usize, down: f64, up: f64, dividend: f64) -> Result<f64> {
        let mut claim = vec![0.0; step + 2];
        claim[node] = down;
        claim[node + 1] = up;
        let k = if dividend == 0.0 {
            DividendStream::zero()
        } else {
            DividendStream::point(step, node, dividend)
        };
        Ok(self.price(step, step + 1, &claim, &k)?[node])
    }
}

/// Shared handle to a black-box mechanism.
pub type MechanismHandle = Arc<dyn PricingMechanism>;

/// `E^g` realized by backward induction on the lattice.
#[derive(Clone)]
pub struct LatticeMechanism {
    g: Generator,
    lattice: Lattice,
}

impl fmt::Debug for LatticeMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeMechanism")
            .field("g", &self.g)
            .field("lattice", &self.lattice)
            .finish()
    }
}

impl LatticeMechanism {
    pub fn new(g: Generator, lattice: Lattice) -> Self {
        LatticeMechanism { g, lattice }
    }

    pub fn generator(&self) -> &Generator {
        &self.g
    }
}

impl PricingMechanism for LatticeMechanism {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn declared_mu(&self) -> Option<f64> {
        Some(self.g.mu())
    }

    fn describe(&self) -> String {
        format!("E^{}", self.g.name())
    }

    fn price(&self, s: usize, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<Vec<f64>> {
        price(&self.g, s, t, claim, dividends, &self.lattice)
    }

    fn price_surface(&self, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<AdaptedProcess> {
        Ok(solve_range(&self.g, &self.lattice, 0, t, claim, dividends)?.y)
    }

    fn one_step_quote(&self, step: usize, node: usize, down: f64, up: f64, dividend: f64) -> Result<f64> {
        self.lattice.check_step(step + 1)?;
        let sqrt_dt = self.lattice.sqrt_dt();
        let sol = implicit_step(
            &self.g,
            self.lattice.time(step),
            self.lattice.dt(),
            0.5 * (up + down),
            (up - down) * (0.5 / sqrt_dt),
            dividend,
        );
        if !sol.converged {
            return Err(Error::PicardDivergence {
                step,
                node,
                residual: sol.residual,
            });
        }
        Ok(sol.y)
    }
}

/// Wraps `E^g` on `lattice` as a black-box handle with declared `mu = g.mu`.
pub fn as_mechanism(g: &Generator, lattice: &Lattice) -> MechanismHandle {
    Arc::new(LatticeMechanism::new(g.clone(), *lattice))
}

/// Mechanisms glued one after another at step boundaries.
pub struct PastedMechanism {
    lattice: Lattice,
    pieces: Vec<MechanismHandle>,
    boundaries: Vec<usize>,
}

impl PastedMechanism {
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    fn piece_below(&self, step: usize) -> usize {
        // Piece k covers [b_k, b_{k+1}]; pick the one holding (step - 1, step].
        self.boundaries
            .windows(2)
            .position(|w| w[0] < step && step <= w[1])
            .expect("step inside partition")
    }
}

impl PricingMechanism for PastedMechanism {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn declared_mu(&self) -> Option<f64> {
        self.pieces
            .iter()
            .map(|m| m.declared_mu())
            .try_fold(0.0_f64, |acc, mu| mu.map(|m| acc.max(m)))
    }

    fn describe(&self) -> String {
        let names: Vec<String> = self.pieces.iter().map(|m| m.describe()).collect();
        format!("paste[{}]@{:?}", names.join(", "), self.boundaries)
    }

    fn price(&self, s: usize, t: usize, claim: &[f64], dividends: &DividendStream) -> Result<Vec<f64>> {
        if s > t {
            return Err(Error::BadStepOrder { s, t });
        }
        self.lattice.check_values(t, claim)?;
        let mut current = claim.to_vec();
        let mut step = t;
        while step > s {
            let k = self.piece_below(step);
            let target = s.max(self.boundaries[k]);
            current = self.pieces[k].price(target, step, &current, dividends)?;
            step = target;
        }
        Ok(current)
    }

    fn one_step_quote(&self, step: usize, node: usize, down: f64, up: f64, dividend: f64) -> Result<f64> {
        self.lattice.check_step(step + 1)?;
        let k = self.piece_below(step + 1);
        self.pieces[k].one_step_quote(step, node, down, up, dividend)
    }
}

/// Pastes `mechs[k]` on `[boundaries[k], boundaries[k + 1]]`.
///
/// `boundaries` must start at 0, end at the lattice's last step and be
/// strictly increasing, with one more entry than `mechs`.
pub fn paste(mechs: &[MechanismHandle], boundaries: &[usize]) -> Result<MechanismHandle> {
    let first = mechs
        .first()
        .ok_or_else(|| Error::BadPartition("no mechanisms to paste".into()))?;
    let lattice = *first.lattice();
    if boundaries.len() != mechs.len() + 1 {
        return Err(Error::BadPartition(format!(
            "{} mechanisms need {} boundaries, got {}",
            mechs.len(),
            mechs.len() + 1,
            boundaries.len()
        )));
    }
    if boundaries[0] != 0 || *boundaries.last().unwrap() != lattice.n_steps() {
        return Err(Error::BadPartition(format!(
            "boundaries must run from 0 to {}",
            lattice.n_steps()
        )));
    }
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadPartition("boundaries must be strictly increasing".into()));
    }
    if mechs.iter().any(|m| *m.lattice() != lattice) {
        return Err(Error::BadPartition("mechanisms live on different lattices".into()));
    }
    Ok(Arc::new(PastedMechanism {
        lattice,
        pieces: mechs.to_vec(),
        boundaries: boundaries.to_vec(),
    }))
}

/// Prices a claim whose payoff depends on the origin node at step `s`:
/// node `j` of the result is the price at `(s, j)` of `claim_for(j)`.
pub fn price_per_origin(
    m: &dyn PricingMechanism,
    s: usize,
    t: usize,
    claim_for: impl Fn(usize) -> Vec<f64>,
    dividends: &DividendStream,
) -> Result<Vec<f64>> {
    (0..=s)
        .map(|j| Ok(m.price(s, t, &claim_for(j), dividends)?[j]))
        .collect()
}

/// Prices a path-dependent claim over `depth` steps from node `(step, node)`
/// by nested one-step quotes. `payoff` receives the up/down moves
/// (`true` = up) of each path.
pub fn price_path_dependent(
    m: &dyn PricingMechanism,
    step: usize,
    node: usize,
    depth: usize,
    payoff: &dyn Fn(&[bool]) -> f64,
) -> Result<f64> {
    m.lattice().check_step(step + depth)?;
    let mut path = Vec::with_capacity(depth);
    recurse(m, step, node, depth, payoff, &mut path)
}

fn recurse(
    m: &dyn PricingMechanism,
    step: usize,
    node: usize,
    remaining: usize,
    payoff: &dyn Fn(&[bool]) -> f64,
    path: &mut Vec<bool>,
) -> Result<f64> {
    if remaining == 0 {
        return Ok(payoff(path));
    }
    path.push(false);
    let down = recurse(m, step + 1, node, remaining - 1, payoff, path)?;
    path.pop();
    path.push(true);
    let up = recurse(m, step + 1, node + 1, remaining - 1, payoff, path)?;
    path.pop();
    m.one_step_quote(step, node, down, up, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::TerminalClaim;
    use crate::generator::make_g_mu;

    /// Hides the lattice overrides so the trait defaults get exercised.
    struct Opaque(LatticeMechanism);

    impl PricingMechanism for Opaque {
        fn lattice(&self) -> &Lattice {
            self.0.lattice()
        }
        fn declared_mu(&self) -> Option<f64> {
            self.0.declared_mu()
        }
        fn price(&self, s: usize, t: usize, claim: &[f64], k: &DividendStream) -> Result<Vec<f64>> {
            self.0.price(s, t, claim, k)
        }
    }

    #[test]
    fn defaults_agree_with_overrides() {
        let l = Lattice::uniform(0.0, 1.0, 12).unwrap();
        let g = make_g_mu(0.6).unwrap();
        let fast = LatticeMechanism::new(g.clone(), l);
        let slow = Opaque(fast.clone());
        let x = TerminalClaim::new("x", |b: f64| b.sin() * 2.0 - 0.3).terminal_values(&l);
        let k = DividendStream::constant_rate(&l, 0.4);
        let a = fast.price_surface(12, &x, &k).unwrap();
        let b = slow.price_surface(12, &x, &k).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-13);
        let qa = fast.one_step_quote(5, 2, -0.4, 1.1, 0.05).unwrap();
        let qb = slow.one_step_quote(5, 2, -0.4, 1.1, 0.05).unwrap();
        assert!((qa - qb).abs() < 1e-14);
    }

    #[test]
    fn zero_mechanism_is_tower_expectation() {
        let l = Lattice::uniform(0.0, 1.0, 10).unwrap();
        let m = as_mechanism(&Generator::zero(), &l);
        let x = TerminalClaim::new("sq", |b: f64| b * b).terminal_values(&l);
        let v = m.price(0, 10, &x, &DividendStream::zero()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn paste_validation() {
        let l = Lattice::uniform(0.0, 1.0, 8).unwrap();
        let m = as_mechanism(&Generator::zero(), &l);
        assert!(paste(&[], &[0, 8]).is_err());
        assert!(paste(&[m.clone(), m.clone()], &[0, 8]).is_err());
        assert!(paste(&[m.clone(), m.clone()], &[0, 4, 7]).is_err());
        assert!(paste(&[m.clone(), m.clone()], &[0, 4, 4]).is_err());
        let other = as_mechanism(&Generator::zero(), &Lattice::uniform(0.0, 2.0, 8).unwrap());
        assert!(paste(&[m.clone(), other], &[0, 4, 8]).is_err());
        assert!(paste(&[m.clone(), m], &[0, 4, 8]).is_ok());
    }

    #[test]
    fn path_dependent_pricing_reduces_to_node_claims() {
        let l = Lattice::uniform(0.0, 1.0, 8).unwrap();
        let m = as_mechanism(&make_g_mu(0.5).unwrap(), &l);
        // Claim depends only on the number of up-moves: same as a node claim.
        let x = TerminalClaim::new("x", |b: f64| (b - 0.1).max(0.0)).values(&l, 7);
        let direct = m.price(3, 7, &x, &DividendStream::zero()).unwrap();
        for j in 0..=3 {
            let x = x.clone();
            let v = price_path_dependent(m.as_ref(), 3, j, 4, &move |p: &[bool]| {
                x[j + p.iter().filter(|u| **u).count()]
            })
            .unwrap();
            assert!((v - direct[j]).abs() < 1e-13);
        }
    }
}
