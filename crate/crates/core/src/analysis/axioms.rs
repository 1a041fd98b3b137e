use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bsde::{DividendStream, PricingMechanism};
use crate::error::Result;
use crate::sampling::{random_claim, random_event, random_nonneg};

/// Absolute tolerance of every axiom check, scaled by `max(1, |rhs|)`.
pub const AXIOM_TOL: f64 = 1e-9;

const CLAIM_SCALE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axiom {
    /// Monotonicity.
    A1,
    /// Identity at `s = t`.
    A2,
    /// Time consistency `E_{r,s}[E_{s,t}[X]] = E_{r,t}[X]`.
    A3,
    /// Locality `1_A E[X] = 1_A E[1_A X]`.
    A4,
    /// Zero preservation.
    A4Zero,
    /// `1_A E[X] = E[1_A X]`.
    A4Prime,
    /// Splitting `E[1_A X + 1_{A^c} X'] = 1_A E[X] + 1_{A^c} E[X']`.
    EA4,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::A1,
        Axiom::A2,
        Axiom::A3,
        Axiom::A4,
        Axiom::A4Zero,
        Axiom::A4Prime,
        Axiom::EA4,
    ];
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::A1 => "A1",
            Axiom::A2 => "A2",
            Axiom::A3 => "A3",
            Axiom::A4 => "A4",
            Axiom::A4Zero => "A4_0",
            Axiom::A4Prime => "A4'",
            Axiom::EA4 => "eA4",
        };
        f.write_str(s)
    }
}

/// A concrete failing instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomWitness {
    /// Outer step of a tower check.
    pub r: Option<usize>,
    pub s: usize,
    pub t: usize,
    /// Node at step `s` (or `r`) where the identity broke.
    pub node: usize,
    /// Event at step `s` for the locality checks.
    pub event: Option<Vec<bool>>,
    /// Claim values at step `t`.
    pub claim: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomVerdict {
    pub axiom: Axiom,
    pub holds: bool,
    pub tested: usize,
    pub failures: usize,
    /// Largest violation observed.
    pub worst: f64,
    pub witness: Option<AxiomWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub mechanism: String,
    pub samples: usize,
    pub seed: u64,
    pub verdicts: Vec<AxiomVerdict>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, axiom: Axiom) -> &AxiomVerdict {
        self.verdicts
            .iter()
            .find(|v| v.axiom == axiom)
            .expect("every axiom is reported")
    }

    pub fn failed(&self) -> Vec<Axiom> {
        self.verdicts.iter().filter(|v| !v.holds).map(|v| v.axiom).collect()
    }
}

struct Tally {
    axiom: Axiom,
    tested: usize,
    failures: usize,
    worst: f64,
    witness: Option<AxiomWitness>,
}

impl Tally {
    fn new(axiom: Axiom) -> Self {
        Tally {
            axiom,
            tested: 0,
            failures: 0,
            worst: 0.0,
            witness: None,
        }
    }

    /// Records one sample; `excess(j)` is how far node `j` violates the axiom.
    fn record(&mut self, excess: impl Iterator<Item = (usize, f64, f64, f64)>, make: impl FnOnce(usize, f64, f64) -> AxiomWitness) {
        self.tested += 1;
        let worst = excess.fold(None::<(usize, f64, f64, f64)>, |acc, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        });
        if let Some((node, ex, lhs, rhs)) = worst {
            if ex > 0.0 {
                self.failures += 1;
                if ex > self.worst {
                    self.worst = ex;
                    self.witness = Some(make(node, lhs, rhs));
                }
            }
        }
    }

    fn finish(self) -> AxiomVerdict {
        AxiomVerdict {
            axiom: self.axiom,
            holds: self.failures == 0,
            tested: self.tested,
            failures: self.failures,
            worst: self.worst,
            witness: self.witness,
        }
    }
}

fn tol(rhs: f64) -> f64 {
    AXIOM_TOL * rhs.abs().max(1.0)
}

/// Node-wise violation of `lhs = rhs`.
fn equal_excess<'a>(lhs: &'a [f64], rhs: &'a [f64]) -> impl Iterator<Item = (usize, f64, f64, f64)> + 'a {
    lhs.iter()
        .zip(rhs)
        .enumerate()
        .map(|(j, (&a, &b))| (j, (a - b).abs() - tol(b), a, b))
}

/// Nodes at step `t` reachable from the marked nodes at step `s`.
pub fn cone(event: &[bool], s: usize, t: usize) -> Vec<bool> {
    let mut reach = vec![false; t + 1];
    for (j, _) in event.iter().enumerate().filter(|(_, &e)| e) {
        for r in reach.iter_mut().skip(j).take(t - s + 1) {
            *r = true;
        }
    }
    reach
}

/// Randomized check of the consistency axioms with zero dividends.
///
/// Events are node subsets at step `s`. Because claims live on recombining
/// nodes, `1_A X` is represented by `X` on the cone of `A` and zero off it;
/// the `A4'` and `eA4` samples force claims to be compatible on the overlap
/// of the cones of `A` and its complement.
pub fn axiom_suite(m: &dyn PricingMechanism, samples: usize, seed: u64) -> Result<AxiomReport> {
    let n = m.lattice().n_steps();
    let zero = DividendStream::zero();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tallies: Vec<Tally> = Axiom::ALL.iter().map(|&a| Tally::new(a)).collect();
    let samples = samples.max(1);

    for _ in 0..samples {
        // A1: X >= X'.
        let t = rng.gen_range(1..=n);
        let s = rng.gen_range(0..t);
        let x = random_claim(&mut rng, t + 1, CLAIM_SCALE);
        let mut bump = random_nonneg(&mut rng, t + 1, 1.0);
        if rng.gen_bool(0.5) {
            let keep = rng.gen_range(0..=t);
            bump.iter_mut().enumerate().filter(|(k, _)| *k != keep).for_each(|(_, b)| *b = 0.0);
        }
        let x2: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a - b).collect();
        let (hi, lo) = (m.price(s, t, &x, &zero)?, m.price(s, t, &x2, &zero)?);
        tallies[0].record(
            hi.iter()
                .zip(&lo)
                .enumerate()
                .map(|(j, (&a, &b))| (j, b - a - tol(b), a, b)),
            |node, lhs, rhs| AxiomWitness {
                r: None,
                s,
                t,
                node,
                event: None,
                claim: x.clone(),
                lhs,
                rhs,
            },
        );

        // A2.
        let t = rng.gen_range(0..=n);
        let x = random_claim(&mut rng, t + 1, CLAIM_SCALE);
        let same = m.price(t, t, &x, &zero)?;
        tallies[1].record(equal_excess(&same, &x), |node, lhs, rhs| AxiomWitness {
            r: None,
            s: t,
            t,
            node,
            event: None,
            claim: x.clone(),
            lhs,
            rhs,
        });

        // A3: r <= s <= t.
        let t = rng.gen_range(1..=n);
        let s = rng.gen_range(0..=t);
        let r = rng.gen_range(0..=s);
        let x = random_claim(&mut rng, t + 1, CLAIM_SCALE);
        let inner = m.price(s, t, &x, &zero)?;
        let nested = m.price(r, s, &inner, &zero)?;
        let direct = m.price(r, t, &x, &zero)?;
        tallies[2].record(equal_excess(&nested, &direct), |node, lhs, rhs| AxiomWitness {
            r: Some(r),
            s,
            t,
            node,
            event: None,
            claim: x.clone(),
            lhs,
            rhs,
        });

        // A4_0.
        let t = rng.gen_range(0..=n);
        let s = rng.gen_range(0..=t);
        let zeros = vec![0.0; t + 1];
        let p = m.price(s, t, &zeros, &zero)?;
        let target = vec![0.0; s + 1];
        tallies[4].record(equal_excess(&p, &target), |node, lhs, rhs| AxiomWitness {
            r: None,
            s,
            t,
            node,
            event: None,
            claim: zeros.clone(),
            lhs,
            rhs,
        });

        // Locality family: events at s >= 1 when possible.
        let t = rng.gen_range(1..=n);
        let s = if t >= 2 { rng.gen_range(1..t) } else { 0 };
        let event = random_event(&mut rng, s + 1);
        let not_event: Vec<bool> = event.iter().map(|e| !e).collect();
        let in_a = cone(&event, s, t);
        let in_c = cone(&not_event, s, t);

        // A4: on A, E[X] = E[X on cone(A)].
        let x = random_claim(&mut rng, t + 1, CLAIM_SCALE);
        let restricted: Vec<f64> = x.iter().zip(&in_a).map(|(&v, &c)| if c { v } else { 0.0 }).collect();
        let full = m.price(s, t, &x, &zero)?;
        let local = m.price(s, t, &restricted, &zero)?;
        tallies[3].record(
            equal_excess(&full, &local).filter(|(j, ..)| event[*j]),
            |node, lhs, rhs| AxiomWitness {
                r: None,
                s,
                t,
                node,
                event: Some(event.clone()),
                claim: x.clone(),
                lhs,
                rhs,
            },
        );

        // A4': X vanishing on the overlap; E[X 1_cone(A)] = 1_A E[X].
        let x: Vec<f64> = random_claim(&mut rng, t + 1, CLAIM_SCALE)
            .into_iter()
            .enumerate()
            .map(|(k, v)| if in_a[k] && in_c[k] { 0.0 } else { v })
            .collect();
        let restricted: Vec<f64> = x.iter().zip(&in_a).map(|(&v, &c)| if c { v } else { 0.0 }).collect();
        let lhs = m.price(s, t, &restricted, &zero)?;
        let full = m.price(s, t, &x, &zero)?;
        let rhs: Vec<f64> = full.iter().zip(&event).map(|(&v, &e)| if e { v } else { 0.0 }).collect();
        tallies[5].record(equal_excess(&lhs, &rhs), |node, l, r| AxiomWitness {
            r: None,
            s,
            t,
            node,
            event: Some(event.clone()),
            claim: restricted.clone(),
            lhs: l,
            rhs: r,
        });

        // eA4: X, X' agreeing on the overlap, pasted along A.
        let x = random_claim(&mut rng, t + 1, CLAIM_SCALE);
        let x2: Vec<f64> = random_claim(&mut rng, t + 1, CLAIM_SCALE)
            .into_iter()
            .enumerate()
            .map(|(k, v)| if in_a[k] && in_c[k] { x[k] } else { v })
            .collect();
        let pasted: Vec<f64> = (0..=t)
            .map(|k| {
                if in_a[k] {
                    x[k]
                } else if in_c[k] {
                    x2[k]
                } else {
                    0.0
                }
            })
            .collect();
        let lhs = m.price(s, t, &pasted, &zero)?;
        let pa = m.price(s, t, &x, &zero)?;
        let pb = m.price(s, t, &x2, &zero)?;
        let rhs: Vec<f64> = (0..=s).map(|j| if event[j] { pa[j] } else { pb[j] }).collect();
        tallies[6].record(equal_excess(&lhs, &rhs), |node, l, r| AxiomWitness {
            r: None,
            s,
            t,
            node,
            event: Some(event.clone()),
            claim: pasted.clone(),
            lhs: l,
            rhs: r,
        });
    }

    Ok(AxiomReport {
        mechanism: m.describe(),
        samples,
        seed,
        verdicts: tallies.into_iter().map(Tally::finish).collect(),
    })
}
