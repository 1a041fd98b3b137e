use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::OptionChain;
use crate::bsde::{monotone_condition, solve_range, DividendStream, LognormalMap};
use crate::error::{Error, Result};
use crate::generator::make_g_mu;
use crate::lattice::Lattice;

/// Absolute slack on `lhs <= rhs`.
pub const AUDIT_TOL: f64 = 1e-9;

/// Environment variable capping the audit's worker threads.
pub const THREADS_ENV: &str = "GMECH_THREADS";

/// Pairs of payoffs compared in the audit: `X_i - X'_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "Call-Call")]
    CallCall,
    #[serde(rename = "Put-Put")]
    PutPut,
    #[serde(rename = "Call-Put")]
    CallPut,
    #[serde(rename = "Put-Call")]
    PutCall,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::CallCall, Family::PutPut, Family::CallPut, Family::PutCall];

    fn legs(self) -> (bool, bool) {
        match self {
            Family::CallCall => (false, false),
            Family::PutPut => (true, true),
            Family::CallPut => (false, true),
            Family::PutCall => (true, false),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::CallCall => "Call-Call",
            Family::PutPut => "Put-Put",
            Family::CallPut => "Call-Put",
            Family::PutCall => "Put-Call",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub family: Family,
    pub tested: usize,
    pub passed: usize,
    pub violated: usize,
}

/// `lhs` is the market price difference, `rhs` the `g_mu` price of the
/// payoff difference, `margin = rhs - lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub family: Family,
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Two quotes whose order contradicts the pointwise order of their payoffs:
/// the payoff of leg `i` dominates that of leg `j` but `price_i < price_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub family: Family,
    pub i: usize,
    pub j: usize,
    pub price_i: f64,
    pub price_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub mu: f64,
    pub n_steps: usize,
    pub vol_for_lattice: f64,
    pub tau: f64,
    pub families: Vec<FamilyCounts>,
    pub violations: Vec<ViolationRecord>,
    pub anomalies: Vec<AnomalyRecord>,
    /// Largest `|rhs|` over the degenerate pairs `i = j` of like legs.
    pub diagonal_max: f64,
}

impl DominationReport {
    pub fn tested(&self) -> usize {
        self.families.iter().map(|f| f.tested).sum()
    }

    pub fn violated(&self) -> usize {
        self.families.iter().map(|f| f.violated).sum()
    }

    pub fn passed(&self) -> bool {
        self.violated() == 0 && self.anomalies.is_empty() && self.diagonal_max == 0.0
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// One line per family count, violation and anomaly.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["kind", "family", "i", "j", "a", "b", "c"]).map_err(io)?;
        for f in &self.families {
            w.write_record([
                "count".to_string(),
                f.family.to_string(),
                String::new(),
                String::new(),
                f.tested.to_string(),
                f.passed.to_string(),
                f.violated.to_string(),
            ])
            .map_err(io)?;
        }
        for v in &self.violations {
            w.write_record([
                "violation".to_string(),
                v.family.to_string(),
                v.i.to_string(),
                v.j.to_string(),
                v.lhs.to_string(),
                v.rhs.to_string(),
                v.margin.to_string(),
            ])
            .map_err(io)?;
        }
        for a in &self.anomalies {
            w.write_record([
                "anomaly".to_string(),
                a.family.to_string(),
                a.i.to_string(),
                a.j.to_string(),
                a.price_i.to_string(),
                a.price_j.to_string(),
                String::new(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::InvalidParams(e.to_string()))
}

/// Quote order contradictions: calls must not increase with strike, puts
/// must not decrease.
pub fn monotonicity_anomalies(chain: &OptionChain) -> Vec<AnomalyRecord> {
    let mut out = Vec::new();
    let rows = &chain.rows;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if rows[i].strike < rows[j].strike && rows[i].call_mid < rows[j].call_mid {
                out.push(AnomalyRecord {
                    family: Family::CallCall,
                    i,
                    j,
                    price_i: rows[i].call_mid,
                    price_j: rows[j].call_mid,
                });
            }
        }
    }
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if rows[i].strike > rows[j].strike && rows[i].put_mid < rows[j].put_mid {
                out.push(AnomalyRecord {
                    family: Family::PutPut,
                    i,
                    j,
                    price_i: rows[i].put_mid,
                    price_j: rows[j].put_mid,
                });
            }
        }
    }
    out
}

/// Tests `price(X_i) - price(X'_j) <= E^{g_mu}[X_i - X'_j]` for every
/// ordered pair `i != j` of each family, with terminal payoffs mapped
/// through `S_T = S0 exp(vol B_T - vol^2 tau / 2)`.
pub fn run_domination_test(chain: &OptionChain, mu: f64, n_steps: usize, vol_for_lattice: f64) -> Result<DominationReport> {
    if chain.rows.is_empty() {
        return Err(Error::EmptyChain);
    }
    chain.validate()?;
    if !(vol_for_lattice > 0.0) {
        return Err(Error::InvalidParams(format!("lattice volatility must be positive, got {vol_for_lattice}")));
    }
    let tau = chain.tau();
    let lattice = Lattice::uniform(0.0, tau, n_steps)?;
    monotone_condition(mu, &lattice)?;
    let g = make_g_mu(mu)?;
    let map = LognormalMap {
        s0: chain.underlying,
        sigma: vol_for_lattice,
        drift: 0.0,
    };
    let spots: Vec<f64> = lattice.brownian_at_step(n_steps).iter().map(|&b| map.at(b, tau)).collect();
    let payoff = |row: usize, put: bool| -> Vec<f64> {
        let k = chain.rows[row].strike;
        spots
            .iter()
            .map(|&s| if put { (k - s).max(0.0) } else { (s - k).max(0.0) })
            .collect()
    };
    let quote = |row: usize, put: bool| if put { chain.rows[row].put_mid } else { chain.rows[row].call_mid };

    let n = chain.rows.len();
    let mut jobs = Vec::with_capacity(4 * n * n);
    for family in Family::ALL {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    jobs.push((family, i, j));
                }
            }
        }
    }
    let zero = DividendStream::zero();
    let rhs_of = |a: (usize, bool), b: (usize, bool)| -> Result<f64> {
        let (x, y) = (payoff(a.0, a.1), payoff(b.0, b.1));
        let diff: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u - v).collect();
        Ok(solve_range(&g, &lattice, 0, n_steps, &diff, &zero)?.value_at_origin())
    };
    let pool = thread_pool()?;
    let results: Vec<(Family, usize, usize, f64, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(family, i, j)| {
                let (pi, pj) = family.legs();
                let lhs = quote(i, pi) - quote(j, pj);
                Ok((family, i, j, lhs, rhs_of((i, pi), (j, pj))?))
            })
            .collect::<Result<_>>()
    })?;
    let diagonal_max = pool.install(|| {
        (0..n)
            .into_par_iter()
            .flat_map(|i| [(i, false), (i, true)])
            .map(|leg| rhs_of(leg, leg).map(f64::abs))
            .collect::<Result<Vec<f64>>>()
    })?
    .into_iter()
    .fold(0.0, f64::max);

    let mut families: Vec<FamilyCounts> = Family::ALL
        .iter()
        .map(|&family| FamilyCounts {
            family,
            tested: 0,
            passed: 0,
            violated: 0,
        })
        .collect();
    let mut violations = Vec::new();
    for (family, i, j, lhs, rhs) in results {
        let c = &mut families[family as usize];
        c.tested += 1;
        if lhs > rhs + AUDIT_TOL {
            c.violated += 1;
            violations.push(ViolationRecord {
                family,
                i,
                j,
                lhs,
                rhs,
                margin: rhs - lhs,
            });
        } else {
            c.passed += 1;
        }
    }
    Ok(DominationReport {
        mu,
        n_steps,
        vol_for_lattice,
        tau,
        families,
        violations,
        anomalies: monotonicity_anomalies(chain),
        diagonal_max,
    })
}
