use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::generator::BSMarketParams;

pub const DAYS_PER_YEAR: f64 = 365.0;

/// Header every chain file must carry, in this order.
pub const CHAIN_HEADER: [&str; 6] = ["as_of_days", "expiry_days", "underlying", "strike", "call_mid", "put_mid"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub strike: f64,
    pub call_mid: f64,
    pub put_mid: f64,
}

/// European calls and puts on one underlying and one expiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub as_of_days: f64,
    pub expiry_days: f64,
    pub underlying: f64,
    pub rows: Vec<ChainRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRecord {
    as_of_days: f64,
    expiry_days: f64,
    underlying: f64,
    strike: f64,
    call_mid: f64,
    put_mid: f64,
}

impl OptionChain {
    /// Time to expiry in years.
    pub fn tau(&self) -> f64 {
        (self.expiry_days - self.as_of_days) / DAYS_PER_YEAR
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.strike).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::EmptyChain);
        }
        if !(self.expiry_days > self.as_of_days) {
            return Err(Error::Invariant(format!(
                "expiry {} must come after as-of {}",
                self.expiry_days, self.as_of_days
            )));
        }
        if !(self.underlying >= 0.0) {
            return Err(Error::Invariant(format!("negative underlying {}", self.underlying)));
        }
        for (k, row) in self.rows.iter().enumerate() {
            for (what, v) in [("strike", row.strike), ("call", row.call_mid), ("put", row.put_mid)] {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Invariant(format!("row {k}: {what} price {v} is negative")));
                }
            }
        }
        if let Some(w) = self.rows.windows(2).find(|w| w[1].strike <= w[0].strike) {
            return Err(Error::Invariant(format!(
                "strikes must be strictly increasing: {} then {}",
                w[0].strike, w[1].strike
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRecord {
                as_of_days: self.as_of_days,
                expiry_days: self.expiry_days,
                underlying: self.underlying,
                strike: r.strike,
                call_mid: r.call_mid,
                put_mid: r.put_mid,
            })
            .map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Parses a chain from CSV text.
pub fn parse_chain(text: &str) -> Result<OptionChain> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != CHAIN_HEADER {
        return Err(Error::Schema(format!(
            "expected header {}, got {}",
            CHAIN_HEADER.join(","),
            got.join(",")
        )));
    }
    let mut first: Option<CsvRecord> = None;
    let mut rows = Vec::new();
    for (k, rec) in reader.deserialize::<CsvRecord>().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if let Some(f) = &first {
            if f.as_of_days != rec.as_of_days || f.expiry_days != rec.expiry_days || f.underlying != rec.underlying {
                return Err(Error::Invariant(format!(
                    "line {line}: as-of, expiry and underlying must match the first row"
                )));
            }
        }
        rows.push(ChainRow {
            strike: rec.strike,
            call_mid: rec.call_mid,
            put_mid: rec.put_mid,
        });
        first.get_or_insert(rec);
    }
    let first = first.ok_or(Error::EmptyChain)?;
    let chain = OptionChain {
        as_of_days: first.as_of_days,
        expiry_days: first.expiry_days,
        underlying: first.underlying,
        rows,
    };
    chain.validate()?;
    Ok(chain)
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<OptionChain> {
    let text = std::fs::read_to_string(path)?;
    parse_chain(&text)
}

/// Black–Scholes call and put on a non-dividend stock.
pub fn black_scholes(s0: f64, strike: f64, r: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let disc = (-r * tau).exp();
    let vol = sigma * tau.sqrt();
    if vol < 1e-12 {
        let call = (s0 - strike * disc).max(0.0);
        return (call, call - s0 + strike * disc);
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let d1 = ((s0 / strike).ln() + (r + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    let call = s0 * n.cdf(d1) - strike * disc * n.cdf(d2);
    let put = strike * disc * n.cdf(-d2) - s0 * n.cdf(-d1);
    (call, put)
}

/// Multiplicative noise on the synthesized mids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub seed: u64,
    /// Relative amplitude: each mid is scaled by a uniform factor in `[1 - a, 1 + a]`.
    pub amplitude: f64,
}

/// Synthetic chain from the Black–Scholes closed form.
pub fn synth_chain(
    p: BSMarketParams,
    s0: f64,
    strikes: &[f64],
    as_of_days: f64,
    expiry_days: f64,
    noise: Option<Noise>,
) -> Result<OptionChain> {
    p.validate()?;
    if !(s0 > 0.0) {
        return Err(Error::InvalidParams(format!("underlying must be positive, got {s0}")));
    }
    if strikes.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(expiry_days > as_of_days) {
        return Err(Error::InvalidParams("expiry must come after as-of".into()));
    }
    let tau = (expiry_days - as_of_days) / DAYS_PER_YEAR;
    let mut rng = noise.map(|n| (ChaCha8Rng::seed_from_u64(n.seed), n.amplitude));
    let mut rows = Vec::with_capacity(strikes.len());
    for &k in strikes {
        if !(k > 0.0) {
            return Err(Error::InvalidParams(format!("strike must be positive, got {k}")));
        }
        let (mut call, mut put) = black_scholes(s0, k, p.r, p.sigma, tau);
        if let Some((rng, a)) = rng.as_mut() {
            call *= 1.0 + rng.gen_range(-*a..=*a);
            put *= 1.0 + rng.gen_range(-*a..=*a);
        }
        rows.push(ChainRow {
            strike: k,
            call_mid: call.max(0.0),
            put_mid: put.max(0.0),
        });
    }
    let chain = OptionChain {
        as_of_days,
        expiry_days,
        underlying: s0,
        rows,
    };
    chain.validate().map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(chain)
}

/// `n` strikes evenly spaced over `[lo, hi]`.
pub fn strike_ladder(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Which price was tampered with by [`corrupt_monotonicity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corruption {
    pub row: usize,
    pub put: bool,
}

/// Raises one call or put mid above its neighbour so it contradicts the
/// strike ordering (calls decrease and puts increase with strike).
pub fn corrupt_monotonicity(chain: &mut OptionChain, seed: u64) -> Corruption {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chain.rows.len();
    assert!(n >= 2, "need two strikes to break ordering");
    let put = rng.gen_bool(0.5);
    let bump = 0.01 + rng.gen_range(0.0..0.5);
    let row = if put {
        let row = rng.gen_range(0..n - 1);
        chain.rows[row].put_mid = chain.rows[row + 1].put_mid + bump;
        row
    } else {
        let row = rng.gen_range(1..n);
        chain.rows[row].call_mid = chain.rows[row - 1].call_mid + bump;
        row
    };
    Corruption { row, put }
}
