use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decomposition::SUPERMARTINGALE_TOL;
use super::probes::{central_node, ProbePath};
use crate::bsde::{as_mechanism, monotone_condition, DividendStream, PricingMechanism};
use crate::error::{Error, Result};
use crate::generator::{make_g_mu, Generator, GeneratorFlags};
use crate::sampling::random_claim;

/// Longest probe, in lattice steps, expanded inside one dyadic interval.
pub const MAX_PROBE_DEPTH: usize = 16;

const ROOT_TOL: f64 = 1e-14;
const ROOT_MAX_ITERS: usize = 60;

/// First and second moments of the realized driver over all probe paths
/// at one lattice step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverMoments {
    pub t: f64,
    pub mean: f64,
    pub mean_sq: f64,
}

/// One row of the recovered table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub g: f64,
}

/// Driver of a black-box mechanism tabulated on dyadic times and a user grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredGenerator {
    pub level: u32,
    pub mu: f64,
    pub steps_per_interval: usize,
    /// Dyadic interval start times.
    pub times: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    /// `values[i][k]`: driver at the start of interval `i` for `points[k]`.
    pub values: Vec<Vec<f64>>,
    /// Driver at `(y, z) = (0, 0)` per interval.
    pub origin_values: Vec<f64>,
    /// Largest sampled `|g(p) - g(q)| / (|dy| + |dz|)` within one interval.
    pub lipschitz_ratio: f64,
    /// `profiles[i][k][l]`: driver moments `l` steps into interval `i`.
    #[serde(skip)]
    pub profiles: Vec<Vec<Vec<DriverMoments>>>,
}

impl RecoveredGenerator {
    pub fn table(&self) -> Vec<TableRow> {
        let mut rows = Vec::with_capacity(self.times.len() * self.points.len());
        for (i, &t) in self.times.iter().enumerate() {
            for (k, &(y, z)) in self.points.iter().enumerate() {
                rows.push(TableRow {
                    t,
                    y,
                    z,
                    g: self.values[i][k],
                });
            }
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.table() {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn lipschitz_certified(&self) -> bool {
        self.lipschitz_ratio <= self.mu + 1e-6
    }

    pub fn max_origin_value(&self) -> f64 {
        self.origin_values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Table value nearest below `t` at `points[k]`.
    pub fn value(&self, t: f64, k: usize) -> f64 {
        self.values[self.interval_of(t)][k]
    }

    fn interval_of(&self, t: f64) -> usize {
        let t0 = self.times[0];
        let width = if self.times.len() > 1 {
            self.times[1] - t0
        } else {
            f64::INFINITY
        };
        let i = ((t - t0) / width + 1e-9).floor();
        (i.max(0.0) as usize).min(self.times.len() - 1)
    }

    /// Time-averaged L2 distance between the realized driver along the
    /// probes and `truth`, per sample point.
    pub fn l2_errors(&self, truth: &dyn Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        self.points
            .iter()
            .enumerate()
            .map(|(k, &(y, z))| {
                let mut acc = 0.0;
                let mut count = 0usize;
                for interval in &self.profiles {
                    for mo in &interval[k] {
                        let h = truth(mo.t, y, z);
                        acc += (mo.mean_sq - 2.0 * h * mo.mean + h * h).max(0.0);
                        count += 1;
                    }
                }
                (acc / count.max(1) as f64).sqrt()
            })
            .collect()
    }

    pub fn sup_l2_error(&self, truth: &dyn Fn(f64, f64, f64) -> f64) -> f64 {
        self.l2_errors(truth).into_iter().fold(0.0, f64::max)
    }

    /// Largest gap between table entries and `truth` at the same points.
    pub fn sup_table_error(&self, truth: &dyn Fn(f64, f64, f64) -> f64) -> f64 {
        self.table()
            .iter()
            .map(|r| (r.g - truth(r.t, r.y, r.z)).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-constant in time, bilinear in `(y, z)` with linear
    /// extrapolation. Requires the points to form a full tensor grid.
    pub fn to_generator(&self) -> Result<Generator> {
        let axis = |f: fn(&(f64, f64)) -> f64| {
            let mut v: Vec<f64> = self.points.iter().map(f).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v
        };
        let ys = axis(|p| p.0);
        let zs = axis(|p| p.1);
        if ys.len() * zs.len() != self.points.len() {
            return Err(Error::InvalidParams("sample points do not form a tensor grid".into()));
        }
        let mut grids = Vec::with_capacity(self.values.len());
        for row in &self.values {
            let mut cell = vec![vec![f64::NAN; zs.len()]; ys.len()];
            for (k, &(y, z)) in self.points.iter().enumerate() {
                let a = ys.iter().position(|v| *v == y).unwrap();
                let b = zs.iter().position(|v| *v == z).unwrap();
                cell[a][b] = row[k];
            }
            if cell.iter().flatten().any(|v| v.is_nan()) {
                return Err(Error::InvalidParams("sample points do not form a tensor grid".into()));
            }
            grids.push(cell);
        }
        let times = self.times.clone();
        let width = if times.len() > 1 { times[1] - times[0] } else { f64::INFINITY };
        let t0 = times[0];
        let last = times.len() - 1;
        Generator::new(
            format!("recovered(n={})", self.level),
            self.mu.max(self.lipschitz_ratio),
            GeneratorFlags {
                zero_at_zero: self.max_origin_value() <= 1e-6,
                deterministic: true,
                ..Default::default()
            },
            move |t, y, z| {
                let i = (((t - t0) / width + 1e-9).floor().max(0.0) as usize).min(last);
                bilinear(&ys, &zs, &grids[i], y, z)
            },
        )
    }
}

/// Cell index and unclamped local coordinate of `x` on `axis`.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    if axis.len() == 1 {
        return (0, 0.0);
    }
    let k = axis.partition_point(|v| *v <= x).saturating_sub(1).min(axis.len() - 2);
    (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
}

fn bilinear(ys: &[f64], zs: &[f64], v: &[Vec<f64>], y: f64, z: f64) -> f64 {
    let (a, u) = locate(ys, y);
    let (b, w) = locate(zs, z);
    let at = |i: usize, j: usize| v[i.min(ys.len() - 1)][j.min(zs.len() - 1)];
    let (a1, b1) = ((a + 1).min(ys.len() - 1), (b + 1).min(zs.len() - 1));
    (1.0 - u) * (1.0 - w) * at(a, b) + u * (1.0 - w) * at(a1, b) + (1.0 - u) * w * at(a, b1) + u * w * at(a1, b1)
}

/// Per-step driver moments along a `g_mu` probe, decomposed against the
/// mechanism's one-step operator.
fn probe_driver(m: &dyn PricingMechanism, g_mu: &Generator, step: usize, y: f64, z: f64, depth: usize) -> Result<Vec<DriverMoments>> {
    let l = *m.lattice();
    let (dt, sq) = (l.dt(), l.sqrt_dt());
    let path = ProbePath::new(g_mu, &l, step, central_node(step), y, z, depth)?;
    let mut out = Vec::with_capacity(depth);
    for (lvl, states) in path.levels.iter().take(depth).enumerate() {
        let k = step + lvl;
        let t = l.time(k);
        let (mut s1, mut s2) = (0.0, 0.0);
        for &(node, v) in states {
            let drift = v - g_mu.eval(t, v, z) * dt;
            let (down, up) = (drift - z * sq, drift + z * sq);
            let mut a = 0.0;
            let mut q = m.one_step_quote(k, node, down, up, a)?;
            let gap = v - q;
            if gap < -SUPERMARTINGALE_TOL {
                return Err(Error::DominationViolated {
                    t,
                    y: v,
                    z,
                    increment: gap,
                });
            }
            for _ in 0..ROOT_MAX_ITERS {
                let r = v - q;
                if r.abs() <= ROOT_TOL * v.abs().max(1.0) {
                    break;
                }
                a += r;
                q = m.one_step_quote(k, node, down, up, a)?;
            }
            let d = (v - drift - a) / dt;
            s1 += d;
            s2 += d * d;
        }
        let w = states.len() as f64;
        out.push(DriverMoments {
            t,
            mean: s1 / w,
            mean_sq: s2 / w,
        });
    }
    Ok(out)
}

/// Recovers the driver of `m` on the dyadic times of level `level` at the
/// given `(y, z)` points.
///
/// Each probe starts at the central node of a dyadic time and follows the
/// `g_mu` forward dynamics with `mu` the mechanism's declared constant.
pub fn recover_generator(m: &dyn PricingMechanism, level: u32, points: &[(f64, f64)]) -> Result<RecoveredGenerator> {
    let l = *m.lattice();
    let mu = m
        .declared_mu()
        .ok_or_else(|| Error::InvalidParams("mechanism declares no domination constant".into()))?;
    monotone_condition(mu, &l)?;
    if points.is_empty() {
        return Err(Error::InvalidParams("no sample points".into()));
    }
    let intervals = 1usize
        .checked_shl(level)
        .ok_or_else(|| Error::InvalidParams(format!("level {level} too large")))?;
    let n = l.n_steps();
    if n % intervals != 0 {
        return Err(Error::InvalidParams(format!(
            "{n} lattice steps are not divisible by 2^{level}"
        )));
    }
    let depth = n / intervals;
    if depth > MAX_PROBE_DEPTH {
        return Err(Error::InvalidParams(format!(
            "{depth} steps per dyadic interval exceeds {MAX_PROBE_DEPTH}"
        )));
    }
    let g_mu = make_g_mu(mu)?;
    let per_interval: Vec<(Vec<Vec<DriverMoments>>, f64)> = (0..intervals)
        .into_par_iter()
        .map(|i| {
            let step = i * depth;
            let profiles = points
                .iter()
                .map(|&(y, z)| probe_driver(m, &g_mu, step, y, z, depth))
                .collect::<Result<Vec<_>>>()?;
            let origin = probe_driver(m, &g_mu, step, 0.0, 0.0, 1)?[0].mean;
            Ok((profiles, origin))
        })
        .collect::<Result<_>>()?;

    let times: Vec<f64> = (0..intervals).map(|i| l.time(i * depth)).collect();
    let mut values = Vec::with_capacity(intervals);
    let mut origin_values = Vec::with_capacity(intervals);
    let mut profiles = Vec::with_capacity(intervals);
    let mut ratio = 0.0_f64;
    for (prof, origin) in per_interval {
        let row: Vec<f64> = prof.iter().map(|p| p[0].mean).collect();
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                let dist = (points[a].0 - points[b].0).abs() + (points[a].1 - points[b].1).abs();
                if dist > 1e-12 {
                    ratio = ratio.max((row[a] - row[b]).abs() / dist);
                }
            }
        }
        values.push(row);
        origin_values.push(origin);
        profiles.push(prof);
    }
    Ok(RecoveredGenerator {
        level,
        mu,
        steps_per_interval: depth,
        times,
        points: points.to_vec(),
        values,
        origin_values,
        lipschitz_ratio: ratio,
        profiles,
    })
}

/// The tensor grid `ys x zs` as a point list, `y` varying slowest.
pub fn tensor_grid(ys: &[f64], zs: &[f64]) -> Vec<(f64, f64)> {
    ys.iter().flat_map(|&y| zs.iter().map(move |&z| (y, z))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTheoremReport {
    pub level: u32,
    pub samples: usize,
    pub seed: u64,
    /// Largest node-wise `|E[X] - E^{g_hat}[X]|` over all claims and steps.
    pub max_discrepancy: f64,
    pub lipschitz_ratio: f64,
    pub max_origin_value: f64,
}

/// Recovers `g_hat` on a tensor grid, rebuilds `E^{g_hat}` and compares it
/// with `m` on `samples` random claims with values in `[-claim_scale, claim_scale]`.
pub fn verify_main_theorem(
    m: &dyn PricingMechanism,
    level: u32,
    points: &[(f64, f64)],
    samples: usize,
    claim_scale: f64,
    seed: u64,
) -> Result<MainTheoremReport> {
    let rec = recover_generator(m, level, points)?;
    let g_hat = rec.to_generator()?;
    let l = *m.lattice();
    let n = l.n_steps();
    let rebuilt = as_mechanism(&g_hat, &l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = DividendStream::zero();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = random_claim(&mut rng, n + 1, claim_scale);
        let a = m.price_surface(n, &x, &zero)?;
        let b = rebuilt.price_surface(n, &x, &zero)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok(MainTheoremReport {
        level,
        samples,
        seed,
        max_discrepancy: worst,
        lipschitz_ratio: rec.lipschitz_ratio,
        max_origin_value: rec.max_origin_value(),
    })
}
