use serde::{Deserialize, Serialize};

use crate::bsde::{price_path_dependent, price_per_origin, DividendStream, PricingMechanism};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::lattice::Lattice;

/// Node of step `step` closest to `B = 0`.
pub fn central_node(step: usize) -> usize {
    step / 2
}

/// `(T - t)^{-1} E_{t,T}[zbar (B_T - B_t)]` at the central node of step `t_step`.
pub fn z_probe(m: &dyn PricingMechanism, zbar: f64, t_step: usize, big_t_step: usize) -> Result<f64> {
    if t_step >= big_t_step {
        return Err(Error::BadStepOrder {
            s: t_step,
            t: big_t_step,
        });
    }
    let l = *m.lattice();
    l.check_values(big_t_step, &vec![0.0; big_t_step + 1])?;
    let origin = central_node(t_step);
    let claim: Vec<f64> = (0..=big_t_step)
        .map(|k| zbar * (l.brownian(big_t_step, k) - l.brownian(t_step, origin)))
        .collect();
    let v = m.price(t_step, big_t_step, &claim, &DividendStream::zero())?;
    Ok(v[origin] / (l.time(big_t_step) - l.time(t_step)))
}

/// `z_probe` evaluated at every node of step `t_step`, each with its own
/// increment claim.
pub fn z_probe_surface(m: &dyn PricingMechanism, zbar: f64, t_step: usize, big_t_step: usize) -> Result<Vec<f64>> {
    let l = *m.lattice();
    let horizon = l.time(big_t_step) - l.time(t_step);
    let v = price_per_origin(
        m,
        t_step,
        big_t_step,
        |j| {
            (0..=big_t_step)
                .map(|k| zbar * (l.brownian(big_t_step, k) - l.brownian(t_step, j)))
                .collect()
        },
        &DividendStream::zero(),
    )?;
    Ok(v.into_iter().map(|x| x / horizon).collect())
}

/// Euler path of `dX = b(X) dt + sigma(X) dB` from `x` along `moves`.
pub fn euler_path(x: f64, b: &dyn Fn(f64) -> f64, sigma: &dyn Fn(f64) -> f64, moves: &[bool], lattice: &Lattice) -> Vec<f64> {
    let (dt, sq) = (lattice.dt(), lattice.sqrt_dt());
    let mut out = Vec::with_capacity(moves.len() + 1);
    let mut v = x;
    out.push(v);
    for &up in moves {
        let db = if up { sq } else { -sq };
        v += b(v) * dt + sigma(v) * db;
        out.push(v);
    }
    out
}

/// Inputs of an infinitesimal probe started at the central node of `t_step`.
#[derive(Clone, Copy)]
pub struct ProbeSpec<'a> {
    pub x: f64,
    pub p: f64,
    pub y: f64,
    pub b: &'a dyn Fn(f64) -> f64,
    pub sigma: &'a dyn Fn(f64) -> f64,
    pub t_step: usize,
}

/// `(E_{t,t+eps}[y + p (X_{t+eps} - x)] - y) / eps` with `eps = eps_steps dt`.
pub fn infinitesimal_probe(m: &dyn PricingMechanism, spec: ProbeSpec<'_>, eps_steps: usize) -> Result<f64> {
    if eps_steps == 0 {
        return Err(Error::InvalidParams("eps_steps must be at least 1".into()));
    }
    let l = *m.lattice();
    let payoff = |moves: &[bool]| {
        let end = *euler_path(spec.x, spec.b, spec.sigma, moves, &l).last().unwrap();
        spec.y + spec.p * (end - spec.x)
    };
    let v = price_path_dependent(m, spec.t_step, central_node(spec.t_step), eps_steps, &payoff)?;
    Ok((v - spec.y) / (eps_steps as f64 * l.dt()))
}

/// Second-order Richardson extrapolation to `h -> 0` from values at `h`, `2h`, `4h`.
pub fn extrapolate_to_zero(q1: f64, q2: f64, q4: f64) -> f64 {
    let r1 = 2.0 * q1 - q2;
    let r2 = 2.0 * q2 - q4;
    (4.0 * r1 - r2) / 3.0
}

/// Forward probe `Y_{k+1} = Y_k - g(t_k, Y_k, z) dt + z dB` started at
/// `(step, node)` with value `y`, expanded over every path of `depth` moves.
///
/// `levels[l]` holds `(node, value)` for the `2^l` paths after `l` moves,
/// ordered by path bits with the first move most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePath {
    pub step: usize,
    pub y: f64,
    pub z: f64,
    pub levels: Vec<Vec<(usize, f64)>>,
}

impl ProbePath {
    pub fn new(g: &Generator, lattice: &Lattice, step: usize, node: usize, y: f64, z: f64, depth: usize) -> Result<Self> {
        lattice.check_values(step + depth, &vec![0.0; step + depth + 1])?;
        let (dt, sq) = (lattice.dt(), lattice.sqrt_dt());
        let mut levels = vec![vec![(node, y)]];
        for l in 0..depth {
            let t = lattice.time(step + l);
            let next = levels[l]
                .iter()
                .flat_map(|&(j, v)| {
                    let drift = v - g.eval(t, v, z) * dt;
                    [(j, drift - z * sq), (j + 1, drift + z * sq)]
                })
                .collect();
            levels.push(next);
        }
        Ok(ProbePath { step, y, z, levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Values along the path with moves `path`.
    pub fn along(&self, path: &[bool]) -> Vec<f64> {
        let mut idx = 0;
        let mut out = vec![self.levels[0][0].1];
        for (l, &up) in path.iter().enumerate() {
            idx = 2 * idx + up as usize;
            out.push(self.levels[l + 1][idx].1);
        }
        out
    }
}
