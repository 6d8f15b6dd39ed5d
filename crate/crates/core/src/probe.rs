//! Empirical tail probe for the log-ratio of a product proposal.
//!
//! For a leaf block with couplings `J` the rejection log ratio between two
//! proposal draws is `D = ZᵀAZ − XᵀAX` with `A = J/2`. A cutoff
//! `c = ½ln(2/ε)` keeps the rejection bias below `ε` as soon as
//! `Pr(|D| ≥ t) ≤ 2e^{−2t}` for all `t`. This module measures that tail for
//! uniform `X, Z` and random `A` of prescribed Frobenius norm, and reports the
//! largest norm up to which the inequality held on the whole grid. Since
//! `‖J‖_F = 2‖A‖_F`, the leaf threshold it suggests is twice that norm.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Frobenius norms of `A`.
    pub frob_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub trials: u64,
    pub dim: usize,
    pub seed: u64,
}

impl ProbeConfig {
    pub fn default_with(trials: u64, seed: u64) -> Self {
        Self {
            frob_grid: (0..=20).map(|k| k as f64 * 0.05).collect(),
            t_grid: (1..=60).map(|k| k as f64 * 0.05).collect(),
            trials,
            dim: 32,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub frob: f64,
    pub t: f64,
    pub tail_hat: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<TailRow>,
    /// Largest grid norm such that it and every smaller grid norm passed at
    /// every `t`; `None` if the smallest norm already failed.
    pub max_passing_frob: Option<f64>,
}

impl ProbeReport {
    /// Leaf threshold on `‖J_RR‖_F` implied by [`Self::max_passing_frob`].
    pub fn recommended_c3(&self) -> Option<f64> {
        self.max_passing_frob.map(|f| 2.0 * f)
    }
}

/// Symmetric zero-diagonal Gaussian matrix rescaled to Frobenius norm `frob`.
pub fn random_form(dim: usize, frob: f64, rng: &RngStream) -> Vec<f64> {
    let mut g = rng.generator();
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        for k in i + 1..dim {
            let v: f64 = StandardNormal.sample(&mut g);
            a[i * dim + k] = v;
            a[k * dim + i] = v;
        }
    }
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if norm > 0.0 { frob / norm } else { 0.0 };
    a.iter_mut().for_each(|v| *v *= scale);
    a
}

fn quadratic(a: &[f64], dim: usize, x: &[f64]) -> f64 {
    (0..dim)
        .map(|i| {
            x[i] * a[i * dim..(i + 1) * dim]
                .iter()
                .zip(x)
                .map(|(p, q)| p * q)
                .sum::<f64>()
        })
        .sum()
}

/// Draws of `|ZᵀAZ − XᵀAX|`, sorted ascending.
pub fn sample_abs_differences(a: &[f64], dim: usize, trials: u64, rng: &RngStream) -> Vec<f64> {
    let mut g = rng.generator();
    let mut x = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut out: Vec<f64> = (0..trials)
        .map(|_| {
            fill_signs(&mut g, &mut x);
            fill_signs(&mut g, &mut z);
            (quadratic(a, dim, &z) - quadratic(a, dim, &x)).abs()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn fill_signs<R: RngCore>(g: &mut R, out: &mut [f64]) {
    for chunk in out.chunks_mut(64) {
        let bits = g.next_u64();
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

/// Fraction of sorted values that are `≥ t`.
pub fn tail_fraction(sorted: &[f64], t: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < t);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// `Pr(|ZᵀAZ − XᵀAX| ≥ t)` by enumerating all `4^dim` pairs.
pub fn exact_tail(a: &[f64], dim: usize, t: f64) -> Result<f64> {
    if dim > 8 {
        return Err(Error::TooLarge {
            what: "enumerated tail",
            size: dim,
            limit: 8,
        });
    }
    let states = 1usize << dim;
    let q: Vec<f64> = (0..states)
        .map(|b| {
            let x: Vec<f64> = (0..dim)
                .map(|i| if b >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            quadratic(a, dim, &x)
        })
        .collect();
    let hits = q
        .iter()
        .flat_map(|&u| q.iter().map(move |&v| (u - v).abs()))
        .filter(|&d| d >= t)
        .count();
    Ok(hits as f64 / (states * states) as f64)
}

pub fn hanson_wright_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    if cfg.dim < 2 {
        return Err(Error::InvalidConfig("probe dimension must be ≥ 2".into()));
    }
    if let Some(bad) = cfg
        .frob_grid
        .iter()
        .chain(&cfg.t_grid)
        .find(|v| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::InvalidConfig(format!(
            "grid values must be finite and ≥ 0, got {bad}"
        )));
    }
    let mut grid = cfg.frob_grid.clone();
    grid.sort_by(f64::total_cmp);
    let root = RngStream::new(cfg.seed);
    let per_frob: Vec<Vec<TailRow>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &frob)| {
            let stream = root.split(k as u64);
            let a = random_form(cfg.dim, frob, &stream.split(0));
            let d = sample_abs_differences(&a, cfg.dim, cfg.trials, &stream.split(1));
            cfg.t_grid
                .iter()
                .map(|&t| {
                    let tail_hat = tail_fraction(&d, t);
                    let bound = 2.0 * (-2.0 * t).exp();
                    TailRow {
                        frob,
                        t,
                        tail_hat,
                        bound,
                        pass: tail_hat <= bound,
                    }
                })
                .collect()
        })
        .collect();
    let mut max_passing_frob = None;
    for rows in &per_frob {
        if rows.iter().all(|r| r.pass) {
            max_passing_frob = rows.first().map(|r| r.frob);
        } else {
            break;
        }
    }
    Ok(ProbeReport {
        rows: per_frob.into_iter().flatten().collect(),
        max_passing_frob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_norm_has_zero_tail() {
        let mut cfg = ProbeConfig::default_with(2000, 1);
        cfg.frob_grid = vec![0.0];
        let r = hanson_wright_probe(&cfg).unwrap();
        assert!(r.rows.iter().all(|row| row.tail_hat == 0.0 && row.pass));
        assert_eq!(r.max_passing_frob, Some(0.0));
    }

    #[test]
    fn block_has_requested_norm() {
        let a = random_form(10, 0.7, &RngStream::new(3));
        let f = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((f - 0.7).abs() < 1e-12);
        for i in 0..10 {
            assert_eq!(a[i * 10 + i], 0.0);
            for k in 0..10 {
                assert_eq!(a[i * 10 + k], a[k * 10 + i]);
            }
        }
    }

    /// Two sites with off-diagonal `a`: `XᵀAX = 2a·x₀x₁`, so `|D| ∈ {0, 4a}`
    /// with probability ½ each over the 16 outcomes.
    #[test]
    fn two_site_tail_matches_enumeration() {
        let a = 0.2;
        let form = vec![0.0, a, a, 0.0];
        assert_eq!(exact_tail(&form, 2, 0.5).unwrap(), 0.5);
        assert_eq!(exact_tail(&form, 2, 0.9).unwrap(), 0.0);
        let trials = 100_000u64;
        let d = sample_abs_differences(&form, 2, trials, &RngStream::new(8));
        for t in [0.1, 0.5, 0.8, 0.81] {
            let p = exact_tail(&form, 2, t).unwrap();
            let hat = tail_fraction(&d, t);
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (hat - p).abs() <= 3.0 * sigma + 1e-12,
                "t={t}: {hat} vs {p}"
            );
        }
    }

    #[test]
    fn default_grid_recommends_a_usable_threshold() {
        let r = hanson_wright_probe(&ProbeConfig::default_with(20_000, 5)).unwrap();
        let top = r.max_passing_frob.unwrap();
        assert!(top > 0.0);
        assert!(r.recommended_c3().unwrap() >= 0.25, "{top}");
        assert!(r
            .rows
            .iter()
            .filter(|row| row.frob <= top)
            .all(|row| row.pass));
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = ProbeConfig::default_with(3000, 2);
        assert_eq!(
            hanson_wright_probe(&cfg).unwrap(),
            hanson_wright_probe(&cfg).unwrap()
        );
    }

    #[test]
    fn rejects_bad_grids() {
        let mut cfg = ProbeConfig::default_with(10, 0);
        cfg.frob_grid = vec![-1.0];
        assert!(hanson_wright_probe(&cfg).is_err());
        cfg = ProbeConfig::default_with(0, 0);
        assert!(hanson_wright_probe(&cfg).is_err());
    }
}
