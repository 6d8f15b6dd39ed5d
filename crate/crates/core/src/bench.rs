//! Wall-clock comparison of the recursive sampler against plain Glauber
//! dynamics on Sherrington–Kirkpatrick instances.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glauber::{run_chain, Glauber};
use crate::model::{sk_model, ProductDistribution, SpinVector};
use crate::parallel::{default_config, Sampler, SamplerConfig};
use crate::rng::{sample_product, RngStream};

/// Largest instance the harness will build; couplings are stored densely.
pub const MAX_BENCH_SITES: usize = 20_000;
pub const MAX_BENCH_THREADS: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub beta: f64,
    pub eps: f64,
    pub threads_list: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Sampler constants; `None` derives the defaults from the measured `‖J‖`.
    pub sampler: Option<SamplerConfig>,
    pub run_baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: usize,
    pub beta: f64,
    pub eps: f64,
    pub threads: usize,
    pub seed: u64,
    pub wall_time_parallel: f64,
    /// Shared by all rows of one seed; zero when the baseline was skipped.
    pub wall_time_glauber_baseline: f64,
    /// As recorded by the sampler.
    pub outer_steps: u64,
    /// `⌊C₂ ln(n/ε)·n/s⌋` recomputed from the configuration.
    pub expected_outer_steps: u64,
    pub subset_size: usize,
    pub frobenius_norm: f64,
    pub operator_norm: f64,
    pub baseline_steps: u64,
    pub node_count: u64,
    pub total_rejection_tries: u64,
    /// Hash of the sampled configuration, for comparing thread counts.
    pub sample_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub n: usize,
    pub threads: usize,
    pub runs: usize,
    pub median_wall_time_parallel: f64,
    pub median_wall_time_glauber_baseline: f64,
    /// Median single-thread time over median time at this thread count.
    pub speedup_vs_one_thread: Option<f64>,
}

/// `⌈n ln n/(1 − ‖J‖)⌉·8`.
pub fn baseline_steps(n: usize, operator_norm: f64) -> Result<u64> {
    if !(operator_norm < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "Glauber baseline needs ‖J‖ < 1, got {operator_norm}"
        )));
    }
    let n = n as f64;
    Ok((n * n.ln() / (1.0 - operator_norm)).ceil() as u64 * 8)
}

pub fn sample_digest(x: &SpinVector) -> String {
    let mut h = DefaultHasher::new();
    x.values().hash(&mut h);
    format!("{:016x}", h.finish())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "bench needs n ≥ 2, got {}",
                self.n
            )));
        }
        if self.n > MAX_BENCH_SITES {
            return Err(Error::TooLarge {
                what: "bench instance",
                size: self.n,
                limit: MAX_BENCH_SITES,
            });
        }
        if self.threads_list.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "threads list and seeds must be non-empty".into(),
            ));
        }
        if let Some(&t) = self
            .threads_list
            .iter()
            .find(|&&t| t == 0 || t > MAX_BENCH_THREADS)
        {
            return Err(Error::InvalidConfig(format!(
                "thread count {t} outside 1..={MAX_BENCH_THREADS}"
            )));
        }
        Ok(())
    }
}

fn config_for(cfg: &BenchConfig, op_norm: f64) -> Result<SamplerConfig> {
    match &cfg.sampler {
        Some(s) => {
            s.validate()?;
            Ok(s.clone())
        }
        None => default_config(1.0 - op_norm, cfg.eps),
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchReport>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let model = sk_model(cfg.n, cfg.beta, seed)?;
        let op_norm = model.operator_norm(1e-9)?;
        let frob = model.frobenius();
        let base = config_for(cfg, op_norm)?;

        let (base_steps, base_time) = if cfg.run_baseline {
            let steps = baseline_steps(cfg.n, op_norm)?;
            let stream = RngStream::new(seed).split(0xBA5E);
            let x0 = sample_product(
                &stream.split(0),
                &ProductDistribution::from_field(vec![0.0; cfg.n])?,
            );
            let start = Instant::now();
            run_chain(&model, &x0, &Glauber, steps, &stream.split(1))?;
            (steps, start.elapsed().as_secs_f64())
        } else {
            (0, 0.0)
        };

        for &threads in &cfg.threads_list {
            let sampler = Sampler::new(SamplerConfig {
                threads,
                ..base.clone()
            })?;
            let start = Instant::now();
            let (x, tel) = sampler.sample_model(&model, &RngStream::new(seed))?;
            let elapsed = start.elapsed().as_secs_f64();
            let (s, expected) = if frob <= base.c3 {
                (0, 0)
            } else {
                let s = base.subset_size(cfg.n, cfg.n, frob);
                (s, base.outer_steps(cfg.n, cfg.n, s))
            };
            rows.push(BenchReport {
                n: cfg.n,
                beta: cfg.beta,
                eps: base.eps,
                threads,
                seed,
                wall_time_parallel: elapsed,
                wall_time_glauber_baseline: base_time,
                outer_steps: tel.root_outer_steps,
                expected_outer_steps: expected,
                subset_size: s,
                frobenius_norm: frob,
                operator_norm: op_norm,
                baseline_steps: base_steps,
                node_count: tel.node_count,
                total_rejection_tries: tel.total_rejection_tries,
                sample_digest: sample_digest(&x),
            });
        }
    }
    Ok(rows)
}

/// Medians per `(n, threads)`, in order of first appearance.
pub fn summarize(rows: &[BenchReport]) -> Vec<BenchSummary> {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.n, r.threads)) {
            keys.push((r.n, r.threads));
        }
    }
    let med = |n: usize, t: usize, f: fn(&BenchReport) -> f64| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n && r.threads == t)
            .map(f)
            .collect();
        (median(&v), v.len())
    };
    keys.iter()
        .map(|&(n, t)| {
            let (par, runs) = med(n, t, |r| r.wall_time_parallel);
            let (base, _) = med(n, t, |r| r.wall_time_glauber_baseline);
            let one = rows.iter().any(|r| r.n == n && r.threads == 1);
            BenchSummary {
                n,
                threads: t,
                runs,
                median_wall_time_parallel: par,
                median_wall_time_glauber_baseline: base,
                speedup_vs_one_thread: one.then(|| med(n, 1, |r| r.wall_time_parallel).0 / par),
            }
        })
        .collect()
}
