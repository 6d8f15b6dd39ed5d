//! Recursive parallel sampler.
//!
//! A call on coordinates `R` with field `h_eff` targets the Ising model
//! `μ_{J_RR, h_eff}`. When `‖J_RR‖_F ≤ c₃` the product law `∝ e^{⟨h_eff,x⟩}`
//! is close enough to serve as a rejection proposal and the call is a leaf.
//! Otherwise it runs `T` steps of `s`-block Glauber dynamics from a product
//! start, solving each block conditional by recursion. With
//! `s ≈ c₁m/(ln(n/ε)‖J_RR‖_F)` the blocks are small enough that most children
//! are leaves, and `T ∝ m/s` steps suffice.
//!
//! # Reproducibility
//!
//! Randomness is drawn from a spawn tree of [`RngStream`]s: a node at stream
//! `σ` draws its start from `σ/0`; outer step `t` draws its block from
//! `σ/t/0` and hands `σ/t/1` to the child. Leaves run the rejection loop on
//! `σ` itself. Floating-point work is grouped into batches whose size depends
//! only on `(m, s)`, so output is identical for every thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, ProductDistribution, SpinVector, SubsetIndex};
use crate::rejection::{default_max_tries, rejection_loop};
use crate::rng::{fisher_yates_members, sample_product, RngStream};
use crate::SCHEMA_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub c1: f64,
    pub c3: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    pub eps: f64,
    pub threads: usize,
    pub max_depth: usize,
    /// Per-leaf cap on rejection attempts; `None` means [`default_max_tries`].
    pub max_tries: Option<u64>,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c1", self.c1),
            ("c3", self.c3),
            ("C2", self.c2),
            ("C4", self.c4),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a positive finite number, got {v}"
                )));
            }
        }
        if self.c1 > self.c3 / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "c1 = {} exceeds c3/2 = {}",
                self.c1,
                self.c3 / 2.0
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "eps must lie in (0, 1/2), got {}",
                self.eps
            )));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be ≥ 1".into()));
        }
        if self.max_tries == Some(0) {
            return Err(Error::InvalidConfig("max_tries must be ≥ 1".into()));
        }
        Ok(())
    }

    /// `ln(n/ε)` for a root problem of size `n`.
    pub fn log_factor(&self, n: usize) -> f64 {
        (n as f64 / self.eps).ln()
    }

    /// Block size `⌈c₁m/(ln(n/ε)·frob)⌉` of an internal node.
    pub fn subset_size(&self, n: usize, m: usize, frob: f64) -> usize {
        (self.c1 * m as f64 / (self.log_factor(n) * frob)).ceil() as usize
    }

    /// Outer step count `⌊C₂ ln(n/ε)·m/s⌋`.
    pub fn outer_steps(&self, n: usize, m: usize, s: usize) -> u64 {
        (self.c2 * self.log_factor(n) * m as f64 / s as f64).floor() as u64
    }

    /// Leaf rejection cutoff `C₄ ln(n/ε)`, clamped below at 1.
    pub fn cutoff(&self, n: usize) -> f64 {
        (self.c4 * self.log_factor(n)).max(1.0)
    }
}

/// Defaults for models with `‖J‖ ≤ 1 − norm_bound_c`.
pub fn default_config(norm_bound_c: f64, eps: f64) -> Result<SamplerConfig> {
    if !(norm_bound_c > 0.0 && norm_bound_c <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "norm bound c must lie in (0, 1], got {norm_bound_c}"
        )));
    }
    let cfg = SamplerConfig {
        c1: 0.125,
        c3: 0.25,
        c2: (8.0 / norm_bound_c).min(64.0),
        c4: 4.0,
        eps,
        threads: 1,
        max_depth: 64,
        max_tries: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Recursion-tree statistics of one run. Per-level vectors are indexed by
/// depth (root = 0). [`RunTelemetry::merge`] is associative and commutative.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTelemetry {
    pub schema_version: u32,
    pub seed: u64,
    pub node_count: u64,
    pub max_depth_seen: usize,
    pub leaf_count: u64,
    pub total_rejection_tries: u64,
    pub wall_time_s: f64,
    /// Sum of `‖J_RR‖_F` over the nodes at each depth.
    pub per_level_subset_frobenius: Vec<f64>,
    pub per_level_nodes: Vec<u64>,
    pub per_level_internal_nodes: Vec<u64>,
    /// Outer steps and block size of the root; zero when the root is a leaf.
    pub root_outer_steps: u64,
    pub root_subset_size: usize,
}

impl RunTelemetry {
    fn empty(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            ..Default::default()
        }
    }

    fn record_node(&mut self, depth: usize, frob: f64, internal: bool) {
        if self.per_level_nodes.len() <= depth {
            self.per_level_nodes.resize(depth + 1, 0);
            self.per_level_internal_nodes.resize(depth + 1, 0);
            self.per_level_subset_frobenius.resize(depth + 1, 0.0);
        }
        self.node_count += 1;
        self.max_depth_seen = self.max_depth_seen.max(depth);
        self.per_level_nodes[depth] += 1;
        self.per_level_subset_frobenius[depth] += frob;
        if internal {
            self.per_level_internal_nodes[depth] += 1;
        } else {
            self.leaf_count += 1;
        }
    }

    /// Combine the statistics of two disjoint parts of a recursion tree (or of
    /// two runs). Wall time and root fields take the maximum.
    pub fn merge(&mut self, other: &RunTelemetry) {
        fn add<T: Copy + std::ops::AddAssign + Default>(a: &mut Vec<T>, b: &[T]) {
            if a.len() < b.len() {
                a.resize(b.len(), T::default());
            }
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.schema_version = self.schema_version.max(other.schema_version);
        self.seed = self.seed.max(other.seed);
        self.node_count += other.node_count;
        self.max_depth_seen = self.max_depth_seen.max(other.max_depth_seen);
        self.leaf_count += other.leaf_count;
        self.total_rejection_tries += other.total_rejection_tries;
        self.wall_time_s = self.wall_time_s.max(other.wall_time_s);
        add(
            &mut self.per_level_subset_frobenius,
            &other.per_level_subset_frobenius,
        );
        add(&mut self.per_level_nodes, &other.per_level_nodes);
        add(
            &mut self.per_level_internal_nodes,
            &other.per_level_internal_nodes,
        );
        self.root_outer_steps = self.root_outer_steps.max(other.root_outer_steps);
        self.root_subset_size = self.root_subset_size.max(other.root_subset_size);
    }

    pub fn internal_count(&self) -> u64 {
        self.node_count - self.leaf_count
    }

    /// Internal nodes at depth `d + 1` per internal node at depth `d`.
    pub fn internal_children_per_internal_node(&self) -> Vec<f64> {
        self.per_level_internal_nodes
            .windows(2)
            .map(|w| {
                if w[0] == 0 {
                    0.0
                } else {
                    w[1] as f64 / w[0] as f64
                }
            })
            .collect()
    }
}

/// Hook called once per recursive call, before the child runs.
pub trait RecursionObserver: Send {
    /// `parent` and `child` are global coordinate lists; `y` is the parent's
    /// current state in `parent` order; `child_field` the field handed down.
    fn on_child(
        &mut self,
        depth: usize,
        parent: &[usize],
        parent_field: &[f64],
        y: &[f64],
        child: &[usize],
        child_field: &[f64],
    );
}

struct NoObserver;

impl RecursionObserver for NoObserver {
    fn on_child(&mut self, _: usize, _: &[usize], _: &[f64], _: &[f64], _: &[usize], _: &[f64]) {}
}

/// Block draws per batch of precomputed products. Depends on `(m, s)` only.
fn batch_len(m: usize, s: usize) -> usize {
    (m / (8 * s)).clamp(1, 256)
}

/// Sampler bound to a configuration and a worker pool of `cfg.threads`.
pub struct Sampler {
    cfg: SamplerConfig,
    pool: rayon::ThreadPool,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
        Ok(Self { cfg, pool })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Run `f` on this sampler's pool. Batches of independent runs should be
    /// driven from here: sampling calls made inside the pool execute inline,
    /// while calls from a foreign pool block and nest.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Sample all coordinates of `model` with its own field.
    pub fn sample_model(
        &self,
        model: &IsingModel,
        rng: &RngStream,
    ) -> Result<(SpinVector, RunTelemetry)> {
        let r = SubsetIndex::full(model.n())?;
        self.sample(model, &r, model.field(), rng)
    }

    pub fn sample(
        &self,
        model: &IsingModel,
        r: &SubsetIndex,
        h_eff: &[f64],
        rng: &RngStream,
    ) -> Result<(SpinVector, RunTelemetry)> {
        self.sample_observed(model, r, h_eff, rng, &mut NoObserver)
    }

    pub fn sample_observed<O: RecursionObserver>(
        &self,
        model: &IsingModel,
        r: &SubsetIndex,
        h_eff: &[f64],
        rng: &RngStream,
        observer: &mut O,
    ) -> Result<(SpinVector, RunTelemetry)> {
        if r.parent_size() != model.n() {
            return Err(Error::DimensionMismatch {
                what: "coordinate set parent size",
                expected: model.n(),
                found: r.parent_size(),
            });
        }
        if h_eff.len() != r.len() {
            return Err(Error::DimensionMismatch {
                what: "effective field",
                expected: r.len(),
                found: h_eff.len(),
            });
        }
        if let Some(k) = h_eff.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "effective field",
                index: k,
            });
        }
        let start = Instant::now();
        let mut tel = RunTelemetry::empty(rng.seed());
        let run = Run {
            model,
            cfg: &self.cfg,
            n: model.n(),
        };
        let y = self
            .pool
            .install(|| run.node(r.members(), h_eff, rng, 0, &mut tel, observer))?;
        tel.wall_time_s = start.elapsed().as_secs_f64();
        Ok((SpinVector::from_f64(r.members().to_vec(), &y), tel))
    }
}

/// One-shot convenience wrapper; builds a [`Sampler`] for the call.
pub fn parallel_ising_sample(
    model: &IsingModel,
    r: &SubsetIndex,
    h_eff: &[f64],
    cfg: &SamplerConfig,
    rng: &RngStream,
) -> Result<(SpinVector, RunTelemetry)> {
    Sampler::new(cfg.clone())?.sample(model, r, h_eff, rng)
}

struct Run<'a> {
    model: &'a IsingModel,
    cfg: &'a SamplerConfig,
    n: usize,
}

impl Run<'_> {
    fn node<O: RecursionObserver>(
        &self,
        members: &[usize],
        h_eff: &[f64],
        rng: &RngStream,
        depth: usize,
        tel: &mut RunTelemetry,
        observer: &mut O,
    ) -> Result<Vec<f64>> {
        if depth > self.cfg.max_depth {
            return Err(Error::MaxDepthExceeded {
                depth,
                cap: self.cfg.max_depth,
            });
        }
        let frob = self.model.frobenius_on(members);
        if frob <= self.cfg.c3 {
            tel.record_node(depth, frob, false);
            return self.leaf(members, h_eff, rng, tel);
        }
        tel.record_node(depth, frob, true);
        let m = members.len();
        let s = self.cfg.subset_size(self.n, m, frob);
        if s == 0 || s > m {
            return Err(Error::InvalidSubset { m, s });
        }
        let steps = self.cfg.outer_steps(self.n, m, s);
        if depth == 0 {
            tel.root_outer_steps = steps;
            tel.root_subset_size = s;
        }

        let q = ProductDistribution::new(members.to_vec(), h_eff.to_vec())?;
        let mut y: Vec<f64> = sample_product(&rng.split(0), &q).to_f64();

        let batch = batch_len(m, s) as u64;
        let mut t = 0u64;
        while t < steps {
            let len = batch.min(steps - t) as usize;
            let blocks: Vec<Vec<usize>> = (0..len)
                .map(|b| {
                    fisher_yates_members(&mut rng.split(t + b as u64).split(0).generator(), m, s)
                })
                .collect();
            // J_{S_b, R} y for every block, against the state at batch start
            let base: Vec<f64> = blocks
                .par_iter()
                .flat_map_iter(|blk| {
                    blk.iter()
                        .map(|&i| self.model.block_dot(members[i], members, &y))
                })
                .collect();
            // positions changed since batch start, with y_now − y_start
            let mut dirty: Vec<(usize, f64)> = Vec::new();
            for (b, blk) in blocks.iter().enumerate() {
                let child_members: Vec<usize> = blk.iter().map(|&i| members[i]).collect();
                let theta: Vec<f64> = blk
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| {
                        let gi = members[i];
                        let mut v = base[b * s + a];
                        for &(j, d) in &dirty {
                            v += self.model.coupling(gi, members[j]) * d;
                        }
                        for &j in blk {
                            v -= self.model.coupling(gi, members[j]) * y[j];
                        }
                        v + h_eff[i]
                    })
                    .collect();
                observer.on_child(depth, members, h_eff, &y, &child_members, &theta);
                let child_rng = rng.split(t + b as u64).split(1);
                let out =
                    self.node(&child_members, &theta, &child_rng, depth + 1, tel, observer)?;
                for (&i, &v) in blk.iter().zip(&out) {
                    if v != y[i] {
                        dirty.push((i, v - y[i]));
                        y[i] = v;
                    }
                }
            }
            t += len as u64;
        }
        Ok(y)
    }

    fn leaf(
        &self,
        members: &[usize],
        h_eff: &[f64],
        rng: &RngStream,
        tel: &mut RunTelemetry,
    ) -> Result<Vec<f64>> {
        let q = ProductDistribution::new(members.to_vec(), h_eff.to_vec())?;
        let c = self.cfg.cutoff(self.n);
        let max_tries = self
            .cfg
            .max_tries
            .unwrap_or_else(|| default_max_tries(c, self.n, self.cfg.eps));
        let mut x = vec![0.0; members.len()];
        let mut z = vec![0.0; members.len()];
        let g = |v: &[f64]| self.model.quadratic_on(members, v);
        let (tries, _) = rejection_loop(
            &q,
            &g,
            c.ln(),
            &mut rng.generator(),
            max_tries,
            &mut x,
            &mut z,
        )?;
        tel.total_rejection_tries += tries;
        Ok(x)
    }
}
