//! Property suites run against the exact oracle.
//!
//! Each check reports the worst value it saw next to the limit it was held
//! to, so a table of results doubles as a record of the slack.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    ars_exact_law, block_distribution, block_operator_norm, chi2_contraction_coefficient,
    conditional_distribution, divergences, down_operator, down_up_operator, du_chi2_product_bound,
    empirical_tv_from_counts, enumerate_distribution, enumerate_log_ratio, enumerate_product,
    glauber_transition_matrix, k_glauber_transition_matrix, kl_contraction_probe, mono_bound,
    spectral_gap, up_operator, EmpiricalTv, KSpeedupSweep, Ladder,
};
use crate::model::{gaussian_model, IsingModel, ProductDistribution, SpinVector};
use crate::parallel::{default_config, RunTelemetry, Sampler, SamplerConfig};
use crate::rejection::rejection_diagnostics;
use crate::rng::{sample_subset, RngStream};

/// Largest `n` for which the homogenized ladder fits the level-size cap.
pub const MAX_LADDER_SITES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Operators,
    Spectra,
    Rejection,
    End2End,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operators" => Ok(Suite::Operators),
            "spectra" => Ok(Suite::Spectra),
            "rejection" => Ok(Suite::Rejection),
            "end2end" => Ok(Suite::End2End),
            "all" => Ok(Suite::All),
            other => Err(Error::UnknownSuite(other.to_string())),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::Spectra => "spectra",
            Suite::Rejection => "rejection",
            Suite::End2End => "end2end",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    /// Worst observed value.
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ limit`.
    pub fn at_most(
        suite: &str,
        name: impl Into<String>,
        value: f64,
        limit: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            suite: suite.to_string(),
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(
        suite: &str,
        name: impl Into<String>,
        value: f64,
        limit: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            passed: value >= limit,
            ..Self::at_most(suite, name, value, limit, detail)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let w = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<10} {:<w$} {:>14} {:>14}  result  detail\n",
            "suite", "check", "value", "limit"
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<10} {:<w$} {:>14.6e} {:>14.6e}  {:<6}  {}",
                c.suite,
                c.name,
                c.value,
                c.limit,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub n_max: usize,
    /// Sampler invocations per end-to-end check.
    pub runs: u64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_max: 8,
            runs: 20_000,
            seed: 0,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.n_max < 2 {
        return Err(Error::InvalidConfig(format!(
            "n-max must be ≥ 2, got {}",
            opts.n_max
        )));
    }
    let mut checks = Vec::new();
    let suites: &[Suite] = match suite {
        Suite::All => &[
            Suite::Operators,
            Suite::Spectra,
            Suite::Rejection,
            Suite::End2End,
        ],
        _ => std::slice::from_ref(&suite),
    };
    for &s in suites {
        checks.extend(match s {
            Suite::Operators => operators_suite(opts)?,
            Suite::Spectra => spectra_suite(opts)?,
            Suite::Rejection => rejection_suite(opts)?,
            Suite::End2End => end_to_end_suite(opts)?,
            Suite::All => unreachable!(),
        });
    }
    Ok(VerifyReport { checks })
}

/// `count` models with `n` cycling through `n_min..=n_max`, `‖J‖` uniform in
/// `[0.05, max_norm]` and Gaussian fields of scale 0.5.
pub fn random_models(
    count: usize,
    n_min: usize,
    n_max: usize,
    max_norm: f64,
    seed: u64,
) -> Result<Vec<IsingModel>> {
    if n_min < 1 || n_min > n_max {
        return Err(Error::InvalidConfig(format!(
            "empty size range {n_min}..={n_max}"
        )));
    }
    let mut g = RngStream::new(seed).split(0x30D).generator();
    (0..count)
        .map(|k| {
            let n = n_min + k % (n_max - n_min + 1);
            let norm = g.random_range(0.05..=max_norm.max(0.05));
            gaussian_model(n, norm, 0.5, seed.wrapping_add(k as u64))
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

const OPS: &str = "operators";

fn operators_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let top = opts.n_max.min(MAX_LADDER_SITES);
    let (mut comp, mut marg, mut adj, mut stoch, mut glauber, mut kglauber, mut rev) =
        (0f64, 0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    let mut pairs = 0usize;
    for n in 2..=top {
        let model = gaussian_model(n, 0.6, 0.4, opts.seed.wrapping_add(n as u64))?;
        let ladder = Ladder::new(&model)?;
        for k in 1..=n {
            let up = ladder.level(k);
            for l in 0..k {
                pairs += 1;
                let lo = ladder.level(l);
                let d = down_operator(up, lo)?;
                let u = up_operator(lo, up)?;
                stoch = stoch.max(d.row_sum_residual()).max(u.row_sum_residual());
                marg = marg.max(max_abs_diff(&d.apply_left(up.measure()), lo.measure()));
                for a in 0..up.len() {
                    for b in 0..lo.len() {
                        adj = adj.max(
                            (up.measure()[a] * d.get(a, b) - lo.measure()[b] * u.get(b, a)).abs(),
                        );
                    }
                }
                if l + 1 < k {
                    let step = down_operator(up, ladder.level(k - 1))?
                        .then(&down_operator(ladder.level(k - 1), lo)?)?;
                    comp = comp.max((step.matrix() - d.matrix()).abs().max());
                }
            }
        }
        let g = glauber_transition_matrix(&model)?;
        let du = down_up_operator(ladder.level(n), ladder.level(n - 1))?;
        glauber = glauber.max((du.matrix() - g.matrix()).abs().max());
        for k in 1..=n {
            let pk = k_glauber_transition_matrix(&model, k)?;
            let dk = down_operator(ladder.level(n), ladder.level(n - k))?
                .then(&up_operator(ladder.level(n - k), ladder.level(n))?)?;
            kglauber = kglauber.max((dk.matrix() - pk.matrix()).abs().max());
            rev = rev
                .max(pk.detailed_balance_residual().unwrap_or(f64::INFINITY))
                .max(pk.stationarity_residual().unwrap_or(f64::INFINITY));
        }
    }
    let scope = format!("n = 2..={top}, {pairs} level pairs");
    Ok(vec![
        Check::at_most(OPS, "down composition", comp, 1e-12, scope.clone()),
        Check::at_most(OPS, "down marginals", marg, 1e-12, scope.clone()),
        Check::at_most(OPS, "down/up adjointness", adj, 1e-12, scope.clone()),
        Check::at_most(OPS, "row sums", stoch, 1e-12, scope),
        Check::at_most(
            OPS,
            "top down-up = Glauber",
            glauber,
            1e-12,
            format!("n = 2..={top}"),
        ),
        Check::at_most(
            OPS,
            "block down-up = k-Glauber",
            kglauber,
            1e-12,
            format!("n = 2..={top}, all k"),
        ),
        Check::at_most(
            OPS,
            "k-Glauber reversible",
            rev,
            1e-12,
            format!("n = 2..={top}, all k"),
        ),
    ])
}

const SPEC: &str = "spectra";

/// Worst `|gap − n/(k(n−k+1))|` over `1 ≤ k ≤ n ≤ n_max` on uniform subsets.
pub fn bl_gap_check(n_max: usize) -> Result<Check> {
    let mut worst = 0f64;
    for n in 1..=n_max {
        let ladder = Ladder::uniform(n)?;
        for k in 1..=n {
            let gap = ladder.down_up_gap(k)?;
            worst = worst.max((gap - crate::exact::bl_gap(n, k)).abs());
        }
    }
    Ok(Check::at_most(
        SPEC,
        "uniform-subset gap formula",
        worst,
        1e-10,
        format!("1 ≤ k ≤ n ≤ {n_max}"),
    ))
}

/// Worst `λ₂(P_k) − (1 − k/(n+1))^{1/(C+1)}` over the models and all `k`.
pub fn k_speedup_check(models: &[IsingModel]) -> Result<Check> {
    let worst = models
        .par_iter()
        .map(|m| -> Result<f64> {
            let sweep = KSpeedupSweep::new(m)?;
            (1..=m.n()).try_fold(f64::NEG_INFINITY, |acc, k| {
                Ok(acc.max(-sweep.check(k)?.slack))
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Check::at_most(
        SPEC,
        "k-Glauber λ₂ bound",
        worst,
        1e-9,
        format!("{} models, all k", models.len()),
    ))
}

/// Worst `mono_bound − κ_m` over the models and all levels.
pub fn mono_check(models: &[IsingModel]) -> Result<Check> {
    let worst = models
        .par_iter()
        .map(|m| -> Result<f64> {
            let ladder = Ladder::new(m)?;
            let n = m.n();
            let kn = ladder.kappa(n)?;
            (1..=n).try_fold(f64::NEG_INFINITY, |acc, lvl| {
                Ok(acc.max(mono_bound(n, lvl, kn) - ladder.kappa(lvl)?))
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Check::at_most(
        SPEC,
        "contraction lower bound",
        worst,
        1e-9,
        format!("{} models, all levels", models.len()),
    ))
}

fn spectra_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = vec![bl_gap_check(opts.n_max.min(10))?];
    let top = opts.n_max.min(MAX_LADDER_SITES);
    let models = random_models(12, 2, top, 0.8, opts.seed)?;
    out.push(k_speedup_check(&models)?);
    out.push(mono_check(&models)?);

    let (mut prod, mut gap_vs_kappa) = (f64::NEG_INFINITY, 0f64);
    for m in &models {
        let n = m.n();
        let ladder = Ladder::new(m)?;
        let kn = ladder.kappa(n)?;
        let c = 1.0 / (n as f64 * kn);
        for k in 1..=n {
            for l in 0..k {
                let s2 = chi2_contraction_coefficient(ladder.level(k), ladder.level(l))?;
                prod = prod.max(s2 - du_chi2_product_bound(n, k, l, c));
            }
        }
        gap_vs_kappa = gap_vs_kappa.max((spectral_gap(&glauber_transition_matrix(m)?)? - kn).abs());
    }
    out.push(Check::at_most(
        SPEC,
        "down χ² product bound",
        prod,
        1e-9,
        format!("{} models, all k > l", models.len()),
    ));
    out.push(Check::at_most(
        SPEC,
        "Glauber gap = top contraction",
        gap_vs_kappa,
        1e-9,
        format!("{} models", models.len()),
    ));
    Ok(out)
}

const REJ: &str = "rejection";
pub const ARS_CUTOFFS: [f64; 5] = [1.0, 1.5, 2.0, 4.0, 10.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArsCheck {
    pub cases: usize,
    /// Worst gap between the attempt-series law and the closed form.
    pub law_error: f64,
    /// Smallest `p̂_accept · 2c`; at least 1 means the floor held.
    pub min_accept_ratio: f64,
    /// Worst `TV(P̂, P) − E[(R−c)₊]/E R`.
    pub tv_excess: f64,
}

/// Random product proposals on up to `d_max` coordinates with `g` a
/// quadratic form of random strength, at every cutoff in [`ARS_CUTOFFS`].
pub fn ars_check(cases: usize, d_max: usize, trials: u64, seed: u64) -> Result<ArsCheck> {
    let root = RngStream::new(seed).split(0xA25);
    let per: Vec<(f64, f64, f64)> = (0..cases)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, f64)> {
            let stream = root.split(k as u64);
            let mut g = stream.split(0).generator();
            let d = g.random_range(1..=d_max.max(1));
            let strength = g.random_range(0.1..3.0);
            let model = gaussian_model(d, strength, 0.0, seed ^ k as u64)?;
            let field: Vec<f64> = (0..d).map(|_| g.random_range(-1.0..1.0)).collect();
            let q = ProductDistribution::from_field(field)?;
            let members: Vec<usize> = (0..d).collect();
            let gfun = |x: &[f64]| model.quadratic_on(&members, x);
            let qv = enumerate_product(&q)?;
            let gv = enumerate_log_ratio(d, gfun)?;
            let (mut law, mut accept, mut tv) = (0f64, f64::INFINITY, f64::NEG_INFINITY);
            for (i, &c) in ARS_CUTOFFS.iter().enumerate() {
                let exact = ars_exact_law(&qv, &gv, c)?;
                law = law.max(max_abs_diff(
                    &exact.output_by_attempts,
                    &exact.output_by_formula,
                ));
                tv = tv.max(exact.tv_output_target - exact.tv_bound);
                let diag = rejection_diagnostics(&q, gfun, c, trials, &stream.split(1 + i as u64))?;
                accept = accept.min(diag.p_accept_hat * 2.0 * c);
            }
            Ok((law, accept, tv))
        })
        .collect::<Result<_>>()?;
    Ok(ArsCheck {
        cases,
        law_error: per.iter().map(|p| p.0).fold(0.0, f64::max),
        min_accept_ratio: per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        tv_excess: per.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProductProposalCheck {
    pub cases: usize,
    /// Worst gap between the conditional law and `q·e^g` normalized.
    pub identity_error: f64,
    /// Worst `KL(P‖Q) − ‖J_SS‖·|S|`.
    pub kl_excess: f64,
}

/// Random `(model, S, x_{S^c})` with `n ≤ n_max`: compares the conditional
/// law with the reweighted product proposal and bounds their KL.
pub fn product_proposal_check(
    cases: usize,
    n_max: usize,
    seed: u64,
) -> Result<ProductProposalCheck> {
    let root = RngStream::new(seed).split(0x9D0);
    let per: Vec<(f64, f64)> = (0..cases)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let stream = root.split(k as u64);
            let mut g = stream.split(0).generator();
            let n = g.random_range(2..=n_max.max(2));
            let norm = g.random_range(0.05..1.5);
            let model = gaussian_model(n, norm, 0.5, seed.wrapping_add(k as u64))?;
            let size = g.random_range(1..=n.min(8));
            let s = sample_subset(&stream.split(1), n, size)?;
            let comp = s.complement();
            let vals: Vec<i8> = comp
                .iter()
                .map(|_| if g.random::<bool>() { 1 } else { -1 })
                .collect();
            let x_comp = SpinVector::new(comp, vals)?;
            let p = conditional_distribution(&model, &s, &x_comp)?;
            let theta = model.conditional_field(&s, &x_comp)?;
            let q = enumerate_product(&ProductDistribution::from_field(theta.clone())?)?;
            let gv = enumerate_log_ratio(size, |x| model.quadratic_on(s.members(), x))?;
            let top = gv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = q
                .iter()
                .zip(&gv)
                .map(|(a, b)| a * (b - top).exp())
                .collect();
            let z: f64 = w.iter().sum();
            let reweighted: Vec<f64> = w.iter().map(|v| v / z).collect();
            let block = block_distribution(&model, s.members(), &theta)?;
            let identity = max_abs_diff(&p, &reweighted).max(max_abs_diff(&p, &block));
            let kl = divergences(&p, &q)?.kl;
            Ok((
                identity,
                kl - block_operator_norm(&model, s.members()) * size as f64,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(ProductProposalCheck {
        cases,
        identity_error: per.iter().map(|p| p.0).fold(0.0, f64::max),
        kl_excess: per.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Worst single-site KL contraction found by `probes` random measures, for a
/// model of size `n` and operator norm `norm`, against `1 − (1−‖J‖)/n`.
pub fn entropy_contraction_check(n: usize, norm: f64, probes: u64, seed: u64) -> Result<Check> {
    let model = gaussian_model(n, norm, 0.3, seed)?;
    let ladder = Ladder::new(&model)?;
    let p = kl_contraction_probe(
        ladder.level(n),
        ladder.level(n - 1),
        probes,
        &RngStream::new(seed).split(0xE7),
    )?;
    Ok(Check::at_most(
        REJ,
        format!("entropy contraction n={n} ‖J‖={norm}"),
        p.max_ratio,
        1.0 - (1.0 - norm) / n as f64 + 1e-9,
        format!("{} probes, worst {:?}", p.probes, p.worst_kind),
    ))
}

fn rejection_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let ars = ars_check(24, opts.n_max.min(10), 4000, opts.seed)?;
    let pp = product_proposal_check(60, opts.n_max.min(12), opts.seed)?;
    let mut out = vec![
        Check::at_most(
            REJ,
            "output law closed form",
            ars.law_error,
            1e-10,
            format!("{} cases × {} cutoffs", ars.cases, ARS_CUTOFFS.len()),
        ),
        Check::at_least(
            REJ,
            "acceptance ≥ 1/(2c)",
            ars.min_accept_ratio,
            1.0,
            "p̂·2c, empirical",
        ),
        Check::at_most(
            REJ,
            "output TV bound",
            ars.tv_excess,
            1e-12,
            "TV − E(R−c)₊/E R",
        ),
        Check::at_most(
            REJ,
            "conditional = reweighted proposal",
            pp.identity_error,
            1e-10,
            format!("{} cases", pp.cases),
        ),
        Check::at_most(
            REJ,
            "KL(P‖Q) ≤ ‖J_SS‖·|S|",
            pp.kl_excess,
            1e-12,
            format!("{} cases", pp.cases),
        ),
    ];
    for n in 2..=opts.n_max.min(6) {
        out.push(entropy_contraction_check(
            n,
            0.5,
            1000,
            opts.seed.wrapping_add(n as u64),
        )?);
    }
    Ok(out)
}

/// Sampler constants that make the root of `model` a leaf.
pub fn root_leaf_config(model: &IsingModel, eps: f64) -> Result<SamplerConfig> {
    let op = model.operator_norm(1e-10)?;
    let mut cfg = default_config(1.0 - op, eps)?;
    cfg.c3 = cfg.c3.max(2.0 * model.frobenius() + 1.0);
    Ok(cfg)
}

/// Sampler constants with the leaf threshold shrunk below `‖J‖_F`, so the
/// root always splits.
pub fn forced_recursion_config(model: &IsingModel, eps: f64) -> Result<SamplerConfig> {
    let op = model.operator_norm(1e-10)?;
    let mut cfg = default_config(1.0 - op, eps)?;
    cfg.c3 = cfg.c3.min(0.5 * model.frobenius());
    cfg.c1 = cfg.c1.min(0.5 * cfg.c3);
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndToEnd {
    pub tv: EmpiricalTv,
    pub eps: f64,
    pub telemetry: RunTelemetry,
    pub max_node_count: u64,
}

impl EndToEnd {
    pub fn limit(&self) -> f64 {
        self.eps + 3.0 * self.tv.conf_radius
    }

    pub fn passed(&self) -> bool {
        self.tv.tv_hat <= self.limit()
    }
}

/// Histogram of `runs` independent root calls (run `r` keyed by
/// `split(r)` of `seed`) against the enumerated law.
pub fn end_to_end(
    model: &IsingModel,
    cfg: &SamplerConfig,
    runs: u64,
    seed: u64,
) -> Result<EndToEnd> {
    let exact = enumerate_distribution(model)?;
    let sampler = Sampler::new(cfg.clone())?;
    let root = RngStream::new(seed);
    let len = exact.probabilities().len();
    let (counts, tel, max_nodes) = sampler.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| sampler.sample_model(model, &root.split(r)))
            .try_fold(
                || (vec![0u64; len], RunTelemetry::default(), 0u64),
                |(mut c, mut t, mx), out| {
                    let (x, tel) = out?;
                    c[x.to_bits() as usize] += 1;
                    let mx = mx.max(tel.node_count);
                    t.merge(&tel);
                    Ok::<_, Error>((c, t, mx))
                },
            )
            .try_reduce(
                || (vec![0u64; len], RunTelemetry::default(), 0u64),
                |(mut a, mut ta, ma), (b, tb, mb)| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    ta.merge(&tb);
                    Ok((a, ta, ma.max(mb)))
                },
            )
    })?;
    Ok(EndToEnd {
        tv: empirical_tv_from_counts(&counts, &exact)?,
        eps: cfg.eps,
        telemetry: tel,
        max_node_count: max_nodes,
    })
}

/// Empirical TV of externally produced samples against the model.
pub fn check_samples(model: &IsingModel, samples: &[SpinVector], eps: f64) -> Result<Check> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("no samples to check".into()));
    }
    let exact = enumerate_distribution(model)?;
    let n = model.n();
    let mut counts = vec![0u64; 1 << n];
    for x in samples {
        if !x.is_full(n) {
            return Err(Error::DimensionMismatch {
                what: "sample",
                expected: n,
                found: x.len(),
            });
        }
        counts[x.to_bits() as usize] += 1;
    }
    let tv = empirical_tv_from_counts(&counts, &exact)?;
    Ok(Check::at_most(
        "samples",
        "empirical TV",
        tv.tv_hat,
        eps + 3.0 * tv.conf_radius,
        format!("{} samples, n = {n}, ε = {eps}", tv.samples),
    ))
}

fn end_to_end_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let n = opts.n_max.min(10);
    let eps = 0.1;
    let model = gaussian_model(n, 0.5, 0.3, opts.seed)?;
    let mut out = Vec::new();
    for (name, cfg) in [
        ("root leaf", root_leaf_config(&model, eps)?),
        ("forced recursion", forced_recursion_config(&model, eps)?),
    ] {
        let r = end_to_end(&model, &cfg, opts.runs, opts.seed.wrapping_add(1))?;
        out.push(Check::at_most(
            "end2end",
            format!("TV {name}"),
            r.tv.tv_hat,
            r.limit(),
            format!(
                "n = {n}, {} runs, max nodes {}",
                opts.runs, r.max_node_count
            ),
        ));
    }
    Ok(out)
}
