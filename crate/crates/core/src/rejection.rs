//! Two-draw approximate rejection sampling.
//!
//! The target `P` is known only through `g = ln dP/dQ + const`. Each attempt
//! draws `X, Z ~ Q` and accepts `X` with probability `min{R, c}/c` where
//! `R = exp(g(X) − g(Z))`; `Z` stands in for the unknown normalizer. The
//! output law `P̂` satisfies `dP̂/dQ(x) ∝ E[min{R, c} | X = x]`, so it is exact
//! whenever `R ≤ c` almost surely.

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ProductDistribution, SpinVector};
use crate::rng::{fill_product, open_unit_f64, RngStream};

/// A law on `{±1}^S` that can be sampled into a ±1.0 buffer.
pub trait Proposal: Sync {
    /// Coordinate labels of the sampled vector, in buffer order.
    fn indices(&self) -> &[usize];

    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]);
}

impl Proposal for ProductDistribution {
    fn indices(&self) -> &[usize] {
        ProductDistribution::indices(self)
    }

    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        fill_product(rng, self.plus_probabilities(), out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RejectionOutcome {
    pub sample: SpinVector,
    pub tries: u64,
    /// `g(X) − g(Z)` of the accepted attempt.
    pub accepted_log_ratio: f64,
}

/// `⌈40 c ln(n/ε)⌉`, at least 1.
pub fn default_max_tries(c: f64, n: usize, eps: f64) -> u64 {
    (40.0 * c * (n as f64 / eps).ln()).ceil().max(1.0) as u64
}

fn check_cutoff(c: f64) -> Result<()> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "rejection cutoff c must be ≥ 1, got {c}"
        )));
    }
    Ok(())
}

pub fn approx_rejection_sample<P, G>(
    proposal: &P,
    g: G,
    c: f64,
    rng: &RngStream,
    max_tries: u64,
) -> Result<RejectionOutcome>
where
    P: Proposal,
    G: Fn(&[f64]) -> f64,
{
    check_cutoff(c)?;
    if max_tries == 0 {
        return Err(Error::InvalidConfig("max_tries must be ≥ 1".into()));
    }
    let len = proposal.indices().len();
    let mut x = vec![0.0; len];
    let mut z = vec![0.0; len];
    let (tries, log_r) = rejection_loop(
        proposal,
        &g,
        c.ln(),
        &mut rng.generator(),
        max_tries,
        &mut x,
        &mut z,
    )?;
    Ok(RejectionOutcome {
        sample: SpinVector::from_f64(proposal.indices().to_vec(), &x),
        tries,
        accepted_log_ratio: log_r,
    })
}

/// Attempt loop on caller-owned buffers. On success `x` holds the accepted
/// draw; returns `(tries, g(X) − g(Z))`.
pub(crate) fn rejection_loop<P, G, R>(
    proposal: &P,
    g: &G,
    ln_c: f64,
    rng: &mut R,
    max_tries: u64,
    x: &mut [f64],
    z: &mut [f64],
) -> Result<(u64, f64)>
where
    P: Proposal,
    G: Fn(&[f64]) -> f64,
    R: RngCore + ?Sized,
{
    for tries in 1..=max_tries {
        proposal.draw(rng, x);
        proposal.draw(rng, z);
        let log_r = g(x) - g(z);
        let ln_u = open_unit_f64(rng.next_u64()).ln();
        if ln_u <= log_r - ln_c {
            return Ok((tries, log_r));
        }
    }
    Err(Error::MaxTriesExceeded { max_tries })
}

/// Monte Carlo estimates of the acceptance probability and of the
/// total-variation bound `E[(R − c)₊]/E[R]`, with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RejectionDiagnostics {
    pub trials: u64,
    pub p_accept_hat: f64,
    pub p_accept_se: f64,
    pub tv_numerator_hat: f64,
    pub tv_numerator_se: f64,
    pub tv_denominator_hat: f64,
    pub tv_denominator_se: f64,
    pub tv_bound_hat: f64,
    /// Delta-method standard error of the ratio.
    pub tv_bound_se: f64,
}

pub fn rejection_diagnostics<P, G>(
    proposal: &P,
    g: G,
    c: f64,
    trials: u64,
    rng: &RngStream,
) -> Result<RejectionDiagnostics>
where
    P: Proposal,
    G: Fn(&[f64]) -> f64,
{
    check_cutoff(c)?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    let len = proposal.indices().len();
    let (mut x, mut z) = (vec![0.0; len], vec![0.0; len]);
    let mut gen = rng.generator();
    // streaming means and co-moments of a = min{R,c}/c, b = (R−c)₊, r = R
    let (mut ma, mut mb, mut mr) = (0.0f64, 0.0f64, 0.0f64);
    let (mut caa, mut cbb, mut crr, mut cbr) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 1..=trials {
        proposal.draw(&mut gen, &mut x);
        proposal.draw(&mut gen, &mut z);
        let r = (g(&x) - g(&z)).exp();
        let a = r.min(c) / c;
        let b = (r - c).max(0.0);
        let w = 1.0 / k as f64;
        let (da, db, dr) = (a - ma, b - mb, r - mr);
        ma += da * w;
        mb += db * w;
        mr += dr * w;
        caa += da * (a - ma);
        cbb += db * (b - mb);
        crr += dr * (r - mr);
        cbr += db * (r - mr);
    }
    let t = trials as f64;
    // variance of the sample mean
    let var_mean = |m2: f64| {
        if trials < 2 {
            0.0
        } else {
            (m2 / (t - 1.0) / t).max(0.0)
        }
    };
    let se = |m2: f64| var_mean(m2).sqrt();
    let ratio = mb / mr;
    let cov = var_mean(cbr);
    let (vb, vr) = (var_mean(cbb), var_mean(crr));
    let ratio_var = ((vb + ratio * ratio * vr - 2.0 * ratio * cov) / (mr * mr)).max(0.0);
    Ok(RejectionDiagnostics {
        trials,
        p_accept_hat: ma,
        p_accept_se: se(caa),
        tv_numerator_hat: mb,
        tv_numerator_se: se(cbb),
        tv_denominator_hat: mr,
        tv_denominator_se: se(crr),
        tv_bound_hat: ratio,
        tv_bound_se: ratio_var.sqrt(),
    })
}
