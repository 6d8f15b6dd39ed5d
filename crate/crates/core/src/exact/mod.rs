//! Brute-force oracle.
//!
//! Everything here enumerates state spaces exactly and is limited to small
//! `n`. Configurations are indexed by bits: bit `i` of the index is set iff
//! `x_i = +1`.

mod ars;
mod ladder;
mod markov;
mod probe;

pub use ars::{ars_exact_law, enumerate_log_ratio, enumerate_product, ArsExactLaw};
pub use ladder::{
    bl_gap, chi2_contraction_coefficient, chi2_down_contraction, down_operator, down_up_operator,
    du_chi2_product_bound, du_kl_product_bound, mono_bound, up_operator, Ladder, LevelSpectrum,
    PartialConfigSpace,
};
pub use markov::{
    glauber_transition_matrix, k_glauber_transition_matrix, spectral_gap, symmetric_eigenvalues,
    verify_k_speedup, KSpeedup, KSpeedupSweep, MarkovMatrix, MAX_CHAIN_SITES,
};
pub use probe::{kl_contraction_probe, KlProbe, ProbeKind};

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glauber::block_log_weights;
use crate::model::{IsingModel, SpinVector, SubsetIndex};
use crate::rng::unit_f64;

pub const MAX_ENUMERATION_SITES: usize = 20;
pub const MAX_HISTOGRAM_SITES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution {
    n: usize,
    probabilities: Vec<f64>,
    log_partition: f64,
}

impl ExactDistribution {
    /// Normalize unnormalized log weights over `2^n` states.
    pub fn from_log_weights(n: usize, log_w: &[f64]) -> Result<Self> {
        if log_w.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                what: "log weight table",
                expected: 1 << n,
                found: log_w.len(),
            });
        }
        let lz = log_sum_exp(log_w);
        let probabilities = log_w.iter().map(|w| (w - lz).exp()).collect();
        Ok(Self {
            n,
            probabilities,
            log_partition: lz,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// State index whose cumulative mass first exceeds `u ∈ [0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> u64 {
        let mut acc = 0.0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return k as u64;
            }
        }
        (self.probabilities.len() - 1) as u64
    }

    pub fn sample_bits<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        self.inverse_cdf(unit_f64(rng.next_u64()))
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|w| (w - top).exp()).sum::<f64>().ln()
}

fn bits_to_f64(n: usize, bits: u64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(n) {
        *o = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
    }
}

/// Log weights `½xᵀJx + hᵀx` of all `2^n` configurations.
pub(crate) fn log_weights(model: &IsingModel) -> Result<Vec<f64>> {
    let n = model.n();
    if n > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "enumerated model",
            size: n,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    let mut x = vec![0.0; n];
    Ok((0..1u64 << n)
        .map(|bits| {
            bits_to_f64(n, bits, &mut x);
            model.energy_values(&x)
        })
        .collect())
}

pub fn enumerate_distribution(model: &IsingModel) -> Result<ExactDistribution> {
    ExactDistribution::from_log_weights(model.n(), &log_weights(model)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Divergences {
    pub tv: f64,
    pub kl: f64,
    pub chi2: f64,
}

/// TV, KL(p‖q) and χ²(p‖q) between two mass functions on the same cells.
pub fn divergences(p: &[f64], q: &[f64]) -> Result<Divergences> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "divergence operands",
            expected: p.len(),
            found: q.len(),
        });
    }
    let (mut tv, mut kl, mut chi2) = (0.0, 0.0, 0.0);
    for (k, (&a, &b)) in p.iter().zip(q).enumerate() {
        tv += (a - b).abs();
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation { index: k });
            }
            kl += a * (a / b).ln();
        }
        if b > 0.0 {
            chi2 += (a - b) * (a - b) / b;
        }
    }
    Ok(Divergences {
        tv: 0.5 * tv,
        kl: kl.max(0.0),
        chi2,
    })
}

/// `KL(p‖q)` only; zero-mass cells of `p` are skipped.
pub(crate) fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Histogram of full configurations over `2^n` cells.
pub fn empirical_distribution(samples: &[SpinVector]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or_else(|| {
        Error::InvalidConfig("empirical distribution needs at least one sample".into())
    })?;
    let n = first.len();
    if n > MAX_HISTOGRAM_SITES {
        return Err(Error::TooLarge {
            what: "histogram",
            size: n,
            limit: MAX_HISTOGRAM_SITES,
        });
    }
    let mut counts = vec![0u64; 1 << n];
    for s in samples {
        if !s.is_full(n) {
            return Err(Error::IndexMismatch(format!(
                "every sample must be a full configuration on {n} coordinates"
            )));
        }
        counts[s.to_bits() as usize] += 1;
    }
    Ok(normalize_counts(&counts))
}

pub(crate) fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmpiricalTv {
    pub tv_hat: f64,
    /// `√(2^n/N)`.
    pub conf_radius: f64,
    pub samples: u64,
}

pub fn empirical_tv(samples: &[SpinVector], exact: &ExactDistribution) -> Result<EmpiricalTv> {
    let hist = empirical_distribution(samples)?;
    if hist.len() != exact.probabilities().len() {
        return Err(Error::DimensionMismatch {
            what: "sample dimension",
            expected: exact.n(),
            found: samples[0].len(),
        });
    }
    empirical_tv_from_histogram(&hist, samples.len() as u64, exact)
}

pub fn empirical_tv_from_counts(counts: &[u64], exact: &ExactDistribution) -> Result<EmpiricalTv> {
    empirical_tv_from_histogram(&normalize_counts(counts), counts.iter().sum(), exact)
}

fn empirical_tv_from_histogram(
    hist: &[f64],
    n_samples: u64,
    exact: &ExactDistribution,
) -> Result<EmpiricalTv> {
    let d = divergences(hist, exact.probabilities())?;
    Ok(EmpiricalTv {
        tv_hat: d.tv,
        conf_radius: conf_radius(exact.n(), n_samples),
        samples: n_samples,
    })
}

pub fn conf_radius(n: usize, samples: u64) -> f64 {
    ((1u64 << n) as f64 / samples as f64).sqrt()
}

/// Exact law of `X_S` given `X_{S^c} = x_comp`, indexed by bits over the
/// members of `S` (bit `t` ⇔ `t`-th member is `+1`).
pub fn conditional_distribution(
    model: &IsingModel,
    s: &SubsetIndex,
    x_comp: &SpinVector,
) -> Result<Vec<f64>> {
    let logw = log_weights(model)?;
    if x_comp.indices() != s.complement().as_slice() {
        return Err(Error::InvalidPartition(
            "complement spins must cover exactly S^c".into(),
        ));
    }
    let mut base = 0u64;
    for (&i, &v) in x_comp.indices().iter().zip(x_comp.values()) {
        if v > 0 {
            base |= 1 << i;
        }
    }
    let w: Vec<f64> = (0..1u64 << s.len())
        .map(|b| {
            let mut full = base;
            for (t, &i) in s.members().iter().enumerate() {
                if b >> t & 1 == 1 {
                    full |= 1 << i;
                }
            }
            logw[full as usize]
        })
        .collect();
    let lz = log_sum_exp(&w);
    Ok(w.iter().map(|v| (v - lz).exp()).collect())
}

/// `μ_{J_SS, θ}` by enumeration, indexed like [`conditional_distribution`].
pub fn block_distribution(
    model: &IsingModel,
    members: &[usize],
    theta: &[f64],
) -> Result<Vec<f64>> {
    if members.len() > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "enumerated block",
            size: members.len(),
            limit: MAX_ENUMERATION_SITES,
        });
    }
    if theta.len() != members.len() {
        return Err(Error::DimensionMismatch {
            what: "block field",
            expected: members.len(),
            found: theta.len(),
        });
    }
    let w = block_log_weights(model, members, theta);
    let lz = log_sum_exp(&w);
    Ok(w.iter().map(|v| (v - lz).exp()).collect())
}

/// Largest absolute eigenvalue of `J_SS` by dense eigensolve.
pub fn block_operator_norm(model: &IsingModel, members: &[usize]) -> f64 {
    let k = members.len();
    let a = nalgebra::DMatrix::from_fn(k, k, |r, c| model.coupling(members[r], members[c]));
    symmetric_eigenvalues(a)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_model, product_proposal};
    use crate::rng::RngStream;

    #[test]
    fn uniform_model_enumeration() {
        let model = IsingModel::new(vec![0.0; 25], vec![0.0; 5]).unwrap();
        let d = enumerate_distribution(&model).unwrap();
        assert!((d.log_partition() - 5.0 * 2f64.ln()).abs() < 1e-12);
        for &p in d.probabilities() {
            assert!((p - 1.0 / 32.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_site_closed_form() {
        let beta = 0.7f64;
        let model = IsingModel::new(vec![0.0, beta, beta, 0.0], vec![0.0, 0.0]).unwrap();
        let d = enumerate_distribution(&model).unwrap();
        let want = beta.exp() / (2.0 * beta.exp() + 2.0 * (-beta).exp());
        assert!((d.probabilities()[3] - want).abs() < 1e-15);
        assert!((d.probabilities()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn normalization_and_guard() {
        let model = gaussian_model(12, 0.8, 0.5, 3).unwrap();
        let d = enumerate_distribution(&model).unwrap();
        assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let big = IsingModel::new(vec![0.0; 21 * 21], vec![0.0; 21]).unwrap();
        assert!(matches!(
            enumerate_distribution(&big),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn diagonal_removal_leaves_the_law_unchanged() {
        let model = gaussian_model(8, 0.6, 0.4, 17).unwrap();
        let mut raw = model.dense_couplings();
        let mut g = RngStream::new(5).generator();
        for i in 0..8 {
            raw[i * 8 + i] = 10.0 * (unit_f64(g.next_u64()) - 0.5);
        }
        let with_diag = IsingModel::new(raw, model.field().to_vec()).unwrap();
        let a = enumerate_distribution(&model).unwrap();
        let b = enumerate_distribution(&with_diag).unwrap();
        assert_eq!(
            divergences(a.probabilities(), b.probabilities())
                .unwrap()
                .tv,
            0.0
        );
    }

    #[test]
    fn divergence_closed_forms() {
        let d = divergences(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!((d.tv, d.kl, d.chi2), (0.0, 0.0, 0.0));
        let d = divergences(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d.tv - 0.5).abs() < 1e-15);
        assert!((d.kl - 2f64.ln()).abs() < 1e-15);
        assert!((d.chi2 - 1.0).abs() < 1e-15);
        assert!(matches!(
            divergences(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::SupportViolation { index: 1 })
        ));
        assert!(divergences(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn kl_is_at_most_log_one_plus_chi2() {
        let mut g = RngStream::new(8).generator();
        for _ in 0..50 {
            let mut draw = || -> Vec<f64> {
                let v: Vec<f64> = (0..256).map(|_| open_unit(&mut g)).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            };
            let (p, q) = (draw(), draw());
            let d = divergences(&p, &q).unwrap();
            assert!(d.kl <= (1.0 + d.chi2).ln() + 1e-12);
            assert!(d.tv <= (0.5 * d.kl).sqrt() + 1e-12);
        }
    }

    fn open_unit(g: &mut impl RngCore) -> f64 {
        crate::rng::open_unit_f64(g.next_u64())
    }

    #[test]
    fn empirical_tv_of_exact_samples() {
        let model = gaussian_model(8, 0.5, 0.3, 1).unwrap();
        let exact = enumerate_distribution(&model).unwrap();
        let mut g = RngStream::new(4).generator();
        let samples: Vec<SpinVector> = (0..100_000)
            .map(|_| SpinVector::from_bits((0..8).collect(), exact.sample_bits(&mut g)))
            .collect();
        let e = empirical_tv(&samples, &exact).unwrap();
        assert!((e.conf_radius - (256.0f64 / 1e5).sqrt()).abs() < 1e-15);
        assert!((e.conf_radius - 0.0506).abs() < 1e-3);
        assert!(e.tv_hat <= e.conf_radius, "{e:?}");

        // flip coordinate 0 to +1 in a fifth of the draws
        let biased: Vec<SpinVector> = samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if k % 5 == 0 {
                    SpinVector::from_bits((0..8).collect(), s.to_bits() | 1)
                } else {
                    s.clone()
                }
            })
            .collect();
        let e = empirical_tv(&biased, &exact).unwrap();
        assert!(e.tv_hat > e.conf_radius, "{e:?}");
    }

    #[test]
    fn empirical_guards() {
        assert!(empirical_distribution(&[]).is_err());
        let a = SpinVector::full(vec![1, -1]).unwrap();
        let b = SpinVector::new(vec![0, 2], vec![1, 1]).unwrap();
        assert!(empirical_distribution(&[a, b]).is_err());
        let big = SpinVector::full(vec![1; 17]).unwrap();
        assert!(matches!(
            empirical_distribution(&[big]),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn conditional_law_is_the_block_model() {
        let model = gaussian_model(12, 0.7, 0.5, 12).unwrap();
        let mut g = RngStream::new(0).generator();
        for trial in 0..10u64 {
            let s = crate::rng::sample_subset(&RngStream::new(trial), 12, 1 + trial as usize % 6)
                .unwrap();
            let comp = s.complement();
            let vals: Vec<i8> = comp
                .iter()
                .map(|_| if g.next_u64() & 1 == 1 { 1 } else { -1 })
                .collect();
            let x_comp = SpinVector::new(comp, vals).unwrap();
            let exact = conditional_distribution(&model, &s, &x_comp).unwrap();
            let theta = model.conditional_field(&s, &x_comp).unwrap();
            let block = block_distribution(&model, s.members(), &theta).unwrap();
            for (a, b) in exact.iter().zip(&block) {
                assert!((a - b).abs() < 1e-12);
            }
            // the product proposal reweighted by exp(g) is the same law
            let q = product_proposal(theta.clone()).unwrap();
            let mut x = vec![0.0; s.len()];
            let w: Vec<f64> = (0..1u64 << s.len())
                .map(|b| {
                    bits_to_f64(s.len(), b, &mut x);
                    q.log_prob(&x) + model.quadratic_on(s.members(), &x)
                })
                .collect();
            let lz = log_sum_exp(&w);
            for (a, wv) in exact.iter().zip(&w) {
                assert!((a - (wv - lz).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_operator_norm_agrees_with_power_iteration() {
        let model = gaussian_model(10, 0.6, 0.0, 2).unwrap();
        let all: Vec<usize> = (0..10).collect();
        assert!((block_operator_norm(&model, &all) - 0.6).abs() < 1e-6);
        assert_eq!(block_operator_norm(&model, &[3]), 0.0);
    }
}
