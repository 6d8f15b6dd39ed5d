//! Search for measures that the down operator contracts poorly in KL.
//!
//! KL contraction has no eigenvalue characterization, so the best we can do
//! is evaluate `KL(νD‖μ_ℓ)/KL(ν‖μ_k)` at many `ν` and report the worst. A
//! large ratio refutes a claimed bound; a small one certifies nothing.

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use super::{down_operator, kl_divergence, PartialConfigSpace};
use crate::error::{Error, Result};
use crate::rng::{open_unit_f64, RngStream};

const DIRICHLET_ALPHAS: [f64; 3] = [0.1, 1.0, 10.0];
/// Probes with `KL(ν‖μ_k)` below this are skipped as numerically meaningless.
const MIN_KL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeKind {
    Dirichlet,
    PointMassMixture,
    TopSingularDirection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlProbe {
    pub max_ratio: f64,
    pub worst_kind: ProbeKind,
    pub probes: u64,
}

/// Worst observed `KL(νD_{k→ℓ}‖μ_ℓ)/KL(ν‖μ_k)` over `trials` random `ν`,
/// plus a short sweep along the slowest χ² direction.
///
/// Random probes cycle through `ν ∝ μ_k·Gamma(α)` for `α ∈ {0.1, 1, 10}`
/// and `ν = (1−t)μ_k + tδ_s` for a uniform state `s` and `t ∈ (0, 1]`.
pub fn kl_contraction_probe(
    upper: &PartialConfigSpace,
    lower: &PartialConfigSpace,
    trials: u64,
    rng: &RngStream,
) -> Result<KlProbe> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    let d = down_operator(upper, lower)?;
    let mu = upper.measure();
    let mu_low = lower.measure();
    let ratio = |nu: &[f64]| -> Option<f64> {
        let top = kl_divergence(nu, mu);
        if top < MIN_KL {
            return None;
        }
        Some(kl_divergence(&d.apply_left(nu), mu_low) / top)
    };
    let mut best = KlProbe {
        max_ratio: 0.0,
        worst_kind: ProbeKind::Dirichlet,
        probes: 0,
    };
    let consider = |nu: &[f64], kind: ProbeKind, best: &mut KlProbe| {
        best.probes += 1;
        if let Some(r) = ratio(nu) {
            if r > best.max_ratio {
                best.max_ratio = r;
                best.worst_kind = kind;
            }
        }
    };

    let mut g = rng.generator();
    let len = mu.len();
    let mut nu = vec![0.0; len];
    let gammas: Vec<Gamma<f64>> = DIRICHLET_ALPHAS
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape"))
        .collect();
    for t in 0..trials {
        if t % 2 == 0 {
            let gamma = &gammas[(t / 2 % 3) as usize];
            for (v, &m) in nu.iter_mut().zip(mu) {
                *v = m * gamma.sample(&mut g);
            }
            let s: f64 = nu.iter().sum();
            if !(s > 0.0) {
                continue;
            }
            nu.iter_mut().for_each(|v| *v /= s);
            consider(&nu, ProbeKind::Dirichlet, &mut best);
        } else {
            let target = (g.next_u64() % len as u64) as usize;
            let w = open_unit_f64(g.next_u64());
            for (v, &m) in nu.iter_mut().zip(mu) {
                *v = (1.0 - w) * m;
            }
            nu[target] += w;
            consider(&nu, ProbeKind::PointMassMixture, &mut best);
        }
    }

    if let Some(f) = slowest_direction(upper, lower, &d) {
        let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            for scale in [1e-3, 1e-2, 0.1, 0.5, 0.99] {
                for sign in [1.0, -1.0] {
                    for (k, v) in nu.iter_mut().enumerate() {
                        *v = mu[k] * (1.0 + sign * scale * f[k] / peak);
                    }
                    consider(&nu, ProbeKind::TopSingularDirection, &mut best);
                }
            }
        }
    }
    Ok(best)
}

/// Mean-zero `f` in `L²(μ_k)` attaining `σ₂` of the down operator.
fn slowest_direction(
    upper: &PartialConfigSpace,
    lower: &PartialConfigSpace,
    d: &super::MarkovMatrix,
) -> Option<Vec<f64>> {
    let su: Vec<f64> = upper.measure().iter().map(|v| v.sqrt()).collect();
    let sl: Vec<f64> = lower.measure().iter().map(|v| v.sqrt()).collect();
    let m = DMatrix::from_fn(upper.len(), lower.len(), |a, b| {
        if sl[b] > 0.0 {
            su[a] * d.get(a, b) / sl[b]
        } else {
            0.0
        }
    });
    let gram = &m * m.transpose();
    if gram.nrows() < 2 {
        return None;
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let v = eig.eigenvectors.column(order[1]);
    Some(
        (0..upper.len())
            .map(|a| if su[a] > 0.0 { v[a] / su[a] } else { 0.0 })
            .collect(),
    )
}
