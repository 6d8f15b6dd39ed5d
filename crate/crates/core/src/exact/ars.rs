//! Exact output law of the two-draw rejection sampler on a finite space.

use serde::Serialize;

use super::MAX_ENUMERATION_SITES;
use crate::error::{Error, Result};
use crate::model::ProductDistribution;

/// Everything about one `(Q, g, c)` triple that enumeration can give exactly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArsExactLaw {
    /// Target `P ∝ q·e^g`.
    pub target: Vec<f64>,
    /// `P̂ ∝ q(x)·E[min{R, c} | X = x]`.
    pub output_by_formula: Vec<f64>,
    /// `P̂` by summing the attempt series `Σ_t (1 − p)^{t−1} a(x)`, where
    /// `a(x) = q(x) Σ_z q(z) min{1, R(x, z)/c}` integrates out `U`.
    pub output_by_attempts: Vec<f64>,
    /// `E[min{R, c}]/c`.
    pub p_accept: f64,
    /// `(E R − E[(R − c)₊])/c`, the same quantity by the other identity.
    pub p_accept_identity: f64,
    pub tv_output_target: f64,
    /// `E[(R − c)₊]/E R`.
    pub tv_bound: f64,
}

/// Mass function of a product law over `2^d` cells (bit `t` ⇔ coordinate `t` is `+1`).
pub fn enumerate_product(q: &ProductDistribution) -> Result<Vec<f64>> {
    let d = q.len();
    if d > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "enumerated proposal",
            size: d,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    let p = q.plus_probabilities();
    Ok((0..1usize << d)
        .map(|b| {
            (0..d)
                .map(|t| if b >> t & 1 == 1 { p[t] } else { 1.0 - p[t] })
                .product()
        })
        .collect())
}

/// `g` evaluated on every cell of `{±1}^d`.
pub fn enumerate_log_ratio<G: Fn(&[f64]) -> f64>(d: usize, g: G) -> Result<Vec<f64>> {
    if d > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "enumerated log ratio",
            size: d,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    let mut x = vec![0.0; d];
    Ok((0..1usize << d)
        .map(|b| {
            for (t, v) in x.iter_mut().enumerate() {
                *v = if b >> t & 1 == 1 { 1.0 } else { -1.0 };
            }
            g(&x)
        })
        .collect())
}

pub fn ars_exact_law(q: &[f64], g: &[f64], c: f64) -> Result<ArsExactLaw> {
    if q.len() != g.len() {
        return Err(Error::DimensionMismatch {
            what: "log ratio table",
            expected: q.len(),
            found: g.len(),
        });
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "rejection cutoff c must be ≥ 1, got {c}"
        )));
    }
    let k = q.len();
    // shift g so that exponentials stay in range; R is shift-invariant
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = g.iter().map(|v| (v - top).exp()).collect();
    let e_r: f64 = {
        let a: f64 = q.iter().zip(&e).map(|(p, w)| p * w).sum();
        let b: f64 = q.iter().zip(&e).map(|(p, w)| p / w).sum();
        a * b
    };
    let mut capped = vec![0.0; k];
    let mut accept = vec![0.0; k];
    let mut excess = 0.0;
    for x in 0..k {
        let (mut cm, mut am) = (0.0, 0.0);
        for z in 0..k {
            let r = (g[x] - g[z]).exp();
            cm += q[z] * r.min(c);
            am += q[z] * (r / c).min(1.0);
            excess += q[x] * q[z] * (r - c).max(0.0);
        }
        capped[x] = q[x] * cm;
        accept[x] = q[x] * am;
    }
    let e_min: f64 = capped.iter().sum();
    let output_by_formula: Vec<f64> = capped.iter().map(|v| v / e_min).collect();

    let p: f64 = accept.iter().sum();
    let mut output_by_attempts = vec![0.0; k];
    let mut survive = 1.0f64;
    while survive > 1e-18 {
        for (o, a) in output_by_attempts.iter_mut().zip(&accept) {
            *o += survive * a;
        }
        survive *= 1.0 - p;
        if p <= 0.0 {
            break;
        }
    }

    let zt: f64 = q.iter().zip(&e).map(|(p, w)| p * w).sum();
    let target: Vec<f64> = q.iter().zip(&e).map(|(p, w)| p * w / zt).collect();
    let tv = 0.5
        * output_by_formula
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    Ok(ArsExactLaw {
        target,
        output_by_formula,
        output_by_attempts,
        p_accept: e_min / c,
        p_accept_identity: (e_r - excess) / c,
        tv_output_target: tv,
        tv_bound: excess / e_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_model, IsingModel};

    #[test]
    fn exact_when_ratio_never_exceeds_cutoff() {
        let q = enumerate_product(&ProductDistribution::from_field(vec![0.2, -0.4, 0.1]).unwrap())
            .unwrap();
        let g = enumerate_log_ratio(3, |x| 0.1 * x[0] * x[1]).unwrap();
        let law = ars_exact_law(&q, &g, 10.0).unwrap();
        assert!(law.tv_output_target < 1e-14);
        assert_eq!(law.tv_bound, 0.0);
    }

    #[test]
    fn routes_agree_and_bounds_hold() {
        let model = gaussian_model(7, 1.5, 0.0, 9).unwrap();
        let members: Vec<usize> = (0..7).collect();
        let qd =
            ProductDistribution::from_field(vec![0.3, -0.1, 0.0, 0.5, -0.6, 0.2, 0.1]).unwrap();
        let q = enumerate_product(&qd).unwrap();
        let g = enumerate_log_ratio(7, |x| model.quadratic_on(&members, x)).unwrap();
        for c in [1.0, 1.5, 3.0, 10.0] {
            let law = ars_exact_law(&q, &g, c).unwrap();
            for (a, b) in law.output_by_formula.iter().zip(&law.output_by_attempts) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((law.p_accept - law.p_accept_identity).abs() < 1e-12);
            assert!(law.p_accept >= 1.0 / (2.0 * c) - 1e-12);
            assert!(law.tv_output_target <= law.tv_bound + 1e-12);
        }
    }

    #[test]
    fn guards() {
        assert!(ars_exact_law(&[0.5, 0.5], &[0.0], 2.0).is_err());
        assert!(ars_exact_law(&[0.5, 0.5], &[0.0, 0.0], 0.5).is_err());
        let big = IsingModel::new(vec![0.0; 21 * 21], vec![0.0; 21]).unwrap();
        let q = ProductDistribution::from_field(big.field().to_vec()).unwrap();
        assert!(enumerate_product(&q).is_err());
    }
}
