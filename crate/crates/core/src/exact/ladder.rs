//! Homogenized state spaces and the down/up operators between their levels.
//!
//! A configuration `x ∈ {±1}^n` is identified with the set `{(i, x_i)}`.
//! Level `m` holds pairs `(A, x_A)` with `|A| = m`, weighted by
//! `μ_m(A, x_A) = μ(X_A = x_A)/C(n, m)`. The uniform structure forgets values
//! and keeps only `A`, uniformly weighted.
//!
//! States are ordered by subset bitmask, then by assignment bits; bit `t` of
//! an assignment refers to the `t`-th smallest element of `A`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    enumerate_distribution, spectral_gap, symmetric_eigenvalues, ExactDistribution, MarkovMatrix,
};
use crate::error::{Error, Result};
use crate::model::IsingModel;

/// Largest level state count for which operators are materialized.
pub const MAX_LEVEL_STATES: usize = 4096;
const MAX_LADDER_SITES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PartialConfigSpace {
    n: usize,
    level: usize,
    with_values: bool,
    subsets: Vec<u32>,
    subset_rank: HashMap<u32, usize>,
    measure: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn subsets_of_size(n: usize, m: usize) -> Vec<u32> {
    (0..1u32 << n)
        .filter(|s| s.count_ones() as usize == m)
        .collect()
}

/// Bits of `x` at the positions of `mask`, packed in increasing position order.
fn extract(x: u64, mask: u32) -> u32 {
    let (mut out, mut t, mut m) = (0u32, 0, mask);
    while m != 0 {
        let i = m.trailing_zeros();
        if x >> i & 1 == 1 {
            out |= 1 << t;
        }
        t += 1;
        m &= m - 1;
    }
    out
}

impl PartialConfigSpace {
    fn check(n: usize, level: usize, states: usize) -> Result<()> {
        if level > n || n > MAX_LADDER_SITES {
            return Err(Error::InvalidSubset { m: n, s: level });
        }
        if states > MAX_LEVEL_STATES {
            return Err(Error::TooLarge {
                what: "homogenized level",
                size: states,
                limit: MAX_LEVEL_STATES,
            });
        }
        Ok(())
    }

    /// Level `m` of the homogenization of `mu`.
    pub fn from_distribution(mu: &ExactDistribution, m: usize) -> Result<Self> {
        let n = mu.n();
        Self::check(n, m, binomial(n, m) as usize * (1usize << m))?;
        let subsets = subsets_of_size(n, m);
        let per = 1usize << m;
        let mut measure = vec![0.0; subsets.len() * per];
        let norm = binomial(n, m);
        for (r, &a) in subsets.iter().enumerate() {
            for (x, &p) in mu.probabilities().iter().enumerate() {
                measure[r * per + extract(x as u64, a) as usize] += p / norm;
            }
        }
        Ok(Self::assemble(n, m, true, subsets, measure))
    }

    /// Level `m` of the homogenization of `μ_{J,h}`.
    pub fn build(model: &IsingModel, m: usize) -> Result<Self> {
        Self::from_distribution(&enumerate_distribution(model)?, m)
    }

    /// Uniform measure on the size-`m` subsets of `[n]`.
    pub fn uniform_subsets(n: usize, m: usize) -> Result<Self> {
        Self::check(n, m, binomial(n, m) as usize)?;
        let subsets = subsets_of_size(n, m);
        let measure = vec![1.0 / subsets.len() as f64; subsets.len()];
        Ok(Self::assemble(n, m, false, subsets, measure))
    }

    fn assemble(
        n: usize,
        level: usize,
        with_values: bool,
        subsets: Vec<u32>,
        measure: Vec<f64>,
    ) -> Self {
        let subset_rank = subsets.iter().enumerate().map(|(r, &s)| (s, r)).collect();
        Self {
            n,
            level,
            with_values,
            subsets,
            subset_rank,
            measure,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    fn per_subset(&self) -> usize {
        if self.with_values {
            1 << self.level
        } else {
            1
        }
    }

    /// `(subset mask, assignment bits)` of state `k`.
    pub fn state(&self, k: usize) -> (u32, u32) {
        let per = self.per_subset();
        (self.subsets[k / per], (k % per) as u32)
    }

    fn index_of(&self, subset: u32, assignment: u32) -> usize {
        self.subset_rank[&subset] * self.per_subset() + assignment as usize
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.with_values != other.with_values {
            return Err(Error::IndexMismatch(
                "levels belong to different ladders".into(),
            ));
        }
        if other.level >= self.level {
            return Err(Error::InvalidSubset {
                m: self.level,
                s: other.level,
            });
        }
        Ok(())
    }
}

/// Restriction of the assignment `xa` on `a` to the subset `b ⊆ a`.
fn restrict(a: u32, xa: u32, b: u32) -> u32 {
    let (mut out, mut t_a, mut t_b, mut m) = (0u32, 0, 0, a);
    while m != 0 {
        let i = m.trailing_zeros();
        if b >> i & 1 == 1 {
            if xa >> t_a & 1 == 1 {
                out |= 1 << t_b;
            }
            t_b += 1;
        }
        t_a += 1;
        m &= m - 1;
    }
    out
}

/// `(upper index, lower index)` pairs with `B ⊆ A` and matching assignments.
fn containment(upper: &PartialConfigSpace, lower: &PartialConfigSpace) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for k in 0..upper.len() {
        let (a, xa) = upper.state(k);
        let mut b = a;
        loop {
            if b.count_ones() as usize == lower.level {
                let xb = if upper.with_values {
                    restrict(a, xa, b)
                } else {
                    0
                };
                pairs.push((k, lower.index_of(b, xb)));
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & a;
        }
    }
    pairs
}

/// `D_{k→ℓ}(A, B) = 1_{B⊆A}/C(k, ℓ)`, annotated with `μ_k`.
pub fn down_operator(
    upper: &PartialConfigSpace,
    lower: &PartialConfigSpace,
) -> Result<MarkovMatrix> {
    upper.compatible(lower)?;
    let w = 1.0 / binomial(upper.level, lower.level);
    let mut d = DMatrix::zeros(upper.len(), lower.len());
    for (a, b) in containment(upper, lower) {
        d[(a, b)] = w;
    }
    MarkovMatrix::new(d, Some(upper.measure.clone()))
}

/// `U_{ℓ→k}(B, A) = 1_{B⊆A} μ_k(A)/Σ_{A'⊇B} μ_k(A')`, annotated with `μ_ℓ`.
pub fn up_operator(lower: &PartialConfigSpace, upper: &PartialConfigSpace) -> Result<MarkovMatrix> {
    upper.compatible(lower)?;
    let mut u = DMatrix::zeros(lower.len(), upper.len());
    for (a, b) in containment(upper, lower) {
        u[(b, a)] = upper.measure[a];
    }
    for mut row in u.row_iter_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    MarkovMatrix::new(u, Some(lower.measure.clone()))
}

/// `D_{m→m−1} U_{m−1→m}` on level `m`, annotated with `μ_m`.
pub fn down_up_operator(
    upper: &PartialConfigSpace,
    lower: &PartialConfigSpace,
) -> Result<MarkovMatrix> {
    down_operator(upper, lower)?.then(&up_operator(lower, upper)?)
}

/// `σ₂(D_{k→ℓ})²` in `L²(μ_k) → L²(μ_ℓ)`: the χ² contraction coefficient of
/// the down operator. Computed from the smaller Gram matrix.
pub fn chi2_contraction_coefficient(
    upper: &PartialConfigSpace,
    lower: &PartialConfigSpace,
) -> Result<f64> {
    let d = down_operator(upper, lower)?;
    let su: Vec<f64> = upper.measure.iter().map(|v| v.sqrt()).collect();
    let sl: Vec<f64> = lower.measure.iter().map(|v| v.sqrt()).collect();
    let m = DMatrix::from_fn(upper.len(), lower.len(), |a, b| {
        if sl[b] > 0.0 {
            su[a] * d.get(a, b) / sl[b]
        } else {
            0.0
        }
    });
    let gram = if m.nrows() <= m.ncols() {
        &m * m.transpose()
    } else {
        m.transpose() * &m
    };
    let ev = symmetric_eigenvalues(gram);
    Ok(ev.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0))
}

/// `κ_m = 1 − σ₂(D_{m→m−1})²` for the Ising homogenization.
pub fn chi2_down_contraction(model: &IsingModel, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidSubset { m: model.n(), s: 0 });
    }
    let mu = enumerate_distribution(model)?;
    let upper = PartialConfigSpace::from_distribution(&mu, m)?;
    let lower = PartialConfigSpace::from_distribution(&mu, m - 1)?;
    Ok(1.0 - chi2_contraction_coefficient(&upper, &lower)?)
}

/// Gap `n/(k(n−k+1))` of the down-up walk on uniform `k`-subsets of `[n]`.
pub fn bl_gap(n: usize, k: usize) -> f64 {
    n as f64 / (k as f64 * (n - k + 1) as f64)
}

/// Lower bound `nκ_n κ^BL_m/(nκ_n + mκ^BL_m)` on `κ_m`.
pub fn mono_bound(n: usize, m: usize, kappa_n: f64) -> f64 {
    let bl = bl_gap(n, m);
    let nk = n as f64 * kappa_n;
    nk * bl / (nk + m as f64 * bl)
}

/// `Π_{j=ℓ+1}^k (1 − 1/(j(C + (n−j+1)/n)))`: χ² contraction of `D_{k→ℓ}`
/// implied by `D_{n→n−1}` contracting by `1 − 1/(Cn)`.
pub fn du_chi2_product_bound(n: usize, k: usize, l: usize, c: f64) -> f64 {
    (l + 1..=k)
        .map(|j| 1.0 - 1.0 / (j as f64 * (c + (n - j + 1) as f64 / n as f64)))
        .product()
}

/// `Π_{j=ℓ+1}^k (1 − 1/(j(C+1)))`: KL contraction of `D_{k→ℓ}` under
/// `C`-approximate tensorization of entropy.
pub fn du_kl_product_bound(k: usize, l: usize, c: f64) -> f64 {
    (l + 1..=k)
        .map(|j| 1.0 - 1.0 / (j as f64 * (c + 1.0)))
        .product()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelSpectrum {
    pub level: usize,
    /// `1 − σ₂(D_{m→m−1})²`.
    pub kappa_chi2: f64,
    /// [`mono_bound`] at this level.
    pub kappa_bound: f64,
    /// Spectral gap of the down-up walk at this level, by symmetrized eigensolve.
    pub gap: f64,
    pub bl_gap_formula: f64,
}

/// All levels `0..=n` of one homogenization.
pub struct Ladder {
    levels: Vec<PartialConfigSpace>,
}

impl Ladder {
    pub fn new(model: &IsingModel) -> Result<Self> {
        let mu = enumerate_distribution(model)?;
        Self::from_distribution(&mu)
    }

    pub fn from_distribution(mu: &ExactDistribution) -> Result<Self> {
        let levels = (0..=mu.n())
            .map(|m| PartialConfigSpace::from_distribution(mu, m))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let levels = (0..=n)
            .map(|m| PartialConfigSpace::uniform_subsets(n, m))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    pub fn n(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, m: usize) -> &PartialConfigSpace {
        &self.levels[m]
    }

    pub fn kappa(&self, m: usize) -> Result<f64> {
        Ok(1.0 - chi2_contraction_coefficient(&self.levels[m], &self.levels[m - 1])?)
    }

    pub fn down_up_gap(&self, m: usize) -> Result<f64> {
        spectral_gap(&down_up_operator(&self.levels[m], &self.levels[m - 1])?)
    }

    /// Per-level contraction, bound, gap and formula rows for levels `1..=n`.
    pub fn spectrum(&self) -> Result<Vec<LevelSpectrum>> {
        let n = self.n();
        let kappas: Vec<f64> = (1..=n).map(|m| self.kappa(m)).collect::<Result<_>>()?;
        let kappa_n = kappas[n - 1];
        (1..=n)
            .map(|m| {
                Ok(LevelSpectrum {
                    level: m,
                    kappa_chi2: kappas[m - 1],
                    kappa_bound: mono_bound(n, m, kappa_n),
                    gap: self.down_up_gap(m)?,
                    bl_gap_formula: bl_gap(n, m),
                })
            })
            .collect()
    }
}
