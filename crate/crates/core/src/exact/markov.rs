use nalgebra::DMatrix;
use serde::Serialize;

use super::{enumerate_distribution, log_sum_exp, log_weights};
use crate::error::{Error, Result};
use crate::model::{plus_probability, IsingModel};

/// Largest `n` for which full `2^n × 2^n` chain matrices are assembled.
pub const MAX_CHAIN_SITES: usize = 14;
const MAX_SPEEDUP_SITES: usize = 12;
const REVERSIBILITY_TOLERANCE: f64 = 1e-8;

/// Row-stochastic matrix from a source space to a target space, optionally
/// annotated with the source measure it is paired with.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovMatrix {
    matrix: DMatrix<f64>,
    stationary: Option<Vec<f64>>,
}

impl MarkovMatrix {
    pub fn new(matrix: DMatrix<f64>, stationary: Option<Vec<f64>>) -> Result<Self> {
        if let Some(pi) = &stationary {
            if pi.len() != matrix.nrows() {
                return Err(Error::DimensionMismatch {
                    what: "stationary annotation",
                    expected: matrix.nrows(),
                    found: pi.len(),
                });
            }
        }
        let out = Self { matrix, stationary };
        let r = out.row_sum_residual();
        if r > 1e-12 || out.matrix.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "not a stochastic matrix (row-sum residual {r:e})"
            )));
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn stationary(&self) -> Option<&[f64]> {
        self.stationary.as_deref()
    }

    pub fn row_sum_residual(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_y |(πP)_y − π_y|` for a square matrix with annotation.
    pub fn stationarity_residual(&self) -> Option<f64> {
        let pi = self.stationary.as_ref()?;
        if self.rows() != self.cols() {
            return None;
        }
        let row = self.apply_left(pi);
        Some(
            row.iter()
                .zip(pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// `max_{x,y} |π_x P_xy − π_y P_yx|`.
    pub fn detailed_balance_residual(&self) -> Option<f64> {
        let pi = self.stationary.as_ref()?;
        if self.rows() != self.cols() {
            return None;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for x in 0..n {
            for y in x + 1..n {
                worst =
                    worst.max((pi[x] * self.matrix[(x, y)] - pi[y] * self.matrix[(y, x)]).abs());
            }
        }
        Some(worst)
    }

    /// Row vector `νP`.
    pub fn apply_left(&self, nu: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(nu);
        (self.matrix.tr_mul(&v)).iter().copied().collect()
    }

    /// `self` followed by `next`; keeps `self`'s annotation.
    pub fn then(&self, next: &MarkovMatrix) -> Result<MarkovMatrix> {
        if self.cols() != next.rows() {
            return Err(Error::DimensionMismatch {
                what: "kernel composition",
                expected: self.cols(),
                found: next.rows(),
            });
        }
        Ok(MarkovMatrix {
            matrix: &self.matrix * &next.matrix,
            stationary: self.stationary.clone(),
        })
    }
}

/// Eigenvalues of a symmetric matrix in decreasing order.
pub fn symmetric_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `1 − λ₂` of a reversible chain; `1` on a single state.
pub fn spectral_gap(p: &MarkovMatrix) -> Result<f64> {
    let pi = p
        .stationary()
        .ok_or_else(|| Error::InvalidConfig("spectral gap needs a stationary annotation".into()))?;
    if p.rows() != p.cols() {
        return Err(Error::DimensionMismatch {
            what: "spectral gap of a non-square kernel",
            expected: p.rows(),
            found: p.cols(),
        });
    }
    let residual = p.detailed_balance_residual().unwrap_or(0.0);
    if residual > REVERSIBILITY_TOLERANCE {
        return Err(Error::NonReversible { residual });
    }
    let n = p.rows();
    if n == 1 {
        return Ok(1.0);
    }
    let sq: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    let mut a = DMatrix::from_fn(n, n, |x, y| sq[x] * p.get(x, y) / sq[y]);
    let at = a.transpose();
    a += at;
    a *= 0.5;
    Ok(1.0 - symmetric_eigenvalues(a)[1])
}

fn check_chain_size(n: usize) -> Result<()> {
    if n > MAX_CHAIN_SITES {
        return Err(Error::TooLarge {
            what: "transition matrix",
            size: n,
            limit: MAX_CHAIN_SITES,
        });
    }
    Ok(())
}

/// Random-scan single-site Glauber kernel, assembled site by site.
pub fn glauber_transition_matrix(model: &IsingModel) -> Result<MarkovMatrix> {
    let n = model.n();
    check_chain_size(n)?;
    let states = 1usize << n;
    let mut p = DMatrix::zeros(states, states);
    let all: Vec<usize> = (0..n).collect();
    let mut x = vec![0.0; n];
    for xb in 0..states {
        for (i, v) in x.iter_mut().enumerate() {
            *v = if xb >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        for i in 0..n {
            let plus = plus_probability(model.block_dot(i, &all, &x) + model.field()[i]);
            p[(xb, xb | 1 << i)] += plus / n as f64;
            p[(xb, xb & !(1 << i))] += (1.0 - plus) / n as f64;
        }
    }
    let mu = enumerate_distribution(model)?;
    MarkovMatrix::new(p, Some(mu.probabilities().to_vec()))
}

/// k-Glauber kernel: uniform `k`-subset, exact conditional resample.
pub fn k_glauber_transition_matrix(model: &IsingModel, k: usize) -> Result<MarkovMatrix> {
    let n = model.n();
    check_chain_size(n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidSubset { m: n, s: k });
    }
    let states = 1usize << n;
    let logw = log_weights(model)?;
    let subsets: Vec<usize> = (0..states)
        .filter(|s| s.count_ones() as usize == k)
        .collect();
    let share = 1.0 / subsets.len() as f64;
    let mut p = DMatrix::zeros(states, states);
    let mut group = Vec::with_capacity(1 << k);
    let mut w = Vec::with_capacity(1 << k);
    for &s in &subsets {
        for base in (0..states).filter(|b| b & s == 0) {
            group.clear();
            // every completion of the block, via submask enumeration
            let mut sub = s;
            loop {
                group.push(base | sub);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            w.clear();
            w.extend(group.iter().map(|&y| logw[y]));
            let lz = log_sum_exp(&w);
            for &x in &group {
                for (&y, &wy) in group.iter().zip(&w) {
                    p[(x, y)] += share * (wy - lz).exp();
                }
            }
        }
    }
    let lz = log_sum_exp(&logw);
    let mu = logw.iter().map(|v| (v - lz).exp()).collect();
    MarkovMatrix::new(p, Some(mu))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KSpeedup {
    pub k: usize,
    pub lambda2_k: f64,
    pub bound: f64,
    pub slack: f64,
    /// `C = 1/(n·gap(P_μ))`.
    pub poincare_constant: f64,
}

/// Compares every block size against the bound derived from one Glauber gap.
pub struct KSpeedupSweep<'a> {
    model: &'a IsingModel,
    constant: f64,
}

impl<'a> KSpeedupSweep<'a> {
    pub fn new(model: &'a IsingModel) -> Result<Self> {
        let n = model.n();
        if n > MAX_SPEEDUP_SITES {
            return Err(Error::TooLarge {
                what: "speedup check",
                size: n,
                limit: MAX_SPEEDUP_SITES,
            });
        }
        let gap = spectral_gap(&glauber_transition_matrix(model)?)?;
        Ok(Self {
            model,
            constant: 1.0 / (n as f64 * gap),
        })
    }

    pub fn poincare_constant(&self) -> f64 {
        self.constant
    }

    pub fn check(&self, k: usize) -> Result<KSpeedup> {
        let n = self.model.n() as f64;
        let lambda2_k = 1.0 - spectral_gap(&k_glauber_transition_matrix(self.model, k)?)?;
        let bound = (1.0 - k as f64 / (n + 1.0)).powf(1.0 / (self.constant + 1.0));
        Ok(KSpeedup {
            k,
            lambda2_k,
            bound,
            slack: bound - lambda2_k,
            poincare_constant: self.constant,
        })
    }
}

pub fn verify_k_speedup(model: &IsingModel, k: usize) -> Result<KSpeedup> {
    KSpeedupSweep::new(model)?.check(k)
}
