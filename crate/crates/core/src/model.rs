//! Ising model representation and the quantities the sampler needs from it.
//!
//! The model is `μ(x) ∝ exp(½⟨x, Jx⟩ + ⟨h, x⟩)` on `{±1}^n`. Construction
//! symmetrizes `J` and clears its diagonal; since `x_i² = 1` the diagonal only
//! shifts the log-partition function and never the distribution.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Relative asymmetry accepted (and silently averaged away) by [`IsingModel::new`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Rows shorter than this are multiplied sequentially.
const PAR_ROWS_MIN: usize = 256;

/// Coupling storage. Dense row-major by default; the sparse form keeps
/// per-row sorted column lists and is produced by triplet files.
#[derive(Clone, Debug, PartialEq)]
pub enum Couplings {
    Dense(Vec<f64>),
    Sparse(SparseRows),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n: usize,
    couplings: Couplings,
    field: Vec<f64>,
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

impl IsingModel {
    /// Build from a dense row-major `n×n` matrix and a length-`n` field.
    ///
    /// The stored couplings are `(J + Jᵀ)/2` with the diagonal removed.
    /// Asymmetry larger than [`SYMMETRY_TOLERANCE`] times the largest entry is
    /// rejected.
    pub fn new(j_raw: Vec<f64>, field: Vec<f64>) -> Result<Self> {
        let n = field.len();
        if j_raw.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix (n² entries for a length-n field)",
                expected: n * n,
                found: j_raw.len(),
            });
        }
        check_finite(&j_raw, "coupling matrix")?;
        check_finite(&field, "external field")?;
        let scale = j_raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = SYMMETRY_TOLERANCE * scale;
        let mut j = j_raw;
        for a in 0..n {
            j[a * n + a] = 0.0;
            for b in (a + 1)..n {
                let (x, y) = (j[a * n + b], j[b * n + a]);
                let diff = (x - y).abs();
                if diff > tol {
                    return Err(Error::Asymmetric {
                        i: a,
                        j: b,
                        diff,
                        tol,
                    });
                }
                let avg = 0.5 * (x + y);
                j[a * n + b] = avg;
                j[b * n + a] = avg;
            }
        }
        Ok(Self {
            n,
            couplings: Couplings::Dense(j),
            field,
        })
    }

    /// Build from nested rows, as read from a dense file.
    pub fn from_rows(rows: &[Vec<f64>], field: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix row (matrix must be square)",
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), field)
    }

    /// Build sparse couplings from `(i, j, value)` triplets. The symmetric
    /// closure is taken: a triplet sets both `J_ij` and `J_ji`; if both are
    /// listed they must agree to [`SYMMETRY_TOLERANCE`]. Diagonal triplets are
    /// dropped.
    pub fn from_triplets(
        n: usize,
        triplets: &[(usize, usize, f64)],
        field: Vec<f64>,
    ) -> Result<Self> {
        if field.len() != n {
            return Err(Error::DimensionMismatch {
                what: "external field",
                expected: n,
                found: field.len(),
            });
        }
        check_finite(&field, "external field")?;
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        for (k, &(i, j, v)) in triplets.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::IndexMismatch(format!(
                    "triplet {k} has index ({i}, {j}) outside 0..{n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "coupling triplet",
                    index: k,
                });
            }
            if i != j {
                entries.push((i, j, v));
                entries.push((j, i, v));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let scale = entries.iter().fold(0.0f64, |a, e| a.max(e.2.abs()));
        let tol = SYMMETRY_TOLERANCE * scale;
        let mut offsets = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        for group in entries.chunk_by(|a, b| a.0 == b.0 && a.1 == b.1) {
            let (i, j, first) = group[0];
            // repeated (i, j) arises from listing both orientations
            if let Some(&(_, _, v)) = group.iter().find(|e| (e.2 - first).abs() > tol) {
                return Err(Error::Asymmetric {
                    i: i.min(j),
                    j: i.max(j),
                    diff: (v - first).abs(),
                    tol,
                });
            }
            let mean = group.iter().map(|e| e.2).sum::<f64>() / group.len() as f64;
            cols.push(j);
            vals.push(mean);
            offsets[i + 1] += 1;
        }
        for k in 1..=n {
            offsets[k] += offsets[k - 1];
        }
        Ok(Self {
            n,
            couplings: Couplings::Sparse(SparseRows {
                offsets,
                cols,
                vals,
            }),
            field,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.couplings, Couplings::Sparse(_))
    }

    /// Same couplings with a different external field.
    pub fn with_field(&self, field: Vec<f64>) -> Result<Self> {
        if field.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "external field",
                expected: self.n,
                found: field.len(),
            });
        }
        check_finite(&field, "external field")?;
        Ok(Self {
            n: self.n,
            couplings: self.couplings.clone(),
            field,
        })
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        match &self.couplings {
            Couplings::Dense(d) => d[i * self.n + j],
            Couplings::Sparse(s) => {
                let (cols, vals) = s.row(i);
                cols.binary_search(&j).map_or(0.0, |k| vals[k])
            }
        }
    }

    /// Dense copy of `J`, row-major.
    pub fn dense_couplings(&self) -> Vec<f64> {
        match &self.couplings {
            Couplings::Dense(d) => d.clone(),
            Couplings::Sparse(s) => {
                let mut d = vec![0.0; self.n * self.n];
                for i in 0..self.n {
                    let (cols, vals) = s.row(i);
                    for (&j, &v) in cols.iter().zip(vals) {
                        d[i * self.n + j] = v;
                    }
                }
                d
            }
        }
    }

    /// `Σ_t J[i, cols[t]] · vals[t]`, summed in index order.
    #[inline]
    pub fn block_dot(&self, i: usize, cols: &[usize], vals: &[f64]) -> f64 {
        debug_assert_eq!(cols.len(), vals.len());
        match &self.couplings {
            Couplings::Dense(d) => {
                let row = &d[i * self.n..(i + 1) * self.n];
                if cols.len() == self.n {
                    // sorted distinct indices of full length: the identity
                    row.iter().zip(vals).map(|(a, b)| a * b).sum()
                } else {
                    cols.iter().zip(vals).map(|(&c, &v)| row[c] * v).sum()
                }
            }
            Couplings::Sparse(s) => {
                let (rc, rv) = s.row(i);
                if cols.len() == self.n {
                    rc.iter().zip(rv).map(|(&c, &v)| v * vals[c]).sum()
                } else {
                    cols.iter()
                        .zip(vals)
                        .map(|(&c, &v)| rc.binary_search(&c).map_or(0.0, |k| rv[k] * v))
                        .sum()
                }
            }
        }
    }

    /// `J v` for a full-length vector. Rows are independent and each is summed
    /// in index order, so the result does not depend on the worker count.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let all: Vec<usize> = (0..self.n).collect();
        let row = |i: usize| self.block_dot(i, &all, v);
        if self.n >= PAR_ROWS_MIN {
            (0..self.n).into_par_iter().map(row).collect()
        } else {
            (0..self.n).map(row).collect()
        }
    }

    /// `½ xᵀJx + hᵀx` for a full configuration.
    pub fn energy(&self, x: &SpinVector) -> Result<f64> {
        if !x.is_full(self.n) {
            return Err(Error::IndexMismatch(format!(
                "energy needs a configuration over all {} coordinates, got {} indices",
                self.n,
                x.len()
            )));
        }
        Ok(self.energy_values(&x.to_f64()))
    }

    pub(crate) fn energy_values(&self, x: &[f64]) -> f64 {
        let jx = self.matvec(x);
        let quad: f64 = x.iter().zip(&jx).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.field).map(|(a, b)| a * b).sum();
        0.5 * quad + lin
    }

    /// `J_{S×Sᶜ} x_{Sᶜ} + h_S`: the external field of the conditional model on `S`.
    pub fn conditional_field(&self, s: &SubsetIndex, x_comp: &SpinVector) -> Result<Vec<f64>> {
        if s.parent_size() != self.n {
            return Err(Error::InvalidPartition(format!(
                "subset is over [{}] but the model has {} coordinates",
                s.parent_size(),
                self.n
            )));
        }
        let mut owner = vec![0u8; self.n];
        for &i in s.members() {
            owner[i] = 1;
        }
        for &i in x_comp.indices() {
            if i >= self.n {
                return Err(Error::InvalidPartition(format!(
                    "complement index {i} out of range"
                )));
            }
            if owner[i] != 0 {
                return Err(Error::InvalidPartition(format!(
                    "coordinate {i} is in both the subset and the complement"
                )));
            }
            owner[i] = 2;
        }
        if let Some(gap) = owner.iter().position(|&o| o == 0) {
            return Err(Error::InvalidPartition(format!(
                "coordinate {gap} is in neither the subset nor the complement"
            )));
        }
        let vals = x_comp.to_f64();
        Ok(s.members()
            .iter()
            .map(|&i| self.block_dot(i, x_comp.indices(), &vals) + self.field[i])
            .collect())
    }

    /// `½ x_Sᵀ J_{S×S} x_S`, the log density ratio of the block conditional to
    /// its product approximation (up to a constant).
    pub fn log_ratio_quadratic(&self, s: &SubsetIndex, x_s: &SpinVector) -> Result<f64> {
        if s.parent_size() != self.n || x_s.indices() != s.members() {
            return Err(Error::IndexMismatch(
                "spin vector must be indexed by exactly the subset members".into(),
            ));
        }
        Ok(self.quadratic_on(s.members(), &x_s.to_f64()))
    }

    /// `½ vᵀ J_{R×R} v` for `v` indexed by `members`.
    pub(crate) fn quadratic_on(&self, members: &[usize], v: &[f64]) -> f64 {
        let q: f64 = members
            .iter()
            .zip(v)
            .map(|(&i, &vi)| vi * self.block_dot(i, members, v))
            .sum();
        0.5 * q
    }

    /// `‖J_{S×S}‖_F`.
    pub fn submatrix_frobenius(&self, s: &SubsetIndex) -> Result<f64> {
        if s.parent_size() != self.n {
            return Err(Error::IndexMismatch(format!(
                "subset is over [{}] but the model has {} coordinates",
                s.parent_size(),
                self.n
            )));
        }
        Ok(self.frobenius_on(s.members()))
    }

    pub(crate) fn frobenius_on(&self, members: &[usize]) -> f64 {
        let sq = |i: usize| -> f64 {
            match &self.couplings {
                Couplings::Dense(d) => {
                    let row = &d[i * self.n..(i + 1) * self.n];
                    if members.len() == self.n {
                        row.iter().map(|v| v * v).sum()
                    } else {
                        members.iter().map(|&j| row[j] * row[j]).sum()
                    }
                }
                Couplings::Sparse(sp) => {
                    let (rc, rv) = sp.row(i);
                    if members.len() == self.n {
                        rv.iter().map(|v| v * v).sum()
                    } else {
                        rc.iter()
                            .zip(rv)
                            .filter(|(c, _)| members.binary_search(c).is_ok())
                            .map(|(_, v)| v * v)
                            .sum()
                    }
                }
            }
        };
        let total: f64 = if members.len() >= PAR_ROWS_MIN {
            members
                .par_iter()
                .map(|&i| sq(i))
                .collect::<Vec<_>>()
                .iter()
                .sum()
        } else {
            members.iter().map(|&i| sq(i)).sum()
        };
        total.sqrt()
    }

    /// `‖J‖_F` over all coordinates.
    pub fn frobenius(&self) -> f64 {
        let all: Vec<usize> = (0..self.n).collect();
        self.frobenius_on(&all)
    }

    /// Largest singular value of `J` by power iteration, to relative tolerance `tol`.
    pub fn operator_norm(&self, tol: f64) -> Result<f64> {
        self.operator_norm_with(&PowerIteration {
            tol,
            ..PowerIteration::default()
        })
    }

    pub fn operator_norm_with(&self, opts: &PowerIteration) -> Result<f64> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                opts.tol
            )));
        }
        let n = self.n;
        if n == 0 {
            return Ok(0.0);
        }
        let mut g = RngStream::new(opts.seed).generator();
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
        normalize(&mut v);
        let mut estimate = 0.0f64;
        // Iterating v ← Jv/‖Jv‖ and reading ‖Jv‖ is the Rayleigh quotient of J²,
        // which converges to ‖J‖² even when ±‖J‖ are both eigenvalues.
        let stop = opts.tol * 1e-2;
        for it in 1..=opts.max_iter {
            let mut w = self.matvec(&v);
            let norm = norm2(&w);
            if norm == 0.0 {
                return Ok(0.0);
            }
            for x in w.iter_mut() {
                *x /= norm;
            }
            let change = (norm - estimate).abs();
            estimate = norm;
            v = w;
            if it > 2 && change <= stop * estimate {
                return Ok(estimate);
            }
        }
        Err(Error::NotConverged {
            iterations: opts.max_iter,
        })
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Options for [`IsingModel::operator_norm_with`].
#[derive(Clone, Debug)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200_000,
            seed: 0x5EED,
        }
    }
}

/// Sherrington–Kirkpatrick couplings: upper-triangle entries i.i.d.
/// `N(0, β²/n)`, zero field. Row `i` draws from `split(i)` of the seed stream.
pub fn sk_model(n: usize, beta: f64, seed: u64) -> Result<IsingModel> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "SK model needs n ≥ 2, got {n}"
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "SK model needs β ≥ 0, got {beta}"
        )));
    }
    let sd = beta / (n as f64).sqrt();
    let root = RngStream::new(seed).split(0x5C);
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = root.split(i as u64).generator();
            ((i + 1)..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut g);
                    sd * z
                })
                .collect()
        })
        .collect();
    let mut j = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let c = i + 1 + k;
            j[i * n + c] = v;
            j[c * n + i] = v;
        }
    }
    IsingModel::new(j, vec![0.0; n])
}

/// Random instance with Gaussian couplings rescaled to operator norm `norm`
/// and Gaussian field of standard deviation `field_scale`.
pub fn gaussian_model(n: usize, norm: f64, field_scale: f64, seed: u64) -> Result<IsingModel> {
    let base = sk_model(n.max(2), 1.0, seed)?;
    let mut j = base.dense_couplings();
    if n < 2 {
        j = vec![0.0; n * n];
    }
    let current = if n < 2 {
        0.0
    } else {
        base.operator_norm_with(&PowerIteration {
            tol: 1e-12,
            max_iter: 1_000_000,
            seed: seed ^ 0xABCD,
        })?
    };
    if current > 0.0 {
        for v in j.iter_mut() {
            *v *= norm / current;
        }
    }
    let mut g = RngStream::new(seed).split(0xF1E1D).generator();
    let field: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut g);
            field_scale * z
        })
        .collect();
    IsingModel::new(j, field)
}

/// Element of `{±1}^S` for an ordered index set `S`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinVector {
    indices: Vec<usize>,
    values: Vec<i8>,
}

impl SpinVector {
    pub fn new(indices: Vec<usize>, values: Vec<i8>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "spin vector values",
                expected: indices.len(),
                found: values.len(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::IndexMismatch(
                "spin vector indices must be strictly increasing".into(),
            ));
        }
        if let Some(k) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(Error::IndexMismatch(format!(
                "spin value at position {k} is {} (expected ±1)",
                values[k]
            )));
        }
        Ok(Self { indices, values })
    }

    /// Configuration over `0..values.len()`.
    pub fn full(values: Vec<i8>) -> Result<Self> {
        Self::new((0..values.len()).collect(), values)
    }

    pub(crate) fn from_parts_unchecked(indices: Vec<usize>, values: Vec<i8>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        Self { indices, values }
    }

    pub(crate) fn from_f64(indices: Vec<usize>, values: &[f64]) -> Self {
        let values = values
            .iter()
            .map(|&v| if v > 0.0 { 1 } else { -1 })
            .collect();
        Self::from_parts_unchecked(indices, values)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self, n: usize) -> bool {
        self.indices.len() == n && self.indices.iter().enumerate().all(|(k, &i)| k == i)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Bit `k` set iff the `k`-th value is `+1`. Only for `len() ≤ 64`.
    pub fn to_bits(&self) -> u64 {
        debug_assert!(self.len() <= 64);
        self.values.iter().enumerate().fold(
            0u64,
            |acc, (k, &v)| if v > 0 { acc | (1 << k) } else { acc },
        )
    }

    pub fn from_bits(indices: Vec<usize>, bits: u64) -> Self {
        let values = (0..indices.len())
            .map(|k| if bits >> k & 1 == 1 { 1 } else { -1 })
            .collect();
        Self::from_parts_unchecked(indices, values)
    }
}

/// Independent ±1 coordinates with `P(x_i = +1) = e^{θ_i}/(e^{θ_i} + e^{−θ_i})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductDistribution {
    indices: Vec<usize>,
    field: Vec<f64>,
    p_plus: Vec<f64>,
}

impl ProductDistribution {
    pub fn new(indices: Vec<usize>, field: Vec<f64>) -> Result<Self> {
        if indices.len() != field.len() {
            return Err(Error::DimensionMismatch {
                what: "product distribution field",
                expected: indices.len(),
                found: field.len(),
            });
        }
        check_finite(&field, "product field")?;
        let p_plus = field.iter().map(|&t| plus_probability(t)).collect();
        Ok(Self {
            indices,
            field,
            p_plus,
        })
    }

    /// Product law over `0..field.len()`.
    pub fn from_field(field: Vec<f64>) -> Result<Self> {
        Self::new((0..field.len()).collect(), field)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn plus_probabilities(&self) -> &[f64] {
        &self.p_plus
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }

    /// `ln q(x)` for `x` given as ±1.0 values in index order.
    pub fn log_prob(&self, x: &[f64]) -> f64 {
        self.field
            .iter()
            .zip(x)
            .map(|(&t, &v)| t * v - log_two_cosh(t))
            .sum()
    }
}

/// `ln(e^t + e^{−t})` without overflow.
pub fn log_two_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// `σ(2θ) = e^θ/(e^θ + e^{−θ})`, branching on the sign of θ so that
/// no exponential overflows.
pub fn plus_probability(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-2.0 * theta).exp())
    } else {
        let e = (2.0 * theta).exp();
        e / (1.0 + e)
    }
}

/// Product proposal `q(x) ∝ exp⟨θ, x⟩` over `0..θ.len()`.
pub fn product_proposal(field: Vec<f64>) -> Result<ProductDistribution> {
    ProductDistribution::from_field(field)
}

/// Sorted `s`-subset of `[m]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsetIndex {
    parent_size: usize,
    members: Vec<usize>,
}

impl SubsetIndex {
    pub fn new(parent_size: usize, members: Vec<usize>) -> Result<Self> {
        if members.is_empty() || members.len() > parent_size {
            return Err(Error::InvalidSubset {
                m: parent_size,
                s: members.len(),
            });
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::IndexMismatch(
                "subset members must be strictly increasing".into(),
            ));
        }
        if *members.last().unwrap() >= parent_size {
            return Err(Error::IndexMismatch(format!(
                "subset member {} outside [{}]",
                members.last().unwrap(),
                parent_size
            )));
        }
        Ok(Self {
            parent_size,
            members,
        })
    }

    pub fn full(m: usize) -> Result<Self> {
        Self::new(m, (0..m).collect())
    }

    pub fn parent_size(&self) -> usize {
        self.parent_size
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Indices of `[m]` not in the subset, ascending.
    pub fn complement(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.parent_size - self.members.len());
        let mut it = self.members.iter().peekable();
        for i in 0..self.parent_size {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_energy(j: &[f64], h: &[f64], x: &[f64]) -> f64 {
        let n = h.len();
        let mut e = 0.0;
        for a in 0..n {
            for b in 0..n {
                e += 0.5 * j[a * n + b] * x[a] * x[b];
            }
            e += h[a] * x[a];
        }
        e
    }

    #[test]
    fn zero_model_and_diagonal_removal() {
        let m = IsingModel::new(vec![0.0; 4], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.dense_couplings(), vec![0.0; 4]);
        let m = IsingModel::new(vec![5.0, 0.3, 0.3, -2.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.dense_couplings(), vec![0.0, 0.3, 0.3, 0.0]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            IsingModel::new(vec![0.0; 3], vec![0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            IsingModel::new(vec![0.0, f64::NAN, f64::NAN, 0.0], vec![0.0, 0.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            IsingModel::new(vec![0.0, 0.3, 0.2, 0.0], vec![0.0, 0.0]),
            Err(Error::Asymmetric { .. })
        ));
        // round-off asymmetry is averaged away
        let m = IsingModel::new(vec![0.0, 0.3, 0.3 + 1e-12, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(m.coupling(0, 1), m.coupling(1, 0));
        assert!(IsingModel::from_rows(&[vec![0.0, 1.0], vec![1.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn energy_small_cases() {
        let zero = IsingModel::new(vec![0.0; 9], vec![0.0; 3]).unwrap();
        let x = SpinVector::full(vec![1, -1, 1]).unwrap();
        assert_eq!(zero.energy(&x).unwrap(), 0.0);
        let a = 0.7;
        let m = IsingModel::new(vec![0.0, a, a, 0.0], vec![0.0, 0.0]).unwrap();
        let x = SpinVector::full(vec![1, 1]).unwrap();
        assert!((m.energy(&x).unwrap() - a).abs() < 1e-15);
        let partial = SpinVector::new(vec![0], vec![1]).unwrap();
        assert!(m.energy(&partial).is_err());
    }

    #[test]
    fn energy_matches_double_loop() {
        let m = gaussian_model(10, 0.8, 0.5, 3).unwrap();
        let j = m.dense_couplings();
        let mut g = RngStream::new(8).generator();
        for _ in 0..20 {
            let vals: Vec<i8> = (0..10)
                .map(|_| {
                    if rand::Rng::random::<bool>(&mut g) {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            let x = SpinVector::full(vals).unwrap();
            let expect = naive_energy(&j, m.field(), &x.to_f64());
            assert!((m.energy(&x).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_field_examples() {
        let m = IsingModel::new(vec![0.0; 9], vec![0.1, 0.2, 0.3]).unwrap();
        let s = SubsetIndex::new(3, vec![1]).unwrap();
        let xc = SpinVector::new(vec![0, 2], vec![1, -1]).unwrap();
        assert_eq!(m.conditional_field(&s, &xc).unwrap(), vec![0.2]);

        let j = vec![0.0, 0.5, -0.2, 0.5, 0.0, 0.0, -0.2, 0.0, 0.0];
        let m = IsingModel::new(j, vec![0.0; 3]).unwrap();
        let s = SubsetIndex::new(3, vec![0]).unwrap();
        let xc = SpinVector::new(vec![1, 2], vec![1, 1]).unwrap();
        let f = m.conditional_field(&s, &xc).unwrap();
        assert!((f[0] - 0.3).abs() < 1e-15);

        // overlap and gap are rejected
        let overlap = SpinVector::new(vec![0, 1, 2], vec![1, 1, 1]).unwrap();
        assert!(matches!(
            m.conditional_field(&s, &overlap),
            Err(Error::InvalidPartition(_))
        ));
        let gap = SpinVector::new(vec![1], vec![1]).unwrap();
        assert!(matches!(
            m.conditional_field(&s, &gap),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn product_proposal_values() {
        let q = product_proposal(vec![0.0, 0.0]).unwrap();
        assert_eq!(q.plus_probabilities(), &[0.5, 0.5]);
        let q = product_proposal(vec![50.0, -50.0, 800.0, -800.0]).unwrap();
        let p = q.plus_probabilities();
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p[1] < 1e-15 && p[1] >= 0.0);
        assert_eq!(p[2], 1.0);
        assert_eq!(p[3], 0.0);
        let q = product_proposal(vec![0.3]).unwrap();
        let direct = 0.3f64.exp() / (0.3f64.exp() + (-0.3f64).exp());
        assert!((q.plus_probabilities()[0] - direct).abs() < 1e-15);
        assert!((direct - 0.645656).abs() < 1e-6);
        assert!(product_proposal(vec![f64::INFINITY]).is_err());
        assert!(log_two_cosh(1000.0).is_finite());
    }

    #[test]
    fn log_ratio_examples() {
        let m = gaussian_model(4, 0.5, 0.0, 1).unwrap();
        let s = SubsetIndex::new(4, vec![2]).unwrap();
        let x = SpinVector::new(vec![2], vec![-1]).unwrap();
        assert_eq!(m.log_ratio_quadratic(&s, &x).unwrap(), 0.0);

        let m = IsingModel::new(vec![0.0, 0.3, 0.3, 0.0], vec![0.0, 0.0]).unwrap();
        let s = SubsetIndex::full(2).unwrap();
        let x = SpinVector::full(vec![1, -1]).unwrap();
        assert!((m.log_ratio_quadratic(&s, &x).unwrap() + 0.3).abs() < 1e-15);
        let wrong = SpinVector::new(vec![0], vec![1]).unwrap();
        assert!(m.log_ratio_quadratic(&s, &wrong).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let zero = IsingModel::new(vec![0.0; 16], vec![0.0; 4]).unwrap();
        assert_eq!(
            zero.submatrix_frobenius(&SubsetIndex::full(4).unwrap())
                .unwrap(),
            0.0
        );
        let m = IsingModel::new(vec![0.0, 0.3, 0.3, 0.0], vec![0.0, 0.0]).unwrap();
        let f = m
            .submatrix_frobenius(&SubsetIndex::full(2).unwrap())
            .unwrap();
        assert!((f - (2.0f64 * 0.09).sqrt()).abs() < 1e-15);

        let m = gaussian_model(16, 1.0, 0.0, 9).unwrap();
        let j = m.dense_couplings();
        let s = SubsetIndex::new(16, vec![0, 2, 3, 7, 8, 11, 14, 15]).unwrap();
        let mut acc = 0.0;
        for &a in s.members() {
            for &b in s.members() {
                acc += j[a * 16 + b] * j[a * 16 + b];
            }
        }
        assert!((m.submatrix_frobenius(&s).unwrap() - acc.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_small_cases() {
        let zero = IsingModel::new(vec![0.0; 4], vec![0.0; 2]).unwrap();
        assert_eq!(zero.operator_norm(1e-9).unwrap(), 0.0);
        let m = IsingModel::new(vec![0.25, 0.25, 0.25, 0.25], vec![0.0; 2]).unwrap();
        assert!((m.operator_norm(1e-12).unwrap() - 0.25).abs() < 1e-12);
        assert!(m.operator_norm(0.0).is_err());
        let capped = gaussian_model(30, 1.0, 0.0, 2)
            .unwrap()
            .operator_norm_with(&PowerIteration {
                tol: 1e-15,
                max_iter: 3,
                seed: 1,
            });
        assert!(matches!(capped, Err(Error::NotConverged { iterations: 3 })));
    }

    #[test]
    fn operator_norm_matches_dense_eigensolver() {
        let m = sk_model(64, 0.7, 17).unwrap();
        let dense = nalgebra::DMatrix::from_row_slice(64, 64, &m.dense_couplings());
        let eig = dense.symmetric_eigenvalues();
        let exact = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-6;
        let est = m.operator_norm(tol).unwrap();
        assert!((est - exact).abs() <= tol * exact, "{est} vs {exact}");
    }

    #[test]
    fn sk_model_properties() {
        let a = sk_model(50, 0.3, 5).unwrap();
        let b = sk_model(50, 0.3, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sk_model(50, 0.3, 6).unwrap());
        let z = sk_model(10, 0.0, 1).unwrap();
        assert!(z.dense_couplings().iter().all(|&v| v == 0.0));
        assert!(sk_model(1, 0.3, 1).is_err());
        assert!(sk_model(4, -0.1, 1).is_err());
        let j = a.dense_couplings();
        for i in 0..50 {
            assert_eq!(j[i * 50 + i], 0.0);
            for k in 0..50 {
                assert_eq!(j[i * 50 + k], j[k * 50 + i]);
            }
        }
        // empirical variance of upper-triangle entries ≈ β²/n
        let big = sk_model(400, 1.0, 3).unwrap();
        let jb = big.dense_couplings();
        let mut s2 = 0.0;
        let mut cnt = 0.0;
        for i in 0..400 {
            for k in (i + 1)..400 {
                s2 += jb[i * 400 + k].powi(2);
                cnt += 1.0;
            }
        }
        let var = s2 / cnt;
        assert!((var * 400.0 - 1.0).abs() < 0.02, "var·n = {}", var * 400.0);
    }

    #[test]
    fn sparse_matches_dense() {
        let dense = gaussian_model(9, 0.6, 0.3, 4).unwrap();
        let j = dense.dense_couplings();
        let mut trip = Vec::new();
        for a in 0..9 {
            for b in (a + 1)..9 {
                if (a + b) % 3 != 0 {
                    trip.push((a, b, j[a * 9 + b]));
                }
            }
        }
        // also list a few reversed duplicates and a diagonal entry
        trip.push((5, 4, j[4 * 9 + 5]));
        trip.push((2, 2, 7.0));
        let sparse = IsingModel::from_triplets(9, &trip, dense.field().to_vec()).unwrap();
        let mut jd = vec![0.0; 81];
        for &(a, b, v) in &trip {
            if a != b {
                jd[a * 9 + b] = v;
                jd[b * 9 + a] = v;
            }
        }
        let twin = IsingModel::new(jd, dense.field().to_vec()).unwrap();
        assert_eq!(sparse.dense_couplings(), twin.dense_couplings());
        let v: Vec<f64> = (0..9).map(|i| (i as f64).cos()).collect();
        let (a, b) = (sparse.matvec(&v), twin.matvec(&v));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        let s = SubsetIndex::new(9, vec![1, 4, 5, 8]).unwrap();
        assert!(
            (sparse.submatrix_frobenius(&s).unwrap() - twin.submatrix_frobenius(&s).unwrap()).abs()
                < 1e-14
        );
        let bad = IsingModel::from_triplets(3, &[(0, 1, 0.2), (1, 0, 0.3)], vec![0.0; 3]);
        assert!(matches!(bad, Err(Error::Asymmetric { .. })));
        assert!(IsingModel::from_triplets(3, &[(0, 3, 0.2)], vec![0.0; 3]).is_err());
    }

    #[test]
    fn subset_index_validation() {
        assert!(SubsetIndex::new(3, vec![]).is_err());
        assert!(SubsetIndex::new(3, vec![1, 1]).is_err());
        assert!(SubsetIndex::new(3, vec![0, 3]).is_err());
        let s = SubsetIndex::new(6, vec![1, 4]).unwrap();
        assert_eq!(s.complement(), vec![0, 2, 3, 5]);
        assert!(SpinVector::new(vec![0, 1], vec![1, 0]).is_err());
        assert!(SpinVector::new(vec![1, 0], vec![1, 1]).is_err());
    }

    proptest! {
        #[test]
        fn diagonal_never_changes_energy_differences(
            diag in proptest::collection::vec(-3.0f64..3.0, 5),
            bits in 0u64..32,
            other in 0u64..32,
        ) {
            let base = gaussian_model(5, 0.7, 0.4, 12).unwrap();
            let mut j = base.dense_couplings();
            for (i, d) in diag.iter().enumerate() {
                j[i * 5 + i] = *d;
            }
            let shifted = IsingModel::new(j, base.field().to_vec()).unwrap();
            let x = SpinVector::from_bits((0..5).collect(), bits);
            let y = SpinVector::from_bits((0..5).collect(), other);
            let d0 = base.energy(&x).unwrap() - base.energy(&y).unwrap();
            let d1 = shifted.energy(&x).unwrap() - shifted.energy(&y).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn plus_probability_is_a_probability(theta in -1e6f64..1e6) {
            let p = plus_probability(theta);
            prop_assert!((0.0..=1.0).contains(&p));
            let q = plus_probability(-theta);
            prop_assert!((p + q - 1.0).abs() < 1e-15);
        }
    }
}
