//! Reference chains: random-scan Glauber dynamics and exact k-Glauber steps.
//!
//! These are correctness baselines. The block step enumerates all `2^k`
//! completions of the chosen block, so it is limited to
//! [`MAX_EXACT_BLOCK`] coordinates.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::{plus_probability, IsingModel, SpinVector};
use crate::rng::{fisher_yates_members, unit_f64, RngStream};

pub const MAX_EXACT_BLOCK: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub x: SpinVector,
    pub step_count: u64,
}

impl ChainState {
    pub fn new(model: &IsingModel, x: SpinVector) -> Result<Self> {
        if !x.is_full(model.n()) {
            return Err(Error::IndexMismatch(format!(
                "chain state must cover all {} coordinates",
                model.n()
            )));
        }
        Ok(Self { x, step_count: 0 })
    }
}

/// One transition of a chain on full configurations.
pub trait Stepper {
    fn step<R: RngCore + ?Sized>(&self, model: &IsingModel, x: &mut [f64], rng: &mut R);
}

/// Single-site random-scan Glauber dynamics.
#[derive(Clone, Copy, Debug, Default)]
pub struct Glauber;

/// Exact k-Glauber: resample a uniform `k`-block from its conditional law.
#[derive(Clone, Copy, Debug)]
pub struct KGlauberExact {
    k: usize,
}

impl KGlauberExact {
    pub fn new(model: &IsingModel, k: usize) -> Result<Self> {
        if k == 0 || k > model.n() {
            return Err(Error::InvalidSubset { m: model.n(), s: k });
        }
        if k > MAX_EXACT_BLOCK {
            return Err(Error::TooLarge {
                what: "exact k-Glauber block",
                size: k,
                limit: MAX_EXACT_BLOCK,
            });
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Probability that site `i` is set to `+1` when resampled given the rest of `x`.
pub fn site_plus_probability(model: &IsingModel, x: &[f64], i: usize) -> f64 {
    let all: Vec<usize> = (0..model.n()).collect();
    // J_ii = 0, so the full row dot is the sum over j ≠ i
    let local = model.block_dot(i, &all, x) + model.field()[i];
    plus_probability(local)
}

impl Stepper for Glauber {
    fn step<R: RngCore + ?Sized>(&self, model: &IsingModel, x: &mut [f64], rng: &mut R) {
        let n = model.n();
        let i = rng.random_range(0..n);
        let p = site_plus_probability(model, x, i);
        x[i] = if unit_f64(rng.next_u64()) < p {
            1.0
        } else {
            -1.0
        };
    }
}

/// Unnormalized log weights `½ yᵀJ_SS y + ⟨θ, y⟩` of every assignment `y` of
/// the block, indexed by bits (bit `t` set ⇔ `y_t = +1`).
pub(crate) fn block_log_weights(model: &IsingModel, block: &[usize], theta: &[f64]) -> Vec<f64> {
    let k = block.len();
    let mut y = vec![0.0; k];
    (0..1u64 << k)
        .map(|bits| {
            for (t, v) in y.iter_mut().enumerate() {
                *v = if bits >> t & 1 == 1 { 1.0 } else { -1.0 };
            }
            let lin: f64 = theta.iter().zip(&y).map(|(a, b)| a * b).sum();
            model.quadratic_on(block, &y) + lin
        })
        .collect()
}

impl KGlauberExact {
    /// Resample `block` of `x` exactly from its conditional law.
    pub(crate) fn resample_block<R: RngCore + ?Sized>(
        model: &IsingModel,
        block: &[usize],
        x: &mut [f64],
        rng: &mut R,
    ) {
        let comp: Vec<usize> = {
            let mut inb = vec![false; model.n()];
            for &i in block {
                inb[i] = true;
            }
            (0..model.n()).filter(|&i| !inb[i]).collect()
        };
        let comp_vals: Vec<f64> = comp.iter().map(|&i| x[i]).collect();
        let theta: Vec<f64> = block
            .iter()
            .map(|&i| model.block_dot(i, &comp, &comp_vals) + model.field()[i])
            .collect();
        let logw = block_log_weights(model, block, &theta);
        // streaming log-sum-exp
        let (mut top, mut acc) = (f64::NEG_INFINITY, 0.0f64);
        for &w in &logw {
            if w > top {
                acc = acc * (top - w).exp() + 1.0;
                top = w;
            } else {
                acc += (w - top).exp();
            }
        }
        let u = unit_f64(rng.next_u64()) * acc;
        let mut cum = 0.0;
        let mut chosen = logw.len() - 1;
        for (bits, &w) in logw.iter().enumerate() {
            cum += (w - top).exp();
            if u < cum {
                chosen = bits;
                break;
            }
        }
        for (t, &i) in block.iter().enumerate() {
            x[i] = if chosen >> t & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

impl Stepper for KGlauberExact {
    fn step<R: RngCore + ?Sized>(&self, model: &IsingModel, x: &mut [f64], rng: &mut R) {
        let block = fisher_yates_members(rng, model.n(), self.k);
        Self::resample_block(model, &block, x, rng);
    }
}

pub fn glauber_step(model: &IsingModel, state: &ChainState, rng: &RngStream) -> ChainState {
    apply_once(&Glauber, model, state, rng)
}

pub fn k_glauber_step_exact(
    model: &IsingModel,
    state: &ChainState,
    k: usize,
    rng: &RngStream,
) -> Result<ChainState> {
    let stepper = KGlauberExact::new(model, k)?;
    Ok(apply_once(&stepper, model, state, rng))
}

fn apply_once<S: Stepper>(
    stepper: &S,
    model: &IsingModel,
    state: &ChainState,
    rng: &RngStream,
) -> ChainState {
    let mut x = state.x.to_f64();
    stepper.step(model, &mut x, &mut rng.generator());
    ChainState {
        x: SpinVector::from_f64(state.x.indices().to_vec(), &x),
        step_count: state.step_count + 1,
    }
}

/// Run `steps` transitions from `x0`, drawing from a single generator keyed by `rng`.
pub fn run_chain<S: Stepper>(
    model: &IsingModel,
    x0: &SpinVector,
    stepper: &S,
    steps: u64,
    rng: &RngStream,
) -> Result<ChainState> {
    let mut state = ChainState::new(model, x0.clone())?;
    let mut x = state.x.to_f64();
    let mut g = rng.generator();
    for _ in 0..steps {
        stepper.step(model, &mut x, &mut g);
    }
    state.x = SpinVector::from_f64(x0.indices().to_vec(), &x);
    state.step_count = steps;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{
        enumerate_distribution, glauber_transition_matrix, k_glauber_transition_matrix,
    };
    use crate::model::gaussian_model;

    fn state_of(model: &IsingModel, bits: u64) -> ChainState {
        ChainState::new(model, SpinVector::from_bits((0..model.n()).collect(), bits)).unwrap()
    }

    #[test]
    fn glauber_matrix_from_step_kernel_matches_oracle() {
        let model = gaussian_model(4, 0.7, 0.4, 21).unwrap();
        let n = 4usize;
        let oracle = glauber_transition_matrix(&model).unwrap();
        for xb in 0..16u64 {
            let x = SpinVector::from_bits((0..n).collect(), xb).to_f64();
            let mut row = [0.0f64; 16];
            for i in 0..n {
                let p = site_plus_probability(&model, &x, i);
                let up = xb | (1 << i);
                let down = xb & !(1 << i);
                row[up as usize] += p / n as f64;
                row[down as usize] += (1.0 - p) / n as f64;
            }
            for yb in 0..16usize {
                let diff = (row[yb] - oracle.get(xb as usize, yb)).abs();
                assert!(diff < 1e-12, "x={xb} y={yb} diff={diff}");
            }
        }
    }

    #[test]
    fn k1_block_kernel_equals_glauber() {
        let model = gaussian_model(4, 0.6, 0.3, 5).unwrap();
        let g = glauber_transition_matrix(&model).unwrap();
        let k1 = k_glauber_transition_matrix(&model, 1).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert!((g.get(a, b) - k1.get(a, b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_weights_match_energy_differences() {
        let model = gaussian_model(6, 0.9, 0.5, 2).unwrap();
        let block = vec![1, 3, 4];
        let x = SpinVector::from_bits((0..6).collect(), 0b101101);
        let xv = x.to_f64();
        let s = crate::model::SubsetIndex::new(6, block.clone()).unwrap();
        let comp = SpinVector::new(
            s.complement(),
            s.complement().iter().map(|&i| x.values()[i]).collect(),
        )
        .unwrap();
        let theta = model.conditional_field(&s, &comp).unwrap();
        let logw = block_log_weights(&model, &block, &theta);
        for bits in 0..8u64 {
            let mut y = xv.clone();
            for (t, &i) in block.iter().enumerate() {
                y[i] = if bits >> t & 1 == 1 { 1.0 } else { -1.0 };
            }
            let e = model.energy_values(&y) - model.energy_values(&xv);
            let w = logw[bits as usize] - logw[x_bits_on(&xv, &block) as usize];
            assert!((e - w).abs() < 1e-12);
        }
    }

    fn x_bits_on(x: &[f64], block: &[usize]) -> u64 {
        block.iter().enumerate().fold(
            0,
            |acc, (t, &i)| if x[i] > 0.0 { acc | 1 << t } else { acc },
        )
    }

    #[test]
    fn zero_steps_and_determinism() {
        let model = gaussian_model(7, 0.5, 0.2, 1).unwrap();
        let x0 = SpinVector::full(vec![1, -1, 1, 1, -1, -1, 1]).unwrap();
        let s = run_chain(&model, &x0, &Glauber, 0, &RngStream::new(3)).unwrap();
        assert_eq!(s.x, x0);
        assert_eq!(s.step_count, 0);
        let a = run_chain(&model, &x0, &Glauber, 500, &RngStream::new(3)).unwrap();
        let b = run_chain(&model, &x0, &Glauber, 500, &RngStream::new(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.step_count, 500);
        let kg = KGlauberExact::new(&model, 3).unwrap();
        let c = run_chain(&model, &x0, &kg, 200, &RngStream::new(4)).unwrap();
        let d = run_chain(&model, &x0, &kg, 200, &RngStream::new(4)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn block_size_guards() {
        let model = gaussian_model(5, 0.5, 0.0, 1).unwrap();
        let st = state_of(&model, 0);
        assert!(k_glauber_step_exact(&model, &st, 0, &RngStream::new(0)).is_err());
        assert!(k_glauber_step_exact(&model, &st, 6, &RngStream::new(0)).is_err());
        let big = IsingModel::new(vec![0.0; 21 * 21], vec![0.0; 21]).unwrap();
        assert!(matches!(
            KGlauberExact::new(&big, 21),
            Err(Error::TooLarge { .. })
        ));
        let partial = SpinVector::new(vec![0, 1], vec![1, 1]).unwrap();
        assert!(ChainState::new(&model, partial).is_err());
    }

    #[test]
    fn single_steps_touch_only_chosen_sites() {
        let model = gaussian_model(8, 0.5, 0.1, 9).unwrap();
        let st = state_of(&model, 0b1010_1010);
        for seed in 0..50 {
            let next = glauber_step(&model, &st, &RngStream::new(seed));
            let diff = next
                .x
                .values()
                .iter()
                .zip(st.x.values())
                .filter(|(a, b)| a != b)
                .count();
            assert!(diff <= 1);
            assert_eq!(next.step_count, 1);
            let next = k_glauber_step_exact(&model, &st, 3, &RngStream::new(seed)).unwrap();
            let diff = next
                .x
                .values()
                .iter()
                .zip(st.x.values())
                .filter(|(a, b)| a != b)
                .count();
            assert!(diff <= 3);
        }
    }

    /// J = 0, h = 0: the block step's output coordinates are independent fair coins.
    #[test]
    fn uncoupled_blocks_factorize() {
        let model = IsingModel::new(vec![0.0; 36], vec![0.0; 6]).unwrap();
        let kg = KGlauberExact::new(&model, 6).unwrap();
        let mut counts = [0u64; 64];
        let mut g = RngStream::new(77).generator();
        let mut x = vec![1.0; 6];
        let draws = 64_000;
        for _ in 0..draws {
            kg.step(&model, &mut x, &mut g);
            counts[x_bits_on(&x, &[0, 1, 2, 3, 4, 5]) as usize] += 1;
        }
        let exp = draws as f64 / 64.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - exp).powi(2) / exp).sum();
        assert!(chi2 < 120.0, "chi2 = {chi2}");
    }

    #[test]
    fn two_site_long_run_matches_enumeration() {
        let model = IsingModel::new(vec![0.0, 0.5, 0.5, 0.0], vec![0.0, 0.0]).unwrap();
        let exact = enumerate_distribution(&model).unwrap();
        let mut g = RngStream::new(123).generator();
        let mut x = vec![1.0, -1.0];
        let mut counts = [0u64; 4];
        let steps = 1_000_000;
        for _ in 0..1000 {
            Glauber.step(&model, &mut x, &mut g);
        }
        for _ in 0..steps {
            Glauber.step(&model, &mut x, &mut g);
            counts[x_bits_on(&x, &[0, 1]) as usize] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(exact.probabilities())
            .map(|(&c, &p)| (c as f64 / steps as f64 - p).abs())
            .sum::<f64>()
            * 0.5;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn uniform_model_marginals_are_fair() {
        let model = IsingModel::new(vec![0.0; 25], vec![0.0; 5]).unwrap();
        let mut g = RngStream::new(5).generator();
        let mut x = vec![1.0; 5];
        for _ in 0..100 {
            Glauber.step(&model, &mut x, &mut g);
        }
        let steps = 200_000u64;
        let mut plus = [0u64; 5];
        for _ in 0..steps {
            Glauber.step(&model, &mut x, &mut g);
            for (c, &v) in plus.iter_mut().zip(&x) {
                if v > 0.0 {
                    *c += 1;
                }
            }
        }
        // correlation time ≈ n steps, so the effective sample size is about steps/n
        let sigma = (0.25 / (steps as f64 / 5.0)).sqrt();
        for &c in &plus {
            let f = c as f64 / steps as f64;
            assert!((f - 0.5).abs() < 3.0 * sigma * 2.0_f64.sqrt(), "f = {f}");
        }
    }
}
