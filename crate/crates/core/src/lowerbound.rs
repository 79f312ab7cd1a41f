//! Simulator for the random-input packing construction.
//!
//! The stream `[1, T]` is cut into `m = √T` blocks of length `B = √T`. A base
//! string `x⁽⁰⁾` is uniform among strings whose every block count lies in
//! `[B/4, 3B/4]`; `x⁽ⁱ⁾` flips `k` zeros of block `i` to ones. Running a
//! mechanism on a pair of strings and watching the difference of the two
//! outputs at block ends defines the disjoint events `E_j` ("the difference
//! exceeds `k/2` for the first time at the end of block `j`").

use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::mechanisms::ContinualCounter;

/// Attempts allowed per block before sampling gives up.
pub const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundConfig {
    /// Stream length `T`; must be a perfect square.
    pub horizon: u64,
    /// Block length `B = √T`, divisible by 4.
    pub block: u32,
    /// Number of blocks `m = T/B`.
    pub blocks: u32,
    /// Number of flipped bits `k`, even, at most `B/4`.
    pub flips: u32,
    /// Error threshold `α = k/4`.
    pub alpha: f64,
    pub epsilon: f64,
    pub trials: u64,
    pub seed: u64,
}

impl LowerBoundConfig {
    pub fn new(horizon: u64, flips: u32, epsilon: f64, trials: u64, seed: u64) -> Result<Self> {
        let block = horizon.isqrt();
        if block * block != horizon || horizon == 0 {
            return domain(format!("T={horizon} is not a perfect square"));
        }
        if !block.is_multiple_of(4) {
            return domain(format!("block length B={block} is not divisible by 4"));
        }
        let block =
            u32::try_from(block).map_err(|_| Error::Domain(format!("T={horizon} too large")))?;
        check_flips(block, flips)?;
        if flips == 0 {
            return domain("flip count k must be at least 2");
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return domain(format!(
                "epsilon must be positive and finite, got {epsilon}"
            ));
        }
        if trials == 0 {
            return domain("trials must be at least 1");
        }
        Ok(Self {
            horizon,
            block,
            blocks: block,
            flips,
            alpha: flips as f64 / 4.0,
            epsilon,
            trials,
            seed,
        })
    }

    /// Last index of block `j` (1-based).
    pub fn block_end(&self, j: u32) -> u64 {
        j as u64 * self.block as u64
    }
}

fn check_block(block: u32) -> Result<()> {
    if block == 0 || !block.is_multiple_of(4) {
        return domain(format!(
            "block length B={block} must be a positive multiple of 4"
        ));
    }
    Ok(())
}

fn check_flips(block: u32, flips: u32) -> Result<()> {
    if !flips.is_multiple_of(2) {
        return domain(format!("flip count k={flips} must be even"));
    }
    if flips > block / 4 {
        return domain(format!("flip count k={flips} exceeds B/4={}", block / 4));
    }
    Ok(())
}

/// Pmf of a block count over `0..=B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCountDistribution {
    pub block: u32,
    pub pmf: Vec<f64>,
}

/// `ln C(B, j)` for `j = 0..=B`, accumulated term by term.
fn ln_binomial_row(block: u32) -> Vec<f64> {
    let mut row = Vec::with_capacity(block as usize + 1);
    let mut acc = 0.0f64;
    row.push(acc);
    for j in 1..=block {
        acc += ((block - j + 1) as f64).ln() - (j as f64).ln();
        row.push(acc);
    }
    row
}

impl BlockCountDistribution {
    /// `Bin(B, 1/2)` conditioned on `[B/4, 3B/4]`.
    pub fn conditioned(block: u32) -> Result<Self> {
        check_block(block)?;
        let (lo, hi) = (block as usize / 4, 3 * block as usize / 4);
        let row = ln_binomial_row(block);
        let peak = row[block as usize / 2];
        let mut pmf = vec![0.0; block as usize + 1];
        for j in lo..=hi {
            pmf[j] = (row[j] - peak).exp();
        }
        let z: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= z);
        Ok(Self { block, pmf })
    }

    /// Distribution of the count after adding `k` ones.
    pub fn shifted(&self, k: u32) -> Self {
        let k = k as usize;
        let mut pmf = vec![0.0; self.pmf.len() + k];
        pmf[k..].copy_from_slice(&self.pmf);
        Self {
            block: self.block,
            pmf,
        }
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        let n = self.pmf.len().max(other.pmf.len());
        let at = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
        0.5 * (0..n)
            .map(|i| (at(&self.pmf, i) - at(&other.pmf, i)).abs())
            .sum::<f64>()
    }
}

/// `Pr[B/4 ≤ X ≤ 3B/4]` for `X ~ Bin(B, 1/2)`.
pub fn block_acceptance(block: u32) -> Result<f64> {
    check_block(block)?;
    let row = ln_binomial_row(block);
    let ln2b = block as f64 * std::f64::consts::LN_2;
    let (lo, hi) = (block as usize / 4, 3 * block as usize / 4);
    Ok((lo..=hi).map(|j| (row[j] - ln2b).exp()).sum())
}

/// Probability that a uniform block is rejected, summed over the tails so it
/// stays accurate when it is far below machine epsilon.
pub fn block_rejection(block: u32) -> Result<f64> {
    check_block(block)?;
    let row = ln_binomial_row(block);
    let ln2b = block as f64 * std::f64::consts::LN_2;
    let (lo, hi) = (block as usize / 4, 3 * block as usize / 4);
    Ok((0..=block as usize)
        .filter(|&j| j < lo || j > hi)
        .map(|j| (row[j] - ln2b).exp())
        .sum())
}

/// `1 − (1 − r)^m` for per-block rejection `r` over `m` blocks.
pub fn string_rejection(horizon: u64) -> Result<f64> {
    let b = horizon.isqrt();
    if b * b != horizon || b > u32::MAX as u64 {
        return crate::error::domain(format!("T={horizon} is not a perfect square"));
    }
    let r = block_rejection(b as u32)?;
    Ok(-((b as f64) * (-r).ln_1p()).exp_m1())
}

/// Exact total variation between the conditioned block count and its
/// `k`-shift.
pub fn exact_block_tv(block: u32, flips: u32) -> Result<f64> {
    check_block(block)?;
    check_flips(block, flips)?;
    let base = BlockCountDistribution::conditioned(block)?;
    Ok(base.total_variation(&base.shifted(flips)))
}

/// `(6√2/√π) · k/√B`.
pub fn block_tv_bound(block: u32, flips: u32) -> f64 {
    6.0 * std::f64::consts::SQRT_2 / std::f64::consts::PI.sqrt() * flips as f64
        / (block as f64).sqrt()
}

/// `2√T · exp(−√T/8)`, the distance between `x⁽⁰⁾` and a uniform string.
pub fn base_string_tv_bound(horizon: u64) -> f64 {
    let s = (horizon as f64).sqrt();
    2.0 * s * (-s / 8.0).exp()
}

/// `10 · T^(−1/20)`.
pub fn derived_string_tv_bound(horizon: u64) -> f64 {
    10.0 * (horizon as f64).powf(-0.05)
}

/// Fills `out` with uniform bits; returns the number of ones.
fn fill_block<R: RngCore + ?Sized>(out: &mut [u8], rng: &mut R) -> u32 {
    let mut ones = 0;
    for chunk in out.chunks_mut(64) {
        let word = rng.next_u64();
        for (i, b) in chunk.iter_mut().enumerate() {
            *b = ((word >> i) & 1) as u8;
            ones += *b as u32;
        }
    }
    ones
}

/// Draws one block by rejection; returns the attempts used.
fn sample_block<R: RngCore + ?Sized>(out: &mut [u8], rng: &mut R) -> Result<usize> {
    let b = out.len() as u32;
    for attempt in 1..=REJECTION_CAP {
        let ones = fill_block(out, rng);
        if (b / 4..=3 * b / 4).contains(&ones) {
            return Ok(attempt);
        }
    }
    Err(Error::Resample(REJECTION_CAP))
}

/// Uniform string whose every block count lies in `[B/4, 3B/4]`.
pub fn sample_x0<R: RngCore + ?Sized>(config: &LowerBoundConfig, rng: &mut R) -> Result<Vec<u8>> {
    let mut x = vec![0u8; config.horizon as usize];
    for block in x.chunks_mut(config.block as usize) {
        sample_block(block, rng)?;
    }
    Ok(x)
}

/// Copy of `x0` with `k` zeros of block `i` (1-based) flipped to one.
pub fn derive_xi<R: Rng + ?Sized>(
    x0: &[u8],
    block_index: u32,
    flips: u32,
    block: u32,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let start = (block_index as usize)
        .checked_sub(1)
        .map(|j| j * block as usize)
        .filter(|&s| s + block as usize <= x0.len())
        .ok_or_else(|| Error::Domain(format!("block {block_index} outside the stream")))?;
    let zeros: Vec<usize> = (start..start + block as usize)
        .filter(|&i| x0[i] == 0)
        .collect();
    if zeros.len() < flips as usize {
        return Err(Error::Invariant(format!(
            "block {block_index} has {} zeros, fewer than k={flips}",
            zeros.len()
        )));
    }
    let mut xi = x0.to_vec();
    for idx in sample_indices(rng, zeros.len(), flips as usize) {
        xi[zeros[idx]] = 1;
    }
    Ok(xi)
}

/// Seeds of the two mechanism copies used in one distinguisher run.
fn pair_seeds(seed: u64) -> (u64, u64) {
    (seed.wrapping_mul(2), seed.wrapping_mul(2).wrapping_add(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairRun {
    event: Option<u32>,
    max_err_first: f64,
    max_err_second: f64,
}

fn run_pair<M, F>(
    factory: &F,
    y: &[u8],
    y_prime: &[u8],
    config: &LowerBoundConfig,
    seed: u64,
) -> Result<PairRun>
where
    M: ContinualCounter,
    F: Fn(u64) -> Result<M>,
{
    if y.len() as u64 != config.horizon || y_prime.len() as u64 != config.horizon {
        return domain(format!("both inputs must have T={} bits", config.horizon));
    }
    let (s1, s2) = pair_seeds(seed);
    let mut a = factory(s1)?;
    let mut b = factory(s2)?;
    let threshold = config.flips as f64 / 2.0;
    let block = config.block as usize;
    let (mut sum_a, mut sum_b) = (0u64, 0u64);
    let (mut err_a, mut err_b) = (0.0f64, 0.0f64);
    let mut event = None;
    for (t, (&u, &v)) in y.iter().zip(y_prime).enumerate() {
        let out_a = a.feed(u)?;
        let out_b = b.feed(v)?;
        sum_a += u as u64;
        sum_b += v as u64;
        err_a = err_a.max((out_a - sum_a as f64).abs());
        err_b = err_b.max((out_b - sum_b as f64).abs());
        if event.is_none() && (t + 1) % block == 0 && out_a - out_b > threshold {
            event = Some(((t + 1) / block) as u32);
        }
    }
    Ok(PairRun {
        event,
        max_err_first: err_a,
        max_err_second: err_b,
    })
}

/// Runs two independent mechanisms on `y` and `y'` and returns the first
/// block `j` whose end-of-block output difference exceeds `k/2`.
pub fn run_distinguisher<M, F>(
    factory: &F,
    y: &[u8],
    y_prime: &[u8],
    config: &LowerBoundConfig,
    seed: u64,
) -> Result<Option<u32>>
where
    M: ContinualCounter,
    F: Fn(u64) -> Result<M>,
{
    run_pair(factory, y, y_prime, config, seed).map(|r| r.event)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEstimate {
    pub block: u32,
    /// Estimated `Pr[E_i]` on `(x⁽ⁱ⁾, x⁽⁰⁾)`.
    pub pr_event: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingReport {
    pub config: LowerBoundConfig,
    pub per_block: Vec<BlockEstimate>,
    /// Estimated `Σ_j Pr[E_j]` on `(x⁽⁰⁾, x⁽⁰⁾)`.
    pub sum_null: f64,
    pub sum_null_se: f64,
    /// Fraction of single-mechanism runs on `x⁽⁰⁾` with max error `≤ α`.
    pub pr_err_within_alpha: f64,
    pub tv_exact: f64,
    pub tv_bound: f64,
    pub base_tv_bound: f64,
    pub derived_tv_bound: f64,
    /// `m·e^(−kε)/2`; the packing argument needs this to be at most 1.
    pub packing_value: f64,
    /// `ε⁻¹ ln(m/2)`.
    pub flips_threshold: f64,
}

fn proportion(hits: u64, n: u64) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Monte-Carlo estimates of the event probabilities behind the packing bound.
pub fn packing_experiment<M, F>(config: &LowerBoundConfig, factory: &F) -> Result<PackingReport>
where
    M: ContinualCounter,
    F: Fn(u64) -> Result<M> + Sync,
{
    let trials = config.trials;
    let m = config.blocks;
    let run_seed = |slot: u64| config.seed.wrapping_add(slot);

    let hits: Vec<u64> = (1..=m)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut hits = 0;
            for r in 0..trials {
                let s = run_seed(i as u64 * trials + r);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let x0 = sample_x0(config, &mut rng)?;
                let xi = derive_xi(&x0, i, config.flips, config.block, &mut rng)?;
                if run_distinguisher(factory, &xi, &x0, config, s)? == Some(i) {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;

    let null_runs: Vec<PairRun> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let s = run_seed((m as u64 + 1) * trials + r);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let x0 = sample_x0(config, &mut rng)?;
            run_pair(factory, &x0, &x0, config, s)
        })
        .collect::<Result<_>>()?;

    let per_block = hits
        .iter()
        .zip(1..)
        .map(|(&h, block)| {
            let (pr_event, se) = proportion(h, trials);
            BlockEstimate {
                block,
                pr_event,
                se,
            }
        })
        .collect();
    let fired = null_runs.iter().filter(|r| r.event.is_some()).count() as u64;
    let (sum_null, sum_null_se) = proportion(fired, trials);
    let accurate = null_runs
        .iter()
        .map(|r| {
            (r.max_err_first <= config.alpha) as u64 + (r.max_err_second <= config.alpha) as u64
        })
        .sum::<u64>();

    Ok(PackingReport {
        per_block,
        sum_null,
        sum_null_se,
        pr_err_within_alpha: accurate as f64 / (2 * trials) as f64,
        tv_exact: exact_block_tv(config.block, config.flips)?,
        tv_bound: block_tv_bound(config.block, config.flips),
        base_tv_bound: base_string_tv_bound(config.horizon),
        derived_tv_bound: derived_string_tv_bound(config.horizon),
        packing_value: m as f64 * (-(config.flips as f64) * config.epsilon).exp() / 2.0,
        flips_threshold: (m as f64 / 2.0).ln() / config.epsilon,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::Variant;
    use crate::mechanisms::{Mechanism, MechanismConfig};

    fn factory(
        variant: Variant,
        k: u32,
        horizon: u64,
        epsilon: f64,
        zero: bool,
    ) -> impl Fn(u64) -> Result<Mechanism> + Sync {
        move |seed| {
            let cfg = MechanismConfig::new(variant, k, horizon, epsilon)?
                .seed(seed)
                .zero_noise(zero);
            Mechanism::new(cfg)
        }
    }

    #[test]
    fn config_validation() {
        assert!(LowerBoundConfig::new(256, 4, 1.0, 1, 0).is_ok());
        assert!(LowerBoundConfig::new(10_000, 8, 1.0, 1, 0).is_ok());
        assert!(LowerBoundConfig::new(10_001, 8, 1.0, 1, 0).is_err());
        assert!(LowerBoundConfig::new(100, 2, 1.0, 1, 0).is_err()); // B = 10
        assert!(LowerBoundConfig::new(256, 3, 1.0, 1, 0).is_err());
        assert!(LowerBoundConfig::new(256, 6, 1.0, 1, 0).is_err());
        let c = LowerBoundConfig::new(1024, 8, 1.0, 1, 0).unwrap();
        assert_eq!((c.block, c.blocks, c.alpha), (32, 32, 2.0));
    }

    #[test]
    fn pmf_normalised_and_symmetric() {
        for b in [4u32, 8, 64, 256, 1024] {
            let d = BlockCountDistribution::conditioned(b).unwrap();
            assert!((d.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let half = b as usize / 2;
            for l in 0..=half {
                assert!((d.pmf[half + l] - d.pmf[half - l]).abs() < 1e-15);
                if l > b as usize / 4 {
                    assert_eq!(d.pmf[half + l], 0.0);
                }
            }
        }
    }

    #[test]
    fn tv_examples() {
        let tv = exact_block_tv(8, 2).unwrap();
        assert!((tv - 63.0 / 119.0).abs() < 1e-12);
        assert_eq!(exact_block_tv(64, 0).unwrap(), 0.0);
        for b in [64u32, 256, 1024] {
            for k in (2..=b / 4).step_by(2) {
                assert!(exact_block_tv(b, k).unwrap() <= block_tv_bound(b, k));
            }
        }
        assert!(exact_block_tv(8, 4).is_err());
        assert!(exact_block_tv(10, 2).is_err());
    }

    #[test]
    fn degenerate_block_of_four() {
        let c = LowerBoundConfig {
            horizon: 16,
            block: 4,
            blocks: 4,
            flips: 0,
            alpha: 0.0,
            epsilon: 1.0,
            trials: 1,
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [false; 5];
        for _ in 0..2000 {
            let x = sample_x0(&c, &mut rng).unwrap();
            for block in x.chunks(4) {
                let ones: u32 = block.iter().map(|&b| b as u32).sum();
                assert!((1..=3).contains(&ones));
                seen[ones as usize] = true;
            }
        }
        assert_eq!(seen, [false, true, true, true, false]);
        // 14 of the 16 four-bit blocks are admissible
        assert!((block_acceptance(4).unwrap() - 14.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn acceptance_rate_matches_hoeffding() {
        let b = 16usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut block = vec![0u8; b];
        let n = 200_000;
        let attempts: usize = (0..n)
            .map(|_| sample_block(&mut block, &mut rng).unwrap())
            .sum();
        let rate = n as f64 / attempts as f64;
        let floor = 1.0 - 2.0 * (-(b as f64) / 8.0).exp();
        let se = (rate * (1.0 - rate) / attempts as f64).sqrt();
        assert!(rate >= floor - 3.0 * se, "{rate} < {floor}");
        assert!((rate - block_acceptance(16).unwrap()).abs() <= 4.0 * se);
    }

    #[test]
    fn derived_strings() {
        let c = LowerBoundConfig::new(1024, 8, 1.0, 1, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in [1u32, 7, 32] {
            let x0 = sample_x0(&c, &mut rng).unwrap();
            let xi = derive_xi(&x0, i, 8, 32, &mut rng).unwrap();
            let diff: Vec<usize> = (0..1024).filter(|&t| x0[t] != xi[t]).collect();
            assert_eq!(diff.len(), 8);
            let lo = (i as usize - 1) * 32;
            assert!(diff.iter().all(|&t| t >= lo && t < lo + 32 && x0[t] == 0));
            let mut p0 = 0i64;
            let mut pi = 0i64;
            for t in 0..1024 {
                p0 += x0[t] as i64;
                pi += xi[t] as i64;
                if (t + 1) % 32 == 0 {
                    let j = (t + 1) / 32;
                    assert_eq!(pi - p0, if j < i as usize { 0 } else { 8 });
                }
            }
        }
        let x0 = vec![1u8; 1024];
        assert!(matches!(
            derive_xi(&x0, 1, 8, 32, &mut rng),
            Err(Error::Invariant(_))
        ));
        assert!(derive_xi(&x0, 0, 8, 32, &mut rng).is_err());
        assert!(derive_xi(&x0, 33, 8, 32, &mut rng).is_err());
    }

    #[test]
    fn zero_noise_distinguisher() {
        let c = LowerBoundConfig::new(256, 4, 1.0, 1, 0).unwrap();
        let f = factory(Variant::OffsetOdd, 3, 256, 1.0, true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 1..=16 {
            let x0 = sample_x0(&c, &mut rng).unwrap();
            let xi = derive_xi(&x0, i, 4, 16, &mut rng).unwrap();
            assert_eq!(
                run_distinguisher(&f, &xi, &x0, &c, i as u64).unwrap(),
                Some(i)
            );
            assert_eq!(run_distinguisher(&f, &x0, &x0, &c, i as u64).unwrap(), None);
        }
        assert!(run_distinguisher(&f, &[0; 3], &[0; 256], &c, 0).is_err());
    }

    #[test]
    fn packing_with_zero_noise() {
        let c = LowerBoundConfig::new(256, 4, 1.0, 20, 3).unwrap();
        let r = packing_experiment(&c, &factory(Variant::OffsetOdd, 19, 256, 1.0, true)).unwrap();
        assert!(r.per_block.iter().all(|b| b.pr_event == 1.0));
        assert_eq!(r.sum_null, 0.0);
        assert_eq!(r.pr_err_within_alpha, 1.0);
        assert_eq!(r.per_block.len(), 16);
    }

    #[test]
    fn packing_is_deterministic_and_bounded() {
        let c = LowerBoundConfig::new(256, 4, 1.0, 200, 11).unwrap();
        let f = factory(Variant::OffsetOdd, 3, 256, 1.0, false);
        let a = packing_experiment(&c, &f).unwrap();
        let b = packing_experiment(&c, &f).unwrap();
        assert_eq!(a, b);
        assert!(a.sum_null <= 1.0 + 3.0 * a.sum_null_se);
    }

    #[test]
    fn large_epsilon_detects_the_flipped_block() {
        let eps = 10.0;
        let m = 32f64;
        let k = 8 * (m.ln() / eps).ceil() as u32;
        let c = LowerBoundConfig::new(1024, k, eps, 200, 21).unwrap();
        let r = packing_experiment(&c, &factory(Variant::OffsetOdd, 19, 1024, eps, false)).unwrap();
        for b in &r.per_block {
            assert!(
                b.pr_event >= 0.5 - 3.0 * b.se,
                "block {} {}",
                b.block,
                b.pr_event
            );
        }
    }

    #[test]
    fn tv_bounds_on_grid() {
        for t in [400u64, 1024, 4096, 16_384, 65_536, 1 << 20] {
            let b = t.isqrt() as u32;
            let miss = string_rejection(t).unwrap();
            assert!(
                miss > 0.0 && miss <= base_string_tv_bound(t),
                "T={t} miss={miss}"
            );
            let r = block_rejection(b).unwrap();
            assert!((r + block_acceptance(b).unwrap() - 1.0).abs() < 1e-12);
            for k in [2u32, 4] {
                let tv = exact_block_tv(b, k).unwrap();
                assert!(
                    tv + base_string_tv_bound(t) <= derived_string_tv_bound(t),
                    "T={t} k={k}"
                );
            }
        }
    }
}
