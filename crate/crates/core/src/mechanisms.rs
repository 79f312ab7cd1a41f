//! Streaming tree mechanisms for private prefix sums.
//!
//! Every variant releases `Σ_{i≤t} x_i` plus the sum of the Laplace noise
//! terms of the tree vertices named by the digit representation of `t`. Noise
//! terms are addressed by the running position `p` of the digit walk and drawn
//! from a [`KeyedLaplace`] stream, so the streaming engine ([`Mechanism`]) and
//! the batch reference ([`TreeOracle`]) see identical noise under the same seed.

use std::collections::HashMap;

use crate::digits::{height_for, max_value, pow, DigitVector, Variant};
use crate::error::{domain, Error, Result};
use crate::noise::{calibrate_pure_laplace, KeyedLaplace};

/// Upper bound on the number of leaves the batch oracle will materialise.
pub const ORACLE_MAX_LEAVES: u128 = 1 << 24;

/// Anything that consumes a bit stream and releases one estimate per bit.
pub trait ContinualCounter {
    fn feed(&mut self, bit: u8) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    pub variant: Variant,
    pub k: u32,
    /// Stream length `T`.
    pub horizon: u64,
    /// Tree height `h` (digit width).
    pub height: u32,
    pub epsilon: f64,
    pub seed: u64,
    /// Forces the noise scale to zero. Output is then NOT private.
    pub zero_noise: bool,
}

impl MechanismConfig {
    /// Config for a stream of `horizon` bits; the height is the smallest one
    /// whose digit range covers `horizon`.
    pub fn new(variant: Variant, k: u32, horizon: u64, epsilon: f64) -> Result<Self> {
        if horizon == 0 {
            return domain("stream length must be at least 1");
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return domain(format!(
                "epsilon must be positive and finite, got {epsilon}"
            ));
        }
        let height = height_for(variant, k, horizon)?;
        Ok(Self {
            variant,
            k,
            horizon,
            height,
            epsilon,
            seed: 0,
            zero_noise: false,
        })
    }

    /// Config for the largest stream a tree of height `h` supports.
    pub fn with_height(variant: Variant, k: u32, height: u32, epsilon: f64) -> Result<Self> {
        if height == 0 {
            return domain("height must be at least 1");
        }
        let horizon = natural_horizon(variant, k, height)?;
        let cfg = Self::new(variant, k, horizon, epsilon)?;
        debug_assert_eq!(cfg.height, height);
        Ok(cfg)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn zero_noise(mut self, on: bool) -> Self {
        self.zero_noise = on;
        self
    }

    /// Laplace scale `h/ε` of every vertex (0 under the zero-noise hook).
    pub fn noise_scale(&self) -> f64 {
        if self.zero_noise {
            0.0
        } else {
            calibrate_pure_laplace(self.height as f64, self.epsilon)
                .map(|c| c.scale_or_sigma)
                .unwrap_or(f64::NAN)
        }
    }

    pub fn is_private(&self) -> bool {
        !self.zero_noise
    }

    /// Re-checks every invariant; configs built through the constructors
    /// always pass, hand-assembled ones may not.
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new(self.variant, self.k, self.horizon, self.epsilon)?;
        if fresh.height != self.height {
            return domain(format!(
                "height {} does not match the minimal height {} for T={}",
                self.height, fresh.height, self.horizon
            ));
        }
        Ok(())
    }

    fn keyed_noise(&self) -> Result<KeyedLaplace> {
        KeyedLaplace::new(self.seed, self.noise_scale())
    }
}

/// Largest `T` a tree of height `h` supports for this variant.
pub fn natural_horizon(variant: Variant, k: u32, height: u32) -> Result<u64> {
    let max = max_value(variant, k, height)?;
    u64::try_from(max).map_err(|_| Error::Domain(format!("k={k}, h={height} exceeds u64 range")))
}

/// Lazily materialised noise terms keyed by walk position.
#[derive(Debug, Default, Clone)]
pub struct NoiseLedger {
    entries: HashMap<u64, f64>,
    high_water: usize,
}

impl NoiseLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Most entries held at once.
    pub fn high_water(&self) -> usize {
        self.high_water
    }

    pub fn contains(&self, key: u64) -> bool {
        self.entries.contains_key(&key)
    }

    fn insert(&mut self, key: u64, value: f64) {
        let prev = self.entries.insert(key, value);
        debug_assert!(prev.is_none(), "key {key} inserted twice");
        self.high_water = self.high_water.max(self.entries.len());
    }

    fn evict(&mut self, key: u64) {
        let prev = self.entries.remove(&key);
        debug_assert!(prev.is_some(), "key {key} evicted while absent");
    }

    fn get(&self, key: u64) -> f64 {
        self.entries[&key]
    }
}

/// Elementary operations performed by a mechanism over its lifetime.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct WorkCounter {
    pub digit_writes: u64,
    pub insertions: u64,
    pub evictions: u64,
}

impl WorkCounter {
    pub fn total(&self) -> u64 {
        self.digit_writes + self.insertions + self.evictions
    }
}

/// Streaming state of a tree mechanism.
#[derive(Debug, Clone)]
pub struct Mechanism {
    config: MechanismConfig,
    noise: KeyedLaplace,
    powers: Vec<u64>,
    counter: DigitVector,
    t: u64,
    prefix: u64,
    // Walk positions in use at each level (index = level - 1), in walk order.
    active: Vec<Vec<u64>>,
    ledger: NoiseLedger,
    work: WorkCounter,
}

impl Mechanism {
    pub fn new(config: MechanismConfig) -> Result<Self> {
        config.validate()?;
        let noise = config.keyed_noise()?;
        let h = config.height;
        let powers = (0..h)
            .map(|l| pow(config.k, l).map(|v| v as u64))
            .collect::<Result<Vec<_>>>()?;
        let counter = DigitVector::zero(config.variant, config.k, h)?;
        Ok(Self {
            noise,
            powers,
            counter,
            t: 0,
            prefix: 0,
            active: vec![Vec::new(); h as usize],
            ledger: NoiseLedger::default(),
            work: WorkCounter::default(),
            config,
        })
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.config
    }

    /// Number of bits consumed so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn counter(&self) -> &DigitVector {
        &self.counter
    }

    pub fn ledger(&self) -> &NoiseLedger {
        &self.ledger
    }

    pub fn work(&self) -> WorkCounter {
        self.work
    }

    /// Walk positions whose noise went into the latest estimate, top level first.
    pub fn active_keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.active.iter().rev().flatten().copied()
    }

    /// Noise terms in the latest estimate.
    pub fn terms_used(&self) -> usize {
        self.active.iter().map(Vec::len).sum()
    }

    /// Consumes one bit and releases the private prefix-sum estimate.
    pub fn feed(&mut self, bit: u8) -> Result<f64> {
        if self.t >= self.config.horizon {
            return Err(Error::State(format!(
                "stream already holds T={} bits",
                self.config.horizon
            )));
        }
        if bit > 1 {
            return domain(format!("input must be 0 or 1, got {bit}"));
        }
        let changed = self.counter.increment_in_place()? as u32;
        self.work.digit_writes += changed as u64;
        self.t += 1;
        self.prefix += bit as u64;

        // Levels above `changed` keep their digits and hence their positions.
        let mut p: i128 = 0;
        for level in (1..=self.config.height).rev() {
            let d = self.counter.level(level);
            let step = self.powers[level as usize - 1] as i128;
            if level > changed {
                p += d as i128 * step;
                continue;
            }
            let dir = d.signum() as i128;
            let fresh: Vec<u64> = (0..d.unsigned_abs())
                .map(|_| {
                    p += dir * step;
                    debug_assert!(p >= 1);
                    p as u64
                })
                .collect();
            let stale = std::mem::take(&mut self.active[level as usize - 1]);
            for &key in stale.iter().filter(|key| !fresh.contains(key)) {
                self.ledger.evict(key);
                self.work.evictions += 1;
            }
            for &key in fresh.iter().filter(|key| !stale.contains(key)) {
                self.ledger.insert(key, self.noise.value(key));
                self.work.insertions += 1;
            }
            self.active[level as usize - 1] = fresh;
        }

        let mut noise = 0.0;
        for key in self.active.iter().rev().flatten() {
            noise += self.ledger.get(*key);
        }
        Ok(self.prefix as f64 + noise)
    }
}

impl ContinualCounter for Mechanism {
    fn feed(&mut self, bit: u8) -> Result<f64> {
        Mechanism::feed(self, bit)
    }
}

/// Streams `input` through a fresh mechanism.
pub fn run_stream(config: &MechanismConfig, input: &[u8]) -> Result<Vec<f64>> {
    check_input(config, input)?;
    let mut mech = Mechanism::new(config.clone())?;
    input.iter().map(|&b| mech.feed(b)).collect()
}

fn check_input(config: &MechanismConfig, input: &[u8]) -> Result<()> {
    if input.len() as u64 != config.horizon {
        return domain(format!(
            "input has {} bits but the config expects T={}",
            input.len(),
            config.horizon
        ));
    }
    if let Some(pos) = input.iter().position(|&b| b > 1) {
        return domain(format!(
            "input bit {} is {}, not 0 or 1",
            pos + 1,
            input[pos]
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OracleNode {
    sum: u64,
    noise: f64,
}

/// How a vertex takes part in prefix sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Added,
    Subtracted,
    Unused,
}

fn role(variant: Variant, k: u32, child: u32) -> Role {
    match variant {
        Variant::Plain if child + 1 < k => Role::Added,
        Variant::Plain => Role::Unused,
        _ if child < k / 2 => Role::Added,
        _ if child > k / 2 => Role::Subtracted,
        _ => Role::Unused,
    }
}

// Keys for vertices no digit walk can reach; disjoint from walk positions,
// which stay below k^h.
const UNUSED_KEY_TAG: u64 = 1 << 63;

/// The full k-ary tree with a noisy partial sum in every vertex.
///
/// Level `ℓ` (1 = leaves, `h + 1` = root) holds the intervals
/// `[1 + j·k^(ℓ-1), (j+1)·k^(ℓ-1)]`. Leaves past `T` are zero padding.
#[derive(Debug, Clone)]
pub struct TreeOracle {
    config: MechanismConfig,
    powers: Vec<u64>,
    levels: Vec<Vec<OracleNode>>,
}

impl TreeOracle {
    pub fn build(config: &MechanismConfig, input: &[u8]) -> Result<Self> {
        config.validate()?;
        check_input(config, input)?;
        let (k, h) = (config.k, config.height);
        let leaves = pow(k, h)?;
        if leaves > ORACLE_MAX_LEAVES {
            return domain(format!(
                "tree with {leaves} leaves is too large for the oracle"
            ));
        }
        let noise = config.keyed_noise()?;
        let powers = (0..=h)
            .map(|l| pow(k, l).map(|v| v as u64))
            .collect::<Result<Vec<_>>>()?;

        let mut sums: Vec<u64> = input.iter().map(|&b| b as u64).collect();
        sums.resize(leaves as usize, 0);
        let mut levels = Vec::with_capacity(h as usize + 1);
        for level in 1..=h + 1 {
            let width = powers[level as usize - 1];
            let nodes = sums
                .iter()
                .enumerate()
                .map(|(j, &sum)| {
                    let j = j as u64;
                    let child = if level <= h { (j % k as u64) as u32 } else { 0 };
                    let r = if level <= h {
                        role(config.variant, k, child)
                    } else {
                        Role::Unused
                    };
                    let noise = match r {
                        Role::Added => noise.value((j + 1) * width),
                        Role::Subtracted => -noise.value(j * width),
                        Role::Unused => noise.value(UNUSED_KEY_TAG | ((level as u64) << 40) | j),
                    };
                    OracleNode { sum, noise }
                })
                .collect();
            levels.push(nodes);
            if level <= h {
                sums = sums.chunks(k as usize).map(|c| c.iter().sum()).collect();
            }
        }
        Ok(Self {
            config: config.clone(),
            powers,
            levels,
        })
    }

    fn node(&self, level: u32, first_leaf: u64) -> &OracleNode {
        let width = self.powers[level as usize - 1];
        &self.levels[level as usize - 1][((first_leaf - 1) / width) as usize]
    }

    /// Number of vertices on `level`.
    pub fn level_len(&self, level: u32) -> usize {
        self.levels[level as usize - 1].len()
    }

    /// Estimate at time `t`, combining left children for positive digits and
    /// subtracting right children for negative digits.
    pub fn estimate(&self, t: u64) -> Result<f64> {
        let c = &self.config;
        let digits = DigitVector::encode(c.variant, t, c.k, c.height)?;
        let mut sum: i128 = 0;
        let mut noise = 0.0;
        let mut p: u64 = 0;
        for level in (1..=c.height).rev() {
            let d = digits.level(level);
            let step = self.powers[level as usize - 1];
            for _ in 0..d.unsigned_abs() {
                if d > 0 {
                    let node = self.node(level, p + 1);
                    sum += node.sum as i128;
                    noise += node.noise;
                    p += step;
                } else {
                    let node = self.node(level, p - step + 1);
                    sum -= node.sum as i128;
                    noise -= node.noise;
                    p -= step;
                }
            }
        }
        debug_assert_eq!(p, t);
        Ok(sum as f64 + noise)
    }
}

/// Batch reference: every estimate for `input`, computed from the full tree.
pub fn run_oracle(input: &[u8], config: &MechanismConfig) -> Result<Vec<f64>> {
    let oracle = TreeOracle::build(config, input)?;
    (1..=config.horizon).map(|t| oracle.estimate(t)).collect()
}

/// How many non-root vertices contain each stream index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitivityAudit {
    /// `counts[i - 1]` for stream index `i`.
    pub counts: Vec<u32>,
    pub max: u32,
    pub min: u32,
}

pub fn sensitivity_audit(config: &MechanismConfig) -> Result<SensitivityAudit> {
    config.validate()?;
    let t = config.horizon;
    let mut diff = vec![0i64; t as usize + 1];
    for level in 1..=config.height {
        let width = pow(config.k, level - 1)? as u64;
        let mut start = 1u64;
        while start <= t {
            let end = (start + width - 1).min(t);
            diff[start as usize - 1] += 1;
            diff[end as usize] -= 1;
            start += width;
        }
    }
    let mut counts = Vec::with_capacity(t as usize);
    let mut run = 0i64;
    for d in &diff[..t as usize] {
        run += d;
        counts.push(run as u32);
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    Ok(SensitivityAudit { counts, max, min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn heights_from_config() {
        assert_eq!(
            MechanismConfig::new(Variant::OffsetOdd, 3, 4, 1.0)
                .unwrap()
                .height,
            2
        );
        assert_eq!(
            MechanismConfig::new(Variant::OffsetOdd, 3, 13, 1.0)
                .unwrap()
                .height,
            3
        );
        assert_eq!(
            MechanismConfig::new(Variant::Plain, 5, 24, 1.0)
                .unwrap()
                .height,
            2
        );
        let c = MechanismConfig::with_height(Variant::OffsetEven, 4, 2, 1.0).unwrap();
        assert_eq!(c.horizon, 10);
    }

    #[test]
    fn invalid_configs() {
        assert!(MechanismConfig::new(Variant::OffsetOdd, 4, 10, 1.0).is_err());
        assert!(MechanismConfig::new(Variant::OffsetEven, 5, 10, 1.0).is_err());
        assert!(MechanismConfig::new(Variant::Plain, 1, 10, 1.0).is_err());
        assert!(MechanismConfig::new(Variant::Plain, 2, 0, 1.0).is_err());
        assert!(MechanismConfig::new(Variant::Plain, 2, 10, 0.0).is_err());
        let mut c = MechanismConfig::new(Variant::Plain, 2, 10, 1.0).unwrap();
        c.height = 7;
        assert!(Mechanism::new(c).is_err());
    }

    #[test]
    fn zero_noise_gives_exact_prefix_sums() {
        for variant in Variant::ALL {
            let k = variant.min_base();
            let cfg = MechanismConfig::new(variant, k, 4, 1.0)
                .unwrap()
                .zero_noise(true);
            assert_eq!(
                run_stream(&cfg, &[1, 1, 0, 1]).unwrap(),
                vec![1.0, 2.0, 2.0, 3.0]
            );
            assert_eq!(
                run_oracle(&[1, 1, 0, 1], &cfg).unwrap(),
                vec![1.0, 2.0, 2.0, 3.0]
            );
        }
    }

    #[test]
    fn feed_errors() {
        let cfg = MechanismConfig::new(Variant::OffsetOdd, 3, 2, 1.0).unwrap();
        let mut m = Mechanism::new(cfg).unwrap();
        assert!(matches!(m.feed(2), Err(Error::Domain(_))));
        m.feed(1).unwrap();
        m.feed(0).unwrap();
        assert!(matches!(m.feed(1), Err(Error::State(_))));
    }

    #[test]
    fn offset_odd_term_counts() {
        let cfg = MechanismConfig::new(Variant::OffsetOdd, 3, 4, 1.0).unwrap();
        let mut m = Mechanism::new(cfg).unwrap();
        m.feed(0).unwrap();
        m.feed(0).unwrap();
        assert_eq!(m.terms_used(), 2);
        m.feed(0).unwrap();
        assert_eq!(m.terms_used(), 1);
    }

    #[test]
    fn term_count_equals_digit_weight() {
        for variant in Variant::ALL {
            for k in [2u32, 3, 4, 5] {
                if !variant.admits(k) {
                    continue;
                }
                for t_max in [1u64, 7, 50, 200] {
                    let cfg = MechanismConfig::new(variant, k, t_max, 1.0).unwrap();
                    let mut m = Mechanism::new(cfg.clone()).unwrap();
                    for t in 1..=t_max {
                        m.feed(1).unwrap();
                        let w = DigitVector::encode(variant, t, k, cfg.height)
                            .unwrap()
                            .weight();
                        assert_eq!(m.terms_used() as u64, w);
                        assert_eq!(m.ledger().len() as u64, w);
                        if variant == Variant::Plain && k == 2 {
                            assert_eq!(w, t.count_ones() as u64);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn streaming_matches_oracle() {
        for variant in Variant::ALL {
            for k in 2..=7u32 {
                if !variant.admits(k) {
                    continue;
                }
                for (i, t_max) in [1u64, 9, 40, 121].into_iter().enumerate() {
                    let cfg = MechanismConfig::new(variant, k, t_max, 0.7)
                        .unwrap()
                        .seed(1000 + i as u64);
                    let input = random_bits(t_max as usize, i as u64);
                    assert_eq!(
                        run_stream(&cfg, &input).unwrap(),
                        run_oracle(&input, &cfg).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_rejects_mismatched_input() {
        let cfg = MechanismConfig::new(Variant::OffsetOdd, 3, 4, 1.0).unwrap();
        assert!(run_oracle(&[1, 0, 1], &cfg).is_err());
        assert!(run_oracle(&[1, 0, 1, 3], &cfg).is_err());
    }

    #[test]
    fn oracle_tree_shape() {
        let cfg = MechanismConfig::new(Variant::OffsetOdd, 3, 13, 1.0).unwrap();
        let oracle = TreeOracle::build(&cfg, &[0; 13]).unwrap();
        assert_eq!(oracle.level_len(1), 27);
        assert_eq!(oracle.level_len(2), 9);
        assert_eq!(oracle.level_len(3), 3);
        assert_eq!(oracle.level_len(4), 1);
    }

    #[test]
    fn left_half_never_uses_top_level() {
        for k in [3u32, 5, 7] {
            for h in 2..=4 {
                let half = (pow(k, h - 1).unwrap() as u64 - 1) / 2;
                for t in 1..=half {
                    let v = DigitVector::encode(Variant::OffsetOdd, t, k, h).unwrap();
                    assert_eq!(v.level(h), 0);
                }
            }
        }
    }

    #[test]
    fn ledger_high_water_cap() {
        for (variant, k) in [
            (Variant::OffsetOdd, 3u32),
            (Variant::OffsetOdd, 7),
            (Variant::OffsetOdd, 19),
            (Variant::Plain, 2),
            (Variant::Plain, 5),
            (Variant::OffsetEven, 4),
        ] {
            for t_max in [10u64, 333, 5000] {
                let cfg = MechanismConfig::new(variant, k, t_max, 1.0).unwrap();
                let h = cfg.height as usize;
                let cap = match variant {
                    Variant::OffsetOdd => h * (k as usize - 1) / 2,
                    Variant::Plain => h * (k as usize - 1),
                    Variant::OffsetEven => h * k as usize / 2,
                };
                let mut m = Mechanism::new(cfg).unwrap();
                for _ in 0..t_max {
                    m.feed(0).unwrap();
                }
                assert!(m.ledger().high_water() <= cap, "{variant} k={k} T={t_max}");
            }
        }
    }

    #[test]
    fn noise_terms_live_on_intervals() {
        for variant in Variant::ALL {
            let k = variant.min_base() + 2;
            let cfg = MechanismConfig::new(variant, k, 600, 1.0).unwrap();
            let mut m = Mechanism::new(cfg).unwrap();
            let mut spans: HashMap<u64, (u64, u64, u64)> = HashMap::new();
            for t in 1..=600u64 {
                m.feed(1).unwrap();
                for key in m.active_keys() {
                    let e = spans.entry(key).or_insert((t, t, 0));
                    e.1 = t;
                    e.2 += 1;
                }
            }
            for (key, (first, last, uses)) in spans {
                assert_eq!(last - first + 1, uses, "{variant} key {key}");
            }
            let w = m.work();
            assert_eq!(w.insertions - w.evictions, m.ledger().len() as u64);
        }
    }

    #[test]
    fn sensitivity_audit_counts() {
        let cfg = MechanismConfig::new(Variant::OffsetOdd, 3, 4, 1.0).unwrap();
        let a = sensitivity_audit(&cfg).unwrap();
        assert_eq!(a.counts, vec![2; 4]);
        let cfg = MechanismConfig::new(Variant::Plain, 5, 24, 1.0).unwrap();
        assert_eq!(sensitivity_audit(&cfg).unwrap().max, 2);
        let cfg = MechanismConfig::with_height(Variant::OffsetOdd, 19, 3, 1.0).unwrap();
        let a = sensitivity_audit(&cfg).unwrap();
        assert_eq!((a.min, a.max), (3, 3));
    }

    #[test]
    fn unbiased_with_expected_variance() {
        let cfg = MechanismConfig::new(Variant::OffsetOdd, 3, 4, 1.0).unwrap();
        let input = [1u8, 0, 1, 1];
        let truth = [1.0, 1.0, 2.0, 3.0];
        let runs = 100_000u64;
        let mut sum = [0.0f64; 4];
        let mut sq = [0.0f64; 4];
        for r in 0..runs {
            let out = run_stream(&cfg.clone().seed(r), &input).unwrap();
            for i in 0..4 {
                let e = out[i] - truth[i];
                sum[i] += e;
                sq[i] += e * e;
            }
        }
        let h = cfg.height as f64;
        for i in 0..4 {
            let w = DigitVector::encode(Variant::OffsetOdd, i as u64 + 1, 3, 2)
                .unwrap()
                .weight() as f64;
            let var = 2.0 * h * h * w;
            let mean = sum[i] / runs as f64;
            assert!(
                mean.abs() <= 3.0 * (var / runs as f64).sqrt(),
                "t={} mean {mean}",
                i + 1
            );
            // Var of e² for a sum of w iid Lap(λ): E[e⁴] - var² = (24wλ⁴ + 12w(w-1)λ⁴) - var²
            let lam4 = (h * h).powi(2);
            let var_sq = 24.0 * w * lam4 + 12.0 * w * (w - 1.0) * lam4 - var * var;
            let emp = sq[i] / runs as f64;
            assert!(
                (emp - var).abs() <= 3.0 * (var_sq / runs as f64).sqrt(),
                "t={} var {emp}",
                i + 1
            );
        }
    }
}
