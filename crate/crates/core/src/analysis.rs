//! Closed-form error of the tree mechanisms, optimal arities, the
//! Laplace-versus-Gaussian crossover and a Monte-Carlo MSE harness.
//!
//! Every `log` in a leading constant is base 2.

use std::f64::consts::{LOG2_E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::digits::{pow, Variant};
use crate::error::{domain, Result};
use crate::mechanisms::{natural_horizon, Mechanism, MechanismConfig};

fn check_common(k: u32, h: u32, epsilon: f64) -> Result<()> {
    if h == 0 {
        return domain("height must be at least 1");
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return domain(format!(
            "epsilon must be positive and finite, got {epsilon}"
        ));
    }
    let _ = pow(k, h)?;
    Ok(())
}

/// Variance of a single vertex, `2h²/ε²`.
fn vertex_variance(h: u32, epsilon: f64) -> f64 {
    let h = h as f64;
    2.0 * h * h / (epsilon * epsilon)
}

/// MSE of the plain k-ary tree mechanism over `T = k^h − 1` outputs:
/// `(k−1)h³ / (ε²(1 − k^−h))`.
pub fn mse_plain(k: u32, h: u32, epsilon: f64) -> Result<f64> {
    Variant::Plain.check_base(k)?;
    check_common(k, h, epsilon)?;
    let (kf, hf) = (k as f64, h as f64);
    Ok((kf - 1.0) * hf.powi(3) / (epsilon * epsilon * (1.0 - kf.powi(-(h as i32)))))
}

/// MSE with odd offset digits over `T = (k^h − 1)/2` outputs:
/// `k(1 − 1/k²)h³ / (2ε²(1 − k^−h))`.
pub fn mse_offset_odd(k: u32, h: u32, epsilon: f64) -> Result<f64> {
    Variant::OffsetOdd.check_base(k)?;
    check_common(k, h, epsilon)?;
    let (kf, hf) = (k as f64, h as f64);
    Ok(kf * (1.0 - 1.0 / (kf * kf)) * hf.powi(3)
        / (2.0 * epsilon * epsilon * (1.0 - kf.powi(-(h as i32)))))
}

/// Total vertex count `c_h` over all prefixes of an even-offset tree:
/// `c_h = ((k+2)/4 + k(h−1)/4)(k/2)k^(h−1) + c_(h−1)`, `c_0 = 0`.
pub fn even_vertex_total(k: u32, h: u32) -> Result<u128> {
    Variant::OffsetEven.check_base(k)?;
    let mut c: u128 = 0;
    for level in 1..=h {
        // the summand equals (k·level + 2)·k^level / 8, always an integer
        c += (k as u128 * level as u128 + 2) * pow(k, level)? / 8;
    }
    Ok(c)
}

/// Exact MSE with even offset digits over `T = k(k^h − 1)/(2(k−1))` outputs.
pub fn mse_offset_even(k: u32, h: u32, epsilon: f64) -> Result<f64> {
    check_common(k, h, epsilon)?;
    let c = even_vertex_total(k, h)?;
    let t = natural_horizon(Variant::OffsetEven, k, h)?;
    Ok(c as f64 / t as f64 * vertex_variance(h, epsilon))
}

/// Leading-order form `kh³/(2ε²) · 1/(1 − k^−h)` of the even-offset MSE.
pub fn mse_offset_even_leading(k: u32, h: u32, epsilon: f64) -> Result<f64> {
    Variant::OffsetEven.check_base(k)?;
    check_common(k, h, epsilon)?;
    let (kf, hf) = (k as f64, h as f64);
    Ok(kf * hf.powi(3) / (2.0 * epsilon * epsilon) / (1.0 - kf.powi(-(h as i32))))
}

/// Closed-form MSE at the variant's natural stream length.
pub fn closed_form_mse(variant: Variant, k: u32, h: u32, epsilon: f64) -> Result<f64> {
    match variant {
        Variant::Plain => mse_plain(k, h, epsilon),
        Variant::OffsetOdd => mse_offset_odd(k, h, epsilon),
        Variant::OffsetEven => mse_offset_even(k, h, epsilon),
    }
}

/// Coefficient of `log₂(T)³/ε²` in the MSE.
pub fn leading_constant(variant: Variant, k: u32) -> Result<f64> {
    variant.check_base(k)?;
    let kf = k as f64;
    let l3 = kf.log2().powi(3);
    Ok(match variant {
        Variant::Plain => (kf - 1.0) / l3,
        Variant::OffsetOdd => kf * (1.0 - 1.0 / (kf * kf)) / (2.0 * l3),
        Variant::OffsetEven => kf / (2.0 * l3),
    })
}

/// Arity in `[k_min, k_max]` minimising the leading constant; ties go to
/// the smaller arity.
pub fn optimal_k(variant: Variant, k_min: u32, k_max: u32) -> Result<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for k in k_min..=k_max {
        if !variant.admits(k) {
            continue;
        }
        let c = leading_constant(variant, k)?;
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((k, c));
        }
    }
    match best {
        Some(b) => Ok(b),
        None => domain(format!(
            "no admissible {variant} arity in [{k_min}, {k_max}]"
        )),
    }
}

/// `C²_{ε,δ} (1 + ln(4T/5)/π)²` with `C_{ε,δ} = (2/ε)√(4/9 + ln((1/δ)√(2/π)))`,
/// the MSE bound of the square-root factorization with Gaussian noise.
pub fn henzinger_bound(t: f64, epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return domain(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    if !(t >= 1.25 && t.is_finite()) {
        return domain(format!("T must be at least 5/4, got {t}"));
    }
    let c = 2.0 / epsilon * (4.0 / 9.0 + ((1.0 / delta) * (2.0 / PI).sqrt()).ln()).sqrt();
    let f = 1.0 + (4.0 * t / 5.0).ln() / PI;
    Ok(c * c * f * f)
}

/// Coefficient `B_{ε,δ} = 4/(π² log₂(e)³)` of `log₂(T)² log₂(1/δ)/ε²` in the
/// Gaussian bound.
pub fn gaussian_leading_constant() -> f64 {
    4.0 / (PI * PI * LOG2_E.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverReport {
    pub b_eps: f64,
    pub b_eps_delta: f64,
    /// `B_ε / B_{ε,δ}`.
    pub exponent: f64,
}

impl CrossoverReport {
    /// `δ` at and below which the pure mechanism's leading term is no larger.
    pub fn delta_threshold(&self, t: f64) -> f64 {
        t.powf(-self.exponent)
    }

    /// `B_ε log₂(T)³ / ε²`.
    pub fn pure_leading(&self, t: f64, epsilon: f64) -> f64 {
        self.b_eps * t.log2().powi(3) / (epsilon * epsilon)
    }

    /// `B_{ε,δ} log₂(T)² log₂(1/δ) / ε²`.
    pub fn approx_leading(&self, t: f64, epsilon: f64, delta: f64) -> f64 {
        self.b_eps_delta * t.log2().powi(2) * (1.0 / delta).log2() / (epsilon * epsilon)
    }
}

pub fn crossover(variant: Variant, k: u32) -> Result<CrossoverReport> {
    let b_eps = leading_constant(variant, k)?;
    let b_eps_delta = gaussian_leading_constant();
    Ok(CrossoverReport {
        b_eps,
        b_eps_delta,
        exponent: b_eps / b_eps_delta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub variant: Variant,
    pub k: u32,
    pub h: u32,
    pub horizon: u64,
    pub epsilon: f64,
    /// Closed form at the natural stream length for `h`; zero under the
    /// zero-noise hook.
    pub closed_form_mse: f64,
    pub empirical_mse: Option<f64>,
    pub standard_error: Option<f64>,
    pub trials: u64,
}

impl ErrorReport {
    /// `|empirical − closed| ≤ max(3·SE, 5%·closed)`.
    pub fn within_tolerance(&self) -> bool {
        match (self.empirical_mse, self.standard_error) {
            (Some(emp), Some(se)) => {
                (emp - self.closed_form_mse).abs() <= (3.0 * se).max(0.05 * self.closed_form_mse)
            }
            _ => false,
        }
    }
}

/// Seed of trial `i` under master seed `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed.wrapping_add(trial)
}

/// Uniformly random bits, reproducible from `seed`.
pub fn random_bits(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

/// Runs `trials` independent copies of the mechanism over `input` and reports
/// the mean over trials of `(1/T) Σ_t (estimate_t − truth_t)²`.
pub fn empirical_mse(
    config: &MechanismConfig,
    input: &[u8],
    trials: u64,
    seed: u64,
) -> Result<ErrorReport> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    config.validate()?;
    if input.len() as u64 != config.horizon {
        return domain(format!(
            "input has {} bits but the config expects T={}",
            input.len(),
            config.horizon
        ));
    }
    let truth: Vec<f64> = input
        .iter()
        .scan(0u64, |acc, &b| {
            *acc += b as u64;
            Some(*acc as f64)
        })
        .collect();
    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut mech = Mechanism::new(config.clone().seed(trial_seed(seed, i)))?;
            let mut sq = 0.0;
            for (&b, &tr) in input.iter().zip(&truth) {
                let e = mech.feed(b)? - tr;
                sq += e * e;
            }
            Ok(sq / config.horizon as f64)
        })
        .collect::<Result<_>>()?;
    // fixed left-to-right reduction keeps the result independent of scheduling
    let n = trials as f64;
    let mean = per_trial.iter().sum::<f64>() / n;
    let se = if trials > 1 {
        let var = per_trial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let closed = if config.zero_noise {
        0.0
    } else {
        closed_form_mse(config.variant, config.k, config.height, config.epsilon)?
    };
    Ok(ErrorReport {
        variant: config.variant,
        k: config.k,
        h: config.height,
        horizon: config.horizon,
        epsilon: config.epsilon,
        closed_form_mse: closed,
        empirical_mse: Some(mean),
        standard_error: Some(se),
        trials,
    })
}
