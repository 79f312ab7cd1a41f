//! Laplace and Gaussian noise: samplers and privacy calibration.
//!
//! Nothing here is hardened against floating-point side channels. The
//! samplers are fine for simulation and evaluation, not for adversarial
//! deployment.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};

/// Inverse-CDF Laplace transform of a uniform draw `u ∈ (-1/2, 1/2)`.
#[inline]
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One draw from `Lap(scale)`.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return domain(format!(
            "laplace scale must be positive and finite, got {scale}"
        ));
    }
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    Ok(laplace_from_uniform(scale, u))
}

/// One draw from `N(0, sigma²)`.
pub fn sample_gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!(
            "gaussian sigma must be positive and finite, got {sigma}"
        ));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(sigma * z)
}

/// Counter-based Laplace noise: the value for a key depends only on
/// `(seed, key)`, never on the order in which keys are requested.
///
/// Each key selects its own ChaCha stream under the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyedLaplace {
    seed: u64,
    scale: f64,
}

impl KeyedLaplace {
    /// `scale == 0` yields exact zeros, which is useful only for testing.
    pub fn new(seed: u64, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return domain(format!(
                "noise scale must be non-negative and finite, got {scale}"
            ));
        }
        Ok(Self { seed, scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn value(&self, key: u64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(key);
        let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
        laplace_from_uniform(self.scale, u)
    }
}

/// ℓ1 and ℓ2 sensitivities of a vector-valued query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPair {
    pub delta1: f64,
    pub delta2: f64,
}

impl SensitivityPair {
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta1.is_finite() && delta2.is_finite() && delta1 >= 0.0 && delta2 >= 0.0) {
            return domain(format!(
                "sensitivities must be finite and non-negative, got delta1={delta1} delta2={delta2}"
            ));
        }
        if delta2 > delta1 {
            return domain(format!("delta2={delta2} exceeds delta1={delta1}"));
        }
        Ok(Self { delta1, delta2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    PureLaplace,
    L2Laplace,
    Gaussian,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::PureLaplace => "pure-laplace",
            Regime::L2Laplace => "l2-laplace",
            Regime::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    /// Laplace scale λ or Gaussian σ.
    pub scale_or_sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub regime: Regime,
    /// `a_{ε,δ}` for the ℓ2 Laplace regime.
    pub a_param: Option<f64>,
}

impl CalibrationResult {
    pub fn variance(&self) -> f64 {
        match self.regime {
            Regime::PureLaplace | Regime::L2Laplace => {
                2.0 * self.scale_or_sigma * self.scale_or_sigma
            }
            Regime::Gaussian => self.scale_or_sigma * self.scale_or_sigma,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

// ε = 1 is accepted: calibration tables are usually quoted at ε = 1.
fn check_approx_params(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return domain(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

/// `Lap(Δ1/ε)` gives ε-DP.
pub fn calibrate_pure_laplace(delta1: f64, epsilon: f64) -> Result<CalibrationResult> {
    check_positive("delta1", delta1)?;
    check_positive("epsilon", epsilon)?;
    Ok(CalibrationResult {
        scale_or_sigma: delta1 / epsilon,
        epsilon,
        delta: 0.0,
        regime: Regime::PureLaplace,
        a_param: None,
    })
}

/// Classic Gaussian mechanism: `σ = Δ2 √(2 ln(1.25/δ)) / ε`.
pub fn calibrate_gaussian(delta2: f64, epsilon: f64, delta: f64) -> Result<CalibrationResult> {
    check_positive("delta2", delta2)?;
    check_approx_params(epsilon, delta)?;
    Ok(CalibrationResult {
        scale_or_sigma: delta2 * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon,
        epsilon,
        delta,
        regime: Regime::Gaussian,
        a_param: None,
    })
}

/// `a_{ε,δ} = √(2 ln(1/δ)) (√(1 + ε/ln(1/δ)) − 1)`.
///
/// Evaluated as `√(2L) · (ε/L) / (√(1 + ε/L) + 1)` to avoid cancellation
/// when `ε ≪ ln(1/δ)`.
pub fn l2_laplace_a(epsilon: f64, delta: f64) -> Result<f64> {
    check_approx_params(epsilon, delta)?;
    let l = (1.0 / delta).ln();
    let w = epsilon / l;
    Ok((2.0 * l).sqrt() * w / ((1.0 + w).sqrt() + 1.0))
}

/// Laplace noise scaled to ℓ2 sensitivity: `Lap(Δ2 / a_{ε,δ})` is (ε, δ)-DP.
pub fn calibrate_l2_laplace(delta2: f64, epsilon: f64, delta: f64) -> Result<CalibrationResult> {
    check_positive("delta2", delta2)?;
    let a = l2_laplace_a(epsilon, delta)?;
    Ok(CalibrationResult {
        scale_or_sigma: delta2 / a,
        epsilon,
        delta,
        regime: Regime::L2Laplace,
        a_param: Some(a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Pure,
    L2,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Pure => "pure",
            Branch::L2 => "l2",
        }
    }
}

/// How to treat `λ ≤ Δ1`, which the guarantee formally excludes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precondition {
    Strict,
    Flag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEpsilon {
    pub epsilon: f64,
    pub pure: f64,
    pub l2: f64,
    pub branch: Branch,
    /// `λ ≤ Δ1`: the scale precondition does not hold.
    pub below_scale_floor: bool,
    /// `ε ≥ 1`: outside the range the composition argument covers.
    pub out_of_regime: bool,
}

/// Best ε for which `Lap(λ)` noise is (ε, δ)-DP given both sensitivities:
/// `min{Δ1/λ, (Δ2/λ)(Δ2/(2λ) + √(2 ln(1/δ)))}`.
pub fn epsilon_of_laplace(
    delta1: f64,
    delta2: f64,
    lambda: f64,
    delta: f64,
    precondition: Precondition,
) -> Result<LaplaceEpsilon> {
    let sens = SensitivityPair::new(delta1, delta2)?;
    check_positive("lambda", lambda)?;
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    let below_scale_floor = lambda <= sens.delta1;
    if below_scale_floor && precondition == Precondition::Strict {
        return domain(format!(
            "lambda={lambda} must exceed delta1={}",
            sens.delta1
        ));
    }
    let pure = sens.delta1 / lambda;
    let a = sens.delta2 / lambda;
    let l2 = a * (a / 2.0 + (2.0 * (1.0 / delta).ln()).sqrt());
    let (epsilon, branch) = if pure <= l2 {
        (pure, Branch::Pure)
    } else {
        (l2, Branch::L2)
    };
    Ok(LaplaceEpsilon {
        epsilon,
        pure,
        l2,
        branch,
        below_scale_floor,
        out_of_regime: epsilon >= 1.0,
    })
}

/// Upper bound on `Var[ℓ2 Laplace] / Var[Gaussian]` at equal (ε, δ):
/// `w² / (2(√(1+w) − 1)²)` with `w = ε / ln(1/δ) ∈ (0, 1]`.
pub fn variance_ratio_bound(epsilon: f64, delta: f64) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    let l = (1.0 / delta).ln();
    if epsilon > l {
        return domain(format!("epsilon={epsilon} exceeds ln(1/delta)={l}"));
    }
    let w = epsilon / l;
    // w / (√(1+w) − 1) = √(1+w) + 1
    let s = (1.0 + w).sqrt() + 1.0;
    Ok(s * s / 2.0)
}
