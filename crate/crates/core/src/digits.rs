//! Positional digit systems used to address tree vertices.
//!
//! A time step `t` is written as `Σ k^(i-1) · d_i` with the least significant
//! digit first. Three digit sets are supported:
//!
//! * `Plain`: `d_i ∈ [0, k-1]`, any `k ≥ 2`.
//! * `OffsetOdd`: `d_i ∈ [-(k-1)/2, (k-1)/2]`, odd `k ≥ 3`.
//! * `OffsetEven`: `d_i ∈ [-k/2 + 1, k/2]`, even `k ≥ 4`.
//!
//! The L1 norm of a representation is the number of tree vertices combined to
//! produce the prefix sum at that time step.

use std::fmt;

use crate::error::{domain, Error, Result};

/// Upper bound on supported arities. Keeps digits comfortably inside `i32`.
pub const MAX_BASE: u32 = 1 << 16;

/// Which digit set (and therefore which tree mechanism) is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    OffsetOdd,
    OffsetEven,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Plain, Variant::OffsetOdd, Variant::OffsetEven];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::OffsetOdd => "offset-odd",
            Variant::OffsetEven => "offset-even",
        }
    }

    /// Smallest admissible arity for this variant.
    pub fn min_base(self) -> u32 {
        match self {
            Variant::Plain => 2,
            Variant::OffsetOdd => 3,
            Variant::OffsetEven => 4,
        }
    }

    /// Whether `k` has the right parity and size for this variant.
    pub fn admits(self, k: u32) -> bool {
        if !(self.min_base()..=MAX_BASE).contains(&k) {
            return false;
        }
        match self {
            Variant::Plain => true,
            Variant::OffsetOdd => k % 2 == 1,
            Variant::OffsetEven => k.is_multiple_of(2),
        }
    }

    pub fn check_base(self, k: u32) -> Result<()> {
        if self.admits(k) {
            return Ok(());
        }
        match self {
            Variant::Plain => domain(format!("plain digits need 2 <= k <= {MAX_BASE}, got k={k}")),
            Variant::OffsetOdd => domain(format!(
                "offset-odd digits need odd 3 <= k <= {MAX_BASE}, got k={k}"
            )),
            Variant::OffsetEven => domain(format!(
                "offset-even digits need even 4 <= k <= {MAX_BASE}, got k={k}"
            )),
        }
    }

    /// Inclusive digit range `(lo, hi)` for arity `k`.
    pub fn digit_bounds(self, k: u32) -> (i32, i32) {
        let k = k as i32;
        match self {
            Variant::Plain => (0, k - 1),
            Variant::OffsetOdd => (-(k - 1) / 2, (k - 1) / 2),
            Variant::OffsetEven => (-k / 2 + 1, k / 2),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "offset-odd" | "odd" => Ok(Variant::OffsetOdd),
            "offset-even" | "even" => Ok(Variant::OffsetEven),
            other => domain(format!("unknown variant '{other}'")),
        }
    }
}

/// `k^w`, or a domain error when it does not fit in `u128`.
pub fn pow(k: u32, w: u32) -> Result<u128> {
    (k as u128)
        .checked_pow(w)
        .ok_or_else(|| Error::Domain(format!("{k}^{w} overflows")))
}

/// Largest non-negative integer representable with `w` digits.
pub fn max_value(variant: Variant, k: u32, w: u32) -> Result<u128> {
    variant.check_base(k)?;
    let kw = pow(k, w)?;
    let k = k as u128;
    Ok(match variant {
        Variant::Plain => kw - 1,
        Variant::OffsetOdd => (kw - 1) / 2,
        // k/2 · (k^w - 1)/(k - 1); the second factor is a repunit, so exact
        Variant::OffsetEven => (k / 2) * ((kw - 1) / (k - 1)),
    })
}

/// Minimal height `h ≥ 1` whose range covers `t_max`.
///
/// Matches `⌈log_k(T+1)⌉` for plain digits and `⌈log_k 2T⌉` for odd offset
/// digits, computed without floating-point logarithms.
pub fn height_for(variant: Variant, k: u32, t_max: u64) -> Result<u32> {
    variant.check_base(k)?;
    let mut h = 1;
    while max_value(variant, k, h)? < t_max as u128 {
        h += 1;
    }
    Ok(h)
}

/// A signed-digit representation, least significant digit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitVector {
    digits: Vec<i32>,
    base: u32,
    variant: Variant,
}

impl DigitVector {
    /// Encodes `t` with exactly `w` digits.
    ///
    /// Repeated Euclidean division; a remainder above the top digit is folded
    /// to its negative counterpart and carried.
    pub fn encode(variant: Variant, t: u64, k: u32, w: u32) -> Result<Self> {
        let max = max_value(variant, k, w)?;
        if t as u128 > max {
            return Err(Error::Range {
                value: t as u128,
                max,
            });
        }
        let (_, hi) = variant.digit_bounds(k);
        let base = k as i128;
        let mut rest = t as i128;
        let mut digits = Vec::with_capacity(w as usize);
        for _ in 0..w {
            let mut r = rest.rem_euclid(base);
            if r > hi as i128 {
                r -= base;
            }
            digits.push(r as i32);
            rest = (rest - r) / base;
        }
        debug_assert_eq!(rest, 0);
        Ok(Self {
            digits,
            base: k,
            variant,
        })
    }

    /// Wraps explicit digits after validating them against the digit set.
    pub fn from_digits(variant: Variant, k: u32, digits: Vec<i32>) -> Result<Self> {
        variant.check_base(k)?;
        let (lo, hi) = variant.digit_bounds(k);
        if let Some(d) = digits.iter().find(|d| !(lo..=hi).contains(*d)) {
            return domain(format!(
                "digit {d} outside [{lo}, {hi}] for {variant} k={k}"
            ));
        }
        Ok(Self {
            digits,
            base: k,
            variant,
        })
    }

    pub fn zero(variant: Variant, k: u32, w: u32) -> Result<Self> {
        Self::from_digits(variant, k, vec![0; w as usize])
    }

    pub fn digits(&self) -> &[i32] {
        &self.digits
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn width(&self) -> u32 {
        self.digits.len() as u32
    }

    /// Digit at tree level `level` (1 = leaves).
    pub fn level(&self, level: u32) -> i32 {
        self.digits[level as usize - 1]
    }

    /// `Σ k^(i-1) · d_i`. Negative for mirrored offset vectors.
    pub fn decode(&self) -> i128 {
        let k = self.base as i128;
        self.digits
            .iter()
            .rev()
            .fold(0i128, |acc, &d| acc * k + d as i128)
    }

    /// Number of tree vertices selected by this representation.
    pub fn weight(&self) -> u64 {
        self.digits.iter().map(|d| d.unsigned_abs() as u64).sum()
    }

    /// Returns the representation of `decode() + 1` at the same width.
    pub fn increment(&self) -> Result<Self> {
        let mut next = self.clone();
        next.increment_in_place()?;
        Ok(next)
    }

    /// Adds one in place and returns the number of digits written.
    ///
    /// A digit at its maximum wraps to the minimum and carries. Carrying out of
    /// the top digit is a range error and leaves `self` untouched.
    pub fn increment_in_place(&mut self) -> Result<usize> {
        let (lo, hi) = self.variant.digit_bounds(self.base);
        let Some(pos) = self.digits.iter().position(|&d| d != hi) else {
            let max = max_value(self.variant, self.base, self.width())?;
            return Err(Error::Range {
                value: max + 1,
                max,
            });
        };
        for d in &mut self.digits[..pos] {
            *d = lo;
        }
        self.digits[pos] += 1;
        Ok(pos + 1)
    }
}

impl fmt::Display for DigitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

pub fn encode_plain(t: u64, k: u32, w: u32) -> Result<DigitVector> {
    DigitVector::encode(Variant::Plain, t, k, w)
}

pub fn encode_offset_odd(t: u64, k: u32, w: u32) -> Result<DigitVector> {
    DigitVector::encode(Variant::OffsetOdd, t, k, w)
}

pub fn encode_offset_even(t: u64, k: u32, w: u32) -> Result<DigitVector> {
    DigitVector::encode(Variant::OffsetEven, t, k, w)
}
