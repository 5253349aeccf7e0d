//! Exact spectral constants of the round-sphere GJMS operators.
//!
//! Everything here is computed in arbitrary-precision rationals. Whenever
//! `n` is odd the factors are half-integers, so every denominator that
//! appears is a power of two.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ExactRational = BigRational;

/// An admissible pair `(m, n)`: `2m` is the order of the operator and `n`
/// the dimension of the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SphereParams {
    m: u32,
    n: u32,
}

#[derive(Deserialize)]
struct RawParams {
    m: u32,
    n: u32,
}

impl TryFrom<RawParams> for SphereParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        SphereParams::new(raw.m, raw.n)
    }
}

/// `true` iff `n > 1` and, for even `n`, `n >= 2m`.
pub fn admissible(m: u32, n: u32) -> bool {
    m >= 1 && n > 1 && (n % 2 == 1 || n >= 2 * m)
}

impl SphereParams {
    pub fn new(m: u32, n: u32) -> Result<Self> {
        if admissible(m, n) {
            Ok(Self { m, n })
        } else {
            Err(Error::NotAdmissible { m, n })
        }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn is_critical(&self) -> bool {
        self.n == 2 * self.m
    }

    /// `n/2 - m`, exactly.
    pub fn half_gap(&self) -> ExactRational {
        half(self.n as i64 - 2 * self.m as i64)
    }

    /// `n/2 + m`, exactly.
    pub fn half_sum(&self) -> ExactRational {
        half(self.n as i64 + 2 * self.m as i64)
    }

    /// Floating-point `n/2 - m`.
    pub fn a(&self) -> f64 {
        self.n as f64 / 2.0 - self.m as f64
    }

    /// Floating-point `n/2 + m`.
    pub fn b(&self) -> f64 {
        self.n as f64 / 2.0 + self.m as f64
    }
}

fn half(k: i64) -> ExactRational {
    BigRational::new(BigInt::from(k), BigInt::from(2))
}

fn int(k: i64) -> ExactRational {
    BigRational::from_integer(BigInt::from(k))
}

/// Laplacian eigenvalue `i(i + n - 1)` on the i-th spherical harmonics.
pub fn eigenvalue(i: u64, n: u64) -> u64 {
    i * (i + n - 1)
}

/// `p0(lambda_i)` by the product over `2m` consecutive (half-)integers
/// starting at `i + n/2 - m`.
pub fn p0_eval(i: u64, p: &SphereParams) -> ExactRational {
    // factors (2i + n - 2m + 2k)/2, k = 0..2m
    let base = 2 * i as i64 + p.n as i64 - 2 * p.m as i64;
    (0..2 * p.m as i64).fold(ExactRational::one(), |acc, k| acc * half(base + 2 * k))
}

/// Direct evaluation of the degree-`m` polynomial
/// `prod_{k=1..m} [lambda + (n/2 - k)(n/2 + k - 1)]` at an arbitrary
/// argument. In the critical case the constants reduce to `(m-k)(m+k-1)`.
pub fn p0_polynomial(lambda: &ExactRational, p: &SphereParams) -> ExactRational {
    (1..=p.m as i64).fold(ExactRational::one(), |acc, k| {
        let shift = half(p.n as i64 - 2 * k) * half(p.n as i64 + 2 * k - 2);
        acc * (lambda + shift)
    })
}

/// `p0(lambda_{i+1}) / p0(lambda_i) = (n/2 + m + i) / (n/2 - m + i)`.
pub fn p0_ratio(i: u64, p: &SphereParams) -> Result<ExactRational> {
    let den = p.half_gap() + int(i as i64);
    if den.is_zero() {
        return Err(Error::DegenerateRatio { i: i as u32 });
    }
    Ok((p.half_sum() + int(i as i64)) / den)
}

/// Q-curvature of the round metric: `(2m-1)!` in the critical case,
/// otherwise `p0(lambda_0) / (n/2 - m)`.
pub fn q0(p: &SphereParams) -> ExactRational {
    if p.is_critical() {
        (1..2 * p.m as i64).fold(ExactRational::one(), |acc, k| acc * int(k))
    } else {
        p0_eval(0, p) / p.half_gap()
    }
}

/// The exponent `2n / (n - 2m)`; negative when `n < 2m`.
pub fn two_star(p: &SphereParams) -> Result<ExactRational> {
    if p.is_critical() {
        return Err(Error::CriticalCase);
    }
    Ok(BigRational::new(
        BigInt::from(2 * p.n as i64),
        BigInt::from(p.n as i64 - 2 * p.m as i64),
    ))
}

/// Eigenvalue of `L = dQ[0]` on the i-th spherical harmonics.
pub fn l_multiplier(i: u64, p: &SphereParams) -> ExactRational {
    if p.is_critical() {
        p0_eval(i, p) - factorial(p.n as u64)
    } else {
        p.half_gap() * (p0_eval(i, p) - p0_eval(1, p))
    }
}

pub fn factorial(k: u64) -> ExactRational {
    (1..=k as i64).fold(ExactRational::one(), |acc, j| acc * int(j))
}

/// Lossy conversion used when building floating-point multipliers.
pub fn to_f64(r: &ExactRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Formats an exact rational as `p/q`, or `p` when the denominator is 1.
pub fn format_rational(r: &ExactRational) -> String {
    r.to_string()
}

/// Result of checking the eigenvalue identities for one `(m, n)` up to
/// `imax`. Each flag is an exact-arithmetic verdict.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub product_matches_polynomial: bool,
    pub ratio_recursion: bool,
    pub strictly_increasing_modulus: bool,
    pub first_eigen_balance: bool,
    pub closed_product_formula: bool,
    pub kernel_is_first_harmonics: bool,
}

impl IdentityCheck {
    pub fn all(&self) -> bool {
        self.product_matches_polynomial
            && self.ratio_recursion
            && self.strictly_increasing_modulus
            && self.first_eigen_balance
            && self.closed_product_formula
            && self.kernel_is_first_harmonics
    }
}

pub fn check_identities(p: &SphereParams, imax: u64) -> IdentityCheck {
    let values: Vec<ExactRational> = (0..=imax + 1).map(|i| p0_eval(i, p)).collect();

    let product_matches_polynomial = (0..=imax).all(|i| {
        let lambda = int(eigenvalue(i, p.n as u64) as i64);
        p0_polynomial(&lambda, p) == values[i as usize]
    });

    let ratio_recursion = (0..=imax).all(|i| match p0_ratio(i, p) {
        Ok(r) => values[i as usize + 1] == r * &values[i as usize],
        Err(_) => p.is_critical() && i == 0,
    });

    let first = if p.is_critical() { 1 } else { 0 };
    let strictly_increasing_modulus =
        (first..=imax).all(|i| values[i as usize + 1].abs() > values[i as usize].abs());

    let first_eigen_balance = if p.is_critical() {
        values[1] == factorial(p.n as u64)
    } else {
        p.half_gap() * &values[1] == p.half_sum() * &values[0]
    };

    let closed_product_formula = p.is_critical()
        || (1..=imax).all(|i| {
            let prod = (0..i as i64).fold(ExactRational::one(), |acc, j| {
                acc * (p.half_sum() + int(j)) / (p.half_gap() + int(j))
            });
            values[i as usize] == prod * &values[0]
        });

    let kernel_is_first_harmonics =
        (0..=imax).all(|i| l_multiplier(i, p).is_zero() == (i == 1));

    IdentityCheck {
        product_matches_polynomial,
        ratio_recursion,
        strictly_increasing_modulus,
        first_eigen_balance,
        closed_product_formula,
        kernel_is_first_harmonics,
    }
}
