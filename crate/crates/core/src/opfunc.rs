//! Laurent-type functions `φ(z) = Σ_{n=-N_p}^{s} c_n z^n` and the operator
//! function `φ(W) = Σ c_n W^n` with `W = B^{-1}`.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrixcore::{smallest_singular_value, CVector, DenseOperator, SINGULAR_RTOL};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Finite Laurent polynomial. Storage covers indices `low..=high` with
/// `low ≤ 0 ≤ high`; trailing zeros beyond index 0 are trimmed on both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentFunction {
    low: i32,
    coeffs: Vec<Complex64>,
}

impl LaurentFunction {
    pub fn zero() -> Self {
        Self {
            low: 0,
            coeffs: vec![ZERO],
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self {
            low: 0,
            coeffs: vec![c],
        }
    }

    pub fn monomial(n: i32, c: Complex64) -> Self {
        Self::from_terms(&[(n, c)])
    }

    /// `Σ coeffs[k] z^k`.
    pub fn polynomial(coeffs: &[Complex64]) -> Self {
        let terms: Vec<(i32, Complex64)> = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (k as i32, *c))
            .collect();
        Self::from_terms(&terms)
    }

    /// Sums repeated indices.
    pub fn from_terms(terms: &[(i32, Complex64)]) -> Self {
        let low = terms.iter().map(|t| t.0).min().unwrap_or(0).min(0);
        let high = terms.iter().map(|t| t.0).max().unwrap_or(0).max(0);
        let mut coeffs = vec![ZERO; (high - low + 1) as usize];
        for &(n, c) in terms {
            coeffs[(n - low) as usize] += c;
        }
        let mut f = Self { low, coeffs };
        f.trim();
        f
    }

    fn trim(&mut self) {
        while self.high() > 0 && *self.coeffs.last().unwrap() == ZERO {
            self.coeffs.pop();
        }
        while self.low < 0 && self.coeffs[0] == ZERO {
            self.coeffs.remove(0);
            self.low += 1;
        }
    }

    fn high(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    /// Polynomial degree `s`.
    pub fn degree(&self) -> i32 {
        self.high()
    }

    /// Principal-part depth `N_p`.
    pub fn principal_depth(&self) -> i32 {
        -self.low
    }

    pub fn coeff(&self, n: i32) -> Complex64 {
        if n < self.low || n > self.high() {
            ZERO
        } else {
            self.coeffs[(n - self.low) as usize]
        }
    }

    /// Nonzero terms in ascending index order.
    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(move |(k, c)| (self.low + k as i32, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        if z == ZERO && self.low < 0 {
            return Err(Error::DomainError(
                "Laurent function with a principal part evaluated at z = 0".into(),
            ));
        }
        Ok(self.eval_unchecked(z))
    }

    fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        // Horner on z for n >= 0, on 1/z for n < 0.
        let mut pos = ZERO;
        for n in (0..=self.high()).rev() {
            pos = pos * z + self.coeff(n);
        }
        if self.low == 0 {
            return pos;
        }
        let w = z.inv();
        let mut neg = ZERO;
        for n in self.low..0 {
            neg = neg * w + self.coeff(n);
        }
        pos + neg * w
    }

    /// Termwise derivative; index range becomes `[-N_p - 1, s - 1]`.
    pub fn derivative(&self) -> Self {
        let terms: Vec<(i32, Complex64)> = self
            .terms()
            .filter(|(n, _)| *n != 0)
            .map(|(n, c)| (n - 1, c * n as f64))
            .collect();
        Self::from_terms(&terms)
    }

    /// `ψ(ζ) = φ(1/ζ)`: index `n` maps to `-n`.
    pub fn reflect(&self) -> Self {
        let terms: Vec<(i32, Complex64)> = self.terms().map(|(n, c)| (-n, c)).collect();
        Self::from_terms(&terms)
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let terms: Vec<(i32, Complex64)> = self.terms().map(|(n, c)| (n, c * k)).collect();
        Self::from_terms(&terms)
    }

    /// Splits into the regular part (`n ≥ 0`) and the principal part (`n < 0`).
    pub fn split(&self) -> (Self, Self) {
        let regular: Vec<_> = self.terms().filter(|(n, _)| *n >= 0).collect();
        let principal: Vec<_> = self.terms().filter(|(n, _)| *n < 0).collect();
        (Self::from_terms(&regular), Self::from_terms(&principal))
    }
}

impl Add for &LaurentFunction {
    type Output = LaurentFunction;
    fn add(self, rhs: &LaurentFunction) -> LaurentFunction {
        let terms: Vec<_> = self.terms().chain(rhs.terms()).collect();
        LaurentFunction::from_terms(&terms)
    }
}

impl Mul for &LaurentFunction {
    type Output = LaurentFunction;
    fn mul(self, rhs: &LaurentFunction) -> LaurentFunction {
        let mut terms = Vec::new();
        for (n, a) in self.terms() {
            for (m, b) in rhs.terms() {
                terms.push((n + m, a * b));
            }
        }
        LaurentFunction::from_terms(&terms)
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    n: i32,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct LaurentJson {
    s: i32,
    #[serde(rename = "Np")]
    np: i32,
    coeffs: Vec<TermJson>,
}

impl Serialize for LaurentFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LaurentJson {
            s: self.degree(),
            np: self.principal_depth(),
            coeffs: self
                .terms()
                .map(|(n, c)| TermJson {
                    n,
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LaurentFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = LaurentJson::deserialize(deserializer)?;
        if raw.s < 0 || raw.np < 0 {
            return Err(D::Error::custom("s and Np must be nonnegative"));
        }
        if let Some(t) = raw.coeffs.iter().find(|t| t.n > raw.s || t.n < -raw.np) {
            return Err(D::Error::custom(format!(
                "coefficient index {} outside [-{}, {}]",
                t.n, raw.np, raw.s
            )));
        }
        let terms: Vec<_> = raw
            .coeffs
            .iter()
            .map(|t| (t.n, Complex64::new(t.re, t.im)))
            .collect();
        let f = LaurentFunction::from_terms(&terms);
        if f.degree() != raw.s || f.principal_depth() != raw.np {
            return Err(D::Error::custom(format!(
                "declared (s, Np) = ({}, {}) but coefficients give ({}, {})",
                raw.s,
                raw.np,
                f.degree(),
                f.principal_depth()
            )));
        }
        Ok(f)
    }
}

/// Outcome of the coefficient sector test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorCondition {
    pub holds: bool,
    /// `max (|arg c_n| + nθ)` over nonzero `c_n`, `0 ≤ n ≤ s`.
    pub max_value: f64,
    /// Index attaining the maximum when the condition fails.
    pub witness: Option<i32>,
}

/// `max_{0≤n≤s} (|arg c_n| + nθ) < π/2`, skipping zero coefficients.
pub fn validate_sector_condition(phi: &LaurentFunction, theta: f64) -> Result<SectorCondition> {
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidInput(format!("theta {theta} not in [0, pi/2)")));
    }
    let (max_value, arg_max) = phi
        .terms()
        .filter(|(n, _)| *n >= 0)
        .map(|(n, c)| (c.arg().abs() + n as f64 * theta, n))
        .fold((f64::NEG_INFINITY, None), |acc, (v, n)| {
            if v > acc.0 {
                (v, Some(n))
            } else {
                acc
            }
        });
    let holds = arg_max.is_some() && max_value < FRAC_PI_2;
    Ok(SectorCondition {
        holds,
        max_value,
        witness: if holds { None } else { arg_max },
    })
}

/// Same test over the principal part, `max_{n≥1} (|arg c_{-n}| + nθ) < π/2`.
/// Not a hypothesis of the theory; it keeps `Re φ` bounded below on the
/// inner arc of the contour, which matters for quadrature accuracy.
pub fn principal_sector_condition(phi: &LaurentFunction, theta: f64) -> bool {
    phi.terms()
        .filter(|(n, _)| *n < 0)
        .all(|(n, c)| c.arg().abs() + (-n) as f64 * theta < FRAC_PI_2)
}

/// Empirical constant in `Re φ(λ) ≥ C |φ(λ)|` on the sector `|arg λ| ≤ half_angle`,
/// `|λ| ≥ r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c: f64,
    pub r0: f64,
    pub half_angle: f64,
    pub samples: usize,
}

/// Fits `C` as the minimum of `Re φ/|φ|` over a polar grid of
/// 20 log-spaced radii in `[r0, 100 r0]` × 50 angles, together with the
/// limiting ratio `cos(arg c_s + s·a)` at the same 50 angles.
pub fn fit_decay_constant(phi: &LaurentFunction, half_angle: f64, r0: f64) -> Result<DecayFit> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidInput("r0 must be positive".into()));
    }
    let (nr, na) = (20, 50);
    let mut c = f64::INFINITY;
    for i in 0..nr {
        let rho = r0 * 100f64.powf(i as f64 / (nr - 1) as f64);
        for k in 0..na {
            let a = -half_angle + 2.0 * half_angle * k as f64 / (na - 1) as f64;
            let v = phi.evaluate(Complex64::from_polar(rho, a))?;
            let m = v.norm();
            if m > 0.0 {
                c = c.min(v.re / m);
            }
        }
    }
    // limiting ratio as ρ → ∞, where φ ~ c_s z^s
    let lead = phi.coeff(phi.degree());
    if lead.norm() > 0.0 {
        for k in 0..na {
            let a = -half_angle + 2.0 * half_angle * k as f64 / (na - 1) as f64;
            c = c.min((lead.arg() + phi.degree() as f64 * a).cos());
        }
    }
    Ok(DecayFit {
        c,
        r0,
        half_angle,
        samples: (nr + 1) * na,
    })
}

/// `φ(W) f = Σ c_n W^n f` with `W = B^{-1}`: positive powers by repeated LU
/// solves, principal part by repeated products with `B`, both in Horner form.
pub fn apply_phi_w(phi: &LaurentFunction, b: &DenseOperator, f: &CVector) -> Result<CVector> {
    if f.len() != b.dim() {
        return Err(Error::InvalidInput("vector length does not match operator".into()));
    }
    let sigma_min = smallest_singular_value(b.matrix());
    if sigma_min <= SINGULAR_RTOL * b.norm() {
        return Err(Error::SingularOperator { sigma_min });
    }
    let lu = b.matrix().clone().lu();
    let solve = |v: &CVector| lu.solve(v).ok_or(Error::SingularOperator { sigma_min });

    let mut pos = f * phi.coeff(phi.degree());
    for n in (0..phi.degree()).rev() {
        pos = solve(&pos)? + f * phi.coeff(n);
    }
    let depth = phi.principal_depth();
    if depth == 0 {
        return Ok(pos);
    }
    let mut neg = f * phi.coeff(-depth);
    for n in (1..depth).rev() {
        neg = b.apply(&neg) + f * phi.coeff(-n);
    }
    Ok(pos + b.apply(&neg))
}
