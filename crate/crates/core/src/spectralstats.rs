//! Singular-number statistics of finite truncations: counting function,
//! convergence-exponent estimate, Schatten sums, the growth functions
//! `β(r)`, `γ(|λ|)` and the ratio `n(r^{m+1})/r^ρ`. Every asymptotic quantity
//! here is finite-truncation evidence, not a limit.

use serde::{Deserialize, Serialize};

use crate::csv;
use crate::error::{Error, Result};
use crate::matrixcore::{singular_values, CMatrix, DenseOperator};

/// Minimum decades spanned by a profile before an exponent is fitted.
pub const MIN_DECADES: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularProfile {
    values: Vec<f64>,
    declared_law: Option<f64>,
}

impl SingularProfile {
    pub fn new(values: Vec<f64>, declared_law: Option<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty singular profile".into()));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("singular values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("singular values must be nonincreasing".into()));
        }
        if let Some(rho) = declared_law {
            if !(rho > 0.0) {
                return Err(Error::InvalidInput("declared exponent must be positive".into()));
            }
        }
        Ok(Self { values, declared_law })
    }

    /// s-numbers of `B`.
    pub fn from_operator(b: &DenseOperator) -> Result<Self> {
        Self::new(singular_values(b.matrix()), None)
    }

    /// s-numbers of `B^k`.
    pub fn from_power(b: &DenseOperator, k: u32) -> Result<Self> {
        Self::new(singular_values(&matrix_power(b.matrix(), k)), None)
    }

    pub fn with_law(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidInput("declared exponent must be positive".into()));
        }
        self.declared_law = Some(rho);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn declared_law(&self) -> Option<f64> {
        self.declared_law
    }

    /// Jump points `a_i = 1/s_i`, ascending.
    pub fn jumps(&self) -> Vec<f64> {
        self.values.iter().map(|s| 1.0 / s).collect()
    }

    /// Radius past which `n(r)` equals the profile length.
    pub fn saturation_radius(&self) -> f64 {
        1.0 / self.values.last().unwrap()
    }
}

fn matrix_power(m: &CMatrix, k: u32) -> CMatrix {
    let mut p = CMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        p = m * p;
    }
    p
}

/// `n(r) = #{i : 1/s_i < r}`.
pub fn counting_function(profile: &SingularProfile, r: f64) -> Result<usize> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput("r must be positive".into()));
    }
    Ok(profile.values.iter().filter(|s| 1.0 / **s < r).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentSource {
    Declared,
    FiniteTruncation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub source: ExponentSource,
    pub note: String,
}

/// Declared law if present; otherwise `-1/slope` of the least-squares fit of
/// `log s_i` against `log i` over the tail half.
pub fn convergence_exponent_estimate(profile: &SingularProfile) -> Result<ExponentEstimate> {
    if let Some(rho) = profile.declared_law {
        return Ok(ExponentEstimate {
            value: rho,
            source: ExponentSource::Declared,
            note: "declared singular-value law".into(),
        });
    }
    let n = profile.values.len();
    if n < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 singular values, got {n}")));
    }
    let decades = (profile.values[0] / profile.values[n - 1]).log10();
    if decades < MIN_DECADES {
        return Err(Error::DegenerateProfile(format!(
            "values span {decades:.3} decades, fewer than {MIN_DECADES}"
        )));
    }
    let pts: Vec<(f64, f64)> = (n / 2..n)
        .map(|i| (((i + 1) as f64).ln(), profile.values[i].ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::DegenerateProfile(format!("tail slope {slope} is not negative")));
    }
    Ok(ExponentEstimate {
        value: -1.0 / slope,
        source: ExponentSource::FiniteTruncation,
        note: format!("finite-truncation estimate from {} tail values", pts.len()),
    })
}

/// `Σ s_i^p`.
pub fn schatten_sum(profile: &SingularProfile, p: f64) -> f64 {
    profile.values.iter().map(|s| s.powf(p)).sum()
}

/// `∫ t^{-p} dn(t)`, summed over the jumps of the counting function.
pub fn schatten_sum_stieltjes(profile: &SingularProfile, p: f64) -> Result<f64> {
    let mut points = profile.jumps();
    points.dedup();
    let mut total = 0.0;
    for a in points {
        let jump = counting_function(profile, a * (1.0 + 1e-12))? - counting_function(profile, a)?;
        total += jump as f64 * a.powf(-p);
    }
    Ok(total)
}

/// `β(r) = r^{-ϱ/(m+1)} (∫_0^r n(t)/t dt + r ∫_r^∞ n(t)/t² dt)`, integrated
/// exactly over the step function: `Σ_{a_i<r} ln(r/a_i) + Σ_i r/max(r, a_i)`.
pub fn beta(profile: &SingularProfile, varrho: f64, m: u32, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput("r must be positive".into()));
    }
    let (mut lower, mut upper) = (0.0, 0.0);
    for a in profile.jumps() {
        if a < r {
            lower += (r / a).ln();
        }
        upper += r / a.max(r);
    }
    Ok(r.powf(-varrho / (m + 1) as f64) * (lower + upper))
}

/// `γ(|λ|) = β(|λ|^{m+1}) + C β(|Cλ|^{m+1})`.
pub fn gamma(profile: &SingularProfile, varrho: f64, m: u32, c: f64, lambda_abs: f64) -> Result<f64> {
    let k = (m + 1) as i32;
    Ok(beta(profile, varrho, m, lambda_abs.powi(k))? + c * beta(profile, varrho, m, (c * lambda_abs).powi(k))?)
}

fn exponent_order(rho: f64) -> Result<u32> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::PreconditionFailed(format!("rho = {rho} must be positive")));
    }
    Ok(rho.floor() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    pub ratio_24a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub varrho: f64,
    pub m: u32,
    pub c: f64,
    pub rows: Vec<StatsRow>,
}

impl GrowthTable {
    pub fn to_csv(&self) -> String {
        csv::table(
            &["r", "beta", "gamma", "ratio_24a"],
            self.rows
                .iter()
                .map(|r| vec![csv::num(r.r), csv::num(r.beta), csv::num(r.gamma), csv::num(r.ratio_24a)]),
        )
    }
}

/// `β(r)`, `γ(r)` and `n(r^{m+1})/r^ϱ` on `r_grid`, with `m = ⌊ϱ⌋` and the
/// profile taken to be that of `B^{m+1}`.
pub fn lemma2_diagnostics(profile: &SingularProfile, varrho: f64, c: f64, r_grid: &[f64]) -> Result<GrowthTable> {
    let m = exponent_order(varrho)?;
    let rows = r_grid
        .iter()
        .map(|&r| {
            Ok(StatsRow {
                r,
                beta: beta(profile, varrho, m, r)?,
                gamma: gamma(profile, varrho, m, c, r)?,
                ratio_24a: ratio_24a(profile, varrho, m, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GrowthTable { varrho, m, c, rows })
}

fn ratio_24a(profile: &SingularProfile, rho: f64, m: u32, r: f64) -> Result<f64> {
    Ok(counting_function(profile, r.powi((m + 1) as i32))? as f64 / r.powf(rho))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition24aReport {
    pub rho: f64,
    pub m: u32,
    /// `(r, n(r^{m+1})/r^ρ)`.
    pub rows: Vec<(f64, f64)>,
    /// `r` past which `n(r^{m+1})` is saturated.
    pub saturation_radius: f64,
    /// Whether the second half of the table is nonincreasing.
    pub tail_nonincreasing: bool,
}

pub fn condition_24a_probe(profile: &SingularProfile, rho: f64, r_grid: &[f64]) -> Result<Condition24aReport> {
    let m = exponent_order(rho)?;
    let rows = r_grid
        .iter()
        .map(|&r| Ok((r, ratio_24a(profile, rho, m, r)?)))
        .collect::<Result<Vec<_>>>()?;
    let tail = &rows[rows.len() / 2..];
    Ok(Condition24aReport {
        rho,
        m,
        saturation_radius: profile.saturation_radius().powf(1.0 / (m + 1) as f64),
        tail_nonincreasing: tail.windows(2).all(|w| w[1].1 <= w[0].1),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub m: u32,
    pub p: f64,
    /// `Σ s_i(B^{m+1})^{p/(m+1)}`.
    pub lhs_singular: f64,
    /// `Σ |λ_i(B^{m+1})|^{p/(m+1)}`.
    pub lhs_eigen: f64,
    /// `Σ s_i(B)^p`.
    pub rhs: f64,
    pub holds: bool,
}

/// Eigenvalue and singular-value sums of `B^{m+1}` at exponent `p/(m+1)`
/// against `Σ s_i(B)^p`, with relative tolerance `tol`.
pub fn lidskii_ordering_check(b: &DenseOperator, m: u32, p: f64, tol: f64) -> Result<OrderingReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidInput("p must be positive".into()));
    }
    let q = p / (m + 1) as f64;
    let pow = matrix_power(b.matrix(), m + 1);
    let lhs_singular: f64 = singular_values(&pow).iter().map(|s| s.powf(q)).sum();
    let lhs_eigen: f64 = nalgebra::Schur::new(pow.clone())
        .unpack()
        .1
        .diagonal()
        .iter()
        .map(|l| l.norm().powf(q))
        .sum();
    let rhs: f64 = singular_values(b.matrix()).iter().map(|s| s.powf(p)).sum();
    let slack = tol * rhs;
    Ok(OrderingReport {
        m,
        p,
        lhs_singular,
        lhs_eigen,
        rhs,
        holds: lhs_singular <= rhs + slack && lhs_eigen <= lhs_singular + slack,
    })
}
