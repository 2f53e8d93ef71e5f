//! Dense complex linear algebra: the finite-dimensional stand-in for the
//! compact operator `B`, its resolvent `(I - λB)^{-1}`, numerical-range
//! sampling and the sector/ray resolvent bounds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative singularity threshold: `σ_min ≤ SINGULAR_RTOL · ‖B‖` is singular.
pub const SINGULAR_RTOL: f64 = 1e-10;

/// Slack allowed above `1/sin ψ₀` before a ray bound counts as violated.
pub const RAY_BOUND_TOL: f64 = 1e-9;

/// Square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: CMatrix,
    label: Option<String>,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "operator must be square with dim >= 1, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("operator has non-finite entries".into()));
        }
        Ok(Self {
            matrix,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CMatrix::identity(dim, dim)).expect("dim >= 1")
    }

    pub fn diagonal(values: &[Complex64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&CVector::from_column_slice(values)))
    }

    /// Builds from row-major real and imaginary parts.
    pub fn from_row_major(dim: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != dim * dim || im.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries per part, got re={} im={}",
                dim * dim,
                re.len(),
                im.len()
            )));
        }
        let m = CMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(re[i * dim + j], im[i * dim + j])
        });
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn adjoint(&self) -> CMatrix {
        self.matrix.adjoint()
    }

    pub fn apply(&self, f: &CVector) -> CVector {
        &self.matrix * f
    }

    /// Spectral norm `‖B‖`.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }

    /// Eigenvalues from a complex Schur decomposition.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let schur = Schur::new(self.matrix.clone());
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }

    pub fn to_json(&self) -> OperatorJson {
        let d = self.dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(self.matrix[(i, j)].re);
                im.push(self.matrix[(i, j)].im);
            }
        }
        OperatorJson {
            dim: d,
            re,
            im,
            label: self.label.clone(),
        }
    }

    pub fn from_json(json: &OperatorJson) -> Result<Self> {
        let mut op = Self::from_row_major(json.dim, &json.re, &json.im)?;
        op.label = json.label.clone();
        Ok(op)
    }
}

/// Wire form `{"dim": d, "re": [...], "im": [...]}`, flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Inner product `(f, g) = Σ f_i conj(g_i)`, linear in the first slot.
pub fn inner(f: &CVector, g: &CVector) -> Complex64 {
    f.iter().zip(g.iter()).map(|(a, b)| a * b.conj()).sum()
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex vector with i.i.d. standard complex Gaussian entries.
pub fn gaussian_vector<R: rand::Rng>(rng: &mut R, dim: usize) -> CVector {
    CVector::from_fn(dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Normalized complex Gaussian draw.
pub fn unit_vector<R: rand::Rng>(rng: &mut R, dim: usize) -> CVector {
    loop {
        let v = gaussian_vector(rng, dim);
        let n = v.norm();
        if n > 1e-300 {
            return v.unscale(n);
        }
    }
}

/// Solves `(I - λB) x = f`.
pub fn resolvent_apply(b: &DenseOperator, lambda: Complex64, f: &CVector) -> Result<CVector> {
    check_len(b, f)?;
    let d = b.dim();
    let a = CMatrix::identity(d, d) - b.matrix() * lambda;
    let sigma_min = smallest_singular_value(&a);
    if sigma_min <= SINGULAR_RTOL * b.norm() {
        return Err(Error::SingularResolvent { lambda, sigma_min });
    }
    a.lu()
        .solve(f)
        .ok_or(Error::SingularResolvent { lambda, sigma_min })
}

/// Values `(Bf, f)` for `count` seeded unit vectors `f`.
pub fn numerical_range_sample(b: &DenseOperator, count: usize, seed: u64) -> Result<Vec<Complex64>> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..count)
        .map(|_| {
            let f = unit_vector(&mut rng, b.dim());
            inner(&b.apply(&f), &f)
        })
        .collect())
}

/// Sampled evidence that `Θ(B)` lies in the sector `|arg z| ≤ semi_angle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub vertex: Complex64,
    pub semi_angle: f64,
    pub max_observed_arg: f64,
    pub sample_count: usize,
    pub holds: bool,
}

/// A `false` verdict is conclusive; `true` only means no sample escaped.
pub fn sectorial_check(b: &DenseOperator, theta: f64, count: usize, seed: u64) -> Result<SectorReport> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidInput(format!("sector angle {theta} not in [0, pi)")));
    }
    let samples = numerical_range_sample(b, count, seed)?;
    let max_arg = samples
        .iter()
        .filter(|z| z.norm() > 0.0)
        .map(|z| z.arg().abs())
        .fold(0.0_f64, f64::max);
    Ok(SectorReport {
        vertex: Complex64::new(0.0, 0.0),
        semi_angle: theta,
        max_observed_arg: max_arg,
        sample_count: count,
        holds: max_arg <= theta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayBoundReport {
    pub ray_arg: f64,
    pub psi0: f64,
    pub bound: f64,
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    /// Largest `norm - bound` over the radii.
    pub max_excess: f64,
}

/// Checks `‖(I - λB)^{-1}‖ ≤ 1/sin ψ₀` along the ray `arg λ = ray_arg`.
///
/// The ray must lie outside the closed sector `|arg| ≤ θ` and off the real
/// axis; boundary rays are rejected rather than guessed at.
pub fn ray_bound_check(
    b: &DenseOperator,
    ray_arg: f64,
    theta: f64,
    radii: &[f64],
) -> Result<RayBoundReport> {
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidInput(format!("sector angle {theta} not in [0, pi)")));
    }
    let arg = wrap_angle(ray_arg);
    if arg.abs() <= theta {
        return Err(Error::InvalidInput(format!(
            "ray arg {ray_arg} lies in the sector |arg| <= {theta}"
        )));
    }
    if arg.abs() < 1e-12 || (PI - arg.abs()) < 1e-12 {
        return Err(Error::InvalidInput("ray lies on the real axis".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidInput("radii must be positive and finite".into()));
    }
    let psi0 = (arg - theta).abs().min((arg + theta).abs());
    let bound = 1.0 / psi0.sin();
    let d = b.dim();
    let dir = Complex64::from_polar(1.0, arg);
    let mut norms = Vec::with_capacity(radii.len());
    let mut max_excess = f64::NEG_INFINITY;
    for &r in radii {
        let lambda = dir * r;
        let a = CMatrix::identity(d, d) - b.matrix() * lambda;
        let sigma_min = smallest_singular_value(&a);
        if sigma_min <= 0.0 {
            return Err(Error::SingularResolvent { lambda, sigma_min });
        }
        let norm = 1.0 / sigma_min;
        if norm > bound + RAY_BOUND_TOL {
            return Err(Error::SectorViolation {
                lambda,
                norm,
                bound,
            });
        }
        max_excess = max_excess.max(norm - bound);
        norms.push(norm);
    }
    Ok(RayBoundReport {
        ray_arg: arg,
        psi0,
        bound,
        radii: radii.to_vec(),
        norms,
        max_excess,
    })
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

fn check_len(b: &DenseOperator, f: &CVector) -> Result<()> {
    if f.len() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "vector length {} does not match dim {}",
            f.len(),
            b.dim()
        )));
    }
    Ok(())
}

/// Precomputed Schur form `B = Q T Q*` for repeated evaluation of
/// `B(I - λB)^{-1} h` at many quadrature nodes, O(d²) per node.
#[derive(Debug, Clone)]
pub struct ResolventKernel {
    q: CMatrix,
    t: CMatrix,
    norm: f64,
}

impl ResolventKernel {
    pub fn new(b: &DenseOperator) -> Self {
        let (q, t) = Schur::new(b.matrix().clone()).unpack();
        Self {
            q,
            t,
            norm: b.norm(),
        }
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Rotates `h` into Schur coordinates; pass the result to [`Self::apply_rotated`].
    pub fn rotate(&self, h: &CVector) -> CVector {
        self.q.ad_mul(h)
    }

    /// `B(I - λB)^{-1} h` given `y = Q* h`.
    pub fn apply_rotated(&self, lambda: Complex64, y: &CVector) -> Result<CVector> {
        Ok(self.unrotate(&self.apply_schur(lambda, y)?))
    }

    /// Maps Schur coordinates back: `Q v`.
    pub fn unrotate(&self, v: &CVector) -> CVector {
        &self.q * v
    }

    /// `T(I - λT)^{-1} y`, the kernel in Schur coordinates.
    pub fn apply_schur(&self, lambda: Complex64, y: &CVector) -> Result<CVector> {
        let d = self.dim();
        let mut x = CVector::zeros(d);
        for i in (0..d).rev() {
            let diag = Complex64::new(1.0, 0.0) - lambda * self.t[(i, i)];
            if diag.norm() <= SINGULAR_RTOL * self.norm.max(1.0) * lambda.norm().max(1.0) {
                return Err(Error::SingularResolvent {
                    lambda,
                    sigma_min: diag.norm(),
                });
            }
            let mut acc = y[i];
            for j in (i + 1)..d {
                acc += lambda * self.t[(i, j)] * x[j];
            }
            x[i] = acc / diag;
        }
        Ok(&self.t * x)
    }

    pub fn apply(&self, lambda: Complex64, h: &CVector) -> Result<CVector> {
        self.apply_rotated(lambda, &self.rotate(h))
    }
}
