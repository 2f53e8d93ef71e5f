//! The contour ϑ(B): inner arc `|λ| = r` over `|arg λ| ≤ θ+ς`, the two rays
//! `arg λ = ±(θ+ς)`, and the annulus circles `R̃_ν` that split it into pole
//! groups. Quadrature of the evolution integral, closed-form residues, group
//! sums and tail norms.
//!
//! Orientation (`Orientation::Standard`): in along the lower ray, across the
//! inner arc counterclockwise, out along the upper ray. This runs clockwise
//! around every characteristic number, so each pole contributes
//! `+Σ e_n c_n(t)`, the negative of its residue.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::abel::{AbelEvaluator, AbelKernel};
use crate::csv;
use crate::error::{Error, Result};
use crate::jordan::JordanSystem;
use crate::matrixcore::{singular_values, CVector, DenseOperator, ResolventKernel, SINGULAR_RTOL};
use crate::opfunc::{fit_decay_constant, validate_sector_condition, LaurentFunction};
use crate::quadrature::{integrate_path, PathPiece, QuadOptions, DEFAULT_MAX_NODES};

pub const DEFAULT_KAPPA: f64 = 0.5;
/// Minimum relative distance between an annulus circle and any pole radius.
pub const GAP_REL: f64 = 0.05;
pub const DEFAULT_TARGET_TAIL: f64 = 1e-12;
/// Radius of the residue oracle circle, relative to `|λ_q|`.
pub const SMALL_CIRCLE_REL: f64 = 0.01;
const MAX_RINGS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    #[default]
    Standard,
}

/// Analytic bound for what truncation at `R` drops: both rays beyond `R`
/// and the arc `|λ| = R`, per unit `‖h‖`. Valid for `R ≥ r0`, where
/// `‖B(I - λB)^{-1}‖ ≤ 2/|λ|`, `Re φ ≥ C|φ|` and `|φ| ≥ |c_s| |λ|^s / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub decay_c: f64,
    pub degree: i32,
    pub lead: f64,
    pub half_angle: f64,
    pub r0: f64,
    pub norm_w: f64,
}

impl TailModel {
    pub fn bound(&self, radius: f64, t: f64) -> f64 {
        if !(t > 0.0) || radius < self.r0 {
            return f64::INFINITY;
        }
        let s = self.degree as f64;
        let x = 0.5 * t * self.decay_c * self.lead * radius.powf(s);
        let e = (-x).exp();
        (4.0 * e / (s * x) + 4.0 * self.half_angle * e) / (2.0 * PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub r: f64,
    pub theta: f64,
    pub varsigma: f64,
    pub r_max: f64,
    /// `R̃_1 < … < R̃_K = R_max`.
    pub annuli: Vec<f64>,
    pub kappa: f64,
    pub orientation: Orientation,
    pub t_min: f64,
    pub target_tail: f64,
    pub tail: TailModel,
    /// `|λ_q|`, ascending.
    pub pole_radii: Vec<f64>,
}

impl ContourSpec {
    pub fn half_angle(&self) -> f64 {
        self.theta + self.varsigma
    }

    /// `[r, R̃_1, …, R_max]`; ring `ν` lies between entries `ν` and `ν+1`.
    pub fn circles(&self) -> Vec<f64> {
        std::iter::once(self.r).chain(self.annuli.iter().copied()).collect()
    }

    pub fn ring_count(&self) -> usize {
        self.annuli.len()
    }

    /// Tail bound per unit `‖h‖` at time `t`.
    pub fn tail_bound(&self, t: f64) -> f64 {
        self.tail.bound(self.r_max, t)
    }

    /// Ring holding the outermost pole.
    pub fn last_pole_ring(&self) -> Option<usize> {
        let outer = *self.pole_radii.last()?;
        let c = self.circles();
        (0..self.ring_count()).find(|&v| c[v] < outer && outer < c[v + 1])
    }

    /// The same contour with `R_max` doubled.
    pub fn extended(&self) -> Self {
        let mut s = self.clone();
        s.r_max *= 2.0;
        s.annuli.push(s.r_max);
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourOptions {
    pub kappa: f64,
    pub gap: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            gap: GAP_REL,
        }
    }
}

/// `min(0.1, (π/2 - θ)/4, margin/(2s))` with `margin = π/2 - max(|arg c_n| + nθ)`,
/// so that the coefficient condition still holds at `θ + ς`.
pub fn default_varsigma(theta: f64, phi: &LaurentFunction) -> f64 {
    let mut v = 0.1f64.min((FRAC_PI_2 - theta) / 4.0);
    if let Ok(cond) = validate_sector_condition(phi, theta) {
        let margin = FRAC_PI_2 - cond.max_value;
        if margin > 0.0 && phi.degree() > 0 {
            v = v.min(margin / (2.0 * phi.degree() as f64));
        }
    }
    v
}

/// Smallest `ρ ≥ 1` (by doubling) with `Σ_{n≠s} |c_n| ρ^{n-s} ≤ |c_s|/2`.
fn leading_radius(phi: &LaurentFunction) -> f64 {
    let s = phi.degree();
    let lead = phi.coeff(s).norm();
    let mut rho = 1.0f64;
    for _ in 0..200 {
        let rest: f64 = phi
            .terms()
            .filter(|(n, _)| *n != s)
            .map(|(n, c)| c.norm() * rho.powi(n - s))
            .sum();
        if rest <= 0.5 * lead {
            break;
        }
        rho *= 2.0;
    }
    rho
}

fn nudge(lo: f64, hi: f64, radii: &[f64]) -> f64 {
    let mut pts: Vec<f64> = std::iter::once(lo)
        .chain(radii.iter().copied().filter(|p| *p > lo && *p < hi))
        .chain(std::iter::once(hi))
        .collect();
    pts.dedup();
    let (a, b) = pts
        .windows(2)
        .map(|w| (w[0], w[1]))
        .max_by(|x, y| ((x.1 - x.0) / x.1).total_cmp(&((y.1 - y.0) / y.1)))
        .unwrap_or((lo, hi));
    0.5 * (a + b)
}

pub fn build_contour(
    b: &DenseOperator,
    phi: &LaurentFunction,
    theta: f64,
    varsigma: f64,
    t_min: f64,
    target_tail: f64,
) -> Result<ContourSpec> {
    build_contour_with(b, phi, theta, varsigma, t_min, target_tail, &ContourOptions::default())
}

pub fn build_contour_with(
    b: &DenseOperator,
    phi: &LaurentFunction,
    theta: f64,
    varsigma: f64,
    t_min: f64,
    target_tail: f64,
    opts: &ContourOptions,
) -> Result<ContourSpec> {
    if !(0.0..FRAC_PI_2).contains(&theta) || !(varsigma > 0.0) || theta + varsigma >= FRAC_PI_2 {
        return Err(Error::PreconditionFailed(format!(
            "need 0 <= theta, varsigma > 0, theta + varsigma < pi/2 (theta = {theta}, varsigma = {varsigma})"
        )));
    }
    if !(t_min > 0.0) || !(target_tail > 0.0) {
        return Err(Error::InvalidInput("t_min and target_tail must be positive".into()));
    }
    if !(opts.kappa > 0.0 && opts.kappa < 1.0) || !(opts.gap > 0.0) {
        return Err(Error::InvalidInput("kappa must lie in (0, 1) and gap be positive".into()));
    }
    if phi.degree() < 1 {
        return Err(Error::PreconditionFailed("phi must have degree s >= 1 for decay along the rays".into()));
    }
    let sv = singular_values(b.matrix());
    let sigma_min = *sv.last().unwrap();
    if sigma_min <= SINGULAR_RTOL * sv[0] {
        return Err(Error::SingularOperator { sigma_min });
    }
    let mus = b.eigenvalues();
    if let Some(mu) = mus.iter().find(|m| m.arg().abs() > theta + 1e-12) {
        return Err(Error::PreconditionFailed(format!("eigenvalue {mu} lies outside the sector {theta}")));
    }
    let mut pole_radii: Vec<f64> = mus.iter().map(|m| 1.0 / m.norm()).collect();
    pole_radii.sort_by(f64::total_cmp);
    let r = 0.5 * pole_radii[0];
    let outer_pole = *pole_radii.last().unwrap();

    let half_angle = theta + varsigma;
    let norm_w = 1.0 / sigma_min;
    let r0 = (10.0 * outer_pole).max(2.0 * norm_w).max(leading_radius(phi));
    let fit = fit_decay_constant(phi, half_angle, r0)?;
    if !(fit.c > 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "Re phi >= C|phi| fails on the sector of half-angle {half_angle} (fitted C = {})",
            fit.c
        )));
    }
    let tail = TailModel {
        decay_c: fit.c,
        degree: phi.degree(),
        lead: phi.coeff(phi.degree()).norm(),
        half_angle,
        r0,
        norm_w,
    };

    let ratio = 1.0 / (1.0 - opts.kappa);
    let mut annuli = Vec::new();
    for nu in 1..=MAX_RINGS {
        let lo = r * ratio.powi(nu as i32);
        let hi = lo * ratio;
        let radius = nudge(lo, hi, &pole_radii);
        if pole_radii.iter().any(|p| (radius - p).abs() < opts.gap * p) {
            return Err(Error::GapFailure { inner: lo, outer: hi });
        }
        annuli.push(radius);
        if radius > outer_pole && radius >= r0 && tail.bound(radius, t_min) <= target_tail {
            return Ok(ContourSpec {
                r,
                theta,
                varsigma,
                r_max: radius,
                annuli,
                kappa: opts.kappa,
                orientation: Orientation::Standard,
                t_min,
                target_tail,
                tail,
                pole_radii,
            });
        }
    }
    Err(Error::PreconditionFailed(format!(
        "tail target {target_tail:e} not reached within {MAX_RINGS} rings"
    )))
}

/// Result of one contour quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    pub value: CVector,
    pub node_count: usize,
    pub est_error: f64,
    pub tail_bound: f64,
}

/// Quadrature of `(1/2πi) e^{-φ(λ)t} B(I - λB)^{-1} h` over pieces of the contour.
#[derive(Debug, Clone)]
pub struct ContourIntegrator {
    kernel: ResolventKernel,
    phi: LaurentFunction,
    spec: ContourSpec,
    max_nodes: usize,
}

impl ContourIntegrator {
    pub fn new(b: &DenseOperator, phi: &LaurentFunction, spec: &ContourSpec) -> Self {
        Self {
            kernel: ResolventKernel::new(b),
            phi: phi.clone(),
            spec: spec.clone(),
            max_nodes: DEFAULT_MAX_NODES,
        }
    }

    pub fn with_max_nodes(mut self, max_nodes: usize) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    pub fn spec(&self) -> &ContourSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn check_h(&self, h: &CVector) -> Result<()> {
        if h.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "vector length {} does not match dim {}",
                h.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Integrates over `pieces` with absolute tolerance `tol`.
    pub fn integrate(&self, pieces: &[PathPiece], h: &CVector, t: f64, tol: f64) -> Result<(CVector, usize, f64)> {
        self.check_h(h)?;
        let d = self.dim();
        if h.iter().all(|x| *x == Complex64::new(0.0, 0.0)) {
            return Ok((CVector::zeros(d), 0, 0.0));
        }
        let y = self.kernel.rotate(h);
        let scale = Complex64::new(0.0, -1.0 / (2.0 * PI));
        let f = |z: Complex64| -> Result<CVector> {
            let w = (-self.phi.evaluate(z)? * t).exp() * scale;
            Ok(self.kernel.apply_schur(z, &y)? * w)
        };
        let opts = QuadOptions {
            tol,
            max_nodes: self.max_nodes,
            initial_panels: 1,
        };
        let out = integrate_path(pieces, d, f, &opts)?;
        Ok((self.kernel.unrotate(&out.value), out.node_count, out.est_error))
    }

    /// Ray segments at `arg = sign·α` between consecutive circles, outward.
    fn ray_pieces(&self, sign: f64, from: usize, to: usize) -> Vec<PathPiece> {
        let c = self.spec.circles();
        let a = sign * self.spec.half_angle();
        (from..to).map(|v| PathPiece::ray(a, c[v], c[v + 1])).collect()
    }

    /// The truncated contour in standard orientation.
    pub fn contour_pieces(&self) -> Vec<PathPiece> {
        let n = self.spec.ring_count();
        let a = self.spec.half_angle();
        let mut pieces: Vec<PathPiece> = self.ray_pieces(-1.0, 0, n).iter().rev().map(|p| p.reversed()).collect();
        pieces.push(PathPiece::arc(self.spec.r, -a, a));
        pieces.extend(self.ray_pieces(1.0, 0, n));
        pieces
    }

    /// Boundary of ring `ν` within the sector, clockwise.
    pub fn ring_pieces(&self, nu: usize) -> Result<Vec<PathPiece>> {
        if nu >= self.spec.ring_count() {
            return Err(Error::IndexError(format!(
                "ring {nu} out of range ({} rings)",
                self.spec.ring_count()
            )));
        }
        let c = self.spec.circles();
        let a = self.spec.half_angle();
        Ok(vec![
            self.ray_pieces(-1.0, nu, nu + 1)[0].reversed(),
            PathPiece::arc(c[nu], -a, a),
            self.ray_pieces(1.0, nu, nu + 1)[0],
            PathPiece::arc(c[nu + 1], a, -a),
        ])
    }

    pub fn evolution_integral(&self, h: &CVector, t: f64, tol: f64) -> Result<QuadratureResult> {
        if !(t > 0.0) {
            return Err(Error::InvalidInput("evolution integral needs t > 0".into()));
        }
        let (value, node_count, est_error) = self.integrate(&self.contour_pieces(), h, t, tol)?;
        Ok(QuadratureResult {
            value,
            node_count,
            est_error,
            tail_bound: self.spec.tail_bound(t) * h.norm(),
        })
    }

    pub fn ring_integral(&self, nu: usize, h: &CVector, t: f64, tol: f64) -> Result<QuadratureResult> {
        let (value, node_count, est_error) = self.integrate(&self.ring_pieces(nu)?, h, t, tol)?;
        Ok(QuadratureResult {
            value,
            node_count,
            est_error,
            tail_bound: 0.0,
        })
    }

    /// Clockwise circle of radius `radius` around `center`.
    pub fn circle_integral(&self, center: Complex64, radius: f64, h: &CVector, t: f64, tol: f64) -> Result<QuadratureResult> {
        let piece = PathPiece::circle(center, radius).reversed();
        let (value, node_count, est_error) = self.integrate(&[piece], h, t, tol)?;
        Ok(QuadratureResult {
            value,
            node_count,
            est_error,
            tail_bound: 0.0,
        })
    }

    /// `J_ν`, `J+_ν`, `J-_ν`: norms of the plain integrals (no `1/2πi`) over
    /// the arc `|λ| = circles[ν]` within the sector and the ray pieces from
    /// `circles[ν]` to `circles[ν+1]`.
    pub fn tail_norms(&self, h: &CVector, t: f64) -> Result<TailTrace> {
        if !(t > 0.0) {
            return Err(Error::InvalidInput("tail norms need t > 0".into()));
        }
        let c = self.spec.circles();
        let a = self.spec.half_angle();
        let tol = 1e-14 * h.norm().max(f64::MIN_POSITIVE);
        let n = self.spec.ring_count();
        let mut rows = Vec::with_capacity(c.len());
        for (nu, &radius) in c.iter().enumerate() {
            let norm = |pieces: &[PathPiece]| -> Result<f64> { Ok(2.0 * PI * self.integrate(pieces, h, t, tol)?.0.norm()) };
            let j = norm(&[PathPiece::arc(radius, -a, a)])?;
            let (jp, jm) = if nu < n {
                (norm(&self.ray_pieces(1.0, nu, nu + 1))?, norm(&self.ray_pieces(-1.0, nu, nu + 1))?)
            } else {
                (0.0, 0.0)
            };
            rows.push(TailRow {
                nu,
                radius,
                j,
                j_plus: jp,
                j_minus: jm,
            });
        }
        Ok(TailTrace {
            rows,
            last_pole_ring: self.spec.last_pole_ring(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub nu: usize,
    pub radius: f64,
    pub j: f64,
    pub j_plus: f64,
    pub j_minus: f64,
}

impl TailRow {
    pub fn max(&self) -> f64 {
        self.j.max(self.j_plus).max(self.j_minus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTrace {
    pub rows: Vec<TailRow>,
    pub last_pole_ring: Option<usize>,
}

impl TailTrace {
    /// First `ν` past the last pole-bearing ring from which every row stays
    /// at or below `threshold`.
    pub fn settles_below(&self, threshold: f64) -> Option<usize> {
        let start = self.last_pole_ring.map_or(0, |v| v + 1);
        let mut first = None;
        for row in self.rows.iter().filter(|r| r.nu >= start) {
            if row.max() <= threshold {
                first.get_or_insert(row.nu);
            } else {
                first = None;
            }
        }
        first
    }

    pub fn to_csv(&self) -> String {
        csv::table(
            &["nu", "radius", "J", "J_plus", "J_minus"],
            self.rows.iter().map(|r| {
                vec![
                    r.nu.to_string(),
                    csv::num(r.radius),
                    csv::num(r.j),
                    csv::num(r.j_plus),
                    csv::num(r.j_minus),
                ]
            }),
        )
    }
}

pub fn evolution_integral(
    b: &DenseOperator,
    phi: &LaurentFunction,
    h: &CVector,
    t: f64,
    spec: &ContourSpec,
    tol: f64,
) -> Result<QuadratureResult> {
    ContourIntegrator::new(b, phi, spec).evolution_integral(h, t, tol)
}

/// `Σ_ξ Σ_i e_{q_ξ+i} c_{q_ξ+i}(t)`: the contribution of cluster `q` to the
/// contour integral in standard orientation (minus the residue).
pub fn residue_at_pole(
    sys: &JordanSystem,
    phi: &LaurentFunction,
    base: &[Complex64],
    q: usize,
    t: f64,
) -> Result<CVector> {
    if q >= sys.cluster_count() {
        return Err(Error::IndexError(format!("cluster {q} out of range")));
    }
    let coeffs = AbelEvaluator::new(sys, phi, AbelKernel::Resolvent)?.coefficients(base, t)?;
    Ok(cluster_sum(sys, &coeffs.values, q))
}

fn cluster_sum(sys: &JordanSystem, values: &[Complex64], q: usize) -> CVector {
    let mut acc = CVector::zeros(sys.dim());
    for n in sys.cluster_range(q) {
        acc += sys.e(n) * values[n];
    }
    acc
}

/// Oracle radius for cluster `q`: `0.01|λ_q|`, capped at half the distance
/// to the nearest other characteristic number.
pub fn small_circle_radius(sys: &JordanSystem, q: usize) -> f64 {
    let lams = sys.characteristic_numbers();
    let lq = lams[q];
    let nearest = lams
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != q)
        .map(|(_, l)| (l - lq).norm())
        .fold(f64::INFINITY, f64::min);
    (SMALL_CIRCLE_REL * lq.norm()).min(0.5 * nearest)
}

/// Direct quadrature around `λ_q` in standard (clockwise) orientation.
#[allow(clippy::too_many_arguments)]
pub fn small_circle_integral(
    b: &DenseOperator,
    phi: &LaurentFunction,
    sys: &JordanSystem,
    q: usize,
    h: &CVector,
    t: f64,
    spec: &ContourSpec,
    tol: f64,
) -> Result<QuadratureResult> {
    if q >= sys.cluster_count() {
        return Err(Error::IndexError(format!("cluster {q} out of range")));
    }
    let center = sys.specs()[q].lambda();
    ContourIntegrator::new(b, phi, spec).circle_integral(center, small_circle_radius(sys, q), h, t, tol)
}

/// Clusters of `sys` whose `|λ_q|` falls inside each ring.
pub fn ring_clusters(spec: &ContourSpec, sys: &JordanSystem) -> Vec<Vec<usize>> {
    let c = spec.circles();
    let lams = sys.characteristic_numbers();
    (0..spec.ring_count())
        .map(|v| {
            (0..lams.len())
                .filter(|&q| c[v] < lams[q].norm() && lams[q].norm() < c[v + 1])
                .collect()
        })
        .collect()
}

/// Group ends `N_ν` for the nonempty rings, strictly increasing, last = dim.
pub fn grouping(spec: &ContourSpec, sys: &JordanSystem) -> Vec<usize> {
    let mut ends = Vec::new();
    for clusters in ring_clusters(spec, sys) {
        if let Some(&q) = clusters.last() {
            ends.push(sys.cluster_range(q).end);
        }
    }
    ends
}

/// Closed-form sum of the pole contributions inside ring `ν`.
pub fn group_sum(
    sys: &JordanSystem,
    phi: &LaurentFunction,
    spec: &ContourSpec,
    nu: usize,
    base: &[Complex64],
    t: f64,
) -> Result<CVector> {
    let rings = ring_clusters(spec, sys);
    let clusters = rings
        .get(nu)
        .ok_or_else(|| Error::IndexError(format!("ring {nu} out of range ({} rings)", rings.len())))?;
    let mut acc = CVector::zeros(sys.dim());
    if clusters.is_empty() {
        return Ok(acc);
    }
    let coeffs = AbelEvaluator::new(sys, phi, AbelKernel::Resolvent)?.coefficients(base, t)?;
    for &q in clusters {
        acc += cluster_sum(sys, &coeffs.values, q);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub closed_form: CVector,
    pub quadrature: QuadratureResult,
    pub diff: f64,
}

/// [`group_sum`] with the ring boundary integral alongside; fails with
/// `VerificationMismatch` when they differ by more than `check_tol`.
#[allow(clippy::too_many_arguments)]
pub fn group_sum_verified(
    b: &DenseOperator,
    phi: &LaurentFunction,
    sys: &JordanSystem,
    spec: &ContourSpec,
    nu: usize,
    h: &CVector,
    t: f64,
    check_tol: f64,
) -> Result<GroupCheck> {
    let base = crate::jordan::expand_coefficients(h, sys)?;
    let closed_form = group_sum(sys, phi, spec, nu, &base, t)?;
    let quadrature = ContourIntegrator::new(b, phi, spec).ring_integral(nu, h, t, 0.01 * check_tol)?;
    let diff = (&closed_form - &quadrature.value).norm();
    if diff > check_tol {
        return Err(Error::VerificationMismatch {
            what: format!("group sum of ring {nu}"),
            diff,
            tol: check_tol,
        });
    }
    Ok(GroupCheck {
        closed_form,
        quadrature,
        diff,
    })
}

pub fn tail_norms(b: &DenseOperator, phi: &LaurentFunction, spec: &ContourSpec, h: &CVector, t: f64) -> Result<TailTrace> {
    ContourIntegrator::new(b, phi, spec).tail_norms(h, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::{expand_coefficients, synthesize_operator, ChainSpec};
    use crate::matrixcore::{gaussian_vector, seeded_rng, CMatrix};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z() -> LaurentFunction {
        LaurentFunction::monomial(1, c(1.0, 0.0))
    }

    fn basis(seed: u64, d: usize, spread: f64) -> DenseOperator {
        let mut rng = seeded_rng(seed);
        let cols: Vec<CVector> = (0..d).map(|_| gaussian_vector(&mut rng, d)).collect();
        DenseOperator::new(CMatrix::identity(d, d) + CMatrix::from_columns(&cols) * c(spread / (d as f64).sqrt(), 0.0)).unwrap()
    }

    fn unit(seed: u64, d: usize) -> CVector {
        let v = gaussian_vector(&mut seeded_rng(seed), d);
        &v / c(v.norm(), 0.0)
    }

    #[test]
    fn scalar_contour() {
        let b = DenseOperator::diagonal(&[c(1.0, 0.0)]).unwrap();
        let spec = build_contour(&b, &z(), 0.1, 0.1, 0.01, 1e-10).unwrap();
        assert_eq!(spec.r, 0.5);
        assert!((spec.annuli[0] - 1.5).abs() < 1e-15);
        assert_eq!(spec.last_pole_ring(), Some(0));
        assert_eq!(*spec.annuli.last().unwrap(), spec.r_max);
        assert!(spec.tail_bound(0.01) <= 1e-10);
        // C R t_min well past the bound's exponent scale
        assert!(spec.tail.decay_c * spec.r_max * 0.01 > 20.0);
    }

    #[test]
    fn annuli_avoid_pole_radii() {
        let mus: Vec<Complex64> = [1.0, 0.5, 0.25, 0.125].iter().map(|x| c(*x, 0.0)).collect();
        let b = DenseOperator::diagonal(&mus).unwrap();
        let spec = build_contour(&b, &z(), 0.1, 0.1, 0.01, 1e-10).unwrap();
        for (got, want) in spec.annuli.iter().zip([1.5, 3.0, 6.0, 12.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        for radius in &spec.annuli {
            for p in &spec.pole_radii {
                assert!((radius - p).abs() >= GAP_REL * p);
            }
        }
    }

    #[test]
    fn crowded_ring_fails() {
        let mus: Vec<Complex64> = (0..30).map(|k| c(1.0 / (1.0 + k as f64 / 30.0), 0.0)).collect();
        let b = DenseOperator::diagonal(&mus).unwrap();
        let err = build_contour(&b, &z(), 0.1, 0.1, 0.01, 1e-10).unwrap_err();
        assert_eq!(err.kind(), "GapFailure");
    }

    #[test]
    fn preconditions() {
        let b = DenseOperator::diagonal(&[c(1.0, 0.0)]).unwrap();
        assert!(build_contour(&b, &z(), 1.5, 0.1, 0.01, 1e-10).is_err());
        assert!(build_contour(&b, &LaurentFunction::constant(c(1.0, 0.0)), 0.1, 0.1, 0.01, 1e-10).is_err());
        let rot = DenseOperator::diagonal(&[c(0.0, 1.0)]).unwrap();
        assert_eq!(build_contour(&rot, &z(), 0.1, 0.1, 0.01, 1e-10).unwrap_err().kind(), "PreconditionFailed");
        let sing = DenseOperator::diagonal(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(build_contour(&sing, &z(), 0.1, 0.1, 0.01, 1e-10).unwrap_err().kind(), "SingularOperator");
    }

    #[test]
    fn tail_bound_is_monotone() {
        let b = DenseOperator::diagonal(&[c(1.0, 0.0), c(0.3, 0.1)]).unwrap();
        let spec = build_contour(&b, &z(), 0.4, 0.1, 0.01, 1e-10).unwrap();
        let m = spec.tail;
        assert!(m.bound(2.0 * spec.r_max, 0.01) < m.bound(spec.r_max, 0.01));
        assert!(m.bound(spec.r_max, 0.1) < m.bound(spec.r_max, 0.01));
        assert_eq!(m.bound(spec.r_max, 0.0), f64::INFINITY);
    }

    #[test]
    fn zero_vector_integrates_to_zero() {
        let b = DenseOperator::diagonal(&[c(1.0, 0.0), c(0.5, 0.1)]).unwrap();
        let spec = build_contour(&b, &z(), 0.3, 0.1, 0.01, 1e-10).unwrap();
        let r = evolution_integral(&b, &z(), &CVector::zeros(2), 0.1, &spec, 1e-10).unwrap();
        assert_eq!(r.value, CVector::zeros(2));
        let trace = tail_norms(&b, &z(), &spec, &CVector::zeros(2), 0.1).unwrap();
        assert!(trace.rows.iter().all(|r| r.max() == 0.0));
    }

    #[test]
    fn orientation_on_scalar() {
        // B = [2]: u(t) = e^{-t/2} h, the integral must pick up +e^{-λt}h
        let b = DenseOperator::diagonal(&[c(2.0, 0.0)]).unwrap();
        let spec = build_contour(&b, &z(), 0.0, 0.1, 0.01, 1e-12).unwrap();
        let h = CVector::from_element(1, c(1.0, 0.0));
        for t in [0.01, 0.1, 1.0] {
            let r = evolution_integral(&b, &z(), &h, t, &spec, 1e-12).unwrap();
            assert!((r.value[0] - c((-0.5 * t).exp(), 0.0)).norm() < 1e-10, "t={t}: {}", r.value[0]);
        }
        // small t reproduces h, not -h
        let r = evolution_integral(&b, &z(), &h, 0.01, &spec, 1e-12).unwrap();
        assert!((r.value[0] - h[0]).norm() < 0.01);
    }

    #[test]
    fn diagonal_closed_form() {
        let mus = [c(1.0, 0.2), c(0.5, -0.1), c(0.3, 0.0), c(0.1, 0.05)];
        let b = DenseOperator::diagonal(&mus).unwrap();
        let theta = 0.5;
        let spec = build_contour(&b, &z(), theta, 0.1, 0.01, 1e-12).unwrap();
        let h = unit(3, 4);
        for t in [0.01, 0.1, 1.0] {
            let r = evolution_integral(&b, &z(), &h, t, &spec, 1e-11).unwrap();
            let expect = CVector::from_iterator(4, mus.iter().zip(h.iter()).map(|(m, x)| (-m.inv() * t).exp() * x));
            assert!((&r.value - &expect).norm() < 1e-9, "t={t}");
            assert!(r.est_error < 1e-10);
            assert!(r.node_count >= 8);
        }
    }

    fn jordan8() -> (DenseOperator, crate::jordan::JordanSystem) {
        let specs = vec![
            ChainSpec::new(Complex64::from_polar(1.0, 0.2), vec![2, 1]),
            ChainSpec::new(Complex64::from_polar(0.4, -0.3), vec![3]),
            ChainSpec::new(Complex64::from_polar(0.15, 0.1), vec![2]),
        ];
        synthesize_operator(&specs, &basis(21, 8, 0.05)).unwrap()
    }

    #[test]
    fn residues_match_small_circles() {
        let (b, sys) = jordan8();
        let one = c(1.0, 0.0);
        let phis = [
            z(),
            LaurentFunction::from_terms(&[(1, one), (-1, one)]),
            LaurentFunction::from_terms(&[(0, c(2.0, 0.0)), (1, one), (-2, c(3.0, 0.0))]),
        ];
        let h = unit(22, 8);
        let base = expand_coefficients(&h, &sys).unwrap();
        for phi in &phis {
            let spec = build_contour(&b, phi, 0.5, 0.05, 0.01, 1e-12).unwrap();
            for q in 0..sys.cluster_count() {
                for t in [0.0, 0.1, 1.0] {
                    let closed = residue_at_pole(&sys, phi, &base, q, t).unwrap();
                    let quad = small_circle_integral(&b, phi, &sys, q, &h, t, &spec, 1e-11).unwrap();
                    let d = (&closed - &quad.value).norm();
                    assert!(d < 1e-8, "q={q} t={t}: {d:e}");
                }
            }
        }
    }

    #[test]
    fn two_chain_residue_closed_form() {
        let mu = c(0.8, 0.1);
        let lam = mu.inv();
        let (b, sys) = synthesize_operator(&[ChainSpec::new(mu, vec![2])], &basis(23, 2, 0.1)).unwrap();
        let h = unit(24, 2);
        let cs = expand_coefficients(&h, &sys).unwrap();
        let t = 0.3;
        let got = residue_at_pole(&sys, &z(), &cs, 0, t).unwrap();
        let damp = (-lam * t).exp();
        let expect = (sys.e(0) * (cs[0] + t * lam * lam * cs[1]) + sys.e(1) * cs[1]) * damp;
        assert!((&got - &expect).norm() < 1e-13);
        let spec = build_contour(&b, &z(), 0.2, 0.1, 0.01, 1e-12).unwrap();
        let quad = small_circle_integral(&b, &z(), &sys, 0, &h, t, &spec, 1e-12).unwrap();
        assert!((&got - &quad.value).norm() < 1e-9);
    }

    #[test]
    fn groups_telescope_to_full_integral() {
        let (b, sys) = jordan8();
        let phi = z();
        let spec = build_contour(&b, &phi, 0.4, 0.1, 0.01, 1e-12).unwrap();
        let h = unit(25, 8);
        let rings = ring_clusters(&spec, &sys);
        assert_eq!(rings.iter().map(|r| r.len()).sum::<usize>(), sys.cluster_count());
        let ends = grouping(&spec, &sys);
        assert_eq!(*ends.last().unwrap(), 8);
        for t in [0.01, 0.1, 1.0] {
            let full = evolution_integral(&b, &phi, &h, t, &spec, 1e-11).unwrap();
            let mut total = CVector::zeros(8);
            for (nu, ring) in rings.iter().enumerate().take(spec.ring_count()) {
                let g = group_sum_verified(&b, &phi, &sys, &spec, nu, &h, t, 1e-8).unwrap();
                if ring.is_empty() {
                    assert_eq!(g.closed_form, CVector::zeros(8));
                }
                total += g.closed_form;
            }
            let d = (&full.value - &total).norm();
            assert!(d < 1e-7 && d <= full.tail_bound + 1e-9, "t={t}: {d:e}");
        }
    }

    #[test]
    fn doubling_r_max_changes_little() {
        let (b, _) = jordan8();
        let phi = LaurentFunction::from_terms(&[(2, c(1.0, 0.0)), (0, c(1.0, 0.0))]);
        let spec = build_contour(&b, &phi, 0.35, default_varsigma(0.35, &phi), 0.01, 1e-12).unwrap();
        let h = unit(26, 8);
        let a = evolution_integral(&b, &phi, &h, 0.01, &spec, 1e-12).unwrap();
        let wide = evolution_integral(&b, &phi, &h, 0.01, &spec.extended(), 1e-12).unwrap();
        assert!((&a.value - &wide.value).norm() <= 2.0 * a.tail_bound + 2e-12);
    }

    #[test]
    fn tail_norms_settle() {
        let mus = [c(1.0, 0.2), c(0.5, -0.1), c(0.3, 0.0), c(0.1, 0.05)];
        let b = DenseOperator::diagonal(&mus).unwrap();
        let spec = build_contour(&b, &z(), 0.5, 0.1, 0.01, 1e-12).unwrap();
        let h = unit(27, 4);
        let trace = tail_norms(&b, &z(), &spec, &h, 10.0).unwrap();
        let last = spec.last_pole_ring().unwrap();
        assert!(trace.rows[last + 2].max() < 1e-12);
        assert!(trace.settles_below(1e-10).is_some());
        let trace = tail_norms(&b, &z(), &spec, &h, 0.01).unwrap();
        assert!(trace.settles_below(1e-10).is_some());
        let csv = trace.to_csv();
        assert!(csv.starts_with("nu,radius,J,J_plus,J_minus\n"));
        assert_eq!(csv.lines().count(), spec.circles().len() + 1);
    }

    #[test]
    fn spec_json_round_trip() {
        let b = DenseOperator::diagonal(&[c(1.0, 0.0), c(0.3, 0.1)]).unwrap();
        let spec = build_contour(&b, &z(), 0.4, 0.1, 0.01, 1e-10).unwrap();
        assert_eq!(ContourSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
    }

    #[test]
    fn default_margin_keeps_condition() {
        let phi = LaurentFunction::from_terms(&[(2, c(1.0, 0.0)), (0, c(1.0, 0.0))]);
        let theta = 0.6;
        let v = default_varsigma(theta, &phi);
        assert!(v > 0.0 && v <= 0.1);
        assert!(validate_sector_condition(&phi, theta + v).unwrap().holds);
    }
}
