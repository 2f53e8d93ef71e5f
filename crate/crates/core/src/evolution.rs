//! The Cauchy problem `du/dt + φ(W)u = 0`, `u(0) = h`: the series solution
//! built from chain coefficients `c_n(t)` and grouped by the contour annuli,
//! its verification checks, and an independent matrix-exponential oracle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::abel::{AbelEvaluator, AbelKernel};
use crate::contour::{grouping, ContourSpec};
use crate::csv;
use crate::error::{Error, Result};
use crate::expm::expm;
use crate::jordan::{expand_coefficients, extract_root_system, JordanSystem, DEFAULT_EXTRACT_TOL};
use crate::matrixcore::{inner, sectorial_check, seeded_rng, unit_vector, CMatrix, CVector, DenseOperator};
use crate::opfunc::{apply_phi_w, validate_sector_condition, LaurentFunction};

pub const DEFAULT_ODE_EPS: f64 = 1e-6;
pub const CONTRACTION_SLACK: f64 = 1e-8;
pub const ACCRETIVE_TOL: f64 = 1e-10;
pub const INITIAL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Samples for the numerical-range sector test.
    pub sector_samples: usize,
    pub seed: u64,
    /// `ρ₀` of a declared singular-value law `s_i ~ i^{-1/ρ₀}`.
    pub declared_law: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            sector_samples: 2000,
            seed: 0,
            declared_law: None,
        }
    }
}

/// Series solution `u(t) = Σ_ν Σ_{N_ν ≤ n < N_{ν+1}} c_n(t) e_n`.
#[derive(Debug, Clone)]
pub struct EvolutionSolution {
    b: DenseOperator,
    sys: JordanSystem,
    phi: LaurentFunction,
    spec: ContourSpec,
    grouping: Vec<usize>,
    h: CVector,
    base: Vec<Complex64>,
    evaluator: AbelEvaluator,
    notices: Vec<String>,
}

impl EvolutionSolution {
    pub fn system(&self) -> &JordanSystem {
        &self.sys
    }

    pub fn phi(&self) -> &LaurentFunction {
        &self.phi
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.b
    }

    pub fn spec(&self) -> &ContourSpec {
        &self.spec
    }

    pub fn grouping(&self) -> &[usize] {
        &self.grouping
    }

    pub fn initial(&self) -> &CVector {
        &self.h
    }

    pub fn base(&self) -> &[Complex64] {
        &self.base
    }

    /// Hypotheses waived or otherwise worth logging.
    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    /// Same operator and contour, new initial vector.
    pub fn with_initial(&self, h: &CVector) -> Result<Self> {
        let mut s = self.clone();
        s.base = expand_coefficients(h, &self.sys)?;
        s.h = h.clone();
        Ok(s)
    }

    fn sum(&self, values: &[Complex64], end: usize) -> CVector {
        let mut acc = CVector::zeros(self.sys.dim());
        for (n, v) in values.iter().enumerate().take(end) {
            acc += self.sys.e(n) * *v;
        }
        acc
    }

    fn eval_any(&self, t: f64) -> Result<CVector> {
        let values = self.evaluator.values_at(&self.base, t)?;
        Ok(self.sum(&values, self.sys.dim()))
    }

    /// `u(t)`.
    pub fn evaluate(&self, t: f64) -> Result<CVector> {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput("t must be nonnegative".into()));
        }
        self.eval_any(t)
    }

    /// Per-group contributions at `t`; they add up to `u(t)`.
    pub fn evaluate_groups(&self, t: f64) -> Result<Vec<CVector>> {
        let c = self.evaluator.coefficients(&self.base, t)?;
        let mut out = Vec::with_capacity(self.grouping.len());
        let mut start = 0;
        for &end in &self.grouping {
            let mut acc = CVector::zeros(self.sys.dim());
            for n in start..end {
                acc += self.sys.e(n) * c.values[n];
            }
            out.push(acc);
            start = end;
        }
        Ok(out)
    }

    /// Partial sum through group `j`.
    pub fn partial_sum(&self, t: f64, j: usize) -> Result<CVector> {
        let c = self.evaluator.coefficients(&self.base, t)?;
        crate::abel::grouped_partial_sum(&self.sys, &c, &self.grouping, j)
    }

    /// `u'(t)` by the 5-point central stencil with step `1e-4·max(t, 0.01)`.
    pub fn derivative(&self, t: f64) -> Result<CVector> {
        let k = 1e-4 * t.max(0.01);
        let f = |x: f64| self.eval_any(x);
        Ok((f(t - 2.0 * k)? - f(t - k)? * Complex64::new(8.0, 0.0) + f(t + k)? * Complex64::new(8.0, 0.0)
            - f(t + 2.0 * k)?)
            / Complex64::new(12.0 * k, 0.0))
    }

    /// `‖u'(t) + φ(W)u(t)‖`.
    pub fn ode_residual(&self, t: f64) -> Result<f64> {
        let u = self.evaluate(t)?;
        Ok((self.derivative(t)? + apply_phi_w(&self.phi, &self.b, &u)?).norm())
    }

    /// Tail bound of the contour at `t`, scaled by `‖h‖`.
    pub fn tail_bound(&self, t: f64) -> f64 {
        self.spec.tail_bound(t) * self.h.norm()
    }
}

/// Solves with the root system extracted from `b`.
pub fn solve_cauchy(b: &DenseOperator, phi: &LaurentFunction, h: &CVector, spec: &ContourSpec) -> Result<EvolutionSolution> {
    let sys = extract_root_system(b, DEFAULT_EXTRACT_TOL)?;
    solve_cauchy_with(b, &sys, phi, h, spec, &SolveOptions::default())
}

pub fn solve_cauchy_with(
    b: &DenseOperator,
    sys: &JordanSystem,
    phi: &LaurentFunction,
    h: &CVector,
    spec: &ContourSpec,
    opts: &SolveOptions,
) -> Result<EvolutionSolution> {
    if sys.dim() != b.dim() || h.len() != b.dim() {
        return Err(Error::InvalidInput("operator, system and h dimensions differ".into()));
    }
    let sector = sectorial_check(b, spec.theta, opts.sector_samples, opts.seed)?;
    if !sector.holds {
        return Err(Error::PreconditionFailed(format!(
            "numerical range leaves the sector: observed arg {} > theta {}",
            sector.max_observed_arg, spec.theta
        )));
    }
    let cond = validate_sector_condition(phi, spec.theta)?;
    if !cond.holds {
        return Err(Error::PreconditionFailed(format!(
            "sector condition fails for phi: max(|arg c_n| + n theta) = {} at n = {:?}",
            cond.max_value, cond.witness
        )));
    }
    let mut notices = Vec::new();
    match opts.declared_law {
        Some(rho) if (phi.degree() as f64) <= rho => {
            return Err(Error::PreconditionFailed(format!(
                "s = {} does not exceed the declared exponent {rho}",
                phi.degree()
            )));
        }
        Some(_) => {}
        None => notices.push("s > rho waived: no declared singular-value law".to_string()),
    }
    let ends = grouping(spec, sys);
    if ends.last() != Some(&sys.dim()) {
        return Err(Error::PreconditionFailed(
            "contour annuli do not enclose every characteristic number".into(),
        ));
    }
    Ok(EvolutionSolution {
        b: b.clone(),
        sys: sys.clone(),
        phi: phi.clone(),
        spec: spec.clone(),
        grouping: ends,
        h: h.clone(),
        base: expand_coefficients(h, sys)?,
        evaluator: AbelEvaluator::new(sys, phi, AbelKernel::Resolvent)?,
        notices,
    })
}

/// `M = Σ c_n (B^{-1})^n` formed densely from an explicit inverse.
pub fn phi_matrix(phi: &LaurentFunction, b: &DenseOperator) -> Result<CMatrix> {
    let d = b.dim();
    let w = b.matrix().clone().try_inverse().ok_or(Error::SingularOperator { sigma_min: 0.0 })?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularOperator { sigma_min: 0.0 });
    }
    let mut m = CMatrix::zeros(d, d);
    for (n, c) in phi.terms() {
        let base = if n >= 0 { &w } else { b.matrix() };
        let mut p = CMatrix::identity(d, d);
        for _ in 0..n.unsigned_abs() {
            p = base * p;
        }
        m += p * c;
    }
    Ok(m)
}

/// `exp(-tM)h`, independent of the series and contour paths.
#[derive(Debug, Clone)]
pub struct Oracle {
    m: CMatrix,
}

impl Oracle {
    pub fn new(b: &DenseOperator, phi: &LaurentFunction) -> Result<Self> {
        Ok(Self { m: phi_matrix(phi, b)? })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn propagator(&self, t: f64) -> CMatrix {
        expm(&(&self.m * Complex64::new(-t, 0.0)))
    }

    pub fn evaluate(&self, h: &CVector, t: f64) -> CVector {
        if t == 0.0 {
            return h.clone();
        }
        self.propagator(t) * h
    }
}

pub fn oracle_solution(b: &DenseOperator, phi: &LaurentFunction, h: &CVector, t: f64) -> Result<CVector> {
    Ok(Oracle::new(b, phi)?.evaluate(h, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccretivityReport {
    pub sample_count: usize,
    /// `min Re(φ(W)f, f)` over sampled unit vectors.
    pub sampled_min: f64,
    /// Smallest eigenvalue of `(M + M*)/2`.
    pub exact_min: f64,
    pub accretive: bool,
    pub exact_accretive: bool,
}

pub fn accretivity_check(b: &DenseOperator, phi: &LaurentFunction, count: usize, seed: u64) -> Result<AccretivityReport> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be positive".into()));
    }
    let m = phi_matrix(phi, b)?;
    let mut rng = seeded_rng(seed);
    let mut sampled_min = f64::INFINITY;
    for _ in 0..count {
        let f = unit_vector(&mut rng, b.dim());
        sampled_min = sampled_min.min(inner(&(&m * &f), &f).re);
    }
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let exact_min = herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AccretivityReport {
        sample_count: count,
        sampled_min,
        exact_min,
        accretive: sampled_min >= -ACCRETIVE_TOL,
        exact_accretive: exact_min >= -ACCRETIVE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub h_count: usize,
    pub t_count: usize,
    /// Largest `‖u(t)‖/‖h‖`.
    pub max_growth: f64,
    /// Largest `‖u(t₂)‖/‖u(t₁)‖` over consecutive grid points.
    pub max_step_ratio: f64,
}

/// `‖u(t)‖ ≤ ‖h‖(1 + 1e-8)` and `‖u(t₂)‖ ≤ ‖u(t₁)‖(1 + 1e-8)` for `t₁ < t₂`.
/// Requires the exact accretivity verdict.
pub fn contraction_check(
    solution: &EvolutionSolution,
    accretivity: &AccretivityReport,
    h_set: &[CVector],
    t_grid: &[f64],
) -> Result<ContractionReport> {
    if !accretivity.exact_accretive {
        return Err(Error::PreconditionFailed(format!(
            "phi(W) is not accretive (min Hermitian-part eigenvalue {:e})",
            accretivity.exact_min
        )));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("t grid must be nonempty, nonnegative and increasing".into()));
    }
    let mut max_growth: f64 = 0.0;
    let mut max_step_ratio: f64 = 0.0;
    for (k, h) in h_set.iter().enumerate() {
        let sol = solution.with_initial(h)?;
        let h_norm = h.norm();
        let mut prev = h_norm;
        for &t in t_grid {
            let n = sol.evaluate(t)?.norm();
            if h_norm > 0.0 {
                max_growth = max_growth.max(n / h_norm);
            }
            if prev > 0.0 {
                max_step_ratio = max_step_ratio.max(n / prev);
            }
            if n > h_norm * (1.0 + CONTRACTION_SLACK) || n > prev * (1.0 + CONTRACTION_SLACK) {
                return Err(Error::ContractionViolation {
                    h_index: k,
                    t,
                    detail: format!("|u(t)| = {n:e}, |h| = {h_norm:e}, previous {prev:e}"),
                });
            }
            prev = n;
        }
    }
    Ok(ContractionReport {
        h_count: h_set.len(),
        t_count: t_grid.len(),
        max_growth,
        max_step_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionReport {
    pub trace: Vec<(f64, f64)>,
    pub monotone: bool,
    pub final_error: f64,
    pub threshold: f64,
}

impl InitialConditionReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.final_error <= self.threshold
    }

    pub fn to_csv(&self) -> String {
        csv::table(
            &["t", "error"],
            self.trace.iter().map(|(t, e)| vec![csv::num(*t), csv::num(*e)]),
        )
    }
}

/// `‖u(t) - h‖` along a decreasing sequence, against `1e-6·max(1, ‖h‖)`.
pub fn initial_condition_trace(solution: &EvolutionSolution, t_sequence: &[f64]) -> Result<InitialConditionReport> {
    if t_sequence.is_empty() || t_sequence.iter().any(|t| !(*t > 0.0)) || t_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("t sequence must be positive and strictly decreasing".into()));
    }
    let h = solution.initial();
    let trace = t_sequence
        .iter()
        .map(|&t| Ok((t, (solution.evaluate(t)? - h).norm())))
        .collect::<Result<Vec<_>>>()?;
    Ok(InitialConditionReport {
        monotone: trace.windows(2).all(|w| w[1].1 <= w[0].1),
        final_error: trace.last().unwrap().1,
        threshold: INITIAL_EPS * h.norm().max(1.0),
        trace,
    })
}

/// [`initial_condition_trace`], failing with `NoConvergence`.
pub fn initial_condition_check(solution: &EvolutionSolution, t_sequence: &[f64]) -> Result<InitialConditionReport> {
    let r = initial_condition_trace(solution, t_sequence)?;
    if !r.passed() {
        return Err(Error::NoConvergence(format!(
            "initial condition: monotone = {}, final error {:e} vs {:e}",
            r.monotone, r.final_error, r.threshold
        )));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRow {
    pub t: f64,
    pub norm_u: f64,
    pub oracle_diff: f64,
    pub ode_residual: f64,
    pub tail_bound: f64,
}

/// Per-`t` table: `‖u(t)‖`, `‖u - oracle‖`, ODE residual, tail bound.
pub fn evolution_table(solution: &EvolutionSolution, oracle: &Oracle, t_grid: &[f64]) -> Result<Vec<EvolutionRow>> {
    t_grid
        .iter()
        .map(|&t| {
            let u = solution.evaluate(t)?;
            Ok(EvolutionRow {
                t,
                norm_u: u.norm(),
                oracle_diff: (&u - oracle.evaluate(solution.initial(), t)).norm(),
                ode_residual: solution.ode_residual(t)?,
                tail_bound: solution.tail_bound(t),
            })
        })
        .collect()
}

pub fn evolution_csv(rows: &[EvolutionRow]) -> String {
    csv::table(
        &["t", "norm_u", "oracle_diff", "ode_residual", "tail_bound"],
        rows.iter().map(|r| {
            vec![
                csv::num(r.t),
                csv::num(r.norm_u),
                csv::num(r.oracle_diff),
                csv::num(r.ode_residual),
                csv::num(r.tail_bound),
            ]
        }),
    )
}
