//! Regularizing functions `H_m(φ, z, t)`, the time-dependent chain
//! coefficients `c_n(t)`, grouped partial sums and the `t → +0` probe.
//!
//! `H_m(φ, z, t) = e^{φ(z)t}/m! · d^m/dz^m e^{-φ(z)t}` is evaluated from the
//! exact recurrence `G_0 = 1`, `G_{m+1} = G_m' - t φ' G_m`, `H_m = G_m/m!`,
//! with `G_m` kept as a polynomial in `t` whose coefficients are Laurent
//! functions of `z`.
//!
//! For a chain at `μ_q` the residue of `e^{-φ(λ)t} B(I - λB)^{-1} f` at
//! `λ_q = 1/μ_q` expands the exponential in `ζ = 1/λ` around `μ_q`, so the
//! coefficients use `H_m(ψ, μ_q, t)` with `ψ(ζ) = φ(1/ζ)` ([`AbelKernel::Resolvent`]).
//! [`AbelKernel::Literal`] differentiates in `λ` at `λ_q` instead; the two agree
//! for simple eigenvalues and differ on longer chains.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csv;
use crate::error::{Error, Result};
use crate::jordan::JordanSystem;
use crate::matrixcore::CVector;
use crate::opfunc::LaurentFunction;

/// Largest supported derivative order.
pub const M_MAX: usize = 32;

/// Default final-error threshold of [`abel_limit_probe`].
pub const DEFAULT_LIMIT_EPS: f64 = 1e-6;

/// Decade grid `1e-1, …, 1e-6`.
pub fn default_t_sequence() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

/// Symbolic table of `G_m(z, t)` for `m ≤ order`.
#[derive(Debug, Clone)]
pub struct HFamily {
    phi: LaurentFunction,
    /// `g[m][p]` is the coefficient of `t^p` in `G_m`.
    g: Vec<Vec<LaurentFunction>>,
}

impl HFamily {
    pub fn new(phi: &LaurentFunction, order: usize) -> Result<Self> {
        if order > M_MAX {
            return Err(Error::InvalidInput(format!("derivative order {order} exceeds {M_MAX}")));
        }
        let dphi = phi.derivative();
        let mut g = vec![vec![LaurentFunction::constant(Complex64::new(1.0, 0.0))]];
        for m in 0..order {
            let prev = &g[m];
            let mut next = Vec::with_capacity(prev.len() + 1);
            for p in 0..=prev.len() {
                let mut term = if p < prev.len() {
                    prev[p].derivative()
                } else {
                    LaurentFunction::zero()
                };
                if p > 0 {
                    term = &term + &(&dphi * &prev[p - 1]).scale(Complex64::new(-1.0, 0.0));
                }
                next.push(term);
            }
            g.push(next);
        }
        Ok(Self { phi: phi.clone(), g })
    }

    pub fn order(&self) -> usize {
        self.g.len() - 1
    }

    pub fn phi(&self) -> &LaurentFunction {
        &self.phi
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if z == Complex64::new(0.0, 0.0) && self.phi.principal_depth() > 0 {
            return Err(Error::DomainError("H_m evaluated at z = 0 with a principal part".into()));
        }
        Ok(())
    }

    /// `H_m(φ, z, t)`.
    pub fn eval(&self, m: usize, z: Complex64, t: f64) -> Result<Complex64> {
        if m > self.order() {
            return Err(Error::InvalidInput(format!("order {m} beyond table order {}", self.order())));
        }
        self.check_domain(z)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in (0..self.g[m].len()).rev() {
            acc = acc * t + self.g[m][p].evaluate(z)?;
        }
        Ok(acc / factorial(m))
    }

    /// `H_0, …, H_order` at one point.
    pub fn eval_all(&self, z: Complex64, t: f64) -> Result<Vec<Complex64>> {
        (0..=self.order()).map(|m| self.eval(m, z, t)).collect()
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// `H_m(φ, z, t) = (e^{φ(z)t}/m!) d^m/dz^m e^{-φ(z)t}`.
pub fn h_function(phi: &LaurentFunction, m: usize, z: Complex64, t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::InvalidInput("t must be nonnegative".into()));
    }
    HFamily::new(phi, m)?.eval(m, z, t)
}

/// Which derivative defines the chain coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AbelKernel {
    /// `H_m(φ(1/·), μ_q, t)`: matches the resolvent residues.
    #[default]
    Resolvent,
    /// `H_m(φ, λ_q, t)`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelCoefficients {
    pub base: Vec<Complex64>,
    pub t: f64,
    pub values: Vec<Complex64>,
    pub kernel: AbelKernel,
}

/// Reusable evaluator of `c_n(t)` for one system and one `φ`.
#[derive(Debug, Clone)]
pub struct AbelEvaluator {
    kernel: AbelKernel,
    phi: LaurentFunction,
    family: HFamily,
    /// Expansion point per cluster (`μ_q` or `λ_q`).
    points: Vec<Complex64>,
    /// `φ(λ_q)` per cluster.
    phi_at_poles: Vec<Complex64>,
    chains: Vec<(usize, usize, usize)>,
    dim: usize,
}

impl AbelEvaluator {
    pub fn new(sys: &JordanSystem, phi: &LaurentFunction, kernel: AbelKernel) -> Result<Self> {
        let order = sys.max_chain_len() - 1;
        let family = match kernel {
            AbelKernel::Resolvent => HFamily::new(&phi.reflect(), order)?,
            AbelKernel::Literal => HFamily::new(phi, order)?,
        };
        let points = sys
            .specs()
            .iter()
            .map(|s| match kernel {
                AbelKernel::Resolvent => s.mu,
                AbelKernel::Literal => s.lambda(),
            })
            .collect();
        let phi_at_poles = sys
            .specs()
            .iter()
            .map(|s| phi.evaluate(s.lambda()))
            .collect::<Result<Vec<_>>>()?;
        let chains = sys.chains().iter().map(|c| (c.cluster, c.start, c.len)).collect();
        Ok(Self {
            kernel,
            phi: phi.clone(),
            family,
            points,
            phi_at_poles,
            chains,
            dim: sys.dim(),
        })
    }

    pub fn kernel(&self) -> AbelKernel {
        self.kernel
    }

    pub fn phi(&self) -> &LaurentFunction {
        &self.phi
    }

    /// `c_{q_ξ+i}(t) = e^{-φ(λ_q)t} Σ_{m=0}^{k-i} H_m c_{q_ξ+i+m}`.
    pub fn coefficients(&self, base: &[Complex64], t: f64) -> Result<AbelCoefficients> {
        if base.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "expected {} base coefficients, got {}",
                self.dim,
                base.len()
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidInput("t must be nonnegative".into()));
        }
        Ok(AbelCoefficients {
            base: base.to_vec(),
            t,
            values: self.values_at(base, t)?,
            kernel: self.kernel,
        })
    }

    /// Chain coefficients at any real `t`; the formula is entire in `t`, which the
    /// time-derivative stencil relies on near `t = 0`.
    pub(crate) fn values_at(&self, base: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let hs: Vec<Vec<Complex64>> = self
            .points
            .iter()
            .map(|z| self.family.eval_all(*z, t))
            .collect::<Result<_>>()?;
        let mut values = vec![Complex64::new(0.0, 0.0); self.dim];
        for &(q, start, len) in &self.chains {
            let damp = (-self.phi_at_poles[q] * t).exp();
            for i in 0..len {
                let s: Complex64 = (0..len - i).map(|m| hs[q][m] * base[start + i + m]).sum();
                values[start + i] = damp * s;
            }
        }
        Ok(values)
    }
}

pub fn abel_coefficients(
    base: &[Complex64],
    sys: &JordanSystem,
    phi: &LaurentFunction,
    t: f64,
) -> Result<AbelCoefficients> {
    abel_coefficients_with(AbelKernel::Resolvent, base, sys, phi, t)
}

pub fn abel_coefficients_with(
    kernel: AbelKernel,
    base: &[Complex64],
    sys: &JordanSystem,
    phi: &LaurentFunction,
    t: f64,
) -> Result<AbelCoefficients> {
    AbelEvaluator::new(sys, phi, kernel)?.coefficients(base, t)
}

/// The `t → +0` limit `Σ_{m} c_{q_ξ+j+m} H_m(φ, λ_q, 0)` of each coefficient.
pub fn abel_limit_values(base: &[Complex64], sys: &JordanSystem, phi: &LaurentFunction) -> Result<Vec<Complex64>> {
    let family = HFamily::new(phi, sys.max_chain_len() - 1)?;
    let mut out = vec![Complex64::new(0.0, 0.0); sys.dim()];
    for ch in sys.chains() {
        let h = family.eval_all(ch.mu.inv(), 0.0)?;
        for j in 0..ch.len {
            out[ch.start + j] = (0..ch.len - j).map(|m| base[ch.start + j + m] * h[m]).sum();
        }
    }
    Ok(out)
}

/// `Σ_{n < N_j} c_n(t) e_n`.
pub fn grouped_partial_sum(
    sys: &JordanSystem,
    coeffs: &AbelCoefficients,
    grouping: &[usize],
    j: usize,
) -> Result<CVector> {
    if grouping.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::IndexError("grouping must be strictly increasing".into()));
    }
    if grouping.last().is_some_and(|&n| n > sys.dim()) {
        return Err(Error::IndexError("grouping exceeds the system dimension".into()));
    }
    if j >= grouping.len() {
        return Err(Error::IndexError(format!("group {j} out of range ({} groups)", grouping.len())));
    }
    if coeffs.values.len() != sys.dim() {
        return Err(Error::InvalidInput("coefficient length does not match system".into()));
    }
    let mut acc = CVector::zeros(sys.dim());
    for n in 0..grouping[j] {
        acc += sys.e(n) * coeffs.values[n];
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProbe {
    /// `(t, ‖Σ c_n(t) e_n - f‖)` in the order probed.
    pub trace: Vec<(f64, f64)>,
    pub final_error: f64,
    pub monotone: bool,
    pub eps: f64,
}

impl LimitProbe {
    pub fn converged(&self) -> bool {
        self.monotone && self.final_error <= self.eps
    }

    pub fn to_csv(&self) -> String {
        csv::table(
            &["t", "error"],
            self.trace.iter().map(|(t, e)| vec![csv::num(*t), csv::num(*e)]),
        )
    }
}

/// Error trace of the regularized series along a decreasing `t` sequence.
pub fn abel_limit_trace(
    sys: &JordanSystem,
    base: &[Complex64],
    phi: &LaurentFunction,
    f: &CVector,
    t_sequence: &[f64],
    eps: f64,
) -> Result<LimitProbe> {
    if t_sequence.is_empty() || t_sequence.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("t sequence must be nonempty and positive".into()));
    }
    if t_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("t sequence must be strictly decreasing".into()));
    }
    let eval = AbelEvaluator::new(sys, phi, AbelKernel::Resolvent)?;
    let mut trace = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let c = eval.coefficients(base, t)?;
        let u = sys.basis() * CVector::from_column_slice(&c.values);
        trace.push((t, (u - f).norm()));
    }
    let monotone = trace.windows(2).all(|w| w[1].1 <= w[0].1);
    let final_error = trace.last().unwrap().1;
    Ok(LimitProbe {
        trace,
        final_error,
        monotone,
        eps,
    })
}

/// As [`abel_limit_trace`], failing with `NoConvergence` unless the error
/// decreases monotonically and ends at or below `eps`.
pub fn abel_limit_probe(
    sys: &JordanSystem,
    base: &[Complex64],
    phi: &LaurentFunction,
    f: &CVector,
    t_sequence: &[f64],
    eps: f64,
) -> Result<LimitProbe> {
    let probe = abel_limit_trace(sys, base, phi, f, t_sequence, eps)?;
    if !probe.converged() {
        return Err(Error::NoConvergence(format!(
            "monotone = {}, final error {:e} vs eps {:e}",
            probe.monotone, probe.final_error, eps
        )));
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::{expand_coefficients, synthesize_operator, ChainSpec};
    use crate::matrixcore::{gaussian_vector, seeded_rng, CMatrix, DenseOperator};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z() -> LaurentFunction {
        LaurentFunction::monomial(1, c(1.0, 0.0))
    }

    fn corpus() -> Vec<LaurentFunction> {
        let one = c(1.0, 0.0);
        vec![
            z(),
            LaurentFunction::from_terms(&[(2, one), (0, one)]),
            LaurentFunction::from_terms(&[(1, one), (-1, one)]),
            LaurentFunction::from_terms(&[(0, c(2.0, 0.0)), (1, one), (-2, c(3.0, 0.0))]),
            LaurentFunction::from_terms(&[(2, one), (-1, one)]),
        ]
    }

    /// `d^m/dz^m exp(-φ t)` from the Cauchy integral on a small circle
    /// (trapezoid rule).
    fn cauchy_derivative(phi: &LaurentFunction, m: usize, z0: Complex64, t: f64) -> Complex64 {
        let rho = 0.25 * z0.norm();
        let n = 512;
        let mut acc = c(0.0, 0.0);
        for k in 0..n {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let zk = z0 + w * rho;
            acc += (-phi.evaluate(zk).unwrap() * t).exp() / w.powi(m as i32);
        }
        acc / (n as f64) / rho.powi(m as i32) * factorial(m)
    }

    #[test]
    fn h0_is_one() {
        for phi in corpus() {
            assert_eq!(h_function(&phi, 0, c(0.7, 0.2), 0.4).unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn identity_function_gives_polynomials() {
        for m in 0..8 {
            for t in [0.0, 0.3, 1.7] {
                let h = h_function(&z(), m, c(0.4, -1.1), t).unwrap();
                let expect = (-t).powi(m as i32) / factorial(m);
                assert!((h - c(expect, 0.0)).norm() <= 1e-15 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn recurrence_matches_cauchy_oracle() {
        let mut rng = seeded_rng(31);
        for phi in corpus() {
            for _ in 0..3 {
                let v = gaussian_vector(&mut rng, 2);
                let z0 = c(1.0, 0.0) + v[0] * 0.4;
                let t = 0.2 + v[1].norm();
                let e0 = (-phi.evaluate(z0).unwrap() * t).exp();
                for m in 0..=6 {
                    let h = h_function(&phi, m, z0, t).unwrap();
                    let oracle = cauchy_derivative(&phi, m, z0, t) / e0 / factorial(m);
                    assert!((h - oracle).norm() <= 1e-10 * oracle.norm().max(1.0), "m={m}: {h} vs {oracle}");
                }
            }
        }
    }

    #[test]
    fn domain_and_order_errors() {
        let phi = LaurentFunction::from_terms(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]);
        assert_eq!(h_function(&phi, 1, c(0.0, 0.0), 1.0).unwrap_err().kind(), "DomainError");
        assert!(h_function(&z(), M_MAX + 1, c(1.0, 0.0), 1.0).is_err());
        assert!(h_function(&z(), 1, c(1.0, 0.0), -1.0).is_err());
    }

    fn basis(seed: u64, d: usize) -> DenseOperator {
        let mut rng = seeded_rng(seed);
        let cols: Vec<CVector> = (0..d).map(|_| gaussian_vector(&mut rng, d)).collect();
        DenseOperator::new(CMatrix::identity(d, d) + CMatrix::from_columns(&cols) * c(0.1, 0.0)).unwrap()
    }

    #[test]
    fn simple_chain_decays_exponentially() {
        let mu = c(2.0, 0.5);
        let (_, sys) = synthesize_operator(&[ChainSpec::simple(mu)], &DenseOperator::identity(1)).unwrap();
        let phi = LaurentFunction::from_terms(&[(2, c(1.0, 0.0)), (-1, c(1.0, 0.0))]);
        let base = [c(0.3, -0.7)];
        let t = 0.8;
        let got = abel_coefficients(&base, &sys, &phi, t).unwrap();
        let expect = (-phi.evaluate(mu.inv()).unwrap() * t).exp() * base[0];
        assert!((got.values[0] - expect).norm() < 1e-15);
    }

    #[test]
    fn two_chain_with_identity_function_matches_closed_form() {
        // exp(-tW) on span{e0, e1} with W = J^{-1}:
        // c0(t) = e^{-λt}(c0 + t λ² c1), c1(t) = e^{-λt} c1
        let mu = c(1.5, 0.4);
        let lam = mu.inv();
        let (b, sys) = synthesize_operator(&[ChainSpec::new(mu, vec![2])], &basis(3, 2)).unwrap();
        let base = [c(0.4, 0.1), c(-1.2, 0.3)];
        let t = 0.37;
        let got = abel_coefficients(&base, &sys, &z(), t).unwrap();
        let damp = (-lam * t).exp();
        let c0 = damp * (base[0] + lam * lam * t * base[1]);
        let c1 = damp * base[1];
        assert!((got.values[0] - c0).norm() < 1e-14);
        assert!((got.values[1] - c1).norm() < 1e-14);

        // and against exp(-tW) formed from the eigen-structure-free inverse
        let w = b.matrix().clone().try_inverse().unwrap();
        let h = crate::jordan::reconstruct(&base, &sys);
        let mut term = h.clone();
        let mut u = h.clone();
        for k in 1..40 {
            term = &w * term * c(-t / k as f64, 0.0);
            u += &term;
        }
        let proj = expand_coefficients(&u, &sys).unwrap();
        assert!((proj[0] - c0).norm() < 1e-12);
        assert!((proj[1] - c1).norm() < 1e-12);
    }

    #[test]
    fn literal_kernel_differs_on_chains_but_not_on_simple_poles() {
        let phi = z();
        let (_, sys) = synthesize_operator(&[ChainSpec::new(c(1.5, 0.0), vec![2]), ChainSpec::simple(c(0.5, 0.0))], &basis(5, 3)).unwrap();
        let base = [c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        let a = abel_coefficients_with(AbelKernel::Resolvent, &base, &sys, &phi, 0.5).unwrap();
        let l = abel_coefficients_with(AbelKernel::Literal, &base, &sys, &phi, 0.5).unwrap();
        assert!((a.values[0] - l.values[0]).norm() > 1e-3);
        assert!((a.values[1] - l.values[1]).norm() < 1e-15);
        assert!((a.values[2] - l.values[2]).norm() < 1e-15);
    }

    #[test]
    fn zero_time_reproduces_limit_values() {
        let specs = vec![ChainSpec::new(c(2.0, 0.1), vec![3, 1]), ChainSpec::new(c(0.8, -0.2), vec![2])];
        let (_, sys) = synthesize_operator(&specs, &basis(7, 6)).unwrap();
        let base: Vec<Complex64> = gaussian_vector(&mut seeded_rng(8), 6).iter().copied().collect();
        for phi in corpus() {
            let at0 = abel_coefficients(&base, &sys, &phi, 0.0).unwrap();
            let lim = abel_limit_values(&base, &sys, &phi).unwrap();
            assert_eq!(at0.values, lim);
            assert_eq!(lim, base);
        }
    }

    #[test]
    fn coefficients_are_linear_in_base() {
        let specs = vec![ChainSpec::new(c(2.0, 0.1), vec![3]), ChainSpec::simple(c(0.8, -0.2))];
        let (_, sys) = synthesize_operator(&specs, &basis(9, 4)).unwrap();
        let mut rng = seeded_rng(10);
        let a: Vec<Complex64> = gaussian_vector(&mut rng, 4).iter().copied().collect();
        let b: Vec<Complex64> = gaussian_vector(&mut rng, 4).iter().copied().collect();
        let k = c(0.3, -2.0);
        let mix: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * k + y).collect();
        let phi = &corpus()[3];
        let (ca, cb, cm) = (
            abel_coefficients(&a, &sys, phi, 0.2).unwrap(),
            abel_coefficients(&b, &sys, phi, 0.2).unwrap(),
            abel_coefficients(&mix, &sys, phi, 0.2).unwrap(),
        );
        for n in 0..4 {
            let lin = ca.values[n] * k + cb.values[n];
            assert!((cm.values[n] - lin).norm() <= 1e-14 * lin.norm().max(1.0));
        }
    }

    #[test]
    fn grouped_sums() {
        let specs = vec![ChainSpec::new(c(2.0, 0.1), vec![2]), ChainSpec::simple(c(0.8, -0.2)), ChainSpec::simple(c(0.5, 0.0))];
        let (_, sys) = synthesize_operator(&specs, &basis(11, 4)).unwrap();
        let f = gaussian_vector(&mut seeded_rng(12), 4);
        let base = expand_coefficients(&f, &sys).unwrap();
        let coeffs = abel_coefficients(&base, &sys, &z(), 0.0).unwrap();
        let full = grouped_partial_sum(&sys, &coeffs, &[4], 0).unwrap();
        assert!((full - &f).norm() <= 1e-12 * f.norm());
        let coeffs = abel_coefficients(&base, &sys, &z(), 0.3).unwrap();
        let singles = grouped_partial_sum(&sys, &coeffs, &[1, 2, 3, 4], 3).unwrap();
        let block = grouped_partial_sum(&sys, &coeffs, &[4], 0).unwrap();
        assert!((singles - &block).norm() <= 1e-12 * block.norm());
        assert!(grouped_partial_sum(&sys, &coeffs, &[2, 2], 0).is_err());
        assert!(grouped_partial_sum(&sys, &coeffs, &[5], 0).is_err());
        assert!(grouped_partial_sum(&sys, &coeffs, &[4], 1).is_err());
    }

    #[test]
    fn limit_probe_on_eigenvector() {
        let mu = c(3.0, 0.5);
        let (_, sys) = synthesize_operator(&[ChainSpec::simple(mu), ChainSpec::simple(c(1.0, 0.0))], &basis(13, 2)).unwrap();
        let f = sys.e(0);
        let base = expand_coefficients(&f, &sys).unwrap();
        let probe = abel_limit_probe(&sys, &base, &z(), &f, &default_t_sequence(), 1e-6).unwrap();
        for (t, err) in &probe.trace {
            let expect = ((-mu.inv() * *t).exp() - 1.0).norm() * f.norm();
            assert!((err - expect).abs() <= 1e-12);
        }
        assert!(probe.to_csv().starts_with("t,error\n"));
    }

    #[test]
    fn limit_probe_on_diagonal_operator() {
        let mus = [c(4.0, 0.0), c(2.0, 1.0), c(5.0, -1.0)];
        let b = DenseOperator::diagonal(&mus).unwrap();
        let sys = crate::jordan::extract_root_system(&b, 1e-8).unwrap();
        let f = CVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.5), c(-0.2, 0.0)]);
        let base = expand_coefficients(&f, &sys).unwrap();
        let probe = abel_limit_trace(&sys, &base, &z(), &f, &default_t_sequence(), 1e-6).unwrap();
        for (t, err) in &probe.trace {
            // ‖Σ (e^{-λ_j t} - 1) f_j e_j‖ with orthonormal e_j
            let expect: f64 = mus
                .iter()
                .zip(f.iter())
                .map(|(m, fj)| (((-m.inv() * *t).exp() - 1.0) * fj).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!((err - expect).abs() <= 1e-13);
        }
        assert!(probe.converged());
    }

    #[test]
    fn limit_probe_on_jordan_fixture() {
        let specs = vec![
            ChainSpec::new(c(6.0, 0.5), vec![2, 1]),
            ChainSpec::new(c(4.0, -0.8), vec![3]),
            ChainSpec::new(c(8.0, 1.0), vec![2]),
        ];
        let (_, sys) = synthesize_operator(&specs, &basis(15, 8)).unwrap();
        let f = gaussian_vector(&mut seeded_rng(16), 8);
        let f = &f / c(f.norm(), 0.0);
        let base = expand_coefficients(&f, &sys).unwrap();
        let probe = abel_limit_probe(&sys, &base, &z(), &f, &default_t_sequence(), 1e-6).unwrap();
        assert!(probe.final_error <= 1e-6);
    }

    #[test]
    fn limit_probe_reports_failure() {
        let (_, sys) = synthesize_operator(&[ChainSpec::simple(c(0.01, 0.0))], &DenseOperator::identity(1)).unwrap();
        let f = sys.e(0);
        let base = expand_coefficients(&f, &sys).unwrap();
        // λ = 100: e^{-100 t} - 1 at t = 1e-3 is far from zero
        let err = abel_limit_probe(&sys, &base, &z(), &f, &[1e-2, 1e-3], 1e-6).unwrap_err();
        assert_eq!(err.kind(), "NoConvergence");
    }
}
