//! Seeded operator fixtures with prescribed Jordan structure and numerical
//! range inside a sector.
//!
//! Recipe: characteristic numbers `λ_q` with log-stratified moduli in
//! `[1, R]` and arguments within `0.7θ`; basis `S = U (I + spread·G/√d) D`
//! where `U` is a random unitary, `G` Gaussian and `D` scales chain vectors
//! by `(δ|μ_q|)^{-i}`, so that in the orthonormal frame the chain
//! superdiagonal is `δ|μ_q|`. `spread` and `δ` are halved until the exact
//! Hermitian-part sector test passes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{build_contour, default_varsigma, ContourSpec};
use crate::error::{Error, Result};
use crate::jordan::{canonical_order, synthesize_operator, ChainSpec, JordanSystem};
use crate::matrixcore::{gaussian_vector, seeded_rng, unit_vector, CMatrix, CVector, DenseOperator};
use crate::opfunc::{principal_sector_condition, validate_sector_condition, LaurentFunction};

pub const MAX_FIXTURE_DIM: usize = 64;
const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    /// Diagonal `B`, identity basis.
    Diagonal,
    /// Chains of length 1–3 in the sector `π/5`.
    JordanMixed,
    /// Simple eigenvalues, non-normal basis, sector `π/4`.
    SectorialRandom,
}

impl FixtureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FixtureKind::Diagonal => "diagonal",
            FixtureKind::JordanMixed => "jordan-mixed",
            FixtureKind::SectorialRandom => "sectorial-random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(FixtureKind::Diagonal),
            "jordan-mixed" => Ok(FixtureKind::JordanMixed),
            "sectorial-random" => Ok(FixtureKind::SectorialRandom),
            _ => Err(Error::InvalidInput(format!(
                "unknown fixture kind '{s}' (expected diagonal, jordan-mixed or sectorial-random)"
            ))),
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            FixtureKind::Diagonal => PI / 6.0,
            FixtureKind::JordanMixed => PI / 5.0,
            FixtureKind::SectorialRandom => PI / 4.0,
        }
    }

    pub fn max_chain(&self) -> usize {
        match self {
            FixtureKind::JordanMixed => 3,
            _ => 1,
        }
    }
}

/// What is needed to rebuild a fixture bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecipe {
    pub specs: Vec<ChainSpec>,
    pub basis_seed: u64,
    /// Non-normal perturbation size; `None` means the identity basis.
    pub spread: Option<f64>,
    pub chain_scale: f64,
}

impl FixtureRecipe {
    pub fn dim(&self) -> usize {
        self.specs.iter().map(|s| s.algebraic_multiplicity()).sum()
    }

    pub fn basis(&self) -> Result<DenseOperator> {
        let mut specs = self.specs.clone();
        canonical_order(&mut specs);
        let d = self.dim();
        let mut scale = Vec::with_capacity(d);
        for s in &specs {
            let sub = self.chain_scale * s.mu.norm();
            for &len in &s.chains {
                scale.extend((0..len).map(|i| Complex64::new(sub.powi(-(i as i32)), 0.0)));
            }
        }
        let dmat = CMatrix::from_diagonal(&CVector::from_vec(scale));
        let s = match self.spread {
            None => dmat,
            Some(spread) => {
                let mut rng = seeded_rng(self.basis_seed);
                let g: Vec<CVector> = (0..d).map(|_| gaussian_vector(&mut rng, d)).collect();
                let u = CMatrix::from_columns(&g).qr().q();
                let e: Vec<CVector> = (0..d).map(|_| gaussian_vector(&mut rng, d)).collect();
                let pert = CMatrix::identity(d, d) + CMatrix::from_columns(&e) * Complex64::new(spread / (d as f64).sqrt(), 0.0);
                u * pert * dmat
            }
        };
        DenseOperator::new(s)
    }

    pub fn build(&self) -> Result<(DenseOperator, JordanSystem)> {
        synthesize_operator(&self.specs, &self.basis()?)
    }
}

/// `max(λ_max(K₁), -λ_min(K₂))` with `K₁ = (e^{-iθ}B - e^{iθ}B*)/2i` and
/// `K₂ = (e^{iθ}B - e^{-iθ}B*)/2i`; the numerical range lies in the closed
/// sector `|arg z| ≤ θ` iff this is `≤ 0`.
pub fn sector_excess(b: &DenseOperator, theta: f64) -> f64 {
    let m = b.matrix();
    let two_i = Complex64::new(0.0, 2.0);
    let rot = Complex64::from_polar(1.0, theta);
    let k1 = (m * rot.conj() - m.adjoint() * rot) / two_i;
    let k2 = (m * rot - m.adjoint() * rot.conj()) / two_i;
    let max1 = k1.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min2 = k2.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    max1.max(-min2)
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub kind: Option<FixtureKind>,
    pub seed: u64,
    pub theta: f64,
    pub recipe: FixtureRecipe,
    pub b: DenseOperator,
    pub sys: JordanSystem,
}

impl Fixture {
    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    /// Seeded unit vector.
    pub fn unit_h(&self, seed: u64) -> CVector {
        unit_vector(&mut seeded_rng(seed), self.dim())
    }

    pub fn contour(&self, phi: &LaurentFunction, t_min: f64, target_tail: f64) -> Result<ContourSpec> {
        build_contour(&self.b, phi, self.theta, default_varsigma(self.theta, phi), t_min, target_tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    pub dim: usize,
    pub max_chain: usize,
    pub theta: f64,
    /// `false` keeps the identity basis.
    pub non_normal: bool,
}

fn draw_specs<R: Rng>(rng: &mut R, p: &FixtureParams) -> Vec<ChainSpec> {
    // chain lengths grouped into clusters; with chains longer than 1 allowed,
    // some clusters get two chains
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut left = p.dim;
    while left > 0 {
        let len = rng.random_range(1..=p.max_chain.min(left));
        left -= len;
        match clusters.last_mut() {
            Some(last) if p.max_chain > 1 && last.len() < 2 && rng.random_bool(0.2) => last.push(len),
            _ => clusters.push(vec![len]),
        }
    }
    for c in &mut clusters {
        c.sort_unstable_by(|a, b| b.cmp(a));
    }
    // longest chains go to the innermost characteristic numbers
    clusters.sort_by(|a, b| b[0].cmp(&a[0]).then(b.len().cmp(&a.len())));
    let n = clusters.len();
    let octaves = 3.0f64.max(n as f64 / 4.0);
    clusters
        .into_iter()
        .enumerate()
        .map(|(i, chains)| {
            let frac = (i as f64 + 0.2 + 0.6 * rng.random::<f64>()) / n as f64;
            let modulus = 2f64.powf(octaves * frac);
            let arg = 0.7 * p.theta * (2.0 * rng.random::<f64>() - 1.0);
            ChainSpec::new(Complex64::from_polar(modulus, arg).inv(), chains)
        })
        .collect()
}

/// Draws a fixture, retrying with derived seeds until the sector test and
/// the contour geometry both succeed.
pub fn generate(params: &FixtureParams, seed: u64) -> Result<Fixture> {
    if params.dim == 0 || params.dim > MAX_FIXTURE_DIM {
        return Err(Error::InvalidInput(format!(
            "fixture dim must lie in 1..={MAX_FIXTURE_DIM}, got {}",
            params.dim
        )));
    }
    if !(params.theta > 0.0 && params.theta < PI / 2.0) || params.max_chain == 0 {
        return Err(Error::InvalidInput("theta must lie in (0, pi/2) and max_chain be positive".into()));
    }
    let mut rng = seeded_rng(seed);
    let z = LaurentFunction::monomial(1, Complex64::new(1.0, 0.0));
    for attempt in 0..MAX_ATTEMPTS {
        let specs = draw_specs(&mut rng, params);
        let basis_seed = seed.wrapping_mul(1_000_003).wrapping_add(attempt);
        let mut recipe = FixtureRecipe {
            specs,
            basis_seed,
            spread: params.non_normal.then_some(0.3),
            chain_scale: 0.5 * (0.3 * params.theta).sin(),
        };
        let mut built = None;
        for _ in 0..24 {
            let (b, sys) = recipe.build()?;
            if sector_excess(&b, params.theta) <= 0.0 {
                built = Some((b, sys));
                break;
            }
            match recipe.spread {
                Some(s) if s > 1e-3 => recipe.spread = Some(0.5 * s),
                _ => recipe.chain_scale *= 0.5,
            }
        }
        let Some((b, sys)) = built else { continue };
        match build_contour(&b, &z, params.theta, default_varsigma(params.theta, &z), 0.01, 1e-12) {
            Ok(_) => {
                return Ok(Fixture {
                    kind: None,
                    seed,
                    theta: params.theta,
                    recipe,
                    b,
                    sys,
                })
            }
            Err(Error::GapFailure { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoConvergence(format!("no admissible fixture after {MAX_ATTEMPTS} attempts")))
}

pub fn generate_kind(kind: FixtureKind, dim: usize, seed: u64) -> Result<Fixture> {
    let params = FixtureParams {
        dim,
        max_chain: kind.max_chain(),
        theta: kind.theta(),
        non_normal: kind != FixtureKind::Diagonal,
    };
    let mut f = generate(&params, seed)?;
    f.kind = Some(kind);
    Ok(f)
}

/// The operator-function corpus `{z, z²+1, z+1/z, 2+z+3/z²}`.
pub fn phi_corpus() -> Vec<(&'static str, LaurentFunction)> {
    let one = Complex64::new(1.0, 0.0);
    vec![
        ("z", LaurentFunction::monomial(1, one)),
        ("z^2+1", LaurentFunction::from_terms(&[(2, one), (0, one)])),
        ("z+1/z", LaurentFunction::from_terms(&[(1, one), (-1, one)])),
        (
            "2+z+3/z^2",
            LaurentFunction::from_terms(&[(0, Complex64::new(2.0, 0.0)), (1, one), (-2, Complex64::new(3.0, 0.0))]),
        ),
    ]
}

/// First corpus entry, starting at `preferred`, that satisfies the sector
/// condition at `θ` and `θ + ς` and keeps the principal part stable on the
/// inner arc.
pub fn admissible_phi(theta: f64, preferred: usize) -> Option<(&'static str, LaurentFunction)> {
    let corpus = phi_corpus();
    let n = corpus.len();
    (0..n).map(|k| corpus[(preferred + k) % n].clone()).find(|(_, phi)| {
        let alpha = theta + default_varsigma(theta, phi);
        validate_sector_condition(phi, theta).is_ok_and(|c| c.holds)
            && validate_sector_condition(phi, alpha).is_ok_and(|c| c.holds)
            && principal_sector_condition(phi, alpha)
    })
}

/// One entry of the acceptance corpus.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub index: usize,
    pub fixture: Fixture,
    pub phi_name: &'static str,
    pub phi: LaurentFunction,
}

/// `count` seeded fixtures with dims cycling through 1–12, chains up to 4
/// and `θ ∈ {π/8, π/6, π/4, π/3}`.
pub fn acceptance_corpus(count: usize) -> Result<Vec<CorpusEntry>> {
    let thetas = [PI / 8.0, PI / 6.0, PI / 4.0, PI / 3.0];
    (0..count)
        .map(|k| {
            let theta = thetas[(k / 3) % thetas.len()];
            let params = FixtureParams {
                dim: 1 + k % 12,
                max_chain: 4,
                theta,
                non_normal: true,
            };
            let fixture = generate(&params, 1000 + k as u64)?;
            let (phi_name, phi) = admissible_phi(theta, k % 4)
                .ok_or_else(|| Error::PreconditionFailed(format!("no admissible phi for theta {theta}")))?;
            Ok(CorpusEntry {
                index: k,
                fixture,
                phi_name,
                phi,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::sectorial_check;

    #[test]
    fn sector_excess_on_simple_cases() {
        let pd = DenseOperator::diagonal(&[Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)]).unwrap();
        assert!(sector_excess(&pd, 0.1) <= 0.0);
        let rot = DenseOperator::diagonal(&[Complex64::from_polar(1.0, PI / 3.0)]).unwrap();
        assert!(sector_excess(&rot, PI / 4.0) > 0.0);
        assert!(sector_excess(&rot, PI / 3.0 + 1e-9) <= 0.0);
    }

    #[test]
    fn kinds_are_deterministic_and_sectorial() {
        for kind in [FixtureKind::Diagonal, FixtureKind::JordanMixed, FixtureKind::SectorialRandom] {
            let a = generate_kind(kind, 8, 7).unwrap();
            let b = generate_kind(kind, 8, 7).unwrap();
            assert_eq!(a.b, b.b);
            assert_eq!(a.recipe, b.recipe);
            assert!(sectorial_check(&a.b, kind.theta(), 2000, 1).unwrap().holds);
            assert!(a.sys.specs().iter().flat_map(|s| s.chains.iter()).all(|&l| l <= kind.max_chain()));
            assert!((a.sys.gram() - CMatrix::identity(8, 8)).norm() < 1e-8);
        }
        for seed in 0..20 {
            let f = generate_kind(FixtureKind::SectorialRandom, 9, seed).unwrap();
            assert_eq!(f.sys.cluster_count(), 9);
        }
        let d = generate_kind(FixtureKind::Diagonal, 4, 7).unwrap();
        assert_eq!(d.recipe.spread, None);
        let off: f64 = (0..4).flat_map(|i| (0..4).filter(move |j| *j != i).map(move |j| (i, j))).map(|ij| d.b.matrix()[ij].norm()).sum();
        assert_eq!(off, 0.0);
    }

    #[test]
    fn recipe_rebuilds_fixture() {
        let f = generate_kind(FixtureKind::JordanMixed, 10, 3).unwrap();
        let (b, sys) = f.recipe.build().unwrap();
        assert_eq!(b, f.b);
        assert_eq!(sys.basis(), f.sys.basis());
        let text = serde_json::to_string(&f.recipe).unwrap();
        let back: FixtureRecipe = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f.recipe);
    }

    #[test]
    fn dims_are_guarded() {
        assert!(generate_kind(FixtureKind::Diagonal, 0, 1).is_err());
        assert!(generate_kind(FixtureKind::Diagonal, 65, 1).is_err());
        assert!(generate_kind(FixtureKind::Diagonal, 64, 1).is_ok());
        assert!(FixtureKind::parse("banded").is_err());
        assert_eq!(FixtureKind::parse("jordan-mixed").unwrap(), FixtureKind::JordanMixed);
    }

    #[test]
    fn corpus_properties() {
        let corpus = acceptance_corpus(50).unwrap();
        assert_eq!(corpus.len(), 50);
        let mut longest = 0;
        for e in &corpus {
            let f = &e.fixture;
            assert!(f.dim() >= 1 && f.dim() <= 12);
            assert!(f.theta <= PI / 3.0 + 1e-15);
            assert!(sector_excess(&f.b, f.theta) <= 0.0);
            longest = longest.max(f.sys.max_chain_len());
            assert!(validate_sector_condition(&e.phi, f.theta).unwrap().holds);
            assert!(f.sys.chain_residual(&f.b) <= 1e-10 * f.b.norm());
        }
        assert_eq!(longest, 4);
        let names: std::collections::BTreeSet<_> = corpus.iter().map(|e| e.phi_name).collect();
        assert_eq!(names.len(), 4);
    }
}
