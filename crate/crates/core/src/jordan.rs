//! Jordan root-vector systems `{e_n}` of `B` and their biorthogonal duals
//! `{g_n}` (root vectors of `B*`).
//!
//! Chains follow `B e_0 = μ e_0`, `B e_i = μ e_i + e_{i-1}`: the eigenvector
//! comes first. Duals are indexed so that `(e_n, g_m) = δ_{nm}`, which makes
//! them satisfy `B* g_i = μ̄ g_i + g_{i+1}` with the eigenvector of `B*` at
//! the end of each chain.

use std::cmp::Ordering;

use nalgebra::SVD;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{inner, singular_values, CMatrix, CVector, DenseOperator};

/// Bases whose condition estimate exceeds this are rejected.
pub const MAX_BASIS_CONDITION: f64 = 1e8;

/// Default rank threshold for chain extraction, relative to `‖B‖`.
pub const DEFAULT_EXTRACT_TOL: f64 = 1e-8;

/// One eigenvalue `μ_q` with the lengths of its Jordan chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub mu: Complex64,
    pub chains: Vec<usize>,
}

impl ChainSpec {
    pub fn new(mu: Complex64, chains: Vec<usize>) -> Self {
        Self { mu, chains }
    }

    pub fn simple(mu: Complex64) -> Self {
        Self::new(mu, vec![1])
    }

    /// Characteristic number `λ_q = 1/μ_q`.
    pub fn lambda(&self) -> Complex64 {
        self.mu.inv()
    }

    pub fn algebraic_multiplicity(&self) -> usize {
        self.chains.iter().sum()
    }
}

/// Sorts by ascending `|1/μ|`; ties by argument of `1/μ`.
pub fn canonical_order(specs: &mut [ChainSpec]) {
    specs.sort_by(|a, b| {
        let (la, lb) = (a.lambda(), b.lambda());
        la.norm()
            .partial_cmp(&lb.norm())
            .unwrap_or(Ordering::Equal)
            .then(la.arg().partial_cmp(&lb.arg()).unwrap_or(Ordering::Equal))
    });
}

/// Position of a root vector inside the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootIndex {
    /// Eigenvalue cluster `q`.
    pub cluster: usize,
    /// Chain `ξ` within the cluster.
    pub chain: usize,
    /// Position `i` within the chain, 0 = eigenvector.
    pub position: usize,
    /// Chain length `k(q_ξ) + 1`.
    pub chain_len: usize,
}

/// Contiguous chain slice `start..start + len` of the flat index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRef {
    pub cluster: usize,
    pub mu: Complex64,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanSystem {
    specs: Vec<ChainSpec>,
    e: CMatrix,
    g: CMatrix,
    index: Vec<RootIndex>,
}

impl JordanSystem {
    /// Builds the system from specs (already in canonical order) and root
    /// vectors as columns of `basis`; duals are the columns of `basis^{-*}`.
    fn from_basis(specs: Vec<ChainSpec>, basis: CMatrix) -> Result<Self> {
        let s = singular_values(&basis);
        let cond = s[0] / s[s.len() - 1];
        if !cond.is_finite() || cond > MAX_BASIS_CONDITION {
            return Err(Error::IllConditionedBasis {
                cond,
                limit: MAX_BASIS_CONDITION,
            });
        }
        let inv = basis.clone().try_inverse().ok_or(Error::IllConditionedBasis {
            cond: f64::INFINITY,
            limit: MAX_BASIS_CONDITION,
        })?;
        let g = inv.adjoint();
        let mut index = Vec::with_capacity(basis.ncols());
        for (q, spec) in specs.iter().enumerate() {
            for (xi, &len) in spec.chains.iter().enumerate() {
                for i in 0..len {
                    index.push(RootIndex {
                        cluster: q,
                        chain: xi,
                        position: i,
                        chain_len: len,
                    });
                }
            }
        }
        Ok(Self {
            specs,
            e: basis,
            g,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.e.ncols()
    }

    pub fn specs(&self) -> &[ChainSpec] {
        &self.specs
    }

    pub fn cluster_count(&self) -> usize {
        self.specs.len()
    }

    /// Root vectors as columns.
    pub fn basis(&self) -> &CMatrix {
        &self.e
    }

    /// Dual vectors as columns.
    pub fn dual(&self) -> &CMatrix {
        &self.g
    }

    pub fn e(&self, n: usize) -> CVector {
        self.e.column(n).into_owned()
    }

    pub fn g(&self, n: usize) -> CVector {
        self.g.column(n).into_owned()
    }

    pub fn index(&self) -> &[RootIndex] {
        &self.index
    }

    pub fn root_index(&self, n: usize) -> RootIndex {
        self.index[n]
    }

    /// Flat index of `(q, ξ, i)`.
    pub fn flat_index(&self, cluster: usize, chain: usize, position: usize) -> Option<usize> {
        self.index.iter().position(|r| {
            r.cluster == cluster && r.chain == chain && r.position == position
        })
    }

    pub fn chains(&self) -> Vec<ChainRef> {
        let mut out = Vec::new();
        let mut start = 0;
        for (q, spec) in self.specs.iter().enumerate() {
            for &len in &spec.chains {
                out.push(ChainRef {
                    cluster: q,
                    mu: spec.mu,
                    start,
                    len,
                });
                start += len;
            }
        }
        out
    }

    /// Flat index range of cluster `q`.
    pub fn cluster_range(&self, q: usize) -> std::ops::Range<usize> {
        let start: usize = self.specs[..q].iter().map(|s| s.algebraic_multiplicity()).sum();
        start..start + self.specs[q].algebraic_multiplicity()
    }

    /// Characteristic numbers `λ_q = 1/μ_q`, one per cluster.
    pub fn characteristic_numbers(&self) -> Vec<Complex64> {
        self.specs.iter().map(|s| s.lambda()).collect()
    }

    pub fn max_chain_len(&self) -> usize {
        self.specs
            .iter()
            .flat_map(|s| s.chains.iter().copied())
            .max()
            .unwrap_or(1)
    }

    /// Dual vector in the reversed chain labelling: for `n = q_ξ + j`
    /// returns `g_{q_ξ + k - j}`. With that labelling the eigenvector of `B*`
    /// sits at the head of each dual chain and `e_{q_ξ+i}` pairs with the
    /// reversed dual at position `k - i`.
    pub fn reversed_dual(&self, n: usize) -> CVector {
        let r = self.index[n];
        let head = n - r.position;
        self.g(head + r.chain_len - 1 - r.position)
    }

    /// Gram matrix `[(e_i, g_j)]`.
    pub fn gram(&self) -> CMatrix {
        // (e_i, g_j) = g_j^* e_i
        (self.g.adjoint() * &self.e).transpose()
    }

    /// Largest `‖B e_i - μ e_i - e_{i-1}‖`.
    pub fn chain_residual(&self, b: &DenseOperator) -> f64 {
        let mut worst = 0.0_f64;
        for ch in self.chains() {
            for i in 0..ch.len {
                let n = ch.start + i;
                let mut r = b.apply(&self.e(n)) - self.e(n) * ch.mu;
                if i > 0 {
                    r -= self.e(n - 1);
                }
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    /// Largest `‖B* g_i - μ̄ g_i - g_{i+1}‖`.
    pub fn dual_chain_residual(&self, b: &DenseOperator) -> f64 {
        let adj = b.adjoint();
        let mut worst = 0.0_f64;
        for ch in self.chains() {
            for i in 0..ch.len {
                let n = ch.start + i;
                let mut r = &adj * self.g(n) - self.g(n) * ch.mu.conj();
                if i + 1 < ch.len {
                    r -= self.g(n + 1);
                }
                worst = worst.max(r.norm());
            }
        }
        worst
    }

    pub fn to_json(&self) -> JordanSystemJson {
        let flat = |m: &CMatrix| -> (Vec<f64>, Vec<f64>) {
            // vectors concatenated, i.e. column-major
            (m.iter().map(|z| z.re).collect(), m.iter().map(|z| z.im).collect())
        };
        let (e_re, e_im) = flat(&self.e);
        let (g_re, g_im) = flat(&self.g);
        JordanSystemJson {
            dim: self.dim(),
            specs: self.specs.clone(),
            e_re,
            e_im,
            g_re,
            g_im,
        }
    }

    pub fn from_json(json: &JordanSystemJson) -> Result<Self> {
        let d = json.dim;
        let total: usize = json.specs.iter().map(|s| s.algebraic_multiplicity()).sum();
        if total != d || [&json.e_re, &json.e_im, &json.g_re, &json.g_im].iter().any(|v| v.len() != d * d) {
            return Err(Error::InvalidInput("inconsistent Jordan system JSON".into()));
        }
        let build = |re: &[f64], im: &[f64]| {
            CMatrix::from_iterator(d, d, re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)))
        };
        let mut sys = Self::from_basis(json.specs.clone(), build(&json.e_re, &json.e_im))?;
        sys.g = build(&json.g_re, &json.g_im);
        Ok(sys)
    }
}

/// Wire form; each vector block is the list of vectors concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanSystemJson {
    pub dim: usize,
    pub specs: Vec<ChainSpec>,
    pub e_re: Vec<f64>,
    pub e_im: Vec<f64>,
    pub g_re: Vec<f64>,
    pub g_im: Vec<f64>,
}

fn validate_specs(specs: &[ChainSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no chain specs".into()));
    }
    for s in specs {
        if s.chains.is_empty() || s.chains.contains(&0) {
            return Err(Error::InvalidInput(format!("chain lengths for mu = {} must be >= 1", s.mu)));
        }
        if s.mu.norm() == 0.0 || !s.mu.re.is_finite() || !s.mu.im.is_finite() {
            return Err(Error::InvalidInput("eigenvalues must be finite and nonzero".into()));
        }
    }
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if a.mu == b.mu {
                return Err(Error::InvalidInput(format!("eigenvalue {} repeated", a.mu)));
            }
        }
    }
    Ok(())
}

/// Block-Jordan matrix for specs in the given order.
pub fn jordan_matrix(specs: &[ChainSpec]) -> CMatrix {
    let d: usize = specs.iter().map(|s| s.algebraic_multiplicity()).sum();
    let mut j = CMatrix::zeros(d, d);
    let mut k = 0;
    for s in specs {
        for &len in &s.chains {
            for i in 0..len {
                j[(k + i, k + i)] = s.mu;
                if i > 0 {
                    j[(k + i - 1, k + i)] = Complex64::new(1.0, 0.0);
                }
            }
            k += len;
        }
    }
    j
}

/// `B = S J S^{-1}` with the columns of `basis` as root vectors, assigned to
/// chains after sorting `specs` into canonical order.
pub fn synthesize_operator(specs: &[ChainSpec], basis: &DenseOperator) -> Result<(DenseOperator, JordanSystem)> {
    validate_specs(specs)?;
    let total: usize = specs.iter().map(|s| s.algebraic_multiplicity()).sum();
    if total != basis.dim() {
        return Err(Error::InvalidInput(format!(
            "chain lengths sum to {total} but basis has dim {}",
            basis.dim()
        )));
    }
    let mut sorted = specs.to_vec();
    canonical_order(&mut sorted);
    let j = jordan_matrix(&sorted);
    let sys = JordanSystem::from_basis(sorted, basis.matrix().clone())?;
    let b = basis.matrix() * j * sys.g.adjoint();
    Ok((DenseOperator::new(b)?, sys))
}

/// Knobs for [`extract_root_system_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Singular values below `rank_tol · max(1, ‖B‖)^ℓ` count as zero in `(B - μ)^ℓ`.
    pub rank_tol: f64,
    /// Eigenvalues closer than `cluster_radius · max(1, |μ|)` merge.
    pub cluster_radius: f64,
}

impl ExtractOptions {
    pub fn with_tol(tol: f64) -> Self {
        // merges the ~tol^(1/k) splitting of chains up to length 4
        Self {
            rank_tol: tol,
            cluster_radius: tol.powf(0.25),
        }
    }
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self::with_tol(DEFAULT_EXTRACT_TOL)
    }
}

pub fn extract_root_system(b: &DenseOperator, tol: f64) -> Result<JordanSystem> {
    extract_root_system_with(b, &ExtractOptions::with_tol(tol))
}

/// Numerical Jordan structure from nested null spaces of `(B - μI)^ℓ`.
pub fn extract_root_system_with(b: &DenseOperator, opts: &ExtractOptions) -> Result<JordanSystem> {
    if !(opts.rank_tol > 0.0) || !(opts.cluster_radius > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let d = b.dim();
    let bnorm = b.norm();
    let eig = b.eigenvalues();
    if eig.iter().any(|mu| mu.norm() <= 1e-10 * bnorm) {
        return Err(Error::SingularOperator {
            sigma_min: eig.iter().map(|m| m.norm()).fold(f64::INFINITY, f64::min),
        });
    }

    // single-linkage clustering
    let mut label: Vec<usize> = (0..d).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let radius = opts.cluster_radius * eig[i].norm().max(eig[j].norm()).max(1.0);
            if (eig[i] - eig[j]).norm() <= radius {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                label[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for (i, &e) in eig.iter().enumerate().take(d) {
        let r = find(&mut label, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => clusters[k].push(e),
            None => {
                roots.push(r);
                clusters.push(vec![e]);
            }
        }
    }

    let mut found: Vec<(ChainSpec, Vec<CVector>)> = Vec::new();
    for cl in &clusters {
        let mu = cl.iter().sum::<Complex64>() / cl.len() as f64;
        let chains = cluster_chains(b, mu, cl.len(), opts.rank_tol, bnorm)?;
        let mut lens: Vec<usize> = chains.iter().map(|c| c.len()).collect();
        lens.sort_unstable_by(|a, b| b.cmp(a));
        let mut vectors = Vec::new();
        let mut ordered = chains;
        ordered.sort_by_key(|c| std::cmp::Reverse(c.len()));
        for c in ordered {
            vectors.extend(c);
        }
        found.push((ChainSpec::new(mu, lens), vectors));
    }
    found.sort_by(|a, b| {
        let (la, lb) = (a.0.lambda(), b.0.lambda());
        la.norm()
            .partial_cmp(&lb.norm())
            .unwrap_or(Ordering::Equal)
            .then(la.arg().partial_cmp(&lb.arg()).unwrap_or(Ordering::Equal))
    });
    let specs: Vec<ChainSpec> = found.iter().map(|f| f.0.clone()).collect();
    let cols: Vec<CVector> = found.into_iter().flat_map(|f| f.1).collect();
    JordanSystem::from_basis(specs, CMatrix::from_columns(&cols))
}

/// Null-space basis (orthonormal columns) of `m` at `threshold`, failing when
/// a singular value sits within a factor 10 of the threshold.
fn null_space(m: &CMatrix, threshold: f64, mu: Complex64) -> Result<CMatrix> {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut cols = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > threshold / 10.0 && s < threshold * 10.0 {
            return Err(Error::ChainAmbiguity {
                mu,
                detail: format!("singular value {s:e} near rank threshold {threshold:e}"),
            });
        }
        if s <= threshold {
            cols.push(v_t.row(k).adjoint());
        }
    }
    Ok(if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    })
}

/// Orthonormal basis of the column span (rank by relative threshold).
fn orthonormal_span(m: &CMatrix) -> CMatrix {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cols: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 1e-10 * smax)
        .map(|(k, _)| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(m.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

fn cluster_chains(
    b: &DenseOperator,
    mu: Complex64,
    multiplicity: usize,
    tol: f64,
    bnorm: f64,
) -> Result<Vec<Vec<CVector>>> {
    let d = b.dim();
    let a = b.matrix() - CMatrix::identity(d, d) * mu;
    let scale = bnorm.max(1.0);

    // kernels of A^ℓ until the nullity stabilizes at the multiplicity
    let mut kernels = vec![CMatrix::zeros(d, 0)];
    let mut power = CMatrix::identity(d, d);
    for l in 1..=multiplicity {
        power = &a * power;
        let k = null_space(&power, tol * scale.powi(l as i32), mu)?;
        let prev = kernels.last().unwrap().ncols();
        if k.ncols() < prev {
            return Err(Error::ChainAmbiguity {
                mu,
                detail: "kernel dimensions are not nested".into(),
            });
        }
        let stable = k.ncols() == prev;
        kernels.push(k);
        if stable {
            kernels.pop();
            break;
        }
    }
    let depth = kernels.len() - 1;
    let nullities: Vec<usize> = kernels.iter().map(|k| k.ncols()).collect();
    if nullities[depth] != multiplicity {
        return Err(Error::ChainAmbiguity {
            mu,
            detail: format!(
                "generalized eigenspace has dimension {} but {multiplicity} eigenvalues clustered",
                nullities[depth]
            ),
        });
    }
    // chains of length >= ℓ
    let at_least = |l: usize| -> usize {
        if l > depth {
            0
        } else {
            nullities[l] - nullities[l - 1]
        }
    };

    let apply_pow = |x: &CVector, p: usize| -> CVector {
        let mut y = x.clone();
        for _ in 0..p {
            y = &a * y;
        }
        y
    };

    let mut tops: Vec<(usize, CVector)> = Vec::new();
    for l in (1..=depth).rev() {
        let needed = at_least(l) - at_least(l + 1);
        if needed == 0 {
            continue;
        }
        // span of ker A^{ℓ-1} plus images of longer chains at level ℓ
        let mut z_cols: Vec<CVector> = kernels[l - 1].column_iter().map(|c| c.into_owned()).collect();
        for (len, x) in &tops {
            z_cols.push(apply_pow(x, len - l));
        }
        let z = if z_cols.is_empty() {
            CMatrix::zeros(d, 0)
        } else {
            orthonormal_span(&CMatrix::from_columns(&z_cols))
        };
        let k = &kernels[l];
        let projected = if z.ncols() == 0 {
            k.clone()
        } else {
            k - &z * (z.adjoint() * k)
        };
        let svd = SVD::new(projected, false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        if order.len() < needed || svd.singular_values[order[needed - 1]] < 1e-6 {
            return Err(Error::ChainAmbiguity {
                mu,
                detail: format!("cannot find {needed} independent chain heads of length {l}"),
            });
        }
        for &idx in order.iter().take(needed) {
            let coef: CVector = v_t.row(idx).adjoint();
            tops.push((l, k * coef));
        }
    }

    let mut chains = Vec::new();
    for (len, x) in tops {
        let mut chain: Vec<CVector> = (0..len).map(|i| apply_pow(&x, len - 1 - i)).collect();
        let scale = chain[0].norm();
        for v in chain.iter_mut() {
            *v /= Complex64::new(scale, 0.0);
        }
        chains.push(chain);
    }
    Ok(chains)
}

/// `c_n = (f, g_n)`, the coordinates of `f` in the root basis.
pub fn expand_coefficients(f: &CVector, sys: &JordanSystem) -> Result<Vec<Complex64>> {
    if f.len() != sys.dim() {
        return Err(Error::InvalidInput("vector length does not match system".into()));
    }
    Ok((0..sys.dim()).map(|n| inner(f, &sys.g(n))).collect())
}

/// Quotient form `c_{q_ξ+i} = (f, ĝ_{k-i}) / (e_{q_ξ+i}, ĝ_{k-i})` with the
/// reversed dual chain `ĝ`.
pub fn expand_coefficients_quotient(f: &CVector, sys: &JordanSystem) -> Result<Vec<Complex64>> {
    if f.len() != sys.dim() {
        return Err(Error::InvalidInput("vector length does not match system".into()));
    }
    Ok((0..sys.dim())
        .map(|n| {
            let r = sys.root_index(n);
            let head = n - r.position;
            // ĝ_{k-i} in reversed labelling is reversed_dual(head + k - i)
            let partner = sys.reversed_dual(head + r.chain_len - 1 - r.position);
            inner(f, &partner) / inner(&sys.e(n), &partner)
        })
        .collect())
}

/// `Σ c_n e_n`.
pub fn reconstruct(coeffs: &[Complex64], sys: &JordanSystem) -> CVector {
    sys.basis() * CVector::from_column_slice(coeffs)
}
