//! Adaptive composite Gauss–Legendre integration of vector-valued analytic
//! functions along piecewise paths in the complex plane.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::CVector;

/// Panel order.
pub const GL_ORDER: usize = 16;

/// Default node budget per integral.
pub const DEFAULT_MAX_NODES: usize = 100_000;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// A smooth path piece parameterized over `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathPiece {
    /// Straight segment.
    Segment { from: Complex64, to: Complex64 },
    /// Arc of the circle `|z - center| = radius` swept from `start` to `end`
    /// (radians; `end < start` runs clockwise).
    Arc {
        center: Complex64,
        radius: f64,
        start: f64,
        end: f64,
    },
}

impl PathPiece {
    pub fn ray(arg: f64, r_from: f64, r_to: f64) -> Self {
        PathPiece::Segment {
            from: Complex64::from_polar(r_from, arg),
            to: Complex64::from_polar(r_to, arg),
        }
    }

    pub fn arc(radius: f64, start: f64, end: f64) -> Self {
        PathPiece::Arc {
            center: Complex64::new(0.0, 0.0),
            radius,
            start,
            end,
        }
    }

    /// Full counterclockwise circle.
    pub fn circle(center: Complex64, radius: f64) -> Self {
        PathPiece::Arc {
            center,
            radius,
            start: 0.0,
            end: 2.0 * std::f64::consts::PI,
        }
    }

    /// `(z(s), z'(s))`.
    pub fn point(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            PathPiece::Segment { from, to } => (from + (to - from) * s, to - from),
            PathPiece::Arc {
                center,
                radius,
                start,
                end,
            } => {
                let sweep = end - start;
                let w = Complex64::from_polar(radius, start + sweep * s);
                (center + w, Complex64::new(0.0, sweep) * w)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            PathPiece::Segment { from, to } => (to - from).norm(),
            PathPiece::Arc { radius, start, end, .. } => radius * (end - start).abs(),
        }
    }

    /// The same piece traversed backwards.
    pub fn reversed(&self) -> Self {
        match *self {
            PathPiece::Segment { from, to } => PathPiece::Segment { from: to, to: from },
            PathPiece::Arc {
                center,
                radius,
                start,
                end,
            } => PathPiece::Arc {
                center,
                radius,
                start: end,
                end: start,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Absolute tolerance on the whole path.
    pub tol: f64,
    pub max_nodes: usize,
    /// Initial uniform panels per piece.
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_nodes: DEFAULT_MAX_NODES,
            initial_panels: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathIntegral {
    pub value: CVector,
    pub node_count: usize,
    pub est_error: f64,
}

fn panel<F>(f: &mut F, piece: &PathPiece, a: f64, b: f64, dim: usize, nodes: &mut usize) -> Result<CVector>
where
    F: FnMut(Complex64) -> Result<CVector>,
{
    let (x, w) = gl16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = CVector::zeros(dim);
    for (xi, wi) in x.iter().zip(w) {
        let (z, dz) = piece.point(mid + half * xi);
        acc += f(z)? * (dz * (wi * half));
    }
    *nodes += GL_ORDER;
    Ok(acc)
}

/// `∫_path f(z) dz` with dyadic refinement. Each piece gets an equal share
/// of `tol`, spread over its parameter interval; a panel is accepted when its
/// value and the sum of its two halves differ by at most its share.
pub fn integrate_path<F>(pieces: &[PathPiece], dim: usize, mut f: F, opts: &QuadOptions) -> Result<PathIntegral>
where
    F: FnMut(Complex64) -> Result<CVector>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("quadrature tolerance must be positive".into()));
    }
    let active = pieces.iter().filter(|p| p.length() > 0.0).count().max(1);
    let mut value = CVector::zeros(dim);
    let mut nodes = 0usize;
    let mut est_error = 0.0;
    for piece in pieces {
        let len = piece.length();
        if len == 0.0 {
            continue;
        }
        let share = opts.tol / active as f64;
        let np = opts.initial_panels.max(1);
        let mut stack: Vec<(f64, f64, CVector)> = Vec::new();
        for k in (0..np).rev() {
            let (a, b) = (k as f64 / np as f64, (k + 1) as f64 / np as f64);
            let v = panel(&mut f, piece, a, b, dim, &mut nodes)?;
            stack.push((a, b, v));
        }
        while let Some((a, b, whole)) = stack.pop() {
            let m = 0.5 * (a + b);
            let left = panel(&mut f, piece, a, m, dim, &mut nodes)?;
            let right = panel(&mut f, piece, m, b, dim, &mut nodes)?;
            let delta = (&left + &right - &whole).norm();
            // below the round-off floor further halving cannot help
            let floor = 64.0 * f64::EPSILON * (left.norm() + right.norm());
            let local = (share * (b - a)).max(floor);
            if delta <= local || (b - a) < 1e-12 {
                value += left + right;
                est_error += delta;
            } else {
                if nodes > opts.max_nodes {
                    return Err(Error::QuadratureStall {
                        nodes,
                        est_error: delta,
                        tol: opts.tol,
                    });
                }
                stack.push((m, b, right));
                stack.push((a, m, left));
            }
        }
    }
    Ok(PathIntegral {
        value,
        node_count: nodes,
        est_error,
    })
}
