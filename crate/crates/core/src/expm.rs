//! Matrix exponential by scaling and squaring with the degree-13 Padé
//! approximant (Higham 2005).

use num_complex::Complex64;

use crate::matrixcore::CMatrix;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn r(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `exp(A)`.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * r(0.5f64.powi(s));
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| r(B13[k]);
    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * inner_u;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut x = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::{gaussian_vector, seeded_rng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal() {
        let d = [c(0.3, 1.0), c(-2.0, 0.5), c(7.0, -3.0)];
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let e = expm(&a);
        for i in 0..3 {
            assert!((e[(i, i)] - d[i].exp()).norm() <= 1e-13 * d[i].exp().norm());
        }
        assert!(e[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn nilpotent_plus_scalar() {
        // exp(aI + N) = e^a (I + N + N²/2) for a 3×3 shift N
        let a = c(-1.5, 0.4);
        let mut m = CMatrix::identity(3, 3) * a;
        m[(0, 1)] = c(2.0, 0.0);
        m[(1, 2)] = c(2.0, 0.0);
        let e = expm(&m);
        let ea = a.exp();
        let expect = [[ea, ea * 2.0, ea * 2.0], [c(0.0, 0.0), ea, ea * 2.0], [c(0.0, 0.0), c(0.0, 0.0), ea]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((e[(i, j)] - expect[i][j]).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn inverse_and_semigroup() {
        let mut rng = seeded_rng(5);
        let cols: Vec<_> = (0..5).map(|_| gaussian_vector(&mut rng, 5)).collect();
        let a = CMatrix::from_columns(&cols) * c(3.0, 0.0);
        let e = expm(&a);
        let back = expm(&(-&a));
        assert!((&e * &back - CMatrix::identity(5, 5)).norm() < 1e-9);
        let half = expm(&(&a * c(0.5, 0.0)));
        assert!((&half * &half - &e).norm() <= 1e-12 * e.norm());
    }
}
