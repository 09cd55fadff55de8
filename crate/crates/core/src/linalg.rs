//! Small dense complex linear algebra used by the propagators.
//!
//! Everything here targets matrices of dimension at most a few hundred
//! (Liouvillians of the spin systems in this crate), so plain dense
//! algorithms are used throughout.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Maximum column absolute sum (the induced 1-norm).
pub fn one_norm(a: &Array2<C64>) -> f64 {
    let (n, m) = a.dim();
    let mut best = 0.0_f64;
    for j in 0..m {
        let mut s = 0.0;
        for i in 0..n {
            s += a[(i, j)].norm();
        }
        if s > best {
            best = s;
        }
    }
    best
}

/// Solve `A X = B` by LU decomposition with partial pivoting. `B` is consumed
/// and overwritten with the solution.
pub fn lu_solve(a: &Array2<C64>, mut b: Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // pivot
        let mut p = k;
        let mut pmax = lu[(k, k)].norm();
        for i in k + 1..n {
            let v = lu[(i, k)].norm();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            let ncols_b = b.ncols();
            for j in 0..ncols_b {
                let t = b[(k, j)];
                b[(k, j)] = b[(p, j)];
                b[(p, j)] = t;
            }
        }
        let piv = lu[(k, k)];
        if piv.norm() == 0.0 {
            continue; // singular column; downstream residuals will show it
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / piv;
            lu[(i, k)] = f;
            for j in k + 1..n {
                let sub = f * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
        }
    }

    // forward substitution (L has unit diagonal)
    let ncols = b.ncols();
    for j in 0..ncols {
        for i in 0..n {
            let mut s = b[(i, j)];
            for k in 0..i {
                s -= lu[(i, k)] * b[(k, j)];
            }
            b[(i, j)] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[(i, j)];
            for k in i + 1..n {
                s -= lu[(i, k)] * b[(k, j)];
            }
            b[(i, j)] = s / lu[(i, i)];
        }
    }
    b
}

fn eye(n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Matrix exponential via the degree-13 Padé approximant with scaling and
/// squaring (Higham 2005).
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    const THETA_13: f64 = 5.371920351148152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ];

    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scale = C64::new(1.0 / 2f64.powi(s as i32), 0.0);
    let a1 = a.mapv(|x| x * scale);

    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let id = eye(n);

    let u_inner = a6.mapv(|x| x * B[13]) + a4.mapv(|x| x * B[11]) + a2.mapv(|x| x * B[9]);
    let u_poly = a6.dot(&u_inner)
        + a6.mapv(|x| x * B[7])
        + a4.mapv(|x| x * B[5])
        + a2.mapv(|x| x * B[3])
        + id.mapv(|x| x * B[1]);
    let u = a1.dot(&u_poly);

    let v_inner = a6.mapv(|x| x * B[12]) + a4.mapv(|x| x * B[10]) + a2.mapv(|x| x * B[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|x| x * B[6])
        + a4.mapv(|x| x * B[4])
        + a2.mapv(|x| x * B[2])
        + id.mapv(|x| x * B[0]);

    let num = &v + &u;
    let den = &v - &u;
    let mut r = lu_solve(&den, num);
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
/// Used for positivity checks; the input is assumed Hermitian.
pub fn hermitian_eigenvalues(a: &Array2<C64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + one_norm(a)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let phase = apq / apq.norm();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns: [p q] <- [p q] * [[c, s*phase], [-s*conj(phase), c]]
                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, q)];
                    m[(i, p)] = aip * c - aiq * s * phase.conj();
                    m[(i, q)] = aip * s * phase + aiq * c;
                }
                for j in 0..n {
                    let apj = m[(p, j)];
                    let aqj = m[(q, j)];
                    m[(p, j)] = apj * c - aqj * s * phase;
                    m[(q, j)] = apj * s * phase.conj() + aqj * c;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::from_elem((4, 4), c(0.0, 0.0));
        let e = expm(&z);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(e[(i, j)].re, want, epsilon = 1e-14);
                assert_abs_diff_eq!(e[(i, j)].im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn expm_diagonal_matches_scalar_exponentials() {
        let mut a = Array2::from_elem((3, 3), c(0.0, 0.0));
        a[(0, 0)] = c(-2.0, 3.0);
        a[(1, 1)] = c(0.5, -40.0);
        a[(2, 2)] = c(-1e4, 0.0);
        let e = expm(&a);
        for i in 0..3 {
            let want = a[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn expm_pauli_x_rotation() {
        // exp(-i theta sx) = cos(theta) I - i sin(theta) sx
        let theta = 0.7;
        let mut a = Array2::from_elem((2, 2), c(0.0, 0.0));
        a[(0, 1)] = c(0.0, -theta);
        a[(1, 0)] = c(0.0, -theta);
        let e = expm(&a);
        assert_abs_diff_eq!(e[(0, 0)].re, theta.cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[(0, 1)].im, -theta.sin(), epsilon = 1e-13);
    }

    #[test]
    fn lu_solves_random_system() {
        let n = 8;
        let mut a = Array2::from_elem((n, n), c(0.0, 0.0));
        let mut x = Array2::from_elem((n, 1), c(0.0, 0.0));
        let mut seed = 1u64;
        let mut rngf = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            x[(i, 0)] = c(rngf(), rngf());
            for j in 0..n {
                a[(i, j)] = c(rngf(), rngf());
            }
        }
        let b = a.dot(&x);
        let got = lu_solve(&a, b);
        for i in 0..n {
            assert!((got[(i, 0)] - x[(i, 0)]).norm() < 1e-10);
        }
    }

    #[test]
    fn jacobi_eigenvalues_of_known_hermitian() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let mut a = Array2::from_elem((2, 2), c(0.0, 0.0));
        a[(0, 0)] = c(2.0, 0.0);
        a[(1, 1)] = c(2.0, 0.0);
        a[(0, 1)] = c(0.0, 1.0);
        a[(1, 0)] = c(0.0, -1.0);
        let ev = hermitian_eigenvalues(&a);
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 3.0, epsilon = 1e-12);
    }
}
