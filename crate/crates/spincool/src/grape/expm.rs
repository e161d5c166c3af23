//! Matrix exponential via scaling-and-squaring with a Padé(13) approximant,
//! plus its Fréchet (directional) derivative through the block-triangular
//! identity
//!
//! ```text
//! exp([[A, E], [0, A]]) = [[exp(A), L(A,E)], [0, exp(A)]]
//! ```
//!
//! where `L(A,E)` is the derivative of `exp` at `A` in direction `E`. The
//! pair `(A, E)` is propagated through the Padé recurrences directly, so the
//! derivative inherits the full accuracy of the exponential itself. Matrices
//! here are small (2^n with n <= 16 spins, 8x8 for the TCE problems), so no
//! effort is spent on large-scale tricks.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Padé(13) numerator coefficients (Higham 2005).
const B: [f64; 14] = [
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

/// Scaling threshold for the (13,13) approximant.
const THETA_13: f64 = 5.371920351148152;

fn one_norm(a: &Array2<C64>) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        max = max.max(s);
    }
    max
}

fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Solves `D X = N` by Gaussian elimination with partial pivoting.
fn solve(d: &Array2<C64>, n: &Array2<C64>) -> Array2<C64> {
    let dim = d.nrows();
    let cols = n.ncols();
    let mut a = d.clone();
    let mut x = n.clone();
    for col in 0..dim {
        let mut pivot_row = col;
        let mut pivot_mag = a[[col, col]].norm();
        for row in col + 1..dim {
            let mag = a[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        assert!(pivot_mag > 0.0, "singular Padé denominator");
        if pivot_row != col {
            for j in 0..dim {
                let tmp = a[[col, j]];
                a[[col, j]] = a[[pivot_row, j]];
                a[[pivot_row, j]] = tmp;
            }
            for j in 0..cols {
                let tmp = x[[col, j]];
                x[[col, j]] = x[[pivot_row, j]];
                x[[pivot_row, j]] = tmp;
            }
        }
        let pivot = a[[col, col]];
        for row in col + 1..dim {
            let factor = a[[row, col]] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..dim {
                let v = a[[col, j]];
                a[[row, j]] -= factor * v;
            }
            for j in 0..cols {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
        }
    }
    for col in (0..dim).rev() {
        let pivot = a[[col, col]];
        for j in 0..cols {
            let mut sum = x[[col, j]];
            for k in col + 1..dim {
                sum -= a[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = sum / pivot;
        }
    }
    x
}

/// `exp(A)` for a square complex matrix.
pub fn matrix_exp(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix_exp needs a square matrix");
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a_scaled = a * c(1.0 / f64::powi(2.0, s as i32));

    let a2 = a_scaled.dot(&a_scaled);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let id = eye(n);

    let w1 = &a6 * c(B[13]) + &a4 * c(B[11]) + &a2 * c(B[9]);
    let w2 = w1.dot(&a6) + &a6 * c(B[7]) + &a4 * c(B[5]) + &a2 * c(B[3]) + &id * c(B[1]);
    let u = a_scaled.dot(&w2);
    let z1 = &a6 * c(B[12]) + &a4 * c(B[10]) + &a2 * c(B[8]);
    let v = z1.dot(&a6) + &a6 * c(B[6]) + &a4 * c(B[4]) + &a2 * c(B[2]) + &id * c(B[0]);

    let mut r = solve(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// A (matrix, directional part) pair: arithmetic on these mirrors arithmetic
/// on the block-triangular matrix [[A, E], [0, A]].
#[derive(Clone)]
struct Pair {
    a: Array2<C64>,
    e: Array2<C64>,
}

impl Pair {
    fn mul(&self, other: &Pair) -> Pair {
        Pair {
            a: self.a.dot(&other.a),
            e: self.a.dot(&other.e) + self.e.dot(&other.a),
        }
    }

    fn scale(&self, k: C64) -> Pair {
        Pair {
            a: &self.a * k,
            e: &self.e * k,
        }
    }

    fn add(&self, other: &Pair) -> Pair {
        Pair {
            a: &self.a + &other.a,
            e: &self.e + &other.e,
        }
    }
}

/// `(exp(A), L(A, E))`: the exponential and its derivative in direction `E`.
pub fn matrix_exp_frechet(a: &Array2<C64>, e: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(a.dim(), e.dim(), "direction must match the matrix");
    // 1-norm of the block matrix: column sums of [A; 0] and [E; A]
    let norm = one_norm(a).max(
        (0..n)
            .map(|j| {
                a.column(j).iter().map(|z| z.norm()).sum::<f64>()
                    + e.column(j).iter().map(|z| z.norm()).sum::<f64>()
            })
            .fold(0.0f64, f64::max),
    );
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let k = c(1.0 / f64::powi(2.0, s as i32));
    let x = Pair {
        a: a * k,
        e: e * k,
    };
    let id = Pair {
        a: eye(n),
        e: Array2::zeros((n, n)),
    };

    let x2 = x.mul(&x);
    let x4 = x2.mul(&x2);
    let x6 = x2.mul(&x4);

    let w1 = x6.scale(c(B[13])).add(&x4.scale(c(B[11]))).add(&x2.scale(c(B[9])));
    let w2 = w1
        .mul(&x6)
        .add(&x6.scale(c(B[7])))
        .add(&x4.scale(c(B[5])))
        .add(&x2.scale(c(B[3])))
        .add(&id.scale(c(B[1])));
    let u = x.mul(&w2);
    let z1 = x6.scale(c(B[12])).add(&x4.scale(c(B[10]))).add(&x2.scale(c(B[8])));
    let v = z1
        .mul(&x6)
        .add(&x6.scale(c(B[6])))
        .add(&x4.scale(c(B[4])))
        .add(&x2.scale(c(B[2])))
        .add(&id.scale(c(B[0])));

    // (V - U) R = (V + U), solved blockwise:
    //   D_a R_a = N_a
    //   D_a R_e = N_e - D_e R_a
    let d = Pair {
        a: &v.a - &u.a,
        e: &v.e - &u.e,
    };
    let num = Pair {
        a: &v.a + &u.a,
        e: &v.e + &u.e,
    };
    let r_a = solve(&d.a, &num.a);
    let r_e = solve(&d.a, &(&num.e - &d.e.dot(&r_a)));
    let mut r = Pair { a: r_a, e: r_e };
    for _ in 0..s {
        r = r.mul(&r.clone());
    }
    (r.a, r.e)
}
