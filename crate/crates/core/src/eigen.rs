//! Full symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Output is canonical: eigenvalues descending (ties keep their original
//! diagonal order), unit eigenvectors stored as columns, each flipped so that
//! its largest-magnitude entry is positive (lowest index wins a tie).

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rolling::CorrelationMatrix;
use crate::scalar::Real;

/// Maximum number of full cyclic sweeps.
pub const MAX_SWEEPS: usize = 30;

/// Eigenvalues above this negative floor are treated as rounding noise and set to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    eigenvalues: Vec<T>,
    /// Column j is the unit eigenvector of `eigenvalues[j]`.
    eigenvectors: Matrix<T>,
    sweeps: usize,
}

impl<T: Real> EigenDecomposition<T> {
    /// Assembles a decomposition from parts without solving anything.
    ///
    /// Used for tests and for data read back from disk; no invariant is checked.
    pub fn from_parts(eigenvalues: Vec<T>, eigenvectors: Matrix<T>) -> Self {
        assert_eq!(eigenvectors.shape(), (eigenvalues.len(), eigenvalues.len()));
        Self {
            eigenvalues,
            eigenvectors,
            sweeps: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix<T> {
        &self.eigenvectors
    }

    pub fn vector(&self, j: usize) -> Vec<T> {
        self.eigenvectors.column(j)
    }

    /// Number of Jacobi sweeps the solver needed.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }
}

/// Eigendecomposition of a correlation matrix.
pub fn decompose<T: Real>(matrix: &CorrelationMatrix<T>) -> Result<EigenDecomposition<T>> {
    decompose_symmetric(matrix.as_matrix())
}

/// Eigendecomposition of any real symmetric matrix (only the upper triangle is read).
pub fn decompose_symmetric<T: Real>(matrix: &Matrix<T>) -> Result<EigenDecomposition<T>> {
    let n = matrix.rows();
    assert_eq!(n, matrix.cols(), "matrix must be square");
    let work = Matrix::from_fn(n, n, |i, j| matrix[(i.min(j), i.max(j))]);
    let (values, basis, sweeps) = jacobi(work, Matrix::identity(n))?;
    Ok(finish(values, basis, sweeps))
}

/// Eigendecomposition seeded with an orthonormal basis close to the answer.
///
/// `basis` holds one unit vector per row (for instance the transposed
/// eigenvectors of a neighbouring window). The matrix is first rotated into
/// that basis, so Jacobi only has to remove the small residual coupling.
pub fn decompose_seeded<T: Real>(
    matrix: &CorrelationMatrix<T>,
    basis: &Matrix<T>,
) -> Result<EigenDecomposition<T>> {
    let m = matrix.as_matrix();
    let n = m.rows();
    assert_eq!(basis.shape(), (n, n), "seed basis must be N×N");
    // basis · R · basisᵀ, symmetrized
    let projected = basis.matmul(m).matmul(&basis.transpose());
    let work = Matrix::from_fn(n, n, |i, j| {
        let (a, b) = (projected[(i, j)], projected[(j, i)]);
        (a + b) * T::of(0.5)
    });
    let (values, rows, sweeps) = jacobi(work, basis.clone())?;
    Ok(finish(values, rows, sweeps))
}

/// Σ l_j v_j v_jᵀ.
pub fn reconstruct<T: Real>(decomp: &EigenDecomposition<T>) -> CorrelationMatrix<T> {
    let n = decomp.dim();
    let v = &decomp.eigenvectors;
    let mut out = Matrix::zeros(n, n);
    for (j, &l) in decomp.eigenvalues.iter().enumerate() {
        for r in 0..n {
            let lv = l * v[(r, j)];
            for c in 0..n {
                out[(r, c)] = out[(r, c)] + lv * v[(c, j)];
            }
        }
    }
    CorrelationMatrix::from_matrix_unchecked(out)
}

/// Flips `v` so that its largest-magnitude entry is positive; the lowest index wins ties.
pub fn canonicalize_sign<T: Real>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < T::zero()) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn off_diagonal_norm<T: Real>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut sum = T::zero();
    for p in 0..n {
        for &x in &a.row(p)[p + 1..] {
            sum = sum + x * x;
        }
    }
    (sum + sum).sqrt()
}

/// One plane rotation of a round: indices, sine and tau = s / (1 + c).
#[derive(Clone, Copy)]
struct Rotation<T> {
    p: usize,
    q: usize,
    s: T,
    tau: T,
}

/// Cyclic Jacobi on the full symmetric `a`, accumulating rotations into the
/// rows of `vt`. Returns the unsorted diagonal, the rotated rows and the sweep count.
///
/// Pairs are visited in round-robin order: each sweep is n−1 rounds of n/2
/// disjoint rotations, so every pair (p, q) is annihilated once per sweep and a
/// whole round is applied with contiguous row passes: A ← Jᵀ A, A ← Aᵀ, A ← Jᵀ A.
fn jacobi<T: Real>(mut a: Matrix<T>, mut vt: Matrix<T>) -> Result<(Vec<T>, Matrix<T>, usize)> {
    let n = a.rows();
    let tol = T::of(1e-12) * T::of_usize(n.max(1));
    let hundred = T::of(100.0);
    let half = T::of(0.5);
    let mut sweeps = 0;

    // Round-robin schedule; an odd dimension gets a dummy slot that sits out.
    let slots = n + n % 2;
    let mut ring: Vec<usize> = (0..slots).collect();
    let mut rotations: Vec<Rotation<T>> = Vec::with_capacity(slots / 2);
    let mut fixups: Vec<(usize, usize, T, T)> = Vec::with_capacity(slots / 2);
    let mut scratch = Matrix::zeros(n, n);

    loop {
        let off = off_diagonal_norm(&a);
        if off < tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off.as_f64(),
            });
        }
        sweeps += 1;

        // Early sweeps only rotate the larger elements.
        let threshold = if sweeps < 4 {
            let abs_sum: T = (0..n)
                .flat_map(|p| a.row(p)[p + 1..].iter().map(|x| x.abs()))
                .sum();
            T::of(0.2) * abs_sum / T::of_usize(n * n)
        } else {
            T::zero()
        };

        for _round in 1..slots {
            rotations.clear();
            fixups.clear();
            for i in 0..slots / 2 {
                let (x, y) = (ring[i], ring[slots - 1 - i]);
                if x >= n || y >= n {
                    continue;
                }
                let (p, q) = (x.min(y), x.max(y));
                let apq = a[(p, q)];
                let g = hundred * apq.abs();
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if sweeps > 4 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                if apq.abs() <= threshold || apq == T::zero() {
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = half * h / apq;
                    let t = T::one() / (theta.abs() + (T::one() + theta * theta).sqrt());
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                rotations.push(Rotation {
                    p,
                    q,
                    s,
                    tau: s / (T::one() + c),
                });
                fixups.push((p, q, app - t * apq, aqq + t * apq));
            }
            ring[1..].rotate_right(1);
            if rotations.is_empty() {
                continue;
            }

            rotate_rows(&mut a, &rotations);
            transpose_into(&a, &mut scratch);
            std::mem::swap(&mut a, &mut scratch);
            rotate_rows(&mut a, &rotations);
            for &(p, q, new_pp, new_qq) in &fixups {
                a[(p, p)] = new_pp;
                a[(q, q)] = new_qq;
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
            }
            rotate_rows(&mut vt, &rotations);
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok((values, vt, sweeps))
}

/// Replaces rows p and q by their rotated combinations for every rotation.
fn rotate_rows<T: Real>(m: &mut Matrix<T>, rotations: &[Rotation<T>]) {
    let n = m.cols();
    let data = m.as_mut_slice();
    for r in rotations {
        let (head, tail) = data.split_at_mut(r.q * n);
        let row_p = &mut head[r.p * n..(r.p + 1) * n];
        let row_q = &mut tail[..n];
        let (s, tau) = (r.s, r.tau);
        for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
            let g = *x;
            let h = *y;
            *x = g - s * (h + g * tau);
            *y = h + s * (g - h * tau);
        }
    }
}

fn transpose_into<T: Real>(src: &Matrix<T>, dst: &mut Matrix<T>) {
    const BLOCK: usize = 16;
    let n = src.rows();
    let s = src.as_slice();
    let d = dst.as_mut_slice();
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    d[j * n + i] = s[i * n + j];
                }
            }
        }
    }
}

/// Sorts, clamps rounding-level negatives, canonicalizes signs and stores vectors as columns.
fn finish<T: Real>(values: Vec<T>, rows: Matrix<T>, sweeps: usize) -> EigenDecomposition<T> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
    let clamp = -T::of(NEGATIVE_CLAMP);
    let eigenvalues = order
        .iter()
        .map(|&i| {
            let l = values[i];
            if l < T::zero() && l >= clamp {
                T::zero()
            } else {
                l
            }
        })
        .collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = rows.row(i).to_vec();
        canonicalize_sign(&mut v);
        for (r, x) in v.into_iter().enumerate() {
            eigenvectors[(r, col)] = x;
        }
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    }
}
