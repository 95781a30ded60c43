//! Exact transfer matrices of piecewise-constant cells.
//!
//! On a piece where `V` is constant, `u'' = (V - E) u` decouples in the
//! eigenbasis of `V`. With `d = λ - E` and piece length `ℓ`, each channel
//! propagates by
//!
//! ```text
//! [ C(dℓ²)      ℓ S(dℓ²) ]
//! [ dℓ S(dℓ²)   C(dℓ²)   ]
//! ```
//!
//! where `C(x) = Σ x^k/(2k)!` and `S(x) = Σ x^k/(2k+1)!` are entire, so the
//! formula has no branch cut at `d = 0` and extends verbatim to complex `E`.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{op_norm, symplectic_form};
use crate::model::{CellPotential, Piece};

const SERIES_RADIUS: f64 = 0.25;
const SERIES_TERMS: usize = 14;

/// `(C(x), S(x))` for real `x`.
pub fn entire_cs(x: f64) -> (f64, f64) {
    if x.abs() <= SERIES_RADIUS {
        let (mut c, mut s) = (0.0, 0.0);
        let mut term_c = 1.0; // x^k / (2k)!
        let mut term_s = 1.0; // x^k / (2k+1)!
        for k in 0..SERIES_TERMS {
            c += term_c;
            s += term_s;
            let kk = k as f64;
            term_c *= x / ((2.0 * kk + 1.0) * (2.0 * kk + 2.0));
            term_s *= x / ((2.0 * kk + 2.0) * (2.0 * kk + 3.0));
        }
        (c, s)
    } else if x > 0.0 {
        let r = x.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-x).sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// `(C(x), S(x))` for complex `x`.
pub fn entire_cs_complex(x: Complex64) -> (Complex64, Complex64) {
    if x.norm() <= SERIES_RADIUS {
        let one = Complex64::new(1.0, 0.0);
        let (mut c, mut s) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let (mut term_c, mut term_s) = (one, one);
        for k in 0..SERIES_TERMS {
            c += term_c;
            s += term_s;
            let kk = k as f64;
            term_c *= x / ((2.0 * kk + 1.0) * (2.0 * kk + 2.0));
            term_s *= x / ((2.0 * kk + 2.0) * (2.0 * kk + 3.0));
        }
        (c, s)
    } else {
        let r = x.sqrt();
        (r.cosh(), r.sinh() / r)
    }
}

/// Real `2N x 2N` transfer matrix acting on `(u, u')`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticMatrix {
    matrix: DMatrix<f64>,
}

impl SymplecticMatrix {
    /// Wraps a `2N x 2N` matrix; symplecticity is not checked here, see
    /// [`symplectic_residual`].
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || !matrix.nrows().is_multiple_of(2) || matrix.nrows() == 0 {
            return Err(Error::Domain(format!(
                "transfer matrix must be square of even size, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(channels: usize) -> Self {
        Self { matrix: DMatrix::identity(2 * channels, 2 * channels) }
    }

    pub fn channels(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `self * rhs`, i.e. `rhs` acts first.
    pub fn compose(&self, rhs: &SymplecticMatrix) -> SymplecticMatrix {
        SymplecticMatrix { matrix: &self.matrix * &rhs.matrix }
    }

    /// Inverse via `M^{-1} = -J Mᵀ J`.
    pub fn symplectic_inverse(&self) -> SymplecticMatrix {
        let j = symplectic_form(self.channels());
        SymplecticMatrix { matrix: -(&j * self.matrix.transpose() * &j) }
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }
}

/// `p`-th exterior power: matrix of `p x p` minors, lexicographic basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorPower {
    pub p: usize,
    pub matrix: DMatrix<f64>,
}

fn assemble<T: ComplexField<RealField = f64> + Copy>(q: &DMatrix<f64>, blocks: &[[T; 4]]) -> DMatrix<T> {
    let n = q.nrows();
    let mut out = DMatrix::from_element(2 * n, 2 * n, T::zero());
    for r in 0..n {
        for c in 0..n {
            let mut acc = [T::zero(); 4];
            for (k, b) in blocks.iter().enumerate() {
                let w = T::from_real(q[(r, k)] * q[(c, k)]);
                for i in 0..4 {
                    acc[i] += w * b[i];
                }
            }
            out[(r, c)] = acc[0];
            out[(r, n + c)] = acc[1];
            out[(n + r, c)] = acc[2];
            out[(n + r, n + c)] = acc[3];
        }
    }
    out
}

/// Transfer over `len` units of a constant piece (negative `len` propagates
/// backwards).
fn piece_transfer(piece: &Piece, energy: f64, len: f64) -> DMatrix<f64> {
    let blocks: Vec<[f64; 4]> = piece
        .eigenvalues
        .iter()
        .map(|&lambda| {
            let d = lambda - energy;
            let (c, s) = entire_cs(d * len * len);
            [c, len * s, d * len * s, c]
        })
        .collect();
    assemble(&piece.eigenvectors, &blocks)
}

fn piece_transfer_complex(piece: &Piece, z: Complex64, len: f64) -> DMatrix<Complex64> {
    let blocks: Vec<[Complex64; 4]> = piece
        .eigenvalues
        .iter()
        .map(|&lambda| {
            let d = Complex64::new(lambda, 0.0) - z;
            let (c, s) = entire_cs_complex(d * len * len);
            [c, s * len, d * s * len, c]
        })
        .collect();
    assemble(&piece.eigenvectors, &blocks)
}

/// Transfer from local coordinate `a` to `b` (`0 <= a <= b <= 1`) at real energy.
pub fn transfer_between(cell: &CellPotential, energy: f64, a: f64, b: f64) -> SymplecticMatrix {
    let n = cell.channels();
    let mut acc = DMatrix::identity(2 * n, 2 * n);
    for p in cell.pieces() {
        let lo = a.max(p.start);
        let hi = b.min(p.end);
        if hi > lo {
            acc = piece_transfer(p, energy, hi - lo) * acc;
        }
    }
    SymplecticMatrix { matrix: acc }
}

/// Transfer matrix across the whole cell at real energy `energy`.
///
/// Column `j` holds `(u, u')(1)` for the solution with canonical initial
/// data `e_j` at 0.
pub fn cell_transfer(cell: &CellPotential, energy: f64) -> SymplecticMatrix {
    transfer_between(cell, energy, 0.0, 1.0)
}

/// Transfer matrix across the cell at complex energy `z`.
pub fn cell_transfer_complex(cell: &CellPotential, z: Complex64) -> DMatrix<Complex64> {
    let n = cell.channels();
    let mut acc = DMatrix::identity(2 * n, 2 * n);
    for p in cell.pieces() {
        acc = piece_transfer_complex(p, z, p.len()) * acc;
    }
    acc
}

/// Transfer from 1 back to 0 at complex energy `z` (inverse of
/// [`cell_transfer_complex`]).
pub fn cell_transfer_complex_backward(cell: &CellPotential, z: Complex64) -> DMatrix<Complex64> {
    let n = cell.channels();
    let mut acc = DMatrix::identity(2 * n, 2 * n);
    for p in cell.pieces().iter().rev() {
        acc = piece_transfer_complex(p, z, -p.len()) * acc;
    }
    acc
}

/// Complex-energy transfer from local coordinate `a` to `b` inside one cell.
/// `b < a` propagates backwards.
pub fn transfer_between_complex(cell: &CellPotential, z: Complex64, a: f64, b: f64) -> DMatrix<Complex64> {
    let n = cell.channels();
    let mut acc = DMatrix::identity(2 * n, 2 * n);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut apply = |p: &Piece| {
        let l = hi.min(p.end) - lo.max(p.start);
        if l > 0.0 {
            let signed = if a <= b { l } else { -l };
            acc = piece_transfer_complex(p, z, signed) * &acc;
        }
    };
    if a <= b {
        cell.pieces().iter().for_each(&mut apply);
    } else {
        cell.pieces().iter().rev().for_each(&mut apply);
    }
    acc
}

/// Lexicographically ordered `p`-subsets of `0..n`.
pub fn combinations(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if p > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        out.push(idx.clone());
        let mut i = p;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - p {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Compound matrix of `p x p` minors of any square matrix, `1 <= p <= n`.
pub fn compound_matrix(m: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n || p == 0 || p > n {
        return Err(Error::Domain(format!("compound order {p} invalid for {}x{} matrix", n, m.ncols())));
    }
    let subsets = combinations(n, p);
    let k = subsets.len();
    let mut out = DMatrix::zeros(k, k);
    let mut sub = DMatrix::zeros(p, p);
    for (i, rows) in subsets.iter().enumerate() {
        for (j, cols) in subsets.iter().enumerate() {
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    sub[(a, b)] = m[(r, c)];
                }
            }
            out[(i, j)] = if p == 1 { sub[(0, 0)] } else { sub.clone().determinant() };
        }
    }
    Ok(out)
}

/// `∧^p M` for `1 <= p <= N`.
pub fn exterior_power(m: &SymplecticMatrix, p: usize) -> Result<ExteriorPower> {
    let n = m.channels();
    if p == 0 || p > n {
        return Err(Error::Domain(format!("exterior power order {p} outside 1..={n}")));
    }
    Ok(ExteriorPower { p, matrix: compound_matrix(m.matrix(), p)? })
}

/// `||Mᵀ J M - J||` in operator norm.
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let j = symplectic_form(m.nrows() / 2);
    op_norm(&(m.transpose() * &j * m - &j))
}
