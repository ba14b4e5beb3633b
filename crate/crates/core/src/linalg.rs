//! Dense/banded direct solvers shared by every model type.
//!
//! A system matrix is split into a leading banded block (the finite-element
//! part, numbered column by column so the half-bandwidth stays small) and a
//! trailing dense block (reduced coordinates from component mode synthesis).
//! The factorization is a block LU: banded LU with partial pivoting on the
//! leading block and a dense LU of the Schur complement on the trailing one.

use nalgebra::{ComplexField, DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Field scalar used by the solvers (`f64` or `C64`).
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

/// Block structure of a system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Layout {
    pub n: usize,
    /// Number of leading coordinates that form the banded block.
    pub n_band: usize,
    /// Half-bandwidth of the banded block.
    pub half_bandwidth: usize,
}

impl Layout {
    pub fn dense(n: usize) -> Self {
        Layout {
            n,
            n_band: 0,
            half_bandwidth: 0,
        }
    }

    /// Derive the half-bandwidth of the leading block from a sparsity pattern.
    pub fn from_pattern(n: usize, n_band: usize, mats: &[&CsrMatrix<f64>]) -> Self {
        let mut kb = 0usize;
        for m in mats {
            for (i, j, _) in m.triplet_iter() {
                if i < n_band && j < n_band {
                    kb = kb.max(i.abs_diff(j));
                }
            }
        }
        Layout {
            n,
            n_band,
            half_bandwidth: kb,
        }
    }

    pub fn n_dense(&self) -> usize {
        self.n - self.n_band
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored row-wise
/// with `kl` extra super-diagonals reserved for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "entry outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn factor(mut self) -> Result<BandLu<T>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut scale = 0.0f64;
        for v in &self.data {
            scale = scale.max(v.modulus());
        }
        let tiny = scale * f64::EPSILON * 1e-3;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].modulus();
            for i in k + 1..=last {
                let m = self.data[self.idx(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular { pivot: k });
            }
            piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == T::zero() {
                    continue;
                }
                let rk = self.idx(k, k + 1);
                let ri = self.idx(i, k + 1);
                let len = jmax - k;
                for t in 0..len {
                    let u = self.data[rk + t];
                    self.data[ri + t] -= l * u;
                }
            }
        }
        Ok(BandLu { band: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu<T> {
    band: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn n(&self) -> usize {
        self.band.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let a = &self.band;
        let n = a.n;
        let kl = a.kl;
        let reach = a.kl + a.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= a.data[a.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + reach).min(n - 1);
            let mut s = b[k];
            if jmax > k {
                let r = a.idx(k, k + 1);
                for (t, j) in (k + 1..=jmax).enumerate() {
                    s -= a.data[r + t] * b[j];
                }
            }
            b[k] = s / a.data[a.idx(k, k)];
        }
    }
}

/// Block LU of a [`Layout`]-structured matrix.
pub struct Factor<T: Scalar> {
    n1: usize,
    n2: usize,
    band: Option<BandLu<T>>,
    /// A11⁻¹ A12, column-major (n1 × n2).
    w: Vec<T>,
    /// A21, row-major (n2 × n1).
    a21: Vec<T>,
    schur: Option<nalgebra::linalg::LU<T, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<T: Scalar> Factor<T> {
    /// Factor `Σ coeff_k · A_k` for real sparse `A_k` sharing `layout`.
    pub fn assemble(layout: &Layout, terms: &[(&CsrMatrix<f64>, T)]) -> Result<Self> {
        let n = layout.n;
        let n1 = layout.n_band;
        let n2 = n - n1;
        let kb = layout.half_bandwidth;
        let mut band = (n1 > 0).then(|| BandMatrix::<T>::zeros(n1, kb, kb));
        let mut a12 = vec![T::zero(); n1 * n2];
        let mut a21 = vec![T::zero(); n2 * n1];
        let mut a22 = DMatrix::<T>::zeros(n2, n2);
        for (mat, coeff) in terms {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::invalid("matrix dimension does not match layout"));
            }
            for (i, j, v) in mat.triplet_iter() {
                let val = *coeff * T::from_real(*v);
                match (i < n1, j < n1) {
                    (true, true) => band.as_mut().unwrap().add(i, j, val),
                    (true, false) => a12[(j - n1) * n1 + i] += val,
                    (false, true) => a21[(i - n1) * n1 + j] += val,
                    (false, false) => a22[(i - n1, j - n1)] += val,
                }
            }
        }
        let band = band.map(|b| b.factor()).transpose()?;
        let mut w = a12;
        if let Some(lu) = &band {
            for c in 0..n2 {
                lu.solve_in_place(&mut w[c * n1..(c + 1) * n1]);
            }
        }
        let schur = if n2 > 0 {
            // S = A22 − A21 · W
            if n1 > 0 {
                for r in 0..n2 {
                    let row = &a21[r * n1..(r + 1) * n1];
                    let nz: Vec<(usize, T)> = row
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v != T::zero())
                        .map(|(k, v)| (k, *v))
                        .collect();
                    if nz.is_empty() {
                        continue;
                    }
                    for c in 0..n2 {
                        let col = &w[c * n1..(c + 1) * n1];
                        let mut s = T::zero();
                        for (k, v) in &nz {
                            s += *v * col[*k];
                        }
                        a22[(r, c)] -= s;
                    }
                }
            }
            let lu = a22.lu();
            if !lu.is_invertible() {
                return Err(Error::Singular { pivot: n1 });
            }
            let u = lu.u();
            let umax = u.diagonal().iter().fold(0.0f64, |m, v| m.max(v.modulus()));
            for (k, d) in u.diagonal().iter().enumerate() {
                if d.modulus() <= umax * f64::EPSILON * 1e-3 {
                    return Err(Error::Singular { pivot: n1 + k });
                }
            }
            Some(lu)
        } else {
            None
        };
        Ok(Factor {
            n1,
            n2,
            band,
            w,
            a21,
            schur,
        })
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n1, n2) = (self.n1, self.n2);
        debug_assert_eq!(b.len(), n1 + n2);
        let (b1, b2) = b.split_at_mut(n1);
        if let Some(lu) = &self.band {
            lu.solve_in_place(b1);
        }
        if let Some(lu) = &self.schur {
            let mut r = DVector::<T>::from_column_slice(b2);
            if n1 > 0 {
                for i in 0..n2 {
                    let row = &self.a21[i * n1..(i + 1) * n1];
                    let mut s = T::zero();
                    for (a, y) in row.iter().zip(b1.iter()) {
                        s += *a * *y;
                    }
                    r[i] -= s;
                }
            }
            lu.solve_mut(&mut r);
            b2.copy_from_slice(r.as_slice());
            if n1 > 0 {
                for c in 0..n2 {
                    let xc = b2[c];
                    if xc == T::zero() {
                        continue;
                    }
                    let col = &self.w[c * n1..(c + 1) * n1];
                    for (y, wv) in b1.iter_mut().zip(col) {
                        *y -= *wv * xc;
                    }
                }
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// y ← A·x for a real sparse `A` and scalar vectors.
pub fn spmv<T: Scalar>(a: &CsrMatrix<f64>, x: &[T], y: &mut [T]) {
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = T::zero();
        for k in offsets[i]..offsets[i + 1] {
            s += T::from_real(vals[k]) * x[cols[k]];
        }
        *yi = s;
    }
}

pub fn spmv_new<T: Scalar>(a: &CsrMatrix<f64>, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); a.nrows()];
    spmv(a, x, &mut y);
    y
}

pub fn csr_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for &(i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

pub fn csr_from_dense(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                coo.push(i, j, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn csr_to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        m[(i, j)] += *v;
    }
    m
}

/// `αA + βB` for matrices of equal shape.
pub fn csr_combine(
    alpha: f64,
    a: &CsrMatrix<f64>,
    beta: f64,
    b: &CsrMatrix<f64>,
) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        coo.push(i, j, alpha * v);
    }
    for (i, j, v) in b.triplet_iter() {
        coo.push(i, j, beta * v);
    }
    CsrMatrix::from(&coo)
}

/// Largest relative asymmetry `max|A_ij − A_ji| / max|A|`.
pub fn asymmetry(a: &CsrMatrix<f64>) -> f64 {
    let d = csr_to_dense(a);
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..d.nrows() {
        for j in 0..i {
            worst = worst.max((d[(i, j)] - d[(j, i)]).abs());
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        0.0
    }
}

pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
}
