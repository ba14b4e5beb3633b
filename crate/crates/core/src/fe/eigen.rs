//! Lowest eigenpairs of `K φ = ω² M φ` by subspace iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Factor, Layout};
use crate::model::SystemModel;

const DENSE_LIMIT: usize = 400;
const TOL: f64 = 1e-12;
const MAX_ITER: usize = 500;

/// Mass-normalized modes, ascending frequency.
#[derive(Debug, Clone)]
pub struct Modes {
    /// Squared circular frequencies ω² [rad²/s²].
    pub eigenvalues: Vec<f64>,
    /// One column per mode.
    pub shapes: DMatrix<f64>,
}

impl Modes {
    pub fn omegas(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect()
    }

    pub fn freqs_hz(&self) -> Vec<f64> {
        self.omegas()
            .iter()
            .map(|w| w / (2.0 * std::f64::consts::PI))
            .collect()
    }
}

/// Modes of a model; contact pairs are held closed.
pub fn eigenmodes(model: &SystemModel, count: usize) -> Result<Modes> {
    if model.nc() == 0 {
        return eigen_km(&model.stiffness, &model.mass, &model.layout, count);
    }
    let (closed, map) = model.with_closed_contacts()?;
    let modes = eigen_km(&closed.stiffness, &closed.mass, &closed.layout, count)?;
    let shapes = DMatrix::from_fn(model.n(), count, |i, c| modes.shapes[(map[i], c)]);
    Ok(Modes {
        eigenvalues: modes.eigenvalues,
        shapes,
    })
}

pub fn eigen_km(
    k: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    layout: &Layout,
    count: usize,
) -> Result<Modes> {
    let n = k.nrows();
    if count == 0 || count > n {
        return Err(Error::invalid(format!(
            "requested {count} modes of a {n}-coordinate model"
        )));
    }
    let mut modes = if n <= DENSE_LIMIT {
        dense(k, m, count)?
    } else {
        subspace(k, m, layout, count)?
    };
    for c in 0..count {
        let mut col = modes.shapes.column_mut(c);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(modes)
}

/// Solve `A v = λ B v` for small dense symmetric `A`, `B` (B positive
/// definite); columns of the result are B-orthonormal.
fn reduced_eigen(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let b = (&b + b.transpose()) * 0.5;
    let a = (&a + a.transpose()) * 0.5;
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::invalid("mass matrix is not positive definite"))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { pivot: 0 })?;
    let s = &linv * a * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let v = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |r, c| {
        eig.eigenvectors[(r, idx[c])]
    });
    let vecs = linv.transpose() * v;
    Ok((idx.iter().map(|&i| eig.eigenvalues[i]).collect(), vecs))
}

fn dense(k: &CsrMatrix<f64>, m: &CsrMatrix<f64>, count: usize) -> Result<Modes> {
    let (vals, vecs) = reduced_eigen(linalg::csr_to_dense(k), linalg::csr_to_dense(m))?;
    Ok(Modes {
        eigenvalues: vals[..count].to_vec(),
        shapes: vecs.columns(0, count).into_owned(),
    })
}

fn subspace(k: &CsrMatrix<f64>, m: &CsrMatrix<f64>, layout: &Layout, p: usize) -> Result<Modes> {
    let n = k.nrows();
    let q = (2 * p).min(p + 8).min(n);
    let kf = Factor::<f64>::assemble(layout, &[(k, 1.0)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let diag_m: Vec<f64> = (0..n)
        .map(|i| m.get_entry(i, i).map_or(0.0, |e| e.into_value()))
        .collect();
    let mut x = DMatrix::<f64>::from_fn(n, q, |i, c| {
        if c == 0 {
            diag_m[i]
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let mut prev = vec![f64::INFINITY; q];
    for _ in 0..MAX_ITER {
        let mut y = DMatrix::<f64>::zeros(n, q);
        let mut xb = DMatrix::<f64>::zeros(n, q);
        for c in 0..q {
            let mut col = vec![0.0; n];
            linalg::spmv(m, x.column(c).as_slice(), &mut col);
            y.set_column(c, &DVector::from_column_slice(&col));
            kf.solve_in_place(&mut col);
            xb.set_column(c, &DVector::from_column_slice(&col));
        }
        let kr = xb.transpose() * &y;
        let mut mxb = DMatrix::<f64>::zeros(n, q);
        for c in 0..q {
            let mut col = vec![0.0; n];
            linalg::spmv(m, xb.column(c).as_slice(), &mut col);
            mxb.set_column(c, &DVector::from_column_slice(&col));
        }
        let mr = xb.transpose() * mxb;
        let (vals, vecs) = reduced_eigen(kr, mr)?;
        x = xb * vecs;
        let done = (0..p).all(|i| (vals[i] - prev[i]).abs() <= TOL * vals[i].abs());
        prev = vals;
        if done {
            return Ok(Modes {
                eigenvalues: prev[..p].to_vec(),
                shapes: x.columns(0, p).into_owned(),
            });
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_ITER,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed–fixed spring–mass chain with closed-form frequencies.
    fn chain(n: usize) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let mt: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        (
            linalg::csr_from_triplets(n, &t),
            linalg::csr_from_triplets(n, &mt),
        )
    }

    fn exact(n: usize, k: usize) -> f64 {
        let s = (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
        4.0 * s * s
    }

    #[test]
    fn subspace_matches_closed_form() {
        let n = 600;
        let (k, m) = chain(n);
        let layout = Layout::from_pattern(n, n, &[&k, &m]);
        let modes = eigen_km(&k, &m, &layout, 4).unwrap();
        for i in 0..4 {
            let e = exact(n, i + 1);
            assert!((modes.eigenvalues[i] - e).abs() < 1e-9 * e);
            let phi = modes.shapes.column(i);
            assert!((phi.dot(&phi) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_path_matches_closed_form() {
        let n = 30;
        let (k, m) = chain(n);
        let modes = eigen_km(&k, &m, &Layout::dense(n), 5).unwrap();
        for i in 0..5 {
            assert!((modes.eigenvalues[i] - exact(n, i + 1)).abs() < 1e-12);
        }
        assert!(eigen_km(&k, &m, &Layout::dense(n), 31).is_err());
    }
}
