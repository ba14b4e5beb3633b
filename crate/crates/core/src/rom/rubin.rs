use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fe::eigen::eigen_km;
use crate::linalg::{self, Factor, Layout, C64};
use crate::model::SystemModel;

/// Rubin basis `x = T [x_R; η]`: retained coordinates first, in the order
/// given, followed by the modal coordinates.
#[derive(Debug, Clone)]
pub struct RubinBasis {
    pub t: DMatrix<f64>,
    pub k_r: DMatrix<f64>,
    pub m_r: DMatrix<f64>,
    pub retained: Vec<usize>,
    pub modal_count: usize,
}

impl RubinBasis {
    pub fn n_reduced(&self) -> usize {
        self.t.ncols()
    }
}

/// `TᵀAT` for sparse `A`.
pub fn project(a: &CsrMatrix<f64>, t: &DMatrix<f64>) -> DMatrix<f64> {
    let mut at = DMatrix::<f64>::zeros(t.nrows(), t.ncols());
    for c in 0..t.ncols() {
        let col: Vec<f64> = t.column(c).iter().copied().collect();
        let y: Vec<f64> = linalg::spmv_new(a, &col);
        at.column_mut(c).copy_from_slice(&y);
    }
    let mut r = t.transpose() * at;
    symmetrize(&mut r);
    r
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Free-interface normal modes plus residual-flexibility attachment modes,
/// transformed so that the retained coordinates appear explicitly.
///
/// With `Ψ = K⁻¹E_R − ΦΛ⁻¹Φ_Rᵀ` the basis is
/// `T = [Ψ Ψ_RR⁻¹ | Φ − Ψ Ψ_RR⁻¹ Φ_R]`.
pub fn reduce_rubin(
    k: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    layout: &Layout,
    retained: &[usize],
    n_modes: usize,
) -> Result<RubinBasis> {
    let n = k.nrows();
    if n_modes == 0 {
        return Err(Error::invalid("at least one mode is required"));
    }
    let mut seen = vec![false; n];
    for &r in retained {
        if r >= n || seen[r] {
            return Err(Error::invalid(
                "retained set repeats or exceeds the model coordinates",
            ));
        }
        seen[r] = true;
    }
    let nr = retained.len();
    if nr == n {
        let t = DMatrix::from_fn(n, n, |i, j| if retained[j] == i { 1.0 } else { 0.0 });
        return Ok(RubinBasis {
            k_r: project(k, &t),
            m_r: project(m, &t),
            t,
            retained: retained.to_vec(),
            modal_count: 0,
        });
    }
    if nr + n_modes > n {
        return Err(Error::invalid(format!(
            "{nr} retained coordinates and {n_modes} modes exceed the {n} model coordinates"
        )));
    }
    let modes = eigen_km(k, m, layout, n_modes)?;
    let phi = &modes.shapes;
    let kf = Factor::<f64>::assemble(layout, &[(k, 1.0)])?;
    let mut psi = DMatrix::<f64>::zeros(n, nr);
    for (c, &r) in retained.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[r] = 1.0;
        kf.solve_in_place(&mut e);
        for i in 0..n {
            let mut s = e[i];
            for (md, lam) in modes.eigenvalues.iter().enumerate() {
                s -= phi[(i, md)] * phi[(r, md)] / lam;
            }
            psi[(i, c)] = s;
        }
    }
    let mut psi_rr = DMatrix::from_fn(nr, nr, |i, j| psi[(retained[i], j)]);
    symmetrize(&mut psi_rr);
    let phi_r = DMatrix::from_fn(nr, n_modes, |i, j| phi[(retained[i], j)]);
    let lu = psi_rr.clone().lu();
    let singular = || Error::invalid("retained set is redundant: residual flexibility is singular");
    // Ψ_RR⁻¹ applied from the right: (Ψ_RR⁻¹ Ψᵀ)ᵀ since Ψ_RR is symmetric.
    let a = lu.solve(&psi.transpose()).ok_or_else(singular)?.transpose();
    let scale = psi_rr.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let dmin = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |s, v| s.min(v.abs()));
    if !(dmin > scale * 1e-13) {
        return Err(singular());
    }
    let mut t = DMatrix::<f64>::zeros(n, nr + n_modes);
    t.view_mut((0, 0), (n, nr)).copy_from(&a);
    let modal = phi - &a * &phi_r;
    t.view_mut((0, nr), (n, n_modes)).copy_from(&modal);
    for (c, &r) in retained.iter().enumerate() {
        for j in 0..nr + n_modes {
            t[(r, j)] = if j == c { 1.0 } else { 0.0 };
        }
    }
    Ok(RubinBasis {
        k_r: project(k, &t),
        m_r: project(m, &t),
        t,
        retained: retained.to_vec(),
        modal_count: n_modes,
    })
}

/// Rubin reduction of a whole system model. Contact coordinates and loaded
/// coordinates must be retained.
pub fn reduce_system(
    model: &SystemModel,
    retained: &[usize],
    n_modes: usize,
) -> Result<(SystemModel, RubinBasis)> {
    let basis = reduce_rubin(
        &model.stiffness,
        &model.mass,
        &model.layout,
        retained,
        n_modes,
    )?;
    let pos = |dof: usize| retained.iter().position(|&r| r == dof);
    let mut pairs = Vec::with_capacity(model.nc());
    for p in &model.contact_pairs {
        let plus = pos(p.dof_plus);
        let minus = p.dof_minus.map(pos);
        match (plus, minus) {
            (Some(a), None) => pairs.push(crate::model::ContactPair {
                dof_plus: a,
                dof_minus: None,
                ..*p
            }),
            (Some(a), Some(Some(b))) => pairs.push(crate::model::ContactPair {
                dof_plus: a,
                dof_minus: Some(b),
                ..*p
            }),
            _ => return Err(Error::invalid("contact coordinates must be retained")),
        }
    }
    let q = model.force_pattern.clone();
    let mut qr = vec![C64::new(0.0, 0.0); basis.n_reduced()];
    for (i, v) in q.iter().enumerate() {
        if *v == C64::new(0.0, 0.0) {
            continue;
        }
        if pos(i).is_none() {
            return Err(Error::invalid("loaded coordinates must be retained"));
        }
        for (j, qj) in qr.iter_mut().enumerate() {
            *qj += *v * basis.t[(i, j)];
        }
    }
    let c_r = project(&model.damping, &basis.t);
    let nr = basis.n_reduced();
    let mut reduced = SystemModel::new(
        linalg::csr_from_dense(&basis.m_r),
        linalg::csr_from_dense(&c_r),
        linalg::csr_from_dense(&basis.k_r),
        pairs,
        qr,
        0,
    )?;
    reduced.force_amplitude = model.force_amplitude;
    reduced.layout = Layout::dense(nr);
    Ok((reduced, basis))
}
