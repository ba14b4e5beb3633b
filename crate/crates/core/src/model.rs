//! Second-order structural system `M ẍ + C ẋ + K x + f(x) = q(t)` with
//! node-to-node unilateral contact pairs.

use std::collections::HashMap;

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Layout, C64};

/// Penalty contact between two coordinates (or one coordinate and ground).
///
/// The relative displacement is `x[dof_plus] − x[dof_minus]`; the pair
/// transmits `stiffness · x_rel` whenever `x_rel ≥ gap` and nothing otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub dof_plus: usize,
    pub dof_minus: Option<usize>,
    pub stiffness: f64,
    #[serde(default)]
    pub gap: f64,
}

impl ContactPair {
    pub fn new(dof_plus: usize, dof_minus: usize, stiffness: f64) -> Self {
        ContactPair {
            dof_plus,
            dof_minus: Some(dof_minus),
            stiffness,
            gap: 0.0,
        }
    }

    #[inline]
    pub fn relative<T: linalg::Scalar>(&self, x: &[T]) -> T {
        match self.dof_minus {
            Some(m) => x[self.dof_plus] - x[m],
            None => x[self.dof_plus],
        }
    }

    #[inline]
    pub fn is_closed(&self, x_rel: f64) -> bool {
        x_rel >= self.gap
    }

    #[inline]
    pub fn force(&self, x_rel: f64) -> f64 {
        if self.is_closed(x_rel) {
            self.stiffness * x_rel
        } else {
            0.0
        }
    }

    /// Derivative of [`force`](Self::force); a sample sitting exactly on the
    /// switching point counts as closed.
    #[inline]
    pub fn tangent(&self, x_rel: f64) -> f64 {
        if self.is_closed(x_rel) {
            self.stiffness
        } else {
            0.0
        }
    }

    /// Scatter a pair force into a full vector with the signed incidence.
    #[inline]
    pub fn scatter<T: linalg::Scalar>(&self, force: T, out: &mut [T]) {
        out[self.dof_plus] += force;
        if let Some(m) = self.dof_minus {
            out[m] -= force;
        }
    }
}

/// Linear output `y = Σ c_k x_k` over model coordinates (a strain gauge or a
/// displacement pick-off).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorRow {
    pub entries: Vec<(usize, f64)>,
}

impl SensorRow {
    pub fn new(entries: Vec<(usize, f64)>) -> Self {
        SensorRow { entries }
    }

    pub fn unit(index: usize) -> Self {
        SensorRow {
            entries: vec![(index, 1.0)],
        }
    }

    #[inline]
    pub fn dot<T: linalg::Scalar>(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for &(i, c) in &self.entries {
            s += x[i] * T::from_real(c);
        }
        s
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(i, c) in &self.entries {
            v[i] += c;
        }
        v
    }

    /// Merge duplicate indices and drop exact zeros.
    pub fn compacted(mut self) -> Self {
        self.entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len());
        for (i, c) in self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        SensorRow { entries: out }
    }
}

/// Index sets `(c⁺, c⁻, r)` of a model with contact pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofPartition {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub rest: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub mass: CsrMatrix<f64>,
    pub damping: CsrMatrix<f64>,
    pub stiffness: CsrMatrix<f64>,
    pub contact_pairs: Vec<ContactPair>,
    /// Spatial pattern of the fundamental forcing coefficient q̂, so that
    /// `q(t) = a·q̂ e^{iωt} + c.c.` with `a = force_amplitude`.
    pub force_pattern: Vec<C64>,
    pub force_amplitude: f64,
    pub layout: Layout,
}

impl SystemModel {
    /// Build a model whose first `n_band` coordinates form a banded block.
    pub fn new(
        mass: CsrMatrix<f64>,
        damping: CsrMatrix<f64>,
        stiffness: CsrMatrix<f64>,
        contact_pairs: Vec<ContactPair>,
        force_pattern: Vec<C64>,
        n_band: usize,
    ) -> Result<Self> {
        let n = stiffness.nrows();
        for (name, m) in [
            ("mass", &mass),
            ("damping", &damping),
            ("stiffness", &stiffness),
        ] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::invalid(format!("{name} matrix is not {n}×{n}")));
            }
        }
        if force_pattern.len() != n {
            return Err(Error::invalid(
                "force pattern length differs from DoF count",
            ));
        }
        if n_band > n {
            return Err(Error::invalid("banded block larger than the model"));
        }
        for p in &contact_pairs {
            let bad = p.dof_plus >= n || p.dof_minus.is_some_and(|m| m >= n || m == p.dof_plus);
            if bad {
                return Err(Error::invalid(
                    "contact pair refers to an invalid coordinate",
                ));
            }
            if !(p.stiffness > 0.0) {
                return Err(Error::invalid("contact penalty must be positive"));
            }
        }
        let layout = Layout::from_pattern(n, n_band, &[&mass, &damping, &stiffness]);
        Ok(SystemModel {
            mass,
            damping,
            stiffness,
            contact_pairs,
            force_pattern,
            force_amplitude: 1.0,
            layout,
        })
    }

    pub fn n(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn nc(&self) -> usize {
        self.contact_pairs.len()
    }

    /// q̂ including the amplitude.
    pub fn q_hat(&self) -> Vec<C64> {
        self.force_pattern
            .iter()
            .map(|v| v * self.force_amplitude)
            .collect()
    }

    pub fn with_force_amplitude(&self, amplitude: f64) -> Self {
        let mut m = self.clone();
        m.force_amplitude = amplitude;
        m
    }

    pub fn without_contacts(&self) -> Self {
        let mut m = self.clone();
        m.contact_pairs.clear();
        m
    }

    pub fn partition(&self) -> DofPartition {
        let plus: Vec<usize> = self.contact_pairs.iter().map(|p| p.dof_plus).collect();
        let minus: Vec<usize> = self
            .contact_pairs
            .iter()
            .filter_map(|p| p.dof_minus)
            .collect();
        let mut used = vec![false; self.n()];
        for &i in plus.iter().chain(&minus) {
            used[i] = true;
        }
        let rest = (0..self.n()).filter(|&i| !used[i]).collect();
        DofPartition { plus, minus, rest }
    }

    /// Enforce `x⁺ = x⁻` on every pair by merging the minus coordinate into
    /// the plus coordinate. Returns the constrained model (without contacts)
    /// and the map from old to new coordinate indices.
    pub fn with_closed_contacts(&self) -> Result<(SystemModel, Vec<usize>)> {
        let n = self.n();
        let mut merge: HashMap<usize, usize> = HashMap::new();
        for p in &self.contact_pairs {
            if let Some(m) = p.dof_minus {
                merge.insert(m, p.dof_plus);
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut next = 0;
        for (i, slot) in map.iter_mut().enumerate() {
            if !merge.contains_key(&i) {
                *slot = next;
                next += 1;
            }
        }
        for (m, p) in &merge {
            map[*m] = map[*p];
        }
        let n_new = next;
        let remap = |a: &CsrMatrix<f64>| {
            let t: Vec<(usize, usize, f64)> = a
                .triplet_iter()
                .map(|(i, j, v)| (map[i], map[j], *v))
                .collect();
            linalg::csr_from_triplets(n_new, &t)
        };
        let mut force = vec![C64::new(0.0, 0.0); n_new];
        for (i, v) in self.force_pattern.iter().enumerate() {
            force[map[i]] += v;
        }
        let n_band = (0..self.layout.n_band)
            .filter(|i| !merge.contains_key(i))
            .count();
        let mut model = SystemModel::new(
            remap(&self.mass),
            remap(&self.damping),
            remap(&self.stiffness),
            Vec::new(),
            force,
            n_band,
        )?;
        model.force_amplitude = self.force_amplitude;
        Ok((model, map))
    }

    /// Dynamic stiffness `D_p = −(pω)²M + ipωC + K` assembled and factored.
    pub fn factor_dynamic_stiffness(&self, omega: f64, p: usize) -> Result<linalg::Factor<C64>> {
        let w = p as f64 * omega;
        linalg::Factor::assemble(
            &self.layout,
            &[
                (&self.mass, C64::new(-w * w, 0.0)),
                (&self.damping, C64::new(0.0, w)),
                (&self.stiffness, C64::new(1.0, 0.0)),
            ],
        )
    }

    /// `D_p · x` without forming `D_p`.
    pub fn apply_dynamic_stiffness(&self, omega: f64, p: usize, x: &[C64]) -> Vec<C64> {
        let w = p as f64 * omega;
        let m = linalg::spmv_new(&self.mass, x);
        let c = linalg::spmv_new(&self.damping, x);
        let k = linalg::spmv_new(&self.stiffness, x);
        (0..x.len())
            .map(|i| k[i] - m[i] * (w * w) + c[i] * C64::new(0.0, w))
            .collect()
    }
}

/// Dense `D_p` (small models and tests).
pub fn dynamic_stiffness(model: &SystemModel, omega: f64, p: usize) -> nalgebra::DMatrix<C64> {
    let w = p as f64 * omega;
    let n = model.n();
    let mut d = nalgebra::DMatrix::<C64>::zeros(n, n);
    for (i, j, v) in model.stiffness.triplet_iter() {
        d[(i, j)] += C64::new(*v, 0.0);
    }
    for (i, j, v) in model.mass.triplet_iter() {
        d[(i, j)] += C64::new(-w * w * v, 0.0);
    }
    for (i, j, v) in model.damping.triplet_iter() {
        d[(i, j)] += C64::new(0.0, w * v);
    }
    d
}

/// Single-DoF oscillator `m ẍ + c ẋ + k x = q` as a one-coordinate model.
pub fn scalar_model(m: f64, c: f64, k: f64) -> Result<SystemModel> {
    let one = |v: f64| linalg::csr_from_triplets(1, &[(0, 0, v)]);
    SystemModel::new(
        one(m),
        one(c),
        one(k),
        Vec::new(),
        vec![C64::new(1.0, 0.0)],
        0,
    )
}
