use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use super::dofs::{DofMap, UX};
use super::element::element_matrices;
use super::mesh::Mesh2D;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ContactPair;

/// Isotropic linear-elastic material. Young's modulus in MPa, density in
/// kg/m³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Material {
    pub youngs_modulus: f64,
    pub density: f64,
    pub poisson: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            youngs_modulus: 2.1e5,
            density: 7.3e3,
            poisson: 0.26,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let ok = self.youngs_modulus > 0.0
            && self.density > 0.0
            && (0.0..0.5).contains(&self.poisson)
            && self.youngs_modulus.is_finite()
            && self.density.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "material needs E > 0, ρ > 0 and 0 ≤ ν < 0.5",
            ))
        }
    }

    /// Density in the consistent mm–N–s system (t/mm³).
    pub fn density_mm(&self) -> f64 {
        self.density * 1e-12
    }
}

/// Column-major node order with every crack duplicate placed right after
/// its original; only nodes accepted by `keep` are listed.
pub fn column_major_order(mesh: &Mesh2D, keep: impl Fn(usize) -> bool) -> Vec<usize> {
    let (nx, ny) = mesh.grid_dims;
    let mut order = Vec::with_capacity(mesh.nodes.len());
    for i in 0..=nx {
        for j in 0..=ny {
            let node = mesh.grid_node(i, j);
            if keep(node) {
                order.push(node);
            }
            if let Some((_, dup)) = mesh.split_nodes.iter().find(|(o, _)| *o == node) {
                if keep(*dup) {
                    order.push(*dup);
                }
            }
        }
    }
    order
}

/// Stiffness and mass of the given elements in the coordinates of `map`.
pub fn assemble_elements(
    mesh: &Mesh2D,
    material: &Material,
    thickness: f64,
    elements: &[usize],
    map: &DofMap,
) -> Result<(CsrMatrix<f64>, CsrMatrix<f64>)> {
    material.validate()?;
    if !(thickness > 0.0) {
        return Err(Error::invalid("thickness must be positive"));
    }
    let mut kt = Vec::with_capacity(elements.len() * 64);
    let mut mt = Vec::with_capacity(elements.len() * 64);
    for &e in elements {
        let conn = mesh.elements[e];
        let coords = conn.map(|n| mesh.nodes[n]);
        if mesh.element_area(e) <= 0.0 {
            return Err(Error::invalid(format!("element {e} is inverted")));
        }
        let (ke, me) = element_matrices(
            &coords,
            material.youngs_modulus,
            material.poisson,
            material.density_mm(),
            thickness,
        );
        let dofs = map.element_dofs(&conn);
        for a in 0..8 {
            let Some(ia) = dofs[a] else { continue };
            for b in 0..8 {
                let Some(ib) = dofs[b] else { continue };
                kt.push((ia, ib, ke[(a, b)]));
                mt.push((ia, ib, me[(a, b)]));
            }
        }
    }
    Ok((
        linalg::csr_from_triplets(map.n(), &kt),
        linalg::csr_from_triplets(map.n(), &mt),
    ))
}

/// One penalty pair per split node, acting on the x-coordinates.
pub fn crack_contact_pairs(mesh: &Mesh2D, map: &DofMap, penalty: f64) -> Result<Vec<ContactPair>> {
    mesh.split_nodes
        .iter()
        .map(|&(orig, dup)| match (map.get(orig, UX), map.get(dup, UX)) {
            (Some(p), Some(m)) => Ok(ContactPair::new(p, m, penalty)),
            _ => Err(Error::invalid(
                "crack face node has a constrained x-coordinate",
            )),
        })
        .collect()
}
