//! Plane-stress finite-element beam with an optional edge crack.

pub mod assembly;
pub mod dofs;
pub mod eigen;
pub mod element;
pub mod mesh;

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

pub use assembly::Material;
pub use dofs::{DofMap, DofSpace, UX, UY};
pub use eigen::{eigenmodes, Modes};
pub use mesh::{build_mesh, CrackSpec, Mesh2D};

use crate::error::{Error, Result};
use crate::linalg::{self, Factor, C64};
use crate::model::{SensorRow, SystemModel};

/// Geometry, material and loading of the simply supported beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    /// mm
    pub length: f64,
    /// mm
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// Out-of-plane thickness, mm.
    pub thickness: f64,
    pub material: Material,
    /// Contact penalty as a multiple of `E·t·dy/dx`.
    pub penalty_factor: f64,
    /// Modal damping ratio of the first two bending modes.
    pub damping_ratio: f64,
    /// Static midspan deflection under the peak end moment, mm.
    pub static_deflection: f64,
    /// Node row of the two supports; `None` selects the mid-height row.
    pub support_row: Option<usize>,
    /// Element columns of the top-row strain gauges.
    pub sensor_columns: Vec<usize>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            length: 1200.0,
            height: 200.0,
            nx: 120,
            ny: 20,
            thickness: 1.0,
            material: Material::default(),
            penalty_factor: 100.0,
            damping_ratio: 0.002,
            static_deflection: 2.0,
            support_row: None,
            sensor_columns: vec![24, 48, 72, 96],
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.thickness > 0.0) || !(self.penalty_factor > 0.0) {
            return Err(Error::invalid(
                "thickness and penalty factor must be positive",
            ));
        }
        if !(self.damping_ratio >= 0.0) || !(self.static_deflection > 0.0) {
            return Err(Error::invalid(
                "damping ratio must be ≥ 0 and deflection > 0",
            ));
        }
        if self.support_row.is_some_and(|r| r > self.ny) {
            return Err(Error::invalid("support row outside the mesh"));
        }
        if self.nx < 2 {
            return Err(Error::invalid("beam needs at least two element columns"));
        }
        if let Some(c) = self.sensor_columns.iter().find(|&&c| c >= self.nx) {
            return Err(Error::invalid(format!(
                "sensor column {c} outside the mesh"
            )));
        }
        Ok(())
    }

    pub fn support_row(&self) -> usize {
        self.support_row.unwrap_or(self.ny / 2)
    }

    /// Default penalty stiffness per contact pair, N/mm.
    pub fn penalty(&self) -> f64 {
        let dx = self.length / self.nx as f64;
        let dy = self.height / self.ny as f64;
        self.penalty_factor * self.material.youngs_modulus * self.thickness * dy / dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Full,
    Rb,
    Sub,
}

/// A (possibly reduced) beam model ready for analysis: system matrices, the
/// map from mesh nodes to model coordinates and the strain-gauge rows.
#[derive(Debug, Clone)]
pub struct Structure {
    pub kind: ModelKind,
    pub system: SystemModel,
    pub space: DofSpace,
    pub sensors: Vec<SensorRow>,
    pub crack: Option<CrackSpec>,
    pub mesh: Mesh2D,
}

impl Structure {
    pub fn row(&self, node: usize, dir: usize) -> Result<SensorRow> {
        self.space.row(node, dir)
    }
}

/// Beam with its calibrated damping and load scale.
#[derive(Debug, Clone)]
pub struct Beam {
    pub config: BeamConfig,
    pub mesh: Mesh2D,
    /// Rayleigh coefficients `(α, β)` of `C = αM + βK`.
    pub rayleigh: (f64, f64),
    /// Circular frequencies of the first two bending modes of the pristine beam.
    pub bending_omegas: (f64, f64),
    /// Multiplier applied to the unit end-traction pattern.
    pub load_scale: f64,
}

impl Beam {
    pub fn new(config: BeamConfig) -> Result<Self> {
        config.validate()?;
        let mesh = build_mesh(config.length, config.height, config.nx, config.ny)?;
        let mut beam = Beam {
            config,
            mesh,
            rayleigh: (0.0, 0.0),
            bending_omegas: (0.0, 0.0),
            load_scale: 1.0,
        };
        let (k, m, map) = beam.healthy_matrices()?;
        let layout = linalg::Layout::from_pattern(map.n(), map.n(), &[&k, &m]);
        let modes = eigen::eigen_km(&k, &m, &layout, 8.min(map.n()))?;
        let omegas = modes.omegas();
        let bending: Vec<f64> = (0..omegas.len())
            .filter(|&c| uy_share(&beam.mesh, &map, modes.shapes.column(c).as_slice()) > 0.5)
            .map(|c| omegas[c])
            .collect();
        if bending.len() < 2 {
            return Err(Error::invalid("could not identify two bending modes"));
        }
        let (w1, w2) = (bending[0], bending[1]);
        let z = beam.config.damping_ratio;
        beam.rayleigh = (2.0 * z * w1 * w2 / (w1 + w2), 2.0 * z / (w1 + w2));
        beam.bending_omegas = (w1, w2);

        let kf = Factor::<f64>::assemble(&layout, &[(&k, 1.0)])?;
        let mut u = vec![0.0; map.n()];
        for (node, dir, v) in beam.unit_load() {
            if let Some(i) = map.get(node, dir) {
                u[i] += 2.0 * v;
            }
        }
        kf.solve_in_place(&mut u);
        let mid = beam.midspan_node();
        let w = map
            .get(mid, UY)
            .map(|i| u[i].abs())
            .ok_or_else(|| Error::invalid("midspan node is constrained"))?;
        if !(w > 0.0) {
            return Err(Error::invalid("end moments produce no midspan deflection"));
        }
        beam.load_scale = beam.config.static_deflection / w;
        Ok(beam)
    }

    pub fn nx(&self) -> usize {
        self.config.nx
    }

    pub fn ny(&self) -> usize {
        self.config.ny
    }

    pub fn penalty(&self) -> f64 {
        self.config.penalty()
    }

    pub fn midspan_node(&self) -> usize {
        self.mesh.grid_node(self.nx() / 2, self.ny() / 2)
    }

    /// `(node, direction)` pairs held fixed by the supports.
    pub fn fixed_dofs(&self) -> Vec<(usize, usize)> {
        let r = self.config.support_row();
        let left = self.mesh.grid_node(0, r);
        let right = self.mesh.grid_node(self.nx(), r);
        vec![(left, UX), (left, UY), (right, UY)]
    }

    /// Consistent nodal loads of a linear end traction `±(y − H/2)/(H/2)`,
    /// i.e. equal and opposite end moments.
    pub fn unit_load(&self) -> Vec<(usize, usize, f64)> {
        let (nx, ny) = (self.nx(), self.ny());
        let h = self.config.height;
        let dy = h / ny as f64;
        let t = self.config.thickness;
        let s = |j: usize| (j as f64 * dy - h / 2.0) / (h / 2.0);
        let mut f = vec![0.0; ny + 1];
        for j in 0..ny {
            let (a, b) = (s(j), s(j + 1));
            f[j] += t * dy * (2.0 * a + b) / 6.0;
            f[j + 1] += t * dy * (a + 2.0 * b) / 6.0;
        }
        let mut out = Vec::new();
        for (j, &v) in f.iter().enumerate() {
            if v.abs() > 1e-12 * t * dy {
                out.push((self.mesh.grid_node(0, j), UX, -v));
                out.push((self.mesh.grid_node(nx, j), UX, v));
            }
        }
        out
    }

    /// Calibrated nodal load pattern q̂.
    pub fn load(&self) -> Vec<(usize, usize, f64)> {
        self.unit_load()
            .into_iter()
            .map(|(n, d, v)| (n, d, v * self.load_scale))
            .collect()
    }

    /// Nodes carrying a nonzero load component.
    pub fn forcing_nodes(&self) -> Vec<(usize, usize)> {
        self.unit_load().iter().map(|&(n, d, _)| (n, d)).collect()
    }

    pub fn sensor_elements(&self) -> Vec<usize> {
        self.config
            .sensor_columns
            .iter()
            .map(|&c| self.mesh.element_id(c, self.ny() - 1))
            .collect()
    }

    /// `εxx` at the centroid of each sensor element as nodal coefficients.
    pub fn sensor_nodal_rows(&self, mesh: &Mesh2D) -> Vec<Vec<(usize, usize, f64)>> {
        self.sensor_elements()
            .into_iter()
            .map(|e| {
                let conn = mesh.elements[e];
                let w = element::centroid_exx(&conn.map(|n| mesh.nodes[n]));
                (0..4).map(|k| (conn[k], UX, w[k])).collect()
            })
            .collect()
    }

    /// Node → coordinate map of the full model (column-major numbering,
    /// crack duplicates right after their originals, y tied across the crack).
    pub fn dof_map(&self, mesh: &Mesh2D) -> Result<DofMap> {
        let order = assembly::column_major_order(mesh, |_| true);
        let ties: Vec<(usize, usize)> = mesh.split_nodes.iter().map(|&(o, d)| (d, o)).collect();
        DofMap::build(mesh.nodes.len(), &order, &self.fixed_dofs(), &ties)
    }

    fn healthy_matrices(&self) -> Result<(CsrMatrix<f64>, CsrMatrix<f64>, DofMap)> {
        let map = self.dof_map(&self.mesh)?;
        let all: Vec<usize> = (0..self.mesh.elements.len()).collect();
        let (k, m) = assembly::assemble_elements(
            &self.mesh,
            &self.config.material,
            self.config.thickness,
            &all,
            &map,
        )?;
        Ok((k, m, map))
    }

    pub fn cracked_mesh(&self, crack: Option<&CrackSpec>) -> Result<Mesh2D> {
        match crack {
            Some(c) => self.mesh.with_crack(c),
            None => Ok(self.mesh.clone()),
        }
    }

    pub fn damping(&self, m: &CsrMatrix<f64>, k: &CsrMatrix<f64>) -> CsrMatrix<f64> {
        linalg::csr_combine(self.rayleigh.0, m, self.rayleigh.1, k)
    }

    /// Assemble a model on coordinates given by `space` from `K`, `M`.
    pub fn finish(
        &self,
        kind: ModelKind,
        k: CsrMatrix<f64>,
        m: CsrMatrix<f64>,
        pairs: Vec<crate::model::ContactPair>,
        space: DofSpace,
        n_band: usize,
        crack: Option<CrackSpec>,
        mesh: Mesh2D,
    ) -> Result<Structure> {
        let n = k.nrows();
        let c = self.damping(&m, &k);
        let f = space.project(&self.load())?;
        let mut force = vec![C64::new(0.0, 0.0); n];
        for (i, v) in f.entries {
            force[i] = C64::new(v, 0.0);
        }
        let sensors = self
            .sensor_nodal_rows(&mesh)
            .iter()
            .map(|r| space.project(r))
            .collect::<Result<Vec<_>>>()?;
        let system = SystemModel::new(m, c, k, pairs, force, n_band)?;
        Ok(Structure {
            kind,
            system,
            space,
            sensors,
            crack,
            mesh,
        })
    }

    /// Full-order model, optionally cracked.
    pub fn structure(&self, crack: Option<&CrackSpec>) -> Result<Structure> {
        let mesh = self.cracked_mesh(crack)?;
        let map = self.dof_map(&mesh)?;
        let all: Vec<usize> = (0..mesh.elements.len()).collect();
        let (k, m) = assembly::assemble_elements(
            &mesh,
            &self.config.material,
            self.config.thickness,
            &all,
            &map,
        )?;
        let pairs = assembly::crack_contact_pairs(&mesh, &map, self.penalty())?;
        let n = map.n();
        self.finish(
            ModelKind::Full,
            k,
            m,
            pairs,
            DofSpace::full(map),
            n,
            crack.copied(),
            mesh,
        )
    }
}

/// Fraction of `Σφ²` carried by y-components.
pub fn uy_share(mesh: &Mesh2D, map: &DofMap, phi: &[f64]) -> f64 {
    let mut is_y = vec![false; map.n()];
    for node in 0..mesh.nodes.len() {
        if let Some(i) = map.get(node, UY) {
            is_y[i] = true;
        }
    }
    let total: f64 = phi.iter().map(|v| v * v).sum();
    let y: f64 = phi
        .iter()
        .zip(&is_y)
        .filter(|(_, y)| **y)
        .map(|(v, _)| v * v)
        .sum();
    y / total
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> BeamConfig {
        BeamConfig {
            length: 600.0,
            height: 100.0,
            nx: 24,
            ny: 4,
            sensor_columns: vec![6, 12, 18],
            ..BeamConfig::default()
        }
    }

    #[test]
    fn load_is_a_pure_moment() {
        let beam = Beam::new(small_config()).unwrap();
        let load = beam.unit_load();
        assert_eq!(load.len(), 8);
        let fx: f64 = load.iter().map(|l| l.2).sum();
        assert!(fx.abs() < 1e-12);
        let left_moment: f64 = load
            .iter()
            .filter(|l| beam.mesh.node_ij(l.0).0 == 0)
            .map(|l| l.2 * (beam.mesh.nodes[l.0][1] - 50.0))
            .sum();
        // ∫ s(y) (y − H/2) dy over the face = H²/6 for unit edge traction
        assert!((left_moment + 100.0 * 100.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn cracked_structure_has_pairs_and_sensors() {
        let beam = Beam::new(small_config()).unwrap();
        let healthy = beam.structure(None).unwrap();
        let cfg = small_config();
        let crack = CrackSpec::new(10, 50);
        let s = beam.structure(Some(&crack)).unwrap();
        assert_eq!(s.system.nc(), 2);
        assert_eq!(s.system.n(), healthy.system.n() + 2);
        assert_eq!(s.sensors.len(), cfg.sensor_columns.len());
        assert!(linalg::asymmetry(&s.system.stiffness) < 1e-12);
        assert!(linalg::asymmetry(&s.system.mass) < 1e-12);
    }
}
