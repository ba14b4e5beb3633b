//! Reduced-order beam models: a global Rubin reduction (RB) and a
//! substructured model (SUB) whose crack-free part is reduced once.

pub mod cache;
pub mod rubin;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cache::BReduction;
pub use rubin::{reduce_rubin, reduce_system, RubinBasis};

use crate::error::{Error, Result};
use crate::fe::dofs::{Basis, DofMap, DofSpace, UX, UY};
use crate::fe::mesh::Mesh2D;
use crate::fe::{assembly, Beam, CrackSpec, ModelKind, Structure};
use crate::linalg::{self, Layout};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildTiming {
    /// Crack-independent work, seconds.
    pub offline_s: f64,
    /// Per-crack work, seconds.
    pub online_s: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub structure: Structure,
    /// Physical-to-reduced map: rows of the physical mesh DoFs in `t`.
    pub t: Arc<DMatrix<f64>>,
    pub modal_count: usize,
    pub timing: BuildTiming,
}

impl ReducedModel {
    pub fn kind(&self) -> ModelKind {
        self.structure.kind
    }

    pub fn n(&self) -> usize {
        self.structure.system.n()
    }
}

fn retained_forcing(beam: &Beam, map: &DofMap) -> Result<Vec<usize>> {
    beam.forcing_nodes()
        .into_iter()
        .map(|(node, dir)| {
            map.get(node, dir)
                .ok_or_else(|| Error::invalid("loaded coordinate is constrained"))
        })
        .collect()
}

/// Global Rubin reduction retaining crack-face and forcing coordinates.
pub fn rb_model(beam: &Beam, crack: Option<&CrackSpec>, n_modes: usize) -> Result<ReducedModel> {
    let start = Instant::now();
    let full = beam.structure(crack)?;
    let mut retained = Vec::new();
    for p in &full.system.contact_pairs {
        retained.push(p.dof_plus);
        retained.extend(p.dof_minus);
    }
    retained.extend(retained_forcing(beam, &full.space.direct)?);
    let (reduced, basis) = reduce_system(&full.system, &retained, n_modes)?;
    let nr = basis.n_reduced();
    let t = Arc::new(basis.t);
    let empty = DofMap::build(full.mesh.nodes.len(), &[], &[], &[])?;
    let space = DofSpace {
        direct: empty,
        basis: Some(Basis {
            map: full.space.direct.clone(),
            t: t.clone(),
            cols: (0..nr).collect(),
        }),
    };
    let k = linalg::csr_from_dense(&basis.k_r);
    let m = linalg::csr_from_dense(&basis.m_r);
    let mut structure = beam.finish(
        ModelKind::Rb,
        k,
        m,
        reduced.contact_pairs,
        space,
        0,
        crack.copied(),
        full.mesh,
    )?;
    structure.system.layout = Layout::dense(nr);
    Ok(ReducedModel {
        structure,
        t,
        modal_count: basis.modal_count,
        timing: BuildTiming {
            offline_s: 0.0,
            online_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Region A: the top `rows` element rows over element columns
/// `first_col..last_col`. Everything else is region B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstructureSplit {
    pub rows: usize,
    pub first_col: usize,
    pub last_col: usize,
}

impl Default for SubstructureSplit {
    fn default() -> Self {
        SubstructureSplit {
            rows: 3,
            first_col: 3,
            last_col: 117,
        }
    }
}

impl SubstructureSplit {
    pub fn validate(&self, nx: usize, ny: usize) -> Result<()> {
        if self.rows == 0
            || self.rows >= ny
            || self.first_col == 0
            || self.last_col >= nx
            || self.first_col + 2 > self.last_col
        {
            return Err(Error::invalid(format!(
                "region A ({} rows, columns {}..{}) must be a proper interior top band of the {nx}×{ny} mesh",
                self.rows, self.first_col, self.last_col
            )));
        }
        Ok(())
    }

    pub fn element_in_a(&self, ei: usize, ej: usize, ny: usize) -> bool {
        ej + self.rows >= ny && ei >= self.first_col && ei < self.last_col
    }

    /// Grid node strictly inside A (not on the interface).
    pub fn node_internal(&self, i: usize, j: usize, ny: usize) -> bool {
        j > ny - self.rows && i > self.first_col && i < self.last_col
    }

    /// Grid node shared by A and B.
    pub fn node_interface(&self, i: usize, j: usize, ny: usize) -> bool {
        let base = ny - self.rows;
        let on_bottom = j == base && i >= self.first_col && i <= self.last_col;
        let on_side = j > base && (i == self.first_col || i == self.last_col);
        on_bottom || on_side
    }

    /// Crack lines admissible inside A.
    pub fn crack_lines(&self) -> std::ops::RangeInclusive<usize> {
        self.first_col + 1..=self.last_col - 1
    }

    pub fn admits(&self, crack: &CrackSpec, ny: usize) -> Result<()> {
        let d = crack.depth_elems(ny)?;
        if !self.crack_lines().contains(&crack.location_index) || d > self.rows {
            return Err(Error::invalid(format!(
                "crack at line {} with depth {} elements touches the substructure interface",
                crack.location_index, d
            )));
        }
        Ok(())
    }
}

/// Node sets of the split on the pristine grid.
struct Regions {
    /// Column-major grid nodes strictly inside A.
    internal: Vec<usize>,
    /// Column-major interface nodes.
    interface: Vec<usize>,
    /// Column-major B nodes, interface included.
    b_nodes: Vec<usize>,
    a_elems: Vec<usize>,
    b_elems: Vec<usize>,
}

fn regions(mesh: &Mesh2D, split: &SubstructureSplit) -> Regions {
    let (nx, ny) = mesh.grid_dims;
    let mut r = Regions {
        internal: Vec::new(),
        interface: Vec::new(),
        b_nodes: Vec::new(),
        a_elems: Vec::new(),
        b_elems: Vec::new(),
    };
    for i in 0..=nx {
        for j in 0..=ny {
            let node = mesh.grid_node(i, j);
            if split.node_internal(i, j, ny) {
                r.internal.push(node);
            } else {
                r.b_nodes.push(node);
                if split.node_interface(i, j, ny) {
                    r.interface.push(node);
                }
            }
        }
    }
    for ei in 0..nx {
        for ej in 0..ny {
            let e = mesh.element_id(ei, ej);
            if split.element_in_a(ei, ej, ny) {
                r.a_elems.push(e);
            } else {
                r.b_elems.push(e);
            }
        }
    }
    r
}

/// Builder of SUB models. Substructure B is reduced once and shared.
pub struct SubBuilder {
    beam: Arc<Beam>,
    split: SubstructureSplit,
    b: Arc<BReduction>,
    interface: Vec<usize>,
    internal: Vec<usize>,
    a_elems: Vec<usize>,
    pub offline_s: f64,
    pub loaded_from_cache: bool,
}

impl SubBuilder {
    /// Reduce substructure B, reading/writing `cache_dir` when given.
    pub fn new(
        beam: Arc<Beam>,
        split: SubstructureSplit,
        n_modes: usize,
        cache_dir: Option<PathBuf>,
    ) -> Result<Self> {
        let start = Instant::now();
        split.validate(beam.nx(), beam.ny())?;
        let reg = regions(&beam.mesh, &split);
        let key = cache::cache_key(&beam.config, &split, n_modes);
        let path = cache_dir
            .as_ref()
            .map(|d| d.join(format!("subB-{}.bin", &key[..16])));
        let cached = match &path {
            Some(p) if p.exists() => Some(BReduction::read(p, &key)?),
            _ => None,
        };
        let loaded_from_cache = cached.is_some();
        let b = match cached {
            Some(b) => b,
            None => {
                let b = reduce_b(&beam, &reg, n_modes, key)?;
                if let (Some(dir), Some(p)) = (&cache_dir, &path) {
                    std::fs::create_dir_all(dir)?;
                    b.write(p)?;
                }
                b
            }
        };
        Ok(SubBuilder {
            beam,
            split,
            b: Arc::new(b),
            interface: reg.interface,
            internal: reg.internal,
            a_elems: reg.a_elems,
            offline_s: start.elapsed().as_secs_f64(),
            loaded_from_cache,
        })
    }

    pub fn split(&self) -> &SubstructureSplit {
        &self.split
    }

    pub fn beam(&self) -> &Beam {
        &self.beam
    }

    pub fn reduction(&self) -> &Arc<BReduction> {
        &self.b
    }

    /// Assemble the SUB model of one crack (online step).
    pub fn model(&self, crack: Option<&CrackSpec>) -> Result<ReducedModel> {
        let start = Instant::now();
        let beam = &*self.beam;
        let ny = beam.ny();
        if let Some(c) = crack {
            self.split.admits(c, ny)?;
        }
        let mesh = beam.cracked_mesh(crack)?;
        let ties: Vec<(usize, usize)> = mesh.split_nodes.iter().map(|&(o, d)| (d, o)).collect();
        let is_internal = {
            let mut v = vec![false; mesh.nodes.len()];
            for &n in &self.internal {
                v[n] = true;
            }
            for &(o, d) in &mesh.split_nodes {
                v[d] = v[o];
            }
            v
        };
        let internal_order = assembly::column_major_order(&mesh, |n| is_internal[n]);
        let mut asm_order = internal_order.clone();
        asm_order.extend(&self.interface);
        let fixed = beam.fixed_dofs();
        let asm_map = DofMap::build(mesh.nodes.len(), &asm_order, &fixed, &ties)?;
        let direct = DofMap::build(mesh.nodes.len(), &internal_order, &fixed, &ties)?;
        let n_int = direct.n();
        let nb = self.b.n_reduced();
        let n = n_int + nb;
        if asm_map.n() != n_int + 2 * self.interface.len() - count_fixed(&fixed, &self.interface) {
            return Err(Error::invalid("interface numbering mismatch"));
        }

        let (ka, ma) = assembly::assemble_elements(
            &mesh,
            &beam.config.material,
            beam.config.thickness,
            &self.a_elems,
            &asm_map,
        )?;
        let mut kt = Vec::with_capacity(ka.nnz() + nb * nb);
        let mut mt = Vec::with_capacity(ma.nnz() + nb * nb);
        for (i, j, v) in ka.triplet_iter() {
            kt.push((i, j, *v));
        }
        for (i, j, v) in ma.triplet_iter() {
            mt.push((i, j, *v));
        }
        for i in 0..nb {
            for j in 0..nb {
                let (k, m) = (self.b.k_r[(i, j)], self.b.m_r[(i, j)]);
                if k != 0.0 {
                    kt.push((n_int + i, n_int + j, k));
                }
                if m != 0.0 {
                    mt.push((n_int + i, n_int + j, m));
                }
            }
        }
        let k = linalg::csr_from_triplets(n, &kt);
        let m = linalg::csr_from_triplets(n, &mt);
        let pairs = assembly::crack_contact_pairs(&mesh, &asm_map, beam.penalty())?;
        let space = DofSpace {
            direct,
            basis: Some(Basis {
                map: self.b.map(&beam.mesh, &fixed)?,
                t: self.b.t.clone(),
                cols: (n_int..n).collect(),
            }),
        };
        let mut structure = beam.finish(
            ModelKind::Sub,
            k,
            m,
            pairs,
            space,
            n_int,
            crack.copied(),
            mesh,
        )?;
        structure.system.layout = Layout::from_pattern(
            n,
            n_int,
            &[&structure.system.stiffness, &structure.system.mass],
        );
        Ok(ReducedModel {
            structure,
            t: self.b.t.clone(),
            modal_count: self.b.modal_count,
            timing: BuildTiming {
                offline_s: self.offline_s,
                online_s: start.elapsed().as_secs_f64(),
            },
        })
    }
}

fn count_fixed(fixed: &[(usize, usize)], nodes: &[usize]) -> usize {
    fixed.iter().filter(|(n, _)| nodes.contains(n)).count()
}

/// Reduce B on its column-major nodes. The reduced coordinates are
/// `[interface | forcing | modal]`.
fn reduce_b(beam: &Beam, reg: &Regions, n_modes: usize, key: String) -> Result<BReduction> {
    let mesh = &beam.mesh;
    let fixed = beam.fixed_dofs();
    let map = DofMap::build(mesh.nodes.len(), &reg.b_nodes, &fixed, &[])?;
    let (k, m) = assembly::assemble_elements(
        mesh,
        &beam.config.material,
        beam.config.thickness,
        &reg.b_elems,
        &map,
    )?;
    let mut retained = Vec::new();
    for &node in &reg.interface {
        for dir in [UX, UY] {
            retained.extend(map.get(node, dir));
        }
    }
    let n_iface = retained.len();
    for f in retained_forcing(beam, &map)? {
        if retained.contains(&f) {
            return Err(Error::invalid(
                "a loaded node lies on the substructure interface",
            ));
        }
        retained.push(f);
    }
    let layout = Layout::from_pattern(map.n(), map.n(), &[&k, &m]);
    let basis = reduce_rubin(&k, &m, &layout, &retained, n_modes)?;
    Ok(BReduction {
        key,
        n_interface: n_iface,
        n_forcing: retained.len() - n_iface,
        modal_count: basis.modal_count,
        interface: reg.interface.clone(),
        b_nodes: reg.b_nodes.clone(),
        k_r: basis.k_r,
        m_r: basis.m_r,
        t: Arc::new(basis.t),
    })
}

/// Coordinate counts of a reduced model, in the layout of a size table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub total: usize,
    pub crack_face: usize,
    pub forcing: usize,
    pub modal: usize,
    pub interface: usize,
    pub internal: usize,
}

impl SubBuilder {
    pub fn size_report(&self, model: &ReducedModel) -> SizeReport {
        let cf = 2 * model.structure.system.nc();
        let n = model.n();
        let nb = self.b.n_reduced();
        SizeReport {
            total: n,
            crack_face: cf,
            forcing: self.b.n_forcing,
            modal: self.b.modal_count,
            interface: self.b.n_interface,
            internal: n - nb - cf / 2,
        }
    }
}

pub fn rb_size_report(model: &ReducedModel) -> SizeReport {
    let cf = 2 * model.structure.system.nc();
    SizeReport {
        total: model.n(),
        crack_face: cf,
        forcing: model.n() - cf - model.modal_count,
        modal: model.modal_count,
        interface: 0,
        internal: 0,
    }
}
