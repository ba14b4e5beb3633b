use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::SensorRow;

pub const UX: usize = 0;
pub const UY: usize = 1;

/// Node/direction → model coordinate map.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    coords: Vec<[Option<usize>; 2]>,
    present: Vec<bool>,
    n: usize,
}

impl DofMap {
    /// Number the nodes of `order` in sequence, two coordinates per node.
    ///
    /// `fixed` coordinates are eliminated. For every `(dup, orig)` in
    /// `tie_y` the duplicate only receives its own x-coordinate and shares
    /// the y-coordinate of the original.
    pub fn build(
        n_nodes: usize,
        order: &[usize],
        fixed: &[(usize, usize)],
        tie_y: &[(usize, usize)],
    ) -> Result<Self> {
        let ties: HashMap<usize, usize> = tie_y.iter().copied().collect();
        let mut coords = vec![[None, None]; n_nodes];
        let mut present = vec![false; n_nodes];
        let mut n = 0;
        for &node in order {
            if node >= n_nodes || present[node] {
                return Err(Error::invalid(
                    "node order repeats or exceeds the node count",
                ));
            }
            present[node] = true;
            for dir in [UX, UY] {
                if fixed.contains(&(node, dir)) || (dir == UY && ties.contains_key(&node)) {
                    continue;
                }
                coords[node][dir] = Some(n);
                n += 1;
            }
        }
        for (&dup, &orig) in &ties {
            if !present[orig] {
                return Err(Error::invalid("tied node refers to a node outside the map"));
            }
            coords[dup][UY] = coords[orig][UY];
        }
        Ok(DofMap { coords, present, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, node: usize, dir: usize) -> Option<usize> {
        self.coords.get(node).and_then(|c| c[dir])
    }

    pub fn contains(&self, node: usize) -> bool {
        self.present.get(node).copied().unwrap_or(false)
    }

    pub fn element_dofs(&self, conn: &[usize; 4]) -> [Option<usize>; 8] {
        let mut out = [None; 8];
        for (k, &node) in conn.iter().enumerate() {
            out[2 * k] = self.get(node, UX);
            out[2 * k + 1] = self.get(node, UY);
        }
        out
    }
}

/// Physical displacements expressed through the reduction basis of another
/// model: `x_phys = T · x_red`, with reduced column `c` stored at model
/// coordinate `cols[c]`.
#[derive(Debug, Clone)]
pub struct Basis {
    pub map: DofMap,
    pub t: Arc<DMatrix<f64>>,
    pub cols: Vec<usize>,
}

/// Expresses nodal displacement components of the physical mesh in the
/// coordinates of a (possibly reduced) model.
#[derive(Debug, Clone)]
pub struct DofSpace {
    pub direct: DofMap,
    pub basis: Option<Basis>,
}

impl DofSpace {
    pub fn full(map: DofMap) -> Self {
        DofSpace {
            direct: map,
            basis: None,
        }
    }

    /// Row giving `u_dir(node)` in model coordinates. Fixed components give
    /// an empty row.
    pub fn row(&self, node: usize, dir: usize) -> Result<SensorRow> {
        if self.direct.contains(node) {
            return Ok(match self.direct.get(node, dir) {
                Some(i) => SensorRow::unit(i),
                None => SensorRow::default(),
            });
        }
        if let Some(b) = &self.basis {
            if b.map.contains(node) {
                return Ok(match b.map.get(node, dir) {
                    Some(r) => SensorRow::new(
                        b.cols
                            .iter()
                            .enumerate()
                            .map(|(c, &col)| (col, b.t[(r, c)]))
                            .filter(|e| e.1 != 0.0)
                            .collect(),
                    ),
                    None => SensorRow::default(),
                });
            }
        }
        Err(Error::invalid(format!(
            "node {node} is not represented by the model"
        )))
    }

    /// Project `Σ c · u_dir(node)` into model coordinates.
    pub fn project(&self, nodal: &[(usize, usize, f64)]) -> Result<SensorRow> {
        let mut entries = Vec::new();
        for &(node, dir, c) in nodal {
            for (i, v) in self.row(node, dir)?.entries {
                entries.push((i, c * v));
            }
        }
        Ok(SensorRow::new(entries).compacted())
    }
}
