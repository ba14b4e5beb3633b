use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structured quad mesh of a rectangle `[0, L] × [0, H]`.
///
/// Node `(i, j)` (column `i`, row `j`) has id `i·(ny+1) + j`. Element
/// `(ei, ej)` has id `ei·ny + ej`. Nodes added by crack insertion are
/// appended after the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub grid_dims: (usize, usize),
    pub elem_size: (f64, f64),
    /// `(original, duplicate)` node pairs created by crack insertion,
    /// ordered from the top edge downwards.
    pub split_nodes: Vec<(usize, usize)>,
}

/// Discrete crack parameters on a structured mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSpec {
    /// Interior vertical node line `1..nx` carrying the crack.
    pub location_index: usize,
    /// Crack depth in percent of the beam height.
    pub depth_percent: u32,
}

impl CrackSpec {
    pub fn new(location_index: usize, depth_percent: u32) -> Self {
        CrackSpec {
            location_index,
            depth_percent,
        }
    }

    /// Normalized longitudinal position in `(−1, 1)`.
    pub fn l_c(&self, nx: usize) -> f64 {
        2.0 * self.location_index as f64 / nx as f64 - 1.0
    }

    /// Line index closest to a normalized position.
    pub fn index_for_l_c(l_c: f64, nx: usize) -> usize {
        ((l_c + 1.0) * nx as f64 / 2.0).round() as usize
    }

    pub fn depth_elems(&self, ny: usize) -> Result<usize> {
        let d = self.depth_percent as usize * ny;
        if !d.is_multiple_of(100) {
            return Err(Error::invalid(format!(
                "crack depth {}% is not a whole number of element rows",
                self.depth_percent
            )));
        }
        Ok(d / 100)
    }
}

pub fn build_mesh(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh2D> {
    if !(length > 0.0 && height > 0.0) || !length.is_finite() || !height.is_finite() {
        return Err(Error::invalid("mesh dimensions must be positive"));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(
            "mesh needs at least one element per direction",
        ));
    }
    let dx = length / nx as f64;
    let dy = height / ny as f64;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            nodes.push([i as f64 * dx, j as f64 * dy]);
        }
    }
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut elements = Vec::with_capacity(nx * ny);
    for ei in 0..nx {
        for ej in 0..ny {
            elements.push([
                id(ei, ej),
                id(ei + 1, ej),
                id(ei + 1, ej + 1),
                id(ei, ej + 1),
            ]);
        }
    }
    Ok(Mesh2D {
        nodes,
        elements,
        grid_dims: (nx, ny),
        elem_size: (dx, dy),
        split_nodes: Vec::new(),
    })
}

impl Mesh2D {
    pub fn nx(&self) -> usize {
        self.grid_dims.0
    }

    pub fn ny(&self) -> usize {
        self.grid_dims.1
    }

    pub fn grid_node(&self, i: usize, j: usize) -> usize {
        i * (self.ny() + 1) + j
    }

    pub fn element_id(&self, ei: usize, ej: usize) -> usize {
        ei * self.ny() + ej
    }

    /// Grid position of a grid node; duplicates report their original.
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        let node = self
            .split_nodes
            .iter()
            .find(|(_, d)| *d == node)
            .map_or(node, |(o, _)| *o);
        (node / (self.ny() + 1), node % (self.ny() + 1))
    }

    pub fn grid_node_count(&self) -> usize {
        (self.nx() + 1) * (self.ny() + 1)
    }

    /// Signed area of each element (positive for counterclockwise nodes).
    pub fn element_area(&self, e: usize) -> f64 {
        let c = self.elements[e].map(|n| self.nodes[n]);
        0.5 * (0..4)
            .map(|k| {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }

    /// Split the top `depth` nodes of line `location_index`; elements to the
    /// right of the line are reconnected to the duplicates. The crack tip
    /// node stays shared.
    pub fn with_crack(&self, crack: &CrackSpec) -> Result<Mesh2D> {
        if !self.split_nodes.is_empty() {
            return Err(Error::invalid("mesh already carries a crack"));
        }
        let (nx, ny) = self.grid_dims;
        let i = crack.location_index;
        if i == 0 || i >= nx {
            return Err(Error::invalid(format!(
                "crack line {i} is not an interior node line (1..{})",
                nx - 1
            )));
        }
        let d = crack.depth_elems(ny)?;
        if d == 0 {
            return Err(Error::invalid("crack depth rounds to zero element rows"));
        }
        if d >= ny {
            return Err(Error::invalid("through-thickness cracks are not supported"));
        }
        let mut mesh = self.clone();
        for j in (ny - d + 1..=ny).rev() {
            let orig = self.grid_node(i, j);
            let dup = mesh.nodes.len();
            mesh.nodes.push(self.nodes[orig]);
            mesh.split_nodes.push((orig, dup));
        }
        for ej in 0..ny {
            let e = self.element_id(i, ej);
            for slot in mesh.elements[e].iter_mut() {
                if let Some((_, dup)) = mesh.split_nodes.iter().find(|(o, _)| o == slot) {
                    *slot = *dup;
                }
            }
        }
        Ok(mesh)
    }

    pub fn write_nodes_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "node,x_mm,y_mm")?;
        for (k, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{k},{},{}", p[0], p[1])?;
        }
        Ok(())
    }

    pub fn write_elements_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "element,n1,n2,n3,n4")?;
        for (k, e) in self.elements.iter().enumerate() {
            writeln!(w, "{k},{},{},{},{}", e[0], e[1], e[2], e[3])?;
        }
        Ok(())
    }
}
