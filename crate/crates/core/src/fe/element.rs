//! Four-node bilinear plane-stress quadrilateral.

use nalgebra::{SMatrix, SVector};

pub type Mat8 = SMatrix<f64, 8, 8>;

const GAUSS: f64 = 0.577_350_269_189_625_8;
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

fn shape(xi: f64, eta: f64) -> [f64; 4] {
    CORNERS.map(|(a, b)| 0.25 * (1.0 + a * xi) * (1.0 + b * eta))
}

fn shape_natural_derivs(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    CORNERS.map(|(a, b)| [0.25 * a * (1.0 + b * eta), 0.25 * b * (1.0 + a * xi)])
}

/// Cartesian shape-function derivatives `[dN/dx, dN/dy]` and `det J` at a
/// natural point.
pub fn shape_derivs(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> ([[f64; 2]; 4], f64) {
    let dn = shape_natural_derivs(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for k in 0..4 {
        for (r, jr) in j.iter_mut().enumerate() {
            jr[0] += dn[k][r] * coords[k][0];
            jr[1] += dn[k][r] * coords[k][1];
        }
    }
    // j[r][c] = d x_c / d ξ_r
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let inv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let d = dn.map(|g| {
        [
            inv[0][0] * g[0] + inv[0][1] * g[1],
            inv[1][0] * g[0] + inv[1][1] * g[1],
        ]
    });
    (d, det)
}

fn plane_stress(e: f64, nu: f64) -> SMatrix<f64, 3, 3> {
    let c = e / (1.0 - nu * nu);
    SMatrix::<f64, 3, 3>::new(
        c,
        c * nu,
        0.0,
        c * nu,
        c,
        0.0,
        0.0,
        0.0,
        c * (1.0 - nu) / 2.0,
    )
}

fn b_matrix(d: &[[f64; 2]; 4]) -> SMatrix<f64, 3, 8> {
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for k in 0..4 {
        b[(0, 2 * k)] = d[k][0];
        b[(1, 2 * k + 1)] = d[k][1];
        b[(2, 2 * k)] = d[k][1];
        b[(2, 2 * k + 1)] = d[k][0];
    }
    b
}

/// Stiffness and consistent mass (2×2 Gauss); DoF order `[u1 v1 … u4 v4]`.
pub fn element_matrices(
    coords: &[[f64; 2]; 4],
    youngs: f64,
    poisson: f64,
    density: f64,
    thickness: f64,
) -> (Mat8, Mat8) {
    let dmat = plane_stress(youngs, poisson);
    let mut k = Mat8::zeros();
    let mut m = Mat8::zeros();
    for &xi in &[-GAUSS, GAUSS] {
        for &eta in &[-GAUSS, GAUSS] {
            let (d, det) = shape_derivs(coords, xi, eta);
            let b = b_matrix(&d);
            k += b.transpose() * dmat * b * (det * thickness);
            let n = shape(xi, eta);
            let w = density * thickness * det;
            for a in 0..4 {
                for c in 0..4 {
                    let v = w * n[a] * n[c];
                    m[(2 * a, 2 * c)] += v;
                    m[(2 * a + 1, 2 * c + 1)] += v;
                }
            }
        }
    }
    (k, m)
}

/// Coefficients of `εxx` at the element centroid with respect to the nodal
/// x-displacements.
pub fn centroid_exx(coords: &[[f64; 2]; 4]) -> [f64; 4] {
    let (d, _) = shape_derivs(coords, 0.0, 0.0);
    d.map(|g| g[0])
}

/// Strains `[εxx, εyy, γxy]` at a natural point for element displacements.
pub fn strain_at(coords: &[[f64; 2]; 4], u: &SVector<f64, 8>, xi: f64, eta: f64) -> [f64; 3] {
    let (d, _) = shape_derivs(coords, xi, eta);
    let e = b_matrix(&d) * u;
    [e[0], e[1], e[2]]
}
