//! Higher-order transmissibility from harmonic-balance solutions and from the
//! closed-crack surrogate.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbm::HarmonicSolution;
use crate::linalg::{self, Factor, Layout, C64};
use crate::model::{SensorRow, SystemModel};

/// Relative floor below which a denominator harmonic counts as absent.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nonlinear,
    Surrogate,
    /// Ratios of harmonics extracted from sampled signals.
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissibilityRecord {
    pub order: usize,
    /// Numerator sensor index.
    pub m: usize,
    /// Denominator sensor index.
    pub n: usize,
    pub omega: f64,
    pub value: C64,
    pub method: Method,
}

/// All ordered pairs `(m, n)`, `m ≠ n`.
pub fn ordered_pairs(count: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for m in 0..count {
        for n in 0..count {
            if m != n {
                v.push((m, n));
            }
        }
    }
    v
}

/// Pairs `(m, n)` with `m < n`.
pub fn upper_pairs(count: usize) -> Vec<(usize, usize)> {
    ordered_pairs(count)
        .into_iter()
        .filter(|(m, n)| m < n)
        .collect()
}

fn ratios(
    values: &[C64],
    reference: f64,
    pairs: &[(usize, usize)],
    order: usize,
    omega: f64,
    method: Method,
) -> Result<Vec<TransmissibilityRecord>> {
    let floor = DENOMINATOR_FLOOR * reference;
    pairs
        .iter()
        .map(|&(m, n)| {
            if m >= values.len() || n >= values.len() {
                return Err(Error::invalid("sensor index out of range"));
            }
            let value = if m == n {
                C64::new(1.0, 0.0)
            } else {
                if !(values[n].norm() > floor) {
                    return Err(Error::UndefinedTransmissibility { sensor: n, order });
                }
                values[m] / values[n]
            };
            Ok(TransmissibilityRecord {
                order,
                m,
                n,
                omega,
                value,
                method,
            })
        })
        .collect()
}

/// `T̂r_p^(m,n) = ŷ_p^(m) / ŷ_p^(n)` from a harmonic-balance solution. The
/// denominator floor is relative to the largest first-order sensor response.
pub fn tr_nonlinear(
    sol: &HarmonicSolution,
    sensors: &[SensorRow],
    pairs: &[(usize, usize)],
    p: usize,
) -> Result<Vec<TransmissibilityRecord>> {
    if !sol.converged {
        return Err(Error::invalid("harmonic solution is not converged"));
    }
    if p == 0 || p > sol.harmonics {
        return Err(Error::invalid(format!(
            "order {p} is outside 1..={}",
            sol.harmonics
        )));
    }
    let values: Vec<C64> = sensors.iter().map(|s| sol.output(s, p)).collect();
    let reference = sensors
        .iter()
        .map(|s| sol.output(s, 1).norm())
        .fold(0.0, f64::max);
    ratios(&values, reference, pairs, p, sol.omega, Method::Nonlinear)
}

/// `T̂r_p` from per-sensor harmonic coefficients `harmonics[s][p-1]`, e.g.
/// extracted from time histories. The denominator floor is relative to the
/// largest first-order coefficient.
pub fn tr_from_harmonics(
    harmonics: &[Vec<C64>],
    omega: f64,
    pairs: &[(usize, usize)],
    p: usize,
) -> Result<Vec<TransmissibilityRecord>> {
    if p == 0 || harmonics.iter().any(|h| h.len() < p) {
        return Err(Error::invalid(format!(
            "order {p} is not available for every sensor"
        )));
    }
    let values: Vec<C64> = harmonics.iter().map(|h| h[p - 1]).collect();
    let reference = harmonics.iter().map(|h| h[0].norm()).fold(0.0, f64::max);
    ratios(&values, reference, pairs, p, omega, Method::Measured)
}

/// Closed-crack solution of the pristine structure: `D₁ x + B λ = q̂`,
/// `Bᵀ x = 0`.
#[derive(Debug, Clone)]
pub struct ClosedCrackSolve {
    pub omega: f64,
    /// Constraint force per contact pair.
    pub lambda: Vec<C64>,
    /// Displacement coefficients of the closed structure.
    pub x: Vec<C64>,
    /// `‖Bᵀx‖ / ‖x‖`.
    pub compatibility: f64,
}

/// Embed `a` in an `(n + extra)`-square matrix.
fn padded(a: &nalgebra_sparse::CsrMatrix<f64>, extra: usize) -> nalgebra_sparse::CsrMatrix<f64> {
    let n = a.nrows() + extra;
    let trip: Vec<(usize, usize, f64)> = a.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
    linalg::csr_from_triplets(n, &trip)
}

fn unit_load(model: &SystemModel) -> Vec<C64> {
    model.force_pattern.clone()
}

fn require_pairs(model: &SystemModel) -> Result<()> {
    if model.nc() == 0 {
        return Err(Error::invalid("the model has no crack contact pairs"));
    }
    Ok(())
}

fn finish_closed(
    model: &SystemModel,
    omega: f64,
    lambda: Vec<C64>,
    x: Vec<C64>,
) -> ClosedCrackSolve {
    let gap: Vec<C64> = model.contact_pairs.iter().map(|p| p.relative(&x)).collect();
    let xn = linalg::norm(&x);
    ClosedCrackSolve {
        omega,
        lambda,
        compatibility: if xn > 0.0 {
            linalg::norm(&gap) / xn
        } else {
            linalg::norm(&gap)
        },
        x,
    }
}

/// Bordered solve: factor `[D₁ B; Bᵀ 0]` directly with the multipliers
/// appended to the dense border.
pub fn solve_closed_crack(model: &SystemModel, omega: f64) -> Result<ClosedCrackSolve> {
    solve_closed_crack_with(model, omega, &model.q_hat())
}

fn solve_closed_crack_with(model: &SystemModel, omega: f64, q: &[C64]) -> Result<ClosedCrackSolve> {
    require_pairs(model)?;
    let n = model.n();
    let nc = model.nc();
    let mut border = Vec::with_capacity(4 * nc);
    for (k, p) in model.contact_pairs.iter().enumerate() {
        border.push((p.dof_plus, n + k, 1.0));
        border.push((n + k, p.dof_plus, 1.0));
        if let Some(mi) = p.dof_minus {
            border.push((mi, n + k, -1.0));
            border.push((n + k, mi, -1.0));
        }
    }
    let b = linalg::csr_from_triplets(n + nc, &border);
    let (m, c, k) = (
        padded(&model.mass, nc),
        padded(&model.damping, nc),
        padded(&model.stiffness, nc),
    );
    let layout = Layout {
        n: n + nc,
        ..model.layout
    };
    let f = Factor::<C64>::assemble(
        &layout,
        &[
            (&m, C64::new(-omega * omega, 0.0)),
            (&c, C64::new(0.0, omega)),
            (&k, C64::new(1.0, 0.0)),
            (&b, C64::new(1.0, 0.0)),
        ],
    )
    .map_err(|e| e.at_frequency(omega))?;
    let mut rhs = q.to_vec();
    rhs.resize(n + nc, C64::new(0.0, 0.0));
    f.solve_in_place(&mut rhs);
    let lambda = rhs.split_off(n);
    Ok(finish_closed(model, omega, lambda, rhs))
}

/// Condensed solve `λ = (BᵀD₁⁻¹B)⁻¹ BᵀD₁⁻¹q̂`, `x = D₁⁻¹(q̂ − Bλ)`.
pub fn solve_closed_crack_condensed(model: &SystemModel, omega: f64) -> Result<ClosedCrackSolve> {
    require_pairs(model)?;
    let n = model.n();
    let nc = model.nc();
    let f = model
        .factor_dynamic_stiffness(omega, 1)
        .map_err(|e| e.at_frequency(omega))?;
    let x_lin = f.solve(&model.q_hat());
    let w: Vec<Vec<C64>> = model
        .contact_pairs
        .iter()
        .map(|p| {
            let mut b = vec![C64::new(0.0, 0.0); n];
            p.scatter(C64::new(1.0, 0.0), &mut b);
            f.solve_in_place(&mut b);
            b
        })
        .collect();
    let g = nalgebra::DMatrix::from_fn(nc, nc, |i, j| model.contact_pairs[i].relative(&w[j]));
    let u = nalgebra::DVector::from_iterator(
        nc,
        model.contact_pairs.iter().map(|p| p.relative(&x_lin)),
    );
    let lambda = g
        .lu()
        .solve(&u)
        .ok_or(Error::Singular { pivot: 0 })
        .map_err(|e| e.at_frequency(omega))?;
    let mut x = x_lin;
    for (j, wj) in w.iter().enumerate() {
        for (xi, wi) in x.iter_mut().zip(wj) {
            *xi -= wi * lambda[j];
        }
    }
    Ok(finish_closed(
        model,
        omega,
        lambda.iter().copied().collect(),
        x,
    ))
}

thread_local! {
    static SURROGATE_SOLVES: Cell<usize> = const { Cell::new(0) };
}

/// Surrogate evaluations performed on the current thread.
pub fn surrogate_solve_count() -> usize {
    SURROGATE_SOLVES.with(|c| c.get())
}

/// Order-`p` response shapes of the surrogate at the sensors.
///
/// The crack-face force of every order `p ≥ 2` is approximated by `Bλ̂` of the
/// closed structure, so `y_p = D_p⁻¹ B λ̂`. For `p = 1` the total load
/// `q̂ − Bλ̂` is kept, which is the closed-structure response itself. The unit
/// force pattern is used: the amplitude cancels in every ratio.
pub fn surrogate_sensor_values(
    model: &SystemModel,
    omega: f64,
    sensors: &[SensorRow],
    orders: &[usize],
) -> Result<Vec<Vec<C64>>> {
    SURROGATE_SOLVES.with(|c| c.set(c.get() + 1));
    if orders.contains(&0) {
        return Err(Error::invalid("transmissibility orders start at 1"));
    }
    let closed = solve_closed_crack_with(model, omega, &unit_load(model))?;
    let n = model.n();
    let mut bl = vec![C64::new(0.0, 0.0); n];
    for (p, l) in model.contact_pairs.iter().zip(&closed.lambda) {
        p.scatter(*l, &mut bl);
    }
    orders
        .iter()
        .map(|&p| {
            let y = if p == 1 {
                closed.x.clone()
            } else {
                model
                    .factor_dynamic_stiffness(omega, p)
                    .map_err(|e| e.at_frequency(omega))?
                    .solve(&bl)
            };
            Ok(sensors.iter().map(|s| s.dot(&y)).collect())
        })
        .collect()
}

/// Surrogate `T̂r_p` without any Newton iteration. The denominator floor is
/// relative to the largest sensor value of the same order.
pub fn tr_surrogate(
    model: &SystemModel,
    omega: f64,
    sensors: &[SensorRow],
    pairs: &[(usize, usize)],
    p: usize,
) -> Result<Vec<TransmissibilityRecord>> {
    if p == 0 {
        return Err(Error::invalid("transmissibility orders start at 1"));
    }
    let values = surrogate_sensor_values(model, omega, sensors, &[p])?.remove(0);
    let reference = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    ratios(&values, reference, pairs, p, omega, Method::Surrogate)
}

/// Error statistics between two equally ordered record sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `√(mean |Tr_s − Tr_nl|²)` over all records.
    pub rmse: f64,
    /// `max |Tr_s − Tr_nl|`.
    pub max_error: f64,
    pub points: usize,
}

pub fn compare(a: &[TransmissibilityRecord], b: &[TransmissibilityRecord]) -> Result<Comparison> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(
            "record sets must be nonempty and of equal length",
        ));
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        if (x.m, x.n, x.order) != (y.m, y.n, y.order)
            || (x.omega - y.omega).abs() > 1e-12 * x.omega.abs()
        {
            return Err(Error::invalid("record sets are not aligned"));
        }
        let e = (x.value - y.value).norm();
        sum += e * e;
        max = max.max(e);
    }
    Ok(Comparison {
        rmse: (sum / a.len() as f64).sqrt(),
        max_error: max,
        points: a.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_sets() {
        assert_eq!(ordered_pairs(3).len(), 6);
        assert_eq!(
            upper_pairs(4),
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        );
    }

    #[test]
    fn self_ratio_is_one_and_floor_applies() {
        let v = [C64::new(2.0, 1.0), C64::new(0.0, 0.0)];
        let r = ratios(&v, 1.0, &[(0, 0)], 2, 1.0, Method::Surrogate).unwrap();
        assert_eq!(r[0].value, C64::new(1.0, 0.0));
        assert!(matches!(
            ratios(&v, 1.0, &[(0, 1)], 2, 1.0, Method::Surrogate),
            Err(Error::UndefinedTransmissibility {
                sensor: 1,
                order: 2
            })
        ));
    }

    #[test]
    fn comparison_statistics() {
        let rec = |v: f64| TransmissibilityRecord {
            order: 2,
            m: 0,
            n: 1,
            omega: 1.0,
            value: C64::new(v, 0.0),
            method: Method::Nonlinear,
        };
        let c = compare(&[rec(1.0), rec(2.0)], &[rec(1.0), rec(4.0)]).unwrap();
        assert!((c.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.max_error, 2.0);
    }
}
