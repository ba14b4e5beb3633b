//! Multi-harmonic balance with alternating frequency–time contact forces.
//!
//! The Newton iteration runs on the relative displacements of the contact
//! pairs only. With `G_p = Bᵀ D_p⁻¹ B` the condensed residual per harmonic is
//! `r_p(u) = u_p − u_lin,p + G_p f̂_p(u)`, and the full coefficients follow
//! from `x̂_p = D_p⁻¹ (q̂_p − B f̂_p)`. Convergence is judged on the residual
//! of the uncondensed balance equations.

pub mod aft;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use aft::{aft_coefficients, Aft, AftConfig};

use crate::error::{Error, Result};
use crate::linalg::{self, Factor, C64};
use crate::model::{SensorRow, SystemModel};

/// Fourier coefficients `x̂_0..x̂_h` of a periodic response at `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSolution {
    pub omega: f64,
    pub harmonics: usize,
    pub coeffs: Vec<Vec<C64>>,
    pub converged: bool,
    /// `‖R‖ / ‖q̂‖` of the balance equations at the returned coefficients.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl HarmonicSolution {
    /// Order-`p` coefficient of a linear output.
    pub fn output(&self, row: &SensorRow, p: usize) -> C64 {
        row.dot(&self.coeffs[p])
    }

    /// Time signal of a linear output, `y(t) = ŷ_0 + Σ 2 Re(ŷ_p e^{ipωt})`.
    pub fn output_at(&self, row: &SensorRow, t: f64) -> f64 {
        let mut y = self.output(row, 0).re;
        for p in 1..=self.harmonics {
            let c = self.output(row, p);
            let ph = p as f64 * self.omega * t;
            y += 2.0 * (c.re * ph.cos() - c.im * ph.sin());
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 50,
            max_halvings: 10,
            tolerance: 1e-9,
        }
    }
}

/// `D_p = −(pω)²M + ipωC + K`.
pub fn dynamic_stiffness(model: &SystemModel, omega: f64, p: usize) -> DMatrix<C64> {
    crate::model::dynamic_stiffness(model, omega, p)
}

pub fn solve_mhb(
    model: &SystemModel,
    omega: f64,
    cfg: AftConfig,
    initial: Option<&HarmonicSolution>,
) -> Result<HarmonicSolution> {
    solve_mhb_with(model, omega, cfg, initial, &NewtonOptions::default())
}

struct Condensed {
    /// `D_p⁻¹ B`, one n-vector per pair.
    w: Vec<Vec<Vec<C64>>>,
    /// `Bᵀ D_p⁻¹ B`, row-major nc × nc.
    g: Vec<Vec<C64>>,
    x_lin: Vec<C64>,
    u_lin: Vec<C64>,
}

fn condense(model: &SystemModel, omega: f64, h: usize) -> Result<Condensed> {
    let n = model.n();
    let nc = model.nc();
    let q = model.q_hat();
    let mut w = Vec::with_capacity(h + 1);
    let mut g = Vec::with_capacity(h + 1);
    let mut x_lin = Vec::new();
    for p in 0..=h {
        let f = model.factor_dynamic_stiffness(omega, p)?;
        if p == 1 {
            x_lin = f.solve(&q);
        }
        let mut wp = Vec::with_capacity(nc);
        for pair in &model.contact_pairs {
            let mut b = vec![C64::new(0.0, 0.0); n];
            pair.scatter(C64::new(1.0, 0.0), &mut b);
            f.solve_in_place(&mut b);
            wp.push(b);
        }
        let mut gp = vec![C64::new(0.0, 0.0); nc * nc];
        for (i, pi) in model.contact_pairs.iter().enumerate() {
            for (j, wj) in wp.iter().enumerate() {
                gp[i * nc + j] = pi.relative(wj);
            }
        }
        w.push(wp);
        g.push(gp);
    }
    let u_lin = model
        .contact_pairs
        .iter()
        .map(|p| p.relative(&x_lin))
        .collect();
    Ok(Condensed { w, g, x_lin, u_lin })
}

/// Relative displacement coefficients `u[pair][p]` and the condensed residual.
struct State {
    u: Vec<Vec<C64>>,
    f: Vec<Vec<C64>>,
    r: Vec<Vec<C64>>,
    norm: f64,
}

fn evaluate(model: &SystemModel, aft: &Aft, c: &Condensed, u: Vec<Vec<C64>>) -> State {
    let nc = model.nc();
    let h = aft.cfg.harmonics;
    let f: Vec<Vec<C64>> = model
        .contact_pairs
        .iter()
        .zip(&u)
        .map(|(pair, ui)| aft.pair_force(pair, ui))
        .collect();
    let mut r = u.clone();
    let mut norm = 0.0;
    for i in 0..nc {
        for p in 0..=h {
            let mut v = u[i][p];
            if p == 1 {
                v -= c.u_lin[i];
            }
            for j in 0..nc {
                v += c.g[p][i * nc + j] * f[j][p];
            }
            if p == 0 {
                v.im = 0.0;
            }
            r[i][p] = v;
            norm += v.norm_sqr();
        }
    }
    State {
        u,
        f,
        r,
        norm: norm.sqrt(),
    }
}

fn neg_residual(state: &State, h: usize, m: usize) -> nalgebra::DVector<f64> {
    let nc = state.r.len();
    let mut rhs = nalgebra::DVector::<f64>::zeros(nc * m);
    for i in 0..nc {
        rhs[i * m] = -state.r[i][0].re;
        for p in 1..=h {
            rhs[i * m + 2 * p - 1] = -state.r[i][p].re;
            rhs[i * m + 2 * p] = -state.r[i][p].im;
        }
    }
    rhs
}

fn condensed_jacobian(
    model: &SystemModel,
    aft: &Aft,
    c: &Condensed,
    u: &[Vec<C64>],
) -> DMatrix<f64> {
    let nc = model.nc();
    let h = aft.cfg.harmonics;
    let m = aft.cfg.real_len();
    let blocks: Vec<DMatrix<f64>> = model
        .contact_pairs
        .iter()
        .zip(u)
        .map(|(pair, ui)| aft.pair_force_jacobian(pair, ui).1)
        .collect();
    let mut jac = DMatrix::<f64>::identity(nc * m, nc * m);
    for i in 0..nc {
        for j in 0..nc {
            let fj = &blocks[j];
            for cc in 0..m {
                let col = j * m + cc;
                jac[(i * m, col)] += c.g[0][i * nc + j].re * fj[(0, cc)];
                for p in 1..=h {
                    let g = c.g[p][i * nc + j];
                    let (a, b) = (fj[(2 * p - 1, cc)], fj[(2 * p, cc)]);
                    jac[(i * m + 2 * p - 1, col)] += g.re * a - g.im * b;
                    jac[(i * m + 2 * p, col)] += g.im * a + g.re * b;
                }
            }
        }
    }
    jac
}

fn reconstruct(model: &SystemModel, c: &Condensed, h: usize, f: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = model.n();
    (0..=h)
        .map(|p| {
            let mut x = if p == 1 {
                c.x_lin.clone()
            } else {
                vec![C64::new(0.0, 0.0); n]
            };
            for (j, wj) in c.w[p].iter().enumerate() {
                let fj = f[j][p];
                if fj == C64::new(0.0, 0.0) {
                    continue;
                }
                for (xi, wi) in x.iter_mut().zip(wj) {
                    *xi -= wi * fj;
                }
            }
            if p == 0 {
                for v in x.iter_mut() {
                    v.im = 0.0;
                }
            }
            x
        })
        .collect()
}

/// Balance residual `R_p = D_p x̂_p + f̂_p(x̂) − q̂_p` for every harmonic.
pub fn residual(model: &SystemModel, omega: f64, aft: &Aft, coeffs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let h = aft.cfg.harmonics;
    let q = model.q_hat();
    let forces: Vec<Vec<C64>> = model
        .contact_pairs
        .iter()
        .map(|pair| {
            let rel: Vec<C64> = coeffs.iter().map(|x| pair.relative(x)).collect();
            aft.pair_force(pair, &rel)
        })
        .collect();
    let fscat = aft::scatter(&model.contact_pairs, &forces, model.n());
    (0..=h)
        .map(|p| {
            let mut r = model.apply_dynamic_stiffness(omega, p, &coeffs[p]);
            if let Some(fp) = fscat.get(p) {
                for (ri, fi) in r.iter_mut().zip(fp) {
                    *ri += fi;
                }
            }
            if p == 1 {
                for (ri, qi) in r.iter_mut().zip(&q) {
                    *ri -= qi;
                }
            }
            r
        })
        .collect()
}

/// `‖R‖ / ‖q̂‖` over all harmonics.
pub fn relative_residual(model: &SystemModel, omega: f64, aft: &Aft, coeffs: &[Vec<C64>]) -> f64 {
    let r = residual(model, omega, aft, coeffs);
    let num: f64 = r
        .iter()
        .map(|v| linalg::norm(v).powi(2))
        .sum::<f64>()
        .sqrt();
    let den = linalg::norm(&model.q_hat());
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

thread_local! {
    static NEWTON_SOLVES: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

/// Harmonic-balance solves started on the current thread.
pub fn newton_solve_count() -> usize {
    NEWTON_SOLVES.with(|c| c.get())
}

pub fn solve_mhb_with(
    model: &SystemModel,
    omega: f64,
    cfg: AftConfig,
    initial: Option<&HarmonicSolution>,
    opts: &NewtonOptions,
) -> Result<HarmonicSolution> {
    NEWTON_SOLVES.with(|c| c.set(c.get() + 1));
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid("excitation frequency must be positive"));
    }
    let aft = Aft::new(cfg)?;
    let h = cfg.harmonics;
    let n = model.n();
    if let Some(init) = initial {
        if init.coeffs.len() != h + 1 || init.coeffs.iter().any(|x| x.len() != n) {
            return Err(Error::invalid(
                "initial guess does not match the model/harmonics",
            ));
        }
    }
    let wrap = |e: Error| e.at_frequency(omega);
    if model.nc() == 0 {
        let f = model.factor_dynamic_stiffness(omega, 1).map_err(wrap)?;
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); n]; h + 1];
        coeffs[1] = f.solve(&model.q_hat());
        let residual_norm = relative_residual(model, omega, &aft, &coeffs);
        return Ok(HarmonicSolution {
            omega,
            harmonics: h,
            coeffs,
            converged: true,
            residual_norm,
            iterations: 1,
        });
    }

    let c = condense(model, omega, h).map_err(wrap)?;
    let nc = model.nc();
    let m = cfg.real_len();
    let u0: Vec<Vec<C64>> = match initial {
        Some(init) => model
            .contact_pairs
            .iter()
            .map(|pair| init.coeffs.iter().map(|x| pair.relative(x)).collect())
            .collect(),
        None => (0..nc)
            .map(|i| {
                let mut v = vec![C64::new(0.0, 0.0); h + 1];
                v[1] = c.u_lin[i];
                v
            })
            .collect(),
    };
    let mut state = evaluate(model, &aft, &c, u0);
    let mut last = f64::INFINITY;
    for it in 0..=opts.max_iterations {
        let coeffs = reconstruct(model, &c, h, &state.f);
        let rel = relative_residual(model, omega, &aft, &coeffs);
        last = rel;
        if rel < opts.tolerance {
            return Ok(HarmonicSolution {
                omega,
                harmonics: h,
                coeffs,
                converged: true,
                residual_norm: rel,
                iterations: it,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let jac = condensed_jacobian(model, &aft, &c, &state.u);
        let step = jac
            .lu()
            .solve(&neg_residual(&state, h, m))
            .ok_or(Error::Singular { pivot: 0 })
            .map_err(wrap)?;
        // Halve the step while the condensed residual grows; keep the best
        // trial if none improves.
        let mut t = 1.0;
        let mut best: Option<State> = None;
        for _ in 0..=opts.max_halvings {
            let u: Vec<Vec<C64>> = (0..nc)
                .map(|i| {
                    (0..=h)
                        .map(|p| {
                            let base = state.u[i][p];
                            if p == 0 {
                                C64::new(base.re + t * step[i * m], 0.0)
                            } else {
                                base + C64::new(
                                    t * step[i * m + 2 * p - 1],
                                    t * step[i * m + 2 * p],
                                )
                            }
                        })
                        .collect()
                })
                .collect();
            let trial = evaluate(model, &aft, &c, u);
            let accepted = trial.norm < state.norm;
            if best.as_ref().is_none_or(|b| trial.norm < b.norm) {
                best = Some(trial);
            }
            if accepted {
                break;
            }
            t *= 0.5;
        }
        state = best.expect("at least one trial step");
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: last,
    }
    .at_frequency(omega))
}

/// Largest real system size accepted by [`solve_mhb_full`].
pub const FULL_NEWTON_MAX_UNKNOWNS: usize = 6000;

/// Newton–Raphson on the complete block system with a dense Jacobian, the
/// uncondensed formulation. Same globalization and certificate as
/// [`solve_mhb_with`]; intended for small (reduced) models and as a
/// reference for the condensed solver.
pub fn solve_mhb_full(
    model: &SystemModel,
    omega: f64,
    cfg: AftConfig,
    initial: Option<&HarmonicSolution>,
    opts: &NewtonOptions,
) -> Result<HarmonicSolution> {
    NEWTON_SOLVES.with(|c| c.set(c.get() + 1));
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid("excitation frequency must be positive"));
    }
    let aft = Aft::new(cfg)?;
    let h = cfg.harmonics;
    let n = model.n();
    if n * cfg.real_len() > FULL_NEWTON_MAX_UNKNOWNS {
        return Err(Error::invalid(format!(
            "{} unknowns exceed the dense full-system limit {FULL_NEWTON_MAX_UNKNOWNS}",
            n * cfg.real_len()
        )));
    }
    let wrap = |e: Error| e.at_frequency(omega);
    let mut z = match initial {
        Some(init) => {
            if init.coeffs.len() != h + 1 || init.coeffs.iter().any(|x| x.len() != n) {
                return Err(Error::invalid(
                    "initial guess does not match the model/harmonics",
                ));
            }
            to_real(&init.coeffs)
        }
        None => {
            let mut coeffs = vec![vec![C64::new(0.0, 0.0); n]; h + 1];
            coeffs[1] = model
                .factor_dynamic_stiffness(omega, 1)
                .map_err(wrap)?
                .solve(&model.q_hat());
            to_real(&coeffs)
        }
    };
    let qn = linalg::norm(&model.q_hat());
    let scale = if qn > 0.0 { qn } else { 1.0 };
    let mut r = residual_real(model, omega, &aft, &z);
    let mut rn = linalg::norm(&r);
    for it in 0..=opts.max_iterations {
        if rn / scale < opts.tolerance {
            return Ok(HarmonicSolution {
                omega,
                harmonics: h,
                coeffs: from_real(&z, n, h),
                converged: true,
                residual_norm: rn / scale,
                iterations: it,
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let jac = jacobian_real(model, omega, &aft, &z);
        let rhs = nalgebra::DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular { pivot: 0 })
            .map_err(wrap)?;
        let mut t = 1.0;
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let tr = residual_real(model, omega, &aft, &trial);
            let tn = linalg::norm(&tr);
            let accepted = tn < rn;
            if best.as_ref().is_none_or(|b| tn < b.0) {
                best = Some((tn, trial, tr));
            }
            if accepted {
                break;
            }
            t *= 0.5;
        }
        (rn, z, r) = best.expect("at least one trial step");
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: rn / scale,
    }
    .at_frequency(omega))
}

/// Solve at ascending frequencies, each started from the last converged
/// solution. A failed step is retried through intermediate frequencies.
/// Failures are reported per frequency and do not stop the sweep.
pub fn sweep(
    model: &SystemModel,
    omegas: &[f64],
    cfg: AftConfig,
) -> Result<Vec<Result<HarmonicSolution>>> {
    if omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "sweep frequencies must be strictly ascending",
        ));
    }
    let mut out = Vec::with_capacity(omegas.len());
    let mut prev: Option<HarmonicSolution> = None;
    for &w in omegas {
        let r = match &prev {
            None => solve_mhb(model, w, cfg, None),
            Some(p) => continue_to(model, p, w, cfg, MAX_BISECTIONS),
        };
        if let Ok(s) = &r {
            prev = Some(s.clone());
        }
        out.push(r);
    }
    Ok(out)
}

const MAX_BISECTIONS: usize = 10;

/// Continue from a converged solution to `omega`, bisecting the frequency
/// step when Newton fails.
fn continue_to(
    model: &SystemModel,
    from: &HarmonicSolution,
    omega: f64,
    cfg: AftConfig,
    depth: usize,
) -> Result<HarmonicSolution> {
    match solve_mhb(model, omega, cfg, Some(from)) {
        Err(e) if depth > 0 && e.kind() == "not_converged" => {
            let mid = 0.5 * (from.omega + omega);
            let half = continue_to(model, from, mid, cfg, depth - 1).map_err(|_| e)?;
            continue_to(model, &half, omega, cfg, depth - 1)
        }
        r => r,
    }
}

/// Real stacking `[x̂_0 | Re x̂_1 | Im x̂_1 | …]` of harmonic coefficients.
pub fn to_real(coeffs: &[Vec<C64>]) -> Vec<f64> {
    let mut z: Vec<f64> = coeffs[0].iter().map(|v| v.re).collect();
    for x in &coeffs[1..] {
        z.extend(x.iter().map(|v| v.re));
        z.extend(x.iter().map(|v| v.im));
    }
    z
}

pub fn from_real(z: &[f64], n: usize, h: usize) -> Vec<Vec<C64>> {
    let mut out = vec![z[..n].iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>()];
    for p in 1..=h {
        let re = &z[(2 * p - 1) * n..2 * p * n];
        let im = &z[2 * p * n..(2 * p + 1) * n];
        out.push(re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect());
    }
    out
}

/// Balance residual in real coordinates.
pub fn residual_real(model: &SystemModel, omega: f64, aft: &Aft, z: &[f64]) -> Vec<f64> {
    let coeffs = from_real(z, model.n(), aft.cfg.harmonics);
    to_real(&residual(model, omega, aft, &coeffs))
}

/// Analytic Jacobian of [`residual_real`] (linear blocks plus AFT chain rule).
pub fn jacobian_real(model: &SystemModel, omega: f64, aft: &Aft, z: &[f64]) -> DMatrix<f64> {
    let n = model.n();
    let h = aft.cfg.harmonics;
    let m = aft.cfg.real_len();
    let mut jac = DMatrix::<f64>::zeros(n * m, n * m);
    let k = linalg::csr_to_dense(&model.stiffness);
    let mass = linalg::csr_to_dense(&model.mass);
    let damp = linalg::csr_to_dense(&model.damping);
    jac.view_mut((0, 0), (n, n)).copy_from(&k);
    for p in 1..=h {
        let w = p as f64 * omega;
        let a = &k - &mass * (w * w);
        let b = &damp * w;
        let (re, im) = ((2 * p - 1) * n, 2 * p * n);
        jac.view_mut((re, re), (n, n)).copy_from(&a);
        jac.view_mut((im, im), (n, n)).copy_from(&a);
        jac.view_mut((re, im), (n, n)).copy_from(&(-&b));
        jac.view_mut((im, re), (n, n)).copy_from(&b);
    }
    let coeffs = from_real(z, n, h);
    for pair in &model.contact_pairs {
        let rel: Vec<C64> = coeffs.iter().map(|x| pair.relative(x)).collect();
        let (_, jp) = aft.pair_force_jacobian(pair, &rel);
        let mut inc = vec![(pair.dof_plus, 1.0)];
        if let Some(mi) = pair.dof_minus {
            inc.push((mi, -1.0));
        }
        for r in 0..m {
            for c in 0..m {
                let v = jp[(r, c)];
                if v == 0.0 {
                    continue;
                }
                for &(dr, sr) in &inc {
                    for &(dc, sc) in &inc {
                        jac[(r * n + dr, c * n + dc)] += sr * sc * v;
                    }
                }
            }
        }
    }
    jac
}

/// Factor of `D_p` for repeated solves.
pub fn factor(model: &SystemModel, omega: f64, p: usize) -> Result<Factor<C64>> {
    model.factor_dynamic_stiffness(omega, p)
}
