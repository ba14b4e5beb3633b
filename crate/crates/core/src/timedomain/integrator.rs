use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Factor, C64};
use crate::model::{SensorRow, SystemModel};

/// Chung–Hulbert parameters for a given spectral radius at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AlphaParams {
    pub fn from_rho_inf(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid("spectral radius must lie in [0, 1]"));
        }
        let alpha_m = (2.0 * rho - 1.0) / (rho + 1.0);
        let alpha_f = rho / (rho + 1.0);
        Ok(AlphaParams {
            alpha_m,
            alpha_f,
            beta: 0.25 * (1.0 - alpha_m + alpha_f).powi(2),
            gamma: 0.5 - alpha_m + alpha_f,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rho_inf: f64,
    /// Time steps per excitation period (`dt = T / steps_per_period`).
    pub steps_per_period: usize,
    /// Give up if no steady state is reached after this many periods.
    pub max_periods: usize,
    /// Relative change of the per-period harmonics regarded as steady.
    pub steady_tol: f64,
    /// Successive periods that must satisfy `steady_tol`.
    pub steady_periods: usize,
    /// Harmonic orders monitored by the steady-state test.
    pub steady_harmonics: usize,
    /// Periods recorded once steady.
    pub record_periods: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rho_inf: 0.7,
            steps_per_period: 256,
            max_periods: 4000,
            steady_tol: 1e-5,
            steady_periods: 3,
            steady_harmonics: 3,
            record_periods: 4,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 200 {
            return Err(Error::invalid("at least 200 steps per period are required"));
        }
        if self.record_periods == 0 || self.steady_periods == 0 || self.steady_harmonics == 0 {
            return Err(Error::invalid(
                "record/steady period counts must be positive",
            ));
        }
        if !(self.steady_tol > 0.0) {
            return Err(Error::invalid("steady tolerance must be positive"));
        }
        AlphaParams::from_rho_inf(self.rho_inf).map(|_| ())
    }
}

/// Sampled output channels over an integer number of periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeHistory {
    pub omega: f64,
    pub dt: f64,
    /// Time of the first sample.
    pub t0: f64,
    pub steps_per_period: usize,
    pub channels: Vec<Vec<f64>>,
    /// Periods integrated before recording started.
    pub transient_periods: usize,
}

impl TimeHistory {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.t0 + k as f64 * self.dt)
            .collect()
    }
}

/// Fixed-step generalized-alpha integrator for `M ẍ + C ẋ + K x + f(x) = q(t)`
/// with `q(t) = 2 Re(q̂ e^{iωt})`.
///
/// Contact forces are evaluated at the α_f-interpolated displacement and
/// resolved exactly each step by an active-set iteration on the pairs.
pub struct Integrator<'a> {
    model: &'a SystemModel,
    params: AlphaParams,
    dt: f64,
    omega: f64,
    q_hat: Vec<C64>,
    keff: Factor<f64>,
    /// `K_eff⁻¹ B`, one column per pair.
    w: Vec<Vec<f64>>,
    /// `Bᵀ K_eff⁻¹ B`, row-major.
    g: Vec<f64>,
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    active: Vec<bool>,
}

const MAX_ACTIVE_SET_ITER: usize = 100;

impl<'a> Integrator<'a> {
    pub fn new(model: &'a SystemModel, omega: f64, params: AlphaParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        let AlphaParams {
            alpha_m,
            alpha_f,
            beta,
            gamma,
        } = params;
        let cm = (1.0 - alpha_m) / (beta * dt * dt);
        let cc = (1.0 - alpha_f) * gamma / (beta * dt);
        let ck = 1.0 - alpha_f;
        let keff = Factor::<f64>::assemble(
            &model.layout,
            &[
                (&model.mass, cm),
                (&model.damping, cc),
                (&model.stiffness, ck),
            ],
        )?;
        let n = model.n();
        let nc = model.nc();
        let w: Vec<Vec<f64>> = model
            .contact_pairs
            .iter()
            .map(|pair| {
                let mut b = vec![0.0; n];
                pair.scatter(1.0, &mut b);
                keff.solve_in_place(&mut b);
                b
            })
            .collect();
        let mut g = vec![0.0; nc * nc];
        for (i, pi) in model.contact_pairs.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                g[i * nc + j] = pi.relative(wj);
            }
        }
        let mut it = Integrator {
            model,
            params,
            dt,
            omega,
            q_hat: model.q_hat(),
            keff,
            w,
            g,
            t: 0.0,
            x: vec![0.0; n],
            v: vec![0.0; n],
            a: vec![0.0; n],
            active: vec![false; nc],
        };
        it.set_state(0.0, vec![0.0; n], vec![0.0; n])?;
        Ok(it)
    }

    pub fn load(&self, t: f64) -> Vec<f64> {
        let (c, s) = ((self.omega * t).cos(), (self.omega * t).sin());
        self.q_hat
            .iter()
            .map(|q| 2.0 * (q.re * c - q.im * s))
            .collect()
    }

    fn contact_force(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; x.len()];
        for pair in &self.model.contact_pairs {
            pair.scatter(pair.force(pair.relative(x)), &mut f);
        }
        f
    }

    /// Set displacement and velocity; the acceleration follows from the
    /// equation of motion.
    pub fn set_state(&mut self, t: f64, x: Vec<f64>, v: Vec<f64>) -> Result<()> {
        let m = self.model;
        let mut r = self.load(t);
        let kx: Vec<f64> = linalg::spmv_new(&m.stiffness, &x);
        let cv: Vec<f64> = linalg::spmv_new(&m.damping, &v);
        let fc = self.contact_force(&x);
        for i in 0..r.len() {
            r[i] -= kx[i] + cv[i] + fc[i];
        }
        let mf = Factor::<f64>::assemble(&m.layout, &[(&m.mass, 1.0)])?;
        mf.solve_in_place(&mut r);
        self.active = m
            .contact_pairs
            .iter()
            .map(|p| p.is_closed(p.relative(&x)))
            .collect();
        self.t = t;
        self.x = x;
        self.v = v;
        self.a = r;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let AlphaParams {
            alpha_m: am,
            alpha_f: af,
            beta,
            gamma,
        } = self.params;
        let dt = self.dt;
        let n = self.x.len();
        let c0 = 1.0 / (beta * dt * dt);
        let c1 = 1.0 / (beta * dt);
        let c2 = 1.0 / (2.0 * beta) - 1.0;
        let (x, v, a) = (&self.x, &self.v, &self.a);
        let mvec: Vec<f64> = (0..n)
            .map(|i| (1.0 - am) * (c0 * x[i] + c1 * v[i] + c2 * a[i]) - am * a[i])
            .collect();
        let cvec: Vec<f64> = (0..n)
            .map(|i| {
                (1.0 - af)
                    * (gamma / (beta * dt) * x[i]
                        - (1.0 - gamma / beta) * v[i]
                        - dt * (1.0 - gamma / (2.0 * beta)) * a[i])
                    - af * v[i]
            })
            .collect();
        let m = self.model;
        let mut b = self.load(self.t + (1.0 - af) * dt);
        let mm: Vec<f64> = linalg::spmv_new(&m.mass, &mvec);
        let cm: Vec<f64> = linalg::spmv_new(&m.damping, &cvec);
        let kx: Vec<f64> = linalg::spmv_new(&m.stiffness, x);
        for i in 0..n {
            b[i] += mm[i] + cm[i] - af * kx[i];
        }
        self.keff.solve_in_place(&mut b);
        let mut y = b;

        let nc = m.nc();
        if nc > 0 {
            let u_pred: Vec<f64> = m
                .contact_pairs
                .iter()
                .map(|p| (1.0 - af) * p.relative(&y) + af * p.relative(x))
                .collect();
            let fc = self.resolve_contact(&u_pred)?;
            for (j, f) in fc.iter().enumerate() {
                if *f != 0.0 {
                    for (yi, wi) in y.iter_mut().zip(&self.w[j]) {
                        *yi -= wi * f;
                    }
                }
            }
        }

        let mut a_new = vec![0.0; n];
        let mut v_new = vec![0.0; n];
        for i in 0..n {
            a_new[i] = c0 * (y[i] - self.x[i]) - c1 * self.v[i] - c2 * self.a[i];
            v_new[i] = self.v[i] + dt * ((1.0 - gamma) * self.a[i] + gamma * a_new[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!(
                "non-finite state at t = {}",
                self.t
            )));
        }
        self.x = y;
        self.v = v_new;
        self.a = a_new;
        self.t += dt;
        Ok(())
    }

    /// Solve `u = u_pred − (1−α_f) G f(u)` for the pair forces `f`.
    fn resolve_contact(&mut self, u_pred: &[f64]) -> Result<Vec<f64>> {
        let nc = u_pred.len();
        let af = self.params.alpha_f;
        let pairs = &self.model.contact_pairs;
        for _ in 0..MAX_ACTIVE_SET_ITER {
            // (I + (1−α_f) G D_A) u = u_pred
            let mut a = DMatrix::<f64>::identity(nc, nc);
            for i in 0..nc {
                for j in 0..nc {
                    if self.active[j] {
                        a[(i, j)] += (1.0 - af) * self.g[i * nc + j] * pairs[j].stiffness;
                    }
                }
            }
            let rhs = nalgebra::DVector::from_column_slice(u_pred);
            let u = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Integration("singular contact system".into()))?;
            let next: Vec<bool> = (0..nc).map(|i| pairs[i].is_closed(u[i])).collect();
            if next == self.active {
                return Ok((0..nc)
                    .map(|i| {
                        if self.active[i] {
                            pairs[i].stiffness * u[i]
                        } else {
                            0.0
                        }
                    })
                    .collect());
            }
            self.active = next;
        }
        Err(Error::Integration(format!(
            "contact state did not settle at t = {}",
            self.t
        )))
    }
}

/// Per-period DFT coefficients `p = 1..=h` of each channel.
fn period_harmonics(samples: &[Vec<f64>], h: usize) -> Vec<Vec<C64>> {
    samples
        .iter()
        .map(|s| {
            let n = s.len() as f64;
            (1..=h)
                .map(|p| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, v) in s.iter().enumerate() {
                        let th = 2.0 * std::f64::consts::PI * (p * k) as f64 / n;
                        acc += C64::new(th.cos(), -th.sin()) * *v;
                    }
                    acc / n
                })
                .collect()
        })
        .collect()
}

/// Largest per-order relative change between two periods. Orders whose
/// magnitude is negligible next to the fundamental are measured against it.
fn harmonic_change(prev: &[Vec<C64>], cur: &[Vec<C64>]) -> f64 {
    let h = cur.first().map_or(0, |c| c.len());
    let fund: f64 = cur.iter().map(|c| c[0].norm_sqr()).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for p in 0..h {
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in prev.iter().zip(cur) {
            num += (b[p] - a[p]).norm_sqr();
            den += b[p].norm_sqr();
        }
        let den = den.sqrt().max(1e-6 * fund);
        if den > 0.0 {
            worst = worst.max(num.sqrt() / den);
        }
    }
    worst
}

/// Integrate from rest until the monitored outputs are periodic, then record
/// `cfg.record_periods` periods of each output row.
pub fn integrate(
    model: &SystemModel,
    omega: f64,
    outputs: &[SensorRow],
    cfg: &IntegratorConfig,
) -> Result<TimeHistory> {
    let zero = vec![0.0; model.n()];
    integrate_from(model, omega, outputs, cfg, &zero, &zero)
}

/// Periodic response of the model with every contact pair held closed,
/// as `(x(0), ẋ(0))`.
pub fn closed_periodic_state(model: &SystemModel, omega: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut trip = Vec::new();
    for pair in &model.contact_pairs {
        let k = pair.stiffness;
        trip.push((pair.dof_plus, pair.dof_plus, k));
        if let Some(m) = pair.dof_minus {
            trip.push((m, m, k));
            trip.push((pair.dof_plus, m, -k));
            trip.push((m, pair.dof_plus, -k));
        }
    }
    let pen = linalg::csr_from_triplets(model.n(), &trip);
    let f = Factor::<C64>::assemble(
        &model.layout,
        &[
            (&model.mass, C64::new(-omega * omega, 0.0)),
            (&model.damping, C64::new(0.0, omega)),
            (&model.stiffness, C64::new(1.0, 0.0)),
            (&pen, C64::new(1.0, 0.0)),
        ],
    )?;
    let xh = f.solve(&model.q_hat());
    let x = xh.iter().map(|c| 2.0 * c.re).collect();
    let v = xh.iter().map(|c| -2.0 * omega * c.im).collect();
    Ok((x, v))
}

/// As [`integrate`], starting from `(x0, v0)` at `t = 0`.
pub fn integrate_from(
    model: &SystemModel,
    omega: f64,
    outputs: &[SensorRow],
    cfg: &IntegratorConfig,
    x0: &[f64],
    v0: &[f64],
) -> Result<TimeHistory> {
    cfg.validate()?;
    if x0.len() != model.n() || v0.len() != model.n() {
        return Err(Error::invalid(
            "initial state does not match the model size",
        ));
    }
    if !(omega > 0.0) {
        return Err(Error::invalid("excitation frequency must be positive"));
    }
    if outputs.is_empty() {
        return Err(Error::invalid("at least one output channel is required"));
    }
    let spp = cfg.steps_per_period;
    let dt = 2.0 * std::f64::consts::PI / omega / spp as f64;
    let params = AlphaParams::from_rho_inf(cfg.rho_inf)?;
    let mut integ = Integrator::new(model, omega, params, dt)?;
    integ.set_state(0.0, x0.to_vec(), v0.to_vec())?;
    let sample =
        |integ: &Integrator| -> Vec<f64> { outputs.iter().map(|r| r.dot(&integ.x)).collect() };

    let mut prev: Option<Vec<Vec<C64>>> = None;
    let mut calm = 0;
    let mut period = 0;
    loop {
        if period >= cfg.max_periods {
            return Err(Error::Integration(format!(
                "no steady state after {} periods",
                cfg.max_periods
            )));
        }
        let mut buf = vec![Vec::with_capacity(spp); outputs.len()];
        for _ in 0..spp {
            for (c, v) in sample(&integ).into_iter().enumerate() {
                buf[c].push(v);
            }
            integ.step()?;
        }
        period += 1;
        let cur = period_harmonics(&buf, cfg.steady_harmonics);
        if let Some(p) = &prev {
            if harmonic_change(p, &cur) < cfg.steady_tol {
                calm += 1;
            } else {
                calm = 0;
            }
        }
        prev = Some(cur);
        if calm >= cfg.steady_periods {
            break;
        }
    }
    let t0 = integ.t;
    let mut channels = vec![Vec::with_capacity(spp * cfg.record_periods); outputs.len()];
    for _ in 0..spp * cfg.record_periods {
        for (c, v) in sample(&integ).into_iter().enumerate() {
            channels[c].push(v);
        }
        integ.step()?;
    }
    Ok(TimeHistory {
        omega,
        dt,
        t0,
        steps_per_period: spp,
        channels,
        transient_periods: period,
    })
}
