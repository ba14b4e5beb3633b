use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hotr_core::bench::bench;
use hotr_core::config::ExperimentConfig;
use hotr_core::error::{Error, Result};
use hotr_core::fe::{eigenmodes, Beam, ModelKind, Structure};
use hotr_core::hbm::{self, solve_mhb_with};
use hotr_core::hotr::{compare, tr_nonlinear, tr_surrogate, upper_pairs, TransmissibilityRecord};
use hotr_core::identify::{
    measure, monte_carlo, run_ga, synthesize_truth, ForwardModel, GaConfig, ParameterSpace,
    Scenario,
};
use hotr_core::io::write_atomic;
use hotr_core::rom::{rb_model, rb_size_report, SubBuilder};
use hotr_core::sdof::steady_spectrum;
use hotr_core::timedomain::{add_noise, closed_periodic_state, extract_harmonics, integrate_from};

#[derive(Parser)]
#[command(
    name = "hotr",
    version,
    about = "Breathing-crack beam analysis and crack identification"
)]
struct Cli {
    /// Experiment configuration (JSON); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nonlinear,
    Surrogate,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Full,
    Rb,
    Sub,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Full => ModelKind::Full,
            KindArg::Rb => ModelKind::Rb,
            KindArg::Sub => ModelKind::Sub,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the (cracked) mesh and its coordinate counts.
    Mesh,
    /// Lowest natural frequencies of the analysis model.
    Modes {
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, value_enum)]
        model: Option<KindArg>,
    },
    /// Harmonic-balance response at one frequency or over the sweep.
    SimulateHbm {
        #[arg(long)]
        sweep: bool,
        #[arg(long, value_enum)]
        model: Option<KindArg>,
    },
    /// Time integration to steady state, optionally with measurement noise.
    SimulateTime {
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, value_enum)]
        model: Option<KindArg>,
    },
    /// Build the reduced model of the configured crack.
    Reduce {
        #[arg(long, value_enum)]
        model: Option<KindArg>,
    },
    /// Higher-order transmissibility over the sweep.
    Hotr {
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
        order: u64,
        #[arg(long, value_enum)]
        model: Option<KindArg>,
    },
    /// Identify the crack from a measurement file or a synthetic measurement.
    Identify {
        /// JSON array of order-2 transmissibility records over all ordered
        /// sensor pairs at the configured frequency.
        #[arg(long)]
        measurement: Option<PathBuf>,
    },
    /// Repeated noisy identification of the configured crack.
    Montecarlo {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: Option<u64>,
    },
    /// Steady spectra of the healthy and cracked bilinear oscillator.
    SdofDemo {
        #[arg(long, default_value_t = 5)]
        harmonics: usize,
    },
    /// Construction and solution timings of the RB and SUB models.
    Bench {
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
    },
}

struct Outputs {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn json<T: Serialize>(&mut self, name: &str, units: serde_json::Value, data: &T) -> Result<()> {
        let doc = json!({
            "tool": "hotr",
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash,
            "units": units,
            "data": data,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, units: &str, header: &str, body: &str) -> Result<()> {
        let text = format!(
            "# hotr {}\n# config_hash: {}\n# units: {units}\n{header}\n{body}",
            env!("CARGO_PKG_VERSION"),
            self.hash
        );
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

fn omega(hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * hz
}

fn sub_builder(cfg: &ExperimentConfig, beam: Arc<Beam>) -> Result<SubBuilder> {
    SubBuilder::new(
        beam,
        cfg.rom.split,
        cfg.rom.modes,
        ExperimentConfig::cache_dir(),
    )
}

fn analysis_model(cfg: &ExperimentConfig, beam: &Arc<Beam>, kind: ModelKind) -> Result<Structure> {
    let crack = cfg.crack.as_ref();
    Ok(match kind {
        ModelKind::Full => beam.structure(crack)?,
        ModelKind::Rb => rb_model(beam, crack, cfg.rom.modes)?.structure,
        ModelKind::Sub => sub_builder(cfg, beam.clone())?.model(crack)?.structure,
    })
}

fn complex_units() -> serde_json::Value {
    json!({"length": "mm", "force": "N", "stress": "MPa", "strain": "1", "frequency": "Hz", "time": "s"})
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Command::Montecarlo {
        replicates: Some(r),
    } = cli.command
    {
        cfg.identification.replicates = r as usize;
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    cfg.validate()?;
    let mut out = Outputs {
        dir: cfg.output_dir.clone(),
        hash: cfg.hash(),
        written: Vec::new(),
    };
    let mut resolved = cfg.resolved_json();
    resolved.push('\n');
    out.write("config.resolved.json", resolved.as_bytes())?;

    let beam = Arc::new(Beam::new(cfg.beam.clone())?);
    let w = omega(cfg.frequency.freq_hz);
    let units = complex_units();
    let command = match cli.command {
        Command::Mesh => {
            let s = beam.structure(cfg.crack.as_ref())?;
            let mut nodes = Vec::new();
            s.mesh.write_nodes_csv(&mut nodes)?;
            let mut elems = Vec::new();
            s.mesh.write_elements_csv(&mut elems)?;
            let nodes = String::from_utf8(nodes).map_err(|e| Error::invalid(e.to_string()))?;
            let elems = String::from_utf8(elems).map_err(|e| Error::invalid(e.to_string()))?;
            let (nh, nb) = nodes.split_once('\n').unwrap_or((&nodes, ""));
            let (eh, eb) = elems.split_once('\n').unwrap_or((&elems, ""));
            out.csv("nodes.csv", "x_mm, y_mm [mm]", nh, nb)?;
            out.csv("elements.csv", "node indices", eh, eb)?;
            out.json(
                "mesh.json",
                units,
                &json!({
                    "nodes": s.mesh.nodes.len(),
                    "elements": s.mesh.elements.len(),
                    "dofs": s.system.n(),
                    "contact_pairs": s.system.nc(),
                    "forcing_nodes": beam.forcing_nodes().len(),
                    "sensor_elements": beam.sensor_elements(),
                    "crack": cfg.crack,
                }),
            )?;
            "mesh"
        }
        Command::Modes { count, model } => {
            let kind = model.map_or(cfg.rom.kind, ModelKind::from);
            let s = analysis_model(&cfg, &beam, kind)?;
            let modes = eigenmodes(&s.system, count as usize)?;
            out.json(
                "modes.json",
                units,
                &json!({"model": kind, "freqs_hz": modes.freqs_hz()}),
            )?;
            "modes"
        }
        Command::SimulateHbm { sweep, model } => {
            let kind = model.map_or(cfg.rom.kind, ModelKind::from);
            let s = analysis_model(&cfg, &beam, kind)?;
            let freqs = if sweep {
                cfg.frequency.sweep.freqs_hz()
            } else {
                vec![cfg.frequency.freq_hz]
            };
            let sols = if sweep {
                hbm::sweep(
                    &s.system,
                    &freqs.iter().map(|&f| omega(f)).collect::<Vec<_>>(),
                    cfg.aft,
                )?
            } else {
                vec![solve_mhb_with(&s.system, w, cfg.aft, None, &cfg.newton)]
            };
            let mut body = String::new();
            let mut failures = Vec::new();
            for (f, r) in freqs.iter().zip(&sols) {
                match r {
                    Ok(sol) => {
                        for (i, row) in s.sensors.iter().enumerate() {
                            for p in 0..=cfg.aft.harmonics {
                                let c = sol.output(row, p);
                                writeln!(body, "{f},{i},{p},{:e},{:e},{:e}", c.re, c.im, c.norm())
                                    .unwrap();
                            }
                        }
                    }
                    Err(e) => failures.push(json!({"freq_hz": f, "error": e.to_string()})),
                }
            }
            out.csv(
                "hbm.csv",
                "freq_hz [Hz], strain coefficients [1]",
                "freq_hz,sensor,order,re,im,abs",
                &body,
            )?;
            let residuals: Vec<Option<f64>> = sols
                .iter()
                .map(|r| r.as_ref().ok().map(|s| s.residual_norm))
                .collect();
            out.json(
                "hbm.json",
                units,
                &json!({"model": kind, "freqs_hz": freqs, "relative_residual": residuals, "failures": failures}),
            )?;
            "simulate-hbm"
        }
        Command::SimulateTime { noise, model } => {
            let kind = model.map_or(ModelKind::Full, ModelKind::from);
            let s = analysis_model(&cfg, &beam, kind)?;
            let (x0, v0) = closed_periodic_state(&s.system, w)?;
            let hist = integrate_from(&s.system, w, &s.sensors, &cfg.integrator, &x0, &v0)?;
            let level = noise.unwrap_or(0.0);
            let channels = hist
                .channels
                .iter()
                .enumerate()
                .map(|(c, ch)| add_noise(ch, level, cfg.seed, c as u64).map(|n| n.measured()))
                .collect::<Result<Vec<_>>>()?;
            let harmonics = channels
                .iter()
                .map(|ch| extract_harmonics(ch, hist.dt, hist.t0, w, cfg.aft.harmonics))
                .collect::<Result<Vec<_>>>()?;
            let mut body = String::new();
            for k in 0..hist.len() {
                write!(body, "{:e}", hist.t0 + k as f64 * hist.dt).unwrap();
                for ch in &channels {
                    write!(body, ",{:e}", ch[k]).unwrap();
                }
                body.push('\n');
            }
            let header = std::iter::once("t".to_string())
                .chain((0..channels.len()).map(|c| format!("sensor{c}")))
                .collect::<Vec<_>>()
                .join(",");
            out.csv("time.csv", "t [s], strain [1]", &header, &body)?;
            out.json(
                "harmonics.json",
                units,
                &json!({"model": kind, "noise_percent": level, "transient_periods": hist.transient_periods,
                        "orders": (1..=cfg.aft.harmonics).collect::<Vec<_>>(), "harmonics": harmonics}),
            )?;
            "simulate-time"
        }
        Command::Reduce { model } => {
            let kind = model.map_or(cfg.rom.kind, ModelKind::from);
            let report = match kind {
                ModelKind::Rb => {
                    let m = rb_model(&beam, cfg.crack.as_ref(), cfg.rom.modes)?;
                    json!({"model": kind, "size": rb_size_report(&m), "timing_s": m.timing})
                }
                ModelKind::Sub => {
                    let sb = sub_builder(&cfg, beam.clone())?;
                    let m = sb.model(cfg.crack.as_ref())?;
                    json!({"model": kind, "size": sb.size_report(&m), "timing_s": m.timing,
                           "offline_s": sb.offline_s, "loaded_from_cache": sb.loaded_from_cache})
                }
                ModelKind::Full => return Err(Error::invalid("reduce needs model rb or sub")),
            };
            out.json("reduce.json", units, &report)?;
            "reduce"
        }
        Command::Hotr {
            method,
            order,
            model,
        } => {
            let kind = model.map_or(cfg.rom.kind, ModelKind::from);
            let s = analysis_model(&cfg, &beam, kind)?;
            let p = order as usize;
            let pairs = upper_pairs(s.sensors.len());
            let freqs = cfg.frequency.sweep.freqs_hz();
            let omegas: Vec<f64> = freqs.iter().map(|&f| omega(f)).collect();
            let want_nl = !matches!(method, MethodArg::Surrogate);
            let want_s = !matches!(method, MethodArg::Nonlinear);
            let mut nl: Vec<Option<Vec<TransmissibilityRecord>>> = vec![None; omegas.len()];
            let mut sg: Vec<Option<Vec<TransmissibilityRecord>>> = vec![None; omegas.len()];
            let mut failures = Vec::new();
            if want_nl {
                for (i, r) in hbm::sweep(&s.system, &omegas, cfg.aft)?
                    .into_iter()
                    .enumerate()
                {
                    match r.and_then(|sol| tr_nonlinear(&sol, &s.sensors, &pairs, p)) {
                        Ok(t) => nl[i] = Some(t),
                        Err(e) => failures.push(json!({"freq_hz": freqs[i], "method": "nonlinear", "error": e.to_string()})),
                    }
                }
            }
            if want_s {
                for (i, &wi) in omegas.iter().enumerate() {
                    match tr_surrogate(&s.system, wi, &s.sensors, &pairs, p) {
                        Ok(t) => sg[i] = Some(t),
                        Err(e) => failures.push(json!({"freq_hz": freqs[i], "method": "surrogate", "error": e.to_string()})),
                    }
                }
            }
            let mut body = String::new();
            for (i, f) in freqs.iter().enumerate() {
                for recs in [&nl[i], &sg[i]].into_iter().flatten() {
                    for r in recs {
                        let m = serde_json::to_value(r.method)?;
                        writeln!(
                            body,
                            "{f},{},{},{},{:e},{:e},{:e}",
                            m.as_str().unwrap_or_default(),
                            r.m,
                            r.n,
                            r.value.re,
                            r.value.im,
                            r.value.norm()
                        )
                        .unwrap();
                    }
                }
            }
            out.csv(
                "hotr.csv",
                "freq_hz [Hz], transmissibility [1]",
                "freq_hz,method,m,n,re,im,abs",
                &body,
            )?;
            let comparison = if want_nl && want_s {
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for i in 0..freqs.len() {
                    if let (Some(x), Some(y)) = (&sg[i], &nl[i]) {
                        a.extend(x.iter().copied());
                        b.extend(y.iter().copied());
                    }
                }
                Some(compare(&a, &b)?)
            } else {
                None
            };
            out.json(
                "hotr.json",
                units,
                &json!({"model": kind, "order": p, "pairs": pairs, "comparison": comparison, "failures": failures}),
            )?;
            "hotr"
        }
        Command::Identify { measurement } => {
            let space = ParameterSpace::new(
                cfg.rom.split.crack_lines().collect(),
                cfg.identification.depths.clone(),
            )?;
            let forward = ForwardModel::new(Arc::new(sub_builder(&cfg, beam.clone())?), w)?;
            let measured: Vec<TransmissibilityRecord> = match &measurement {
                Some(p) => read_measurement(p)?,
                None => {
                    let crack = cfg.crack.ok_or_else(|| {
                        Error::invalid("a synthetic measurement needs a configured crack")
                    })?;
                    let integ = hotr_core::timedomain::IntegratorConfig {
                        record_periods: cfg.identification.record_periods,
                        ..cfg.integrator
                    };
                    let truth = synthesize_truth(&beam, &crack, w, &integ)?;
                    measure(
                        &truth,
                        forward.pairs(),
                        cfg.identification.noise_percent,
                        cfg.seed,
                    )?
                }
            };
            let ga = GaConfig {
                seed: cfg.seed,
                stop_below: cfg.ga.stop_below.or(Some(GaConfig::threshold_for_noise(
                    cfg.identification.noise_percent,
                ))),
                ..cfg.ga
            };
            let result = run_ga(&space, &ga, |t| {
                forward.objective(&space.crack(t), &measured)
            })?;
            out.json(
                "identification.json",
                json!({"j": "percent", "frequency": "Hz"}),
                &json!({"measurement": measurement, "freq_hz": cfg.frequency.freq_hz,
                        "l_c": result.crack.l_c(beam.nx()), "result": result}),
            )?;
            "identify"
        }
        Command::Montecarlo { .. } => {
            let crack = cfg
                .crack
                .ok_or_else(|| Error::invalid("montecarlo needs a configured crack"))?;
            let space = ParameterSpace::new(
                cfg.rom.split.crack_lines().collect(),
                cfg.identification.depths.clone(),
            )?;
            let forward = ForwardModel::new(Arc::new(sub_builder(&cfg, beam.clone())?), w)?;
            let integ = hotr_core::timedomain::IntegratorConfig {
                record_periods: cfg.identification.record_periods,
                ..cfg.integrator
            };
            let truth = synthesize_truth(&beam, &crack, w, &integ)?;
            let scenario = Scenario {
                crack,
                noise_percent: cfg.identification.noise_percent,
                replicates: cfg.identification.replicates,
                freq_hz: cfg.frequency.freq_hz,
                seed: cfg.seed,
            };
            let report = monte_carlo(&space, &cfg.ga, &scenario, &truth, &forward)?;
            let n = report.summary.completed.max(1) as f64;
            let mut body = String::new();
            for (line, count) in &report.summary.histogram {
                let l_c = 2.0 * *line as f64 / beam.nx() as f64 - 1.0;
                writeln!(body, "{line},{l_c:.4},{count},{:.6}", *count as f64 / n).unwrap();
            }
            out.csv(
                "histogram.csv",
                "l_c [1], probability [1]",
                "line,l_c,count,probability",
                &body,
            )?;
            out.json(
                "montecarlo.json",
                json!({"j": "percent", "location_error": "grid lines"}),
                &report,
            )?;
            "montecarlo"
        }
        Command::SdofDemo { harmonics } => {
            let healthy = steady_spectrum(&cfg.sdof_healthy, harmonics)?;
            let cracked = steady_spectrum(&cfg.sdof_cracked, harmonics)?;
            let mut body = String::new();
            for ((w, h), (_, c)) in healthy.iter().zip(&cracked) {
                writeln!(body, "{w},{h:e},{c:e}").unwrap();
            }
            out.csv(
                "sdof.csv",
                "omega [rad/s], amplitude [1]",
                "omega,healthy,cracked",
                &body,
            )?;
            let ratio = |s: &[(f64, f64)], p: usize| s[p].1 / s[1].1;
            out.json(
                "sdof.json",
                json!({"omega": "rad/s"}),
                &json!({"healthy": cfg.sdof_healthy, "cracked": cfg.sdof_cracked,
                        "healthy_x2_over_x1": ratio(&healthy, 2), "cracked_x2_over_x1": ratio(&cracked, 2),
                        "cracked_x3_over_x1": ratio(&cracked, 3)}),
            )?;
            "sdof-demo"
        }
        Command::Bench { runs } => {
            let crack = cfg
                .crack
                .ok_or_else(|| Error::invalid("bench needs a configured crack"))?;
            let sb = sub_builder(&cfg, beam.clone())?;
            let report = bench(
                &beam,
                &sb,
                &crack,
                cfg.frequency.freq_hz,
                cfg.aft,
                &cfg.newton,
                runs as usize,
            )?;
            out.json("bench.json", json!({"time": "s", "size": "DoFs"}), &report)?;
            "bench"
        }
    };
    Ok(json!({
        "command": command,
        "config_hash": out.hash,
        "outputs": out.written,
    }))
}

fn read_measurement(path: &Path) -> Result<Vec<TransmissibilityRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: format!("{}:{}", path.display(), e.path()),
        message: e.inner().to_string(),
    })
}

fn error_json(kind: &str, message: &str, path: Option<&str>) -> String {
    json!({"error": {"kind": kind, "message": message, "path": path}}).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim(), None));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let path = match &e {
                Error::Config { path, .. } => Some(path.as_str()),
                _ => None,
            };
            eprintln!("{}", error_json(e.kind(), &e.to_string(), path));
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
