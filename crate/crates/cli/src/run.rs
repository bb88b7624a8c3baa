//! Subcommand dispatch. Each task returns a JSON result plus optional CSV
//! tables and binary blobs; `main` decides where they go.

use crate::config::*;
use nalgebra::DMatrix;
use qpc_core::arithmetic::{beta_estimate, continued_fraction, resonances};
use qpc_core::cocycle::{
    acceleration, dual_cocycle, gap_label, lyapunov_spectrum, rotation_number, schrodinger_cocycle,
    subcritical_radius, GridParams, QuasiperiodicCocycle, SUBCRITICAL_THRESHOLD,
};
use qpc_core::localization::{decay_report, eigenpair_near};
use qpc_core::operators::{avg_log_det, det_p, duality_distance, greens, spectrum_sample, Side};
use qpc_core::reducibility::almost_reduce;
use qpc_core::wedge::{block_minor_expansion, block_tridiagonal, numerator_bound_check, th1_ratio_check};
use qpc_core::{Complex64, Error, TrigPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::fmt::Write;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

pub struct Output {
    pub result: Value,
    pub units: Value,
    pub tables: Vec<(String, String)>,
    pub blobs: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn json(result: Value, units: Value) -> Self {
        Output { result, units, tables: Vec::new(), blobs: Vec::new() }
    }

    fn table(mut self, name: &str, header: &str, rows: String) -> Self {
        self.tables.push((name.to_string(), format!("{header}\n{rows}")));
        self
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn side(s: SideArg) -> Side {
    match s {
        SideArg::Schrodinger => Side::Schrodinger,
        SideArg::Dual => Side::Dual,
    }
}

fn cocycle(v: &TrigPolynomial, e: f64, alpha: f64, s: SideArg) -> Result<QuasiperiodicCocycle, Error> {
    match s {
        SideArg::Schrodinger => Ok(schrodinger_cocycle(v, e, alpha)),
        SideArg::Dual => dual_cocycle(v, e, alpha),
    }
}

pub fn run(cfg: &RunConfig) -> Result<Output, RunError> {
    let freq = cfg.frequency()?;
    let alpha = freq.to_f64();
    let v = cfg.potential()?;
    let grid = |iterations, samples| GridParams { iterations, samples, seed: cfg.seed };
    Ok(match &cfg.task {
        Task::Arith(p) => {
            let cf = continued_fraction(&freq, p.depth)?;
            let res = resonances(p.theta, alpha, p.eps0, p.horizon)?;
            Output::json(
                json!({
                    "partial_quotients": cf.partial_quotients,
                    "convergents": cf.convergents,
                    "beta_proxy": beta_estimate(&cf)?,
                    "resonances": res,
                }),
                json!({"beta_proxy": "dimensionless", "distance": "‖2θ − nα‖ on R/Z"}),
            )
        }
        Task::Lyapunov(p) => {
            let mut rows = String::new();
            let mut summary = Vec::new();
            for e in cfg.energies()? {
                let c = cocycle(&v, e, alpha, p.side)?;
                for &eps in &p.eps_grid {
                    let s = lyapunov_spectrum(&c, eps, p.iters, p.samples, cfg.seed)?;
                    for k in 1..=c.half_dim() {
                        writeln!(rows, "{e},{eps},{k},{},{}", s.l(k), s.stderr[k - 1]).unwrap();
                    }
                    summary.push(json!({"energy": e, "spectrum": s}));
                }
            }
            Output::json(
                json!({"spectra": summary}),
                json!({"exponents": "nats per step", "eps": "imaginary phase shift"}),
            )
            .table("lyapunov.csv", "E,eps,k,Lk,stderr", rows)
        }
        Task::Accel(p) => {
            let mut rows = String::new();
            let mut fits = Vec::new();
            for e in cfg.energies()? {
                let c = cocycle(&v, e, alpha, p.side)?;
                let fit = acceleration(&c, p.k, &p.eps_grid, grid(p.iters, p.samples))?;
                for ((eps, l), se) in fit.eps_grid.iter().zip(&fit.values).zip(&fit.stderr) {
                    writeln!(rows, "{e},{eps},{},{l},{se}", p.k).unwrap();
                }
                fits.push(json!({"energy": e, "fit": fit}));
            }
            Output::json(json!({"fits": fits}), json!({"Lk": "nats per step", "omega": "integer"}))
                .table("accel.csv", "E,eps,k,Lk,stderr", rows)
        }
        Task::Rho(p) => {
            let mut out = Vec::new();
            for e in cfg.energies()? {
                let r = rotation_number(&schrodinger_cocycle(&v, e, alpha), p.iters, p.x0)?;
                let (k, dist) = gap_label(r.rho, alpha, p.kmax);
                out.push(json!({"energy": e, "rotation": r, "gap_label": k, "gap_label_distance": dist}));
            }
            Output::json(json!({"rotation_numbers": out}), json!({"rho": "turns per step"}))
        }
        Task::Regime(p) => regime(cfg, &v, alpha, p)?,
        Task::Det(p) => {
            let e = cfg.single_energy()?;
            let mut rows = String::new();
            for &th in &p.thetas {
                for &eps in &p.eps {
                    for &n in &p.n {
                        let d = det_p(&v, alpha, Complex64::new(th, eps), e, n);
                        writeln!(rows, "{th},{eps},{n},{},{}", d.log_abs, d.phase).unwrap();
                    }
                }
            }
            Output::json(
                json!({"energy": e, "rows": p.thetas.len() * p.eps.len() * p.n.len()}),
                json!({"log_abs_P": "nats", "phase": "radians in (−π, π]"}),
            )
            .table("det.csv", "theta,eps,n,log_abs_P,phase", rows)
        }
        Task::Green(p) => {
            let e = cfg.single_energy()?;
            let (x1, x2) = parse_interval(&p.interval)?;
            if x2 - x1 >= 400 {
                return Err(ConfigError("green interval longer than 400 sites".into()).into());
            }
            let pairs: Vec<(i64, i64)> = (x1..=x2).flat_map(|x| (x1..=x2).map(move |y| (x, y))).collect();
            let t = greens(&v, alpha, Complex64::new(p.theta, p.eps), e, x1, x2, &pairs)?;
            let mut rows = String::new();
            for g in &t.entries {
                writeln!(rows, "{},{},{},{}", g.x, g.y, g.value.re, g.value.im).unwrap();
            }
            Output::json(
                json!({"x1": x1, "x2": x2, "energy": e, "denominator": t.denominator, "condition": t.condition,
                       "cramer_max_rel_err": t.cramer_max_rel_err}),
                json!({"G": "complex, inverse energy"}),
            )
            .table("green.csv", "x,y,re_G,im_G", rows)
        }
        Task::Spectrum(p) => {
            let s = spectrum_sample(&v, alpha, p.sites, p.phases, side(p.side), p.drop_edge)?;
            let dist = if p.duality { Some(duality_distance(&v, alpha, p.sites, p.phases)?) } else { None };
            let rows: String = s.eigenvalues.iter().map(|e| format!("{e}\n")).collect();
            Output::json(
                json!({"side": s.side, "sites": s.sites, "phases": s.phases, "count": s.eigenvalues.len(),
                       "raw_count": s.raw_count, "edge_states_dropped": s.edge_states_dropped,
                       "min": s.eigenvalues.first(), "max": s.eigenvalues.last(), "duality_distance": dist}),
                json!({"E": "energy", "duality_distance": "Hausdorff distance in energy"}),
            )
            .table("spectrum.csv", "E", rows)
        }
        Task::Avgdet(p) => {
            let mut rows = String::new();
            for e in cfg.energies()? {
                for &eps in &p.eps_grid {
                    writeln!(rows, "{e},{eps},{},{}", p.n, avg_log_det(&v, alpha, e, p.n, eps, p.grid)?).unwrap();
                }
            }
            Output::json(json!({"n": p.n, "grid": p.grid}), json!({"avg": "nats per site"}))
                .table("avgdet.csv", "E,eps,n,avg", rows)
        }
        Task::Wedge(p) => wedge(cfg, &v, alpha, p)?,
        Task::Localize(p) => {
            let es = cfg.energies()?;
            let target = *es.get(p.energy_index).ok_or_else(|| {
                ConfigError(format!("energy index {} outside {} energies", p.energy_index, es.len()))
            })?;
            let pair = eigenpair_near(&v, alpha, p.theta, target, p.sites)?;
            let res = resonances(pair.theta, alpha, p.eps0, p.sites as u64)?;
            let rep = decay_report(&pair, &res, p.c0, p.eta)?;
            let mut out = Output::json(to_value(&rep), json!({"masked_decay_rate": "nats per site"}));
            if p.dump {
                let mut rows = String::new();
                for (i, l) in rep.log_abs.iter().enumerate() {
                    let j = rep.lo + i as i64;
                    let masked = rep.windows.iter().any(|w| w.contains(j));
                    writeln!(rows, "{j},{l},{}", masked as u8).unwrap();
                }
                out = out.table("localize.csv", "j,ln_abs_u,masked", rows);
            }
            out
        }
        Task::Reduce(p) => {
            if p.radii.is_empty() {
                return Err(ConfigError("reduce needs --radii".into()).into());
            }
            let cf = continued_fraction(&freq, 40)?;
            let params = qpc_core::reducibility::ReduceParams {
                r_list: p.radii.clone(),
                scales: p.scales.clone(),
                c0: p.c0,
                eps0: p.eps0,
                eta: p.eta,
                phase: p.theta,
                h: p.h,
                grid: GridParams { seed: cfg.seed, ..GridParams::default() },
                ..Default::default()
            };
            let reps = almost_reduce(&v, alpha, &cf, cfg.single_energy()?, &params)?;
            let mut out = Output::json(to_value(&reps), json!({"errors": "sup-norm on |Im z| ≤ r", "r": "strip half-width"}));
            if p.dump {
                for r in &reps {
                    let mut buf = Vec::new();
                    r.b.write_dump(&mut buf).expect("in-memory write");
                    out.blobs.push((format!("b_{}.bin", r.scale), buf));
                }
            }
            out
        }
    })
}

fn regime(cfg: &RunConfig, v: &TrigPolynomial, alpha: f64, p: &RegimeParams) -> Result<Output, RunError> {
    let g = GridParams { iterations: p.iters, samples: p.samples, seed: cfg.seed };
    let mut rows = String::new();
    let mut out = Vec::new();
    for e in cfg.energies()? {
        let c = schrodinger_cocycle(v, e, alpha);
        let s0 = lyapunov_spectrum(&c, 0.0, p.iters, p.samples, cfg.seed)?;
        let l0 = s0.l(1);
        let fit = acceleration(&c, 1, &p.eps_grid, g)?;
        let regime = match (l0 < SUBCRITICAL_THRESHOLD, fit.omega == 0) {
            (true, true) => "subcritical",
            (true, false) => "critical",
            (false, true) => "uh",
            (false, false) => "supercritical",
        };
        let h = if regime == "subcritical" { Some(subcritical_radius(&c, &p.h_grid, p.strip_bound, g)?) } else { None };
        writeln!(rows, "{e},0,1,{l0},{}", s0.stderr[0]).unwrap();
        for ((eps, l), se) in fit.eps_grid.iter().zip(&fit.values).zip(&fit.stderr) {
            writeln!(rows, "{e},{eps},1,{l},{se}").unwrap();
        }
        out.push(json!({
            "energy": e, "L0": l0, "L0_stderr": s0.stderr[0], "omega": fit.omega, "omega_raw": fit.omega_raw,
            "regime": regime, "h": h.as_ref().map(|x| x.h), "h_capped": h.as_ref().map(|x| x.capped),
        }));
    }
    Ok(Output::json(
        json!({"energies": out, "threshold": SUBCRITICAL_THRESHOLD}),
        json!({"L0": "nats per step", "h": "imaginary phase height", "omega": "integer"}),
    )
    .table("regime.csv", "E,eps,k,Lk,stderr", rows))
}

fn wedge(cfg: &RunConfig, v: &TrigPolynomial, alpha: f64, p: &WedgeParams) -> Result<Output, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let units = json!({"worst_margin": "relative (th1, lat) or nats (bound)"});
    let result = match p.check {
        WedgeCheck::Th1 => {
            let energies: Vec<f64> = (0..p.draws).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let thetas: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let rep = th1_ratio_check(v, alpha, &energies, &thetas, &p.ks, &p.rows, &p.cols)?;
            let c = rep.empirical_c;
            let passes = rep.samples.iter().filter(|s| (s.ratio - c).norm() <= p.tol * c.norm()).count();
            json!({"passes": passes, "failures": rep.samples.len() - passes, "worst_margin": p.tol - rep.max_rel_spread,
                   "empirical_C": [c.re, c.im], "skipped_zero": rep.skipped_zero, "convention": rep.convention})
        }
        WedgeCheck::Lat => {
            let d = v.degree().max(1);
            let (mut passes, mut worst) = (0, f64::INFINITY);
            for _ in 0..p.draws {
                let mut cm = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let a = DMatrix::from_fn(d, d, |_, _| cm());
                let b0 = DMatrix::from_fn(d, d, |_, _| cm());
                let b = (&b0 + b0.adjoint()) * Complex64::new(0.5, 0.0);
                let m = block_tridiagonal(&a, &b, p.blocks);
                let i = p.k0 * d + 1 + rng.gen_range(0..d);
                let j = (p.blocks - 1) * d + 1 + rng.gen_range(0..d);
                let r = block_minor_expansion(&m, d, p.blocks, i, j, p.k0)?;
                passes += r.holds as usize;
                worst = worst.min(if r.rhs > 0.0 { (r.rhs - r.lhs) / r.rhs } else { 0.0 });
            }
            json!({"passes": passes, "failures": p.draws - passes, "worst_margin": worst, "empirical_C": null})
        }
        WedgeCheck::Bound => {
            let e = cfg.single_energy()?;
            let gammas = lyapunov_spectrum(&dual_cocycle(v, e, alpha)?, 0.0, 20_000, 64, cfg.seed)?.exponents;
            let d = v.degree() as i64;
            let ys: Vec<i64> = (1..=10).map(|t| 5 * t * d).collect();
            let (mut passes, mut failures, mut worst) = (0, 0, f64::INFINITY);
            for _ in 0..p.draws {
                let theta = rng.gen_range(0.0..1.0);
                let x = rng.gen_range(0..d);
                let r = numerator_bound_check(v, alpha, theta, e, 0, 60, x, &ys, p.eps, &gammas)?;
                for en in &r.entries {
                    if en.margin >= 0.0 {
                        passes += 1;
                    } else {
                        failures += 1;
                    }
                }
                worst = worst.min(r.min_margin);
            }
            json!({"passes": passes, "failures": failures, "worst_margin": worst, "empirical_C": null, "gammas": gammas})
        }
    };
    Ok(Output::json(result, units))
}
