//! The certify, lyapunov, simulate, wp and example pipelines.

use std::fs;
use std::path::{Path, PathBuf};

use levy_coupling::certificate::{
    certificate_constants, lyapunov_sweep, ContractionCertificate, LyapunovSweep, RadialGrid,
};
use levy_coupling::coupling::{
    psi_decay_estimate, run_ensemble, CoupledPath, CouplingMode, EnsembleSpec,
};
use levy_coupling::drift::{
    check_small_alpha_gate, small_alpha_gate_margin, verify_dissipativity, DissipativityReport,
    GateCheck,
};
use levy_coupling::psi::{build_psi, g_positivity_check, GReport, PsiSpec, RadialProfile};
use levy_coupling::quadrature::QuadConfig;
use levy_coupling::rng::stream;
use levy_coupling::wasserstein::{
    contraction_rate_fit, coupling_wp_upper, exact_empirical_wp_with_se, positive_prefix,
    EmpiricalMeasure, RateFit,
};

use crate::config::{DriftChoice, ExperimentConfig, Resolved};
use crate::{CliError, Status};

/// Largest ensemble fed to the exact `W_p` solver; larger runs use their first paths.
pub const EXACT_WP_PATHS: usize = 512;

/// Relative slack for deterministic comparisons that pass through the drift integrator.
pub const INTEGRATOR_SLACK: f64 = 1e-8;

const DRIFT_PROBES: usize = 20_000;
const G_GRID_POINTS: usize = 400;

pub const CERTIFICATE_FILE: &str = "certificate.txt";
pub const LYAPUNOV_FILE: &str = "lyapunov.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const DECAY_FILE: &str = "decay.csv";
pub const WP_FILE: &str = "wp.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub cert: ContractionCertificate,
    pub psi: PsiSpec,
    pub gate: GateCheck,
    pub g_report: GReport,
    pub drift_check: DissipativityReport,
    pub record: PathBuf,
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.join(name))
}

fn gate_and_psi(res: &Resolved) -> Result<(GateCheck, PsiSpec), CliError> {
    let gate = check_small_alpha_gate(&res.spec, &res.cond);
    if !gate.passed {
        return Err(CliError::new(
            Status::Gate,
            format!(
                "small-alpha gate failed: margin {:e} (need > 0)",
                gate.margin
            ),
        ));
    }
    Ok((gate, build_psi(&res.spec, &res.cond)?))
}

fn certify_resolved(
    res: &Resolved,
    cfg: &ExperimentConfig,
) -> Result<(CertifyOutcome, Vec<String>), CliError> {
    let (gate, psi) = gate_and_psi(res)?;
    let mut log = Vec::new();
    let radius = 4.0 * res.cond.l0.max(res.r0());
    let drift_check = verify_dissipativity(
        &res.field,
        &res.cond,
        DRIFT_PROBES,
        radius,
        &mut stream(cfg.seed, u64::MAX),
    )?;
    if drift_check.violations > 0 {
        return Err(CliError::new(
            Status::Certificate,
            format!(
                "drift condition violated in {} of {} probes (worst excess {:e} at x = {:?}, y = {:?})",
                drift_check.violations, drift_check.probes, drift_check.worst_margin, drift_check.witness.0, drift_check.witness.1
            ),
        ));
    }
    let l0 = res.cond.l0;
    let g_grid: Vec<f64> = (0..G_GRID_POINTS)
        .map(|i| l0 * (2.0 + 8.0 * i as f64 / (G_GRID_POINTS - 1) as f64))
        .collect();
    let g_report = g_positivity_check(&psi, &g_grid);
    if let Some(r) = g_report.failure {
        return Err(CliError::new(
            Status::Certificate,
            format!(
                "g-positivity failed at r = {r} (g(r1) = {:e})",
                g_report.g_r1
            ),
        ));
    }
    let cert = certificate_constants(
        &res.spec,
        &res.cond,
        cfg.p,
        &RadialGrid::standard(l0),
        &QuadConfig::default(),
    )?;
    if !cert.tail_increasing {
        log.push(format!(
            "warning: ratio still decreasing at r = {}; lambda2 is a grid infimum only",
            10.0 * l0
        ));
    }
    let record = out_file(cfg, CERTIFICATE_FILE)?;
    fs::write(&record, cert.to_string())?;
    Ok((
        CertifyOutcome {
            cert,
            psi,
            gate,
            g_report,
            drift_check,
            record,
        },
        log,
    ))
}

/// Gates, ψ construction, g-positivity, the radial sweep and the assembled
/// constants; writes the certificate record.
pub fn certify(cfg: &ExperimentConfig) -> Result<CertifyOutcome, CliError> {
    let res = cfg.resolve()?;
    let (outcome, log) = certify_resolved(&res, cfg)?;
    log.iter().for_each(|l| eprintln!("{l}"));
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct LyapunovOutcome {
    pub sweep: LyapunovSweep,
    pub csv: PathBuf,
}

/// Radial sweep of `-L̃ψ/ψ`, written as `r, generator_bound, psi, ratio`.
pub fn lyapunov(cfg: &ExperimentConfig) -> Result<LyapunovOutcome, CliError> {
    let res = cfg.resolve()?;
    let (_, psi) = gate_and_psi(&res)?;
    let sweep = lyapunov_sweep(
        &psi,
        &res.spec,
        &res.cond,
        &RadialGrid::standard(res.cond.l0),
        &QuadConfig::default(),
    )?;
    let csv = out_file(cfg, LYAPUNOV_FILE)?;
    let mut w = csv::Writer::from_path(&csv)?;
    w.write_record(["r", "generator_bound", "psi", "ratio"])?;
    for pt in &sweep.points {
        let value = psi.value(pt.r);
        w.write_record([pt.r, -pt.ratio * value, value, pt.ratio].map(|v| v.to_string()))?;
    }
    w.flush()?;
    let lambda = sweep.lambda_star();
    if !(lambda > 0.0) {
        return Err(CliError::new(
            Status::Certificate,
            format!("lambda* = {lambda:e} at r = {}", sweep.worst_r),
        ));
    }
    Ok(LyapunovOutcome { sweep, csv })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    pub mean: f64,
    pub std_err: f64,
    /// `ψ(r0) e^{-λ t}`
    pub bound: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub cert: ContractionCertificate,
    pub paths: Vec<CoupledPath>,
    pub decay: Vec<DecayRow>,
    pub fit: Option<RateFit>,
    pub flags: usize,
}

fn simulate_resolved(
    res: &Resolved,
    cfg: &ExperimentConfig,
    cert: &ContractionCertificate,
    psi: &PsiSpec,
) -> Result<SimulateOutcome, CliError> {
    let job = EnsembleSpec {
        x0: &res.x0,
        y0: &res.y0,
        field: &res.field,
        spec: &res.spec,
        psi,
        cfg: &res.scheme,
        horizon: cfg.horizon,
        record_grid: &res.grid,
    };
    let paths = run_ensemble(&job, cfg.paths, cfg.seed)?;
    write_paths(&out_file(cfg, PATHS_FILE)?, &paths, psi, res.spec.d())?;

    let psi_r0 = psi.value(res.r0());
    let decay: Vec<DecayRow> = psi_decay_estimate(&paths, psi)?
        .into_iter()
        .map(|pt| {
            let bound = psi_r0 * (-cert.lambda * pt.t).exp();
            let rel = if pt.mean > 0.0 {
                pt.std_err / pt.mean
            } else {
                0.0
            };
            DecayRow {
                t: pt.t,
                mean: pt.mean,
                std_err: pt.std_err,
                bound,
                flagged: pt.mean > bound * (1.0 + 3.0 * rel),
            }
        })
        .collect();
    let mut w = csv::Writer::from_path(out_file(cfg, DECAY_FILE)?)?;
    w.write_record(["t", "mean_psi", "std_err", "cert_bound", "flag"])?;
    for row in &decay {
        w.write_record([
            row.t.to_string(),
            row.mean.to_string(),
            row.std_err.to_string(),
            row.bound.to_string(),
            u8::from(row.flagged).to_string(),
        ])?;
    }
    w.flush()?;
    let series: Vec<(f64, f64, f64)> = decay.iter().map(|r| (r.t, r.mean, r.std_err)).collect();
    let fit = contraction_rate_fit(positive_prefix(&series)).ok();
    let flags = decay.iter().filter(|r| r.flagged).count();
    Ok(SimulateOutcome {
        cert: cert.clone(),
        paths,
        decay,
        fit,
        flags,
    })
}

/// Certificate, coupled ensemble, per-path CSV and ψ-decay CSV.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulateOutcome, CliError> {
    let res = cfg.resolve()?;
    let (certified, _) = certify_resolved(&res, cfg)?;
    simulate_resolved(&res, cfg, &certified.cert, &certified.psi)
}

/// Header of the per-path CSV.
pub fn paths_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["path_id", "t", "r", "psi_r", "merged"]
        .map(String::from)
        .to_vec();
    h.extend((1..=d).map(|i| format!("x_{i}")));
    h.extend((1..=d).map(|i| format!("y_{i}")));
    h
}

fn write_paths(
    file: &Path,
    paths: &[CoupledPath],
    psi: &PsiSpec,
    d: usize,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(file)?;
    w.write_record(paths_header(d))?;
    let mut row = Vec::with_capacity(5 + 2 * d);
    for (id, path) in paths.iter().enumerate() {
        for s in &path.records {
            let r = s.distance();
            row.clear();
            row.extend([
                id.to_string(),
                s.t.to_string(),
                r.to_string(),
                psi.value(r).to_string(),
                u8::from(s.merged).to_string(),
            ]);
            row.extend(s.x.iter().chain(&s.y).map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One time slice of a stored ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub t: f64,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Reads a per-path CSV back into time slices ordered by `path_id`.
pub fn read_paths(file: &Path, d: usize) -> Result<Vec<Slice>, CliError> {
    let mut reader = csv::Reader::from_path(file)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != paths_header(d) {
        return Err(CliError::usage(format!(
            "schema mismatch in {}: expected {:?}, got {header:?}",
            file.display(),
            paths_header(d)
        )));
    }
    // (t, x, y) rows per path.
    type Row = (f64, Vec<f64>, Vec<f64>);
    let mut by_path: Vec<Vec<Row>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let num = |i: usize| -> Result<f64, CliError> {
            record[i].parse().map_err(|e| {
                CliError::usage(format!("row {}: column {}: {e}", line + 2, header[i]))
            })
        };
        let id: usize = record[0]
            .parse()
            .map_err(|e| CliError::usage(format!("row {}: path_id: {e}", line + 2)))?;
        if id >= by_path.len() {
            if id != by_path.len() {
                return Err(CliError::usage(format!(
                    "row {}: path ids must be consecutive from 0",
                    line + 2
                )));
            }
            by_path.push(Vec::new());
        }
        let x = (5..5 + d).map(num).collect::<Result<Vec<_>, _>>()?;
        let y = (5 + d..5 + 2 * d).map(num).collect::<Result<Vec<_>, _>>()?;
        by_path[id].push((num(1)?, x, y));
    }
    let first = by_path
        .first()
        .ok_or_else(|| CliError::usage(format!("{} holds no paths", file.display())))?;
    let times: Vec<f64> = first.iter().map(|r| r.0).collect();
    if by_path
        .iter()
        .any(|p| p.len() != times.len() || p.iter().zip(&times).any(|(r, t)| r.0 != *t))
    {
        return Err(CliError::usage("paths are not recorded on a common grid"));
    }
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| Slice {
            t,
            pairs: by_path
                .iter()
                .map(|p| (p[k].1.clone(), p[k].2.clone()))
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpRow {
    pub t: f64,
    pub upper: f64,
    pub upper_se: f64,
    pub exact: f64,
    pub exact_se: f64,
    /// Certified right-hand side.
    pub bound: f64,
    /// `e^{-κt} |x0 - y0|` for linear drift under synchronous coupling.
    pub uniform_bound: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct WpOutcome {
    pub rows: Vec<WpRow>,
    pub flags: usize,
    pub exact_paths: usize,
}

fn wp_resolved(
    res: &Resolved,
    cfg: &ExperimentConfig,
    slices: &[Slice],
    cert: &ContractionCertificate,
) -> Result<WpOutcome, CliError> {
    let r0 = res.r0();
    let uniform = cfg.drift == DriftChoice::Linear && cfg.coupling == CouplingMode::Synchronous;
    let mut rows = Vec::with_capacity(slices.len());
    let mut exact_paths = 0;
    for slice in slices {
        let (upper, upper_se) = coupling_wp_upper(&slice.pairs, cfg.p)?;
        let m = slice.pairs.len().min(EXACT_WP_PATHS);
        exact_paths = m;
        let mu = EmpiricalMeasure::new(slice.pairs[..m].iter().map(|p| p.0.clone()).collect())?;
        let nu = EmpiricalMeasure::new(slice.pairs[..m].iter().map(|p| p.1.clone()).collect())?;
        let (exact, exact_se) = exact_empirical_wp_with_se(&mu, &nu, cfg.p)?;
        let bound = cert.wp_bound(r0, slice.t);
        let mut flagged = exact - bound > 3.0 * exact_se;
        let uniform_bound = uniform.then(|| (-cfg.kappa * slice.t).exp() * r0);
        if let Some(u) = uniform_bound {
            let rel = if upper > 0.0 { upper_se / upper } else { 0.0 };
            flagged |= upper > u * (1.0 + 3.0 * rel + INTEGRATOR_SLACK);
        }
        rows.push(WpRow {
            t: slice.t,
            upper,
            upper_se,
            exact,
            exact_se,
            bound,
            uniform_bound,
            flagged,
        });
    }
    let mut w = csv::Writer::from_path(out_file(cfg, WP_FILE)?)?;
    w.write_record([
        "t",
        "wp_upper",
        "wp_upper_se",
        "wp_exact",
        "wp_exact_se",
        "cert_bound",
        "uniform_bound",
        "flag",
    ])?;
    for r in &rows {
        w.write_record([
            r.t.to_string(),
            r.upper.to_string(),
            r.upper_se.to_string(),
            r.exact.to_string(),
            r.exact_se.to_string(),
            r.bound.to_string(),
            r.uniform_bound.map(|u| u.to_string()).unwrap_or_default(),
            u8::from(r.flagged).to_string(),
        ])?;
    }
    w.flush()?;
    let flags = rows.iter().filter(|r| r.flagged).count();
    Ok(WpOutcome {
        rows,
        flags,
        exact_paths,
    })
}

/// Coupling upper bound, exact empirical `W_p` and certified bound per grid time.
/// The certificate is read from `certificate` when given, else rebuilt.
pub fn wp(
    cfg: &ExperimentConfig,
    input: &Path,
    certificate: Option<&Path>,
) -> Result<WpOutcome, CliError> {
    let res = cfg.resolve()?;
    let cert = match certificate {
        Some(file) => ContractionCertificate::parse(&fs::read_to_string(file)?)?,
        None => certify_resolved(&res, cfg)?.0.cert,
    };
    if cert.p != cfg.p {
        return Err(CliError::usage(format!(
            "certificate was built for p = {}, config asks for p = {}",
            cert.p, cfg.p
        )));
    }
    let slices = read_paths(input, res.spec.d())?;
    wp_resolved(&res, cfg, &slices, &cert)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSummary {
    pub beta: f64,
    pub alpha: f64,
    pub p: f64,
    pub k1: f64,
    pub l0: f64,
    pub shrink_steps: usize,
    pub lambda_cert: f64,
    pub lambda_hat: Option<f64>,
    pub lambda_hat_se: Option<f64>,
    pub decay_flags: usize,
    pub wp_flags: usize,
}

impl ExampleSummary {
    pub fn to_record(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:e}"));
        format!(
            "beta = {}\nalpha = {}\np = {}\nk1 = {:e}\nl0 = {:e}\nshrink_steps = {}\nlambda_cert = {:e}\nlambda_hat = {}\nlambda_hat_se = {}\ndecay_flags = {}\nwp_flags = {}\n",
            self.beta,
            self.alpha,
            self.p,
            self.k1,
            self.l0,
            self.shrink_steps,
            self.lambda_cert,
            opt(self.lambda_hat),
            opt(self.lambda_hat_se),
            self.decay_flags,
            self.wp_flags
        )
    }
}

/// Halves `K1` and `L0` until the small-alpha gate holds.
pub fn shrink_for_gate(cfg: &mut ExperimentConfig) -> Result<usize, CliError> {
    let mut steps = 0;
    loop {
        let res = cfg.resolve()?;
        if small_alpha_gate_margin(&res.spec, &res.cond) > 0.0 || res.spec.alpha() > 1.0 {
            return Ok(steps);
        }
        if steps == 200 {
            return Err(CliError::new(
                Status::Gate,
                "small-alpha gate still fails after 200 halvings",
            ));
        }
        cfg.k1 = Some(res.cond.k1 * 0.5);
        cfg.l0 = Some(res.cond.l0 * 0.5);
        steps += 1;
        eprintln!(
            "gate: shrinking to k1 = {:e}, l0 = {:e}",
            res.cond.k1 * 0.5,
            res.cond.l0 * 0.5
        );
    }
}

/// Potential example end to end: certify, simulate, wp and a summary record.
pub fn example(
    base: &ExperimentConfig,
    beta: f64,
    alpha: f64,
    p: f64,
) -> Result<ExampleSummary, CliError> {
    if !(beta > 1.0) {
        return Err(CliError::usage(format!("beta must exceed 1, got {beta}")));
    }
    let mut cfg = ExperimentConfig {
        drift: DriftChoice::StablePotential,
        beta,
        alpha,
        p,
        ..base.clone()
    };
    let shrink_steps = shrink_for_gate(&mut cfg)?;
    let res = cfg.resolve()?;
    let (certified, log) = certify_resolved(&res, &cfg)?;
    log.iter().for_each(|l| eprintln!("{l}"));
    let sim = simulate_resolved(&res, &cfg, &certified.cert, &certified.psi)?;
    let slices: Vec<Slice> = (0..res.grid.len())
        .map(|k| Slice {
            t: sim.paths[0].records[k].t,
            pairs: sim
                .paths
                .iter()
                .map(|path| (path.records[k].x.clone(), path.records[k].y.clone()))
                .collect(),
        })
        .collect();
    let wp_out = wp_resolved(&res, &cfg, &slices, &certified.cert)?;
    let summary = ExampleSummary {
        beta,
        alpha,
        p,
        k1: res.cond.k1,
        l0: res.cond.l0,
        shrink_steps,
        lambda_cert: certified.cert.lambda,
        lambda_hat: sim.fit.map(|f| f.lambda_hat),
        lambda_hat_se: sim.fit.map(|f| f.std_err),
        decay_flags: sim.flags,
        wp_flags: wp_out.flags,
    };
    fs::write(out_file(&cfg, SUMMARY_FILE)?, summary.to_record())?;
    Ok(summary)
}
