//! Classify → certify → choose data → simulate → energy post-pass.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, GradingKind};
use crate::energetics::{
    energy_record, fit_f_d_scaling, odi_blowup_bound, verify_energy_identity, EnergyRecord,
    IdentityReport, OdiParams, ScalingFit,
};
use crate::error::{Error, Result};
use crate::grid::{Grading, RadialField, RadialGrid};
use crate::initdata::{
    build_u0, build_v0, check_divergence, discrete_norms, energy_of_family, eta_ladder,
    verify_uniform_bounds, FamilyEnergy, InitialDataSpec, UniformNorms, UniformityReport,
};
use crate::motility::MotilityModel;
use crate::regime::{certify_admissibility, classify_model, AdmissibilityCertificate, Regime, RegimeVerdict};
use crate::report::{fmt_f64, write_json, CsvTable};
use crate::solver::{run, RunSummary, SolverConfig, StateSnapshot};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub force: bool,
    pub dry_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub n: usize,
    pub radius: f64,
    pub cells: usize,
    pub grading: Grading,
    pub h_min: f64,
}

impl GridInfo {
    pub fn of(grid: &RadialGrid) -> Self {
        Self {
            n: grid.n(),
            radius: grid.radius(),
            cells: grid.cells(),
            grading: grid.grading(),
            h_min: grid.h_min(),
        }
    }
}

/// Everything fixed before time stepping starts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: MotilityModel,
    pub verdict: RegimeVerdict,
    pub certificate: Option<AdmissibilityCertificate>,
    pub certificate_error: Option<String>,
    pub spec: InitialDataSpec,
    pub grid: Arc<RadialGrid>,
    pub solver: SolverConfig,
}

impl Prepared {
    pub fn kappa(&self) -> f64 {
        let n = self.spec.n as f64;
        (n - self.spec.p) / self.spec.p
    }
}

pub fn build_grid(cfg: &ExperimentConfig, n: usize, radius: f64, eta: f64) -> Result<Arc<RadialGrid>> {
    let g = match cfg.grid.grading {
        GradingKind::Uniform => RadialGrid::uniform(n, radius, cfg.grid.cells)?,
        GradingKind::Geometric => RadialGrid::graded(n, radius, cfg.grid.cells, eta / cfg.grid.resolve)?,
    };
    Ok(Arc::new(g))
}

/// Runs every step that precedes the simulation.
///
/// Non-FTBU verdicts are refused unless `force` is set. When certification
/// fails, θ must come from `initdata.theta`.
pub fn prepare(cfg: &ExperimentConfig, force: bool) -> Result<Prepared> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let verdict = classify_model(&model);
    if verdict.regime != Regime::Ftbu && !force {
        return Err(Error::Refused(format!(
            "classifier returns {} for n = {}, m = {}, q = {}; use --force to simulate anyway",
            verdict.regime, verdict.n, verdict.m, verdict.q
        )));
    }
    let (certificate, certificate_error) = match certify_admissibility(
        &model,
        cfg.certificate.s_max,
        cfg.certificate.samples,
        cfg.certificate.theta,
    ) {
        Ok(c) => (Some(c), None),
        Err(e @ (Error::Certification { .. } | Error::Infeasible(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let theta = match (cfg.initdata.theta, &certificate) {
        (Some(t), _) => t,
        (None, Some(c)) => c.theta(),
        (None, None) => {
            return Err(Error::Refused(format!(
                "admissibility certification failed ({}); set initdata.theta to construct data anyway",
                certificate_error.as_deref().unwrap_or("unknown reason")
            )))
        }
    };
    let model = match &certificate {
        Some(c) => model.with_certificate(c.clone()),
        None => model,
    };
    let spec = InitialDataSpec::choose(&model, theta, cfg.initdata.mass, &cfg.initdata.overrides)?;
    let eta = cfg.initdata.eta(spec.eta0);
    let spec = spec.with_eta(eta)?;
    let grid = build_grid(cfg, spec.n, spec.radius, eta)?;
    let kappa = (spec.n as f64 - spec.p) / spec.p;
    let solver = cfg.solver.resolve(spec.alpha, kappa);
    solver.validate()?;
    Ok(Prepared {
        model,
        verdict,
        certificate,
        certificate_error,
        spec,
        grid,
        solver,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub dt: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub env_u: f64,
    pub env_v: f64,
    pub energy: EnergyRecord,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: u64,
    pub state: StateSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "F_final")]
    pub f_final: f64,
    pub records: usize,
    pub identity: Option<IdentityReport>,
    pub monotone_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdiSummary {
    pub c1_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "T_bound")]
    pub t_bound: Option<f64>,
    pub t_detect: Option<f64>,
    pub fit: Option<ScalingFit>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeConstants {
    /// Running max of sup r^α u.
    #[serde(rename = "A")]
    pub a: f64,
    /// Running max of sup r^κ v.
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub verdict: RegimeVerdict,
    pub certificate: Option<AdmissibilityCertificate>,
    pub certificate_error: Option<String>,
    pub forced: bool,
    pub s0: f64,
    pub data: InitialDataSpec,
    pub a_eta: f64,
    pub grid: GridInfo,
    pub solver: SolverConfig,
    pub dry_run: bool,
    pub outcome: Option<crate::solver::Outcome>,
    pub run: Option<RunSummary>,
    pub envelope: Option<EnvelopeConstants>,
    pub energy: Option<EnergySummary>,
    pub odi: Option<OdiSummary>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub trace: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
}

/// Builds the initial state for a prepared pipeline; also returns a_η.
pub fn initial_state(p: &Prepared) -> Result<(StateSnapshot, f64)> {
    let u = build_u0(&p.spec, &p.grid)?;
    let v = build_v0(&p.spec, &p.grid)?;
    Ok((StateSnapshot::new(0.0, u.field, v)?, u.a_eta))
}

/// Simulates a prepared pipeline from `initial`, recording trace and snapshots.
pub fn simulate(
    p: &Prepared,
    initial: StateSnapshot,
    trace_stride: u64,
    snapshot_stride: u64,
) -> Result<(RunSummary, Vec<TraceRow>, Vec<Snapshot>)> {
    let mut trace = Vec::new();
    let mut snaps = Vec::new();
    let (alpha, kappa) = (p.solver.monitor_alpha, p.solver.monitor_kappa);
    let model = &p.model;
    let mut observer = |s: &StateSnapshot, step: u64, dt: f64, last: bool| -> Result<()> {
        if step % trace_stride == 0 || last {
            let (env_u, env_v) = crate::solver::envelope_monitor(s, alpha, kappa);
            trace.push(TraceRow {
                step,
                dt,
                sup_u: s.u.max(),
                sup_v: s.v.max(),
                env_u,
                env_v,
                energy: energy_record(s, model)?,
            });
        }
        let snap_due = if snapshot_stride == 0 { step == 0 } else { step % snapshot_stride == 0 };
        if snap_due || last {
            snaps.push(Snapshot {
                step,
                state: s.clone(),
            });
        }
        Ok(())
    };
    let (summary, _) = run(initial, &p.model, &p.solver, &mut observer)?;
    Ok((summary, trace, snaps))
}

fn summarize_energy(trace: &[TraceRow]) -> Option<EnergySummary> {
    let first = trace.first()?;
    let last = trace.last()?;
    let records: Vec<EnergyRecord> = dedup_times(trace);
    let identity = verify_energy_identity(&records).ok();
    let monotone_violations = records.windows(2).filter(|w| w[1].f > w[0].f).count();
    Some(EnergySummary {
        f0: first.energy.f,
        f_final: last.energy.f,
        records: trace.len(),
        identity,
        monotone_violations,
    })
}

/// Energy records with strictly increasing times.
fn dedup_times(trace: &[TraceRow]) -> Vec<EnergyRecord> {
    let mut out: Vec<EnergyRecord> = Vec::with_capacity(trace.len());
    for row in trace {
        if out.last().map_or(true, |r| row.energy.t > r.t) {
            out.push(row.energy);
        }
    }
    out
}

fn summarize_odi(trace: &[TraceRow], n: usize, summary: &RunSummary) -> Option<OdiSummary> {
    let f0 = trace.first()?.energy.f;
    let records: Vec<EnergyRecord> = trace.iter().map(|r| r.energy).collect();
    let t_detect = summary.outcome.is_blowup().then_some(summary.t_final);
    let (fit, note) = match fit_f_d_scaling(&records, n) {
        Ok(fit) => (Some(fit), "constants fitted empirically".to_string()),
        Err(e) => (None, e.to_string()),
    };
    let bound = fit.and_then(|f| {
        OdiParams::new(f.c1_hat, f.gamma_hat)
            .ok()
            .and_then(|odi| odi_blowup_bound(f0, &odi))
    });
    let note = match (&fit, &bound) {
        (Some(_), None) => format!("{note}; bound hypothesis not met (needs F0 < -2 c1 and 0 < gamma < 1)"),
        _ => note,
    };
    Some(OdiSummary {
        c1_hat: fit.map(|f| f.c1_hat),
        gamma_hat: fit.map(|f| f.gamma_hat),
        f0,
        t_bound: bound.map(|b| b.t_bound),
        t_detect,
        fit,
        note,
    })
}

/// Full pipeline; writes nothing to disk.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunArtifacts> {
    let p = prepare(cfg, opts.force)?;
    let (initial, a_eta) = initial_state(&p)?;
    let mut report = RunReport {
        version: VERSION.to_string(),
        config: cfg.clone(),
        verdict: p.verdict.clone(),
        certificate: p.certificate.clone(),
        certificate_error: p.certificate_error.clone(),
        forced: opts.force && p.verdict.regime != Regime::Ftbu,
        s0: p.model.params().s0,
        data: p.spec.clone(),
        a_eta,
        grid: GridInfo::of(&p.grid),
        solver: p.solver.clone(),
        dry_run: opts.dry_run,
        outcome: None,
        run: None,
        envelope: None,
        energy: None,
        odi: None,
    };
    if opts.dry_run {
        return Ok(RunArtifacts {
            report,
            trace: Vec::new(),
            snapshots: Vec::new(),
        });
    }
    let (summary, trace, snapshots) = simulate(
        &p,
        initial,
        cfg.outputs.trace_stride,
        cfg.outputs.snapshot_stride,
    )?;
    report.outcome = Some(summary.outcome);
    report.envelope = Some(EnvelopeConstants {
        a: summary.peak_envelope_u,
        b: summary.peak_envelope_v,
        alpha: p.solver.monitor_alpha,
        kappa: p.solver.monitor_kappa,
    });
    report.energy = summarize_energy(&trace);
    report.odi = summarize_odi(&trace, p.spec.n, &summary);
    report.run = Some(summary);
    Ok(RunArtifacts {
        report,
        trace,
        snapshots,
    })
}

pub const TRACE_COLUMNS: [&str; 15] = [
    "step", "t", "mass_u", "mass_v", "sup_u", "sup_v", "F", "D", "grad_v_term", "v2_term",
    "uv_term", "G_term", "env_u", "env_v", "dt",
];

pub fn trace_table(trace: &[TraceRow]) -> CsvTable {
    let mut t = CsvTable::new(TRACE_COLUMNS);
    for r in trace {
        let e = &r.energy;
        t.push_numbers(&[
            r.step as f64,
            e.t,
            e.mass_u,
            e.mass_v,
            r.sup_u,
            r.sup_v,
            e.f,
            e.d,
            e.terms.gradient,
            e.terms.v_square,
            e.terms.coupling,
            e.terms.g_integral,
            r.env_u,
            r.env_v,
            r.dt,
        ]);
    }
    t
}

/// Profile CSV `r, u, v` with enough metadata to rebuild the grid.
pub fn snapshot_table(state: &StateSnapshot, step: u64) -> CsvTable {
    let grid = state.grid();
    let mut t = CsvTable::new(["r", "u", "v"]);
    t.meta("t", fmt_f64(state.t))
        .meta("step", step)
        .meta("n", grid.n())
        .meta("radius", fmt_f64(grid.radius()))
        .meta("cells", grid.cells());
    match grid.grading() {
        Grading::Uniform => {
            t.meta("grading", "uniform");
        }
        Grading::Geometric { h_min, .. } => {
            t.meta("grading", "geometric").meta("h_min", fmt_f64(h_min));
        }
    }
    for ((&r, &u), &v) in grid.centers().iter().zip(state.u.values()).zip(state.v.values()) {
        t.push_numbers(&[r, u, v]);
    }
    t
}

fn meta<'a>(t: &'a CsvTable, key: &str) -> Result<&'a str> {
    t.meta_value(key)
        .ok_or_else(|| Error::Config(format!("snapshot lacks metadata `{key}`")))
}

fn meta_num<T: std::str::FromStr>(t: &CsvTable, key: &str) -> Result<T> {
    meta(t, key)?
        .parse()
        .map_err(|_| Error::Config(format!("snapshot metadata `{key}` is malformed")))
}

/// Rebuilds a state from [`snapshot_table`] output.
pub fn read_snapshot(table: &CsvTable) -> Result<StateSnapshot> {
    let n: usize = meta_num(table, "n")?;
    let radius: f64 = meta_num(table, "radius")?;
    let cells: usize = meta_num(table, "cells")?;
    let grid = match meta(table, "grading")? {
        "uniform" => RadialGrid::uniform(n, radius, cells)?,
        "geometric" => RadialGrid::graded(n, radius, cells, meta_num(table, "h_min")?)?,
        other => return Err(Error::Config(format!("unknown grading {other:?}"))),
    };
    let grid = Arc::new(grid);
    let r = table.column("r")?;
    if r.len() != grid.cells()
        || r.iter().zip(grid.centers()).any(|(a, b)| (a - b).abs() > 1e-12 * radius)
    {
        return Err(Error::Config("snapshot radii do not match its grid metadata".into()));
    }
    StateSnapshot::new(
        meta_num(table, "t")?,
        RadialField::new(grid.clone(), table.column("u")?)?,
        RadialField::new(grid, table.column("v")?)?,
    )
}

/// Writes report.json, trace.csv and snapshots/ under `dir`.
pub fn write_artifacts(dir: &Path, art: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &art.report)?;
    if art.report.dry_run {
        return Ok(());
    }
    let mut trace = trace_table(&art.trace);
    trace
        .meta("s0", fmt_f64(art.report.s0))
        .meta("outcome", art.report.outcome.map_or("none".into(), |o| format!("{o:?}")));
    trace.write(&dir.join("trace.csv"))?;
    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir)?;
    for s in &art.snapshots {
        snapshot_table(&s.state, s.step).write(&snap_dir.join(format!("snap_{:08}.csv", s.step)))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub cells: usize,
    pub h_min: f64,
    pub cfl_safety: f64,
    pub outcome: crate::solver::Outcome,
    pub t_final: f64,
    pub steps: u64,
    pub mass_residual: f64,
    pub identity_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub from_level: usize,
    pub to_level: usize,
    pub mass_order: Option<f64>,
    pub identity_order: Option<f64>,
    pub t_shift: f64,
    pub t_shift_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementTable {
    pub levels: Vec<LevelResult>,
    pub orders: Vec<OrderRow>,
}

fn log2_ratio(coarse: Option<f64>, fine: Option<f64>) -> Option<f64> {
    match (coarse, fine) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
        _ => None,
    }
}

/// Reruns with cells ×2, h_min /2 and CFL safety /2 per level.
pub fn refinement_study(cfg: &ExperimentConfig, levels: usize, force: bool) -> Result<RefinementTable> {
    if levels < 2 {
        return Err(Error::Precondition(format!("refinement needs levels >= 2, got {levels}")));
    }
    let results = (0..levels)
        .into_par_iter()
        .map(|level| {
            let mut c = cfg.clone();
            let k = 1usize << level;
            c.grid.cells *= k;
            c.grid.resolve *= k as f64;
            let base = cfg.solver.resolve(1.0, 1.0);
            c.solver.cfl_safety = Some(base.cfl_safety / k as f64);
            c.solver.dt_max = Some(base.dt_max / k as f64);
            let art = run_experiment(&c, RunOptions { force, dry_run: false })?;
            let run = art.report.run.as_ref().expect("simulated");
            Ok(LevelResult {
                level,
                cells: art.report.grid.cells,
                h_min: art.report.grid.h_min,
                cfl_safety: art.report.solver.cfl_safety,
                outcome: run.outcome,
                t_final: run.t_final,
                steps: run.steps,
                mass_residual: (run.mass_final - run.mass_initial).abs() / run.mass_initial,
                identity_median: art
                    .report
                    .energy
                    .as_ref()
                    .and_then(|e| e.identity.map(|i| i.median_residual)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut orders: Vec<OrderRow> = Vec::new();
    for w in results.windows(2) {
        let t_shift = w[1].t_final - w[0].t_final;
        let t_shift_order = orders
            .last()
            .and_then(|prev| log2_ratio(Some(prev.t_shift.abs()), Some(t_shift.abs())));
        orders.push(OrderRow {
            from_level: w[0].level,
            to_level: w[1].level,
            mass_order: log2_ratio(Some(w[0].mass_residual), Some(w[1].mass_residual)),
            identity_order: log2_ratio(w[0].identity_median, w[1].identity_median),
            t_shift,
            t_shift_order,
        });
    }
    Ok(RefinementTable {
        levels: results,
        orders,
    })
}

pub fn refinement_csv(table: &RefinementTable) -> CsvTable {
    let opt = |x: Option<f64>| x.map_or("nan".to_string(), fmt_f64);
    let mut t = CsvTable::new([
        "from_level",
        "to_level",
        "cells",
        "mass_residual",
        "identity_median",
        "t_final",
        "mass_order",
        "identity_order",
        "t_shift",
        "t_shift_order",
    ]);
    for l in &table.levels {
        t.meta(
            format!("level {}", l.level),
            format!(
                "cells={} h_min={} cfl={} outcome={:?} steps={}",
                l.cells,
                fmt_f64(l.h_min),
                fmt_f64(l.cfl_safety),
                l.outcome,
                l.steps
            ),
        );
    }
    for o in &table.orders {
        let fine = &table.levels[o.to_level];
        t.push_strings(vec![
            o.from_level.to_string(),
            o.to_level.to_string(),
            fine.cells.to_string(),
            fmt_f64(fine.mass_residual),
            opt(fine.identity_median),
            fmt_f64(fine.t_final),
            opt(o.mass_order),
            opt(o.identity_order),
            fmt_f64(o.t_shift),
            opt(o.t_shift_order),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub data: InitialDataSpec,
    pub grid: GridInfo,
    pub energies: Vec<FamilyEnergy>,
    pub divergent: bool,
    pub uniformity: Option<UniformityReport>,
    pub uniformity_error: Option<String>,
}

/// F and the uniform bounds over η₀/2, …, η₀/2^halvings on one grid resolving the smallest η.
pub fn sweep_eta(cfg: &ExperimentConfig, halvings: usize, force: bool) -> Result<SweepReport> {
    let p = prepare(cfg, force)?;
    let etas = eta_ladder(p.spec.eta0, halvings);
    let grid = build_grid(cfg, p.spec.n, p.spec.radius, *etas.last().expect("halvings >= 1"))?;
    let energies = energy_of_family(&p.model, &p.spec, &etas, &grid)?;
    let values: Vec<f64> = energies.iter().map(|e| e.terms.total()).collect();
    let divergent = values.windows(2).all(|w| w[1] < w[0]) && check_divergence(&values, 3, 10.0);
    let (uniformity, uniformity_error) = match verify_uniform_bounds(&p.spec, &etas, &grid, 2, 1.05) {
        Ok(r) => (Some(r), None),
        Err(e @ Error::Uniformity { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(SweepReport {
        data: p.spec,
        grid: GridInfo::of(&grid),
        energies,
        divergent,
        uniformity,
        uniformity_error,
    })
}

pub fn sweep_csv(rep: &SweepReport) -> CsvTable {
    let mut t = CsvTable::new(["eta", "F", "grad_v_term", "v2_term", "uv_term", "G_term"]);
    t.meta("n", rep.data.n)
        .meta("alpha", fmt_f64(rep.data.alpha))
        .meta("divergent", rep.divergent);
    for e in &rep.energies {
        let x = &e.terms;
        t.push_numbers(&[e.eta, x.total(), x.gradient, x.v_square, x.coupling, x.g_integral]);
    }
    t
}

/// Sampled initial pair plus its norms.
#[derive(Debug, Clone)]
pub struct InitData {
    pub spec: InitialDataSpec,
    pub a_eta: f64,
    pub u: RadialField,
    pub v: RadialField,
    pub norms: UniformNorms,
}

pub fn init_data(cfg: &ExperimentConfig, force: bool) -> Result<InitData> {
    let p = prepare(cfg, force)?;
    let (state, a_eta) = initial_state(&p)?;
    Ok(InitData {
        norms: discrete_norms(&p.spec, &p.grid)?,
        spec: p.spec,
        a_eta,
        u: state.u,
        v: state.v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL: &str = "[model]\nn = 3\nradius = 1.0\nm = 1.0\nq = 1.0\n\n[initdata]\nmass = 20.0\neta_halvings = 3\n\n[grid]\ncells = 64\n\n[solver]\nt_end = 1e-5\n";

    #[test]
    fn dry_run_reports_parameters_only() {
        let cfg = parse_config(SMALL).unwrap();
        let art = run_experiment(&cfg, RunOptions { force: false, dry_run: true }).unwrap();
        assert!(art.report.run.is_none());
        assert_eq!(art.report.verdict.regime, Regime::Ftbu);
        assert_eq!(art.report.data.alpha, 4.0);
        assert!(art.trace.is_empty());
    }

    #[test]
    fn gb_point_is_refused_without_force() {
        let text = SMALL.replace("m = 1.0\nq = 1.0", "m = 1.2\nq = 0.5");
        let cfg = parse_config(&text).unwrap();
        assert!(matches!(prepare(&cfg, false), Err(Error::Refused(_))));
        // Certification fails at a GB point, so θ must be supplied.
        assert!(matches!(prepare(&cfg, true), Err(Error::Refused(_))));
        let text = text.replace("eta_halvings = 3", "eta_halvings = 3\ntheta = 0.9");
        let p = prepare(&parse_config(&text).unwrap(), true).unwrap();
        assert!(p.certificate.is_none());
        assert_eq!(p.spec.alpha, 4.0);
    }

    #[test]
    fn short_run_records_trace_and_snapshots() {
        let cfg = parse_config(SMALL).unwrap();
        let art = run_experiment(&cfg, RunOptions::default()).unwrap();
        let run = art.report.run.as_ref().unwrap();
        assert_eq!(art.trace.len() as u64, run.steps + 1);
        assert_eq!(art.snapshots.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        write_artifacts(dir.path(), &art).unwrap();
        let snap = CsvTable::read(&dir.path().join("snapshots/snap_00000000.csv")).unwrap();
        let state = read_snapshot(&snap).unwrap();
        assert_eq!(state.u.values(), art.snapshots[0].state.u.values());
        let trace = CsvTable::read(&dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace.header, TRACE_COLUMNS);
    }

    #[test]
    fn two_levels_give_one_order_row() {
        let cfg = parse_config(&SMALL.replace("t_end = 1e-5", "t_end = 2e-6")).unwrap();
        let table = refinement_study(&cfg, 2, false).unwrap();
        assert_eq!(table.levels.len(), 2);
        assert_eq!(table.orders.len(), 1);
        assert_eq!(table.levels[1].cells, 128);
        assert_eq!(refinement_csv(&table).rows.len(), 1);
    }
}
