use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kslab_core::config::ExperimentConfig;
use kslab_core::experiment::{
    init_data, refinement_csv, refinement_study, run_experiment, sweep_csv, sweep_eta,
    write_artifacts, RunOptions,
};
use kslab_core::report::write_json;
use kslab_core::{
    classify_general, energy_record, fmt_f64, parse_config, scan_region, to_json_string, CsvTable,
    Error, Outcome, Result,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

/// Radial quasilinear Keller–Segel laboratory.
#[derive(Debug, Parser)]
#[command(name = "kslab", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides outputs.directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for fan-out (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reserved; nothing is stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulate even when the classifier does not return FTBU.
    #[arg(long, global = true)]
    force: bool,
    /// Classify and choose parameters without simulating.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Completed,
    Blowup,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the regime verdict for (n, m, q).
    Classify {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        m: f64,
        #[arg(long, allow_hyphen_values = true)]
        q: Option<f64>,
        #[arg(long)]
        q1: Option<f64>,
        #[arg(long)]
        q2: Option<f64>,
    },
    /// Classify a grid of (m, q) points and write CSV `m,q,regime`.
    RegionScan {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        m_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        m_max: f64,
        #[arg(long, allow_hyphen_values = true)]
        q_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        q_max: f64,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the sampled initial pair and its parameters.
    InitData {
        #[arg(long)]
        mass: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        grid_cells: Option<usize>,
        /// Output directory; defaults to --out-dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate F over the η family and check uniform bounds.
    SweepEta {
        #[arg(long)]
        halvings: Option<usize>,
    },
    /// Run the full pipeline.
    Simulate {
        /// Exit 4 when the outcome differs.
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Recompute F and D from snapshot CSVs.
    Energy {
        /// Snapshot files or directories holding them.
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
    },
    /// Rerun with successively refined grids and report observed orders.
    Refine {
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand needs --config <file>".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| cfg.map(|c| PathBuf::from(&c.outputs.directory)))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn snapshot_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Config("no snapshot CSVs found".into()));
    }
    Ok(files)
}

fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Classify { n, m, q, q1, q2 } => {
            let (a, b) = match (q, q1, q2) {
                (Some(q), None, None) => (*q, *q),
                (None, Some(a), Some(b)) => (*a, *b),
                _ => return Err(Error::Config("give either --q or both --q1 and --q2".into())),
            };
            let verdict = classify_general(*n, *m, a, b);
            print!("{}", to_json_string(&verdict)?);
        }
        Command::RegionScan { n, m_min, m_max, q_min, q_max, resolution, out } => {
            let grid = scan_region(*n, [*m_min, *m_max], [*q_min, *q_max], *resolution)?;
            let mut t = CsvTable::new(["m", "q", "regime"]);
            t.meta("n", n).meta("resolution", resolution);
            for (m, q, r) in grid.rows() {
                t.push_strings(vec![fmt_f64(m), fmt_f64(q), r.to_string()]);
            }
            match out {
                Some(path) => t.write(path)?,
                None => print!("{}", t.render()),
            }
        }
        Command::InitData { mass, eta, grid_cells, out } => {
            let mut cfg = load_config(cli)?;
            if let Some(m) = mass {
                cfg.initdata.mass = *m;
            }
            if let Some(e) = eta {
                cfg.initdata.eta = Some(*e);
                cfg.initdata.eta_halvings = None;
            }
            if let Some(c) = grid_cells {
                cfg.grid.cells = *c;
            }
            let data = init_data(&cfg, cli.force)?;
            let dir = out.clone().unwrap_or_else(|| out_dir(cli, Some(&cfg)));
            std::fs::create_dir_all(&dir)?;
            let grid = data.u.grid();
            for (name, field) in [("u", &data.u), ("v", &data.v)] {
                let mut t = CsvTable::new(["r", name]);
                t.meta("n", grid.n()).meta("cells", grid.cells()).meta("eta", fmt_f64(data.norms.eta));
                for (&r, &x) in grid.centers().iter().zip(field.values()) {
                    t.push_numbers(&[r, x]);
                }
                t.write(&dir.join(format!("{name}0.csv")))?;
            }
            #[derive(serde::Serialize)]
            struct Sidecar<'a> {
                spec: &'a kslab_core::InitialDataSpec,
                a_eta: f64,
                norms: &'a kslab_core::initdata::UniformNorms,
            }
            write_json(
                &dir.join("initdata.json"),
                &Sidecar { spec: &data.spec, a_eta: data.a_eta, norms: &data.norms },
            )?;
            eprintln!("wrote {}", dir.display());
        }
        Command::SweepEta { halvings } => {
            let cfg = load_config(cli)?;
            let h = halvings.unwrap_or(cfg.initdata.sweep_halvings as usize);
            if h == 0 {
                return Err(Error::Config("--halvings must be >= 1".into()));
            }
            let rep = sweep_eta(&cfg, h, cli.force)?;
            let dir = out_dir(cli, Some(&cfg));
            std::fs::create_dir_all(&dir)?;
            sweep_csv(&rep).write(&dir.join("sweep.csv"))?;
            write_json(&dir.join("sweep.json"), &rep)?;
            print!("{}", sweep_csv(&rep).render());
        }
        Command::Simulate { expect } => {
            let cfg = load_config(cli)?;
            let art = run_experiment(&cfg, RunOptions { force: cli.force, dry_run: cli.dry_run })?;
            let dir = out_dir(cli, Some(&cfg));
            write_artifacts(&dir, &art)?;
            match &art.report.run {
                Some(run) => eprintln!(
                    "outcome {:?} at t = {} after {} steps; peak sup u = {}",
                    run.outcome,
                    fmt_f64(run.t_final),
                    run.steps,
                    fmt_f64(run.peak_sup_u)
                ),
                None => eprintln!("dry run: verdict {}", art.report.verdict.regime),
            }
            if let (Some(want), Some(got)) = (expect, art.report.outcome) {
                let ok = match want {
                    Expect::Completed => got == Outcome::Completed,
                    Expect::Blowup => got.is_blowup(),
                };
                if !ok {
                    eprintln!("expected {want:?}, got {got:?}");
                    return Ok(EXIT_MISMATCH);
                }
            }
        }
        Command::Energy { snapshots } => {
            let cfg = load_config(cli)?;
            let model = cfg.model.build()?;
            let mut t = CsvTable::new([
                "file", "t", "F", "D", "grad_v_term", "v2_term", "uv_term", "G_term", "mass_u",
            ]);
            for f in snapshot_files(snapshots)? {
                let state = kslab_core::experiment::read_snapshot(&CsvTable::read(&f)?)?;
                let e = energy_record(&state, &model)?;
                let name = f.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                let mut row = vec![name];
                row.extend(
                    [
                        e.t,
                        e.f,
                        e.d,
                        e.terms.gradient,
                        e.terms.v_square,
                        e.terms.coupling,
                        e.terms.g_integral,
                        e.mass_u,
                    ]
                    .map(fmt_f64),
                );
                t.push_strings(row);
            }
            match &cli.out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    t.write(&dir.join("energy.csv"))?;
                }
                None => print!("{}", t.render()),
            }
        }
        Command::Refine { levels } => {
            let cfg = load_config(cli)?;
            let table = refinement_study(&cfg, *levels, cli.force)?;
            let dir = out_dir(cli, Some(&cfg));
            std::fs::create_dir_all(&dir)?;
            refinement_csv(&table).write(&dir.join("refine.csv"))?;
            write_json(&dir.join("refine.json"), &table)?;
            print!("{}", refinement_csv(&table).render());
        }
    }
    Ok(0)
}

fn init_workers(workers: Option<usize>) -> Result<()> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = cli.seed;
    if let Err(e) = init_workers(cli.workers) {
        return report_error(&e);
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => report_error(&e),
    }
}
