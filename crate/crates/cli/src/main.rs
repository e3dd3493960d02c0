//! `jcdemon`: run scenarios and oracle comparisons, write CSV.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 truncation error,
//! 3 invariant violation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcdemon_core::scenario::{compare, write_scaling_csv, RunReport, Scenario, ScenarioConfig, Simulation};
use jcdemon_core::Error;

#[derive(Parser, Debug)]
#[command(name = "jcdemon", version, about = "Qubit coupled to a displaced thermal cavity: dynamics and thermodynamic ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one scenario on its time grid and write the ledger CSV.
    Run(Common),
    /// Deviation from the first-order expansion across several n0 over theta in [0, 2pi].
    Compare {
        /// Comma-separated field strengths, e.g. 25,100,400.
        #[arg(long, value_delimiter = ',', required = true)]
        n0_list: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// fig1, fig2, fig3, fig4 or custom.
    #[arg(long)]
    scenario: Option<String>,
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi0: Option<f64>,
    /// Fock truncation, 0 for the automatic rule.
    #[arg(long)]
    nph: Option<usize>,
    #[arg(long)]
    gt_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Initial Bloch vector rx,ry,rz.
    #[arg(long, allow_hyphen_values = true)]
    init: Option<String>,
    /// dense, branches or auto.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ScenarioConfig, Error> {
        let scenario = self.scenario.as_deref().map(str::parse::<Scenario>).transpose()?;
        let text = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        put("n0", self.n0.map(|v| v.to_string()));
        put("nbar", self.nbar.map(|v| v.to_string()));
        put("phi0", self.phi0.map(|v| v.to_string()));
        put("n_ph", self.nph.map(|v| v.to_string()));
        put("gt_max", self.gt_max.map(|v| v.to_string()));
        put("steps", self.steps.map(|v| v.to_string()));
        put("init", self.init.clone());
        put("method", self.method.clone());
        put("rank_tol", self.rank_tol.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        ScenarioConfig::from_sources(scenario, text.as_deref(), &overrides)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Io(_) => 1,
        Error::Truncation(_) => 2,
        Error::Invariant(_) | Error::DimensionMismatch { .. } => 3,
    }
}

fn out_path(cfg: &ScenarioConfig) -> Result<PathBuf, Error> {
    cfg.out_path.clone().ok_or_else(|| Error::Config("no output file given (--out or out=)".into()))
}

fn report(rep: &RunReport) {
    let s = &rep.summary;
    eprintln!(
        "{}: n0 = {}, nbar = {}, {} points, gt in [0, {:.6}]",
        rep.config.scenario,
        rep.config.n0,
        rep.config.nbar,
        rep.records.len(),
        rep.config.resolved_gt_max()
    );
    match rep.t_c {
        Some(t) => eprintln!("collapse time (|cross trace| <= 0.05): gt = {t:.6}"),
        None => eprintln!("collapse time not reached"),
    }
    for m in &s.extrema.minima {
        eprintln!("S_Q minimum at gt = {:.6}: {:.6}", m.gt, m.value);
    }
    for m in &s.extrema.maxima {
        eprintln!("S_Q maximum at gt = {:.6}: {:.6}", m.gt, m.value);
    }
    for (col, dev) in &s.deviations {
        eprintln!("max |exact - oracle| {col}: {dev:.6e}");
    }
    if let Some(m) = s.demon_margin {
        eprintln!("demon margin on [t_c, t_min]: {m:.6e}");
    }
    if let Some(m) = s.landauer_margin {
        eprintln!("Landauer margin at t_min: {m:.6e}");
    }
    eprintln!(
        "excitation drift {:.3e}, S_QC drift {:.3e}, first-law residual {:.3e}, min sigma_Q {:.3e}",
        s.excitation_drift, s.s_qc_drift, s.first_law_residual, s.min_sigma_q
    );
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let path = out_path(&cfg)?;
            let rep = Simulation::new(&cfg)?.run()?;
            let mut out = BufWriter::new(File::create(path)?);
            rep.write_csv(&mut out)?;
            out.flush()?;
            report(&rep);
        }
        Command::Compare { n0_list, common } => {
            let cfg = common.resolve()?;
            let path = out_path(&cfg)?;
            let (_, rows) = compare(&cfg, &n0_list)?;
            let mut out = BufWriter::new(File::create(path)?);
            write_scaling_csv(&rows, &mut out)?;
            out.flush()?;
            for r in &rows {
                let ratio = r.ratio_vs_prev.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
                eprintln!("n0 = {:>6}  {:<16} {:.6e}  ratio {ratio}", r.n0, r.column, r.max_abs_dev);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
