use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use twinbeam::detector::povm_matrix;
use twinbeam::harness::{
    analyze_distribution, emit_tables, run_sweep, simulate_point, Analysis, EmSummary, SweepConfig,
    SweepReport,
};
use twinbeam::io::{
    read_distribution_csv, read_histogram_csv, read_json, write_distribution_csv, write_histogram_csv,
    write_json, DistributionEnvelope, HistogramEnvelope, Provenance,
};
use twinbeam::quantifiers::QuantifierReport;
use twinbeam::reconstruction::{em_reconstruct, photon_grid_bound, EmDiagnostics};
use twinbeam::state::{AxisKind, JointDistribution, RNG_NAME};
use twinbeam::{Error, Result};

/// Noisy twin-beam simulation and entanglement analysis.
#[derive(Parser)]
#[command(name = "twinbeam", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use exact photocount distributions instead of sampled frames.
    #[arg(long, global = true)]
    exact: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a noisy twin beam, detect it and save the tables.
    Simulate {
        /// Mean noise photocounts per arm.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// EM reconstruction of a photocount histogram.
    Reconstruct {
        /// (row, col, count) CSV.
        histogram: PathBuf,
    },
    /// Quantifiers of both branches for a histogram or photocount distribution.
    Analyze {
        /// (row, col, value) CSV.
        input: PathBuf,
        /// Read the input as a normalized photocount distribution.
        #[arg(long)]
        distribution: bool,
    },
    /// The full noise sweep with tables.
    Sweep,
    /// Re-emit the tables of a saved report.json.
    Report {
        report: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<SweepConfig> {
    let mut cfg = match &c.config {
        Some(p) => SweepConfig::load(p)?,
        None => SweepConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if c.exact {
        cfg.exact = true;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &SweepConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

fn provenance(source: &str, cfg: &SweepConfig, seed: Option<u64>) -> Provenance {
    Provenance {
        source: format!(
            "{source} (pair_mean {}, paired_modes {})",
            cfg.twin_beam.pair_mean, cfg.twin_beam.paired_modes
        ),
        seed,
        generator: seed.map(|_| RNG_NAME.to_string()),
    }
}

fn simulate(cfg: &SweepConfig, noise: f64) -> Result<()> {
    let dir = out_dir(cfg)?;
    let sim = simulate_point(cfg, noise, cfg.seed)?;
    let p = provenance("simulated photon field", cfg, None);
    write_distribution_csv(&dir.join("photons.csv"), &sim.photons)?;
    write_json(&dir.join("photons.json"), &DistributionEnvelope::new(&sim.photons, p))?;
    let p = provenance("exact photocount distribution", cfg, None);
    write_distribution_csv(&dir.join("counts.csv"), &sim.counts)?;
    write_json(&dir.join("counts.json"), &DistributionEnvelope::new(&sim.counts, p))?;
    if let Some(h) = &sim.histogram {
        let p = provenance("sampled photocount frames", cfg, Some(cfg.seed));
        write_histogram_csv(&dir.join("histogram.csv"), h)?;
        write_json(&dir.join("histogram.json"), &HistogramEnvelope::new(h, p))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReconstructOutput<'a> {
    photon_grid: (usize, usize),
    diagnostics: &'a EmDiagnostics,
}

fn reconstruct(cfg: &SweepConfig, histogram: &Path) -> Result<()> {
    let f = read_histogram_csv(histogram)?.trimmed_to_support().to_distribution()?;
    let (ds, di) = (&cfg.detector_signal, &cfg.detector_idler);
    let grid = match cfg.analysis.photon_grid {
        Some(g) => g,
        None => {
            let (ms, mi) = f.means();
            (photon_grid_bound(ms, ds.efficiency)?, photon_grid_bound(mi, di.efficiency)?)
        }
    };
    let (cs, ci) = f.dims();
    let ts = povm_matrix(ds, (cs - 1).min(ds.pixels), grid.0)?;
    let ti = povm_matrix(di, (ci - 1).min(di.pixels), grid.1)?;
    let (p, diag) = em_reconstruct(&f, &ts, &ti, &cfg.analysis.em)?;
    let dir = out_dir(cfg)?;
    write_distribution_csv(&dir.join("reconstruction.csv"), &p)?;
    write_json(
        &dir.join("diagnostics.json"),
        &ReconstructOutput {
            photon_grid: grid,
            diagnostics: &diag,
        },
    )
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    input: String,
    photocount: &'a QuantifierReport,
    photon: &'a QuantifierReport,
    em: &'a EmSummary,
}

fn analyze(cfg: &SweepConfig, input: &Path, distribution: bool) -> Result<()> {
    let f: JointDistribution = if distribution {
        read_distribution_csv(input, AxisKind::Photocount)?
    } else {
        read_histogram_csv(input)?.trimmed_to_support().to_distribution()?
    };
    let a: Analysis = analyze_distribution(&f, &cfg.detector_signal, &cfg.detector_idler, &cfg.analysis)?;
    let dir = out_dir(cfg)?;
    write_distribution_csv(&dir.join("reconstruction.csv"), &a.reconstruction)?;
    write_json(
        &dir.join("analysis.json"),
        &AnalyzeOutput {
            input: input.display().to_string(),
            photocount: &a.photocount,
            photon: &a.photon,
            em: &a.em,
        },
    )
}

fn sweep(cfg: &SweepConfig) -> Result<()> {
    let report = run_sweep(cfg)?;
    let failed = report.points.iter().filter(|p| !p.failures.is_empty()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid points recorded failures", report.points.len());
    }
    for path in emit_tables(&report, &cfg.output_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report(c: &Common, path: &Path) -> Result<()> {
    let report: SweepReport = read_json(path)?;
    let dir = c.out.clone().unwrap_or_else(|| report.config.output_dir.clone());
    for path in emit_tables(&report, &dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Report { report: path } = &cli.command {
        return report(&cli.common, path);
    }
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Simulate { noise } => {
            if !(noise.is_finite() && *noise >= 0.0) {
                return Err(Error::Config(format!("noise {noise} must be finite and >= 0")));
            }
            simulate(&cfg, *noise)
        }
        Command::Reconstruct { histogram } => reconstruct(&cfg, histogram),
        Command::Analyze { input, distribution } => analyze(&cfg, input, *distribution),
        Command::Sweep => sweep(&cfg),
        Command::Report { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
