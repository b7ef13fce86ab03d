use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdm_fso::harness::report::{write_histogram_csv, write_matrix_csv, write_runs_csv, write_sweep_csv, write_toml};
use mdm_fso::harness::{monte_carlo, scintillation_stats, screen_powers, DecoderChoice, Experiment, ExperimentConfig};
use mdm_fso::screen_file::write_batch;
use mdm_fso::screens::{batch_generate, batch_structure_function, kolmogorov_structure};
use mdm_fso::Result;

#[derive(Parser)]
#[command(name = "mdm-fso", version, about = "Turbulent mode-multiplexed FSO link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; unspecified keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the decoder selection.
    #[arg(long, value_parser = ["mmse", "sic", "both"])]
    decoder: Option<String>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a batch of PHSCRN01 phase screens plus a TOML sidecar.
    GenScreens {
        #[command(flatten)]
        common: Common,
        /// Number of screens (defaults to `realizations`).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Structure function and scintillation statistics of a screen batch.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        /// Lags in pixels for the structure function.
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20, 40, 80, 160, 192])]
        lags: Vec<usize>,
    },
    /// A single realization at the configured operating point.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: usize,
        /// Also dump H as `channel.csv` (row, col, re, im).
        #[arg(long)]
        export_channel: bool,
        /// Also dump the transmitted frame as `frame.csv`.
        #[arg(long)]
        export_frame: bool,
    },
    /// BER versus OSNR on one fixed realization.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Ensemble over `realizations` turbulence screens.
    MonteCarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = &common.decoder {
        cfg.decoder = d.parse::<DecoderChoice>()?;
    }
    cfg.validate()?;
    fs::create_dir_all(&common.out)?;
    write_toml(&common.out.join("config.toml"), &cfg)?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    Ok(fs::File::create(dir.join(name))?)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenScreens { common, count } => {
            let cfg = load(&common)?;
            let sc = cfg.screen_config();
            let screens = batch_generate(&sc, count.unwrap_or(cfg.realizations))?;
            let paths = write_batch(&common.out, &sc, &screens)?;
            println!("wrote {} screens to {}", paths.len(), common.out.display());
        }
        Command::Stats { common, count, lags } => {
            let cfg = load(&common)?;
            let sc = cfg.screen_config();
            let count = count.unwrap_or(cfg.realizations);
            let pitch = sc.pitch();
            let seps: Vec<f64> = lags.iter().map(|&l| l as f64 * pitch).collect();
            let d = batch_structure_function(&sc, count, &seps)?;
            let mut w = csv::Writer::from_writer(create(&common.out, "structure.csv")?);
            w.write_record(["lag_px", "r_m", "d_phi", "kolmogorov", "ratio"])?;
            for (lag, (r, v)) in lags.iter().zip(&d) {
                let k = kolmogorov_structure(*r, sc.fried);
                w.write_record(&[lag.to_string(), format!("{r:e}"), format!("{v:e}"), format!("{k:e}"), format!("{:e}", v / k)])?;
            }
            w.flush()?;
            let exp = Experiment::new(cfg.clone())?;
            let link = exp.link().ok_or_else(|| mdm_fso::Error::InvalidConfig("stats needs an optical channel model".into()))?;
            let powers = screen_powers(link, &sc, count)?;
            let stats = scintillation_stats(&powers, 20)?;
            let mut w = csv::Writer::from_writer(create(&common.out, "powers.csv")?);
            w.write_record(["screen", "power"])?;
            for (i, p) in powers.iter().enumerate() {
                w.write_record(&[i.to_string(), format!("{p:e}")])?;
            }
            w.flush()?;
            write_toml(&common.out.join("scintillation.toml"), &stats)?;
            println!("sigma_I^2 = {:.4}, lognormal KS = {:.3}", stats.sigma_i2, stats.ks_distance);
        }
        Command::Run { common, realization, export_channel, export_frame } => {
            let cfg = load(&common)?;
            let exp = Experiment::new(cfg)?;
            let report = exp.run_realization(realization, None)?;
            write_runs_csv(create(&common.out, "runs.csv")?, std::slice::from_ref(&report))?;
            write_toml(&common.out.join("run.toml"), &report)?;
            if export_channel {
                write_matrix_csv(create(&common.out, "channel.csv")?, &exp.channel(realization, None)?.h)?;
            }
            if export_frame {
                exp.frame.write_csv(create(&common.out, "frame.csv")?)?;
            }
            for (name, d) in [("mmse", &report.mmse), ("sic", &report.sic)] {
                if let Some(d) = d {
                    println!("{name}: avg BER {:.3e} (min {:.3e}, max {:.3e}), outage {}", d.avg_ber, d.min_ber, d.max_ber, d.outage);
                }
            }
        }
        Command::Sweep { common, realization } => {
            let cfg = load(&common)?;
            let exp = Experiment::new(cfg)?;
            let points = exp.sweep_osnr(realization, &exp.config.osnr_grid, None)?;
            write_sweep_csv(create(&common.out, "sweep.csv")?, &points)?;
            println!("wrote {} OSNR points", points.len());
        }
        Command::MonteCarlo { common, count } => {
            let cfg = load(&common)?;
            let count = count.unwrap_or(cfg.realizations);
            let exp = Experiment::new(cfg)?;
            let (reports, summary) = monte_carlo(&exp, count)?;
            write_runs_csv(create(&common.out, "runs.csv")?, &reports)?;
            write_histogram_csv(create(&common.out, "histogram.csv")?, &summary)?;
            write_toml(&common.out.join("summary.toml"), &summary)?;
            for (name, d) in [("mmse", &summary.mmse), ("sic", &summary.sic)] {
                if let Some(d) = d {
                    let bound = if d.upper_bound { "<" } else { "" };
                    println!("{name}: average BER {bound}{:.3e}, outage {:.1}%", d.average_ber, 100.0 * d.outage_probability);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
