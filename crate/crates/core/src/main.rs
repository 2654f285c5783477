use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsmd::config::{load_config, Override, ReportFormat};
use hsmd::ranking::{rank_rows, read_metric_rows, MetricDirections};
use hsmd::report;
use hsmd::{bench, BenchOptions, Error};

#[derive(Parser)]
#[command(name = "hsmd", version, about = "Spiking-network motion detector and change-detection benchmark")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by `run` and `bench`.
#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Background subtraction mode.
    #[arg(long, value_parser = ["frame-diff", "sample-consensus"])]
    bs: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any configuration key, e.g. `--set neuron.v_threshold=-50`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = Override::parse)]
    set: Vec<Override>,
}

impl Common {
    fn overrides(&self) -> Vec<Override> {
        let mut out = self.set.clone();
        if let Some(bs) = &self.bs {
            out.push(Override::new("background.mode", format!("\"{bs}\"")));
        }
        if let Some(t) = self.threads {
            out.push(Override::new("threads", t));
        }
        if let Some(s) = self.seed {
            out.push(Override::new("seed", s));
        }
        out
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect motion in a video, image sequence or device.
    Run {
        /// Image directory, GIF file, device index, or `video:`/`sequence:` prefixed path.
        #[arg(long)]
        source: Option<String>,
        #[command(flatten)]
        common: Common,
        /// Directory for masks and the run report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a binary mask per frame.
        #[arg(long)]
        dump_masks: bool,
    },
    /// Evaluate on a CDnet-layout dataset.
    Bench {
        /// Dataset root, category directory or video directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated category names.
        #[arg(long, value_delimiter = ',')]
        categories: Option<Vec<String>>,
        /// Comma-separated report formats.
        #[arg(long, value_delimiter = ',', default_value = "csv,json")]
        format: Vec<ReportFormat>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Metric table of other methods to rank against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Method name used in reports.
        #[arg(long, default_value = "HSMD")]
        method: String,
        #[arg(long)]
        dump_masks: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Rank methods from a metric table (`method[, category], Re, Sp, FPR, FNR, WCR, CCR, Pr, F1`).
    Rank {
        #[arg(long)]
        fixtures: PathBuf,
        /// Write ranking.csv, ranks.csv and ranking.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run {
            source,
            common,
            out,
            dump_masks,
        } => {
            let mut overrides = common.overrides();
            if let Some(s) = source {
                overrides.push(Override::new("source", s));
            }
            if let Some(o) = out {
                overrides.push(Override::new("output_dir", o.display()));
            }
            if dump_masks {
                overrides.push(Override::new("dump_masks", true));
            }
            let cfg = load_config(common.config.as_deref(), &overrides)?;
            let r = hsmd::run(&cfg)?;
            println!(
                "{} frames {}x{} on {} threads: {:.2} ms/frame ({:.2} fps), p95 {:.2} ms; \
                 stages bs {:.2} / snn {:.2} / filter {:.2} ms; {} masks written",
                r.frames,
                r.width,
                r.height,
                r.threads,
                r.mean_ms,
                r.fps,
                r.p95_ms,
                r.stages.background_ms,
                r.stages.snn_ms,
                r.stages.filter_ms,
                r.masks_written
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            dataset,
            categories,
            format,
            out,
            baseline,
            method,
            dump_masks,
            common,
        } => {
            let cfg = load_config(common.config.as_deref(), &common.overrides())?;
            let opts = BenchOptions {
                dataset,
                categories,
                formats: format,
                output_dir: Some(out.clone()),
                method,
                baseline,
                dump_masks,
            };
            let r = bench(&cfg, &opts)?;
            for c in &r.categories {
                println!(
                    "{:<24} {:>3} videos  F1 {}  Re {}  Pr {}",
                    c.category,
                    c.videos.len(),
                    report::format_metric(c.mean_metrics.f1),
                    report::format_metric(c.mean_metrics.re),
                    report::format_metric(c.mean_metrics.pr),
                );
            }
            println!("reports written to {}", out.display());
            if r.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} video(s) failed:", r.failures.len());
                for f in &r.failures {
                    eprintln!("  {}/{}: {}", f.category, f.video, f.error);
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Rank { fixtures, out } => {
            let rows = read_metric_rows(&fixtures)?;
            let ranking = rank_rows(&rows, &MetricDirections::default())?;
            for (category, table) in &ranking.categories {
                println!("[{category}]");
                for e in table.by_r() {
                    println!("  {:<12} R = {:.3}", e.method, e.r);
                }
            }
            if ranking.categories.len() > 1 {
                println!("[RC]");
                let mut entries: Vec<_> = ranking.across.entries.iter().collect();
                entries.sort_by(|a, b| a.rc.total_cmp(&b.rc));
                for e in entries {
                    println!("  {:<12} RC = {:.3}", e.method, e.rc);
                }
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                report::write_ranking_csv(&dir.join("ranking.csv"), &ranking)?;
                report::write_ranks_csv(&dir.join("ranks.csv"), &ranking)?;
                report::write_json(&dir.join("ranking.json"), &ranking)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
