use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use harmonia::config::{BandMode, PipelineConfig};
use harmonia::masking::MaskSpec;
use harmonia::pipeline::{cmd_analyze, cmd_enhance, cmd_matrix, cmd_metrics, Scores};
use harmonia::{Error, Result};

const AFTER_HELP: &str = "\
Outputs:
  pitch.csv         frame,time_s,candidate,pitch_hz,significance
                    candidate and pitch_hz are empty for unvoiced frames
  gates.bin         frames x bins gate, matrix format
  significance.bin  frames x 3600 significance, matrix format
  manifest.json     inputs, outputs, config hash, version, stage timings
  metrics CSV       l_hb,l_apc_coarse,l_apc_refined,l_focal,total,apc_snr_db,si_snr_db

Matrix format: b\"HMAT\", rows u32 LE, cols u32 LE, 4 reserved bytes,
then rows*cols f32 LE in row-major order.

Exit codes: 0 success, 2 usage or config error, 3 input format error,
4 numeric failure.";

#[derive(Parser)]
#[command(
    name = "harmonia",
    version,
    about = "Harmonic gating and masking for speech spectra"
)]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// wb (16 kHz) or fb (48 kHz)
    #[arg(long, global = true)]
    band: Option<BandMode>,
    /// oracle | constant:<logit> | file:<dir>
    #[arg(long, global = true)]
    mask: Option<MaskSpec>,
    /// Text file holding the voiced-region threshold state; read if present,
    /// then rewritten
    #[arg(long, global = true)]
    vrd_state: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(b) = self.band {
            cfg.band = b;
        }
        if let Some(m) = &self.mask {
            cfg.mask = m.clone();
        }
        cfg.analysis()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pitch track, gates and significance of one WAV
    Analyze {
        wav: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Enhance a noisy WAV using masks and print the loss report
    Enhance {
        noisy: PathBuf,
        clean: PathBuf,
        /// Output WAV (32-bit float)
        #[arg(long)]
        out: PathBuf,
        /// Also write the report as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the run manifest here
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score an estimate against a reference
    Metrics {
        est: PathBuf,
        reference: PathBuf,
        /// Also write the scores as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Build and write the integral matrix
    Matrix {
        /// Output matrix file
        #[arg(long)]
        out: PathBuf,
        /// Frequency bins (defaults to the band's wide-band bin count)
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn write_csv(path: &Path, header: &str, row: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}\n{row}")?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Analyze {
            wav,
            out: dir,
            common,
        } => {
            let cfg = common.config()?;
            let m = cmd_analyze(&wav, &cfg, &dir, common.vrd_state.as_deref())?;
            for f in &m.outputs {
                writeln!(out, "wrote {f}")?;
            }
        }
        Command::Enhance {
            noisy,
            clean,
            out: wav,
            csv,
            manifest,
            common,
        } => {
            let cfg = common.config()?;
            let (e, m) = cmd_enhance(&noisy, &clean, &cfg, &wav, common.vrd_state.as_deref())?;
            e.report.write_key_values(&mut out)?;
            if let Some(p) = csv {
                write_csv(
                    &p,
                    harmonia::metrics::REPORT_CSV_HEADER,
                    &e.report.csv_row(),
                )?;
            }
            if let Some(p) = manifest {
                harmonia::io::write_atomic(&p, m.to_json().as_bytes())?;
            }
        }
        Command::Metrics {
            est,
            reference,
            csv,
            common,
        } => {
            let cfg = common.config()?;
            let s = cmd_metrics(&est, &reference, &cfg)?;
            s.write_key_values(&mut out)?;
            if let Some(p) = csv {
                write_csv(&p, Scores::CSV_HEADER, &s.csv_row())?;
            }
        }
        Command::Matrix {
            out: path,
            bins,
            common,
        } => {
            let cfg = common.config()?;
            let u = cmd_matrix(&cfg, &path, bins)?;
            let (rows, cols) = u.values().dim();
            writeln!(out, "shape={rows}x{cols}")?;
            writeln!(out, "nonzero={}", u.nonzero_count())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
