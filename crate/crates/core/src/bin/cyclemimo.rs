use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cyclemimo::harness::{
    load_config, parse_detector_list, parse_ebn0_list, run_and_write, write_records, ChannelSpec, Overrides, Profile,
};

#[derive(Parser)]
#[command(name = "cyclemimo", version, about = "MIMO detection experiments with CycleGAN, DNN, CycleDNN and LMMSE detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Smoke,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep Eb/N0 and blocks, writing one CSV row per (Eb/N0, block, detector).
    Run {
        /// TOML config file; missing keys keep the profile defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `start:step:stop` in dB (inclusive) or a comma-separated list.
        #[arg(long)]
        ebn0: Option<String>,
        #[arg(long)]
        blocks: Option<usize>,
        /// Pilot symbols per block; the payload takes the rest.
        #[arg(long)]
        pilots: Option<usize>,
        /// Comma-separated subset of lmmse,dnn,cyclednn,cyclegan.
        #[arg(long)]
        detectors: Option<String>,
        #[arg(long, value_enum)]
        pa: Option<OnOff>,
        /// `rayleigh` or `rician:<K>db`.
        #[arg(long)]
        channel: Option<ChannelSpec>,
        /// Maximum Doppler shift in Hz.
        #[arg(long)]
        doppler: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Results CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-(Eb/N0, detector) means.
        #[arg(long)]
        aggregate: Option<PathBuf>,
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        /// Record measured seconds per row (makes the CSV run-dependent).
        #[arg(long)]
        wallclock: bool,
        /// Suppress per-row progress on stderr.
        #[arg(long, short)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        ebn0,
        blocks,
        pilots,
        detectors,
        pa,
        channel,
        doppler,
        seed,
        out,
        aggregate,
        profile,
        wallclock,
        quiet,
    } = Cli::parse().command;
    let lists = (|| -> cyclemimo::Result<_> {
        Ok((
            ebn0.as_deref().map(parse_ebn0_list).transpose()?,
            detectors.as_deref().map(parse_detector_list).transpose()?,
        ))
    })();
    let (ebn0, detectors) = match lists {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        profile: profile.map(|p| match p {
            ProfileArg::Smoke => Profile::Smoke,
            ProfileArg::Paper => Profile::Paper,
        }),
        ebn0_db: ebn0,
        blocks,
        pilots,
        detectors,
        pa: pa.map(|p| matches!(p, OnOff::On)),
        channel,
        doppler_hz: doppler,
        seed,
        out,
        aggregate_out: aggregate,
        record_wallclock: wallclock.then_some(true),
    };
    let cfg = match load_config(config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run_and_write(&cfg, |o| {
        if !quiet {
            let r = &o.record;
            eprintln!(
                "{:>6} dB  block {:>3}  {:<8}  ber {:.4}  epochs {}",
                r.ebn0_db, r.block_index, r.detector, r.ber, r.epochs_run
            );
        }
    });
    match result {
        Ok(records) => {
            if cfg.out.is_none() {
                let mut stdout = std::io::stdout().lock();
                if let Err(e) = write_records(&records, &mut stdout).and_then(|_| stdout.flush().map_err(Into::into)) {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
