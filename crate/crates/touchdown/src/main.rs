use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use touchdown::csv_io::{self, read_imu, write_rows};
use touchdown::formats::{read_pgm, write_pfm, write_ppm};
use touchdown::pipeline::{combine, run_bench, run_mono, run_stereo};
use touchdown::report::{read_safe_flag, write_json};
use touchdown::scene_file::SceneFile;
use touchdown::simulate::write_scene;
use touchdown::{Error, PipelineConfig, Result};
use touchdown_core::sim::SceneKind;

/// Landing-zone evaluation from monocular flow and stereo disparity.
///
/// Exit status: 0 evaluated safe (or command succeeded), 1 evaluated unsafe,
/// 2 error.
#[derive(Debug, Parser)]
#[command(name = "touchdown", version)]
struct Cli {
    /// `section.key = value` file overriding pipeline defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Simulator seed; overrides the scene file's `seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Planarity gate over a descending image sequence
    Mono {
        /// PGM frames in order, or one directory whose *.pgm files are
        /// taken in name order
        #[arg(required = true)]
        frames: Vec<PathBuf>,
    },
    /// Terrain grid and landing decision from one rectified pair
    Stereo {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// CSV with columns dt,gx,gy,gz,ax,ay,az
        #[arg(long)]
        imu: Option<PathBuf>,
    },
    /// Bad-pixel table for a directory of scenes
    Bench {
        dataset: PathBuf,
        /// Score the ground truth against itself
        #[arg(long)]
        inject_gt: bool,
    },
    /// Render a synthetic scene
    Simulate {
        /// Scene description; defaults apply when omitted
        scene: Option<PathBuf>,
        /// Overrides the scene file's `kind`
        #[arg(long)]
        kind: Option<String>,
    },
    /// Conservative AND of the two gates
    Combine {
        /// safe, unsafe, none, or a report JSON with a `safe` field
        #[arg(long, default_value = "none")]
        mono: String,
        #[arg(long, default_value = "none")]
        stereo: String,
    },
}

fn verdict_arg(s: &str) -> Result<Option<bool>> {
    match s {
        "safe" => Ok(Some(true)),
        "unsafe" => Ok(Some(false)),
        "none" => Ok(None),
        path => read_safe_flag(Path::new(path)).map(Some),
    }
}

fn mono_frames(args: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if let [dir] = args {
        if dir.is_dir() {
            let mut frames = Vec::new();
            for e in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let p = e.map_err(|e| Error::io(dir, e))?.path();
                if p.extension().is_some_and(|x| x == "pgm") {
                    frames.push(p);
                }
            }
            frames.sort();
            return Ok(frames);
        }
    }
    Ok(args.to_vec())
}

fn exit_for(safe: bool) -> ExitCode {
    ExitCode::from(if safe { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let out = &cli.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    match cli.cmd {
        Cmd::Mono { frames } => {
            let paths = mono_frames(&frames)?;
            let images = paths.iter().map(|p| read_pgm(p)).collect::<Result<Vec<_>>>()?;
            let r = run_mono(&images, &cfg)?;
            write_rows(&out.join("mono_log.csv"), &r.log())?;
            let report = r.report();
            write_json(&out.join("mono_report.json"), &report)?;
            println!(
                "mono safe={} filtered_error={} frames={}",
                r.safe, report.final_filtered_error, report.frames
            );
            Ok(exit_for(r.safe))
        }
        Cmd::Stereo { left, right, imu } => {
            let l = read_pgm(&left)?;
            let r = read_pgm(&right)?;
            let samples = match &imu {
                Some(p) => read_imu(p)?,
                None => Vec::new(),
            };
            let s = run_stereo(&l, &r, &samples, &cfg)?;
            for w in &s.report.warnings {
                eprintln!("warning: {w}");
            }
            write_pfm(&out.join("disparity.pfm"), &s.disparity)?;
            write_ppm(&out.join("overlay.ppm"), &s.overlay)?;
            write_json(&out.join("report.json"), &s.report)?;
            println!("stereo safe={} reason={}", s.decision.safe, s.report.reason);
            Ok(exit_for(s.decision.safe))
        }
        Cmd::Bench { dataset, inject_gt } => {
            let rows = run_bench(&dataset, &cfg, inject_gt)?;
            let path = out.join("bench.csv");
            let bytes = csv_io::to_bytes(&rows, &path)?;
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            print!("{}", String::from_utf8_lossy(&bytes));
            for r in rows.iter().filter(|r| !r.error.is_empty()) {
                eprintln!("warning: scene {}: {}", r.scene, r.error);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate { scene, kind } => {
            let mut sf = match &scene {
                Some(p) => SceneFile::load(p)?,
                None => SceneFile::default(),
            };
            if let Some(k) = kind {
                sf.spec.kind =
                    SceneKind::parse(&k).ok_or_else(|| Error::Usage(format!("unknown scene kind {k:?}")))?;
            }
            if let Some(seed) = cli.seed {
                sf.spec.texture_seed = seed;
            }
            let written = write_scene(&sf, out)?;
            println!(
                "simulate kind={} safe={} files={}",
                sf.spec.kind.as_str(),
                sf.spec.safe_label(),
                written.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Combine { mono, stereo } => {
            let v = combine(verdict_arg(&mono)?, verdict_arg(&stereo)?)?;
            write_json(&out.join("combined.json"), &v)?;
            println!("combine safe={} reasons={}", v.overall, v.reasons.join(","));
            Ok(exit_for(v.overall))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", Error::Usage(first.to_string()).one_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(2)
        }
    }
}
