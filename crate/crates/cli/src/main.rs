use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use gridfault::estimator::{build_estimator_bank, default_partition, read_csv, write_csv, BankOptions};
use gridfault::fdl::{calibrate_with_min, Calibration, FdlConfig, Pipeline, MIN_CALIBRATION_FRAMES};
use gridfault::grid::{BusId, NetworkModel};
use gridfault::montecarlo::{benchmark_campaign, emit_curves, run_campaign, Campaign, CurveGrid};
use gridfault::observability::{check_theorem1, compute_ufc, compute_ufc2, per_line_partition};
use gridfault::par::{init_threads, Exec};
use gridfault::placement::{place, Objective};
use gridfault::simulator::{
    build_benchmark_with, generate_frames, placed_benchmark, second_topology, BenchmarkGrounding,
    FaultKind, FaultSpec, NoiseSpec, Scenario,
};
use gridfault::Error;

#[derive(Parser)]
#[command(name = "gridfault", version, about = "Fault detection, localization and PMU placement for radial distribution grids")]
struct Cli {
    /// Worker threads for the data-parallel loops.
    #[arg(long, env = "GRIDFAULT_THREADS", global = true)]
    threads: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal PMU placement.
    Place {
        net: PathBuf,
        #[arg(long, default_value = "max_resolution")]
        objective: Objective,
        /// Give bus K a voltage-only meter, splitting its cluster (`bus=K` or `K`).
        #[arg(long = "split", value_parser = parse_bus)]
        splits: Vec<BusId>,
        /// Force a bus monitored or not (`K=1`, `K=0`).
        #[arg(long = "pin", value_parser = parse_pin)]
        pins: Vec<(BusId, bool)>,
        /// Another switch state the placement must serve.
        #[arg(long = "reconfig")]
        reconfig: Vec<PathBuf>,
        /// Placement summary; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the metered network.
        #[arg(long)]
        net_out: Option<PathBuf>,
    },
    /// Fault clusters of a metered network.
    Clusters {
        net: PathBuf,
        #[arg(long, value_enum, default_value_t = ClusterKind::Ufc2)]
        kind: ClusterKind,
    },
    /// Observability report.
    Check { net: PathBuf },
    /// Noisy PMU frames of a (faulted) network, as CSV.
    Simulate {
        net: PathBuf,
        /// `line=K,p=0.25,kind=1ph-e[,r=OHMS]`; no fault when absent.
        #[arg(long, value_parser = parse_fault)]
        fault: Option<FaultSpec>,
        #[arg(long, default_value_t = 25)]
        t_fault: usize,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        noiseless: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Detection thresholds from a no-fault stream.
    Calibrate {
        net: PathBuf,
        stream: PathBuf,
        #[arg(long, default_value_t = MIN_CALIBRATION_FRAMES)]
        min_frames: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run detection and localization over a stream; one JSON event per line.
    Run {
        net: PathBuf,
        stream: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long, default_value_t = 0)]
        delta: usize,
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
        /// Per unit.
        #[arg(long, default_value_t = 0.05)]
        th_v: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo campaign.
    Montecarlo {
        campaign: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Plot data of the placement bounds; next to the results by default.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Full result, calibrations included, as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the synthetic 84-bus benchmark network or campaign.
    Benchmark {
        #[arg(long, value_enum, default_value_t = Neutral::Compensated)]
        neutral: Neutral,
        /// Open the feeder-4 head and close the tie.
        #[arg(long)]
        second: bool,
        /// Include the optimal meters and splits.
        #[arg(long)]
        placed: bool,
        /// Write the 20-scenario campaign instead of a network.
        #[arg(long)]
        campaign: bool,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusterKind {
    Ufc,
    Ufc2,
    Lines,
}

#[derive(Clone, Copy, ValueEnum)]
enum Neutral {
    Earthed,
    Compensated,
}

/// Failures mapped to exit codes: 1 for domain errors, 2 for bad input.
enum Failure {
    Domain(Error),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_domain() {
            Failure::Domain(e)
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn parse_bus(s: &str) -> Result<BusId, String> {
    let v = s.strip_prefix("bus=").unwrap_or(s);
    v.parse().map_err(|_| format!("bad bus id {s:?}"))
}

fn parse_pin(s: &str) -> Result<(BusId, bool), String> {
    let (b, v) = s.split_once('=').ok_or_else(|| format!("expected K=0 or K=1, got {s:?}"))?;
    let bus = parse_bus(b)?;
    match v {
        "1" => Ok((bus, true)),
        "0" => Ok((bus, false)),
        _ => Err(format!("pin value must be 0 or 1, got {v:?}")),
    }
}

fn parse_fault(s: &str) -> Result<FaultSpec, String> {
    let mut line = None;
    let mut p = None;
    let mut kind: Option<FaultKind> = None;
    let mut r = None;
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number {v:?}"));
        match k.trim() {
            "line" => line = Some(v.parse::<usize>().map_err(|_| format!("bad line {v:?}"))?),
            "p" => p = Some(num(v)?),
            "kind" => kind = Some(v.parse().map_err(|e: Error| e.to_string())?),
            "r" => r = Some(num(v)?),
            other => return Err(format!("unknown fault key {other:?}")),
        }
    }
    let mut spec = FaultSpec::new(
        line.ok_or("fault needs line=K")?,
        p.ok_or("fault needs p=FRACTION")?,
        kind.ok_or("fault needs kind=...")?,
    );
    if let Some(r) = r {
        spec.impedance = Complex64::new(r, 0.0);
    }
    Ok(spec)
}

fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_net(path: &Path) -> CliResult<NetworkModel> {
    Ok(NetworkModel::from_json_str(&read_input(path)?)?)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_stream(path: &Path) -> CliResult<Vec<gridfault::estimator::MeasurementFrame>> {
    let f = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(read_csv(BufReader::new(f))?)
}

fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out).and_then(|_| out.flush()).map_err(Error::from)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match cli.command {
        Command::Place {
            net,
            objective,
            splits,
            pins,
            reconfig,
            output,
            net_out,
        } => {
            let base = load_net(&net)?;
            let others = reconfig.iter().map(|p| load_net(p)).collect::<CliResult<Vec<_>>>()?;
            let pins: BTreeMap<BusId, bool> = pins.into_iter().collect();
            let placement = place(&base, objective, &pins, &splits, &others)?;
            log::info!(
                "{} meters, {} clusters, bound {}",
                placement.solution.d_star,
                placement.solution.r_star,
                placement.solution.d_bar
            );
            if let Some(p) = net_out {
                placement.net.save(p)?;
            }
            write_json(output.as_deref(), &placement.solution)
        }
        Command::Clusters { net, kind } => {
            let net = load_net(&net)?;
            let part = match kind {
                ClusterKind::Ufc => compute_ufc(&net)?,
                ClusterKind::Ufc2 => compute_ufc2(&net)?,
                ClusterKind::Lines => per_line_partition(&net),
            };
            write_json(
                None,
                &json!({"r": part.r(), "clusters": part.clusters, "separators": part.separators}),
            )
        }
        Command::Check { net } => {
            let net = load_net(&net)?;
            let report = check_theorem1(&net);
            write_json(None, &report)?;
            report.require_extended()?;
            Ok(())
        }
        Command::Simulate {
            net,
            fault,
            t_fault,
            horizon,
            seed,
            noiseless,
            output,
        } => {
            let net = load_net(&net)?;
            let noise = if noiseless {
                NoiseSpec {
                    seed,
                    ..NoiseSpec::noiseless()
                }
            } else {
                NoiseSpec::with_seed(seed)
            };
            let scenario = Scenario {
                net,
                fault,
                fault_time: if fault.is_some() { t_fault } else { horizon },
                horizon,
                noise,
            };
            let frames = generate_frames(&scenario)?;
            let mut out = sink(output.as_deref())?;
            write_csv(&mut out, &frames)?;
            out.flush().map_err(Error::from)?;
            Ok(())
        }
        Command::Calibrate {
            net,
            stream,
            min_frames,
            output,
        } => {
            let net = load_net(&net)?;
            check_theorem1(&net).require_extended()?;
            let frames = load_stream(&stream)?;
            let part = default_partition(&net)?;
            let opts = BankOptions {
                exec,
                ..BankOptions::default()
            };
            let bank = build_estimator_bank(&net, &part, &opts)?;
            let cal = calibrate_with_min(&bank, &frames, min_frames)?;
            write_json(output.as_deref(), &cal)
        }
        Command::Run {
            net,
            stream,
            calib,
            delta,
            gamma,
            th_v,
            output,
        } => {
            let net = load_net(&net)?;
            check_theorem1(&net).require_extended()?;
            let cal: Calibration = load_json(&calib)?;
            let frames = load_stream(&stream)?;
            let part = default_partition(&net)?;
            let opts = BankOptions {
                exec,
                ..BankOptions::default()
            };
            let bank = build_estimator_bank(&net, &part, &opts)?;
            let cfg = FdlConfig { delta, gamma, th_v };
            let mut pipeline = Pipeline::new(&bank, cal, cfg, net.base.phase_voltage())?;
            let mut out = sink(output.as_deref())?;
            for frame in &frames {
                if let Some(ev) = pipeline.step(frame)? {
                    serde_json::to_writer(&mut out, &ev).map_err(Error::from)?;
                    writeln!(out).map_err(Error::from)?;
                }
            }
            out.flush().map_err(Error::from)?;
            Ok(())
        }
        Command::Montecarlo {
            campaign,
            output,
            curves,
            json,
        } => {
            let campaign: Campaign = load_json(&campaign)?;
            let result = run_campaign(&campaign, exec)?;
            let mut out = sink(Some(&output))?;
            result.write_csv(&mut out)?;
            out.flush().map_err(Error::from)?;
            let curves = curves.unwrap_or_else(|| output.with_file_name("curves.csv"));
            let mut out = sink(Some(&curves))?;
            emit_curves(&CurveGrid::default(), &mut out)?;
            out.flush().map_err(Error::from)?;
            if let Some(p) = json {
                write_json(Some(&p), &result)?;
            }
            Ok(())
        }
        Command::Benchmark {
            neutral,
            second,
            placed,
            campaign,
            runs,
            seed,
            output,
        } => {
            if campaign {
                return write_json(output.as_deref(), &benchmark_campaign(runs, seed)?);
            }
            let grounding = match neutral {
                Neutral::Earthed => BenchmarkGrounding::Earthed,
                Neutral::Compensated => BenchmarkGrounding::Compensated,
            };
            let net = match (placed, second) {
                (true, false) => placed_benchmark(grounding)?.net,
                (true, true) => placed_benchmark(grounding)?.topologies.remove(0),
                (false, false) => build_benchmark_with(grounding),
                (false, true) => second_topology(&build_benchmark_with(grounding)),
            };
            write_json(output.as_deref(), &net)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        init_threads(n);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("{}", json!({"error": "input", "message": msg}));
            ExitCode::from(2)
        }
    }
}
