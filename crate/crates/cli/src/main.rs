//! `omsim`: simulate wireless meter populations, sweep channel-access
//! policies, print closed-form throughput curves and convert telegrams.

use std::error::Error;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use omsim::channel::{
    sweep, sweep_sequential, write_event_log, AccessPolicy, ChannelParams, GridSpec, SimOptions,
    SweepConfig, DEFAULT_SWEEP_METERS,
};
use omsim::mbus::{decode_telegram, encode_telegram, RawFrame, Telegram};
use omsim::muc::{run_pipeline, AmmSink, MemorySink, TcpSink};
use omsim::report;
use omsim::scenario::parse_scenario;

#[derive(Debug, Parser)]
#[command(
    name = "omsim",
    version,
    about = "Smart-metering radio channel and MUC simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario through the channel and the MUC; print channel and MUC metrics.
    Simulate(SimulateArgs),
    /// Throughput versus offered load for one access policy.
    Sweep(SweepArgs),
    /// Closed-form throughput curves.
    Analytic(AnalyticArgs),
    /// Telegram JSON to frame hex.
    Encode(EncodeArgs),
    /// Frame hex to telegram JSON.
    Decode(DecodeArgs),
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Push MUC messages to an AMM listener at host:port.
    #[arg(long, value_name = "HOST:PORT")]
    emit_tcp: Option<String>,
    /// Write every channel event as CSV.
    #[arg(long, value_name = "PATH")]
    event_log: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    policy: AccessPolicy,
    /// Load grid `min:max:steps`, or a single load.
    #[arg(long, value_name = "MIN:MAX:STEPS")]
    g: GridSpec,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Minimum first transmissions measured per grid point.
    #[arg(long, default_value_t = 200_000)]
    frames: u64,
    /// Meters in each point's synthetic population.
    #[arg(long, default_value_t = DEFAULT_SWEEP_METERS)]
    meters: u32,
    /// Take channel parameters (airtime, slot, CCA delay, backoff) from a scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Run grid points one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    /// Policy to print; all three when omitted.
    #[arg(long)]
    policy: Option<AccessPolicy>,
    #[arg(long, value_name = "MIN:MAX:STEPS")]
    g: GridSpec,
    /// Normalised CCA delay τ/m for csma-ca.
    #[arg(long, default_value_t = ChannelParams::default().a())]
    a: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Telegram as JSON, or `-` to read stdin.
    telegram: String,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Frame bytes as hex, or `-` to read stdin.
    hex: String,
}

type CliResult = Result<(), Box<dyn Error>>;

fn open_out(path: &PathBuf) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn read_arg(value: &str) -> io::Result<String> {
    if value == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        Ok(value.to_owned())
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    let mut scenario = parse_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let options = SimOptions {
        event_log: args.event_log.is_some(),
        ..SimOptions::default()
    };

    let tcp_target = args.emit_tcp.or_else(|| scenario.muc.tcp_emit.clone());
    let (output, tcp) = match tcp_target {
        Some(addr) => {
            let mut tcp =
                TcpSink::connect(&addr).map_err(|e| format!("cannot reach AMM at {addr}: {e}"))?;
            let output = run_pipeline(
                &scenario,
                scenario.seed,
                options,
                &mut tcp as &mut dyn AmmSink,
            )?;
            (output, Some(tcp))
        }
        None => {
            let mut memory = MemorySink::new();
            (
                run_pipeline(&scenario, scenario.seed, options, &mut memory)?,
                None,
            )
        }
    };
    if let Some(tcp) = tcp {
        tcp.finish()?;
    }

    if let Some(path) = &args.event_log {
        let mut file = BufWriter::new(File::create(path)?);
        write_event_log(&output.sim.log, &mut file)?;
        file.flush()?;
    }

    let mut out = open_out(&args.out.out)?;
    report::write_metrics_csv(
        &mut out,
        &scenario.channel,
        &output.sim.metrics,
        scenario.seed,
    )?;
    writeln!(out)?;
    report::write_muc_csv(&mut out, &scenario.muc.name, &output.muc, &output.meters)?;
    out.flush()?;
    Ok(())
}

fn run_sweep(args: SweepArgs) -> CliResult {
    let mut channel = match &args.scenario {
        Some(path) => parse_scenario(path)?.channel,
        None => ChannelParams::default(),
    };
    channel.policy = args.policy;
    let config = SweepConfig {
        channel,
        grid: args.g,
        seed: args.seed,
        frames_per_point: args.frames,
        meters: args.meters,
    };
    let points = if args.sequential {
        sweep_sequential(&config)?
    } else {
        sweep(&config)?
    };
    let mut out = open_out(&args.out.out)?;
    report::write_sweep_csv(&mut out, &points)?;
    out.flush()?;
    Ok(())
}

fn analytic(args: AnalyticArgs) -> CliResult {
    let policies = match args.policy {
        Some(p) => vec![p],
        None => AccessPolicy::ALL.to_vec(),
    };
    let mut out = open_out(&args.out.out)?;
    report::write_analytic_csv(&mut out, &policies, &args.g.points(), args.a)?;
    out.flush()?;
    Ok(())
}

fn encode(args: EncodeArgs) -> CliResult {
    let text = read_arg(&args.telegram)?;
    let telegram: Telegram = serde_json::from_str(&text)?;
    println!("{}", encode_telegram(&telegram)?.to_hex());
    Ok(())
}

fn decode(args: DecodeArgs) -> CliResult {
    let text = read_arg(&args.hex)?;
    let frame = RawFrame::from_hex(&text).map_err(|e| format!("invalid hex: {e}"))?;
    println!("{}", serde_json::to_string(&decode_telegram(&frame)?)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Analytic(args) => analytic(args),
        Command::Encode(args) => encode(args),
        Command::Decode(args) => decode(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("omsim: {e}");
            ExitCode::FAILURE
        }
    }
}
