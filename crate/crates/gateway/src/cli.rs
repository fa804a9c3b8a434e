//! The `vishsim` command line.

use std::io::BufRead;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use vishsim::adapters::{ChannelVictim, VictimInput};
use vishsim::analytics::OutcomeReport;
use vishsim::campaign::{simulate, CampaignSpec, Sampling};
use vishsim::domain::{CallRecord, CallRequest, EntryKind, Speaker, VictimProfile};
use vishsim::events::WireEvent;
use vishsim::log::{read_records, RecordLog};
use vishsim::metering::CostReport;
use vishsim::pipeline::{adapters_with_callee, mock_adapters, run_call};
use vishsim::Config;

use crate::runtime::{Runtime, RuntimeOptions};
use crate::server::{router, AppState};

type Error = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Parser)]
#[command(name = "vishsim", version, about = "Voice phishing call simulator")]
pub struct Cli {
    /// Bundled scenario name or path to a config file.
    #[arg(long, global = true, env = "VISHSIM_CONFIG")]
    pub config: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a campaign offline and write the call log.
    Simulate(SimulateArgs),
    /// Place one call and print its transcript.
    Call(CallArgs),
    /// Summaries over a call log.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Start the HTTP and websocket gateway.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3, 4])]
    pub levels: Vec<u8>,
    #[arg(long, default_value_t = 60)]
    pub per_level: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Draw each victim's decision independently instead of by quota.
    #[arg(long)]
    pub independent: bool,
    #[arg(long, default_value = "records.log")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CallArgs {
    #[arg(long, default_value = "michael")]
    pub persona: String,
    /// Discretion level of the simulated victim.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub level: u8,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Answer the caller yourself, one line per utterance.
    #[arg(long)]
    pub interactive: bool,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    Costs(ReportArgs),
    Outcomes(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Where to write the JSON version. Defaults to the log path with a suffix.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Append finished records to this log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => {
            let config = load_config(cli.config.as_deref().or(args.scenario.as_deref()))?;
            if let Some(want) = &args.scenario {
                if *want != config.scenario.id {
                    return Err(format!(
                        "config holds scenario {:?}, not {want:?}",
                        config.scenario.id
                    )
                    .into());
                }
            }
            cmd_simulate(&config, &args)
        }
        Command::Call(args) => cmd_call(&load_config(cli.config.as_deref())?, &args),
        Command::Report(ReportCommand::Costs(args)) => {
            cmd_costs(&load_config(cli.config.as_deref())?, &args)
        }
        Command::Report(ReportCommand::Outcomes(args)) => {
            cmd_outcomes(&load_config(cli.config.as_deref())?, &args)
        }
        Command::Serve(args) => cmd_serve(load_config(cli.config.as_deref())?, &args),
    }
}

fn load_config(name: Option<&str>) -> Result<Config, Error> {
    let config = Config::resolve(name.unwrap_or("innovatech"))?;
    config.validate()?;
    Ok(config)
}

fn cmd_simulate(config: &Config, args: &SimulateArgs) -> Result<(), Error> {
    let mut spec = CampaignSpec::new("sim", args.levels.clone(), args.per_level, args.seed);
    if args.independent {
        spec.sampling = Sampling::Independent;
    }
    let records = simulate(config, &spec)?;
    let mut log = RecordLog::create(&args.out)?;
    for r in &records {
        log.append(r)?;
    }
    let report = OutcomeReport::build(&records, &config.scenario)?;
    println!("{} calls written to {}", records.len(), args.out.display());
    print!("{}", report.render_text());
    Ok(())
}

fn cmd_call(config: &Config, args: &CallArgs) -> Result<(), Error> {
    let victim = config
        .scenario
        .victims
        .iter()
        .find(|v| v.discretion_level == args.level)
        .map(|v| v.name.clone());
    let request = CallRequest {
        id: "cli".into(),
        persona_id: args.persona.clone(),
        victim: VictimProfile {
            name: victim.unwrap_or_else(|| "you".into()),
            phone: "sim:0".into(),
            discretion_level: args.level,
        },
        scenario_id: config.scenario.id.clone(),
        max_duration_s: config.pipeline.max_duration_s,
        seed: args.seed,
        disposition: None,
    };
    request.validate()?;

    let record = if args.interactive {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in std::io::stdin().lock().lines() {
                let Ok(line) = line else { break };
                if tx.send(VictimInput::Utterance(line)).is_err() {
                    return;
                }
            }
            let _ = tx.send(VictimInput::Hangup);
        });
        let callee = ChannelVictim::new(rx, Duration::from_secs(120));
        let adapters = adapters_with_callee(config, &request, Box::new(callee))?;
        let mut show = |e: WireEvent| {
            if let WireEvent::Transcript {
                speaker: Speaker::Bot,
                kind: EntryKind::Utterance,
                text,
                playback_ms,
                t_ms,
                ..
            } = e
            {
                println!("[{}] caller: {text}{}", clock(t_ms), playback(playback_ms));
            }
        };
        run_call(
            &request,
            &config.scenario,
            &config.pipeline,
            adapters,
            &mut show,
        )?
    } else {
        let adapters = mock_adapters(config, &request)?;
        let record = run_call(
            &request,
            &config.scenario,
            &config.pipeline,
            adapters,
            &mut vishsim::events::NullSink,
        )?;
        print_transcript(&record);
        record
    };
    println!("outcome: {}", record.outcome.class.as_str());
    Ok(())
}

fn clock(t_ms: u64) -> String {
    format!(
        "{:02}:{:02}.{}",
        t_ms / 60_000,
        t_ms / 1000 % 60,
        t_ms / 100 % 10
    )
}

fn playback(ms: Option<u64>) -> String {
    ms.map(|ms| format!("  ({:.1} s)", ms as f64 / 1000.0))
        .unwrap_or_default()
}

fn print_transcript(record: &CallRecord) {
    for e in &record.transcript {
        let who = match e.speaker {
            Speaker::Bot => "caller",
            Speaker::Victim => "victim",
            Speaker::System => "system",
        };
        println!("[{}] {who}: {}", clock(e.t_ms), e.text);
    }
}

fn load_log(path: &Path) -> Result<Vec<CallRecord>, Error> {
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(format!("no records in {}", path.display()).into());
    }
    Ok(records)
}

fn json_path(args: &ReportArgs, suffix: &str) -> PathBuf {
    args.json.clone().unwrap_or_else(|| {
        let mut name = args.input.clone().into_os_string();
        name.push(suffix);
        name.into()
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_costs(config: &Config, args: &ReportArgs) -> Result<(), Error> {
    let records = load_log(&args.input)?;
    let report = CostReport::build(&records, &config.scenario, &config.pricing);
    print!("{}", report.render_text());
    write_json(&json_path(args, ".costs.json"), &report)
}

fn cmd_outcomes(config: &Config, args: &ReportArgs) -> Result<(), Error> {
    let records = load_log(&args.input)?;
    let report = OutcomeReport::build(&records, &config.scenario)?;
    print!("{}", report.render_text());
    write_json(&json_path(args, ".outcomes.json"), &report)
}

fn cmd_serve(mut config: Config, args: &ServeArgs) -> Result<(), Error> {
    if let Some(n) = args.workers {
        if n == 0 {
            return Err("--workers must be at least 1".into());
        }
        config.fleet.workers = n;
    }
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let log = args.log.as_ref().map(RecordLog::open).transpose()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!(
            "listening on {} with {} workers",
            listener.local_addr()?,
            config.fleet.workers
        );
        let options = RuntimeOptions::from_config(&config);
        let runtime = Runtime::start(config, options, log);
        axum::serve(listener, router(AppState::new(runtime)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
