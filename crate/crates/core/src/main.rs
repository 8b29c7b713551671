use clap::{Parser, ValueEnum};
use ndplab::experiment::{
    emit_report, run_scenario_with_trace, ReportFormat, Scenario, ScenarioConfig,
};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Copy, Clone, ValueEnum)]
enum ScenarioArg {
    BaselineResolution,
    ProposalResolution,
    BaselineAttack,
    ProposalAttackGuess,
    ProposalAttackReflect,
    OverheadCompare,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::BaselineResolution => Scenario::BaselineResolution,
            ScenarioArg::ProposalResolution => Scenario::ProposalResolution,
            ScenarioArg::BaselineAttack => Scenario::BaselineAttack,
            ScenarioArg::ProposalAttackGuess => Scenario::ProposalAttackGuess,
            ScenarioArg::ProposalAttackReflect => Scenario::ProposalAttackReflect,
            ScenarioArg::OverheadCompare => Scenario::OverheadCompare,
        }
    }
}

#[derive(Debug, Copy, Clone, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Neighbor-discovery lab: run a scenario and emit a report.
#[derive(Debug, Parser)]
#[command(name = "ndplab", version)]
struct Cli {
    /// Scenario to run.
    #[arg(long, value_enum)]
    scenario: ScenarioArg,

    /// Attached entities; attack scenarios count the intruder, so 3
    /// means Alice, Bob, Intruder.
    #[arg(long, default_value_t = 3)]
    nodes: usize,

    /// Repetitions to average over.
    #[arg(long, default_value_t = 30)]
    reps: u32,

    /// Base seed; repetition i runs with seed + i.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Attacker strategy override (attack scenarios pick their own
    /// default; this is mostly informative).
    #[arg(long)]
    attacker_strategy: Option<String>,

    /// Forged NAs per observed NS.
    #[arg(long, default_value_t = 5)]
    burst: u32,

    /// Candidate addresses for the guessing attacker.
    #[arg(long, default_value_t = 8)]
    pool_size: usize,

    /// Per-node latency override, e.g. --latency alice=5 --latency intruder=1.
    #[arg(long, value_parser = parse_latency)]
    latency: Vec<(String, u64)>,

    /// Report output path; stdout summary only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,

    /// Write the last repetition's event trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn parse_latency(s: &str) -> Result<(String, u64), String> {
    let (name, ticks) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <node>=<ticks>, got {s:?}"))?;
    let ticks: u64 = ticks
        .parse()
        .map_err(|e| format!("bad tick count in {s:?}: {e}"))?;
    Ok((name.to_string(), ticks))
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = ScenarioConfig::new(cli.scenario.into());
    config.node_count = cli.nodes;
    config.repetitions = cli.reps;
    config.seed = cli.seed;
    config.burst_size = cli.burst;
    config.pool_size = cli.pool_size;
    config.latencies = cli.latency.into_iter().collect::<BTreeMap<_, _>>();

    if let Some(strategy) = &cli.attacker_strategy {
        let expected = match config.scenario {
            Scenario::BaselineAttack => Some("sniff_plaintext"),
            Scenario::ProposalAttackGuess => Some("guess_pool"),
            Scenario::ProposalAttackReflect => Some("reflect_hash"),
            _ => None,
        };
        match expected {
            Some(e) if e == strategy => {}
            Some(e) => {
                eprintln!("error: scenario uses the {e} strategy, not {strategy:?}");
                return ExitCode::FAILURE;
            }
            None => {
                eprintln!("error: --attacker-strategy only applies to attack scenarios");
                return ExitCode::FAILURE;
            }
        }
    }

    let report = match run_scenario_with_trace(&config, cli.trace.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    println!("scenario: {:?}", report.config.scenario);
    println!("repetitions: {}", report.repetitions.len());
    println!(
        "resolution success rate: {:.3}",
        report.aggregate.resolution_success_rate
    );
    if let Some(rate) = report.aggregate.attack_success_rate {
        println!("attack success rate: {rate:.3}");
    }
    if report.out_of_model {
        println!("note: {}", report.note.as_deref().unwrap_or(""));
    }
    for (name, mean) in &report.aggregate.mean_counters {
        println!(
            "{name}: frames out/in {:.1}/{:.1}, bytes out/in {:.0}/{:.0}",
            mean.frames_out, mean.frames_in, mean.bytes_out, mean.bytes_in
        );
    }
    if let Some(cmp) = &report.comparison {
        println!(
            "overhead: baseline {} frames, proposal {} frames ({} key exchanges)",
            cmp.baseline_total_frames, cmp.proposal_total_frames, cmp.key_exchanges
        );
        for (name, ratio) in &cmp.per_node_frames_out_ratio {
            println!("{name} frames_out ratio (proposal/baseline): {ratio:.2}");
        }
    }

    if let Some(path) = &cli.out {
        let format = match cli.format {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        };
        if let Err(e) = emit_report(&report, format, path) {
            eprintln!("error writing report: {e}");
            return ExitCode::FAILURE;
        }
        println!("report written to {}", path.display());
    }

    ExitCode::SUCCESS
}
