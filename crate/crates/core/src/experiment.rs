//! Scenario runner and report emitter: repeated, seeded runs of the
//! resolution and attack scenarios with per-node traffic accounting,
//! aggregated the same way the overhead comparison averages were.

use crate::adversary::{Adversary, AttackOutcome, AttackerConfig, Strategy};
use crate::dh_keyex::DhGroup;
use crate::hashed_target::hash_target;
use crate::mac::MacAddr;
use crate::ndp_codec::{decode, NdpMessage, TYPE_NS};
use crate::netsim::{Handle, Simulator, TraceRow, TrafficCounters};
use crate::node_engine::{Mode, NaOutcome, NodeState, Ticks};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::net::Ipv6Addr;
use std::path::Path;
use thiserror::Error;

const KEX_PHASE_LIMIT: Ticks = 10_000;
const RESOLUTION_PHASE_LIMIT: Ticks = 20_000;

pub const DEFAULT_REPETITIONS: u32 = 30;
pub const DEFAULT_POOL_SIZE: usize = 8;
pub const DEFAULT_HONEST_LATENCY: Ticks = 5;
pub const DEFAULT_ATTACKER_LATENCY: Ticks = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BaselineResolution,
    ProposalResolution,
    BaselineAttack,
    ProposalAttackGuess,
    ProposalAttackReflect,
    OverheadCompare,
}

impl Scenario {
    pub fn has_attacker(self) -> bool {
        matches!(
            self,
            Scenario::BaselineAttack
                | Scenario::ProposalAttackGuess
                | Scenario::ProposalAttackReflect
        )
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Total attached entities; in attack scenarios the last one is the
    /// intruder, so 3 means Alice, Bob, Intruder.
    pub node_count: usize,
    pub repetitions: u32,
    pub seed: u64,
    /// Latency overrides by node name (alice, bob, host3.., intruder).
    pub latencies: BTreeMap<String, Ticks>,
    pub burst_size: u32,
    pub pool_size: usize,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            node_count: 3,
            repetitions: DEFAULT_REPETITIONS,
            seed: 1,
            latencies: BTreeMap::new(),
            burst_size: crate::adversary::DEFAULT_BURST_SIZE,
            pool_size: DEFAULT_POOL_SIZE,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.repetitions < 1 {
            return Err(ExperimentError::Config("repetitions must be >= 1".into()));
        }
        if self.node_count < 2 {
            return Err(ExperimentError::Config("node_count must be >= 2".into()));
        }
        if self.scenario.has_attacker() && self.node_count < 3 {
            return Err(ExperimentError::Config(
                "attack scenarios need node_count >= 3 (Alice, Bob, Intruder)".into(),
            ));
        }
        if self.burst_size < 1 {
            return Err(ExperimentError::Config("burst_size must be >= 1".into()));
        }
        if self.scenario == Scenario::ProposalAttackGuess && self.pool_size < 1 {
            return Err(ExperimentError::Config("pool_size must be >= 1".into()));
        }
        Ok(())
    }

    fn honest_count(&self) -> usize {
        if self.scenario.has_attacker() {
            self.node_count - 1
        } else {
            self.node_count
        }
    }

    fn latency_for(&self, name: &str) -> Ticks {
        let default = if name == "intruder" {
            DEFAULT_ATTACKER_LATENCY
        } else {
            DEFAULT_HONEST_LATENCY
        };
        *self.latencies.get(name).unwrap_or(&default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: u32,
    pub counters: BTreeMap<String, TrafficCounters>,
    /// Only populated by overhead_compare: the standard-mode run on the
    /// identical topology.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_counters: Option<BTreeMap<String, TrafficCounters>>,
    pub resolved: bool,
    pub cached_mac: Option<MacAddr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackOutcome>,
    pub forged_na_accepted: u64,
    /// In hashed runs: every emitted NS carried the expected hash and
    /// never the plaintext target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hashed_ns_verified: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanCounters {
    pub frames_out: f64,
    pub frames_in: f64,
    pub bytes_out: f64,
    pub bytes_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_counters: BTreeMap<String, MeanCounters>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_mean_counters: Option<BTreeMap<String, MeanCounters>>,
    pub resolution_success_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_success_rate: Option<f64>,
    pub total_forged_na_accepted: u64,
}

/// Proposal-over-baseline traffic ratios from the overhead comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadComparison {
    pub baseline_total_frames: u64,
    pub proposal_total_frames: u64,
    pub key_exchanges: u64,
    pub per_node_frames_out_ratio: BTreeMap<String, f64>,
    pub per_node_bytes_out_ratio: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ScenarioConfig,
    pub repetitions: Vec<RepetitionReport>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<OverheadComparison>,
    /// True for scenarios probing weaknesses outside the original
    /// attacker model (the hash-reflection strategy).
    pub out_of_model: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn node_name(index: usize) -> String {
    match index {
        0 => "alice".to_string(),
        1 => "bob".to_string(),
        i => format!("host{}", i + 1),
    }
}

fn node_ip(index: usize) -> Ipv6Addr {
    Ipv6Addr::new(0xfe80, 0, 0, 0, 0, 0, 0, (index + 1) as u16)
}

fn node_mac(index: usize) -> MacAddr {
    MacAddr([0x02, 0, 0, 0, 0, (index + 1) as u8])
}

const INTRUDER_IP: Ipv6Addr = Ipv6Addr::new(0xfe80, 0, 0, 0, 0, 0, 0, 0xff);
const INTRUDER_MAC: MacAddr = MacAddr([0x02, 0, 0, 0, 0, 0xff]);

fn node_seed(rep_seed: u64, index: usize) -> u64 {
    rep_seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(index as u64 + 1)
}

/// Candidate addresses for the guessing attacker, never colliding with a
/// real node address (the attacker "could not see" the true target).
fn build_guess_pool(rep_seed: u64, pool_size: usize, honest: usize) -> Vec<Ipv6Addr> {
    let taken: Vec<Ipv6Addr> = (0..honest).map(node_ip).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(rep_seed ^ 0x6775657373); // "guess"
    let mut pool = Vec::with_capacity(pool_size);
    while pool.len() < pool_size {
        let candidate = Ipv6Addr::new(0xfe80, 0, 0, 0, 0, 0, rng.gen(), rng.gen());
        if candidate == INTRUDER_IP || taken.contains(&candidate) || pool.contains(&candidate) {
            continue;
        }
        pool.push(candidate);
    }
    pool
}

struct RepOutcome {
    counters: BTreeMap<String, TrafficCounters>,
    resolved: bool,
    cached_mac: Option<MacAddr>,
    attack: Option<AttackOutcome>,
    forged_na_accepted: u64,
    hashed_ns_verified: Option<bool>,
    trace: Vec<TraceRow>,
}

fn build_honest_nodes(
    cfg: &ScenarioConfig,
    mode: Mode,
    rep_seed: u64,
    sim: &mut Simulator,
) -> Result<Vec<Handle>, ExperimentError> {
    let honest = cfg.honest_count();
    let mut handles = Vec::with_capacity(honest);
    for i in 0..honest {
        let node = NodeState::new(
            node_ip(i),
            node_mac(i),
            mode,
            DhGroup::test_group(),
            node_seed(rep_seed, i),
        );
        let latency = cfg.latency_for(&node_name(i));
        let handle = sim
            .attach_node(node, latency)
            .map_err(|e| ExperimentError::Setup(e.to_string()))?;
        handles.push(handle);
    }
    Ok(handles)
}

fn run_one_rep(
    cfg: &ScenarioConfig,
    mode: Mode,
    strategy: Option<Strategy>,
    rep_seed: u64,
) -> Result<RepOutcome, ExperimentError> {
    let mut sim = Simulator::new();
    let handles = build_honest_nodes(cfg, mode, rep_seed, &mut sim)?;
    let honest = handles.len();

    let attacker_handle = match strategy {
        Some(strategy) => {
            let guess_pool = if strategy == Strategy::GuessPool {
                build_guess_pool(rep_seed, cfg.pool_size, honest)
            } else {
                Vec::new()
            };
            let adversary = Adversary::new(AttackerConfig {
                strategy,
                burst_size: cfg.burst_size,
                guess_pool,
                own_ip: INTRUDER_IP,
                own_mac: INTRUDER_MAC,
                latency: cfg.latency_for("intruder"),
            })
            .map_err(|e| ExperimentError::Setup(e.to_string()))?;
            Some(
                sim.attach_adversary(adversary)
                    .map_err(|e| ExperimentError::Setup(e.to_string()))?,
            )
        }
        None => None,
    };

    // Eager key establishment among all honest pairs, initiator = lower
    // index, before any resolution.
    if mode == Mode::Hashed {
        for i in 0..honest {
            for j in (i + 1)..honest {
                sim.start_key_exchange(handles[i], node_ip(j))
                    .map_err(|e| ExperimentError::Setup(e.to_string()))?;
            }
        }
        sim.run(KEX_PHASE_LIMIT);
    }

    let alice = handles[0];
    let bob_ip = node_ip(1);
    sim.begin_resolution(alice, bob_ip)
        .map_err(|e| ExperimentError::Setup(e.to_string()))?;
    sim.run(RESOLUTION_PHASE_LIMIT);

    // Hiding check: every NS on the wire carried the expected hash, not
    // the plaintext target.
    let hashed_ns_verified = if mode == Mode::Hashed {
        let key = sim
            .node(alice)
            .pairwise_key(&bob_ip)
            .copied()
            .ok_or_else(|| ExperimentError::Setup("key exchange did not converge".into()))?;
        let expected = hash_target(&key, &bob_ip).0;
        let all_ok = sim
            .sent_frames()
            .iter()
            .filter(|f| f.payload.first() == Some(&TYPE_NS))
            .all(|f| match decode(&f.payload, &f.src_ip, &f.dst_ip) {
                Ok(NdpMessage::NeighborSolicitation(ns)) => {
                    ns.target == expected && ns.target != bob_ip.octets()
                }
                _ => false,
            });
        Some(all_ok)
    } else {
        None
    };

    let cached_mac = sim.node(alice).lookup(&bob_ip);
    let forged_na_accepted = sim
        .na_outcomes()
        .iter()
        .filter(|(h, o)| {
            *h == alice && matches!(o, NaOutcome::Accepted { mac, .. } if *mac == INTRUDER_MAC)
        })
        .count() as u64;

    let attack = attacker_handle.map(|h| {
        let forged_frames_sent = sim.adversary(h).forged_frames_sent();
        AttackOutcome {
            succeeded: cached_mac == Some(INTRUDER_MAC),
            victim_cached_mac: cached_mac,
            forged_frames_sent,
        }
    });

    let mut counters = BTreeMap::new();
    for (i, h) in handles.iter().enumerate() {
        counters.insert(node_name(i), sim.counters(*h).clone());
    }
    if let Some(h) = attacker_handle {
        counters.insert("intruder".to_string(), sim.counters(h).clone());
    }

    Ok(RepOutcome {
        counters,
        resolved: cached_mac.is_some(),
        cached_mac,
        attack,
        forged_na_accepted,
        hashed_ns_verified,
        trace: sim.trace().to_vec(),
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ExperimentReport, ExperimentError> {
    run_scenario_with_trace(config, None)
}

/// Like `run_scenario`, additionally writing the event trace of the last
/// repetition as CSV to `trace_path`.
pub fn run_scenario_with_trace(
    config: &ScenarioConfig,
    trace_path: Option<&Path>,
) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;

    let (mode, strategy) = match config.scenario {
        Scenario::BaselineResolution => (Mode::Standard, None),
        Scenario::ProposalResolution => (Mode::Hashed, None),
        Scenario::BaselineAttack => (Mode::Standard, Some(Strategy::SniffPlaintext)),
        Scenario::ProposalAttackGuess => (Mode::Hashed, Some(Strategy::GuessPool)),
        Scenario::ProposalAttackReflect => (Mode::Hashed, Some(Strategy::ReflectHash)),
        Scenario::OverheadCompare => (Mode::Hashed, None),
    };

    let mut reps = Vec::with_capacity(config.repetitions as usize);
    let mut last_trace = Vec::new();
    for rep in 0..config.repetitions {
        let rep_seed = config.seed + u64::from(rep);
        let outcome = run_one_rep(config, mode, strategy, rep_seed)?;
        let baseline_counters = if config.scenario == Scenario::OverheadCompare {
            let baseline = run_one_rep(config, Mode::Standard, None, rep_seed)?;
            Some(baseline.counters)
        } else {
            None
        };
        last_trace = outcome.trace;
        reps.push(RepetitionReport {
            repetition: rep,
            counters: outcome.counters,
            baseline_counters,
            resolved: outcome.resolved,
            cached_mac: outcome.cached_mac,
            attack: outcome.attack,
            forged_na_accepted: outcome.forged_na_accepted,
            hashed_ns_verified: outcome.hashed_ns_verified,
        });
    }

    let aggregate = aggregate(&reps);
    let comparison = if config.scenario == Scenario::OverheadCompare {
        Some(compare_overhead(config, &reps))
    } else {
        None
    };

    let (out_of_model, note) = match config.scenario {
        Scenario::ProposalAttackReflect => (
            true,
            Some(
                "hash reflection is out of model for the original MitM experiment: \
                 it demonstrates the static-hash replay boundary of the scheme"
                    .to_string(),
            ),
        ),
        _ => (false, None),
    };

    if let Some(path) = trace_path {
        write_trace_csv(&last_trace, path)?;
    }

    Ok(ExperimentReport {
        config: config.clone(),
        repetitions: reps,
        aggregate,
        comparison,
        out_of_model,
        note,
    })
}

fn mean_of(counters: impl Iterator<Item = TrafficCounters> + Clone, n: f64) -> MeanCounters {
    let mut m = MeanCounters::default();
    for c in counters {
        m.frames_out += c.frames_out as f64;
        m.frames_in += c.frames_in as f64;
        m.bytes_out += c.bytes_out as f64;
        m.bytes_in += c.bytes_in as f64;
    }
    m.frames_out /= n;
    m.frames_in /= n;
    m.bytes_out /= n;
    m.bytes_in /= n;
    m
}

fn mean_table(
    tables: &[&BTreeMap<String, TrafficCounters>],
) -> BTreeMap<String, MeanCounters> {
    let n = tables.len() as f64;
    let mut out = BTreeMap::new();
    if let Some(first) = tables.first() {
        for name in first.keys() {
            let means = mean_of(
                tables.iter().map(|t| t[name].clone()).collect::<Vec<_>>().into_iter(),
                n,
            );
            out.insert(name.clone(), means);
        }
    }
    out
}

fn aggregate(reps: &[RepetitionReport]) -> Aggregate {
    let n = reps.len() as f64;
    let tables: Vec<&BTreeMap<String, TrafficCounters>> =
        reps.iter().map(|r| &r.counters).collect();
    let mean_counters = mean_table(&tables);

    let baseline_mean_counters = if reps.iter().all(|r| r.baseline_counters.is_some()) {
        let tables: Vec<&BTreeMap<String, TrafficCounters>> = reps
            .iter()
            .map(|r| r.baseline_counters.as_ref().unwrap())
            .collect();
        Some(mean_table(&tables))
    } else {
        None
    };

    let resolution_success_rate = reps.iter().filter(|r| r.resolved).count() as f64 / n;
    let attack_success_rate = if reps.iter().all(|r| r.attack.is_some()) {
        Some(
            reps.iter()
                .filter(|r| r.attack.as_ref().unwrap().succeeded)
                .count() as f64
                / n,
        )
    } else {
        None
    };
    let total_forged_na_accepted = reps.iter().map(|r| r.forged_na_accepted).sum();

    Aggregate {
        mean_counters,
        baseline_mean_counters,
        resolution_success_rate,
        attack_success_rate,
        total_forged_na_accepted,
    }
}

fn compare_overhead(config: &ScenarioConfig, reps: &[RepetitionReport]) -> OverheadComparison {
    let total = |table: &BTreeMap<String, TrafficCounters>| -> u64 {
        table.values().map(|c| c.frames_out).sum()
    };
    // Deterministic scenarios make every repetition identical; totals come
    // from the first one.
    let first = &reps[0];
    let baseline = first.baseline_counters.as_ref().expect("overhead rep");
    let honest = config.honest_count() as u64;
    let key_exchanges = honest * (honest - 1) / 2;

    let mut frames_ratio = BTreeMap::new();
    let mut bytes_ratio = BTreeMap::new();
    // Ratios are only meaningful for nodes that sent baseline traffic.
    for (name, proposal_c) in &first.counters {
        let baseline_c = &baseline[name];
        if baseline_c.frames_out > 0 {
            frames_ratio.insert(
                name.clone(),
                proposal_c.frames_out as f64 / baseline_c.frames_out as f64,
            );
        }
        if baseline_c.bytes_out > 0 {
            bytes_ratio.insert(
                name.clone(),
                proposal_c.bytes_out as f64 / baseline_c.bytes_out as f64,
            );
        }
    }

    OverheadComparison {
        baseline_total_frames: total(baseline),
        proposal_total_frames: total(&first.counters),
        key_exchanges,
        per_node_frames_out_ratio: frames_ratio,
        per_node_bytes_out_ratio: bytes_ratio,
    }
}

pub fn report_to_json(report: &ExperimentReport) -> Result<String, ExperimentError> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["tick", "src_ip", "dst_ip", "type", "code", "size"])?;
    for row in rows {
        writer.write_record([
            row.tick.to_string(),
            row.src_ip.to_string(),
            row.dst_ip.to_string(),
            row.msg_type.to_string(),
            row.code.to_string(),
            row.size.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), ExperimentError> {
    match format {
        ReportFormat::Json => {
            std::fs::write(path, report_to_json(report)?)?;
        }
        ReportFormat::Csv => {
            write_report_csv(report, path)?;
        }
    }
    Ok(())
}

/// One row per repetition plus a final `mean` row.
fn write_report_csv(report: &ExperimentReport, path: &Path) -> Result<(), ExperimentError> {
    let names: Vec<String> = report
        .repetitions
        .first()
        .map(|r| r.counters.keys().cloned().collect())
        .unwrap_or_default();

    let mut header = vec![
        "repetition".to_string(),
        "resolved".to_string(),
        "attack_succeeded".to_string(),
        "forged_na_accepted".to_string(),
    ];
    for n in &names {
        for metric in ["frames_out", "frames_in", "bytes_out", "bytes_in"] {
            header.push(format!("{n}_{metric}"));
        }
    }

    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(&header)?;
    for rep in &report.repetitions {
        let mut row = vec![
            rep.repetition.to_string(),
            u8::from(rep.resolved).to_string(),
            rep.attack
                .as_ref()
                .map(|a| u8::from(a.succeeded).to_string())
                .unwrap_or_default(),
            rep.forged_na_accepted.to_string(),
        ];
        for n in &names {
            let c = &rep.counters[n];
            row.push(c.frames_out.to_string());
            row.push(c.frames_in.to_string());
            row.push(c.bytes_out.to_string());
            row.push(c.bytes_in.to_string());
        }
        writer.write_record(&row)?;
    }

    let agg = &report.aggregate;
    let mut row = vec![
        "mean".to_string(),
        agg.resolution_success_rate.to_string(),
        agg.attack_success_rate
            .map(|r| r.to_string())
            .unwrap_or_default(),
        agg.total_forged_na_accepted.to_string(),
    ];
    for n in &names {
        let m = &agg.mean_counters[n];
        row.push(m.frames_out.to_string());
        row.push(m.frames_in.to_string());
        row.push(m.bytes_out.to_string());
        row.push(m.bytes_in.to_string());
    }
    writer.write_record(&row)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(scenario: Scenario) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(scenario);
        cfg.repetitions = 3;
        cfg
    }

    #[test]
    fn config_validation() {
        let mut cfg = quick(Scenario::BaselineAttack);
        cfg.node_count = 2;
        assert!(matches!(
            cfg.validate(),
            Err(ExperimentError::Config(_))
        ));
        cfg.node_count = 3;
        cfg.repetitions = 0;
        assert!(matches!(cfg.validate(), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn baseline_resolution_resolves_bob() {
        let report = run_scenario(&quick(Scenario::BaselineResolution)).unwrap();
        assert_eq!(report.aggregate.resolution_success_rate, 1.0);
        for rep in &report.repetitions {
            assert_eq!(rep.cached_mac, Some(node_mac(1)));
            // Alice sends exactly the one NS.
            assert_eq!(rep.counters["alice"].frames_out, 1);
        }
    }

    #[test]
    fn proposal_resolution_hides_the_target() {
        let report = run_scenario(&quick(Scenario::ProposalResolution)).unwrap();
        assert_eq!(report.aggregate.resolution_success_rate, 1.0);
        for rep in &report.repetitions {
            assert_eq!(rep.hashed_ns_verified, Some(true));
            assert_eq!(rep.cached_mac, Some(node_mac(1)));
        }
    }

    #[test]
    fn baseline_attack_always_wins_the_race() {
        let report = run_scenario(&quick(Scenario::BaselineAttack)).unwrap();
        assert_eq!(report.aggregate.attack_success_rate, Some(1.0));
        for rep in &report.repetitions {
            assert_eq!(rep.cached_mac, Some(INTRUDER_MAC));
        }
    }

    #[test]
    fn guess_attack_never_succeeds() {
        let report = run_scenario(&quick(Scenario::ProposalAttackGuess)).unwrap();
        assert_eq!(report.aggregate.attack_success_rate, Some(0.0));
        assert_eq!(report.aggregate.total_forged_na_accepted, 0);
        assert_eq!(report.aggregate.resolution_success_rate, 1.0);
        for rep in &report.repetitions {
            assert_eq!(rep.cached_mac, Some(node_mac(1)));
            assert!(rep.attack.as_ref().unwrap().forged_frames_sent > 0);
        }
    }

    #[test]
    fn reflect_attack_demonstrates_the_boundary() {
        let report = run_scenario(&quick(Scenario::ProposalAttackReflect)).unwrap();
        assert_eq!(report.aggregate.attack_success_rate, Some(1.0));
        assert!(report.out_of_model);
        assert!(report.note.is_some());
    }

    #[test]
    fn overhead_decomposition_is_exact() {
        let report = run_scenario(&quick(Scenario::OverheadCompare)).unwrap();
        let cmp = report.comparison.as_ref().unwrap();
        assert_eq!(cmp.key_exchanges, 3);
        assert_eq!(
            cmp.proposal_total_frames,
            cmp.baseline_total_frames + 2 * cmp.key_exchanges
        );
        assert_eq!(cmp.per_node_frames_out_ratio["alice"], 3.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = quick(Scenario::ProposalAttackGuess);
        let a = report_to_json(&run_scenario(&cfg).unwrap()).unwrap();
        let b = report_to_json(&run_scenario(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trips() {
        let report = run_scenario(&quick(Scenario::BaselineAttack)).unwrap();
        let json = report_to_json(&report).unwrap();
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn csv_aggregate_row_matches_mean_of_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let report = run_scenario(&quick(Scenario::BaselineResolution)).unwrap();
        emit_report(&report, ReportFormat::Csv, &path).unwrap();

        let mut rdr = csv::Reader::from_path(&path).unwrap();
        let headers = rdr.headers().unwrap().clone();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        let (mean_row, data_rows) = rows.split_last().unwrap();
        assert_eq!(&mean_row[0], "mean");

        let col = headers
            .iter()
            .position(|h| h == "alice_frames_out")
            .unwrap();
        let sum: f64 = data_rows.iter().map(|r| r[col].parse::<f64>().unwrap()).sum();
        let mean: f64 = mean_row[col].parse().unwrap();
        assert_eq!(mean, sum / data_rows.len() as f64);
    }
}
