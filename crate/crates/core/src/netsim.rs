//! Deterministic in-memory link: multicast/unicast frame delivery with
//! per-attachment latency, promiscuous taps for the adversary, and full
//! packet/byte accounting.
//!
//! The event queue is ordered by (deliver_time, insertion sequence), so a
//! given scenario and seed always replay the exact same trace.

use crate::adversary::Adversary;
use crate::mac::MacAddr;
use crate::ndp_codec::{decode, encode, NdpMessage};
use crate::node_engine::{NaOutcome, NodeState, OutFrame, Ticks, ALL_NODES_IP};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::net::Ipv6Addr;
use thiserror::Error;

/// Fixed Ethernet + IPv6 header cost added to every frame's byte count.
pub const DEFAULT_FRAME_OVERHEAD: u64 = 54;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("duplicate IP address {0} on the link")]
    DuplicateIp(Ipv6Addr),
    #[error("duplicate MAC address {0} on the link")]
    DuplicateMac(MacAddr),
    #[error("unknown entity handle")]
    UnknownHandle,
    #[error("handle does not refer to a node")]
    NotANode,
}

/// A frame in flight on the simulated link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimFrame {
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub src_ip: Ipv6Addr,
    pub dst_ip: Ipv6Addr,
    pub payload: Vec<u8>,
    pub send_time: Ticks,
    pub deliver_time: Ticks,
}

/// Per-entity packet and byte accounting; the lab's stand-in for host
/// resource collection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficCounters {
    pub frames_out: u64,
    pub frames_in: u64,
    pub bytes_out: u64,
    pub bytes_in: u64,
    /// Outgoing frame counts keyed by ICMPv6 type.
    pub frames_out_by_type: BTreeMap<u8, u64>,
}

/// One delivery, for the event-trace CSV export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub tick: Ticks,
    pub src_ip: Ipv6Addr,
    pub dst_ip: Ipv6Addr,
    pub msg_type: u8,
    pub code: u8,
    pub size: usize,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub struct Handle(usize);

enum Entity {
    Node(NodeState),
    Adversary(Adversary),
}

impl Entity {
    fn ip(&self) -> Ipv6Addr {
        match self {
            Entity::Node(n) => n.own_ip(),
            Entity::Adversary(a) => a.config().own_ip,
        }
    }

    fn mac(&self) -> MacAddr {
        match self {
            Entity::Node(n) => n.own_mac(),
            Entity::Adversary(a) => a.config().own_mac,
        }
    }
}

struct Attachment {
    entity: Entity,
    latency: Ticks,
}

struct Event {
    frame: SimFrame,
    recipient: usize,
}

pub struct Simulator {
    attachments: Vec<Attachment>,
    // (deliver_time, insertion sequence) -> event; BTreeMap pops in order.
    queue: BTreeMap<(Ticks, u64), Event>,
    seq: u64,
    now: Ticks,
    counters: Vec<TrafficCounters>,
    trace: Vec<TraceRow>,
    sent_frames: Vec<SimFrame>,
    na_outcomes: Vec<(Handle, NaOutcome)>,
    malformed_drops: u64,
    frame_overhead: u64,
}

impl Default for Simulator {
    fn default() -> Self {
        Self::new()
    }
}

impl Simulator {
    pub fn new() -> Self {
        Simulator {
            attachments: Vec::new(),
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            counters: Vec::new(),
            trace: Vec::new(),
            sent_frames: Vec::new(),
            na_outcomes: Vec::new(),
            malformed_drops: 0,
            frame_overhead: DEFAULT_FRAME_OVERHEAD,
        }
    }

    pub fn with_frame_overhead(mut self, overhead: u64) -> Self {
        self.frame_overhead = overhead;
        self
    }

    pub fn now(&self) -> Ticks {
        self.now
    }

    fn check_unique(&self, ip: Ipv6Addr, mac: MacAddr) -> Result<(), SimError> {
        for a in &self.attachments {
            if a.entity.ip() == ip {
                return Err(SimError::DuplicateIp(ip));
            }
            if a.entity.mac() == mac {
                return Err(SimError::DuplicateMac(mac));
            }
        }
        Ok(())
    }

    pub fn attach_node(&mut self, node: NodeState, latency: Ticks) -> Result<Handle, SimError> {
        self.check_unique(node.own_ip(), node.own_mac())?;
        self.attachments.push(Attachment {
            entity: Entity::Node(node),
            latency,
        });
        self.counters.push(TrafficCounters::default());
        Ok(Handle(self.attachments.len() - 1))
    }

    /// Adversaries are promiscuous: they observe every frame on the link
    /// regardless of addressing. Latency comes from their config.
    pub fn attach_adversary(&mut self, adversary: Adversary) -> Result<Handle, SimError> {
        let latency = adversary.config().latency;
        self.check_unique(adversary.config().own_ip, adversary.config().own_mac)?;
        self.attachments.push(Attachment {
            entity: Entity::Adversary(adversary),
            latency,
        });
        self.counters.push(TrafficCounters::default());
        Ok(Handle(self.attachments.len() - 1))
    }

    pub fn node(&self, handle: Handle) -> &NodeState {
        match &self.attachments[handle.0].entity {
            Entity::Node(n) => n,
            Entity::Adversary(_) => panic!("handle is not a node"),
        }
    }

    pub fn node_mut(&mut self, handle: Handle) -> &mut NodeState {
        match &mut self.attachments[handle.0].entity {
            Entity::Node(n) => n,
            Entity::Adversary(_) => panic!("handle is not a node"),
        }
    }

    pub fn adversary(&self, handle: Handle) -> &Adversary {
        match &self.attachments[handle.0].entity {
            Entity::Adversary(a) => a,
            Entity::Node(_) => panic!("handle is not an adversary"),
        }
    }

    pub fn counters(&self, handle: Handle) -> &TrafficCounters {
        &self.counters[handle.0]
    }

    pub fn all_counters(&self) -> Vec<(Ipv6Addr, TrafficCounters)> {
        self.attachments
            .iter()
            .zip(self.counters.iter())
            .map(|(a, c)| (a.entity.ip(), c.clone()))
            .collect()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Every frame ever put on the link, for wire-format assertions.
    pub fn sent_frames(&self) -> &[SimFrame] {
        &self.sent_frames
    }

    pub fn na_outcomes(&self) -> &[(Handle, NaOutcome)] {
        &self.na_outcomes
    }

    pub fn malformed_drops(&self) -> u64 {
        self.malformed_drops
    }

    /// Asks a node to start a key exchange and puts the frame on the link.
    pub fn start_key_exchange(
        &mut self,
        handle: Handle,
        peer_ip: Ipv6Addr,
    ) -> Result<(), crate::node_engine::NodeError> {
        let now = self.now;
        if let crate::node_engine::KexStart::Initiated(frame) =
            self.node_mut(handle).start_key_exchange(peer_ip)?
        {
            self.transmit(handle.0, frame, now);
        }
        Ok(())
    }

    /// Asks a node to resolve `target_ip` and puts the NS on the link.
    pub fn begin_resolution(
        &mut self,
        handle: Handle,
        target_ip: Ipv6Addr,
    ) -> Result<(), crate::node_engine::NodeError> {
        let now = self.now;
        let frame = self.node_mut(handle).begin_resolution(target_ip, now)?;
        self.transmit(handle.0, frame, now);
        Ok(())
    }

    fn transmit(&mut self, sender: usize, out: OutFrame, now: Ticks) {
        let src_ip = self.attachments[sender].entity.ip();
        self.transmit_raw(sender, src_ip, out, now);
    }

    /// Puts a frame on the link with an explicit (possibly spoofed)
    /// source IP; the source MAC is always the sender's real one.
    fn transmit_raw(&mut self, sender: usize, src_ip: Ipv6Addr, out: OutFrame, now: Ticks) {
        let payload = match encode(&out.message, &src_ip, &out.dst_ip) {
            Ok(p) => p,
            Err(_) => {
                self.malformed_drops += 1;
                return;
            }
        };
        let size = payload.len() as u64 + self.frame_overhead;
        let (msg_type, _) = out.message.type_and_code();
        let counters = &mut self.counters[sender];
        counters.frames_out += 1;
        counters.bytes_out += size;
        *counters.frames_out_by_type.entry(msg_type).or_insert(0) += 1;

        let template = SimFrame {
            src_mac: self.attachments[sender].entity.mac(),
            dst_mac: out.dst_mac,
            src_ip,
            dst_ip: out.dst_ip,
            payload,
            send_time: now,
            deliver_time: now,
        };
        self.sent_frames.push(template.clone());

        let multicast = out.dst_ip == ALL_NODES_IP;
        for idx in 0..self.attachments.len() {
            if idx == sender {
                continue;
            }
            let receives = match &self.attachments[idx].entity {
                Entity::Adversary(_) => true, // promiscuous tap
                Entity::Node(n) => multicast || out.dst_ip == n.own_ip(),
            };
            if !receives {
                continue;
            }
            let mut frame = template.clone();
            frame.deliver_time = now + self.attachments[idx].latency;
            self.queue.insert(
                (frame.deliver_time, self.seq),
                Event {
                    frame,
                    recipient: idx,
                },
            );
            self.seq += 1;
        }
    }

    /// Drives the event queue until it drains or time exceeds `until`,
    /// then advances the clock to `until` so pending deadlines expire.
    pub fn run(&mut self, until: Ticks) {
        while let Some((&(deliver_time, seq), _)) = self.queue.iter().next() {
            if deliver_time > until {
                break;
            }
            let event = self.queue.remove(&(deliver_time, seq)).unwrap();
            self.now = deliver_time;
            self.deliver(event);
        }
        if self.now < until {
            self.now = until;
        }
        for a in &mut self.attachments {
            if let Entity::Node(n) = &mut a.entity {
                n.expire_pending(self.now);
            }
        }
    }

    fn deliver(&mut self, event: Event) {
        let Event { frame, recipient } = event;
        let size = frame.payload.len() as u64 + self.frame_overhead;
        self.counters[recipient].frames_in += 1;
        self.counters[recipient].bytes_in += size;

        let (msg_type, code) = (
            *frame.payload.first().unwrap_or(&0),
            *frame.payload.get(1).unwrap_or(&0),
        );
        self.trace.push(TraceRow {
            tick: frame.deliver_time,
            src_ip: frame.src_ip,
            dst_ip: frame.dst_ip,
            msg_type,
            code,
            size: frame.payload.len(),
        });

        let now = self.now;
        match &mut self.attachments[recipient].entity {
            Entity::Adversary(adv) => {
                let forged = adv.on_observe(&frame);
                for f in forged {
                    let out = OutFrame {
                        dst_ip: f.dst_ip,
                        dst_mac: f.dst_mac,
                        message: f.message,
                    };
                    self.transmit_raw(recipient, f.src_ip, out, now);
                }
            }
            Entity::Node(node) => {
                node.expire_pending(now);
                let decoded = match decode(&frame.payload, &frame.src_ip, &frame.dst_ip) {
                    Ok(m) => m,
                    Err(_) => {
                        self.malformed_drops += 1;
                        return;
                    }
                };
                match decoded {
                    NdpMessage::KexInit { .. } | NdpMessage::KexResp { .. } => {
                        // Degenerate values and out-of-order responses are
                        // dropped; the simulation keeps going.
                        if let Ok(Some(reply)) = node.handle_kex(&decoded, frame.src_ip) {
                            self.transmit(recipient, reply, now);
                        }
                    }
                    NdpMessage::NeighborSolicitation(ns) => {
                        if let Some(reply) = node.handle_ns(&ns, frame.src_ip) {
                            self.transmit(recipient, reply, now);
                        }
                    }
                    NdpMessage::NeighborAdvertisement(na) => {
                        let outcome = node.handle_na(&na, frame.src_ip, now);
                        self.na_outcomes.push((Handle(recipient), outcome));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dh_keyex::DhGroup;
    use crate::node_engine::Mode;

    fn ip(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn node(last: u8, mode: Mode) -> NodeState {
        NodeState::new(
            format!("fe80::{last}").parse().unwrap(),
            MacAddr([0x02, 0, 0, 0, 0, last]),
            mode,
            DhGroup::test_group(),
            u64::from(last),
        )
    }

    #[test]
    fn empty_queue_zero_counters() {
        let mut sim = Simulator::new();
        let a = sim.attach_node(node(1, Mode::Standard), 1).unwrap();
        sim.run(100);
        assert_eq!(sim.counters(a), &TrafficCounters::default());
    }

    #[test]
    fn duplicate_ip_rejected() {
        let mut sim = Simulator::new();
        sim.attach_node(node(1, Mode::Standard), 1).unwrap();
        assert_eq!(
            sim.attach_node(node(1, Mode::Standard), 1).unwrap_err(),
            SimError::DuplicateIp(ip("fe80::1"))
        );
    }

    #[test]
    fn multicast_ns_reaches_all_others() {
        let mut sim = Simulator::new();
        let a = sim.attach_node(node(1, Mode::Standard), 1).unwrap();
        let b = sim.attach_node(node(2, Mode::Standard), 1).unwrap();
        let c = sim.attach_node(node(3, Mode::Standard), 1).unwrap();
        sim.begin_resolution(a, ip("fe80::2")).unwrap();
        sim.run(1000);

        assert_eq!(sim.counters(a).frames_out, 1);
        assert_eq!(sim.counters(b).frames_in, 1);
        assert_eq!(sim.counters(c).frames_in, 1);
        assert_eq!(sim.counters(a).bytes_out, 32 + DEFAULT_FRAME_OVERHEAD);
        // Bob answered; Carol stayed silent.
        assert_eq!(sim.counters(b).frames_out, 1);
        assert_eq!(sim.counters(c).frames_out, 0);
        assert_eq!(sim.node(a).lookup(&ip("fe80::2")), Some(MacAddr([0x02, 0, 0, 0, 0, 2])));
    }

    #[test]
    fn latency_orders_delivery() {
        // Two responders to the same multicast stimulus: the node with the
        // smaller attachment latency hears it, and answers, first.
        let mut sim = Simulator::new();
        let a = sim.attach_node(node(1, Mode::Standard), 5).unwrap();
        let _slow = sim.attach_node(node(2, Mode::Standard), 5).unwrap();
        let _fast = sim.attach_node(node(3, Mode::Standard), 1).unwrap();
        sim.begin_resolution(a, ip("fe80::2")).unwrap();
        sim.run(1000);
        let rows = sim.trace();
        // Delivery to the fast node (tick 1) precedes the slow one (tick 5).
        assert_eq!(rows[0].tick, 1);
        assert_eq!(rows[1].tick, 5);
    }

    #[test]
    fn determinism_same_scenario_same_counters() {
        let run_once = || {
            let mut sim = Simulator::new();
            let a = sim.attach_node(node(1, Mode::Standard), 2).unwrap();
            sim.attach_node(node(2, Mode::Standard), 3).unwrap();
            sim.attach_node(node(3, Mode::Standard), 4).unwrap();
            sim.begin_resolution(a, ip("fe80::2")).unwrap();
            sim.begin_resolution(a, ip("fe80::3")).unwrap();
            sim.run(1000);
            (sim.all_counters(), sim.trace().to_vec())
        };
        assert_eq!(run_once(), run_once());
    }

    #[test]
    fn conservation_of_frames() {
        let mut sim = Simulator::new();
        let a = sim.attach_node(node(1, Mode::Standard), 2).unwrap();
        sim.attach_node(node(2, Mode::Standard), 3).unwrap();
        sim.attach_node(node(3, Mode::Standard), 4).unwrap();
        sim.begin_resolution(a, ip("fe80::2")).unwrap();
        sim.run(1000);

        // NS multicast to 2 recipients + NA unicast to 1 = 3 deliveries.
        let total_in: u64 = sim.all_counters().iter().map(|(_, c)| c.frames_in).sum();
        assert_eq!(total_in, 3);
        assert_eq!(sim.trace().len(), 3);
        assert_eq!(sim.malformed_drops(), 0);

        // Per-type sums equal total frames out.
        for (_, c) in sim.all_counters() {
            let by_type: u64 = c.frames_out_by_type.values().sum();
            assert_eq!(by_type, c.frames_out);
        }
    }

    #[test]
    fn causality_no_delivery_before_send() {
        let mut sim = Simulator::new();
        let a = sim.attach_node(node(1, Mode::Standard), 7).unwrap();
        sim.attach_node(node(2, Mode::Standard), 3).unwrap();
        sim.begin_resolution(a, ip("fe80::2")).unwrap();
        sim.run(1000);
        for f in sim.sent_frames() {
            assert!(f.deliver_time >= f.send_time);
        }
    }

    #[test]
    fn hashed_end_to_end_kex_then_resolution() {
        let mut sim = Simulator::new();
        let a = sim.attach_node(node(1, Mode::Hashed), 2).unwrap();
        let b = sim.attach_node(node(2, Mode::Hashed), 2).unwrap();
        sim.start_key_exchange(a, ip("fe80::2")).unwrap();
        sim.run(1000);
        assert_eq!(
            sim.node(a).pairwise_key(&ip("fe80::2")),
            sim.node(b).pairwise_key(&ip("fe80::1"))
        );
        assert!(sim.node(a).pairwise_key(&ip("fe80::2")).is_some());

        sim.begin_resolution(a, ip("fe80::2")).unwrap();
        sim.run(2000);
        assert_eq!(
            sim.node(a).lookup(&ip("fe80::2")),
            Some(MacAddr([0x02, 0, 0, 0, 0, 2]))
        );
    }
}
