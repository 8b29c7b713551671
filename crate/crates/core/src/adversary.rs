//! The Intruder: a promiscuous tap that watches for neighbor
//! solicitations and answers each one with a burst of forged neighbor
//! advertisements carrying its own MAC.
//!
//! Three strategies:
//! - `SniffPlaintext`: read the plaintext Target of a code-0 NS and claim
//!   that address (the classic NDP spoof).
//! - `GuessPool`: the Target is hidden, so forge one burst per candidate
//!   address from a finite pool.
//! - `ReflectHash`: echo the observed 16 Target bytes verbatim into
//!   code-1 NAs. This probes the static-hash boundary of the hashed
//!   scheme and is out of model for the honest-race experiments.

use crate::mac::MacAddr;
use crate::ndp_codec::{decode, NdpMessage, NeighborAdvertisement, TargetMode};
use crate::netsim::SimFrame;
use serde::{Deserialize, Serialize};
use std::net::Ipv6Addr;
use thiserror::Error;

pub const DEFAULT_BURST_SIZE: u32 = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("burst_size must be at least 1")]
    ZeroBurst,
    #[error("guess_pool must be non-empty for the guess_pool strategy")]
    EmptyGuessPool,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SniffPlaintext,
    GuessPool,
    ReflectHash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackerConfig {
    pub strategy: Strategy,
    pub burst_size: u32,
    pub guess_pool: Vec<Ipv6Addr>,
    pub own_ip: Ipv6Addr,
    pub own_mac: MacAddr,
    pub latency: u64,
}

/// A frame the attacker wants transmitted, with a spoofable source IP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgedFrame {
    pub src_ip: Ipv6Addr,
    pub dst_ip: Ipv6Addr,
    pub dst_mac: MacAddr,
    pub message: NdpMessage,
}

/// Outcome of an attack scenario, judged against the victim's cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub succeeded: bool,
    pub victim_cached_mac: Option<MacAddr>,
    pub forged_frames_sent: u64,
}

#[derive(Debug)]
pub struct Adversary {
    config: AttackerConfig,
    forged_frames_sent: u64,
}

impl Adversary {
    pub fn new(config: AttackerConfig) -> Result<Self, AdversaryError> {
        if config.burst_size < 1 {
            return Err(AdversaryError::ZeroBurst);
        }
        if config.strategy == Strategy::GuessPool && config.guess_pool.is_empty() {
            return Err(AdversaryError::EmptyGuessPool);
        }
        Ok(Adversary {
            config,
            forged_frames_sent: 0,
        })
    }

    pub fn config(&self) -> &AttackerConfig {
        &self.config
    }

    pub fn forged_frames_sent(&self) -> u64 {
        self.forged_frames_sent
    }

    /// Called for every frame on the tap. Non-NS frames yield nothing;
    /// an NS triggers the configured forgery.
    pub fn on_observe(&mut self, frame: &SimFrame) -> Vec<ForgedFrame> {
        let ns = match decode(&frame.payload, &frame.src_ip, &frame.dst_ip) {
            Ok(NdpMessage::NeighborSolicitation(ns)) => ns,
            _ => return Vec::new(),
        };
        let victim_ip = frame.src_ip;
        let victim_mac = ns.source_link_layer;

        let mut forged = Vec::new();
        let mut push_na = |src_ip: Ipv6Addr, mode: TargetMode, target: [u8; 16]| {
            forged.push(ForgedFrame {
                src_ip,
                dst_ip: victim_ip,
                dst_mac: victim_mac,
                message: NdpMessage::NeighborAdvertisement(NeighborAdvertisement {
                    mode,
                    router: false,
                    solicited: true,
                    override_flag: false,
                    target,
                    target_link_layer: self.config.own_mac,
                }),
            });
        };

        match self.config.strategy {
            Strategy::SniffPlaintext => {
                if ns.mode == TargetMode::Standard {
                    let claimed = Ipv6Addr::from(ns.target);
                    for _ in 0..self.config.burst_size {
                        push_na(claimed, TargetMode::Standard, ns.target);
                    }
                }
            }
            Strategy::GuessPool => {
                for candidate in self.config.guess_pool.clone() {
                    for _ in 0..self.config.burst_size {
                        push_na(candidate, ns.mode, candidate.octets());
                    }
                }
            }
            Strategy::ReflectHash => {
                for _ in 0..self.config.burst_size {
                    push_na(self.config.own_ip, TargetMode::Hashed, ns.target);
                }
            }
        }
        self.forged_frames_sent += forged.len() as u64;
        forged
    }
}
