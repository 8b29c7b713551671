//! Per-host protocol state machine: pairwise key establishment, address
//! resolution via NS/NA, and the neighbor cache.
//!
//! In hashed mode the node never puts a plaintext target on the wire: the
//! NS carries the truncated HMAC of the target under the pairwise key and
//! responders match it against their precomputed self-hashes.

use crate::dh_keyex::{
    compute_shared_secret, derive_hmac_key, generate_keypair, DhGroup, DhKeyPair, PairwiseKey,
};
use crate::hashed_target::{hash_target, verify_target, HashedTarget};
use crate::mac::MacAddr;
use crate::ndp_codec::{
    NdpMessage, NeighborAdvertisement, NeighborSolicitation, TargetMode,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::net::Ipv6Addr;
use thiserror::Error;

pub type Ticks = u64;

pub const DEFAULT_RESOLUTION_TIMEOUT: Ticks = 100;

/// All-nodes multicast group, the destination of every NS.
pub const ALL_NODES_IP: Ipv6Addr = Ipv6Addr::new(0xff02, 0, 0, 0, 0, 0, 0, 1);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NodeError {
    #[error("operation requires hashed mode")]
    NotHashedMode,
    #[error("no pairwise key established with {0}; run the key exchange first")]
    MissingKey(Ipv6Addr),
    #[error("cannot resolve our own address")]
    ResolveSelf,
    #[error("degenerate public value rejected")]
    DegeneratePublicValue,
    #[error("KexResp received with no exchange in flight from {0}")]
    UnexpectedKexResp(Ipv6Addr),
}

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum Mode {
    Standard,
    Hashed,
}

impl Mode {
    pub fn target_mode(self) -> TargetMode {
        match self {
            Mode::Standard => TargetMode::Standard,
            Mode::Hashed => TargetMode::Hashed,
        }
    }
}

/// A frame a node wants transmitted; the simulator fills in src fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutFrame {
    pub dst_ip: Ipv6Addr,
    pub dst_mac: MacAddr,
    pub message: NdpMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheEntry {
    pub mac: MacAddr,
    pub established_at: Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingResolution {
    pub target_ip: Ipv6Addr,
    pub match_key: [u8; 16],
    pub deadline: Ticks,
}

#[derive(Debug, PartialEq, Eq)]
pub enum KexStart {
    Initiated(OutFrame),
    /// Key already established or an exchange is already in flight.
    NoOp,
}

/// Classified result of an incoming NA. Nothing aborts; every frame
/// lands in exactly one bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaOutcome {
    Accepted { target_ip: Ipv6Addr, mac: MacAddr },
    IgnoredDuplicate,
    IgnoredUnsolicited,
}

#[derive(Debug)]
pub struct NodeState {
    own_ip: Ipv6Addr,
    own_mac: MacAddr,
    mode: Mode,
    group: DhGroup,
    key_table: BTreeMap<Ipv6Addr, PairwiseKey>,
    self_hash_table: BTreeMap<Ipv6Addr, HashedTarget>,
    neighbor_cache: BTreeMap<Ipv6Addr, CacheEntry>,
    pending: Vec<PendingResolution>,
    dh_state: BTreeMap<Ipv6Addr, DhKeyPair>,
    rng: ChaCha20Rng,
    timeout: Ticks,
}

impl NodeState {
    pub fn new(own_ip: Ipv6Addr, own_mac: MacAddr, mode: Mode, group: DhGroup, seed: u64) -> Self {
        NodeState {
            own_ip,
            own_mac,
            mode,
            group,
            key_table: BTreeMap::new(),
            self_hash_table: BTreeMap::new(),
            neighbor_cache: BTreeMap::new(),
            pending: Vec::new(),
            dh_state: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            timeout: DEFAULT_RESOLUTION_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Ticks) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn own_ip(&self) -> Ipv6Addr {
        self.own_ip
    }

    pub fn own_mac(&self) -> MacAddr {
        self.own_mac
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn pairwise_key(&self, peer: &Ipv6Addr) -> Option<&[u8; 32]> {
        self.key_table.get(peer).map(|k| &k.key_bytes)
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn lookup(&self, ip: &Ipv6Addr) -> Option<MacAddr> {
        self.neighbor_cache.get(ip).map(|e| e.mac)
    }

    pub fn cache_entry(&self, ip: &Ipv6Addr) -> Option<&CacheEntry> {
        self.neighbor_cache.get(ip)
    }

    /// Starts a DH exchange with `peer_ip` using a fresh seeded keypair.
    pub fn start_key_exchange(&mut self, peer_ip: Ipv6Addr) -> Result<KexStart, NodeError> {
        let seed: u64 = self.rng.gen();
        let keypair = generate_keypair(&self.group, seed);
        self.start_key_exchange_with_keypair(peer_ip, keypair)
    }

    /// Same as `start_key_exchange` but with a caller-supplied keypair,
    /// used where tests force a known exponent.
    pub fn start_key_exchange_with_keypair(
        &mut self,
        peer_ip: Ipv6Addr,
        keypair: DhKeyPair,
    ) -> Result<KexStart, NodeError> {
        if self.mode != Mode::Hashed {
            return Err(NodeError::NotHashedMode);
        }
        if self.key_table.contains_key(&peer_ip) || self.dh_state.contains_key(&peer_ip) {
            return Ok(KexStart::NoOp);
        }
        let public_value = keypair.public_value().to_bytes_be();
        self.dh_state.insert(peer_ip, keypair);
        Ok(KexStart::Initiated(OutFrame {
            dst_ip: peer_ip,
            dst_mac: MacAddr::ALL_NODES, // link address unknown before resolution
            message: NdpMessage::KexInit { public_value },
        }))
    }

    /// Processes KexInit (reply with KexResp and store the key) or
    /// KexResp (finish the in-flight exchange).
    pub fn handle_kex(
        &mut self,
        msg: &NdpMessage,
        src_ip: Ipv6Addr,
    ) -> Result<Option<OutFrame>, NodeError> {
        if self.mode != Mode::Hashed {
            return Err(NodeError::NotHashedMode);
        }
        match msg {
            NdpMessage::KexInit { public_value } => {
                let peer_public = BigUint::from_bytes_be(public_value);
                let seed: u64 = self.rng.gen();
                let own = generate_keypair(&self.group, seed);
                let secret = compute_shared_secret(&own, &peer_public, &self.group)
                    .map_err(|_| NodeError::DegeneratePublicValue)?;
                self.install_key(src_ip, &secret);
                Ok(Some(OutFrame {
                    dst_ip: src_ip,
                    dst_mac: MacAddr::ALL_NODES,
                    message: NdpMessage::KexResp {
                        public_value: own.public_value().to_bytes_be(),
                    },
                }))
            }
            NdpMessage::KexResp { public_value } => {
                let own = self
                    .dh_state
                    .get(&src_ip)
                    .ok_or(NodeError::UnexpectedKexResp(src_ip))?;
                let peer_public = BigUint::from_bytes_be(public_value);
                let secret = compute_shared_secret(own, &peer_public, &self.group)
                    .map_err(|_| NodeError::DegeneratePublicValue)?;
                self.install_key(src_ip, &secret);
                self.dh_state.remove(&src_ip);
                Ok(None)
            }
            _ => Ok(None),
        }
    }

    fn install_key(&mut self, peer_ip: Ipv6Addr, secret: &BigUint) {
        let key_bytes = derive_hmac_key(secret);
        self.key_table.insert(
            peer_ip,
            PairwiseKey { peer_ip, key_bytes },
        );
        self.self_hash_table
            .insert(peer_ip, hash_target(&key_bytes, &self.own_ip));
    }

    /// Emits the multicast NS for `target_ip` and records the pending
    /// resolution. In hashed mode the Target carries the truncated HMAC.
    pub fn begin_resolution(
        &mut self,
        target_ip: Ipv6Addr,
        now: Ticks,
    ) -> Result<OutFrame, NodeError> {
        if target_ip == self.own_ip {
            return Err(NodeError::ResolveSelf);
        }
        let match_key = match self.mode {
            Mode::Standard => target_ip.octets(),
            Mode::Hashed => {
                let key = self
                    .key_table
                    .get(&target_ip)
                    .ok_or(NodeError::MissingKey(target_ip))?;
                hash_target(&key.key_bytes, &target_ip).0
            }
        };
        self.pending.push(PendingResolution {
            target_ip,
            match_key,
            deadline: now + self.timeout,
        });
        Ok(OutFrame {
            dst_ip: ALL_NODES_IP,
            dst_mac: MacAddr::ALL_NODES,
            message: NdpMessage::NeighborSolicitation(NeighborSolicitation {
                mode: self.mode.target_mode(),
                target: match_key,
                source_link_layer: self.own_mac,
            }),
        })
    }

    /// Answers an NS if it resolves us. Standard mode matches the
    /// plaintext Target; hashed mode requires a key for the soliciting
    /// peer and a Target equal to our precomputed self-hash under it.
    /// Code-1 solicitations from unknown peers are dropped silently.
    pub fn handle_ns(&mut self, ns: &NeighborSolicitation, src_ip: Ipv6Addr) -> Option<OutFrame> {
        if ns.mode != self.mode.target_mode() {
            return None;
        }
        let responds = match self.mode {
            Mode::Standard => ns.target == self.own_ip.octets(),
            Mode::Hashed => match self.key_table.get(&src_ip) {
                Some(key) => {
                    let matched = self
                        .self_hash_table
                        .get(&src_ip)
                        .map(|h| h.0 == ns.target)
                        .unwrap_or(false);
                    // The precomputed entry and a fresh verification must
                    // agree; a node must never answer a hash that fails
                    // verification.
                    debug_assert_eq!(
                        matched,
                        verify_target(&key.key_bytes, &self.own_ip, &HashedTarget(ns.target))
                    );
                    matched
                }
                None => false,
            },
        };
        if !responds {
            return None;
        }
        Some(OutFrame {
            dst_ip: src_ip,
            dst_mac: ns.source_link_layer,
            message: NdpMessage::NeighborAdvertisement(NeighborAdvertisement {
                mode: self.mode.target_mode(),
                router: false,
                solicited: true,
                override_flag: false,
                // Target copied verbatim from the NS: the hash in hashed
                // mode, the plaintext address in standard mode.
                target: ns.target,
                target_link_layer: self.own_mac,
            }),
        })
    }

    /// First-wins NA acceptance: the first advertisement whose Target
    /// bytes match a pending resolution populates the cache; everything
    /// else is classified and ignored.
    pub fn handle_na(
        &mut self,
        na: &NeighborAdvertisement,
        _src_ip: Ipv6Addr,
        now: Ticks,
    ) -> NaOutcome {
        if na.mode != self.mode.target_mode() {
            return NaOutcome::IgnoredUnsolicited;
        }
        if let Some(pos) = self.pending.iter().position(|p| p.match_key == na.target) {
            let pending = self.pending.remove(pos);
            self.neighbor_cache.insert(
                pending.target_ip,
                CacheEntry {
                    mac: na.target_link_layer,
                    established_at: now,
                },
            );
            return NaOutcome::Accepted {
                target_ip: pending.target_ip,
                mac: na.target_link_layer,
            };
        }
        // A resolution for this target already completed: a second copy
        // of the winning Target bytes is a duplicate, anything else is
        // unsolicited.
        let duplicate = self.neighbor_cache.keys().any(|ip| match self.mode {
            Mode::Standard => ip.octets() == na.target,
            Mode::Hashed => self
                .key_table
                .get(ip)
                .map(|k| hash_target(&k.key_bytes, ip).0 == na.target)
                .unwrap_or(false),
        });
        if duplicate {
            NaOutcome::IgnoredDuplicate
        } else {
            NaOutcome::IgnoredUnsolicited
        }
    }

    /// Reaps pending resolutions whose deadline has passed; returns the
    /// targets whose resolution failed.
    pub fn expire_pending(&mut self, now: Ticks) -> Vec<Ipv6Addr> {
        let mut expired = Vec::new();
        self.pending.retain(|p| {
            if p.deadline < now {
                expired.push(p.target_ip);
                false
            } else {
                true
            }
        });
        expired
    }
}
