//! Bit-exact wire codec for the four ICMPv6 messages the lab exchanges:
//! Neighbor Solicitation (type 135), Neighbor Advertisement (type 136),
//! and the key-exchange carriers KexInit/KexResp on the ICMPv6
//! private-experimentation types 200/201.
//!
//! Code 0 on NS/NA is standard RFC 4861 framing; code 1 marks hashed
//! mode, where the Target field carries a truncated HMAC instead of the
//! plaintext address. The structure is otherwise unchanged.

use crate::mac::MacAddr;
use std::fmt::Write as _;
use std::net::Ipv6Addr;
use thiserror::Error;

pub const TYPE_NS: u8 = 135;
pub const TYPE_NA: u8 = 136;
pub const TYPE_KEX_INIT: u8 = 200;
pub const TYPE_KEX_RESP: u8 = 201;

/// NS and NA wire images are always exactly 32 bytes.
pub const NDP_WIRE_LEN: usize = 32;

const OPT_SOURCE_LINK_LAYER: u8 = 1;
const OPT_TARGET_LINK_LAYER: u8 = 2;
const NEXT_HEADER_ICMPV6: u8 = 58;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("checksum mismatch: stored {stored:#06x}, computed {computed:#06x}")]
    Checksum { stored: u16, computed: u16 },
    #[error("unsupported message type {msg_type}/{code}")]
    UnsupportedMessage { msg_type: u8, code: u8 },
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error("public value too long: {0} bytes (max 65535)")]
    PublicValueTooLong(usize),
}

/// Whether the Target field carries the plaintext address (code 0) or
/// its truncated HMAC (code 1).
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum TargetMode {
    Standard,
    Hashed,
}

impl TargetMode {
    pub fn code(self) -> u8 {
        match self {
            TargetMode::Standard => 0,
            TargetMode::Hashed => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TargetMode::Standard),
            1 => Some(TargetMode::Hashed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSolicitation {
    pub mode: TargetMode,
    pub target: [u8; 16],
    pub source_link_layer: MacAddr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborAdvertisement {
    pub mode: TargetMode,
    pub router: bool,
    pub solicited: bool,
    pub override_flag: bool,
    pub target: [u8; 16],
    pub target_link_layer: MacAddr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NdpMessage {
    NeighborSolicitation(NeighborSolicitation),
    NeighborAdvertisement(NeighborAdvertisement),
    KexInit { public_value: Vec<u8> },
    KexResp { public_value: Vec<u8> },
}

impl NdpMessage {
    pub fn type_and_code(&self) -> (u8, u8) {
        match self {
            NdpMessage::NeighborSolicitation(ns) => (TYPE_NS, ns.mode.code()),
            NdpMessage::NeighborAdvertisement(na) => (TYPE_NA, na.mode.code()),
            NdpMessage::KexInit { .. } => (TYPE_KEX_INIT, 0),
            NdpMessage::KexResp { .. } => (TYPE_KEX_RESP, 0),
        }
    }
}

/// ICMPv6 checksum: one's-complement of the one's-complement 16-bit sum
/// over the IPv6 pseudo-header (src, dst, 32-bit payload length, 24 zero
/// bits, next-header 58) and the payload, odd payloads zero-padded. The
/// plain complement is kept even when it is 0x0000.
pub fn icmpv6_checksum(src_ip: &Ipv6Addr, dst_ip: &Ipv6Addr, payload: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    let mut add_word = |hi: u8, lo: u8| {
        sum += u32::from(u16::from_be_bytes([hi, lo]));
    };

    for chunk in src_ip.octets().chunks(2).chain(dst_ip.octets().chunks(2)) {
        add_word(chunk[0], chunk[1]);
    }
    let len = payload.len() as u32;
    add_word((len >> 24) as u8, (len >> 16) as u8);
    add_word((len >> 8) as u8, len as u8);
    add_word(0, 0);
    add_word(0, NEXT_HEADER_ICMPV6);
    for chunk in payload.chunks(2) {
        add_word(chunk[0], *chunk.get(1).unwrap_or(&0));
    }

    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

pub fn encode(
    message: &NdpMessage,
    src_ip: &Ipv6Addr,
    dst_ip: &Ipv6Addr,
) -> Result<Vec<u8>, CodecError> {
    let mut buf = match message {
        NdpMessage::NeighborSolicitation(ns) => {
            let mut b = vec![0u8; NDP_WIRE_LEN];
            b[0] = TYPE_NS;
            b[1] = ns.mode.code();
            b[8..24].copy_from_slice(&ns.target);
            b[24] = OPT_SOURCE_LINK_LAYER;
            b[25] = 1;
            b[26..32].copy_from_slice(&ns.source_link_layer.octets());
            b
        }
        NdpMessage::NeighborAdvertisement(na) => {
            let mut b = vec![0u8; NDP_WIRE_LEN];
            b[0] = TYPE_NA;
            b[1] = na.mode.code();
            b[4] = (u8::from(na.router) << 7)
                | (u8::from(na.solicited) << 6)
                | (u8::from(na.override_flag) << 5);
            b[8..24].copy_from_slice(&na.target);
            b[24] = OPT_TARGET_LINK_LAYER;
            b[25] = 1;
            b[26..32].copy_from_slice(&na.target_link_layer.octets());
            b
        }
        NdpMessage::KexInit { public_value } | NdpMessage::KexResp { public_value } => {
            if public_value.len() > u16::MAX as usize {
                return Err(CodecError::PublicValueTooLong(public_value.len()));
            }
            let (msg_type, _) = message.type_and_code();
            let mut b = Vec::with_capacity(6 + public_value.len());
            b.extend_from_slice(&[msg_type, 0, 0, 0]);
            b.extend_from_slice(&(public_value.len() as u16).to_be_bytes());
            b.extend_from_slice(public_value);
            b
        }
    };

    let checksum = icmpv6_checksum(src_ip, dst_ip, &buf);
    buf[2..4].copy_from_slice(&checksum.to_be_bytes());
    Ok(buf)
}

pub fn decode(
    bytes: &[u8],
    src_ip: &Ipv6Addr,
    dst_ip: &Ipv6Addr,
) -> Result<NdpMessage, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::Malformed("shorter than the ICMPv6 header"));
    }
    verify_checksum(bytes, src_ip, dst_ip)?;

    let msg_type = bytes[0];
    let code = bytes[1];
    match msg_type {
        TYPE_NS | TYPE_NA => {
            let mode = TargetMode::from_code(code)
                .ok_or(CodecError::UnsupportedMessage { msg_type, code })?;
            if bytes.len() != NDP_WIRE_LEN {
                return Err(CodecError::Malformed("NS/NA must be exactly 32 bytes"));
            }
            let mut target = [0u8; 16];
            target.copy_from_slice(&bytes[8..24]);
            if bytes[25] != 1 {
                return Err(CodecError::Malformed("link-layer option length must be 1"));
            }
            let mut mac = [0u8; 6];
            mac.copy_from_slice(&bytes[26..32]);
            let mac = MacAddr(mac);

            if msg_type == TYPE_NS {
                if bytes[4..8] != [0, 0, 0, 0] {
                    return Err(CodecError::Malformed("NS reserved bytes must be zero"));
                }
                if bytes[24] != OPT_SOURCE_LINK_LAYER {
                    return Err(CodecError::Malformed("NS requires the SLLA option"));
                }
                Ok(NdpMessage::NeighborSolicitation(NeighborSolicitation {
                    mode,
                    target,
                    source_link_layer: mac,
                }))
            } else {
                let flags = bytes[4];
                if flags & 0x1f != 0 || bytes[5..8] != [0, 0, 0] {
                    return Err(CodecError::Malformed("NA reserved bits must be zero"));
                }
                if bytes[24] != OPT_TARGET_LINK_LAYER {
                    return Err(CodecError::Malformed("NA requires the TLLA option"));
                }
                Ok(NdpMessage::NeighborAdvertisement(NeighborAdvertisement {
                    mode,
                    router: flags & 0x80 != 0,
                    solicited: flags & 0x40 != 0,
                    override_flag: flags & 0x20 != 0,
                    target,
                    target_link_layer: mac,
                }))
            }
        }
        TYPE_KEX_INIT | TYPE_KEX_RESP => {
            if code != 0 {
                return Err(CodecError::UnsupportedMessage { msg_type, code });
            }
            if bytes.len() < 6 {
                return Err(CodecError::Malformed("key-exchange body truncated"));
            }
            let declared = u16::from_be_bytes([bytes[4], bytes[5]]) as usize;
            let body = &bytes[6..];
            if body.len() != declared {
                return Err(CodecError::Malformed(
                    "public value length does not match the declared length",
                ));
            }
            let public_value = body.to_vec();
            Ok(match msg_type {
                TYPE_KEX_INIT => NdpMessage::KexInit { public_value },
                _ => NdpMessage::KexResp { public_value },
            })
        }
        _ => Err(CodecError::UnsupportedMessage { msg_type, code }),
    }
}

fn verify_checksum(bytes: &[u8], src_ip: &Ipv6Addr, dst_ip: &Ipv6Addr) -> Result<(), CodecError> {
    let stored = u16::from_be_bytes([bytes[2], bytes[3]]);
    let mut zeroed = bytes.to_vec();
    zeroed[2] = 0;
    zeroed[3] = 0;
    let computed = icmpv6_checksum(src_ip, dst_ip, &zeroed);
    if stored != computed {
        return Err(CodecError::Checksum { stored, computed });
    }
    Ok(())
}

/// Hex-dump debug printer: one line per field, for golden-file tests.
pub fn dump(bytes: &[u8], src_ip: &Ipv6Addr, dst_ip: &Ipv6Addr) -> Result<String, CodecError> {
    let message = decode(bytes, src_ip, dst_ip)?;
    let stored = u16::from_be_bytes([bytes[2], bytes[3]]);
    let mut out = String::new();
    let (msg_type, code) = message.type_and_code();
    writeln!(out, "type: {msg_type}").unwrap();
    writeln!(out, "code: {code}").unwrap();
    writeln!(out, "checksum: {stored:#06x}").unwrap();
    match &message {
        NdpMessage::NeighborSolicitation(ns) => {
            writeln!(out, "target: {}", hex_bytes(&ns.target)).unwrap();
            writeln!(out, "source_link_layer: {}", ns.source_link_layer).unwrap();
        }
        NdpMessage::NeighborAdvertisement(na) => {
            writeln!(
                out,
                "flags: router={} solicited={} override={}",
                na.router, na.solicited, na.override_flag
            )
            .unwrap();
            writeln!(out, "target: {}", hex_bytes(&na.target)).unwrap();
            writeln!(out, "target_link_layer: {}", na.target_link_layer).unwrap();
        }
        NdpMessage::KexInit { public_value } | NdpMessage::KexResp { public_value } => {
            writeln!(out, "public_value_length: {}", public_value.len()).unwrap();
            writeln!(out, "public_value: {}", hex_bytes(public_value)).unwrap();
        }
    }
    Ok(out)
}

fn hex_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
