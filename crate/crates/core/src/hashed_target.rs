//! The hashed Target field: HMAC-SHA-256 over the 16-byte IPv6 target
//! address under the pairwise key, truncated to the leftmost 16 bytes so
//! it fits the 128-bit Target field.

use crate::dh_keyex::PairwiseKey;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv6Addr;

const BLOCK_SIZE: usize = 64;

/// HMAC-SHA-256 per RFC 2104 with a 64-byte block size.
pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut block = [0u8; BLOCK_SIZE];
    if key.len() > BLOCK_SIZE {
        let digest = Sha256::digest(key);
        block[..32].copy_from_slice(&digest);
    } else {
        block[..key.len()].copy_from_slice(key);
    }

    let mut ipad = [0x36u8; BLOCK_SIZE];
    let mut opad = [0x5cu8; BLOCK_SIZE];
    for i in 0..BLOCK_SIZE {
        ipad[i] ^= block[i];
        opad[i] ^= block[i];
    }

    let mut inner = Sha256::new();
    inner.update(ipad);
    inner.update(message);
    let inner_hash = inner.finalize();

    let mut outer = Sha256::new();
    outer.update(opad);
    outer.update(inner_hash);
    outer.finalize().into()
}

/// The 16-byte truncated MAC that replaces the plaintext address in the
/// Target field.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HashedTarget(pub [u8; 16]);

impl HashedTarget {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for HashedTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashedTarget(")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Leftmost 128 bits of HMAC-SHA-256(key, network-order address bytes).
pub fn hash_target(key: &[u8; 32], target: &Ipv6Addr) -> HashedTarget {
    let mac = hmac_sha256(key, &target.octets());
    let mut out = [0u8; 16];
    out.copy_from_slice(&mac[..16]);
    HashedTarget(out)
}

/// Constant-time comparison of the received Target against the hash of
/// our own address under the given key.
pub fn verify_target(key: &[u8; 32], own_address: &Ipv6Addr, received: &HashedTarget) -> bool {
    let expected = hash_target(key, own_address);
    let mut diff = 0u8;
    for (a, b) in expected.0.iter().zip(received.0.iter()) {
        diff |= a ^ b;
    }
    diff == 0
}

/// One hash of our own address per established peer key, so incoming
/// solicitations can be matched without recomputing the MAC.
pub fn precompute_self_hashes(
    own_address: &Ipv6Addr,
    key_table: &BTreeMap<Ipv6Addr, PairwiseKey>,
) -> BTreeMap<Ipv6Addr, HashedTarget> {
    key_table
        .iter()
        .map(|(peer, key)| (*peer, hash_target(&key.key_bytes, own_address)))
        .collect()
}
