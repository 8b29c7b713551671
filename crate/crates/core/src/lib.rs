//! A desk-scale laboratory for hardened IPv6 neighbor discovery.
//!
//! Hosts first establish pairwise secrets with finite-field
//! Diffie-Hellman; address resolution then runs over NS/NA messages whose
//! Target field carries a truncated HMAC of the target address instead of
//! the plaintext. A deterministic link simulator, a MitM adversary, and a
//! scenario harness reproduce the overhead and attack-resistance
//! comparisons between plain and hashed neighbor discovery.

pub mod adversary;
pub mod dh_keyex;
pub mod experiment;
pub mod hashed_target;
pub mod mac;
pub mod ndp_codec;
pub mod netsim;
pub mod node_engine;

pub use mac::MacAddr;
