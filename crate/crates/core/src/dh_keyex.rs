//! Finite-field Diffie-Hellman key agreement and derivation of the
//! per-pair HMAC key.
//!
//! Private exponents come from a seeded deterministic generator so whole
//! scenarios replay bit-for-bit; cryptographic randomness is a non-goal
//! of the lab.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::net::Ipv6Addr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DhError {
    #[error("modulus too small: must be >= 5 and odd")]
    ModulusTooSmall,
    #[error("generator out of range [2, p-2]")]
    GeneratorOutOfRange,
    #[error("private exponent out of range [2, p-2]")]
    ExponentOutOfRange,
    #[error("degenerate public value (0, 1, or p-1) rejected")]
    DegeneratePublicValue,
}

/// Finite-field DH parameters: an odd prime modulus and a generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhGroup {
    prime_modulus: BigUint,
    generator: BigUint,
}

/// RFC 3526 group 14: 2048-bit MODP prime, generator 2.
const MODP_2048_PRIME_HEX: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

impl DhGroup {
    pub fn new(prime_modulus: BigUint, generator: BigUint) -> Result<Self, DhError> {
        let five = BigUint::from(5u32);
        if prime_modulus < five || (&prime_modulus % 2u32).is_zero() {
            return Err(DhError::ModulusTooSmall);
        }
        let two = BigUint::from(2u32);
        if generator < two || generator > &prime_modulus - &two {
            return Err(DhError::GeneratorOutOfRange);
        }
        Ok(DhGroup {
            prime_modulus,
            generator,
        })
    }

    /// The default group: RFC 3526 group 14 (2048-bit MODP, g = 2).
    pub fn modp_group_14() -> Self {
        let prime = BigUint::parse_bytes(MODP_2048_PRIME_HEX.as_bytes(), 16)
            .expect("constant parses");
        DhGroup::new(prime, BigUint::from(2u32)).expect("constant group is valid")
    }

    /// Tiny group (p = 23, g = 5) for fast unit tests.
    pub fn test_group() -> Self {
        DhGroup::new(BigUint::from(23u32), BigUint::from(5u32)).expect("valid")
    }

    pub fn prime_modulus(&self) -> &BigUint {
        &self.prime_modulus
    }

    pub fn generator(&self) -> &BigUint {
        &self.generator
    }

    fn in_open_range(&self, v: &BigUint) -> bool {
        let two = BigUint::from(2u32);
        *v >= two && *v <= &self.prime_modulus - &two
    }
}

/// An ephemeral DH keypair: private exponent plus g^x mod p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhKeyPair {
    private_exponent: BigUint,
    public_value: BigUint,
}

impl DhKeyPair {
    /// Builds a keypair from an explicit exponent. Exponents outside
    /// [2, p-2] and exponents whose public value is degenerate are rejected.
    pub fn from_private(group: &DhGroup, private_exponent: BigUint) -> Result<Self, DhError> {
        if !group.in_open_range(&private_exponent) {
            return Err(DhError::ExponentOutOfRange);
        }
        let public_value = group.generator.modpow(&private_exponent, &group.prime_modulus);
        if !group.in_open_range(&public_value) {
            return Err(DhError::DegeneratePublicValue);
        }
        Ok(DhKeyPair {
            private_exponent,
            public_value,
        })
    }

    pub fn public_value(&self) -> &BigUint {
        &self.public_value
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.private_exponent
    }
}

/// Deterministic keypair generation: a fixed (group, seed) pair always
/// yields the same keypair. Retries until the exponent and public value
/// both land in [2, p-2].
pub fn generate_keypair(group: &DhGroup, seed: u64) -> DhKeyPair {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let two = BigUint::from(2u32);
    let upper = group.prime_modulus() - BigUint::one(); // exclusive, so max is p-2
    loop {
        let exp = rng.gen_biguint_range(&two, &upper);
        if let Ok(kp) = DhKeyPair::from_private(group, exp) {
            return kp;
        }
    }
}

/// Computes peer_public^x mod p, rejecting small-subgroup values
/// (0, 1, p-1) so the shared secret is never trivially predictable.
pub fn compute_shared_secret(
    own: &DhKeyPair,
    peer_public: &BigUint,
    group: &DhGroup,
) -> Result<BigUint, DhError> {
    if !group.in_open_range(peer_public) {
        return Err(DhError::DegeneratePublicValue);
    }
    Ok(peer_public.modpow(&own.private_exponent, &group.prime_modulus))
}

/// KDF: SHA-256 over the minimal big-endian encoding of the shared
/// secret (zero encodes as a single zero byte).
pub fn derive_hmac_key(shared_secret: &BigUint) -> [u8; 32] {
    let bytes = shared_secret.to_bytes_be(); // num-bigint yields [0] for zero
    let digest = Sha256::digest(&bytes);
    digest.into()
}

/// A completed pairwise agreement: the peer and the derived 32-byte key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseKey {
    pub peer_ip: Ipv6Addr,
    pub key_bytes: [u8; 32],
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent modular-exponentiation oracle: repeated multiplication.
    fn modexp_oracle(base: u64, exp: u64, modulus: u64) -> u64 {
        let mut acc = 1u64;
        for _ in 0..exp {
            acc = acc * base % modulus;
        }
        acc
    }

    #[test]
    fn forced_exponent_six_gives_public_eight() {
        let g = DhGroup::test_group();
        let kp = DhKeyPair::from_private(&g, BigUint::from(6u32)).unwrap();
        assert_eq!(kp.public_value(), &BigUint::from(modexp_oracle(5, 6, 23)));
        assert_eq!(kp.public_value(), &BigUint::from(8u32));
    }

    #[test]
    fn forced_exponent_fifteen_gives_public_nineteen() {
        let g = DhGroup::test_group();
        let kp = DhKeyPair::from_private(&g, BigUint::from(15u32)).unwrap();
        assert_eq!(kp.public_value(), &BigUint::from(modexp_oracle(5, 15, 23)));
        assert_eq!(kp.public_value(), &BigUint::from(19u32));
    }

    #[test]
    fn exponent_one_rejected() {
        let g = DhGroup::test_group();
        assert_eq!(
            DhKeyPair::from_private(&g, BigUint::one()),
            Err(DhError::ExponentOutOfRange)
        );
    }

    #[test]
    fn shared_secret_matches_oracle_and_is_symmetric() {
        let g = DhGroup::test_group();
        let alice = DhKeyPair::from_private(&g, BigUint::from(6u32)).unwrap();
        let bob = DhKeyPair::from_private(&g, BigUint::from(15u32)).unwrap();
        let s_a = compute_shared_secret(&alice, bob.public_value(), &g).unwrap();
        let s_b = compute_shared_secret(&bob, alice.public_value(), &g).unwrap();
        assert_eq!(s_a, BigUint::from(modexp_oracle(19, 6, 23)));
        assert_eq!(s_a, BigUint::from(2u32));
        assert_eq!(s_a, s_b);
    }

    #[test]
    fn degenerate_peer_public_rejected() {
        let g = DhGroup::test_group();
        let own = DhKeyPair::from_private(&g, BigUint::from(6u32)).unwrap();
        for bad in [0u32, 1, 22] {
            assert_eq!(
                compute_shared_secret(&own, &BigUint::from(bad), &g),
                Err(DhError::DegeneratePublicValue)
            );
        }
    }

    #[test]
    fn kdf_frozen_vectors() {
        // Digests computed with an independent SHA-256 implementation.
        assert_eq!(
            hex::encode(derive_hmac_key(&BigUint::zero())),
            "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d"
        );
        assert_eq!(
            hex::encode(derive_hmac_key(&BigUint::from(2u32))),
            "dbc1b4c900ffe48d575b5da5c638040125f65db0fe3e24494b76ea986457d986"
        );
        assert_eq!(
            hex::encode(derive_hmac_key(&BigUint::from(256u32))),
            "47dc540c94ceb704a23875c11273e16bb0b8a87aed84de911f2133568115f254"
        );
    }

    #[test]
    fn generate_is_deterministic() {
        let g = DhGroup::test_group();
        assert_eq!(generate_keypair(&g, 42), generate_keypair(&g, 42));
    }

    #[test]
    fn generated_values_in_range() {
        let g = DhGroup::test_group();
        for seed in 0..200u64 {
            let kp = generate_keypair(&g, seed);
            assert!(g.in_open_range(kp.public_value()), "seed {seed}");
            assert!(g.in_open_range(kp.private_exponent()), "seed {seed}");
        }
    }

    #[test]
    fn invalid_groups_rejected() {
        assert_eq!(
            DhGroup::new(BigUint::from(4u32), BigUint::from(2u32)),
            Err(DhError::ModulusTooSmall)
        );
        assert_eq!(
            DhGroup::new(BigUint::from(6u32), BigUint::from(2u32)),
            Err(DhError::ModulusTooSmall)
        );
        assert_eq!(
            DhGroup::new(BigUint::from(23u32), BigUint::from(22u32)),
            Err(DhError::GeneratorOutOfRange)
        );
        assert_eq!(
            DhGroup::new(BigUint::from(23u32), BigUint::one()),
            Err(DhError::GeneratorOutOfRange)
        );
    }

    #[test]
    fn modp_group_14_shape() {
        let g = DhGroup::modp_group_14();
        assert_eq!(g.prime_modulus().bits(), 2048);
        assert_eq!(g.generator(), &BigUint::from(2u32));
    }
}
