//! Specialized proofs of confidential knowledge over trace secrets.
//!
//! A prover who knows a chunk's trace secret derives a key pair from its
//! hash and signs its own identity under the derived key. Anyone can check
//! that two provers hold the same secret (equal derived public keys, both
//! identity signatures valid) without learning the secret. Because the
//! signature binds the prover's identity, republishing someone else's
//! proof under a new identity always fails verification.

use crate::codec::Canonical;
use crate::crypto::{hash_bytes, keypair_from_seed, sign, verify, HashValue};
use crate::messages::{NodeId, Spock};

/// Builds the identity-bound proof for `secret`. Deterministic in
/// (secret, prover): two provers with the same secret produce proofs with
/// equal derived public keys but different signatures.
pub fn spock_create(secret: &HashValue, prover: &NodeId) -> Spock {
    // Hashing the secret normalizes it into key-derivation input.
    let seed = hash_bytes(&secret.0);
    let kp = keypair_from_seed(&seed.0);
    let sig = sign(&kp.secret, &prover.canonical_bytes());
    Spock {
        pk: kp.public,
        sig,
    }
}

/// True iff `proof.sig` is a valid signature of the claimed prover's
/// identity under the proof's derived key. Malformed keys verify false.
pub fn spock_verify(proof: &Spock, claimed_prover: &NodeId) -> bool {
    verify(&proof.pk, &claimed_prover.canonical_bytes(), &proof.sig)
}

/// True iff both proofs verify for their claimed provers and attest to the
/// same secret (equal derived public keys).
pub fn spock_consistent(a: &Spock, a_prover: &NodeId, b: &Spock, b_prover: &NodeId) -> bool {
    spock_verify(a, a_prover) && spock_verify(b, b_prover) && a.pk == b.pk
}

/// Element-wise consistency of two full per-chunk proof sequences, as
/// required for two execution receipts to count as the same result.
pub fn spock_sequences_consistent(
    a: &[Spock],
    a_prover: &NodeId,
    b: &[Spock],
    b_prover: &NodeId,
) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| spock_consistent(x, a_prover, y, b_prover))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keypair_from_seed;
    use crate::messages::Role;
    use crate::rng::HashRng;

    fn node(role: Role, index: u32, seed: u8) -> NodeId {
        NodeId {
            role,
            index,
            public_key: keypair_from_seed(&[seed; 32]).public,
        }
    }

    #[test]
    fn create_is_deterministic() {
        let secret = hash_bytes(b"zeta");
        let alice = node(Role::Execution, 0, 1);
        assert_eq!(spock_create(&secret, &alice), spock_create(&secret, &alice));
    }

    #[test]
    fn same_secret_same_pk_different_sig() {
        let secret = hash_bytes(b"zeta");
        let alice = node(Role::Execution, 0, 1);
        let bob = node(Role::Verification, 4, 2);
        let za = spock_create(&secret, &alice);
        let zb = spock_create(&secret, &bob);
        assert_eq!(za.pk, zb.pk);
        assert_ne!(za.sig, zb.sig);
    }

    #[test]
    fn honest_proof_verifies() {
        let secret = hash_bytes(b"zeta");
        let alice = node(Role::Execution, 0, 1);
        assert!(spock_verify(&spock_create(&secret, &alice), &alice));
    }

    #[test]
    fn republished_proof_fails_for_new_identity() {
        let secret = hash_bytes(b"zeta");
        let alice = node(Role::Execution, 0, 1);
        let bob = node(Role::Verification, 4, 2);
        let za = spock_create(&secret, &alice);
        assert!(!spock_verify(&za, &bob));
    }

    #[test]
    fn swapped_pk_fails() {
        let alice = node(Role::Execution, 0, 1);
        let mut z = spock_create(&hash_bytes(b"zeta"), &alice);
        z.pk = keypair_from_seed(&[9u8; 32]).public;
        assert!(!spock_verify(&z, &alice));
    }

    #[test]
    fn consistency_completeness_and_reflexivity() {
        let secret = hash_bytes(b"shared");
        let alice = node(Role::Execution, 0, 1);
        let bob = node(Role::Verification, 1, 2);
        let za = spock_create(&secret, &alice);
        let zb = spock_create(&secret, &bob);
        assert!(spock_consistent(&za, &alice, &zb, &bob));
        assert!(spock_consistent(&za, &alice, &za, &alice));
    }

    #[test]
    fn distinct_secrets_are_never_consistent() {
        // Statistical soundness over a randomized corpus: zero collisions.
        let alice = node(Role::Execution, 0, 1);
        let bob = node(Role::Verification, 1, 2);
        let mut rng = HashRng::new(hash_bytes(b"corpus"));
        for _ in 0..200 {
            let s1 = hash_bytes(&rng.next_u64().to_be_bytes());
            let s2 = hash_bytes(&rng.next_u64().to_be_bytes());
            if s1 == s2 {
                continue;
            }
            let za = spock_create(&s1, &alice);
            let zb = spock_create(&s2, &bob);
            assert!(!spock_consistent(&za, &alice, &zb, &bob));
            assert_ne!(za.pk, zb.pk);
        }
    }

    #[test]
    fn sequence_consistency_is_element_wise() {
        let alice = node(Role::Execution, 0, 1);
        let bob = node(Role::Verification, 1, 2);
        let secrets: Vec<HashValue> = (0..3u8).map(|i| hash_bytes(&[i])).collect();
        let a: Vec<Spock> = secrets.iter().map(|s| spock_create(s, &alice)).collect();
        let mut b: Vec<Spock> = secrets.iter().map(|s| spock_create(s, &bob)).collect();
        assert!(spock_sequences_consistent(&a, &alice, &b, &bob));
        b.swap(0, 1);
        assert!(!spock_sequences_consistent(&a, &alice, &b, &bob));
        b.swap(0, 1);
        b.pop();
        assert!(!spock_sequences_consistent(&a, &alice, &b, &bob));
    }
}
