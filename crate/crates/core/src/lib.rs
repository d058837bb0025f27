//! Deterministic simulator and analytics engine for a pipelined
//! execute-then-verify blockchain protocol.
//!
//! Consensus nodes order transactions but never execute them; dedicated
//! execution nodes compute block results in verifiable chunks, and many
//! small verification nodes each re-execute a self-selected sample of
//! chunks. Faulty results are challenged and adjudicated by recomputing a
//! single disputed transaction; withheld collections are resolved by a
//! probe-and-attest protocol. This crate provides:
//!
//! - the wire records and canonical encoding ([`messages`], [`codec`]),
//! - the toy deterministic transaction machine ([`exec`]),
//! - identity-bound proofs of trace secrets ([`spock`]),
//! - verifier sampling and chunk checking ([`verifier`]),
//! - challenge construction and adjudication ([`challenges`]),
//! - the idealized consensus committee ([`consensus`]),
//! - a seedable discrete-event network simulation ([`netsim`]),
//! - closed-form and Monte Carlo protocol analytics ([`analytics`]).

pub mod analytics;
pub mod challenges;
pub mod codec;
pub mod consensus;
pub mod crypto;
pub mod exec;
pub mod messages;
pub mod netsim;
pub mod rng;
pub mod spock;
pub mod stake;
pub mod verifier;

pub use codec::{Canonical, CodecError};
pub use crypto::{HashValue, PublicKey, SecretKey, SignatureBytes};
pub use messages::{
    Block, BlockSeal, Chunk, ExecutionReceipt, ExecutionResult, GuaranteedCollection, NodeId,
    ResultApproval, Role, Spock, StateCommitment,
};
pub use stake::{stake_fraction_met, Fraction, StakeLedger};
