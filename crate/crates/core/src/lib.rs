//! Toolkit for block-circulant linear layers over a mock BFV layer.
//!
//! The crate implements the full pipeline needed to study block-circulant
//! weight compression for private inference at the desk scale:
//!
//! * [`ring`] — exact modular arithmetic and cyclic / nega-cyclic NTTs over an
//!   NTT-friendly prime field,
//! * [`mockhe`] — a deterministic BFV stand-in with slot semantics and exact
//!   operation counters,
//! * [`encode`] — the nested coefficient-in-block / SIMD-across-blocks
//!   encodings for circulant GEMMs and convolutions,
//! * [`bsgs`] — baby-step giant-step tiling planners that minimise rotations,
//! * [`exec`] — executors that run the planned schedules on mock ciphertexts,
//! * [`cost`] — closed-form operation counts for this scheme and the usual
//!   baseline protocols, plus latency synthesis,
//! * [`assign`] — loss-aware circulant initialisation and the latency-bounded
//!   block-size assignment solver,
//! * [`fusion`] — structure-preserving conv/batch-norm folding,
//! * [`twoparty`] — client/server secret-sharing protocol simulation,
//! * [`tensorio`] — deterministic tensor and network-config file formats.
//!
//! All arithmetic is exact; every operation count produced by a planner is a
//! property the executors reproduce tick for tick.

pub mod assign;
pub mod bsgs;
pub mod circulant;
pub mod cost;
pub mod encode;
pub mod exec;
pub mod fusion;
pub mod mockhe;
pub mod oracle;
pub mod ring;
pub mod tensor;
pub mod tensorio;
pub mod twoparty;
pub mod verify;
