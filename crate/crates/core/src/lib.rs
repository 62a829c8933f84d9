//! Bounded model checking of BTOR2 word-level models.
//!
//! Symbolic input bytes are pushed through the model as decision diagrams
//! (ROABVDD or CFLOBVDD trackers); whatever cannot be propagated is handed to
//! an external SMT-LIB solver. A small RISC-U model generator and simulator
//! produce the benchmark models.

pub mod bitvec;
pub mod btor2;
pub mod eval;
pub mod riscu;
pub mod tracker;
pub mod roabvdd;
pub mod cflobvdd;
pub mod arrays;
pub mod smt;
pub mod propagate;
pub mod bmc;
pub mod bench;
