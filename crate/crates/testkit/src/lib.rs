//! Test support: brute-force oracles that re-derive query results without
//! touching the engine's code paths, seeded generators for catalogs and
//! queries, a clinic fixture, and a PDF reader for text-fidelity checks.

pub mod checks;
pub mod fixture;
pub mod gen;
pub mod oracle;
pub mod pdf;
