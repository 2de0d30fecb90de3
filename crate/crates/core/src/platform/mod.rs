//! Platform entities: ingest, validation, denylist screening and
//! deterministic sampling.

mod bundle;
mod ingest;
mod lexicon;
mod records;

pub use bundle::*;
pub use ingest::*;
pub use lexicon::*;
pub use records::*;
