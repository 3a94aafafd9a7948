//! Files, reports and the `bci` command line around [`bci_core`].
//!
//! [`ingest`] reads and writes band-power recordings and manifests,
//! [`formats`] holds the intermediate files exchanged by stages,
//! [`report`] renders SVG figures, and [`stages`] chains everything into the
//! pipeline driven by [`cli`].

pub mod cli;
pub mod config_file;
pub mod exec;
pub mod formats;
pub mod ingest;
pub mod report;
pub mod stages;
