//! Synthetic task generation, desk-scale CSV ingestion, split management,
//! and strategic test-set construction. Datasets are immutable after
//! construction and shareable across concurrent workers.

pub mod csv_io;
pub mod dataset;
pub mod manipulate;
pub mod synthetic;

pub use csv_io::{export_csv, ingest_csv, IngestOptions};
pub use dataset::{ColumnInfo, ColumnKind, Dataset, Split};
pub use manipulate::{apply_manipulation, StrategicTestSet};
pub use synthetic::{generate_synthetic, ScoreFamily, SyntheticTaskSpec};
