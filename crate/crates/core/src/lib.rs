//! Hashing multi-arm beam training for multi-AP near-field arrays.
//!
//! The crate is layered bottom-up:
//!
//! - [`array`]: UPA geometry, near-field steering vectors and channels.
//! - [`codebook`]: polar-domain single-beam codebook.
//! - [`hash`]: k-wise independent hash family and bucket partitions.
//! - [`multibeam`]: multi-arm beam synthesis and phase optimization.
//! - [`protocol`]: scan, soft demultiplexing, voting and baselines.
//! - [`harness`]: experiment configs, Monte Carlo sweeps, tables and plots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod codebook;
pub mod error;
pub mod harness;
pub mod hash;
pub mod multibeam;
pub mod protocol;

pub use array::{ApPlacement, ArrayConfig, ChannelRealization, Direction, PolarPoint, SteeringMode};
pub use codebook::{build_codebook, CodebookParams, SamplingPoint, SingleBeamCodebook};
pub use error::{Error, Result};
pub use harness::{run_sweep, ExperimentConfig, ResultRow, ResultTable, SweepOutput, CSV_HEADER};
pub use hash::{BucketPartition, HashFunction, PartitionMode};
pub use multibeam::{build_multiarm_codebook, MultiArmCodebook, MultiArmCodeword, MultiBeamOptions};
pub use protocol::{build_schedule, DemuxMode, Method, ScanSchedule, ScheduleOptions, TrainingResult};
