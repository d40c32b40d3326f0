//! Detection of coordinated inauthentic behavior from short-video platform
//! activity.
//!
//! Accounts are linked by shared behavioral traces (identical hashtag
//! sequences, synchronized posting, shared link domains, duplicated audio
//! or video). Each trace yields a weighted user network; pruning by
//! eigenvector centrality then leaves the tightly coordinated clusters.

pub mod analysis;
pub mod audiofp;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod prune;
pub mod simnet;
pub mod synthbench;
pub mod traces;

pub use error::{Error, Result};
