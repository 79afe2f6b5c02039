//! Live operation of the see-through loop: capture sources, the transform
//! loop, session record/replay and the websocket stream the viewer reads.
//!
//! The wire format is described in `docs/wire-protocol.md` and implemented
//! in [`protocol`].

pub mod config;
pub mod hub;
pub mod live;
pub mod patch;
pub mod protocol;
pub mod record;
pub mod server;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Patch(#[from] patch::PatchError),
    #[error(transparent)]
    Record(#[from] record::RecordError),
    #[error(transparent)]
    Replay(#[from] record::ReplayError),
    #[error(transparent)]
    Capture(#[from] seethrough_core::pipeline::CaptureError),
    #[error(transparent)]
    Backends(#[from] seethrough_core::study::BackendsError),
    #[error(transparent)]
    Study(#[from] seethrough_core::study::StudyError),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
