//! Stream wire format.
//!
//! Every event is one JSON text message. A transform event is followed by
//! two binary messages carrying the original and generated PNGs, each
//! prefixed by a 10-byte header: sequence number (u64, big-endian), slot
//! (0 original, 1 generated) and format (0 PNG).

use serde::{Deserialize, Serialize};
use seethrough_core::pipeline::session_log::{Latencies, LogEntry};
use seethrough_core::pipeline::{AugmenterKind, PipelineConfig};
use thiserror::Error;

use crate::patch::LiveConfigPatch;

pub const HEADER_LEN: usize = 10;
pub const FORMAT_PNG: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Original = 0,
    Generated = 1,
}

impl Slot {
    pub fn from_byte(b: u8) -> Option<Slot> {
        match b {
            0 => Some(Slot::Original),
            1 => Some(Slot::Generated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformMessage {
    pub seq: u64,
    pub frame_id: u64,
    pub caption: String,
    pub word_count: usize,
    pub latencies: Latencies,
    pub augmenters: Vec<AugmenterKind>,
    pub inference_steps: u32,
    pub seed: u64,
}

impl TransformMessage {
    pub fn from_entry(seq: u64, entry: &LogEntry) -> Self {
        TransformMessage {
            seq,
            frame_id: entry.frame_id,
            caption: entry.caption.clone(),
            word_count: entry.word_count,
            latencies: entry.latencies,
            augmenters: entry.augmenters.clone(),
            inference_steps: entry.steps,
            seed: entry.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusLevel {
    Info,
    Warning,
    Error,
}

/// Server → client text messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Transform(TransformMessage),
    Status {
        seq: u64,
        level: StatusLevel,
        message: String,
    },
    ConfigChange {
        seq: u64,
        config: PipelineConfig,
    },
    /// Reply to one client's request; not part of the event sequence.
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<PipelineConfig>,
    },
}

impl ServerMessage {
    pub fn seq(&self) -> Option<u64> {
        match self {
            ServerMessage::Transform(t) => Some(t.seq),
            ServerMessage::Status { seq, .. } | ServerMessage::ConfigChange { seq, .. } => Some(*seq),
            ServerMessage::Ack { .. } => None,
        }
    }
}

/// Client → server text messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    ConfigPatch {
        #[serde(default)]
        request_id: Option<String>,
        patch: LiveConfigPatch,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    pub seq: u64,
    pub slot: Slot,
    pub format: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("binary message shorter than the {HEADER_LEN}-byte header ({0} bytes)")]
    Short(usize),
    #[error("unknown slot {0}")]
    Slot(u8),
    #[error("unknown format {0}")]
    Format(u8),
}

impl BinaryFrame {
    pub fn png(seq: u64, slot: Slot, payload: Vec<u8>) -> Self {
        BinaryFrame { seq, slot, format: FORMAT_PNG, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.push(self.slot as u8);
        out.push(self.format);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < HEADER_LEN {
            return Err(FrameError::Short(bytes.len()));
        }
        let seq = u64::from_be_bytes(bytes[..8].try_into().expect("8 bytes"));
        let slot = Slot::from_byte(bytes[8]).ok_or(FrameError::Slot(bytes[8]))?;
        if bytes[9] != FORMAT_PNG {
            return Err(FrameError::Format(bytes[9]));
        }
        Ok(BinaryFrame { seq, slot, format: bytes[9], payload: bytes[HEADER_LEN..].to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = BinaryFrame::png(0x0102030405060708, Slot::Generated, vec![0x89, b'P']);
        assert_eq!(f.encode(), [1, 2, 3, 4, 5, 6, 7, 8, 1, 0, 0x89, b'P']);
        assert_eq!(BinaryFrame::decode(&f.encode()).unwrap(), f);
    }

    #[test]
    fn bad_frames() {
        assert_eq!(BinaryFrame::decode(&[0; 9]), Err(FrameError::Short(9)));
        assert_eq!(BinaryFrame::decode(&[0, 0, 0, 0, 0, 0, 0, 0, 2, 0]), Err(FrameError::Slot(2)));
        assert_eq!(BinaryFrame::decode(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 3]), Err(FrameError::Format(3)));
    }

    #[test]
    fn transform_json_shape() {
        let msg = ServerMessage::Transform(TransformMessage {
            seq: 3,
            frame_id: 7,
            caption: "a cat.".into(),
            word_count: 2,
            latencies: Latencies { capture: 0.0, caption: 0.5, generation: 0.25, total: 0.75 },
            augmenters: vec![AugmenterKind::Personhood],
            inference_steps: 4,
            seed: 7,
        });
        assert_eq!(
            serde_json::to_string(&msg).unwrap(),
            r#"{"type":"transform","seq":3,"frame_id":7,"caption":"a cat.","word_count":2,"latencies":{"capture":0.0,"caption":0.5,"generation":0.25,"total":0.75},"augmenters":["personhood"],"inference_steps":4,"seed":7}"#
        );
    }

    #[test]
    fn client_patch_parses() {
        let m: ClientMessage =
            serde_json::from_str(r#"{"type":"config_patch","request_id":"r1","patch":{"inference_steps":8}}"#).unwrap();
        let ClientMessage::ConfigPatch { request_id, patch } = m;
        assert_eq!(request_id.as_deref(), Some("r1"));
        assert_eq!(patch.inference_steps, Some(8));
    }
}
